//! Registrable-domain (eTLD+1) extraction over a vendored public-suffix
//! snapshot, used to decide first- vs third-party request context.

use std::collections::HashSet;
use std::sync::OnceLock;

use thiserror::Error;

use crate::url::{host_of, is_ip_literal};

const BUNDLED_SNAPSHOT: &str = include_str!("../data/public_suffix_snapshot.dat");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("url has no hostname: {url:?}")]
    NoHost { url: String },
    #[error("hostname is malformed: {host:?}")]
    InvalidHost { host: String },
    #[error("hostname {host:?} is itself a public suffix")]
    NoRegistrableDomain { host: String },
}

/// A parsed public-suffix rule set.
#[derive(Debug, Clone, Default)]
pub struct PublicSuffixList {
    exact: HashSet<String>,
    /// `*.X` rules, keyed by the `X` part.
    wildcard: HashSet<String>,
    /// `!X` rules, keyed by the full `X`.
    exception: HashSet<String>,
}

impl PublicSuffixList {
    /// Parse a list in the standard publicsuffix.org dialect.
    pub fn parse(text: &str) -> Self {
        let mut list = PublicSuffixList::default();
        for line in text.lines() {
            let line = line.split_whitespace().next().unwrap_or("");
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            if let Some(rest) = line.strip_prefix('!') {
                list.exception.insert(rest.to_ascii_lowercase());
            } else if let Some(rest) = line.strip_prefix("*.") {
                list.wildcard.insert(rest.to_ascii_lowercase());
            } else {
                list.exact.insert(line.to_ascii_lowercase());
            }
        }
        list
    }

    /// The snapshot vendored with this crate.
    pub fn bundled() -> &'static PublicSuffixList {
        static LIST: OnceLock<PublicSuffixList> = OnceLock::new();
        LIST.get_or_init(|| PublicSuffixList::parse(BUNDLED_SNAPSHOT))
    }

    pub fn rule_count(&self) -> usize {
        self.exact.len() + self.wildcard.len() + self.exception.len()
    }

    /// eTLD+1 of a hostname. IP literals return themselves.
    pub fn registrable_domain_of_host(&self, host: &str) -> Result<String, DomainError> {
        let host = host.strip_suffix('.').unwrap_or(host).to_ascii_lowercase();
        if host.is_empty() {
            return Err(DomainError::InvalidHost { host });
        }
        if is_ip_literal(&host) {
            return Ok(host);
        }
        let labels: Vec<&str> = host.split('.').collect();
        if labels.iter().any(|l| l.is_empty()) {
            return Err(DomainError::InvalidHost { host });
        }
        let suffix_start = self.suffix_start(&labels);
        if suffix_start == 0 {
            return Err(DomainError::NoRegistrableDomain { host });
        }
        Ok(labels[suffix_start - 1..].join("."))
    }

    /// Index of the first label of the public suffix.
    ///
    /// Exception rules win over everything; otherwise the longest
    /// matching rule; otherwise the implicit `*` rule (last label).
    fn suffix_start(&self, labels: &[&str]) -> usize {
        // Longest exception first (smallest start index).
        for start in 0..labels.len() {
            let candidate = labels[start..].join(".");
            if self.exception.contains(&candidate) {
                return start + 1;
            }
        }
        for start in 0..labels.len() {
            let candidate = labels[start..].join(".");
            if self.exact.contains(&candidate) {
                return start;
            }
            if start + 1 < labels.len() && self.wildcard.contains(&labels[start + 1..].join(".")) {
                return start;
            }
        }
        labels.len() - 1
    }
}

/// eTLD+1 of a URL's hostname under the given suffix list.
pub fn registrable_domain(url: &str, psl: &PublicSuffixList) -> Result<String, DomainError> {
    let host = host_of(url).ok_or_else(|| DomainError::NoHost { url: url.to_string() })?;
    psl.registrable_domain_of_host(host)
}

/// Third-party test: registrable domains of the two URLs differ.
///
/// When either side yields no registrable domain the raw hosts are
/// compared instead; a missing host is conservatively third-party.
pub fn is_third_party(request_url: &str, page_url: &str, psl: &PublicSuffixList) -> bool {
    let (req_host, page_host) = match (host_of(request_url), host_of(page_url)) {
        (Some(r), Some(p)) => (r, p),
        _ => return true,
    };
    let req = psl
        .registrable_domain_of_host(req_host)
        .unwrap_or_else(|_| req_host.to_ascii_lowercase());
    let page = psl
        .registrable_domain_of_host(page_host)
        .unwrap_or_else(|_| page_host.to_ascii_lowercase());
    req != page
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubleclick_lookup() {
        let psl = PublicSuffixList::bundled();
        assert_eq!(registrable_domain("https://ad.doubleclick.net/x", psl).unwrap(), "doubleclick.net");
    }

    #[test]
    fn ip_literal_returns_itself() {
        let psl = PublicSuffixList::bundled();
        assert_eq!(registrable_domain("https://127.0.0.1/x", psl).unwrap(), "127.0.0.1");
    }

    #[test]
    fn sld_collisions_stay_distinct() {
        let psl = PublicSuffixList::bundled();
        let a = registrable_domain("https://google.com.uk/", psl).unwrap();
        let b = registrable_domain("https://google.com/", psl).unwrap();
        assert_ne!(a, b);
        assert_eq!(b, "google.com");
    }

    #[test]
    fn multi_label_suffixes() {
        let psl = PublicSuffixList::bundled();
        assert_eq!(
            registrable_domain("https://shop.example.co.uk/p", psl).unwrap(),
            "example.co.uk"
        );
    }

    #[test]
    fn wildcard_and_exception_rules() {
        let psl = PublicSuffixList::bundled();
        // *.ck makes foo.ck a suffix, so bar.foo.ck is registrable.
        assert_eq!(registrable_domain("https://x.bar.foo.ck/", psl).unwrap(), "bar.foo.ck");
        // !www.ck overrides the wildcard.
        assert_eq!(registrable_domain("https://sub.www.ck/", psl).unwrap(), "www.ck");
    }

    #[test]
    fn unknown_tld_uses_implicit_star() {
        let psl = PublicSuffixList::bundled();
        assert_eq!(registrable_domain("https://a.b.veryunknowntld/", psl).unwrap(), "b.veryunknowntld");
    }

    #[test]
    fn bare_suffix_has_no_registrable_domain() {
        let psl = PublicSuffixList::bundled();
        assert_eq!(
            registrable_domain("https://com/", psl),
            Err(DomainError::NoRegistrableDomain { host: "com".into() })
        );
    }

    #[test]
    fn no_host_error() {
        let psl = PublicSuffixList::bundled();
        assert!(matches!(
            registrable_domain("mailto:x@y.com", psl),
            Err(DomainError::NoHost { .. })
        ));
    }

    #[test]
    fn private_section_counts() {
        let psl = PublicSuffixList::bundled();
        assert_eq!(registrable_domain("https://me.github.io/page", psl).unwrap(), "me.github.io");
    }

    #[test]
    fn third_party_decision() {
        let psl = PublicSuffixList::bundled();
        assert!(is_third_party("https://ad.doubleclick.net/p", "https://livescore.com/", psl));
        assert!(!is_third_party("https://api.livescore.com/p", "https://livescore.com/", psl));
    }
}
