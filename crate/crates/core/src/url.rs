//! Minimal URL splitting.
//!
//! The trace formats and the filter engine need byte-exact URL handling:
//! a full URL parser would normalize (re-encode, add trailing slashes,
//! strip ports) and break exact-match comparisons between trace fields.
//! This module only locates spans inside the original string.

use std::ops::Range;

/// Byte spans of the interesting parts of a URL string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UrlParts {
    /// Span of the scheme, excluding "://".
    pub scheme: Range<usize>,
    /// Span of the hostname, excluding userinfo, port and brackets.
    pub host: Range<usize>,
}

/// Split `url` into scheme and host spans.
///
/// Returns `None` when there is no `scheme://host` shape or the host is
/// empty. Path, query and fragment are whatever follows the authority.
pub fn split_url(url: &str) -> Option<UrlParts> {
    let scheme_end = url.find("://")?;
    if scheme_end == 0 {
        return None;
    }
    if !url[..scheme_end]
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
    {
        return None;
    }
    let authority_start = scheme_end + 3;
    let rest = &url[authority_start..];
    let authority_end = rest
        .find(['/', '?', '#'])
        .map(|i| authority_start + i)
        .unwrap_or(url.len());
    let mut host_start = authority_start;
    let authority = &url[authority_start..authority_end];
    if let Some(at) = authority.rfind('@') {
        host_start = authority_start + at + 1;
    }
    let mut host_end = authority_end;
    let host_str = &url[host_start..host_end];
    if host_str.starts_with('[') {
        // IPv6 literal: host is the bracketed span without the brackets.
        let close = host_str.find(']')?;
        return Some(UrlParts {
            scheme: 0..scheme_end,
            host: host_start + 1..host_start + close,
        });
    }
    if let Some(colon) = host_str.rfind(':') {
        if host_str[colon + 1..].chars().all(|c| c.is_ascii_digit()) {
            host_end = host_start + colon;
        }
    }
    if host_start == host_end {
        return None;
    }
    Some(UrlParts {
        scheme: 0..scheme_end,
        host: host_start..host_end,
    })
}

/// Hostname of `url`, if it has one.
pub fn host_of(url: &str) -> Option<&str> {
    split_url(url).map(|p| &url[p.host])
}

/// Drop the `#fragment` suffix, if any.
pub fn strip_fragment(url: &str) -> &str {
    match url.find('#') {
        Some(i) => &url[..i],
        None => url,
    }
}

/// Drop the `?query` suffix (and any fragment after it), if any.
pub fn strip_query(url: &str) -> &str {
    let no_frag = strip_fragment(url);
    match no_frag.find('?') {
        Some(i) => &no_frag[..i],
        None => no_frag,
    }
}

/// True when the host looks like an IPv4 or IPv6 literal.
pub fn is_ip_literal(host: &str) -> bool {
    if host.contains(':') {
        return host.chars().all(|c| c.is_ascii_hexdigit() || c == ':');
    }
    let mut labels = 0;
    for part in host.split('.') {
        if part.is_empty() || part.len() > 3 || !part.chars().all(|c| c.is_ascii_digit()) {
            return false;
        }
        labels += 1;
    }
    labels == 4
}
