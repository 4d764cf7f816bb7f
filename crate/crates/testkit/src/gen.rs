//! Seeded generators for traces, labels, and (rule, URL) match cases.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use jsblock_core::filter::MatchContext;
use jsblock_core::label::{LabeledTrace, RequestLabel};
use jsblock_core::psl::PublicSuffixList;
use jsblock_core::trace::{
    NetworkRequest, PageTrace, ResourceKind, ResourceTag, StackFrame, TagKind,
};

const HOST_WORDS: &[&str] = &["ads", "track", "cdn", "img", "api", "stat", "media", "tag", "sync"];
const TLDS: &[&str] = &["com", "net", "io", "co.uk", "org"];
const PATH_WORDS: &[&str] = &["banner", "pixel", "collect", "js", "v2", "assets", "Ad", "p"];

fn gen_host(rng: &mut ChaCha8Rng) -> String {
    let labels = rng.gen_range(1..=3);
    let mut parts: Vec<String> = (0..labels)
        .map(|_| {
            let w = HOST_WORDS.choose(rng).unwrap().to_string();
            if rng.gen_bool(0.3) {
                format!("{w}{}", rng.gen_range(0..10))
            } else {
                w
            }
        })
        .collect();
    parts.push(TLDS.choose(rng).unwrap().to_string());
    parts.join(".")
}

fn gen_path(rng: &mut ChaCha8Rng) -> String {
    let segs = rng.gen_range(0..=3);
    let mut path = String::new();
    for _ in 0..segs {
        path.push('/');
        path.push_str(PATH_WORDS.choose(rng).unwrap());
    }
    if path.is_empty() {
        path.push('/');
    }
    if rng.gen_bool(0.3) {
        path.push_str(&format!("?k={}&u=%2Fx", rng.gen_range(0..100)));
    }
    path
}

fn flip_case(rng: &mut ChaCha8Rng, s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphabetic() && rng.gen_bool(0.2) { c.to_ascii_uppercase() } else { c })
        .collect()
}

fn gen_url_with_host(rng: &mut ChaCha8Rng, host: &str) -> String {
    let scheme = if rng.gen_bool(0.8) { "https" } else { "http" };
    let host = if rng.gen_bool(0.3) { flip_case(rng, host) } else { host.to_string() };
    format!("{scheme}://{host}{}", gen_path(rng))
}

pub fn gen_url(rng: &mut ChaCha8Rng) -> String {
    let host = gen_host(rng);
    gen_url_with_host(rng, &host)
}

/// One generated matcher case: rule line plus a request context that has
/// a healthy chance of actually matching it.
#[derive(Debug, Clone)]
pub struct MatchCase {
    pub rule_line: String,
    pub ctx: MatchContext,
}

pub fn gen_match_case(rng: &mut ChaCha8Rng) -> MatchCase {
    let host = gen_host(rng);
    let page_host = if rng.gen_bool(0.3) { host.clone() } else { gen_host(rng) };
    let page_url = format!("https://{page_host}/");

    let mut rule = String::new();
    if rng.gen_bool(0.15) {
        rule.push_str("@@");
    }
    match rng.gen_range(0..5) {
        0 => {
            // host-anchored, maybe a suffix of the host
            let suffix = if rng.gen_bool(0.5) {
                host.clone()
            } else {
                host.split_once('.').map(|(_, rest)| rest.to_string()).unwrap_or(host.clone())
            };
            rule.push_str(&format!("||{suffix}^"));
            if rng.gen_bool(0.3) {
                rule.push_str(PATH_WORDS.choose(rng).unwrap());
                rule.push('*');
            }
        }
        1 => {
            rule.push_str(&format!("|https://{host}/"));
            if rng.gen_bool(0.5) {
                rule.push_str(PATH_WORDS.choose(rng).unwrap());
            }
        }
        2 => {
            // a bare "/word/" would parse as a regex-form rule; keep a
            // wildcard tail so it stays a plain pattern
            let a = PATH_WORDS.choose(rng).unwrap();
            rule.push_str(&format!("/{a}/*"));
            if rng.gen_bool(0.5) {
                rule.push_str(PATH_WORDS.choose(rng).unwrap());
            }
        }
        3 => {
            let a = PATH_WORDS.choose(rng).unwrap();
            rule.push_str(&format!("{a}^"));
        }
        _ => {
            // right-anchored tail
            let a = PATH_WORDS.choose(rng).unwrap();
            rule.push_str(&format!("/{a}|"));
        }
    }
    if rng.gen_bool(0.35) {
        let mut opts: Vec<String> = Vec::new();
        if rng.gen_bool(0.5) {
            opts.push(if rng.gen_bool(0.5) { "third-party" } else { "~third-party" }.to_string());
        }
        if rng.gen_bool(0.5) {
            let kind = ["script", "image", "xhr", "media", "~script"].choose(rng).unwrap();
            opts.push(kind.to_string());
        }
        if rng.gen_bool(0.3) {
            let d = if rng.gen_bool(0.5) { page_host.clone() } else { gen_host(rng) };
            if rng.gen_bool(0.3) {
                opts.push(format!("domain=~{d}"));
            } else {
                opts.push(format!("domain={d}"));
            }
        }
        if !opts.is_empty() {
            rule.push('$');
            rule.push_str(&opts.join(","));
        }
    }

    // Request URL: often on the rule's host so matches actually happen,
    // sometimes with the rule's path words, sometimes unrelated.
    let request_url = match rng.gen_range(0..4) {
        0 | 1 => gen_url_with_host(rng, &host),
        2 => {
            let mut other = gen_host(rng);
            if rng.gen_bool(0.5) {
                other = format!("{}.{host}", HOST_WORDS.choose(rng).unwrap());
            }
            gen_url_with_host(rng, &other)
        }
        _ => gen_url(rng),
    };
    let kind = *[
        ResourceKind::Script,
        ResourceKind::Image,
        ResourceKind::Xhr,
        ResourceKind::Media,
        ResourceKind::Subdocument,
        ResourceKind::Stylesheet,
        ResourceKind::Other,
    ]
    .choose(rng)
    .unwrap();
    let ctx = MatchContext::derive(request_url, page_url, kind, PublicSuffixList::bundled());
    MatchCase { rule_line: rule, ctx }
}

/// Shape of generated traces.
#[derive(Debug, Clone, Copy)]
pub struct TraceParams {
    pub max_requests: usize,
    pub script_pool: usize,
    pub method_pool: usize,
    /// Probability a request is a script delivery (sets fetched_script_url).
    pub fetch_prob: f64,
    /// Probability a request's URL also appears as a tag src.
    pub tag_prob: f64,
    pub max_stack: usize,
}

impl Default for TraceParams {
    fn default() -> Self {
        TraceParams {
            max_requests: 20,
            script_pool: 5,
            method_pool: 4,
            fetch_prob: 0.3,
            tag_prob: 0.25,
            max_stack: 3,
        }
    }
}

const METHODS: &[&str] = &["f", "g", "u", "init", "send"];

fn script_url(k: usize) -> String {
    format!("https://s{k}.scripts.example/app{k}.js")
}

pub fn gen_trace(rng: &mut ChaCha8Rng, params: TraceParams) -> PageTrace {
    let n = rng.gen_range(0..=params.max_requests);
    let mut requests = Vec::with_capacity(n);
    let mut tags = Vec::new();
    for i in 0..n {
        let is_fetch = rng.gen_bool(params.fetch_prob);
        let stack_len = rng.gen_range(0..=params.max_stack);
        let stack: Vec<StackFrame> = (0..stack_len)
            .map(|_| StackFrame {
                script_url: script_url(rng.gen_range(0..params.script_pool)),
                method_name: METHODS[rng.gen_range(0..params.method_pool)].to_string(),
                line: rng.gen_range(1..500),
                column: rng.gen_range(1..200),
            })
            .collect();
        let req = if is_fetch {
            let url = script_url(rng.gen_range(0..params.script_pool));
            NetworkRequest {
                request_id: format!("r{i}"),
                url: url.clone(),
                resource_kind: ResourceKind::Script,
                stack,
                fetched_script_url: Some(url),
            }
        } else {
            NetworkRequest {
                request_id: format!("r{i}"),
                url: gen_url(rng),
                resource_kind: *[
                    ResourceKind::Image,
                    ResourceKind::Xhr,
                    ResourceKind::Media,
                    ResourceKind::Other,
                ]
                .choose(rng)
                .unwrap(),
                stack,
                fetched_script_url: None,
            }
        };
        if rng.gen_bool(params.tag_prob) {
            tags.push(ResourceTag {
                tag_kind: *[
                    TagKind::Img,
                    TagKind::Video,
                    TagKind::Iframe,
                    TagKind::Script,
                    TagKind::Source,
                ]
                .choose(rng)
                .unwrap(),
                src_url: req.url.clone(),
            });
        }
        requests.push(req);
    }
    if rng.gen_bool(0.5) {
        tags.push(ResourceTag {
            tag_kind: TagKind::Img,
            src_url: "https://never.requested.example/logo.png".into(),
        });
    }
    PageTrace {
        page_url: format!("https://{}/", gen_host(rng)),
        crawl_seconds: 20.0,
        requests,
        tags,
    }
}

/// Random labels over a generated trace.
pub fn gen_labeled_trace(rng: &mut ChaCha8Rng, params: TraceParams) -> LabeledTrace {
    let trace = gen_trace(rng, params);
    let labels: BTreeMap<String, RequestLabel> = trace
        .requests
        .iter()
        .map(|r| {
            let label =
                if rng.gen_bool(0.4) { RequestLabel::Tracking } else { RequestLabel::Functional };
            (r.request_id.clone(), label)
        })
        .collect();
    LabeledTrace { trace, labels, deciding_rule: BTreeMap::new() }
}

pub fn gen_labeled_corpus(
    rng: &mut ChaCha8Rng,
    n_traces: usize,
    params: TraceParams,
) -> Vec<LabeledTrace> {
    (0..n_traces).map(|_| gen_labeled_trace(rng, params)).collect()
}
