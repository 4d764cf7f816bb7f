//! Deterministic fixture corpora and sources, shared by the test suites
//! and the `selftest` command.

use std::collections::BTreeMap;

use crate::filter::{parse_list, FilterSet};
use crate::label::{label_trace, LabeledTrace, RequestLabel};
use crate::psl::PublicSuffixList;
use crate::trace::{NetworkRequest, PageTrace, ResourceKind, ResourceTag, StackFrame, TagKind};

/// A mixed tag-manager script: one method almost purely tracking, one
/// almost purely functional, so the script itself classifies mixed.
pub const TAG_MANAGER_SCRIPT: &str = "https://tags.site.example/utag.js";

/// Filter list that labels the fixture corpus.
pub const FIXTURE_FILTER_LIST: &str = "! fixture list\n||track.example^\n";

/// The mixed app bundle of the method-blocking fixture.
pub const APP_BUNDLE_SCRIPT: &str = "https://app.site.example/_app-72a3f9.js";

fn frame(script: &str, method: &str) -> StackFrame {
    StackFrame { script_url: script.into(), method_name: method.into(), line: 1, column: 1 }
}

fn request(id: String, url: String, kind: ResourceKind, stack: Vec<StackFrame>) -> NetworkRequest {
    NetworkRequest { request_id: id, url, resource_kind: kind, stack, fetched_script_url: None }
}

/// One-page fixture corpus with pinned participation counts: the script
/// initiates 132 tracking and 160 functional requests; method `loader`
/// (131, 1), method `fireCORS` (1, 159).
pub fn tag_manager_corpus() -> Vec<PageTrace> {
    let mut requests = Vec::new();
    requests.push(NetworkRequest {
        request_id: "fetch-utag".into(),
        url: TAG_MANAGER_SCRIPT.into(),
        resource_kind: ResourceKind::Script,
        stack: vec![],
        fetched_script_url: Some(TAG_MANAGER_SCRIPT.into()),
    });
    for i in 0..131 {
        requests.push(request(
            format!("loader-t{i:03}"),
            format!("https://track.example/pixel/{i}"),
            ResourceKind::Image,
            vec![frame(TAG_MANAGER_SCRIPT, "loader")],
        ));
    }
    requests.push(request(
        "fire-t000".into(),
        "https://track.example/cors/0".into(),
        ResourceKind::Xhr,
        vec![frame(TAG_MANAGER_SCRIPT, "fireCORS")],
    ));
    requests.push(request(
        "loader-f000".into(),
        "https://cdn.site.example/loader/data".into(),
        ResourceKind::Xhr,
        vec![frame(TAG_MANAGER_SCRIPT, "loader")],
    ));
    for i in 0..159 {
        requests.push(request(
            format!("fire-f{i:03}"),
            format!("https://cdn.site.example/cors/{i}"),
            ResourceKind::Xhr,
            vec![frame(TAG_MANAGER_SCRIPT, "fireCORS")],
        ));
    }
    let tags = vec![
        ResourceTag { tag_kind: TagKind::Script, src_url: TAG_MANAGER_SCRIPT.into() },
        ResourceTag { tag_kind: TagKind::Img, src_url: "https://cdn.site.example/cors/0".into() },
        ResourceTag { tag_kind: TagKind::Img, src_url: "https://static.site.example/logo.png".into() },
    ];
    vec![PageTrace {
        page_url: "https://www.site.example/".into(),
        crawl_seconds: 20.0,
        requests,
        tags,
    }]
}

pub fn fixture_filter_set() -> FilterSet {
    let (set, report) = parse_list(FIXTURE_FILTER_LIST, "fixture");
    debug_assert!(report.rejected.is_empty());
    set
}

pub fn tag_manager_labeled_corpus() -> Vec<LabeledTrace> {
    let set = fixture_filter_set();
    let psl = PublicSuffixList::bundled();
    tag_manager_corpus().iter().map(|t| label_trace(t, &set, psl)).collect()
}

/// r0 fetches a.js; r1 and r2 run with a.js in-stack. Blocking a.js
/// must remove all three.
pub fn fetch_chain_trace() -> PageTrace {
    PageTrace {
        page_url: "https://site.example/".into(),
        crawl_seconds: 20.0,
        requests: vec![
            NetworkRequest {
                request_id: "r0".into(),
                url: "https://site.example/a.js".into(),
                resource_kind: ResourceKind::Script,
                stack: vec![],
                fetched_script_url: Some("https://site.example/a.js".into()),
            },
            request(
                "r1".into(),
                "https://api.site.example/data".into(),
                ResourceKind::Xhr,
                vec![frame("https://site.example/a.js", "load")],
            ),
            request(
                "r2".into(),
                "https://img.site.example/banner.png".into(),
                ResourceKind::Image,
                vec![frame("https://site.example/a.js", "render")],
            ),
        ],
        tags: vec![ResourceTag {
            tag_kind: TagKind::Script,
            src_url: "https://site.example/a.js".into(),
        }],
    }
}

/// Mixed-bundle page: method `u` initiates the tracking requests, the
/// bundle's other methods initiate functional ones.
pub fn app_bundle_labeled_trace() -> LabeledTrace {
    let mut requests = Vec::new();
    for i in 0..4 {
        requests.push(request(
            format!("u-t{i}"),
            format!("https://track.example/collect/{i}"),
            ResourceKind::Xhr,
            vec![frame(APP_BUNDLE_SCRIPT, "u")],
        ));
    }
    requests.push(request(
        "stats-f0".into(),
        "https://app.site.example/api/stats".into(),
        ResourceKind::Xhr,
        vec![frame(APP_BUNDLE_SCRIPT, "populateStats")],
    ));
    requests.push(request(
        "media-f0".into(),
        "https://media.site.example/clip.mp4".into(),
        ResourceKind::Media,
        vec![frame(APP_BUNDLE_SCRIPT, "addMedia")],
    ));
    // a request where u sits above another method in the stack; the
    // initiator method also serves functional traffic, so only u itself
    // is tracking-class
    requests.push(request(
        "u-t4".into(),
        "https://track.example/collect/deep".into(),
        ResourceKind::Xhr,
        vec![frame(APP_BUNDLE_SCRIPT, "sendBeacon"), frame(APP_BUNDLE_SCRIPT, "u")],
    ));
    requests.push(request(
        "beacon-f0".into(),
        "https://app.site.example/api/beacon-ok".into(),
        ResourceKind::Xhr,
        vec![frame(APP_BUNDLE_SCRIPT, "sendBeacon")],
    ));
    let trace = PageTrace {
        page_url: "https://app.site.example/".into(),
        crawl_seconds: 20.0,
        requests,
        tags: vec![],
    };
    let labels: BTreeMap<String, RequestLabel> = trace
        .requests
        .iter()
        .map(|r| {
            let label = if r.url.starts_with("https://track.example/") {
                RequestLabel::Tracking
            } else {
                RequestLabel::Functional
            };
            (r.request_id.clone(), label)
        })
        .collect();
    LabeledTrace { trace, labels, deciding_rule: BTreeMap::new() }
}

/// One request whose stack touches two methods of the same script: the
/// script participates once, the methods once each.
pub fn multi_method_stack_labeled_trace() -> LabeledTrace {
    let script = "https://site.example/one.js";
    let trace = PageTrace {
        page_url: "https://site.example/".into(),
        crawl_seconds: 20.0,
        requests: vec![request(
            "r0".into(),
            "https://api.site.example/x".into(),
            ResourceKind::Xhr,
            vec![frame(script, "inner"), frame(script, "outer")],
        )],
        tags: vec![],
    };
    let labels =
        trace.requests.iter().map(|r| (r.request_id.clone(), RequestLabel::Functional)).collect();
    LabeledTrace { trace, labels, deciding_rule: BTreeMap::new() }
}

/// The mixed-bundle method that initiates tracking requests; renaming
/// its definition is the method-blocking mechanism under test.
pub const MIXED_BUNDLE_SNIPPET: &str = "u = function(e) {\n    return fetch(e).then(c.cg).then((function(e) { return e || {} }))\n};\n";

/// Analytics-style pair of request-initiating methods: an XHR sender
/// and a tracking-pixel injector.
pub const ANALYTICS_SNIPPET: &str = r#"wd = function(a, b, c, d) {
    var e = O.XMLHttpRequest;
    if (!e) return !1;
    var g = new e;
    if (!("withCredentials" in g)) return !1;
    a = a.replace(/^http:/, "https:");
    g.open("POST", a, !0);
    g.withCredentials = !0;
    g.setRequestHeader("Content-Type", "text/plain");
    g.onreadystatechange = function() {
      if (4 == g.readyState) {
        if (d && "text/plain" === g.getResponseHeader("Content-Type")) try {
          Ea(d, g.responseText, c)
        }
        catch (ca) {
          ge("xhr",
            "rsp"), c()
        } else c();
        g = null}};
    g.send(b);
    return 0}
ta = function(a) {
    var b = M.createElement("img");
    b.width = 1;
    b.height = 1;
    b.src = a;
    return b}
"#;
