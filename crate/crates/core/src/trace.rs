//! Page-load trace data model and its canonical serialized form.
//!
//! A trace is one page load: the network requests observed during the
//! load, each with the call stack of the initiating script code, plus
//! the src-bearing HTML tags present at the end of the load. Everything
//! downstream (labeling, localization, simulation, metrics) speaks in
//! these types.
//!
//! Serialization is canonical: object keys sorted lexicographically,
//! arrays in input order, no insignificant whitespace. `parse_trace`
//! followed by `serialize_trace` is a structural identity, and the
//! serialized form is a byte-level fixpoint.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::url::{host_of, strip_fragment, strip_query};

/// Default crawl duration recorded when a trace omits it.
pub const DEFAULT_CRAWL_SECONDS: f64 = 20.0;

#[derive(Debug, Error)]
pub enum TraceError {
    /// Input is not well-formed JSON.
    #[error("trace parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    /// Well-formed JSON that violates the trace schema or an invariant.
    #[error("trace schema error: {message}")]
    Schema { message: String },
}

impl TraceError {
    fn schema(message: impl Into<String>) -> Self {
        TraceError::Schema { message: message.into() }
    }
}

/// Resource category of a network request, as the crawler reported it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceKind {
    Script,
    Image,
    Subdocument,
    Media,
    Stylesheet,
    Xhr,
    Other,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 7] = [
        ResourceKind::Script,
        ResourceKind::Image,
        ResourceKind::Subdocument,
        ResourceKind::Media,
        ResourceKind::Stylesheet,
        ResourceKind::Xhr,
        ResourceKind::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResourceKind::Script => "script",
            ResourceKind::Image => "image",
            ResourceKind::Subdocument => "subdocument",
            ResourceKind::Media => "media",
            ResourceKind::Stylesheet => "stylesheet",
            ResourceKind::Xhr => "xhr",
            ResourceKind::Other => "other",
        }
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One call-stack frame: the script and method that were executing.
///
/// Unnamed functions are keyed `<anonymous>@L:C` by the producing crawler
/// so every frame yields a stable method unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StackFrame {
    /// Script URL with any `#fragment` stripped.
    pub script_url: String,
    pub method_name: String,
    /// 1-based line of the frame.
    pub line: u32,
    /// 1-based column of the frame.
    pub column: u32,
}

/// A single network request with its initiator call stack.
///
/// `stack[0]` is the innermost frame, i.e. the request initiator. An
/// empty stack means the request was parser- or HTML-initiated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkRequest {
    pub request_id: String,
    pub url: String,
    pub resource_kind: ResourceKind,
    pub stack: Vec<StackFrame>,
    /// Set iff this request delivered a script that later shows up in
    /// some stack; equals `url` with the fragment stripped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fetched_script_url: Option<String>,
}

/// The five src-bearing tag categories tracked for breakage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    Img,
    Video,
    Iframe,
    Script,
    Source,
}

impl TagKind {
    pub const ALL: [TagKind; 5] = [
        TagKind::Img,
        TagKind::Video,
        TagKind::Iframe,
        TagKind::Script,
        TagKind::Source,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TagKind::Img => "img",
            TagKind::Video => "video",
            TagKind::Iframe => "iframe",
            TagKind::Script => "script",
            TagKind::Source => "source",
        }
    }
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An HTML tag with a `src` attribute, as present after page load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceTag {
    pub tag_kind: TagKind,
    pub src_url: String,
}

/// One page load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageTrace {
    pub page_url: String,
    #[serde(default = "default_crawl_seconds")]
    pub crawl_seconds: f64,
    pub requests: Vec<NetworkRequest>,
    pub tags: Vec<ResourceTag>,
}

fn default_crawl_seconds() -> f64 {
    DEFAULT_CRAWL_SECONDS
}

/// A script, or a method within a script. The granularity at which
/// participation is counted and blocking decisions are made.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CodeUnitId {
    Script { script_url: String },
    Method { script_url: String, method_name: String },
}

impl CodeUnitId {
    pub fn script(url: impl Into<String>) -> Self {
        CodeUnitId::Script { script_url: url.into() }
    }

    pub fn method(url: impl Into<String>, name: impl Into<String>) -> Self {
        CodeUnitId::Method { script_url: url.into(), method_name: name.into() }
    }

    pub fn script_url(&self) -> &str {
        match self {
            CodeUnitId::Script { script_url } | CodeUnitId::Method { script_url, .. } => script_url,
        }
    }

    pub fn method_name(&self) -> Option<&str> {
        match self {
            CodeUnitId::Script { .. } => None,
            CodeUnitId::Method { method_name, .. } => Some(method_name),
        }
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            CodeUnitId::Script { .. } => "script",
            CodeUnitId::Method { .. } => "method",
        }
    }
}

impl fmt::Display for CodeUnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodeUnitId::Script { script_url } => write!(f, "{script_url}"),
            CodeUnitId::Method { script_url, method_name } => {
                write!(f, "{script_url}#{method_name}")
            }
        }
    }
}

/// How a request's call stack is attributed to code units.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// Every distinct script and method anywhere in the stack participates.
    #[default]
    FullStack,
    /// Only the innermost frame (the request initiator) participates.
    TopFrame,
}

impl Attribution {
    pub fn as_str(self) -> &'static str {
        match self {
            Attribution::FullStack => "full_stack",
            Attribution::TopFrame => "top_frame",
        }
    }
}


impl fmt::Display for Attribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Code units participating in `request` under the given attribution.
///
/// Set semantics: a script or method appearing in several frames of one
/// stack participates once. An empty stack yields the empty set.
pub fn units_of(request: &NetworkRequest, attribution: Attribution) -> BTreeSet<CodeUnitId> {
    let mut units = BTreeSet::new();
    let frames: &[StackFrame] = match attribution {
        Attribution::FullStack => &request.stack,
        Attribution::TopFrame => {
            if request.stack.is_empty() {
                &[]
            } else {
                &request.stack[..1]
            }
        }
    };
    for frame in frames {
        units.insert(CodeUnitId::script(frame.script_url.clone()));
        units.insert(CodeUnitId::method(frame.script_url.clone(), frame.method_name.clone()));
    }
    units
}

/// Parse a trace document, normalize it, and check every invariant.
///
/// Unknown JSON fields are ignored for forward compatibility. Fragments
/// are stripped from script identities during normalization.
pub fn parse_trace(text: &str) -> Result<PageTrace, TraceError> {
    let mut trace: PageTrace = serde_json::from_str(text).map_err(|e| classify_error(text, e))?;
    normalize_trace(&mut trace);
    validate_trace(&trace)?;
    Ok(trace)
}

fn classify_error(text: &str, err: serde_json::Error) -> TraceError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Syntax | Category::Eof => TraceError::Parse {
            offset: byte_offset(text, err.line(), err.column()),
            message: err.to_string(),
        },
        _ => TraceError::Schema { message: err.to_string() },
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (n, l) in text.split_inclusive('\n').enumerate() {
        if n + 1 == line {
            return offset + column.saturating_sub(1).min(l.len());
        }
        offset += l.len();
    }
    text.len()
}

fn normalize_trace(trace: &mut PageTrace) {
    for req in &mut trace.requests {
        for frame in &mut req.stack {
            if frame.script_url.contains('#') {
                frame.script_url = strip_fragment(&frame.script_url).to_string();
            }
            // Unnamed functions get the stable positional key, so every
            // frame yields a method unit.
            if frame.method_name.is_empty() {
                frame.method_name = format!("<anonymous>@{}:{}", frame.line, frame.column);
            }
        }
        if let Some(fetched) = &req.fetched_script_url {
            if fetched.contains('#') {
                req.fetched_script_url = Some(strip_fragment(fetched).to_string());
            }
        }
    }
}

fn validate_trace(trace: &PageTrace) -> Result<(), TraceError> {
    if host_of(&trace.page_url).is_none() {
        return Err(TraceError::schema(format!(
            "page_url is not a parseable URL: {:?}",
            trace.page_url
        )));
    }
    if !trace.crawl_seconds.is_finite() || trace.crawl_seconds < 0.0 {
        return Err(TraceError::schema("crawl_seconds must be a non-negative number"));
    }
    let mut seen = HashSet::with_capacity(trace.requests.len());
    for req in &trace.requests {
        if req.request_id.is_empty() {
            return Err(TraceError::schema("request_id must be non-empty"));
        }
        if !seen.insert(req.request_id.as_str()) {
            return Err(TraceError::schema(format!(
                "duplicate request_id {:?}",
                req.request_id
            )));
        }
        for frame in &req.stack {
            if frame.script_url.is_empty() {
                return Err(TraceError::schema(format!(
                    "request {:?}: frame script_url must be non-empty",
                    req.request_id
                )));
            }
            if frame.method_name.is_empty() {
                return Err(TraceError::schema(format!(
                    "request {:?}: frame method_name must be non-empty",
                    req.request_id
                )));
            }
            if frame.line == 0 || frame.column == 0 {
                return Err(TraceError::schema(format!(
                    "request {:?}: frame line/column must be positive",
                    req.request_id
                )));
            }
        }
        if req.resource_kind == ResourceKind::Script {
            if let Some(fetched) = &req.fetched_script_url {
                if fetched != strip_fragment(&req.url) {
                    return Err(TraceError::schema(format!(
                        "request {:?}: fetched_script_url {:?} does not equal the request url minus fragment",
                        req.request_id, fetched
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Strip `?query` suffixes from script identities, for corpus studies
/// where query-varying bundles should collapse to one unit.
pub fn strip_script_queries(trace: &mut PageTrace) {
    for req in &mut trace.requests {
        for frame in &mut req.stack {
            if frame.script_url.contains('?') {
                frame.script_url = strip_query(&frame.script_url).to_string();
            }
        }
        if let Some(fetched) = &req.fetched_script_url {
            if fetched.contains('?') {
                req.fetched_script_url = Some(strip_query(fetched).to_string());
            }
        }
    }
}

/// Serialize to the canonical byte form.
///
/// Keys sorted, arrays in input order, compact separators. Deterministic:
/// equal traces yield equal bytes.
pub fn serialize_trace(trace: &PageTrace) -> String {
    canonical_value(trace).to_string()
}

/// The canonical JSON value of a trace. `serde_json`'s default map is
/// ordered, which gives the sorted-key guarantee.
pub fn canonical_value(trace: &PageTrace) -> Value {
    let requests: Vec<Value> = trace
        .requests
        .iter()
        .map(|req| {
            let stack: Vec<Value> = req
                .stack
                .iter()
                .map(|f| {
                    json!({
                        "script_url": f.script_url,
                        "method_name": f.method_name,
                        "line": f.line,
                        "column": f.column,
                    })
                })
                .collect();
            let mut obj = Map::new();
            obj.insert("request_id".into(), Value::String(req.request_id.clone()));
            obj.insert("url".into(), Value::String(req.url.clone()));
            obj.insert("resource_kind".into(), Value::String(req.resource_kind.as_str().into()));
            obj.insert("stack".into(), Value::Array(stack));
            if let Some(fetched) = &req.fetched_script_url {
                obj.insert("fetched_script_url".into(), Value::String(fetched.clone()));
            }
            Value::Object(obj)
        })
        .collect();
    let tags: Vec<Value> = trace
        .tags
        .iter()
        .map(|t| json!({"tag_kind": t.tag_kind.as_str(), "src_url": t.src_url}))
        .collect();
    let mut root = Map::new();
    root.insert("page_url".into(), Value::String(trace.page_url.clone()));
    root.insert("crawl_seconds".into(), number_value(trace.crawl_seconds));
    root.insert("requests".into(), Value::Array(requests));
    root.insert("tags".into(), Value::Array(tags));
    Value::Object(root)
}

/// Integral values print without a decimal point (`20`, not `20.0`).
pub(crate) fn number_value(n: f64) -> Value {
    if n.fract() == 0.0 && n.abs() < i64::MAX as f64 {
        Value::from(n as i64)
    } else {
        Value::from(n)
    }
}
