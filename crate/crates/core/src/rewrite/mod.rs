//! Method-level JS blocking on source text.
//!
//! Renames a method's definition so its invocations fail at runtime:
//! the call raises, which terminates the code path the method would
//! have driven. Only definition sites are touched; call sites stay as
//! they are, which is the entire point of the mechanism.
//!
//! A tokenizer, not a parser: the transform is lexical, and minified
//! or obfuscated real-world bundles defeat lightweight parsing far more
//! often than lexing.

mod lexer;

pub use lexer::tokenize;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewriteError {
    #[error("tokenize error at byte {offset}: {message}")]
    Tokenize { offset: usize, message: String },
    #[error("replacement identifier {replacement:?} already occurs in the source")]
    RenameCollision { replacement: String },
    #[error("replacement {replacement:?} is not a valid identifier")]
    InvalidReplacement { replacement: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Punctuation,
    String,
    Template,
    Comment,
    Regex,
    Number,
    Whitespace,
}

/// One lexed token; `offset` is the byte position in the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsToken {
    pub kind: TokenKind,
    pub text: String,
    pub offset: usize,
}

impl JsToken {
    pub fn is_significant(&self) -> bool {
        !matches!(self.kind, TokenKind::Whitespace | TokenKind::Comment)
    }
}

/// The three supported definition shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionPattern {
    /// `function NAME(`
    FunctionDecl,
    /// `NAME = function`
    Assignment,
    /// `NAME: function`
    Property,
}

impl fmt::Display for DefinitionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DefinitionPattern::FunctionDecl => "function_decl",
            DefinitionPattern::Assignment => "assignment",
            DefinitionPattern::Property => "property",
        })
    }
}

/// A definition site of the target method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DefinitionSite {
    pub method_name: String,
    pub pattern: DefinitionPattern,
    /// Byte offset of the name token.
    pub name_token_offset: usize,
}

/// A definition-like site the rewriter refuses to rename: ES6 shorthand
/// and class methods have different shadowing semantics, so they are
/// reported instead of silently skipped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnsupportedSite {
    pub method_name: String,
    pub offset: usize,
    pub reason: String,
}

/// Supported definition sites plus unsupported-site warnings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DefinitionScan {
    pub sites: Vec<DefinitionSite>,
    pub unsupported: Vec<UnsupportedSite>,
}

/// All supported definition sites of `method_name`, in source order.
/// Call sites (NAME followed by `(` with no function context) are never
/// returned.
pub fn find_definitions(tokens: &[JsToken], method_name: &str) -> Vec<DefinitionSite> {
    scan_definitions(tokens, method_name).sites
}

pub fn scan_definitions(tokens: &[JsToken], method_name: &str) -> DefinitionScan {
    let sig: Vec<&JsToken> = tokens.iter().filter(|t| t.is_significant()).collect();
    let mut scan = DefinitionScan::default();
    for (i, token) in sig.iter().enumerate() {
        if token.kind != TokenKind::Identifier || token.text != method_name {
            continue;
        }
        let prev = i.checked_sub(1).map(|p| sig[p]);
        let next = sig.get(i + 1).copied();
        let next2 = sig.get(i + 2).copied();

        let is_kw = |t: Option<&JsToken>, kw: &str| {
            t.is_some_and(|t| t.kind == TokenKind::Keyword && t.text == kw)
        };
        let is_punct = |t: Option<&JsToken>, p: &str| {
            t.is_some_and(|t| t.kind == TokenKind::Punctuation && t.text == p)
        };

        if is_kw(prev, "function") && is_punct(next, "(") {
            scan.sites.push(DefinitionSite {
                method_name: method_name.to_string(),
                pattern: DefinitionPattern::FunctionDecl,
                name_token_offset: token.offset,
            });
        } else if is_punct(next, "=") && is_kw(next2, "function") {
            scan.sites.push(DefinitionSite {
                method_name: method_name.to_string(),
                pattern: DefinitionPattern::Assignment,
                name_token_offset: token.offset,
            });
        } else if is_punct(next, ":") && is_kw(next2, "function") {
            scan.sites.push(DefinitionSite {
                method_name: method_name.to_string(),
                pattern: DefinitionPattern::Property,
                name_token_offset: token.offset,
            });
        } else if is_punct(next, "(") && looks_like_shorthand_method(&sig, i) {
            scan.unsupported.push(UnsupportedSite {
                method_name: method_name.to_string(),
                offset: token.offset,
                reason: "shorthand or class method definition".to_string(),
            });
        }
    }
    scan
}

/// `NAME ( params ) {` in a member position. Heuristic: the parameter
/// list must close into a `{`, and the token before NAME must be a
/// member-list boundary or a method modifier.
fn looks_like_shorthand_method(sig: &[&JsToken], name_idx: usize) -> bool {
    let boundary_ok = match name_idx.checked_sub(1).map(|p| sig[p]) {
        None => true,
        Some(prev) => match prev.kind {
            TokenKind::Punctuation => matches!(prev.text.as_str(), "{" | "," | ";" | "}"),
            TokenKind::Identifier => matches!(prev.text.as_str(), "get" | "set" | "async" | "static"),
            TokenKind::Keyword => prev.text == "static",
            _ => false,
        },
    };
    if !boundary_ok {
        return false;
    }
    let mut depth = 0usize;
    for t in &sig[name_idx + 1..] {
        if t.kind != TokenKind::Punctuation {
            continue;
        }
        match t.text.as_str() {
            "(" => depth += 1,
            ")" => {
                depth -= 1;
                if depth == 0 {
                    let after = sig.iter().find(|x| x.offset > t.offset);
                    return after
                        .is_some_and(|a| a.kind == TokenKind::Punctuation && a.text == "{");
                }
            }
            _ => {}
        }
    }
    false
}

/// Default replacement identifier.
pub const DEFAULT_REPLACEMENT: &str = "doNotExecuteMe";

/// Outcome of a rename: the rewritten source, how many definition sites
/// changed, and any unsupported-site warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenameOutcome {
    pub source: String,
    pub sites_renamed: usize,
    pub unsupported_sites: Vec<UnsupportedSite>,
}

pub fn is_valid_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if lexer::is_identifier_start(c) => {}
        _ => return false,
    }
    chars.all(lexer::is_identifier_continue)
}

/// Rename every definition site of `method_name` to `replacement`.
///
/// With no definition sites the source comes back byte-identical with a
/// count of zero (checked before the collision test, so renaming an
/// already-renamed source is an idempotent no-op). Otherwise the
/// replacement must be a fresh identifier.
pub fn rename_method(
    source: &str,
    method_name: &str,
    replacement: &str,
) -> Result<RenameOutcome, RewriteError> {
    let tokens = tokenize(source)?;
    let scan = scan_definitions(&tokens, method_name);
    if scan.sites.is_empty() {
        return Ok(RenameOutcome {
            source: source.to_string(),
            sites_renamed: 0,
            unsupported_sites: scan.unsupported,
        });
    }
    if !is_valid_identifier(replacement) {
        return Err(RewriteError::InvalidReplacement { replacement: replacement.to_string() });
    }
    if tokens
        .iter()
        .any(|t| t.kind == TokenKind::Identifier && t.text == replacement)
    {
        return Err(RewriteError::RenameCollision { replacement: replacement.to_string() });
    }

    let rename_offsets: std::collections::BTreeSet<usize> =
        scan.sites.iter().map(|s| s.name_token_offset).collect();
    let mut out = String::with_capacity(source.len() + scan.sites.len() * replacement.len());
    for token in &tokens {
        if rename_offsets.contains(&token.offset) {
            out.push_str(replacement);
        } else {
            out.push_str(&token.text);
        }
    }
    Ok(RenameOutcome {
        source: out,
        sites_renamed: scan.sites.len(),
        unsupported_sites: scan.unsupported,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{MIXED_BUNDLE_SNIPPET, ANALYTICS_SNIPPET};

    #[test]
    fn bundle_snippet_assignment_site() {
        let tokens = tokenize(MIXED_BUNDLE_SNIPPET).unwrap();
        let sites = find_definitions(&tokens, "u");
        assert_eq!(sites.len(), 1);
        assert_eq!(sites[0].pattern, DefinitionPattern::Assignment);
    }

    #[test]
    fn call_sites_are_not_definitions() {
        let tokens = tokenize("u(1); v = function(){}").unwrap();
        assert!(find_definitions(&tokens, "u").is_empty());
        assert_eq!(find_definitions(&tokens, "v").len(), 1);
    }

    #[test]
    fn analytics_snippet_sites() {
        let tokens = tokenize(ANALYTICS_SNIPPET).unwrap();
        assert_eq!(find_definitions(&tokens, "wd").len(), 1);
        assert_eq!(find_definitions(&tokens, "ta").len(), 1);
        let idents: Vec<&str> = tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Identifier)
            .map(|t| t.text.as_str())
            .collect();
        for expected in ["wd", "ta", "XMLHttpRequest"] {
            assert!(idents.contains(&expected), "missing identifier {expected}");
        }
    }

    #[test]
    fn function_decl_and_property_patterns() {
        let src = "function fd(x) { return x }\nlet o = { p: function () {} };";
        let tokens = tokenize(src).unwrap();
        assert_eq!(find_definitions(&tokens, "fd")[0].pattern, DefinitionPattern::FunctionDecl);
        assert_eq!(find_definitions(&tokens, "p")[0].pattern, DefinitionPattern::Property);
    }

    #[test]
    fn bundle_snippet_rename_is_exact() {
        let outcome = rename_method(MIXED_BUNDLE_SNIPPET, "u", "donotExecuteMe").unwrap();
        assert_eq!(outcome.sites_renamed, 1);
        let expected = MIXED_BUNDLE_SNIPPET.replacen("u = function", "donotExecuteMe = function", 1);
        assert_eq!(outcome.source, expected);
    }

    #[test]
    fn nonexistent_name_is_byte_identity() {
        let outcome = rename_method(MIXED_BUNDLE_SNIPPET, "nosuch", DEFAULT_REPLACEMENT).unwrap();
        assert_eq!(outcome.sites_renamed, 0);
        assert_eq!(outcome.source, MIXED_BUNDLE_SNIPPET);
    }

    #[test]
    fn analytics_snippet_rename_length_delta() {
        let outcome = rename_method(ANALYTICS_SNIPPET, "wd", DEFAULT_REPLACEMENT).unwrap();
        assert_eq!(outcome.sites_renamed, 1);
        let delta = DEFAULT_REPLACEMENT.len() as i64 - "wd".len() as i64;
        assert_eq!(outcome.source.len() as i64 - ANALYTICS_SNIPPET.len() as i64, delta);
    }

    #[test]
    fn rename_is_idempotent() {
        let first = rename_method(MIXED_BUNDLE_SNIPPET, "u", DEFAULT_REPLACEMENT).unwrap();
        assert_eq!(first.sites_renamed, 1);
        let second = rename_method(&first.source, "u", DEFAULT_REPLACEMENT).unwrap();
        assert_eq!(second.sites_renamed, 0);
        assert_eq!(second.source, first.source);
    }

    #[test]
    fn rename_touches_only_name_offsets() {
        let tokens = tokenize(ANALYTICS_SNIPPET).unwrap();
        let sites = find_definitions(&tokens, "ta");
        let outcome = rename_method(ANALYTICS_SNIPPET, "ta", DEFAULT_REPLACEMENT).unwrap();
        // Everything before the (single) site is untouched; everything
        // after is shifted by the length delta but byte-equal.
        let off = sites[0].name_token_offset;
        assert_eq!(&outcome.source[..off], &ANALYTICS_SNIPPET[..off]);
        assert_eq!(
            &outcome.source[off + DEFAULT_REPLACEMENT.len()..],
            &ANALYTICS_SNIPPET[off + "ta".len()..]
        );
    }

    #[test]
    fn collision_is_an_error() {
        let src = "u = function() {}; doNotExecuteMe = 1;";
        let err = rename_method(src, "u", DEFAULT_REPLACEMENT).unwrap_err();
        assert!(matches!(err, RewriteError::RenameCollision { .. }));
    }

    #[test]
    fn invalid_replacement_is_an_error() {
        let err = rename_method("u = function() {}", "u", "1bad").unwrap_err();
        assert!(matches!(err, RewriteError::InvalidReplacement { .. }));
    }

    #[test]
    fn redefinitions_all_renamed() {
        let src = "u = function(){}; u = function(){};";
        let outcome = rename_method(src, "u", DEFAULT_REPLACEMENT).unwrap();
        assert_eq!(outcome.sites_renamed, 2);
        assert!(!outcome.source.contains("u = function"));
    }

    #[test]
    fn shorthand_methods_warn_instead_of_rename() {
        let src = "let o = { m(x) { return x }, n: function(){} };";
        let outcome = rename_method(src, "m", DEFAULT_REPLACEMENT).unwrap();
        assert_eq!(outcome.sites_renamed, 0);
        assert_eq!(outcome.unsupported_sites.len(), 1);
        assert_eq!(outcome.source, src);
    }

    #[test]
    fn string_occurrences_never_rename() {
        let src = "s = \"u = function\"; u = function(){}";
        let outcome = rename_method(src, "u", DEFAULT_REPLACEMENT).unwrap();
        assert_eq!(outcome.sites_renamed, 1);
        assert!(outcome.source.contains("\"u = function\""));
    }
}
