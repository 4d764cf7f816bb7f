//! Lossless JS tokenizer.
//!
//! Strings, template literals, comments and regex literals come out as
//! single tokens, so identifiers inside them can never be renamed.
//! Concatenating token texts reproduces the input byte-for-byte.

use super::{JsToken, RewriteError, TokenKind};

const KEYWORDS: &[&str] = &[
    "await", "break", "case", "catch", "class", "const", "continue", "debugger", "default",
    "delete", "do", "else", "enum", "export", "extends", "false", "finally", "for", "function",
    "if", "import", "in", "instanceof", "let", "new", "null", "return", "static", "super",
    "switch", "this", "throw", "true", "try", "typeof", "var", "void", "while", "with", "yield",
];

pub(super) fn is_identifier_start(c: char) -> bool {
    c == '_' || c == '$' || c.is_ascii_alphabetic() || (!c.is_ascii() && c.is_alphabetic())
}

pub(super) fn is_identifier_continue(c: char) -> bool {
    c == '_' || c == '$' || c.is_ascii_alphanumeric() || (!c.is_ascii() && c.is_alphanumeric())
}

/// Tokenize `source` losslessly.
pub fn tokenize(source: &str) -> Result<Vec<JsToken>, RewriteError> {
    let mut lexer = Lexer { src: source, pos: 0, prev_significant: None };
    let mut tokens = Vec::new();
    while let Some(token) = lexer.next_token()? {
        if !matches!(token.kind, TokenKind::Whitespace | TokenKind::Comment) {
            lexer.prev_significant = Some((token.kind, token.text.clone()));
        }
        tokens.push(token);
    }
    Ok(tokens)
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    prev_significant: Option<(TokenKind, String)>,
}

impl<'a> Lexer<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.rest().chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn token(&self, kind: TokenKind, start: usize) -> JsToken {
        JsToken { kind, text: self.src[start..self.pos].to_string(), offset: start }
    }

    fn error(&self, start: usize, message: &str) -> RewriteError {
        RewriteError::Tokenize { offset: start, message: message.to_string() }
    }

    fn next_token(&mut self) -> Result<Option<JsToken>, RewriteError> {
        let start = self.pos;
        let Some(c) = self.peek() else { return Ok(None) };

        if c.is_whitespace() {
            while self.peek().is_some_and(char::is_whitespace) {
                self.bump();
            }
            return Ok(Some(self.token(TokenKind::Whitespace, start)));
        }
        if c == '/' && self.peek2() == Some('/') {
            while self.peek().is_some_and(|c| c != '\n') {
                self.bump();
            }
            return Ok(Some(self.token(TokenKind::Comment, start)));
        }
        if c == '/' && self.peek2() == Some('*') {
            self.bump();
            self.bump();
            loop {
                match self.bump() {
                    Some('*') if self.peek() == Some('/') => {
                        self.bump();
                        return Ok(Some(self.token(TokenKind::Comment, start)));
                    }
                    Some(_) => {}
                    None => return Err(self.error(start, "unterminated block comment")),
                }
            }
        }
        if c == '/' {
            if self.regex_allowed() {
                if let Some(end) = self.scan_regex_end() {
                    self.pos = end;
                    return Ok(Some(self.token(TokenKind::Regex, start)));
                }
            }
            self.bump();
            return Ok(Some(self.token(TokenKind::Punctuation, start)));
        }
        if c == '"' || c == '\'' {
            self.bump();
            loop {
                match self.bump() {
                    Some('\\') => {
                        self.bump();
                    }
                    Some(q) if q == c => return Ok(Some(self.token(TokenKind::String, start))),
                    Some('\n') | Some('\r') | None => {
                        return Err(self.error(start, "unterminated string literal"))
                    }
                    Some(_) => {}
                }
            }
        }
        if c == '`' {
            self.bump();
            self.scan_template_body(start)?;
            return Ok(Some(self.token(TokenKind::Template, start)));
        }
        if c.is_ascii_digit() || (c == '.' && self.peek2().is_some_and(|d| d.is_ascii_digit())) {
            self.scan_number();
            return Ok(Some(self.token(TokenKind::Number, start)));
        }
        if is_identifier_start(c) {
            while self.peek().is_some_and(is_identifier_continue) {
                self.bump();
            }
            let text = &self.src[start..self.pos];
            let kind = if KEYWORDS.contains(&text) { TokenKind::Keyword } else { TokenKind::Identifier };
            return Ok(Some(self.token(kind, start)));
        }
        self.bump();
        Ok(Some(self.token(TokenKind::Punctuation, start)))
    }

    /// Can a `/` start a regex literal here? Value-like predecessors
    /// (identifiers, literals, `)`, `]`, `}`, this/true/false/null/super)
    /// mean division; everything else means regex.
    fn regex_allowed(&self) -> bool {
        match &self.prev_significant {
            None => true,
            Some((TokenKind::Identifier, _))
            | Some((TokenKind::Number, _))
            | Some((TokenKind::String, _))
            | Some((TokenKind::Template, _))
            | Some((TokenKind::Regex, _)) => false,
            Some((TokenKind::Keyword, text)) => {
                !matches!(text.as_str(), "this" | "true" | "false" | "null" | "super")
            }
            Some((TokenKind::Punctuation, text)) => !matches!(text.as_str(), ")" | "]" | "}"),
            _ => true,
        }
    }

    /// End position of a regex literal starting at `self.pos`, or None
    /// when it does not terminate on this line (then `/` is division).
    fn scan_regex_end(&self) -> Option<usize> {
        let mut chars = self.rest().char_indices();
        chars.next(); // opening '/'
        let mut in_class = false;
        let mut end = None;
        while let Some((i, c)) = chars.next() {
            match c {
                '\\' => {
                    chars.next()?;
                }
                '\n' => return None,
                '[' => in_class = true,
                ']' => in_class = false,
                '/' if !in_class => {
                    end = Some(i + 1);
                    break;
                }
                _ => {}
            }
        }
        let mut end = self.pos + end?;
        while self.src[end..].chars().next().is_some_and(is_identifier_continue) {
            end += self.src[end..].chars().next().unwrap().len_utf8();
        }
        Some(end)
    }

    /// Scan a template literal body after the opening backtick.
    /// `${...}` substitutions are swallowed, including nested braces,
    /// strings and templates, so the whole literal is one opaque token.
    fn scan_template_body(&mut self, start: usize) -> Result<(), RewriteError> {
        loop {
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some('`') => return Ok(()),
                Some('$') if self.peek() == Some('{') => {
                    self.bump();
                    self.scan_substitution(start)?;
                }
                Some(_) => {}
                None => return Err(self.error(start, "unterminated template literal")),
            }
        }
    }

    fn scan_substitution(&mut self, start: usize) -> Result<(), RewriteError> {
        let mut depth = 1usize;
        loop {
            match self.bump() {
                Some('{') => depth += 1,
                Some('}') => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                Some(q @ ('"' | '\'')) => loop {
                    match self.bump() {
                        Some('\\') => {
                            self.bump();
                        }
                        Some(c) if c == q => break,
                        Some(_) => {}
                        None => return Err(self.error(start, "unterminated template literal")),
                    }
                },
                Some('`') => self.scan_template_body(start)?,
                Some(_) => {}
                None => return Err(self.error(start, "unterminated template literal")),
            }
        }
    }

    fn scan_number(&mut self) {
        let radix_prefixed = self.peek() == Some('0')
            && matches!(self.peek2(), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B'));
        if radix_prefixed {
            self.bump();
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.bump();
            }
            return;
        }
        let digits = |lexer: &mut Self| {
            while lexer.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
                lexer.bump();
            }
        };
        digits(self);
        if self.peek() == Some('.') {
            self.bump();
            digits(self);
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let mark = self.pos;
            self.bump();
            if matches!(self.peek(), Some('+' | '-')) {
                self.bump();
            }
            if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = mark;
            }
        }
        if self.peek() == Some('n') {
            self.bump();
        }
    }
}
