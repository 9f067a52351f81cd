use serde::Serialize;

use super::ast::SourceSpan;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Keyword,
    Ident,
    Number,
    String,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub lexeme: String,
    pub span: SourceSpan,
    /// Byte range of the lexeme in the source.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is(&self, kind: TokenKind, lexeme: &str) -> bool {
        self.kind == kind && self.lexeme == lexeme
    }

    pub fn is_punct(&self, lexeme: &str) -> bool {
        self.is(TokenKind::Punct, lexeme)
    }

    pub fn is_keyword(&self, lexeme: &str) -> bool {
        self.is(TokenKind::Keyword, lexeme)
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "anonymous", "as", "assembly", "break", "calldata", "catch", "constant",
    "constructor", "continue", "contract", "delete", "do", "else", "emit", "enum", "error",
    "event", "external", "fallback", "false", "for", "function", "if", "immutable", "import",
    "indexed", "interface", "internal", "is", "library", "mapping", "memory", "modifier", "new",
    "override", "payable", "pragma", "private", "public", "pure", "receive", "return", "returns",
    "storage", "struct", "true", "try", "type", "unchecked", "using", "var", "view", "virtual",
    "while",
];

pub const UNITS: &[&str] = &[
    "wei", "gwei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks",
    "years",
];

/// `int`, `uint8`, `bytes32`, `address`, ...
pub fn is_elementary_type(word: &str) -> bool {
    fn sized(rest: &str, lo: u32, hi: u32, step: u32) -> bool {
        rest.is_empty()
            || (!rest.starts_with('0')
                && rest.parse::<u32>().is_ok_and(|n| n >= lo && n <= hi && n % step == 0))
    }
    match word {
        "bool" | "address" | "string" | "byte" | "bytes" | "fixed" | "ufixed" => true,
        _ => {
            if let Some(rest) = word.strip_prefix("uint") {
                sized(rest, 8, 256, 8)
            } else if let Some(rest) = word.strip_prefix("int") {
                sized(rest, 8, 256, 8)
            } else if let Some(rest) = word.strip_prefix("bytes") {
                !rest.is_empty() && sized(rest, 1, 32, 1)
            } else {
                false
            }
        }
    }
}

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word) || UNITS.contains(&word) || is_elementary_type(word)
}

// Longest match first.
const PUNCTS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "**", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "|=", "&=", "^=", "=>", "<<", ">>", ":=", "+", "-", "*", "/", "%", "<", ">",
    "=", "!", "&", "|", "^", "~", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{", "}",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> (u32, u32) {
        (self.line, self.col)
    }
}

/// Split `source` into tokens, skipping whitespace and comments.
///
/// Every byte of the source is either inside exactly one token or part of
/// skipped whitespace/comment text.
pub fn tokenize(source: &str) -> Result<Vec<Token>> {
    let mut cur = Cursor { src: source, pos: 0, line: 1, col: 1 };
    let mut tokens = Vec::new();

    loop {
        // trivia
        loop {
            match (cur.peek(), cur.peek_at(1)) {
                (Some(c), _) if c.is_whitespace() => {
                    cur.bump();
                }
                (Some('/'), Some('/')) => {
                    while cur.peek().is_some_and(|c| c != '\n') {
                        cur.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let (l, c) = cur.here();
                    cur.bump();
                    cur.bump();
                    loop {
                        match cur.peek() {
                            None => {
                                return Err(Error::Unterminated {
                                    span: SourceSpan::new(l, c, l, c + 1),
                                    what: "block comment",
                                })
                            }
                            Some('*') if cur.peek_at(1) == Some('/') => {
                                cur.bump();
                                cur.bump();
                                break;
                            }
                            Some(_) => {
                                cur.bump();
                            }
                        }
                    }
                }
                _ => break,
            }
        }

        let Some(c) = cur.peek() else { break };
        let start = cur.pos;
        let (sl, sc) = cur.here();

        let kind = if c.is_ascii_alphabetic() || c == '_' || c == '$' {
            while cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$') {
                cur.bump();
            }
            if is_keyword(&source[start..cur.pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            }
        } else if c.is_ascii_digit() {
            lex_number(&mut cur);
            TokenKind::Number
        } else if c == '"' || c == '\'' {
            cur.bump();
            loop {
                match cur.peek() {
                    None | Some('\n') => {
                        return Err(Error::Unterminated {
                            span: SourceSpan::new(sl, sc, sl, sc),
                            what: "string literal",
                        })
                    }
                    Some('\\') => {
                        cur.bump();
                        cur.bump();
                    }
                    Some(q) if q == c => {
                        cur.bump();
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            TokenKind::String
        } else if let Some(p) = PUNCTS.iter().find(|p| cur.rest().starts_with(**p)) {
            for _ in 0..p.len() {
                cur.bump();
            }
            TokenKind::Punct
        } else {
            return Err(Error::Lex { span: SourceSpan::new(sl, sc, sl, sc), ch: c });
        };

        let (_, ec) = cur.here();
        tokens.push(Token {
            kind,
            lexeme: source[start..cur.pos].to_string(),
            span: SourceSpan::new(sl, sc, sl, ec - 1),
            start,
            end: cur.pos,
        });
    }

    Ok(tokens)
}

fn lex_number(cur: &mut Cursor<'_>) {
    if cur.peek() == Some('0') && matches!(cur.peek_at(1), Some('x' | 'X')) {
        cur.bump();
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_hexdigit() || c == '_') {
            cur.bump();
        }
        return;
    }
    while cur.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
        cur.bump();
    }
    if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_digit() || c == '_') {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E'))
        && (cur.peek_at(1).is_some_and(|c| c.is_ascii_digit())
            || (cur.peek_at(1) == Some('-') && cur.peek_at(2).is_some_and(|c| c.is_ascii_digit())))
    {
        cur.bump();
        if cur.peek() == Some('-') {
            cur.bump();
        }
        while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
        }
    }
}

/// Maps line/column spans back to byte ranges of the source text.
pub struct LineIndex<'a> {
    source: &'a str,
    line_starts: Vec<usize>,
}

impl<'a> LineIndex<'a> {
    pub fn new(source: &'a str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(source.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex { source, line_starts }
    }

    fn offset(&self, line: u32, col: u32) -> Option<usize> {
        let start = *self.line_starts.get(line as usize - 1)?;
        let text = &self.source[start..];
        let mut chars = text.char_indices();
        let (i, _) = chars.nth(col as usize - 1)?;
        Some(start + i)
    }

    /// Text covered by `span` (inclusive of the final character).
    pub fn slice(&self, span: SourceSpan) -> Option<&'a str> {
        let lo = self.offset(span.start_line, span.start_col)?;
        let last = self.offset(span.end_line, span.end_col)?;
        let width = self.source[last..].chars().next()?.len_utf8();
        Some(&self.source[lo..last + width])
    }

    pub fn line_count(&self) -> usize {
        self.line_starts.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src).unwrap().into_iter().map(|t| (t.kind, t.lexeme)).collect()
    }

    #[test]
    fn minimal_declaration() {
        assert_eq!(
            kinds("int x;"),
            vec![
                (TokenKind::Keyword, "int".into()),
                (TokenKind::Ident, "x".into()),
                (TokenKind::Punct, ";".into())
            ]
        );
    }

    #[test]
    fn assignment_has_six_tokens() {
        let toks = tokenize("x = x + 1;").unwrap();
        assert_eq!(toks.len(), 6);
        assert_eq!(toks.last().unwrap().lexeme, ";");
    }

    #[test]
    fn comments_are_skipped() {
        let toks = tokenize("/*c*/ a").unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].kind, TokenKind::Ident);
        assert_eq!(toks[0].lexeme, "a");
        assert_eq!(toks[0].span, SourceSpan::new(1, 7, 1, 7));
    }

    #[test]
    fn line_comment_keeps_line_numbers() {
        let toks = tokenize("// header\npragma solidity ^0.4.18;\nx").unwrap();
        assert_eq!(toks.last().unwrap().span.start_line, 3);
    }

    #[test]
    fn illegal_character() {
        match tokenize("a # b") {
            Err(Error::Lex { span, ch }) => {
                assert_eq!(ch, '#');
                assert_eq!((span.start_line, span.start_col), (1, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unterminated_comment_and_string() {
        assert!(matches!(tokenize("a /* b"), Err(Error::Unterminated { .. })));
        assert!(matches!(tokenize("\"abc"), Err(Error::Unterminated { .. })));
    }

    #[test]
    fn longest_punct_match() {
        let lex: Vec<_> = kinds("a >>= b ** c != d").into_iter().map(|(_, l)| l).collect();
        assert_eq!(lex, ["a", ">>=", "b", "**", "c", "!=", "d"]);
    }

    #[test]
    fn numbers_units_and_types() {
        let toks = kinds("3.68 0xff 1e18 2 days uint256 bytes32 uint7");
        assert_eq!(toks[0], (TokenKind::Number, "3.68".into()));
        assert_eq!(toks[1], (TokenKind::Number, "0xff".into()));
        assert_eq!(toks[2], (TokenKind::Number, "1e18".into()));
        assert_eq!(toks[4], (TokenKind::Keyword, "days".into()));
        assert_eq!(toks[5].0, TokenKind::Keyword);
        assert_eq!(toks[6].0, TokenKind::Keyword);
        assert_eq!(toks[7].0, TokenKind::Ident);
    }

    #[test]
    fn line_index_slices_spans() {
        let src = "a\n  s = \"é\" + 1;\n";
        let toks = tokenize(src).unwrap();
        let idx = LineIndex::new(src);
        for t in &toks {
            assert_eq!(idx.slice(t.span).unwrap(), t.lexeme);
        }
    }
}
