//! Tokenizer for the MiniLang brace-language subset.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Dot,
    At,
    /// Any other operator or punctuation, possibly multi-character.
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based source line.
    pub line: u32,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn is(&self, kind: TokenKind) -> bool {
        self.kind == kind
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == text
    }

    pub fn is_ident(&self, text: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Splits source text into tokens. Real-language adapters plug in here.
pub trait Tokenizer {
    fn tokenize(&self, source: &str) -> Vec<Token>;
}

/// The only tokenizer that ships: C/Java-flavoured lexical rules.
#[derive(Debug, Default, Clone, Copy)]
pub struct MiniLangTokenizer;

const MULTI_PUNCT: &[&str] = &[
    ">>>=", "<<=", ">>=", "...", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "->", "::", "<<",
];

impl Tokenizer for MiniLangTokenizer {
    fn tokenize(&self, source: &str) -> Vec<Token> {
        let bytes = source.as_bytes();
        let mut tokens = Vec::new();
        let mut line = 1u32;
        let mut i = 0usize;

        while i < bytes.len() {
            let c = bytes[i];
            if c == b'\n' {
                line += 1;
                i += 1;
                continue;
            }
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            // comments
            if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
                i += 2;
                while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    i += 1;
                }
                i = (i + 2).min(bytes.len());
                continue;
            }

            let start = i;
            let start_line = line;
            let kind = if c.is_ascii_alphabetic() || c == b'_' {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Ident
            } else if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
                i += 1;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'_') {
                    i += 1;
                }
                TokenKind::Number
            } else if c == b'"' || c == b'\'' || c == b'`' {
                i += 1;
                while i < bytes.len() && bytes[i] != c {
                    if bytes[i] == b'\\' {
                        i += 1;
                    } else if bytes[i] == b'\n' {
                        if c != b'`' {
                            // unterminated literal ends at the line break
                            break;
                        }
                        line += 1;
                    }
                    i += 1;
                }
                i = (i + 1).min(bytes.len());
                TokenKind::Str
            } else {
                let single = match c {
                    b'{' => Some(TokenKind::LBrace),
                    b'}' => Some(TokenKind::RBrace),
                    b'(' => Some(TokenKind::LParen),
                    b')' => Some(TokenKind::RParen),
                    b'[' => Some(TokenKind::LBracket),
                    b']' => Some(TokenKind::RBracket),
                    b';' => Some(TokenKind::Semi),
                    b',' => Some(TokenKind::Comma),
                    b'@' => Some(TokenKind::At),
                    _ => None,
                };
                if let Some(kind) = single {
                    i += 1;
                    kind
                } else if let Some(op) = MULTI_PUNCT.iter().find(|op| source[i..].starts_with(**op)) {
                    i += op.len();
                    TokenKind::Punct
                } else if c == b'.' {
                    i += 1;
                    TokenKind::Dot
                } else {
                    // one full UTF-8 character
                    let ch_len = source[i..].chars().next().map_or(1, char::len_utf8);
                    i += ch_len;
                    TokenKind::Punct
                }
            };
            tokens.push(Token { kind, text: source[start..i].to_string(), line: start_line, start, end: i });
        }
        tokens
    }
}

/// Words that never name a user identifier.
pub fn is_keyword(word: &str) -> bool {
    matches!(
        word,
        "if" | "else"
            | "for"
            | "while"
            | "do"
            | "switch"
            | "case"
            | "default"
            | "break"
            | "continue"
            | "return"
            | "new"
            | "delete"
            | "this"
            | "self"
            | "super"
            | "null"
            | "nil"
            | "true"
            | "false"
            | "class"
            | "interface"
            | "enum"
            | "struct"
            | "extends"
            | "implements"
            | "throws"
            | "throw"
            | "try"
            | "catch"
            | "finally"
            | "import"
            | "package"
            | "instanceof"
            | "typeof"
            | "function"
            | "goto"
            | "assert"
            | "yield"
            | "await"
            | "async"
            | "in"
            | "of"
    ) || is_modifier(word)
        || is_primitive_type(word)
}

pub fn is_modifier(word: &str) -> bool {
    matches!(
        word,
        "public"
            | "private"
            | "protected"
            | "static"
            | "final"
            | "abstract"
            | "synchronized"
            | "volatile"
            | "transient"
            | "native"
            | "override"
            | "virtual"
            | "inline"
            | "extern"
            | "export"
            | "readonly"
    )
}

pub fn is_primitive_type(word: &str) -> bool {
    matches!(
        word,
        "void"
            | "int"
            | "long"
            | "short"
            | "byte"
            | "char"
            | "boolean"
            | "bool"
            | "float"
            | "double"
            | "unsigned"
            | "signed"
            | "var"
            | "let"
            | "const"
            | "auto"
    )
}

/// `PascalCase` identifiers (leading capital, at least one lowercase letter)
/// are taken to name classes; `ALL_CAPS` names stay variables (constants).
pub fn is_class_like(word: &str) -> bool {
    let mut chars = word.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase()) && word.chars().any(|c| c.is_ascii_lowercase())
}
