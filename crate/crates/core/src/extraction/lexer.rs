use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Literal,
    Operator,
    Separator,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
}

impl Token {
    pub fn new(kind: TokenKind, text: impl Into<String>, line: u32) -> Self {
        Token {
            kind,
            text: text.into(),
            line,
        }
    }

    pub fn is(&self, text: &str) -> bool {
        self.text == text && matches!(self.kind, TokenKind::Keyword | TokenKind::Operator | TokenKind::Separator)
    }
}

const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally", "float",
    "for", "goto", "if", "implements", "import", "instanceof", "int", "interface", "long", "native",
    "new", "package", "private", "protected", "public", "return", "short", "static", "strictfp",
    "super", "switch", "synchronized", "this", "throw", "throws", "transient", "try", "void",
    "volatile", "while",
];

const LITERAL_WORDS: &[&str] = &["true", "false", "null"];

// Longest first so the greedy match below picks `>>>=` over `>>`.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<", ">>", "=", "<", ">", "!", "~", "?", ":",
    "+", "-", "*", "/", "&", "|", "^", "%",
];

const SEPARATORS: &[char] = &['(', ')', '{', '}', '[', ']', ';', ',', '.', '@'];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

pub fn is_primitive_type(word: &str) -> bool {
    matches!(
        word,
        "boolean" | "byte" | "char" | "short" | "int" | "long" | "float" | "double" | "void"
    )
}

/// Tokenizes Java source, dropping comments and whitespace.
pub fn tokenize_java(source: &str) -> Result<Vec<Token>> {
    Ok(lex(source)?
        .into_iter()
        .filter(|t| t.kind != TokenKind::Comment)
        .collect())
}

/// Tokenizes Java source, keeping comment tokens.
pub fn lex(source: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line: u32 = 1;

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let start_line = line;

        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            tokens.push(Token::new(TokenKind::Comment, collect(&chars, start, i), start_line));
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            loop {
                if i + 1 >= chars.len() {
                    return Err(Error::Lex {
                        line: start_line,
                        message: "unterminated block comment".into(),
                    });
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    i += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                }
                i += 1;
            }
            tokens.push(Token::new(TokenKind::Comment, collect(&chars, start, i), start_line));
            continue;
        }
        if c == '"' || c == '\'' {
            i += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => {
                        return Err(Error::Lex {
                            line: start_line,
                            message: format!("unterminated {} literal", if c == '"' { "string" } else { "char" }),
                        });
                    }
                    Some('\\') => i += 2,
                    Some(&q) if q == c => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
            tokens.push(Token::new(TokenKind::Literal, collect(&chars, start, i), start_line));
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i = scan_number(&chars, i);
            tokens.push(Token::new(TokenKind::Literal, collect(&chars, start, i), start_line));
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                i += 1;
            }
            let word = collect(&chars, start, i);
            let kind = if LITERAL_WORDS.contains(&word.as_str()) {
                TokenKind::Literal
            } else if is_keyword(&word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            };
            tokens.push(Token::new(kind, word, start_line));
            continue;
        }
        if let Some(op) = OPERATORS.iter().find(|op| matches_at(&chars, i, op)) {
            i += op.chars().count();
            tokens.push(Token::new(TokenKind::Operator, *op, start_line));
            continue;
        }
        if SEPARATORS.contains(&c) {
            i += 1;
            tokens.push(Token::new(TokenKind::Separator, c.to_string(), start_line));
            continue;
        }
        return Err(Error::Lex {
            line: start_line,
            message: format!("unexpected character {c:?}"),
        });
    }
    Ok(tokens)
}

fn collect(chars: &[char], start: usize, end: usize) -> String {
    chars[start..end].iter().collect()
}

fn matches_at(chars: &[char], at: usize, pat: &str) -> bool {
    let mut j = at;
    for pc in pat.chars() {
        if chars.get(j) != Some(&pc) {
            return false;
        }
        j += 1;
    }
    true
}

fn scan_number(chars: &[char], mut i: usize) -> usize {
    if chars[i] == '0' && matches!(chars.get(i + 1), Some('x' | 'X' | 'b' | 'B')) {
        i += 2;
        while i < chars.len() && (chars[i].is_ascii_hexdigit() || chars[i] == '_') {
            i += 1;
        }
    } else {
        while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
            i += 1;
        }
        if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                i += 1;
            }
        }
        if matches!(chars.get(i), Some('e' | 'E')) {
            let mut j = i + 1;
            if matches!(chars.get(j), Some('+' | '-')) {
                j += 1;
            }
            if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                i = j;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
        }
    }
    if matches!(chars.get(i), Some('l' | 'L' | 'f' | 'F' | 'd' | 'D')) {
        i += 1;
    }
    i
}
