//! Minimal Java lexer.
//!
//! Produces significant tokens (literals, identifiers, punctuation) with
//! byte spans into the original source; whitespace and comments are skipped
//! but never crossed silently by multi-character tokens. String and char
//! literals are decoded to their runtime values, including escape sequences,
//! octal escapes, and `\uXXXX` (with surrogate pairs combined).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LexError {
    #[error("unterminated {what} starting at byte {start}")]
    Unterminated { what: &'static str, start: usize },
    #[error("invalid escape sequence at byte {pos}")]
    BadEscape { pos: usize },
    #[error("unpaired UTF-16 surrogate in literal at byte {pos}")]
    LoneSurrogate { pos: usize },
    #[error("malformed numeric literal at byte {pos}")]
    BadNumber { pos: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// Decoded string value.
    StringLit(String),
    /// UTF-16 code unit; kept raw so surrogate halves survive lexing.
    CharLit(u16),
    IntLit(i128),
    /// Floating literal; never folded, kept opaque.
    FloatLit,
    Ident(String),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub start: usize,
    pub end: usize,
}

pub fn lex(source: &str) -> Result<Vec<Token>, LexError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0usize;

    while pos < bytes.len() {
        let b = bytes[pos];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' | 0x0c => {
                pos += 1;
            }
            b'/' if bytes.get(pos + 1) == Some(&b'/') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            b'/' if bytes.get(pos + 1) == Some(&b'*') => {
                let start = pos;
                pos += 2;
                loop {
                    if pos + 1 >= bytes.len() {
                        return Err(LexError::Unterminated {
                            what: "block comment",
                            start,
                        });
                    }
                    if bytes[pos] == b'*' && bytes[pos + 1] == b'/' {
                        pos += 2;
                        break;
                    }
                    pos += 1;
                }
            }
            b'"' => {
                let start = pos;
                let (value, end) = lex_string(source, pos)?;
                tokens.push(Token {
                    kind: TokenKind::StringLit(value),
                    start,
                    end,
                });
                pos = end;
            }
            b'\'' => {
                let start = pos;
                let (unit, end) = lex_char(source, pos)?;
                tokens.push(Token {
                    kind: TokenKind::CharLit(unit),
                    start,
                    end,
                });
                pos = end;
            }
            b'0'..=b'9' => {
                let start = pos;
                let (kind, end) = lex_number(source, pos)?;
                tokens.push(Token { kind, start, end });
                pos = end;
            }
            b'.' if bytes.get(pos + 1).is_some_and(|c| c.is_ascii_digit()) => {
                let start = pos;
                let (_, end) = lex_number(source, pos)?;
                tokens.push(Token {
                    kind: TokenKind::FloatLit,
                    start,
                    end,
                });
                pos = end;
            }
            _ => {
                let ch = source[pos..].chars().next().expect("in bounds");
                if ch.is_alphabetic() || ch == '_' || ch == '$' {
                    let start = pos;
                    let mut end = pos;
                    for c in source[pos..].chars() {
                        if c.is_alphanumeric() || c == '_' || c == '$' {
                            end += c.len_utf8();
                        } else {
                            break;
                        }
                    }
                    tokens.push(Token {
                        kind: TokenKind::Ident(source[start..end].to_string()),
                        start,
                        end,
                    });
                    pos = end;
                } else {
                    tokens.push(Token {
                        kind: TokenKind::Punct(ch),
                        start: pos,
                        end: pos + ch.len_utf8(),
                    });
                    pos += ch.len_utf8();
                }
            }
        }
    }
    Ok(tokens)
}

/// Decodes one escape sequence starting after the backslash. Returns the
/// UTF-16 code unit and the byte position after the escape.
fn lex_escape(source: &str, backslash: usize) -> Result<(u16, usize), LexError> {
    let bytes = source.as_bytes();
    let pos = backslash + 1;
    let Some(&b) = bytes.get(pos) else {
        return Err(LexError::BadEscape { pos: backslash });
    };
    match b {
        b'b' => Ok((0x08, pos + 1)),
        b't' => Ok((0x09, pos + 1)),
        b'n' => Ok((0x0a, pos + 1)),
        b'f' => Ok((0x0c, pos + 1)),
        b'r' => Ok((0x0d, pos + 1)),
        b'"' => Ok((0x22, pos + 1)),
        b'\'' => Ok((0x27, pos + 1)),
        b'\\' => Ok((0x5c, pos + 1)),
        b'u' => {
            // The JLS allows any number of u's: \uuuu0041.
            let mut p = pos;
            while bytes.get(p) == Some(&b'u') {
                p += 1;
            }
            let hex = source.get(p..p + 4).filter(|h| h.is_ascii());
            let Some(hex) = hex else {
                return Err(LexError::BadEscape { pos: backslash });
            };
            let unit =
                u16::from_str_radix(hex, 16).map_err(|_| LexError::BadEscape { pos: backslash })?;
            Ok((unit, p + 4))
        }
        b'0'..=b'7' => {
            // Octal escape: up to three digits, max \377.
            let mut value: u16 = 0;
            let mut p = pos;
            let mut digits = 0;
            while digits < 3 {
                match bytes.get(p) {
                    Some(&d) if d.is_ascii_digit() && d <= b'7' => {
                        let next = value * 8 + (d - b'0') as u16;
                        if next > 0o377 {
                            break;
                        }
                        value = next;
                        p += 1;
                        digits += 1;
                    }
                    _ => break,
                }
            }
            Ok((value, p))
        }
        _ => Err(LexError::BadEscape { pos: backslash }),
    }
}

fn lex_string(source: &str, open: usize) -> Result<(String, usize), LexError> {
    let bytes = source.as_bytes();
    let mut units: Vec<u16> = Vec::new();
    let mut pos = open + 1;
    loop {
        let Some(&b) = bytes.get(pos) else {
            return Err(LexError::Unterminated {
                what: "string literal",
                start: open,
            });
        };
        match b {
            b'"' => {
                let value = String::from_utf16(&units)
                    .map_err(|_| LexError::LoneSurrogate { pos: open })?;
                return Ok((value, pos + 1));
            }
            b'\n' | b'\r' => {
                return Err(LexError::Unterminated {
                    what: "string literal",
                    start: open,
                })
            }
            b'\\' => {
                let (unit, next) = lex_escape(source, pos)?;
                units.push(unit);
                pos = next;
            }
            _ => {
                let ch = source[pos..].chars().next().expect("in bounds");
                let mut buf = [0u16; 2];
                units.extend_from_slice(ch.encode_utf16(&mut buf));
                pos += ch.len_utf8();
            }
        }
    }
}

fn lex_char(source: &str, open: usize) -> Result<(u16, usize), LexError> {
    let bytes = source.as_bytes();
    let pos = open + 1;
    let Some(&b) = bytes.get(pos) else {
        return Err(LexError::Unterminated {
            what: "char literal",
            start: open,
        });
    };
    let (unit, after) = match b {
        b'\\' => lex_escape(source, pos)?,
        b'\'' | b'\n' | b'\r' => {
            return Err(LexError::Unterminated {
                what: "char literal",
                start: open,
            })
        }
        _ => {
            let ch = source[pos..].chars().next().expect("in bounds");
            let mut buf = [0u16; 2];
            let units = ch.encode_utf16(&mut buf);
            if units.len() != 1 {
                // An astral char needs two UTF-16 units and cannot sit in a
                // single Java char literal.
                return Err(LexError::LoneSurrogate { pos });
            }
            (units[0], pos + ch.len_utf8())
        }
    };
    if bytes.get(after) != Some(&b'\'') {
        return Err(LexError::Unterminated {
            what: "char literal",
            start: open,
        });
    }
    Ok((unit, after + 1))
}

fn lex_number(source: &str, start: usize) -> Result<(TokenKind, usize), LexError> {
    let bytes = source.as_bytes();
    let mut pos = start;

    if bytes[pos] == b'0' && matches!(bytes.get(pos + 1), Some(b'x') | Some(b'X')) {
        pos += 2;
        let digits_start = pos;
        while bytes
            .get(pos)
            .is_some_and(|b| b.is_ascii_hexdigit() || *b == b'_')
        {
            pos += 1;
        }
        let digits: String = source[digits_start..pos].replace('_', "");
        if digits.is_empty() {
            return Err(LexError::BadNumber { pos: start });
        }
        let value =
            i128::from_str_radix(&digits, 16).map_err(|_| LexError::BadNumber { pos: start })?;
        if matches!(bytes.get(pos), Some(b'l') | Some(b'L')) {
            pos += 1;
        }
        return Ok((TokenKind::IntLit(value), pos));
    }

    while bytes
        .get(pos)
        .is_some_and(|b| b.is_ascii_digit() || *b == b'_')
    {
        pos += 1;
    }
    let mut is_float = false;
    if bytes.get(pos) == Some(&b'.') && bytes.get(pos + 1).is_some_and(|b| b.is_ascii_digit()) {
        is_float = true;
        pos += 1;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
    } else if start < pos && bytes.get(pos) == Some(&b'.') && bytes[start].is_ascii_digit() {
        // "1." with no following digit is still a float literal in Java.
        is_float = true;
        pos += 1;
    }
    if matches!(bytes.get(pos), Some(b'e') | Some(b'E'))
        && (bytes.get(pos + 1).is_some_and(|b| b.is_ascii_digit())
            || (matches!(bytes.get(pos + 1), Some(b'+') | Some(b'-'))
                && bytes.get(pos + 2).is_some_and(|b| b.is_ascii_digit())))
    {
        is_float = true;
        pos += 1;
        if matches!(bytes.get(pos), Some(b'+') | Some(b'-')) {
            pos += 1;
        }
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
    }
    match bytes.get(pos) {
        Some(b'f') | Some(b'F') | Some(b'd') | Some(b'D') => {
            is_float = true;
            pos += 1;
        }
        Some(b'l') | Some(b'L') if !is_float => {
            let digits: String = source[start..pos].replace('_', "");
            let value = parse_int_digits(&digits, start)?;
            return Ok((TokenKind::IntLit(value), pos + 1));
        }
        _ => {}
    }
    if is_float {
        return Ok((TokenKind::FloatLit, pos));
    }
    let digits: String = source[start..pos].replace('_', "");
    let value = parse_int_digits(&digits, start)?;
    Ok((TokenKind::IntLit(value), pos))
}

/// Decimal, or octal when there is a leading zero (Java's `017` is 15).
fn parse_int_digits(digits: &str, at: usize) -> Result<i128, LexError> {
    if digits.len() > 1 && digits.starts_with('0') {
        return i128::from_str_radix(&digits[1..], 8).map_err(|_| LexError::BadNumber { pos: at });
    }
    digits.parse().map_err(|_| LexError::BadNumber { pos: at })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(source: &str) -> Vec<TokenKind> {
        lex(source).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_basic_statement() {
        let toks = kinds("String s = \"hi\";");
        assert_eq!(
            toks,
            vec![
                TokenKind::Ident("String".into()),
                TokenKind::Ident("s".into()),
                TokenKind::Punct('='),
                TokenKind::StringLit("hi".into()),
                TokenKind::Punct(';'),
            ]
        );
    }

    #[test]
    fn decodes_escapes_in_strings() {
        assert_eq!(
            kinds(r#""a\tb\n\"q\"\\A\101""#),
            vec![TokenKind::StringLit("a\tb\n\"q\"\\AA".into())]
        );
    }

    #[test]
    fn combines_surrogate_pairs_from_unicode_escapes() {
        assert_eq!(kinds(r#""😀""#), vec![TokenKind::StringLit("😀".into())]);
    }

    #[test]
    fn lone_surrogate_in_string_is_an_error() {
        assert!(matches!(
            lex(r#""\uD83D""#),
            Err(LexError::LoneSurrogate { .. })
        ));
    }

    #[test]
    fn char_literals_keep_utf16_units() {
        assert_eq!(kinds(r"'A'"), vec![TokenKind::CharLit(65)]);
        assert_eq!(kinds(r"'\n'"), vec![TokenKind::CharLit(10)]);
        assert_eq!(kinds(r"'\uD83D'"), vec![TokenKind::CharLit(0xD83D)]);
        assert_eq!(kinds(r"'\''"), vec![TokenKind::CharLit(0x27)]);
    }

    #[test]
    fn numbers_decimal_hex_octal_suffixes() {
        assert_eq!(kinds("42"), vec![TokenKind::IntLit(42)]);
        assert_eq!(kinds("0x1F"), vec![TokenKind::IntLit(31)]);
        assert_eq!(kinds("017"), vec![TokenKind::IntLit(15)]);
        assert_eq!(kinds("7L"), vec![TokenKind::IntLit(7)]);
        assert_eq!(kinds("1_000"), vec![TokenKind::IntLit(1000)]);
        assert_eq!(kinds("1.5"), vec![TokenKind::FloatLit]);
        assert_eq!(kinds("2f"), vec![TokenKind::FloatLit]);
        assert_eq!(kinds("1e3"), vec![TokenKind::FloatLit]);
    }

    #[test]
    fn comments_are_skipped() {
        let toks = kinds("a // line \"not a string\"\n/* block\n */ b");
        assert_eq!(
            toks,
            vec![TokenKind::Ident("a".into()), TokenKind::Ident("b".into())]
        );
    }

    #[test]
    fn unterminated_string_and_comment_error() {
        assert!(matches!(
            lex("\"abc\n\""),
            Err(LexError::Unterminated {
                what: "string literal",
                ..
            })
        ));
        assert!(matches!(
            lex("/* never closed"),
            Err(LexError::Unterminated {
                what: "block comment",
                ..
            })
        ));
    }

    #[test]
    fn spans_point_into_source() {
        let src = "x = \"ab\" + 'c';";
        let toks = lex(src).unwrap();
        let lit = toks
            .iter()
            .find(|t| matches!(t.kind, TokenKind::StringLit(_)))
            .unwrap();
        assert_eq!(&src[lit.start..lit.end], "\"ab\"");
    }

    #[test]
    fn dollar_identifiers_and_unicode_idents() {
        assert_eq!(
            kinds("$tmp _x ünïcode"),
            vec![
                TokenKind::Ident("$tmp".into()),
                TokenKind::Ident("_x".into()),
                TokenKind::Ident("ünïcode".into()),
            ]
        );
    }
}
