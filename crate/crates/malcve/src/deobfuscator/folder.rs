//! Constant folding of obfuscated string constructions.
//!
//! Five shapes are recognized and replaced with plain literals:
//!
//! 1. literal concatenation chains (`"a" + "b" + 'c' + 7`),
//! 2. `new String(new char[]{...})`,
//! 3. `new StringBuilder(...).append(lit)....toString()`,
//! 4. `(char)(K ^ lit)` style decoders (also `+` and `-`),
//! 5. `String.valueOf('c')`.
//!
//! Folding is semantics-first: anything not provably a compile-time constant
//! string (variables, method calls, arithmetic that binds tighter than
//! concatenation, unpaired surrogates) leaves the source untouched. Passes
//! repeat until a fixed point so nested shapes compose; every replacement is
//! itself a plain literal, which makes the whole transform idempotent.

use super::lexer::{lex, LexError, Token, TokenKind};

const MAX_PASSES: usize = 16;

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub text: String,
    pub folds: usize,
    pub diagnostics: Vec<String>,
}

/// Folds every recognized constant string construction. On a lex error the
/// original text is returned unchanged with a diagnostic.
pub fn fold_source(source: &str) -> FoldOutcome {
    let mut text = source.to_string();
    let mut total = 0usize;
    for _ in 0..MAX_PASSES {
        match fold_once(&text) {
            Ok((next, n)) => {
                if n == 0 {
                    break;
                }
                total += n;
                text = next;
            }
            Err(e) => {
                return FoldOutcome {
                    text: source.to_string(),
                    folds: 0,
                    diagnostics: vec![e.to_string()],
                }
            }
        }
    }
    FoldOutcome {
        text,
        folds: total,
        diagnostics: Vec::new(),
    }
}

struct Replacement {
    start: usize,
    end: usize,
    text: String,
}

fn fold_once(source: &str) -> Result<(String, usize), LexError> {
    let tokens = lex(source)?;
    let mut replacements: Vec<Replacement> = Vec::new();
    let mut i = 0usize;
    while i < tokens.len() {
        let matched = match &tokens[i].kind {
            TokenKind::Ident(id) if id == "new" => {
                match_new_string(&tokens, i).or_else(|| match_string_builder(&tokens, i))
            }
            TokenKind::Ident(id) if id == "String" => match_value_of(&tokens, i),
            TokenKind::Punct('(') => match_standalone_cast(&tokens, i),
            TokenKind::StringLit(_) => match_concat_chain(&tokens, i),
            _ => None,
        };
        match matched {
            Some((end_token, text)) => {
                replacements.push(Replacement {
                    start: tokens[i].start,
                    end: tokens[end_token - 1].end,
                    text,
                });
                i = end_token;
            }
            None => i += 1,
        }
    }
    if replacements.is_empty() {
        return Ok((source.to_string(), 0));
    }
    let mut out = String::with_capacity(source.len());
    let mut pos = 0usize;
    let n = replacements.len();
    for r in replacements {
        out.push_str(&source[pos..r.start]);
        out.push_str(&r.text);
        pos = r.end;
    }
    out.push_str(&source[pos..]);
    Ok((out, n))
}

fn is_ident(tokens: &[Token], i: usize, name: &str) -> bool {
    matches!(tokens.get(i), Some(Token { kind: TokenKind::Ident(id), .. }) if id == name)
}

fn is_punct(tokens: &[Token], i: usize, c: char) -> bool {
    matches!(tokens.get(i), Some(Token { kind: TokenKind::Punct(p), .. }) if *p == c)
}

/// Operators that bind tighter than `+` or otherwise extend the element into
/// a larger expression. An element followed by one of these is not a plain
/// chain member and is left alone.
fn unsafe_follow(tokens: &[Token], i: usize) -> bool {
    matches!(
        tokens.get(i),
        Some(Token { kind: TokenKind::Punct(p), .. }) if matches!(p, '.' | '*' | '/' | '%' | '[' | '(')
    )
}

/// A literal chain element: string, char, int, or negated int.
/// Returns (UTF-16 units it contributes, next token index).
fn parse_chain_element(tokens: &[Token], i: usize) -> Option<(Vec<u16>, usize)> {
    match tokens.get(i).map(|t| &t.kind) {
        Some(TokenKind::StringLit(s)) => Some((s.encode_utf16().collect(), i + 1)),
        Some(TokenKind::CharLit(u)) => Some((vec![*u], i + 1)),
        Some(TokenKind::IntLit(v)) => Some((int_units(*v), i + 1)),
        Some(TokenKind::Punct('-')) => match tokens.get(i + 1).map(|t| &t.kind) {
            Some(TokenKind::IntLit(v)) => Some((int_units(-v), i + 2)),
            _ => None,
        },
        _ => None,
    }
}

fn int_units(v: i128) -> Vec<u16> {
    v.to_string().encode_utf16().collect()
}

/// Pattern 1: a chain starting at a string literal. Left associativity makes
/// folding a literal prefix safe even when non-literal terms follow or
/// precede the chain.
fn match_concat_chain(tokens: &[Token], start: usize) -> Option<(usize, String)> {
    let mut units: Vec<u16> = Vec::new();
    let mut elements = 0usize;
    let mut end = start;
    let mut j = start;
    while let Some((piece, after)) = parse_chain_element(tokens, j) {
        if unsafe_follow(tokens, after) {
            break;
        }
        units.extend(piece);
        elements += 1;
        end = after;
        if is_punct(tokens, after, '+') && parse_chain_element(tokens, after + 1).is_some() {
            j = after + 1;
        } else {
            break;
        }
    }
    if elements < 2 {
        return None;
    }
    let value = String::from_utf16(&units).ok()?;
    Some((end, escape_string_literal(&value)))
}

/// Pattern 2: `new String(new char[]{...})`.
fn match_new_string(tokens: &[Token], start: usize) -> Option<(usize, String)> {
    let mut i = start;
    for expect in ["new", "String"] {
        if !is_ident(tokens, i, expect) {
            return None;
        }
        i += 1;
    }
    if !is_punct(tokens, i, '(') {
        return None;
    }
    i += 1;
    for expect in ["new", "char"] {
        if !is_ident(tokens, i, expect) {
            return None;
        }
        i += 1;
    }
    for expect in ['[', ']', '{'] {
        if !is_punct(tokens, i, expect) {
            return None;
        }
        i += 1;
    }
    let mut units: Vec<u16> = Vec::new();
    if !is_punct(tokens, i, '}') {
        loop {
            let (unit, after) = parse_char_element(tokens, i)?;
            units.push(unit);
            i = after;
            if is_punct(tokens, i, ',') {
                i += 1;
                if is_punct(tokens, i, '}') {
                    break;
                }
            } else {
                break;
            }
        }
    }
    if !is_punct(tokens, i, '}') {
        return None;
    }
    i += 1;
    if !is_punct(tokens, i, ')') {
        return None;
    }
    i += 1;
    let value = String::from_utf16(&units).ok()?;
    Some((i, escape_string_literal(&value)))
}

/// One element of a char[] initializer: a char literal, an in-range int
/// literal, or a `(char)` cast expression. Surrogate units are allowed here;
/// the caller validates the assembled sequence.
fn parse_char_element(tokens: &[Token], i: usize) -> Option<(u16, usize)> {
    match tokens.get(i).map(|t| &t.kind) {
        Some(TokenKind::CharLit(u)) => Some((*u, i + 1)),
        Some(TokenKind::IntLit(v)) if (0..=0xFFFF).contains(v) => Some((*v as u16, i + 1)),
        Some(TokenKind::Punct('(')) => parse_char_cast(tokens, i),
        _ => None,
    }
}

/// Pattern 3: `new StringBuilder(seed?).append(lit)*.toString()`. A numeric
/// seed is a capacity and contributes nothing. The trailing `.toString()` is
/// required; any non-literal append aborts the fold.
fn match_string_builder(tokens: &[Token], start: usize) -> Option<(usize, String)> {
    let mut i = start;
    for expect in ["new", "StringBuilder"] {
        if !is_ident(tokens, i, expect) {
            return None;
        }
        i += 1;
    }
    if !is_punct(tokens, i, '(') {
        return None;
    }
    i += 1;
    let mut units: Vec<u16> = Vec::new();
    match tokens.get(i).map(|t| &t.kind) {
        Some(TokenKind::Punct(')')) => {}
        Some(TokenKind::StringLit(s)) if is_punct(tokens, i + 1, ')') => {
            units.extend(s.encode_utf16());
            i += 1;
        }
        // StringBuilder(int) and StringBuilder(char->int) are capacities.
        Some(TokenKind::IntLit(_)) | Some(TokenKind::CharLit(_))
            if is_punct(tokens, i + 1, ')') =>
        {
            i += 1;
        }
        _ => return None,
    }
    i += 1;

    let mut saw_to_string = false;
    while is_punct(tokens, i, '.') {
        if is_ident(tokens, i + 1, "toString")
            && is_punct(tokens, i + 2, '(')
            && is_punct(tokens, i + 3, ')')
        {
            i += 4;
            saw_to_string = true;
            break;
        }
        if !is_ident(tokens, i + 1, "append") || !is_punct(tokens, i + 2, '(') {
            return None;
        }
        let arg = i + 3;
        let (piece, after) = match tokens.get(arg).map(|t| &t.kind) {
            Some(TokenKind::StringLit(s)) => (s.encode_utf16().collect(), arg + 1),
            Some(TokenKind::CharLit(u)) => (vec![*u], arg + 1),
            Some(TokenKind::IntLit(v)) => (int_units(*v), arg + 1),
            Some(TokenKind::Punct('-')) => match tokens.get(arg + 1).map(|t| &t.kind) {
                Some(TokenKind::IntLit(v)) => (int_units(-v), arg + 2),
                _ => return None,
            },
            Some(TokenKind::Punct('(')) => {
                let (unit, after) = parse_char_cast(tokens, arg)?;
                (vec![unit], after)
            }
            _ => return None,
        };
        if !is_punct(tokens, after, ')') {
            return None;
        }
        units.extend(piece);
        i = after + 1;
    }
    if !saw_to_string {
        return None;
    }
    let value = String::from_utf16(&units).ok()?;
    Some((i, escape_string_literal(&value)))
}

/// Pattern 5: `String.valueOf('c')`. Only the char overload; an int argument
/// would select `valueOf(int)` and format digits instead.
fn match_value_of(tokens: &[Token], start: usize) -> Option<(usize, String)> {
    if !is_ident(tokens, start, "String")
        || !is_punct(tokens, start + 1, '.')
        || !is_ident(tokens, start + 2, "valueOf")
        || !is_punct(tokens, start + 3, '(')
    {
        return None;
    }
    let Some(TokenKind::CharLit(unit)) = tokens.get(start + 4).map(|t| &t.kind) else {
        return None;
    };
    if !is_punct(tokens, start + 5, ')') {
        return None;
    }
    let value = String::from_utf16(&[*unit]).ok()?;
    Some((start + 6, escape_string_literal(&value)))
}

/// Pattern 4 standalone: a `(char)` cast of a constant expression is
/// replaced with a char literal. Surrogate results cannot be written as a
/// literal and abort the fold.
fn match_standalone_cast(tokens: &[Token], start: usize) -> Option<(usize, String)> {
    let (unit, end) = parse_char_cast(tokens, start)?;
    if (0xD800..=0xDFFF).contains(&unit) {
        return None;
    }
    Some((end, escape_char_literal(unit)))
}

/// `(char) <literal>` or `(char)(const-expr)` where const-expr uses int and
/// char literals with `^`, `+`, `-`, unary minus, and parentheses. The value
/// is truncated to 16 bits the way a Java char cast does. Returns the code
/// unit (surrogates included; callers decide whether those are acceptable).
fn parse_char_cast(tokens: &[Token], start: usize) -> Option<(u16, usize)> {
    if !is_punct(tokens, start, '(')
        || !is_ident(tokens, start + 1, "char")
        || !is_punct(tokens, start + 2, ')')
    {
        return None;
    }
    let operand = start + 3;
    let (value, end) = match tokens.get(operand).map(|t| &t.kind) {
        Some(TokenKind::IntLit(v)) => (java_int(*v), operand + 1),
        Some(TokenKind::CharLit(u)) => (*u as i64, operand + 1),
        Some(TokenKind::Punct('(')) => {
            let mut parser = ExprParser {
                tokens,
                pos: operand,
            };
            let value = parser.parse_primary()?;
            (value, parser.pos)
        }
        _ => return None,
    };
    Some(((value as u16 as u32) as u16, end))
}

/// Wraps to Java 32-bit int semantics.
fn java_int(v: i128) -> i64 {
    v as i32 as i64
}

/// Recursive-descent evaluator for the decoder subset. Precedence matches
/// Java: unary minus, then additive `+`/`-`, then `^`.
struct ExprParser<'a> {
    tokens: &'a [Token],
    pos: usize,
}

impl ExprParser<'_> {
    fn parse_xor(&mut self) -> Option<i64> {
        let mut value = self.parse_add()?;
        while is_punct(self.tokens, self.pos, '^') {
            self.pos += 1;
            let rhs = self.parse_add()?;
            value = (value as i32 ^ rhs as i32) as i64;
        }
        Some(value)
    }

    fn parse_add(&mut self) -> Option<i64> {
        let mut value = self.parse_unary()?;
        loop {
            if is_punct(self.tokens, self.pos, '+') {
                self.pos += 1;
                let rhs = self.parse_unary()?;
                value = (value as i32).wrapping_add(rhs as i32) as i64;
            } else if is_punct(self.tokens, self.pos, '-') {
                self.pos += 1;
                let rhs = self.parse_unary()?;
                value = (value as i32).wrapping_sub(rhs as i32) as i64;
            } else {
                return Some(value);
            }
        }
    }

    fn parse_unary(&mut self) -> Option<i64> {
        if is_punct(self.tokens, self.pos, '-') {
            self.pos += 1;
            return Some((self.parse_unary()? as i32).wrapping_neg() as i64);
        }
        if is_punct(self.tokens, self.pos, '+') {
            self.pos += 1;
            return self.parse_unary();
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Option<i64> {
        match self.tokens.get(self.pos).map(|t| &t.kind) {
            Some(TokenKind::IntLit(v)) => {
                self.pos += 1;
                Some(java_int(*v))
            }
            Some(TokenKind::CharLit(u)) => {
                self.pos += 1;
                Some(*u as i64)
            }
            Some(TokenKind::Punct('(')) => {
                self.pos += 1;
                let value = self.parse_xor()?;
                if !is_punct(self.tokens, self.pos, ')') {
                    return None;
                }
                self.pos += 1;
                Some(value)
            }
            _ => None,
        }
    }
}

/// Renders a string as a Java literal. Dangerous characters use their named
/// escapes; remaining C0 controls use `\uXXXX`. Quote, newline, CR, and
/// backslash must never be emitted as `\uXXXX` because Java decodes unicode
/// escapes before lexing, which would break the literal.
pub fn escape_string_literal(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for ch in value.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{0008}' => out.push_str("\\b"),
            '\u{000C}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04X}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Renders a non-surrogate UTF-16 unit as a Java char literal.
pub fn escape_char_literal(unit: u16) -> String {
    let ch = char::from_u32(unit as u32).expect("caller excludes surrogates");
    match ch {
        '\'' => "'\\''".to_string(),
        '\\' => "'\\\\'".to_string(),
        '\n' => "'\\n'".to_string(),
        '\r' => "'\\r'".to_string(),
        '\t' => "'\\t'".to_string(),
        '\u{0008}' => "'\\b'".to_string(),
        '\u{000C}' => "'\\f'".to_string(),
        c if (c as u32) < 0x20 => format!("'\\u{:04X}'", c as u32),
        c => format!("'{c}'"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn folded(src: &str) -> String {
        fold_source(src).text
    }

    #[test]
    fn folds_simple_concat_chain() {
        assert_eq!(
            folded(r#"String s = "ma" + "li" + "ce";"#),
            r#"String s = "malice";"#
        );
    }

    #[test]
    fn folds_mixed_literal_chain() {
        assert_eq!(folded(r#"s = "v" + 1 + '.' + 2;"#), r#"s = "v1.2";"#);
        assert_eq!(folded(r#"s = "n=" + -5;"#), r#"s = "n=-5";"#);
        assert_eq!(
            folded(r#"s = "hex" + 0x1F + 017 + 7L;"#),
            r#"s = "hex31157";"#
        );
    }

    #[test]
    fn single_literal_is_not_a_chain() {
        let src = r#"s = "alone";"#;
        assert_eq!(folded(src), src);
        assert_eq!(fold_source(src).folds, 0);
    }

    #[test]
    fn chain_must_start_with_string() {
        // 'a' + 'b' is integer arithmetic; 1 + 2 likewise.
        let src = "int x = 'a' + 'b';";
        assert_eq!(folded(src), src);
        let src2 = r#"s = 1 + 2 + "a";"#;
        // The numeric prefix stays; nothing foldable starts at "a".
        assert_eq!(folded(src2), src2);
    }

    #[test]
    fn method_call_on_element_stops_the_chain_before_it() {
        assert_eq!(
            folded(r#"s = "a" + "b" + "c".trim();"#),
            r#"s = "ab" + "c".trim();"#
        );
        // Excluding the guarded element can leave too few to fold.
        let src = r#"s = "a" + "b".trim();"#;
        assert_eq!(folded(src), src);
    }

    #[test]
    fn arithmetic_after_int_element_stops_the_chain() {
        assert_eq!(folded(r#"s = "x" + 5 * 3;"#), r#"s = "x" + 5 * 3;"#);
        assert_eq!(folded(r#"s = "x" + "y" + 5 % 3;"#), r#"s = "xy" + 5 % 3;"#);
    }

    #[test]
    fn variables_interrupt_folding() {
        assert_eq!(
            folded(r#"s = "a" + name + "b" + "c";"#),
            r#"s = "a" + name + "bc";"#
        );
    }

    #[test]
    fn folds_new_string_char_array() {
        assert_eq!(
            folded("s = new String(new char[]{104, 'i'});"),
            r#"s = "hi";"#
        );
        assert_eq!(
            folded("s = new String(new char[] { 'o', 'k', });"),
            r#"s = "ok";"#
        );
        assert_eq!(folded("s = new String(new char[]{});"), r#"s = "";"#);
    }

    #[test]
    fn char_array_with_decoders_folds() {
        // 75 ^ 13 = 70 = 'F'
        assert_eq!(
            folded("s = new String(new char[]{(char)(75 ^ 13), (char)111});"),
            r#"s = "Fo";"#
        );
    }

    #[test]
    fn char_array_with_out_of_range_int_does_not_fold() {
        let src = "s = new String(new char[]{70000});";
        assert_eq!(folded(src), src);
    }

    #[test]
    fn char_array_surrogate_pair_combines() {
        assert_eq!(
            folded(r"s = new String(new char[]{'\uD83D', '\uDE00'});"),
            "s = \"😀\";"
        );
    }

    #[test]
    fn char_array_lone_surrogate_does_not_fold() {
        let src = r"s = new String(new char[]{'\uD83D'});";
        assert_eq!(folded(src), src);
    }

    #[test]
    fn folds_string_builder_chain() {
        assert_eq!(
            folded(r#"s = new StringBuilder().append("ht").append("tp").append(':').toString();"#),
            r#"s = "http:";"#
        );
        assert_eq!(
            folded(r#"s = new StringBuilder("GET").append(' ').append("/x").toString();"#),
            r#"s = "GET /x";"#
        );
    }

    #[test]
    fn string_builder_int_seed_is_capacity() {
        assert_eq!(
            folded(r#"s = new StringBuilder(16).append("cmd").toString();"#),
            r#"s = "cmd";"#
        );
        assert_eq!(
            folded(r#"s = new StringBuilder('x').append("y").toString();"#),
            r#"s = "y";"#
        );
    }

    #[test]
    fn string_builder_without_tostring_does_not_fold() {
        let src = r#"StringBuilder b = new StringBuilder().append("x");"#;
        assert_eq!(folded(src), src);
    }

    #[test]
    fn string_builder_with_variable_append_does_not_fold() {
        let src = r#"s = new StringBuilder().append(x).append("y").toString();"#;
        assert_eq!(folded(src), src);
    }

    #[test]
    fn string_builder_appends_numbers_like_java() {
        assert_eq!(
            folded(r#"s = new StringBuilder().append(4).append(-2).toString();"#),
            r#"s = "4-2";"#
        );
    }

    #[test]
    fn folds_char_decoders_standalone() {
        assert_eq!(folded("char c = (char)(75 ^ 13);"), "char c = 'F';");
        assert_eq!(folded("char c = (char)(60 + 10);"), "char c = 'F';");
        assert_eq!(folded("char c = (char)(80 - 10);"), "char c = 'F';");
        assert_eq!(folded("char c = (char) 65;"), "char c = 'A';");
        assert_eq!(folded("char c = (char) 'A';"), "char c = 'A';");
    }

    #[test]
    fn decoder_precedence_matches_java() {
        // + binds tighter than ^: 70 ^ 3 + 3 is 70 ^ 6 = 64 = '@'.
        assert_eq!(folded("char c = (char)(70 ^ 3 + 3);"), "char c = '@';");
        // Parentheses override: (70 ^ 3) + 3 = 69 + 3 = 72 = 'H'.
        assert_eq!(folded("char c = (char)((70 ^ 3) + 3);"), "char c = 'H';");
    }

    #[test]
    fn decoder_with_unary_minus_truncates_like_java() {
        // (char)(-1) is 0xFFFF.
        assert_eq!(folded("char c = (char)(-1);"), "char c = '\u{FFFF}';");
    }

    #[test]
    fn decoder_yielding_surrogate_does_not_fold() {
        let src = "char c = (char)(0xD800);";
        assert_eq!(folded(src), src);
    }

    #[test]
    fn decoder_with_variable_does_not_fold() {
        let src = "char c = (char)(key ^ 13);";
        assert_eq!(folded(src), src);
    }

    #[test]
    fn decoder_with_multiplication_does_not_fold() {
        let src = "char c = (char)(35 * 2);";
        assert_eq!(folded(src), src);
    }

    #[test]
    fn folds_string_value_of_char_only() {
        assert_eq!(folded("s = String.valueOf('Q');"), r#"s = "Q";"#);
        // valueOf(int) renders digits; not folded by design.
        let src = "s = String.valueOf(81);";
        assert_eq!(folded(src), src);
    }

    #[test]
    fn nested_shapes_reach_a_fixed_point() {
        let src = r#"s = "u" + new String(new char[]{'r'}) + String.valueOf('l');"#;
        assert_eq!(folded(src), r#"s = "url";"#);
        let src2 = r#"s = "k" + (char)(75 ^ 14);"#;
        assert_eq!(folded(src2), r#"s = "kE";"#);
    }

    #[test]
    fn folding_is_idempotent() {
        let once = fold_source(r#"s = "a" + "b" + (char)(33 ^ 1);"#);
        assert!(once.folds > 0);
        let twice = fold_source(&once.text);
        assert_eq!(twice.text, once.text);
        assert_eq!(twice.folds, 0);
    }

    #[test]
    fn lex_error_leaves_text_unchanged_with_diagnostic() {
        let src = "String s = \"unterminated;\n";
        let out = fold_source(src);
        assert_eq!(out.text, src);
        assert_eq!(out.folds, 0);
        assert_eq!(out.diagnostics.len(), 1);
        assert!(out.diagnostics[0].contains("unterminated"));
    }

    #[test]
    fn untouched_source_is_byte_identical() {
        let src =
            "public class A {\r\n  // \"not\" + \"folded\" in comments\r\n  int x = 1;\r\n}\r\n";
        let out = fold_source(src);
        assert_eq!(out.folds, 0);
        assert_eq!(out.text, src);
    }

    #[test]
    fn escapes_are_written_safely() {
        // The last element is the six-character escape for U+0001; the
        // folded literal must re-escape the control character the same way.
        let src = "s = \"a\\\"b\" + \"\\n\" + \"\\\\\" + \"\\u0001\";";
        let expected = "s = \"a\\\"b\\n\\\\\\u0001\";";
        assert_eq!(folded(src), expected);
        assert_eq!(folded(r#"s = "t" + '\t';"#), r#"s = "t\t";"#);
    }

    #[test]
    fn non_ascii_is_written_raw() {
        assert_eq!(folded(r#"s = "càf" + "é";"#), r#"s = "càfé";"#);
        assert_eq!(folded(r#"s = "é" + "!";"#), r#"s = "é!";"#);
    }

    #[test]
    fn escaped_literal_relexes_to_same_value() {
        let sneaky = "a\"b\\c\nd\re\tf\u{8}g\u{c}h\u{1}i\u{1F}jé日";
        let lit = escape_string_literal(sneaky);
        let toks = lex(&lit).unwrap();
        assert_eq!(toks.len(), 1);
        match &toks[0].kind {
            TokenKind::StringLit(v) => assert_eq!(v, sneaky),
            other => panic!("unexpected token {other:?}"),
        }
    }

    #[test]
    fn fold_count_reports_total_replacements() {
        let out = fold_source(r#"a = "x" + "y"; b = String.valueOf('z');"#);
        assert_eq!(out.folds, 2);
    }
}
