//! Parser for the `#if` expression subset.

use super::{opt, Formula, FormulaError, OptionId};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Bang,
    AndAnd,
    OrOr,
    LParen,
    RParen,
    Ident(String),
    Number(String),
    Other(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    start: usize,
    end: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Ident(text[start..i].to_string())
        } else if c.is_ascii_digit() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Number(text[start..i].to_string())
        } else {
            let two = bytes.get(i + 1).copied();
            match (c, two) {
                (b'&', Some(b'&')) => {
                    i += 2;
                    Tok::AndAnd
                }
                (b'|', Some(b'|')) => {
                    i += 2;
                    Tok::OrOr
                }
                (b'!', Some(b'=')) => {
                    i += 2;
                    Tok::Other("!=".into())
                }
                (b'!', _) => {
                    i += 1;
                    Tok::Bang
                }
                (b'(', _) => {
                    i += 1;
                    Tok::LParen
                }
                (b')', _) => {
                    i += 1;
                    Tok::RParen
                }
                _ => {
                    // Any other operator or literal: one UTF-8 character at a time.
                    let ch = text[i..].chars().next().unwrap();
                    i += ch.len_utf8();
                    Tok::Other(ch.to_string())
                }
            }
        };
        out.push(Token { tok, start, end: i });
    }
    out
}

fn parse_int_literal(s: &str) -> Option<u64> {
    let trimmed = s.trim_end_matches(['u', 'U', 'l', 'L']);
    if let Some(hex) = trimmed.strip_prefix("0x").or_else(|| trimmed.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else if trimmed.len() > 1 && trimmed.starts_with('0') {
        u64::from_str_radix(&trimmed[1..], 8).ok()
    } else {
        trimmed.parse().ok()
    }
}

/// A sub-expression that could not be modeled and was replaced by a fresh option.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct OpaqueAtom {
    pub text: String,
    pub option: OptionId,
}

impl OpaqueAtom {
    pub fn for_text(text: &str) -> Self {
        let normalized: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
        // FNV-1a keeps the name stable across runs and platforms.
        let mut hash: u32 = 0x811c_9dc5;
        for b in normalized.bytes() {
            hash ^= u32::from(b);
            hash = hash.wrapping_mul(0x0100_0193);
        }
        OpaqueAtom { option: opt(&format!("__OPAQUE_{hash:08x}")), text: normalized }
    }
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
    lenient: bool,
    opaque: Vec<OpaqueAtom>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.text.len(), |t| t.start)
    }

    fn syntax(&self, message: impl Into<String>) -> FormulaError {
        FormulaError::Syntax { position: self.offset(), message: message.into() }
    }

    fn expr(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.pos += 1;
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, FormulaError> {
        let mut lhs = self.operand()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.pos += 1;
            let rhs = self.operand()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn at_operand_end(&self) -> bool {
        matches!(self.peek(), None | Some(Tok::AndAnd | Tok::OrOr | Tok::RParen))
    }

    /// One `&&`/`||` operand. Anything the boolean grammar cannot express is
    /// either reported or, in lenient mode, replaced by an opaque option.
    fn operand(&mut self) -> Result<Formula, FormulaError> {
        let first = self.pos;
        match self.unary() {
            Ok(f) if self.at_operand_end() => Ok(f),
            Ok(_) if !matches!(self.peek(), Some(Tok::Other(_))) => {
                Err(self.syntax(format!("unexpected token `{}`", self.current_text())))
            }
            Err(FormulaError::UnsupportedExpression { text }) if !text.is_empty() => {
                Err(FormulaError::UnsupportedExpression { text })
            }
            Ok(_) | Err(FormulaError::UnsupportedExpression { .. }) => {
                if first >= self.toks.len() {
                    return Err(self.syntax("expected an operand"));
                }
                let end = self.operand_end(first);
                let text = &self.text[self.toks[first].start..self.toks[end - 1].end];
                if self.lenient {
                    self.pos = end;
                    let atom = OpaqueAtom::for_text(text);
                    let f = Formula::Var(atom.option.clone());
                    self.opaque.push(atom);
                    Ok(f)
                } else {
                    Err(FormulaError::UnsupportedExpression { text: text.trim().to_string() })
                }
            }
            Err(e) => Err(e),
        }
    }

    fn operand_end(&self, from: usize) -> usize {
        let mut depth = 0usize;
        let mut i = from;
        while i < self.toks.len() {
            match self.toks[i].tok {
                Tok::LParen => depth += 1,
                Tok::RParen if depth == 0 => break,
                Tok::RParen => depth -= 1,
                Tok::AndAnd | Tok::OrOr if depth == 0 => break,
                _ => {}
            }
            i += 1;
        }
        i.max(from + 1)
    }

    fn unary(&mut self) -> Result<Formula, FormulaError> {
        if self.peek() == Some(&Tok::Bang) {
            self.pos += 1;
            return Ok(Formula::not(self.unary()?));
        }
        self.primary()
    }

    /// Marker for an unsupported token; [`Parser::operand`] widens it to the
    /// whole operand.
    fn unsupported_here(&self) -> FormulaError {
        FormulaError::UnsupportedExpression { text: String::new() }
    }

    fn primary(&mut self) -> Result<Formula, FormulaError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.syntax("unexpected end of expression"));
        };
        match tok {
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Tok::Ident(name) if name == "defined" => {
                self.pos += 1;
                let parens = self.peek() == Some(&Tok::LParen);
                if parens {
                    self.pos += 1;
                }
                let Some(Tok::Ident(target)) = self.peek().cloned() else {
                    return Err(self.syntax("expected a macro name after `defined`"));
                };
                self.pos += 1;
                if parens {
                    if self.peek() != Some(&Tok::RParen) {
                        return Err(self.syntax("expected `)` after `defined(NAME`"));
                    }
                    self.pos += 1;
                }
                Ok(Formula::Var(opt(&target)))
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::LParen) {
                    // Function-like macro invocation.
                    self.pos -= 1;
                    return Err(self.unsupported_here());
                }
                Ok(Formula::Var(opt(&name)))
            }
            Tok::Number(n) => match parse_int_literal(&n) {
                Some(v) => {
                    self.pos += 1;
                    Ok(if v == 0 { Formula::False } else { Formula::True })
                }
                None => Err(self.unsupported_here()),
            },
            Tok::Other(_) => Err(self.unsupported_here()),
            Tok::AndAnd | Tok::OrOr | Tok::RParen | Tok::Bang => {
                Err(self.syntax(format!("unexpected token `{}`", self.current_text())))
            }
        }
    }

    fn current_text(&self) -> &str {
        let t = &self.toks[self.pos];
        &self.text[t.start..t.end]
    }

    fn finish(mut self) -> Result<(Formula, Vec<OpaqueAtom>), FormulaError> {
        if self.toks.is_empty() {
            return Err(self.syntax("empty expression"));
        }
        let f = self.expr()?;
        if self.pos != self.toks.len() {
            return Err(self.syntax(format!("unexpected token `{}`", self.current_text())));
        }
        let opaque = std::mem::take(&mut self.opaque);
        Ok((f, opaque))
    }
}

/// Parses an expression of the boolean `#if` subset.
///
/// Arithmetic, comparisons and function-like macros yield
/// [`FormulaError::UnsupportedExpression`] carrying the offending operand.
pub fn parse_formula(text: &str) -> Result<Formula, FormulaError> {
    let p = Parser { text, toks: tokenize(text), pos: 0, lenient: false, opaque: Vec::new() };
    p.finish().map(|(f, _)| f)
}

/// Like [`parse_formula`], but each unsupported operand becomes a fresh
/// `__OPAQUE_xxxxxxxx` option. Genuine syntax errors are still reported.
pub fn parse_formula_lenient(text: &str) -> Result<(Formula, Vec<OpaqueAtom>), FormulaError> {
    let p = Parser { text, toks: tokenize(text), pos: 0, lenient: true, opaque: Vec::new() };
    p.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Formula {
        Formula::var(n)
    }

    #[test]
    fn parses_fault_condition() {
        let f = parse_formula("defined(SPLT) && !defined(POINTER)").unwrap();
        assert_eq!(f, Formula::and(v("SPLT"), Formula::not(v("POINTER"))));
    }

    #[test]
    fn parses_literals_and_precedence() {
        assert_eq!(parse_formula("1").unwrap(), Formula::True);
        assert_eq!(parse_formula("0").unwrap(), Formula::False);
        assert_eq!(
            parse_formula("A || (B && !C)").unwrap(),
            Formula::or(v("A"), Formula::and(v("B"), Formula::not(v("C"))))
        );
        assert_eq!(parse_formula("A || B && C").unwrap(), Formula::or(v("A"), Formula::and(v("B"), v("C"))));
        assert_eq!(parse_formula("A && B && C").unwrap(), Formula::and(Formula::and(v("A"), v("B")), v("C")));
        assert_eq!(parse_formula("defined X").unwrap(), v("X"));
        assert_eq!(parse_formula("!!A").unwrap(), Formula::not(Formula::not(v("A"))));
        assert_eq!(parse_formula("0x0").unwrap(), Formula::False);
        assert_eq!(parse_formula("1L").unwrap(), Formula::True);
    }

    #[test]
    fn defined_and_bare_names_are_identified() {
        assert_eq!(parse_formula("defined(A)").unwrap(), parse_formula("A").unwrap());
    }

    #[test]
    fn rejects_arithmetic_and_function_like_macros() {
        assert_eq!(
            parse_formula("A && VERSION > 2").unwrap_err(),
            FormulaError::UnsupportedExpression { text: "VERSION > 2".into() }
        );
        assert_eq!(
            parse_formula("CHECK(3) || B").unwrap_err(),
            FormulaError::UnsupportedExpression { text: "CHECK(3)".into() }
        );
        assert!(matches!(
            parse_formula("!(X == 1)").unwrap_err(),
            FormulaError::UnsupportedExpression { text } if text == "X == 1"
        ));
        assert!(matches!(parse_formula("A != B"), Err(FormulaError::UnsupportedExpression { .. })));
    }

    #[test]
    fn reports_syntax_errors_with_position() {
        assert!(matches!(parse_formula(""), Err(FormulaError::Syntax { position: 0, .. })));
        assert!(matches!(parse_formula("A &&"), Err(FormulaError::Syntax { position: 4, .. })));
        assert!(matches!(parse_formula("(A"), Err(FormulaError::Syntax { position: 2, .. })));
        assert!(matches!(parse_formula("A B"), Err(FormulaError::Syntax { position: 2, .. })));
        assert!(matches!(parse_formula("A )"), Err(FormulaError::Syntax { position: 2, .. })));
        assert!(matches!(parse_formula("defined()"), Err(FormulaError::Syntax { .. })));
    }

    #[test]
    fn lenient_mode_abstracts_only_the_offending_operand() {
        let (f, opaque) = parse_formula_lenient("defined(A) && (LEVEL > 2 || !B)").unwrap();
        assert_eq!(opaque.len(), 1);
        assert_eq!(opaque[0].text, "LEVEL > 2");
        let o = Formula::Var(opaque[0].option.clone());
        assert_eq!(f, Formula::and(v("A"), Formula::or(o, Formula::not(v("B")))));
        assert!(opaque[0].option.as_str().starts_with("__OPAQUE_"));

        let (_, again) = parse_formula_lenient("LEVEL   >  2").unwrap();
        assert_eq!(again[0].option, opaque[0].option);
        assert!(parse_formula_lenient("A &&").is_err());
    }
}
