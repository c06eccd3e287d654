//! Recursive-descent parser for the expression grammar:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' ['-'] number)?
//! base   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! A minus sign directly in front of a numeric literal that is not raised to
//! a power folds into a negative constant, so printed negative constants
//! round-trip. Whitespace is insignificant.

use thiserror::Error;

use super::{Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownIdentifier { offset, .. } => {
                *offset
            }
        }
    }
}

/// Parses `text` against the ordered variable list `vars`.
pub fn parse_expression<S: AsRef<str>>(text: &str, vars: &[S]) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        src: text.as_bytes(),
        pos: 0,
        vars,
    };
    let e = parser.expr()?;
    parser.skip_ws();
    if parser.pos < parser.src.len() {
        return Err(parser.syntax(format!(
            "unexpected `{}`",
            parser.src[parser.pos] as char
        )));
    }
    Ok(e)
}

struct Parser<'a, S> {
    src: &'a [u8],
    pos: usize,
    vars: &'a [S],
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(got) => Err(self.syntax(format!("expected `{}`, found `{}`", c as char, got as char))),
            None => Err(self.syntax(format!("expected `{}`, found end of input", c as char))),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' { lhs + rhs } else { lhs - rhs };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' { lhs * rhs } else { lhs / rhs };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() != Some(b'-') {
            return self.factor();
        }
        self.pos += 1;
        if self.peek().is_some_and(is_number_start) {
            let save = self.pos;
            let value = self.number()?;
            if self.peek() != Some(b'^') {
                return Ok(Expr::Const(-value));
            }
            self.pos = save;
        }
        Ok(-self.unary()?)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let negative = if self.peek() == Some(b'-') {
                self.pos += 1;
                true
            } else {
                false
            };
            if !self.peek().is_some_and(is_number_start) {
                return Err(self.syntax("exponent must be a numeric constant"));
            }
            let e = self.number()?;
            return Ok(base.powf(if negative { -e } else { e }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if is_number_start(c) => Ok(Expr::Const(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c as char))),
        }
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        // identifiers are ASCII by construction
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        if self.peek() == Some(b'(') {
            let op = UnaryOp::from_name(name).ok_or_else(|| ParseError::UnknownIdentifier {
                name: name.to_string(),
                offset: start,
            })?;
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::unary(op, arg));
        }
        match self.vars.iter().position(|v| v.as_ref() == name) {
            Some(i) => Ok(Expr::Var(i)),
            None => Err(ParseError::UnknownIdentifier {
                name: name.to_string(),
                offset: start,
            }),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            self.pos = start;
            return Err(self.syntax("malformed number"));
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                // `2e` followed by something else: not an exponent
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ParseError::Syntax {
                offset: start,
                message: format!("invalid number `{text}`"),
            })
    }
}

fn is_number_start(c: u8) -> bool {
    c.is_ascii_digit() || c == b'.'
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{BinaryOp, Expr};

    const V3: [&str; 3] = ["x1", "x2", "x3"];

    #[test]
    fn single_variable() {
        assert_eq!(parse_expression("x2", &["x1", "x2"]).unwrap(), Expr::Var(1));
    }

    #[test]
    fn grammar_shape() {
        let e = parse_expression("x1*x2 + sin(x3)", &V3).unwrap();
        let expected = Expr::binary(
            BinaryOp::Add,
            Expr::Var(0) * Expr::Var(1),
            Expr::unary(UnaryOp::Sin, Expr::Var(2)),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn unclosed_paren_reports_offset() {
        let err = parse_expression("x1*(", &V3).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { offset: 4, .. }), "{err:?}");
    }

    #[test]
    fn unknown_identifiers() {
        let err = parse_expression("x1 + w", &V3).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "w".into(),
                offset: 5
            }
        );
        let err = parse_expression("tan(x1)", &V3).unwrap_err();
        assert!(matches!(err, ParseError::UnknownIdentifier { ref name, .. } if name == "tan"));
    }

    #[test]
    fn precedence() {
        let v = ["x"];
        let e = parse_expression("-x^2", &v).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = parse_expression("2-3-4", &v).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), -5.0);
        let e = parse_expression("8/4/2", &v).unwrap();
        assert_eq!(e.eval(&[0.0]).unwrap(), 1.0);
        let e = parse_expression("1 + 2*x^2", &v).unwrap();
        assert_eq!(e.eval(&[2.0]).unwrap(), 9.0);
        let e = parse_expression("x^-1", &v).unwrap();
        assert_eq!(e.eval(&[4.0]).unwrap(), 0.25);
        let e = parse_expression("  2.5e1 *x ", &v).unwrap();
        assert_eq!(e.eval(&[2.0]).unwrap(), 50.0);
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(parse_expression("-2", &["x"]).unwrap(), Expr::Const(-2.0));
        assert_eq!(
            parse_expression("-(2)", &["x"]).unwrap(),
            -Expr::Const(2.0)
        );
        assert_eq!(
            parse_expression("-2^2", &["x"]).unwrap().eval(&[0.0]).unwrap(),
            -4.0
        );
    }

    #[test]
    fn rejects_garbage() {
        for text in ["", "x1 +", "x1 x2", "3 ^ x1", "()", "x1 $ 2", "sin x1", "1.2.3"] {
            assert!(parse_expression(text, &V3).is_err(), "{text:?} should fail");
        }
    }
}
