//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?        exponent must fold to a constant
//! primary := number | ident | func '(' expr ')' | '(' expr ')'
//! ```

use super::{Chart, Expr, ExprError, UnaryOp};

pub(crate) const FUNCTIONS: [&str; 6] = ["sin", "cos", "tan", "exp", "log", "sqrt"];

/// Parses `src` against the coordinates of `chart`.
pub fn parse(src: &str, chart: &Chart) -> Result<Expr, ExprError> {
    let mut p = Parser { src: src.as_bytes(), pos: 0, chart };
    p.skip_ws();
    if p.peek().is_none() {
        return Err(p.error("expected expression, found end of input"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if let Some(c) = p.peek() {
        return Err(p.error(&format!("expected operator or end of input, found `{}`", c as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    chart: &'a Chart,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn error(&self, message: &str) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = lhs + self.term()?;
            } else if self.eat(b'-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = lhs * self.unary()?;
            } else if self.eat(b'/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(-self.unary()?)
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            self.skip_ws();
            let offset = self.pos;
            let exponent = self.unary()?;
            match exponent.as_const() {
                Some(p) if p.is_finite() => Ok(Expr::pow(base, p)),
                _ => Err(ExprError::NonConstantExponent { offset }),
            }
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.error(&format!("expected expression, found `{}`", c as char))),
            None => Err(self.error("expected expression, found end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            self.pos = start;
            return Err(self.error("expected digits"));
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
                return Err(self.error("expected exponent digits"));
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
            offset: start,
            message: format!("invalid number `{text}`"),
        })?;
        Ok(Expr::constant(value))
    }

    fn identifier(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        self.skip_ws();
        if self.peek() == Some(b'(') {
            let op = UnaryOp::from_name(name).ok_or_else(|| ExprError::UnknownFunction {
                name: name.to_string(),
                offset: start,
            })?;
            self.pos += 1;
            let arg = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected `)` after function argument"));
            }
            return Ok(Expr::unary(op, arg));
        }
        match self.chart.index_of(name) {
            Some(index) => Ok(Expr::var(index, name)),
            None => Err(ExprError::UnknownIdentifier { name: name.to_string(), offset: start }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart() -> Chart {
        Chart::new(&["x", "y", "z"]).unwrap()
    }

    #[test]
    fn malformed_operator_sequence() {
        let err = parse("x +* y", &chart()).unwrap_err();
        assert!(matches!(err, ExprError::Syntax { offset: 3, .. }), "{err:?}");
    }

    #[test]
    fn precedence() {
        let c = chart();
        let at = |s: &str| parse(s, &c).unwrap().eval(&[2.0, 3.0, 0.5]).unwrap();
        assert_eq!(at("-x^2"), -4.0);
        assert_eq!(at("x*y+z"), 6.5);
        assert_eq!(at("x+y*z"), 3.5);
        assert_eq!(at("x^2^3"), 256.0);
        assert_eq!(at("x^-1"), 0.5);
        assert_eq!(at("x - y - z"), -1.5);
        assert_eq!(at("x / y / z"), 2.0 / 3.0 / 0.5);
        assert_eq!(at("2.5e1 + .5 + 1E-1"), 25.6);
        assert_eq!(at("sqrt( x*8 )"), 4.0);
    }

    #[test]
    fn errors() {
        let c = chart();
        assert!(matches!(parse("", &c), Err(ExprError::Syntax { offset: 0, .. })));
        assert!(matches!(parse("w + 1", &c), Err(ExprError::UnknownIdentifier { offset: 0, .. })));
        assert!(matches!(parse("foo(x)", &c), Err(ExprError::UnknownFunction { .. })));
        assert!(matches!(parse("x^y", &c), Err(ExprError::NonConstantExponent { offset: 2 })));
        assert!(matches!(parse("(x + 1", &c), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("x y", &c), Err(ExprError::Syntax { offset: 2, .. })));
        assert!(matches!(parse("1e", &c), Err(ExprError::Syntax { .. })));
        assert!(matches!(parse("sin x", &c), Err(ExprError::UnknownIdentifier { .. })));
    }

    #[test]
    fn constant_exponent_expressions_fold() {
        let c = chart();
        let e = parse("x^(1/2)", &c).unwrap();
        assert_eq!(e.eval(&[4.0, 0.0, 0.0]).unwrap(), 2.0);
    }
}
