//! Recursive-descent parser for field expressions.
//!
//! Precedence, loosest first: `+ -`, `* /`, unary minus, `^` (right
//! associative, integer exponents only).

use super::expr::{Expr, Func};
use super::FieldError;

pub fn parse(text: &str, names: &[String]) -> Result<Expr, FieldError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        names,
    };
    p.skip_ws();
    if p.at_end() {
        return Err(p.syntax("empty expression"));
    }
    let e = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.syntax(&format!("unexpected '{}'", p.peek_char())));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_char(&self) -> char {
        std::str::from_utf8(&self.src[self.pos..])
            .ok()
            .and_then(|s| s.chars().next())
            .unwrap_or('?')
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn syntax(&self, msg: &str) -> FieldError {
        FieldError::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
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

    fn expr(&mut self) -> Result<Expr, FieldError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, FieldError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                let rhs = self.unary()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.unary()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, FieldError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, FieldError> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        self.skip_ws();
        let at = self.pos;
        let exponent = self.unary()?;
        let n = const_value(&exponent).ok_or(FieldError::Syntax {
            pos: at,
            msg: "exponent must be a constant".into(),
        })?;
        if n.fract() != 0.0 || n.abs() > i32::MAX as f64 {
            return Err(FieldError::Syntax {
                pos: at,
                msg: format!("exponent must be an integer, got {n}"),
            });
        }
        Ok(Expr::Pow(Box::new(base), n as i32))
    }

    fn primary(&mut self) -> Result<Expr, FieldError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.syntax("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(start),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos])
                    .expect("ascii identifier")
                    .to_string();
                self.skip_ws();
                if self.peek() == Some(b'(') {
                    let func = Func::from_name(&name).ok_or(FieldError::UnknownFunction {
                        name: name.clone(),
                        pos: start,
                    })?;
                    self.pos += 1;
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.syntax("expected ')'"));
                    }
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match self.names.iter().position(|n| *n == name) {
                    Some(i) => Ok(Expr::Var(i)),
                    None => Err(FieldError::UnknownIdentifier { name, pos: start }),
                }
            }
            Some(_) => Err(self.syntax(&format!("unexpected '{}'", self.peek_char()))),
        }
    }

    fn number(&mut self, start: usize) -> Result<Expr, FieldError> {
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut count = digits(self);
        if self.peek() == Some(b'.') {
            self.pos += 1;
            count += digits(self);
        }
        if count == 0 {
            return Err(FieldError::Syntax {
                pos: start,
                msg: "malformed number".into(),
            });
        }
        if matches!(self.peek(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        text.parse::<f64>().map(Expr::Num).map_err(|_| FieldError::Syntax {
            pos: start,
            msg: format!("malformed number {text:?}"),
        })
    }
}

fn const_value(e: &Expr) -> Option<f64> {
    if e.max_var().is_some() {
        return None;
    }
    e.eval::<f64>(&[], &[]).ok()
}
