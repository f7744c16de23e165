//! Expression trees: evaluation over any carrier, printing, and term-wise
//! differentiation used by model builders.

use std::fmt::{self, Write as _};

use crate::dual::Scalar;

use super::FieldError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Tanh,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn eval<S: Scalar>(&self, x: &[S], names: &[String]) -> Result<S, FieldError> {
        Ok(match self {
            Expr::Num(v) => S::cst(*v),
            Expr::Var(i) => x.get(*i).cloned().ok_or(FieldError::Dimension {
                expected: i + 1,
                got: x.len(),
            })?,
            Expr::Neg(a) => -a.eval(x, names)?,
            Expr::Add(a, b) => a.eval(x, names)? + b.eval(x, names)?,
            Expr::Sub(a, b) => a.eval(x, names)? - b.eval(x, names)?,
            Expr::Mul(a, b) => a.eval(x, names)? * b.eval(x, names)?,
            Expr::Div(a, b) => {
                let num = a.eval(x, names)?;
                let den = b.eval(x, names)?;
                if den.value() == 0.0 {
                    return Err(self.domain("division by zero", names));
                }
                num / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval(x, names)?;
                if *n < 0 && base.value() == 0.0 {
                    return Err(self.domain("division by zero", names));
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => {
                let arg = a.eval(x, names)?;
                let out = match f {
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Tan => arg.tan(),
                    Func::Exp => arg.exp(),
                    Func::Tanh => arg.tanh(),
                    Func::Log => {
                        if arg.value() <= 0.0 {
                            return Err(self.domain("log of nonpositive argument", names));
                        }
                        arg.ln()
                    }
                    Func::Sqrt => {
                        if arg.value() <= 0.0 {
                            return Err(self.domain("sqrt of nonpositive argument", names));
                        }
                        arg.sqrt()
                    }
                };
                if !out.value().is_finite() {
                    return Err(self.domain("non-finite result", names));
                }
                out
            }
        })
    }

    fn domain(&self, what: &str, names: &[String]) -> FieldError {
        FieldError::Domain {
            what: what.to_string(),
            expr: self.render(names),
        }
    }

    /// Partial derivative with respect to variable `var`, lightly folded.
    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => Expr::Num(0.0),
            Expr::Var(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(mul(a.diff(var), (**b).clone()), mul((**a).clone(), b.diff(var))),
            Expr::Div(a, b) => {
                let num = sub(mul(a.diff(var), (**b).clone()), mul((**a).clone(), b.diff(var)));
                div(num, pow((**b).clone(), 2))
            }
            Expr::Pow(a, n) => mul(mul(Expr::Num(*n as f64), pow((**a).clone(), n - 1)), a.diff(var)),
            Expr::Call(f, a) => {
                let inner = a.diff(var);
                if inner.as_const() == Some(0.0) {
                    return Expr::Num(0.0);
                }
                let arg = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, arg),
                    Func::Cos => neg(call(Func::Sin, arg)),
                    Func::Tan => add(Expr::Num(1.0), pow(call(Func::Tan, arg), 2)),
                    Func::Exp => call(Func::Exp, arg),
                    Func::Log => div(Expr::Num(1.0), arg),
                    Func::Sqrt => div(Expr::Num(0.5), call(Func::Sqrt, arg)),
                    Func::Tanh => sub(Expr::Num(1.0), pow(call(Func::Tanh, arg), 2)),
                };
                mul(outer, inner)
            }
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        let mut s = String::new();
        self.write(&mut s, 0, names).expect("writing to a String");
        s
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    fn write(&self, out: &mut String, min_prec: u8, names: &[String]) -> fmt::Result {
        let paren = self.prec() < min_prec;
        if paren {
            out.push('(');
        }
        match self {
            Expr::Num(v) => write!(out, "{v:?}")?,
            Expr::Var(i) => match names.get(*i) {
                Some(name) => out.push_str(name),
                None => write!(out, "_{i}")?,
            },
            Expr::Neg(a) => {
                out.push('-');
                a.write(out, 3, names)?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write(out, 1, names)?;
                out.push_str(if matches!(self, Expr::Add(..)) { " + " } else { " - " });
                b.write(out, 2, names)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write(out, 2, names)?;
                out.push_str(if matches!(self, Expr::Mul(..)) { "*" } else { "/" });
                b.write(out, 3, names)?;
            }
            Expr::Pow(a, n) => {
                a.write(out, 5, names)?;
                if *n < 0 {
                    write!(out, "^({n})")?;
                } else {
                    write!(out, "^{n}")?;
                }
            }
            Expr::Call(f, a) => {
                out.push_str(f.name());
                out.push('(');
                a.write(out, 0, names)?;
                out.push(')');
            }
        }
        if paren {
            out.push(')');
        }
        Ok(())
    }
}

// Folding constructors. They only remove exact 0/1 identities and combine
// literals, so evaluation results are unchanged.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Num(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Num(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Expr::Num(x * y),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Num(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(0.0), _) => Expr::Num(0.0),
        (Some(x), Some(y)) if y != 0.0 => Expr::Num(x / y),
        (_, Some(1.0)) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, n: i32) -> Expr {
    match (n, a.as_const()) {
        (0, _) => Expr::Num(1.0),
        (1, _) => a,
        (_, Some(v)) if n > 0 => Expr::Num(v.powi(n)),
        _ => Expr::Pow(Box::new(a), n),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        vec!["x".into(), "y".into()]
    }

    #[test]
    fn diff_polynomial() {
        // d/dx (x^3*y) = 3*x^2*y
        let e = mul(pow(Expr::Var(0), 3), Expr::Var(1));
        let d = e.diff(0);
        let v = d.eval(&[2.0, 5.0], &names()).unwrap();
        assert_eq!(v, 60.0);
        assert_eq!(e.diff(1).eval(&[2.0, 5.0], &names()).unwrap(), 8.0);
    }

    #[test]
    fn diff_of_constant_folds_to_zero() {
        let e = call(Func::Sin, Expr::Num(0.3));
        assert_eq!(e.diff(0), Expr::Num(0.0));
    }

    #[test]
    fn render_respects_precedence() {
        let e = Expr::Sub(
            Box::new(Expr::Var(0)),
            Box::new(Expr::Add(Box::new(Expr::Var(1)), Box::new(Expr::Num(1.0)))),
        );
        assert_eq!(e.render(&names()), "x - (y + 1.0)");
        let p = Expr::Pow(Box::new(Expr::Neg(Box::new(Expr::Var(0)))), 2);
        assert_eq!(p.render(&names()), "(-x)^2");
    }

    #[test]
    fn domain_errors_name_subexpression() {
        let e = call(Func::Log, Expr::Var(0));
        match e.eval(&[-1.0, 0.0], &names()) {
            Err(FieldError::Domain { expr, .. }) => assert_eq!(expr, "log(x)"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
