//! Smooth scalar fields on a chart and their order-2 jets.

mod chart;
pub mod expr;
mod parser;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

use crate::dual::{lift, split, Dual, Scalar};

pub use chart::Chart;
pub use expr::{Expr, Func};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier {name:?} at offset {pos}")]
    UnknownIdentifier { name: String, pos: usize },
    #[error("unknown function {name:?} at offset {pos}")]
    UnknownFunction { name: String, pos: usize },
    #[error("domain error ({what}) in `{expr}`")]
    Domain { what: String, expr: String },
    #[error("point has {got} coordinates, chart has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("point {0:?} lies outside the chart")]
    OutsideChart(Vec<f64>),
    #[error("invalid chart: {0}")]
    Chart(String),
}

/// Value, gradient and Hessian of a field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

/// A smooth function of the chart coordinates.
#[derive(Clone, Debug)]
pub struct ScalarField {
    expr: Arc<Expr>,
    names: Arc<[String]>,
}

impl ScalarField {
    pub fn parse(text: &str, chart: &Chart) -> Result<Self, FieldError> {
        let expr = parser::parse(text, chart.coords())?;
        Ok(ScalarField {
            expr: Arc::new(expr),
            names: chart.coords().into(),
        })
    }

    pub fn from_expr(expr: Expr, chart: &Chart) -> Self {
        ScalarField {
            expr: Arc::new(expr),
            names: chart.coords().into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField {
            expr: Arc::new(Expr::Num(c)),
            names: Arc::from(Vec::new()),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn as_const(&self) -> Option<f64> {
        self.expr.as_const()
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<S, FieldError> {
        self.expr.eval(x, &self.names)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, FieldError> {
        self.eval(x)
    }

    /// Value and gradient at carrier `S`.
    pub fn grad<S: Scalar>(&self, x: &[S]) -> Result<(S, Vec<S>), FieldError> {
        let d = self.eval(&lift(x))?;
        let (mut v, g) = split(vec![d], x.len());
        Ok((
            v.pop().expect("one value"),
            g.into_iter().map(|mut c| c.pop().expect("one")).collect(),
        ))
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet2, FieldError> {
        let n = x.len();
        let d: Dual<Dual<f64>> = self.eval(&lift(&lift(x)))?;
        let grad: Vec<f64> = (0..n).map(|i| d.re.d(i)).collect();
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                hess[i][j] = d.d(i).d(j);
            }
        }
        for i in 0..n {
            for j in 0..i {
                let s = 0.5 * (hess[i][j] + hess[j][i]);
                hess[i][j] = s;
                hess[j][i] = s;
            }
        }
        Ok(Jet2 {
            value: d.re.re,
            grad,
            hess,
        })
    }

    /// Partial derivative field along coordinate `i`.
    pub fn diff(&self, i: usize) -> ScalarField {
        ScalarField {
            expr: Arc::new(self.expr.diff(i)),
            names: self.names.clone(),
        }
    }

    fn combine(&self, other: &ScalarField, f: fn(Expr, Expr) -> Expr) -> ScalarField {
        let names = if self.names.len() >= other.names.len() {
            self.names.clone()
        } else {
            other.names.clone()
        };
        ScalarField {
            expr: Arc::new(f((*self.expr).clone(), (*other.expr).clone())),
            names,
        }
    }

    pub fn div(&self, other: &ScalarField) -> ScalarField {
        self.combine(other, expr::div)
    }

    pub fn powi(&self, n: i32) -> ScalarField {
        ScalarField {
            expr: Arc::new(expr::pow((*self.expr).clone(), n)),
            names: self.names.clone(),
        }
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.expr.render(&self.names))
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: Self) -> ScalarField {
        self.combine(rhs, expr::add)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: Self) -> ScalarField {
        self.combine(rhs, expr::sub)
    }
}

impl Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: Self) -> ScalarField {
        self.combine(rhs, expr::mul)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        ScalarField {
            expr: Arc::new(expr::neg((*self.expr).clone())),
            names: self.names.clone(),
        }
    }
}

/// Parse `text` as a field on `chart`.
pub fn parse_field(text: &str, chart: &Chart) -> Result<ScalarField, FieldError> {
    ScalarField::parse(text, chart)
}

/// Order-2 jet of `field` at `point`.
pub fn jet(field: &ScalarField, point: &[f64]) -> Result<Jet2, FieldError> {
    field.jet(point)
}
