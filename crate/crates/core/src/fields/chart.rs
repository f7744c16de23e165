use serde::{Deserialize, Serialize};

use super::FieldError;

/// Bounded coordinate box on which every field of a model lives.
///
/// A zero-dimensional chart is a single point (Lie algebras over a point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    coords: Vec<String>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Chart {
    pub fn new(coords: Vec<String>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, FieldError> {
        if lo.len() != coords.len() || hi.len() != coords.len() {
            return Err(FieldError::Chart(format!(
                "{} coordinates but {} lower and {} upper bounds",
                coords.len(),
                lo.len(),
                hi.len()
            )));
        }
        for (i, name) in coords.iter().enumerate() {
            if !is_identifier(name) {
                return Err(FieldError::Chart(format!(
                    "coordinate name {name:?} is not an identifier"
                )));
            }
            if super::expr::Func::from_name(name).is_some() {
                return Err(FieldError::Chart(format!(
                    "coordinate name {name:?} shadows a function"
                )));
            }
            if coords[..i].contains(name) {
                return Err(FieldError::Chart(format!("duplicate coordinate {name:?}")));
            }
            if !(lo[i].is_finite() && hi[i].is_finite() && lo[i] < hi[i]) {
                return Err(FieldError::Chart(format!(
                    "bounds for {name} must satisfy lo < hi, got [{}, {}]",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(Chart { coords, lo, hi })
    }

    /// Convenience constructor from string slices.
    pub fn from_bounds(names: &[&str], lo: &[f64], hi: &[f64]) -> Result<Self, FieldError> {
        Chart::new(names.iter().map(|s| s.to_string()).collect(), lo.to_vec(), hi.to_vec())
    }

    /// The single-point chart.
    pub fn point() -> Self {
        Chart {
            coords: Vec::new(),
            lo: Vec::new(),
            hi: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == name)
    }

    /// Euclidean length of the box diagonal (0 for the point chart).
    pub fn diagonal(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// Map unit-cube coordinates onto the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(t, (l, h))| l + (h - l) * t)
            .collect()
    }

    pub fn check_point(&self, x: &[f64]) -> Result<(), FieldError> {
        if x.len() != self.dim() {
            return Err(FieldError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(FieldError::OutsideChart(x.to_vec()));
        }
        Ok(())
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
