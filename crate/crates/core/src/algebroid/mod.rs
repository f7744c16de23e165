//! Carrollian Lie algebroids in a local frame.
//!
//! A model over a chart with coordinates `x^i` is given by the anchor matrix
//! `rho^i_a`, structure functions `C^c_ab` (`[e_a, e_b] = C^c_ab e_c`), a
//! symmetric degenerate metric `g_ab`, and a kernel frame `sigma^a`. Brackets
//! of arbitrary sections are recovered from the frame data by the Leibniz rule.

mod checks;
mod killing;
mod morphism;
mod quotient;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dual::{lift, split, Dual, Scalar};
use crate::fields::{Chart, FieldError, ScalarField};
use crate::linalg;
use crate::sampling::Sampling;

pub(crate) use checks::kernel_dimension;
pub use checks::{anchor_morphism_residual, jacobi_residual, validate, Bound, CheckResult, ValidationReport};
pub use killing::{
    is_infinitesimal_symmetry, is_killing, is_stationary, lie_derivative_metric, KillingCheck, SymmetryCheck,
};
pub use morphism::{verify_morphism, Morphism};
pub use quotient::{induced_spatial_metric, quotient_gram, quotient_metric, QuotientMetric};

/// Norm below which the kernel frame counts as vanishing.
pub const SIGMA_MIN_NORM: f64 = 1e-10;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum AlgebroidError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("malformed model: {0}")]
    Model(String),
    #[error("kernel frame degenerate at {point:?} (|sigma| = {norm:.3e})")]
    DegenerateFrame { point: Vec<f64>, norm: f64 },
    #[error("metric kernel has rank {found} at {point:?}, expected 1")]
    InconsistentKernel { point: Vec<f64>, found: usize },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// One stored structure function `C^upper_{lower.0 lower.1}` with `lower.0 < lower.1`
/// (0-based); the entry with swapped lower indices is its negative.
#[derive(Clone, Debug)]
pub struct StructureEntry {
    pub lower: (usize, usize),
    pub upper: usize,
    pub field: ScalarField,
}

/// Provenance carried along with a model (preset name, fixed conventions).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct AlgebroidModel {
    chart: Chart,
    rank: usize,
    anchor: Vec<ScalarField>,
    structure: Vec<StructureEntry>,
    metric: Vec<ScalarField>,
    sigma: Vec<ScalarField>,
    pub meta: ModelMeta,
}

/// Frame data evaluated at one point over carrier `S`.
#[derive(Clone, Debug)]
pub struct Frame<S> {
    pub n: usize,
    pub k: usize,
    /// `anchor[i * k + a] = rho^i_a`
    pub anchor: Vec<S>,
    /// `structure[(c * k + a) * k + b] = C^c_ab`
    pub structure: Vec<S>,
    /// `metric[a * k + b] = g_ab`
    pub metric: Vec<S>,
    pub sigma: Vec<S>,
}

impl<S: Scalar> Frame<S> {
    pub fn rho(&self, i: usize, a: usize) -> &S {
        &self.anchor[i * self.k + a]
    }

    pub fn c(&self, c: usize, a: usize, b: usize) -> &S {
        &self.structure[(c * self.k + a) * self.k + b]
    }

    pub fn g(&self, a: usize, b: usize) -> &S {
        &self.metric[a * self.k + b]
    }

    /// `rho_a(f) = rho^i_a d_i f` given the gradient of `f`.
    pub fn along(&self, a: usize, grad: &[S]) -> S {
        (0..self.n).fold(S::zero(), |acc, i| acc + self.rho(i, a).clone() * grad[i].clone())
    }

    /// Anchor image `rho^i_a u^a`.
    pub fn anchor_of(&self, u: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| (0..self.k).fold(S::zero(), |acc, a| acc + self.rho(i, a).clone() * u[a].clone()))
            .collect()
    }

    /// Metric pairing `g(u, v)`.
    pub fn pair(&self, u: &[S], v: &[S]) -> S {
        let mut acc = S::zero();
        for a in 0..self.k {
            for b in 0..self.k {
                acc = acc + self.g(a, b).clone() * u[a].clone() * v[b].clone();
            }
        }
        acc
    }
}

impl<S: Scalar> Frame<Dual<S>> {
    /// Values and coordinate derivatives (`grads[i]` holds `d_i` of every entry).
    pub fn split(self) -> (Frame<S>, Vec<Frame<S>>) {
        let (n, k) = (self.n, self.k);
        let (anchor, da) = split(self.anchor, n);
        let (structure, dc) = split(self.structure, n);
        let (metric, dg) = split(self.metric, n);
        let (sigma, ds) = split(self.sigma, n);
        let grads = da
            .into_iter()
            .zip(dc)
            .zip(dg)
            .zip(ds)
            .map(|(((anchor, structure), metric), sigma)| Frame {
                n,
                k,
                anchor,
                structure,
                metric,
                sigma,
            })
            .collect();
        (
            Frame {
                n,
                k,
                anchor,
                structure,
                metric,
                sigma,
            },
            grads,
        )
    }
}

impl AlgebroidModel {
    /// Assemble a model, checking shapes and index ranges.
    ///
    /// `anchor[i][a] = rho^i_a`; only the upper triangle of `metric` is read.
    pub fn new(
        chart: Chart,
        rank: usize,
        anchor: Vec<Vec<ScalarField>>,
        structure: Vec<StructureEntry>,
        metric: Vec<Vec<ScalarField>>,
        sigma: Vec<ScalarField>,
    ) -> Result<Self, AlgebroidError> {
        let n = chart.dim();
        let k = rank;
        let bad = |m: String| Err(AlgebroidError::Model(m));
        if k == 0 {
            return bad("rank must be at least 1".into());
        }
        if anchor.len() != n || anchor.iter().any(|row| row.len() != k) {
            return bad(format!("anchor must be {n}x{k}"));
        }
        if metric.len() != k || metric.iter().any(|row| row.len() != k) {
            return bad(format!("metric must be {k}x{k}"));
        }
        if sigma.len() != k {
            return bad(format!("sigma must have {k} components"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &structure {
            let (a, b) = e.lower;
            if a >= b || b >= k || e.upper >= k {
                return bad(format!(
                    "structure entry lower=({}, {}) upper={} out of range or not a < b",
                    a + 1,
                    b + 1,
                    e.upper + 1
                ));
            }
            if !seen.insert((a, b, e.upper)) {
                return bad(format!(
                    "duplicate structure entry lower=({}, {}) upper={}",
                    a + 1,
                    b + 1,
                    e.upper + 1
                ));
            }
        }
        let mut full_metric = Vec::with_capacity(k * k);
        for a in 0..k {
            for b in 0..k {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                full_metric.push(metric[lo][hi].clone());
            }
        }
        let model = AlgebroidModel {
            chart,
            rank: k,
            anchor: anchor.into_iter().flatten().collect(),
            structure,
            metric: full_metric,
            sigma,
            meta: ModelMeta::default(),
        };
        if let Some(v) = model.all_fields().filter_map(|f| f.expr().max_var()).max() {
            if v >= n {
                return bad(format!("field references coordinate {v} on a {n}-dim chart"));
            }
        }
        Ok(model)
    }

    pub fn with_meta(mut self, meta: ModelMeta) -> Self {
        self.meta = meta;
        self
    }

    fn all_fields(&self) -> impl Iterator<Item = &ScalarField> {
        self.anchor
            .iter()
            .chain(self.structure.iter().map(|e| &e.field))
            .chain(&self.metric)
            .chain(&self.sigma)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn anchor_field(&self, i: usize, a: usize) -> &ScalarField {
        &self.anchor[i * self.rank + a]
    }

    pub fn structure_entries(&self) -> &[StructureEntry] {
        &self.structure
    }

    pub fn metric_field(&self, a: usize, b: usize) -> &ScalarField {
        &self.metric[a * self.rank + b]
    }

    pub fn sigma_fields(&self) -> &[ScalarField] {
        &self.sigma
    }

    pub fn sigma_section(&self) -> Section {
        Section::new(self.sigma.clone())
    }

    /// Copy of the model with a different metric (upper triangle read).
    pub fn with_metric(&self, metric: Vec<Vec<ScalarField>>) -> Result<Self, AlgebroidError> {
        let anchor = self.anchor_rows();
        Ok(AlgebroidModel::new(
            self.chart.clone(),
            self.rank,
            anchor,
            self.structure.clone(),
            metric,
            self.sigma.clone(),
        )?
        .with_meta(self.meta.clone()))
    }

    pub fn with_sigma(&self, sigma: Vec<ScalarField>) -> Result<Self, AlgebroidError> {
        Ok(AlgebroidModel::new(
            self.chart.clone(),
            self.rank,
            self.anchor_rows(),
            self.structure.clone(),
            self.metric_rows(),
            sigma,
        )?
        .with_meta(self.meta.clone()))
    }

    pub fn with_structure(&self, structure: Vec<StructureEntry>) -> Result<Self, AlgebroidError> {
        Ok(AlgebroidModel::new(
            self.chart.clone(),
            self.rank,
            self.anchor_rows(),
            structure,
            self.metric_rows(),
            self.sigma.clone(),
        )?
        .with_meta(self.meta.clone()))
    }

    pub fn anchor_rows(&self) -> Vec<Vec<ScalarField>> {
        self.anchor.chunks(self.rank).map(|r| r.to_vec()).collect()
    }

    pub fn metric_rows(&self) -> Vec<Vec<ScalarField>> {
        self.metric.chunks(self.rank).map(|r| r.to_vec()).collect()
    }

    /// Evaluate all frame data at `x`.
    pub fn frame<S: Scalar>(&self, x: &[S]) -> Result<Frame<S>, AlgebroidError> {
        let k = self.rank;
        let eval_all = |fs: &[ScalarField]| -> Result<Vec<S>, FieldError> { fs.iter().map(|f| f.eval(x)).collect() };
        let mut structure = vec![S::zero(); k * k * k];
        for e in &self.structure {
            let (a, b) = e.lower;
            let v = e.field.eval(x)?;
            structure[(e.upper * k + b) * k + a] = -v.clone();
            structure[(e.upper * k + a) * k + b] = v;
        }
        Ok(Frame {
            n: self.dim(),
            k,
            anchor: eval_all(&self.anchor)?,
            structure,
            metric: eval_all(&self.metric)?,
            sigma: eval_all(&self.sigma)?,
        })
    }

    /// Frame data and its first coordinate derivatives.
    pub fn frame_with_grad<S: Scalar>(&self, x: &[S]) -> Result<(Frame<S>, Vec<Frame<S>>), AlgebroidError> {
        Ok(self.frame::<Dual<S>>(&lift(x))?.split())
    }

    /// Frame values at a plain point, checked against the chart.
    pub fn frame_at(&self, x: &[f64]) -> Result<Frame<f64>, AlgebroidError> {
        self.chart.check_point(x)?;
        self.frame(x)
    }
}

/// A section `u = u^a e_a` with field components.
#[derive(Clone, Debug)]
pub struct Section {
    pub comps: Vec<ScalarField>,
}

impl Section {
    pub fn new(comps: Vec<ScalarField>) -> Self {
        Section { comps }
    }

    pub fn constant(values: &[f64]) -> Self {
        Section::new(values.iter().map(|v| ScalarField::constant(*v)).collect())
    }

    /// The frame element `e_a` of a rank-`k` bundle.
    pub fn basis(k: usize, a: usize) -> Self {
        Section::constant(&(0..k).map(|b| if a == b { 1.0 } else { 0.0 }).collect::<Vec<_>>())
    }

    pub fn parse(texts: &[&str], chart: &Chart) -> Result<Self, FieldError> {
        Ok(Section::new(
            texts
                .iter()
                .map(|t| ScalarField::parse(t, chart))
                .collect::<Result<_, _>>()?,
        ))
    }

    /// `f * u`
    pub fn scaled(&self, f: &ScalarField) -> Section {
        Section::new(self.comps.iter().map(|c| f * c).collect())
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, FieldError> {
        self.comps.iter().map(|c| c.eval(x)).collect()
    }

    /// Components and their gradients: `grads[i][a] = d_i u^a`.
    pub fn eval_with_grad<S: Scalar>(&self, x: &[S]) -> Result<(Vec<S>, Vec<Vec<S>>), FieldError> {
        let lifted: Vec<Dual<S>> = self.eval(&lift(x))?;
        Ok(split(lifted, x.len()))
    }
}

/// A one-form `omega = omega_a e^a`.
#[derive(Clone, Debug)]
pub struct DualForm {
    pub comps: Vec<ScalarField>,
}

impl DualForm {
    pub fn eval<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>, FieldError> {
        self.comps.iter().map(|c| c.eval(x)).collect()
    }
}

/// `omega_a = sigma_a / |sigma|^2`, so `omega(sigma) = 1` identically.
///
/// Fails if the kernel frame nearly vanishes at a validation sample.
pub fn default_dual_form(model: &AlgebroidModel) -> Result<DualForm, AlgebroidError> {
    for p in Sampling::default().points(model.chart()) {
        let s: Vec<f64> = model.sigma.iter().map(|f| f.value(&p)).collect::<Result<_, _>>()?;
        let norm = linalg::norm(&s);
        if !(norm >= SIGMA_MIN_NORM) {
            return Err(AlgebroidError::DegenerateFrame { point: p, norm });
        }
    }
    let norm2 = model.sigma.iter().fold(ScalarField::zero(), |acc, s| &acc + &(s * s));
    Ok(DualForm {
        comps: model.sigma.iter().map(|s| s.div(&norm2)).collect(),
    })
}

/// Pointwise dual form value `sigma / |sigma|^2` over any carrier.
pub fn dual_form_at<S: Scalar>(sigma: &[S]) -> Vec<S> {
    let n2 = sigma.iter().fold(S::zero(), |acc, s| acc + s.clone() * s.clone());
    sigma.iter().map(|s| s.clone() / n2.clone()).collect()
}

/// Part of `v` transverse to the kernel line: `v - sigma * omega(v)`.
pub fn transverse<S: Scalar>(sigma: &[S], omega: &[S], v: &[S]) -> Vec<S> {
    let w = omega
        .iter()
        .zip(v)
        .fold(S::zero(), |acc, (o, x)| acc + o.clone() * x.clone());
    v.iter()
        .zip(sigma)
        .map(|(x, s)| x.clone() - s.clone() * w.clone())
        .collect()
}

/// `[u, v]^d = u^a v^b C^d_ab + rho_u(v^d) - rho_v(u^d)` from component values
/// and gradients (`grad[i][a]`).
pub fn bracket_values<S: Scalar>(frame: &Frame<S>, u: &[S], du: &[Vec<S>], v: &[S], dv: &[Vec<S>]) -> Vec<S> {
    let k = frame.k;
    let xu = frame.anchor_of(u);
    let xv = frame.anchor_of(v);
    (0..k)
        .map(|d| {
            let mut acc = S::zero();
            for a in 0..k {
                for b in 0..k {
                    acc = acc + u[a].clone() * v[b].clone() * frame.c(d, a, b).clone();
                }
            }
            for i in 0..frame.n {
                acc = acc + xu[i].clone() * dv[i][d].clone() - xv[i].clone() * du[i][d].clone();
            }
            acc
        })
        .collect()
}

/// Bracket of two sections at `x`.
pub fn bracket_sections(
    model: &AlgebroidModel,
    u: &Section,
    v: &Section,
    x: &[f64],
) -> Result<Vec<f64>, AlgebroidError> {
    check_section(model, u)?;
    check_section(model, v)?;
    let frame = model.frame_at(x)?;
    let (uv, du) = u.eval_with_grad(x)?;
    let (vv, dv) = v.eval_with_grad(x)?;
    Ok(bracket_values(&frame, &uv, &du, &vv, &dv))
}

/// Anchor image of a section at `x`.
pub fn anchor_of_section(model: &AlgebroidModel, u: &Section, x: &[f64]) -> Result<Vec<f64>, AlgebroidError> {
    check_section(model, u)?;
    let frame = model.frame_at(x)?;
    Ok(frame.anchor_of(&u.eval(x)?))
}

pub(crate) fn check_section(model: &AlgebroidModel, u: &Section) -> Result<(), AlgebroidError> {
    if u.len() != model.rank() {
        return Err(AlgebroidError::Dimension(format!(
            "section has {} components, rank is {}",
            u.len(),
            model.rank()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn vector_field_line_bracket() {
        let m = presets::vector_field_line(&["y", "0"]).unwrap();
        let chart = m.chart().clone();
        let u = Section::constant(&[1.0]);
        let v = Section::parse(&["x"], &chart).unwrap();
        let b = bracket_sections(&m, &u, &v, &[1.0, 2.0]).unwrap();
        assert_eq!(b, vec![2.0]);
    }

    #[test]
    fn self_bracket_vanishes() {
        let m = presets::action_gl2();
        let u = Section::parse(&["x*y", "1", "sin(x)", "y^2"], m.chart()).unwrap();
        let b = bracket_sections(&m, &u, &u, &[0.3, -1.1]).unwrap();
        assert!(b.iter().all(|v| v.abs() <= 1e-14));
    }

    #[test]
    fn gl2_commutator_of_off_diagonal_units() {
        let m = presets::action_gl2();
        let e12 = Section::basis(4, 1);
        let e21 = Section::basis(4, 2);
        let b = bracket_sections(&m, &e12, &e21, &[1.0, 2.0]).unwrap();
        // Opposite commutator: -(E11 - E22).
        assert_eq!(b, vec![-1.0, 0.0, 0.0, 1.0]);
        let alg = presets::lie_algebra_gl2();
        let b = bracket_sections(&alg, &e12, &e21, &[]).unwrap();
        assert_eq!(b, vec![1.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn anchor_examples() {
        let flat = presets::flat_carroll(3).unwrap();
        let x = vec![0.1, 0.2, 0.3];
        assert_eq!(
            anchor_of_section(&flat, &Section::basis(3, 0), &x).unwrap(),
            vec![1.0, 0.0, 0.0]
        );
        let vfl = presets::vector_field_line(&["y", "0"]).unwrap();
        assert_eq!(
            anchor_of_section(&vfl, &Section::constant(&[1.0]), &[1.0, 2.0]).unwrap(),
            vec![2.0, 0.0]
        );
        let gl2 = presets::action_gl2();
        assert_eq!(
            anchor_of_section(&gl2, &Section::basis(4, 0), &[1.0, 2.0]).unwrap(),
            vec![1.0, 0.0]
        );
    }

    #[test]
    fn dual_form_normalization() {
        let flat = presets::flat_carroll(3).unwrap();
        let w = default_dual_form(&flat).unwrap();
        assert_eq!(w.eval(&[0.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 1.0]);

        let chart = Chart::from_bounds(&["x"], &[-1.0], &[1.0]).unwrap();
        let m = AlgebroidModel::new(
            chart,
            2,
            vec![vec![ScalarField::zero(), ScalarField::zero()]],
            vec![],
            vec![vec![ScalarField::constant(16.0), ScalarField::constant(-12.0)]; 2]
                .into_iter()
                .enumerate()
                .map(|(i, mut r)| {
                    if i == 1 {
                        r[1] = ScalarField::constant(9.0);
                    }
                    r
                })
                .collect(),
            vec![ScalarField::constant(3.0), ScalarField::constant(4.0)],
        )
        .unwrap();
        let w = default_dual_form(&m).unwrap();
        let v = w.eval(&[0.0]).unwrap();
        assert!((v[0] - 0.12).abs() < 1e-15 && (v[1] - 0.16).abs() < 1e-15);
    }

    #[test]
    fn zero_sigma_is_degenerate() {
        let flat = presets::flat_carroll(2).unwrap();
        let m = flat.with_sigma(vec![ScalarField::zero(); 2]).unwrap();
        assert!(matches!(
            default_dual_form(&m),
            Err(AlgebroidError::DegenerateFrame { .. })
        ));
    }

    #[test]
    fn structural_checks() {
        let chart = Chart::from_bounds(&["x"], &[-1.0], &[1.0]).unwrap();
        let one = ScalarField::constant(1.0);
        let bad = AlgebroidModel::new(
            chart.clone(),
            2,
            vec![vec![one.clone(), one.clone()]],
            vec![StructureEntry {
                lower: (1, 0),
                upper: 0,
                field: one.clone(),
            }],
            vec![vec![one.clone(); 2]; 2],
            vec![one.clone(); 2],
        );
        assert!(matches!(bad, Err(AlgebroidError::Model(_))));
        let bad_anchor = AlgebroidModel::new(
            chart,
            2,
            vec![vec![one.clone()]],
            vec![],
            vec![vec![one.clone(); 2]; 2],
            vec![one; 2],
        );
        assert!(bad_anchor.is_err());
    }
}
