//! Algebroid connections `nabla_{e_a} e_b = Gamma^c_ab e_c`: torsion,
//! curvature, non-metricity, Bianchi identities, and constructed connections.
//!
//! Constructed connections are pipelines re-evaluated pointwise over any
//! [`Scalar`] carrier, so their coordinate derivatives (needed for curvature
//! and the differential Bianchi identity) come out of the same code path as
//! their values. Underdetermined systems are resolved by the minimum-norm
//! solution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebroid::{
    self, default_dual_form, dual_form_at, is_stationary, transverse, AlgebroidError, AlgebroidModel, Frame, Section,
    StructureEntry,
};
use crate::dual::{lift, split, Dual, Scalar};
use crate::fields::{FieldError, ScalarField};
use crate::linalg::{self, LinalgError};
use crate::sampling::Sampling;

/// Absolute residual above which a pointwise solve counts as inconsistent.
pub const SOLVE_TOL: f64 = 1e-8;

/// Gauge used to pick one solution of the underdetermined systems.
pub const GAUGE: &str = "minimum Euclidean norm (SVD cutoff 1e-10 relative)";

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ConnectionError {
    #[error(transparent)]
    Model(#[from] AlgebroidError),
    #[error("inconsistent linear system at {point:?}: residual {residual:.3e}")]
    Inconsistent { point: Vec<f64>, residual: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("malformed connection: {0}")]
    Shape(String),
}

impl From<FieldError> for ConnectionError {
    fn from(e: FieldError) -> Self {
        ConnectionError::Model(e.into())
    }
}

/// One coefficient `Gamma^c_ab` (0-based indices).
#[derive(Clone, Debug)]
pub struct GammaEntry {
    pub a: usize,
    pub b: usize,
    pub c: usize,
    pub field: ScalarField,
}

/// Connection coefficients, given or constructed.
#[derive(Clone, Debug)]
pub enum ConnectionField {
    Zero,
    /// Explicit coefficients; absent entries are zero.
    Table(Vec<GammaEntry>),
    /// `Gamma = Gamma0 - (nabla0_a sigma)^c omega_b`.
    LCompatible(Box<ConnectionField>),
    /// `Gamma0 + Gamma_A` with `Gamma_A` the minimum-norm solution of the
    /// metric compatibility system; with `frame_parallel`, the base is first
    /// made L-compatible and `Gamma_A(-, sigma) = 0` is imposed.
    MetricCompatible {
        base: Box<ConnectionField>,
        frame_parallel: bool,
    },
    /// Metric compatibility and vanishing torsion solved together.
    TorsionFree(Box<ConnectionField>),
    /// Minimal connection of a direct sum `A0 + L`: Levi-Civita on `A0`
    /// (computed on `sub`), `Gamma^d_{sigma b} = 1/2 g0^{dc} rho_sigma(g0_cb)`,
    /// everything else zero.
    MinimalDirectSum {
        sub: Box<AlgebroidModel>,
    },
}

#[inline]
pub fn idx(k: usize, c: usize, a: usize, b: usize) -> usize {
    (c * k + a) * k + b
}

#[inline]
fn idx4(k: usize, d: usize, c: usize, a: usize, b: usize) -> usize {
    ((d * k + c) * k + a) * k + b
}

fn point_of<S: Scalar>(x: &[S]) -> Vec<f64> {
    x.iter().map(Scalar::value).collect()
}

fn solve<S: Scalar>(rows: &[Vec<S>], rhs: &[S], cols: usize, x: &[S]) -> Result<Vec<S>, ConnectionError> {
    match linalg::min_norm_solve(rows, rhs, cols, SOLVE_TOL) {
        Ok(sol) => Ok(sol.x),
        Err(LinalgError::Inconsistent { residual }) => Err(ConnectionError::Inconsistent {
            point: point_of(x),
            residual,
        }),
        Err(LinalgError::Singular) => Err(ConnectionError::Inconsistent {
            point: point_of(x),
            residual: f64::NAN,
        }),
    }
}

/// `(nabla_a sigma)^c = rho_a(sigma^c) + Gamma^c_ab sigma^b`, indexed `[a][c]`.
fn nabla_sigma_of<S: Scalar>(f: &Frame<S>, grads: &[Frame<S>], gamma: &[S]) -> Vec<Vec<S>> {
    let k = f.k;
    (0..k)
        .map(|a| {
            (0..k)
                .map(|c| {
                    let ds: Vec<S> = grads.iter().map(|g| g.sigma[c].clone()).collect();
                    let mut v = f.along(a, &ds);
                    for b in 0..k {
                        v = v + gamma[idx(k, c, a, b)].clone() * f.sigma[b].clone();
                    }
                    v
                })
                .collect()
        })
        .collect()
}

/// `N_abc = rho_a(g_bc) - Gamma^d_ab g_dc - Gamma^d_ac g_bd`.
fn nonmetricity_of<S: Scalar>(f: &Frame<S>, grads: &[Frame<S>], gamma: &[S]) -> Vec<S> {
    let k = f.k;
    let mut out = Vec::with_capacity(k * k * k);
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                let dg: Vec<S> = grads.iter().map(|g| g.g(b, c).clone()).collect();
                let mut v = f.along(a, &dg);
                for d in 0..k {
                    v = v
                        - gamma[idx(k, d, a, b)].clone() * f.g(d, c).clone()
                        - gamma[idx(k, d, a, c)].clone() * f.g(b, d).clone();
                }
                out.push(v);
            }
        }
    }
    out
}

fn l_correct<S: Scalar>(f: &Frame<S>, grads: &[Frame<S>], gamma0: &[S]) -> Vec<S> {
    let k = f.k;
    let ns = nabla_sigma_of(f, grads, gamma0);
    let omega = dual_form_at(&f.sigma);
    let mut out = gamma0.to_vec();
    for c in 0..k {
        for a in 0..k {
            for b in 0..k {
                let i = idx(k, c, a, b);
                out[i] = out[i].clone() - ns[a][c].clone() * omega[b].clone();
            }
        }
    }
    out
}
/// Coefficient rows and right-hand side.
pub type LinearSystem<S> = (Vec<Vec<S>>, Vec<S>);

/// Rows of the metric compatibility system for fixed `a`, unknowns
/// `X_db = Gamma_A^d_ab` at position `d * k + b`; one row per `b <= c`.
fn metric_rows<S: Scalar>(f: &Frame<S>, n0: &[S], a: usize) -> LinearSystem<S> {
    let k = f.k;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for b in 0..k {
        for c in b..k {
            let mut row = vec![S::zero(); k * k];
            for d in 0..k {
                row[d * k + b] = row[d * k + b].clone() + f.g(d, c).clone();
                row[d * k + c] = row[d * k + c].clone() + f.g(b, d).clone();
            }
            rows.push(row);
            rhs.push(n0[(a * k + b) * k + c].clone());
        }
    }
    (rows, rhs)
}

/// Pointwise metric compatibility systems (one per first index `a`) for the
/// given base connection, as solved by [`ConnectionField::MetricCompatible`].
pub fn metric_compatibility_system<S: Scalar>(
    model: &AlgebroidModel,
    base: &ConnectionField,
    x: &[S],
    frame_parallel: bool,
) -> Result<Vec<LinearSystem<S>>, ConnectionError> {
    let (f, grads) = model.frame_with_grad(x)?;
    let mut g0 = base.eval(model, x)?;
    if frame_parallel {
        g0 = l_correct(&f, &grads, &g0);
    }
    let n0 = nonmetricity_of(&f, &grads, &g0);
    let k = f.k;
    Ok((0..k)
        .map(|a| {
            let (mut rows, mut rhs) = metric_rows(&f, &n0, a);
            if frame_parallel {
                for c in 0..k {
                    let mut row = vec![S::zero(); k * k];
                    for b in 0..k {
                        row[c * k + b] = f.sigma[b].clone();
                    }
                    rows.push(row);
                    rhs.push(S::zero());
                }
            }
            (rows, rhs)
        })
        .collect())
}

/// Stacked torsion and metric system over all `k^3` unknowns
/// `Gamma_A^c_ab` at position `idx(k, c, a, b)`.
pub fn torsion_free_system<S: Scalar>(
    model: &AlgebroidModel,
    base: &ConnectionField,
    x: &[S],
) -> Result<LinearSystem<S>, ConnectionError> {
    let (f, grads) = model.frame_with_grad(x)?;
    let g0 = base.eval(model, x)?;
    let k = f.k;
    let n0 = nonmetricity_of(&f, &grads, &g0);
    let t0 = torsion_values(&f, &g0);
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for c in 0..k {
        for a in 0..k {
            for b in a + 1..k {
                let mut row = vec![S::zero(); k * k * k];
                row[idx(k, c, a, b)] = S::cst(1.0);
                row[idx(k, c, b, a)] = S::cst(-1.0);
                rows.push(row);
                rhs.push(-t0[idx(k, c, a, b)].clone());
            }
        }
    }
    for a in 0..k {
        for b in 0..k {
            for c in b..k {
                let mut row = vec![S::zero(); k * k * k];
                for d in 0..k {
                    let i = idx(k, d, a, b);
                    row[i] = row[i].clone() + f.g(d, c).clone();
                    let j = idx(k, d, a, c);
                    row[j] = row[j].clone() + f.g(b, d).clone();
                }
                rows.push(row);
                rhs.push(n0[(a * k + b) * k + c].clone());
            }
        }
    }
    Ok((rows, rhs))
}

fn torsion_values<S: Scalar>(f: &Frame<S>, gamma: &[S]) -> Vec<S> {
    let k = f.k;
    let mut t = Vec::with_capacity(k * k * k);
    for c in 0..k {
        for a in 0..k {
            for b in 0..k {
                t.push(gamma[idx(k, c, a, b)].clone() - gamma[idx(k, c, b, a)].clone() - f.c(c, a, b).clone());
            }
        }
    }
    t
}

impl ConnectionField {
    pub fn table(entries: Vec<GammaEntry>) -> Self {
        ConnectionField::Table(entries)
    }

    pub fn describe(&self) -> String {
        match self {
            ConnectionField::Zero => "zero".into(),
            ConnectionField::Table(e) => format!("table({} entries)", e.len()),
            ConnectionField::LCompatible(b) => format!("l-compatible({})", b.describe()),
            ConnectionField::MetricCompatible {
                base,
                frame_parallel: false,
            } => {
                format!("carrollian({})", base.describe())
            }
            ConnectionField::MetricCompatible {
                base,
                frame_parallel: true,
            } => {
                format!("frame-parallel({})", base.describe())
            }
            ConnectionField::TorsionFree(b) => format!("torsion-free({})", b.describe()),
            ConnectionField::MinimalDirectSum { .. } => "minimal-direct-sum".into(),
        }
    }

    fn check_shape(&self, model: &AlgebroidModel) -> Result<(), ConnectionError> {
        let k = model.rank();
        match self {
            ConnectionField::Table(entries) => {
                for e in entries {
                    if e.a >= k || e.b >= k || e.c >= k {
                        return Err(ConnectionError::Shape(format!(
                            "index ({}, {}, {}) out of range for rank {k}",
                            e.a + 1,
                            e.b + 1,
                            e.c + 1
                        )));
                    }
                }
                Ok(())
            }
            ConnectionField::LCompatible(b) | ConnectionField::TorsionFree(b) => b.check_shape(model),
            ConnectionField::MetricCompatible { base, .. } => base.check_shape(model),
            ConnectionField::MinimalDirectSum { sub } => {
                if sub.rank() + 1 != k {
                    return Err(ConnectionError::Shape("direct-sum block has the wrong rank".into()));
                }
                Ok(())
            }
            ConnectionField::Zero => Ok(()),
        }
    }

    /// Coefficients at `x`, `out[idx(k, c, a, b)] = Gamma^c_ab`.
    pub fn eval<S: Scalar>(&self, model: &AlgebroidModel, x: &[S]) -> Result<Vec<S>, ConnectionError> {
        let k = model.rank();
        match self {
            ConnectionField::Zero => Ok(vec![S::zero(); k * k * k]),
            ConnectionField::Table(entries) => {
                let mut out = vec![S::zero(); k * k * k];
                for e in entries {
                    out[idx(k, e.c, e.a, e.b)] = e.field.eval(x)?;
                }
                Ok(out)
            }
            ConnectionField::LCompatible(base) => {
                let g0 = base.eval(model, x)?;
                let (f, grads) = model.frame_with_grad(x)?;
                Ok(l_correct(&f, &grads, &g0))
            }
            ConnectionField::MetricCompatible { base, frame_parallel } => {
                let (f, grads) = model.frame_with_grad(x)?;
                let mut g0 = base.eval(model, x)?;
                if *frame_parallel {
                    g0 = l_correct(&f, &grads, &g0);
                }
                let n0 = nonmetricity_of(&f, &grads, &g0);
                let mut out = g0;
                for a in 0..k {
                    let (mut rows, mut rhs) = metric_rows(&f, &n0, a);
                    if *frame_parallel {
                        for c in 0..k {
                            let mut row = vec![S::zero(); k * k];
                            for b in 0..k {
                                row[c * k + b] = f.sigma[b].clone();
                            }
                            rows.push(row);
                            rhs.push(S::zero());
                        }
                    }
                    let sol = solve(&rows, &rhs, k * k, x)?;
                    for d in 0..k {
                        for b in 0..k {
                            let i = idx(k, d, a, b);
                            out[i] = out[i].clone() + sol[d * k + b].clone();
                        }
                    }
                }
                Ok(out)
            }
            ConnectionField::TorsionFree(base) => {
                let g0 = base.eval(model, x)?;
                let (rows, rhs) = torsion_free_system(model, base, x)?;
                let sol = solve(&rows, &rhs, k * k * k, x)?;
                Ok(g0.into_iter().zip(sol).map(|(a, b)| a + b).collect())
            }
            ConnectionField::MinimalDirectSum { sub } => {
                let m = k - 1;
                let lc = ConnectionField::TorsionFree(Box::new(ConnectionField::Zero)).eval(sub, x)?;
                let (f, grads) = model.frame_with_grad(x)?;
                let mut out = vec![S::zero(); k * k * k];
                for d in 0..m {
                    for a in 0..m {
                        for b in 0..m {
                            out[idx(k, d, a, b)] = lc[idx(m, d, a, b)].clone();
                        }
                    }
                }
                // rho_sigma(g0_cb) and g0^{-1}, column by column.
                let g0: Vec<Vec<S>> = (0..m).map(|c| (0..m).map(|b| f.g(c, b).clone()).collect()).collect();
                for b in 0..m {
                    let rhs: Vec<S> = (0..m)
                        .map(|c| {
                            let dg: Vec<S> = grads.iter().map(|g| g.g(c, b).clone()).collect();
                            f.along(m, &dg).scale(0.5)
                        })
                        .collect();
                    let col = linalg::solve_square(&g0, &rhs).map_err(|_| {
                        ConnectionError::Precondition(format!("metric block singular at {:?}", point_of(x)))
                    })?;
                    for d in 0..m {
                        out[idx(k, d, m, b)] = col[d].clone();
                    }
                }
                Ok(out)
            }
        }
    }

    /// Plain coefficient values at a chart point.
    pub fn values(&self, model: &AlgebroidModel, x: &[f64]) -> Result<Vec<f64>, ConnectionError> {
        model.chart().check_point(x).map_err(AlgebroidError::from)?;
        self.eval(model, x)
    }
}

/// Antisymmetric in `(a, b)`: `T^c_ab` at `data[idx(k, c, a, b)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorsionTensor {
    pub k: usize,
    pub data: Vec<f64>,
}

impl TorsionTensor {
    pub fn get(&self, c: usize, a: usize, b: usize) -> f64 {
        self.data[idx(self.k, c, a, b)]
    }
}

/// `R^d_cab` (antisymmetric in `a, b`): `(R(e_a, e_b) e_c)^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureTensor {
    pub k: usize,
    pub data: Vec<f64>,
}

impl CurvatureTensor {
    pub fn get(&self, d: usize, c: usize, a: usize, b: usize) -> f64 {
        self.data[idx4(self.k, d, c, a, b)]
    }
}

/// `N_abc = (nabla_a g)_bc`, symmetric in `b, c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonMetricity {
    pub k: usize,
    pub data: Vec<f64>,
}

impl NonMetricity {
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.k + b) * self.k + c]
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(self.data.iter().copied())
    }
}

/// `(nabla_u v)^c = u^a (rho_a(v^c) + Gamma^c_ab v^b)`.
pub fn covariant_derivative(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    u: &Section,
    v: &Section,
    x: &[f64],
) -> Result<Vec<f64>, ConnectionError> {
    let gamma = conn.values(model, x)?;
    let f = model.frame(x)?;
    let k = f.k;
    let uv = u.eval(x)?;
    let (vv, dv) = v.eval_with_grad(x)?;
    Ok((0..k)
        .map(|c| {
            let mut acc = 0.0;
            for a in 0..k {
                let dvc: Vec<f64> = dv.iter().map(|g| g[c]).collect();
                let mut inner = f.along(a, &dvc);
                for b in 0..k {
                    inner += gamma[idx(k, c, a, b)] * vv[b];
                }
                acc += uv[a] * inner;
            }
            acc
        })
        .collect())
}

pub fn torsion(model: &AlgebroidModel, conn: &ConnectionField, x: &[f64]) -> Result<TorsionTensor, ConnectionError> {
    let gamma = conn.values(model, x)?;
    let f = model.frame(x)?;
    Ok(TorsionTensor {
        k: f.k,
        data: torsion_values(&f, &gamma),
    })
}

/// `T(u, v) = nabla_u v - nabla_v u - [u, v]` computed from sections.
pub fn torsion_of_sections(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    u: &Section,
    v: &Section,
    x: &[f64],
) -> Result<Vec<f64>, ConnectionError> {
    let a = covariant_derivative(model, conn, u, v, x)?;
    let b = covariant_derivative(model, conn, v, u, x)?;
    let br = algebroid::bracket_sections(model, u, v, x)?;
    Ok((0..a.len()).map(|i| a[i] - b[i] - br[i]).collect())
}

fn torsion_generic<S: Scalar>(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    x: &[S],
) -> Result<Vec<S>, ConnectionError> {
    let gamma = conn.eval(model, x)?;
    let f = model.frame(x)?;
    Ok(torsion_values(&f, &gamma))
}

fn curvature_generic<S: Scalar>(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    x: &[S],
) -> Result<Vec<S>, ConnectionError> {
    let n = x.len();
    let lifted: Vec<Dual<S>> = conn.eval(model, &lift(x))?;
    let (gamma, dgamma) = split(lifted, n);
    let f = model.frame(x)?;
    let k = f.k;
    let rho_d = |a: usize, i: usize| -> S {
        let g: Vec<S> = dgamma.iter().map(|dg| dg[i].clone()).collect();
        f.along(a, &g)
    };
    let mut out = vec![S::zero(); k * k * k * k];
    for d in 0..k {
        for c in 0..k {
            for a in 0..k {
                for b in 0..k {
                    if b == a {
                        continue;
                    }
                    let mut v = rho_d(a, idx(k, d, b, c)) - rho_d(b, idx(k, d, a, c));
                    for e in 0..k {
                        v = v + gamma[idx(k, e, b, c)].clone() * gamma[idx(k, d, a, e)].clone()
                            - gamma[idx(k, e, a, c)].clone() * gamma[idx(k, d, b, e)].clone()
                            - f.c(e, a, b).clone() * gamma[idx(k, d, e, c)].clone();
                    }
                    out[idx4(k, d, c, a, b)] = v;
                }
            }
        }
    }
    Ok(out)
}

pub fn curvature(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    x: &[f64],
) -> Result<CurvatureTensor, ConnectionError> {
    model.chart().check_point(x).map_err(AlgebroidError::from)?;
    Ok(CurvatureTensor {
        k: model.rank(),
        data: curvature_generic(model, conn, x)?,
    })
}

pub fn nonmetricity(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    x: &[f64],
) -> Result<NonMetricity, ConnectionError> {
    let gamma = conn.values(model, x)?;
    let (f, grads) = model.frame_with_grad(x)?;
    Ok(NonMetricity {
        k: f.k,
        data: nonmetricity_of(&f, &grads, &gamma),
    })
}

/// `nabla_{e_a} sigma` at `x`, indexed `[a][c]`.
pub fn nabla_sigma(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    x: &[f64],
) -> Result<Vec<Vec<f64>>, ConnectionError> {
    let gamma = conn.values(model, x)?;
    let (f, grads) = model.frame_with_grad(x)?;
    Ok(nabla_sigma_of(&f, &grads, &gamma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BianchiResiduals {
    pub algebraic: f64,
    pub differential: f64,
}

/// Max-norms of the cyclic sums of the first and second Bianchi identities
/// (with torsion):
/// `S[R^d_cab - (nabla_a T)^d_bc - T^e_ab T^d_ec] = 0` over `(a, b, c)` and
/// `S[(nabla_e R)^d_cab + T^f_ea R^d_cfb] = 0` over `(e, a, b)`.
pub fn bianchi_residuals(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    x: &[f64],
) -> Result<BianchiResiduals, ConnectionError> {
    model.chart().check_point(x).map_err(AlgebroidError::from)?;
    let n = x.len();
    let lx = lift(x);
    let (r, dr) = split(curvature_generic::<Dual<f64>>(model, conn, &lx)?, n);
    let (t, dt) = split(torsion_generic::<Dual<f64>>(model, conn, &lx)?, n);
    let gamma = conn.eval(model, x)?;
    let f = model.frame(x)?;
    let k = f.k;
    let g = |c: usize, a: usize, b: usize| gamma[idx(k, c, a, b)];
    let tt = |c: usize, a: usize, b: usize| t[idx(k, c, a, b)];
    let rr = |d: usize, c: usize, a: usize, b: usize| r[idx4(k, d, c, a, b)];
    let along = |a: usize, grads: &Vec<Vec<f64>>, i: usize| -> f64 { (0..n).map(|j| f.rho(j, a) * grads[j][i]).sum() };

    // (nabla_a T)^d_bc
    let nabla_t = |a: usize, d: usize, b: usize, c: usize| -> f64 {
        let mut v = along(a, &dt, idx(k, d, b, c));
        for e in 0..k {
            v += g(d, a, e) * tt(e, b, c) - g(e, a, b) * tt(d, e, c) - g(e, a, c) * tt(d, b, e);
        }
        v
    };
    let first = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        let mut v = rr(d, c, a, b) - nabla_t(a, d, b, c);
        for e in 0..k {
            v -= tt(e, a, b) * tt(d, e, c);
        }
        v
    };
    let mut algebraic = 0.0f64;
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                for d in 0..k {
                    let s = first(a, b, c, d) + first(b, c, a, d) + first(c, a, b, d);
                    algebraic = algebraic.max(s.abs());
                }
            }
        }
    }

    // (nabla_e R)^d_cab
    let nabla_r = |e: usize, d: usize, c: usize, a: usize, b: usize| -> f64 {
        let mut v = along(e, &dr, idx4(k, d, c, a, b));
        for h in 0..k {
            v += g(d, e, h) * rr(h, c, a, b)
                - g(h, e, c) * rr(d, h, a, b)
                - g(h, e, a) * rr(d, c, h, b)
                - g(h, e, b) * rr(d, c, a, h);
        }
        v
    };
    let second = |e: usize, a: usize, b: usize, c: usize, d: usize| -> f64 {
        let mut v = nabla_r(e, d, c, a, b);
        for h in 0..k {
            v += tt(h, e, a) * rr(d, c, h, b);
        }
        v
    };
    let mut differential = 0.0f64;
    for e in 0..k {
        for a in 0..k {
            for b in 0..k {
                for c in 0..k {
                    for d in 0..k {
                        let s = second(e, a, b, c, d) + second(a, b, e, c, d) + second(b, e, a, c, d);
                        differential = differential.max(s.abs());
                    }
                }
            }
        }
    }
    Ok(BianchiResiduals {
        algebraic,
        differential,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityCheck {
    pub pass: bool,
    pub residual: f64,
}

/// Max over samples and `a` of `|(I - sigma omega) nabla_{e_a} sigma|`.
pub fn l_compatibility_residual(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    sampling: Sampling,
) -> Result<f64, ConnectionError> {
    let mut worst = 0.0f64;
    for p in sampling.points(model.chart()) {
        let ns = nabla_sigma(model, conn, &p)?;
        let f = model.frame(&p)?;
        let omega = dual_form_at(&f.sigma);
        for v in &ns {
            worst = worst.max(linalg::norm(&transverse(&f.sigma, &omega, v)));
        }
    }
    Ok(worst)
}

pub fn is_l_compatible(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    sampling: Sampling,
    tol: f64,
) -> Result<CompatibilityCheck, ConnectionError> {
    let residual = l_compatibility_residual(model, conn, sampling)?;
    Ok(CompatibilityCheck {
        pass: residual <= tol,
        residual,
    })
}

/// Residual summary of a connection at the samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionDiagnostics {
    pub nonmetricity: f64,
    pub l_compatibility: f64,
    /// Max `|nabla_{e_a} sigma|`.
    pub nabla_sigma: f64,
    pub torsion: f64,
    pub samples: usize,
    pub seed: u64,
}

pub fn diagnose(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    sampling: Sampling,
) -> Result<ConnectionDiagnostics, ConnectionError> {
    let mut d = ConnectionDiagnostics {
        nonmetricity: 0.0,
        l_compatibility: 0.0,
        nabla_sigma: 0.0,
        torsion: 0.0,
        samples: sampling.samples,
        seed: sampling.seed,
    };
    for p in sampling.points(model.chart()) {
        let gamma = conn.eval(model, &p)?;
        let (f, grads) = model.frame_with_grad(&p)?;
        d.nonmetricity = d.nonmetricity.max(linalg::max_abs(nonmetricity_of(&f, &grads, &gamma)));
        d.torsion = d.torsion.max(linalg::max_abs(torsion_values(&f, &gamma)));
        let omega = dual_form_at(&f.sigma);
        for v in nabla_sigma_of(&f, &grads, &gamma) {
            d.nabla_sigma = d.nabla_sigma.max(linalg::norm(&v));
            d.l_compatibility = d.l_compatibility.max(linalg::norm(&transverse(&f.sigma, &omega, &v)));
        }
    }
    Ok(d)
}

/// Evaluate at every validation sample so inconsistent systems surface early.
fn probe(model: &AlgebroidModel, conn: &ConnectionField) -> Result<(), ConnectionError> {
    for p in Sampling::default().points(model.chart()) {
        conn.eval(model, &p)?;
    }
    Ok(())
}

fn check_kernel_rank(model: &AlgebroidModel) -> Result<(), ConnectionError> {
    for p in Sampling::default().points(model.chart()) {
        let f = model.frame(&p)?;
        let kd = algebroid::kernel_dimension(&f.metric, f.k);
        if kd > 1 {
            return Err(ConnectionError::Precondition(format!(
                "metric kernel has rank {kd} at {p:?}; at most 1 is supported"
            )));
        }
    }
    Ok(())
}

/// `nabla = nabla0 - (nabla0 sigma) omega`, which makes the kernel frame parallel.
pub fn make_l_compatible(model: &AlgebroidModel, base: ConnectionField) -> Result<ConnectionField, ConnectionError> {
    base.check_shape(model)?;
    default_dual_form(model)?;
    let conn = ConnectionField::LCompatible(Box::new(base));
    probe(model, &conn)?;
    Ok(conn)
}

/// Correct `base` by the minimum-norm solution of the metric compatibility system.
pub fn make_metric_compatible(
    model: &AlgebroidModel,
    base: ConnectionField,
) -> Result<ConnectionField, ConnectionError> {
    base.check_shape(model)?;
    check_kernel_rank(model)?;
    let conn = ConnectionField::MetricCompatible {
        base: Box::new(base),
        frame_parallel: false,
    };
    probe(model, &conn)?;
    Ok(conn)
}

/// Metric compatible and L-compatible.
pub fn make_carrollian(model: &AlgebroidModel, base: ConnectionField) -> Result<ConnectionField, ConnectionError> {
    make_metric_compatible(model, base)
}

/// Carrollian connection with a parallel kernel frame.
pub fn make_frame_parallel_carrollian(
    model: &AlgebroidModel,
    base: ConnectionField,
) -> Result<ConnectionField, ConnectionError> {
    base.check_shape(model)?;
    check_kernel_rank(model)?;
    default_dual_form(model)?;
    let conn = ConnectionField::MetricCompatible {
        base: Box::new(base),
        frame_parallel: true,
    };
    probe(model, &conn)?;
    Ok(conn)
}

#[derive(Clone, Debug)]
pub enum TorsionFreeOutcome {
    Connection(ConnectionField),
    /// No torsion-free metric compatible correction exists at some sample.
    Infeasible {
        point: Vec<f64>,
        solve_residual: f64,
        stationarity_residual: f64,
        stationary: bool,
    },
}

/// Torsion-free Carrollian connection if one exists (it does exactly for
/// stationary models).
pub fn make_torsion_free_carrollian(
    model: &AlgebroidModel,
    base: ConnectionField,
) -> Result<TorsionFreeOutcome, ConnectionError> {
    base.check_shape(model)?;
    check_kernel_rank(model)?;
    let conn = ConnectionField::TorsionFree(Box::new(base));
    let sampling = Sampling::default();
    for p in sampling.points(model.chart()) {
        match conn.eval(model, &p) {
            Ok(_) => {}
            Err(ConnectionError::Inconsistent { point, residual }) => {
                let st = is_stationary(model, sampling, SOLVE_TOL)?;
                return Ok(TorsionFreeOutcome::Infeasible {
                    point,
                    solve_residual: residual,
                    stationarity_residual: st.residual,
                    stationary: st.is_killing,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TorsionFreeOutcome::Connection(conn))
}

/// Max over samples and `a < b` of `|(I - sigma omega) R(e_a, e_b) sigma|`;
/// the connection must be L-compatible (to `1e-9`).
pub fn curvature_preserves_l_residual(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    sampling: Sampling,
) -> Result<f64, ConnectionError> {
    let lc = is_l_compatible(model, conn, sampling, 1e-9)?;
    if !lc.pass {
        return Err(ConnectionError::Precondition(format!(
            "connection is not L-compatible (residual {:.3e})",
            lc.residual
        )));
    }
    let k = model.rank();
    let mut worst = 0.0f64;
    for p in sampling.points(model.chart()) {
        let r = curvature(model, conn, &p)?;
        let f = model.frame(&p)?;
        let omega = dual_form_at(&f.sigma);
        for a in 0..k {
            for b in a + 1..k {
                let rs: Vec<f64> = (0..k)
                    .map(|d| (0..k).map(|c| r.get(d, c, a, b) * f.sigma[c]).sum())
                    .collect();
                worst = worst.max(linalg::norm(&transverse(&f.sigma, &omega, &rs)));
            }
        }
    }
    Ok(worst)
}

/// Direct-sum block `A0` of a model shaped as `A0 + L`: kernel frame the last
/// frame element, metric vanishing on its last row. The block carries the
/// metric `g0` and a placeholder kernel frame.
pub fn direct_sum_block(model: &AlgebroidModel) -> Result<AlgebroidModel, ConnectionError> {
    let k = model.rank();
    let shape_err = |what: &str| ConnectionError::Precondition(format!("model is not a direct sum A0 + L: {what}"));
    if k < 2 {
        return Err(shape_err("rank below 2"));
    }
    let m = k - 1;
    for (a, s) in model.sigma_fields().iter().enumerate() {
        let want = if a == m { 1.0 } else { 0.0 };
        if s.as_const() != Some(want) {
            return Err(shape_err("kernel frame is not the last frame element"));
        }
    }
    for a in 0..k {
        if model.metric_field(a, m).as_const() != Some(0.0) {
            return Err(shape_err("metric does not vanish on the kernel line"));
        }
    }
    let anchor: Vec<Vec<ScalarField>> = model
        .anchor_rows()
        .into_iter()
        .map(|row| row.into_iter().take(m).collect())
        .collect();
    let structure: Vec<StructureEntry> = model
        .structure_entries()
        .iter()
        .filter(|e| e.lower.1 < m && e.upper < m)
        .cloned()
        .collect();
    if model
        .structure_entries()
        .iter()
        .any(|e| e.lower.1 < m && e.upper == m && e.field.as_const() != Some(0.0))
    {
        return Err(shape_err("A0 brackets have components along L"));
    }
    let metric: Vec<Vec<ScalarField>> = (0..m)
        .map(|a| (0..m).map(|b| model.metric_field(a, b).clone()).collect())
        .collect();
    let sigma = (0..m)
        .map(|a| ScalarField::constant(if a == 0 { 1.0 } else { 0.0 }))
        .collect();
    Ok(AlgebroidModel::new(
        model.chart().clone(),
        m,
        anchor,
        structure,
        metric,
        sigma,
    )?)
}

/// Minimal Carrollian connection of a direct-sum model.
pub fn minimal_direct_sum_connection(model: &AlgebroidModel) -> Result<ConnectionField, ConnectionError> {
    let sub = direct_sum_block(model)?;
    let conn = ConnectionField::MinimalDirectSum { sub: Box::new(sub) };
    probe(model, &conn)?;
    Ok(conn)
}
