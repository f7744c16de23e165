//! The Carroll distribution `C = rho(L)`: its generating vector field, the
//! singular locus, and traced leaves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebroid::{dual_form_at, transverse, AlgebroidError, AlgebroidModel};
use crate::dual::{lift, split, Scalar};
use crate::dynamics::Trajectory;
use crate::fields::Chart;
use crate::linalg::{self, RCOND};
use crate::sampling::Sampling;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DistributionError {
    #[error(transparent)]
    Model(#[from] AlgebroidError),
    #[error("step size underflow at {point:?} (t = {t})")]
    StepUnderflow { point: Vec<f64>, t: f64 },
    #[error("non-finite Carroll vector at {0:?}")]
    NonFinite(Vec<f64>),
    #[error("grid needs {expected} axis counts, each at least 2; got {got:?}")]
    Grid { expected: usize, got: Vec<usize> },
    #[error("trajectory has {0} samples; at least 3 are needed")]
    TooFewSamples(usize),
}

impl From<crate::fields::FieldError> for DistributionError {
    fn from(e: crate::fields::FieldError) -> Self {
        DistributionError::Model(e.into())
    }
}

/// `c^i = rho^i_a sigma^a` over any carrier.
pub fn carroll_field<S: Scalar>(model: &AlgebroidModel, x: &[S]) -> Result<Vec<S>, AlgebroidError> {
    let f = model.frame(x)?;
    Ok(f.anchor_of(&f.sigma))
}

/// Carroll vector at a chart point.
pub fn carroll_vector(model: &AlgebroidModel, x: &[f64]) -> Result<Vec<f64>, AlgebroidError> {
    model.chart().check_point(x)?;
    carroll_field(model, x)
}

/// Default smallness threshold for `|c|`: `1e-6` times the chart diagonal
/// (`1e-6` on the point chart).
pub fn default_eps(chart: &Chart) -> f64 {
    let d = chart.diagonal();
    if d > 0.0 {
        1e-6 * d
    } else {
        1e-6
    }
}

/// One cell of a regular grid over the chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub index: Vec<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub center: Vec<f64>,
}

fn check_grid(chart: &Chart, grid: &[usize]) -> Result<(), DistributionError> {
    if grid.len() != chart.dim() || grid.iter().any(|g| *g < 2) {
        return Err(DistributionError::Grid {
            expected: chart.dim(),
            got: grid.to_vec(),
        });
    }
    Ok(())
}

/// All grid cells in row-major order (last axis fastest).
pub fn grid_cells(chart: &Chart, grid: &[usize]) -> Vec<GridCell> {
    let n = chart.dim();
    let total: usize = grid.iter().product();
    let node = |d: usize, j: usize| -> f64 {
        let (l, h) = (chart.lo()[d], chart.hi()[d]);
        l + (h - l) * j as f64 / grid[d] as f64
    };
    (0..total)
        .map(|mut flat| {
            let mut index = vec![0; n];
            for d in (0..n).rev() {
                index[d] = flat % grid[d];
                flat /= grid[d];
            }
            let lo: Vec<f64> = (0..n).map(|d| node(d, index[d])).collect();
            let hi: Vec<f64> = (0..n).map(|d| node(d, index[d] + 1)).collect();
            let center = (0..n)
                .map(|d| {
                    let (l, h) = (chart.lo()[d], chart.hi()[d]);
                    l + (h - l) * (index[d] as f64 + 0.5) / grid[d] as f64
                })
                .collect();
            GridCell { index, lo, hi, center }
        })
        .collect()
}

/// Cell flagged by [`singular_scan`], with the smallest `|c|` seen on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularCell {
    pub cell: GridCell,
    pub min_norm: f64,
}

/// Grid cells on which `|c| < eps` at the center or at some corner.
pub fn singular_scan(model: &AlgebroidModel, grid: &[usize], eps: f64) -> Result<Vec<SingularCell>, DistributionError> {
    let chart = model.chart();
    if chart.dim() == 0 {
        let c = carroll_field::<f64>(model, &[])?;
        let min_norm = linalg::norm(&c);
        let cell = GridCell {
            index: vec![],
            lo: vec![],
            hi: vec![],
            center: vec![],
        };
        return Ok(if min_norm < eps {
            vec![SingularCell { cell, min_norm }]
        } else {
            vec![]
        });
    }
    check_grid(chart, grid)?;
    let n = chart.dim();
    let mut out = Vec::new();
    for cell in grid_cells(chart, grid) {
        let mut min_norm = linalg::norm(&carroll_field(model, &cell.center)?);
        for mask in 0..(1usize << n) {
            let corner: Vec<f64> = (0..n)
                .map(|d| if mask >> d & 1 == 1 { cell.hi[d] } else { cell.lo[d] })
                .collect();
            min_norm = min_norm.min(linalg::norm(&carroll_field(model, &corner)?));
        }
        if min_norm < eps {
            out.push(SingularCell { cell, min_norm });
        }
    }
    Ok(out)
}

/// Smallest `|c|` found from the samples after a few Gauss-Newton steps
/// toward zeros of `c` (staying inside the chart).
pub fn min_carroll_norm(model: &AlgebroidModel, sampling: Sampling) -> Result<f64, AlgebroidError> {
    let chart = model.chart();
    let n = chart.dim();
    let mut best = f64::INFINITY;
    for p in sampling.points(chart) {
        let mut x = p;
        for _ in 0..20 {
            let lifted = carroll_field(model, &lift(&x))?;
            let (c, jac_t) = split(lifted, n);
            let nc = linalg::norm(&c);
            best = best.min(nc);
            if n == 0 || nc == 0.0 {
                break;
            }
            // jac_t[j][i] = d_j c^i
            let rows: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| jac_t[j][i]).collect()).collect();
            let (step, _) = linalg::pinv_solve(&rows, &c, n, RCOND);
            if linalg::norm(&step) == 0.0 {
                break;
            }
            let next: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - s).collect();
            if !chart.contains(&next) {
                break;
            }
            x = next;
        }
    }
    Ok(best)
}

/// Regular Carroll distribution: `|c| >= eps` everywhere probed.
pub fn is_l_regular(model: &AlgebroidModel, sampling: Sampling, eps: f64) -> Result<bool, AlgebroidError> {
    Ok(min_carroll_norm(model, sampling)? >= eps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LeafClass {
    Point,
    Line,
    Circle,
    SegmentBothFrozen,
    SegmentOneFrozenForward,
    SegmentOneFrozenBackward,
    TruncatedByChart,
}

impl LeafClass {
    pub const ALL: [LeafClass; 7] = [
        LeafClass::Point,
        LeafClass::Line,
        LeafClass::Circle,
        LeafClass::SegmentBothFrozen,
        LeafClass::SegmentOneFrozenForward,
        LeafClass::SegmentOneFrozenBackward,
        LeafClass::TruncatedByChart,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LeafClass::Point => "Point",
            LeafClass::Line => "Line",
            LeafClass::Circle => "Circle",
            LeafClass::SegmentBothFrozen => "SegmentBothFrozen",
            LeafClass::SegmentOneFrozenForward => "SegmentOneFrozenForward",
            LeafClass::SegmentOneFrozenBackward => "SegmentOneFrozenBackward",
            LeafClass::TruncatedByChart => "TruncatedByChart",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeafEvent {
    Exit,
    Frozen,
    Periodic,
    Budget,
}

impl LeafEvent {
    pub fn name(self) -> &'static str {
        match self {
            LeafEvent::Exit => "Exit",
            LeafEvent::Frozen => "Frozen",
            LeafEvent::Periodic => "Periodic",
            LeafEvent::Budget => "Budget",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafParams {
    pub eps: f64,
    pub return_tol: f64,
    pub max_arclength: f64,
    /// Initial step of the adaptive integrator.
    pub dt: f64,
}

impl LeafParams {
    pub fn for_chart(chart: &Chart) -> Self {
        LeafParams {
            eps: default_eps(chart),
            return_tol: 1e-4,
            max_arclength: 10.0 * chart.diagonal(),
            dt: 1e-3,
        }
    }
}

/// One direction of a traced orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub event: LeafEvent,
    pub time: f64,
    pub arclength: f64,
    pub points: Vec<Vec<f64>>,
    /// Return time when `event` is `Periodic`.
    pub period: Option<f64>,
}

impl Trace {
    pub fn end(&self) -> &[f64] {
        self.points.last().expect("trace holds the seed")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub seed: Vec<f64>,
    pub class: LeafClass,
    pub forward: Option<LeafEvent>,
    pub backward: Option<LeafEvent>,
    pub arclength: f64,
    pub period: Option<f64>,
    /// Backward branch (reversed), seed, forward branch.
    pub polyline: Vec<Vec<f64>>,
    pub params: LeafParams,
}

const LOCAL_TOL: f64 = 1e-9;
const MAX_STEPS: usize = 200_000;
const FREEZE_WINDOW: usize = 5;

// Dormand-Prince 5(4) tableau.
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Flow<'a> {
    model: &'a AlgebroidModel,
    sign: f64,
}

impl Flow<'_> {
    fn eval(&self, x: &[f64]) -> Result<Vec<f64>, DistributionError> {
        let c = carroll_field(self.model, x)?;
        if c.iter().any(|v| !v.is_finite()) {
            return Err(DistributionError::NonFinite(x.to_vec()));
        }
        Ok(c.into_iter().map(|v| self.sign * v).collect())
    }

    /// One embedded step from `x` with slope `k1`: (5th-order state, error norm).
    fn step(&self, x: &[f64], k1: &[f64], h: f64) -> Result<(Vec<f64>, f64), DistributionError> {
        let n = x.len();
        let mut ks: Vec<Vec<f64>> = vec![k1.to_vec()];
        for s in 1..7 {
            let xs: Vec<f64> = (0..n)
                .map(|i| x[i] + h * (0..s).map(|j| DP_A[s][j] * ks[j][i]).sum::<f64>())
                .collect();
            ks.push(self.eval(&xs)?);
        }
        let x5: Vec<f64> = (0..n)
            .map(|i| x[i] + h * (0..7).map(|j| DP_B5[j] * ks[j][i]).sum::<f64>())
            .collect();
        let err = (0..n)
            .map(|i| (h * (0..7).map(|j| (DP_B5[j] - DP_B4[j]) * ks[j][i]).sum::<f64>()).abs())
            .fold(0.0, f64::max);
        Ok((x5, err / LOCAL_TOL))
    }
}

fn hermite(x0: &[f64], f0: &[f64], x1: &[f64], f1: &[f64], h: f64, s: f64) -> Vec<f64> {
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    (0..x0.len())
        .map(|i| h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i])
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Closest approach of the Hermite interpolant to `target` over one step:
/// (fraction of the step, distance).
fn closest_on_step(x0: &[f64], f0: &[f64], x1: &[f64], f1: &[f64], h: f64, target: &[f64]) -> (f64, f64) {
    let d = |s: f64| dist(&hermite(x0, f0, x1, f1, h, s), target);
    const N: usize = 32;
    let (mut best_s, mut best_d) = (0.0, d(0.0));
    for j in 1..=N {
        let s = j as f64 / N as f64;
        let v = d(s);
        if v < best_d {
            best_s = s;
            best_d = v;
        }
    }
    let (mut a, mut b) = ((best_s - 1.0 / N as f64).max(0.0), (best_s + 1.0 / N as f64).min(1.0));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let m1 = b - phi * (b - a);
        let m2 = a + phi * (b - a);
        if d(m1) < d(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let s = 0.5 * (a + b);
    let v = d(s);
    if v < best_d {
        (s, v)
    } else {
        (best_s, best_d)
    }
}

/// Largest fraction of a step whose endpoint stays in the chart (bisection).
fn clip_to_chart(chart: &Chart, x0: &[f64], f0: &[f64], x1: &[f64], f1: &[f64], h: f64) -> Vec<f64> {
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..50 {
        let m = 0.5 * (a + b);
        if chart.contains(&hermite(x0, f0, x1, f1, h, m)) {
            a = m;
        } else {
            b = m;
        }
    }
    hermite(x0, f0, x1, f1, h, a)
}

/// Trace the orbit of `sign * c` from `seed` until an event fires.
pub fn trace(model: &AlgebroidModel, seed: &[f64], sign: f64, params: &LeafParams) -> Result<Trace, DistributionError> {
    let chart = model.chart();
    chart.check_point(seed).map_err(AlgebroidError::from)?;
    let flow = Flow { model, sign };
    let diag = chart.diagonal();
    let mut x = seed.to_vec();
    let mut fx = flow.eval(&x)?;
    let mut t = 0.0;
    let mut arclength = 0.0;
    let mut points = vec![x.clone()];
    let mut history: Vec<(f64, Vec<f64>)> = vec![(t, x.clone())];
    let mut armed = false;
    let mut h = params.dt;

    for _ in 0..MAX_STEPS {
        let speed = linalg::norm(&fx);
        // Keep polyline segments short relative to the chart.
        if speed > 0.0 {
            h = h.min(0.02 * diag / speed);
        }
        let (x1, err) = flow.step(&x, &fx, h)?;
        if !(err <= 1.0) {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.1)
            } else {
                0.1
            };
            h *= factor;
            if h < 1e-14 * (1.0 + t.abs()) {
                return Err(DistributionError::StepUnderflow { point: x, t });
            }
            continue;
        }
        if !chart.contains(&x1) {
            let f1 = flow.eval(&x1).unwrap_or_else(|_| fx.clone());
            let edge = clip_to_chart(chart, &x, &fx, &x1, &f1, h);
            arclength += dist(&x, &edge);
            points.push(edge);
            return Ok(Trace {
                event: LeafEvent::Exit,
                time: t + h,
                arclength,
                points,
                period: None,
            });
        }
        let f1 = flow.eval(&x1)?;
        if armed {
            let (s, d) = closest_on_step(&x, &fx, &x1, &f1, h, seed);
            if d <= params.return_tol {
                let p = hermite(&x, &fx, &x1, &f1, h, s);
                arclength += dist(&x, &p);
                points.push(p);
                let period = t + s * h;
                return Ok(Trace {
                    event: LeafEvent::Periodic,
                    time: period,
                    arclength,
                    points,
                    period: Some(period),
                });
            }
        }
        arclength += dist(&x, &x1);
        t += h;
        x = x1;
        fx = f1;
        points.push(x.clone());
        if !armed && dist(&x, seed) > 10.0 * params.return_tol {
            armed = true;
        }
        history.push((t, x.clone()));
        if history.len() > FREEZE_WINDOW + 1 {
            history.remove(0);
        }
        if history.len() == FREEZE_WINDOW + 1 {
            let (t0, x0) = &history[0];
            let drift = dist(&x, x0) / (t - t0);
            if linalg::norm(&fx) < params.eps && drift < params.eps {
                return Ok(Trace {
                    event: LeafEvent::Frozen,
                    time: t,
                    arclength,
                    points,
                    period: None,
                });
            }
        }
        if arclength > params.max_arclength {
            break;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
    }
    Ok(Trace {
        event: LeafEvent::Budget,
        time: t,
        arclength,
        points,
        period: None,
    })
}

/// Point reached by flowing along `c` for time `t` (negative: backward).
/// Fails if the orbit leaves the chart first.
pub fn flow_to(model: &AlgebroidModel, start: &[f64], t: f64) -> Result<Vec<f64>, DistributionError> {
    let chart = model.chart();
    chart.check_point(start).map_err(AlgebroidError::from)?;
    let flow = Flow {
        model,
        sign: t.signum(),
    };
    let total = t.abs();
    let mut x = start.to_vec();
    let mut fx = flow.eval(&x)?;
    let mut s = 0.0;
    let mut h = 1e-3f64.min(total);
    while s < total {
        h = h.min(total - s);
        let (x1, err) = flow.step(&x, &fx, h)?;
        if !(err <= 1.0) {
            h *= 0.5;
            if h < 1e-14 {
                return Err(DistributionError::StepUnderflow { point: x, t: s });
            }
            continue;
        }
        if !chart.contains(&x1) {
            return Err(AlgebroidError::from(crate::fields::FieldError::OutsideChart(x1)).into());
        }
        s += h;
        x = x1;
        fx = flow.eval(&x)?;
        h *= if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
    }
    Ok(x)
}

fn classify(forward: LeafEvent, backward: LeafEvent) -> LeafClass {
    use LeafEvent::*;
    match (forward, backward) {
        (Periodic, _) | (_, Periodic) => LeafClass::Circle,
        (Budget, _) | (_, Budget) => LeafClass::TruncatedByChart,
        (Frozen, Frozen) => LeafClass::SegmentBothFrozen,
        (Frozen, Exit) => LeafClass::SegmentOneFrozenForward,
        (Exit, Frozen) => LeafClass::SegmentOneFrozenBackward,
        (Exit, Exit) => LeafClass::Line,
    }
}

/// Classify the Carroll leaf through `seed` by its forward and backward limits.
pub fn classify_leaf(
    model: &AlgebroidModel,
    seed: &[f64],
    params: &LeafParams,
) -> Result<LeafRecord, DistributionError> {
    let c = carroll_vector(model, seed)?;
    if linalg::norm(&c) < params.eps {
        return Ok(LeafRecord {
            seed: seed.to_vec(),
            class: LeafClass::Point,
            forward: None,
            backward: None,
            arclength: 0.0,
            period: None,
            polyline: vec![seed.to_vec()],
            params: *params,
        });
    }
    let fwd = trace(model, seed, 1.0, params)?;
    let bwd = trace(model, seed, -1.0, params)?;
    let class = classify(fwd.event, bwd.event);
    let (arclength, period, polyline) = if class == LeafClass::Circle {
        let tr = if fwd.event == LeafEvent::Periodic { &fwd } else { &bwd };
        (tr.arclength, tr.period, tr.points.clone())
    } else {
        let mut poly: Vec<Vec<f64>> = bwd.points.iter().rev().cloned().collect();
        poly.extend(fwd.points.iter().skip(1).cloned());
        (fwd.arclength + bwd.arclength, None, poly)
    };
    Ok(LeafRecord {
        seed: seed.to_vec(),
        class,
        forward: Some(fwd.event),
        backward: Some(bwd.event),
        arclength,
        period,
        polyline,
        params: *params,
    })
}

/// One census cell: the classification of the leaf through its center.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusCell {
    pub index: Vec<usize>,
    pub seed: Vec<f64>,
    pub class: LeafClass,
    pub forward: Option<LeafEvent>,
    pub backward: Option<LeafEvent>,
    pub arclength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub grid: Vec<usize>,
    pub cells: Vec<CensusCell>,
    pub counts: BTreeMap<LeafClass, usize>,
    pub params: LeafParams,
}

impl Census {
    pub fn count(&self, class: LeafClass) -> usize {
        self.counts.get(&class).copied().unwrap_or(0)
    }
}

/// Classify the leaf through every cell center of the grid.
pub fn leaf_census(model: &AlgebroidModel, grid: &[usize], params: &LeafParams) -> Result<Census, DistributionError> {
    let chart = model.chart();
    let cells: Vec<GridCell> = if chart.dim() == 0 {
        vec![GridCell {
            index: vec![],
            lo: vec![],
            hi: vec![],
            center: vec![],
        }]
    } else {
        check_grid(chart, grid)?;
        grid_cells(chart, grid)
    };
    let mut out = Vec::with_capacity(cells.len());
    let mut counts = BTreeMap::new();
    for cell in cells {
        let rec = classify_leaf(model, &cell.center, params)?;
        *counts.entry(rec.class).or_insert(0) += 1;
        out.push(CensusCell {
            index: cell.index,
            seed: rec.seed,
            class: rec.class,
            forward: rec.forward,
            backward: rec.backward,
            arclength: rec.arclength,
        });
    }
    Ok(Census {
        grid: grid.to_vec(),
        cells: out,
        counts,
        params: *params,
    })
}

/// Distance from `p` to a polyline.
pub fn distance_to_polyline(p: &[f64], poly: &[Vec<f64>]) -> f64 {
    if poly.len() == 1 {
        return dist(p, &poly[0]);
    }
    poly.windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let ab: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| y - x).collect();
            let len2: f64 = ab.iter().map(|v| v * v).sum();
            let s = if len2 > 0.0 {
                (p.iter().zip(a).zip(&ab).map(|((pi, ai), d)| (pi - ai) * d).sum::<f64>() / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q: Vec<f64> = a.iter().zip(&ab).map(|(ai, d)| ai + s * d).collect();
            dist(p, &q)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LPathReport {
    /// Max `|rho(alpha) - dgamma/dt|` with finite-difference velocities.
    pub anchor_residual: f64,
    /// Max `|(I - sigma omega) alpha|`.
    pub transverse_residual: f64,
    /// Max distance of `gamma(t)` from the leaf traced through `gamma(0)`.
    pub confinement: f64,
    pub tol: f64,
    pub is_l_path: bool,
    pub samples: usize,
}

/// Check that a sampled A-path is an L-path and stays on one Carroll leaf.
pub fn check_l_path(model: &AlgebroidModel, traj: &Trajectory, tol: f64) -> Result<LPathReport, DistributionError> {
    let m = traj.times.len();
    if m < 3 {
        return Err(DistributionError::TooFewSamples(m));
    }
    let mut anchor_residual = 0.0f64;
    let mut transverse_residual = 0.0f64;
    for j in 0..m {
        let f = model.frame_at(&traj.gamma[j])?;
        let alpha = &traj.alpha[j];
        let x = f.anchor_of(alpha);
        // Second-order differences: central inside, one-sided at the ends.
        let (a, b, c) = if j == 0 {
            (0, 1, 2)
        } else if j == m - 1 {
            (m - 3, m - 2, m - 1)
        } else {
            (j - 1, j, j + 1)
        };
        let (t0, t1, t2) = (traj.times[a], traj.times[b], traj.times[c]);
        let tj = traj.times[j];
        // Derivative of the quadratic through the three samples, at tj.
        let w0 = ((tj - t1) + (tj - t2)) / ((t0 - t1) * (t0 - t2));
        let w1 = ((tj - t0) + (tj - t2)) / ((t1 - t0) * (t1 - t2));
        let w2 = ((tj - t0) + (tj - t1)) / ((t2 - t0) * (t2 - t1));
        for i in 0..f.n {
            let vel = w0 * traj.gamma[a][i] + w1 * traj.gamma[b][i] + w2 * traj.gamma[c][i];
            anchor_residual = anchor_residual.max((x[i] - vel).abs());
        }
        let omega = dual_form_at(&f.sigma);
        transverse_residual = transverse_residual.max(linalg::norm(&transverse(&f.sigma, &omega, alpha)));
    }
    let params = LeafParams::for_chart(model.chart());
    let leaf = classify_leaf(model, &traj.gamma[0], &params)?;
    let confinement = traj
        .gamma
        .iter()
        .map(|g| distance_to_polyline(g, &leaf.polyline))
        .fold(0.0, f64::max);
    Ok(LPathReport {
        anchor_residual,
        transverse_residual,
        confinement,
        tol,
        is_l_path: anchor_residual <= tol && transverse_residual <= tol,
        samples: m,
    })
}
