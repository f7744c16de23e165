//! A-path geodesics: `gamma' = rho(alpha)`, `alpha'^c = -Gamma^c_ab alpha^a alpha^b + F^c`.
//!
//! Integration is classical RK4 on a fixed grid. The grid is subdivided
//! (each step halved) until the end point moves by at most [`REFINE_TOL`];
//! samples are always reported on the original grid so runs at different
//! refinement levels line up.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebroid::{dual_form_at, transverse, AlgebroidError, AlgebroidModel, Section};
use crate::connection::{idx, is_l_compatible, ConnectionError, ConnectionField};
use crate::distribution::{
    check_l_path, classify_leaf, distance_to_polyline, DistributionError, LPathReport, LeafParams,
};
use crate::fields::FieldError;
use crate::linalg;
use crate::sampling::Sampling;

/// Base speed below which a sample counts as stationary.
pub const FREEZE_TOL: f64 = 1e-9;
/// Consecutive stationary samples that trigger a freeze.
pub const FREEZE_STEPS: usize = 10;
/// End-point change at which refinement stops.
pub const REFINE_TOL: f64 = 1e-8;
/// Bound on the total number of RK4 steps of one refinement level.
pub const MAX_WORK: usize = 1 << 22;
/// Transverse force allowed for a particle force.
pub const PARTICLE_FORCE_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Model(#[from] AlgebroidError),
    #[error(transparent)]
    Connection(#[from] ConnectionError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error("step size underflow ({dt:.3e})")]
    StepUnderflow { dt: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("start point {0:?} is outside the chart")]
    OutsideChart(Vec<f64>),
    #[error("initial fiber vector is zero")]
    DegenerateInitial,
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

impl From<FieldError> for DynamicsError {
    fn from(e: FieldError) -> Self {
        DynamicsError::Model(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForceMode {
    /// Must lie in the kernel line.
    ParticleForce,
    GeneralForce,
}

/// External force `F = F^c e_c`.
#[derive(Clone, Debug)]
pub struct ForceSection {
    pub comps: Section,
    pub mode: ForceMode,
}

impl ForceSection {
    /// Checks the rank, and for a particle force that `|(I - sigma omega) F| <= 1e-10`
    /// at the validation samples.
    pub fn new(model: &AlgebroidModel, comps: Section, mode: ForceMode) -> Result<Self, DynamicsError> {
        if comps.len() != model.rank() {
            return Err(DynamicsError::Invalid(format!(
                "force has {} components, rank is {}",
                comps.len(),
                model.rank()
            )));
        }
        if mode == ForceMode::ParticleForce {
            for p in Sampling::default().points(model.chart()) {
                let f = model.frame(&p)?;
                let v = comps.eval(&p)?;
                let r = linalg::norm(&transverse(&f.sigma, &dual_form_at(&f.sigma), &v));
                if r > PARTICLE_FORCE_TOL {
                    return Err(DynamicsError::Precondition(format!(
                        "particle force leaves the kernel line at {p:?} (transverse part {r:.3e})"
                    )));
                }
            }
        }
        Ok(ForceSection { comps, mode })
    }

    pub fn parse(model: &AlgebroidModel, texts: &[&str], mode: ForceMode) -> Result<Self, DynamicsError> {
        ForceSection::new(model, Section::parse(texts, model.chart())?, mode)
    }

    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.comps.comps.iter().map(|c| c.to_string()).collect();
        format!("{:?}({})", self.mode, parts.join(", "))
    }
}

/// How an integration ended.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Event {
    /// Base speed stayed below [`FREEZE_TOL`] from `t` on.
    Frozen {
        t: f64,
    },
    /// The next step left the chart; `t` is the last recorded sample.
    ExitedChart {
        t: f64,
    },
    Completed {
        t: f64,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Frozen { .. } => "Frozen",
            Event::ExitedChart { .. } => "ExitedChart",
            Event::Completed { .. } => "Completed",
        }
    }

    pub fn time(&self) -> f64 {
        match *self {
            Event::Frozen { t } | Event::ExitedChart { t } | Event::Completed { t } => t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub gamma: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
    /// `|gamma'|` at each sample.
    pub speed: Vec<f64>,
    /// `|(I - sigma omega) alpha| / |alpha|` at each sample (0 when `alpha = 0`).
    pub misalignment: Vec<f64>,
    pub event: Event,
    /// Spacing of the reported samples.
    pub dt: f64,
    /// RK4 steps per reported interval.
    pub substeps: usize,
    /// Whether the last refinement moved the end point by at most [`REFINE_TOL`].
    pub converged: bool,
    pub endpoint_change: f64,
    pub connection: String,
    pub force: String,
}

impl Trajectory {
    pub fn end(&self) -> &[f64] {
        self.gamma.last().expect("trajectories are non-empty")
    }

    pub fn end_alpha(&self) -> &[f64] {
        self.alpha.last().expect("trajectories are non-empty")
    }

    pub fn max_misalignment(&self) -> f64 {
        linalg::max_abs(self.misalignment.iter().copied())
    }
}

struct System<'a> {
    model: &'a AlgebroidModel,
    conn: &'a ConnectionField,
    force: Option<&'a ForceSection>,
    n: usize,
    k: usize,
}

enum Step {
    Inside(Vec<f64>),
    Left,
}

impl System<'_> {
    fn rhs(&self, y: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        let (n, k) = (self.n, self.k);
        let (g, a) = y.split_at(n);
        let f = self.model.frame(g)?;
        let gamma = self.conn.eval(self.model, g)?;
        let mut out = vec![0.0; n + k];
        out[..n].copy_from_slice(&f.anchor_of(a));
        for c in 0..k {
            let mut v = 0.0;
            for p in 0..k {
                for q in 0..k {
                    v -= gamma[idx(k, c, p, q)] * a[p] * a[q];
                }
            }
            out[n + c] = v;
        }
        if let Some(force) = self.force {
            for (c, fc) in force.comps.eval(g)?.into_iter().enumerate() {
                out[n + c] += fc;
            }
        }
        Ok(out)
    }

    /// Stage evaluation; failures off the chart count as leaving it.
    fn stage(&self, y: &[f64]) -> Result<Option<Vec<f64>>, DynamicsError> {
        let inside = self.model.chart().contains(&y[..self.n]);
        match self.rhs(y) {
            Ok(v) if v.iter().all(|x| x.is_finite()) => Ok(Some(v)),
            Ok(_) | Err(_) if !inside => Ok(None),
            Ok(_) => Err(DynamicsError::NonFinite { t: f64::NAN }),
            Err(e) => Err(e),
        }
    }

    fn rk4(&self, y: &[f64], h: f64) -> Result<Step, DynamicsError> {
        let axpy = |s: f64, d: &[f64]| -> Vec<f64> { y.iter().zip(d).map(|(a, b)| a + s * b).collect() };
        let Some(k1) = self.stage(y)? else {
            return Ok(Step::Left);
        };
        let Some(k2) = self.stage(&axpy(0.5 * h, &k1))? else {
            return Ok(Step::Left);
        };
        let Some(k3) = self.stage(&axpy(0.5 * h, &k2))? else {
            return Ok(Step::Left);
        };
        let Some(k4) = self.stage(&axpy(h, &k3))? else {
            return Ok(Step::Left);
        };
        let next: Vec<f64> = (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if self.model.chart().contains(&next[..self.n]) {
            Ok(Step::Inside(next))
        } else {
            Ok(Step::Left)
        }
    }

    fn speed_and_misalignment(&self, y: &[f64]) -> Result<(f64, f64), DynamicsError> {
        let (g, a) = y.split_at(self.n);
        let f = self.model.frame(g)?;
        let speed = linalg::norm(&f.anchor_of(a));
        let na = linalg::norm(a);
        let mis = if na == 0.0 {
            0.0
        } else {
            linalg::norm(&transverse(&f.sigma, &dual_form_at(&f.sigma), a)) / na
        };
        Ok((speed, mis))
    }
}

struct Run {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    speed: Vec<f64>,
    misalignment: Vec<f64>,
    event: Event,
}

fn run(sys: &System, y0: Vec<f64>, h: f64, steps: usize, sub: usize) -> Result<Run, DynamicsError> {
    let hs = h / sub as f64;
    let (s0, m0) = sys.speed_and_misalignment(&y0)?;
    let mut out = Run {
        times: vec![0.0],
        states: vec![y0],
        speed: vec![s0],
        misalignment: vec![m0],
        event: Event::Completed { t: h * steps as f64 },
    };
    let mut streak = usize::from(s0 < FREEZE_TOL);
    if streak >= FREEZE_STEPS {
        out.event = Event::Frozen { t: 0.0 };
        return Ok(out);
    }
    'grid: for j in 0..steps {
        let mut y = out.states.last().expect("non-empty").clone();
        for _ in 0..sub {
            match sys.rk4(&y, hs)? {
                Step::Inside(next) => y = next,
                Step::Left => {
                    out.event = Event::ExitedChart {
                        t: *out.times.last().expect("non-empty"),
                    };
                    break 'grid;
                }
            }
        }
        let t = h * (j + 1) as f64;
        if !y.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFinite { t });
        }
        let (s, m) = sys.speed_and_misalignment(&y)?;
        out.times.push(t);
        out.states.push(y);
        out.speed.push(s);
        out.misalignment.push(m);
        streak = if s < FREEZE_TOL { streak + 1 } else { 0 };
        if streak >= FREEZE_STEPS {
            out.event = Event::Frozen {
                t: out.times[out.times.len() - streak],
            };
            break;
        }
    }
    Ok(out)
}

fn prepare<'a>(
    model: &'a AlgebroidModel,
    conn: &'a ConnectionField,
    start: &[f64],
    alpha0: &[f64],
    force: Option<&'a ForceSection>,
    t_end: f64,
    dt: f64,
) -> Result<(System<'a>, Vec<f64>, f64, usize), DynamicsError> {
    let (n, k) = (model.dim(), model.rank());
    if start.len() != n || alpha0.len() != k {
        return Err(DynamicsError::Invalid(format!(
            "expected {n} start coordinates and {k} fiber components, got {} and {}",
            start.len(),
            alpha0.len()
        )));
    }
    if !model.chart().contains(start) {
        return Err(DynamicsError::OutsideChart(start.to_vec()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::Invalid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(DynamicsError::Invalid(format!(
            "t_end must be non-negative, got {t_end}"
        )));
    }
    if let Some(f) = force {
        if f.comps.len() != k {
            return Err(DynamicsError::Invalid("force rank mismatch".into()));
        }
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { dt } else { t_end / steps as f64 };
    if h < 1e-14 * (1.0 + t_end) {
        return Err(DynamicsError::StepUnderflow { dt: h });
    }
    let y0: Vec<f64> = start.iter().chain(alpha0).copied().collect();
    Ok((
        System {
            model,
            conn,
            force,
            n,
            k,
        },
        y0,
        h,
        steps,
    ))
}

fn finish(sys: &System, r: Run, h: f64, sub: usize, converged: bool, change: f64) -> Trajectory {
    let n = sys.n;
    Trajectory {
        gamma: r.states.iter().map(|y| y[..n].to_vec()).collect(),
        alpha: r.states.iter().map(|y| y[n..].to_vec()).collect(),
        times: r.times,
        speed: r.speed,
        misalignment: r.misalignment,
        event: r.event,
        dt: h,
        substeps: sub,
        converged,
        endpoint_change: change,
        connection: sys.conn.describe(),
        force: sys.force.map_or_else(|| "none".to_string(), ForceSection::describe),
    }
}

/// RK4 on the fixed grid only, without refinement.
pub fn integrate_fixed(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    start: &[f64],
    alpha0: &[f64],
    force: Option<&ForceSection>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    let (sys, y0, h, steps) = prepare(model, conn, start, alpha0, force, t_end, dt)?;
    let r = run(&sys, y0, h, steps, 1)?;
    Ok(finish(&sys, r, h, 1, false, f64::NAN))
}

/// Geodesic (or forced A-path) from `start` with fiber velocity `alpha0`.
///
/// Stops early when the path leaves the chart or freezes (base speed below
/// [`FREEZE_TOL`] for [`FREEZE_STEPS`] consecutive samples).
pub fn integrate_apath(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    start: &[f64],
    alpha0: &[f64],
    force: Option<&ForceSection>,
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, DynamicsError> {
    let (sys, y0, h, steps) = prepare(model, conn, start, alpha0, force, t_end, dt)?;
    let mut prev = run(&sys, y0.clone(), h, steps, 1)?;
    let mut sub = 1usize;
    loop {
        let next_sub = sub * 2;
        if steps.max(1) * next_sub > MAX_WORK {
            return Ok(finish(&sys, prev, h, sub, false, f64::NAN));
        }
        if h / (next_sub as f64) < 1e-14 * (1.0 + t_end) {
            return Err(DynamicsError::StepUnderflow {
                dt: h / next_sub as f64,
            });
        }
        let cur = run(&sys, y0.clone(), h, steps, next_sub)?;
        let last = prev.states.len().min(cur.states.len()) - 1;
        let change = linalg::norm(
            &(0..sys.n)
                .map(|i| cur.states[last][i] - prev.states[last][i])
                .collect::<Vec<_>>(),
        );
        if change <= REFINE_TOL {
            return Ok(finish(&sys, cur, h, next_sub, true, change));
        }
        prev = cur;
        sub = next_sub;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialClass {
    /// Fiber velocity in the kernel line.
    Particle,
    /// Fiber velocity transverse to the kernel line.
    Swifton,
}

/// Particle iff `|(I - sigma omega) alpha0| <= tol |alpha0|` at `start`.
pub fn classify_initial(
    model: &AlgebroidModel,
    alpha0: &[f64],
    start: &[f64],
    tol: f64,
) -> Result<InitialClass, DynamicsError> {
    if alpha0.len() != model.rank() {
        return Err(DynamicsError::Invalid(format!(
            "fiber vector has {} components, rank is {}",
            alpha0.len(),
            model.rank()
        )));
    }
    let na = linalg::norm(alpha0);
    if na == 0.0 {
        return Err(DynamicsError::DegenerateInitial);
    }
    let f = model.frame_at(start)?;
    let r = linalg::norm(&transverse(&f.sigma, &dual_form_at(&f.sigma), alpha0));
    Ok(if r <= tol * na {
        InitialClass::Particle
    } else {
        InitialClass::Swifton
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfinementReport {
    pub max_misalignment: f64,
    /// Largest distance of the path from the leaf through its start.
    pub leaf_drift: f64,
    pub l_path: LPathReport,
    pub tol: f64,
    pub confined: bool,
}

/// Check that a particle stays aligned with the kernel line and on its leaf.
pub fn particle_confinement(
    model: &AlgebroidModel,
    conn: &ConnectionField,
    traj: &Trajectory,
    tol: f64,
) -> Result<ConfinementReport, DynamicsError> {
    let lc = is_l_compatible(model, conn, Sampling::default(), 1e-9)?;
    if !lc.pass {
        return Err(DynamicsError::Precondition(format!(
            "connection is not L-compatible (residual {:.3e})",
            lc.residual
        )));
    }
    if classify_initial(model, &traj.alpha[0], &traj.gamma[0], tol)? != InitialClass::Particle {
        return Err(DynamicsError::Precondition("initial fiber vector is a swifton".into()));
    }
    let l_path = check_l_path(model, traj, tol)?;
    let max_misalignment = traj.max_misalignment();
    Ok(ConfinementReport {
        max_misalignment,
        leaf_drift: l_path.confinement,
        confined: max_misalignment <= tol && l_path.confinement <= tol,
        l_path,
        tol,
    })
}

/// Number of times the path moves farther than `sep` from the leaf it was
/// last found on.
pub fn leaf_crossings(model: &AlgebroidModel, traj: &Trajectory, sep: f64) -> Result<usize, DynamicsError> {
    let params = LeafParams::for_chart(model.chart());
    let mut count = 0;
    let mut leaf = classify_leaf(model, &traj.gamma[0], &params)?;
    for g in &traj.gamma[1..] {
        let d = if leaf.polyline.is_empty() {
            linalg::norm(&g.iter().zip(&leaf.seed).map(|(a, b)| a - b).collect::<Vec<_>>())
        } else {
            distance_to_polyline(g, &leaf.polyline)
        };
        if d > sep {
            count += 1;
            leaf = classify_leaf(model, g, &params)?;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{make_frame_parallel_carrollian, ConnectionField};
    use crate::presets;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        linalg::norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
    }

    #[test]
    fn line_model_closed_form() {
        let m = presets::vector_field_line(&["y", "0"]).unwrap();
        let t = integrate_apath(&m, &ConnectionField::Zero, &[0.0, 1.0], &[1.0], None, 2.0, 0.01).unwrap();
        assert!(dist(t.end(), &[2.0, 1.0]) <= 1e-6, "{:?}", t.end());
        assert_eq!(t.event.name(), "Completed");
        assert!(t.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn singular_start_freezes() {
        let m = presets::vector_field_line(&["y", "0"]).unwrap();
        let t = integrate_apath(&m, &ConnectionField::Zero, &[0.0, 0.0], &[1.0], None, 2.0, 0.01).unwrap();
        assert_eq!(t.event, Event::Frozen { t: 0.0 });
        assert!(dist(t.end(), &[0.0, 0.0]) <= 1e-9);
        assert_eq!(t.end_alpha(), &[1.0]);
    }

    #[test]
    fn flat_null_line() {
        let m = presets::flat_carroll(3).unwrap();
        let t = integrate_apath(
            &m,
            &ConnectionField::Zero,
            &[0.1, -0.2, 0.0],
            &[0.0, 0.0, 1.0],
            None,
            1.5,
            0.1,
        )
        .unwrap();
        for (s, g) in t.times.iter().zip(&t.gamma) {
            assert!(dist(g, &[0.1, -0.2, *s]) <= 1e-9);
        }
    }

    #[test]
    fn exit_keeps_last_inside_sample() {
        let m = presets::vector_field_line(&["y", "0"]).unwrap();
        let t = integrate_apath(&m, &ConnectionField::Zero, &[0.0, 1.0], &[1.0], None, 5.0, 0.01).unwrap();
        assert_eq!(t.event.name(), "ExitedChart");
        assert!(m.chart().contains(t.end()));
        assert!((t.event.time() - 2.0).abs() <= 0.011);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let m = presets::vector_field_line(&["-y", "x"]).unwrap();
        let err = |dt: f64| {
            let t = integrate_fixed(&m, &ConnectionField::Zero, &[1.0, 0.0], &[1.0], None, 1.0, dt).unwrap();
            dist(t.end(), &[1f64.cos(), 1f64.sin()])
        };
        let (e1, e2) = (err(0.1), err(0.05));
        assert!(e1 / e2 >= 8.0, "{e1} / {e2}");
    }

    #[test]
    fn time_reversal() {
        let m = presets::random(3, 2, 7).unwrap();
        let conn = make_frame_parallel_carrollian(&m, ConnectionField::Zero).unwrap();
        let a0 = [0.3, -0.2, 0.5];
        let fwd = integrate_apath(&m, &conn, &[0.1, 0.2], &a0, None, 0.5, 0.05).unwrap();
        assert_eq!(fwd.event.name(), "Completed");
        let back: Vec<f64> = fwd.end_alpha().iter().map(|v| -v).collect();
        let bwd = integrate_apath(&m, &conn, fwd.end(), &back, None, 0.5, 0.05).unwrap();
        assert!(dist(bwd.end(), &[0.1, 0.2]) <= 1e-6);
    }

    #[test]
    fn zero_force_matches_geodesic() {
        let m = presets::direct_sum(&[&["1", "0"], &["0", "1"]], &["y", "0"]).unwrap();
        let conn = make_frame_parallel_carrollian(&m, ConnectionField::Zero).unwrap();
        let zero = ForceSection::parse(&m, &["0", "0", "0"], ForceMode::GeneralForce).unwrap();
        let a = integrate_apath(&m, &conn, &[0.0, 1.0], &[0.2, 0.1, 1.0], None, 1.0, 0.05).unwrap();
        let b = integrate_apath(&m, &conn, &[0.0, 1.0], &[0.2, 0.1, 1.0], Some(&zero), 1.0, 0.05).unwrap();
        assert_eq!(a.times, b.times);
        for (p, q) in a.gamma.iter().zip(&b.gamma) {
            assert!(dist(p, q) <= 1e-12);
        }
    }

    #[test]
    fn particle_force_keeps_particles() {
        let m = presets::direct_sum(&[&["1", "0"], &["0", "1"]], &["y", "0"]).unwrap();
        let conn = make_frame_parallel_carrollian(&m, ConnectionField::Zero).unwrap();
        let f = ForceSection::parse(&m, &["0", "0", "sin(x)"], ForceMode::ParticleForce).unwrap();
        let t = integrate_apath(&m, &conn, &[0.0, 1.0], &[0.0, 0.0, 1.0], Some(&f), 3.0, 0.01).unwrap();
        assert!(t.max_misalignment() <= 1e-6);
        assert!(ForceSection::parse(&m, &["1", "0", "0"], ForceMode::ParticleForce).is_err());
    }

    #[test]
    fn classification() {
        let m = presets::flat_carroll(2).unwrap();
        let x = [0.0, 0.0];
        assert_eq!(
            classify_initial(&m, &[0.0, 1.0], &x, 1e-9).unwrap(),
            InitialClass::Particle
        );
        assert_eq!(
            classify_initial(&m, &[0.0, 2.5], &x, 1e-9).unwrap(),
            InitialClass::Particle
        );
        assert_eq!(
            classify_initial(&m, &[1.0, 1.0], &x, 1e-9).unwrap(),
            InitialClass::Swifton
        );
        assert_eq!(
            classify_initial(&m, &[0.0, 0.0], &x, 1e-9),
            Err(DynamicsError::DegenerateInitial)
        );
    }

    #[test]
    fn direct_sum_particle_and_swifton() {
        let m = presets::direct_sum(&[&["1", "0"], &["0", "1"]], &["y", "0"]).unwrap();
        let conn = make_frame_parallel_carrollian(&m, ConnectionField::Zero).unwrap();
        let p = integrate_apath(&m, &conn, &[0.0, 1.0], &[0.0, 0.0, 1.0], None, 5.0, 0.01).unwrap();
        let r = particle_confinement(&m, &conn, &p, 1e-6).unwrap();
        assert!(r.confined, "{r:?}");
        assert!(p.gamma.iter().all(|g| (g[1] - 1.0).abs() <= 1e-6));

        let s = integrate_apath(&m, &conn, &[0.0, 1.0], &[0.0, 0.3, 1.0], None, 2.0, 0.01).unwrap();
        let dy = s.gamma.iter().map(|g| (g[1] - 1.0).abs()).fold(0.0, f64::max);
        assert!(dy >= 0.1);
        assert!(leaf_crossings(&m, &s, 0.05).unwrap() >= 1);
        assert!(matches!(
            particle_confinement(&m, &conn, &s, 1e-6),
            Err(DynamicsError::Precondition(_))
        ));
    }
}
