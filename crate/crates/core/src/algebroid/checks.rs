use serde::{Deserialize, Serialize};

use super::{AlgebroidError, AlgebroidModel, SIGMA_MIN_NORM};
use crate::linalg::{self, RCOND};
use crate::sampling::Sampling;

/// Which side of the threshold a check value must fall on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Pass when every sample value is at most the threshold.
    AtMost,
    /// Pass when every sample value is at least the threshold.
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    /// Worst value over the samples (largest for `AtMost`, smallest for `AtLeast`).
    pub worst: f64,
    pub threshold: f64,
    pub bound: Bound,
    /// Number of samples violating the threshold.
    pub failures: usize,
    pub pass: bool,
}

impl CheckResult {
    pub fn new(name: &str, threshold: f64, bound: Bound) -> Self {
        CheckResult {
            name: name.to_string(),
            worst: match bound {
                Bound::AtMost => 0.0,
                Bound::AtLeast => f64::INFINITY,
            },
            threshold,
            bound,
            failures: 0,
            pass: true,
        }
    }

    pub fn record(&mut self, value: f64) {
        let ok = match self.bound {
            Bound::AtMost => value <= self.threshold,
            Bound::AtLeast => value >= self.threshold,
        };
        if !ok {
            self.failures += 1;
            self.pass = false;
        }
        self.worst = match self.bound {
            Bound::AtMost if value.is_nan() || value > self.worst => value,
            Bound::AtLeast if value.is_nan() || value < self.worst => value,
            _ => self.worst,
        };
    }

    pub fn fail(&mut self) {
        self.failures += 1;
        self.pass = false;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn new(checks: Vec<CheckResult>, sampling: Sampling, tol: f64, errors: Vec<String>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        ValidationReport {
            checks,
            samples: sampling.samples,
            seed: sampling.seed,
            tol,
            pass,
            errors,
        }
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Max-norm of the cyclic Jacobi sum of the frame brackets at `x`.
pub fn jacobi_residual(model: &AlgebroidModel, x: &[f64]) -> Result<f64, AlgebroidError> {
    model.chart().check_point(x)?;
    let (f, grads) = model.frame_with_grad::<f64>(x)?;
    let k = f.k;
    let term = |a: usize, b: usize, c: usize, d: usize| -> f64 {
        let mut t: f64 = (0..f.n).map(|i| f.rho(i, a) * grads[i].c(d, b, c)).sum();
        for e in 0..k {
            t += f.c(e, b, c) * f.c(d, a, e);
        }
        t
    };
    let mut worst = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                for d in 0..k {
                    let s = term(a, b, c, d) + term(b, c, a, d) + term(c, a, b, d);
                    worst = worst.max(s.abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Max-norm of `rho([e_a, e_b]) - [rho(e_a), rho(e_b)]` at `x`.
pub fn anchor_morphism_residual(model: &AlgebroidModel, x: &[f64]) -> Result<f64, AlgebroidError> {
    model.chart().check_point(x)?;
    let (f, grads) = model.frame_with_grad::<f64>(x)?;
    let (n, k) = (f.n, f.k);
    let mut worst = 0.0f64;
    for a in 0..k {
        for b in a + 1..k {
            for i in 0..n {
                let mut r = 0.0;
                for j in 0..n {
                    r += f.rho(j, a) * grads[j].rho(i, b) - f.rho(j, b) * grads[j].rho(i, a);
                }
                for c in 0..k {
                    r -= f.c(c, a, b) * f.rho(i, c);
                }
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// Number of singular values of the metric at or below `RCOND` times the largest.
pub(crate) fn kernel_dimension(metric: &[f64], k: usize) -> usize {
    let rows: Vec<Vec<f64>> = metric.chunks(k).map(|r| r.to_vec()).collect();
    let sv = linalg::singular_values(&rows, k);
    k - linalg::rank(&sv, RCOND)
}

/// Check every algebroid and Carrollian axiom at seeded Halton samples.
pub fn validate(model: &AlgebroidModel, sampling: Sampling, tol: f64) -> ValidationReport {
    let mut jac = CheckResult::new("jacobi", tol, Bound::AtMost);
    let mut anc = CheckResult::new("anchor_morphism", tol, Bound::AtMost);
    let mut ker = CheckResult::new("metric_annihilates_sigma", tol, Bound::AtMost);
    // Value: |dim ker g - 1|.
    let mut krank = CheckResult::new("kernel_rank_one", 0.0, Bound::AtMost);
    let mut nonvan = CheckResult::new("sigma_nonvanishing", SIGMA_MIN_NORM, Bound::AtLeast);
    let mut evals = CheckResult::new("evaluation", 0.0, Bound::AtMost);
    let mut errors = Vec::new();
    let k = model.rank();

    for p in sampling.points(model.chart()) {
        let outcome = (|| -> Result<(), AlgebroidError> {
            let j = jacobi_residual(model, &p)?;
            let a = anchor_morphism_residual(model, &p)?;
            let f = model.frame::<f64>(&p)?;
            let gs = linalg::max_abs((0..k).map(|a| (0..k).map(|b| f.g(a, b) * f.sigma[b]).sum::<f64>()));
            let kd = kernel_dimension(&f.metric, k);
            jac.record(j);
            anc.record(a);
            ker.record(gs);
            krank.record((kd as f64 - 1.0).abs());
            nonvan.record(linalg::norm(&f.sigma));
            Ok(())
        })();
        match outcome {
            Ok(()) => evals.record(0.0),
            Err(e) => {
                evals.record(1.0);
                if errors.len() < 8 {
                    errors.push(format!("at {p:?}: {e}"));
                }
            }
        }
    }
    ValidationReport::new(vec![jac, anc, ker, krank, nonvan, evals], sampling, tol, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::StructureEntry;
    use crate::fields::ScalarField;
    use crate::presets;

    #[test]
    fn abelian_constant_anchor_has_zero_residuals() {
        let m = presets::flat_carroll(3).unwrap();
        let p = [0.2, -0.4, 0.9];
        assert_eq!(jacobi_residual(&m, &p).unwrap(), 0.0);
        assert_eq!(anchor_morphism_residual(&m, &p).unwrap(), 0.0);
    }

    #[test]
    fn gl2_jacobi_holds_and_corruption_breaks_it() {
        let m = presets::lie_algebra_gl2();
        let pts = Sampling::new(50, 3).points(m.chart());
        for p in &pts {
            assert!(jacobi_residual(&m, p).unwrap() <= 1e-12);
        }
        // Flip the sign of one structure constant.
        let mut entries: Vec<StructureEntry> = m.structure_entries().to_vec();
        let e = &mut entries[0];
        e.field = -&e.field;
        let bad = m.with_structure(entries).unwrap();
        let worst = pts
            .iter()
            .map(|p| jacobi_residual(&bad, p).unwrap())
            .fold(0.0, f64::max);
        assert!(worst >= 0.5, "corrupted Jacobi residual {worst}");
    }

    #[test]
    fn rank_one_anchor_morphism_is_trivial() {
        let m = presets::vector_field_line(&["x*y", "sin(x)"]).unwrap();
        assert_eq!(anchor_morphism_residual(&m, &[0.3, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn direct_sum_needs_corrected_cross_terms() {
        let m = presets::direct_sum(&[&["1", "0"], &["0", "1"]], &["y", "0"]).unwrap();
        let pts = Sampling::new(50, 1).points(m.chart());
        for p in &pts {
            assert!(anchor_morphism_residual(&m, p).unwrap() <= 1e-12);
            assert!(jacobi_residual(&m, p).unwrap() <= 1e-12);
        }
        let literal = m.with_structure(Vec::new()).unwrap();
        for p in &pts {
            let r = anchor_morphism_residual(&literal, p).unwrap();
            assert!((r - 1.0).abs() <= 1e-12, "residual {r}");
        }
    }

    #[test]
    fn nondegenerate_metric_fails_kernel_rank() {
        let flat = presets::flat_carroll(3).unwrap();
        let one = ScalarField::constant(1.0);
        let zero = ScalarField::zero();
        let metric = vec![
            vec![one.clone(), zero.clone(), zero.clone()],
            vec![zero.clone(), one.clone(), zero.clone()],
            vec![zero.clone(), zero, one],
        ];
        let bad = flat.with_metric(metric).unwrap();
        let r = validate(&bad, Sampling::default(), 1e-8);
        assert!(!r.pass);
        assert!(!r.check("kernel_rank_one").unwrap().pass);
        assert!(!r.check("metric_annihilates_sigma").unwrap().pass);
        assert!(r.check("jacobi").unwrap().pass);
    }

    #[test]
    fn zero_sigma_fails_nonvanishing() {
        let flat = presets::flat_carroll(2).unwrap();
        let bad = flat.with_sigma(vec![ScalarField::zero(); 2]).unwrap();
        let r = validate(&bad, Sampling::default(), 1e-8);
        assert!(!r.pass);
        assert!(!r.check("sigma_nonvanishing").unwrap().pass);
    }

    #[test]
    fn report_carries_sampling() {
        let r = validate(&presets::flat_carroll(2).unwrap(), Sampling::new(16, 9), 1e-8);
        assert!(r.pass);
        assert_eq!((r.samples, r.seed), (16, 9));
    }
}
