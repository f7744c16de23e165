use serde::{Deserialize, Serialize};

use super::{bracket_values, check_section, dual_form_at, transverse, AlgebroidError, AlgebroidModel, Section};
use crate::linalg;
use crate::sampling::Sampling;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KillingCheck {
    pub is_killing: bool,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryCheck {
    pub is_symmetry: bool,
    pub killing_residual: f64,
    /// Largest part of `[u, sigma]` transverse to the kernel line.
    pub kernel_residual: f64,
}

/// `(L_u g)(e_b, e_c) = rho_u(g_bc) - g([u, e_b], e_c) - g(e_b, [u, e_c])`.
pub fn lie_derivative_metric(model: &AlgebroidModel, u: &Section, x: &[f64]) -> Result<Vec<Vec<f64>>, AlgebroidError> {
    check_section(model, u)?;
    model.chart().check_point(x)?;
    let (f, grads) = model.frame_with_grad::<f64>(x)?;
    let (uv, du) = u.eval_with_grad(x)?;
    let k = f.k;
    let n = f.n;
    let xu = f.anchor_of(&uv);
    // [u, e_b]^d = u^a C^d_ab - rho_b(u^d)
    let ub: Vec<Vec<f64>> = (0..k)
        .map(|b| {
            (0..k)
                .map(|d| {
                    let s: f64 = (0..k).map(|a| uv[a] * f.c(d, a, b)).sum();
                    let r: f64 = (0..n).map(|i| f.rho(i, b) * du[i][d]).sum();
                    s - r
                })
                .collect()
        })
        .collect();
    let mut out = vec![vec![0.0; k]; k];
    for b in 0..k {
        for c in 0..k {
            let mut v: f64 = (0..n).map(|i| xu[i] * grads[i].g(b, c)).sum();
            for d in 0..k {
                v -= ub[b][d] * f.g(d, c) + f.g(b, d) * ub[c][d];
            }
            out[b][c] = v;
        }
    }
    Ok(out)
}

fn killing_residual(model: &AlgebroidModel, u: &Section, sampling: Sampling) -> Result<f64, AlgebroidError> {
    let mut worst = 0.0f64;
    for p in sampling.points(model.chart()) {
        let l = lie_derivative_metric(model, u, &p)?;
        worst = worst.max(linalg::max_abs(l.into_iter().flatten()));
    }
    Ok(worst)
}

pub fn is_killing(
    model: &AlgebroidModel,
    u: &Section,
    sampling: Sampling,
    tol: f64,
) -> Result<KillingCheck, AlgebroidError> {
    let residual = killing_residual(model, u, sampling)?;
    Ok(KillingCheck {
        is_killing: residual <= tol,
        residual,
    })
}

/// Stationarity: the kernel frame is Killing (which makes every section of
/// the kernel line Killing).
pub fn is_stationary(model: &AlgebroidModel, sampling: Sampling, tol: f64) -> Result<KillingCheck, AlgebroidError> {
    is_killing(model, &model.sigma_section(), sampling, tol)
}

/// Killing and preserves the kernel line under the bracket.
pub fn is_infinitesimal_symmetry(
    model: &AlgebroidModel,
    u: &Section,
    sampling: Sampling,
    tol: f64,
) -> Result<SymmetryCheck, AlgebroidError> {
    let killing_residual = killing_residual(model, u, sampling)?;
    let sigma = model.sigma_section();
    let mut kernel_residual = 0.0f64;
    for p in sampling.points(model.chart()) {
        let f = model.frame::<f64>(&p)?;
        let (uv, du) = u.eval_with_grad(&p)?;
        let (sv, ds) = sigma.eval_with_grad(&p)?;
        let br = bracket_values(&f, &uv, &du, &sv, &ds);
        let omega = dual_form_at(&sv);
        kernel_residual = kernel_residual.max(linalg::norm(&transverse(&sv, &omega, &br)));
    }
    Ok(SymmetryCheck {
        is_symmetry: killing_residual <= tol && kernel_residual <= tol,
        killing_residual,
        kernel_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::presets;

    fn s() -> Sampling {
        Sampling::new(32, 42)
    }

    #[test]
    fn flat_carroll_lie_derivatives() {
        let m = presets::flat_carroll(2).unwrap();
        let l = lie_derivative_metric(&m, &m.sigma_section(), &[0.1, 0.2]).unwrap();
        assert!(l.iter().flatten().all(|v| *v == 0.0));
        assert!(is_killing(&m, &Section::basis(2, 0), s(), 1e-12).unwrap().is_killing);

        // Boost-like u = t d_x: (L_u g)(d_t, d_x) = 1.
        let boost = Section::parse(&["t", "0"], m.chart()).unwrap();
        let l = lie_derivative_metric(&m, &boost, &[0.3, 0.5]).unwrap();
        assert_eq!(l, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let k = is_killing(&m, &boost, s(), 1e-9).unwrap();
        assert!(!k.is_killing);
        assert!((k.residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonstationary_time_dependent_metric() {
        let m = presets::nonstationary();
        let l = lie_derivative_metric(&m, &m.sigma_section(), &[0.0, 1.0]).unwrap();
        assert_eq!(l, vec![vec![2.0, 0.0], vec![0.0, 0.0]]);
        assert!(!is_stationary(&m, s(), 1e-9).unwrap().is_killing);
    }

    #[test]
    fn stationarity_of_presets() {
        assert!(
            is_stationary(&presets::flat_carroll(3).unwrap(), s(), 1e-12)
                .unwrap()
                .is_killing
        );
        let vfl = presets::vector_field_line(&["y", "0"]).unwrap();
        assert!(is_stationary(&vfl, s(), 1e-12).unwrap().is_killing);
    }

    #[test]
    fn rescaled_kernel_sections_stay_killing() {
        let m = presets::flat_carroll(2).unwrap();
        let f = ScalarField::parse("exp(x)*sin(t) + x^2", m.chart()).unwrap();
        let u = m.sigma_section().scaled(&f);
        for p in s().points(m.chart()) {
            let l = lie_derivative_metric(&m, &u, &p).unwrap();
            assert!(l.iter().flatten().all(|v| v.abs() <= 1e-12));
        }
    }

    #[test]
    fn symmetries_of_flat_carroll() {
        let m = presets::flat_carroll(2).unwrap();
        assert!(
            is_infinitesimal_symmetry(&m, &m.sigma_section(), s(), 1e-12)
                .unwrap()
                .is_symmetry
        );
        assert!(
            is_infinitesimal_symmetry(&m, &Section::basis(2, 0), s(), 1e-12)
                .unwrap()
                .is_symmetry
        );
        let boost = Section::parse(&["t", "0"], m.chart()).unwrap();
        let r = is_infinitesimal_symmetry(&m, &boost, s(), 1e-9).unwrap();
        assert!(!r.is_symmetry);
        assert!(r.killing_residual > 0.5);
    }
}
