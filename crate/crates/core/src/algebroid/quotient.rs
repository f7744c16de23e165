use serde::{Deserialize, Serialize};

use super::checks::kernel_dimension;
use super::{dual_form_at, transverse, AlgebroidError, AlgebroidModel};
use crate::distribution;
use crate::linalg::{self, RCOND};
use crate::sampling::Sampling;

/// Metric induced on `A / L` at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientMetric {
    /// Representatives of the quotient basis (orthonormal, transverse to the kernel).
    pub basis: Vec<Vec<f64>>,
    pub gram: Vec<Vec<f64>>,
    pub det: f64,
}

/// Gram matrix `g(r_i, r_j)` of the given representatives at `x`.
pub fn quotient_gram(model: &AlgebroidModel, x: &[f64], reps: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, AlgebroidError> {
    let f = model.frame_at(x)?;
    if reps.iter().any(|r| r.len() != f.k) {
        return Err(AlgebroidError::Dimension(format!(
            "representatives must have {} components",
            f.k
        )));
    }
    Ok(reps
        .iter()
        .map(|u| reps.iter().map(|v| f.pair(u, v)).collect())
        .collect())
}

/// Orthonormalize, keeping the `count` candidates with the largest residual norms.
fn orthonormal_subset(cands: &[Vec<f64>], count: usize) -> Vec<Vec<f64>> {
    let mut work: Vec<Vec<f64>> = cands.to_vec();
    let mut used = vec![false; work.len()];
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    for _ in 0..count {
        let Some(pick) = (0..work.len())
            .filter(|i| !used[*i])
            .max_by(|&i, &j| linalg::norm(&work[i]).total_cmp(&linalg::norm(&work[j])))
        else {
            break;
        };
        used[pick] = true;
        let nrm = linalg::norm(&work[pick]);
        let q: Vec<f64> = work[pick].iter().map(|v| v / nrm).collect();
        for (i, w) in work.iter_mut().enumerate() {
            if used[i] {
                continue;
            }
            let c: f64 = w.iter().zip(&q).map(|(a, b)| a * b).sum();
            for (wi, qi) in w.iter_mut().zip(&q) {
                *wi -= c * qi;
            }
        }
        out.push(q);
    }
    out
}

fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 1.0;
    }
    linalg::to_matrix(m, n).determinant()
}

/// Non-degenerate metric on the quotient by the kernel line at `x`.
pub fn quotient_metric(model: &AlgebroidModel, x: &[f64]) -> Result<QuotientMetric, AlgebroidError> {
    let f = model.frame_at(x)?;
    let k = f.k;
    let kd = kernel_dimension(&f.metric, k);
    if kd != 1 {
        return Err(AlgebroidError::InconsistentKernel {
            point: x.to_vec(),
            found: kd,
        });
    }
    let norm = linalg::norm(&f.sigma);
    if !(norm >= super::SIGMA_MIN_NORM) {
        return Err(AlgebroidError::DegenerateFrame {
            point: x.to_vec(),
            norm,
        });
    }
    let omega = dual_form_at(&f.sigma);
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let e: Vec<f64> = (0..k).map(|a| if a == j { 1.0 } else { 0.0 }).collect();
            transverse(&f.sigma, &omega, &e)
        })
        .collect();
    let basis = orthonormal_subset(&cols, k - 1);
    let gram = quotient_gram(model, x, &basis)?;
    let det = det(&gram);
    Ok(QuotientMetric { basis, gram, det })
}

/// Spatial metric on `TM / C` for transitive models with rank equal to the
/// chart dimension and a regular Carroll distribution.
pub fn induced_spatial_metric(model: &AlgebroidModel, x: &[f64]) -> Result<Vec<Vec<f64>>, AlgebroidError> {
    let f = model.frame_at(x)?;
    let (n, k) = (f.n, f.k);
    let rho_rows: Vec<Vec<f64>> = (0..n).map(|i| (0..k).map(|a| *f.rho(i, a)).collect()).collect();
    let sv = linalg::singular_values(&rho_rows, k);
    if n > 0 && linalg::rank(&sv, RCOND) < n {
        return Err(AlgebroidError::Precondition(
            "transitive: anchor is not surjective".into(),
        ));
    }
    if k != n {
        return Err(AlgebroidError::Precondition(format!(
            "rank A = dim M fails: rank {k}, dimension {n}"
        )));
    }
    let eps = distribution::default_eps(model.chart());
    if !distribution::is_l_regular(model, Sampling::default(), eps)? {
        return Err(AlgebroidError::Precondition(
            "L-regular: Carroll distribution vanishes somewhere on the chart".into(),
        ));
    }
    let c = f.anchor_of(&f.sigma);
    let cn = linalg::norm(&c);
    let unit: Vec<f64> = c.iter().map(|v| v / cn).collect();
    let cands: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let dot = unit[j];
            (0..n).map(|i| if i == j { 1.0 } else { 0.0 } - dot * unit[i]).collect()
        })
        .collect();
    let reps = orthonormal_subset(&cands, n - 1);
    let preimages = reps
        .iter()
        .map(|v| linalg::solve_square(&rho_rows, v))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| AlgebroidError::Precondition("transitive: anchor not invertible".into()))?;
    quotient_gram(model, x, &preimages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;
    use crate::presets;

    #[test]
    fn flat_carroll_quotient_is_identity() {
        let m = presets::flat_carroll(3).unwrap();
        let q = quotient_metric(&m, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(q.gram, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(q.det, 1.0);
    }

    #[test]
    fn killing_form_on_sl2_complement() {
        let m = presets::lie_algebra_gl2();
        let q = quotient_metric(&m, &[]).unwrap();
        assert!(q.det.abs() > 1e-6);
        // sl2 representatives E12, E21, E11 - E22 against 4 tr(XY).
        let reps = vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, -1.0],
        ];
        let g = quotient_gram(&m, &[], &reps).unwrap();
        let expected = [[0.0, 4.0, 0.0], [4.0, 0.0, 0.0], [0.0, 0.0, 8.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(g[i][j], expected[i][j]);
            }
        }
    }

    #[test]
    fn complement_choice_is_a_congruence() {
        let m = presets::action_gl2();
        let x = [0.4, -0.7];
        let q = quotient_metric(&m, &x).unwrap();
        // A second choice of representatives: a linear change of basis plus
        // arbitrary multiples of sigma.
        let sigma = m.frame::<f64>(&x).unwrap().sigma;
        let p = [[1.0, 2.0, 0.0], [0.0, 1.0, -1.0], [0.5, 0.0, 3.0]];
        let shifts = [0.7, -2.0, 5.0];
        let reps: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                (0..4)
                    .map(|a| (0..3).map(|j| p[i][j] * q.basis[j][a]).sum::<f64>() + shifts[i] * sigma[a])
                    .collect()
            })
            .collect();
        let g2 = quotient_gram(&m, &x, &reps).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut t = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        t += p[i][a] * q.gram[a][b] * p[j][b];
                    }
                }
                assert!((t - g2[i][j]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn nondegenerate_metric_is_inconsistent_kernel() {
        let m = presets::flat_carroll(2).unwrap();
        let one = ScalarField::constant(1.0);
        let bad = m
            .with_metric(vec![
                vec![one.clone(), ScalarField::zero()],
                vec![ScalarField::zero(), one],
            ])
            .unwrap();
        assert!(matches!(
            quotient_metric(&bad, &[0.0, 0.0]),
            Err(AlgebroidError::InconsistentKernel { found: 0, .. })
        ));
    }

    #[test]
    fn induced_spatial_metric_preconditions() {
        let flat = presets::flat_carroll(3).unwrap();
        let g = induced_spatial_metric(&flat, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let ds = presets::direct_sum(&[&["1", "0"], &["0", "1"]], &["y", "0"]).unwrap();
        match induced_spatial_metric(&ds, &[0.1, 0.2]) {
            Err(AlgebroidError::Precondition(m)) => assert!(m.contains("rank A = dim M"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
        let vfl = presets::vector_field_line(&["y", "0"]).unwrap();
        match induced_spatial_metric(&vfl, &[0.1, 0.2]) {
            Err(AlgebroidError::Precondition(m)) => assert!(m.contains("transitive"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
