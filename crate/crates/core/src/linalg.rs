//! Dense linear algebra used by the checks and connection solvers.
//!
//! Rank decisions and residuals are taken from an SVD of the plain values.
//! Solutions that must carry derivatives are computed by pivoted Gram-Schmidt
//! over the carrier type, which is differentiable wherever the rank is locally
//! constant and returns the same minimum-norm solution as the pseudoinverse.

use faer::Mat;
use thiserror::Error;

use crate::dual::Scalar;

/// Relative singular-value cutoff for rank decisions.
pub const RCOND: f64 = 1e-10;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("inconsistent linear system: least-squares residual {residual:.3e}")]
    Inconsistent { residual: f64 },
    #[error("singular matrix")]
    Singular,
}

pub fn to_matrix(rows: &[Vec<f64>], cols: usize) -> Mat<f64> {
    Mat::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Singular values in decreasing order.
pub fn singular_values(rows: &[Vec<f64>], cols: usize) -> Vec<f64> {
    if rows.is_empty() || cols == 0 {
        return Vec::new();
    }
    let mut sv = to_matrix(rows, cols)
        .singular_values()
        .expect("SVD converges on finite input");
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Numerical rank with cutoff `rcond` relative to the largest singular value.
pub fn rank(sv: &[f64], rcond: f64) -> usize {
    match sv.first() {
        Some(&top) if top > 0.0 => sv.iter().filter(|s| **s > rcond * top).count(),
        _ => 0,
    }
}

/// Minimum-norm least-squares solution through the pseudoinverse, with the
/// max-norm of the equation residual.
pub fn pinv_solve(rows: &[Vec<f64>], rhs: &[f64], cols: usize, rcond: f64) -> (Vec<f64>, f64) {
    if rows.is_empty() || cols == 0 {
        let res = rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        return (vec![0.0; cols], res);
    }
    let a = to_matrix(rows, cols);
    let svd = a.thin_svd().expect("SVD converges on finite input");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let top = (0..s.nrows()).fold(0.0f64, |m, i| m.max(s[i]));
    let mut x = vec![0.0; cols];
    for k in 0..s.nrows() {
        if top > 0.0 && s[k] > rcond * top {
            let coeff: f64 = (0..rows.len()).map(|i| u[(i, k)] * rhs[i]).sum::<f64>() / s[k];
            for (j, xj) in x.iter_mut().enumerate() {
                *xj += v[(j, k)] * coeff;
            }
        }
    }
    let res = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| r.iter().zip(&x).map(|(a, x)| a * x).sum::<f64>() - b)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    (x, res)
}

/// Result of a carrier-level minimum-norm solve.
#[derive(Clone, Debug)]
pub struct MinNormSolution<S> {
    pub x: Vec<S>,
    pub rank: usize,
    /// Max-norm residual of the least-squares solution at the plain values.
    pub residual: f64,
}

/// Minimum-norm solution of `rows · x = rhs` over carrier `S`.
///
/// Fails with [`LinalgError::Inconsistent`] when the least-squares residual
/// exceeds `tol`.
pub fn min_norm_solve<S: Scalar>(
    rows: &[Vec<S>],
    rhs: &[S],
    cols: usize,
    tol: f64,
) -> Result<MinNormSolution<S>, LinalgError> {
    let values: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(Scalar::value).collect()).collect();
    let b0: Vec<f64> = rhs.iter().map(Scalar::value).collect();
    let sv = singular_values(&values, cols);
    let r = rank(&sv, RCOND);
    let (_, residual) = pinv_solve(&values, &b0, cols, RCOND);
    if !(residual <= tol) {
        return Err(LinalgError::Inconsistent { residual });
    }
    let x = gram_schmidt_solve(rows, rhs, cols, r);
    Ok(MinNormSolution { x, rank: r, residual })
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Pivoted modified Gram-Schmidt on the rows; `rank` rows are selected.
fn gram_schmidt_solve<S: Scalar>(rows: &[Vec<S>], rhs: &[S], cols: usize, rank: usize) -> Vec<S> {
    let m = rows.len();
    let mut work: Vec<Vec<S>> = rows.to_vec();
    let mut coef: Vec<Vec<S>> = vec![Vec::with_capacity(rank); m];
    let mut selected: Vec<usize> = Vec::with_capacity(rank);
    let mut basis: Vec<Vec<S>> = Vec::with_capacity(rank);
    let mut used = vec![false; m];

    for _ in 0..rank {
        let pick = (0..m)
            .filter(|i| !used[*i])
            .max_by(|&i, &j| {
                let ni: f64 = work[i].iter().map(|v| v.value() * v.value()).sum();
                let nj: f64 = work[j].iter().map(|v| v.value() * v.value()).sum();
                ni.total_cmp(&nj)
            })
            .expect("rank never exceeds row count");
        used[pick] = true;
        let norm = dot(&work[pick], &work[pick]).sqrt();
        let q: Vec<S> = work[pick].iter().map(|v| v.clone() / norm.clone()).collect();
        coef[pick].push(norm);
        for i in 0..m {
            if used[i] {
                continue;
            }
            let c = dot(&work[i], &q);
            for (w, qk) in work[i].iter_mut().zip(&q) {
                *w = w.clone() - c.clone() * qk.clone();
            }
            coef[i].push(c);
        }
        selected.push(pick);
        basis.push(q);
    }

    // Forward substitution: sum_{l<=j} coef[sel_j][l] z_l = rhs[sel_j].
    let mut z: Vec<S> = Vec::with_capacity(rank);
    for (j, &row) in selected.iter().enumerate() {
        let mut acc = rhs[row].clone();
        for (l, zl) in z.iter().enumerate() {
            acc = acc - coef[row][l].clone() * zl.clone();
        }
        z.push(acc / coef[row][j].clone());
    }
    let mut x = vec![S::zero(); cols];
    for (zl, q) in z.iter().zip(&basis) {
        for (xi, qi) in x.iter_mut().zip(q) {
            *xi = xi.clone() + zl.clone() * qi.clone();
        }
    }
    x
}

/// Solve a square system by Gaussian elimination with partial pivoting on
/// the plain values.
pub fn solve_square<S: Scalar>(a: &[Vec<S>], b: &[S]) -> Result<Vec<S>, LinalgError> {
    let n = b.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut rhs: Vec<S> = b.to_vec();
    let scale = a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.value().abs()));
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].value().abs().total_cmp(&m[j][col].value().abs()))
            .ok_or(LinalgError::Singular)?;
        if m[piv][col].value().abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return Err(LinalgError::Singular);
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col].clone() / m[col][col].clone();
            for k in col..n {
                m[row][k] = m[row][k].clone() - f.clone() * m[col][k].clone();
            }
            rhs[row] = rhs[row].clone() - f * rhs[col].clone();
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row].clone();
        for k in row + 1..n {
            acc = acc - m[row][k].clone() * x[k].clone();
        }
        x[row] = acc / m[row][row].clone();
    }
    Ok(x)
}

/// Orthonormal basis of the null space of `rows` (right singular vectors
/// with singular value below the cutoff).
pub fn null_space(rows: &[Vec<f64>], cols: usize, rcond: f64) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return (0..cols)
            .map(|i| (0..cols).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let svd = to_matrix(rows, cols).svd().expect("SVD converges on finite input");
    let (s, v) = (svd.S().column_vector(), svd.V());
    let top = (0..s.nrows()).fold(0.0f64, |m, i| m.max(s[i]));
    (0..cols)
        .filter(|&k| k >= s.nrows() || top == 0.0 || s[k] <= rcond * top)
        .map(|k| (0..cols).map(|j| v[(j, k)]).collect())
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter()
        .fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{lift, Dual};

    #[test]
    fn min_norm_matches_pseudoinverse() {
        // x + y + z = 3, x - y = 0 (underdetermined)
        let rows = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]];
        let rhs = vec![3.0, 0.0];
        let sol = min_norm_solve(&rows, &rhs, 3, 1e-12).unwrap();
        let (xp, res) = pinv_solve(&rows, &rhs, 3, RCOND);
        assert!(res < 1e-14);
        for (a, b) in sol.x.iter().zip(&xp) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(sol.rank, 2);
    }

    #[test]
    fn nearly_equal_singular_values_with_a_zero_row() {
        let rows = vec![
            vec![
                4.000029255843314,
                0.0,
                0.0,
                -0.00893572998046875,
                0.0,
                0.0,
                0.0,
                0.0,
                0.0,
            ],
            vec![
                -0.004467864990234375,
                2.000014627921657,
                0.0,
                2.0000483985556055,
                -0.004467864990234375,
                0.0,
                0.0,
                0.0,
                0.0,
            ],
            vec![
                0.0,
                0.0,
                2.000014627921657,
                0.0,
                0.0,
                -0.004467864990234375,
                0.0,
                0.0,
                0.0,
            ],
            vec![
                0.0,
                -0.00893572998046875,
                0.0,
                0.0,
                4.000096797111211,
                0.0,
                0.0,
                0.0,
                0.0,
            ],
            vec![
                0.0,
                0.0,
                -0.004467864990234375,
                0.0,
                0.0,
                2.0000483985556055,
                0.0,
                0.0,
                0.0,
            ],
            vec![0.0; 9],
        ];
        let rhs = vec![-3.0787811279296877e-3, -5.6e-2, 0.0, -1.0186584472656251e-2, 0.0, 0.0];
        let (_, res) = pinv_solve(&rows, &rhs, 9, RCOND);
        assert!(res <= 1e-15, "{res:e}");
        assert_eq!(rank(&singular_values(&rows, 9), RCOND), 5);
        assert_eq!(null_space(&rows, 9, RCOND).len(), 4);
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]];
        let rhs = vec![1.0, 2.0, 0.0];
        let sol = min_norm_solve(&rows, &rhs, 2, 1e-12).unwrap();
        assert_eq!(sol.rank, 1);
        assert!((sol.x[0] - 0.2).abs() < 1e-15 && (sol.x[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_system_is_reported() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let rhs = vec![1.0, 2.0];
        assert!(matches!(
            min_norm_solve(&rows, &rhs, 2, 1e-8),
            Err(LinalgError::Inconsistent { .. })
        ));
    }

    #[test]
    fn carrier_solution_differentiates_pseudoinverse() {
        // Row (1, t) x = 1 has min-norm solution (1, t)/(1 + t^2).
        let t = lift(&[0.7])[0].clone();
        let rows = vec![vec![<Dual<f64>>::cst(1.0), t.clone()]];
        let sol = min_norm_solve(&rows, &[Dual::cst(1.0)], 2, 1e-12).unwrap();
        let d = 1.0 + 0.49;
        let dx0 = -2.0 * 0.7 / (d * d);
        let dx1 = (d - 2.0 * 0.49) / (d * d);
        assert!((sol.x[0].d(0) - dx0).abs() < 1e-14);
        assert!((sol.x[1].d(0) - dx1).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_rank_one() {
        let ns = null_space(&[vec![1.0, 1.0, 0.0]], 3, RCOND);
        assert_eq!(ns.len(), 2);
        for v in &ns {
            assert!((v[0] + v[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn square_solve() {
        let a = vec![vec![0.0, 2.0], vec![1.0, 1.0]];
        let x = solve_square(&a, &[4.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert!(solve_square(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 1.0]).is_err());
    }
}
