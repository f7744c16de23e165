use super::checks::{Bound, CheckResult, ValidationReport};
use super::{bracket_values, dual_form_at, transverse, AlgebroidError, AlgebroidModel, Section};
use crate::fields::ScalarField;
use crate::linalg;
use crate::sampling::Sampling;

/// Bundle map `phi(e_a) = phi^alpha_a e'_alpha` between models on one chart.
#[derive(Clone, Debug)]
pub struct Morphism {
    pub rows: usize,
    pub cols: usize,
    /// Row-major: `entries[alpha * cols + a] = phi^alpha_a`.
    pub entries: Vec<ScalarField>,
}

impl Morphism {
    pub fn new(rows: usize, cols: usize, entries: Vec<ScalarField>) -> Result<Self, AlgebroidError> {
        if entries.len() != rows * cols {
            return Err(AlgebroidError::Dimension(format!(
                "morphism {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Morphism { rows, cols, entries })
    }

    pub fn constant(m: &[Vec<f64>]) -> Result<Self, AlgebroidError> {
        let rows = m.len();
        let cols = m.first().map_or(0, |r| r.len());
        Morphism::new(
            rows,
            cols,
            m.iter().flatten().map(|v| ScalarField::constant(*v)).collect(),
        )
    }

    pub fn identity(k: usize) -> Self {
        let m: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Morphism::constant(&m).expect("square")
    }

    pub fn entry(&self, alpha: usize, a: usize) -> &ScalarField {
        &self.entries[alpha * self.cols + a]
    }

    /// Image of the frame element `e_a` as a section of the target.
    pub fn column(&self, a: usize) -> Section {
        Section::new((0..self.rows).map(|al| self.entry(al, a).clone()).collect())
    }

    /// `self ∘ first`
    pub fn compose(&self, first: &Morphism) -> Result<Morphism, AlgebroidError> {
        if self.cols != first.rows {
            return Err(AlgebroidError::Dimension(format!(
                "cannot compose {}x{} after {}x{}",
                self.rows, self.cols, first.rows, first.cols
            )));
        }
        let mut entries = Vec::with_capacity(self.rows * first.cols);
        for i in 0..self.rows {
            for j in 0..first.cols {
                let e = (0..self.cols).fold(ScalarField::zero(), |acc, m| {
                    &acc + &(self.entry(i, m) * first.entry(m, j))
                });
                entries.push(e);
            }
        }
        Morphism::new(self.rows, first.cols, entries)
    }
}

/// Check that `phi` is a Carrollian algebroid morphism from `source` to `target`:
/// bracket homomorphism on frame pairs, anchor compatibility, isometry, and
/// kernel frame mapped into the target kernel line.
pub fn verify_morphism(
    phi: &Morphism,
    source: &AlgebroidModel,
    target: &AlgebroidModel,
    sampling: Sampling,
    tol: f64,
) -> Result<ValidationReport, AlgebroidError> {
    if source.chart() != target.chart() {
        return Err(AlgebroidError::Dimension("models live on different charts".into()));
    }
    if phi.cols != source.rank() || phi.rows != target.rank() {
        return Err(AlgebroidError::Dimension(format!(
            "morphism is {}x{}, models have ranks {} -> {}",
            phi.rows,
            phi.cols,
            source.rank(),
            target.rank()
        )));
    }
    let (k1, k2) = (phi.cols, phi.rows);
    let mut bracket = CheckResult::new("bracket_homomorphism", tol, Bound::AtMost);
    let mut anchor = CheckResult::new("anchor_compatibility", tol, Bound::AtMost);
    let mut iso = CheckResult::new("isometry", tol, Bound::AtMost);
    let mut kernel = CheckResult::new("kernel_to_kernel", tol, Bound::AtMost);
    let cols: Vec<Section> = (0..k1).map(|a| phi.column(a)).collect();

    for p in sampling.points(source.chart()) {
        let f1 = source.frame::<f64>(&p)?;
        let f2 = target.frame::<f64>(&p)?;
        let imgs = cols
            .iter()
            .map(|c| c.eval_with_grad(&p))
            .collect::<Result<Vec<_>, _>>()?;

        let mut worst = 0.0f64;
        for a in 0..k1 {
            let x2 = f2.anchor_of(&imgs[a].0);
            for i in 0..f1.n {
                worst = worst.max((x2[i] - f1.rho(i, a)).abs());
            }
        }
        anchor.record(worst);

        let mut worst_b = 0.0f64;
        let mut worst_g = 0.0f64;
        for a in 0..k1 {
            for b in 0..k1 {
                worst_g = worst_g.max((f2.pair(&imgs[a].0, &imgs[b].0) - f1.g(a, b)).abs());
                if b <= a {
                    continue;
                }
                let rhs = bracket_values(&f2, &imgs[a].0, &imgs[a].1, &imgs[b].0, &imgs[b].1);
                for (al, r) in rhs.iter().enumerate() {
                    let lhs: f64 = (0..k1).map(|c| f1.c(c, a, b) * imgs[c].0[al]).sum();
                    worst_b = worst_b.max((lhs - r).abs());
                }
            }
        }
        bracket.record(worst_b);
        iso.record(worst_g);

        let image: Vec<f64> = (0..k2)
            .map(|al| (0..k1).map(|a| imgs[a].0[al] * f1.sigma[a]).sum())
            .collect();
        let omega = dual_form_at(&f2.sigma);
        kernel.record(linalg::norm(&transverse(&f2.sigma, &omega, &image)));
    }
    Ok(ValidationReport::new(
        vec![bracket, anchor, iso, kernel],
        sampling,
        tol,
        Vec::new(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn s() -> Sampling {
        Sampling::new(16, 42)
    }

    /// Matrix of `X -> M X M^{-1}` on gl2 in the basis (E11, E12, E21, E22).
    fn conjugation(m: [[f64; 2]; 2]) -> Vec<Vec<f64>> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let inv = [[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]];
        let mut out = vec![vec![0.0; 4]; 4];
        for col in 0..4 {
            let (i, j) = (col / 2, col % 2);
            // M E_ij M^{-1} = (M e_i)(e_j^T M^{-1})
            for r in 0..2 {
                for c in 0..2 {
                    out[r * 2 + c][col] = m[r][i] * inv[j][c];
                }
            }
        }
        out
    }

    #[test]
    fn identity_passes() {
        for m in [presets::flat_carroll(3).unwrap(), presets::action_gl2()] {
            let r = verify_morphism(&Morphism::identity(m.rank()), &m, &m, s(), 1e-12).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn doubling_sigma_breaks_anchor() {
        let m = presets::flat_carroll(2).unwrap();
        let phi = Morphism::constant(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let r = verify_morphism(&phi, &m, &m, s(), 1e-9).unwrap();
        assert!(!r.check("anchor_compatibility").unwrap().pass);
        assert!(!r.pass);
    }

    #[test]
    fn conjugation_is_an_automorphism_of_gl2() {
        let m = presets::lie_algebra_gl2();
        let phi = Morphism::constant(&conjugation([[2.0, 1.0], [0.5, 1.5]])).unwrap();
        let r = verify_morphism(&phi, &m, &m, s(), 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn composition_of_verified_morphisms() {
        let m = presets::lie_algebra_gl2();
        let phi = Morphism::constant(&conjugation([[2.0, 1.0], [0.5, 1.5]])).unwrap();
        let psi = Morphism::constant(&conjugation([[1.0, -3.0], [0.0, 1.0]])).unwrap();
        let both = psi.compose(&phi).unwrap();
        assert!(verify_morphism(&both, &m, &m, s(), 1e-12).unwrap().pass);
        let with_id = both.compose(&Morphism::identity(4)).unwrap();
        assert!(verify_morphism(&with_id, &m, &m, s(), 1e-12).unwrap().pass);
    }

    #[test]
    fn dimension_mismatch() {
        let m = presets::lie_algebra_gl2();
        assert!(verify_morphism(&Morphism::identity(3), &m, &m, s(), 1e-9).is_err());
    }
}
