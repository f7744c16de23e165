//! Seeded Halton sampling of chart interiors.

use crate::fields::Chart;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Sample count and seed; echoed into every report.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling { samples: 128, seed: 42 }
    }
}

impl Sampling {
    pub fn new(samples: usize, seed: u64) -> Self {
        Sampling { samples, seed }
    }

    pub fn points(&self, chart: &Chart) -> Vec<Vec<f64>> {
        halton_points(chart, self.samples, self.seed)
    }
}

/// Radical inverse of `index` in `base`; lies in (0, 1) for `index >= 1`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// `count` Halton points in the open chart box. The seed selects the starting
/// index of the sequence, so distinct seeds give disjoint stretches.
pub fn halton_points(chart: &Chart, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = chart.dim();
    assert!(
        n <= PRIMES.len(),
        "charts above {} dimensions unsupported",
        PRIMES.len()
    );
    let start = 1 + seed.wrapping_mul(7919) % 1_000_003;
    (0..count as u64)
        .map(|j| {
            let u: Vec<f64> = (0..n).map(|d| radical_inverse(start + j, PRIMES[d])).collect();
            chart.from_unit(&u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn points_are_interior_and_deterministic() {
        let c = Chart::from_bounds(&["x", "t"], &[-1.0, 0.0], &[1.0, 2.0]).unwrap();
        let a = halton_points(&c, 64, 42);
        let b = halton_points(&c, 64, 42);
        assert_eq!(a, b);
        for p in &a {
            assert!(p[0] > -1.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 2.0);
        }
        assert_ne!(a, halton_points(&c, 64, 7));
    }

    #[test]
    fn point_chart_yields_empty_points() {
        let pts = halton_points(&Chart::point(), 3, 0);
        assert_eq!(pts, vec![Vec::<f64>::new(); 3]);
    }
}
