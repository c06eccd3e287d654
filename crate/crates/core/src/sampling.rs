//! Deterministic low-discrepancy sample points on boxes.

use serde::{Deserialize, Serialize};

use crate::form::BoxDomain;

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Van der Corput radical inverse of `index` in `base`, in `[0, 1)`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % b) as f64 * scale;
        index /= b;
        scale *= inv;
    }
    acc
}

/// The `index`-th point of the Halton sequence in the unit cube of dimension
/// `dim`. Index 0 is the origin, so callers usually start at 1.
///
/// # Panics
///
/// Panics if `dim` exceeds the number of tabulated prime bases (24).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports at most 24 dimensions");
    PRIMES[..dim]
        .iter()
        .map(|&b| radical_inverse(index, b))
        .collect()
}

/// `count` Halton points mapped into `domain`, skipping the origin.
pub fn low_discrepancy(domain: &BoxDomain, count: usize) -> Vec<Vec<f64>> {
    (1..=count as u64)
        .map(|i| domain.from_unit(&halton(i, domain.dim())))
        .collect()
}

/// How sample points for a box are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Number of low-discrepancy interior points.
    pub points: usize,
    pub include_center: bool,
    /// Corners are only added for dimension up to 12.
    pub include_corners: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            points: 64,
            include_center: true,
            include_corners: true,
        }
    }
}

impl SamplerConfig {
    pub fn interior_only(points: usize) -> Self {
        SamplerConfig {
            points,
            include_center: false,
            include_corners: false,
        }
    }

    pub fn points(&self, domain: &BoxDomain) -> Vec<Vec<f64>> {
        let mut out = low_discrepancy(domain, self.points);
        if self.include_center {
            out.push(domain.center());
        }
        if self.include_corners && domain.dim() <= 12 {
            out.extend(domain.corners());
        }
        out
    }
}

/// Regular grid with `per_axis` nodes per axis, boundaries included.
pub fn grid(domain: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let n = domain.dim();
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut k| {
            let mut u = vec![0.0; n];
            // first axis varies slowest
            for i in (0..n).rev() {
                let j = k % per_axis;
                k /= per_axis;
                u[i] = if per_axis == 1 {
                    0.5
                } else {
                    j as f64 / (per_axis - 1) as f64
                };
            }
            domain.from_unit(&u)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        let got: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
    }

    #[test]
    fn samples_lie_in_box() {
        let b = BoxDomain::new(vec![(-1.0, 1.0), (2.0, 3.0), (0.0, 0.5)]).unwrap();
        let pts = SamplerConfig::default().points(&b);
        assert_eq!(pts.len(), 64 + 1 + 8);
        assert!(pts.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn grid_includes_boundaries() {
        let b = BoxDomain::new(vec![(0.0, 1.0), (0.0, 2.0)]).unwrap();
        let g = grid(&b, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_eq!(g[1], vec![0.0, 1.0]);
        assert_eq!(g[8], vec![1.0, 2.0]);
    }
}
