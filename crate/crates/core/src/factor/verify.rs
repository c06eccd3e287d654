use rayon::prelude::*;
use serde::Serialize;

use super::{fd_gradient, fd_steps, Potential};
use crate::form::{PfaffianForm, SINGULAR_TOL};

/// Relative step for the finite differences of `ψ`, as a fraction of the
/// box edge.
pub const FD_REL_STEP: f64 = 1e-4;
/// Relative disagreement between `μ` and a branch `Fᵢ / ∂ᵢψ` that flags a
/// sample.
pub const BRANCH_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub residual_max: f64,
    pub residual_rms: f64,
    /// Samples with a residual.
    pub evaluated_points: usize,
    /// Samples where `ψ`, its gradient or `μ` was unavailable, `μ` vanished,
    /// or the form was singular.
    pub skipped_points: usize,
    /// Evaluated samples where some branch `Fᵢ / ∂ᵢψ` with a non-negligible
    /// `Fᵢ` disagrees with `μ` by more than [`BRANCH_TOL`] relative.
    pub flagged_points: usize,
    pub worst_point: Option<Vec<f64>>,
}

/// Residual `maxᵢ |Fᵢ − μ ∂ᵢψ| / max(1, |Fᵢ|)` at each sample, with `∂ψ`
/// from finite differences with step `1e-4` times the box edge.
pub fn verify_factorization(f: &PfaffianForm, pot: &dyn Potential, samples: &[Vec<f64>]) -> ResidualStats {
    let steps = fd_steps(f, FD_REL_STEP);
    let per_point: Vec<Option<(f64, bool)>> = samples
        .par_iter()
        .map(|p| {
            let fv = f.eval_coefficients(p).ok()?;
            let fmax = fv.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if fmax <= SINGULAR_TOL {
                return None;
            }
            let mu = pot.mu(p)?;
            if !(mu.abs() > SINGULAR_TOL) {
                return None;
            }
            let grad = fd_gradient(pot, p, &steps)?;
            let mut r = 0.0_f64;
            let mut flagged = false;
            for (fi, gi) in fv.iter().zip(&grad) {
                r = r.max((fi - mu * gi).abs() / fi.abs().max(1.0));
                if fi.abs() >= 1e-3 * fmax && gi.abs() > 0.0 {
                    let branch = fi / gi;
                    flagged |= (branch - mu).abs() > BRANCH_TOL * mu.abs();
                }
            }
            Some((r, flagged))
        })
        .collect();
    let mut stats = ResidualStats {
        residual_max: 0.0,
        residual_rms: 0.0,
        evaluated_points: 0,
        skipped_points: 0,
        flagged_points: 0,
        worst_point: None,
    };
    let mut sum_sq = 0.0;
    for (p, r) in samples.iter().zip(per_point) {
        match r {
            None => stats.skipped_points += 1,
            Some((r, flagged)) => {
                stats.evaluated_points += 1;
                stats.flagged_points += usize::from(flagged);
                sum_sq += r * r;
                if r > stats.residual_max || stats.worst_point.is_none() {
                    stats.residual_max = r;
                    stats.worst_point = Some(p.clone());
                }
            }
        }
    }
    if stats.evaluated_points > 0 {
        stats.residual_rms = (sum_sq / stats.evaluated_points as f64).sqrt();
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::factor::ReferencePotential;
    use crate::form::{make_form, BoxDomain};
    use crate::sampling::grid;

    const V: [&str; 3] = ["x", "y", "z"];

    fn scaled_exact() -> PfaffianForm {
        make_form(&V, &["exp(z)*y", "exp(z)*x", "exp(z)"], BoxDomain::cube(3, -0.5, 0.5).unwrap()).unwrap()
    }

    fn pot(psi: &str, mu: &str) -> ReferencePotential {
        ReferencePotential {
            psi: parse_expression(psi, &V).unwrap(),
            mu: parse_expression(mu, &V).unwrap(),
        }
    }

    #[test]
    fn exact_pair_has_tiny_residual() {
        let f = scaled_exact();
        let s = verify_factorization(&f, &pot("x*y + z", "exp(z)"), &grid(f.domain(), 5));
        assert_eq!(s.evaluated_points, 125);
        assert!(s.residual_max <= 1e-8, "{s:?}");
        assert_eq!(s.flagged_points, 0);
    }

    #[test]
    fn constant_candidate_is_rejected() {
        let f = scaled_exact();
        let s = verify_factorization(&f, &pot("0", "1"), &grid(f.domain(), 5));
        // normalized residual max |F_i|/max(1,|F_i|) is 1 wherever exp(z) >= 1
        assert!((s.residual_max - 1.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn gauge_freedom() {
        let f = scaled_exact();
        let pts = grid(f.domain(), 4);
        let a = verify_factorization(&f, &pot("x*y + z", "exp(z)"), &pts);
        let b = verify_factorization(&f, &pot("2*(x*y + z)", "exp(z)/2"), &pts);
        assert!((a.residual_max - b.residual_max).abs() < 1e-9);
        assert!(b.residual_max < 1e-8);
    }

    #[test]
    fn vanishing_mu_is_skipped() {
        let f = scaled_exact();
        let s = verify_factorization(&f, &pot("x*y + z", "0*x"), &grid(f.domain(), 3));
        assert_eq!(s.skipped_points, 27);
        assert_eq!(s.evaluated_points, 0);
    }
}
