//! Potential of a two-variable form from its characteristics: `ψ(p)` is the
//! transversal coordinate where the characteristic through `p` crosses a
//! fixed axis-parallel line, and `μ = Fᵢ / ∂ᵢψ` for the larger `|Fᵢ|`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::characteristic::{shoot_to_transversal, Transversal};
use super::verify::{verify_factorization, FD_REL_STEP};
use super::{fd_partial, pivot, FactorError, FactorizationResult, Method, Potential};
use crate::form::{BoxDomain, PfaffianForm, SINGULAR_TOL};
use crate::ode::OdeOptions;
use crate::sampling::grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential2Config {
    /// `None` selects the candidate line reached from most points of a
    /// coarse grid.
    pub transversal: Option<Transversal>,
    /// Characteristics may leave the domain by this fraction of its width on
    /// each side before they are abandoned.
    pub margin: f64,
    pub ode: OdeOptions,
    /// Nodes per axis of the residual check grid.
    pub verify_grid: usize,
}

impl Default for Potential2Config {
    fn default() -> Self {
        Potential2Config {
            transversal: None,
            margin: 1.0,
            ode: OdeOptions::default(),
            verify_grid: 17,
        }
    }
}

// positions tried for an automatic transversal, as fractions of the box
const CANDIDATE_FRACTIONS: [f64; 9] = [0.5, 0.35, 0.65, 0.2, 0.8, 0.1, 0.9, 0.0, 1.0];
const SELECTION_GRID: usize = 9;

pub struct CharacteristicPotential {
    form: PfaffianForm,
    transversal: Transversal,
    region: BoxDomain,
    ode: OdeOptions,
    steps: Vec<f64>,
}

impl CharacteristicPotential {
    pub fn new(form: PfaffianForm, transversal: Transversal, margin: f64, ode: OdeOptions) -> Self {
        let region = form.domain().inflate(margin);
        let steps = super::fd_steps(&form, FD_REL_STEP);
        CharacteristicPotential {
            form,
            transversal,
            region,
            ode,
            steps,
        }
    }

    pub fn transversal(&self) -> Transversal {
        self.transversal
    }

    pub fn region(&self) -> &BoxDomain {
        &self.region
    }
}

impl Potential for CharacteristicPotential {
    fn psi(&self, p: &[f64]) -> Option<f64> {
        if !self.region.contains(p) {
            return None;
        }
        shoot_to_transversal(&self.form, p, &self.transversal, &self.region, &self.ode).0
    }

    fn mu(&self, p: &[f64]) -> Option<f64> {
        let fv = self.form.eval_coefficients(p).ok()?;
        let b = pivot(&fv);
        if fv[b].abs() <= SINGULAR_TOL {
            return None;
        }
        let d = fd_partial(self, p, b, self.steps[b])?;
        let mu = fv[b] / d;
        mu.is_finite().then_some(mu)
    }
}

fn coverage(f: &PfaffianForm, tr: &Transversal, region: &BoxDomain, pts: &[Vec<f64>], ode: &OdeOptions) -> usize {
    pts.par_iter()
        .filter(|p| shoot_to_transversal(f, p, tr, region, ode).0.is_some())
        .count()
}

/// Picks the candidate line reached from the most points of a coarse grid of
/// the domain; earlier candidates win ties. Returns the line and the share
/// of grid points that reach it.
pub fn select_transversal(f: &PfaffianForm, margin: f64, ode: &OdeOptions) -> Option<(Transversal, f64)> {
    let region = f.domain().inflate(margin);
    let pts: Vec<Vec<f64>> = grid(f.domain(), SELECTION_GRID)
        .into_iter()
        .filter(|p| !f.is_singular_at(p, SINGULAR_TOL))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let mut best: Option<(Transversal, usize)> = None;
    for &t in &CANDIDATE_FRACTIONS {
        for axis in 0..2 {
            let value = f.domain().lo(axis) + t * f.domain().width(axis);
            let tr = Transversal { axis, value };
            let c = coverage(f, &tr, &region, &pts, ode);
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((tr, c));
            }
            if c == pts.len() {
                return Some((tr, 1.0));
            }
        }
    }
    best.filter(|&(_, c)| c > 0)
        .map(|(tr, c)| (tr, c as f64 / pts.len() as f64))
}

/// Builds `ψ` and `μ` for a two-variable form and verifies them on a
/// `verify_grid × verify_grid` grid of the domain.
pub fn build_potential_2var(f: &PfaffianForm, config: &Potential2Config) -> Result<FactorizationResult, FactorError> {
    if f.dim() != 2 {
        return Err(FactorError::Arity {
            method: "the characteristic construction",
            expected: "2".into(),
            got: f.dim(),
        });
    }
    let (tr, share) = match config.transversal {
        Some(tr) => (tr, f64::NAN),
        None => select_transversal(f, config.margin, &config.ode).ok_or(FactorError::NoTransversal)?,
    };
    let pot = Arc::new(CharacteristicPotential::new(f.clone(), tr, config.margin, config.ode));
    let samples = grid(f.domain(), config.verify_grid);
    let stats = verify_factorization(f, pot.as_ref(), &samples);
    let details = json!({
        "transversal": { "axis": tr.axis, "value": tr.value },
        "transversal_selected": config.transversal.is_none(),
        "selection_coverage": if share.is_nan() { serde_json::Value::Null } else { json!(share) },
        "margin": config.margin,
        "verify_grid": config.verify_grid,
        "rtol": config.ode.rtol,
        "atol": config.ode.atol,
    });
    Ok(FactorizationResult {
        method: Method::TwoVarCharacteristic,
        potential: pot,
        stats,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::make_form;

    #[test]
    fn exact_sum_is_relabelled() {
        let f = make_form(&["x", "y"], &["1", "1"], BoxDomain::cube(2, -1.0, 1.0).unwrap()).unwrap();
        let cfg = Potential2Config {
            verify_grid: 5,
            ..Default::default()
        };
        let r = build_potential_2var(&f, &cfg).unwrap();
        assert!(r.stats.residual_max <= 1e-7, "{:?}", r.stats);
        assert_eq!(r.stats.skipped_points, 0);
        // monotone relabelling of x + y
        let a = r.psi(&[0.1, 0.2]).unwrap();
        let b = r.psi(&[0.25, 0.05]).unwrap();
        let c = r.psi(&[0.5, 0.5]).unwrap();
        assert!((a - b).abs() < 1e-9 && c > a);
    }

    #[test]
    fn needs_two_variables() {
        let f = make_form(&["x"], &["1"], BoxDomain::cube(1, 0.0, 1.0).unwrap()).unwrap();
        assert!(matches!(
            build_potential_2var(&f, &Potential2Config::default()),
            Err(FactorError::Arity { .. })
        ));
    }
}
