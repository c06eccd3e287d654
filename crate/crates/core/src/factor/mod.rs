//! Integrating factors: explicit `μ` and `ψ` with `δξ = μ dψ`.

pub mod characteristic;
pub mod foliate;
pub mod global;
pub mod potential2;
pub mod verify;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::expr::Expr;
use crate::form::{FormError, PfaffianForm};

pub use characteristic::{solve_characteristic, CharacteristicCurve, CurveEnd, Transversal};
pub use foliate::{foliate, FoliateConfig, Polyline};
pub use global::{global_factorization, path_independence, GlobalConfig, PathReport};
pub use potential2::{build_potential_2var, Potential2Config};
pub use verify::{verify_factorization, ResidualStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("{method} needs a form in {expected} variables, got {got}")]
    Arity {
        method: &'static str,
        expected: String,
        got: usize,
    },
    #[error("free variable index {0} out of range")]
    FreeVar(usize),
    #[error("no transversal reaches any sample of the domain")]
    NoTransversal,
    #[error("base point {0:?} is outside the domain or singular")]
    BadBase(Vec<f64>),
    #[error(transparent)]
    Form(#[from] FormError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TwoVarCharacteristic,
    GlobalSurface,
    /// Closed-form `ψ₀`, `μ₀` supplied by the caller.
    Reference,
}

/// Point evaluators for a candidate potential `ψ` and factor `μ`.
pub trait Potential: Send + Sync {
    fn psi(&self, p: &[f64]) -> Option<f64>;
    fn mu(&self, p: &[f64]) -> Option<f64>;
}

/// A closed-form pair, e.g. a catalog entry's reference `ψ₀`, `μ₀`.
#[derive(Debug, Clone)]
pub struct ReferencePotential {
    pub psi: Expr,
    pub mu: Expr,
}

impl Potential for ReferencePotential {
    fn psi(&self, p: &[f64]) -> Option<f64> {
        self.psi.eval(p).ok()
    }

    fn mu(&self, p: &[f64]) -> Option<f64> {
        self.mu.eval(p).ok()
    }
}

/// `μ` and `ψ` as evaluators, with the residual statistics of
/// [`verify_factorization`] on the construction's check grid.
#[derive(Clone)]
pub struct FactorizationResult {
    pub method: Method,
    pub potential: Arc<dyn Potential>,
    pub stats: ResidualStats,
    /// Method-specific parameters and diagnostics, for reports.
    pub details: serde_json::Value,
}

impl std::fmt::Debug for FactorizationResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FactorizationResult")
            .field("method", &self.method)
            .field("stats", &self.stats)
            .field("details", &self.details)
            .finish()
    }
}

impl FactorizationResult {
    pub fn psi(&self, p: &[f64]) -> Option<f64> {
        self.potential.psi(p)
    }

    pub fn mu(&self, p: &[f64]) -> Option<f64> {
        self.potential.mu(p)
    }

    /// Wraps a closed-form pair and verifies it on `samples`.
    pub fn reference(f: &PfaffianForm, psi: Expr, mu: Expr, samples: &[Vec<f64>]) -> Self {
        let potential: Arc<dyn Potential> = Arc::new(ReferencePotential { psi, mu });
        let stats = verify_factorization(f, potential.as_ref(), samples);
        FactorizationResult {
            method: Method::Reference,
            potential,
            stats,
            details: serde_json::Value::Null,
        }
    }
}

/// Finite-difference step per axis: `rel` times the box edge.
pub(crate) fn fd_steps(f: &PfaffianForm, rel: f64) -> Vec<f64> {
    (0..f.dim()).map(|i| rel * f.domain().width(i)).collect()
}

/// Fourth-order derivative of `g` at `x` with step `h`: the centred
/// five-point stencil, or a one-sided five-point stencil (either side) when
/// `g` is undefined on one side.
pub(crate) fn fd_derivative<G: Fn(f64) -> Option<f64>>(g: &G, x: f64, h: f64) -> Option<f64> {
    let centred = (|| {
        let (m2, m1, p1, p2) = (g(x - 2.0 * h)?, g(x - h)?, g(x + h)?, g(x + 2.0 * h)?);
        Some((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h))
    })();
    if centred.is_some() {
        return centred;
    }
    let one_sided = |s: f64| -> Option<f64> {
        let v: Vec<f64> = (0..5)
            .map(|k| g(x + s * k as f64 * h))
            .collect::<Option<_>>()?;
        Some(s * (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h))
    };
    one_sided(1.0).or_else(|| one_sided(-1.0))
}

/// `∂ψ/∂xᵢ` at `p` by [`fd_derivative`].
pub(crate) fn fd_partial(pot: &dyn Potential, p: &[f64], i: usize, h: f64) -> Option<f64> {
    let g = |x: f64| {
        let mut q = p.to_vec();
        q[i] = x;
        pot.psi(&q)
    };
    fd_derivative(&g, p[i], h)
}

pub(crate) fn fd_gradient(pot: &dyn Potential, p: &[f64], steps: &[f64]) -> Option<Vec<f64>> {
    (0..p.len()).map(|i| fd_partial(pot, p, i, steps[i])).collect()
}

/// Index of the largest `|Fᵢ|`, lowest index on ties.
pub(crate) fn pivot(fv: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in fv.iter().enumerate() {
        if v.abs() > fv[best].abs() {
            best = i;
        }
    }
    best
}
