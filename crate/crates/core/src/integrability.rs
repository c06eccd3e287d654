//! Exactness defects, the Clairaut tensor `R_ijk`, and the verdict they
//! support.
//!
//! Indices are 0-based throughout. `R_ijk` is
//!
//! ```text
//! Fᵢ(∂ⱼFₖ − ∂ₖFⱼ) + Fⱼ(∂ₖFᵢ − ∂ᵢFₖ) + Fₖ(∂ᵢFⱼ − ∂ⱼFᵢ)
//! ```
//!
//! which is totally antisymmetric, so only triples `i < j < k` are stored.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::form::{pullback, FormError, PfaffianForm, Substitution, SINGULAR_TOL};
use crate::sampling::SamplerConfig;

pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrabilityError {
    #[error(transparent)]
    Form(#[from] FormError),
    #[error("indices must be distinct and below {n}, got {indices:?}")]
    BadIndices { indices: Vec<usize>, n: usize },
    #[error("the curl triple product needs exactly 3 variables, the form has {0}")]
    NotThreeVariables(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Exact,
    LocallyIntegrable,
    NonIntegrable,
    Inconclusive,
}

impl Class {
    pub fn as_str(self) -> &'static str {
        match self {
            Class::Exact => "exact",
            Class::LocallyIntegrable => "locally_integrable",
            Class::NonIntegrable => "non_integrable",
            Class::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(s: &str) -> Option<Class> {
        [
            Class::Exact,
            Class::LocallyIntegrable,
            Class::NonIntegrable,
            Class::Inconclusive,
        ]
        .into_iter()
        .find(|c| c.as_str() == s)
    }

    pub fn is_integrable(self) -> bool {
        matches!(self, Class::Exact | Class::LocallyIntegrable)
    }
}

impl std::fmt::Display for Class {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One evaluated tensor entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorSample {
    pub point: Vec<f64>,
    pub triple: [usize; 3],
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    /// The index pair of a defect (for `exact`), the triple of a tensor
    /// entry, or `null` when no entry exists (fewer than 3 variables).
    pub triple: Option<Vec<usize>>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleMax {
    pub triple: [usize; 3],
    pub value: f64,
}

/// Outcome of [`classify`].
///
/// `witness.value` is the decision statistic of the class: the largest
/// normalized defect for `exact`, the largest normalized `|R_ijk|` otherwise.
/// Serializes to the report keys `class`, `tolerance`, `samples_used`,
/// `witness` and `per_triple_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub class: Class,
    pub tolerance: f64,
    pub samples_used: usize,
    pub witness: Witness,
    pub per_triple_max: Vec<TripleMax>,
    #[serde(skip)]
    pub max_defect: f64,
    #[serde(skip)]
    pub singular_samples: usize,
    #[serde(skip)]
    pub failed_samples: usize,
}

impl Verdict {
    pub fn max_tensor(&self) -> f64 {
        self.per_triple_max
            .iter()
            .map(|t| t.value)
            .fold(0.0, f64::max)
    }
}

fn check_indices(n: usize, idx: &[usize]) -> Result<(), IntegrabilityError> {
    let distinct = idx.iter().enumerate().all(|(a, i)| !idx[..a].contains(i));
    if distinct && idx.iter().all(|&i| i < n) {
        Ok(())
    } else {
        Err(IntegrabilityError::BadIndices {
            indices: idx.to_vec(),
            n,
        })
    }
}

/// `∂Fⱼ/∂xᵢ − ∂Fᵢ/∂xⱼ` at `p`.
pub fn exactness_defect(
    f: &PfaffianForm,
    i: usize,
    j: usize,
    p: &[f64],
) -> Result<f64, IntegrabilityError> {
    check_indices(f.dim(), &[i, j])?;
    f.coefficient_vector(p)?;
    let dji = f.partial(j, i).eval(p).map_err(FormError::from)?;
    let dij = f.partial(i, j).eval(p).map_err(FormError::from)?;
    Ok(dji - dij)
}

/// `R_ijk` from an evaluated coefficient vector and Jacobian
/// (`jac[a][b] = ∂F_a/∂x_b`).
pub fn clairaut_from_values(fv: &[f64], jac: &[Vec<f64>], i: usize, j: usize, k: usize) -> f64 {
    fv[i] * (jac[k][j] - jac[j][k]) + fv[j] * (jac[i][k] - jac[k][i]) + fv[k] * (jac[j][i] - jac[i][j])
}

/// `R_ijk` at `p`.
pub fn clairaut_component(
    f: &PfaffianForm,
    i: usize,
    j: usize,
    k: usize,
    p: &[f64],
) -> Result<f64, IntegrabilityError> {
    check_indices(f.dim(), &[i, j, k])?;
    let fv = f.coefficient_vector(p)?;
    let jac = f.eval_jacobian(p).map_err(FormError::from)?;
    Ok(clairaut_from_values(&fv, &jac, i, j, k))
}

/// `F · (∇ × F)` for a form in three variables.
///
/// Differentiates the coefficients afresh rather than using the form's
/// cached Jacobian, so it is an independent check on [`clairaut_component`].
pub fn curl_triple_product(f: &PfaffianForm, p: &[f64]) -> Result<f64, IntegrabilityError> {
    if f.dim() != 3 {
        return Err(IntegrabilityError::NotThreeVariables(f.dim()));
    }
    let fv = f.coefficient_vector(p)?;
    let c = f.coefficients();
    let d = |a: usize, b: usize| c[a].diff(b).eval(p).map_err(FormError::from);
    let curl = [
        d(2, 1)? - d(1, 2)?,
        d(0, 2)? - d(2, 0)?,
        d(1, 0)? - d(0, 1)?,
    ];
    Ok(fv[0] * curl[0] + fv[1] * curl[1] + fv[2] * curl[2])
}

/// Every canonical entry `R_ijk` (`i < j < k`) at `p`, unnormalized.
pub fn tensor_at(f: &PfaffianForm, p: &[f64]) -> Result<Vec<TensorSample>, IntegrabilityError> {
    let fv = f.coefficient_vector(p)?;
    let jac = f.eval_jacobian(p).map_err(FormError::from)?;
    Ok(canonical_triples(f.dim())
        .into_iter()
        .map(|[i, j, k]| TensorSample {
            point: p.to_vec(),
            triple: [i, j, k],
            value: clairaut_from_values(&fv, &jac, i, j, k),
        })
        .collect())
}

/// All `i < j < k` for `n` variables, in lexicographic order.
pub fn canonical_triples(n: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                out.push([i, j, k]);
            }
        }
    }
    out
}

enum SampleOutcome {
    Failed,
    Singular,
    Used {
        // normalized |defect| per pair (i<j), lexicographic
        defects: Vec<f64>,
        tensor: Vec<f64>,
    },
}

fn evaluate_sample(f: &PfaffianForm, p: &[f64], triples: &[[usize; 3]]) -> SampleOutcome {
    let n = f.dim();
    let (fv, jac) = match (f.eval_coefficients(p), f.eval_jacobian(p)) {
        (Ok(fv), Ok(jac)) => (fv, jac),
        _ => return SampleOutcome::Failed,
    };
    let scale = fv.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if fv.iter().all(|v| v.abs() <= SINGULAR_TOL) {
        return SampleOutcome::Singular;
    }
    let mut defects = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            defects.push((jac[j][i] - jac[i][j]).abs() / scale);
        }
    }
    let tensor = triples
        .iter()
        .map(|&[i, j, k]| clairaut_from_values(&fv, &jac, i, j, k).abs() / (scale * scale))
        .collect();
    SampleOutcome::Used { defects, tensor }
}

// Strictly better: larger value, or equal value at a lexicographically
// smaller point.
fn beats(value: f64, point: &[f64], best_value: f64, best_point: &[f64]) -> bool {
    value > best_value
        || (value == best_value
            && point.partial_cmp(best_point) == Some(std::cmp::Ordering::Less))
}

/// Largest normalized `|R_ijk|` over `points` and all canonical triples.
/// Singular and unevaluable points are skipped; the second value counts the
/// points that were used.
pub fn max_tensor_over(f: &PfaffianForm, points: &[Vec<f64>]) -> (f64, usize) {
    let triples = canonical_triples(f.dim());
    let outcomes: Vec<_> = points
        .par_iter()
        .map(|p| evaluate_sample(f, p, &triples))
        .collect();
    let mut max = 0.0_f64;
    let mut used = 0;
    for o in outcomes {
        if let SampleOutcome::Used { tensor, .. } = o {
            used += 1;
            max = tensor.into_iter().fold(max, f64::max);
        }
    }
    (max, used)
}

/// Classifies `f` from the defects and tensor entries at the sampler's
/// points.
///
/// Values are normalized per sample by `s = max(1, max|Fᵢ|)`: defects by
/// `1/s`, tensor entries by `1/s²`. Singular samples and samples where a
/// coefficient or derivative cannot be evaluated are left out. Forms in one
/// or two variables are never `non_integrable`.
pub fn classify(f: &PfaffianForm, sampler: &SamplerConfig, tol: f64) -> Verdict {
    let n = f.dim();
    let points = sampler.points(f.domain());
    let triples = canonical_triples(n);
    let pairs: Vec<[usize; 2]> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| [i, j]))
        .collect();
    let outcomes: Vec<_> = points
        .par_iter()
        .map(|p| evaluate_sample(f, p, &triples))
        .collect();

    let mut used = 0;
    let mut singular = 0;
    let mut failed = 0;
    let mut per_triple = vec![0.0_f64; triples.len()];
    // (value, point index, entry index)
    let mut best_defect: Option<(f64, usize, usize)> = None;
    let mut best_tensor: Option<(f64, usize, usize)> = None;
    let better = |cand: (f64, usize), best: Option<(f64, usize, usize)>| match best {
        None => true,
        Some((v, pi, _)) => beats(cand.0, &points[cand.1], v, &points[pi]),
    };
    for (pi, o) in outcomes.iter().enumerate() {
        match o {
            SampleOutcome::Failed => failed += 1,
            SampleOutcome::Singular => singular += 1,
            SampleOutcome::Used { defects, tensor } => {
                used += 1;
                for (e, &v) in defects.iter().enumerate() {
                    if better((v, pi), best_defect) {
                        best_defect = Some((v, pi, e));
                    }
                }
                for (e, &v) in tensor.iter().enumerate() {
                    per_triple[e] = per_triple[e].max(v);
                    if better((v, pi), best_tensor) {
                        best_tensor = Some((v, pi, e));
                    }
                }
            }
        }
    }

    let max_defect = best_defect.map_or(0.0, |b| b.0);
    let per_triple_max = triples
        .iter()
        .zip(&per_triple)
        .map(|(&triple, &value)| TripleMax { triple, value })
        .collect();
    let mut verdict = Verdict {
        class: Class::Inconclusive,
        tolerance: tol,
        samples_used: used,
        witness: Witness {
            point: f.domain().center(),
            triple: None,
            value: 0.0,
        },
        per_triple_max,
        max_defect,
        singular_samples: singular,
        failed_samples: failed,
    };
    if used == 0 {
        return verdict;
    }
    let first_used = outcomes
        .iter()
        .position(|o| matches!(o, SampleOutcome::Used { .. }))
        .unwrap_or(0);
    let tensor_witness = |best: Option<(f64, usize, usize)>| match best {
        Some((v, pi, e)) => Witness {
            point: points[pi].clone(),
            triple: Some(triples[e].to_vec()),
            value: v,
        },
        // no triples exist; point at the strongest evidence of non-exactness
        None => Witness {
            point: points[best_defect.map_or(first_used, |b| b.1)].clone(),
            triple: None,
            value: 0.0,
        },
    };
    if max_defect <= tol {
        verdict.class = Class::Exact;
        verdict.witness = match best_defect {
            Some((v, pi, e)) => Witness {
                point: points[pi].clone(),
                triple: Some(pairs[e].to_vec()),
                value: v,
            },
            None => Witness {
                point: points[first_used].clone(),
                triple: None,
                value: 0.0,
            },
        };
    } else {
        let w = tensor_witness(best_tensor);
        verdict.class = if w.value <= tol {
            Class::LocallyIntegrable
        } else {
            Class::NonIntegrable
        };
        verdict.witness = w;
    }
    verdict
}

/// Result of [`invariance_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub tolerance: f64,
    pub samples_used: usize,
    pub max_original: f64,
    pub max_pulled_back: f64,
    pub nullity_preserved: bool,
}

/// Compares `max |R_ijk|` of `f` and of its pullback through `s` over
/// corresponding samples: points `p̄` of the substitution's domain and their
/// images `s(p̄)`. Pairs where either side is singular, unevaluable, or the
/// image leaves `f`'s domain are skipped.
pub fn invariance_check(
    f: &PfaffianForm,
    s: &Substitution,
    sampler: &SamplerConfig,
    tol: f64,
) -> Result<InvarianceReport, FormError> {
    let g = pullback(f, s)?;
    let triples = canonical_triples(f.dim());
    let points = sampler.points(g.domain());
    let pairs: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|pb| {
            let p = s.apply(pb).ok()?;
            if !f.domain().contains(&p) {
                return None;
            }
            match (
                evaluate_sample(f, &p, &triples),
                evaluate_sample(&g, pb, &triples),
            ) {
                (SampleOutcome::Used { tensor: a, .. }, SampleOutcome::Used { tensor: b, .. }) => {
                    Some((
                        a.into_iter().fold(0.0, f64::max),
                        b.into_iter().fold(0.0, f64::max),
                    ))
                }
                _ => None,
            }
        })
        .collect();
    let mut report = InvarianceReport {
        tolerance: tol,
        samples_used: 0,
        max_original: 0.0,
        max_pulled_back: 0.0,
        nullity_preserved: false,
    };
    for (a, b) in pairs.into_iter().flatten() {
        report.samples_used += 1;
        report.max_original = report.max_original.max(a);
        report.max_pulled_back = report.max_pulled_back.max(b);
    }
    let zero_a = report.max_original <= tol;
    let zero_b = report.max_pulled_back <= tol;
    report.nullity_preserved = report.samples_used > 0 && zero_a == zero_b;
    Ok(report)
}
