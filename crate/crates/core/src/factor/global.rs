//! Potential of an integrable form in any number of variables, built from
//! the leaves through a base fibre.
//!
//! Pick a free variable `x_m` with `F_m ≠ 0`. On a leaf, `x_m` is a function
//! of the other coordinates `q` obeying
//!
//! ```text
//! dx_m = −Σ_{i≠m} (Fᵢ / F_m) dxᵢ
//! ```
//!
//! Integrating this along the straight segment from the base projection
//! `q⁰` to `q`, starting at height `x⁰`, gives the surface value
//! `x_m(q; x⁰)`. The leaf label `x⁰` is the potential: `ψ(p)` solves
//! `x_m(q_p; x⁰) = p_m`, and `μ = F_m · ∂x_m/∂x⁰`.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::verify::{verify_factorization, FD_REL_STEP};
use super::{fd_derivative, FactorError, FactorizationResult, Method, Potential};
use crate::form::{BoxDomain, PfaffianForm, SINGULAR_TOL};
use crate::ode::{solve, OdeOptions, Termination};
use crate::sampling::grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalConfig {
    pub free_var: usize,
    /// Defaults to the centre of the domain.
    pub base: Option<Vec<f64>>,
    /// Leaves may leave the domain by this fraction of its width on each
    /// side before they are abandoned.
    pub margin: f64,
    pub ode: OdeOptions,
    /// Nodes per axis of the residual check grid.
    pub verify_grid: usize,
    /// Nodes per axis of the projected grid used by the monotonicity check.
    pub monotone_rows: usize,
    /// Number of base heights `x⁰` per row of the monotonicity check.
    pub monotone_levels: usize,
}

impl GlobalConfig {
    pub fn new(free_var: usize) -> Self {
        GlobalConfig {
            free_var,
            base: None,
            margin: 1.0,
            ode: OdeOptions::default(),
            verify_grid: 9,
            monotone_rows: 5,
            monotone_levels: 9,
        }
    }
}

/// The family of leaves `x_m(q; x⁰)`, evaluated on demand.
pub struct SurfaceField {
    form: PfaffianForm,
    free: usize,
    base: Vec<f64>,
    region: BoxDomain,
    ode: OdeOptions,
    h0: f64,
}

impl SurfaceField {
    pub fn new(form: PfaffianForm, free: usize, base: Vec<f64>, margin: f64, ode: OdeOptions) -> Self {
        let region = form.domain().inflate(margin);
        let h0 = FD_REL_STEP * form.domain().width(free);
        SurfaceField {
            form,
            free,
            base,
            region,
            ode,
            h0,
        }
    }

    pub fn free_var(&self) -> usize {
        self.free
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Height of the leaf through `(q⁰, x0)` above the projection of
    /// `target` (whose free coordinate is ignored), or `None` if the leaf
    /// leaves the working region or meets a point with `F_m = 0`.
    pub fn surface_value(&self, target: &[f64], x0: f64) -> Option<f64> {
        let m = self.free;
        let n = self.form.dim();
        let (lo, hi) = (self.region.lo(m), self.region.hi(m));
        if !(lo..=hi).contains(&x0) {
            return None;
        }
        if (0..n).all(|i| i == m || target[i] == self.base[i]) {
            return Some(x0);
        }
        let delta: Vec<f64> = (0..n).map(|i| if i == m { 0.0 } else { target[i] - self.base[i] }).collect();
        let mut point = self.base.clone();
        let mut fv = vec![0.0; n];
        let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
            for i in 0..n {
                point[i] = if i == m { y[0] } else { self.base[i] + t * delta[i] };
            }
            if self.form.eval_coefficients_into(&point, &mut fv).is_err() || fv[m].abs() <= SINGULAR_TOL {
                return false;
            }
            dy[0] = -(0..n).filter(|&i| i != m).map(|i| fv[i] * delta[i]).sum::<f64>() / fv[m];
            true
        };
        let sol = solve(rhs, 0.0, 1.0, &[x0], &self.ode, |_, y| y[0] < lo || y[0] > hi);
        (sol.termination == Termination::Completed).then(|| sol.last().1[0])
    }

    /// `∂x_m/∂x⁰` at `(q, x0)` by a fourth-order difference in `x⁰`.
    pub fn surface_slope(&self, target: &[f64], x0: f64) -> Option<f64> {
        fd_derivative(&|x| self.surface_value(target, x), x0, self.h0)
    }

    /// The leaf label `x⁰` of the leaf through `p`.
    pub fn label(&self, p: &[f64]) -> Option<f64> {
        let m = self.free;
        let (lo, hi) = (self.region.lo(m), self.region.hi(m));
        let g = |x: f64| self.surface_value(p, x).map(|v| v - p[m]);
        let x_a = p[m].clamp(lo, hi);
        let g_a = g(x_a)?;
        if g_a == 0.0 {
            return Some(x_a);
        }
        // surfaces are increasing in x0 (solutions of a scalar ODE cannot
        // cross), so step against the sign of g until it changes
        let dir = -g_a.signum();
        let mut step = g_a.abs().max(1e-6 * self.region.width(m));
        let (mut a, mut fa) = (x_a, g_a);
        for _ in 0..60 {
            let b = (a + dir * step).clamp(lo, hi);
            let fb = g(b);
            match fb {
                Some(0.0) => return Some(b),
                Some(fb) if fb.signum() != fa.signum() => return brent(&g, a, b, fa, fb),
                Some(fb) => {
                    a = b;
                    fa = fb;
                    step *= 2.0;
                }
                // undefined beyond: shrink towards the last good point
                None => step *= 0.25,
            }
            if step < 1e-14 * self.region.width(m) || (b == lo || b == hi) && fb.is_some() {
                return None;
            }
        }
        None
    }
}

// Brent's method on a bracket [a, b] with g(a), g(b) of opposite signs.
fn brent<G: Fn(f64) -> Option<f64>>(g: &G, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Option<f64> {
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..200 {
        if fb == 0.0 {
            return Some(b);
        }
        let tol = 4.0 * f64::EPSILON * b.abs().max(1.0);
        if (b - a).abs() <= tol {
            return Some(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let q = (3.0 * a + b) / 4.0;
        let outside = !((s > q.min(b)) && (s < q.max(b)));
        if outside
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            || (mflag && (b - c).abs() < tol)
            || (!mflag && (c - d).abs() < tol)
        {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = g(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(b)
}

pub struct SurfacePotential {
    field: SurfaceField,
}

impl SurfacePotential {
    pub fn field(&self) -> &SurfaceField {
        &self.field
    }
}

impl Potential for SurfacePotential {
    fn psi(&self, p: &[f64]) -> Option<f64> {
        self.field.label(p)
    }

    fn mu(&self, p: &[f64]) -> Option<f64> {
        let fm = self.field.form.eval_coefficients(p).ok()?[self.field.free];
        let x0 = self.field.label(p)?;
        let mu = fm * self.field.surface_slope(p, x0)?;
        mu.is_finite().then_some(mu)
    }
}

/// Surface values on a grid of projected points × base heights, each cell
/// computed at most once.
struct MemoGrid {
    rows: Vec<Vec<f64>>,
    levels: Vec<f64>,
    cells: Vec<OnceLock<Option<f64>>>,
}

impl MemoGrid {
    fn new(rows: Vec<Vec<f64>>, levels: Vec<f64>) -> Self {
        let cells = (0..rows.len() * levels.len()).map(|_| OnceLock::new()).collect();
        MemoGrid { rows, levels, cells }
    }

    fn get(&self, field: &SurfaceField, r: usize, l: usize) -> Option<f64> {
        *self.cells[r * self.levels.len() + l].get_or_init(|| field.surface_value(&self.rows[r], self.levels[l]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monotonicity {
    pub rows_checked: usize,
    /// Rows where consecutive defined surface values fail to increase.
    pub violations: usize,
}

fn check_monotone(field: &SurfaceField, config: &GlobalConfig) -> Monotonicity {
    let f = &field.form;
    let m = field.free;
    let rows: Vec<Vec<f64>> = grid(f.domain(), config.monotone_rows.max(1))
        .into_iter()
        .filter(|p| p[m] == f.domain().lo(m))
        .collect();
    let k = config.monotone_levels.max(2);
    let levels: Vec<f64> = (0..k)
        .map(|j| f.domain().lo(m) + f.domain().width(m) * j as f64 / (k - 1) as f64)
        .collect();
    let memo = MemoGrid::new(rows, levels);
    let flags: Vec<Option<bool>> = (0..memo.rows.len())
        .into_par_iter()
        .map(|r| {
            let vals: Vec<f64> = (0..memo.levels.len()).filter_map(|l| memo.get(field, r, l)).collect();
            (vals.len() >= 2).then(|| vals.windows(2).any(|w| w[1] <= w[0]))
        })
        .collect();
    Monotonicity {
        rows_checked: flags.iter().flatten().count(),
        violations: flags.iter().flatten().filter(|&&v| v).count(),
    }
}

fn validate(f: &PfaffianForm, free: usize, base: &[f64]) -> Result<(), FactorError> {
    if free >= f.dim() {
        return Err(FactorError::FreeVar(free));
    }
    match f.coefficient_vector(base) {
        Ok(fv) if fv[free].abs() > SINGULAR_TOL => Ok(()),
        _ => Err(FactorError::BadBase(base.to_vec())),
    }
}

/// Builds `ψ` and `μ` from the leaves through the base fibre and verifies
/// them on a `verify_grid`-per-axis grid of the domain.
///
/// The form is assumed integrable; for a non-integrable form the leaves
/// still exist along each segment but `ψ` is path-dependent and the
/// residuals expose it.
pub fn global_factorization(f: &PfaffianForm, config: &GlobalConfig) -> Result<FactorizationResult, FactorError> {
    if f.dim() < 2 {
        return Err(FactorError::Arity {
            method: "the global construction",
            expected: "at least 2".into(),
            got: f.dim(),
        });
    }
    let base = config.base.clone().unwrap_or_else(|| f.domain().center());
    validate(f, config.free_var, &base)?;
    let field = SurfaceField::new(f.clone(), config.free_var, base.clone(), config.margin, config.ode);
    let monotone = check_monotone(&field, config);
    let pot = Arc::new(SurfacePotential { field });
    let samples = grid(f.domain(), config.verify_grid);
    let stats = verify_factorization(f, pot.as_ref(), &samples);
    let details = json!({
        "free_var": config.free_var,
        "base": base,
        "margin": config.margin,
        "verify_grid": config.verify_grid,
        "monotonicity": monotone,
        "rtol": config.ode.rtol,
        "atol": config.ode.atol,
    });
    Ok(FactorizationResult {
        method: Method::GlobalSurface,
        potential: pot,
        stats,
        details,
    })
}

/// Integrates `dx_m = −Σ (Fᵢ/F_m) dxᵢ` from `base` to the projection of
/// `target` along an axis-parallel staircase that moves the coordinates in
/// the given order.
pub fn staircase_value(f: &PfaffianForm, free: usize, base: &[f64], target: &[f64], order: &[usize], ode: &OdeOptions, region: &BoxDomain) -> Option<f64> {
    let n = f.dim();
    let mut point = base.to_vec();
    let mut fv = vec![0.0; n];
    let (lo, hi) = (region.lo(free), region.hi(free));
    for &i in order {
        if i == free || target[i] == point[i] {
            continue;
        }
        let start = point.clone();
        let rhs = |s: f64, y: &[f64], dy: &mut [f64]| {
            let mut q = start.clone();
            q[i] = s;
            q[free] = y[0];
            if f.eval_coefficients_into(&q, &mut fv).is_err() || fv[free].abs() <= SINGULAR_TOL {
                return false;
            }
            dy[0] = -fv[i] / fv[free];
            true
        };
        let sol = solve(rhs, start[i], target[i], &[start[free]], ode, |_, y| y[0] < lo || y[0] > hi);
        if sol.termination != Termination::Completed {
            return None;
        }
        point[i] = target[i];
        point[free] = sol.last().1[0];
    }
    Some(point[free])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathReport {
    pub max_discrepancy: f64,
    pub evaluated: usize,
    pub skipped: usize,
    pub worst_target: Option<Vec<f64>>,
}

/// Compares the two staircases (coordinates in increasing and in decreasing
/// index order) from `base` to each target. An integrable form gives the
/// same height both ways.
pub fn path_independence(f: &PfaffianForm, free: usize, base: &[f64], targets: &[Vec<f64>], margin: f64, ode: &OdeOptions) -> Result<PathReport, FactorError> {
    validate(f, free, base)?;
    let region = f.domain().inflate(margin);
    let fwd: Vec<usize> = (0..f.dim()).collect();
    let rev: Vec<usize> = fwd.iter().rev().copied().collect();
    let gaps: Vec<Option<f64>> = targets
        .par_iter()
        .map(|t| {
            let a = staircase_value(f, free, base, t, &fwd, ode, &region)?;
            let b = staircase_value(f, free, base, t, &rev, ode, &region)?;
            Some((a - b).abs())
        })
        .collect();
    let mut report = PathReport {
        max_discrepancy: 0.0,
        evaluated: 0,
        skipped: 0,
        worst_target: None,
    };
    for (t, g) in targets.iter().zip(gaps) {
        match g {
            None => report.skipped += 1,
            Some(g) => {
                report.evaluated += 1;
                if g > report.max_discrepancy || report.worst_target.is_none() {
                    report.max_discrepancy = g;
                    report.worst_target = Some(t.clone());
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::make_form;

    const V: [&str; 3] = ["x", "y", "z"];

    fn exact_sum() -> PfaffianForm {
        make_form(&V, &["1", "1", "1"], BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn planes_of_exact_sum() {
        let f = exact_sum();
        let field = SurfaceField::new(f.clone(), 2, vec![0.0; 3], 1.0, OdeOptions::default());
        assert_eq!(field.surface_value(&[0.0, 0.0, 9.0], 0.3), Some(0.3));
        let v = field.surface_value(&[0.5, 0.25, 0.0], 0.3).unwrap();
        assert!((v - (0.3 - 0.75)).abs() < 1e-12);
        let psi = field.label(&[0.2, 0.3, 0.1]).unwrap();
        assert!((psi - 0.6).abs() < 1e-12, "{psi}");
        let slope = field.surface_slope(&[0.2, 0.3, 0.1], psi).unwrap();
        assert!((slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_sum_factorization() {
        let mut cfg = GlobalConfig::new(2);
        cfg.verify_grid = 5;
        let r = global_factorization(&exact_sum(), &cfg).unwrap();
        assert!(r.stats.residual_max < 1e-8, "{:?}", r.stats);
        let mu = r.mu(&[0.1, -0.4, 0.3]).unwrap();
        assert!((mu - 1.0).abs() < 1e-9);
        assert_eq!(r.details["monotonicity"]["violations"], 0);
    }

    #[test]
    fn bad_inputs() {
        let f = exact_sum();
        assert!(matches!(global_factorization(&f, &GlobalConfig::new(3)), Err(FactorError::FreeVar(3))));
        let g = make_form(&V, &["1", "1", "0"], BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(global_factorization(&g, &GlobalConfig::new(2)), Err(FactorError::BadBase(_))));
    }

    #[test]
    fn staircases_disagree_for_contact() {
        let c = make_form(&V, &["-y", "0", "1"], BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap();
        let targets = vec![vec![0.5, 0.5, 0.0]];
        let r = path_independence(&c, 2, &[0.0; 3], &targets, 1.0, &OdeOptions::default()).unwrap();
        assert!((r.max_discrepancy - 0.25).abs() < 1e-9, "{r:?}");
        let r = path_independence(&exact_sum(), 2, &[0.0; 3], &targets, 1.0, &OdeOptions::default()).unwrap();
        assert!(r.max_discrepancy < 1e-12);
    }

    #[test]
    fn brent_finds_cube_root() {
        let g = |x: f64| Some(x * x * x - 2.0);
        let r = brent(&g, 0.0, 2.0, -2.0, 6.0).unwrap();
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
