//! Characteristic curves `F₁ dx₁ + F₂ dx₂ = 0` of a form in two variables.
//!
//! A curve is integrated as a graph over one coordinate at a time. The
//! coordinate whose coefficient is smaller in magnitude is the independent
//! one, so the division in `dxₛ/dx_d = −F_d/Fₛ` is by the larger
//! coefficient. The roles switch when the divisor falls below half of the
//! other coefficient.

use serde::{Deserialize, Serialize};

use crate::form::{BoxDomain, PfaffianForm, SINGULAR_TOL};
use crate::ode::{solve, OdeOptions, Termination};

/// The line `x[axis] = value`. Curves crossing it are labelled by their
/// other coordinate there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transversal {
    pub axis: usize,
    pub value: f64,
}

impl Transversal {
    pub fn label_of(&self, p: &[f64]) -> f64 {
        p[1 - self.axis]
    }

    pub fn point_at(&self, label: f64) -> [f64; 2] {
        let mut q = [0.0; 2];
        q[self.axis] = self.value;
        q[1 - self.axis] = label;
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveEnd {
    Transversal,
    Boundary,
    /// Both coefficients vanished, or one could not be evaluated.
    Singular,
    StepLimit,
}

#[derive(Debug, Clone)]
pub struct CharacteristicCurve {
    /// Monotone parameter: accumulated distance travelled along the
    /// independent coordinate of each piece.
    pub params: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    /// Transversal coordinate of the crossing, if the curve reached it.
    pub label: Option<f64>,
    pub end: CurveEnd,
    /// Integrator steps taken, accepted and rejected.
    pub steps: usize,
}

/// Tangent orientation used by `direction`: `(F₂, −F₁)`.
fn tangent(fv: &[f64]) -> [f64; 2] {
    [fv[1], -fv[0]]
}

const MAX_PIECES: usize = 256;

/// Integrates the characteristic through `start` inside `region`.
///
/// `direction = +1` follows the tangent `(F₂, −F₁)`, `-1` the opposite.
/// Integration stops at the transversal (if given), at the region boundary,
/// at a singular point, or when the step budget in `opts` runs out.
pub fn solve_characteristic(
    f: &PfaffianForm,
    start: &[f64],
    direction: f64,
    transversal: Option<&Transversal>,
    region: &BoxDomain,
    opts: &OdeOptions,
) -> CharacteristicCurve {
    assert_eq!(f.dim(), 2, "characteristics are defined for two variables");
    let mut curve = CharacteristicCurve {
        params: vec![0.0],
        points: vec![[start[0], start[1]]],
        label: None,
        end: CurveEnd::StepLimit,
        steps: 0,
    };
    if let Some(tr) = transversal {
        if start[tr.axis] == tr.value {
            curve.label = Some(tr.label_of(start));
            curve.end = CurveEnd::Transversal;
            return curve;
        }
    }
    let mut p = [start[0], start[1]];
    let mut tau = 0.0;
    let mut fv = [0.0; 2];

    for _ in 0..MAX_PIECES {
        if f.eval_coefficients_into(&p, &mut fv).is_err() || fv.iter().all(|v| v.abs() <= SINGULAR_TOL) {
            curve.end = CurveEnd::Singular;
            return curve;
        }
        // independent coordinate d, solved coordinate s
        let d = if fv[1].abs() >= fv[0].abs() { 0 } else { 1 };
        let s = 1 - d;
        let sgn = (direction * tangent(&fv)[d]).signum();
        let mut u_end = if sgn > 0.0 { region.hi(d) } else { region.lo(d) };
        let mut ends_on_transversal = false;
        if let Some(tr) = transversal {
            if tr.axis == d && (tr.value - p[d]) * sgn > 0.0 && (tr.value - u_end) * sgn <= 0.0 {
                u_end = tr.value;
                ends_on_transversal = true;
            }
        }
        let side = transversal
            .filter(|tr| tr.axis == s)
            .map(|tr| (tr.value, (p[s] - tr.value).signum()));
        let point = |u: f64, y: f64| {
            let mut q = [0.0; 2];
            q[d] = u;
            q[s] = y;
            q
        };
        let rhs = |u: f64, y: &[f64], dy: &mut [f64]| {
            let mut g = [0.0; 2];
            if f.eval_coefficients_into(&point(u, y[0]), &mut g).is_err() || g[s].abs() <= SINGULAR_TOL {
                return false;
            }
            dy[0] = -g[d] / g[s];
            true
        };
        let (lo_s, hi_s) = (region.lo(s), region.hi(s));
        let stop = |u: f64, y: &[f64]| {
            if y[0] < lo_s || y[0] > hi_s {
                return true;
            }
            if let Some((value, side0)) = side {
                if (y[0] - value).signum() != side0 {
                    return true;
                }
            }
            let mut g = [0.0; 2];
            match f.eval_coefficients_into(&point(u, y[0]), &mut g) {
                Ok(()) => g[s].abs() < 0.5 * g[d].abs(),
                Err(_) => false,
            }
        };
        let remaining = OdeOptions {
            max_steps: opts.max_steps.saturating_sub(curve.steps),
            ..*opts
        };
        let sol = solve(rhs, p[d], u_end, &[p[s]], &remaining, stop);
        curve.steps += sol.accepted + sol.rejected;
        for (u, y) in sol.t.iter().zip(&sol.y).skip(1) {
            tau += (u - p[d]).abs();
            p = point(*u, y[0]);
            curve.params.push(tau);
            curve.points.push(p);
        }
        match sol.termination {
            Termination::Completed => {
                if ends_on_transversal {
                    curve.label = Some(p[s]);
                    curve.end = CurveEnd::Transversal;
                } else {
                    curve.end = CurveEnd::Boundary;
                }
                return curve;
            }
            Termination::RhsFailure => {
                curve.end = CurveEnd::Singular;
                return curve;
            }
            Termination::MaxSteps => {
                curve.end = CurveEnd::StepLimit;
                return curve;
            }
            Termination::Stopped => {
                let (u, y) = sol.event.expect("stopped solutions carry the event state");
                let q = point(u, y[0]);
                if q[s] < lo_s || q[s] > hi_s {
                    curve.end = CurveEnd::Boundary;
                    return curve;
                }
                if let Some((value, side0)) = side {
                    if (q[s] - value).signum() != side0 {
                        tau += (u - p[d]).abs();
                        // the crossing is pinned to the transversal exactly
                        p = point(u, value);
                        curve.params.push(tau);
                        curve.points.push(p);
                        curve.label = Some(u);
                        curve.end = CurveEnd::Transversal;
                        return curve;
                    }
                }
                // divisor got small: swap roles and continue from the event
                tau += (u - p[d]).abs();
                p = q;
                curve.params.push(tau);
                curve.points.push(p);
            }
        }
    }
    curve.end = CurveEnd::StepLimit;
    curve
}

/// Follows the characteristic through `p` in both directions until one
/// reaches the transversal, returning its label and the total steps spent.
pub fn shoot_to_transversal(
    f: &PfaffianForm,
    p: &[f64],
    transversal: &Transversal,
    region: &BoxDomain,
    opts: &OdeOptions,
) -> (Option<f64>, usize) {
    let mut steps = 0;
    for dir in [1.0, -1.0] {
        let c = solve_characteristic(f, p, dir, Some(transversal), region, opts);
        steps += c.steps;
        if c.label.is_some() {
            return (c.label, steps);
        }
    }
    (None, steps)
}
