//! Explicit Runge–Kutta integrators: an adaptive Dormand–Prince 5(4) pair
//! with stop-condition location, and a fixed-step classical RK4 step.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Cap on accepted plus rejected steps.
    pub max_steps: usize,
    /// Largest step magnitude; `f64::INFINITY` for none.
    pub max_step: f64,
    pub initial_step: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 100_000,
            max_step: f64::INFINITY,
            initial_step: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Reached `t_end`.
    Completed,
    /// The stop condition became true; see [`Solution::event`].
    Stopped,
    /// The right-hand side could not be evaluated even for tiny steps.
    RhsFailure,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Accepted times, starting with `t0`.
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub termination: Termination,
    /// First state found past the stop condition, located by bisection on
    /// the final step to within about `1e-13` relative in `t`. The last
    /// entry of `t`/`y` is the matching state just before it.
    pub event: Option<(f64, Vec<f64>)>,
    pub accepted: usize,
    pub rejected: usize,
}

impl Solution {
    pub fn last(&self) -> (f64, &[f64]) {
        (
            *self.t.last().expect("solution holds at least the initial state"),
            self.y.last().expect("solution holds at least the initial state"),
        )
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<F> {
    rhs: F,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<F: FnMut(f64, &[f64], &mut [f64]) -> bool> Stepper<F> {
    fn new(rhs: F, n: usize) -> Self {
        Stepper {
            rhs,
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
        }
    }

    /// One trial step from `(t, y)` assuming `k[0] = f(t, y)`. Writes the
    /// fifth-order solution to `y_out` and returns the scaled error norm, or
    /// `None` if a stage could not be evaluated.
    fn step(&mut self, t: f64, y: &[f64], h: f64, y_out: &mut [f64], opts: &OdeOptions) -> Option<f64> {
        let n = y.len();
        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (r, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.k[r][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let (_, tail) = self.k.split_at_mut(s);
            if !(self.rhs)(t + C[s] * h, &self.tmp, &mut tail[0]) {
                return None;
            }
            if tail[0].iter().any(|v| !v.is_finite()) {
                return None;
            }
        }
        // stage 7 is evaluated at the fifth-order solution, which is tmp
        y_out.copy_from_slice(&self.tmp);
        let mut sum = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (s, w) in E.iter().enumerate() {
                e += w * self.k[s][i];
            }
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_out[i].abs());
            sum += (h * e / sc).powi(2);
        }
        Some((sum / n.max(1) as f64).sqrt())
    }
}

/// Integrates `y' = rhs(t, y)` from `t0` towards `t_end` (either direction).
///
/// `rhs` returns `false` when it cannot be evaluated; the step is then
/// rejected and retried shorter. `stop` is checked after every accepted
/// step; when it turns true the crossing is located by bisection on the
/// step length and integration ends with [`Termination::Stopped`]. The stop
/// condition is assumed false at the initial state.
pub fn solve<F, S>(rhs: F, t0: f64, t_end: f64, y0: &[f64], opts: &OdeOptions, mut stop: S) -> Solution
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y0.len();
    let mut st = Stepper::new(rhs, n);
    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0.to_vec()],
        termination: Termination::Completed,
        event: None,
        accepted: 0,
        rejected: 0,
    };
    let span = t_end - t0;
    if span == 0.0 {
        return sol;
    }
    let dir = span.signum();
    if !(st.rhs)(t0, y0, &mut st.k[0]) || st.k[0].iter().any(|v| !v.is_finite()) {
        sol.termination = Termination::RhsFailure;
        return sol;
    }
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut h = opts
        .initial_step
        .unwrap_or(0.01 * span.abs())
        .abs()
        .min(opts.max_step)
        .min(span.abs());
    let h_floor = 1e-14 * span.abs().max(t0.abs());

    loop {
        if sol.accepted + sol.rejected >= opts.max_steps {
            sol.termination = Termination::MaxSteps;
            return sol;
        }
        let remaining = (t_end - t) * dir;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        match st.step(t, &y, dir * h, &mut y_new, opts) {
            None => {
                sol.rejected += 1;
                h *= 0.25;
                if h < h_floor {
                    sol.termination = Termination::RhsFailure;
                    return sol;
                }
                continue;
            }
            Some(err) if err > 1.0 => {
                sol.rejected += 1;
                h *= (0.9 * err.powf(-0.2)).max(0.2);
                if h < h_floor {
                    sol.termination = Termination::RhsFailure;
                    return sol;
                }
                continue;
            }
            Some(err) => {
                let t_new = if last { t_end } else { t + dir * h };
                if stop(t_new, &y_new) {
                    let (te, ye) = locate(&mut st, &mut stop, t, &y, dir * h, opts, &mut sol);
                    sol.event = Some((te, ye));
                    sol.termination = Termination::Stopped;
                    return sol;
                }
                sol.accepted += 1;
                t = t_new;
                std::mem::swap(&mut y, &mut y_new);
                sol.t.push(t);
                sol.y.push(y.clone());
                if last {
                    return sol;
                }
                st.k.swap(0, 6);
                let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = (h * grow).min(opts.max_step);
            }
        }
    }
}

// Bisects the step length in (0, h] for the first state satisfying `stop`.
// Pushes the last state before the crossing onto the solution.
fn locate<F, S>(
    st: &mut Stepper<F>,
    stop: &mut S,
    t: f64,
    y: &[f64],
    h: f64,
    opts: &OdeOptions,
    sol: &mut Solution,
) -> (f64, Vec<f64>)
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
    S: FnMut(f64, &[f64]) -> bool,
{
    let n = y.len();
    let mut lo = 0.0;
    let mut hi = h;
    let mut y_lo = y.to_vec();
    let mut y_hi = vec![0.0; n];
    let mut trial = vec![0.0; n];
    // the full step is known to succeed; stage 0 is never overwritten
    st.step(t, y, hi, &mut y_hi, opts);
    for _ in 0..200 {
        if (hi - lo).abs() <= 1e-13 * (t.abs() + hi.abs()).max(1e-300) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if st.step(t, y, mid, &mut trial, opts).is_none() {
            hi = mid;
            continue;
        }
        if stop(t + mid, &trial) {
            hi = mid;
            y_hi.copy_from_slice(&trial);
        } else {
            lo = mid;
            y_lo.copy_from_slice(&trial);
        }
    }
    if lo != 0.0 {
        sol.accepted += 1;
        sol.t.push(t + lo);
        sol.y.push(y_lo);
    }
    (t + hi, y_hi)
}

/// One classical fourth-order Runge–Kutta step. Returns `false` if `rhs`
/// fails at any stage.
pub fn rk4_step<F>(rhs: &mut F, t: f64, y: &[f64], h: f64, out: &mut [f64]) -> bool
where
    F: FnMut(f64, &[f64], &mut [f64]) -> bool,
{
    let n = y.len();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    if !rhs(t, y, &mut k1) {
        return false;
    }
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    if !rhs(t + 0.5 * h, &tmp, &mut k2) {
        return false;
    }
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    if !rhs(t + 0.5 * h, &tmp, &mut k3) {
        return false;
    }
    for i in 0..n {
        tmp[i] = y[i] + h * k3[i];
    }
    if !rhs(t + h, &tmp, &mut k4) {
        return false;
    }
    for i in 0..n {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out.iter().all(|v| v.is_finite())
}
