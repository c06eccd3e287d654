//! Reachability by null curves: steering, random exploration of an
//! `ε`-ball, a dimension estimate of the reached set, and a scan of the
//! axis-parallel line through the base point.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::factor::pivot;
use crate::form::{PfaffianForm, SINGULAR_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachError {
    #[error("coefficient {index} is {value:e} at the current point, too small to solve for")]
    SmallPivot { index: usize, value: f64 },
    #[error("the form cannot be evaluated at {0:?}")]
    Eval(Vec<f64>),
    #[error("base point {0:?} is singular or outside the domain")]
    BadBase(Vec<f64>),
    #[error("free variable index {0} out of range")]
    FreeVar(usize),
    #[error("expected {expected} free velocity components, got {got}")]
    VelocityArity { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachConfig {
    pub epsilon: f64,
    /// Total integrator steps.
    pub budget: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Free displacement per random segment, as a fraction of `epsilon`.
    pub segment_fraction: f64,
    pub steps_per_segment: usize,
    pub max_segments: usize,
    /// Keep every rollout's curve in the sample (memory heavy).
    pub keep_curves: bool,
}

impl Default for ReachConfig {
    fn default() -> Self {
        ReachConfig {
            epsilon: 0.3,
            budget: 200_000,
            seed: 42,
            threshold: 0.05,
            segment_fraction: 1.0 / 8.0,
            steps_per_segment: 32,
            max_segments: 64,
            keep_curves: false,
        }
    }
}

/// A discretized curve along which `Σ Fᵢ dxᵢ ≈ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullCurve {
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Per step, `|F(mid)·Δx| / (|F(mid)| |Δx|)` with `mid` the chord
    /// midpoint; zero for stationary steps.
    pub residuals: Vec<f64>,
}

impl NullCurve {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachSample {
    pub base: Vec<f64>,
    pub epsilon: f64,
    pub seed: u64,
    pub budget: usize,
    pub budget_used: usize,
    /// The base point, then the reached endpoints in lexicographic order.
    pub endpoints: Vec<Vec<f64>>,
    /// Steps spent by the rollout that produced each endpoint, up to it.
    pub endpoint_steps: Vec<usize>,
    pub rollouts: usize,
    pub max_step_residual: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<NullCurve>,
}

fn normalized_residual(f: &PfaffianForm, a: &[f64], b: &[f64]) -> f64 {
    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
    let Ok(fv) = f.eval_coefficients(&mid) else {
        return f64::INFINITY;
    };
    let dx: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let nd = dx.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nd == 0.0 {
        return 0.0;
    }
    let nf = fv.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dot: f64 = fv.iter().zip(&dx).map(|(f, d)| f * d).sum();
    dot.abs() / (nf * nd)
}

/// Velocity with the given free components (all indices except `solved`,
/// in order) and the solved component fixed by `F·v = 0`.
fn constrained_velocity(f: &PfaffianForm, x: &[f64], free: &[f64], solved: usize, out: &mut [f64]) -> Result<(), ReachError> {
    let fv = f.eval_coefficients(x).map_err(|_| ReachError::Eval(x.to_vec()))?;
    if fv[solved].abs() <= SINGULAR_TOL {
        return Err(ReachError::SmallPivot {
            index: solved,
            value: fv[solved],
        });
    }
    let mut k = 0;
    let mut acc = 0.0;
    for i in 0..x.len() {
        if i == solved {
            continue;
        }
        out[i] = free[k];
        acc += fv[i] * free[k];
        k += 1;
    }
    out[solved] = -acc / fv[solved];
    Ok(())
}

/// Result of one steering step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub point: Vec<f64>,
    pub residual: f64,
}

/// Advances `p` by one RK4 step of length `dt` along the velocity whose
/// free components are `free_velocity` and whose `solved_index` component is
/// re-solved from `F·v = 0` at every stage.
pub fn steer_step(f: &PfaffianForm, p: &[f64], free_velocity: &[f64], solved_index: usize, dt: f64) -> Result<Step, ReachError> {
    let n = f.dim();
    if free_velocity.len() + 1 != n {
        return Err(ReachError::VelocityArity {
            expected: n - 1,
            got: free_velocity.len(),
        });
    }
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = p.to_vec();
    let weights = [0.5, 0.5, 1.0];
    constrained_velocity(f, p, free_velocity, solved_index, &mut k[0])?;
    for s in 1..4 {
        let (done, rest) = k.split_at_mut(s);
        for i in 0..n {
            tmp[i] = p[i] + weights[s - 1] * dt * done[s - 1][i];
        }
        constrained_velocity(f, &tmp, free_velocity, solved_index, &mut rest[0])?;
    }
    let point: Vec<f64> = (0..n)
        .map(|i| p[i] + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
        .collect();
    let residual = normalized_residual(f, p, &point);
    Ok(Step { point, residual })
}

fn inside(f: &PfaffianForm, base: &[f64], eps: f64, x: &[f64]) -> bool {
    let d2: f64 = x.iter().zip(base).map(|(a, b)| (a - b) * (a - b)).sum();
    d2 <= eps * eps && f.domain().contains(x)
}

// a direction drawn uniformly on the unit sphere of R^dim
fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    if dim == 0 {
        return Vec::new();
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

struct Rollout {
    endpoints: Vec<(Vec<f64>, usize)>,
    steps: usize,
    max_residual: f64,
    curve: Option<NullCurve>,
}

fn rollout(f: &PfaffianForm, base: &[f64], cfg: &ReachConfig, index: u64, cap: usize) -> Rollout {
    let n = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let dt = cfg.segment_fraction * cfg.epsilon / cfg.steps_per_segment as f64;
    let mut out = Rollout {
        endpoints: Vec::new(),
        steps: 0,
        max_residual: 0.0,
        curve: cfg.keep_curves.then(|| NullCurve {
            params: vec![0.0],
            points: vec![base.to_vec()],
            residuals: Vec::new(),
        }),
    };
    let mut x = base.to_vec();
    let push = |out: &mut Rollout, point: &[f64], residual: f64, h: f64| {
        out.max_residual = out.max_residual.max(residual);
        if let Some(c) = out.curve.as_mut() {
            c.params.push(c.params.last().copied().unwrap_or(0.0) + h);
            c.points.push(point.to_vec());
            c.residuals.push(residual);
        }
    };
    'segments: for _ in 0..cfg.max_segments {
        let Ok(fv) = f.eval_coefficients(&x) else { break };
        if fv.iter().all(|v| v.abs() <= SINGULAR_TOL) {
            break;
        }
        let solved = pivot(&fv);
        let w = random_direction(&mut rng, n - 1);
        for _ in 0..cfg.steps_per_segment {
            if out.steps >= cap {
                break 'segments;
            }
            out.steps += 1;
            let Ok(step) = steer_step(f, &x, &w, solved, dt) else {
                break 'segments;
            };
            if inside(f, base, cfg.epsilon, &step.point) {
                push(&mut out, &step.point, step.residual, dt);
                x = step.point;
                continue;
            }
            // truncate at the ball or box boundary
            let (mut lo, mut hi) = (0.0, dt);
            let mut last = x.clone();
            let mut last_res = 0.0;
            while hi - lo > 1e-10 && out.steps < cap {
                out.steps += 1;
                let mid = 0.5 * (lo + hi);
                match steer_step(f, &x, &w, solved, mid) {
                    Ok(s) if inside(f, base, cfg.epsilon, &s.point) => {
                        lo = mid;
                        last = s.point;
                        last_res = s.residual;
                    }
                    _ => hi = mid,
                }
            }
            if lo > 0.0 {
                push(&mut out, &last, last_res, lo);
                out.endpoints.push((last, out.steps));
            }
            break 'segments;
        }
        out.endpoints.push((x.clone(), out.steps));
    }
    out
}

/// Random piecewise null curves from `base` inside the `ε`-ball (and the
/// domain), until the step budget is spent. Deterministic in
/// `(form, base, config)` and independent of the thread count.
pub fn explore(f: &PfaffianForm, base: &[f64], cfg: &ReachConfig) -> Result<ReachSample, ReachError> {
    if !f.domain().contains(base) || f.is_singular_at(base, SINGULAR_TOL) {
        return Err(ReachError::BadBase(base.to_vec()));
    }
    let mut sample = ReachSample {
        base: base.to_vec(),
        epsilon: cfg.epsilon,
        seed: cfg.seed,
        budget: cfg.budget,
        budget_used: 0,
        endpoints: vec![base.to_vec()],
        endpoint_steps: vec![0],
        rollouts: 0,
        max_step_residual: 0.0,
        curves: Vec::new(),
    };
    if f.dim() < 2 {
        // a one-variable form admits only stationary null curves
        return Ok(sample);
    }
    let batch = rayon::current_num_threads().max(1) as u64 * 4;
    let mut next = 0u64;
    let mut merged: Vec<(Vec<f64>, usize)> = Vec::new();
    'outer: while sample.budget_used < cfg.budget {
        let results: Vec<Rollout> = (next..next + batch)
            .into_par_iter()
            .map(|i| rollout(f, base, cfg, i, usize::MAX))
            .collect();
        for (offset, mut r) in results.into_iter().enumerate() {
            let remaining = cfg.budget - sample.budget_used;
            if r.steps > remaining {
                r = rollout(f, base, cfg, next + offset as u64, remaining);
            }
            sample.budget_used += r.steps;
            sample.rollouts += 1;
            sample.max_step_residual = sample.max_step_residual.max(r.max_residual);
            merged.extend(r.endpoints);
            if let Some(c) = r.curve {
                sample.curves.push(c);
            }
            if sample.budget_used >= cfg.budget || r.steps == 0 {
                break 'outer;
            }
        }
        next += batch;
    }
    merged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    for (p, s) in merged {
        sample.endpoints.push(p);
        sample.endpoint_steps.push(s);
    }
    Ok(sample)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachKind {
    CodimensionOneLike,
    FullDimensional,
    Inconclusive,
}

impl ReachKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReachKind::CodimensionOneLike => "codimension_one_like",
            ReachKind::FullDimensional => "full_dimensional",
            ReachKind::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachabilityVerdict {
    pub kind: ReachKind,
    pub threshold: f64,
    pub endpoints: usize,
    /// Singular values of the centred cloud scaled by `1/ε`, descending.
    pub singular_values: Vec<f64>,
    /// `σᵢ/σ₁`.
    pub ratios: Vec<f64>,
    /// The last ratio after removing the best quadratic fit of the weakest
    /// principal coordinate over the others; used for the decision.
    pub curvature_corrected_ratio: f64,
    /// `max |ψ₀(e) − ψ₀(p)|` when a reference potential is supplied,
    /// otherwise the corrected ratio.
    pub thickness: f64,
}

/// Spread of the reached set from its singular-value spectrum.
///
/// A curved level set is not flat, so the decision uses the weakest
/// principal coordinate's residual after a least-squares quadratic fit in
/// the other principal coordinates, scaled like a singular value.
pub fn estimate_dimension(s: &ReachSample, threshold: f64, psi_ref: Option<&Expr>) -> ReachabilityVerdict {
    let n = s.base.len();
    let m = s.endpoints.len();
    let mut verdict = ReachabilityVerdict {
        kind: ReachKind::Inconclusive,
        threshold,
        endpoints: m,
        singular_values: vec![0.0; n],
        ratios: vec![0.0; n],
        curvature_corrected_ratio: 0.0,
        thickness: 0.0,
    };
    let thickness_ref = psi_ref.map(|psi| {
        let p0 = psi.eval(&s.base).unwrap_or(f64::NAN);
        s.endpoints
            .iter()
            .map(|e| (psi.eval(e).unwrap_or(f64::NAN) - p0).abs())
            .fold(0.0, |a: f64, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
    });
    let finish = |mut v: ReachabilityVerdict| {
        v.thickness = thickness_ref.unwrap_or(v.curvature_corrected_ratio);
        v
    };
    if m < n + 1 || n == 0 {
        return finish(verdict);
    }
    let mean: Vec<f64> = (0..n)
        .map(|i| s.endpoints.iter().map(|e| e[i]).sum::<f64>() / m as f64)
        .collect();
    let cloud = DMatrix::from_fn(m, n, |r, c| (s.endpoints[r][c] - mean[c]) / s.epsilon);
    let svd = cloud.clone().svd(false, true);
    let Some(v_t) = svd.v_t else {
        return finish(verdict);
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    verdict.singular_values = sv.clone();
    if !(sv[0] > 0.0) {
        return finish(verdict);
    }
    verdict.ratios = sv.iter().map(|x| x / sv[0]).collect();
    let raw_last = verdict.ratios[n - 1];
    // principal coordinates, strongest first
    let coords = DMatrix::from_fn(m, n, |r, c| {
        let row = order[c];
        (0..n).map(|k| cloud[(r, k)] * v_t[(row, k)]).sum::<f64>()
    });
    let corrected = if n >= 2 {
        quadratic_residual_norm(&coords, n).map_or(raw_last, |r| (r / sv[0]).min(raw_last))
    } else {
        raw_last
    };
    verdict.curvature_corrected_ratio = corrected;
    verdict.kind = if corrected > threshold {
        ReachKind::FullDimensional
    } else if n == 1 || verdict.ratios[n - 2] > threshold {
        ReachKind::CodimensionOneLike
    } else {
        ReachKind::Inconclusive
    };
    finish(verdict)
}

// Least-squares fit of the last column on 1, the other columns and their
// pairwise products; returns the 2-norm of the residual.
fn quadratic_residual_norm(coords: &DMatrix<f64>, n: usize) -> Option<f64> {
    let m = coords.nrows();
    let k = n - 1;
    let cols = 1 + k + k * (k + 1) / 2;
    if m <= cols {
        return None;
    }
    let mut design = DMatrix::zeros(m, cols);
    for r in 0..m {
        let mut c = 0;
        design[(r, c)] = 1.0;
        c += 1;
        for i in 0..k {
            design[(r, c)] = coords[(r, i)];
            c += 1;
        }
        for i in 0..k {
            for j in i..k {
                design[(r, c)] = coords[(r, i)] * coords[(r, j)];
                c += 1;
            }
        }
    }
    let target = DVector::from_fn(m, |r, _| coords[(r, n - 1)]);
    let beta = design.clone().svd(true, true).solve(&target, 1e-12).ok()?;
    Some((design * beta - target).norm())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetGap {
    pub delta: f64,
    pub point: Vec<f64>,
    /// Closest distance reached at a quarter, half and all of the budget.
    pub gap_trend: [f64; 3],
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub free_var: usize,
    pub epsilon: f64,
    pub budget: usize,
    pub seed: u64,
    pub reach_tolerance: f64,
    pub fraction_reached: f64,
    pub targets: Vec<TargetGap>,
}

pub const SCAN_TARGETS: usize = 32;
const SHOOT_SEGMENTS: usize = 4;
const SHOOT_SUBSTEPS: usize = 8;

/// Integrates `ẋ = P(x) w_k` on `SHOOT_SEGMENTS` unit-time pieces, `P` the
/// projection onto the null space of `F`, staying inside the domain. Returns
/// the end point and the steps spent, or `None` if the curve left the domain
/// or met a singular point.
fn shoot(f: &PfaffianForm, base: &[f64], controls: &[f64], steps: &mut usize) -> Option<Vec<f64>> {
    let n = f.dim();
    let h = 1.0 / (SHOOT_SEGMENTS * SHOOT_SUBSTEPS) as f64;
    let mut x = base.to_vec();
    for seg in 0..SHOOT_SEGMENTS {
        let w = &controls[seg * n..(seg + 1) * n];
        let mut field = |_: f64, y: &[f64], dy: &mut [f64]| {
            let Ok(fv) = f.eval_coefficients(y) else { return false };
            let nf2: f64 = fv.iter().map(|v| v * v).sum();
            if nf2 <= SINGULAR_TOL * SINGULAR_TOL {
                return false;
            }
            let dot: f64 = fv.iter().zip(w).map(|(a, b)| a * b).sum();
            for i in 0..n {
                dy[i] = w[i] - dot / nf2 * fv[i];
            }
            true
        };
        for _ in 0..SHOOT_SUBSTEPS {
            let mut next = vec![0.0; n];
            *steps += 1;
            if !crate::ode::rk4_step(&mut field, 0.0, &x, h, &mut next) || !f.domain().contains(&next) {
                return None;
            }
            x = next;
        }
    }
    Some(x)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Levenberg–Marquardt on the shooting controls, spending at most `budget`
/// steps; returns the smallest gap seen.
fn steer_to(f: &PfaffianForm, base: &[f64], target: &[f64], budget: usize, seed: u64, stop_gap: f64) -> f64 {
    let n = f.dim();
    let np = SHOOT_SEGMENTS * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = 0usize;
    let mut best = f64::INFINITY;
    let scale = dist(base, target).max(1e-3);
    let cost_per_eval = SHOOT_SEGMENTS * SHOOT_SUBSTEPS;
    while steps + cost_per_eval * (np + 2) <= budget && best > stop_gap {
        // fresh random start
        let mut u: Vec<f64> = (0..np).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        let Some(mut x) = shoot(f, base, &u, &mut steps) else { continue };
        let mut r: Vec<f64> = x.iter().zip(target).map(|(a, b)| a - b).collect();
        let mut cost = r.iter().map(|v| v * v).sum::<f64>();
        best = best.min(cost.sqrt());
        let mut lambda = 1e-3;
        let mut stalled = 0;
        while steps + cost_per_eval * (np + 1) <= budget && best > stop_gap && stalled < 8 {
            // forward-difference Jacobian of the end point
            let mut jac = DMatrix::zeros(n, np);
            let mut ok = true;
            for k in 0..np {
                let hk = 1e-7 * u[k].abs().max(1.0);
                let mut up = u.clone();
                up[k] += hk;
                match shoot(f, base, &up, &mut steps) {
                    Some(xk) => {
                        for i in 0..n {
                            jac[(i, k)] = (xk[i] - x[i]) / hk;
                        }
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                break;
            }
            let rv = DVector::from_column_slice(&r);
            let jt = jac.transpose();
            let mut improved = false;
            for _ in 0..6 {
                if steps + cost_per_eval > budget {
                    break;
                }
                let mut a = &jt * &jac;
                for d in 0..np {
                    a[(d, d)] += lambda * (1.0 + a[(d, d)]);
                }
                let Some(delta) = a.cholesky().map(|c| c.solve(&(-&jt * &rv))) else {
                    lambda *= 10.0;
                    continue;
                };
                let cand: Vec<f64> = u.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                if let Some(xc) = shoot(f, base, &cand, &mut steps) {
                    let rc: Vec<f64> = xc.iter().zip(target).map(|(a, b)| a - b).collect();
                    let cc = rc.iter().map(|v| v * v).sum::<f64>();
                    best = best.min(cc.sqrt());
                    if cc < cost {
                        improved = cc < 0.999 * cost;
                        u = cand;
                        x = xc;
                        r = rc;
                        cost = cc;
                        lambda = (lambda * 0.3).max(1e-12);
                        break;
                    }
                }
                lambda *= 10.0;
            }
            stalled = if improved { 0 } else { stalled + 1 };
        }
    }
    best
}

fn scan_once(f: &PfaffianForm, base: &[f64], free: usize, cfg: &ReachConfig, budget: usize, targets: &[Vec<f64>]) -> Result<Vec<f64>, ReachError> {
    let explore_cfg = ReachConfig {
        budget: budget / 4,
        keep_curves: false,
        ..cfg.clone()
    };
    let sample = explore(f, base, &explore_cfg)?;
    let per_target = (budget - budget / 4) / targets.len().max(1);
    let tol = cfg.epsilon / 100.0;
    Ok(targets
        .par_iter()
        .enumerate()
        .map(|(j, t)| {
            let seen = sample.endpoints.iter().map(|e| dist(e, t)).fold(f64::INFINITY, f64::min);
            if seen <= tol {
                return seen;
            }
            let stream = cfg.seed ^ ((free as u64) << 32) ^ (j as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            seen.min(steer_to(f, base, t, per_target, stream, tol / 10.0))
        })
        .collect())
}

/// Places `SCAN_TARGETS` points `p + Δ e_free` with `Δ = ε (j − 16)/16` and
/// measures how close null curves from `p` get to each: random exploration
/// of the `ε`-ball, then for every target not yet within `ε/100` a
/// least-squares steering search over null curves that stay in the domain.
/// Gaps are reported at a quarter, half and the full budget.
pub fn surrounding_line_scan(f: &PfaffianForm, base: &[f64], free_var: usize, cfg: &ReachConfig) -> Result<ScanReport, ReachError> {
    if free_var >= f.dim() {
        return Err(ReachError::FreeVar(free_var));
    }
    let half = (SCAN_TARGETS / 2) as f64;
    let targets: Vec<(f64, Vec<f64>)> = (0..SCAN_TARGETS)
        .map(|j| {
            let delta = cfg.epsilon * (j as f64 - half) / half;
            let mut t = base.to_vec();
            t[free_var] += delta;
            (delta, t)
        })
        .collect();
    let points: Vec<Vec<f64>> = targets.iter().map(|t| t.1.clone()).collect();
    let budgets = [cfg.budget / 4, cfg.budget / 2, cfg.budget];
    let mut trend = Vec::new();
    for b in budgets {
        trend.push(scan_once(f, base, free_var, cfg, b, &points)?);
    }
    let tol = cfg.epsilon / 100.0;
    let gaps: Vec<TargetGap> = targets
        .into_iter()
        .enumerate()
        .map(|(j, (delta, point))| {
            let g = [trend[0][j], trend[1][j], trend[2][j]];
            TargetGap {
                delta,
                point,
                gap_trend: g,
                reached: g[2] <= tol,
            }
        })
        .collect();
    let reached = gaps.iter().filter(|g| g.reached).count();
    Ok(ScanReport {
        free_var,
        epsilon: cfg.epsilon,
        budget: cfg.budget,
        seed: cfg.seed,
        reach_tolerance: tol,
        fraction_reached: reached as f64 / SCAN_TARGETS as f64,
        targets: gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::form::{make_form, BoxDomain};

    fn contact() -> PfaffianForm {
        // dz - y dx
        make_form(&["x", "y", "z"], &["-y", "0", "1"], BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn steering_examples() {
        let f = contact();
        let s = steer_step(&f, &[0.0, 0.0, 0.0], &[1.0, 0.0], 2, 0.1).unwrap();
        assert_eq!(s.point, vec![0.1, 0.0, 0.0]);
        // at y = 1, dz = dx
        let s = steer_step(&f, &[0.0, 1.0, 0.0], &[1.0, 0.0], 2, 0.1).unwrap();
        assert!((s.point[0] - 0.1).abs() < 1e-15 && (s.point[2] - 0.1).abs() < 1e-15);
        let s = steer_step(&f, &[0.2, 0.3, 0.4], &[0.0, 0.0], 2, 0.1).unwrap();
        assert_eq!(s.point, vec![0.2, 0.3, 0.4]);
        assert!(matches!(
            steer_step(&f, &[0.0, 0.0, 0.0], &[1.0, 0.0], 1, 0.1),
            Err(ReachError::SmallPivot { index: 1, .. })
        ));
    }

    #[test]
    fn square_maneuver_lifts_by_area() {
        let f = contact();
        let side = 0.2;
        let mut p = vec![0.0, 0.0, 0.0];
        // x -> y -> -x -> -y ; free components are (x, y), z solved
        for w in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]] {
            for _ in 0..10 {
                p = steer_step(&f, &p, &w, 2, side / 10.0).unwrap().point;
            }
        }
        assert!(p[0].abs() < 1e-14 && p[1].abs() < 1e-14);
        assert!((p[2].abs() - side * side).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn zero_budget_keeps_only_base() {
        let cfg = ReachConfig {
            budget: 0,
            ..Default::default()
        };
        let s = explore(&contact(), &[0.0; 3], &cfg).unwrap();
        assert_eq!(s.endpoints, vec![vec![0.0; 3]]);
        let v = estimate_dimension(&s, 0.05, None);
        assert_eq!(v.kind, ReachKind::Inconclusive);
    }

    #[test]
    fn exploration_is_deterministic_and_bounded() {
        let cfg = ReachConfig {
            budget: 5_000,
            ..Default::default()
        };
        let a = explore(&contact(), &[0.0; 3], &cfg).unwrap();
        let b = explore(&contact(), &[0.0; 3], &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.budget_used <= 5_000);
        assert!(a.endpoints.iter().all(|e| dist(e, &[0.0; 3]) <= 0.3 + 1e-12));
        assert!(a.max_step_residual <= 1e-6, "{}", a.max_step_residual);
    }

    #[test]
    fn flat_cloud_is_codimension_one() {
        let f = make_form(&["x", "y", "z"], &["1", "1", "1"], BoxDomain::cube(3, -1.0, 1.0).unwrap()).unwrap();
        let cfg = ReachConfig {
            budget: 20_000,
            ..Default::default()
        };
        let s = explore(&f, &[0.0; 3], &cfg).unwrap();
        assert!(s.endpoints.iter().all(|e| (e[0] + e[1] + e[2]).abs() <= 1e-6));
        let v = estimate_dimension(&s, 0.05, None);
        assert_eq!(v.kind, ReachKind::CodimensionOneLike, "{v:?}");
    }
}
