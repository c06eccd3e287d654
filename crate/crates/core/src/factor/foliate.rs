//! Polylines on level sets, for plotting.
//!
//! Two variables: characteristics started at evenly spaced points of a
//! transversal, traced both ways to the domain boundary. More variables:
//! for a few leaf labels `x⁰`, the leaf's trace above each coordinate axis
//! through the base point.

use serde::{Deserialize, Serialize};

use super::characteristic::{solve_characteristic, Transversal};
use super::global::SurfaceField;
use super::potential2::select_transversal;
use super::FactorError;
use crate::form::PfaffianForm;
use crate::ode::OdeOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoliateConfig {
    pub curves: usize,
    /// Two variables only; `None` picks one as the characteristic
    /// construction does.
    pub transversal: Option<Transversal>,
    /// Three or more variables; defaults to the last one.
    pub free_var: Option<usize>,
    pub base: Option<Vec<f64>>,
    /// Points per axis trace (three or more variables).
    pub samples: usize,
    pub margin: f64,
    pub ode: OdeOptions,
}

impl Default for FoliateConfig {
    fn default() -> Self {
        FoliateConfig {
            curves: 9,
            transversal: None,
            free_var: None,
            base: None,
            samples: 65,
            margin: 1.0,
            ode: OdeOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub id: usize,
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

pub fn foliate(f: &PfaffianForm, cfg: &FoliateConfig) -> Result<Vec<Polyline>, FactorError> {
    match f.dim() {
        0 | 1 => Err(FactorError::Arity {
            method: "foliation",
            expected: "at least 2".into(),
            got: f.dim(),
        }),
        2 => Ok(characteristics(f, cfg)?),
        _ => leaves(f, cfg),
    }
}

fn characteristics(f: &PfaffianForm, cfg: &FoliateConfig) -> Result<Vec<Polyline>, FactorError> {
    let tr = match cfg.transversal {
        Some(t) => t,
        None => select_transversal(f, cfg.margin, &cfg.ode).ok_or(FactorError::NoTransversal)?.0,
    };
    let d = f.domain();
    let other = 1 - tr.axis;
    let mut out = Vec::new();
    for k in 0..cfg.curves {
        let label = d.lo(other) + d.width(other) * (k as f64 + 0.5) / cfg.curves as f64;
        let start = tr.point_at(label);
        if !d.contains(&start) || f.is_singular_at(&start, crate::form::SINGULAR_TOL) {
            continue;
        }
        let back = solve_characteristic(f, &start, -1.0, None, d, &cfg.ode);
        let fwd = solve_characteristic(f, &start, 1.0, None, d, &cfg.ode);
        let mut params: Vec<f64> = back.params.iter().rev().map(|t| -t).collect();
        let mut points: Vec<Vec<f64>> = back.points.iter().rev().map(|p| p.to_vec()).collect();
        // the start point is shared
        params.extend(fwd.params.iter().skip(1));
        points.extend(fwd.points.iter().skip(1).map(|p| p.to_vec()));
        out.push(Polyline { id: out.len(), params, points });
    }
    Ok(out)
}

fn leaves(f: &PfaffianForm, cfg: &FoliateConfig) -> Result<Vec<Polyline>, FactorError> {
    let n = f.dim();
    let m = cfg.free_var.unwrap_or(n - 1);
    if m >= n {
        return Err(FactorError::FreeVar(m));
    }
    let d = f.domain();
    let base = cfg.base.clone().unwrap_or_else(|| d.center());
    if !d.contains(&base) {
        return Err(FactorError::BadBase(base));
    }
    let field = SurfaceField::new(f.clone(), m, base.clone(), cfg.margin, cfg.ode);
    let samples = cfg.samples.max(2);
    let mut out = Vec::new();
    for k in 0..cfg.curves {
        let x0 = d.lo(m) + d.width(m) * (k as f64 + 0.5) / cfg.curves as f64;
        for axis in (0..n).filter(|&i| i != m) {
            let mut line = Polyline {
                id: out.len(),
                params: Vec::new(),
                points: Vec::new(),
            };
            for s in 0..samples {
                let t = d.lo(axis) + d.width(axis) * s as f64 / (samples - 1) as f64;
                let mut q = base.clone();
                q[axis] = t;
                if let Some(h) = field.surface_value(&q, x0) {
                    q[m] = h;
                    if d.contains(&q) {
                        line.params.push(t);
                        line.points.push(q);
                    }
                }
            }
            if !line.points.is_empty() {
                out.push(line);
            }
        }
    }
    Ok(out)
}
