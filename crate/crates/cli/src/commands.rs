use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;

use clap::Args;
use serde_json::{json, Value};

use pfaff_core::catalog;
use pfaff_core::expr::parse_expression;
use pfaff_core::factor::{
    build_potential_2var, foliate as trace_foliation, global_factorization, path_independence, FactorizationResult, FoliateConfig,
    GlobalConfig, Potential2Config, Transversal,
};
use pfaff_core::form::{parse_substitution_file, PfaffianForm};
use pfaff_core::integrability::{classify, invariance_check, Class};
use pfaff_core::reach::{estimate_dimension, explore, surrounding_line_scan, ReachConfig};
use pfaff_core::report::{to_json, write_endpoints_csv, write_polylines_csv, write_potential_csv};
use pfaff_core::sampling::{grid, SamplerConfig};

use crate::config::{io_error, load_form, parse_point, resolve_var, CliError, Format, RunConfig};

/// Residual bound for catalog references used directly.
const REFERENCE_RESIDUAL: f64 = 1e-8;

fn json_text<T: serde::Serialize + ?Sized>(v: &T) -> Result<String, CliError> {
    to_json(v).map_err(|e| CliError::Io(format!("serializing report: {e}")))
}

fn csv_sink(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn sampler(cfg: &RunConfig) -> SamplerConfig {
    SamplerConfig {
        points: cfg.samples,
        ..SamplerConfig::default()
    }
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    /// Form file, or `catalog:<name>`.
    form: String,
    /// Exit with status 1 unless the class is this one
    /// (exact, locally_integrable, non_integrable, inconclusive).
    #[arg(long)]
    expect: Option<String>,
}

pub fn check(cfg: &RunConfig, a: CheckArgs) -> Result<(), CliError> {
    let expected = a
        .expect
        .as_deref()
        .map(|s| Class::parse(s).ok_or_else(|| CliError::Input(format!("unknown class `{s}` for --expect"))))
        .transpose()?;
    let form = load_form(&a.form)?.form;
    let v = classify(&form, &sampler(cfg), cfg.tol);
    let summary = format!(
        "class: {}\nsamples used: {} (singular {}, unevaluable {})\nmax normalized defect: {:e}\nmax normalized |R|: {:e}\n",
        v.class,
        v.samples_used,
        v.singular_samples,
        v.failed_samples,
        v.max_defect,
        v.max_tensor()
    );
    match cfg.format {
        Format::Json => {
            cfg.emit(&json_text(&v)?)?;
            if v.singular_samples + v.failed_samples > 0 {
                eprintln!(
                    "note: skipped {} singular and {} unevaluable samples",
                    v.singular_samples, v.failed_samples
                );
            }
        }
        Format::Text => cfg.emit(&summary)?,
    }
    match expected {
        Some(c) if c != v.class => Err(CliError::Analysis(format!("expected {c}, got {}", v.class))),
        _ => Ok(()),
    }
}

fn factor_report(r: &FactorizationResult) -> Value {
    json!({
        "method": r.method,
        "stats": r.stats,
        "details": r.details,
    })
}

fn factor_summary(r: &FactorizationResult) -> String {
    format!(
        "method: {}\nresidual max {:e}, rms {:e}\nevaluated {}, skipped {}, flagged {}\n",
        json!(r.method).as_str().unwrap_or_default(),
        r.stats.residual_max,
        r.stats.residual_rms,
        r.stats.evaluated_points,
        r.stats.skipped_points,
        r.stats.flagged_points
    )
}

fn finish_factor(cfg: &RunConfig, form: &PfaffianForm, r: &FactorizationResult, report: Value, grid_n: usize, max_residual: Option<f64>) -> Result<(), CliError> {
    if let Some(path) = &cfg.csv {
        let names = form.vars().to_vec();
        write_potential_csv(csv_sink(path)?, r.potential.as_ref(), &grid(form.domain(), grid_n), &names).map_err(|e| io_error(path, e))?;
    }
    match cfg.format {
        Format::Json => cfg.emit(&json_text(&report)?)?,
        Format::Text => cfg.emit(&factor_summary(r))?,
    }
    if r.stats.evaluated_points == 0 {
        return Err(CliError::Analysis("no sample could be evaluated".into()));
    }
    match max_residual {
        Some(m) if !(r.stats.residual_max <= m) => Err(CliError::Analysis(format!(
            "residual_max {:e} exceeds {m:e}",
            r.stats.residual_max
        ))),
        _ => Ok(()),
    }
}

#[derive(Args, Debug)]
pub struct Factor2Args {
    form: String,
    /// Transversal line `VAR=VALUE`; chosen automatically when omitted.
    #[arg(long)]
    transversal: Option<String>,
    /// Characteristics may leave the domain by this fraction of its width.
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    /// Nodes per axis of the check grid (and of the CSV).
    #[arg(long, default_value_t = 17)]
    grid: usize,
    /// CSV of (point, psi, mu) on the check grid.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Exit with status 1 if the residual exceeds this.
    #[arg(long)]
    max_residual: Option<f64>,
}

fn parse_transversal(form: &PfaffianForm, text: &str) -> Result<Transversal, CliError> {
    let (var, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("--transversal expects VAR=VALUE, got `{text}`")))?;
    let axis = resolve_var(form, var.trim())?;
    let value = value
        .trim()
        .parse()
        .map_err(|_| CliError::Input(format!("bad transversal value `{value}`")))?;
    Ok(Transversal { axis, value })
}

pub fn factor2(cfg: &mut RunConfig, a: Factor2Args) -> Result<(), CliError> {
    let form = load_form(&a.form)?.form;
    if form.dim() != 2 {
        return Err(CliError::Input(format!("factor2 needs a two-variable form, this one has {}", form.dim())));
    }
    let transversal = a.transversal.as_deref().map(|t| parse_transversal(&form, t)).transpose()?;
    let pc = Potential2Config {
        transversal,
        margin: a.margin,
        ode: cfg.ode(),
        verify_grid: a.grid.max(2),
    };
    let r = build_potential_2var(&form, &pc).map_err(|e| CliError::Analysis(e.to_string()))?;
    cfg.csv = a.csv;
    finish_factor(cfg, &form, &r, factor_report(&r), pc.verify_grid, a.max_residual)
}

#[derive(Args, Debug)]
pub struct GlobalArgs {
    form: String,
    /// Variable carrying the leaf label (name or 1-based index); the last one by default.
    #[arg(long)]
    free_var: Option<String>,
    /// Base point `x1,x2,...`; the domain centre by default.
    #[arg(long)]
    base: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 9)]
    grid: usize,
    /// Nodes per axis of the staircase path-independence targets.
    #[arg(long, default_value_t = 5)]
    staircase_grid: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    max_residual: Option<f64>,
}

pub fn factor_global(cfg: &mut RunConfig, a: GlobalArgs) -> Result<(), CliError> {
    let form = load_form(&a.form)?.form;
    let free = match &a.free_var {
        Some(v) => resolve_var(&form, v)?,
        None => form.dim() - 1,
    };
    let base = a.base.as_deref().map(|b| parse_point(b, form.dim())).transpose()?;
    let mut gc = GlobalConfig::new(free);
    gc.base = base.clone();
    gc.margin = a.margin;
    gc.ode = cfg.ode();
    gc.verify_grid = a.grid.max(2);
    let r = global_factorization(&form, &gc).map_err(|e| CliError::Analysis(e.to_string()))?;
    let base = base.unwrap_or_else(|| form.domain().center());
    let targets = grid(form.domain(), a.staircase_grid.max(2));
    let paths = path_independence(&form, free, &base, &targets, a.margin, &gc.ode).map_err(|e| CliError::Analysis(e.to_string()))?;
    let mut report = factor_report(&r);
    report["staircase"] = serde_json::to_value(&paths).map_err(|e| CliError::Io(e.to_string()))?;
    cfg.csv = a.csv;
    if cfg.format == Format::Text {
        eprintln!("staircase discrepancy: {:e} over {} targets", paths.max_discrepancy, paths.evaluated);
    }
    finish_factor(cfg, &form, &r, report, gc.verify_grid, a.max_residual)
}

#[derive(Args, Debug)]
pub struct ReachArgs {
    form: String,
    /// Start point `x1,x2,...`; the catalog probe point or the domain centre by default.
    #[arg(long)]
    point: Option<String>,
    #[arg(long, default_value_t = 0.3)]
    epsilon: f64,
    /// Integrator steps.
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    /// Also scan the line through the point along this variable.
    #[arg(long)]
    free_var: Option<String>,
    /// Reference potential; its spread over the endpoints is the thickness.
    #[arg(long)]
    psi: Option<String>,
    /// CSV of the endpoint cloud.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Exit with status 1 unless the kind is this one
    /// (codimension_one_like, full_dimensional, inconclusive).
    #[arg(long)]
    expect: Option<String>,
}

pub fn reach(cfg: &mut RunConfig, a: ReachArgs) -> Result<(), CliError> {
    let loaded = load_form(&a.form)?;
    let form = loaded.form;
    if !(a.epsilon > 0.0) || !(a.threshold > 0.0) {
        return Err(CliError::Input("--epsilon and --threshold must be positive".into()));
    }
    let point = match &a.point {
        Some(p) => parse_point(p, form.dim())?,
        None => loaded.entry.map_or_else(|| form.domain().center(), |e| e.probe()),
    };
    let free = a.free_var.as_deref().map(|v| resolve_var(&form, v)).transpose()?;
    let psi = a
        .psi
        .as_deref()
        .map(|t| parse_expression(t, form.vars()).map_err(|e| CliError::Input(format!("--psi: {e}"))))
        .transpose()?;
    let rc = ReachConfig {
        epsilon: a.epsilon,
        budget: a.budget,
        seed: a.seed,
        threshold: a.threshold,
        ..ReachConfig::default()
    };
    cfg.seed = a.seed;
    let sample = explore(&form, &point, &rc).map_err(|e| CliError::Input(e.to_string()))?;
    let verdict = estimate_dimension(&sample, rc.threshold, psi.as_ref());
    let scan = free
        .map(|m| surrounding_line_scan(&form, &point, m, &rc))
        .transpose()
        .map_err(|e| CliError::Input(e.to_string()))?;
    if let Some(path) = &a.csv {
        write_endpoints_csv(csv_sink(path)?, &sample, form.vars()).map_err(|e| io_error(path, e))?;
    }
    let report = json!({
        "base": sample.base,
        "epsilon": rc.epsilon,
        "budget": rc.budget,
        "budget_used": sample.budget_used,
        "seed": rc.seed,
        "rollouts": sample.rollouts,
        "endpoints": sample.endpoints.len(),
        "max_step_residual": sample.max_step_residual,
        "verdict": verdict,
        "scan": scan,
    });
    match cfg.format {
        Format::Json => cfg.emit(&json_text(&report)?)?,
        Format::Text => {
            let mut s = format!(
                "kind: {}\nratios: {:?}\ncurvature-corrected ratio: {:e}\nthickness: {:e}\nendpoints: {}\n",
                verdict.kind.as_str(),
                verdict.ratios,
                verdict.curvature_corrected_ratio,
                verdict.thickness,
                sample.endpoints.len()
            );
            if let Some(sc) = &scan {
                s.push_str(&format!("line scan reached: {}/{}\n", sc.targets.iter().filter(|t| t.reached).count(), sc.targets.len()));
            }
            cfg.emit(&s)?;
        }
    }
    match a.expect.as_deref() {
        Some(k) if k != verdict.kind.as_str() => {
            if !["codimension_one_like", "full_dimensional", "inconclusive"].contains(&k) {
                return Err(CliError::Input(format!("unknown kind `{k}` for --expect")));
            }
            Err(CliError::Analysis(format!("expected {k}, got {}", verdict.kind.as_str())))
        }
        _ => Ok(()),
    }
}

#[derive(Args, Debug)]
pub struct FoliateArgs {
    form: String,
    /// Number of leaves.
    #[arg(long, default_value_t = 9)]
    curves: usize,
    /// Two variables: transversal `VAR=VALUE` the curves start from.
    #[arg(long)]
    transversal: Option<String>,
    /// Three or more variables: the leaf-label variable (last by default).
    #[arg(long)]
    free_var: Option<String>,
    /// Three or more variables: points along each axis trace.
    #[arg(long, default_value_t = 65)]
    points: usize,
}

pub fn foliate(cfg: &RunConfig, a: FoliateArgs) -> Result<(), CliError> {
    let form = load_form(&a.form)?.form;
    let fc = FoliateConfig {
        curves: a.curves.max(1),
        transversal: a.transversal.as_deref().map(|t| parse_transversal(&form, t)).transpose()?,
        free_var: a.free_var.as_deref().map(|v| resolve_var(&form, v)).transpose()?,
        base: None,
        samples: a.points,
        margin: 1.0,
        ode: cfg.ode(),
    };
    let lines = trace_foliation(&form, &fc).map_err(|e| CliError::Analysis(e.to_string()))?;
    let names = form.vars().to_vec();
    match &cfg.out {
        Some(path) => write_polylines_csv(csv_sink(path)?, &lines, &names).map_err(|e| io_error(path, e)),
        None => write_polylines_csv(io::stdout().lock(), &lines, &names).map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

#[derive(Args, Debug)]
pub struct InvarianceArgs {
    form: String,
    /// Substitution file: `vars:`, one `old = expression` line per form
    /// variable, `domain:` and an optional `base:`.
    #[arg(long)]
    subst: PathBuf,
}

pub fn invariance(cfg: &RunConfig, a: InvarianceArgs) -> Result<(), CliError> {
    let form = load_form(&a.form)?.form;
    let text = std::fs::read_to_string(&a.subst).map_err(|e| io_error(&a.subst, e))?;
    let s = parse_substitution_file(&text, form.vars()).map_err(|e| CliError::Form(format!("{}: {e}", a.subst.display())))?;
    let r = invariance_check(&form, &s, &sampler(cfg), cfg.tol).map_err(|e| CliError::Form(e.to_string()))?;
    match cfg.format {
        Format::Json => cfg.emit(&json_text(&r)?)?,
        Format::Text => cfg.emit(&format!(
            "nullity preserved: {}\nmax |R| original {:e}, pulled back {:e}, over {} samples\n",
            r.nullity_preserved, r.max_original, r.max_pulled_back, r.samples_used
        ))?,
    }
    if r.nullity_preserved {
        Ok(())
    } else {
        Err(CliError::Analysis("tensor nullity changed under the substitution".into()))
    }
}

#[derive(Args, Debug)]
pub struct CatalogArgs {
    /// Print the entry names.
    #[arg(long, conflicts_with = "dump")]
    list: bool,
    /// Print an entry as a form file.
    #[arg(long)]
    dump: Option<String>,
}

pub fn catalog(cfg: &RunConfig, a: CatalogArgs) -> Result<(), CliError> {
    if a.list {
        return cfg.emit(&(catalog::names().join("\n") + "\n"));
    }
    if let Some(name) = a.dump {
        let e = catalog::get(&name).ok_or_else(|| CliError::Input(format!("no catalog entry `{name}`")))?;
        let mut text = format!("# {}: {}\n", e.name(), e.spec.note);
        text.push_str(&e.form.to_form_file());
        return cfg.emit(&text);
    }
    // self-check: expected classes and reference factors
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for e in catalog::all() {
        let v = classify(&e.form, &sampler(cfg), cfg.tol);
        let residual = match (&e.psi, &e.mu) {
            (Some(psi), Some(mu)) => {
                let r = FactorizationResult::reference(&e.form, psi.clone(), mu.clone(), &grid(e.form.domain(), 5));
                Some(r.stats.residual_max)
            }
            _ => None,
        };
        let ok = v.class == e.expected() && residual.is_none_or(|r| r <= REFERENCE_RESIDUAL);
        if !ok {
            failures.push(e.name());
        }
        rows.push(json!({
            "name": e.name(),
            "expected": e.expected(),
            "class": v.class,
            "reference_residual": residual,
            "ok": ok,
        }));
    }
    match cfg.format {
        Format::Json => cfg.emit(&json_text(&rows)?)?,
        Format::Text => {
            let s: String = rows
                .iter()
                .map(|r| format!("{:<18} {:<20} {}\n", r["name"].as_str().unwrap_or(""), r["class"].as_str().unwrap_or(""), if r["ok"] == true { "ok" } else { "MISMATCH" }))
                .collect();
            cfg.emit(&s)?;
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Analysis(format!("catalog entries disagree with expectations: {}", failures.join(", "))))
    }
}
