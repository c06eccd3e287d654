//! Pfaffian forms `Σ Fᵢ dxᵢ` on axis-aligned boxes, their evaluation, and
//! pullback under a change of variables.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{parse_expression, EvalError, Expr, ParseError};
use crate::sampling::low_discrepancy;

/// Number of low-discrepancy points probed by the non-singularity check.
pub const NONSINGULAR_SAMPLES: usize = 256;
/// Coefficient vectors with max-norm at or below this are singular.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error("coefficient {index}: {source}")]
    Parse { index: usize, source: ParseError },
    #[error("arity mismatch: {vars} variables but {coefficients} coefficients")]
    ArityMismatch { vars: usize, coefficients: usize },
    #[error("a form needs at least one variable")]
    NoVariables,
    #[error("duplicate variable name `{0}`")]
    DuplicateVariable(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("coefficient vector numerically zero at all sampled points")]
    Singular,
    #[error("point {0:?} lies outside the domain")]
    OutOfDomain(Vec<f64>),
    #[error("point has {got} coordinates, expected {expected}")]
    PointArity { expected: usize, got: usize },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("invalid substitution: {0}")]
    Substitution(String),
    #[error("form file line {line}: {message}")]
    FormFile { line: usize, message: String },
}

/// A closed axis-aligned box `Π [loᵢ, hiᵢ]` with `loᵢ < hiᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    bounds: Vec<(f64, f64)>,
}

impl BoxDomain {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self, FormError> {
        if bounds.is_empty() {
            return Err(FormError::InvalidBox("no intervals".into()));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(FormError::InvalidBox(format!(
                    "interval {} is [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        Ok(BoxDomain { bounds })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, FormError> {
        BoxDomain::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.bounds[i].0
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.bounds[i].1
    }

    pub fn width(&self, i: usize) -> f64 {
        self.bounds[i].1 - self.bounds[i].0
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    /// Closed-box membership with a relative slack of 1e-12 per edge, so
    /// points produced by rounding on the boundary still count as inside.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter().zip(&self.bounds).all(|(&x, &(lo, hi))| {
                let slack = 1e-12 * (hi - lo);
                x.is_finite() && x >= lo - slack && x <= hi + slack
            })
    }

    /// Maps a point of the unit cube affinely into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(t, (lo, hi))| lo + t * (hi - lo))
            .collect()
    }

    /// Grows every interval by `fraction` of its width on each side.
    pub fn inflate(&self, fraction: f64) -> BoxDomain {
        BoxDomain {
            bounds: self
                .bounds
                .iter()
                .map(|&(lo, hi)| {
                    let m = fraction * (hi - lo);
                    (lo - m, hi + m)
                })
                .collect(),
        }
    }

    /// All `2^n` corners, first axis varying slowest.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        if mask >> (n - 1 - i) & 1 == 1 {
                            self.hi(i)
                        } else {
                            self.lo(i)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// `[lo,hi] x [lo,hi] x ...` as used by form files.
    pub fn to_text(&self) -> String {
        self.bounds
            .iter()
            .map(|(lo, hi)| format!("[{lo:?},{hi:?}]"))
            .collect::<Vec<_>>()
            .join(" x ")
    }

    pub fn parse(text: &str) -> Result<Self, FormError> {
        let bad = |m: &str| FormError::InvalidBox(format!("{m} in `{}`", text.trim()));
        let mut bounds = Vec::new();
        let mut rest = text.trim();
        loop {
            rest = rest
                .strip_prefix('[')
                .ok_or_else(|| bad("expected `[`"))?;
            let close = rest.find(']').ok_or_else(|| bad("missing `]`"))?;
            let (lo, hi) = rest[..close]
                .split_once(',')
                .ok_or_else(|| bad("expected `lo,hi`"))?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad("bad lower bound"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad("bad upper bound"))?;
            bounds.push((lo, hi));
            rest = rest[close + 1..].trim_start();
            if rest.is_empty() {
                break;
            }
            rest = rest
                .strip_prefix('x')
                .or_else(|| rest.strip_prefix('×'))
                .ok_or_else(|| bad("expected `x` between intervals"))?
                .trim_start();
        }
        BoxDomain::new(bounds)
    }
}

/// `δξ = Σ Fᵢ(x) dxᵢ` on a box.
///
/// The coefficient Jacobian `∂Fᵢ/∂xⱼ` is differentiated symbolically once at
/// construction and cached.
#[derive(Debug, Clone)]
pub struct PfaffianForm {
    vars: Vec<String>,
    coefficients: Vec<Expr>,
    domain: BoxDomain,
    jacobian: Vec<Vec<Expr>>,
}

impl PfaffianForm {
    /// Builds a form from already-constructed coefficient expressions.
    ///
    /// Fails if the counts disagree, a coefficient references a variable that
    /// does not exist, or the coefficient vector vanishes (or cannot be
    /// evaluated) at every one of 256 low-discrepancy sample points.
    pub fn new(
        vars: Vec<String>,
        coefficients: Vec<Expr>,
        domain: BoxDomain,
    ) -> Result<Self, FormError> {
        let n = vars.len();
        if n == 0 {
            return Err(FormError::NoVariables);
        }
        if coefficients.len() != n || domain.dim() != n {
            return Err(FormError::ArityMismatch {
                vars: n,
                coefficients: if coefficients.len() != n {
                    coefficients.len()
                } else {
                    domain.dim()
                },
            });
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(FormError::DuplicateVariable(v.clone()));
            }
        }
        if let Some(c) = coefficients.iter().find(|c| c.min_arity() > n) {
            return Err(FormError::ArityMismatch {
                vars: n,
                coefficients: c.min_arity(),
            });
        }
        let jacobian = coefficients
            .iter()
            .map(|c| (0..n).map(|j| c.diff(j)).collect())
            .collect();
        let form = PfaffianForm {
            vars,
            coefficients,
            domain,
            jacobian,
        };
        let mut probes = low_discrepancy(&form.domain, NONSINGULAR_SAMPLES);
        probes.push(form.domain.center());
        if probes.iter().all(|p| form.is_singular_at(p, SINGULAR_TOL)) {
            return Err(FormError::Singular);
        }
        Ok(form)
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn coefficients(&self) -> &[Expr] {
        &self.coefficients
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Symbolic `∂Fᵢ/∂xⱼ`.
    pub fn partial(&self, i: usize, j: usize) -> &Expr {
        &self.jacobian[i][j]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    /// Same coefficients on a different box.
    pub fn with_domain(&self, domain: BoxDomain) -> Result<Self, FormError> {
        PfaffianForm::new(self.vars.clone(), self.coefficients.clone(), domain)
    }

    /// The coefficient vector at `p`, which must lie in the domain.
    pub fn coefficient_vector(&self, p: &[f64]) -> Result<Vec<f64>, FormError> {
        if p.len() != self.dim() {
            return Err(FormError::PointArity {
                expected: self.dim(),
                got: p.len(),
            });
        }
        if !self.domain.contains(p) {
            return Err(FormError::OutOfDomain(p.to_vec()));
        }
        Ok(self.eval_coefficients(p)?)
    }

    /// Coefficient vector without the domain check; used by integrators that
    /// may step slightly past the box.
    pub fn eval_coefficients(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.coefficients.iter().map(|c| c.eval(p)).collect()
    }

    pub fn eval_coefficients_into(&self, p: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (o, c) in out.iter_mut().zip(&self.coefficients) {
            *o = c.eval(p)?;
        }
        Ok(())
    }

    /// `out[i][j] = ∂Fᵢ/∂xⱼ (p)`.
    pub fn eval_jacobian(&self, p: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        self.jacobian
            .iter()
            .map(|row| row.iter().map(|d| d.eval(p)).collect())
            .collect()
    }

    /// True when `max |Fᵢ(p)| ≤ tol`. A point where a coefficient cannot be
    /// evaluated (a pole) also counts as singular.
    pub fn is_singular_at(&self, p: &[f64], tol: f64) -> bool {
        match self.eval_coefficients(p) {
            Ok(f) => f.iter().all(|v| v.abs() <= tol),
            Err(_) => true,
        }
    }

    /// Line integral `∫ Σ Fᵢ dxᵢ` along the polyline through `points`, with
    /// the midpoint rule on each segment.
    pub fn polyline_integral(&self, points: &[Vec<f64>]) -> Result<f64, EvalError> {
        let mut total = 0.0;
        let mut mid = vec![0.0; self.dim()];
        for w in points.windows(2) {
            for k in 0..self.dim() {
                mid[k] = 0.5 * (w[0][k] + w[1][k]);
            }
            let f = self.eval_coefficients(&mid)?;
            total += f
                .iter()
                .enumerate()
                .map(|(k, fk)| fk * (w[1][k] - w[0][k]))
                .sum::<f64>();
        }
        Ok(total)
    }

    /// Text in the form-file format accepted by [`parse_form_file`].
    pub fn to_form_file(&self) -> String {
        let mut out = format!("vars: {}\n", self.vars.join(", "));
        for (i, c) in self.coefficients.iter().enumerate() {
            let _ = writeln!(out, "F[{}] = {}", i + 1, c.display(&self.vars));
        }
        let _ = writeln!(out, "domain: {}", self.domain.to_text());
        out
    }
}

/// Parses coefficient texts against `vars` and builds the form.
pub fn make_form<S: AsRef<str>, T: AsRef<str>>(
    vars: &[S],
    coefficient_texts: &[T],
    domain: BoxDomain,
) -> Result<PfaffianForm, FormError> {
    if vars.len() != coefficient_texts.len() {
        return Err(FormError::ArityMismatch {
            vars: vars.len(),
            coefficients: coefficient_texts.len(),
        });
    }
    let coefficients = coefficient_texts
        .iter()
        .enumerate()
        .map(|(index, t)| {
            parse_expression(t.as_ref(), vars).map_err(|source| FormError::Parse {
                index: index + 1,
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let vars = vars.iter().map(|v| v.as_ref().to_string()).collect();
    PfaffianForm::new(vars, coefficients, domain)
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(code, _)| code).trim()
}

fn parse_var_list(text: &str, line: usize) -> Result<Vec<String>, FormError> {
    let vars: Vec<String> = text.split(',').map(|s| s.trim().to_string()).collect();
    for v in &vars {
        let ok = v
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !ok {
            return Err(FormError::FormFile {
                line,
                message: format!("invalid variable name `{v}`"),
            });
        }
    }
    Ok(vars)
}

/// Parses the form-file format:
///
/// ```text
/// vars: x1, x2, x3
/// F[1] = <expression>
/// ...
/// domain: [lo,hi] x [lo,hi] x ...
/// ```
///
/// `#` starts a comment. Coefficient lines may appear in any order but each
/// index must be given exactly once.
pub fn parse_form_file(text: &str) -> Result<PfaffianForm, FormError> {
    let mut vars: Option<Vec<String>> = None;
    let mut coeffs: Vec<Option<(usize, String)>> = Vec::new();
    let mut domain: Option<BoxDomain> = None;
    let err = |line: usize, message: String| FormError::FormFile { line, message };

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("vars:") {
            if vars.is_some() {
                return Err(err(line_no, "duplicate `vars:` line".into()));
            }
            let v = parse_var_list(rest, line_no)?;
            coeffs = vec![None; v.len()];
            vars = Some(v);
        } else if let Some(rest) = line.strip_prefix("domain:") {
            if domain.is_some() {
                return Err(err(line_no, "duplicate `domain:` line".into()));
            }
            domain = Some(BoxDomain::parse(rest).map_err(|e| err(line_no, e.to_string()))?);
        } else if let Some(rest) = line.strip_prefix("F[") {
            let n = vars
                .as_ref()
                .ok_or_else(|| err(line_no, "coefficient before `vars:` line".into()))?
                .len();
            let (idx, rhs) = rest
                .split_once(']')
                .ok_or_else(|| err(line_no, "expected `F[i] = expression`".into()))?;
            let idx: usize = idx
                .trim()
                .parse()
                .map_err(|_| err(line_no, format!("bad coefficient index `{idx}`")))?;
            if idx == 0 || idx > n {
                return Err(err(line_no, format!("coefficient index {idx} not in 1..={n}")));
            }
            let rhs = rhs
                .trim_start()
                .strip_prefix('=')
                .ok_or_else(|| err(line_no, "expected `=` after `F[i]`".into()))?;
            if coeffs[idx - 1].is_some() {
                return Err(err(line_no, format!("coefficient F[{idx}] given twice")));
            }
            coeffs[idx - 1] = Some((line_no, rhs.trim().to_string()));
        } else {
            return Err(err(line_no, format!("unrecognized line `{line}`")));
        }
    }

    let vars = vars.ok_or_else(|| err(0, "missing `vars:` line".into()))?;
    let domain = domain.ok_or_else(|| err(0, "missing `domain:` line".into()))?;
    let mut exprs = Vec::with_capacity(vars.len());
    for (i, c) in coeffs.into_iter().enumerate() {
        let (line_no, text) = c.ok_or_else(|| err(0, format!("missing coefficient F[{}]", i + 1)))?;
        let e = parse_expression(&text, &vars).map_err(|source| FormError::Parse {
            index: i + 1,
            source,
        });
        exprs.push(e.map_err(|e| err(line_no, e.to_string()))?);
    }
    PfaffianForm::new(vars, exprs, domain)
}

/// A change of variables `xᵢ = xᵢ(x̄₁, …, x̄ₙ)`.
///
/// `domain` is the box in the new coordinates on which the pulled-back form
/// lives; `base` is a point of it at which the map must be locally
/// invertible.
#[derive(Debug, Clone)]
pub struct Substitution {
    new_vars: Vec<String>,
    old_in_new: Vec<Expr>,
    jacobian: Vec<Vec<Expr>>,
    domain: BoxDomain,
    base: Vec<f64>,
}

impl Substitution {
    pub fn new(
        new_vars: Vec<String>,
        old_in_new: Vec<Expr>,
        domain: BoxDomain,
        base: Vec<f64>,
    ) -> Result<Self, FormError> {
        let n = new_vars.len();
        if old_in_new.len() != n || domain.dim() != n || base.len() != n {
            return Err(FormError::Substitution(format!(
                "{n} new variables, {} maps, domain of dimension {}, base of length {}",
                old_in_new.len(),
                domain.dim(),
                base.len()
            )));
        }
        if old_in_new.iter().any(|e| e.min_arity() > n) {
            return Err(FormError::Substitution(
                "map references an unknown variable".into(),
            ));
        }
        let jacobian = old_in_new
            .iter()
            .map(|x| (0..n).map(|j| x.diff(j)).collect())
            .collect();
        let s = Substitution {
            new_vars,
            old_in_new,
            jacobian,
            domain,
            base,
        };
        let j = s.jacobian_at(&s.base)?;
        let scale: f64 = j.column_iter().map(|c| c.norm().max(1e-300)).product();
        let det = j.determinant();
        if !(det.abs() > 1e-10 * scale) {
            return Err(FormError::Substitution(format!(
                "Jacobian is singular at the base point (det = {det:e})"
            )));
        }
        Ok(s)
    }

    /// Parses one expression per old variable, written in the new variables.
    pub fn from_texts<S: AsRef<str>>(
        new_vars: &[S],
        maps: &[S],
        domain: BoxDomain,
        base: Vec<f64>,
    ) -> Result<Self, FormError> {
        let exprs = maps
            .iter()
            .enumerate()
            .map(|(index, t)| {
                parse_expression(t.as_ref(), new_vars).map_err(|source| FormError::Parse {
                    index: index + 1,
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let names = new_vars.iter().map(|v| v.as_ref().to_string()).collect();
        Substitution::new(names, exprs, domain, base)
    }

    /// Affine map `x = A x̄ + b`.
    pub fn linear(
        new_vars: Vec<String>,
        a: &DMatrix<f64>,
        b: &[f64],
        domain: BoxDomain,
        base: Vec<f64>,
    ) -> Result<Self, FormError> {
        let n = new_vars.len();
        let maps = (0..n)
            .map(|i| {
                let mut e = Expr::Const(b[i]);
                for j in 0..n {
                    if a[(i, j)] != 0.0 {
                        e = e + Expr::Const(a[(i, j)]) * Expr::Var(j);
                    }
                }
                e.simplify()
            })
            .collect();
        Substitution::new(new_vars, maps, domain, base)
    }

    /// Affine map `x = A x̄ + c` centred on `target`: `c` is the centre of
    /// `target`, and the new domain is the cube `[-r, r]ⁿ` with `r` chosen so
    /// that its image stays inside `target`. The base point is the origin.
    pub fn linear_onto(
        new_vars: Vec<String>,
        a: &DMatrix<f64>,
        target: &BoxDomain,
    ) -> Result<Self, FormError> {
        let n = target.dim();
        let row_norm = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);
        let half = (0..n)
            .map(|i| 0.5 * target.width(i))
            .fold(f64::INFINITY, f64::min);
        if !(row_norm > 0.0) {
            return Err(FormError::Substitution("zero linear map".into()));
        }
        let r = half / row_norm;
        let domain = BoxDomain::cube(n, -r, r)?;
        Substitution::linear(new_vars, a, &target.center(), domain, vec![0.0; n])
    }

    pub fn new_vars(&self) -> &[String] {
        &self.new_vars
    }

    pub fn maps(&self) -> &[Expr] {
        &self.old_in_new
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// Old coordinates of the new-coordinate point `p`.
    pub fn apply(&self, p: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.old_in_new.iter().map(|x| x.eval(p)).collect()
    }

    /// `J[(i, j)] = ∂xᵢ/∂x̄ⱼ` at `p`, from the symbolic derivatives.
    pub fn jacobian_at(&self, p: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        let n = self.new_vars.len();
        let mut j = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                j[(r, c)] = self.jacobian[r][c].eval(p)?;
            }
        }
        Ok(j)
    }
}

/// Parses a substitution file for a form in `old_vars`:
///
/// ```text
/// vars: u, v, w
/// x = <expression in u, v, w>
/// ...
/// domain: [lo,hi] x [lo,hi] x ...
/// base: 0, 0, 0
/// ```
///
/// Every old variable needs exactly one `name = expression` line. `base` is
/// optional and defaults to the centre of the domain.
pub fn parse_substitution_file<S: AsRef<str>>(text: &str, old_vars: &[S]) -> Result<Substitution, FormError> {
    let err = |line: usize, message: String| FormError::FormFile { line, message };
    let mut new_vars: Option<Vec<String>> = None;
    let mut domain: Option<BoxDomain> = None;
    let mut base: Option<Vec<f64>> = None;
    let mut maps: Vec<Option<(usize, String)>> = vec![None; old_vars.len()];

    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("vars:") {
            if new_vars.is_some() {
                return Err(err(line_no, "duplicate `vars:` line".into()));
            }
            new_vars = Some(parse_var_list(rest, line_no)?);
        } else if let Some(rest) = line.strip_prefix("domain:") {
            domain = Some(BoxDomain::parse(rest).map_err(|e| err(line_no, e.to_string()))?);
        } else if let Some(rest) = line.strip_prefix("base:") {
            let b: Result<Vec<f64>, _> = rest.split(',').map(|t| t.trim().parse::<f64>()).collect();
            base = Some(b.map_err(|_| err(line_no, format!("bad base point `{}`", rest.trim())))?);
        } else if let Some((name, rhs)) = line.split_once('=') {
            let name = name.trim();
            let i = old_vars
                .iter()
                .position(|v| v.as_ref() == name)
                .ok_or_else(|| err(line_no, format!("`{name}` is not a variable of the form")))?;
            if maps[i].is_some() {
                return Err(err(line_no, format!("`{name}` given twice")));
            }
            maps[i] = Some((line_no, rhs.trim().to_string()));
        } else {
            return Err(err(line_no, format!("unrecognized line `{line}`")));
        }
    }

    let new_vars = new_vars.ok_or_else(|| err(0, "missing `vars:` line".into()))?;
    let domain = domain.ok_or_else(|| err(0, "missing `domain:` line".into()))?;
    let base = base.unwrap_or_else(|| domain.center());
    let mut exprs = Vec::with_capacity(maps.len());
    for (i, m) in maps.into_iter().enumerate() {
        let (line_no, text) = m.ok_or_else(|| err(0, format!("missing map for `{}`", old_vars[i].as_ref())))?;
        exprs.push(parse_expression(&text, &new_vars).map_err(|e| err(line_no, e.to_string()))?);
    }
    Substitution::new(new_vars, exprs, domain, base)
}

/// Pulls `form` back through `s`: `F̄ⱼ = Σᵢ (∂xᵢ/∂x̄ⱼ) (Fᵢ ∘ s)`, built
/// symbolically over the new variables and the substitution's domain.
pub fn pullback(form: &PfaffianForm, s: &Substitution) -> Result<PfaffianForm, FormError> {
    let n = form.dim();
    if s.new_vars.len() != n {
        return Err(FormError::Substitution(format!(
            "form has {n} variables, substitution has {}",
            s.new_vars.len()
        )));
    }
    let composed: Vec<Expr> = form
        .coefficients
        .iter()
        .map(|f| f.substitute(&s.old_in_new))
        .collect();
    let coefficients = (0..n)
        .map(|j| {
            let mut acc = Expr::Const(0.0);
            for (i, fi) in composed.iter().enumerate() {
                acc = acc + s.jacobian[i][j].clone() * fi.clone();
            }
            acc.simplify()
        })
        .collect();
    PfaffianForm::new(s.new_vars.clone(), coefficients, s.domain.clone()).map_err(|e| match e {
        FormError::Singular => FormError::Substitution(
            "pulled-back coefficients are undefined or zero on the new domain".into(),
        ),
        other => other,
    })
}
