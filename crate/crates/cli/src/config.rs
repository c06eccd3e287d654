use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pfaff_core::catalog;
use pfaff_core::form::{parse_form_file, PfaffianForm};
use pfaff_core::ode::OdeOptions;

/// Failure classes, each with its own message prefix and exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flag values or inconsistent arguments.
    Input(String),
    /// A form or substitution file that does not parse or validate.
    Form(String),
    Io(String),
    /// The analysis ran but did not meet an `--expect`-style requirement.
    Analysis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Analysis(_) => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Form(m) => write!(f, "form error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Analysis(m) => write!(f, "analysis failure: {m}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub rtol: f64,
    pub atol: f64,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [("--tol", self.tol), ("--rtol", self.rtol), ("--atol", self.atol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Input(format!("{name} must be positive, got {v}")));
            }
        }
        if self.samples == 0 {
            return Err(CliError::Input("--samples must be at least 1".into()));
        }
        Ok(())
    }

    pub fn ode(&self) -> OdeOptions {
        OdeOptions {
            rtol: self.rtol,
            atol: self.atol,
            ..OdeOptions::default()
        }
    }

    /// Writes the report to `--out`, or stdout.
    pub fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
            None => {
                let mut stdout = io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))
            }
        }
    }
}

pub fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Reads `PFAFF_THREADS`: unset or `0` means one thread per core.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var("PFAFF_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("PFAFF_THREADS must be a non-negative integer, got `{v}`"))),
    }
}

/// A loaded form and, for catalog entries, the entry.
pub struct Loaded {
    pub form: PfaffianForm,
    pub entry: Option<catalog::CatalogEntry>,
}

/// `catalog:<name>` names a built-in entry; anything else is a form file.
pub fn load_form(arg: &str) -> Result<Loaded, CliError> {
    if let Some(name) = arg.strip_prefix("catalog:") {
        let entry = catalog::get(name).ok_or_else(|| {
            CliError::Input(format!("no catalog entry `{name}` (known: {})", catalog::names().join(", ")))
        })?;
        return Ok(Loaded {
            form: entry.form.clone(),
            entry: Some(entry),
        });
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let form = parse_form_file(&text).map_err(|e| CliError::Form(format!("{}: {e}", path.display())))?;
    Ok(Loaded { form, entry: None })
}

pub fn parse_point(text: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let p: Vec<f64> = text
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Input(format!("bad point `{text}`")))?;
    if p.len() != dim {
        return Err(CliError::Input(format!("point `{text}` has {} coordinates, the form has {dim}", p.len())));
    }
    Ok(p)
}

/// A variable given by name or 1-based index.
pub fn resolve_var(form: &PfaffianForm, text: &str) -> Result<usize, CliError> {
    if let Some(i) = form.var_index(text) {
        return Ok(i);
    }
    match text.parse::<usize>() {
        Ok(k) if (1..=form.dim()).contains(&k) => Ok(k - 1),
        _ => Err(CliError::Input(format!(
            "unknown variable `{text}` (variables: {})",
            form.vars().join(", ")
        ))),
    }
}
