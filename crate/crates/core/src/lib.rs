pub mod catalog;
pub mod expr;
pub mod factor;
pub mod form;
pub mod integrability;
pub mod ode;
pub mod reach;
pub mod report;
pub mod sampling;

pub use expr::{parse_expression, Expr};
pub use form::{make_form, parse_form_file, pullback, BoxDomain, FormError, PfaffianForm, Substitution};
pub use integrability::{classify, Class, Verdict};
pub use reach::{estimate_dimension, explore, steer_step, surrounding_line_scan, ReachConfig};
pub use sampling::SamplerConfig;
