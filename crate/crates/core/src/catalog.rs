//! Named reference forms with known classification and, where one exists,
//! a closed-form integrating factor.

use serde::Serialize;

use crate::expr::{parse_expression, Expr};
use crate::form::{make_form, BoxDomain, PfaffianForm};
use crate::integrability::Class;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntrySpec {
    pub name: &'static str,
    pub vars: &'static [&'static str],
    pub coefficients: &'static [&'static str],
    pub domain: &'static [(f64, f64)],
    pub expected: Class,
    pub psi: Option<&'static str>,
    pub mu: Option<&'static str>,
    /// Where reachability probes start.
    pub probe: &'static [f64],
    pub note: &'static str,
}

const ENTRIES: &[EntrySpec] = &[
    EntrySpec {
        name: "exact_3var",
        vars: &["x", "y", "z"],
        coefficients: &["1", "1", "1"],
        domain: &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        expected: Class::Exact,
        psi: Some("x + y + z"),
        mu: Some("1"),
        probe: &[0.0, 0.0, 0.0],
        note: "differential of x + y + z",
    },
    EntrySpec {
        name: "product_exact",
        vars: &["x", "y"],
        coefficients: &["y", "x"],
        domain: &[(-1.0, 1.0), (-1.0, 1.0)],
        expected: Class::Exact,
        psi: Some("x*y"),
        mu: Some("1"),
        probe: &[0.5, 0.5],
        note: "differential of x y",
    },
    EntrySpec {
        name: "scaled_exact",
        vars: &["x", "y", "z"],
        coefficients: &["exp(z)*y", "exp(z)*x", "exp(z)"],
        domain: &[(-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5)],
        expected: Class::LocallyIntegrable,
        psi: Some("x*y + z"),
        mu: Some("exp(z)"),
        probe: &[0.0, 0.0, 0.0],
        note: "exp(z) times the differential of x y + z",
    },
    EntrySpec {
        name: "contact",
        vars: &["x", "y", "z"],
        coefficients: &["-y", "0", "1"],
        domain: &[(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0)],
        expected: Class::NonIntegrable,
        psi: None,
        mu: None,
        probe: &[0.0, 0.0, 0.0],
        note: "standard contact form dz - y dx",
    },
    EntrySpec {
        name: "ideal_gas_heat",
        vars: &["T", "V"],
        coefficients: &["1.5", "T/V"],
        domain: &[(1.0, 2.0), (1.0, 2.0)],
        expected: Class::LocallyIntegrable,
        psi: Some("1.5*log(T) + log(V)"),
        mu: Some("T"),
        probe: &[1.5, 1.5],
        note: "reversible heat of a monatomic ideal gas in units n R = 1; T is the factor, entropy the potential",
    },
    EntrySpec {
        name: "rolling_cylinder",
        vars: &["x", "theta"],
        coefficients: &["1", "-1"],
        domain: &[(-1.0, 1.0), (-1.0, 1.0)],
        expected: Class::Exact,
        psi: Some("x - theta"),
        mu: Some("1"),
        probe: &[0.0, 0.0],
        note: "rolling without slipping of a unit cylinder, dx - dtheta",
    },
    EntrySpec {
        name: "ray_form",
        vars: &["x", "y"],
        coefficients: &["y", "-x"],
        domain: &[(1.0, 2.0), (1.0, 2.0)],
        expected: Class::LocallyIntegrable,
        psi: Some("x/y"),
        mu: Some("y^2"),
        probe: &[1.5, 1.5],
        note: "y dx - x dy, whose null curves are rays from the origin",
    },
];

/// A built catalog entry.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub spec: EntrySpec,
    pub form: PfaffianForm,
    pub psi: Option<Expr>,
    pub mu: Option<Expr>,
}

impl CatalogEntry {
    pub fn name(&self) -> &'static str {
        self.spec.name
    }

    pub fn expected(&self) -> Class {
        self.spec.expected
    }

    pub fn probe(&self) -> Vec<f64> {
        self.spec.probe.to_vec()
    }
}

pub fn names() -> Vec<&'static str> {
    ENTRIES.iter().map(|e| e.name).collect()
}

pub fn specs() -> &'static [EntrySpec] {
    ENTRIES
}

fn build(spec: &EntrySpec) -> CatalogEntry {
    // entries are fixed literals; a failure here is a programming error
    let domain = BoxDomain::new(spec.domain.to_vec()).expect("catalog domain");
    let form = make_form(spec.vars, spec.coefficients, domain).expect("catalog form");
    let parse = |s: Option<&str>| s.map(|t| parse_expression(t, spec.vars).expect("catalog reference"));
    CatalogEntry {
        spec: *spec,
        form,
        psi: parse(spec.psi),
        mu: parse(spec.mu),
    }
}

pub fn get(name: &str) -> Option<CatalogEntry> {
    ENTRIES.iter().find(|e| e.name == name).map(build)
}

pub fn all() -> Vec<CatalogEntry> {
    ENTRIES.iter().map(build).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_builds() {
        let all = all();
        assert_eq!(all.len(), 7);
        for e in &all {
            assert_eq!(e.probe().len(), e.form.dim());
            assert!(e.form.domain().contains(&e.probe()), "{}", e.name());
            assert_eq!(e.psi.is_some(), e.mu.is_some());
        }
        assert!(get("contact").is_some());
        assert!(get("nope").is_none());
    }
}
