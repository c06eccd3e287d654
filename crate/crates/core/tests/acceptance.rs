//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any fails. Run with `cargo test -p pfaff-core --test acceptance`.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pfaff_core::catalog;
use pfaff_core::factor::{build_potential_2var, global_factorization, path_independence, GlobalConfig, Potential2Config};
use pfaff_core::form::{make_form, BoxDomain, PfaffianForm, Substitution};
use pfaff_core::integrability::{clairaut_component, classify, curl_triple_product, invariance_check, max_tensor_over, Class, DEFAULT_TOL};
use pfaff_core::ode::OdeOptions;
use pfaff_core::reach::{estimate_dimension, explore, surrounding_line_scan, ReachConfig, ReachKind};
use pfaff_core::report::to_json;
use pfaff_core::sampling::{grid, SamplerConfig};

const NAMES: [&str; 5] = ["x1", "x2", "x3", "x4", "x5"];

/// Polynomial as a list of (coefficient, exponents).
#[derive(Clone)]
struct Poly(Vec<(f64, Vec<u32>)>);

impl Poly {
    fn random(rng: &mut ChaCha8Rng, n: usize, degree: u32) -> Poly {
        let mut terms = Vec::new();
        // every monomial of total degree <= `degree`, each kept with probability 1/2
        let mut exps = vec![0u32; n];
        loop {
            let total: u32 = exps.iter().sum();
            if total <= degree && rng.random::<f64>() < 0.5 {
                terms.push((rng.random_range(-2.0..=2.0), exps.clone()));
            }
            let mut k = 0;
            loop {
                if k == n {
                    return Poly(terms);
                }
                exps[k] += 1;
                if exps.iter().sum::<u32>() <= degree {
                    break;
                }
                exps[k] = 0;
                k += 1;
            }
        }
    }

    fn diff(&self, i: usize) -> Poly {
        Poly(
            self.0
                .iter()
                .filter(|(_, e)| e[i] > 0)
                .map(|(c, e)| {
                    let mut e2 = e.clone();
                    e2[i] -= 1;
                    (c * e[i] as f64, e2)
                })
                .collect(),
        )
    }

    fn text(&self) -> String {
        if self.0.is_empty() {
            return "0".into();
        }
        self.0
            .iter()
            .map(|(c, e)| {
                let mut s = format!("({c:e})");
                for (k, &p) in e.iter().enumerate() {
                    if p > 0 {
                        s.push_str(&format!("*{}^{}", NAMES[k], p));
                    }
                }
                s
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

fn cube(n: usize) -> BoxDomain {
    BoxDomain::cube(n, -1.0, 1.0).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion_random_forms(scaled: bool) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(if scaled { 2 } else { 1 });
    let count = if scaled { 100 } else { 200 };
    let mut worst = 0.0_f64;
    let mut built = 0;
    let points = SamplerConfig::interior_only(64);
    while built < count {
        let n = rng.random_range(3..=5);
        let psi = Poly::random(&mut rng, n, 3);
        let grads: Vec<Poly> = (0..n).map(|i| psi.diff(i)).collect();
        let coeffs: Vec<String> = if scaled {
            let q = Poly::random(&mut rng, n, 2);
            grads.iter().map(|g| format!("exp({})*({})", q.text(), g.text())).collect()
        } else {
            grads.iter().map(Poly::text).collect()
        };
        let Ok(f) = make_form(&NAMES[..n], &coeffs, cube(n)) else {
            // a constant or singular draw: try another
            continue;
        };
        built += 1;
        let (max, used) = max_tensor_over(&f, &points.points(f.domain()));
        if used == 0 {
            return Outcome {
                pass: false,
                detail: "a form had no usable samples".into(),
            };
        }
        worst = worst.max(max);
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!("{count} forms, max normalized |R| = {worst:.3e}"),
    }
}

fn contact() -> PfaffianForm {
    catalog::get("contact").unwrap().form
}

fn criterion_contact_witness() -> Outcome {
    let f = contact();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_r = 0.0_f64;
    let mut worst_curl = 0.0_f64;
    for _ in 0..1000 {
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect();
        // by hand: F = (-y, 0, 1), the only non-zero partial is dF1/dy = -1,
        // so R_123 = F1 (0 - 0) + F2 (0 - 0) + F3 (0 - (-1)) = 1
        let r = clairaut_component(&f, 0, 1, 2, &p).unwrap();
        let c = curl_triple_product(&f, &p).unwrap();
        worst_r = worst_r.max((r - 1.0).abs());
        worst_curl = worst_curl.max((r - c).abs());
    }
    let class = classify(&f, &SamplerConfig::default(), DEFAULT_TOL).class;
    Outcome {
        pass: worst_r <= 1e-12 && worst_curl <= 1e-12 && class == Class::NonIntegrable,
        detail: format!("|R-1| max {worst_r:.1e}, |R-curl| max {worst_curl:.1e}, class {class}"),
    }
}

/// Bisection for `g(t) = level` on `[a, b]`, assuming a sign change.
fn solve_level(g: impl Fn(f64) -> Option<f64>, level: f64, mut a: f64, mut b: f64) -> Option<f64> {
    let mut ga = g(a)? - level;
    let gb = g(b)? - level;
    if ga.signum() == gb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let gm = g(m)? - level;
        if gm == 0.0 || b - a < 1e-14 {
            return Some(m);
        }
        if gm.signum() == ga.signum() {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

fn criterion_ideal_gas() -> Outcome {
    let entry = catalog::get("ideal_gas_heat").unwrap();
    let f = &entry.form;
    let r = build_potential_2var(f, &Potential2Config::default()).unwrap();
    let entropy = |p: &[f64]| 1.5 * p[0].ln() + p[1].ln();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = 0;
    let mut worst = 0.0_f64;
    let mut attempts = 0;
    while pairs < 100 && attempts < 10_000 {
        attempts += 1;
        let p = [rng.random_range(1.0..=2.0), rng.random_range(1.0..=2.0)];
        let Some(level) = r.psi(&p) else { continue };
        let t = rng.random_range(1.0..=2.0);
        let Some(v) = solve_level(|v| r.psi(&[t, v]), level, 1.0, 2.0) else {
            continue;
        };
        pairs += 1;
        worst = worst.max((entropy(&p) - entropy(&[t, v])).abs());
    }
    let s = &r.stats;
    Outcome {
        pass: pairs == 100 && worst <= 1e-5 && s.residual_max <= 1e-5 && s.evaluated_points > 0,
        detail: format!(
            "{pairs} pairs, max |dS| {worst:.2e}; residual_max {:.2e} over {} points ({} skipped)",
            s.residual_max, s.evaluated_points, s.skipped_points
        ),
    }
}

fn criterion_global() -> Outcome {
    let entry = catalog::get("scaled_exact").unwrap();
    let f = &entry.form;
    let r = global_factorization(f, &GlobalConfig::new(2)).unwrap();
    let reference = |p: &[f64]| p[0] * p[1] + p[2];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs = 0;
    let mut worst = 0.0_f64;
    let mut attempts = 0;
    while pairs < 100 && attempts < 10_000 {
        attempts += 1;
        let p: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..=0.5)).collect();
        let Some(level) = r.psi(&p) else { continue };
        let (x, y) = (rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5));
        let Some(z) = solve_level(|z| r.psi(&[x, y, z]), level, -0.5, 0.5) else {
            continue;
        };
        pairs += 1;
        worst = worst.max((reference(&p) - reference(&[x, y, z])).abs());
    }
    let targets = grid(f.domain(), 5);
    let base = f.domain().center();
    let ode = OdeOptions::default();
    let integrable = path_independence(f, 2, &base, &targets, 1.0, &ode).unwrap();
    let c = contact();
    let contact_gap = path_independence(&c, 2, &c.domain().center(), &grid(c.domain(), 5), 1.0, &ode).unwrap();
    let s = &r.stats;
    Outcome {
        pass: s.residual_max <= 1e-5
            && s.evaluated_points > 0
            && pairs == 100
            && worst <= 1e-5
            && integrable.evaluated > 0
            && integrable.max_discrepancy <= 1e-6
            && contact_gap.max_discrepancy > 1e-2,
        detail: format!(
            "residual_max {:.2e} ({} pts); {pairs} level pairs max {worst:.2e}; staircases {:.2e} ({} targets), contact {:.3}",
            s.residual_max, s.evaluated_points, integrable.max_discrepancy, integrable.evaluated, contact_gap.max_discrepancy
        ),
    }
}

fn probe_report() -> (Outcome, String) {
    let cfg = ReachConfig::default();
    let mut ok = true;
    let mut lines = Vec::new();
    let mut reports = Vec::new();
    for e in catalog::all() {
        let class = classify(&e.form, &SamplerConfig::default(), DEFAULT_TOL).class;
        let sample = explore(&e.form, &e.probe(), &cfg).unwrap();
        let v = estimate_dimension(&sample, cfg.threshold, e.psi.as_ref());
        let want = if class == Class::NonIntegrable {
            ReachKind::FullDimensional
        } else {
            ReachKind::CodimensionOneLike
        };
        let thin = !class.is_integrable() || e.psi.is_none() || v.thickness <= 1e-5;
        ok &= v.kind == want && thin;
        lines.push(format!("{}:{}({:.1e})", e.name(), v.kind.as_str(), v.curvature_corrected_ratio));
        if e.psi.is_some() {
            lines.push(format!("thick {:.1e}", v.thickness));
        }
        reports.push(serde_json::json!({ "name": e.name(), "sample": sample, "verdict": v }));
    }
    (
        Outcome {
            pass: ok,
            detail: lines.join(" "),
        },
        to_json(&reports).unwrap(),
    )
}

fn scan_report() -> (Outcome, String) {
    let cfg = ReachConfig::default();
    let cyl = catalog::get("rolling_cylinder").unwrap();
    let a = surrounding_line_scan(&cyl.form, &cyl.probe(), 0, &cfg).unwrap();
    let c = catalog::get("contact").unwrap();
    let b = surrounding_line_scan(&c.form, &c.probe(), 2, &cfg).unwrap();
    (
        Outcome {
            pass: a.fraction_reached <= 1.0 / 32.0 && b.fraction_reached >= 31.0 / 32.0,
            detail: format!(
                "rolling_cylinder {}/32, contact {}/32",
                (a.fraction_reached * 32.0).round(),
                (b.fraction_reached * 32.0).round()
            ),
        },
        to_json(&[a, b]).unwrap(),
    )
}

fn random_invertible(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
        let sv = a.clone().singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if lo > 0.05 * hi {
            return a;
        }
    }
}

fn nonlinear_substitution(e: &catalog::CatalogEntry, k: usize) -> Substitution {
    let n = e.form.dim();
    let d = e.form.domain();
    let new_vars: Vec<String> = (0..n).map(|i| format!("u{}", i + 1)).collect();
    let r = (0..n).map(|i| d.width(i)).fold(f64::INFINITY, f64::min) * 0.2;
    let c = d.center();
    let a = 0.1 + 0.05 * k as f64;
    let maps: Vec<String> = (0..n)
        .map(|i| {
            let next = &new_vars[(i + 1) % n];
            let wobble = match k % 3 {
                0 => format!("{a}*sin({next})"),
                1 => format!("{a}*{next}^2"),
                _ => format!("{a}*(exp({next}/4) - 1)"),
            };
            format!("{} + {} + {}", c[i], new_vars[i], wobble)
        })
        .collect();
    let domain = BoxDomain::cube(n, -r, r).unwrap();
    Substitution::from_texts(&new_vars, &maps, domain, vec![0.0; n]).unwrap()
}

fn criterion_invariance() -> Outcome {
    let entries = catalog::all();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let sampler = SamplerConfig::default();
    let mut failures = Vec::new();
    let mut checked = 0;
    for k in 0..50 {
        let e = &entries[rng.random_range(0..entries.len())];
        let n = e.form.dim();
        let a = random_invertible(&mut rng, n);
        let vars: Vec<String> = (0..n).map(|i| format!("u{}", i + 1)).collect();
        let s = Substitution::linear_onto(vars, &a, e.form.domain()).unwrap();
        let r = invariance_check(&e.form, &s, &sampler, DEFAULT_TOL).unwrap();
        checked += 1;
        if !r.nullity_preserved {
            failures.push(format!("linear#{k}:{}", e.name()));
        }
    }
    for k in 0..10 {
        let e = &entries[k % entries.len()];
        let s = nonlinear_substitution(e, k);
        let r = invariance_check(&e.form, &s, &sampler, DEFAULT_TOL).unwrap();
        checked += 1;
        if !r.nullity_preserved {
            failures.push(format!("nonlinear#{k}:{}", e.name()));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{checked} substitutions, failures: {failures:?}"),
    }
}

fn main() {
    // `cargo test` passes harness flags; listing requests get an empty list
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut all_ok = true;
    // criteria 1 and 6 carry runtime limits
    let limit = |id: &str| match id {
        "1" => 30.0,
        "6" => 120.0,
        _ => f64::INFINITY,
    };
    let mut report = |id: &str, what: &str, t: Instant, mut o: Outcome| {
        if t.elapsed().as_secs_f64() > limit(id) {
            o.pass = false;
            o.detail.push_str(&format!("; over the {}s limit", limit(id)));
        }
        all_ok &= o.pass;
        println!(
            "[{}] {id} {what} ({:.1}s): {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    };

    let t = Instant::now();
    report("1", "exact forms have vanishing tensor", t, criterion_random_forms(false));
    let t = Instant::now();
    report("2", "scaled exact forms have vanishing tensor", t, criterion_random_forms(true));
    let t = Instant::now();
    report("3", "contact form witness", t, criterion_contact_witness());
    let t = Instant::now();
    report("4", "two-variable potential of the ideal-gas heat", t, criterion_ideal_gas());
    let t = Instant::now();
    report("5", "global potential and staircase diagnostic", t, criterion_global());
    let t = Instant::now();
    let (probe, probe_json) = probe_report();
    report("6", "reachability probe matches classification", t, probe);
    let t = Instant::now();
    let (scan, scan_json) = scan_report();
    report("7", "surrounding-line scan", t, scan);
    let t = Instant::now();
    report("8", "nullity invariant under substitution", t, criterion_invariance());
    let t = Instant::now();
    let same = probe_report().1 == probe_json && scan_report().1 == scan_json;
    report(
        "9",
        "deterministic probe and scan reports",
        t,
        Outcome {
            pass: same,
            detail: format!("{} + {} bytes, identical: {same}", probe_json.len(), scan_json.len()),
        },
    );

    if !all_ok {
        std::process::exit(1);
    }
}
