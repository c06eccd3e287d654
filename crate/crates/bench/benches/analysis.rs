use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use pfaff_core::catalog;
use pfaff_core::factor::{build_potential_2var, global_factorization, GlobalConfig, Potential2Config};
use pfaff_core::integrability::{classify, DEFAULT_TOL};
use pfaff_core::reach::{explore, ReachConfig};
use pfaff_core::sampling::SamplerConfig;

fn classification(c: &mut Criterion) {
    let forms: Vec<_> = catalog::all().into_iter().map(|e| e.form).collect();
    let sampler = SamplerConfig::default();
    c.bench_function("classify_catalog", |b| {
        b.iter(|| {
            for f in &forms {
                black_box(classify(f, &sampler, DEFAULT_TOL));
            }
        })
    });
}

fn factors(c: &mut Criterion) {
    let gas = catalog::get("ideal_gas_heat").unwrap().form;
    let cfg = Potential2Config {
        verify_grid: 9,
        ..Potential2Config::default()
    };
    c.bench_function("factor2_ideal_gas", |b| b.iter(|| black_box(build_potential_2var(&gas, &cfg).unwrap())));

    let scaled = catalog::get("scaled_exact").unwrap().form;
    let mut gcfg = GlobalConfig::new(2);
    gcfg.verify_grid = 5;
    c.bench_function("factor_global_scaled_exact", |b| b.iter(|| black_box(global_factorization(&scaled, &gcfg).unwrap())));
}

fn exploration(c: &mut Criterion) {
    let contact = catalog::get("contact").unwrap();
    let cfg = ReachConfig {
        budget: 20_000,
        ..ReachConfig::default()
    };
    c.bench_function("explore_contact_20k_steps", |b| {
        b.iter(|| black_box(explore(&contact.form, &contact.probe(), &cfg).unwrap()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = classification, factors, exploration
}
criterion_main!(benches);
