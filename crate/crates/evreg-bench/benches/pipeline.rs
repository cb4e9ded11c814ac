//! Criterion benchmarks along the grain of a Monte Carlo replication:
//! design-state evaluation, log-likelihood with derivatives, a full
//! maximum-likelihood fit, the five-statistic test report, and the
//! likelihood-ratio adjustment on its own.

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use evreg::estimate::{fit_mle, Hypothesis};
use evreg::inference::compute_tests;
use evreg::likelihood::{expected_info, loglik, observed_info, score};
use evreg::model::{design_state, sample_response};
use evreg::rng::Stream;
use evreg::skovgaard::adjusted_lr;
use evreg::{Family, Link, ModelSpec, ObservationSet, PredictorExpr, Theta};

/// Linear five-parameter location with constant log dispersion, the shape
/// used throughout the simulation studies.
fn study_model() -> ModelSpec {
    let params = ["b1", "b2", "b3", "b4", "b5"];
    let covs = ["x2", "x3", "x4", "x5"];
    let loc = PredictorExpr::parse(
        "b1 + b2*x2 + b3*x3 + b4*x4 + b5*x5",
        &params,
        &covs,
    )
    .unwrap();
    let disp = PredictorExpr::parse("g1", &["g1"], &covs).unwrap();
    ModelSpec::new(Family::EvMax, loc, Link::Identity, disp, Link::Log).unwrap()
}

fn truth() -> Theta {
    Theta::new(vec![1.0, 0.0, 1.0, 6.0, -3.0], vec![0.1f64.ln()])
}

fn dataset(model: &ModelSpec, n: usize, seed: u64) -> ObservationSet {
    let mut cov_rng = Stream::new(seed, 1);
    let names = ["x2", "x3", "x4", "x5"];
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for name in names {
        let col: Vec<f64> = (0..n).map(|_| cov_rng.uniform() - 0.5).collect();
        columns.insert(name.to_string(), col);
    }
    let mut resp_rng = Stream::new(seed, 0);
    let y = sample_response(model, &truth(), &columns, n, &mut resp_rng).unwrap();
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let cols: Vec<Vec<f64>> = names.iter().map(|n| columns[n].clone()).collect();
    ObservationSet::new(y, names, cols).unwrap()
}

fn bench_pipeline(c: &mut Criterion) {
    let model = study_model();
    let data = dataset(&model, 30, 417);
    let theta = truth();
    let hyp = Hypothesis::by_name(&model, &[("b2", 0.0)]).unwrap();

    c.bench_function("design_state_n30", |b| {
        b.iter(|| design_state(&model, black_box(&theta), &data).unwrap())
    });

    let state = design_state(&model, &theta, &data).unwrap();
    c.bench_function("loglik_score_info_n30", |b| {
        b.iter(|| {
            let l = loglik(black_box(&state));
            let s = score(&state);
            let oi = observed_info(&state);
            let ei = expected_info(&state);
            (l, s, oi, ei)
        })
    });

    c.bench_function("fit_mle_unrestricted_n30", |b| {
        b.iter(|| fit_mle(&model, &data, &Hypothesis::unrestricted(), None).unwrap())
    });

    let hat = fit_mle(&model, &data, &Hypothesis::unrestricted(), None).unwrap();
    let tilde = fit_mle(&model, &data, &hyp, None).unwrap();
    let interest = hyp.restricted_indices();
    c.bench_function("adjusted_lr_n30", |b| {
        b.iter(|| {
            adjusted_lr(
                &model,
                &data,
                black_box(&hat.theta),
                &tilde.theta,
                &interest,
            )
            .unwrap()
        })
    });

    c.bench_function("compute_tests_n30", |b| {
        b.iter(|| compute_tests(&model, &data, black_box(&hyp)).unwrap())
    });
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
