use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nlpscm::belief::{effective_threshold, selection_score, ScoreWeights};
use nlpscm::ci::build_test;
use nlpscm::em::{fit_em, EmConfig};
use nlpscm::experiment::{confounded_sem, discover, ExperimentConfig};
use nlpscm::expert::GaussianPrior;
use nlpscm::fci::{fci, FciConfig};
use nlpscm::metrics::{sid_bounds, DEFAULT_EXTENSION_CAP};
use nlpscm::sem::fixture;
use nlpscm::BackgroundKnowledge;
use nlpscm_bench::{fixture_data, random_histogram};

fn bench_fci(c: &mut Criterion) {
    let cfg = FciConfig::default();
    for name in ["earthquake", "asia", "user1"] {
        let data = fixture_data(name, 500, 1);
        let test = build_test(&data, cfg.ci_test, cfg.alpha).unwrap();
        c.bench_function(&format!("fci/{name}/500"), |b| {
            b.iter(|| fci(test.as_ref(), data.names(), &BackgroundKnowledge::new(), &cfg).unwrap())
        });
    }
}

fn bench_selection(c: &mut Criterion) {
    let h = random_histogram(12, 600, 3);
    let w = ScoreWeights::default();
    c.bench_function("selection/score all pairs (12 vars)", |b| {
        b.iter(|| {
            let total = h.total();
            h.queried_pairs()
                .map(|(_, bins)| {
                    let tau = effective_threshold(bins, w.alpha, total, w.min_threshold).unwrap();
                    selection_score(bins, tau, total, &w)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
    });
}

fn bench_sid(c: &mut Criterion) {
    let dag = fixture("asia").unwrap().spec.dag;
    let pag = dag.to_observed_pag();
    c.bench_function("sid/asia truth", |b| b.iter(|| sid_bounds(&pag, &dag, DEFAULT_EXTENSION_CAP).unwrap()));
}

fn bench_em(c: &mut Criterion) {
    let spec = confounded_sem();
    let batches: Vec<_> = (0..3).map(|k| spec.simulate(1000, k).unwrap()).collect();
    let rho: BTreeMap<String, f64> =
        [("A", 1), ("B", 2)].iter().map(|&(n, i)| (n.to_string(), spec.implied_correlation(0, i).unwrap())).collect();
    let prior = GaussianPrior { mean: 11.0, variance: 1.0 };
    let cfg = EmConfig::default();
    let mut g = c.benchmark_group("em");
    g.sample_size(10);
    g.bench_function("3 batches x 1000 rows", |b| b.iter(|| fit_em(&batches, &spec.dag, prior, &rho, &cfg, None).unwrap()));
    g.finish();
}

fn bench_discover(c: &mut Criterion) {
    let cfg = ExperimentConfig::from_json(r#"{"profile":"earthquake","expert":{"noise":0.3}}"#).unwrap();
    let mut g = c.benchmark_group("discover");
    g.sample_size(10);
    g.bench_function("earthquake 6x250", |b| b.iter_batched(|| cfg.clone(), |c| discover(&c).unwrap(), BatchSize::SmallInput));
    g.finish();
}

criterion_group!(benches, bench_fci, bench_selection, bench_sid, bench_em, bench_discover);
criterion_main!(benches);
