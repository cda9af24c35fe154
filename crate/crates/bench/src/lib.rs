//! Shared inputs for the criterion benches.

use nlpscm::belief::EdgeHistogram;
use nlpscm::graph::all_pairs;
use nlpscm::sem::fixture;
use nlpscm::{BatchDataset, EdgeCategory};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// `rows` simulated rows of a built-in fixture.
pub fn fixture_data(name: &str, rows: usize, seed: u64) -> BatchDataset {
    fixture(name).expect("known fixture").spec.simulate(rows, seed).expect("simulation")
}

/// A histogram over `n` variables with `answers` random answers.
pub fn random_histogram(n: usize, answers: usize, seed: u64) -> EdgeHistogram {
    let mut rng = StdRng::seed_from_u64(seed);
    let pairs = all_pairs(n);
    let mut h = EdgeHistogram::new();
    for _ in 0..answers {
        let (a, b) = pairs[rng.random_range(0..pairs.len())];
        let cat = EdgeCategory::QUERYABLE[rng.random_range(0..7)];
        h.update(a, b, cat).expect("valid pair");
    }
    h
}
