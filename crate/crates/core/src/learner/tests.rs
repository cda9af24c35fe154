use super::*;
use crate::expert::SimulatedExpert;
use crate::metrics::mod_shd_dag;
use crate::sem::fixture;

fn earthquake_batches(n: usize, sizes: usize, seed: u64) -> (crate::sem::Fixture, Vec<BatchDataset>) {
    let f = fixture("earthquake").unwrap();
    let batches = (0..n).map(|k| f.spec.simulate(sizes, seed * 100 + k as u64).unwrap()).collect();
    (f, batches)
}

#[test]
fn zero_budget_keeps_fci_output() {
    let (f, batches) = earthquake_batches(1, 250, 1);
    let mut ex = SimulatedExpert::new(&f, 0.0, None, 1).unwrap();
    let cfg = RunConfig { edge_budget: 0, latent_budget: 0, ..RunConfig::default() };
    let mut st = LearnerState::new(batches[0].names().to_vec());
    let out = run_batch(&mut st, &batches[0], &mut ex, &cfg).unwrap();
    assert_eq!(out.pag, out.fci_pag);
    assert_eq!(st.edges.total(), 0);
    assert!(st.background.is_empty());
    assert_eq!(st.batch, 1);
}

#[test]
fn noiseless_single_batch_recovers_truth() {
    let (f, batches) = earthquake_batches(1, 250, 2);
    let mut ex = SimulatedExpert::new(&f, 0.0, None, 2).unwrap();
    let cfg = RunConfig { edge_budget: 100, ..RunConfig::default() };
    let mut st = LearnerState::new(batches[0].names().to_vec());
    let out = run_batch(&mut st, &batches[0], &mut ex, &cfg).unwrap();
    assert_eq!(st.background.len(), 10);
    assert_eq!(mod_shd_dag(&out.pag, &f.spec.dag).unwrap(), 0.0);
    assert_eq!(out.trace.edge_queries, 100);
    assert_eq!(out.trace.records.len(), 100);
}

#[test]
fn budget_and_monotonicity() {
    let (f, batches) = earthquake_batches(3, 200, 3);
    let mut ex = SimulatedExpert::new(&f, 0.3, None, 3).unwrap();
    let cfg = RunConfig { edge_budget: 30, ..RunConfig::default() };
    let mut st = LearnerState::new(batches[0].names().to_vec());
    let mut prev_facts = 0;
    let mut prev_total = 0;
    for b in &batches {
        let out = run_batch(&mut st, b, &mut ex, &cfg).unwrap();
        assert!(out.trace.edge_queries <= 30);
        assert_eq!(out.trace.records.len(), out.trace.edge_queries + out.trace.confounder_queries);
        assert!(st.background.len() >= prev_facts);
        assert!(st.edges.total() >= prev_total);
        for ((a, c), cat) in st.background.iter() {
            assert_eq!(out.pag.category(a, c), cat);
        }
        prev_facts = st.background.len();
        prev_total = st.edges.total();
    }
}

#[test]
fn every_pair_queried_before_any_twice() {
    let (f, batches) = earthquake_batches(1, 200, 4);
    let mut ex = SimulatedExpert::new(&f, 0.5, None, 4).unwrap();
    let cfg = RunConfig { edge_budget: 10, ..RunConfig::default() };
    let mut st = LearnerState::new(batches[0].names().to_vec());
    let out = run_batch(&mut st, &batches[0], &mut ex, &cfg).unwrap();
    let mut pairs: Vec<&[String; 2]> = out.trace.records.iter().map(|r| &r.pair).collect();
    pairs.sort();
    pairs.dedup();
    assert_eq!(pairs.len(), 10);
}

#[test]
fn confounder_named_on_wine() {
    let f = fixture("wine_synth").unwrap();
    let batches: Vec<_> = (0..3).map(|k| f.spec.simulate(400, 50 + k).unwrap()).collect();
    let mut ex = SimulatedExpert::new(&f, 0.1, None, 9).unwrap();
    let cfg = RunConfig { edge_budget: 60, latent_budget: 5, ..RunConfig::default() };
    let report = run_sequence(&batches, &mut ex, &cfg, Some(&f.spec.dag)).unwrap();
    let c = report.confounders.iter().find(|c| c.pair == ["Density".to_string(), "Quality".to_string()]).unwrap();
    assert_eq!(c.modal.as_deref(), Some("alcohol_content"));
}

#[test]
fn sequence_is_reproducible() {
    let (f, batches) = earthquake_batches(2, 200, 5);
    let cfg = RunConfig { edge_budget: 20, selection: Selection::Random, seed: 11, ..RunConfig::default() };
    let run = || {
        let mut ex = SimulatedExpert::new(&f, 0.2, None, 11).unwrap();
        run_sequence(&batches, &mut ex, &cfg, Some(&f.spec.dag)).unwrap().to_json().unwrap()
    };
    assert_eq!(run(), run());
}
