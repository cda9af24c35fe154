use super::*;
use crate::sem::{Gaussian, SemSpec};

fn confounded_spec() -> SemSpec {
    let dag = Dag::new(
        vec!["L".into(), "A".into(), "B".into()],
        &[(0, 1), (0, 2), (1, 2)],
        vec![true, false, false],
        Some(vec![0.8, 0.5, 0.6]),
    )
    .unwrap();
    SemSpec::linear(dag, BTreeMap::from([("L".to_string(), Gaussian::new(11.0, 1.0))]), 0.25).unwrap()
}

fn single_child() -> (Dag, BatchDataset) {
    let dag = Dag::new(vec!["L".into(), "C".into()], &[(0, 1)], vec![true, false], None).unwrap();
    let data = BatchDataset::continuous(vec!["C".into()], vec![vec![2.0, -1.0, 0.5]]).unwrap();
    (dag, data)
}

fn entry(from: &str, to: &str, w: f64) -> WeightEntry {
    WeightEntry { from: from.into(), to: to.into(), weight: w }
}

#[test]
fn param_error_is_euclidean() {
    let a = SemParams { observed: vec![entry("A", "B", 0.6), entry("B", "C", 0.1)], latent: vec![], intercepts: BTreeMap::new(), noise_variance: 1.0 };
    assert_eq!(param_error(&a, &a).unwrap(), 0.0);
    let mut b = a.clone();
    b.observed[0].weight = 0.9;
    assert!((param_error(&b, &a).unwrap() - 0.3).abs() < 1e-12);
    b.observed[1].weight = 0.5;
    assert!((param_error(&b, &a).unwrap() - 0.5).abs() < 1e-12);
    b.observed.pop();
    assert!(param_error(&b, &a).is_err());
}

#[test]
fn warm_start_recovers_weight() {
    let dag = Dag::new(vec!["A".into(), "B".into()], &[(0, 1)], vec![false, false], Some(vec![0.6])).unwrap();
    let spec = SemSpec::linear(dag.clone(), BTreeMap::new(), 0.5).unwrap();
    let data = spec.simulate(5000, 1).unwrap();
    let (p, ridged) = mle_warm_start(&data, &dag, 1e-6).unwrap();
    assert!(!ridged);
    assert!((p.observed[0].weight - 0.6).abs() < 0.03);
}

#[test]
fn root_only_gives_sample_variance() {
    let dag = Dag::from_named(&["A"], &[]).unwrap();
    let data = BatchDataset::continuous(vec!["A".into()], vec![vec![1.0, 2.0, 3.0, 6.0]]).unwrap();
    let (p, _) = mle_warm_start(&data, &dag, 1e-6).unwrap();
    assert!(p.observed.is_empty());
    assert!((p.noise_variance - 3.5).abs() < 1e-12);
}

#[test]
fn duplicate_columns_use_ridge() {
    let x: Vec<f64> = (0..50).map(|k| (k as f64).sin()).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 0.01 * (v * 7.0).cos()).collect();
    let data = BatchDataset::continuous(vec!["X1".into(), "X2".into(), "Y".into()], vec![x.clone(), x, y]).unwrap();
    let dag = Dag::from_named(&["X1", "X2", "Y"], &[("X1", "Y"), ("X2", "Y")]).unwrap();
    let (p, ridged) = mle_warm_start(&data, &dag, 1e-6).unwrap();
    assert!(ridged);
    assert!(p.observed.iter().all(|e| e.weight.is_finite()));
    assert!((p.observed.iter().map(|e| e.weight).sum::<f64>() - 2.0).abs() < 0.05);
}

#[test]
fn conjugate_update() {
    let (dag, data) = single_child();
    let params = SemParams { observed: vec![], latent: vec![entry("L", "C", 1.0)], intercepts: BTreeMap::new(), noise_variance: 1.0 };
    let q = e_step(&data, &dag, &params, GaussianPrior { mean: 0.0, variance: 1.0 }).unwrap();
    assert!((q.means[0] - 1.0).abs() < 1e-12);
    assert!((q.variance - 0.5).abs() < 1e-12);
}

#[test]
fn disconnected_latent_keeps_prior() {
    let (dag, data) = single_child();
    let params = SemParams { observed: vec![], latent: vec![entry("L", "C", 0.0)], intercepts: BTreeMap::new(), noise_variance: 1.0 };
    let prior = GaussianPrior { mean: 3.0, variance: 2.0 };
    let q = e_step(&data, &dag, &params, prior).unwrap();
    assert!(q.means.iter().all(|m| (m - 3.0).abs() < 1e-12));
    assert_eq!(q.variance, 2.0);
}

#[test]
fn no_latent_reduces_to_least_squares() {
    let dag = Dag::new(vec!["A".into(), "B".into()], &[(0, 1)], vec![false, false], Some(vec![0.6])).unwrap();
    let spec = SemSpec::linear(dag.clone(), BTreeMap::new(), 0.5).unwrap();
    let batches: Vec<_> = (0..3).map(|k| spec.simulate(300, k).unwrap()).collect();
    let fit = fit_em(&batches, &dag, GaussianPrior { mean: 0.0, variance: 1.0 }, &BTreeMap::new(), &EmConfig::default(), None).unwrap();
    for (b, p) in batches.iter().zip(&fit.params) {
        assert_eq!(p, &mle_warm_start(b, &dag, 1e-6).unwrap().0);
    }
}

fn model_for<'a>(cols: Vec<&'a [f64]>, n: usize, target: Vec<f64>, lambda: f64) -> Model<'a> {
    Model {
        eqs: vec![
            Equation { node: 0, parents: vec![], has_latent: true },
            Equation { node: 1, parents: vec![0], has_latent: true },
        ],
        cols,
        n,
        prior: GaussianPrior { mean: 11.0, variance: 1.0 },
        target,
        lambda,
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let data = confounded_spec().simulate(200, 3).unwrap();
    let (a, b) = (data.column(0).to_vec(), data.column(1).to_vec());
    let model = model_for(vec![&a, &b], 200, vec![0.7, 0.4], 0.0);
    let p = Params { theta: vec![vec![], vec![0.55]], theta_l: vec![0.7, 0.35], intercept: vec![1.0, -2.0], sigma2: 0.3 };
    let q = model.e_step(&p).unwrap();
    let (g, gl) = model.gradient(&p, &q);
    let h = 1e-5;
    let fd = |f: &dyn Fn(&mut Params, f64)| {
        let (mut up, mut dn) = (p.clone(), p.clone());
        f(&mut up, h);
        f(&mut dn, -h);
        (model.objective(&up, &q) - model.objective(&dn, &q)) / (2.0 * h)
    };
    let checks = [
        (g[1][0], fd(&|x: &mut Params, d| x.theta[1][0] += d)),
        (gl[0], fd(&|x: &mut Params, d| x.theta_l[0] += d)),
        (gl[1], fd(&|x: &mut Params, d| x.theta_l[1] += d)),
    ];
    for (an, num) in checks {
        assert!((an - num).abs() <= 1e-4 * num.abs().max(1e-8), "{an} vs {num}");
    }
}

#[test]
fn huge_penalty_pins_latent_weights() {
    let data = confounded_spec().simulate(300, 4).unwrap();
    let (a, b) = (data.column(0).to_vec(), data.column(1).to_vec());
    let model = model_for(vec![&a, &b], 300, vec![0.3, -0.2], 1e6);
    let mut p = Params { theta: vec![vec![], vec![0.5]], theta_l: vec![0.9, 0.6], intercept: vec![0.0, 0.0], sigma2: 0.3 };
    let q = model.e_step(&p).unwrap();
    model.m_step(&mut p, &q, 0.001, 50).unwrap();
    assert!((p.theta_l[0] - 0.3).abs() < 1e-3 && (p.theta_l[1] + 0.2).abs() < 1e-3, "{:?}", p.theta_l);
}

#[test]
fn observed_latent_limit_matches_least_squares() {
    let full = confounded_spec().simulate_full(400, 5).unwrap();
    let l = full.column(0).to_vec();
    let (a, b) = (full.column(1).to_vec(), full.column(2).to_vec());
    let model = model_for(vec![&a, &b], 400, vec![f64::NAN, f64::NAN], 0.0);
    let q = LatentPosterior { means: l.clone(), variance: 1e-12 };
    let mut p = Params { theta: vec![vec![], vec![0.3]], theta_l: vec![0.2, 0.2], intercept: vec![0.0, 0.0], sigma2: 1.0 };
    for _ in 0..400 {
        model.m_step(&mut p, &q, 0.001, 50).unwrap();
    }
    let (_, wa, _) = ols(&a, &[&l], 1e-6);
    let (_, wb, _) = ols(&b, &[&a, &l], 1e-6);
    assert!((p.theta_l[0] - wa[0]).abs() < 1e-3, "{} {}", p.theta_l[0], wa[0]);
    assert!((p.theta[1][0] - wb[0]).abs() < 1e-3 && (p.theta_l[1] - wb[1]).abs() < 1e-3);
}

#[test]
fn posterior_matches_quadrature() {
    let data = confounded_spec().simulate(20, 6).unwrap();
    let (a, b) = (data.column(0).to_vec(), data.column(1).to_vec());
    let model = model_for(vec![&a, &b], 20, vec![f64::NAN; 2], 0.0);
    let p = Params { theta: vec![vec![], vec![0.4]], theta_l: vec![0.9, 0.3], intercept: vec![0.5, 1.0], sigma2: 0.4 };
    let q = model.e_step(&p).unwrap();
    for row in 0..20 {
        let ra = a[row] - 0.5;
        let rb = b[row] - 1.0 - 0.4 * a[row];
        let dens = |x: f64| {
            let lp = -(x - 11.0).powi(2) / 2.0 - (ra - 0.9 * x).powi(2) / 0.8 - (rb - 0.3 * x).powi(2) / 0.8;
            lp.exp()
        };
        let (lo, hi, m) = (0.0, 25.0, 20_000);
        let h = (hi - lo) / m as f64;
        let (mut z, mut s) = (0.0, 0.0);
        for k in 0..=m {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            z += w * dens(x);
            s += w * x * dens(x);
        }
        assert!((s / z - q.means[row]).abs() < 1e-6);
    }
}

#[test]
fn recovery_on_confounded_model() {
    let spec = confounded_spec();
    let truth = SemParams::from_spec(&spec).unwrap();
    let rho = BTreeMap::from([
        ("A".to_string(), spec.implied_correlation(0, 1).unwrap()),
        ("B".to_string(), spec.implied_correlation(0, 2).unwrap()),
    ]);
    let batches: Vec<_> = (0..5).map(|k| spec.simulate(5000, 70 + k).unwrap()).collect();
    let fit = fit_em(&batches, &spec.dag, GaussianPrior { mean: 11.0, variance: 1.0 }, &rho, &EmConfig::default(), Some(&truth)).unwrap();
    let errs = fit.errors.unwrap();
    assert!(*errs.last().unwrap() < 0.3, "{errs:?}");
    for obj in &fit.objectives {
        assert!(obj.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    }
}

#[test]
fn marginal_target_follows_formula() {
    let spec = confounded_spec();
    let data = spec.simulate(2000, 8).unwrap();
    let lay = layout(&spec.dag, &data).unwrap();
    let cols = columns(&spec.dag, &lay, &data).unwrap();
    let rho = BTreeMap::from([("A".to_string(), 0.5), ("B".to_string(), 0.4)]);
    let prior = GaussianPrior { mean: 0.0, variance: 4.0 };
    let t = targets(&spec.dag, &lay, &cols, prior, &rho, PenaltyTarget::Marginal);
    let sd_b = sample_cov(cols[1], cols[1]).sqrt();
    assert!((t[1] - 0.4 * sd_b / 2.0).abs() < 1e-12);
    // a child without observed parents gets the same target either way
    let p = targets(&spec.dag, &lay, &cols, prior, &rho, PenaltyTarget::Partial);
    assert_eq!(p[0], t[0]);
}
