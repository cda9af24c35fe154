//! Config-driven runs: profile presets, batch preparation, expert wiring and
//! the discover / estimate pipelines used by the command-line tool.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::belief::{EdgeHistogram, ScoreWeights};
use crate::data::BatchDataset;
use crate::em::{fit_em, EmConfig, EmFit, SemParams};
use crate::error::{Error, Result};
use crate::expert::{
    Backend, ConfounderAnswer, Expert, ExpertConfig, GaussianPrior, HttpExpert, PromptTemplates, SimulatedExpert, UreqTransport,
};
use crate::fci::{run_fci_variant, FciVariant};
use crate::graph::Dag;
use crate::learner::{run_sequence, score_against, BatchReport, BatchTrace, RunConfig, SequenceReport, SCHEMA_VERSION};
use crate::sem::{fixture, split_batches, Fixture, Gaussian, SelectionBias, SemKind, SemSpec, FIXTURE_NAMES};

/// Which discovery procedure `discover` runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Nlpscm,
    Cumulative,
    Vanilla,
    Iterative,
    Heuristics,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown variant `{s}` (nlpscm, cumulative, vanilla, iterative, heuristics)")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nlpscm => "nlpscm",
            Variant::Cumulative => "cumulative",
            Variant::Vanilla => "vanilla",
            Variant::Iterative => "iterative",
            Variant::Heuristics => "heuristics",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Built-in ground truth used for simulation and the simulated expert.
    pub fixture: Option<String>,
    /// Batch CSV files; when non-empty they replace simulation.
    pub data: Vec<PathBuf>,
    /// Ground-truth DAG JSON (latent flags and optional weights).
    pub truth: Option<PathBuf>,
    /// Reference parameters for the estimation error trace.
    pub truth_params: Option<PathBuf>,
    pub batch_sizes: Vec<usize>,
    pub bias: Option<SelectionBias>,
    pub variant: Variant,
    /// Window for the heuristics baseline.
    pub heuristics_h: usize,
    pub expert: ExpertConfig,
    pub run: RunConfig,
    pub em: EmConfig,
    /// Priors for the latent; one estimation run each. Empty asks the expert.
    pub priors: Vec<GaussianPrior>,
    /// Latent/observed correlations; empty asks the expert.
    pub correlations: BTreeMap<String, f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            fixture: None,
            data: Vec::new(),
            truth: None,
            truth_params: None,
            batch_sizes: vec![250; 6],
            bias: None,
            variant: Variant::Nlpscm,
            heuristics_h: 2,
            expert: ExpertConfig::default(),
            run: RunConfig::default(),
            em: EmConfig::default(),
            priors: Vec::new(),
            correlations: BTreeMap::new(),
            seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

pub const PROFILE_NAMES: [&str; 5] = FIXTURE_NAMES;

/// Preset carrying the published hyperparameters for a fixture.
pub fn profile(name: &str) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig { fixture: Some(name.to_string()), ..Default::default() };
    let weights = |w1, w2, w3, alpha, min_threshold| ScoreWeights { w1, w2, w3, alpha, min_threshold };
    match name {
        "earthquake" => {
            c.run.edge_budget = 50;
            c.run.weights = weights(0.1, 0.6, 0.3, 0.3, 10.0);
        }
        "asia" => {
            c.run.edge_budget = 20;
            c.run.weights = weights(0.1, 0.6, 0.3, 0.3, 10.0);
        }
        "user1" => {
            c.batch_sizes = vec![500; 7];
            c.run.edge_budget = 70;
            c.run.weights = weights(0.1, 0.6, 0.3, 0.3, 10.0);
        }
        "user2" => {
            c.batch_sizes = vec![500; 7];
            c.run.edge_budget = 20;
            c.run.weights = weights(0.3, 0.4, 0.3, 0.5, 5.0);
        }
        "wine_synth" => {
            c.batch_sizes = vec![319, 319, 319, 319, 323];
            c.run.edge_budget = 20;
            c.priors = [(11.0, 1.0), (12.5, 2.5), (0.0, 1.0), (50.0, 1.5)]
                .iter()
                .map(|&(m, v)| GaussianPrior { mean: m, variance: v })
                .collect();
        }
        other => return Err(Error::Config(format!("unknown profile `{other}` (one of {})", PROFILE_NAMES.join(", ")))),
    }
    Ok(c)
}

/// Objects merge key by key; anything else is replaced.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// Parse a JSON document; a top-level `profile` key selects the preset
    /// the rest of the document is layered on.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut user: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
        let obj = user.as_object_mut().ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let base = match obj.remove("profile") {
            None => ExperimentConfig::default(),
            Some(Value::String(p)) => profile(&p)?,
            Some(_) => return Err(Error::Config("`profile` must be a string".into())),
        };
        let mut merged = serde_json::to_value(base)?;
        merge(&mut merged, user);
        let cfg: ExperimentConfig = serde_json::from_value(merged).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.expert.validate()?;
        self.run.validate()?;
        self.em.validate()?;
        if self.data.is_empty() && self.batch_sizes.is_empty() {
            return Err(Error::Config("batch_sizes must not be empty".into()));
        }
        if self.data.is_empty() && self.fixture.is_none() {
            return Err(Error::Config("either `fixture` or `data` is required".into()));
        }
        if self.variant == Variant::Heuristics && self.heuristics_h == 0 {
            return Err(Error::Config("heuristics_h must be at least 1".into()));
        }
        if let Some(f) = &self.fixture {
            fixture(f)?;
        }
        Ok(())
    }

    /// Same config with every seed derived from `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c.run.seed = seed;
        c.em.seed = seed;
        c
    }
}

/// Linear model with one latent confounding two observed nodes; used for
/// estimation checks. L→A 0.8, L→B 0.5, A→B 0.6, L ~ N(11, 1), noise 0.25.
pub fn confounded_sem() -> SemSpec {
    let dag = Dag::new(
        vec!["L".into(), "A".into(), "B".into()],
        &[(0, 1), (0, 2), (1, 2)],
        vec![true, false, false],
        Some(vec![0.8, 0.5, 0.6]),
    )
    .expect("valid DAG");
    SemSpec::linear(dag, BTreeMap::from([("L".to_string(), Gaussian::new(11.0, 1.0))]), 0.25).expect("valid SEM")
}

/// Batches plus whatever ground truth is known.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub batches: Vec<BatchDataset>,
    pub fixture: Option<Fixture>,
    pub truth: Option<Dag>,
}

const SPLIT_STREAM: u64 = 0x5EED_0001;
const EXPERT_STREAM: u64 = 0x5EED_0002;

/// Simulate and split, or read the configured CSV files.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let fix = cfg.fixture.as_deref().map(fixture).transpose()?;
    let truth = match &cfg.truth {
        Some(p) => Some(Dag::load(p)?),
        None => fix.as_ref().map(|f| f.spec.dag.clone()),
    };
    let batches = if cfg.data.is_empty() {
        let f = fix.as_ref().ok_or_else(|| Error::Config("simulation needs a fixture".into()))?;
        let total: usize = cfg.batch_sizes.iter().sum();
        // rejection sampling needs a larger pool to draw from
        let pool = if cfg.bias.is_some() { total * 4 } else { total };
        let all = f.spec.simulate(pool, cfg.seed)?;
        split_batches(&all, &cfg.batch_sizes, cfg.bias.as_ref(), cfg.seed ^ SPLIT_STREAM)?
    } else {
        let kinds = fix.as_ref().map(|f| {
            let k = match f.spec.kind {
                SemKind::Linear => crate::data::VarKind::Continuous,
                SemKind::Logistic => crate::data::VarKind::Categorical { levels: 2 },
            };
            vec![k; f.spec.dag.observed().len()]
        });
        cfg.data.iter().map(|p| BatchDataset::read_csv(p, kinds.as_deref())).collect::<Result<Vec<_>>>()?
    };
    let first = batches.first().ok_or_else(|| Error::Config("no batches".into()))?;
    for (i, b) in batches.iter().enumerate() {
        if b.names() != first.names() {
            return Err(Error::VariableMismatch(format!("batch {} has columns {:?}, batch 1 has {:?}", i + 1, b.names(), first.names())));
        }
    }
    if let Some(t) = &truth {
        if t.observed_names() != first.names() {
            return Err(Error::VariableMismatch(format!(
                "truth observes {:?} but the data has {:?}",
                t.observed_names(),
                first.names()
            )));
        }
    }
    Ok(Prepared { batches, fixture: fix, truth })
}

/// Fixture stand-in for a truth graph loaded from disk.
fn custom_fixture(dag: &Dag) -> Fixture {
    let kind = if dag.is_weighted() { SemKind::Linear } else { SemKind::Logistic };
    Fixture {
        name: "custom".into(),
        experiment_name: "causal discovery".into(),
        spec: SemSpec { dag: dag.clone(), kind, roots: BTreeMap::new(), noise_variance: 1.0, intercepts: BTreeMap::new() },
        descriptions: BTreeMap::new(),
        confounder_names: dag.latents().iter().map(|&l| (dag.variables()[l].clone(), dag.variables()[l].clone())).collect(),
        prior: None,
        distractors: Vec::new(),
    }
}

pub fn build_expert(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Box<dyn Expert>> {
    let variables = prep.batches[0].names().to_vec();
    match cfg.expert.backend {
        Backend::Simulated => {
            let fix = match (&prep.fixture, &prep.truth) {
                (Some(f), _) => f.clone(),
                (None, Some(t)) => custom_fixture(t),
                (None, None) => return Err(Error::Config("the simulated expert needs a fixture or a truth graph".into())),
            };
            let e = SimulatedExpert::new(&fix, cfg.expert.noise, cfg.expert.prior, cfg.seed ^ EXPERT_STREAM)?;
            if e.variables() != variables {
                return Err(Error::VariableMismatch(format!("expert knows {:?}, data has {:?}", e.variables(), variables)));
            }
            Ok(Box::new(e))
        }
        Backend::Http => {
            let key = std::env::var(&cfg.expert.api_key_env)
                .map_err(|_| Error::ExpertAuth(format!("environment variable {} is not set", cfg.expert.api_key_env)))?;
            let templates = match &cfg.expert.templates_dir {
                Some(d) => PromptTemplates::load_dir(Path::new(d))?,
                None => PromptTemplates::default(),
            };
            let transport = UreqTransport::new(&cfg.expert.endpoint, Some(key), Duration::from_secs(cfg.expert.timeout_secs));
            let (name, descriptions) = match &prep.fixture {
                Some(f) => (f.experiment_name.clone(), f.descriptions.clone()),
                None => ("causal discovery".to_string(), BTreeMap::new()),
            };
            Ok(Box::new(HttpExpert::new(
                Box::new(transport),
                templates,
                &name,
                variables,
                descriptions,
                &cfg.expert.model,
                cfg.expert.temperature,
                cfg.expert.retries,
            )))
        }
    }
}

/// Run the configured discovery variant over prepared batches.
pub fn discover_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<SequenceReport> {
    let truth = prep.truth.as_ref();
    let fci_variant = match cfg.variant {
        Variant::Nlpscm => {
            let mut expert = build_expert(cfg, prep)?;
            return run_sequence(&prep.batches, expert.as_mut(), &cfg.run, truth);
        }
        Variant::Cumulative => FciVariant::Cumulative,
        Variant::Vanilla => FciVariant::Vanilla,
        Variant::Iterative => FciVariant::Iterative,
        Variant::Heuristics => FciVariant::Heuristics { h: cfg.heuristics_h },
    };
    let out = run_fci_variant(fci_variant, &prep.batches, &cfg.run.fci)?;
    let mut reports = Vec::with_capacity(out.pags.len());
    for (i, (pag, data)) in out.pags.into_iter().zip(&prep.batches).enumerate() {
        let mut trace = BatchTrace::default();
        if i == 0 {
            trace.warnings = out.warnings.clone();
        }
        let metrics = score_against(&pag, truth, None, &mut trace.warnings);
        reports.push(BatchReport {
            batch: i + 1,
            rows: data.n_rows(),
            fci_pag: pag.clone(),
            pag,
            metrics,
            mean_entropy: None,
            background_size: 0,
            trace,
        });
    }
    Ok(SequenceReport {
        schema_version: SCHEMA_VERSION,
        variant: cfg.variant.name().into(),
        seed: cfg.seed,
        variables: prep.batches[0].names().to_vec(),
        batches: reports,
        background: Vec::new(),
        edge_histogram: EdgeHistogram::new(),
        confounders: Vec::new(),
    })
}

pub fn discover(cfg: &ExperimentConfig) -> Result<SequenceReport> {
    let prep = prepare(cfg)?;
    discover_prepared(cfg, &prep)
}

/// Independent runs, one per seed, executed in parallel; results keep the
/// order of `seeds`.
pub fn discover_seeds(cfg: &ExperimentConfig, seeds: &[u64]) -> Vec<Result<SequenceReport>> {
    seeds.par_iter().map(|&s| discover(&cfg.with_seed(s))).collect()
}

/// `batch,mod_shd,sid_lo,sid_hi,precision,recall,f1,mean_entropy`; missing
/// values are left empty.
pub fn metrics_csv(report: &SequenceReport) -> String {
    let mut s = String::from("batch,mod_shd,sid_lo,sid_hi,precision,recall,f1,mean_entropy\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for b in &report.batches {
        let m = b.metrics.as_ref();
        let sid = m.and_then(|m| m.sid);
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            b.batch,
            opt(m.map(|m| m.mod_shd)),
            sid.map(|x| x.0.to_string()).unwrap_or_default(),
            sid.map(|x| x.1.to_string()).unwrap_or_default(),
            opt(m.map(|m| m.precision)),
            opt(m.map(|m| m.recall)),
            opt(m.map(|m| m.f1)),
            opt(b.mean_entropy),
        ));
    }
    s
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateRun {
    pub prior: GaussianPrior,
    pub fit: EmFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub confounder: Option<String>,
    pub correlations: BTreeMap<String, f64>,
    pub runs: Vec<EstimateRun>,
}

/// Ask the expert to name the latent, then for its prior and correlations.
fn elicit(expert: &mut dyn Expert, dag: &Dag, observed: &[String]) -> Result<(String, GaussianPrior, BTreeMap<String, f64>)> {
    let latent = dag.latents()[0];
    let kids: Vec<usize> = dag
        .children(latent)
        .iter()
        .map(|&c| observed.iter().position(|n| *n == dag.variables()[c]).expect("observed child"))
        .collect();
    let mut name = dag.variables()[latent].clone();
    if kids.len() >= 2 {
        if let ConfounderAnswer::Named(n) = expert.query_confounder(kids[0], kids[1])? {
            name = n;
        }
    }
    let prior = expert.query_prior(&name, &kids)?;
    let rho = expert.query_correlation(&name, &kids)?;
    Ok((name, prior, rho))
}

pub fn estimate(cfg: &ExperimentConfig) -> Result<EstimateReport> {
    let prep = prepare(cfg)?;
    let dag = prep.truth.clone().ok_or_else(|| Error::Config("estimation needs a graph: set `fixture` or `truth`".into()))?;
    if dag.latents().len() > 1 {
        return Err(Error::Estimation("at most one latent node is supported".into()));
    }
    let reference = match (&cfg.truth_params, &prep.fixture) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))?;
            Some(serde_json::from_str::<SemParams>(&text)?)
        }
        (None, Some(f)) if f.spec.kind == SemKind::Linear => Some(SemParams::from_spec(&f.spec)?),
        _ => None,
    };
    let mut confounder = None;
    let mut priors = cfg.priors.clone();
    let mut rho = cfg.correlations.clone();
    if !dag.latents().is_empty() && (priors.is_empty() || rho.is_empty()) {
        let mut expert = build_expert(cfg, &prep)?;
        let (name, p, r) = elicit(expert.as_mut(), &dag, prep.batches[0].names())?;
        confounder = Some(name);
        if priors.is_empty() {
            priors.push(p);
        }
        if rho.is_empty() {
            rho = r;
        }
    }
    if priors.is_empty() {
        // no latent: the prior is never used
        priors.push(GaussianPrior { mean: 0.0, variance: 1.0 });
    }
    let runs = priors
        .iter()
        .map(|&prior| {
            let fit = fit_em(&prep.batches, &dag, prior, &rho, &cfg.em, reference.as_ref())?;
            Ok(EstimateRun { prior, fit })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateReport { confounder, correlations: rho, runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_overrides_merge() {
        let c = ExperimentConfig::from_json(r#"{"profile":"user2","seed":9,"run":{"edge_budget":3}}"#).unwrap();
        assert_eq!(c.run.edge_budget, 3);
        assert_eq!(c.run.weights.min_threshold, 5.0);
        assert_eq!(c.batch_sizes, vec![500; 7]);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ExperimentConfig::from_json(r#"{"profile":"asia","bogus":1}"#), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"profile":"asia","run":{"budget":1}}"#), Err(Error::Config(_))));
        assert!(ExperimentConfig::from_json(r#"{"profile":"child"}"#).is_err());
    }

    #[test]
    fn every_profile_validates() {
        for p in PROFILE_NAMES {
            profile(p).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn prepare_simulates_requested_sizes() {
        let c = ExperimentConfig::from_json(r#"{"profile":"earthquake"}"#).unwrap();
        let p = prepare(&c).unwrap();
        assert_eq!(p.batches.len(), 6);
        assert!(p.batches.iter().all(|b| b.n_rows() == 250 && b.n_cols() == 5));
    }

    #[test]
    fn zero_budget_matches_vanilla() {
        let c = ExperimentConfig::from_json(r#"{"profile":"earthquake","batch_sizes":[200,200],"run":{"edge_budget":0,"latent_budget":0}}"#)
            .unwrap();
        let prep = prepare(&c).unwrap();
        let a = discover_prepared(&c, &prep).unwrap();
        let mut v = c.clone();
        v.variant = Variant::Vanilla;
        let b = discover_prepared(&v, &prep).unwrap();
        for (x, y) in a.batches.iter().zip(&b.batches) {
            assert_eq!(x.pag, y.pag);
        }
    }

    #[test]
    fn metrics_csv_has_row_per_batch() {
        let c = ExperimentConfig::from_json(r#"{"profile":"earthquake","batch_sizes":[200,200]}"#).unwrap();
        let r = discover(&c).unwrap();
        let csv = metrics_csv(&r);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("batch,mod_shd,sid_lo,sid_hi,precision,recall,f1,mean_entropy\n"));
    }

    #[test]
    fn wine_estimate_gives_four_traces() {
        let c = ExperimentConfig::from_json(r#"{"profile":"wine_synth","em":{"max_e_steps":3}}"#).unwrap();
        let r = estimate(&c).unwrap();
        assert_eq!(r.runs.len(), 4);
        assert_eq!(r.confounder.as_deref(), Some("alcohol_content"));
        assert!(r.runs.iter().all(|run| run.fit.errors.as_ref().unwrap().len() == 5));
    }
}
