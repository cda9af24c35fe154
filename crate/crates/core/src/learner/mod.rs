//! Batch-sequential structure learning: FCI per batch, budgeted expert
//! refinement of the edge histogram, confounder naming, and accumulation of
//! background knowledge across batches.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::belief::{effective_threshold, promote, selection_score, EdgeHistogram, LatentHistogram, ScoreWeights};
use crate::ci::build_test;
use crate::data::BatchDataset;
use crate::error::{Error, Result};
use crate::expert::{Expert, QueryContext};
use crate::fci::{fci, FciConfig};
use crate::graph::{all_pairs, BackgroundKnowledge, Dag, EdgeCategory, Pag, PairKey};
use crate::metrics::{evaluate, MetricReport};

pub const SCHEMA_VERSION: u32 = 1;

/// How the promotion threshold is set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Entropy/sampling mix floored at `min_threshold`.
    #[default]
    Dynamic,
    Fixed(f64),
}

/// How the next pair to query is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Score,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Edge queries per batch.
    pub edge_budget: usize,
    /// Confounder queries per batch.
    pub latent_budget: usize,
    pub weights: ScoreWeights,
    pub threshold: ThresholdMode,
    pub selection: Selection,
    pub fci: FciConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            edge_budget: 50,
            latent_budget: 5,
            weights: ScoreWeights::default(),
            threshold: ThresholdMode::Dynamic,
            selection: Selection::Score,
            fci: FciConfig::default(),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.fci.validate()?;
        if let ThresholdMode::Fixed(t) = self.threshold {
            if !(t > 0.0) {
                return Err(Error::Config("fixed threshold must be positive".into()));
            }
        }
        Ok(())
    }

    fn tau(&self, bins: &[u64], total: u64) -> f64 {
        match self.threshold {
            ThresholdMode::Fixed(t) => t,
            ThresholdMode::Dynamic => {
                effective_threshold(bins, self.weights.alpha, total, self.weights.min_threshold).unwrap_or(self.weights.min_threshold)
            }
        }
    }
}

/// Everything carried from one batch to the next.
#[derive(Clone, Debug, Serialize)]
pub struct LearnerState {
    pub variables: Vec<String>,
    pub edges: EdgeHistogram,
    pub latents: LatentHistogram,
    pub background: BackgroundKnowledge,
    /// Batches processed so far.
    pub batch: usize,
    #[serde(skip)]
    last_fci: Option<Pag>,
}

impl LearnerState {
    pub fn new(variables: Vec<String>) -> Self {
        LearnerState {
            variables,
            edges: EdgeHistogram::new(),
            latents: LatentHistogram::new(),
            background: BackgroundKnowledge::new(),
            batch: 0,
            last_fci: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Edge,
    Confounder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub kind: QueryKind,
    pub pair: [String; 2],
    /// Selection score; absent for never-queried pairs (infinite score),
    /// random selection and confounder queries.
    pub score: Option<f64>,
    pub answer: Option<String>,
    pub error: Option<String>,
    /// Fact promoted right after this answer.
    pub promoted: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchTrace {
    pub edge_queries: usize,
    pub confounder_queries: usize,
    pub failures: usize,
    pub records: Vec<QueryRecord>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    /// FCI output under the background known before this batch.
    pub fci_pag: Pag,
    /// FCI output overridden by every background fact.
    pub pag: Pag,
    pub trace: BatchTrace,
}

fn category_text(names: &[String], a: usize, b: usize, cat: EdgeCategory) -> String {
    match cat.glyph() {
        Some(g) => format!("{} {} {}", names[a], g, names[b]),
        None => format!("{} no edge {}", names[a], names[b]),
    }
}

/// Apply every fact to a copy of `pag`.
pub fn override_with(pag: &Pag, bk: &BackgroundKnowledge) -> Pag {
    let mut out = pag.clone();
    for ((a, b), cat) in bk.iter() {
        out.set_category(a, b, cat);
    }
    out
}

fn batch_rng(seed: u64, batch: usize) -> StdRng {
    StdRng::seed_from_u64(seed ^ (batch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Pick the next arm: highest score (first pair on ties) or uniform at random.
fn select(state: &LearnerState, arms: &[PairKey], cfg: &RunConfig, rng: &mut StdRng) -> (PairKey, Option<f64>) {
    if cfg.selection == Selection::Random {
        return (arms[rng.random_range(0..arms.len())], None);
    }
    let total = state.edges.total();
    let mut best = (arms[0], f64::NEG_INFINITY);
    for &(a, b) in arms {
        let bins = state.edges.bins(a, b);
        let s = selection_score(&bins, cfg.tau(&bins, total), total, &cfg.weights);
        if s > best.1 {
            best = ((a, b), s);
        }
    }
    (best.0, best.1.is_finite().then_some(best.1))
}

/// One round of the loop: FCI on `data` given the current background, then
/// expert refinement, then confounder naming.
pub fn run_batch(state: &mut LearnerState, data: &BatchDataset, expert: &mut dyn Expert, cfg: &RunConfig) -> Result<BatchOutcome> {
    if data.names() != state.variables.as_slice() {
        return Err(Error::VariableMismatch("batch columns differ from the learner's variables".into()));
    }
    let names = state.variables.clone();
    let index = state.batch;
    let mut trace = BatchTrace::default();

    let fci_pag = if data.is_empty() {
        let msg = format!("batch {} is empty; previous graph repeated", index + 1);
        log::warn!("{msg}");
        trace.warnings.push(msg);
        match &state.last_fci {
            Some(p) => p.clone(),
            None => Pag::new(names.clone())?,
        }
    } else {
        let test = build_test(data, cfg.fci.ci_test, cfg.fci.alpha)?;
        fci(test.as_ref(), &names, &state.background, &cfg.fci)?
    };

    let mut rng = batch_rng(cfg.seed, index);
    for _ in 0..cfg.edge_budget {
        let arms: Vec<PairKey> = all_pairs(names.len()).into_iter().filter(|&(a, b)| !state.background.contains(a, b)).collect();
        if arms.is_empty() {
            break;
        }
        let ((a, b), score) = select(state, &arms, cfg, &mut rng);
        let ctx = QueryContext { known: state.background.describe(&names) };
        trace.edge_queries += 1;
        let mut rec = QueryRecord {
            kind: QueryKind::Edge,
            pair: [names[a].clone(), names[b].clone()],
            score,
            answer: None,
            error: None,
            promoted: None,
        };
        match expert.query_edge(a, b, &ctx) {
            Ok(ans) => {
                state.edges.update(a, b, ans.category)?;
                rec.answer = Some(category_text(&names, a, b, ans.category));
                let bins = state.edges.bins(a, b);
                let tau = cfg.tau(&bins, state.edges.total());
                if let Some(cat) = promote(&bins, tau) {
                    state.background.insert(a, b, cat, index + 1)?;
                    rec.promoted = Some(category_text(&names, a, b, cat));
                }
            }
            Err(e @ Error::ExpertAuth(_)) => return Err(e),
            Err(e) if e.is_external() => {
                log::warn!("edge query {}-{} failed: {e}", names[a], names[b]);
                trace.failures += 1;
                rec.error = Some(e.to_string());
            }
            Err(e) => return Err(e),
        }
        trace.records.push(rec);
    }

    let confounded: Vec<PairKey> =
        state.background.iter().filter(|(_, c)| *c == EdgeCategory::Bidirected).map(|(k, _)| k).collect();
    if !confounded.is_empty() {
        for k in 0..cfg.latent_budget {
            let (a, b) = confounded[k % confounded.len()];
            trace.confounder_queries += 1;
            let mut rec = QueryRecord {
                kind: QueryKind::Confounder,
                pair: [names[a].clone(), names[b].clone()],
                score: None,
                answer: None,
                error: None,
                promoted: None,
            };
            match expert.query_confounder(a, b) {
                Ok(ans) => {
                    state.latents.update(a, b, ans.label());
                    rec.answer = Some(ans.label().to_string());
                }
                Err(e @ Error::ExpertAuth(_)) => return Err(e),
                Err(e) if e.is_external() => {
                    trace.failures += 1;
                    rec.error = Some(e.to_string());
                }
                Err(e) => return Err(e),
            }
            trace.records.push(rec);
        }
    }

    let pag = override_with(&fci_pag, &state.background);
    state.last_fci = Some(fci_pag.clone());
    state.batch += 1;
    Ok(BatchOutcome { fci_pag, pag, trace })
}

#[derive(Clone, Debug, Serialize)]
pub struct BatchReport {
    pub batch: usize,
    pub rows: usize,
    pub fci_pag: Pag,
    pub pag: Pag,
    pub metrics: Option<MetricReport>,
    pub mean_entropy: Option<f64>,
    pub background_size: usize,
    pub trace: BatchTrace,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfounderSummary {
    pub pair: [String; 2],
    pub modal: Option<String>,
    pub counts: std::collections::BTreeMap<String, u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SequenceReport {
    pub schema_version: u32,
    pub variant: String,
    pub seed: u64,
    pub variables: Vec<String>,
    pub batches: Vec<BatchReport>,
    pub background: Vec<String>,
    pub edge_histogram: EdgeHistogram,
    pub confounders: Vec<ConfounderSummary>,
}

impl SequenceReport {
    pub fn final_pag(&self) -> &Pag {
        &self.batches.last().expect("at least one batch").pag
    }

    pub fn entropy_trace(&self) -> Vec<Option<f64>> {
        self.batches.iter().map(|b| b.mean_entropy).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Score a graph against the truth; failures are logged and give `None`.
pub fn score_against(pag: &Pag, truth: Option<&Dag>, mean_entropy: Option<f64>, warnings: &mut Vec<String>) -> Option<MetricReport> {
    let truth = truth?;
    match evaluate(pag, truth, mean_entropy) {
        Ok(m) => Some(m),
        Err(e) => {
            let msg = format!("metrics unavailable: {e}");
            log::warn!("{msg}");
            warnings.push(msg);
            None
        }
    }
}

/// Fold [`run_batch`] over the batches from an empty state.
pub fn run_sequence(batches: &[BatchDataset], expert: &mut dyn Expert, cfg: &RunConfig, truth: Option<&Dag>) -> Result<SequenceReport> {
    cfg.validate()?;
    let first = batches.first().ok_or_else(|| Error::Config("at least one batch is required".into()))?;
    let mut state = LearnerState::new(first.names().to_vec());
    let mut reports = Vec::with_capacity(batches.len());
    for data in batches {
        let mut out = run_batch(&mut state, data, expert, cfg)?;
        let mean_entropy = state.edges.mean_entropy().ok();
        let metrics = score_against(&out.pag, truth, mean_entropy, &mut out.trace.warnings);
        reports.push(BatchReport {
            batch: state.batch,
            rows: data.n_rows(),
            fci_pag: out.fci_pag,
            pag: out.pag,
            metrics,
            mean_entropy,
            background_size: state.background.len(),
            trace: out.trace,
        });
    }
    let names = &state.variables;
    let confounders = state
        .latents
        .pairs()
        .map(|((a, b), counts)| ConfounderSummary {
            pair: [names[a].clone(), names[b].clone()],
            modal: state.latents.modal(a, b).map(str::to_string),
            counts: counts.clone(),
        })
        .collect();
    Ok(SequenceReport {
        schema_version: SCHEMA_VERSION,
        variant: "nlpscm".into(),
        seed: cfg.seed,
        variables: names.clone(),
        background: state.background.describe(names),
        batches: reports,
        edge_histogram: state.edges,
        confounders,
    })
}

#[cfg(test)]
mod tests;
