//! FCI over PAGs with injected background knowledge, and the sequential
//! FCI baselines.

mod graph;
mod rules;
mod skeleton;
mod variants;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ci::{CiKind, CiTest};
use crate::error::{Error, Result};
use crate::graph::{BackgroundKnowledge, Pag, PairKey};
use graph::Work;

pub use variants::{run_fci_variant, FciVariant, VariantOutput};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSet {
    /// R1-R4.
    #[default]
    Core,
    /// R1-R4 plus R5-R10.
    Extended,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FciConfig {
    pub alpha: f64,
    /// `None` picks unbounded for at most 10 variables and 3 otherwise.
    pub max_cond_size: Option<usize>,
    /// `None` enables the phase for at most 10 variables.
    pub possible_dsep: Option<bool>,
    pub rules: RuleSet,
    pub ci_test: CiKind,
}

impl Default for FciConfig {
    fn default() -> Self {
        FciConfig { alpha: 0.1, max_cond_size: None, possible_dsep: None, rules: RuleSet::Core, ci_test: CiKind::Auto }
    }
}

impl FciConfig {
    pub fn effective_max_cond(&self, n: usize) -> usize {
        self.max_cond_size.unwrap_or(if n <= 10 { usize::MAX } else { 3 })
    }

    pub fn effective_possible_dsep(&self, n: usize) -> bool {
        self.possible_dsep.unwrap_or(n <= 10)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("fci alpha must lie in (0,1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Separating sets found while removing edges.
pub type SepsetTable = BTreeMap<PairKey, Vec<usize>>;

#[derive(Clone, Debug)]
pub struct FciOutput {
    pub pag: Pag,
    pub sepsets: SepsetTable,
    pub tests_run: usize,
}

/// Run FCI and return only the PAG.
pub fn fci(test: &dyn CiTest, variables: &[String], background: &BackgroundKnowledge, cfg: &FciConfig) -> Result<Pag> {
    Ok(fci_detailed(test, variables, background, cfg)?.pag)
}

pub fn fci_detailed(
    test: &dyn CiTest,
    variables: &[String],
    background: &BackgroundKnowledge,
    cfg: &FciConfig,
) -> Result<FciOutput> {
    cfg.validate()?;
    let n = variables.len();
    if test.n_vars() != n {
        return Err(Error::VariableMismatch(format!("test covers {} variables, {} names given", test.n_vars(), n)));
    }
    if background.max_index().is_some_and(|m| m >= n) {
        return Err(Error::UnknownVariable("background fact outside the variable set".into()));
    }
    let max_cond = cfg.effective_max_cond(n);

    let mut g = Work::complete(n);
    let mut pinned_absent = Vec::new();
    for ((a, b), cat) in background.iter() {
        if cat.is_present() {
            g.set_category(a, b, cat);
            g.lock(a, b);
        } else {
            g.remove(a, b);
            g.lock(a, b);
            pinned_absent.push((a, b));
        }
    }

    let mut sepsets = SepsetTable::new();
    let mut tests_run = skeleton::adjacency_search(test, &mut g, &mut sepsets, max_cond)?;
    tests_run += skeleton::sepsets_for_pinned(test, &g, &mut sepsets, &pinned_absent, max_cond)?;

    rules::orient_colliders(&mut g, &sepsets);
    if cfg.effective_possible_dsep(n) {
        let (removed, t) = skeleton::possible_dsep_search(test, &mut g, &mut sepsets, max_cond)?;
        tests_run += t;
        if removed > 0 {
            g.reset_unlocked();
            rules::orient_colliders(&mut g, &sepsets);
        }
    }
    rules::apply_to_fixpoint(&mut g, &sepsets, cfg.rules);

    // re-assert pinned facts
    for ((a, b), cat) in background.iter() {
        g.set_category(a, b, cat);
    }
    Ok(FciOutput { pag: g.to_pag(variables), sepsets, tests_run })
}
