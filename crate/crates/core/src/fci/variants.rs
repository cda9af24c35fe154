use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{fci, FciConfig};
use crate::ci::build_test;
use crate::data::BatchDataset;
use crate::error::{Error, Result};
use crate::graph::{BackgroundKnowledge, EdgeCategory, Pag, PairKey};

/// Sequential FCI baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FciVariant {
    /// FCI on all data seen so far.
    Cumulative,
    /// FCI on each batch alone.
    Vanilla,
    /// Previous batch's adjacencies pinned as background.
    Iterative,
    /// Categories seen in at least `h` earlier outputs pinned as background.
    Heuristics { h: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct VariantOutput {
    pub pags: Vec<Pag>,
    pub warnings: Vec<String>,
}

/// Pin every adjacency of `pag` as a fact.
pub fn adjacencies_as_background(pag: &Pag, batch: usize) -> BackgroundKnowledge {
    let mut bk = BackgroundKnowledge::new();
    for ((a, b), _) in pag.edges() {
        bk.insert(a, b, pag.category(a, b), batch).expect("fresh background");
    }
    bk
}

/// Categories present in at least `h` of the recorded outputs; the most
/// frequent wins, ties go to the canonical category order.
fn heuristic_background(counts: &BTreeMap<PairKey, BTreeMap<EdgeCategory, usize>>, h: usize, batch: usize) -> BackgroundKnowledge {
    let mut bk = BackgroundKnowledge::new();
    for (&(a, b), per_cat) in counts {
        let best = per_cat
            .iter()
            .filter(|(_, &c)| c >= h)
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)));
        if let Some((&cat, _)) = best {
            bk.insert(a, b, cat, batch).expect("fresh background");
        }
    }
    bk
}

pub fn run_fci_variant(mode: FciVariant, batches: &[BatchDataset], cfg: &FciConfig) -> Result<VariantOutput> {
    let first = batches.first().ok_or_else(|| Error::Config("at least one batch is required".into()))?;
    if let FciVariant::Heuristics { h } = mode {
        if h == 0 {
            return Err(Error::Config("heuristics window h must be at least 1".into()));
        }
    }
    let names = first.names().to_vec();
    let mut pags: Vec<Pag> = Vec::with_capacity(batches.len());
    let mut warnings = Vec::new();
    let mut seen: Vec<&BatchDataset> = Vec::new();
    let mut counts: BTreeMap<PairKey, BTreeMap<EdgeCategory, usize>> = BTreeMap::new();

    for (i, batch) in batches.iter().enumerate() {
        if batch.names() != names.as_slice() {
            return Err(Error::VariableMismatch(format!("batch {} has different columns", i + 1)));
        }
        if batch.is_empty() {
            let msg = format!("batch {} is empty; previous graph repeated", i + 1);
            log::warn!("{msg}");
            warnings.push(msg);
            let prev = pags.last().cloned().unwrap_or_else(|| Pag::new(names.clone()).expect("validated"));
            pags.push(prev);
            continue;
        }
        seen.push(batch);
        let (data, bk) = match mode {
            FciVariant::Cumulative => (BatchDataset::concat(&seen)?, BackgroundKnowledge::new()),
            FciVariant::Vanilla => (batch.clone(), BackgroundKnowledge::new()),
            FciVariant::Iterative => {
                let bk = pags.last().map(|p| adjacencies_as_background(p, i)).unwrap_or_default();
                (batch.clone(), bk)
            }
            FciVariant::Heuristics { h } => (batch.clone(), heuristic_background(&counts, h, i)),
        };
        let test = build_test(&data, cfg.ci_test, cfg.alpha)?;
        let pag = fci(test.as_ref(), &names, &bk, cfg)?;
        for ((a, b), _) in pag.edges() {
            *counts.entry((a, b)).or_default().entry(pag.category(a, b)).or_default() += 1;
        }
        pags.push(pag);
    }
    Ok(VariantOutput { pags, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heuristic_promotes_after_h_sightings() {
        let mut counts: BTreeMap<PairKey, BTreeMap<EdgeCategory, usize>> = BTreeMap::new();
        counts.entry((0, 1)).or_default().insert(EdgeCategory::Directed, 2);
        counts.entry((0, 2)).or_default().insert(EdgeCategory::Nondirected, 1);
        let bk = heuristic_background(&counts, 2, 2);
        assert_eq!(bk.get(0, 1), Some(EdgeCategory::Directed));
        assert!(!bk.contains(0, 2));
    }

    #[test]
    fn heuristic_tie_uses_canonical_order() {
        let mut counts: BTreeMap<PairKey, BTreeMap<EdgeCategory, usize>> = BTreeMap::new();
        let e = counts.entry((0, 1)).or_default();
        e.insert(EdgeCategory::Nondirected, 2);
        e.insert(EdgeCategory::Directed, 2);
        assert_eq!(heuristic_background(&counts, 2, 2).get(0, 1), Some(EdgeCategory::Directed));
    }
}
