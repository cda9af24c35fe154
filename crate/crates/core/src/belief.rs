//! Edge-level belief: answer histograms, entropy, the dynamic promotion
//! threshold and the selection score.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::{pair_key, EdgeCategory, PairKey};

pub const BINS: usize = 7;
pub type Bins = [u64; BINS];

/// Floor on the threshold distance so its reciprocal stays finite.
pub const TD_FLOOR: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    /// Mixing weight between distributional and sampling uncertainty.
    pub alpha: f64,
    pub min_threshold: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights { w1: 0.1, w2: 0.6, w3: 0.3, alpha: 0.3, min_threshold: 10.0 }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.w1, self.w2, self.w3];
        if ws.iter().any(|w| !(*w >= 0.0)) || ws.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("score weights must be nonnegative with a positive sum".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("threshold alpha must lie in [0,1]".into()));
        }
        if !(self.min_threshold >= 0.0) {
            return Err(Error::Config("min_threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Natural-log Shannon entropy of the normalized counts; `0 ln 0 = 0`.
pub fn entropy(bins: &[u64]) -> Result<f64> {
    let t: u64 = bins.iter().sum();
    if t == 0 {
        return Err(Error::UndefinedEntropy);
    }
    let t = t as f64;
    Ok(bins
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0))
}

/// `alpha * E * Te + (1 - alpha) * sqrt(Te * (1 - Te / T))`.
pub fn dynamic_threshold(bins: &[u64], alpha: f64, total: u64) -> Result<f64> {
    let te: u64 = bins.iter().sum();
    if te == 0 {
        return Err(Error::UndefinedEntropy);
    }
    let e = entropy(bins)?;
    let (te, t) = (te as f64, (total.max(te)) as f64);
    let sampling = (te * (1.0 - te / t)).max(0.0).sqrt();
    Ok(alpha * e * te + (1.0 - alpha) * sampling)
}

/// Promotion threshold actually applied: the dynamic value floored at
/// `min_threshold`.
pub fn effective_threshold(bins: &[u64], alpha: f64, total: u64, min_threshold: f64) -> Result<f64> {
    Ok(dynamic_threshold(bins, alpha, total)?.max(min_threshold))
}

/// Score from its parts; `td` is floored at [`TD_FLOOR`] and the exploration
/// bonus is zero for `total < 2`.
pub fn score_terms(e: f64, td: f64, total: u64, te: u64, w: &ScoreWeights) -> f64 {
    if te == 0 {
        return f64::INFINITY;
    }
    let td = td.max(TD_FLOOR);
    let bonus = if total < 2 { 0.0 } else { ((total as f64).ln() / te as f64).sqrt() };
    w.w1 * e + w.w2 / td + w.w3 * bonus
}

/// Selection score of a pair; unqueried pairs score `+inf`.
pub fn selection_score(bins: &[u64], tau_eff: f64, total: u64, w: &ScoreWeights) -> f64 {
    let te: u64 = bins.iter().sum();
    if te == 0 {
        return f64::INFINITY;
    }
    let e = entropy(bins).expect("te > 0");
    let max = *bins.iter().max().unwrap_or(&0) as f64;
    score_terms(e, tau_eff - max, total, te, w)
}

/// Modal category when its count reaches `tau_eff`; ties go to the first bin.
pub fn promote(bins: &[u64], tau_eff: f64) -> Option<EdgeCategory> {
    let (best, &count) = bins
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (count > 0 && count as f64 >= tau_eff).then_some(EdgeCategory::QUERYABLE[best])
}

/// Per-pair answer counts, bins oriented to the (lo, hi) key.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeHistogram {
    counts: BTreeMap<PairKey, Bins>,
    total: u64,
}

impl EdgeHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record one answer for (a, b), read with `a` as the first endpoint.
    pub fn update(&mut self, a: usize, b: usize, answer: EdgeCategory) -> Result<()> {
        let norm = if a < b { answer } else { answer.reversed() };
        let bin = norm
            .bin()
            .ok_or_else(|| Error::Config(format!("{answer:?} is not a queryable category")))?;
        self.counts.entry(pair_key(a, b)).or_insert([0; BINS])[bin] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn bins(&self, a: usize, b: usize) -> Bins {
        self.counts.get(&pair_key(a, b)).copied().unwrap_or([0; BINS])
    }

    pub fn pair_total(&self, a: usize, b: usize) -> u64 {
        self.bins(a, b).iter().sum()
    }

    /// Global count `T`.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn entropy(&self, a: usize, b: usize) -> Result<f64> {
        entropy(&self.bins(a, b))
    }

    pub fn queried_pairs(&self) -> impl Iterator<Item = (PairKey, &Bins)> {
        self.counts.iter().map(|(k, v)| (*k, v))
    }

    /// Mean entropy over pairs queried at least once.
    pub fn mean_entropy(&self) -> Result<f64> {
        if self.counts.is_empty() {
            return Err(Error::NoQueriedPairs);
        }
        let sum: f64 = self.counts.values().map(|b| entropy(b).expect("nonempty")).sum();
        Ok(sum / self.counts.len() as f64)
    }
}

#[derive(Serialize, Deserialize)]
struct PairCounts<T> {
    pair: [usize; 2],
    counts: T,
}

impl Serialize for EdgeHistogram {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<PairCounts<Bins>> =
            self.counts.iter().map(|(&(a, b), c)| PairCounts { pair: [a, b], counts: *c }).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for EdgeHistogram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<PairCounts<Bins>> = Vec::deserialize(d)?;
        let mut h = EdgeHistogram::new();
        for pc in v {
            let [a, b] = pc.pair;
            if a >= b {
                return Err(serde::de::Error::custom("pair must be ordered (lo, hi)"));
            }
            h.total += pc.counts.iter().sum::<u64>();
            h.counts.insert((a, b), pc.counts);
        }
        Ok(h)
    }
}

/// Per-pair counts of suggested confounder names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LatentHistogram {
    counts: BTreeMap<PairKey, BTreeMap<String, u64>>,
}

impl LatentHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, a: usize, b: usize, name: &str) {
        *self.counts.entry(pair_key(a, b)).or_default().entry(name.to_string()).or_default() += 1;
    }

    pub fn names(&self, a: usize, b: usize) -> Option<&BTreeMap<String, u64>> {
        self.counts.get(&pair_key(a, b))
    }

    /// Most frequent name; ties go to the lexicographically first.
    pub fn modal(&self, a: usize, b: usize) -> Option<&str> {
        self.names(a, b)?
            .iter()
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
            .map(|(n, _)| n.as_str())
    }

    pub fn pairs(&self) -> impl Iterator<Item = (PairKey, &BTreeMap<String, u64>)> {
        self.counts.iter().map(|(k, v)| (*k, v))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().flat_map(|m| m.values()).sum()
    }
}

impl Serialize for LatentHistogram {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<PairCounts<&BTreeMap<String, u64>>> =
            self.counts.iter().map(|(&(a, b), c)| PairCounts { pair: [a, b], counts: c }).collect();
        v.serialize(s)
    }
}
