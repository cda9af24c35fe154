use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{ConfounderAnswer, Expert, ExpertAnswer, GaussianPrior, QueryContext};
use crate::error::{Error, Result};
use crate::graph::EdgeCategory;
use crate::sem::Fixture;
use crate::sem::{SemKind, SemSpec};

/// Oracle that knows the ground-truth DAG and lies with probability `noise`.
#[derive(Clone, Debug)]
pub struct SimulatedExpert {
    spec: SemSpec,
    /// observed index -> node index in the full DAG
    observed: Vec<usize>,
    /// latent node -> the name it is known by
    names: BTreeMap<usize, String>,
    distractors: Vec<String>,
    prior: GaussianPrior,
    noise: f64,
    rng: StdRng,
}

impl SimulatedExpert {
    pub fn new(fixture: &Fixture, noise: f64, prior: Option<GaussianPrior>, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::Config(format!("expert noise must lie in [0,1], got {noise}")));
        }
        let dag = &fixture.spec.dag;
        let mut names = BTreeMap::new();
        for l in dag.latents() {
            let v = &dag.variables()[l];
            let label = fixture.confounder_names.get(v).cloned().unwrap_or_else(|| v.clone());
            names.insert(l, label);
        }
        let prior = match (prior, fixture.prior) {
            (Some(p), _) => p,
            (None, Some(g)) => GaussianPrior::new(g.mean, g.variance)?,
            (None, None) => GaussianPrior { mean: 0.0, variance: 1.0 },
        };
        Ok(SimulatedExpert {
            spec: fixture.spec.clone(),
            observed: dag.observed(),
            names,
            distractors: fixture.distractors.iter().filter(|d| !fixture.confounder_names.values().any(|n| n == *d)).cloned().collect(),
            prior,
            noise,
            rng: StdRng::seed_from_u64(seed),
        })
    }

    pub fn variables(&self) -> Vec<String> {
        self.spec.dag.observed_names()
    }

    fn node(&self, i: usize) -> Result<usize> {
        self.observed.get(i).copied().ok_or_else(|| Error::UnknownVariable(format!("#{i}")))
    }

    /// Category the noiseless oracle would give, oriented from `a` to `b`.
    pub fn truth(&self, a: usize, b: usize) -> Result<EdgeCategory> {
        let (x, y) = (self.node(a)?, self.node(b)?);
        let dag = &self.spec.dag;
        Ok(if dag.has_edge(x, y) {
            EdgeCategory::Directed
        } else if dag.has_edge(y, x) {
            EdgeCategory::ReverseDirected
        } else if self.confounder_of(x, y).is_some() {
            EdgeCategory::Bidirected
        } else {
            EdgeCategory::NoEdge
        })
    }

    fn confounder_of(&self, x: usize, y: usize) -> Option<usize> {
        let dag = &self.spec.dag;
        self.names.keys().copied().find(|&l| dag.has_edge(l, x) && dag.has_edge(l, y))
    }

    fn corrupt(&mut self) -> bool {
        self.noise > 0.0 && self.rng.random::<f64>() < self.noise
    }
}

impl Expert for SimulatedExpert {
    fn query_edge(&mut self, a: usize, b: usize, _ctx: &QueryContext) -> Result<ExpertAnswer> {
        if a == b {
            return Err(Error::SelfLoop(format!("#{a}")));
        }
        let truth = self.truth(a, b)?;
        let category = if self.corrupt() {
            let others: Vec<EdgeCategory> = EdgeCategory::QUERYABLE.into_iter().filter(|c| *c != truth).collect();
            others[self.rng.random_range(0..others.len())]
        } else {
            truth
        };
        Ok(ExpertAnswer { category, raw: None })
    }

    fn query_confounder(&mut self, a: usize, b: usize) -> Result<ConfounderAnswer> {
        let (x, y) = (self.node(a)?, self.node(b)?);
        let truth = self.confounder_of(x, y).map(|l| self.names[&l].clone());
        if self.corrupt() || truth.is_none() {
            if self.distractors.is_empty() {
                return Ok(ConfounderAnswer::Undefined);
            }
            let k = self.rng.random_range(0..self.distractors.len());
            return Ok(ConfounderAnswer::Named(self.distractors[k].clone()));
        }
        Ok(ConfounderAnswer::Named(truth.unwrap_or_default()))
    }

    fn query_prior(&mut self, _confounder: &str, _neighbors: &[usize]) -> Result<GaussianPrior> {
        Ok(self.prior)
    }

    fn query_correlation(&mut self, confounder: &str, neighbors: &[usize]) -> Result<BTreeMap<String, f64>> {
        let Some(l) = self.names.iter().find(|(_, n)| n.as_str() == confounder).map(|(l, _)| *l) else {
            return Ok(BTreeMap::new());
        };
        if self.spec.kind != SemKind::Linear {
            return Ok(BTreeMap::new());
        }
        let (_, s) = self.spec.implied_moments()?;
        let mut out = BTreeMap::new();
        for &i in neighbors {
            let v = self.node(i)?;
            let r = s[(l, v)] / (s[(l, l)] * s[(v, v)]).sqrt();
            out.insert(self.spec.dag.variables()[v].clone(), r.clamp(-1.0, 1.0));
        }
        Ok(out)
    }
}
