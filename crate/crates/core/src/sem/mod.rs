//! Ground-truth fixtures and synthetic data from structural equation models.

mod fixtures;
mod split;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{BatchDataset, VarKind};
use crate::error::{Error, Result};
use crate::graph::Dag;

pub use fixtures::{fixture, Fixture, FIXTURE_NAMES};
pub use split::{split_batches, SelectionBias};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    pub fn new(mean: f64, variance: f64) -> Self {
        Gaussian { mean, variance }
    }

    pub fn standard() -> Self {
        Gaussian { mean: 0.0, variance: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemKind {
    /// `X = sum(w * parent) + e`, `e ~ N(0, noise_variance)`; roots Gaussian.
    Linear,
    /// Binary `X ~ Bernoulli(sigmoid(intercept + sum(w * parent)))`.
    Logistic,
}

/// A weighted DAG with its node distributions.
#[derive(Clone, Debug)]
pub struct SemSpec {
    pub dag: Dag,
    pub kind: SemKind,
    /// Root distributions for linear models; missing roots are `N(0,1)`.
    pub roots: BTreeMap<String, Gaussian>,
    pub noise_variance: f64,
    /// Logistic intercepts; missing entries are 0.
    pub intercepts: BTreeMap<String, f64>,
}

impl SemSpec {
    pub fn linear(dag: Dag, roots: BTreeMap<String, Gaussian>, noise_variance: f64) -> Result<Self> {
        let spec = SemSpec { dag, kind: SemKind::Linear, roots, noise_variance, intercepts: BTreeMap::new() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dag.is_weighted() && self.dag.edge_count() > 0 {
            return Err(Error::Config("SEM needs a weight on every edge".into()));
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::Config("noise variance must be positive".into()));
        }
        for (name, g) in &self.roots {
            let v = self.dag.index_of(name)?;
            if !self.dag.parents(v).is_empty() {
                return Err(Error::Config(format!("`{name}` has parents but a root distribution")));
            }
            if !(g.variance > 0.0) {
                return Err(Error::Config(format!("root `{name}` needs a positive variance")));
            }
        }
        for name in self.intercepts.keys() {
            self.dag.index_of(name)?;
        }
        Ok(())
    }

    pub fn root(&self, v: usize) -> Gaussian {
        self.roots.get(&self.dag.variables()[v]).copied().unwrap_or_else(Gaussian::standard)
    }

    fn intercept(&self, v: usize) -> f64 {
        self.intercepts.get(&self.dag.variables()[v]).copied().unwrap_or(0.0)
    }

    /// Weight matrix with `w[(i, j)]` the weight of `i -> j`.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let n = self.dag.len();
        let mut w = DMatrix::zeros(n, n);
        for (s, d) in self.dag.edges() {
            w[(s, d)] = self.dag.weight(s, d).unwrap_or(0.0);
        }
        w
    }

    /// Closed-form mean and covariance of a linear model over all nodes.
    pub fn implied_moments(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if self.kind != SemKind::Linear {
            return Err(Error::Config("closed-form moments need a linear SEM".into()));
        }
        let n = self.dag.len();
        let w = self.weight_matrix();
        let a = (DMatrix::identity(n, n) - w.transpose())
            .try_inverse()
            .ok_or_else(|| Error::Config("I - W is singular".into()))?;
        let mut d = DMatrix::zeros(n, n);
        let mut m = DVector::zeros(n);
        for v in 0..n {
            if self.dag.parents(v).is_empty() {
                let g = self.root(v);
                d[(v, v)] = g.variance;
                m[v] = g.mean;
            } else {
                d[(v, v)] = self.noise_variance;
            }
        }
        Ok((&a * m, &a * d * a.transpose()))
    }

    /// Closed-form correlation between two nodes of a linear model.
    pub fn implied_correlation(&self, a: usize, b: usize) -> Result<f64> {
        let (_, s) = self.implied_moments()?;
        Ok(s[(a, b)] / (s[(a, a)] * s[(b, b)]).sqrt())
    }

    /// Sample `n` rows of every node, latent ones included.
    pub fn simulate_full(&self, n: usize, seed: u64) -> Result<BatchDataset> {
        self.validate()?;
        let mut rng = StdRng::seed_from_u64(seed);
        let nv = self.dag.len();
        let order = self.dag.topological_order();
        let mut cols = vec![vec![0.0; n]; nv];
        let noise_sd = self.noise_variance.sqrt();
        for r in 0..n {
            for &v in &order {
                let lin: f64 = self
                    .dag
                    .parents(v)
                    .iter()
                    .map(|&p| self.dag.weight(p, v).unwrap_or(0.0) * cols[p][r])
                    .sum();
                cols[v][r] = match self.kind {
                    SemKind::Linear => {
                        let z: f64 = rng.sample(StandardNormal);
                        if self.dag.parents(v).is_empty() {
                            let g = self.root(v);
                            g.mean + g.variance.sqrt() * z
                        } else {
                            lin + noise_sd * z
                        }
                    }
                    SemKind::Logistic => {
                        let p = 1.0 / (1.0 + (-(self.intercept(v) + lin)).exp());
                        let u: f64 = rng.random();
                        if u < p {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
            }
        }
        let kind = match self.kind {
            SemKind::Linear => VarKind::Continuous,
            SemKind::Logistic => VarKind::Categorical { levels: 2 },
        };
        BatchDataset::new(self.dag.variables().to_vec(), vec![kind; nv], cols)
    }

    /// Sample `n` rows of the observed nodes.
    pub fn simulate(&self, n: usize, seed: u64) -> Result<BatchDataset> {
        self.simulate_full(n, seed)?.project(&self.dag.observed_names())
    }
}

pub fn simulate(spec: &SemSpec, n: usize, seed: u64) -> Result<BatchDataset> {
    spec.simulate(n, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(w: f64) -> SemSpec {
        let dag = Dag::new(vec!["A".into(), "B".into()], &[(0, 1)], vec![false; 2], Some(vec![w])).unwrap();
        SemSpec::linear(dag, BTreeMap::from([("A".to_string(), Gaussian::new(10.0, 1.0))]), 0.05).unwrap()
    }

    #[test]
    fn root_mean_matches() {
        let d = edge(0.65).simulate(100_000, 1).unwrap();
        let m = d.column(0).iter().sum::<f64>() / 1e5;
        assert!((m - 10.0).abs() < 0.05);
    }

    #[test]
    fn regression_slope_matches_weight() {
        let d = edge(0.65).simulate(100_000, 2).unwrap();
        let (a, b) = (d.column(0), d.column(1));
        let ma = a.iter().sum::<f64>() / 1e5;
        let mb = b.iter().sum::<f64>() / 1e5;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / 1e5;
        let var: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / 1e5;
        assert!((cov / var - 0.65).abs() < 0.02);
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let s = edge(0.5);
        assert_eq!(s.simulate(50, 7).unwrap(), s.simulate(50, 7).unwrap());
        assert_ne!(s.simulate(50, 7).unwrap(), s.simulate(50, 8).unwrap());
    }

    #[test]
    fn implied_moments_of_single_edge() {
        let (m, s) = edge(0.5).implied_moments().unwrap();
        assert!((m[1] - 5.0).abs() < 1e-12);
        assert!((s[(1, 1)] - (0.25 + 0.05)).abs() < 1e-12);
        assert!((s[(0, 1)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn latent_columns_dropped() {
        let dag = Dag::new(
            vec!["L".into(), "A".into()],
            &[(0, 1)],
            vec![true, false],
            Some(vec![1.0]),
        )
        .unwrap();
        let s = SemSpec::linear(dag, BTreeMap::new(), 1.0).unwrap();
        assert_eq!(s.simulate(5, 0).unwrap().names(), &["A".to_string()]);
        assert_eq!(s.simulate_full(5, 0).unwrap().n_cols(), 2);
    }
}
