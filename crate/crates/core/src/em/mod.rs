//! Parameter estimation for linear-Gaussian models with at most one latent
//! confounder: least-squares warm start, then EM with an exact Gaussian
//! E-step and a penalized proximal-gradient M-step.

mod model;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::BatchDataset;
use crate::error::{Error, Result};
use crate::expert::GaussianPrior;
use crate::graph::Dag;
use crate::sem::SemSpec;

pub use model::LatentPosterior;
use model::{Equation, Model, Params};

/// How a suggested correlation becomes a target for a latent edge weight.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyTarget {
    /// Coefficient of the latent when regressing the child on its observed
    /// parents and the latent, using sample covariances and the suggested
    /// correlations. Equals `Marginal` when those parents are uncorrelated
    /// with the latent.
    #[default]
    Partial,
    /// `rho * sd(child) / sd(latent)`.
    Marginal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    pub learning_rate: f64,
    pub max_e_steps: usize,
    pub max_m_steps: usize,
    /// Weight of the penalty tying latent weights to the suggested correlations.
    pub lambda: f64,
    /// Stop a batch once the objective gains less than this per alternation.
    pub tolerance: f64,
    /// Ridge added to singular least-squares designs.
    pub ridge: f64,
    /// Seeds the random latent-weight initialisation used without correlations.
    pub seed: u64,
    pub penalty_target: PenaltyTarget,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig { learning_rate: 0.001, max_e_steps: 20, max_m_steps: 50, lambda: 5.0, tolerance: 1e-6, ridge: 1e-6, seed: 0, penalty_target: PenaltyTarget::Partial }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config("lambda must be nonnegative".into()));
        }
        if !(self.tolerance >= 0.0) || !(self.ridge > 0.0) {
            return Err(Error::Config("tolerance must be nonnegative and ridge positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightEntry {
    pub from: String,
    pub to: String,
    pub weight: f64,
}

/// Edge weights, intercepts and the shared noise variance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemParams {
    pub observed: Vec<WeightEntry>,
    pub latent: Vec<WeightEntry>,
    #[serde(default)]
    pub intercepts: BTreeMap<String, f64>,
    pub noise_variance: f64,
}

impl SemParams {
    /// True weights of a linear model, split into observed and latent edges.
    pub fn from_spec(spec: &SemSpec) -> Result<Self> {
        let dag = &spec.dag;
        if !dag.is_weighted() {
            return Err(Error::Config("ground truth needs edge weights".into()));
        }
        let names = dag.variables();
        let mut out = SemParams { observed: Vec::new(), latent: Vec::new(), intercepts: BTreeMap::new(), noise_variance: spec.noise_variance };
        for (s, d) in dag.edges() {
            if dag.is_latent(d) {
                continue;
            }
            let e = WeightEntry { from: names[s].clone(), to: names[d].clone(), weight: dag.weight(s, d).expect("weighted") };
            if dag.is_latent(s) {
                out.latent.push(e);
            } else {
                out.observed.push(e);
            }
        }
        Ok(out)
    }

    fn weights(&self) -> BTreeMap<(bool, &str, &str), f64> {
        let o = self.observed.iter().map(|e| ((false, e.from.as_str(), e.to.as_str()), e.weight));
        let l = self.latent.iter().map(|e| ((true, e.from.as_str(), e.to.as_str()), e.weight));
        o.chain(l).collect()
    }
}

/// Euclidean distance between the weight vectors (noise and intercepts excluded).
pub fn param_error(est: &SemParams, truth: &SemParams) -> Result<f64> {
    let (a, b) = (est.weights(), truth.weights());
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::Estimation("estimated and reference edge sets differ".into()));
    }
    Ok(a.values().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// The model skeleton: which data column each equation explains.
struct Layout {
    eqs: Vec<Equation>,
    /// data column -> dag node
    node_of: Vec<usize>,
    latent: Option<usize>,
}

fn layout(dag: &Dag, data: &BatchDataset) -> Result<Layout> {
    let latents = dag.latents();
    if latents.len() > 1 {
        return Err(Error::Estimation(format!("{} latent nodes; at most one is supported", latents.len())));
    }
    let latent = latents.first().copied();
    if let Some(l) = latent {
        if !dag.parents(l).is_empty() {
            return Err(Error::Estimation("the latent node must be a root".into()));
        }
    }
    let obs = dag.observed();
    let mut col_of = vec![usize::MAX; dag.len()];
    let mut node_of = Vec::with_capacity(obs.len());
    for (k, &v) in obs.iter().enumerate() {
        let name = &dag.variables()[v];
        data.index_of(name).map_err(|_| Error::VariableMismatch(format!("`{name}` is not a data column")))?;
        col_of[v] = k;
        node_of.push(v);
    }
    let with_parents: Vec<usize> = obs.iter().copied().filter(|&v| !dag.parents(v).is_empty()).collect();
    let modelled = if with_parents.is_empty() { obs.clone() } else { with_parents };
    let eqs = modelled
        .into_iter()
        .map(|v| Equation {
            node: col_of[v],
            parents: dag.parents(v).iter().filter(|&&p| Some(p) != latent).map(|&p| col_of[p]).collect(),
            has_latent: latent.is_some_and(|l| dag.parents(v).contains(&l)),
        })
        .collect();
    Ok(Layout { eqs, node_of, latent })
}

/// Data columns in observed-node order.
fn columns<'a>(dag: &Dag, lay: &Layout, data: &'a BatchDataset) -> Result<Vec<&'a [f64]>> {
    lay.node_of.iter().map(|&v| Ok(data.column(data.index_of(&dag.variables()[v])?))).collect()
}

/// Least squares of `y` on an intercept and `xs`; falls back to ridge when
/// the design is numerically singular. Returns (intercept, weights, ridged).
fn ols(y: &[f64], xs: &[&[f64]], ridge: f64) -> (f64, Vec<f64>, bool) {
    let n = y.len() as f64;
    let p = xs.len();
    let ybar = y.iter().sum::<f64>() / n;
    if p == 0 {
        return (ybar, Vec::new(), false);
    }
    let means: Vec<f64> = xs.iter().map(|x| x.iter().sum::<f64>() / n).collect();
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut r = DVector::<f64>::zeros(p);
    for i in 0..p {
        for j in i..p {
            let v = xs[i].iter().zip(xs[j]).map(|(a, b)| (a - means[i]) * (b - means[j])).sum::<f64>() / n;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        r[i] = xs[i].iter().zip(y).map(|(a, b)| (a - means[i]) * (b - ybar)).sum::<f64>() / n;
    }
    let eig = g.clone().symmetric_eigen();
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let ridged = !(lo > 1e-10 * hi.max(1e-300));
    if ridged {
        for i in 0..p {
            g[(i, i)] += ridge;
        }
    }
    let beta = g.cholesky().map(|c| c.solve(&r)).unwrap_or_else(|| DVector::zeros(p));
    let b = ybar - beta.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    (b, beta.iter().copied().collect(), ridged)
}

fn warm_params(eqs: &[Equation], cols: &[&[f64]], ridge: f64) -> (Params, bool) {
    let n = cols.first().map_or(0, |c| c.len()) as f64;
    let mut any_ridge = false;
    let mut p = Params { theta: Vec::new(), theta_l: vec![0.0; eqs.len()], intercept: Vec::new(), sigma2: 0.0 };
    let mut sse = 0.0;
    for eq in eqs {
        let xs: Vec<&[f64]> = eq.parents.iter().map(|&c| cols[c]).collect();
        let (b, w, r) = ols(cols[eq.node], &xs, ridge);
        any_ridge |= r;
        for row in 0..cols[eq.node].len() {
            let fit = b + w.iter().zip(&xs).map(|(w, x)| w * x[row]).sum::<f64>();
            sse += (cols[eq.node][row] - fit).powi(2);
        }
        p.theta.push(w);
        p.intercept.push(b);
    }
    p.sigma2 = (sse / (n * eqs.len().max(1) as f64)).max(1e-12);
    (p, any_ridge)
}

fn to_sem_params(dag: &Dag, lay: &Layout, p: &Params) -> SemParams {
    let names = dag.variables();
    let node_name = |c: usize| names[lay.node_of[c]].clone();
    let mut out = SemParams { observed: Vec::new(), latent: Vec::new(), intercepts: BTreeMap::new(), noise_variance: p.sigma2 };
    for (k, eq) in lay.eqs.iter().enumerate() {
        for (&c, &w) in eq.parents.iter().zip(&p.theta[k]) {
            out.observed.push(WeightEntry { from: node_name(c), to: node_name(eq.node), weight: w });
        }
        if eq.has_latent {
            let l = lay.latent.expect("latent present");
            out.latent.push(WeightEntry { from: names[l].clone(), to: node_name(eq.node), weight: p.theta_l[k] });
        }
        out.intercepts.insert(node_name(eq.node), p.intercept[k]);
    }
    let key = |e: &WeightEntry| (e.from.clone(), e.to.clone());
    out.observed.sort_by_key(key);
    out.latent.sort_by_key(key);
    out
}

/// Maximum-likelihood fit of the observed part of the graph, ignoring the
/// latent node. The flag reports a ridge fallback.
pub fn mle_warm_start(data: &BatchDataset, dag: &Dag, ridge: f64) -> Result<(SemParams, bool)> {
    let lay = layout(dag, data)?;
    let cols = columns(dag, &lay, data)?;
    if data.n_rows() < 2 {
        return Err(Error::DegenerateData("at least two rows are needed".into()));
    }
    let (mut p, ridged) = warm_params(&lay.eqs, &cols, ridge);
    p.theta_l.iter_mut().for_each(|t| *t = 0.0);
    Ok((to_sem_params(dag, &lay, &p), ridged))
}

/// Exact posterior of the latent for every row of `data` under `params`.
pub fn e_step(data: &BatchDataset, dag: &Dag, params: &SemParams, prior: GaussianPrior) -> Result<LatentPosterior> {
    let lay = layout(dag, data)?;
    let cols = columns(dag, &lay, data)?;
    let p = from_sem_params(dag, &lay, params)?;
    let model = Model { target: vec![f64::NAN; lay.eqs.len()], eqs: lay.eqs.clone(), cols, n: data.n_rows(), prior, lambda: 0.0 };
    model.e_step(&p)
}

/// One batch's penalized objective, for inspection and checking. The
/// posterior is passed in explicitly so derivatives can hold it fixed.
pub struct Problem<'a> {
    dag: &'a Dag,
    lay: Layout,
    model: Model<'a>,
}

impl<'a> Problem<'a> {
    pub fn new(
        data: &'a BatchDataset,
        dag: &'a Dag,
        prior: GaussianPrior,
        rho: &BTreeMap<String, f64>,
        cfg: &EmConfig,
    ) -> Result<Self> {
        let lay = layout(dag, data)?;
        let cols = columns(dag, &lay, data)?;
        let target = targets(dag, &lay, &cols, prior, rho, cfg.penalty_target);
        let model = Model { eqs: lay.eqs.clone(), cols, n: data.n_rows(), prior, target, lambda: cfg.lambda };
        Ok(Problem { dag, lay, model })
    }

    pub fn posterior(&self, params: &SemParams) -> Result<LatentPosterior> {
        self.model.e_step(&from_sem_params(self.dag, &self.lay, params)?)
    }

    /// Per-row free energy minus the penalty.
    pub fn objective(&self, params: &SemParams, q: &LatentPosterior) -> Result<f64> {
        Ok(self.model.objective(&from_sem_params(self.dag, &self.lay, params)?, q))
    }

    /// Gradient of the unpenalized objective, returned in the weight slots
    /// of a copy of `params`.
    pub fn smooth_gradient(&self, params: &SemParams, q: &LatentPosterior) -> Result<SemParams> {
        let p = from_sem_params(self.dag, &self.lay, params)?;
        let (g, gl) = self.model.gradient(&p, q);
        let grad = Params { theta: g, theta_l: gl, ..p };
        let mut out = to_sem_params(self.dag, &self.lay, &grad);
        out.intercepts = params.intercepts.clone();
        out.noise_variance = params.noise_variance;
        Ok(out)
    }
}

fn from_sem_params(dag: &Dag, lay: &Layout, sp: &SemParams) -> Result<Params> {
    let names = dag.variables();
    let w = sp.weights();
    let mut p = Params { theta: Vec::new(), theta_l: vec![0.0; lay.eqs.len()], intercept: Vec::new(), sigma2: sp.noise_variance };
    for (k, eq) in lay.eqs.iter().enumerate() {
        let to = names[lay.node_of[eq.node]].as_str();
        let mut t = Vec::new();
        for &c in &eq.parents {
            let from = names[lay.node_of[c]].as_str();
            t.push(*w.get(&(false, from, to)).ok_or_else(|| Error::Estimation(format!("missing weight {from} -> {to}")))?);
        }
        p.theta.push(t);
        if eq.has_latent {
            let l = names[lay.latent.expect("latent")].as_str();
            p.theta_l[k] = *w.get(&(true, l, to)).ok_or_else(|| Error::Estimation(format!("missing weight {l} -> {to}")))?;
        }
        p.intercept.push(sp.intercepts.get(to).copied().unwrap_or(0.0));
    }
    Ok(p)
}

#[derive(Clone, Debug, Serialize)]
pub struct EmFit {
    /// Parameters after each batch.
    pub params: Vec<SemParams>,
    /// Distance to the reference after each batch, when one was given.
    pub errors: Option<Vec<f64>>,
    /// Objective after every E-step and M-step, per batch.
    pub objectives: Vec<Vec<f64>>,
    pub ridge_fallback: bool,
}

fn sample_cov(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}

/// Penalty target per equation; NaN where no correlation was suggested.
/// Parents without a suggested correlation are taken as uncorrelated with
/// the latent.
fn targets(dag: &Dag, lay: &Layout, cols: &[&[f64]], prior: GaussianPrior, rho: &BTreeMap<String, f64>, mode: PenaltyTarget) -> Vec<f64> {
    let names = dag.variables();
    let sd_l = prior.sd();
    let rho_of = |c: usize| rho.get(&names[lay.node_of[c]]).copied();
    // covariance of a column with the latent implied by the suggestion
    let cov_l = |c: usize| rho_of(c).map(|r| r * sample_cov(cols[c], cols[c]).sqrt() * sd_l);
    lay.eqs
        .iter()
        .map(|eq| {
            let Some(c_l) = cov_l(eq.node).filter(|_| eq.has_latent) else { return f64::NAN };
            let marginal = c_l / prior.variance;
            if mode == PenaltyTarget::Marginal || eq.parents.is_empty() {
                return marginal;
            }
            let k = eq.parents.len();
            let mut g = DMatrix::<f64>::zeros(k + 1, k + 1);
            let mut r = DVector::<f64>::zeros(k + 1);
            for (i, &pi) in eq.parents.iter().enumerate() {
                for (j, &pj) in eq.parents.iter().enumerate() {
                    g[(i, j)] = sample_cov(cols[pi], cols[pj]);
                }
                let pl = cov_l(pi).unwrap_or(0.0);
                g[(i, k)] = pl;
                g[(k, i)] = pl;
                r[i] = sample_cov(cols[pi], cols[eq.node]);
            }
            g[(k, k)] = prior.variance;
            r[k] = c_l;
            match g.cholesky() {
                Some(ch) => ch.solve(&r)[k],
                None => {
                    log::warn!("suggested correlations are inconsistent with the data; using the marginal target");
                    marginal
                }
            }
        })
        .collect()
}

/// Relative slack allowed when checking that the objective never drops.
const MONOTONE_SLACK: f64 = 1e-9;

/// Warm start on the first batch, then EM per batch with parameters carried
/// forward. Without a latent node every batch gets its own least-squares fit.
pub fn fit_em(
    batches: &[BatchDataset],
    dag: &Dag,
    prior: GaussianPrior,
    rho: &BTreeMap<String, f64>,
    cfg: &EmConfig,
    truth: Option<&SemParams>,
) -> Result<EmFit> {
    cfg.validate()?;
    let first = batches.first().ok_or_else(|| Error::Config("at least one batch is required".into()))?;
    let lay = layout(dag, first)?;
    let mut fit = EmFit { params: Vec::new(), errors: truth.map(|_| Vec::new()), objectives: Vec::new(), ridge_fallback: false };

    let mut carried: Option<Params> = None;
    for (bi, data) in batches.iter().enumerate() {
        if data.n_rows() < 2 {
            return Err(Error::DegenerateData(format!("batch {} has fewer than two rows", bi + 1)));
        }
        let cols = columns(dag, &lay, data)?;
        let mut objectives = Vec::new();
        let params = if lay.latent.is_none() {
            let (p, r) = warm_params(&lay.eqs, &cols, cfg.ridge);
            fit.ridge_fallback |= r;
            p
        } else {
            let target = targets(dag, &lay, &cols, prior, rho, cfg.penalty_target);
            let mut p = match carried.take() {
                Some(p) => p,
                None => {
                    let (mut p, r) = warm_params(&lay.eqs, &cols, cfg.ridge);
                    fit.ridge_fallback |= r;
                    let mut rng = StdRng::seed_from_u64(cfg.seed);
                    for (k, eq) in lay.eqs.iter().enumerate() {
                        if eq.has_latent {
                            p.theta_l[k] = if target[k].is_nan() {
                                0.5 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                            } else {
                                target[k]
                            };
                        }
                    }
                    p
                }
            };
            let model = Model { eqs: lay.eqs.clone(), cols, n: data.n_rows(), prior, target, lambda: cfg.lambda };
            let mut last = f64::NEG_INFINITY;
            for step in 0..cfg.max_e_steps {
                let q = model.e_step(&p)?;
                let f = model.objective(&p, &q);
                check_monotone(last, f, bi, step)?;
                if step > 0 && f - last < cfg.tolerance {
                    objectives.push(f);
                    break;
                }
                objectives.push(f);
                let trace = model.m_step(&mut p, &q, cfg.learning_rate, cfg.max_m_steps)?;
                let after = trace.last().copied().unwrap_or(model.objective(&p, &q));
                check_monotone(f, after, bi, step)?;
                objectives.push(after);
                last = after;
            }
            p
        };
        let sp = to_sem_params(dag, &lay, &params);
        if let (Some(t), Some(errs)) = (truth, fit.errors.as_mut()) {
            errs.push(param_error(&sp, t)?);
        }
        fit.params.push(sp);
        fit.objectives.push(objectives);
        carried = Some(params);
    }
    Ok(fit)
}

fn check_monotone(before: f64, after: f64, batch: usize, step: usize) -> Result<()> {
    if after < before - MONOTONE_SLACK * before.abs().max(1.0) {
        return Err(Error::Estimation(format!(
            "objective decreased from {before} to {after} (batch {}, alternation {})",
            batch + 1,
            step + 1
        )));
    }
    Ok(())
}

/// `batch,error` lines for plotting.
pub fn error_trace_csv(errors: &[f64]) -> String {
    let mut s = String::from("batch,l2_error\n");
    for (k, e) in errors.iter().enumerate() {
        s.push_str(&format!("{},{e}\n", k + 1));
    }
    s
}

#[cfg(test)]
mod tests;
