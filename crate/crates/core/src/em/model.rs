use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::expert::GaussianPrior;

/// One regression `x_v = b_v + sum theta * x_parents (+ theta_l * L) + noise`.
#[derive(Clone, Debug)]
pub(crate) struct Equation {
    /// column index of the node in the data
    pub node: usize,
    pub parents: Vec<usize>,
    pub has_latent: bool,
}

/// Mutable parameters, laid out per equation.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Params {
    pub theta: Vec<Vec<f64>>,
    /// latent weight per equation (0 and unused without a latent parent)
    pub theta_l: Vec<f64>,
    pub intercept: Vec<f64>,
    pub sigma2: f64,
}

/// Posterior of the latent per row: shared variance, row-specific means.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentPosterior {
    pub means: Vec<f64>,
    pub variance: f64,
}

pub(crate) struct Model<'a> {
    pub eqs: Vec<Equation>,
    pub cols: Vec<&'a [f64]>,
    pub n: usize,
    pub prior: GaussianPrior,
    /// Penalty targets for latent weights; NaN leaves a weight unpenalized.
    pub target: Vec<f64>,
    pub lambda: f64,
}

impl Model<'_> {
    fn residual(&self, p: &Params, k: usize, row: usize) -> f64 {
        let eq = &self.eqs[k];
        let mut r = self.cols[eq.node][row] - p.intercept[k];
        for (w, &c) in p.theta[k].iter().zip(&eq.parents) {
            r -= w * self.cols[c][row];
        }
        r
    }

    pub fn e_step(&self, p: &Params) -> Result<LatentPosterior> {
        if !(p.sigma2 > 0.0) || !(self.prior.variance > 0.0) {
            return Err(Error::Estimation("variances must be positive".into()));
        }
        let lat: Vec<usize> = (0..self.eqs.len()).filter(|&k| self.eqs[k].has_latent).collect();
        let precision = 1.0 / self.prior.variance + lat.iter().map(|&k| p.theta_l[k].powi(2)).sum::<f64>() / p.sigma2;
        let variance = 1.0 / precision;
        let means = (0..self.n)
            .map(|row| {
                let lin: f64 = lat.iter().map(|&k| p.theta_l[k] * self.residual(p, k, row)).sum();
                variance * (self.prior.mean / self.prior.variance + lin / p.sigma2)
            })
            .collect();
        Ok(LatentPosterior { means, variance })
    }

    pub fn penalty(&self, p: &Params) -> f64 {
        self.lambda * self.distance(p)
    }

    fn distance(&self, p: &Params) -> f64 {
        self.eqs
            .iter()
            .enumerate()
            .filter(|&(k, e)| e.has_latent && !self.target[k].is_nan())
            .map(|(k, _)| (p.theta_l[k] - self.target[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Mean over rows of sum_v E[(residual_v - theta_l L)^2].
    fn expected_sq(&self, p: &Params, q: &LatentPosterior) -> f64 {
        let mut s = 0.0;
        for row in 0..self.n {
            for (k, eq) in self.eqs.iter().enumerate() {
                let mut r = self.residual(p, k, row);
                if eq.has_latent {
                    r -= p.theta_l[k] * q.means[row];
                    s += p.theta_l[k].powi(2) * q.variance;
                }
                s += r * r;
            }
        }
        s / self.n as f64
    }

    /// Per-row free energy: expected complete-data log-likelihood under `q`
    /// plus the entropy of `q`, minus the penalty. With `q` the exact
    /// posterior this is the penalized marginal log-likelihood.
    pub fn objective(&self, p: &Params, q: &LatentPosterior) -> f64 {
        let m = self.eqs.len() as f64;
        let mut f = -0.5 * m * (2.0 * PI * p.sigma2).ln() - self.expected_sq(p, q) / (2.0 * p.sigma2);
        if self.eqs.iter().any(|e| e.has_latent) {
            let s = self.prior.variance;
            let dev: f64 = q.means.iter().map(|mu| (mu - self.prior.mean).powi(2)).sum::<f64>() / self.n as f64;
            f += -0.5 * (2.0 * PI * s).ln() - (dev + q.variance) / (2.0 * s);
            f += 0.5 * (2.0 * PI * std::f64::consts::E * q.variance).ln();
        }
        f - self.penalty(p)
    }

    /// Gradient of the smooth part (no penalty) with respect to the weights.
    pub fn gradient(&self, p: &Params, q: &LatentPosterior) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut g: Vec<Vec<f64>> = p.theta.iter().map(|t| vec![0.0; t.len()]).collect();
        let mut gl = vec![0.0; self.eqs.len()];
        for row in 0..self.n {
            for (k, eq) in self.eqs.iter().enumerate() {
                let mut r = self.residual(p, k, row);
                if eq.has_latent {
                    let mu = q.means[row];
                    r -= p.theta_l[k] * mu;
                    gl[k] += r * mu - p.theta_l[k] * q.variance;
                }
                for (gi, &c) in g[k].iter_mut().zip(&eq.parents) {
                    *gi += r * self.cols[c][row];
                }
            }
        }
        let scale = 1.0 / (self.n as f64 * p.sigma2);
        g.iter_mut().flatten().for_each(|v| *v *= scale);
        gl.iter_mut().for_each(|v| *v *= scale);
        (g, gl)
    }

    /// Intercepts and noise variance at their optimum for fixed weights.
    pub fn refit_closed_form(&self, p: &mut Params, q: &LatentPosterior) {
        for (k, eq) in self.eqs.iter().enumerate() {
            let mut s = 0.0;
            for row in 0..self.n {
                let mut r = self.residual(p, k, row) + p.intercept[k];
                if eq.has_latent {
                    r -= p.theta_l[k] * q.means[row];
                }
                s += r;
            }
            p.intercept[k] = s / self.n as f64;
        }
        p.sigma2 = (self.expected_sq(p, q) / self.eqs.len() as f64).max(1e-12);
    }

    /// Proximal step on the latent weights for the non-squared distance to
    /// the target: shrink the offset vector's length by `t * lambda`.
    fn prox(&self, p: &mut Params, t: f64) {
        let d = self.distance(p);
        if d == 0.0 {
            return;
        }
        let keep = (1.0 - t * self.lambda / d).max(0.0);
        for (k, eq) in self.eqs.iter().enumerate() {
            if eq.has_latent && !self.target[k].is_nan() {
                p.theta_l[k] = self.target[k] + keep * (p.theta_l[k] - self.target[k]);
            }
        }
    }

    /// Up to `steps` proximal-gradient updates at rate `eta`, halving the
    /// rate whenever the objective would drop. Returns the objective after
    /// each accepted step.
    pub fn m_step(&self, p: &mut Params, q: &LatentPosterior, eta: f64, steps: usize) -> Result<Vec<f64>> {
        self.refit_closed_form(p, q);
        let mut current = self.objective(p, q);
        let mut trace = Vec::with_capacity(steps);
        for _ in 0..steps {
            let (g, gl) = self.gradient(p, q);
            if g.iter().flatten().chain(&gl).any(|v| !v.is_finite()) {
                return Err(Error::Estimation(format!("non-finite gradient at sigma2 = {}", p.sigma2)));
            }
            let mut t = eta;
            let mut accepted = None;
            for _ in 0..40 {
                let mut cand = p.clone();
                for (k, eq) in self.eqs.iter().enumerate() {
                    for (w, d) in cand.theta[k].iter_mut().zip(&g[k]) {
                        *w += t * d;
                    }
                    if eq.has_latent {
                        cand.theta_l[k] += t * gl[k];
                    }
                }
                self.prox(&mut cand, t);
                self.refit_closed_form(&mut cand, q);
                let f = self.objective(&cand, q);
                if f >= current {
                    accepted = Some((cand, f));
                    break;
                }
                t *= 0.5;
            }
            let Some((cand, f)) = accepted else { break };
            let gain = f - current;
            *p = cand;
            current = f;
            trace.push(f);
            if gain <= 1e-14 * current.abs().max(1.0) {
                break;
            }
        }
        Ok(trace)
    }
}
