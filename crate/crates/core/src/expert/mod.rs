//! The expert: a simulated oracle with a noise knob, and an HTTP backend for
//! chat-completion endpoints.

mod http;
mod prompt;
mod simulated;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeCategory;

pub use http::{parse_confounder, parse_edge_option, parse_prior, ChatMessage, ChatRequest, ChatTransport, HttpExpert, UreqTransport};
pub use prompt::{render, PromptTemplates};
pub use simulated::SimulatedExpert;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertAnswer {
    pub category: EdgeCategory,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfounderAnswer {
    Named(String),
    Undefined,
}

impl ConfounderAnswer {
    pub fn label(&self) -> &str {
        match self {
            ConfounderAnswer::Named(n) => n,
            ConfounderAnswer::Undefined => "undefined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianPrior {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !mean.is_finite() || !variance.is_finite() {
            return Err(Error::Config(format!("invalid prior N({mean}, {variance})")));
        }
        Ok(GaussianPrior { mean, variance })
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// What the expert is told alongside a pair: the promoted facts.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryContext {
    pub known: Vec<String>,
}

impl QueryContext {
    pub fn known_text(&self) -> String {
        if self.known.is_empty() {
            "None".to_string()
        } else {
            self.known.join(", ")
        }
    }
}

/// Indices refer to the observed variable list the expert was built with.
pub trait Expert {
    fn query_edge(&mut self, a: usize, b: usize, ctx: &QueryContext) -> Result<ExpertAnswer>;
    fn query_confounder(&mut self, a: usize, b: usize) -> Result<ConfounderAnswer>;
    fn query_prior(&mut self, confounder: &str, neighbors: &[usize]) -> Result<GaussianPrior>;
    /// Correlation of the confounder with each neighbor, keyed by name.
    fn query_correlation(&mut self, confounder: &str, neighbors: &[usize]) -> Result<BTreeMap<String, f64>>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Simulated,
    Http,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpertConfig {
    pub backend: Backend,
    /// Probability of a uniformly wrong answer (simulated backend only).
    pub noise: f64,
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub templates_dir: Option<String>,
    /// Overrides the fixture's prior for the simulated backend.
    pub prior: Option<GaussianPrior>,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            backend: Backend::Simulated,
            noise: 0.0,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-3.5-turbo".into(),
            temperature: 1.0,
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            retries: 2,
            templates_dir: None,
            prior: None,
        }
    }
}

impl ExpertConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::Config(format!("expert noise must lie in [0,1], got {}", self.noise)));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Config("temperature must be nonnegative".into()));
        }
        Ok(())
    }
}
