//! Sequential causal discovery over partial ancestral graphs with a budgeted,
//! noisy expert, and EM estimation of linear SEMs with a suggested latent
//! confounder.

pub mod belief;
pub mod ci;
pub mod experiment;
pub mod expert;
pub mod data;
pub mod em;
pub mod error;
pub mod fci;
pub mod graph;
pub mod learner;
pub mod metrics;
pub mod sem;

pub use data::{BatchDataset, VarKind};
pub use error::{Error, Result};
pub use graph::{BackgroundKnowledge, Dag, EdgeCategory, EndpointMark, Pag};
