//! Graph data model: endpoint marks, PAGs, DAGs and pinned background facts.

mod background;
mod dag;
mod mark;
pub(crate) mod pag;

pub use background::BackgroundKnowledge;
pub use dag::Dag;
pub use mark::{edge_category, EdgeCategory, EndpointMark};
pub use pag::{all_pairs, pair_key, Pag, PairKey};
