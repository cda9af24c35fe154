//! Graph comparison: modified SHD, directed-edge precision/recall, SID bounds.

mod sid;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{all_pairs, Dag, EdgeCategory, EndpointMark, Pag};

pub use sid::{d_separated, sid_bounds, sid_single, DEFAULT_EXTENSION_CAP};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mod_shd: f64,
    /// (lower, upper); absent when the extension cap was hit.
    pub sid: Option<(usize, usize)>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mean_entropy: Option<f64>,
}

/// Position in `pred` of every variable of `truth`, failing on any set difference.
pub(crate) fn align(pred: &[String], truth: &[String]) -> Result<Vec<usize>> {
    if pred.len() != truth.len() {
        return Err(Error::VariableMismatch(format!("{} vs {} variables", pred.len(), truth.len())));
    }
    truth
        .iter()
        .map(|t| pred.iter().position(|p| p == t).ok_or_else(|| Error::VariableMismatch(format!("`{t}` missing from prediction"))))
        .collect()
}

fn endpoint_penalty(a: EndpointMark, b: EndpointMark) -> f64 {
    if a == b {
        0.0
    } else if a == EndpointMark::Circle || b == EndpointMark::Circle {
        0.5
    } else {
        1.0
    }
}

/// Structural Hamming distance with endpoint penalties: a missing or extra
/// adjacency costs 1; on shared adjacencies each differing endpoint costs 1,
/// or 0.5 when a circle is involved.
pub fn mod_shd(pred: &Pag, truth: &Pag) -> Result<f64> {
    let map = align(pred.variables(), truth.variables())?;
    let mut total = 0.0;
    for (i, j) in all_pairs(truth.len()) {
        let (pi, pj) = (map[i], map[j]);
        match (pred.marks(pi, pj), truth.marks(i, j)) {
            (None, None) => {}
            (Some(_), None) | (None, Some(_)) => total += 1.0,
            (Some((p1, p2)), Some((t1, t2))) => total += endpoint_penalty(p1, t1) + endpoint_penalty(p2, t2),
        }
    }
    Ok(total)
}

/// `mod_shd` against the observed-variable view of a DAG.
pub fn mod_shd_dag(pred: &Pag, truth: &Dag) -> Result<f64> {
    mod_shd(pred, &truth.to_observed_pag())
}

/// Precision, recall and F1 over directed edges only.
pub fn directed_prf(pred: &Pag, truth: &Dag) -> Result<(f64, f64, f64)> {
    let names = truth.observed_names();
    let map = align(pred.variables(), &names)?;
    let obs = truth.observed();
    let mut true_dir = 0usize;
    let mut pred_dir = 0usize;
    let mut tp = 0usize;
    for i in 0..obs.len() {
        for j in 0..obs.len() {
            if i == j {
                continue;
            }
            let t = truth.has_edge(obs[i], obs[j]);
            let p = pred.category(map[i], map[j]) == EdgeCategory::Directed;
            true_dir += t as usize;
            pred_dir += p as usize;
            tp += (t && p) as usize;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (p, r) = (ratio(tp, pred_dir), ratio(tp, true_dir));
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Ok((p, r, f1))
}

/// All metrics at once. SID failures (too many extensions, or a directed
/// cycle with no acyclic completion) are logged and leave `sid` empty.
pub fn evaluate(pred: &Pag, truth: &Dag, mean_entropy: Option<f64>) -> Result<MetricReport> {
    let mod_shd = mod_shd_dag(pred, truth)?;
    let (precision, recall, f1) = directed_prf(pred, truth)?;
    let sid = match sid_bounds(pred, truth, DEFAULT_EXTENSION_CAP) {
        Ok(b) => Some(b),
        Err(e @ (Error::TooManyExtensions(..) | Error::NoDagExtension)) => {
            log::warn!("{e}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(MetricReport { mod_shd, sid, precision, recall, f1, mean_entropy })
}

/// Mean entropy per batch, in batch order.
pub fn entropy_trace(reports: &[MetricReport]) -> Vec<Option<f64>> {
    reports.iter().map(|r| r.mean_entropy).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pag(lines: &str) -> Pag {
        lines.parse().unwrap()
    }

    #[test]
    fn endpoint_penalties() {
        let truth = pag("variables: A B\nA -> B");
        assert_eq!(mod_shd(&pag("variables: A B\nA <> B"), &truth).unwrap(), 1.0);
        assert_eq!(mod_shd(&pag("variables: A B\nA o> B"), &truth).unwrap(), 0.5);
        assert_eq!(mod_shd(&truth, &truth).unwrap(), 0.0);
        assert_eq!(mod_shd(&pag("variables: A B"), &truth).unwrap(), 1.0);
        assert_eq!(mod_shd(&pag("variables: A B\nA <- B"), &truth).unwrap(), 2.0);
    }

    #[test]
    fn variable_order_does_not_matter() {
        let truth = pag("variables: A B C\nA -> B\nB -> C");
        let pred = pag("variables: C B A\nA -> B\nB -> C");
        assert_eq!(mod_shd(&pred, &truth).unwrap(), 0.0);
        assert!(mod_shd(&pag("variables: A B D"), &truth).is_err());
    }

    #[test]
    fn prf_formula() {
        let truth = Dag::from_named(&["A", "B", "C", "D", "E"], &[("A", "B"), ("B", "C"), ("C", "D"), ("D", "E")]).unwrap();
        let pred = pag("variables: A B C D E\nA -> B\nB -> C\nD -> C\nA oo E");
        let (p, r, f) = directed_prf(&pred, &truth).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
        assert!((f - 4.0 / 7.0).abs() < 1e-12);
        let circles = pag("variables: A B C D E\nA oo B\nB oo C");
        assert_eq!(directed_prf(&circles, &truth).unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(directed_prf(&truth.to_observed_pag(), &truth).unwrap(), (1.0, 1.0, 1.0));
    }
}
