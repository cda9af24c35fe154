use super::{CiDecision, CiTest};
use crate::error::Result;
use crate::graph::Dag;

/// Perfect-information test answering by d-separation in a known DAG.
///
/// Variables are the DAG's observed nodes in order; latent nodes never enter
/// a conditioning set.
#[derive(Clone, Debug)]
pub struct OracleCi {
    dag: Dag,
    observed: Vec<usize>,
    alpha: f64,
}

impl OracleCi {
    pub fn new(dag: Dag) -> Self {
        let observed = dag.observed();
        OracleCi { dag, observed, alpha: 0.5 }
    }

    pub fn variables(&self) -> Vec<String> {
        self.dag.observed_names()
    }
}

pub fn oracle_ci(dag: Dag) -> OracleCi {
    OracleCi::new(dag)
}

impl CiTest for OracleCi {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn n_vars(&self) -> usize {
        self.observed.len()
    }

    fn test(&self, x: usize, y: usize, z: &[usize]) -> Result<CiDecision> {
        let zz: Vec<usize> = z.iter().map(|&v| self.observed[v]).collect();
        let sep = self.dag.d_separated_idx(self.observed[x], self.observed[y], &zz);
        let p = if sep { 1.0 } else { 0.0 };
        Ok(CiDecision::from_p(p, 1.0 - p, self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_and_collider() {
        let chain = OracleCi::new(Dag::from_named(&["A", "B", "C"], &[("A", "B"), ("B", "C")]).unwrap());
        assert!(chain.test(0, 2, &[1]).unwrap().independent);
        let coll = OracleCi::new(Dag::from_named(&["A", "B", "C"], &[("A", "C"), ("B", "C")]).unwrap());
        let d = coll.test(0, 1, &[2]).unwrap();
        assert!(!d.independent);
        assert_eq!(d.p_value, 0.0);
    }
}
