use std::collections::VecDeque;

use rayon::prelude::*;

use super::align;
use crate::error::{Error, Result};
use crate::graph::{all_pairs, Dag, EndpointMark, Pag};

pub const DEFAULT_EXTENSION_CAP: usize = 4096;

/// d-separation on a graph given as parent and child lists.
pub fn d_separated(parents: &[Vec<usize>], children: &[Vec<usize>], x: usize, y: usize, z: &[bool]) -> bool {
    let n = parents.len();
    let mut anc_z = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&v| z[v]).collect();
    while let Some(u) = stack.pop() {
        if !anc_z[u] {
            anc_z[u] = true;
            stack.extend(parents[u].iter().copied());
        }
    }
    // 0: entered from a child, 1: entered from a parent
    let mut seen = vec![[false; 2]; n];
    let mut queue = VecDeque::from([(x, 0usize)]);
    while let Some((v, dir)) = queue.pop_front() {
        if std::mem::replace(&mut seen[v][dir], true) {
            continue;
        }
        if v == y && !z[v] {
            return false;
        }
        let open = !z[v];
        if dir == 0 && open {
            queue.extend(parents[v].iter().map(|&p| (p, 0)));
            queue.extend(children[v].iter().map(|&c| (c, 1)));
        } else if dir == 1 {
            if open {
                queue.extend(children[v].iter().map(|&c| (c, 1)));
            }
            if anc_z[v] {
                queue.extend(parents[v].iter().map(|&p| (p, 0)));
            }
        }
    }
    true
}

fn reach(start: usize, next: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; next.len()];
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        if !seen[u] {
            seen[u] = true;
            stack.extend(next[u].iter().copied());
        }
    }
    seen
}

/// Pre-computed truth-side structure for the adjustment check.
struct Truth {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    /// descendants (self included) per node
    desc: Vec<Vec<bool>>,
    /// ancestors (self included) per node
    anc: Vec<Vec<bool>>,
    /// observed index -> node
    obs: Vec<usize>,
}

impl Truth {
    fn new(dag: &Dag) -> Self {
        let n = dag.len();
        let parents: Vec<Vec<usize>> = (0..n).map(|v| dag.parents(v).to_vec()).collect();
        let children: Vec<Vec<usize>> = (0..n).map(|v| dag.children(v).to_vec()).collect();
        let desc = (0..n).map(|v| reach(v, &children)).collect();
        let anc = (0..n).map(|v| reach(v, &parents)).collect();
        Truth { parents, children, desc, anc, obs: dag.observed() }
    }

    /// Whether adjusting for `z` (observed indices) recovers the effect of
    /// observed `i` on observed `j`.
    fn valid(&self, i: usize, j: usize, z: &[usize]) -> bool {
        let (x, y) = (self.obs[i], self.obs[j]);
        let n = self.parents.len();
        let zs: Vec<usize> = z.iter().map(|&k| self.obs[k]).collect();
        if zs.contains(&y) {
            // the estimate claims no effect
            return !self.desc[x][y];
        }
        // nodes after x on directed paths from x to y
        let on_path: Vec<usize> = (0..n).filter(|&w| w != x && self.desc[x][w] && self.anc[y][w]).collect();
        for &w in &on_path {
            if zs.iter().any(|&s| self.desc[w][s]) {
                return false;
            }
        }
        let mut parents = self.parents.clone();
        let mut children = self.children.clone();
        children[x].retain(|c| !on_path.contains(c));
        for &c in &on_path {
            parents[c].retain(|&p| p != x);
        }
        let mut mask = vec![false; n];
        for &s in &zs {
            mask[s] = true;
        }
        d_separated(&parents, &children, x, y, &mask)
    }
}

/// Structural intervention distance of one DAG over observed variables
/// (`parents[i]` in observed indices) against the truth.
pub fn sid_single(parents: &[Vec<usize>], truth: &Dag) -> Result<usize> {
    let t = Truth::new(truth);
    if parents.len() != t.obs.len() {
        return Err(Error::VariableMismatch(format!("{} vs {} observed variables", parents.len(), t.obs.len())));
    }
    Ok(count(&t, parents))
}

fn count(t: &Truth, parents: &[Vec<usize>]) -> usize {
    let m = parents.len();
    let mut wrong = 0;
    for i in 0..m {
        for j in 0..m {
            if i != j && !t.valid(i, j, &parents[i]) {
                wrong += 1;
            }
        }
    }
    wrong
}

/// Options per adjacency: 0 = lo -> hi, 1 = hi -> lo, 2 = dropped.
fn options(at_lo: EndpointMark, at_hi: EndpointMark) -> Vec<u8> {
    use EndpointMark::*;
    if at_lo == Tail && at_hi == Tail {
        return vec![0, 1];
    }
    let mut out = Vec::new();
    if at_lo != Arrow && at_hi != Tail {
        out.push(0);
    }
    if at_hi != Arrow && at_lo != Tail {
        out.push(1);
    }
    if at_lo != Tail && at_hi != Tail {
        out.push(2);
    }
    out
}

fn creates_cycle(children: &[Vec<usize>], from: usize, to: usize) -> bool {
    reach(to, children)[from]
}

/// Every acyclic DAG consistent with the marks of `pag`, as parent lists.
fn extensions(pag: &Pag, cap: usize) -> Result<Vec<Vec<Vec<usize>>>> {
    let n = pag.len();
    let edges: Vec<((usize, usize), Vec<u8>)> =
        all_pairs(n).into_iter().filter_map(|(a, b)| pag.marks(a, b).map(|(ma, mb)| ((a, b), options(ma, mb)))).collect();
    let mut out = Vec::new();
    let mut children = vec![Vec::new(); n];
    let mut parents = vec![Vec::new(); n];
    fn go(
        k: usize,
        edges: &[((usize, usize), Vec<u8>)],
        parents: &mut Vec<Vec<usize>>,
        children: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
        cap: usize,
    ) -> Result<()> {
        if k == edges.len() {
            if out.len() >= cap {
                return Err(Error::TooManyExtensions(out.len() + 1, cap));
            }
            out.push(parents.iter().map(|p| { let mut p = p.clone(); p.sort_unstable(); p }).collect());
            return Ok(());
        }
        let ((a, b), opts) = &edges[k];
        for &o in opts {
            let dir = match o {
                0 => Some((*a, *b)),
                1 => Some((*b, *a)),
                _ => None,
            };
            match dir {
                Some((s, d)) if !creates_cycle(children, s, d) => {
                    children[s].push(d);
                    parents[d].push(s);
                    go(k + 1, edges, parents, children, out, cap)?;
                    children[s].pop();
                    parents[d].pop();
                }
                Some(_) => {}
                None => go(k + 1, edges, parents, children, out, cap)?,
            }
        }
        Ok(())
    }
    go(0, &edges, &mut parents, &mut children, &mut out, cap)?;
    Ok(out)
}

/// Minimum and maximum SID over the DAG extensions of `pred`. Bidirected
/// edges and circles resolved to `<->` leave the pair non-adjacent.
pub fn sid_bounds(pred: &Pag, truth: &Dag, cap: usize) -> Result<(usize, usize)> {
    let names = truth.observed_names();
    let map = align(pred.variables(), &names)?;
    // re-index pred into truth's observed order
    let mut aligned = Pag::new(names).expect("truth names are valid");
    for (i, j) in all_pairs(map.len()) {
        if let Some((mi, mj)) = pred.marks(map[i], map[j]) {
            aligned.set_marks(i, j, mi, mj);
        }
    }
    let exts = extensions(&aligned, cap)?;
    if exts.is_empty() {
        return Err(Error::NoDagExtension);
    }
    let t = Truth::new(truth);
    let sids: Vec<usize> = exts.par_iter().map(|p| count(&t, p)).collect();
    Ok((*sids.iter().min().expect("nonempty"), *sids.iter().max().expect("nonempty")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeCategory;

    #[test]
    fn exact_truth_scores_zero() {
        let dag = Dag::from_named(&["A", "B", "C", "D"], &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]).unwrap();
        assert_eq!(sid_bounds(&dag.to_observed_pag(), &dag, 4096).unwrap(), (0, 0));
    }

    #[test]
    fn reversed_pair() {
        let dag = Dag::from_named(&["A", "B"], &[("A", "B")]).unwrap();
        let mut pag = Pag::new(vec!["A".into(), "B".into()]).unwrap();
        pag.set_category(0, 1, EdgeCategory::ReverseDirected);
        // both ordered pairs are wrong: do(A) is claimed to leave B alone, and
        // the empty adjustment set for do(B) leaves the path B <- A open
        assert_eq!(sid_bounds(&pag, &dag, 4096).unwrap(), (2, 2));
    }

    #[test]
    fn circles_give_ranges() {
        let dag = Dag::from_named(&["A", "B"], &[("A", "B")]).unwrap();
        let mut pag = Pag::new(vec!["A".into(), "B".into()]).unwrap();
        pag.set_category(0, 1, EdgeCategory::Nondirected);
        assert_eq!(extensions(&pag, 10).unwrap().len(), 3);
        assert_eq!(sid_bounds(&pag, &dag, 4096).unwrap(), (0, 2));
    }

    #[test]
    fn directed_cycle_has_no_extension() {
        let dag = Dag::from_named(&["A", "B", "C"], &[("A", "B")]).unwrap();
        let mut pag = Pag::new(vec!["A".into(), "B".into(), "C".into()]).unwrap();
        pag.set_category(0, 1, EdgeCategory::Directed);
        pag.set_category(1, 2, EdgeCategory::Directed);
        pag.set_category(0, 2, EdgeCategory::ReverseDirected);
        assert!(matches!(sid_bounds(&pag, &dag, 4096), Err(Error::NoDagExtension)));
        assert_eq!(crate::metrics::evaluate(&pag, &dag, None).unwrap().sid, None);
    }

    #[test]
    fn cap_is_enforced() {
        let names: Vec<String> = (0..6).map(|k| format!("V{k}")).collect();
        let mut pag = Pag::new(names).unwrap();
        for (a, b) in all_pairs(6) {
            pag.set_category(a, b, EdgeCategory::Nondirected);
        }
        assert!(matches!(extensions(&pag, 100), Err(Error::TooManyExtensions(..))));
    }

    #[test]
    fn latent_confounding_in_truth() {
        // A <- L -> B with L hidden: the empty set is not a valid adjustment
        let dag = Dag::new(vec!["A".into(), "B".into(), "L".into()], &[(2, 0), (2, 1)], vec![false, false, true], None).unwrap();
        assert_eq!(sid_single(&[vec![], vec![]], &dag).unwrap(), 2);
        // A -> B: do(B) is correctly claimed inert on A, do(A) still confounded
        assert_eq!(sid_single(&[vec![], vec![0]], &dag).unwrap(), 1);
    }
}
