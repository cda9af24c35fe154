use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mark::EdgeCategory;
use super::pag::{pair_key, validate_names, Pag};
use crate::error::{Error, Result};

/// Directed acyclic graph, optionally weighted, with latent-node flags.
#[derive(Clone, Debug, PartialEq)]
pub struct Dag {
    variables: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    latent: Vec<bool>,
    weights: Option<BTreeMap<(usize, usize), f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EdgeEntry {
    Weighted(String, String, f64),
    Plain(String, String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DagFile {
    variables: Vec<String>,
    edges: Vec<EdgeEntry>,
    #[serde(default)]
    latents: Vec<String>,
}

impl Dag {
    /// Build from index edges. `weights`, when given, is parallel to `edges`.
    pub fn new(
        variables: Vec<String>,
        edges: &[(usize, usize)],
        latent: Vec<bool>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let index = validate_names(&variables)?;
        let n = variables.len();
        if latent.len() != n {
            return Err(Error::Config("latent flags must match variable count".into()));
        }
        if let Some(w) = &weights {
            if w.len() != edges.len() {
                return Err(Error::PartialWeights);
            }
        }
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut wmap = weights.as_ref().map(|_| BTreeMap::new());
        for (k, &(s, d)) in edges.iter().enumerate() {
            if s >= n || d >= n {
                return Err(Error::UnknownVariable(format!("#{}", s.max(d))));
            }
            if s == d {
                return Err(Error::SelfLoop(variables[s].clone()));
            }
            if parents[d].contains(&s) {
                continue;
            }
            parents[d].push(s);
            children[s].push(d);
            if let (Some(m), Some(w)) = (wmap.as_mut(), weights.as_ref()) {
                m.insert((s, d), w[k]);
            }
        }
        for v in parents.iter_mut().chain(children.iter_mut()) {
            v.sort_unstable();
        }
        let dag = Dag { variables, index, parents, children, latent, weights: wmap };
        dag.check_acyclic()?;
        Ok(dag)
    }

    /// Build from names; convenient for fixtures and tests.
    pub fn from_named(variables: &[&str], edges: &[(&str, &str)]) -> Result<Self> {
        let vars: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        let idx = validate_names(&vars)?;
        let look = |n: &str| idx.get(n).copied().ok_or_else(|| Error::UnknownVariable(n.to_string()));
        let e = edges
            .iter()
            .map(|(a, b)| Ok((look(a)?, look(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let n = vars.len();
        Dag::new(vars, &e, vec![false; n], None)
    }

    fn check_acyclic(&self) -> Result<()> {
        let order = self.topological_order();
        if order.len() != self.len() {
            let stuck = (0..self.len()).find(|v| !order.contains(v)).unwrap_or(0);
            return Err(Error::Cycle(self.variables[stuck].clone()));
        }
        Ok(())
    }

    /// Kahn order with ties broken by index. Shorter than `len()` iff cyclic.
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(&v) = ready.iter().next() {
            ready.remove(&v);
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].contains(&from)
    }

    pub fn is_latent(&self, v: usize) -> bool {
        self.latent[v]
    }

    pub fn latent_flags(&self) -> &[bool] {
        &self.latent
    }

    pub fn observed(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| !self.latent[v]).collect()
    }

    pub fn observed_names(&self) -> Vec<String> {
        self.observed().into_iter().map(|v| self.variables[v].clone()).collect()
    }

    pub fn latents(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.latent[v]).collect()
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.weights.as_ref()?.get(&(from, to)).copied()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Edges in (from, to) order, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.len())
            .flat_map(|d| self.parents[d].iter().map(move |&s| (s, d)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Nodes reachable from `v` along directed edges, excluding `v`.
    pub fn descendants(&self, v: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = self.children[v].clone();
        while let Some(u) = stack.pop() {
            if !seen[u] {
                seen[u] = true;
                stack.extend(self.children[u].iter().copied());
            }
        }
        seen
    }

    /// Ancestors of the set, including the set itself.
    pub fn ancestors_of_set(&self, set: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = set.to_vec();
        while let Some(u) = stack.pop() {
            if !seen[u] {
                seen[u] = true;
                stack.extend(self.parents[u].iter().copied());
            }
        }
        seen
    }

    /// d-separation of `x` and `y` given `z`, by name.
    pub fn d_separated(&self, x: &str, y: &str, z: &[&str]) -> Result<bool> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        let zi = z.iter().map(|n| self.index_of(n)).collect::<Result<Vec<_>>>()?;
        if xi == yi || zi.contains(&xi) || zi.contains(&yi) {
            return Err(Error::Config("d-separation query needs x != y and x, y outside Z".into()));
        }
        Ok(self.d_separated_idx(xi, yi, &zi))
    }

    /// Reachability ("Bayes ball") d-separation test.
    pub fn d_separated_idx(&self, x: usize, y: usize, z: &[usize]) -> bool {
        let n = self.len();
        let mut in_z = vec![false; n];
        for &v in z {
            in_z[v] = true;
        }
        let anc_z = self.ancestors_of_set(z);
        // visited[v][0]: arrived from a child (moving up), [1]: from a parent (moving down)
        let mut visited = vec![[false; 2]; n];
        let mut queue = VecDeque::new();
        queue.push_back((x, 0usize));
        while let Some((v, dir)) = queue.pop_front() {
            if visited[v][dir] {
                continue;
            }
            visited[v][dir] = true;
            if v == y && !in_z[v] {
                return false;
            }
            if dir == 0 {
                if !in_z[v] {
                    for &p in &self.parents[v] {
                        queue.push_back((p, 0));
                    }
                    for &c in &self.children[v] {
                        queue.push_back((c, 1));
                    }
                }
            } else {
                if !in_z[v] {
                    for &c in &self.children[v] {
                        queue.push_back((c, 1));
                    }
                }
                if anc_z[v] {
                    for &p in &self.parents[v] {
                        queue.push_back((p, 0));
                    }
                }
            }
        }
        true
    }

    /// The graph seen over observed variables only: directed edges between
    /// observed nodes, and `<->` between observed children of a common latent
    /// that are not already adjacent.
    pub fn to_observed_pag(&self) -> Pag {
        let obs = self.observed();
        let pos: HashMap<usize, usize> = obs.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut pag = Pag::new(self.observed_names()).expect("names validated");
        for (s, d) in self.edges() {
            if let (Some(&a), Some(&b)) = (pos.get(&s), pos.get(&d)) {
                pag.set_category(a, b, EdgeCategory::Directed);
            }
        }
        for l in self.latents() {
            let kids: Vec<usize> = self.children[l].iter().filter_map(|c| pos.get(c).copied()).collect();
            for (i, &a) in kids.iter().enumerate() {
                for &b in &kids[i + 1..] {
                    if !pag.is_adjacent(a, b) {
                        pag.set_category(a, b, EdgeCategory::Bidirected);
                    }
                }
            }
        }
        pag
    }

    /// Observed pairs sharing a latent parent.
    pub fn confounded_pairs(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for l in self.latents() {
            let kids: Vec<usize> = self.children[l].iter().copied().filter(|&c| !self.latent[c]).collect();
            for (i, &a) in kids.iter().enumerate() {
                for &b in &kids[i + 1..] {
                    let (a, b) = pair_key(a, b);
                    out.push((a, b, l));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        let edges = self
            .edges()
            .into_iter()
            .map(|(s, d)| {
                let (a, b) = (self.variables[s].clone(), self.variables[d].clone());
                match self.weight(s, d) {
                    Some(w) => EdgeEntry::Weighted(a, b, w),
                    None => EdgeEntry::Plain(a, b),
                }
            })
            .collect();
        let file = DagFile {
            variables: self.variables.clone(),
            edges,
            latents: self.latents().into_iter().map(|v| self.variables[v].clone()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DagFile = serde_json::from_str(text)?;
        let idx = validate_names(&file.variables)?;
        let look = |n: &str| idx.get(n).copied().ok_or_else(|| Error::UnknownVariable(n.to_string()));
        let mut edges = Vec::new();
        let mut weights = Vec::new();
        let mut weighted = 0usize;
        for e in &file.edges {
            match e {
                EdgeEntry::Weighted(a, b, w) => {
                    edges.push((look(a)?, look(b)?));
                    weights.push(*w);
                    weighted += 1;
                }
                EdgeEntry::Plain(a, b) => {
                    edges.push((look(a)?, look(b)?));
                    weights.push(0.0);
                }
            }
        }
        if weighted != 0 && weighted != edges.len() {
            return Err(Error::PartialWeights);
        }
        let mut latent = vec![false; file.variables.len()];
        for l in &file.latents {
            latent[look(l)?] = true;
        }
        Dag::new(file.variables, &edges, latent, (weighted > 0).then_some(weights))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Dag::from_json(&text)
    }
}
