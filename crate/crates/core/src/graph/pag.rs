use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::mark::{left_glyph, parse_left, parse_right, right_glyph, EdgeCategory, EndpointMark};
use crate::error::{Error, Result};

/// Unordered pair key `(lo, hi)` with `lo < hi`.
pub type PairKey = (usize, usize);

pub fn pair_key(i: usize, j: usize) -> PairKey {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

/// Every unordered pair over `n` variables in lexicographic order.
pub fn all_pairs(n: usize) -> Vec<PairKey> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((i, j));
        }
    }
    out
}

/// Names must be unique, nonempty and free of whitespace.
pub fn validate_names_pub(names: &[String]) -> Result<()> {
    validate_names(names).map(|_| ())
}

pub(crate) fn validate_names(names: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, n) in names.iter().enumerate() {
        if n.is_empty() || n.chars().any(char::is_whitespace) || n.starts_with('#') {
            return Err(Error::Config(format!("invalid variable name `{n}`")));
        }
        if index.insert(n.clone(), i).is_some() {
            return Err(Error::DuplicateVariable(n.clone()));
        }
    }
    Ok(index)
}

/// Partial ancestral graph over named variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pag {
    variables: Vec<String>,
    index: HashMap<String, usize>,
    /// (lo, hi) -> (mark at lo, mark at hi)
    edges: BTreeMap<PairKey, (EndpointMark, EndpointMark)>,
}

impl Pag {
    pub fn new(variables: Vec<String>) -> Result<Self> {
        let index = validate_names(&variables)?;
        Ok(Pag { variables, index, edges: BTreeMap::new() })
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

    /// Marks as (mark at i, mark at j).
    pub fn marks(&self, i: usize, j: usize) -> Option<(EndpointMark, EndpointMark)> {
        let (m_lo, m_hi) = *self.edges.get(&pair_key(i, j))?;
        Some(if i < j { (m_lo, m_hi) } else { (m_hi, m_lo) })
    }

    /// Mark at the `at` end of the edge between `at` and `other`.
    pub fn mark_at(&self, at: usize, other: usize) -> Option<EndpointMark> {
        self.marks(at, other).map(|(m, _)| m)
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.edges.contains_key(&pair_key(i, j))
    }

    /// Category of the edge read as (A = i, B = j).
    pub fn category(&self, i: usize, j: usize) -> EdgeCategory {
        match self.marks(i, j) {
            Some((a, b)) => EdgeCategory::from_marks(a, b),
            None => EdgeCategory::NoEdge,
        }
    }

    pub fn set_marks(&mut self, i: usize, j: usize, at_i: EndpointMark, at_j: EndpointMark) {
        assert!(i != j, "self-loop");
        assert!(i < self.len() && j < self.len(), "index out of range");
        let v = if i < j { (at_i, at_j) } else { (at_j, at_i) };
        self.edges.insert(pair_key(i, j), v);
    }

    /// Replace only the mark at the `at` end; the edge must exist.
    pub fn set_mark_at(&mut self, at: usize, other: usize, mark: EndpointMark) {
        let e = self.edges.get_mut(&pair_key(at, other)).expect("edge exists");
        if at < other {
            e.0 = mark;
        } else {
            e.1 = mark;
        }
    }

    pub fn set_category(&mut self, i: usize, j: usize, cat: EdgeCategory) {
        match cat.marks() {
            Some((a, b)) => self.set_marks(i, j, a, b),
            None => self.remove_edge(i, j),
        }
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.edges.remove(&pair_key(i, j));
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges keyed by (lo, hi) with (mark at lo, mark at hi).
    pub fn edges(&self) -> impl Iterator<Item = (PairKey, (EndpointMark, EndpointMark))> + '_ {
        self.edges.iter().map(|(k, v)| (*k, *v))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| j != i && self.is_adjacent(i, j)).collect()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    fn edge_line(&self, key: PairKey, marks: (EndpointMark, EndpointMark)) -> (String, String, String) {
        let (lo, hi) = key;
        let (a, b, ma, mb) = if self.variables[lo] <= self.variables[hi] {
            (lo, hi, marks.0, marks.1)
        } else {
            (hi, lo, marks.1, marks.0)
        };
        (
            self.variables[a].clone(),
            self.variables[b].clone(),
            format!("{}{}", left_glyph(ma), right_glyph(mb)),
        )
    }

    /// Canonical edge lines, sorted by (left, right) name.
    pub fn edge_lines(&self) -> Vec<String> {
        let mut lines: Vec<(String, String, String)> =
            self.edges().map(|(k, m)| self.edge_line(k, m)).collect();
        lines.sort();
        lines.into_iter().map(|(a, b, g)| format!("{a} {g} {b}")).collect()
    }

    fn from_parts(variables: Vec<String>, lines: &[(usize, &str)]) -> Result<Self> {
        let mut pag = Pag::new(variables).map_err(|e| Error::Parse { line: 1, msg: e.to_string() })?;
        for &(lineno, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: String| Error::Parse { line: lineno, msg };
            if parts.len() != 3 {
                return Err(bad(format!("expected `A <mark><mark> B`, got `{line}`")));
            }
            let glyph: Vec<char> = parts[1].chars().collect();
            if glyph.len() != 2 {
                return Err(bad(format!("invalid edge glyph `{}`", parts[1])));
            }
            let (ma, mb) = match (parse_left(glyph[0]), parse_right(glyph[1])) {
                (Some(a), Some(b)) => (a, b),
                _ => return Err(bad(format!("invalid edge glyph `{}`", parts[1]))),
            };
            let a = pag.index_of(parts[0]).map_err(|e| bad(e.to_string()))?;
            let b = pag.index_of(parts[2]).map_err(|e| bad(e.to_string()))?;
            if a == b {
                return Err(bad(format!("self-loop on `{}`", parts[0])));
            }
            if pag.is_adjacent(a, b) {
                return Err(bad(format!("duplicate edge {} {}", parts[0], parts[2])));
            }
            pag.set_marks(a, b, ma, mb);
        }
        Ok(pag)
    }
}

impl fmt::Display for Pag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variables: {}", self.variables.join(" "))?;
        for line in self.edge_lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for Pag {
    type Err = Error;

    /// Text format: a `variables:` header followed by one edge per line.
    /// Blank lines and `#` comments are ignored.
    fn from_str(text: &str) -> Result<Self> {
        let mut variables: Option<Vec<String>> = None;
        let mut lines = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("variables:") {
                if variables.is_some() {
                    return Err(Error::Parse { line: lineno, msg: "repeated header".into() });
                }
                variables = Some(rest.split_whitespace().map(str::to_string).collect());
                continue;
            }
            if variables.is_none() {
                return Err(Error::Parse { line: lineno, msg: "missing `variables:` header".into() });
            }
            lines.push((lineno, line));
        }
        let variables = variables.ok_or(Error::Parse { line: 1, msg: "missing `variables:` header".into() })?;
        Pag::from_parts(variables, &lines)
    }
}

#[derive(Serialize, Deserialize)]
struct PagRepr {
    variables: Vec<String>,
    edges: Vec<String>,
}

impl Serialize for Pag {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PagRepr { variables: self.variables.clone(), edges: self.edge_lines() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pag {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = PagRepr::deserialize(d)?;
        let lines: Vec<(usize, &str)> = repr.edges.iter().enumerate().map(|(i, l)| (i + 1, l.as_str())).collect();
        Pag::from_parts(repr.variables, &lines).map_err(serde::de::Error::custom)
    }
}
