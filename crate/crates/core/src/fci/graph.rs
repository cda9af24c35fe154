use crate::graph::{EdgeCategory, EndpointMark, Pag};

/// Dense working graph for FCI. `m[i * n + j]` is the mark at `j` on the
/// edge between `i` and `j`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Work {
    pub n: usize,
    m: Vec<Option<EndpointMark>>,
    locked: Vec<bool>,
}

impl Work {
    pub fn complete(n: usize) -> Self {
        let mut m = vec![Some(EndpointMark::Circle); n * n];
        for i in 0..n {
            m[i * n + i] = None;
        }
        Work { n, m, locked: vec![false; n * n] }
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        i != j && self.m[i * self.n + j].is_some()
    }

    /// Mark at `j` on the edge i *-* j.
    pub fn mark(&self, i: usize, j: usize) -> Option<EndpointMark> {
        self.m[i * self.n + j]
    }

    pub fn is(&self, i: usize, j: usize, mark: EndpointMark) -> bool {
        self.mark(i, j) == Some(mark)
    }

    pub fn remove(&mut self, i: usize, j: usize) {
        self.m[i * self.n + j] = None;
        self.m[j * self.n + i] = None;
    }

    pub fn lock(&mut self, i: usize, j: usize) {
        self.locked[i * self.n + j] = true;
        self.locked[j * self.n + i] = true;
    }

    pub fn is_locked(&self, i: usize, j: usize) -> bool {
        self.locked[i * self.n + j]
    }

    /// Force an edge with the given marks regardless of locks.
    pub fn force(&mut self, i: usize, j: usize, at_i: EndpointMark, at_j: EndpointMark) {
        self.m[j * self.n + i] = Some(at_i);
        self.m[i * self.n + j] = Some(at_j);
    }

    /// Set the mark at `j` on i *-* j. Returns whether anything changed.
    pub fn set(&mut self, i: usize, j: usize, mark: EndpointMark) -> bool {
        if self.is_locked(i, j) || !self.adjacent(i, j) || self.mark(i, j) == Some(mark) {
            return false;
        }
        self.m[i * self.n + j] = Some(mark);
        true
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.adjacent(i, j)).collect()
    }

    /// Reset every unlocked edge to o-o.
    pub fn reset_unlocked(&mut self) {
        for i in 0..self.n {
            for j in 0..self.n {
                if self.adjacent(i, j) && !self.is_locked(i, j) {
                    self.m[i * self.n + j] = Some(EndpointMark::Circle);
                }
            }
        }
    }

    pub fn to_pag(&self, names: &[String]) -> Pag {
        let mut pag = Pag::new(names.to_vec()).expect("validated names");
        for i in 0..self.n {
            for j in i + 1..self.n {
                if let (Some(at_i), Some(at_j)) = (self.mark(j, i), self.mark(i, j)) {
                    pag.set_marks(i, j, at_i, at_j);
                }
            }
        }
        pag
    }

    pub fn set_category(&mut self, i: usize, j: usize, cat: EdgeCategory) {
        match cat.marks() {
            Some((a, b)) => self.force(i, j, a, b),
            None => self.remove(i, j),
        }
    }
}
