use std::collections::{BTreeSet, VecDeque};

use super::graph::Work;
use super::{RuleSet, SepsetTable};
use crate::graph::pair_key;
use crate::graph::EndpointMark::{Arrow, Circle, Tail};

fn sepset<'a>(sepsets: &'a SepsetTable, a: usize, b: usize) -> Option<&'a Vec<usize>> {
    sepsets.get(&pair_key(a, b))
}

/// Orient every unshielded triple a *-* b *-* c as a collider when b is not
/// in the sepset of (a, c). Pairs without a recorded sepset are skipped.
pub(crate) fn orient_colliders(g: &mut Work, sepsets: &SepsetTable) {
    let n = g.n;
    let mut todo = Vec::new();
    for b in 0..n {
        let nb = g.neighbors(b);
        for (k, &a) in nb.iter().enumerate() {
            for &c in &nb[k + 1..] {
                if g.adjacent(a, c) {
                    continue;
                }
                if let Some(s) = sepset(sepsets, a, c) {
                    if !s.contains(&b) {
                        todo.push((a, b, c));
                    }
                }
            }
        }
    }
    for (a, b, c) in todo {
        g.set(a, b, Arrow);
        g.set(c, b, Arrow);
    }
}

/// Apply the orientation rules until none fires.
pub(crate) fn apply_to_fixpoint(g: &mut Work, sepsets: &SepsetTable, rules: RuleSet) {
    loop {
        let mut changed = false;
        changed |= r1(g);
        changed |= r2(g);
        changed |= r3(g);
        changed |= r4(g, sepsets);
        if rules == RuleSet::Extended {
            changed |= r5(g);
            changed |= r6_r7(g);
            changed |= r8(g);
            changed |= r9(g);
            changed |= r10(g);
        }
        if !changed {
            break;
        }
    }
}

fn is_directed(g: &Work, a: usize, b: usize) -> bool {
    g.is(b, a, Tail) && g.is(a, b, Arrow)
}

/// a *-> b o-* c, a and c not adjacent  =>  b -> c
fn r1(g: &mut Work) -> bool {
    let mut changed = false;
    for b in 0..g.n {
        for a in g.neighbors(b) {
            if !g.is(a, b, Arrow) {
                continue;
            }
            for c in g.neighbors(b) {
                if c == a || g.adjacent(a, c) || !g.is(c, b, Circle) {
                    continue;
                }
                changed |= g.set(c, b, Tail);
                changed |= g.set(b, c, Arrow);
            }
        }
    }
    changed
}

/// a -> b *-> c or a *-> b -> c, with a *-o c  =>  a *-> c
fn r2(g: &mut Work) -> bool {
    let mut changed = false;
    for a in 0..g.n {
        for c in g.neighbors(a) {
            if !g.is(a, c, Circle) {
                continue;
            }
            let fires = g.neighbors(a).into_iter().any(|b| {
                b != c
                    && g.adjacent(b, c)
                    && ((is_directed(g, a, b) && g.is(b, c, Arrow)) || (g.is(a, b, Arrow) && is_directed(g, b, c)))
            });
            if fires {
                changed |= g.set(a, c, Arrow);
            }
        }
    }
    changed
}

/// a *-> b <-* c, a *-o d o-* c, a and c not adjacent, d *-o b  =>  d *-> b
fn r3(g: &mut Work) -> bool {
    let mut changed = false;
    for b in 0..g.n {
        let nb = g.neighbors(b);
        for &d in &nb {
            if !g.is(d, b, Circle) {
                continue;
            }
            let mut fires = false;
            'outer: for &a in &nb {
                if a == d || !g.is(a, b, Arrow) || !g.adjacent(a, d) || !g.is(a, d, Circle) {
                    continue;
                }
                for &c in &nb {
                    if c == d || c == a || g.adjacent(a, c) || !g.is(c, b, Arrow) {
                        continue;
                    }
                    if g.adjacent(c, d) && g.is(c, d, Circle) {
                        fires = true;
                        break 'outer;
                    }
                }
            }
            if fires {
                changed |= g.set(d, b, Arrow);
            }
        }
    }
    changed
}

/// Discriminating paths. For b o-* c with a <-* b and a -> c, search back from
/// a through colliders that are parents of c until a node d not adjacent to c.
fn r4(g: &mut Work, sepsets: &SepsetTable) -> bool {
    let mut changed = false;
    for b in 0..g.n {
        for c in g.neighbors(b) {
            if !g.is(c, b, Circle) {
                continue;
            }
            for a in g.neighbors(b) {
                if a == c || !g.adjacent(a, c) || !is_directed(g, a, c) || !g.is(b, a, Arrow) {
                    continue;
                }
                if let Some(d) = discriminating_start(g, a, b, c) {
                    let Some(s) = sepset(sepsets, d, c) else { continue };
                    if s.contains(&b) {
                        changed |= g.set(c, b, Tail);
                        changed |= g.set(b, c, Arrow);
                    } else {
                        changed |= g.set(a, b, Arrow);
                        changed |= g.set(c, b, Arrow);
                        changed |= g.set(b, c, Arrow);
                    }
                }
            }
        }
    }
    changed
}

/// BFS backwards from `a` for the far end of a discriminating path for `b`.
/// Every visited node is a collider on the path and a parent of `c`.
fn discriminating_start(g: &Work, a: usize, b: usize, c: usize) -> Option<usize> {
    let mut seen = BTreeSet::from([a, b, c]);
    let mut queue = VecDeque::from([a]);
    while let Some(v) = queue.pop_front() {
        for w in g.neighbors(v) {
            if seen.contains(&w) || !g.is(w, v, Arrow) {
                continue;
            }
            if !g.adjacent(w, c) {
                return Some(w);
            }
            // w continues the path only as a collider that is a parent of c
            if is_directed(g, w, c) && g.is(v, w, Arrow) {
                seen.insert(w);
                queue.push_back(w);
            }
        }
    }
    None
}

/// Uncovered paths from `start` (first step `first`) ending at `end`, where
/// every edge satisfies `ok(u, v)`. Returns the first found path, if any.
fn uncovered_path(
    g: &Work,
    start: usize,
    first: usize,
    end: usize,
    ok: &dyn Fn(&Work, usize, usize) -> bool,
) -> Option<Vec<usize>> {
    fn dfs(
        g: &Work,
        path: &mut Vec<usize>,
        on: &mut Vec<bool>,
        end: usize,
        ok: &dyn Fn(&Work, usize, usize) -> bool,
    ) -> bool {
        let v = *path.last().unwrap();
        let prev = path[path.len() - 2];
        for w in g.neighbors(v) {
            if on[w] || g.adjacent(prev, w) || !ok(g, v, w) {
                continue;
            }
            path.push(w);
            if w == end {
                return true;
            }
            on[w] = true;
            if dfs(g, path, on, end, ok) {
                return true;
            }
            on[w] = false;
            path.pop();
        }
        false
    }
    if !g.adjacent(start, first) || !ok(g, start, first) {
        return None;
    }
    if first == end {
        return Some(vec![start, end]);
    }
    let mut on = vec![false; g.n];
    on[start] = true;
    on[first] = true;
    let mut path = vec![start, first];
    dfs(g, &mut path, &mut on, end, ok).then_some(path)
}

fn circle_edge(g: &Work, u: usize, v: usize) -> bool {
    g.is(u, v, Circle) && g.is(v, u, Circle)
}

/// Potentially directed step u -> v: no arrowhead at u, no tail at v.
fn pd_edge(g: &Work, u: usize, v: usize) -> bool {
    !g.is(v, u, Arrow) && !g.is(u, v, Tail)
}

fn set_undirected(g: &mut Work, u: usize, v: usize) -> bool {
    g.set(u, v, Tail) | g.set(v, u, Tail)
}

/// a o-o b with an uncovered circle path a, c, ..., d, b where a, d and b, c
/// are not adjacent  =>  a - b and every edge on the path undirected.
fn r5(g: &mut Work) -> bool {
    let mut changed = false;
    for a in 0..g.n {
        for b in g.neighbors(a) {
            if b <= a || !circle_edge(g, a, b) {
                continue;
            }
            for c in g.neighbors(a) {
                if c == b || g.adjacent(b, c) {
                    continue;
                }
                if let Some(p) = uncovered_path(g, a, c, b, &circle_edge) {
                    let d = p[p.len() - 2];
                    if p.len() < 4 || g.adjacent(a, d) {
                        continue;
                    }
                    changed |= set_undirected(g, a, b);
                    for w in p.windows(2) {
                        changed |= set_undirected(g, w[0], w[1]);
                    }
                    break;
                }
            }
        }
    }
    changed
}

/// R6: a - b o-* c  =>  b -* c.  R7: a -o b o-* c, a and c not adjacent  =>  b -* c.
fn r6_r7(g: &mut Work) -> bool {
    let mut changed = false;
    for b in 0..g.n {
        for c in g.neighbors(b) {
            if !g.is(c, b, Circle) {
                continue;
            }
            let fires = g.neighbors(b).into_iter().any(|a| {
                a != c
                    && ((g.is(a, b, Tail) && g.is(b, a, Tail))
                        || (g.is(b, a, Tail) && g.is(a, b, Circle) && !g.adjacent(a, c)))
            });
            if fires {
                changed |= g.set(c, b, Tail);
            }
        }
    }
    changed
}

fn partial_directed(g: &Work, a: usize, c: usize) -> bool {
    g.is(c, a, Circle) && g.is(a, c, Arrow)
}

/// a -> b -> c or a -o b -> c, with a o-> c  =>  a -> c
fn r8(g: &mut Work) -> bool {
    let mut changed = false;
    for a in 0..g.n {
        for c in g.neighbors(a) {
            if !partial_directed(g, a, c) {
                continue;
            }
            let fires = g.neighbors(a).into_iter().any(|b| {
                b != c
                    && is_directed(g, b, c)
                    && g.is(b, a, Tail)
                    && (g.is(a, b, Arrow) || g.is(a, b, Circle))
            });
            if fires {
                changed |= g.set(c, a, Tail);
            }
        }
    }
    changed
}

/// a o-> c with an uncovered p.d. path a, b, ..., c where b and c are not
/// adjacent  =>  a -> c
fn r9(g: &mut Work) -> bool {
    let mut changed = false;
    for a in 0..g.n {
        for c in g.neighbors(a) {
            if !partial_directed(g, a, c) {
                continue;
            }
            let fires = g.neighbors(a).into_iter().any(|b| {
                b != c && !g.adjacent(b, c) && uncovered_path(g, a, b, c, &pd_edge).is_some()
            });
            if fires {
                changed |= g.set(c, a, Tail);
            }
        }
    }
    changed
}

/// a o-> c, b -> c <- d, uncovered p.d. paths from a to b and from a to d
/// whose second nodes m and w differ and are not adjacent  =>  a -> c
fn r10(g: &mut Work) -> bool {
    let mut changed = false;
    for a in 0..g.n {
        for c in g.neighbors(a) {
            if !partial_directed(g, a, c) {
                continue;
            }
            let parents: Vec<usize> = g.neighbors(c).into_iter().filter(|&p| p != a && is_directed(g, p, c)).collect();
            let starts = g.neighbors(a);
            let mut fires = false;
            'search: for (i, &b) in parents.iter().enumerate() {
                for &d in &parents[i + 1..] {
                    for &m in &starts {
                        if m == c || uncovered_path(g, a, m, b, &pd_edge).is_none() {
                            continue;
                        }
                        for &w in &starts {
                            if w == c || w == m || g.adjacent(m, w) {
                                continue;
                            }
                            if uncovered_path(g, a, w, d, &pd_edge).is_some() {
                                fires = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
            if fires {
                changed |= g.set(c, a, Tail);
            }
        }
    }
    changed
}
