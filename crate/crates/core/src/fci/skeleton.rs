use std::collections::BTreeSet;

use itertools::Itertools;
use rayon::prelude::*;

use super::graph::Work;
use super::SepsetTable;
use crate::ci::CiTest;
use crate::error::Result;
use crate::graph::{EndpointMark, PairKey};

/// First subset (by size, then lexicographic) of `cands` with `min <= |S| <= max`
/// making x and y independent, plus the number of tests run.
fn find_sepset(
    test: &dyn CiTest,
    x: usize,
    y: usize,
    cands: &[usize],
    min: usize,
    max: usize,
) -> Result<(Option<Vec<usize>>, usize)> {
    let mut runs = 0;
    for k in min..=max.min(cands.len()) {
        for s in cands.iter().copied().combinations(k) {
            runs += 1;
            if test.test(x, y, &s)?.independent {
                return Ok((Some(s), runs));
            }
        }
    }
    Ok((None, runs))
}

/// PC-stable adjacency search. Neighbor sets are frozen per depth level, so
/// each level's tests are independent and run in parallel; removals are
/// committed between levels.
pub(crate) fn adjacency_search(
    test: &dyn CiTest,
    g: &mut Work,
    sepsets: &mut SepsetTable,
    max_cond: usize,
) -> Result<usize> {
    let n = g.n;
    let mut total = 0;
    let mut depth = 0usize;
    loop {
        if depth > max_cond {
            break;
        }
        let snapshot: Vec<Vec<usize>> = (0..n).map(|i| g.neighbors(i)).collect();
        let pairs: Vec<PairKey> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| g.adjacent(i, j) && !g.is_locked(i, j))
            .collect();
        let eligible = pairs.iter().any(|&(i, j)| {
            snapshot[i].iter().filter(|&&v| v != j).count() >= depth
                || snapshot[j].iter().filter(|&&v| v != i).count() >= depth
        });
        if !eligible {
            break;
        }
        let results: Vec<Result<(PairKey, Option<Vec<usize>>, usize)>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let mut runs = 0;
                for (x, y) in [(i, j), (j, i)] {
                    let cands: Vec<usize> = snapshot[x].iter().copied().filter(|&v| v != y).collect();
                    if cands.len() < depth {
                        continue;
                    }
                    let (found, r) = find_sepset(test, x, y, &cands, depth, depth)?;
                    runs += r;
                    if let Some(mut s) = found {
                        s.sort_unstable();
                        return Ok(((i, j), Some(s), runs));
                    }
                }
                Ok(((i, j), None, runs))
            })
            .collect();
        for r in results {
            let (key, found, runs) = r?;
            total += runs;
            if let Some(s) = found {
                g.remove(key.0, key.1);
                sepsets.insert(key, s);
            }
        }
        depth += 1;
    }
    Ok(total)
}

/// Pairs pinned absent never enter the search, so look for a separating set
/// among their final neighbors; pairs with none found stay without a sepset
/// and are skipped by collider orientation.
pub(crate) fn sepsets_for_pinned(
    test: &dyn CiTest,
    g: &Work,
    sepsets: &mut SepsetTable,
    pinned: &[PairKey],
    max_cond: usize,
) -> Result<usize> {
    let mut total = 0;
    for &(i, j) in pinned {
        for (x, y) in [(i, j), (j, i)] {
            let cands: Vec<usize> = g.neighbors(x).into_iter().filter(|&v| v != y).collect();
            let (found, r) = find_sepset(test, x, y, &cands, 0, max_cond)?;
            total += r;
            if let Some(s) = found {
                sepsets.insert((i, j), s);
                break;
            }
        }
    }
    Ok(total)
}

/// Nodes reachable from `x` along paths on which every inner node is a
/// collider or forms a triangle with its path neighbors.
pub(crate) fn possible_dsep(g: &Work, x: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for b in g.neighbors(x) {
        out.insert(b);
        seen.insert((x, b));
        stack.push((x, b));
    }
    while let Some((a, b)) = stack.pop() {
        for c in g.neighbors(b) {
            if c == a || c == x {
                continue;
            }
            let collider = g.is(a, b, EndpointMark::Arrow) && g.is(c, b, EndpointMark::Arrow);
            if collider || g.adjacent(a, c) {
                out.insert(c);
                if seen.insert((b, c)) {
                    stack.push((b, c));
                }
            }
        }
    }
    out
}

/// Possible-D-Sep refinement. Sets are computed once from the oriented
/// skeleton; returns (edges removed, tests run).
pub(crate) fn possible_dsep_search(
    test: &dyn CiTest,
    g: &mut Work,
    sepsets: &mut SepsetTable,
    max_cond: usize,
) -> Result<(usize, usize)> {
    let n = g.n;
    let pds: Vec<BTreeSet<usize>> = (0..n).map(|x| possible_dsep(g, x)).collect();
    let pairs: Vec<PairKey> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| g.adjacent(i, j) && !g.is_locked(i, j))
        .collect();
    let snapshot = &*g;
    let results: Vec<Result<(PairKey, Option<Vec<usize>>, usize)>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut runs = 0;
            for (x, y) in [(i, j), (j, i)] {
                let cands: Vec<usize> = pds[x].iter().copied().filter(|&v| v != y && v != x).collect();
                // subsets of the current neighbors were already tried
                let nb: BTreeSet<usize> = snapshot.neighbors(x).into_iter().collect();
                if cands.iter().all(|v| nb.contains(v)) {
                    continue;
                }
                for k in 1..=max_cond.min(cands.len()) {
                    for s in cands.iter().copied().combinations(k) {
                        if s.iter().all(|v| nb.contains(v)) {
                            continue;
                        }
                        runs += 1;
                        if test.test(x, y, &s)?.independent {
                            return Ok(((i, j), Some(s), runs));
                        }
                    }
                }
            }
            Ok(((i, j), None, runs))
        })
        .collect();
    let mut removed = 0;
    let mut total = 0;
    for r in results {
        let (key, found, runs) = r?;
        total += runs;
        if let Some(s) = found {
            g.remove(key.0, key.1);
            sepsets.insert(key, s);
            removed += 1;
        }
    }
    Ok((removed, total))
}
