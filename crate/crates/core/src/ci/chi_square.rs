use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{CiDecision, CiTest};
use crate::data::BatchDataset;
use crate::error::{Error, Result};

/// Strata with fewer rows than this contribute nothing.
pub const STRATUM_FLOOR: usize = 5;

/// Stratified Pearson chi-square test for categorical data.
#[derive(Clone, Debug)]
pub struct ChiSquare {
    codes: Vec<Vec<u32>>,
    alpha: f64,
}

impl ChiSquare {
    pub fn new(data: &BatchDataset, alpha: f64) -> Result<Self> {
        let mut codes = Vec::with_capacity(data.n_cols());
        for (j, c) in data.columns().iter().enumerate() {
            let col = c
                .iter()
                .enumerate()
                .map(|(r, v)| {
                    if *v < 0.0 || v.fract() != 0.0 || *v > u32::MAX as f64 {
                        Err(Error::Csv { row: r + 2, col: j + 1, msg: format!("`{v}` is not a category code") })
                    } else {
                        Ok(*v as u32)
                    }
                })
                .collect::<Result<Vec<u32>>>()?;
            codes.push(col);
        }
        Ok(ChiSquare { codes, alpha })
    }

    /// (statistic, degrees of freedom) summed over strata.
    pub fn statistic(&self, x: usize, y: usize, z: &[usize]) -> (f64, usize) {
        let n = self.codes.first().map_or(0, Vec::len);
        let mut strata: BTreeMap<Vec<u32>, Vec<usize>> = BTreeMap::new();
        for r in 0..n {
            let key: Vec<u32> = z.iter().map(|&v| self.codes[v][r]).collect();
            strata.entry(key).or_default().push(r);
        }
        let mut stat = 0.0;
        let mut dof = 0usize;
        for rows in strata.values() {
            if rows.len() < STRATUM_FLOOR {
                continue;
            }
            let (s, d) = table_statistic(rows.iter().map(|&r| (self.codes[x][r], self.codes[y][r])));
            stat += s;
            dof += d;
        }
        (stat, dof)
    }
}

fn table_statistic(pairs: impl Iterator<Item = (u32, u32)>) -> (f64, usize) {
    let mut table: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut rows: BTreeMap<u32, f64> = BTreeMap::new();
    let mut cols: BTreeMap<u32, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (a, b) in pairs {
        *table.entry((a, b)).or_default() += 1.0;
        *rows.entry(a).or_default() += 1.0;
        *cols.entry(b).or_default() += 1.0;
        total += 1.0;
    }
    if rows.len() < 2 || cols.len() < 2 {
        return (0.0, 0);
    }
    let mut s = 0.0;
    for (a, ra) in &rows {
        for (b, cb) in &cols {
            let e = ra * cb / total;
            let o = table.get(&(*a, *b)).copied().unwrap_or(0.0);
            s += (o - e) * (o - e) / e;
        }
    }
    (s, (rows.len() - 1) * (cols.len() - 1))
}

impl CiTest for ChiSquare {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn n_vars(&self) -> usize {
        self.codes.len()
    }

    fn test(&self, x: usize, y: usize, z: &[usize]) -> Result<CiDecision> {
        let (stat, dof) = self.statistic(x, y, z);
        if dof == 0 {
            return Ok(CiDecision::from_p(1.0, 0.0, self.alpha));
        }
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::DegenerateData(e.to_string()))?;
        let p = dist.sf(stat);
        if !p.is_finite() || !stat.is_finite() {
            return Err(Error::DegenerateData("non-finite chi-square result".into()));
        }
        Ok(CiDecision::from_p(p, stat, self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::VarKind;

    fn data(cols: Vec<Vec<f64>>) -> BatchDataset {
        let names = (0..cols.len()).map(|i| format!("V{i}")).collect();
        let kinds = vec![VarKind::Categorical { levels: 2 }; cols.len()];
        BatchDataset::new(names, kinds, cols).unwrap()
    }

    #[test]
    fn copy_is_dependent() {
        let x: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let t = ChiSquare::new(&data(vec![x.clone(), x]), 0.05).unwrap();
        assert!(!t.test(0, 1, &[]).unwrap().independent);
    }

    #[test]
    fn single_level_is_independent_with_unit_p() {
        let x = vec![0.0; 40];
        let y: Vec<f64> = (0..40).map(|i| (i % 2) as f64).collect();
        let t = ChiSquare::new(&data(vec![x, y]), 0.05).unwrap();
        let d = t.test(0, 1, &[]).unwrap();
        assert!(d.independent);
        assert_eq!(d.p_value, 1.0);
    }

    #[test]
    fn known_two_by_two_statistic() {
        // table [[10, 20], [30, 40]] has chi-square 0.7936507936...
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (a, b, k) in [(0, 0, 10), (0, 1, 20), (1, 0, 30), (1, 1, 40)] {
            for _ in 0..k {
                x.push(a as f64);
                y.push(b as f64);
            }
        }
        let t = ChiSquare::new(&data(vec![x, y]), 0.05).unwrap();
        let (s, dof) = t.statistic(0, 1, &[]);
        assert_eq!(dof, 1);
        assert!((s - 0.793_650_793_650_793_6).abs() < 1e-12);
        let p = t.test(0, 1, &[]).unwrap().p_value;
        assert!((p - 0.372_998_483_613_486_9).abs() < 1e-9);
    }

    #[test]
    fn small_strata_skipped() {
        let x = vec![0.0, 1.0, 0.0, 1.0];
        let z = vec![0.0, 0.0, 1.0, 1.0];
        let t = ChiSquare::new(&data(vec![x.clone(), x, z]), 0.05).unwrap();
        assert_eq!(t.statistic(0, 1, &[2]), (0.0, 0));
    }
}
