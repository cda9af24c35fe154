use nalgebra::DMatrix;

use super::{normal_two_sided, CiDecision, CiTest};
use crate::data::BatchDataset;
use crate::error::{Error, Result};

const R_CLAMP: f64 = 1.0 - 1e-12;
const COND_LIMIT: f64 = 1e12;

/// Fisher-Z test on partial correlations.
#[derive(Clone, Debug)]
pub struct FisherZ {
    n: usize,
    corr: DMatrix<f64>,
    alpha: f64,
}

impl FisherZ {
    pub fn new(data: &BatchDataset, alpha: f64) -> Result<Self> {
        Ok(FisherZ { n: data.n_rows(), corr: correlation_matrix(data.columns()), alpha })
    }

    pub fn correlation(&self) -> &DMatrix<f64> {
        &self.corr
    }

    /// Partial correlation of x and y given z.
    pub fn partial_correlation(&self, x: usize, y: usize, z: &[usize]) -> Result<f64> {
        let r = if z.is_empty() {
            self.corr[(x, y)]
        } else {
            let idx: Vec<usize> = [x, y].iter().chain(z).copied().collect();
            let k = idx.len();
            let sub = DMatrix::from_fn(k, k, |a, b| self.corr[(idx[a], idx[b])]);
            let prec = invert(&sub)?;
            let d = prec[(0, 0)] * prec[(1, 1)];
            if !(d > 0.0) {
                return Err(Error::DegenerateData(format!("partial correlation of #{x},#{y} undefined")));
            }
            -prec[(0, 1)] / d.sqrt()
        };
        if !r.is_finite() {
            return Err(Error::DegenerateData(format!("non-finite correlation between #{x} and #{y}")));
        }
        Ok(r.clamp(-R_CLAMP, R_CLAMP))
    }
}

/// Inverse, or SVD pseudo-inverse when the condition number exceeds the limit.
fn invert(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::DegenerateData("singular correlation submatrix".into()));
    }
    if smin > 0.0 && smax / smin <= COND_LIMIT {
        if let Some(inv) = m.clone().try_inverse() {
            return Ok(inv);
        }
    }
    svd.pseudo_inverse(smax * 1e-12)
        .map_err(|e| Error::DegenerateData(format!("pseudo-inverse failed: {e}")))
}

pub(crate) fn correlation_matrix(columns: &[Vec<f64>]) -> DMatrix<f64> {
    let d = columns.len();
    let n = columns.first().map_or(0, Vec::len) as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let s: f64 = centered[a].iter().zip(&centered[b]).map(|(u, v)| u * v).sum();
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    DMatrix::from_fn(d, d, |a, b| {
        if a == b {
            1.0
        } else {
            cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt()
        }
    })
}

impl CiTest for FisherZ {
    fn alpha(&self) -> f64 {
        self.alpha
    }

    fn n_vars(&self) -> usize {
        self.corr.nrows()
    }

    fn test(&self, x: usize, y: usize, z: &[usize]) -> Result<CiDecision> {
        if self.n <= z.len() + 3 {
            return Err(Error::DegenerateData(format!(
                "{} rows are too few for a conditioning set of size {}",
                self.n,
                z.len()
            )));
        }
        let r = self.partial_correlation(x, y, z)?;
        let stat = ((self.n - z.len() - 3) as f64).sqrt() * r.atanh().abs();
        if !stat.is_finite() {
            return Err(Error::DegenerateData("non-finite Fisher-Z statistic".into()));
        }
        Ok(CiDecision::from_p(normal_two_sided(stat), stat, self.alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(cols: Vec<Vec<f64>>) -> BatchDataset {
        let names = (0..cols.len()).map(|i| format!("V{i}")).collect();
        BatchDataset::continuous(names, cols).unwrap()
    }

    #[test]
    fn identical_columns_are_dependent() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let t = FisherZ::new(&data(vec![x.clone(), x]), 0.05).unwrap();
        let d = t.test(0, 1, &[]).unwrap();
        assert!(!d.independent);
        assert!(d.p_value < 1e-12);
    }

    #[test]
    fn partial_correlation_removes_common_cause() {
        // y and w are both exact functions of z plus orthogonal parts
        let z: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
        let e1: Vec<f64> = (0..200).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
        let y: Vec<f64> = z.iter().zip(&e1).map(|(a, b)| 2.0 * a + 0.01 * b).collect();
        let t = FisherZ::new(&data(vec![z.clone(), y.clone(), z.iter().map(|v| -v).collect()]), 0.05).unwrap();
        assert!(t.partial_correlation(1, 2, &[]).unwrap().abs() > 0.9);
    }

    #[test]
    fn too_few_rows_is_degenerate() {
        let t = FisherZ::new(&data(vec![vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0]]), 0.05).unwrap();
        assert!(matches!(t.test(0, 1, &[]), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn constant_column_is_degenerate() {
        let t = FisherZ::new(&data(vec![vec![1.0; 10], (0..10).map(f64::from).collect()]), 0.05).unwrap();
        assert!(matches!(t.test(0, 1, &[]), Err(Error::DegenerateData(_))));
    }
}
