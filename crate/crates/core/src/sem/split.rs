use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::data::BatchDataset;
use crate::error::{Error, Result};

/// Rows whose `variable` exceeds its `quantile` are accepted with
/// probability `p_in`, others with `p_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionBias {
    pub variable: String,
    pub quantile: f64,
    pub p_in: f64,
    pub p_out: f64,
}

impl SelectionBias {
    fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.quantile) || !unit(self.p_in) || !unit(self.p_out) || self.p_in + self.p_out <= 0.0 {
            return Err(Error::Config("selection bias needs quantile and probabilities in [0,1]".into()));
        }
        Ok(())
    }
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = ((v.len() - 1) as f64 * q).round() as usize;
    v[pos]
}

/// Split rows into batches without replacement. Without bias this is a
/// random partition of the first `sum(sizes)` shuffled rows; with bias each
/// batch is filled by rejection sampling from the unused rows.
pub fn split_batches(
    data: &BatchDataset,
    sizes: &[usize],
    bias: Option<&SelectionBias>,
    seed: u64,
) -> Result<Vec<BatchDataset>> {
    let need: usize = sizes.iter().sum();
    let n = data.n_rows();
    if need > n {
        return Err(Error::InfeasibleSizes(format!("{need} rows requested, {n} available")));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut rng);
    let Some(bias) = bias else {
        let mut out = Vec::with_capacity(sizes.len());
        let mut at = 0;
        for &s in sizes {
            out.push(data.select_rows(&rows[at..at + s]));
            at += s;
        }
        return Ok(out);
    };
    bias.validate()?;
    let col = data.column(data.index_of(&bias.variable)?);
    let cut = quantile(col, bias.quantile);
    let mut pool = rows;
    let mut out = Vec::with_capacity(sizes.len());
    for (i, &s) in sizes.iter().enumerate() {
        let mut taken = Vec::with_capacity(s);
        let mut stalls = 0;
        while taken.len() < s {
            if pool.is_empty() {
                return Err(Error::InfeasibleSizes(format!("row pool exhausted while filling batch {}", i + 1)));
            }
            let before = taken.len();
            let mut keep = Vec::with_capacity(pool.len());
            for &r in &pool {
                if taken.len() < s {
                    let p = if col[r] > cut { bias.p_in } else { bias.p_out };
                    if rng.random::<f64>() < p {
                        taken.push(r);
                        continue;
                    }
                }
                keep.push(r);
            }
            pool = keep;
            stalls = if taken.len() == before { stalls + 1 } else { 0 };
            if stalls > 1000 {
                return Err(Error::InfeasibleSizes("selection probabilities never accept remaining rows".into()));
            }
        }
        out.push(data.select_rows(&taken));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> BatchDataset {
        BatchDataset::continuous(vec!["X".into()], vec![(0..n).map(|v| v as f64).collect()]).unwrap()
    }

    #[test]
    fn partition_covers_rows_once() {
        let d = ramp(100);
        let parts = split_batches(&d, &[30, 30, 40], None, 3).unwrap();
        let mut all: Vec<f64> = parts.iter().flat_map(|p| p.column(0).to_vec()).collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, d.column(0));
    }

    #[test]
    fn infeasible_sizes() {
        assert!(matches!(split_batches(&ramp(10), &[6, 6], None, 0), Err(Error::InfeasibleSizes(_))));
    }

    #[test]
    fn biased_batches_skew_high() {
        let d = ramp(1000);
        let bias = SelectionBias { variable: "X".into(), quantile: 0.5, p_in: 0.9, p_out: 0.1 };
        let parts = split_batches(&d, &[100, 100], Some(&bias), 5).unwrap();
        let m = parts[0].column(0).iter().sum::<f64>() / 100.0;
        assert!(m > 499.5);
    }
}
