//! Batch datasets and CSV ingestion.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::pag::validate_names_pub;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    /// Integer codes `0..levels`.
    Categorical { levels: usize },
}

/// One batch: column-major matrix with names and kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchDataset {
    names: Vec<String>,
    kinds: Vec<VarKind>,
    columns: Vec<Vec<f64>>,
}

impl BatchDataset {
    pub fn new(names: Vec<String>, kinds: Vec<VarKind>, columns: Vec<Vec<f64>>) -> Result<Self> {
        validate_names_pub(&names)?;
        if kinds.len() != names.len() || columns.len() != names.len() {
            return Err(Error::Config("names, kinds and columns differ in length".into()));
        }
        let n = columns.first().map_or(0, Vec::len);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::Config(format!("column `{}` has {} rows, expected {n}", names[j], c.len())));
            }
            if let Some(r) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::Csv { row: r + 1, col: j + 1, msg: "non-finite value".into() });
            }
        }
        Ok(BatchDataset { names, kinds, columns })
    }

    /// All-continuous dataset.
    pub fn continuous(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let kinds = vec![VarKind::Continuous; names.len()];
        Self::new(names, kinds, columns)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[VarKind] {
        &self.kinds
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn all_continuous(&self) -> bool {
        self.kinds.iter().all(|k| *k == VarKind::Continuous)
    }

    pub fn all_categorical(&self) -> bool {
        self.kinds.iter().all(|k| matches!(k, VarKind::Categorical { .. }))
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn select_rows(&self, rows: &[usize]) -> BatchDataset {
        let columns = self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect();
        BatchDataset { names: self.names.clone(), kinds: self.kinds.clone(), columns }
    }

    /// Row-wise concatenation; all parts must share names.
    pub fn concat(parts: &[&BatchDataset]) -> Result<BatchDataset> {
        let first = parts.first().ok_or_else(|| Error::Config("nothing to concatenate".into()))?;
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); first.n_cols()];
        let mut kinds = first.kinds.clone();
        for p in parts {
            if p.names != first.names {
                return Err(Error::VariableMismatch("batches have different columns".into()));
            }
            for (j, c) in p.columns.iter().enumerate() {
                columns[j].extend_from_slice(c);
                if let (VarKind::Categorical { levels: a }, VarKind::Categorical { levels: b }) = (kinds[j], p.kinds[j]) {
                    kinds[j] = VarKind::Categorical { levels: a.max(b) };
                }
            }
        }
        Ok(BatchDataset { names: first.names.clone(), kinds, columns })
    }

    /// Keep only the named columns, in the given order.
    pub fn project(&self, names: &[String]) -> Result<BatchDataset> {
        let idx = names.iter().map(|n| self.index_of(n)).collect::<Result<Vec<_>>>()?;
        Ok(BatchDataset {
            names: names.to_vec(),
            kinds: idx.iter().map(|&j| self.kinds[j]).collect(),
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.n_rows() {
            let row: Vec<String> = self
                .columns
                .iter()
                .zip(&self.kinds)
                .map(|(c, k)| match k {
                    VarKind::Categorical { .. } => format!("{}", c[r] as i64),
                    VarKind::Continuous => format!("{}", c[r]),
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Parse CSV text. With `kinds = None`, a column whose values are all
    /// small non-negative integers (at most 10 distinct) is read as categorical.
    pub fn from_csv_str(text: &str, kinds: Option<&[VarKind]>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Csv { row: 1, col: 0, msg: e.to_string() })?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (r, rec) in rdr.records().enumerate() {
            let line = r + 2;
            let rec = rec.map_err(|e| Error::Csv { row: line, col: 0, msg: e.to_string() })?;
            if rec.len() != names.len() {
                return Err(Error::Csv { row: line, col: rec.len(), msg: format!("expected {} cells", names.len()) });
            }
            for (j, cell) in rec.iter().enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                    row: line,
                    col: j + 1,
                    msg: format!("not a number: `{cell}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Csv { row: line, col: j + 1, msg: "non-finite value".into() });
                }
                columns[j].push(v);
            }
        }
        let kinds = match kinds {
            Some(k) => {
                if k.len() != names.len() {
                    return Err(Error::Config("kind list does not match CSV columns".into()));
                }
                k.to_vec()
            }
            None => columns.iter().map(|c| infer_kind(c)).collect(),
        };
        BatchDataset::new(names, kinds, columns)
    }

    pub fn read_csv(path: &Path, kinds: Option<&[VarKind]>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_csv_str(&text, kinds)
    }
}

fn infer_kind(col: &[f64]) -> VarKind {
    let all_int = col.iter().all(|v| *v >= 0.0 && v.fract() == 0.0 && *v < 10.0);
    if all_int && !col.is_empty() {
        let max = col.iter().fold(0.0f64, |a, b| a.max(*b)) as usize;
        VarKind::Categorical { levels: max + 1 }
    } else {
        VarKind::Continuous
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = BatchDataset::new(
            vec!["A".into(), "B".into()],
            vec![VarKind::Continuous, VarKind::Categorical { levels: 2 }],
            vec![vec![0.1, -2.5], vec![0.0, 1.0]],
        )
        .unwrap();
        let text = d.to_csv_string();
        assert_eq!(text, "A,B\n0.1,0\n-2.5,1\n");
        let back = BatchDataset::from_csv_str(&text, Some(d.kinds())).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn corrupt_cell_reports_row_and_column() {
        let err = BatchDataset::from_csv_str("A,B\n1,2\n3,x\n", None).unwrap_err();
        match err {
            Error::Csv { row, col, .. } => assert_eq!((row, col), (3, 2)),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn kind_inference() {
        let d = BatchDataset::from_csv_str("A,B\n1,0.5\n0,2\n", None).unwrap();
        assert_eq!(d.kinds()[0], VarKind::Categorical { levels: 2 });
        assert_eq!(d.kinds()[1], VarKind::Continuous);
    }

    #[test]
    fn concat_and_select() {
        let a = BatchDataset::continuous(vec!["X".into()], vec![vec![1.0, 2.0]]).unwrap();
        let b = BatchDataset::continuous(vec!["X".into()], vec![vec![3.0]]).unwrap();
        let c = BatchDataset::concat(&[&a, &b]).unwrap();
        assert_eq!(c.column(0), &[1.0, 2.0, 3.0]);
        assert_eq!(c.select_rows(&[2, 0]).column(0), &[3.0, 1.0]);
    }
}
