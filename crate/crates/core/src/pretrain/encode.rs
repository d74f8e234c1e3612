use serde::{Deserialize, Serialize};

use crate::dataio::{Cell, ColumnKind, TabularFrame};
use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::data("ragged rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncodedColumn {
    Numeric {
        name: String,
        mean: f64,
        std: f64,
        missing_indicator: bool,
    },
    Categorical {
        name: String,
        categories: Vec<String>,
        missing_indicator: bool,
    },
}

impl EncodedColumn {
    fn width(&self) -> usize {
        match self {
            EncodedColumn::Numeric { missing_indicator, .. } => 1 + *missing_indicator as usize,
            EncodedColumn::Categorical {
                categories,
                missing_indicator,
                ..
            } => categories.len() + *missing_indicator as usize,
        }
    }
}

/// Standardizes numeric columns and one-hot encodes categoricals, adding
/// a missing-indicator column for every feature that had missing cells
/// when the encoder was fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub columns: Vec<EncodedColumn>,
}

impl Encoder {
    pub fn fit(frame: &TabularFrame) -> Self {
        let columns = frame
            .columns()
            .iter()
            .enumerate()
            .map(|(j, schema)| {
                let missing_indicator = (0..frame.n_rows()).any(|r| frame.cell(r, j).is_missing());
                match schema.kind {
                    ColumnKind::Numeric => {
                        let vals: Vec<f64> = (0..frame.n_rows()).filter_map(|r| frame.cell(r, j).as_f64()).collect();
                        let n = vals.len().max(1) as f64;
                        let mean = vals.iter().sum::<f64>() / n;
                        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                        let std = var.sqrt();
                        EncodedColumn::Numeric {
                            name: schema.name.clone(),
                            mean,
                            std: if std > 0.0 { std } else { 1.0 },
                            missing_indicator,
                        }
                    }
                    ColumnKind::Categorical => EncodedColumn::Categorical {
                        name: schema.name.clone(),
                        categories: schema.categories.clone(),
                        missing_indicator,
                    },
                }
            })
            .collect();
        Encoder { columns }
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(EncodedColumn::width).sum()
    }

    /// Encodes `frame`, whose columns are matched by name.
    pub fn transform(&self, frame: &TabularFrame) -> Result<Matrix> {
        let idx: Vec<usize> = self
            .columns
            .iter()
            .map(|c| {
                let name = match c {
                    EncodedColumn::Numeric { name, .. } | EncodedColumn::Categorical { name, .. } => name,
                };
                frame
                    .column_index(name)
                    .ok_or_else(|| Error::data(format!("column {name:?} missing from frame")))
            })
            .collect::<Result<_>>()?;
        let width = self.width();
        let mut m = Matrix::zeros(frame.n_rows(), width);
        for r in 0..frame.n_rows() {
            let out = &mut m.data[r * width..(r + 1) * width];
            let mut k = 0;
            for (c, &j) in self.columns.iter().zip(&idx) {
                let cell = frame.cell(r, j);
                match c {
                    EncodedColumn::Numeric {
                        mean,
                        std,
                        missing_indicator,
                        ..
                    } => {
                        if let Some(v) = cell.as_f64() {
                            out[k] = (v - mean) / std;
                        }
                        k += 1;
                        if *missing_indicator {
                            out[k] = cell.is_missing() as u8 as f64;
                            k += 1;
                        }
                    }
                    EncodedColumn::Categorical {
                        categories,
                        missing_indicator,
                        ..
                    } => {
                        if let Cell::Cat(code) = cell {
                            // Frames may index categories differently; go through the label.
                            let label = &frame.columns()[j].categories[code as usize];
                            if let Some(p) = categories.iter().position(|c| c == label) {
                                out[k + p] = 1.0;
                            }
                        }
                        k += categories.len();
                        if *missing_indicator {
                            out[k] = cell.is_missing() as u8 as f64;
                            k += 1;
                        }
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Fits an encoder on `frame` and encodes it.
pub fn encode_features(frame: &TabularFrame) -> Result<(Encoder, Matrix)> {
    let enc = Encoder::fit(frame);
    let m = enc.transform(frame)?;
    Ok((enc, m))
}
