//! Datasets, symmetric scatter matrices, sample covariances and norms.
//!
//! A [`Dataset`] holds `n` observations of a `p`-dimensional vector as the
//! rows of an `n x p` matrix. Covariances always use the `1/n`
//! normalization, including the leave-one-out covariance
//! `S_{-j} = S - x_j x_j^T / n`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Descriptive record of where a dataset came from. Never read by numerics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub family: String,
    pub seed: Option<u64>,
    pub shape: Option<String>,
    pub mean: Option<String>,
}

/// `n x p` real sample matrix, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: DMatrix<f64>,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(samples: DMatrix<f64>) -> Result<Self> {
        if samples.nrows() == 0 || samples.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset must have n >= 1 and p >= 1, got {}x{}",
                samples.nrows(),
                samples.ncols()
            )));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % samples.nrows(), pos / samples.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite entry at row {row}, column {col}"
            )));
        }
        Ok(Self {
            samples,
            provenance: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: format!("{p} columns"),
                found: format!("{} columns in row {i}", r.len()),
            });
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn n(&self) -> usize {
        self.samples.nrows()
    }

    pub fn p(&self) -> usize {
        self.samples.ncols()
    }

    /// Aspect ratio `p / n`.
    pub fn gamma(&self) -> f64 {
        self.p() as f64 / self.n() as f64
    }

    pub fn samples(&self) -> &DMatrix<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> DMatrix<f64> {
        self.samples
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.samples.row(i).into_owned()
    }

    /// Sample `i` as a column vector.
    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.samples.row(i).transpose()
    }

    /// Euclidean norm of every row.
    pub fn row_norms(&self) -> Vec<f64> {
        self.samples.row_iter().map(|r| r.norm()).collect()
    }

    /// Parse a headerless CSV of `n` rows with `p` decimal fields each.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                column: 0,
                message: e.to_string(),
            })?;
            let mut values = Vec::with_capacity(rec.len());
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: j + 1,
                    message: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: j + 1,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                values.push(v);
            }
            if let Some(first) = rows.first() {
                if values.len() != first.len() {
                    return Err(Error::Parse {
                        row,
                        column: values.len().min(first.len()) + 1,
                        message: format!("expected {} fields, found {}", first.len(), values.len()),
                    });
                }
            }
            rows.push(values);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                row: 0,
                column: 0,
                message: "empty input".into(),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    /// Write the samples as headerless CSV with shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for r in self.samples.row_iter() {
            let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Real symmetric `p x p` matrix; symmetrized as `(M + M^T)/2` on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMatrix {
    entries: DMatrix<f64>,
}

impl ScatterMatrix {
    pub fn new(mut entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: "non-empty square matrix".into(),
                found: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        linalg::symmetrize(&mut entries);
        Ok(Self { entries })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            entries: DMatrix::identity(p, p),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn p(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Normalized trace `p^{-1} Tr M`.
    pub fn tau(&self) -> f64 {
        self.trace() / self.p() as f64
    }

    /// SPD check by attempting a Cholesky factorization.
    pub fn is_spd(&self) -> bool {
        nalgebra::Cholesky::new(self.entries.clone()).is_some()
    }

    pub fn require_spd(&self, what: &str) -> Result<()> {
        if self.is_spd() {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite(what.to_string()))
        }
    }

    pub fn is_identity(&self) -> bool {
        let p = self.p();
        (0..p).all(|j| (0..p).all(|i| self.entries[(i, j)] == if i == j { 1.0 } else { 0.0 }))
    }

    /// Symmetric square root through the eigendecomposition, eigenvalues
    /// clamped below at `1e-12`.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let eig = self.entries.clone().symmetric_eigen();
        let roots = eig.eigenvalues.map(|l| l.max(1e-12).sqrt());
        let v = &eig.eigenvectors;
        let mut out = v * DMatrix::from_diagonal(&roots) * v.transpose();
        linalg::symmetrize(&mut out);
        out
    }

    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        linalg::extreme_eigenvalues(&self.entries)
    }

    /// Multiply by a positive scalar so the trace becomes `p`.
    pub fn normalized_to_trace_p(&self) -> Self {
        let c = self.p() as f64 / self.trace();
        Self {
            entries: &self.entries * c,
        }
    }
}

/// Entrywise max, entrywise l1 and operator (spectral) norm of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub max_norm: f64,
    pub l1_norm: f64,
    pub operator_norm: f64,
}

/// Row-major nested vectors, the layout used in JSON output.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn serialize_rows<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(
        m.row_iter()
            .map(|r| r.iter().copied().collect::<Vec<f64>>()),
    )
}

/// `S = (1/n) sum_i x_i x_i^T`.
pub fn sample_covariance(data: &Dataset) -> ScatterMatrix {
    let x = data.samples();
    let mut s = x.tr_mul(x);
    s /= data.n() as f64;
    linalg::symmetrize(&mut s);
    ScatterMatrix { entries: s }
}

/// `S_{-j} = S - (1/n) x_j x_j^T`, keeping the `1/n` normalization.
pub fn leave_one_out_covariance(data: &Dataset, j: usize) -> Result<ScatterMatrix> {
    if j >= data.n() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: data.n(),
        });
    }
    let s = sample_covariance(data);
    let xj = data.sample(j);
    let mut m = s.entries - (&xj * xj.transpose()) / data.n() as f64;
    linalg::symmetrize(&mut m);
    Ok(ScatterMatrix { entries: m })
}

pub fn matrix_norms(m: &DMatrix<f64>) -> NormReport {
    let max_norm = m.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let l1_norm = m.iter().map(|v| v.abs()).sum();
    let operator_norm = if m.is_empty() {
        0.0
    } else {
        m.clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    };
    NormReport {
        max_norm,
        l1_norm,
        operator_norm,
    }
}

/// `p^{-1} x_i^T M^{-1} x_i` for every sample, sharing one factorization.
pub fn quadratic_forms(data: &Dataset, m: &ScatterMatrix) -> Result<Vec<f64>> {
    if m.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0} matrix", data.p()),
            found: format!("{0}x{0}", m.p()),
        });
    }
    linalg::quadratic_forms(m.as_matrix(), &data.samples().transpose())
}
