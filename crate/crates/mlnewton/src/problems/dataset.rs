//! Sparse row datasets and the LIBSVM text format.

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

/// Rows of sparse feature vectors with one real label per row.
///
/// Feature indices are 0-based, strictly ascending within a row, and smaller
/// than `n_features`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
    n_features: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, n_features: usize) -> Self {
        assert_eq!(rows.len(), labels.len(), "one label per row required");
        for row in &rows {
            super::check_indices(
                &row.iter().map(|&(i, _)| i).collect::<Vec<_>>(),
                n_features,
            );
        }
        Dataset {
            rows,
            labels,
            n_features,
        }
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Sparse dot product of row `i` with a dense vector.
    pub fn row_dot(&self, i: usize, x: &nalgebra::DVector<f64>) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }

    /// Dense synthetic classification-style data for benchmarks.
    ///
    /// Feature columns carry decaying scales so the induced Gram matrix is
    /// ill-conditioned enough to separate first-order from Newton-type
    /// methods. Labels are 0/1 from a random linear teacher with a little
    /// label noise, which keeps the least-squares residuals reducible but
    /// nonzero.
    pub fn synthetic(n_features: usize, rows: usize, rng: &mut impl Rng) -> Dataset {
        // Feature magnitude. Keeping entries well above unit scale pushes a
        // random x0 into the saturated region of the link functions, so
        // second-order methods have to work through a damped phase before
        // their fast local regime; tiny values would make every benchmark
        // instance nearly quadratic.
        const MAGNITUDE: f64 = 4.0;
        assert!(n_features > 0 && rows > 0);
        let teacher: Vec<f64> = (0..n_features).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scales: Vec<f64> = (0..n_features)
            .map(|j| MAGNITUDE * (1.0 + j as f64).powf(-0.5))
            .collect();
        let mut data = Vec::with_capacity(rows);
        let mut labels = Vec::with_capacity(rows);
        for _ in 0..rows {
            let row: Vec<(usize, f64)> = (0..n_features)
                .map(|j| (j, rng.gen_range(-1.0..1.0) * scales[j]))
                .collect();
            let z: f64 = row.iter().map(|&(j, v)| v * teacher[j]).sum();
            let noise = rng.gen_range(-0.2..0.2);
            labels.push(if z + noise > 0.0 { 1.0 } else { 0.0 });
            data.push(row);
        }
        Dataset::new(data, labels, n_features)
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed token '{token}'")]
    MalformedToken { line: usize, token: String },
    #[error("line {line}: non-numeric value '{token}'")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: feature indices must be ascending and 1-based, got {index}")]
    BadIndex { line: usize, index: usize },
    #[error("line {line}: feature index {index} exceeds declared dimension {dim}")]
    IndexOutOfRange {
        line: usize,
        index: usize,
        dim: usize,
    },
}

/// Parses LIBSVM-format text: one `label idx:val idx:val ...` record per
/// line, indices 1-based and strictly ascending. Stored indices are 0-based.
///
/// The feature dimension is the largest index seen, unless `n_override`
/// declares a (possibly larger) dimension up front. Blank lines are skipped.
pub fn parse_libsvm(reader: impl BufRead, n_override: Option<usize>) -> Result<Dataset, ParseError> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut max_index = 0usize; // 1-based
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let label_tok = match tokens.next() {
            None => continue, // blank line
            Some(t) => t,
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| ParseError::NonNumeric {
                line: lineno,
                token: label_tok.to_string(),
            })?;
        let mut row: Vec<(usize, f64)> = Vec::new();
        let mut prev_index = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| ParseError::MalformedToken {
                line: lineno,
                token: tok.to_string(),
            })?;
            let index: usize = idx_s.parse().map_err(|_| ParseError::MalformedToken {
                line: lineno,
                token: tok.to_string(),
            })?;
            let value: f64 = val_s.parse().map_err(|_| ParseError::NonNumeric {
                line: lineno,
                token: val_s.to_string(),
            })?;
            if !value.is_finite() {
                return Err(ParseError::NonNumeric {
                    line: lineno,
                    token: val_s.to_string(),
                });
            }
            if index == 0 || index <= prev_index {
                return Err(ParseError::BadIndex {
                    line: lineno,
                    index,
                });
            }
            if let Some(n) = n_override {
                if index > n {
                    return Err(ParseError::IndexOutOfRange {
                        line: lineno,
                        index,
                        dim: n,
                    });
                }
            }
            prev_index = index;
            max_index = max_index.max(index);
            row.push((index - 1, value));
        }
        rows.push(row);
        labels.push(label);
    }
    let n_features = n_override.unwrap_or(max_index);
    Ok(Dataset::new(rows, labels, n_features))
}

pub fn parse_libsvm_file(path: impl AsRef<Path>, n_override: Option<usize>) -> Result<Dataset, ParseError> {
    parse_libsvm(BufReader::new(File::open(path)?), n_override)
}
