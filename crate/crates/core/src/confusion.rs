//! Soft (differentiable) and hard (argmax-count) confusion matrices.
//!
//! Row i of a soft matrix is the mean softmax probability vector over the
//! samples whose true class is i; rows of classes absent from the data stay
//! zero (no division by zero). Hard matrices count argmax predictions per
//! (true, predicted) cell, optionally row-normalized by max(n_i, 1). Argmax
//! ties break to the lowest class index so hard matrices are reproducible.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::argmax_lowest;
use crate::tensor::Tensor;

const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixKind {
    Soft,
    HardCount,
    HardNormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    kind: MatrixKind,
    /// Per-class sample counts n_i.
    counts: Vec<u64>,
    /// Row-major K×K.
    entries: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn from_parts(
        k: usize,
        kind: MatrixKind,
        counts: Vec<u64>,
        entries: Vec<f64>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("confusion matrix needs at least one class"));
        }
        if counts.len() != k {
            return Err(Error::shape(format!(
                "counts length {} does not match k = {k}",
                counts.len()
            )));
        }
        if entries.len() != k * k {
            return Err(Error::shape(format!(
                "entries length {} does not match k² = {}",
                entries.len(),
                k * k
            )));
        }
        if entries.iter().any(|&e| !(e >= 0.0)) {
            return Err(Error::domain("confusion entries must be non-negative"));
        }
        let m = ConfusionMatrix {
            k,
            kind,
            counts,
            entries,
        };
        m.check_row_invariants()?;
        Ok(m)
    }

    fn check_row_invariants(&self) -> Result<()> {
        for i in 0..self.k {
            let row = self.row(i);
            let sum: f64 = row.iter().sum();
            match self.kind {
                MatrixKind::Soft | MatrixKind::HardNormalized => {
                    if self.counts[i] > 0 {
                        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                            return Err(Error::domain(format!(
                                "row {i} sums to {sum}, expected 1 within {ROW_SUM_TOLERANCE}"
                            )));
                        }
                    } else if row.iter().any(|&e| e != 0.0) {
                        return Err(Error::domain(format!(
                            "row {i} has zero count but non-zero entries"
                        )));
                    }
                }
                MatrixKind::HardCount => {
                    if row.iter().any(|&e| e.fract() != 0.0) {
                        return Err(Error::domain(format!("row {i} has non-integer counts")));
                    }
                    if sum as u64 != self.counts[i] {
                        return Err(Error::domain(format!(
                            "row {i} sums to {sum} but counts[{i}] = {}",
                            self.counts[i]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn empty(k: usize, kind: MatrixKind) -> Self {
        ConfusionMatrix {
            k,
            kind,
            counts: vec![0; k],
            entries: vec![0.0; k * k],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.k..(i + 1) * self.k]
    }

    /// Mean probability vector per true class, built from [B×K] softmax rows.
    /// Differentiable in spirit: the same construction exists as a graph op;
    /// this is the plain-value twin used for evaluation and reporting.
    pub fn soft_from_probabilities(probs: &Tensor, labels: &[usize]) -> Result<Self> {
        let (rows, k) = probs.dims2()?;
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "{} labels for {} probability rows",
                labels.len(),
                rows
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::domain(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let v = probs.values();
        for r in 0..rows {
            let sum: f64 = v[r * k..(r + 1) * k].iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::domain(format!(
                    "probability row {r} sums to {sum}, not 1"
                )));
            }
        }
        let mut counts = vec![0u64; k];
        let mut entries = vec![0.0; k * k];
        for (b, &y) in labels.iter().enumerate() {
            counts[y] += 1;
            for j in 0..k {
                entries[y * k + j] += v[b * k + j];
            }
        }
        for (i, &n) in counts.iter().enumerate() {
            let denom = n.max(1) as f64;
            for j in 0..k {
                entries[i * k + j] /= denom;
            }
        }
        ConfusionMatrix::from_parts(k, MatrixKind::Soft, counts, entries)
    }

    /// Argmax-count matrix from logits or probabilities (argmax is the same
    /// either way). Ties break to the lowest class index.
    pub fn hard_from_scores(scores: &Tensor, labels: &[usize], normalize: bool) -> Result<Self> {
        let (rows, k) = scores.dims2()?;
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "{} labels for {} score rows",
                labels.len(),
                rows
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::domain(format!(
                "label {bad} out of range for {k} classes"
            )));
        }
        let v = scores.values();
        let mut counts = vec![0u64; k];
        let mut entries = vec![0.0; k * k];
        for (b, &y) in labels.iter().enumerate() {
            let pred = argmax_lowest(&v[b * k..(b + 1) * k]);
            counts[y] += 1;
            entries[y * k + pred] += 1.0;
        }
        if normalize {
            for (i, &n) in counts.iter().enumerate() {
                let denom = n.max(1) as f64;
                for j in 0..k {
                    entries[i * k + j] /= denom;
                }
            }
            ConfusionMatrix::from_parts(k, MatrixKind::HardNormalized, counts, entries)
        } else {
            ConfusionMatrix::from_parts(k, MatrixKind::HardCount, counts, entries)
        }
    }

    /// Row-normalize a count matrix by max(n_i, 1).
    pub fn row_normalized(&self) -> Result<Self> {
        match self.kind {
            MatrixKind::HardCount => {
                let mut entries = self.entries.clone();
                for (i, &n) in self.counts.iter().enumerate() {
                    let denom = n.max(1) as f64;
                    for j in 0..self.k {
                        entries[i * self.k + j] /= denom;
                    }
                }
                ConfusionMatrix::from_parts(
                    self.k,
                    MatrixKind::HardNormalized,
                    self.counts.clone(),
                    entries,
                )
            }
            MatrixKind::HardNormalized | MatrixKind::Soft => Ok(self.clone()),
        }
    }

    /// Combine two matrices of the same kind as if their underlying data had
    /// been one batch. Counts add; normalized rows re-weight by counts.
    pub fn merge(a: &ConfusionMatrix, b: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        if a.k != b.k {
            return Err(Error::shape(format!(
                "cannot merge K={} with K={}",
                a.k, b.k
            )));
        }
        if a.kind != b.kind {
            return Err(Error::kind(format!(
                "cannot merge {:?} with {:?}",
                a.kind, b.kind
            )));
        }
        let k = a.k;
        let counts: Vec<u64> = a
            .counts
            .iter()
            .zip(&b.counts)
            .map(|(&x, &y)| x + y)
            .collect();
        let mut entries = vec![0.0; k * k];
        match a.kind {
            MatrixKind::HardCount => {
                for idx in 0..k * k {
                    entries[idx] = a.entries[idx] + b.entries[idx];
                }
            }
            MatrixKind::Soft | MatrixKind::HardNormalized => {
                for i in 0..k {
                    let total = counts[i];
                    if total == 0 {
                        continue;
                    }
                    let (na, nb) = (a.counts[i] as f64, b.counts[i] as f64);
                    for j in 0..k {
                        entries[i * k + j] =
                            (na * a.entries[i * k + j] + nb * b.entries[i * k + j]) / total as f64;
                    }
                }
            }
        }
        ConfusionMatrix::from_parts(k, a.kind, counts, entries)
    }

    pub fn transposed_entries(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.k * self.k];
        for i in 0..self.k {
            for j in 0..self.k {
                t[j * self.k + i] = self.entries[i * self.k + j];
            }
        }
        t
    }

    // -- JSON io --------------------------------------------------------------

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let raw: ConfusionMatrix = serde_json::from_str(s)?;
        ConfusionMatrix::from_parts(raw.k, raw.kind, raw.counts, raw.entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        ConfusionMatrix::from_json_str(&fs::read_to_string(path)?)
    }
}
