//! Evaluation metrics over confusion matrices and the full fairness report.
//!
//! Source-class metrics read the diagonal of the row-normalized hard matrix
//! (worst class, max−min gap). Symmetry metrics are the max pairwise gap
//! max|C_ij − C_ji| and the symmetry loss itself. Target-class metrics
//! measure how misclassifications distribute over destination classes: T_j
//! is class j's share of the off-diagonal mass, summarized by min/max and
//! the population standard deviation.
//!
//! Two target-share normalizations exist. `total-mass` divides every column
//! sum by the whole off-diagonal mass, so ΣT_j = 1 whenever any error
//! exists; it is the default. `as-written` divides column j by the
//! off-diagonal mass of the *other* rows only, a literal reading that
//! degenerates at K = 2 (both classes get share 1); it is kept for
//! comparison.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackSpec};
use crate::confusion::{ConfusionMatrix, MatrixKind};
use crate::data::{gather, Dataset};
use crate::error::{Error, Result};
use crate::nn::Model;
use crate::symmetry::{symmetry_loss_entries, SymmetryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetNormalization {
    TotalMass,
    AsWritten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone)]
pub struct SourceClassMetrics {
    /// Diagonal of the normalized matrix (0 for uncounted classes).
    pub per_class: Vec<f64>,
    pub min: f64,
    pub gap: f64,
    /// Classes with zero evaluated samples, excluded from min/gap.
    pub excluded: Vec<usize>,
}

/// Worst-class accuracy and max−min accuracy gap from the diagonal of a
/// normalized confusion matrix. Zero-count classes are excluded from the
/// statistics and reported.
pub fn source_class_metrics(c: &ConfusionMatrix) -> Result<SourceClassMetrics> {
    if c.kind() == MatrixKind::HardCount {
        return Err(Error::kind(
            "source-class metrics need a normalized matrix; call row_normalized first",
        ));
    }
    let k = c.k();
    let mut per_class = vec![0.0; k];
    let mut counted = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..k {
        per_class[i] = c.entry(i, i);
        if c.counts()[i] > 0 {
            counted.push(c.entry(i, i));
        } else {
            excluded.push(i);
        }
    }
    if counted.is_empty() {
        return Err(Error::domain(
            "every class has zero samples; nothing to report",
        ));
    }
    let min = counted.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = counted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SourceClassMetrics {
        per_class,
        min,
        gap: max - min,
        excluded,
    })
}

/// max over unordered pairs of |C_ij − C_ji|; 0 for K < 2.
pub fn max_asymmetry_gap(c: &ConfusionMatrix) -> f64 {
    max_asymmetry_gap_entries(c.entries(), c.k())
}

pub fn max_asymmetry_gap_entries(entries: &[f64], k: usize) -> f64 {
    let mut gap: f64 = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            gap = gap.max((entries[i * k + j] - entries[j * k + i]).abs());
        }
    }
    gap
}

#[derive(Debug, Clone)]
pub struct TargetShares {
    pub shares: Vec<f64>,
    pub normalization: TargetNormalization,
    /// True when a zero denominator forced shares to 0.
    pub degenerate: bool,
}

/// T_j: the share of misclassifications directed into class j.
pub fn target_shares(c: &ConfusionMatrix, normalization: TargetNormalization) -> TargetShares {
    let k = c.k();
    let e = c.entries();
    let mut col_off = vec![0.0; k]; // Σ_{i≠j} C_ij
    let mut row_off = vec![0.0; k]; // Σ_{k≠i} C_ik
    for i in 0..k {
        for j in 0..k {
            if i != j {
                col_off[j] += e[i * k + j];
                row_off[i] += e[i * k + j];
            }
        }
    }
    let total: f64 = row_off.iter().sum();
    let mut degenerate = false;
    let shares = match normalization {
        TargetNormalization::TotalMass => col_off
            .iter()
            .map(|&num| {
                if total > 0.0 {
                    num / total
                } else {
                    degenerate = true;
                    0.0
                }
            })
            .collect(),
        TargetNormalization::AsWritten => (0..k)
            .map(|j| {
                let denom = total - row_off[j];
                if denom > 0.0 {
                    col_off[j] / denom
                } else {
                    degenerate = true;
                    0.0
                }
            })
            .collect(),
    };
    TargetShares {
        shares,
        normalization,
        degenerate,
    }
}

/// (min, max, population std) over all K target shares.
pub fn target_fairness(shares: &[f64]) -> (f64, f64, f64) {
    let k = shares.len() as f64;
    let min = shares.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = shares.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = shares.iter().sum::<f64>() / k;
    let var = shares.iter().map(|&t| (t - mean).powi(2)).sum::<f64>() / k;
    (min, max, var.sqrt())
}

// ---------------------------------------------------------------------------
// Full evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOptions {
    pub symmetry: SymmetryConfig,
    pub target_normalization: TargetNormalization,
    /// Image geometry for rectangle-occlusion attacks.
    pub image_hw: Option<(usize, usize)>,
    /// Attack/evaluation chunk size (memory bound, no effect on results).
    pub chunk_size: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            symmetry: SymmetryConfig::default(),
            target_normalization: TargetNormalization::TotalMass,
            image_hw: None,
            chunk_size: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FairnessReport {
    pub k: usize,
    pub benign_accuracy: f64,
    pub robust_accuracy: f64,
    pub per_class_robust: Vec<f64>,
    pub min_class_accuracy: f64,
    pub accuracy_gap: f64,
    pub max_asymmetry_gap: f64,
    pub symmetry_loss_value: f64,
    pub target_shares: Vec<f64>,
    pub tgt_min: f64,
    pub tgt_max: f64,
    pub tgt_std: f64,
    pub target_normalization: TargetNormalization,
    pub notes: Vec<String>,
    /// Row-normalized hard confusion on adversarial predictions.
    pub confusion_adversarial: ConfusionMatrix,
    /// Raw counts behind `confusion_adversarial`.
    pub confusion_adversarial_counts: ConfusionMatrix,
    /// Row-normalized hard confusion on clean predictions.
    pub confusion_benign: ConfusionMatrix,
}

impl FairnessReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        FairnessReport::from_json_str(&fs::read_to_string(path)?)
    }
}

/// Metrics recomputed from a normalized adversarial confusion matrix. The
/// shared tail of [`evaluate`], and the recompute path for exported
/// confusion JSON.
pub fn report_from_confusions(
    adv_counts: &ConfusionMatrix,
    benign_norm: &ConfusionMatrix,
    benign_accuracy: f64,
    robust_accuracy: f64,
    opts: &EvalOptions,
) -> Result<FairnessReport> {
    let adv_norm = adv_counts.row_normalized()?;
    let k = adv_norm.k();
    let mut notes = Vec::new();
    let source = source_class_metrics(&adv_norm)?;
    if !source.excluded.is_empty() {
        notes.push(format!(
            "classes {:?} have zero evaluated samples and are excluded from min/gap",
            source.excluded
        ));
    }
    let shares = target_shares(&adv_norm, opts.target_normalization);
    if shares.degenerate {
        notes.push("no misclassification mass; target shares are all zero".into());
    }
    let (tgt_min, tgt_max, tgt_std) = target_fairness(&shares.shares);
    let epsilon = opts.symmetry.epsilon_for(k);
    Ok(FairnessReport {
        k,
        benign_accuracy,
        robust_accuracy,
        per_class_robust: source.per_class,
        min_class_accuracy: source.min,
        accuracy_gap: source.gap,
        max_asymmetry_gap: max_asymmetry_gap(&adv_norm),
        symmetry_loss_value: symmetry_loss_entries(adv_norm.entries(), k, epsilon)?,
        target_shares: shares.shares,
        tgt_min,
        tgt_max,
        tgt_std,
        target_normalization: opts.target_normalization,
        notes,
        confusion_adversarial: adv_norm,
        confusion_adversarial_counts: adv_counts.clone(),
        confusion_benign: benign_norm.clone(),
    })
}

/// Evaluate a model on one dataset split: benign accuracy on the clean
/// inputs, attack, hard confusion on the adversarial predictions, and every
/// report field. Deterministic.
pub fn evaluate(
    model: &Model,
    ds: &Dataset,
    split: SplitKind,
    attack_spec: &AttackSpec,
    opts: &EvalOptions,
) -> Result<FairnessReport> {
    let splits = ds
        .splits
        .as_ref()
        .ok_or_else(|| Error::state("dataset has no splits; call data::split first"))?;
    let indices = match split {
        SplitKind::Train => &splits.train,
        SplitKind::Val => &splits.val,
        SplitKind::Test => &splits.test,
    };
    if indices.is_empty() {
        return Err(Error::domain(format!("{split:?} split is empty")));
    }
    let k = ds.k;
    let mut benign_counts = ConfusionMatrix::empty(k, MatrixKind::HardCount);
    let mut adv_counts = ConfusionMatrix::empty(k, MatrixKind::HardCount);
    let mut benign_correct = 0usize;
    let mut adv_correct = 0usize;
    for chunk in indices.chunks(opts.chunk_size.max(1)) {
        let batch = gather(ds, chunk)?;
        let clean_logits = model.logits(&batch.inputs)?;
        let chunk_benign = ConfusionMatrix::hard_from_scores(&clean_logits, &batch.labels, false)?;
        benign_counts = ConfusionMatrix::merge(&benign_counts, &chunk_benign)?;
        benign_correct += correct_count(&clean_logits, &batch.labels);

        let adv_inputs = attack::run_attack(model, &batch, attack_spec, opts.image_hw)?;
        let adv_logits = model.logits(&adv_inputs)?;
        let chunk_adv = ConfusionMatrix::hard_from_scores(&adv_logits, &batch.labels, false)?;
        adv_counts = ConfusionMatrix::merge(&adv_counts, &chunk_adv)?;
        adv_correct += correct_count(&adv_logits, &batch.labels);
    }
    let n = indices.len() as f64;
    report_from_confusions(
        &adv_counts,
        &benign_counts.row_normalized()?,
        benign_correct as f64 / n,
        adv_correct as f64 / n,
        opts,
    )
}

fn correct_count(logits: &crate::tensor::Tensor, labels: &[usize]) -> usize {
    let (rows, cols) = logits.dims2().expect("logits are 2-D");
    (0..rows)
        .filter(|&r| {
            crate::nn::argmax_lowest(&logits.values()[r * cols..(r + 1) * cols]) == labels[r]
        })
        .count()
}

// ---------------------------------------------------------------------------
// Plot-ready exports
// ---------------------------------------------------------------------------

/// K×K grid of tab-separated values.
pub fn write_matrix_tsv(path: &Path, k: usize, entries: &[f64]) -> Result<()> {
    let mut out = String::new();
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| format!("{}", entries[i * k + j])).collect();
        let _ = writeln!(out, "{}", row.join("\t"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Upper-triangle |C_ij − C_ji| grid (diagonal and lower triangle zero).
pub fn asymmetry_grid(c: &ConfusionMatrix) -> Vec<f64> {
    let k = c.k();
    let mut grid = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            grid[i * k + j] = (c.entry(i, j) - c.entry(j, i)).abs();
        }
    }
    grid
}
