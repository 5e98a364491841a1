//! `symtrain study`: train and evaluate one model per (arm, seed) pair on
//! the same dataset, then aggregate per-metric means and standard
//! deviations across seeds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use symtrain_core::metrics::{evaluate, FairnessReport, SplitKind};
use symtrain_core::trainer::train;
use symtrain_core::{Error, Result};

use crate::config::RunConfig;
use crate::io_util::{ensure_dir, write_atomic};
use crate::manifest::RunManifest;

use super::{metrics_csv_row, prepare_model, say, METRICS_CSV_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

fn stats(values: &[f64]) -> MetricStats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    MetricStats {
        mean,
        std: var.sqrt(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub seeds: Vec<u64>,
    pub benign_accuracy: MetricStats,
    pub robust_accuracy: MetricStats,
    pub min_class_accuracy: MetricStats,
    pub accuracy_gap: MetricStats,
    pub max_asymmetry_gap: MetricStats,
    pub symmetry_loss: MetricStats,
    pub tgt_min: MetricStats,
    pub tgt_max: MetricStats,
    pub tgt_std: MetricStats,
}

impl ArmSummary {
    fn from_reports(arm: &str, seeds: &[u64], reports: &[FairnessReport]) -> Self {
        let pull = |f: fn(&FairnessReport) -> f64| -> MetricStats {
            stats(&reports.iter().map(f).collect::<Vec<_>>())
        };
        ArmSummary {
            arm: arm.to_string(),
            seeds: seeds.to_vec(),
            benign_accuracy: pull(|r| r.benign_accuracy),
            robust_accuracy: pull(|r| r.robust_accuracy),
            min_class_accuracy: pull(|r| r.min_class_accuracy),
            accuracy_gap: pull(|r| r.accuracy_gap),
            max_asymmetry_gap: pull(|r| r.max_asymmetry_gap),
            symmetry_loss: pull(|r| r.symmetry_loss_value),
            tgt_min: pull(|r| r.tgt_min),
            tgt_max: pull(|r| r.tgt_max),
            tgt_std: pull(|r| r.tgt_std),
        }
    }
}

pub struct StudyOutput {
    pub summaries: Vec<ArmSummary>,
    /// (arm, seed) → report, in run order.
    pub reports: Vec<(String, u64, FairnessReport)>,
    pub summary_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub fn cmd_study(
    cfg: &RunConfig,
    seeds_override: &[u64],
    out_dir: &Path,
    quiet: bool,
) -> Result<StudyOutput> {
    ensure_dir(out_dir)?;
    let seeds: Vec<u64> = if seeds_override.is_empty() {
        cfg.study.seeds.clone()
    } else {
        seeds_override.to_vec()
    };
    if seeds.len() < 2 {
        return Err(Error::config("a study needs at least 2 seeds"));
    }
    let mut manifest = RunManifest::begin("study", cfg, seeds.clone())?;
    let arms = cfg.study_arms()?;
    // One dataset for every run: arms and seeds must be paired.
    let (ds, _warnings) = cfg.build_dataset()?;
    let eval_attack = cfg.build_eval_attack()?;
    let eval_opts = cfg.build_eval_options()?;

    // With pretraining enabled, every arm fine-tunes the same per-seed base
    // model; bases are built once and reused across arms.
    let mut bases: Vec<Option<symtrain_core::nn::Model>> = vec![None; seeds.len()];
    if cfg.study.pretrain_epochs > 0 {
        for (i, &seed) in seeds.iter().enumerate() {
            let mut base_cfg = cfg.build_train_config()?;
            base_cfg.regularizer = symtrain_core::trainer::Regularizer::None;
            base_cfg.seed = seed;
            base_cfg.epochs = cfg.study.pretrain_epochs;
            let mut model = prepare_model(cfg, &ds, seed)?;
            train(&mut model, &ds, &base_cfg)?;
            say(quiet, &format!("seed {seed}: pretrained base model"));
            bases[i] = Some(model);
        }
    }

    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    let mut per_seed_csv = format!("arm,seed,{METRICS_CSV_HEADER}\n");
    for (arm_name, regularizer) in &arms {
        let mut arm_reports = Vec::new();
        for (i, &seed) in seeds.iter().enumerate() {
            let mut train_cfg = cfg.build_train_config()?;
            train_cfg.regularizer = *regularizer;
            train_cfg.seed = seed;
            let mut model = match &bases[i] {
                Some(base) => base.clone(),
                None => prepare_model(cfg, &ds, seed)?,
            };
            train(&mut model, &ds, &train_cfg)?;
            let report = evaluate(&model, &ds, SplitKind::Test, &eval_attack, &eval_opts)?;
            say(
                quiet,
                &format!(
                    "arm {arm_name} seed {seed}: robust {:.3} gap {:.3} asym {:.3} symloss {:.4}",
                    report.robust_accuracy,
                    report.accuracy_gap,
                    report.max_asymmetry_gap,
                    report.symmetry_loss_value
                ),
            );
            let seed_dir = out_dir.join(format!("{arm_name}/seed_{seed}"));
            ensure_dir(&seed_dir)?;
            let report_path = seed_dir.join("report.json");
            write_atomic(&report_path, &report.to_json_string()?)?;
            manifest.record(&report_path);
            let _ = writeln!(
                per_seed_csv,
                "{arm_name},{seed},{}",
                metrics_csv_row(&report)
            );
            arm_reports.push((seed, report));
        }
        let reports_only: Vec<FairnessReport> =
            arm_reports.iter().map(|(_, r)| r.clone()).collect();
        summaries.push(ArmSummary::from_reports(arm_name, &seeds, &reports_only));
        for (seed, report) in arm_reports {
            reports.push((arm_name.clone(), seed, report));
        }
    }

    let per_seed_path = out_dir.join("seeds.csv");
    write_atomic(&per_seed_path, &per_seed_csv)?;
    manifest.record(&per_seed_path);

    let summary_path = out_dir.join("summary.json");
    write_atomic(&summary_path, &serde_json::to_string_pretty(&summaries)?)?;
    manifest.record(&summary_path);

    // Head-to-head comparison table: one row per arm and metric.
    let mut comparison = String::from("arm,metric,mean,std\n");
    for s in &summaries {
        for (metric, v) in [
            ("benign_accuracy", s.benign_accuracy),
            ("robust_accuracy", s.robust_accuracy),
            ("min_class_accuracy", s.min_class_accuracy),
            ("accuracy_gap", s.accuracy_gap),
            ("max_asymmetry_gap", s.max_asymmetry_gap),
            ("symmetry_loss", s.symmetry_loss),
            ("tgt_min", s.tgt_min),
            ("tgt_max", s.tgt_max),
            ("tgt_std", s.tgt_std),
        ] {
            let _ = writeln!(comparison, "{},{metric},{},{}", s.arm, v.mean, v.std);
        }
    }
    let comparison_path = out_dir.join("comparison.csv");
    write_atomic(&comparison_path, &comparison)?;
    manifest.record(&comparison_path);

    let manifest_path = out_dir.join("manifest.json");
    manifest.finish(&manifest_path)?;
    Ok(StudyOutput {
        summaries,
        reports,
        summary_path,
        manifest_path,
    })
}
