//! `symtrain bench`: wall-clock per epoch for the none/symmetry/spectral
//! arms on identical data and seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use symtrain_core::trainer::{train, Regularizer};
use symtrain_core::Result;

use crate::config::RunConfig;
use crate::io_util::{ensure_dir, write_atomic};
use crate::manifest::RunManifest;

use super::{prepare_model, say};

pub struct BenchRow {
    pub arm: String,
    pub epoch: usize,
    pub seconds: f64,
}

#[derive(Serialize)]
pub struct ArmTiming {
    pub arm: String,
    pub median_epoch_seconds: f64,
    /// Relative to the `none` arm's median.
    pub ratio_vs_none: f64,
}

pub struct BenchOutput {
    pub rows: Vec<BenchRow>,
    pub timings: Vec<ArmTiming>,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

pub fn cmd_bench(cfg: &RunConfig, out_dir: &Path, quiet: bool) -> Result<BenchOutput> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::begin("bench", cfg, vec![cfg.train.seed])?;
    let (ds, _warnings) = cfg.build_dataset()?;
    let arms = [
        ("none", Regularizer::None),
        ("symmetry", Regularizer::Symmetry),
        ("spectral", Regularizer::Spectral),
    ];
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for (name, regularizer) in arms {
        let mut train_cfg = cfg.build_train_config()?;
        train_cfg.regularizer = regularizer;
        if cfg.bench.epochs > 0 {
            train_cfg.epochs = cfg.bench.epochs;
        }
        let mut model = prepare_model(cfg, &ds, cfg.train.seed)?;
        let records = train(&mut model, &ds, &train_cfg)?;
        // The first epoch pays one-off warmup costs; it is recorded in the
        // CSV but excluded from the medians when enough epochs exist.
        let timed: Vec<f64> = if records.len() >= 3 {
            records[1..].iter().map(|r| r.seconds).collect()
        } else {
            records.iter().map(|r| r.seconds).collect()
        };
        medians.push((name.to_string(), median(&timed)));
        for r in &records {
            rows.push(BenchRow {
                arm: name.to_string(),
                epoch: r.epoch,
                seconds: r.seconds,
            });
        }
        say(
            quiet,
            &format!("arm {name}: median epoch {:.4}s", medians.last().unwrap().1),
        );
    }

    let none_median = medians
        .iter()
        .find(|(n, _)| n == "none")
        .map(|(_, m)| *m)
        .unwrap_or(f64::NAN);
    let timings: Vec<ArmTiming> = medians
        .iter()
        .map(|(arm, m)| ArmTiming {
            arm: arm.clone(),
            median_epoch_seconds: *m,
            ratio_vs_none: m / none_median,
        })
        .collect();

    let mut csv = String::from("arm,epoch,seconds\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{}", r.arm, r.epoch, r.seconds);
    }
    let csv_path = out_dir.join("bench.csv");
    write_atomic(&csv_path, &csv)?;
    manifest.record(&csv_path);

    let summary_path = out_dir.join("bench_summary.json");
    write_atomic(&summary_path, &serde_json::to_string_pretty(&timings)?)?;
    manifest.record(&summary_path);

    let manifest_path = out_dir.join("manifest.json");
    manifest.finish(&manifest_path)?;
    Ok(BenchOutput {
        rows,
        timings,
        csv_path,
        summary_path,
    })
}
