//! `symtrain evaluate`: full fairness report for a checkpoint, plus
//! heatmap grids and per-partition subgroup analyses.

use std::path::{Path, PathBuf};

use serde::Serialize;

use symtrain_core::metrics::{asymmetry_grid, evaluate, FairnessReport, SplitKind};
use symtrain_core::nn::Model;
use symtrain_core::subgroup::{
    subgroup_accuracy_gaps, subgroup_asymmetry, subgroup_matrix, Partition, SubgroupGapReport,
};
use symtrain_core::Result;

use crate::config::RunConfig;
use crate::io_util::{ensure_dir, write_atomic};
use crate::manifest::RunManifest;

use super::{file_name_of, metrics_csv_row, say, METRICS_CSV_HEADER};

pub struct EvalOutput {
    pub report: FairnessReport,
    pub report_path: PathBuf,
    pub subgroup_paths: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

#[derive(Serialize)]
struct SubgroupAnalysis {
    partition: Partition,
    /// m×m subgroup-rate matrix, row-major.
    rates: Vec<f64>,
    subgroup_asymmetry: f64,
    accuracy_gaps: Option<SubgroupGapReport>,
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    checkpoint: &Path,
    partitions: &[PathBuf],
    out_dir: &Path,
    quiet: bool,
) -> Result<EvalOutput> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::begin("evaluate", cfg, vec![cfg.train.seed])?;
    let (ds, _warnings) = cfg.build_dataset()?;
    let model = Model::load(checkpoint)?;
    let attack = cfg.build_eval_attack()?;
    let opts = cfg.build_eval_options()?;
    let report = evaluate(&model, &ds, SplitKind::Test, &attack, &opts)?;
    say(
        quiet,
        &format!(
            "benign {:.3} robust {:.3} min {:.3} gap {:.3} asym {:.3} symloss {:.4}",
            report.benign_accuracy,
            report.robust_accuracy,
            report.min_class_accuracy,
            report.accuracy_gap,
            report.max_asymmetry_gap,
            report.symmetry_loss_value
        ),
    );

    let report_path = out_dir.join("report.json");
    write_atomic(&report_path, &report.to_json_string()?)?;
    manifest.record(&report_path);

    let counts_path = out_dir.join("confusion_adversarial_counts.json");
    write_atomic(
        &counts_path,
        &report.confusion_adversarial_counts.to_json_string()?,
    )?;
    manifest.record(&counts_path);

    let norm_path = out_dir.join("confusion_adversarial.json");
    write_atomic(&norm_path, &report.confusion_adversarial.to_json_string()?)?;
    manifest.record(&norm_path);

    let confusion_tsv = out_dir.join("confusion.tsv");
    symtrain_core::metrics::write_matrix_tsv(
        &confusion_tsv,
        report.k,
        report.confusion_adversarial.entries(),
    )?;
    manifest.record(&confusion_tsv);

    let asym_tsv = out_dir.join("asymmetry.tsv");
    symtrain_core::metrics::write_matrix_tsv(
        &asym_tsv,
        report.k,
        &asymmetry_grid(&report.confusion_adversarial),
    )?;
    manifest.record(&asym_tsv);

    let metrics_path = out_dir.join("metrics.csv");
    write_atomic(
        &metrics_path,
        &format!("{METRICS_CSV_HEADER}\n{}\n", metrics_csv_row(&report)),
    )?;
    manifest.record(&metrics_path);

    // Per-partition subgroup analyses: rates, directional asymmetry, and
    // two-group accuracy gaps where applicable.
    let mut subgroup_paths = Vec::new();
    let mut all_partitions: Vec<(String, Partition)> = Vec::new();
    for path in partitions {
        let name = file_name_of(path).replace(".json", "");
        all_partitions.push((name, Partition::load(path)?));
    }
    if let Some(attrs) = &ds.attributes {
        let names: Vec<String> = attrs
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        for attr in names {
            let groups = symtrain_core::data::partition_classes_by_attribute(attrs, &attr)?;
            all_partitions.push((attr.clone(), Partition::named(groups)?));
        }
    }
    for (name, partition) in &all_partitions {
        let rates = subgroup_matrix(&report.confusion_adversarial, partition)?;
        let analysis = SubgroupAnalysis {
            partition: partition.clone(),
            subgroup_asymmetry: subgroup_asymmetry(&rates, partition.len()),
            rates,
            accuracy_gaps: if partition.len() == 2 {
                Some(subgroup_accuracy_gaps(&report, partition)?)
            } else {
                None
            },
        };
        let path = out_dir.join(format!("subgroup_{name}.json"));
        write_atomic(&path, &serde_json::to_string_pretty(&analysis)?)?;
        manifest.record(&path);
        subgroup_paths.push(path);
    }

    let manifest_path = out_dir.join("manifest.json");
    manifest.finish(&manifest_path)?;
    Ok(EvalOutput {
        report,
        report_path,
        subgroup_paths,
        manifest_path,
    })
}
