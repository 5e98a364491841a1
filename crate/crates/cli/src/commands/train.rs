//! `symtrain train`: train one model and write the checkpoint, the epoch
//! log, and the manifest.

use std::path::{Path, PathBuf};

use symtrain_core::trainer::{train, EpochRecord};
use symtrain_core::Result;

use crate::config::RunConfig;
use crate::io_util::{ensure_dir, write_atomic};
use crate::manifest::RunManifest;

use super::{epochs_csv, prepare_model, say};

pub struct TrainOutput {
    pub checkpoint_path: PathBuf,
    pub log_path: PathBuf,
    pub manifest_path: PathBuf,
    pub records: Vec<EpochRecord>,
}

pub fn cmd_train(cfg: &RunConfig, out_dir: &Path, quiet: bool) -> Result<TrainOutput> {
    ensure_dir(out_dir)?;
    let mut manifest = RunManifest::begin("train", cfg, vec![cfg.train.seed])?;
    let (ds, warnings) = cfg.build_dataset()?;
    for w in &warnings {
        say(quiet, &format!("warning: {w}"));
    }
    let train_cfg = cfg.build_train_config()?;
    let mut model = prepare_model(cfg, &ds, cfg.train.seed)?;
    let records = train(&mut model, &ds, &train_cfg)?;
    for r in &records {
        say(
            quiet,
            &format!(
                "epoch {}: total {:.4} (clean {:.4}, adv {:.4}, reg {:.4}) val benign {:.3} robust {:.3} [{:.2}s]",
                r.epoch, r.total_loss, r.clean_loss, r.adv_loss, r.sym_loss,
                r.benign_accuracy, r.robust_accuracy, r.seconds
            ),
        );
    }

    let checkpoint_path = out_dir.join("checkpoint.json");
    write_atomic(&checkpoint_path, &model.to_checkpoint_string()?)?;
    manifest.record(&checkpoint_path);

    let log_path = out_dir.join("epochs.csv");
    write_atomic(&log_path, &epochs_csv(&records))?;
    manifest.record(&log_path);

    let manifest_path = out_dir.join("manifest.json");
    manifest.finish(&manifest_path)?;
    say(quiet, &format!("wrote {}", checkpoint_path.display()));
    Ok(TrainOutput {
        checkpoint_path,
        log_path,
        manifest_path,
        records,
    })
}
