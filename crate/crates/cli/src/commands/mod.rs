//! Command implementations. Each returns its primary outputs in-process so
//! integration tests can assert on them without re-parsing files.

mod bench;
mod evaluate;
mod gendata;
mod study;
mod train;
mod verify;

pub use bench::{cmd_bench, BenchOutput, BenchRow};
pub use evaluate::{cmd_evaluate, EvalOutput};
pub use gendata::{cmd_gen_data, GenDataOutput};
pub use study::{cmd_study, ArmSummary, MetricStats, StudyOutput};
pub use train::{cmd_train, TrainOutput};
pub use verify::{cmd_verify_theorem, VerifyOutput};

use std::fmt::Write as _;
use std::path::Path;

use symtrain_core::data::Dataset;
use symtrain_core::metrics::FairnessReport;
use symtrain_core::nn::Model;
use symtrain_core::rng::derive_seed;
use symtrain_core::trainer::EpochRecord;
use symtrain_core::{Error, Result};

use crate::config::RunConfig;

/// Fresh model (seeded from the training seed) or a fine-tune checkpoint.
pub fn prepare_model(cfg: &RunConfig, ds: &Dataset, seed: u64) -> Result<Model> {
    match cfg.train.mode.as_str() {
        "fine-tune" => {
            let path = cfg
                .train
                .checkpoint
                .as_ref()
                .ok_or_else(|| Error::config("fine-tune mode needs train.checkpoint"))?;
            let model = Model::load(path)?;
            if model.num_classes() != ds.k || model.input_dim() != cfg.data.dims {
                return Err(Error::config(format!(
                    "checkpoint is {}→{} but the data is {}→{}",
                    model.input_dim(),
                    model.num_classes(),
                    cfg.data.dims,
                    ds.k
                )));
            }
            Ok(model)
        }
        _ => Model::init(
            cfg.data.dims,
            &cfg.model.hidden,
            ds.k,
            derive_seed(seed, "init"),
        ),
    }
}

pub fn epochs_csv(records: &[EpochRecord]) -> String {
    let mut out = String::from(
        "epoch,clean_loss,adv_loss,sym_loss,total_loss,seconds,benign_accuracy,robust_accuracy\n",
    );
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.epoch,
            r.clean_loss,
            r.adv_loss,
            r.sym_loss,
            r.total_loss,
            r.seconds,
            r.benign_accuracy,
            r.robust_accuracy
        );
    }
    out
}

pub const METRICS_CSV_HEADER: &str = "benign_accuracy,robust_accuracy,min_class_accuracy,accuracy_gap,max_asymmetry_gap,symmetry_loss,tgt_min,tgt_max,tgt_std";

pub fn metrics_csv_row(report: &FairnessReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        report.benign_accuracy,
        report.robust_accuracy,
        report.min_class_accuracy,
        report.accuracy_gap,
        report.max_asymmetry_gap,
        report.symmetry_loss_value,
        report.tgt_min,
        report.tgt_max,
        report.tgt_std
    )
}

pub(crate) fn say(quiet: bool, msg: &str) {
    if !quiet {
        println!("{msg}");
    }
}

pub(crate) fn file_name_of(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into())
}
