//! `symtrain verify-theorem`: run the class↔subgroup symmetry check on an
//! exported confusion matrix and write the verdict.

use std::path::{Path, PathBuf};

use symtrain_core::confusion::ConfusionMatrix;
use symtrain_core::subgroup::{verify_theorem, TheoremVerdict};
use symtrain_core::Result;

use crate::io_util::{ensure_dir, write_atomic};

use super::say;

pub struct VerifyOutput {
    pub verdict: TheoremVerdict,
    pub verdict_path: PathBuf,
}

pub fn cmd_verify_theorem(
    confusion_path: &Path,
    trials: usize,
    tolerance: f64,
    seed: u64,
    out_dir: &Path,
    quiet: bool,
) -> Result<VerifyOutput> {
    ensure_dir(out_dir)?;
    let c = ConfusionMatrix::load(confusion_path)?;
    let verdict = verify_theorem(&c, trials, tolerance, seed)?;
    say(
        quiet,
        &format!(
            "{}: class gap {:.6}, {} ({})",
            if verdict.pass { "PASS" } else { "FAIL" },
            verdict.class_max_gap,
            if verdict.symmetric_case {
                format!("{} random partitions all symmetric", verdict.trials)
            } else {
                "singleton witness partition reproduces the gap".to_string()
            },
            confusion_path.display()
        ),
    );
    let verdict_path = out_dir.join("verdict.json");
    write_atomic(&verdict_path, &serde_json::to_string_pretty(&verdict)?)?;
    Ok(VerifyOutput {
        verdict,
        verdict_path,
    })
}
