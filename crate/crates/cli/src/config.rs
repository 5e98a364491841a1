//! Run configuration: one TOML file with data/model/attack/train/eval
//! sections. Command-line flags override file fields, which override
//! defaults. Unknown keys are rejected so typos surface with their paths.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use symtrain_core::attack::{AttackFamily, AttackMode, AttackSpec, Mask, PatchInit, RectSpec};
use symtrain_core::data::{
    self, generate_synthetic, CsvSchema, Dataset, InputScale, SiblingPair, SyntheticSpec,
};
use symtrain_core::metrics::{EvalOptions, TargetNormalization};
use symtrain_core::symmetry::SymmetryConfig;
use symtrain_core::trainer::{Regularizer, TrainConfig};
use symtrain_core::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub attack: AttackSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub study: StudySection,
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// "synthetic" or "csv".
    pub source: String,
    pub seed: u64,
    pub k: usize,
    pub dims: usize,
    pub samples_per_class: usize,
    pub cluster_spread: f64,
    pub siblings: Vec<SiblingEntry>,
    pub split: [f64; 3],
    pub image_height: Option<usize>,
    pub image_width: Option<usize>,
    pub csv_path: Option<PathBuf>,
    pub csv_scale: String,
    /// Inline per-class attributes: name → one value per class.
    pub attributes: BTreeMap<String, Vec<String>>,
    /// Or a JSON attribute-map file (class → {attribute: value}).
    pub attributes_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SiblingEntry {
    pub a: usize,
    pub b: usize,
    pub overlap: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            source: "synthetic".into(),
            seed: 0,
            k: 6,
            dims: 64,
            samples_per_class: 300,
            cluster_spread: 0.12,
            siblings: vec![SiblingEntry {
                a: 0,
                b: 1,
                overlap: 0.7,
            }],
            split: [0.8, 0.1, 0.1],
            image_height: None,
            image_width: None,
            csv_path: None,
            csv_scale: "unit".into(),
            attributes: BTreeMap::new(),
            attributes_path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: Vec<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { hidden: vec![32] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    /// "pgd-linf", "masked-patch", or "rectangle-occlusion".
    pub family: String,
    pub epsilon: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub momentum_decay: f64,
    /// "untargeted" or "targeted" (with `target`).
    pub mode: String,
    pub target: Option<usize>,
    /// "zero", "mid-gray", or "best-of-colors" (with `colors`).
    pub init: String,
    pub colors: Vec<f64>,
    pub mask_path: Option<PathBuf>,
    pub rect: Option<RectSpec>,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            family: "pgd-linf".into(),
            epsilon: 8.0 / 255.0,
            step_size: 2.0 / 255.0,
            iterations: 10,
            momentum_decay: 1.0,
            mode: "untargeted".into(),
            target: None,
            init: "mid-gray".into(),
            colors: symtrain_core::attack::DEFAULT_COLOR_PALETTE.to_vec(),
            mask_path: None,
            rect: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub lambda_clean: f64,
    pub lambda_adv: f64,
    pub lambda_sym: f64,
    /// "none", "symmetry", or "spectral".
    pub regularizer: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// "scratch" or "fine-tune" (with `checkpoint`).
    pub mode: String,
    pub checkpoint: Option<PathBuf>,
    /// "one-over-k" or "fixed" (with `epsilon`).
    pub epsilon_mode: String,
    pub epsilon: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            lambda_clean: 1.0,
            lambda_adv: 1.0,
            lambda_sym: 1.0,
            regularizer: "symmetry".into(),
            epochs: 5,
            batch_size: 64,
            learning_rate: 0.05,
            seed: 0,
            mode: "scratch".into(),
            checkpoint: None,
            epsilon_mode: "one-over-k".into(),
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Evaluation attack; falls back to [attack] when absent.
    pub attack: Option<AttackSection>,
    /// "total-mass" or "as-written".
    pub target_normalization: String,
    pub epsilon_mode: String,
    pub epsilon: Option<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            attack: None,
            target_normalization: "total-mass".into(),
            epsilon_mode: "one-over-k".into(),
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub seeds: Vec<u64>,
    /// Regularizer arms to run per seed; defaults to the [train] arm alone.
    pub arms: Vec<String>,
    /// When > 0, each seed first trains a plain adversarial base model for
    /// this many epochs; every arm then fine-tunes a copy of that base for
    /// [train].epochs. Keeps arms paired and mirrors the fine-tune protocol.
    pub pretrain_epochs: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            seeds: vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
            arms: vec![],
            pretrain_epochs: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    /// Epoch count for the timing comparison; 0 falls back to [train].
    pub epochs: usize,
}

/// Command-line overrides (flag > file > default).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("config {}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn apply_overrides(&mut self, ov: &Overrides) {
        if let Some(seed) = ov.seed {
            self.train.seed = seed;
        }
    }

    /// Make file references relative to the config's own directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *p = Some(base.join(&path));
                }
            }
        };
        fix(&mut self.data.csv_path);
        fix(&mut self.data.attributes_path);
        fix(&mut self.attack.mask_path);
        fix(&mut self.train.checkpoint);
        if let Some(eval_attack) = &mut self.eval.attack {
            if let Some(path) = &mut eval_attack.mask_path {
                if path.is_relative() {
                    *path = base.join(&path);
                }
            }
        }
    }

    /// Canonical JSON of the fully resolved config (hash input).
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    // -- section conversions -------------------------------------------------

    pub fn image_hw(&self) -> Option<(usize, usize)> {
        match (self.data.image_height, self.data.image_width) {
            (Some(h), Some(w)) => Some((h, w)),
            _ => {
                // A square dims is treated as an H×W image.
                let side = (self.data.dims as f64).sqrt().round() as usize;
                if side * side == self.data.dims {
                    Some((side, side))
                } else {
                    None
                }
            }
        }
    }

    pub fn build_dataset(&self) -> Result<(Dataset, Vec<String>)> {
        let mut ds = match self.data.source.as_str() {
            "synthetic" => generate_synthetic(&SyntheticSpec {
                k: self.data.k,
                dims: self.data.dims,
                samples_per_class: self.data.samples_per_class,
                cluster_spread: self.data.cluster_spread,
                sibling_pairs: self
                    .data
                    .siblings
                    .iter()
                    .map(|s| SiblingPair {
                        a: s.a,
                        b: s.b,
                        overlap: s.overlap,
                    })
                    .collect(),
                seed: self.data.seed,
            })?,
            "csv" => {
                let path =
                    self.data.csv_path.as_ref().ok_or_else(|| {
                        Error::config("data.source = \"csv\" needs data.csv_path")
                    })?;
                let scale = match self.data.csv_scale.as_str() {
                    "unit" => InputScale::Unit,
                    "byte" => InputScale::Byte,
                    other => {
                        return Err(Error::config(format!(
                            "data.csv_scale: unknown scale {other:?}"
                        )))
                    }
                };
                data::load_csv(
                    path,
                    &CsvSchema {
                        num_classes: Some(self.data.k),
                        dims: Some(self.data.dims),
                        scale,
                    },
                )?
            }
            other => {
                return Err(Error::config(format!(
                    "data.source: unknown source {other:?}"
                )))
            }
        };
        let warnings = data::split(&mut ds, self.data.split, self.data.seed)?;
        ds.attributes = self.load_attribute_map()?;
        Ok((ds, warnings))
    }

    pub fn load_attribute_map(&self) -> Result<Option<data::AttributeMap>> {
        if let Some(path) = &self.data.attributes_path {
            return Ok(Some(data::load_attributes(path)?));
        }
        if self.data.attributes.is_empty() {
            return Ok(None);
        }
        let mut map: data::AttributeMap = BTreeMap::new();
        for (name, values) in &self.data.attributes {
            if values.len() != self.data.k {
                return Err(Error::config(format!(
                    "data.attributes.{name}: {} values for {} classes",
                    values.len(),
                    self.data.k
                )));
            }
            for (class, value) in values.iter().enumerate() {
                map.entry(class)
                    .or_default()
                    .insert(name.clone(), value.clone());
            }
        }
        Ok(Some(map))
    }

    pub fn build_attack(&self, section: &AttackSection) -> Result<AttackSpec> {
        let family = match section.family.as_str() {
            "pgd-linf" => AttackFamily::PgdLinf,
            "masked-patch" => AttackFamily::MaskedPatch,
            "rectangle-occlusion" => AttackFamily::RectangleOcclusion,
            other => {
                return Err(Error::config(format!(
                    "attack.family: unknown family {other:?}"
                )))
            }
        };
        let mode =
            match section.mode.as_str() {
                "untargeted" => AttackMode::Untargeted,
                "targeted" => AttackMode::Targeted(section.target.ok_or_else(|| {
                    Error::config("attack.mode = \"targeted\" needs attack.target")
                })?),
                other => {
                    return Err(Error::config(format!(
                        "attack.mode: unknown mode {other:?}"
                    )))
                }
            };
        let init = match section.init.as_str() {
            "zero" => PatchInit::Zero,
            "mid-gray" => PatchInit::MidGray,
            "best-of-colors" => PatchInit::BestOfColors(section.colors.clone()),
            other => {
                return Err(Error::config(format!(
                    "attack.init: unknown init {other:?}"
                )))
            }
        };
        let mask = match (&section.mask_path, family) {
            (Some(path), AttackFamily::MaskedPatch) => Some(Mask::load(path)?),
            (None, AttackFamily::MaskedPatch) => {
                let (h, w) = self.image_hw().ok_or_else(|| {
                    Error::config("masked-patch without mask_path needs image dimensions")
                })?;
                Some(Mask::eyeglass(h, w)?)
            }
            _ => None,
        };
        let rect = match (section.rect, family) {
            (Some(r), AttackFamily::RectangleOcclusion) => Some(r),
            (None, AttackFamily::RectangleOcclusion) => {
                let (h, w) = self
                    .image_hw()
                    .ok_or_else(|| Error::config("rectangle-occlusion needs image dimensions"))?;
                AttackSpec::rectangle_occlusion(h, w).rect
            }
            _ => None,
        };
        let spec = AttackSpec {
            family,
            epsilon: section.epsilon,
            step_size: section.step_size,
            iterations: section.iterations,
            momentum_decay: section.momentum_decay,
            mask,
            rect,
            mode,
            init,
        };
        spec.validate(self.data.dims, self.image_hw())?;
        Ok(spec)
    }

    pub fn symmetry_config(mode: &str, epsilon: Option<f64>, path: &str) -> Result<SymmetryConfig> {
        match mode {
            "one-over-k" => Ok(SymmetryConfig::one_over_k()),
            "fixed" => SymmetryConfig::fixed(epsilon.ok_or_else(|| {
                Error::config(format!(
                    "{path}.epsilon_mode = \"fixed\" needs {path}.epsilon"
                ))
            })?),
            other => Err(Error::config(format!(
                "{path}.epsilon_mode: unknown mode {other:?}"
            ))),
        }
    }

    pub fn regularizer(name: &str) -> Result<Regularizer> {
        match name {
            "none" => Ok(Regularizer::None),
            "symmetry" => Ok(Regularizer::Symmetry),
            "spectral" => Ok(Regularizer::Spectral),
            other => Err(Error::config(format!(
                "train.regularizer: unknown regularizer {other:?}"
            ))),
        }
    }

    pub fn build_train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            lambda_clean: self.train.lambda_clean,
            lambda_adv: self.train.lambda_adv,
            lambda_sym: self.train.lambda_sym,
            regularizer: Self::regularizer(&self.train.regularizer)?,
            attack: self.build_attack(&self.attack)?,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            seed: self.train.seed,
            symmetry: Self::symmetry_config(&self.train.epsilon_mode, self.train.epsilon, "train")?,
            image_hw: self.image_hw(),
        };
        cfg.validate()?;
        match self.train.mode.as_str() {
            "scratch" => {}
            "fine-tune" => {
                if self.train.checkpoint.is_none() {
                    return Err(Error::config(
                        "train.mode = \"fine-tune\" needs train.checkpoint",
                    ));
                }
            }
            other => return Err(Error::config(format!("train.mode: unknown mode {other:?}"))),
        }
        Ok(cfg)
    }

    pub fn build_eval_attack(&self) -> Result<AttackSpec> {
        match &self.eval.attack {
            Some(section) => self.build_attack(section),
            None => self.build_attack(&self.attack),
        }
    }

    pub fn build_eval_options(&self) -> Result<EvalOptions> {
        let target_normalization = match self.eval.target_normalization.as_str() {
            "total-mass" => TargetNormalization::TotalMass,
            "as-written" => TargetNormalization::AsWritten,
            other => {
                return Err(Error::config(format!(
                    "eval.target_normalization: unknown mode {other:?}"
                )))
            }
        };
        Ok(EvalOptions {
            symmetry: Self::symmetry_config(&self.eval.epsilon_mode, self.eval.epsilon, "eval")?,
            target_normalization,
            image_hw: self.image_hw(),
            chunk_size: 256,
        })
    }

    /// Arms for `study`: the configured list, or the [train] arm alone.
    pub fn study_arms(&self) -> Result<Vec<(String, Regularizer)>> {
        let names = if self.study.arms.is_empty() {
            vec![self.train.regularizer.clone()]
        } else {
            self.study.arms.clone()
        };
        names
            .into_iter()
            .map(|n| Ok((n.clone(), Self::regularizer(&n)?)))
            .collect()
    }
}
