//! Adversarial training with the composite objective
//! λ_clean·CE(x,y) + λ_adv·CE(x_adv,y) + λ_sym·L_sym(C).
//!
//! Each step runs a clean pass, regenerates adversarial examples against the
//! current parameters, runs the adversarial pass, builds the soft confusion
//! matrix of the adversarial batch, applies the configured regularizer, and
//! takes one SGD step. Two baseline arms replace or drop the third term:
//! `none` (plain adversarial training) and `spectral` (the off-diagonal
//! spectral-norm penalty).

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{self, AttackSpec};
use crate::confusion::{ConfusionMatrix, MatrixKind};
use crate::data::{gather, Dataset};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::nn::{Batch, Model, ParamNodes};
use crate::rng::derive_seed;
use crate::spectral::spectral_norm_off_diagonal;
use crate::symmetry::SymmetryConfig;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularizer {
    None,
    Symmetry,
    Spectral,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda_clean: f64,
    pub lambda_adv: f64,
    pub lambda_sym: f64,
    pub regularizer: Regularizer,
    pub attack: AttackSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// ε policy for the training-time symmetry loss.
    pub symmetry: SymmetryConfig,
    /// Image geometry, required by rectangle-occlusion training attacks.
    pub image_hw: Option<(usize, usize)>,
}

impl TrainConfig {
    pub fn new(attack: AttackSpec) -> Self {
        TrainConfig {
            lambda_clean: 1.0,
            lambda_adv: 1.0,
            lambda_sym: 1.0,
            regularizer: Regularizer::Symmetry,
            attack,
            epochs: 5,
            batch_size: 64,
            learning_rate: 0.05,
            seed: 0,
            symmetry: SymmetryConfig::default(),
            image_hw: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, l) in [
            ("lambda_clean", self.lambda_clean),
            ("lambda_adv", self.lambda_adv),
            ("lambda_sym", self.lambda_sym),
        ] {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::config(format!("{name} must be finite and >= 0")));
            }
        }
        if self.lambda_clean == 0.0 && self.lambda_adv == 0.0 && self.lambda_sym == 0.0 {
            return Err(Error::config("at least one loss weight must be positive"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        Ok(())
    }

    /// The weight actually applied to the regularizer term.
    pub fn effective_lambda_sym(&self) -> f64 {
        match self.regularizer {
            Regularizer::None => 0.0,
            _ => self.lambda_sym,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub clean: f64,
    pub adv: f64,
    /// Value of the active regularizer (symmetry loss or spectral penalty);
    /// 0 in the `none` arm.
    pub reg: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub clean_loss: f64,
    pub adv_loss: f64,
    pub sym_loss: f64,
    pub total_loss: f64,
    pub seconds: f64,
    pub benign_accuracy: f64,
    pub robust_accuracy: f64,
}

/// A fully built composite-loss graph, before backward.
pub struct CompositeLoss {
    pub graph: Graph,
    pub params: ParamNodes,
    pub total: NodeId,
    pub clean: NodeId,
    pub adv: NodeId,
    pub reg: Option<NodeId>,
}

/// Record the composite objective for one batch with the adversarial inputs
/// held fixed (gradients do not flow through attack generation).
pub fn composite_graph(
    model: &Model,
    batch: &Batch,
    adv_inputs: &Tensor,
    cfg: &TrainConfig,
) -> Result<CompositeLoss> {
    cfg.validate()?;
    let mut g = Graph::new();
    let params = model.bind_params(&mut g)?;

    let x_clean = g.input_tensor(&batch.inputs)?;
    let z_clean = model.forward_with(&mut g, &params, x_clean)?;
    let clean = g.mean_cross_entropy(z_clean, &batch.labels)?;

    let x_adv = g.input_tensor(adv_inputs)?;
    let z_adv = model.forward_with(&mut g, &params, x_adv)?;
    let adv = g.mean_cross_entropy(z_adv, &batch.labels)?;

    let mut terms = vec![(clean, cfg.lambda_clean), (adv, cfg.lambda_adv)];
    let reg = match cfg.regularizer {
        Regularizer::None => None,
        Regularizer::Symmetry => {
            let probs = g.softmax_rows(z_adv)?;
            let c = g.soft_confusion(probs, &batch.labels)?;
            let epsilon = cfg.symmetry.epsilon_for(model.num_classes());
            Some(g.symmetry_loss(c, epsilon)?)
        }
        Regularizer::Spectral => {
            let probs = g.softmax_rows(z_adv)?;
            let c = g.soft_confusion(probs, &batch.labels)?;
            Some(g.spectral_off_diagonal(c)?)
        }
    };
    if let Some(r) = reg {
        terms.push((r, cfg.lambda_sym));
    }
    let total = g.weighted_sum(&terms)?;
    Ok(CompositeLoss {
        graph: g,
        params,
        total,
        clean,
        adv,
        reg,
    })
}

/// Generate adversarial examples against the current parameters, take one
/// SGD step on the composite loss, and report the batch losses.
pub fn train_step(model: &mut Model, batch: &Batch, cfg: &TrainConfig) -> Result<StepLosses> {
    cfg.validate()?;
    let adv_inputs = attack::run_attack(model, batch, &cfg.attack, cfg.image_hw)?;
    let mut comp = composite_graph(model, batch, &adv_inputs, cfg)?;
    comp.graph.backward(comp.total)?;
    model.accumulate_grads(&comp.graph, &comp.params)?;
    model.sgd_step(cfg.learning_rate)?;
    Ok(StepLosses {
        clean: comp.graph.scalar(comp.clean)?,
        adv: comp.graph.scalar(comp.adv)?,
        reg: match comp.reg {
            Some(r) => comp.graph.scalar(r)?,
            None => 0.0,
        },
        total: comp.graph.scalar(comp.total)?,
    })
}

/// Largest singular value of the off-diagonal part of a soft confusion
/// matrix (power iteration to relative tolerance 1e-8, at most 1000
/// iterations).
pub fn spectral_penalty(c: &ConfusionMatrix) -> Result<f64> {
    if c.kind() != MatrixKind::Soft {
        return Err(Error::kind("spectral penalty expects a soft matrix"));
    }
    Ok(spectral_norm_off_diagonal(c.entries(), c.k())?.value)
}

/// Benign and robust accuracy of a model on a set of dataset rows.
fn accuracy_pair(
    model: &Model,
    ds: &Dataset,
    indices: &[usize],
    attack_spec: &AttackSpec,
    image_hw: Option<(usize, usize)>,
) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let batch = gather(ds, indices)?;
    let preds = model.predict(&batch.inputs)?;
    let benign = preds
        .iter()
        .zip(&batch.labels)
        .filter(|(p, y)| p == y)
        .count() as f64
        / batch.size() as f64;
    let adv = attack::run_attack(model, &batch, attack_spec, image_hw)?;
    let adv_preds = model.predict(&adv)?;
    let robust = adv_preds
        .iter()
        .zip(&batch.labels)
        .filter(|(p, y)| p == y)
        .count() as f64
        / batch.size() as f64;
    Ok((benign, robust))
}

/// Epochs of seeded-shuffle minibatch training with per-epoch validation
/// accuracy. Deterministic under a fixed config and seed (wall-clock aside).
pub fn train(model: &mut Model, ds: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochRecord>> {
    cfg.validate()?;
    let splits = ds
        .splits
        .as_ref()
        .ok_or_else(|| Error::state("dataset has no splits; call data::split first"))?;
    if splits.train.is_empty() {
        return Err(Error::state("training split is empty"));
    }
    if ds.k != model.num_classes() {
        return Err(Error::shape(format!(
            "dataset has {} classes but the model emits {}",
            ds.k,
            model.num_classes()
        )));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "shuffle"));
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order = splits.train.clone();
        order.shuffle(&mut shuffle_rng);
        let mut sums = StepLosses {
            clean: 0.0,
            adv: 0.0,
            reg: 0.0,
            total: 0.0,
        };
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = gather(ds, chunk)?;
            let losses = train_step(model, &batch, cfg)?;
            let w = chunk.len() as f64;
            sums.clean += w * losses.clean;
            sums.adv += w * losses.adv;
            sums.reg += w * losses.reg;
            sums.total += w * losses.total;
            seen += chunk.len();
        }
        let n = seen as f64;
        let (benign, robust) = accuracy_pair(model, ds, &splits.val, &cfg.attack, cfg.image_hw)?;
        records.push(EpochRecord {
            epoch,
            clean_loss: sums.clean / n,
            adv_loss: sums.adv / n,
            sym_loss: sums.reg / n,
            total_loss: sums.total / n,
            seconds: started.elapsed().as_secs_f64(),
            benign_accuracy: benign,
            robust_accuracy: robust,
        });
    }
    Ok(records)
}
