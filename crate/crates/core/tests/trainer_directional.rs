//! Paired-run comparison on the synthetic sibling task: training with the
//! symmetry term lowers the training-time symmetry objective itself
//! (final-epoch soft confusion of adversarial batches), averaged over ten
//! seeds, at equal epochs.

use symtrain_core::attack::{run_attack, AttackSpec};
use symtrain_core::data::{gather, generate_synthetic, split, SiblingPair, SyntheticSpec};
use symtrain_core::graph::Graph;
use symtrain_core::nn::Model;
use symtrain_core::symmetry::SymmetryConfig;
use symtrain_core::trainer::{train, Regularizer, TrainConfig};

/// Mean soft symmetry loss of a model over the training split's adversarial
/// batches (measurement only, no updates).
fn adversarial_soft_symmetry(
    model: &Model,
    ds: &symtrain_core::data::Dataset,
    attack: &AttackSpec,
    batch_size: usize,
) -> f64 {
    let cfg = SymmetryConfig::default();
    let train_idx = &ds.splits.as_ref().unwrap().train;
    let mut total = 0.0;
    let mut batches = 0;
    for chunk in train_idx.chunks(batch_size) {
        let batch = gather(ds, chunk).unwrap();
        let adv = run_attack(model, &batch, attack, None).unwrap();
        let mut g = Graph::new();
        let x = g.input_tensor(&adv).unwrap();
        let (logits, _) = model.forward(&mut g, x).unwrap();
        let probs = g.softmax_rows(logits).unwrap();
        let c = g.soft_confusion(probs, &batch.labels).unwrap();
        let l = g
            .symmetry_loss(c, cfg.epsilon_for(model.num_classes()))
            .unwrap();
        total += g.scalar(l).unwrap();
        batches += 1;
    }
    total / batches as f64
}

#[test]
fn symmetry_arm_lowers_the_training_objective_over_ten_seeds() {
    let mut ds = generate_synthetic(&SyntheticSpec {
        k: 4,
        dims: 16,
        samples_per_class: 80,
        cluster_spread: 0.12,
        sibling_pairs: vec![SiblingPair {
            a: 0,
            b: 1,
            overlap: 0.7,
        }],
        seed: 0,
    })
    .unwrap();
    split(&mut ds, [0.8, 0.1, 0.1], 0).unwrap();

    let attack = AttackSpec::pgd_linf(0.05, 0.015, 5);
    let mut none_total = 0.0;
    let mut sym_total = 0.0;
    for seed in 1..=10u64 {
        for (regularizer, acc) in [
            (Regularizer::None, &mut none_total),
            (Regularizer::Symmetry, &mut sym_total),
        ] {
            let mut cfg = TrainConfig::new(attack.clone());
            cfg.regularizer = regularizer;
            cfg.epochs = 6;
            cfg.batch_size = 32;
            cfg.learning_rate = 0.02;
            cfg.seed = seed;
            let mut model = Model::init(16, &[12], 4, seed).unwrap();
            train(&mut model, &ds, &cfg).unwrap();
            *acc += adversarial_soft_symmetry(&model, &ds, &attack, 32);
        }
    }
    assert!(
        sym_total < none_total,
        "regularized arm should lower its own objective: {sym_total:.4} vs {none_total:.4}"
    );
}
