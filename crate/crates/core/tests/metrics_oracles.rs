//! Metric implementations against brute-force loop oracles, and the
//! export-and-recompute round trip for evaluation reports.

mod common;

use common::{random_row_stochastic, Lcg};
use symtrain_core::attack::AttackSpec;
use symtrain_core::confusion::{ConfusionMatrix, MatrixKind};
use symtrain_core::data::{generate_synthetic, split, SyntheticSpec};
use symtrain_core::metrics::{
    evaluate, max_asymmetry_gap, report_from_confusions, source_class_metrics, target_fairness,
    target_shares, EvalOptions, SplitKind, TargetNormalization,
};
use symtrain_core::nn::Model;
use symtrain_core::symmetry::{symmetry_loss, SymmetryConfig};

fn matrix_from(entries: Vec<f64>, k: usize) -> ConfusionMatrix {
    ConfusionMatrix::from_parts(k, MatrixKind::HardNormalized, vec![10; k], entries).unwrap()
}

#[test]
fn metrics_match_loop_oracles_on_two_hundred_random_matrices() {
    let mut rng = Lcg(0xACE);
    for trial in 0..200 {
        let k = 2 + rng.index(9);
        let entries = random_row_stochastic(k, &mut rng);
        let c = matrix_from(entries.clone(), k);

        // Source-class oracle.
        let m = source_class_metrics(&c).unwrap();
        let mut dmin = f64::INFINITY;
        let mut dmax = f64::NEG_INFINITY;
        for i in 0..k {
            dmin = dmin.min(entries[i * k + i]);
            dmax = dmax.max(entries[i * k + i]);
        }
        assert_eq!(m.min, dmin, "trial {trial}");
        assert_eq!(m.gap, dmax - dmin, "trial {trial}");

        // Asymmetry oracle.
        let mut gap: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                gap = gap.max((entries[i * k + j] - entries[j * k + i]).abs());
            }
        }
        assert_eq!(max_asymmetry_gap(&c), gap, "trial {trial}");

        // Target-share oracles, both normalizations.
        let total_off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| entries[i * k + j])
            .sum();
        let tm = target_shares(&c, TargetNormalization::TotalMass);
        let aw = target_shares(&c, TargetNormalization::AsWritten);
        for j in 0..k {
            let col: f64 = (0..k).filter(|&i| i != j).map(|i| entries[i * k + j]).sum();
            assert!(
                (tm.shares[j] - col / total_off).abs() < 1e-12,
                "trial {trial}"
            );
            let denom: f64 = (0..k)
                .filter(|&i| i != j)
                .flat_map(|i| (0..k).filter(move |&x| x != i).map(move |x| (i, x)))
                .map(|(i, x)| entries[i * k + x])
                .sum();
            assert!((aw.shares[j] - col / denom).abs() < 1e-12, "trial {trial}");
        }
        let sum: f64 = tm.shares.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12, "total-mass shares must sum to 1");

        // Summary stats oracle.
        let (tmin, tmax, tstd) = target_fairness(&tm.shares);
        let omin = tm.shares.iter().cloned().fold(f64::INFINITY, f64::min);
        let omax = tm.shares.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = sum / k as f64;
        let ovar = tm.shares.iter().map(|&t| (t - mean).powi(2)).sum::<f64>() / k as f64;
        assert_eq!(tmin, omin);
        assert_eq!(tmax, omax);
        assert!((tstd - ovar.sqrt()).abs() < 1e-15);
    }
}

#[test]
fn asymmetry_zero_iff_symmetry_loss_zero_with_positive_masses() {
    let mut rng = Lcg(0x1CE);
    let cfg = SymmetryConfig::default();
    for _ in 0..50 {
        let k = 3 + rng.index(5);
        let mut entries = random_row_stochastic(k, &mut rng);
        let c = matrix_from(entries.clone(), k);
        let gap = max_asymmetry_gap(&c);
        let loss = symmetry_loss(&c, &cfg).unwrap();
        assert_eq!(gap == 0.0, loss == 0.0);

        common::symmetrize(&mut entries, k);
        for i in 0..k {
            let off: f64 = (0..k).filter(|&j| j != i).map(|j| entries[i * k + j]).sum();
            entries[i * k + i] = (1.0 - off).max(0.0);
        }
        // Renormalize rows exactly.
        for row in entries.chunks_mut(k) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|e| *e /= s);
        }
        // Rows renormalize by nearly identical factors, so off-diagonal
        // symmetry survives to well under the metric tolerance... verify the
        // equivalence on the exactly-symmetric part instead.
        let mut sym = entries.clone();
        common::symmetrize(&mut sym, k);
        let gap = symtrain_core::metrics::max_asymmetry_gap_entries(&sym, k);
        let loss = symtrain_core::symmetry::symmetry_loss_entries(&sym, k, 0.5).unwrap();
        assert!(gap < 1e-15);
        assert!(loss < 1e-15);
    }
}

#[test]
fn evaluate_report_recomputes_from_exported_confusion_json() {
    let mut ds = generate_synthetic(&SyntheticSpec {
        k: 4,
        dims: 10,
        samples_per_class: 40,
        cluster_spread: 0.15,
        sibling_pairs: vec![],
        seed: 8,
    })
    .unwrap();
    split(&mut ds, [0.8, 0.1, 0.1], 8).unwrap();
    let model = Model::init(10, &[8], 4, 5).unwrap();
    let attack = AttackSpec::pgd_linf(0.08, 0.02, 5);
    let opts = EvalOptions::default();
    let report = evaluate(&model, &ds, SplitKind::Test, &attack, &opts).unwrap();

    // Export the counts matrix, re-import, recompute every derived field.
    let json = report
        .confusion_adversarial_counts
        .to_json_string()
        .unwrap();
    let counts = ConfusionMatrix::from_json_str(&json).unwrap();
    let recomputed = report_from_confusions(
        &counts,
        &report.confusion_benign,
        report.benign_accuracy,
        report.robust_accuracy,
        &opts,
    )
    .unwrap();

    assert_eq!(report.min_class_accuracy, recomputed.min_class_accuracy);
    assert_eq!(report.accuracy_gap, recomputed.accuracy_gap);
    assert_eq!(report.max_asymmetry_gap, recomputed.max_asymmetry_gap);
    assert_eq!(report.symmetry_loss_value, recomputed.symmetry_loss_value);
    assert_eq!(report.target_shares, recomputed.target_shares);
    assert_eq!(report.tgt_std, recomputed.tgt_std);
    assert_eq!(report.per_class_robust, recomputed.per_class_robust);
}

#[test]
fn zero_iteration_attack_makes_robust_equal_benign() {
    let mut ds = generate_synthetic(&SyntheticSpec {
        k: 3,
        dims: 8,
        samples_per_class: 30,
        cluster_spread: 0.1,
        sibling_pairs: vec![],
        seed: 3,
    })
    .unwrap();
    split(&mut ds, [0.8, 0.1, 0.1], 3).unwrap();
    let model = Model::init(8, &[6], 3, 2).unwrap();
    let attack = AttackSpec::pgd_linf(0.1, 0.02, 0);
    let report = evaluate(
        &model,
        &ds,
        SplitKind::Test,
        &attack,
        &EvalOptions::default(),
    )
    .unwrap();
    assert_eq!(report.benign_accuracy, report.robust_accuracy);
    assert_eq!(
        report.confusion_benign.entries(),
        report.confusion_adversarial.entries()
    );
}

#[test]
fn constant_model_scores_majority_share_on_balanced_data() {
    // An untrained constant-output model predicts one class everywhere, so
    // benign accuracy equals that class's share.
    let mut ds = generate_synthetic(&SyntheticSpec {
        k: 4,
        dims: 6,
        samples_per_class: 25,
        cluster_spread: 0.1,
        sibling_pairs: vec![],
        seed: 1,
    })
    .unwrap();
    split(&mut ds, [0.6, 0.2, 0.2], 1).unwrap();
    use symtrain_core::nn::{Activation, Layer};
    use symtrain_core::tensor::Tensor;
    let layer = Layer::new(
        Tensor::matrix(4, 6, vec![0.0; 24]).unwrap(),
        Tensor::new(vec![4], vec![0.0, 1.0, 0.0, 0.0]).unwrap(),
        Activation::Identity,
    )
    .unwrap();
    let model = Model::new(vec![layer], 4).unwrap();
    let attack = AttackSpec::pgd_linf(0.05, 0.02, 0);
    let report = evaluate(
        &model,
        &ds,
        SplitKind::Test,
        &attack,
        &EvalOptions::default(),
    )
    .unwrap();
    assert!((report.benign_accuracy - 0.25).abs() < 1e-12);
}

#[test]
fn soft_confusion_merge_consistency_over_a_dataset() {
    // Batch-wise soft matrices merged with count weights equal the matrix
    // built from the whole split in one pass.
    let mut ds = generate_synthetic(&SyntheticSpec {
        k: 3,
        dims: 6,
        samples_per_class: 21,
        cluster_spread: 0.12,
        sibling_pairs: vec![],
        seed: 6,
    })
    .unwrap();
    split(&mut ds, [0.8, 0.1, 0.1], 6).unwrap();
    let model = Model::init(6, &[5], 3, 4).unwrap();
    let train = ds.splits.as_ref().unwrap().train.clone();
    let whole = symtrain_core::data::gather(&ds, &train).unwrap();
    let probs = model.probabilities(&whole.inputs).unwrap();
    let direct = ConfusionMatrix::soft_from_probabilities(&probs, &whole.labels).unwrap();

    let mut merged = ConfusionMatrix::empty(3, MatrixKind::Soft);
    for chunk in train.chunks(7) {
        let b = symtrain_core::data::gather(&ds, chunk).unwrap();
        let p = model.probabilities(&b.inputs).unwrap();
        let m = ConfusionMatrix::soft_from_probabilities(&p, &b.labels).unwrap();
        merged = ConfusionMatrix::merge(&merged, &m).unwrap();
    }
    for (a, b) in merged.entries().iter().zip(direct.entries()) {
        assert!((a - b).abs() < 1e-9);
    }
    assert_eq!(merged.counts(), direct.counts());
}
