//! Pairwise asymmetry penalty and total symmetry loss over confusion
//! matrices.
//!
//! For a class pair with masses a = C_ij and b = C_ji the penalty is
//! |a−b|/(a+b+ε) · (a+b): relative asymmetry scaled by the total confusion
//! mass of the pair, so frequent confusions dominate and one-off errors
//! barely register. The total loss sums the penalty over unordered pairs and
//! is zero exactly when every pair is balanced.

use serde::{Deserialize, Serialize};

use crate::confusion::{ConfusionMatrix, MatrixKind};
use crate::error::{Error, Result};
use crate::graph::sign;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonMode {
    /// ε = 1/K.
    OneOverK,
    /// A fixed user-supplied ε.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryConfig {
    pub mode: EpsilonMode,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        SymmetryConfig {
            mode: EpsilonMode::OneOverK,
        }
    }
}

impl SymmetryConfig {
    pub fn one_over_k() -> Self {
        SymmetryConfig::default()
    }

    pub fn fixed(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::domain("epsilon must be positive and finite"));
        }
        Ok(SymmetryConfig {
            mode: EpsilonMode::Fixed(epsilon),
        })
    }

    pub fn epsilon_for(&self, k: usize) -> f64 {
        match self.mode {
            EpsilonMode::OneOverK => 1.0 / k as f64,
            EpsilonMode::Fixed(e) => e,
        }
    }
}

/// |a−b|/(a+b+ε) · (a+b). Zero when a == b; grows with the imbalance at
/// fixed total mass.
pub fn pair_penalty(a: f64, b: f64, epsilon: f64) -> Result<f64> {
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::domain(format!(
            "pair masses must be non-negative, got ({a}, {b})"
        )));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::numeric("pair masses must be finite"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::domain("epsilon must be positive"));
    }
    let s = a + b;
    Ok((a - b).abs() * s / (s + epsilon))
}

/// Σ over unordered pairs of [`pair_penalty`] on a raw K×K row-major matrix.
pub fn symmetry_loss_entries(entries: &[f64], k: usize, epsilon: f64) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain("symmetry loss needs at least 2 classes"));
    }
    if entries.len() != k * k {
        return Err(Error::shape(format!(
            "expected {}×{} entries, got {}",
            k,
            k,
            entries.len()
        )));
    }
    let mut loss = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            loss += pair_penalty(entries[i * k + j], entries[j * k + i], epsilon)?;
        }
    }
    Ok(loss)
}

/// Σ over unordered pairs of [`pair_penalty`]. Works on any matrix kind.
pub fn symmetry_loss(c: &ConfusionMatrix, cfg: &SymmetryConfig) -> Result<f64> {
    let k = c.k();
    if k < 2 {
        return Err(Error::domain("symmetry loss needs at least 2 classes"));
    }
    symmetry_loss_entries(c.entries(), k, cfg.epsilon_for(k))
}

/// ∂L_sym/∂C as a K×K row-major matrix. Only defined for soft matrices; the
/// diagonal is exactly zero and the |a−b| kink takes subgradient 0.
pub fn symmetry_loss_gradient(c: &ConfusionMatrix, cfg: &SymmetryConfig) -> Result<Vec<f64>> {
    if c.kind() != MatrixKind::Soft {
        return Err(Error::kind(
            "symmetry loss gradient is defined for soft matrices only",
        ));
    }
    let k = c.k();
    if k < 2 {
        return Err(Error::domain("symmetry loss needs at least 2 classes"));
    }
    let epsilon = cfg.epsilon_for(k);
    let mut grad = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let a = c.entry(i, j);
            let b = c.entry(j, i);
            let d = a - b;
            let s = a + b;
            let t = s + epsilon;
            let common = d.abs() * epsilon / (t * t);
            grad[i * k + j] = sign(d) * s / t + common;
            grad[j * k + i] = -sign(d) * s / t + common;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn soft(k: usize, counts: Vec<u64>, entries: Vec<f64>) -> ConfusionMatrix {
        ConfusionMatrix::from_parts(k, MatrixKind::Soft, counts, entries).unwrap()
    }

    #[test]
    fn equal_masses_cost_nothing() {
        assert_eq!(pair_penalty(0.3, 0.3, 0.5).unwrap(), 0.0);
        assert_eq!(pair_penalty(0.0, 0.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn penalty_matches_direct_evaluation() {
        // (|0.2−0.1|/(0.3+0.1))·0.3 with the K=10 default ε.
        let p = pair_penalty(0.2, 0.1, 0.1).unwrap();
        assert!((p - 0.075).abs() < 1e-15);
        // (|0.5−0|/(0.5+0.5))·0.5 with the K=2 default ε.
        let p = pair_penalty(0.5, 0.0, 0.5).unwrap();
        assert!((p - 0.25).abs() < 1e-15);
    }

    #[test]
    fn negative_mass_is_a_domain_error() {
        assert!(matches!(
            pair_penalty(-0.1, 0.2, 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn symmetric_matrices_have_zero_loss() {
        let c = soft(
            3,
            vec![1, 1, 1],
            vec![0.6, 0.25, 0.15, 0.25, 0.55, 0.2, 0.15, 0.2, 0.65],
        );
        assert_eq!(symmetry_loss(&c, &SymmetryConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_two_class_example() {
        let c = ConfusionMatrix::from_parts(
            2,
            MatrixKind::HardNormalized,
            vec![5, 5],
            vec![0.8, 0.2, 0.6, 0.4],
        )
        .unwrap();
        let loss = symmetry_loss(&c, &SymmetryConfig::fixed(0.5).unwrap()).unwrap();
        // |0.2−0.6|/(0.8+0.5)·0.8
        assert!((loss - 0.4 * 0.8 / 1.3).abs() < 1e-12);
        assert!((loss - 0.246154).abs() < 1e-6);
    }

    #[test]
    fn matches_double_loop_reference_on_random_matrix() {
        // Deterministic pseudo-random 10×10 row-stochastic matrix.
        let k = 10;
        let mut entries = vec![0.0; k * k];
        let mut state = 12345u64;
        for row in entries.chunks_mut(k) {
            let mut sum = 0.0;
            for e in row.iter_mut() {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                *e = ((state >> 11) as f64 / (1u64 << 53) as f64) + 1e-3;
                sum += *e;
            }
            row.iter_mut().for_each(|e| *e /= sum);
        }
        let c = soft(k, vec![1; k], entries.clone());
        let cfg = SymmetryConfig::default();
        let eps = cfg.epsilon_for(k);
        let mut reference = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i < j {
                    let a = entries[i * k + j];
                    let b = entries[j * k + i];
                    reference += (a - b).abs() / (a + b + eps) * (a + b);
                }
            }
        }
        let loss = symmetry_loss(&c, &cfg).unwrap();
        assert!((loss - reference).abs() < 1e-12);
    }

    #[test]
    fn gradient_rejects_hard_matrices() {
        let c = ConfusionMatrix::from_parts(
            2,
            MatrixKind::HardNormalized,
            vec![1, 1],
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            symmetry_loss_gradient(&c, &SymmetryConfig::default()),
            Err(Error::Kind(_))
        ));
    }

    #[test]
    fn gradient_zero_on_diagonal_and_at_symmetric_pairs() {
        let c = soft(2, vec![1, 1], vec![0.7, 0.3, 0.3, 0.7]);
        let g = symmetry_loss_gradient(&c, &SymmetryConfig::default()).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences_on_2x2() {
        let cfg = SymmetryConfig::fixed(0.5).unwrap();
        let (a, b) = (0.2f64, 0.6f64);
        let c = soft(2, vec![1, 1], vec![0.8, a, b, 0.4]);
        let g = symmetry_loss_gradient(&c, &cfg).unwrap();
        let h = 1e-7;
        let loss = |a: f64, b: f64| (a - b).abs() * (a + b) / (a + b + 0.5);
        let fd_a = (loss(a + h, b) - loss(a - h, b)) / (2.0 * h);
        let fd_b = (loss(a, b + h) - loss(a, b - h)) / (2.0 * h);
        assert!((g[1] - fd_a).abs() / fd_a.abs() < 1e-4);
        assert!((g[2] - fd_b).abs() / fd_b.abs() < 1e-4);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[3], 0.0);
    }

    proptest! {
        #[test]
        fn loss_is_transpose_invariant(entries in prop::collection::vec(0.0f64..1.0, 16)) {
            let k = 4;
            let mut transposed = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    transposed[j * k + i] = entries[i * k + j];
                }
            }
            let eps = 0.25;
            let l = symmetry_loss_entries(&entries, k, eps).unwrap();
            let lt = symmetry_loss_entries(&transposed, k, eps).unwrap();
            prop_assert!((l - lt).abs() < 1e-12);
        }

        #[test]
        fn scaling_mass_never_reduces_penalty(a in 0.0f64..1.0, b in 0.0f64..1.0, eps in 0.01f64..1.0) {
            prop_assume!((a - b).abs() > 1e-9);
            let mut prev = 0.0;
            for step in 0..=10 {
                let t = step as f64 / 10.0;
                let p = pair_penalty(t * a, t * b, eps).unwrap();
                prop_assert!(p + 1e-12 >= prev, "penalty decreased at t={t}: {p} < {prev}");
                prev = p;
            }
        }
    }
}
