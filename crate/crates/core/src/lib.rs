//! Desk-scale adversarial-training laboratory with confusion-matrix symmetry
//! regularization.
//!
//! The crate trains small dense classifiers under gradient-based attacks and
//! regularizes the soft confusion matrix of the adversarial batch so that
//! misclassifications from class `i` into class `j` occur about as often as
//! the reverse direction. Around that core sit the pieces needed to study the
//! effect: attack implementations (PGD-ℓ∞, masked-patch, rectangle
//! occlusion), a spectral-norm baseline regularizer, a full fairness-metric
//! suite over confusion matrices, subgroup aggregation with an executable
//! symmetry theorem, and deterministic synthetic data generation.
//!
//! Everything is 64-bit, single-threaded, and reproducible: a seed plus a
//! configuration determines every numeric output bit-for-bit.

pub mod attack;
pub mod confusion;
pub mod data;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod spectral;
pub mod subgroup;
pub mod symmetry;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use tensor::Tensor;
