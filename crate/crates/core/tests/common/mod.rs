//! Shared helpers for the integration suites: deterministic pseudo-random
//! streams, finite differences, and a Jacobi eigensolver used as an
//! independent oracle for spectral norms.

#![allow(dead_code)]

use symtrain_core::nn::Model;

/// Splitmix-style LCG stream, good enough for test data.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.next_f64() * n as f64) as usize % n
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Central finite difference of a scalar function of one model parameter.
pub fn fd_param<F: FnMut(&Model) -> f64>(model: &mut Model, index: usize, h: f64, mut f: F) -> f64 {
    let saved = model.get_param(index).unwrap();
    model.set_param(index, saved + h).unwrap();
    let plus = f(model);
    model.set_param(index, saved - h).unwrap();
    let minus = f(model);
    model.set_param(index, saved).unwrap();
    (plus - minus) / (2.0 * h)
}

/// Smallest |pre-activation| across every ReLU in the model for the given
/// input rows. Gradient checks resample when this is tiny: central
/// differences straddle the kink there.
pub fn min_relu_margin(model: &Model, inputs: &[f64], batch: usize) -> f64 {
    let mut margin = f64::INFINITY;
    let mut cur = inputs.to_vec();
    let mut cur_dim = model.input_dim();
    for layer in model.layers() {
        let out_dim = layer.out_dim();
        let mut next = vec![0.0; batch * out_dim];
        for b in 0..batch {
            for o in 0..out_dim {
                let mut acc = layer.bias.values()[o];
                for i in 0..cur_dim {
                    acc += cur[b * cur_dim + i] * layer.weight.values()[o * cur_dim + i];
                }
                next[b * out_dim + o] = acc;
            }
        }
        if layer.activation == symtrain_core::nn::Activation::Relu {
            for &v in &next {
                margin = margin.min(v.abs());
            }
            next.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        cur = next;
        cur_dim = out_dim;
    }
    margin
}

/// Eigenvalues of a symmetric n×n matrix by cyclic Jacobi rotations.
/// Independent of the library's power iteration.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..200 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q] * m[p * n + q];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = m[i * n + p];
                    let aiq = m[i * n + q];
                    m[i * n + p] = c * aip - s * aiq;
                    m[i * n + q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = m[p * n + i];
                    let aqi = m[q * n + i];
                    m[p * n + i] = c * api - s * aqi;
                    m[q * n + i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| m[i * n + i]).collect()
}

/// σ_max of the off-diagonal part via the Jacobi oracle on MᵀM.
pub fn spectral_norm_oracle(entries: &[f64], k: usize) -> f64 {
    let mut m = entries.to_vec();
    for i in 0..k {
        m[i * k + i] = 0.0;
    }
    let mut mtm = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for r in 0..k {
                acc += m[r * k + i] * m[r * k + j];
            }
            mtm[i * k + j] = acc;
        }
    }
    jacobi_eigenvalues(&mtm, k)
        .into_iter()
        .fold(0.0f64, f64::max)
        .max(0.0)
        .sqrt()
}

/// Random row-stochastic matrix with strictly positive entries.
pub fn random_row_stochastic(k: usize, rng: &mut Lcg) -> Vec<f64> {
    let mut entries = vec![0.0; k * k];
    for row in entries.chunks_mut(k) {
        let mut sum = 0.0;
        for e in row.iter_mut() {
            *e = rng.range(0.02, 1.0);
            sum += *e;
        }
        row.iter_mut().for_each(|e| *e /= sum);
    }
    entries
}

/// Symmetrize a matrix in place: C ← (C + Cᵀ)/2.
pub fn symmetrize(entries: &mut [f64], k: usize) {
    for i in 0..k {
        for j in (i + 1)..k {
            let avg = 0.5 * (entries[i * k + j] + entries[j * k + i]);
            entries[i * k + j] = avg;
            entries[j * k + i] = avg;
        }
    }
}
