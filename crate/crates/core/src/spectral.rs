//! Largest singular value of the off-diagonal confusion mass, via power
//! iteration on MᵀM.

use crate::error::{Error, Result};

const REL_TOLERANCE: f64 = 1e-8;
const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone)]
pub struct SpectralNorm {
    /// σ_max of the off-diagonal part.
    pub value: f64,
    /// Left singular vector u (zeros when the matrix is zero).
    pub left: Vec<f64>,
    /// Right singular vector v.
    pub right: Vec<f64>,
    pub iterations: usize,
}

/// σ_max of `entries` (K×K row-major) with its diagonal zeroed.
///
/// The gradient of σ_max with respect to the matrix is the outer product
/// u·vᵀ of the returned singular vectors.
pub fn spectral_norm_off_diagonal(entries: &[f64], k: usize) -> Result<SpectralNorm> {
    if entries.len() != k * k {
        return Err(Error::shape(format!(
            "expected {}×{} entries, got {}",
            k,
            k,
            entries.len()
        )));
    }
    let mut m = entries.to_vec();
    for i in 0..k {
        m[i * k + i] = 0.0;
    }
    if m.iter().all(|&v| v == 0.0) {
        return Ok(SpectralNorm {
            value: 0.0,
            left: vec![0.0; k],
            right: vec![0.0; k],
            iterations: 0,
        });
    }

    // Deterministic pseudo-random start so a structured top singular vector
    // cannot be orthogonal to it by accident.
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut v: Vec<f64> = (0..k)
        .map(|_| {
            state = state.wrapping_mul(0x5851_f42d_4c95_7f2d).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect();
    normalize(&mut v);

    let mut mv = vec![0.0; k];
    let mut w = vec![0.0; k];
    for it in 1..=MAX_ITERATIONS {
        mat_vec(&m, k, &v, &mut mv);
        mat_t_vec(&m, k, &mv, &mut w);
        let norm_w = l2(&w);
        if norm_w == 0.0 {
            // v landed in the null space; restart from a shifted start.
            state = state.wrapping_mul(0x5851_f42d_4c95_7f2d).wrapping_add(1);
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = ((i + 1) as f64).sin() + ((state >> 11) as f64 / (1u64 << 53) as f64);
            }
            normalize(&mut v);
            continue;
        }
        // Rayleigh quotient λ = vᵀ(MᵀM)v and its residual. Stopping on the
        // residual (rather than Δλ) keeps the singular vectors themselves
        // accurate, which the gradient u·vᵀ depends on.
        let lambda: f64 = v.iter().zip(&w).map(|(&a, &b)| a * b).sum();
        let residual: f64 = w
            .iter()
            .zip(&v)
            .map(|(&wi, &vi)| (wi - lambda * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let converged = residual <= REL_TOLERANCE * lambda.max(f64::MIN_POSITIVE);
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm_w;
        }
        if converged {
            mat_vec(&m, k, &v, &mut mv);
            let sigma = l2(&mv);
            let left = if sigma > 0.0 {
                mv.iter().map(|&x| x / sigma).collect()
            } else {
                vec![0.0; k]
            };
            return Ok(SpectralNorm {
                value: sigma,
                left,
                right: v,
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "spectral-norm power iteration".into(),
        iterations: MAX_ITERATIONS,
    })
}

fn mat_vec(m: &[f64], k: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..k {
        let row = &m[i * k..(i + 1) * k];
        out[i] = row.iter().zip(v).map(|(&a, &b)| a * b).sum();
    }
}

fn mat_t_vec(m: &[f64], k: usize, v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..k {
        let row = &m[i * k..(i + 1) * k];
        for j in 0..k {
            out[j] += row[j] * v[i];
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = l2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
