//! Minimal reverse-mode differentiation over 2-D nodes.
//!
//! A [`Graph`] records operations eagerly (define-by-run): inserting an op
//! computes its value immediately and remembers enough to run the backward
//! pass later. Node ids are indices into an append-only arena, so reverse
//! insertion order is a valid reverse topological order.
//!
//! The op set is exactly what the training objective needs: dense affine
//! layers, ReLU, row softmax, mean cross-entropy from logits, the soft
//! confusion matrix, the pairwise symmetry loss, the spectral norm of the
//! off-diagonal confusion mass, and weighted sums of scalars.

use crate::error::{Error, Result};
use crate::spectral;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    /// x·wᵀ + b with x: B×I, w: O×I, b: 1×O.
    Linear {
        x: NodeId,
        w: NodeId,
        b: NodeId,
    },
    Relu {
        x: NodeId,
    },
    SoftmaxRows {
        x: NodeId,
    },
    /// Mean over the batch of −log softmax(z)[label], fused from logits.
    MeanCrossEntropy {
        logits: NodeId,
        labels: Vec<usize>,
    },
    /// K×K matrix whose row i is the mean probability vector of samples with
    /// label i (rows of absent classes are zero).
    SoftConfusion {
        probs: NodeId,
        labels: Vec<usize>,
    },
    /// Σ_{i<j} |C_ij−C_ji|·(C_ij+C_ji)/(C_ij+C_ji+ε).
    SymmetryLoss {
        c: NodeId,
        epsilon: f64,
    },
    /// Largest singular value of C with its diagonal zeroed; the singular
    /// vectors are cached at forward time for the backward outer product.
    SpectralOffDiagonal {
        c: NodeId,
        left: Vec<f64>,
        right: Vec<f64>,
    },
    /// Σ coefficient_i · scalar_i.
    WeightedSum {
        terms: Vec<(NodeId, f64)>,
    },
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    grad: Vec<f64>,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Strict sign: 0 at exactly 0, unlike `f64::signum`.
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// Shared forward kernels. `nn::Model::logits` reuses these so the pure
// forward path is bit-identical to the recorded one.
// ---------------------------------------------------------------------------

pub(crate) fn linear_forward(
    x: &[f64],
    batch: usize,
    in_dim: usize,
    w: &[f64],
    out_dim: usize,
    bias: &[f64],
    out: &mut [f64],
) {
    for b in 0..batch {
        let xr = &x[b * in_dim..(b + 1) * in_dim];
        let or = &mut out[b * out_dim..(b + 1) * out_dim];
        for o in 0..out_dim {
            let wr = &w[o * in_dim..(o + 1) * in_dim];
            let mut acc = bias[o];
            for i in 0..in_dim {
                acc += xr[i] * wr[i];
            }
            or[o] = acc;
        }
    }
}

pub(crate) fn relu_forward(x: &[f64], out: &mut [f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o = if v > 0.0 { v } else { 0.0 };
    }
}

/// Row-stabilized softmax. Errors on non-finite input.
pub(crate) fn softmax_rows_forward(
    x: &[f64],
    rows: usize,
    cols: usize,
    out: &mut [f64],
) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("softmax input contains NaN or Inf"));
    }
    for r in 0..rows {
        let xr = &x[r * cols..(r + 1) * cols];
        let or = &mut out[r * cols..(r + 1) * cols];
        let max = xr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, &v) in or.iter_mut().zip(xr) {
            let e = (v - max).exp();
            *o = e;
            sum += e;
        }
        for o in or.iter_mut() {
            *o /= sum;
        }
    }
    Ok(())
}

/// Per-sample −log softmax(z)[label], computed stably from logits.
pub(crate) fn cross_entropy_per_sample(
    logits: &[f64],
    rows: usize,
    cols: usize,
    labels: &[usize],
    out: &mut [f64],
) {
    for r in 0..rows {
        let zr = &logits[r * cols..(r + 1) * cols];
        let max = zr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = zr.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        out[r] = lse - zr[labels[r]];
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    fn push(&mut self, rows: usize, cols: usize, values: Vec<f64>, op: Op) -> NodeId {
        debug_assert_eq!(rows * cols, values.len());
        let id = NodeId(self.nodes.len());
        let len = values.len();
        self.nodes.push(Node {
            rows,
            cols,
            values,
            grad: vec![0.0; len],
            op,
        });
        // A new node invalidates a previous backward pass.
        self.backward_done = false;
        id
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        self.nodes
            .get(id.0)
            .ok_or_else(|| Error::state(format!("node {} is not part of this graph", id.0)))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dims(&self, id: NodeId) -> Result<(usize, usize)> {
        let n = self.node(id)?;
        Ok((n.rows, n.cols))
    }

    pub fn values(&self, id: NodeId) -> Result<&[f64]> {
        Ok(&self.node(id)?.values)
    }

    pub fn scalar(&self, id: NodeId) -> Result<f64> {
        let n = self.node(id)?;
        if n.values.len() != 1 {
            return Err(Error::shape(format!(
                "node is {}×{}, not a scalar",
                n.rows, n.cols
            )));
        }
        Ok(n.values[0])
    }

    /// Gradient of the last backward root with respect to this node.
    /// Calling this before `backward` is a state error.
    pub fn grad(&self, id: NodeId) -> Result<&[f64]> {
        if !self.backward_done {
            return Err(Error::state(
                "gradients requested before backward ran on this graph",
            ));
        }
        Ok(&self.node(id)?.grad)
    }

    // -- node constructors --------------------------------------------------

    pub fn input(&mut self, rows: usize, cols: usize, values: Vec<f64>) -> Result<NodeId> {
        if rows * cols != values.len() {
            return Err(Error::shape(format!(
                "input declared {}×{} but carries {} values",
                rows,
                cols,
                values.len()
            )));
        }
        Ok(self.push(rows, cols, values, Op::Input))
    }

    pub fn input_tensor(&mut self, t: &Tensor) -> Result<NodeId> {
        let (r, c) = t.dims2()?;
        self.input(r, c, t.values().to_vec())
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (batch, in_dim) = self.dims(x)?;
        let (out_dim, w_in) = self.dims(w)?;
        let (b_rows, b_cols) = self.dims(b)?;
        if w_in != in_dim {
            return Err(Error::shape(format!(
                "linear: input width {in_dim} does not match weight width {w_in}"
            )));
        }
        if b_rows != 1 || b_cols != out_dim {
            return Err(Error::shape(format!(
                "linear: bias is {b_rows}×{b_cols}, expected 1×{out_dim}"
            )));
        }
        let mut out = vec![0.0; batch * out_dim];
        linear_forward(
            self.values(x)?,
            batch,
            in_dim,
            self.values(w)?,
            out_dim,
            self.values(b)?,
            &mut out,
        );
        Ok(self.push(batch, out_dim, out, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let (r, c) = self.dims(x)?;
        let mut out = vec![0.0; r * c];
        relu_forward(self.values(x)?, &mut out);
        Ok(self.push(r, c, out, Op::Relu { x }))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let (r, c) = self.dims(x)?;
        let mut out = vec![0.0; r * c];
        softmax_rows_forward(self.values(x)?, r, c, &mut out)?;
        Ok(self.push(r, c, out, Op::SoftmaxRows { x }))
    }

    pub fn mean_cross_entropy(&mut self, logits: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (rows, cols) = self.dims(logits)?;
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "cross-entropy: {} labels for {} rows",
                labels.len(),
                rows
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= cols) {
            return Err(Error::domain(format!(
                "cross-entropy: label {bad} out of range for {cols} classes"
            )));
        }
        let mut per = vec![0.0; rows];
        cross_entropy_per_sample(self.values(logits)?, rows, cols, labels, &mut per);
        let mean = per.iter().sum::<f64>() / rows as f64;
        Ok(self.push(
            1,
            1,
            vec![mean],
            Op::MeanCrossEntropy {
                logits,
                labels: labels.to_vec(),
            },
        ))
    }

    pub fn soft_confusion(&mut self, probs: NodeId, labels: &[usize]) -> Result<NodeId> {
        let (rows, k) = self.dims(probs)?;
        if labels.len() != rows {
            return Err(Error::shape(format!(
                "soft confusion: {} labels for {} rows",
                labels.len(),
                rows
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::domain(format!(
                "soft confusion: label {bad} out of range for {k} classes"
            )));
        }
        let p = self.values(probs)?;
        let mut counts = vec![0usize; k];
        let mut entries = vec![0.0; k * k];
        for (b, &y) in labels.iter().enumerate() {
            counts[y] += 1;
            for j in 0..k {
                entries[y * k + j] += p[b * k + j];
            }
        }
        for (i, &n) in counts.iter().enumerate() {
            let denom = n.max(1) as f64;
            for j in 0..k {
                entries[i * k + j] /= denom;
            }
        }
        Ok(self.push(
            k,
            k,
            entries,
            Op::SoftConfusion {
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    pub fn symmetry_loss(&mut self, c: NodeId, epsilon: f64) -> Result<NodeId> {
        let (rows, cols) = self.dims(c)?;
        if rows != cols {
            return Err(Error::shape(format!(
                "symmetry loss needs a square matrix, got {rows}×{cols}"
            )));
        }
        if rows < 2 {
            return Err(Error::domain("symmetry loss needs at least 2 classes"));
        }
        if !(epsilon > 0.0) {
            return Err(Error::domain("symmetry epsilon must be positive"));
        }
        let k = rows;
        let v = self.values(c)?;
        let mut loss = 0.0;
        for i in 0..k {
            for j in (i + 1)..k {
                let a = v[i * k + j];
                let b = v[j * k + i];
                let s = a + b;
                loss += (a - b).abs() * s / (s + epsilon);
            }
        }
        Ok(self.push(1, 1, vec![loss], Op::SymmetryLoss { c, epsilon }))
    }

    pub fn spectral_off_diagonal(&mut self, c: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.dims(c)?;
        if rows != cols {
            return Err(Error::shape(format!(
                "spectral penalty needs a square matrix, got {rows}×{cols}"
            )));
        }
        let norm = spectral::spectral_norm_off_diagonal(self.values(c)?, rows)?;
        Ok(self.push(
            1,
            1,
            vec![norm.value],
            Op::SpectralOffDiagonal {
                c,
                left: norm.left,
                right: norm.right,
            },
        ))
    }

    pub fn weighted_sum(&mut self, terms: &[(NodeId, f64)]) -> Result<NodeId> {
        let mut total = 0.0;
        for &(id, coeff) in terms {
            total += coeff * self.scalar(id)?;
        }
        Ok(self.push(
            1,
            1,
            vec![total],
            Op::WeightedSum {
                terms: terms.to_vec(),
            },
        ))
    }

    // -- backward -----------------------------------------------------------

    /// Reverse pass from a scalar root. Populates `grad` for every node the
    /// root depends on; other gradients are zero.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::state("backward on an empty graph (no forward ran)"));
        }
        if root.0 >= self.nodes.len() {
            return Err(Error::state(format!(
                "backward root {} is not part of this graph",
                root.0
            )));
        }
        if self.nodes[root.0].values.len() != 1 {
            return Err(Error::shape("backward root must be a scalar"));
        }
        for n in &mut self.nodes {
            n.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[root.0].grad[0] = 1.0;

        for id in (0..=root.0).rev() {
            // Split the arena so the current node's grad can be read while
            // earlier nodes' grads are written.
            let (earlier, rest) = self.nodes.split_at_mut(id);
            let node = &rest[0];
            if node.grad.iter().all(|&g| g == 0.0) {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Linear { x, w, b } => {
                    let (x, w, b) = (x.0, w.0, b.0);
                    let batch = node.rows;
                    let out_dim = node.cols;
                    let in_dim = earlier[x].cols;
                    let dy = &node.grad;
                    // Clone the forward values we need; the borrows below
                    // would otherwise conflict with the writes.
                    let xv = earlier[x].values.clone();
                    let wv = earlier[w].values.clone();
                    for bi in 0..batch {
                        for o in 0..out_dim {
                            let g = dy[bi * out_dim + o];
                            if g == 0.0 {
                                continue;
                            }
                            earlier[b].grad[o] += g;
                            for i in 0..in_dim {
                                earlier[w].grad[o * in_dim + i] += g * xv[bi * in_dim + i];
                                earlier[x].grad[bi * in_dim + i] += g * wv[o * in_dim + i];
                            }
                        }
                    }
                }
                Op::Relu { x } => {
                    let xn = &mut earlier[x.0];
                    for i in 0..node.grad.len() {
                        if xn.values[i] > 0.0 {
                            xn.grad[i] += node.grad[i];
                        }
                    }
                }
                Op::SoftmaxRows { x } => {
                    let xn = &mut earlier[x.0];
                    let cols = node.cols;
                    for r in 0..node.rows {
                        let p = &node.values[r * cols..(r + 1) * cols];
                        let dy = &node.grad[r * cols..(r + 1) * cols];
                        let dot: f64 = p.iter().zip(dy).map(|(&pi, &gi)| pi * gi).sum();
                        let dx = &mut xn.grad[r * cols..(r + 1) * cols];
                        for j in 0..cols {
                            dx[j] += p[j] * (dy[j] - dot);
                        }
                    }
                }
                Op::MeanCrossEntropy { logits, labels } => {
                    let g = node.grad[0];
                    let zn = &mut earlier[logits.0];
                    let (rows, cols) = (zn.rows, zn.cols);
                    let scale = g / rows as f64;
                    for r in 0..rows {
                        let zr = &zn.values[r * cols..(r + 1) * cols];
                        let max = zr.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let mut exps: Vec<f64> = zr.iter().map(|&v| (v - max).exp()).collect();
                        let sum: f64 = exps.iter().sum();
                        exps.iter_mut().for_each(|e| *e /= sum);
                        let dz = &mut zn.grad[r * cols..(r + 1) * cols];
                        for j in 0..cols {
                            let indicator = if j == labels[r] { 1.0 } else { 0.0 };
                            dz[j] += scale * (exps[j] - indicator);
                        }
                    }
                }
                Op::SoftConfusion { probs, labels } => {
                    let k = node.cols;
                    let mut counts = vec![0usize; k];
                    for &y in labels {
                        counts[y] += 1;
                    }
                    let pn = &mut earlier[probs.0];
                    for (b, &y) in labels.iter().enumerate() {
                        let denom = counts[y].max(1) as f64;
                        for j in 0..k {
                            pn.grad[b * k + j] += node.grad[y * k + j] / denom;
                        }
                    }
                }
                Op::SymmetryLoss { c, epsilon } => {
                    let g = node.grad[0];
                    let cn = &mut earlier[c.0];
                    let k = cn.rows;
                    for i in 0..k {
                        for j in (i + 1)..k {
                            let a = cn.values[i * k + j];
                            let b = cn.values[j * k + i];
                            let d = a - b;
                            let s = a + b;
                            let t = s + epsilon;
                            // penalty = |d|·s/t; the |d| kink takes
                            // subgradient 0 at d = 0.
                            let common = d.abs() * epsilon / (t * t);
                            cn.grad[i * k + j] += g * (sign(d) * s / t + common);
                            cn.grad[j * k + i] += g * (-sign(d) * s / t + common);
                        }
                    }
                }
                Op::SpectralOffDiagonal { c, left, right } => {
                    let g = node.grad[0];
                    let cn = &mut earlier[c.0];
                    let k = cn.rows;
                    for i in 0..k {
                        for j in 0..k {
                            if i != j {
                                cn.grad[i * k + j] += g * left[i] * right[j];
                            }
                        }
                    }
                }
                Op::WeightedSum { terms } => {
                    let g = node.grad[0];
                    for &(id, coeff) in terms {
                        earlier[id.0].grad[0] += g * coeff;
                    }
                }
            }
        }
        self.backward_done = true;
        Ok(())
    }
}
