//! Gradient-based adversarial example generation.
//!
//! Three families share one objective convention: the attack *ascends* a
//! per-sample objective that is the cross-entropy of the true label when
//! untargeted, and the negated cross-entropy of the target label when
//! targeted. All attacks are deterministic: a fixed model and batch produce
//! bit-identical outputs.
//!
//! * `pgd_linf` — iterated signed-gradient steps projected onto the ε-ball
//!   around the clean input and onto the [0,1] box.
//! * `masked_patch_attack` — pixels outside a fixed boolean mask are left
//!   bit-identical; masked pixels are re-initialized (constant color or the
//!   best of a candidate list) and refined with ℓ₁-normalized momentum
//!   gradient steps.
//! * `rectangle_occlusion_attack` — exhaustive grid search for the most
//!   damaging rectangle position (scored by loss after a mid-gray fill),
//!   then the masked inner attack at the winning position.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sign, Graph};
use crate::nn::{argmax_lowest, Batch, Model};
use crate::tensor::Tensor;

pub const MID_GRAY: f64 = 0.5;
pub const DEFAULT_COLOR_PALETTE: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

// ---------------------------------------------------------------------------
// Mask
// ---------------------------------------------------------------------------

/// Boolean pixel mask over an H×W image, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    height: usize,
    width: usize,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, cells: Vec<bool>) -> Result<Self> {
        if height * width != cells.len() {
            return Err(Error::shape(format!(
                "mask {}×{} needs {} cells, got {}",
                height,
                width,
                height * width,
                cells.len()
            )));
        }
        Ok(Mask {
            height,
            width,
            cells,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn is_set(&self, idx: usize) -> bool {
        self.cells[idx]
    }

    pub fn any(&self) -> bool {
        self.cells.iter().any(|&c| c)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// Rectangle of `rect_h`×`rect_w` pixels with top-left corner at (y, x).
    pub fn rectangle(
        height: usize,
        width: usize,
        y: usize,
        x: usize,
        rect_h: usize,
        rect_w: usize,
    ) -> Result<Self> {
        if y + rect_h > height || x + rect_w > width {
            return Err(Error::config(format!(
                "rectangle {rect_h}×{rect_w} at ({y},{x}) exceeds {height}×{width} image"
            )));
        }
        let mut cells = vec![false; height * width];
        for dy in 0..rect_h {
            for dx in 0..rect_w {
                cells[(y + dy) * width + (x + dx)] = true;
            }
        }
        Mask::new(height, width, cells)
    }

    /// Eyeglass-style region: a horizontal band across the upper-middle of
    /// the image plus two lens blobs below it.
    pub fn eyeglass(height: usize, width: usize) -> Result<Self> {
        if height < 4 || width < 4 {
            return Err(Error::config("eyeglass mask needs at least a 4×4 image"));
        }
        let mut cells = vec![false; height * width];
        let band_row = height / 4;
        for x in 0..width {
            cells[band_row * width + x] = true;
        }
        let blob_h = (height / 4).max(1);
        let blob_w = (width / 4).max(1);
        let left_x = width / 8;
        let right_x = width - width / 8 - blob_w;
        for dy in 0..blob_h {
            let y = band_row + 1 + dy;
            if y >= height {
                break;
            }
            for dx in 0..blob_w {
                cells[y * width + left_x + dx] = true;
                cells[y * width + right_x + dx] = true;
            }
        }
        Mask::new(height, width, cells)
    }

    /// Parse the PGM-style text format: optional `P1` magic, a `width height`
    /// line, then height rows of width 0/1 entries. `#` comments allowed.
    pub fn from_pgm_str(s: &str) -> Result<Self> {
        let mut tokens = s
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
            .peekable();
        if tokens.peek() == Some(&"P1") {
            tokens.next();
        }
        let mut dims = Vec::with_capacity(2);
        let mut cells = Vec::new();
        for tok in tokens {
            if dims.len() < 2 {
                let d: usize = tok
                    .parse()
                    .map_err(|_| Error::config(format!("bad mask dimension token {tok:?}")))?;
                dims.push(d);
            } else {
                match tok {
                    "0" => cells.push(false),
                    "1" => cells.push(true),
                    other => return Err(Error::config(format!("bad mask cell token {other:?}"))),
                }
            }
        }
        if dims.len() != 2 {
            return Err(Error::config("mask file is missing its dimension line"));
        }
        let (width, height) = (dims[0], dims[1]);
        if width == 0 || height == 0 {
            return Err(Error::config("mask dimensions must be positive"));
        }
        Mask::new(height, width, cells)
    }

    pub fn to_pgm_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "P1");
        let _ = writeln!(out, "{} {}", self.width, self.height);
        for y in 0..self.height {
            let row: Vec<&str> = (0..self.width)
                .map(|x| {
                    if self.cells[y * self.width + x] {
                        "1"
                    } else {
                        "0"
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        Mask::from_pgm_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pgm_string())?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// AttackSpec
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackFamily {
    PgdLinf,
    MaskedPatch,
    RectangleOcclusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMode {
    Untargeted,
    Targeted(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatchInit {
    Zero,
    MidGray,
    BestOfColors(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RectSpec {
    pub height: usize,
    pub width: usize,
    pub stride_y: usize,
    pub stride_x: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub family: AttackFamily,
    /// ℓ∞ budget in input units (PGD only).
    pub epsilon: f64,
    pub step_size: f64,
    pub iterations: usize,
    /// Momentum decay μ for the masked families.
    pub momentum_decay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Mask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rect: Option<RectSpec>,
    pub mode: AttackMode,
    pub init: PatchInit,
}

impl AttackSpec {
    pub fn pgd_linf(epsilon: f64, step_size: f64, iterations: usize) -> Self {
        AttackSpec {
            family: AttackFamily::PgdLinf,
            epsilon,
            step_size,
            iterations,
            momentum_decay: 1.0,
            mask: None,
            rect: None,
            mode: AttackMode::Untargeted,
            init: PatchInit::Zero,
        }
    }

    pub fn masked_patch(mask: Mask, step_size: f64, iterations: usize) -> Self {
        AttackSpec {
            family: AttackFamily::MaskedPatch,
            epsilon: 0.0,
            step_size,
            iterations,
            momentum_decay: 1.0,
            mask: Some(mask),
            rect: None,
            mode: AttackMode::Untargeted,
            init: PatchInit::BestOfColors(DEFAULT_COLOR_PALETTE.to_vec()),
        }
    }

    /// Rectangle occlusion scaled for an H×W input: sides ~25% of the image,
    /// stride ~14%, α = 20/255, 100 iterations, mid-gray occlusion color.
    pub fn rectangle_occlusion(image_h: usize, image_w: usize) -> Self {
        let rect = RectSpec {
            height: (image_h / 4).max(1),
            width: (image_w / 4).max(1),
            stride_y: ((image_h as f64 * 0.14).round() as usize).max(1),
            stride_x: ((image_w as f64 * 0.14).round() as usize).max(1),
        };
        AttackSpec {
            family: AttackFamily::RectangleOcclusion,
            epsilon: 0.0,
            step_size: 20.0 / 255.0,
            iterations: 100,
            momentum_decay: 1.0,
            mask: None,
            rect: Some(rect),
            mode: AttackMode::Untargeted,
            init: PatchInit::MidGray,
        }
    }

    pub fn targeted(mut self, target: usize) -> Self {
        self.mode = AttackMode::Targeted(target);
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    /// Validate against an input width (and image geometry for the spatial
    /// families).
    pub fn validate(&self, input_dim: usize, image_hw: Option<(usize, usize)>) -> Result<()> {
        if !self.step_size.is_finite() || self.step_size < 0.0 {
            return Err(Error::config("step size must be finite and >= 0"));
        }
        if !(self.momentum_decay >= 0.0) {
            return Err(Error::config("momentum decay must be >= 0"));
        }
        match self.family {
            AttackFamily::PgdLinf => {
                if !(self.epsilon > 0.0) {
                    return Err(Error::config("pgd-linf requires epsilon > 0"));
                }
            }
            AttackFamily::MaskedPatch => {
                let mask = self
                    .mask
                    .as_ref()
                    .ok_or_else(|| Error::config("masked-patch requires a mask"))?;
                if !mask.any() {
                    return Err(Error::config("masked-patch mask selects no pixels"));
                }
                if mask.len() != input_dim {
                    return Err(Error::config(format!(
                        "mask covers {} pixels but inputs have {} features",
                        mask.len(),
                        input_dim
                    )));
                }
            }
            AttackFamily::RectangleOcclusion => {
                let rect = self
                    .rect
                    .as_ref()
                    .ok_or_else(|| Error::config("rectangle-occlusion requires a rect"))?;
                let (h, w) = image_hw.ok_or_else(|| {
                    Error::config("rectangle-occlusion requires image dimensions")
                })?;
                if h * w != input_dim {
                    return Err(Error::config(format!(
                        "image {h}×{w} does not match {input_dim} input features"
                    )));
                }
                if rect.height == 0 || rect.width == 0 {
                    return Err(Error::config("rectangle sides must be positive"));
                }
                if rect.height > h || rect.width > w {
                    return Err(Error::config(format!(
                        "rectangle {}×{} does not fit inside {h}×{w} image",
                        rect.height, rect.width
                    )));
                }
                if rect.stride_y == 0 || rect.stride_x == 0 {
                    return Err(Error::config("rectangle strides must be positive"));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Objective helpers
// ---------------------------------------------------------------------------

fn effective_labels(batch: &Batch, mode: &AttackMode, num_classes: usize) -> Result<Vec<usize>> {
    match mode {
        AttackMode::Untargeted => Ok(batch.labels.clone()),
        AttackMode::Targeted(t) => {
            if *t >= num_classes {
                return Err(Error::config(format!(
                    "target class {t} out of range for {num_classes} classes"
                )));
            }
            Ok(vec![*t; batch.size()])
        }
    }
}

/// Per-sample attack objective: CE of the true label (untargeted) or −CE of
/// the target label (targeted). Attacks ascend this.
fn per_sample_objective(
    model: &Model,
    inputs: &Tensor,
    batch: &Batch,
    mode: &AttackMode,
) -> Result<Vec<f64>> {
    let labels = effective_labels(batch, mode, model.num_classes())?;
    let logits = model.logits(inputs)?;
    let (rows, cols) = logits.dims2()?;
    let mut per = vec![0.0; rows];
    crate::graph::cross_entropy_per_sample(logits.values(), rows, cols, &labels, &mut per);
    if matches!(mode, AttackMode::Targeted(_)) {
        per.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(per)
}

/// Gradient of the per-sample attack objective with respect to the inputs.
fn objective_input_gradient(
    model: &Model,
    inputs: &Tensor,
    batch: &Batch,
    mode: &AttackMode,
) -> Result<Vec<f64>> {
    let labels = effective_labels(batch, mode, model.num_classes())?;
    let mut g = Graph::new();
    let x = g.input_tensor(inputs)?;
    let (logits, _params) = model.forward(&mut g, x)?;
    let ce = g.mean_cross_entropy(logits, &labels)?;
    g.backward(ce)?;
    let mut grad = g.grad(x)?.to_vec();
    // Mean CE divides by B; undo that so samples stay independent, and flip
    // the sign for targeted mode (ascend −CE(target)).
    let b = batch.size() as f64;
    let factor = if matches!(mode, AttackMode::Targeted(_)) {
        -b
    } else {
        b
    };
    grad.iter_mut().for_each(|v| *v *= factor);
    Ok(grad)
}

fn check_inputs_in_box(inputs: &Tensor) -> Result<()> {
    if inputs
        .values()
        .iter()
        .any(|&v| !(v >= -1e-12 && v <= 1.0 + 1e-12))
    {
        return Err(Error::domain("attack inputs must lie in [0,1]"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// PGD-ℓ∞
// ---------------------------------------------------------------------------

pub fn pgd_linf(model: &Model, batch: &Batch, spec: &AttackSpec) -> Result<Tensor> {
    if spec.family != AttackFamily::PgdLinf {
        return Err(Error::config("spec family is not pgd-linf"));
    }
    spec.validate(model.input_dim(), None)?;
    check_inputs_in_box(&batch.inputs)?;
    let (rows, cols) = batch.inputs.dims2()?;
    let clean = batch.inputs.values();
    let mut x = clean.to_vec();
    for _ in 0..spec.iterations {
        let current = Tensor::matrix(rows, cols, x.clone())?;
        let grad = objective_input_gradient(model, &current, batch, &spec.mode)?;
        for i in 0..x.len() {
            let stepped = x[i] + spec.step_size * sign(grad[i]);
            let lo = (clean[i] - spec.epsilon).max(0.0);
            let hi = (clean[i] + spec.epsilon).min(1.0);
            x[i] = stepped.clamp(lo, hi);
        }
    }
    Tensor::matrix(rows, cols, x)
}

// ---------------------------------------------------------------------------
// Masked attacks
// ---------------------------------------------------------------------------

enum MaskSel<'a> {
    Shared(&'a Mask),
    PerSample(&'a [Mask]),
}

impl MaskSel<'_> {
    fn for_sample(&self, b: usize) -> &Mask {
        match self {
            MaskSel::Shared(m) => m,
            MaskSel::PerSample(ms) => &ms[b],
        }
    }
}

/// Momentum-stabilized signed ascent restricted to masked coordinates:
/// g ← μ·g + ∇/‖∇‖₁, x ← clip₀₁(x + α·sign(g)).
fn momentum_masked_ascent(
    model: &Model,
    batch: &Batch,
    x: &mut [f64],
    masks: &MaskSel,
    spec: &AttackSpec,
) -> Result<()> {
    let (rows, cols) = batch.inputs.dims2()?;
    let mut momentum = vec![0.0; x.len()];
    for _ in 0..spec.iterations {
        let current = Tensor::matrix(rows, cols, x.to_vec())?;
        let grad = objective_input_gradient(model, &current, batch, &spec.mode)?;
        for b in 0..rows {
            let mask = masks.for_sample(b);
            let row = &mut x[b * cols..(b + 1) * cols];
            let grow = &grad[b * cols..(b + 1) * cols];
            let mrow = &mut momentum[b * cols..(b + 1) * cols];
            let l1: f64 = (0..cols)
                .filter(|&i| mask.is_set(i))
                .map(|i| grow[i].abs())
                .sum();
            for i in 0..cols {
                if !mask.is_set(i) {
                    continue;
                }
                let normalized = if l1 > 0.0 { grow[i] / l1 } else { grow[i] };
                mrow[i] = spec.momentum_decay * mrow[i] + normalized;
                row[i] = (row[i] + spec.step_size * sign(mrow[i])).clamp(0.0, 1.0);
            }
        }
    }
    Ok(())
}

/// Fill masked coordinates with a constant color.
fn fill_masked(x: &mut [f64], cols: usize, masks: &MaskSel, color: f64) {
    let rows = x.len() / cols;
    for b in 0..rows {
        let mask = masks.for_sample(b);
        for i in 0..cols {
            if mask.is_set(i) {
                x[b * cols + i] = color;
            }
        }
    }
}

/// Per-sample best initialization color: the candidate attaining the maximum
/// initial attack objective (ties break to the earliest candidate).
fn init_best_colors(
    model: &Model,
    batch: &Batch,
    x: &mut [f64],
    masks: &MaskSel,
    colors: &[f64],
    mode: &AttackMode,
) -> Result<()> {
    if colors.is_empty() {
        return Err(Error::config("best-of-colors needs a non-empty palette"));
    }
    let (rows, cols) = batch.inputs.dims2()?;
    let mut best_scores = vec![f64::NEG_INFINITY; rows];
    let mut best_colors = vec![colors[0]; rows];
    for &color in colors {
        if !(0.0..=1.0).contains(&color) {
            return Err(Error::config(format!(
                "palette color {color} outside [0,1]"
            )));
        }
        let mut candidate = x.to_vec();
        fill_masked(&mut candidate, cols, masks, color);
        let t = Tensor::matrix(rows, cols, candidate)?;
        let scores = per_sample_objective(model, &t, batch, mode)?;
        for b in 0..rows {
            if scores[b] > best_scores[b] {
                best_scores[b] = scores[b];
                best_colors[b] = color;
            }
        }
    }
    for b in 0..rows {
        let mask = masks.for_sample(b);
        for i in 0..cols {
            if mask.is_set(i) {
                x[b * cols + i] = best_colors[b];
            }
        }
    }
    Ok(())
}

pub fn masked_patch_attack(model: &Model, batch: &Batch, spec: &AttackSpec) -> Result<Tensor> {
    if spec.family != AttackFamily::MaskedPatch {
        return Err(Error::config("spec family is not masked-patch"));
    }
    spec.validate(model.input_dim(), None)?;
    check_inputs_in_box(&batch.inputs)?;
    let (rows, cols) = batch.inputs.dims2()?;
    let mask = spec.mask.as_ref().expect("validated above");
    let sel = MaskSel::Shared(mask);
    let mut x = batch.inputs.values().to_vec();
    match &spec.init {
        PatchInit::Zero => fill_masked(&mut x, cols, &sel, 0.0),
        PatchInit::MidGray => fill_masked(&mut x, cols, &sel, MID_GRAY),
        PatchInit::BestOfColors(colors) => {
            init_best_colors(model, batch, &mut x, &sel, colors, &spec.mode)?
        }
    }
    momentum_masked_ascent(model, batch, &mut x, &sel, spec)?;
    Tensor::matrix(rows, cols, x)
}

// ---------------------------------------------------------------------------
// Rectangle occlusion
// ---------------------------------------------------------------------------

fn rect_positions(image: usize, side: usize, stride: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos + side <= image {
        out.push(pos);
        pos += stride;
    }
    out
}

pub fn rectangle_occlusion_attack(
    model: &Model,
    batch: &Batch,
    spec: &AttackSpec,
    image_hw: (usize, usize),
) -> Result<Tensor> {
    if spec.family != AttackFamily::RectangleOcclusion {
        return Err(Error::config("spec family is not rectangle-occlusion"));
    }
    spec.validate(model.input_dim(), Some(image_hw))?;
    check_inputs_in_box(&batch.inputs)?;
    let (h, w) = image_hw;
    let rect = spec.rect.as_ref().expect("validated above");
    let (rows, cols) = batch.inputs.dims2()?;

    // Grid search: score each position by the attack objective after a
    // mid-gray fill, independently per sample.
    let ys = rect_positions(h, rect.height, rect.stride_y);
    let xs = rect_positions(w, rect.width, rect.stride_x);
    let mut best_scores = vec![f64::NEG_INFINITY; rows];
    let mut best_pos = vec![(0usize, 0usize); rows];
    for &y in &ys {
        for &x0 in &xs {
            let mask = Mask::rectangle(h, w, y, x0, rect.height, rect.width)?;
            let sel = MaskSel::Shared(&mask);
            let mut candidate = batch.inputs.values().to_vec();
            fill_masked(&mut candidate, cols, &sel, MID_GRAY);
            let t = Tensor::matrix(rows, cols, candidate)?;
            let scores = per_sample_objective(model, &t, batch, &spec.mode)?;
            for b in 0..rows {
                if scores[b] > best_scores[b] {
                    best_scores[b] = scores[b];
                    best_pos[b] = (y, x0);
                }
            }
        }
    }

    let masks: Vec<Mask> = best_pos
        .iter()
        .map(|&(y, x0)| Mask::rectangle(h, w, y, x0, rect.height, rect.width))
        .collect::<Result<_>>()?;
    let sel = MaskSel::PerSample(&masks);
    let mut x = batch.inputs.values().to_vec();
    fill_masked(&mut x, cols, &sel, MID_GRAY);
    momentum_masked_ascent(model, batch, &mut x, &sel, spec)?;
    Tensor::matrix(rows, cols, x)
}

/// Dispatch on the spec family. `image_hw` is only needed for
/// rectangle-occlusion.
pub fn run_attack(
    model: &Model,
    batch: &Batch,
    spec: &AttackSpec,
    image_hw: Option<(usize, usize)>,
) -> Result<Tensor> {
    match spec.family {
        AttackFamily::PgdLinf => pgd_linf(model, batch, spec),
        AttackFamily::MaskedPatch => masked_patch_attack(model, batch, spec),
        AttackFamily::RectangleOcclusion => {
            let hw = image_hw
                .ok_or_else(|| Error::config("rectangle-occlusion requires image dimensions"))?;
            rectangle_occlusion_attack(model, batch, spec, hw)
        }
    }
}

// ---------------------------------------------------------------------------
// Success rate
// ---------------------------------------------------------------------------

/// Untargeted: fraction of samples whose adversarial argmax differs from the
/// true label. Targeted: fraction classified as the target.
pub fn attack_success_rate(
    model: &Model,
    clean_batch: &Batch,
    adv_inputs: &Tensor,
    mode: &AttackMode,
) -> Result<f64> {
    let (rows, _) = adv_inputs.dims2()?;
    if rows != clean_batch.size() {
        return Err(Error::shape(format!(
            "adversarial batch has {rows} rows but clean batch has {}",
            clean_batch.size()
        )));
    }
    let logits = model.logits(adv_inputs)?;
    let (_, cols) = logits.dims2()?;
    let mut hits = 0usize;
    for (b, &y) in clean_batch.labels.iter().enumerate() {
        let pred = argmax_lowest(&logits.values()[b * cols..(b + 1) * cols]);
        let success = match mode {
            AttackMode::Untargeted => pred != y,
            AttackMode::Targeted(t) => pred == *t,
        };
        if success {
            hits += 1;
        }
    }
    Ok(hits as f64 / rows as f64)
}
