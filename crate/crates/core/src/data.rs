//! Dataset generation, CSV ingestion, and seeded stratified splits.
//!
//! The synthetic task is K Gaussian clusters clipped to the unit box, with
//! optional "sibling" class pairs whose centers are interpolated toward each
//! other: at overlap 1 the pair is indistinguishable, which caps any
//! classifier at 50% accuracy on the pair. The desk default is six classes of
//! 8×8 "images" with one sibling pair, so masked and rectangle attacks have
//! spatial structure to work with.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Batch;
use crate::rng::derive_seed;
use crate::tensor::Tensor;

/// attribute name → value, per class.
pub type AttributeMap = BTreeMap<usize, BTreeMap<String, String>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
    pub k: usize,
    pub splits: Option<SplitIndices>,
    pub attributes: Option<AttributeMap>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiblingPair {
    pub a: usize,
    pub b: usize,
    /// 0 leaves the pair untouched; 1 makes the cluster centers coincide.
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub k: usize,
    pub dims: usize,
    pub samples_per_class: usize,
    pub cluster_spread: f64,
    pub sibling_pairs: Vec<SiblingPair>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            k: 6,
            dims: 64,
            samples_per_class: 300,
            cluster_spread: 0.12,
            sibling_pairs: vec![SiblingPair {
                a: 0,
                b: 1,
                overlap: 0.7,
            }],
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.dims == 0 || self.samples_per_class == 0 {
            return Err(Error::config(
                "k, dims, and samples_per_class must be positive",
            ));
        }
        if !(self.cluster_spread > 0.0) || !self.cluster_spread.is_finite() {
            return Err(Error::config("cluster_spread must be positive"));
        }
        for p in &self.sibling_pairs {
            if p.a >= self.k || p.b >= self.k || p.a == p.b {
                return Err(Error::config(format!(
                    "sibling pair ({}, {}) invalid for k = {}",
                    p.a, p.b, self.k
                )));
            }
            if !(0.0..=1.0).contains(&p.overlap) {
                return Err(Error::config("sibling overlap must lie in [0,1]"));
            }
        }
        Ok(())
    }
}

/// One standard normal draw (Box-Muller, two uniforms per call).
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "synthetic"));
    let (k, d) = (spec.k, spec.dims);

    // Centers in the interior so the spread rarely clips.
    let mut centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(0.25..0.75)).collect())
        .collect();
    // Sibling overlap is subspace-structured: a fraction `overlap` of the
    // coordinates collapses to the shared midpoint, the rest keep their full
    // separation. The pair then agrees almost everywhere and differs only in
    // a few localized features, and overlap 1 still means coincident
    // centers.
    for pair in &spec.sibling_pairs {
        let shared = ((pair.overlap * d as f64).round() as usize).min(d);
        let mut coords: Vec<usize> = (0..d).collect();
        for i in (1..coords.len()).rev() {
            let j = rng.random_range(0..=i);
            coords.swap(i, j);
        }
        for &j in coords.iter().take(shared) {
            let mid = 0.5 * (centers[pair.a][j] + centers[pair.b][j]);
            centers[pair.a][j] = mid;
            centers[pair.b][j] = mid;
        }
    }

    // Diagonal covariance with per-class, per-coordinate scales in
    // [0.5, 1.5]·cluster_spread. Isotropic clusters give every sample the
    // same margin, which is nothing like real data; the anisotropy spreads
    // the margins out. Sibling pairs share their scales so that at overlap 1
    // the two classes are identically distributed.
    let mut scales: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(0.5..1.5)).collect())
        .collect();
    for pair in &spec.sibling_pairs {
        scales[pair.b] = scales[pair.a].clone();
    }

    let n = k * spec.samples_per_class;
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for class in 0..k {
        for _ in 0..spec.samples_per_class {
            labels.push(class);
            for j in 0..d {
                let v = centers[class][j]
                    + spec.cluster_spread * scales[class][j] * standard_normal(&mut rng);
                values.push(v.clamp(0.0, 1.0));
            }
        }
    }
    Ok(Dataset {
        inputs: Tensor::matrix(n, d, values)?,
        labels,
        k,
        splits: None,
        attributes: None,
    })
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputScale {
    /// Features already in [0,1].
    Unit,
    /// Features in [0,255]; divided by 255 on load.
    Byte,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Expected class count; inferred as max(label)+1 when absent.
    pub num_classes: Option<usize>,
    /// Expected feature count; inferred from the first row when absent.
    pub dims: Option<usize>,
    pub scale: InputScale,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            num_classes: None,
            dims: None,
            scale: InputScale::Unit,
        }
    }
}

/// Each row: integer label, then D features. Malformed rows are collected
/// and reported together with their 1-based line numbers.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    load_csv_str(&text, schema)
}

pub fn load_csv_str(text: &str, schema: &CsvSchema) -> Result<Dataset> {
    let limit = match schema.scale {
        InputScale::Unit => 1.0,
        InputScale::Byte => 255.0,
    };
    let mut dims = schema.dims;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut bad_lines = Vec::new();
    let mut messages = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            bad_lines.push(lineno);
            messages.push(format!("line {lineno}: expected label plus features"));
            continue;
        }
        let label: usize = match fields[0].parse() {
            Ok(l) => l,
            Err(_) => {
                bad_lines.push(lineno);
                messages.push(format!("line {lineno}: bad label {:?}", fields[0]));
                continue;
            }
        };
        let d = fields.len() - 1;
        match dims {
            None => dims = Some(d),
            Some(expected) if expected != d => {
                bad_lines.push(lineno);
                messages.push(format!("line {lineno}: {d} features, expected {expected}"));
                continue;
            }
            Some(_) => {}
        }
        let mut row = Vec::with_capacity(d);
        let mut row_ok = true;
        for f in &fields[1..] {
            match f.parse::<f64>() {
                Ok(v) if (0.0..=limit).contains(&v) => row.push(v / limit),
                Ok(v) => {
                    bad_lines.push(lineno);
                    messages.push(format!("line {lineno}: value {v} outside [0,{limit}]"));
                    row_ok = false;
                    break;
                }
                Err(_) => {
                    bad_lines.push(lineno);
                    messages.push(format!("line {lineno}: non-numeric value {f:?}"));
                    row_ok = false;
                    break;
                }
            }
        }
        if row_ok {
            labels.push(label);
            values.extend(row);
        }
    }
    if !bad_lines.is_empty() {
        return Err(Error::Ingest {
            message: messages.join("; "),
            lines: bad_lines,
        });
    }
    if labels.is_empty() {
        return Err(Error::Ingest {
            message: "file contains no data rows".into(),
            lines: vec![],
        });
    }
    let d = dims.expect("set by first row");
    let k = match schema.num_classes {
        Some(k) => k,
        None => labels.iter().max().unwrap() + 1,
    };
    if let Some((line, &bad)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(Error::Ingest {
            message: format!("label {bad} out of range for {k} classes"),
            lines: vec![line + 1],
        });
    }
    let n = labels.len();
    Ok(Dataset {
        inputs: Tensor::matrix(n, d, values)?,
        labels,
        k,
        splits: None,
        attributes: None,
    })
}

/// Write a dataset in the same CSV layout (unit scale).
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let (n, d) = ds.inputs.dims2()?;
    let mut out = String::new();
    for i in 0..n {
        let mut fields = Vec::with_capacity(d + 1);
        fields.push(ds.labels[i].to_string());
        for j in 0..d {
            fields.push(format!("{}", ds.inputs.values()[i * d + j]));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

pub const DEFAULT_SPLIT: [f64; 3] = [0.8, 0.1, 0.1];

/// Stratified train/val/test split: every class is shuffled with the seeded
/// rng and allocated by largest remainder, so per-class proportions deviate
/// from the requested fractions by less than one sample. Returns warnings
/// (e.g. classes too small to stratify meaningfully).
pub fn split(ds: &mut Dataset, fractions: [f64; 3], seed: u64) -> Result<Vec<String>> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::config("split fractions must lie in [0,1]"));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split fractions sum to {sum}, expected 1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "split"));
    let mut warnings = Vec::new();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); ds.k];
    for (i, &l) in ds.labels.iter().enumerate() {
        per_class[l].push(i);
    }
    let mut splits = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (class, indices) in per_class.iter_mut().enumerate() {
        if indices.is_empty() {
            continue;
        }
        if indices.len() < 3 {
            warnings.push(format!(
                "class {class} has only {} sample(s); stratification cannot fill every split",
                indices.len()
            ));
        }
        indices.shuffle(&mut rng);
        let n = indices.len();
        let mut counts = [0usize; 3];
        let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(3);
        let mut assigned = 0;
        for (s, &f) in fractions.iter().enumerate() {
            let exact = n as f64 * f;
            counts[s] = exact.floor() as usize;
            assigned += counts[s];
            remainders.push((s, exact - exact.floor()));
        }
        // Largest remainder first; ties resolve train, then val, then test.
        remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for i in 0..(n - assigned) {
            counts[remainders[i % 3].0] += 1;
        }
        let (tr, rest) = indices.split_at(counts[0]);
        let (va, te) = rest.split_at(counts[1]);
        splits.train.extend_from_slice(tr);
        splits.val.extend_from_slice(va);
        splits.test.extend_from_slice(te);
    }
    ds.splits = Some(splits);
    Ok(warnings)
}

/// Assemble a batch from dataset rows.
pub fn gather(ds: &Dataset, indices: &[usize]) -> Result<Batch> {
    let (_, d) = ds.inputs.dims2()?;
    let mut values = Vec::with_capacity(indices.len() * d);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        if i >= ds.labels.len() {
            return Err(Error::domain(format!("sample index {i} out of range")));
        }
        values.extend_from_slice(&ds.inputs.values()[i * d..(i + 1) * d]);
        labels.push(ds.labels[i]);
    }
    Batch::new(Tensor::matrix(indices.len(), d, values)?, labels, ds.k)
}

// ---------------------------------------------------------------------------
// Attribute maps
// ---------------------------------------------------------------------------

pub fn load_attributes(path: &Path) -> Result<AttributeMap> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_attributes(attrs: &AttributeMap, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(attrs)?)?;
    Ok(())
}

/// Group class indices by the value of one attribute, in value order.
pub fn partition_classes_by_attribute(
    attrs: &AttributeMap,
    attribute: &str,
) -> Result<Vec<(String, Vec<usize>)>> {
    let mut by_value: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (&class, m) in attrs {
        if let Some(v) = m.get(attribute) {
            by_value.entry(v.clone()).or_default().push(class);
        }
    }
    if by_value.is_empty() {
        return Err(Error::domain(format!(
            "no class carries attribute {attribute:?}"
        )));
    }
    Ok(by_value.into_iter().collect())
}
