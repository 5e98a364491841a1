//! Subgroup misclassification rates and the class↔subgroup symmetry
//! equivalence, as executable checks.
//!
//! The subgroup rate from G_a to G_b is the size-normalized block sum
//! (1/(n_a·n_b))·ΣΣ C_ij. Two facts make symmetry a strong group-fairness
//! notion and both are checked mechanically here: a symmetric matrix yields
//! a symmetric subgroup matrix for *every* partition, and conversely any
//! class-level asymmetry is exposed exactly by the partition that isolates
//! the offending pair into singletons. The second fact is what lets
//! `verify_theorem` avoid enumerating the Bell-number many partitions beyond
//! tiny K.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confusion::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::metrics::FairnessReport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub groups: Vec<Vec<usize>>,
    /// Optional group names (attribute values etc.), aligned with `groups`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl Partition {
    pub fn new(groups: Vec<Vec<usize>>) -> Result<Self> {
        let p = Partition {
            groups,
            labels: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn named(groups: Vec<(String, Vec<usize>)>) -> Result<Self> {
        let (labels, groups): (Vec<String>, Vec<Vec<usize>>) = groups.into_iter().unzip();
        let p = Partition {
            groups,
            labels: Some(labels),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::domain("partition has no groups"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (gi, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::domain(format!("group {gi} is empty")));
            }
            for &class in g {
                if !seen.insert(class) {
                    return Err(Error::domain(format!(
                        "class {class} appears in more than one group"
                    )));
                }
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.groups.len() {
                return Err(Error::domain("label count does not match group count"));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Every class index must be < k.
    pub fn check_classes(&self, k: usize) -> Result<()> {
        for g in &self.groups {
            if let Some(&bad) = g.iter().find(|&&c| c >= k) {
                return Err(Error::domain(format!(
                    "class {bad} out of range for {k} classes"
                )));
            }
        }
        Ok(())
    }

    /// Partition file: a JSON object mapping group name → class indices.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let map: BTreeMap<String, Vec<usize>> = serde_json::from_str(&text)?;
        Partition::named(map.into_iter().collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut map = BTreeMap::new();
        for (i, g) in self.groups.iter().enumerate() {
            let name = match &self.labels {
                Some(l) => l[i].clone(),
                None => format!("group{i}"),
            };
            map.insert(name, g.clone());
        }
        fs::write(path, serde_json::to_string_pretty(&map)?)?;
        Ok(())
    }
}

/// (1/(n_a·n_b))·Σ_{i∈Ga}Σ_{j∈Gb} C_ij: the average probability of
/// misclassifying a sample of G_a into G_b, adjusted for group sizes.
pub fn subgroup_rate(c: &ConfusionMatrix, ga: &[usize], gb: &[usize]) -> Result<f64> {
    if ga.is_empty() || gb.is_empty() {
        return Err(Error::domain("subgroup rate needs non-empty groups"));
    }
    if ga.iter().any(|a| gb.contains(a)) {
        return Err(Error::domain("subgroup rate needs disjoint groups"));
    }
    let k = c.k();
    for &i in ga.iter().chain(gb) {
        if i >= k {
            return Err(Error::domain(format!(
                "class {i} out of range for {k} classes"
            )));
        }
    }
    let mut sum = 0.0;
    for &i in ga {
        for &j in gb {
            sum += c.entry(i, j);
        }
    }
    Ok(sum / (ga.len() * gb.len()) as f64)
}

/// m×m matrix of subgroup rates. Off-diagonal: [`subgroup_rate`]. Diagonal:
/// the mean *within-group* confusion (off-diagonal entries of the block,
/// 0 for singletons); reported only, never used by symmetry checks.
pub fn subgroup_matrix(c: &ConfusionMatrix, p: &Partition) -> Result<Vec<f64>> {
    p.validate()?;
    p.check_classes(c.k())?;
    let m = p.len();
    let mut out = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..m {
            if a != b {
                out[a * m + b] = subgroup_rate(c, &p.groups[a], &p.groups[b])?;
            } else {
                let g = &p.groups[a];
                if g.len() > 1 {
                    let mut sum = 0.0;
                    for &i in g {
                        for &j in g {
                            if i != j {
                                sum += c.entry(i, j);
                            }
                        }
                    }
                    out[a * m + a] = sum / (g.len() * (g.len() - 1)) as f64;
                }
            }
        }
    }
    Ok(out)
}

/// Largest |S_ab − S_ba| over distinct group pairs of a subgroup matrix.
pub fn subgroup_asymmetry(matrix: &[f64], m: usize) -> f64 {
    let mut gap: f64 = 0.0;
    for a in 0..m {
        for b in (a + 1)..m {
            gap = gap.max((matrix[a * m + b] - matrix[b * m + a]).abs());
        }
    }
    gap
}

// ---------------------------------------------------------------------------
// Theorem verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub k: usize,
    pub tolerance: f64,
    pub class_max_gap: f64,
    /// True when the matrix is symmetric within tolerance (direction 1 ran),
    /// false when the witness construction ran (direction 2).
    pub symmetric_case: bool,
    pub trials: usize,
    /// Bound relating subgroup asymmetry to the class-level gap: every
    /// block average of |C_ij − C_ji| terms is at most the max gap itself.
    pub scaling_bound: f64,
    /// Worst subgroup asymmetry observed over the sampled partitions.
    pub worst_subgroup_gap: f64,
    /// Direction 2: the argmax class pair and its witness partition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_pair: Option<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_partition: Option<Partition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness_subgroup_gap: Option<f64>,
    pub pass: bool,
}

impl TheoremVerdict {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Seeded random partition with at least two non-empty groups.
pub fn sample_partition(k: usize, rng: &mut ChaCha8Rng) -> Partition {
    assert!(k >= 2, "partitions need at least two classes");
    loop {
        let m = rng.random_range(2..=k);
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); m];
        for class in 0..k {
            groups[rng.random_range(0..m)].push(class);
        }
        groups.retain(|g| !g.is_empty());
        if groups.len() >= 2 {
            return Partition {
                groups,
                labels: None,
            };
        }
    }
}

/// The argmax-asymmetry class pair of a matrix.
pub fn most_asymmetric_pair(c: &ConfusionMatrix) -> (usize, usize, f64) {
    let k = c.k();
    let mut best = (0, 1, 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let gap = (c.entry(i, j) - c.entry(j, i)).abs();
            if gap > best.2 {
                best = (i, j, gap);
            }
        }
    }
    best
}

/// Singleton witness partition {{i},{j},rest} (two singletons when K = 2).
pub fn witness_partition(k: usize, i: usize, j: usize) -> Partition {
    let rest: Vec<usize> = (0..k).filter(|&c| c != i && c != j).collect();
    let mut groups = vec![vec![i], vec![j]];
    if !rest.is_empty() {
        groups.push(rest);
    }
    Partition {
        groups,
        labels: None,
    }
}

/// Executable form of the class↔subgroup symmetry equivalence.
///
/// If the matrix is symmetric within `tolerance`, checks `trials` seeded
/// random partitions: every subgroup matrix must be symmetric within
/// tolerance·scaling_bound (the bound is 1: block averaging cannot amplify
/// the worst pairwise gap). Otherwise constructs the singleton partition at
/// the most asymmetric pair and checks it reproduces the class-level gap to
/// 1e-12.
pub fn verify_theorem(
    c: &ConfusionMatrix,
    trials: usize,
    tolerance: f64,
    rng_seed: u64,
) -> Result<TheoremVerdict> {
    let k = c.k();
    if k < 2 {
        return Err(Error::domain("theorem check needs at least 2 classes"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::domain("tolerance must be non-negative"));
    }
    let (wi, wj, class_max_gap) = most_asymmetric_pair(c);
    let scaling_bound = 1.0;
    if class_max_gap <= tolerance {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let p = sample_partition(k, &mut rng);
            let s = subgroup_matrix(c, &p)?;
            worst = worst.max(subgroup_asymmetry(&s, p.len()));
        }
        Ok(TheoremVerdict {
            k,
            tolerance,
            class_max_gap,
            symmetric_case: true,
            trials,
            scaling_bound,
            worst_subgroup_gap: worst,
            witness_pair: None,
            witness_partition: None,
            witness_subgroup_gap: None,
            pass: worst <= tolerance * scaling_bound,
        })
    } else {
        let p = witness_partition(k, wi, wj);
        let s = subgroup_matrix(c, &p)?;
        // Groups 0 and 1 are the singletons {i} and {j}.
        let m = p.len();
        let witness_gap = (s[1] - s[m]).abs();
        Ok(TheoremVerdict {
            k,
            tolerance,
            class_max_gap,
            symmetric_case: false,
            trials: 0,
            scaling_bound,
            worst_subgroup_gap: witness_gap,
            witness_pair: Some((wi, wj)),
            witness_partition: Some(p),
            witness_subgroup_gap: Some(witness_gap),
            pass: (witness_gap - class_max_gap).abs() <= 1e-12,
        })
    }
}

// ---------------------------------------------------------------------------
// Partition enumeration (small K)
// ---------------------------------------------------------------------------

pub const EXHAUSTIVE_K_LIMIT: usize = 6;

/// All set partitions of {0..k−1} via restricted growth strings. Counts are
/// the Bell numbers, so this is gated to K ≤ 6 (203 partitions).
pub fn enumerate_partitions(k: usize) -> Result<Vec<Partition>> {
    if k > EXHAUSTIVE_K_LIMIT {
        return Err(Error::domain(format!(
            "exhaustive partition enumeration is limited to K <= {EXHAUSTIVE_K_LIMIT}"
        )));
    }
    let mut out = Vec::new();
    let mut assignment = vec![0usize; k];
    fn recurse(
        class: usize,
        k: usize,
        max_used: usize,
        assignment: &mut Vec<usize>,
        out: &mut Vec<Partition>,
    ) {
        if class == k {
            let groups_count = max_used + 1;
            let mut groups = vec![Vec::new(); groups_count];
            for (c, &g) in assignment.iter().enumerate() {
                groups[g].push(c);
            }
            out.push(Partition {
                groups,
                labels: None,
            });
            return;
        }
        for g in 0..=max_used + 1 {
            assignment[class] = g;
            recurse(class + 1, k, max_used.max(g), assignment, out);
        }
    }
    if k == 0 {
        // The empty partition.
        return Ok(vec![]);
    }
    assignment[0] = 0;
    recurse(1, k, 0, &mut assignment, &mut out);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Subgroup accuracy gaps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub name: String,
    pub classes: Vec<usize>,
    pub samples: u64,
    /// Count-weighted mean of per-class accuracy; None for empty groups.
    pub benign: Option<f64>,
    pub robust: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgroupGapReport {
    pub groups: Vec<GroupAccuracy>,
    pub benign_gap: Option<f64>,
    pub robust_gap: Option<f64>,
    pub notes: Vec<String>,
}

impl SubgroupGapReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Benign/robust accuracy per group (count-weighted over the group's
/// classes) and the absolute gaps between the two groups.
pub fn subgroup_accuracy_gaps(
    report: &FairnessReport,
    partition: &Partition,
) -> Result<SubgroupGapReport> {
    partition.validate()?;
    partition.check_classes(report.k)?;
    if partition.len() != 2 {
        return Err(Error::domain(
            "subgroup accuracy gaps are defined for two-group partitions",
        ));
    }
    let counts = report.confusion_adversarial_counts.counts();
    let benign_diag: Vec<f64> = (0..report.k)
        .map(|i| report.confusion_benign.entry(i, i))
        .collect();
    let mut groups = Vec::with_capacity(2);
    let mut notes = Vec::new();
    for (gi, g) in partition.groups.iter().enumerate() {
        let name = match &partition.labels {
            Some(l) => l[gi].clone(),
            None => format!("group{gi}"),
        };
        let samples: u64 = g.iter().map(|&c| counts[c]).sum();
        let (benign, robust) = if samples == 0 {
            notes.push(format!("group {name:?} has zero evaluated samples"));
            (None, None)
        } else {
            let mut b = 0.0;
            let mut r = 0.0;
            for &c in g {
                let w = counts[c] as f64 / samples as f64;
                b += w * benign_diag[c];
                r += w * report.per_class_robust[c];
            }
            (Some(b), Some(r))
        };
        groups.push(GroupAccuracy {
            name,
            classes: g.clone(),
            samples,
            benign,
            robust,
        });
    }
    let benign_gap = match (groups[0].benign, groups[1].benign) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let robust_gap = match (groups[0].robust, groups[1].robust) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    Ok(SubgroupGapReport {
        groups,
        benign_gap,
        robust_gap,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confusion::MatrixKind;

    fn matrix(k: usize, entries: Vec<f64>) -> ConfusionMatrix {
        ConfusionMatrix::from_parts(k, MatrixKind::HardNormalized, vec![10; k], entries).unwrap()
    }

    fn random_row_stochastic(k: usize, state: &mut u64) -> Vec<f64> {
        let mut entries = vec![0.0; k * k];
        for row in entries.chunks_mut(k) {
            let mut sum = 0.0;
            for e in row.iter_mut() {
                *state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                *e = ((*state >> 11) as f64 / (1u64 << 53) as f64) + 1e-6;
                sum += *e;
            }
            row.iter_mut().for_each(|e| *e /= sum);
        }
        entries
    }

    #[test]
    fn singleton_groups_recover_matrix_entries() {
        let c = matrix(3, vec![0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.0, 0.3, 0.7]);
        assert_eq!(subgroup_rate(&c, &[0], &[1]).unwrap(), 0.1);
        assert_eq!(subgroup_rate(&c, &[2], &[1]).unwrap(), 0.3);
    }

    #[test]
    fn zero_matrix_has_zero_rates() {
        let c = ConfusionMatrix::empty(3, MatrixKind::HardNormalized);
        assert_eq!(subgroup_rate(&c, &[0, 1], &[2]).unwrap(), 0.0);
    }

    #[test]
    fn overlapping_or_empty_groups_are_rejected() {
        let c = matrix(3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            subgroup_rate(&c, &[0, 1], &[1, 2]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            subgroup_rate(&c, &[], &[1]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn subgroup_rate_matches_nested_loop_oracle() {
        let mut state = 77u64;
        let entries = random_row_stochastic(6, &mut state);
        let c = matrix(6, entries.clone());
        let ga = [0usize, 2, 4];
        let gb = [1usize, 5];
        let mut oracle = 0.0;
        for &i in &ga {
            for &j in &gb {
                oracle += entries[i * 6 + j];
            }
        }
        oracle /= (ga.len() * gb.len()) as f64;
        assert!((subgroup_rate(&c, &ga, &gb).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn singleton_partition_reproduces_off_diagonal() {
        let c = matrix(3, vec![0.8, 0.1, 0.1, 0.2, 0.7, 0.1, 0.0, 0.3, 0.7]);
        let p = Partition::new(vec![vec![0], vec![1], vec![2]]).unwrap();
        let s = subgroup_matrix(&c, &p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(s[i * 3 + j], c.entry(i, j));
                }
            }
        }
    }

    #[test]
    fn symmetric_matrix_gives_symmetric_subgroup_matrix() {
        let c = matrix(
            4,
            vec![
                0.7, 0.1, 0.1, 0.1, //
                0.1, 0.6, 0.2, 0.1, //
                0.1, 0.2, 0.6, 0.1, //
                0.1, 0.1, 0.1, 0.7,
            ],
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let p = sample_partition(4, &mut rng);
            let s = subgroup_matrix(&c, &p).unwrap();
            assert!(subgroup_asymmetry(&s, p.len()) < 1e-12);
        }
    }

    #[test]
    fn witness_partition_exposes_class_gap() {
        let c = matrix(2, vec![0.8, 0.2, 0.6, 0.4]);
        let v = verify_theorem(&c, 0, 1e-9, 0).unwrap();
        assert!(!v.symmetric_case);
        assert!(v.pass);
        assert_eq!(v.witness_pair, Some((0, 1)));
        assert!((v.witness_subgroup_gap.unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn witness_scan_matches_argmax_oracle_on_random_matrices() {
        let mut state = 31u64;
        for _ in 0..20 {
            let entries = random_row_stochastic(10, &mut state);
            let c = matrix(10, entries.clone());
            let (wi, wj, gap) = most_asymmetric_pair(&c);
            let mut oracle = 0.0f64;
            for i in 0..10 {
                for j in 0..10 {
                    oracle = oracle.max((entries[i * 10 + j] - entries[j * 10 + i]).abs());
                }
            }
            assert_eq!(gap, oracle);
            let v = verify_theorem(&c, 0, 1e-9, 0).unwrap();
            assert!(v.pass, "witness failed for pair ({wi},{wj})");
        }
    }

    #[test]
    fn symmetric_case_samples_partitions_and_passes() {
        let c = matrix(
            6,
            vec![
                0.75, 0.05, 0.05, 0.05, 0.05, 0.05, //
                0.05, 0.75, 0.05, 0.05, 0.05, 0.05, //
                0.05, 0.05, 0.75, 0.05, 0.05, 0.05, //
                0.05, 0.05, 0.05, 0.75, 0.05, 0.05, //
                0.05, 0.05, 0.05, 0.05, 0.75, 0.05, //
                0.05, 0.05, 0.05, 0.05, 0.05, 0.75,
            ],
        );
        let v = verify_theorem(&c, 100, 1e-12, 7).unwrap();
        assert!(v.symmetric_case);
        assert!(v.pass);
        assert_eq!(v.trials, 100);
    }

    #[test]
    fn partition_counts_match_bell_numbers() {
        let bell = [1usize, 1, 2, 5, 15, 52, 203];
        for k in 1..=6 {
            assert_eq!(enumerate_partitions(k).unwrap().len(), bell[k], "K={k}");
        }
        assert!(enumerate_partitions(7).is_err());
    }

    #[test]
    fn bell_triangle_oracle_agrees() {
        // Independent recurrence: next row starts with the previous row's
        // last entry; each entry adds its left neighbor and the value above.
        let mut row = vec![1u64];
        let mut bell = vec![1u64];
        for _ in 0..6 {
            let mut next = vec![*row.last().unwrap()];
            for &above in &row {
                let prev = *next.last().unwrap();
                next.push(prev + above);
            }
            bell.push(next[0]);
            row = next;
        }
        assert_eq!(bell, vec![1, 1, 2, 5, 15, 52, 203]);
        for k in 1..=6 {
            assert_eq!(enumerate_partitions(k).unwrap().len() as u64, bell[k]);
        }
    }

    #[test]
    fn consistent_relabeling_leaves_subgroup_matrix_invariant() {
        let mut state = 5u64;
        let entries = random_row_stochastic(5, &mut state);
        let c = matrix(5, entries.clone());
        // Permutation π and the conjugated matrix Cπ(i),π(j).
        let perm = [2usize, 0, 4, 1, 3];
        let mut permuted = vec![0.0; 25];
        for i in 0..5 {
            for j in 0..5 {
                permuted[perm[i] * 5 + perm[j]] = entries[i * 5 + j];
            }
        }
        let cp = matrix(5, permuted);
        let p = Partition::new(vec![vec![0, 1], vec![2, 3, 4]]).unwrap();
        let p_mapped = Partition::new(vec![
            vec![perm[0], perm[1]],
            vec![perm[2], perm[3], perm[4]],
        ])
        .unwrap();
        let s = subgroup_matrix(&c, &p).unwrap();
        let sp = subgroup_matrix(&cp, &p_mapped).unwrap();
        for (a, b) in s.iter().zip(&sp) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn accuracy_gap_report_weights_by_counts() {
        use crate::metrics::{report_from_confusions, EvalOptions};
        // Adversarial counts: class 0 perfect, class 1 all wrong, class 2
        // half right.
        let adv_counts = ConfusionMatrix::from_parts(
            3,
            MatrixKind::HardCount,
            vec![4, 4, 4],
            vec![
                4.0, 0.0, 0.0, //
                4.0, 0.0, 0.0, //
                2.0, 0.0, 2.0,
            ],
        )
        .unwrap();
        let benign = ConfusionMatrix::from_parts(
            3,
            MatrixKind::HardNormalized,
            vec![4, 4, 4],
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let report =
            report_from_confusions(&adv_counts, &benign, 1.0, 0.5, &EvalOptions::default())
                .unwrap();
        let p = Partition::named(vec![("a".into(), vec![0]), ("b".into(), vec![1, 2])]).unwrap();
        let gaps = subgroup_accuracy_gaps(&report, &p).unwrap();
        assert_eq!(gaps.groups[0].robust, Some(1.0));
        assert!((gaps.groups[1].robust.unwrap() - 0.25).abs() < 1e-15);
        assert!((gaps.robust_gap.unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(gaps.benign_gap, Some(0.0));
    }

    #[test]
    fn extreme_per_class_split_yields_unit_gap() {
        use crate::metrics::{report_from_confusions, EvalOptions};
        let adv_counts = ConfusionMatrix::from_parts(
            2,
            MatrixKind::HardCount,
            vec![3, 3],
            vec![3.0, 0.0, 3.0, 0.0],
        )
        .unwrap();
        let benign = ConfusionMatrix::from_parts(
            2,
            MatrixKind::HardNormalized,
            vec![3, 3],
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let report =
            report_from_confusions(&adv_counts, &benign, 1.0, 0.5, &EvalOptions::default())
                .unwrap();
        let p = Partition::new(vec![vec![0], vec![1]]).unwrap();
        let gaps = subgroup_accuracy_gaps(&report, &p).unwrap();
        assert_eq!(gaps.robust_gap, Some(1.0));
    }

    #[test]
    fn partition_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.json");
        let p = Partition::named(vec![
            ("female".into(), vec![0, 1, 4]),
            ("male".into(), vec![2, 3, 5]),
        ])
        .unwrap();
        p.save(&path).unwrap();
        let back = Partition::load(&path).unwrap();
        assert_eq!(back.groups, p.groups);
        assert_eq!(back.labels, p.labels);
    }
}
