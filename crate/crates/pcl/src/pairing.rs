//! Positive-pair mask construction and false-negative accounting.
//!
//! All three strategies produce the same artifact, a symmetric irreflexive
//! boolean relation over the 2N samples of an augmented batch, so the loss
//! and the analyzer are strategy-agnostic. Masks are built from the batch
//! positions on the fly; nothing is predefined per volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric, irreflexive positive-pair relation over a batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMask {
    size: usize,
    positive: Vec<bool>,
}

impl PairMask {
    fn from_predicate(size: usize, mut pred: impl FnMut(usize, usize) -> bool) -> Self {
        let mut positive = vec![false; size * size];
        for i in 0..size {
            for j in (i + 1)..size {
                if pred(i, j) {
                    positive[i * size + j] = true;
                    positive[j * size + i] = true;
                }
            }
        }
        PairMask { size, positive }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_positive(&self, i: usize, j: usize) -> bool {
        self.positive[i * self.size + j]
    }

    /// Number of positives in row `i`, i.e. |Ω_i⁺|.
    pub fn positives_in_row(&self, i: usize) -> usize {
        (0..self.size).filter(|&j| self.is_positive(i, j)).count()
    }

    /// Total count of ordered positive pairs.
    pub fn positive_count(&self) -> usize {
        self.positive.iter().filter(|&&p| p).count()
    }

    /// Row-major 0/1 copy, handy for building loss-side constants.
    pub fn as_f64(&self) -> Vec<f64> {
        self.positive.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect()
    }
}

/// Pairing strategy for contrastive pretraining.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum PairingConfig {
    /// Positive iff |Δposition| < t, regardless of source volume.
    Pcl { t: f64 },
    /// Positive iff both positions fall in the same of `partitions`
    /// contiguous z-ranges.
    Gcl { partitions: usize },
    /// Positive only for the two augmentations of the same source slice.
    SimClr,
}

impl PairingConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PairingConfig::Pcl { t } => {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::Config(format!(
                        "position threshold t must lie in (0, 1), got {t}"
                    )));
                }
            }
            PairingConfig::Gcl { partitions } => {
                if partitions < 1 {
                    return Err(Error::Config("partition count must be >= 1".into()));
                }
            }
            PairingConfig::SimClr => {}
        }
        Ok(())
    }

    /// Builds the mask for an augmented batch of `positions`, which must be
    /// twin-interleaved (entries 2i and 2i+1 share a source slice).
    pub fn build_mask(&self, positions: &[f64]) -> Result<PairMask> {
        self.validate()?;
        match *self {
            PairingConfig::Pcl { t } => build_position_mask(positions, t),
            PairingConfig::Gcl { partitions } => Ok(build_gcl_mask(positions, partitions)),
            PairingConfig::SimClr => {
                if !positions.len().is_multiple_of(2) {
                    return Err(Error::Contract(format!(
                        "twin-interleaved batch must have even size, got {}",
                        positions.len()
                    )));
                }
                Ok(build_simclr_mask(positions.len() / 2))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PairingConfig::Pcl { .. } => "pcl",
            PairingConfig::Gcl { .. } => "gcl",
            PairingConfig::SimClr => "simclr",
        }
    }
}

/// Position-threshold mask: positive iff i ≠ j and |pos_i − pos_j| < t
/// (strict). Volume identity is deliberately ignored so that aligned slices
/// of different volumes pair up.
pub fn build_position_mask(positions: &[f64], t: f64) -> Result<PairMask> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Config(format!(
            "position threshold t must lie in (0, 1), got {t}"
        )));
    }
    Ok(PairMask::from_predicate(positions.len(), |i, j| {
        (positions[i] - positions[j]).abs() < t
    }))
}

/// Twin-only mask: positive exactly for pairs (2i, 2i+1).
pub fn build_simclr_mask(n_sources: usize) -> PairMask {
    PairMask::from_predicate(2 * n_sources, |i, j| i / 2 == j / 2)
}

/// Partition index of a normalized position under `s` equal z-ranges.
pub fn partition_of(position: f64, s: usize) -> usize {
    ((position * s as f64).floor() as usize).min(s - 1)
}

/// Fixed-partition mask: positive iff both positions land in the same of
/// `s` contiguous partitions.
pub fn build_gcl_mask(positions: &[f64], s: usize) -> PairMask {
    assert!(s >= 1, "partition count must be >= 1");
    PairMask::from_predicate(positions.len(), |i, j| {
        partition_of(positions[i], s) == partition_of(positions[j], s)
    })
}

/// Exact pair accounting of a mask against position-based ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FalseNegativeStats {
    /// Ordered pairs that are truly similar but masked negative.
    pub false_neg_count: usize,
    pub false_neg_rate: f64,
    /// Ordered pairs that are truly dissimilar but masked positive.
    pub false_pos_count: usize,
    pub false_pos_rate: f64,
}

/// Enumerates every ordered off-diagonal pair; ground truth declares (i, j)
/// similar iff |Δposition| < t_true. Rates are normalized by 2N(2N−1).
pub fn false_negative_stats(
    mask: &PairMask,
    positions: &[f64],
    t_true: f64,
) -> Result<FalseNegativeStats> {
    if !(t_true > 0.0 && t_true < 1.0) {
        return Err(Error::Config(format!(
            "t_true must lie in (0, 1), got {t_true}"
        )));
    }
    if mask.size() != positions.len() {
        return Err(Error::Contract(format!(
            "mask size {} does not match {} positions",
            mask.size(),
            positions.len()
        )));
    }
    let n = positions.len();
    let mut false_neg = 0usize;
    let mut false_pos = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let similar = (positions[i] - positions[j]).abs() < t_true;
            let positive = mask.is_positive(i, j);
            if similar && !positive {
                false_neg += 1;
            }
            if !similar && positive {
                false_pos += 1;
            }
        }
    }
    let total = (n * (n - 1)) as f64;
    Ok(FalseNegativeStats {
        false_neg_count: false_neg,
        false_neg_rate: false_neg as f64 / total,
        false_pos_count: false_pos,
        false_pos_rate: false_pos as f64 / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn position_mask_groups_and_isolates() {
        let positions = [0.10, 0.10, 0.12, 0.12, 0.50, 0.50];
        let m = build_position_mask(&positions, 0.1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.is_positive(i, j), i != j, "({i},{j})");
            }
        }
        assert!(m.is_positive(4, 5));
        for i in 0..4 {
            assert!(!m.is_positive(i, 4));
            assert!(!m.is_positive(i, 5));
        }
    }

    #[test]
    fn position_mask_non_transitive() {
        let m = build_position_mask(&[0.0, 0.08, 0.16], 0.1).unwrap();
        assert!(m.is_positive(0, 1));
        assert!(m.is_positive(1, 2));
        assert!(!m.is_positive(0, 2));
    }

    #[test]
    fn position_mask_saturates_for_large_t() {
        let positions = [0.0, 0.3, 0.6, 0.9];
        let m = build_position_mask(&positions, 0.95).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.is_positive(i, j), i != j);
            }
        }
    }

    #[test]
    fn position_mask_strict_inequality_at_t() {
        // dyadic values so |Δ| == t holds exactly in f64
        let m = build_position_mask(&[0.25, 0.375], 0.125).unwrap();
        assert!(!m.is_positive(0, 1), "|Δ| == t must be negative");
        let m = build_position_mask(&[0.25, 0.3749], 0.125).unwrap();
        assert!(m.is_positive(0, 1));
    }

    #[test]
    fn position_mask_rejects_bad_threshold() {
        assert!(build_position_mask(&[0.1], 0.0).is_err());
        assert!(build_position_mask(&[0.1], 1.0).is_err());
        assert!(build_position_mask(&[0.1], -0.2).is_err());
    }

    #[test]
    fn simclr_mask_exact_twins() {
        let m = build_simclr_mask(2);
        let expect = [(0, 1), (1, 0), (2, 3), (3, 2)];
        let mut count = 0;
        for i in 0..4 {
            for j in 0..4 {
                if m.is_positive(i, j) {
                    assert!(expect.contains(&(i, j)));
                    count += 1;
                }
            }
        }
        assert_eq!(count, 4);
        for i in 0..4 {
            assert_eq!(m.positives_in_row(i), 1);
        }
    }

    #[test]
    fn single_source_simclr_equals_position_mask() {
        // one source slice: twins share a position, any t > 0 pairs them
        let positions = [0.4, 0.4];
        for t in [0.01, 0.1, 0.9] {
            let pcl = build_position_mask(&positions, t).unwrap();
            let sim = build_simclr_mask(1);
            assert_eq!(pcl, sim);
        }
    }

    #[test]
    fn gcl_boundary_pair_is_negative() {
        let m = build_gcl_mask(&[0.24, 0.26], 4);
        assert!(!m.is_positive(0, 1), "0.24 and 0.26 straddle a partition edge");
    }

    #[test]
    fn gcl_single_partition_all_positive() {
        let m = build_gcl_mask(&[0.1, 0.5, 0.9], 1);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.is_positive(i, j), i != j);
            }
        }
    }

    #[test]
    fn gcl_same_partition_positive() {
        let m = build_gcl_mask(&[0.1, 0.2], 4);
        assert!(m.is_positive(0, 1));
    }

    #[test]
    fn fn_stats_zero_when_thresholds_coincide() {
        let positions = [0.05, 0.05, 0.3, 0.3, 0.62, 0.62, 0.9, 0.9];
        let mask = build_position_mask(&positions, 0.1).unwrap();
        let s = false_negative_stats(&mask, &positions, 0.1).unwrap();
        assert_eq!(s.false_neg_count, 0);
        assert_eq!(s.false_pos_count, 0);
    }

    #[test]
    fn fn_stats_simclr_misses_nearby_sources() {
        // two sources at nearly identical positions
        let positions = [0.40, 0.40, 0.42, 0.42];
        let mask = build_simclr_mask(2);
        let s = false_negative_stats(&mask, &positions, 0.1).unwrap();
        assert!(s.false_neg_count > 0);
        assert_eq!(s.false_pos_count, 0);
    }

    #[test]
    fn fn_ordering_pcl_gcl_simclr() {
        // 2 volumes x 20 uniformly spaced slices, twin-interleaved
        let mut positions = Vec::new();
        for _vol in 0..2 {
            for m in 0..20 {
                let p = m as f64 / 20.0;
                positions.push(p);
                positions.push(p);
            }
        }
        let t_true = 0.1;
        let pcl = build_position_mask(&positions, 0.1).unwrap();
        let gcl = build_gcl_mask(&positions, 4);
        let sim = build_simclr_mask(positions.len() / 2);
        let fn_pcl = false_negative_stats(&pcl, &positions, t_true).unwrap().false_neg_count;
        let fn_gcl = false_negative_stats(&gcl, &positions, t_true).unwrap().false_neg_count;
        let fn_sim = false_negative_stats(&sim, &positions, t_true).unwrap().false_neg_count;
        assert_eq!(fn_pcl, 0);
        assert!(fn_pcl < fn_gcl, "{fn_pcl} !< {fn_gcl}");
        assert!(fn_gcl < fn_sim, "{fn_gcl} !< {fn_sim}");
    }

    #[test]
    fn config_validation() {
        assert!(PairingConfig::Pcl { t: 0.1 }.validate().is_ok());
        assert!(PairingConfig::Pcl { t: 1.0 }.validate().is_err());
        assert!(PairingConfig::Gcl { partitions: 0 }.validate().is_err());
        assert!(PairingConfig::SimClr.validate().is_ok());
    }
}
