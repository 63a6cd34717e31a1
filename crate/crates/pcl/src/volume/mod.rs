//! Volumetric data: synthetic phantoms, preprocessing, slice extraction,
//! batch sampling, and the VVOL file format.
//!
//! Volumes are immutable once generated or loaded and safe to share across
//! threads; batch sampling draws from a caller-owned seeded generator. The
//! label-read probe is thread-local, so concurrent experiments cannot
//! pollute each other's firewall accounting.

mod manifest;
mod phantom;
mod preprocess;
mod sampling;
mod vvol;

pub use manifest::{DatasetManifest, ManifestEntry, Split};
pub use phantom::{generate_synthetic_volume, FamilySpec, StructureSpec};
pub use preprocess::{percentile, percentile_normalize, resample_pad, PreprocessConfig};
pub use sampling::{sample_batch, SliceBatch};
pub use vvol::{load_volume, save_volume};

use std::cell::Cell;

use crate::error::{Error, Result};

thread_local! {
    static LABEL_READS: Cell<u64> = const { Cell::new(0) };
}

/// Number of label-grid accesses on this thread since the last reset.
///
/// The pretraining path must leave this untouched; [`crate::train::pretrain`]
/// asserts a zero delta around itself, and the experiment report echoes the
/// aggregate so a whole run can prove it never looked at labels.
pub fn label_reads() -> u64 {
    LABEL_READS.with(|c| c.get())
}

pub fn reset_label_reads() {
    LABEL_READS.with(|c| c.set(0));
}

fn note_label_read() {
    LABEL_READS.with(|c| c.set(c.get() + 1));
}

/// A 3D scalar grid with voxel spacing and optional per-voxel class labels.
///
/// Intensities are stored x-fastest row-major as f32, matching the VVOL
/// on-disk encoding bit for bit.
#[derive(Debug, Clone)]
pub struct Volume {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    intensities: Vec<f32>,
    labels: Option<Vec<u16>>,
    num_classes: usize,
    volume_id: String,
    family_id: String,
}

impl Volume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        intensities: Vec<f32>,
        labels: Option<Vec<u16>>,
        num_classes: usize,
        volume_id: String,
        family_id: String,
    ) -> Result<Self> {
        let (nx, ny, n) = dims;
        let numel = nx * ny * n;
        if n < 2 {
            return Err(Error::Contract(format!(
                "volume needs at least 2 slices along z, got {n}"
            )));
        }
        if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
            return Err(Error::Contract(format!("spacings must be > 0, got {spacing:?}")));
        }
        if intensities.len() != numel {
            return Err(Error::Contract(format!(
                "dims {dims:?} imply {numel} voxels, got {}",
                intensities.len()
            )));
        }
        if num_classes < 1 {
            return Err(Error::Contract("num_classes must be >= 1".into()));
        }
        if let Some(ls) = &labels {
            if ls.len() != numel {
                return Err(Error::Contract(format!(
                    "label grid has {} entries, expected {numel}",
                    ls.len()
                )));
            }
            if let Some(&bad) = ls.iter().find(|&&l| l as usize >= num_classes) {
                return Err(Error::Contract(format!(
                    "label {bad} outside [0, {num_classes})"
                )));
            }
        }
        Ok(Volume {
            dims,
            spacing,
            intensities,
            labels,
            num_classes,
            volume_id,
            family_id,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    /// Slice count along z.
    pub fn n_slices(&self) -> usize {
        self.dims.2
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    pub fn intensities(&self) -> &[f32] {
        &self.intensities
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn volume_id(&self) -> &str {
        &self.volume_id
    }

    pub fn family_id(&self) -> &str {
        &self.family_id
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Label grid access. Every call with labels present trips the
    /// label-read probe; code that must stay label-blind shows up as a
    /// nonzero [`label_reads`] delta.
    pub fn labels(&self) -> Option<&[u16]> {
        if self.labels.is_some() {
            note_label_read();
        }
        self.labels.as_deref()
    }

    /// Same volume with the label grid dropped; the unlabeled view used by
    /// the pretraining pipeline.
    pub fn without_labels(&self) -> Volume {
        Volume {
            labels: None,
            ..self.clone()
        }
    }

    pub(crate) fn raw_labels(&self) -> Option<&[u16]> {
        self.labels.as_deref()
    }

    #[inline]
    pub fn voxel_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }
}

/// A 2D slice with its normalized z-position and provenance metadata.
///
/// Pixels are f64 row-major, x-fastest (index = y*width + x).
#[derive(Debug, Clone)]
pub struct Slice2D {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub label: Option<Vec<u16>>,
    /// In-plane pixel spacing (mm), carried for resampling.
    pub spacing: (f64, f64),
    /// m/n for slice index m of n; always in [0, 1).
    pub position: f64,
    pub volume_id: String,
    pub family_id: String,
    pub slice_index: usize,
}

/// Extracts xy-plane slice `m` (0-based) with position m/n.
pub fn extract_slice(v: &Volume, m: usize) -> Result<Slice2D> {
    let (nx, ny, n) = v.dims();
    if m >= n {
        return Err(Error::Contract(format!(
            "slice index {m} out of range for volume with {n} slices"
        )));
    }
    let plane = nx * ny;
    let start = m * plane;
    let pixels: Vec<f64> = v.intensities()[start..start + plane]
        .iter()
        .map(|&p| p as f64)
        .collect();
    let label = v.labels().map(|ls| ls[start..start + plane].to_vec());
    Ok(Slice2D {
        width: nx,
        height: ny,
        pixels,
        label,
        spacing: (v.spacing().0, v.spacing().1),
        position: m as f64 / n as f64,
        volume_id: v.volume_id().to_string(),
        family_id: v.family_id().to_string(),
        slice_index: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_volume(n: usize, with_labels: bool) -> Volume {
        let dims = (4, 4, n);
        let numel = 16 * n;
        let intensities: Vec<f32> = (0..numel).map(|i| i as f32).collect();
        let labels = with_labels.then(|| (0..numel).map(|i| (i % 2) as u16).collect());
        Volume::new(
            dims,
            (1.0, 1.0, 1.0),
            intensities,
            labels,
            2,
            "toy".into(),
            "fam".into(),
        )
        .unwrap()
    }

    #[test]
    fn position_is_exactly_m_over_n() {
        let v = toy_volume(10, false);
        assert_eq!(extract_slice(&v, 3).unwrap().position, 0.3);
        assert_eq!(extract_slice(&v, 0).unwrap().position, 0.0);
        assert!(extract_slice(&v, 10).is_err());
    }

    #[test]
    fn all_positions_in_unit_interval() {
        let v = toy_volume(7, false);
        for m in 0..7 {
            let s = extract_slice(&v, m).unwrap();
            assert!(s.position >= 0.0 && s.position < 1.0);
            assert_eq!(s.position, m as f64 / 7.0);
        }
    }

    #[test]
    fn slice_carries_labels_when_present() {
        let v = toy_volume(3, true);
        let s = extract_slice(&v, 1).unwrap();
        assert!(s.label.is_some());
        assert_eq!(s.label.unwrap().len(), 16);
    }

    #[test]
    fn label_probe_counts_accesses() {
        let v = toy_volume(3, true);
        reset_label_reads();
        let _ = extract_slice(&v, 0).unwrap();
        assert_eq!(label_reads(), 1);
        let unlabeled = v.without_labels();
        reset_label_reads();
        let _ = extract_slice(&unlabeled, 0).unwrap();
        assert_eq!(label_reads(), 0);
    }

    #[test]
    fn volume_invariants_enforced() {
        // n < 2
        assert!(Volume::new(
            (4, 4, 1),
            (1.0, 1.0, 1.0),
            vec![0.0; 16],
            None,
            2,
            "v".into(),
            "f".into()
        )
        .is_err());
        // non-positive spacing
        assert!(Volume::new(
            (4, 4, 2),
            (1.0, 0.0, 1.0),
            vec![0.0; 32],
            None,
            2,
            "v".into(),
            "f".into()
        )
        .is_err());
        // label out of class range
        assert!(Volume::new(
            (2, 2, 2),
            (1.0, 1.0, 1.0),
            vec![0.0; 8],
            Some(vec![0, 1, 2, 0, 0, 0, 0, 0]),
            2,
            "v".into(),
            "f".into()
        )
        .is_err());
    }
}
