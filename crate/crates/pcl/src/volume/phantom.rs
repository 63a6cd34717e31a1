//! Synthetic volumetric phantoms.
//!
//! A phantom is a stack of slices through 2-3 tubular structures whose
//! cross-section center, radius, and intensity drift smoothly along z, on
//! top of a smooth background gradient plus voxel noise. Two properties
//! are built in by construction:
//!
//! 1. adjacent slices look alike and slices far apart along z differ, so
//!    position difference is a real similarity signal;
//! 2. volumes of the same family share anatomy up to a small seeded jitter,
//!    so slices at the same position in different volumes look alike
//!    without being identical.
//!
//! Per-voxel labels mark structure membership (class 0 is background),
//! which gives the fine-tuning task exact ground truth.

use serde::{Deserialize, Serialize};

use super::Volume;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// One tubular structure of a phantom family. All geometry is normalized
/// to the unit square; radii are fractions of the image extent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructureSpec {
    pub center: (f64, f64),
    pub radius: f64,
    pub intensity: f64,
    /// xy drift amplitude of the tube axis along z. Equal x/y amplitudes
    /// make the tube orbit its center.
    pub drift_amp: (f64, f64),
    /// Drift cycles over the volume height.
    pub drift_freq: f64,
    /// Base phase of the drift. Two structures sharing a center and
    /// frequency but offset by pi orbit each other; a slice then shows two
    /// look-alike blobs whose class assignment depends on the z-position.
    pub drift_phase: f64,
    /// Relative radius modulation along z.
    pub radius_mod: f64,
    /// Relative intensity modulation along z.
    pub intensity_mod: f64,
    /// Phase of the intensity modulation. Distinct phases across structures
    /// make their brightness order swap along z, so telling them apart
    /// requires positional context, not just a per-pixel intensity read.
    pub intensity_phase: f64,
}

/// Parameters of a dataset family: grid geometry plus the structures every
/// volume of the family shares (up to per-volume jitter).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family_id: String,
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub structures: Vec<StructureSpec>,
    pub background_level: f64,
    pub background_x_slope: f64,
    /// Amplitude of the background's own z variation.
    pub background_z_amp: f64,
    pub noise_sigma: f64,
    /// Scale of per-patient anatomy (geometry) jitter, normalized units.
    /// Kept small: volumes of a family are roughly aligned.
    pub jitter: f64,
    /// Relative scatter of structure/background brightness across patients,
    /// mimicking acquisition contrast differences.
    pub intensity_jitter: f64,
    /// Consecutive seeds in a run of this length share a patient: they get
    /// the same anatomy and contrast up to a small deformation wobble and
    /// fresh noise, the way one subject yields several near-identical
    /// volumes (e.g. across a cardiac cycle). 1 means every volume is its
    /// own patient.
    pub phases_per_patient: usize,
}

impl FamilySpec {
    /// Classes = background + one per structure.
    pub fn num_classes(&self) -> usize {
        self.structures.len() + 1
    }

    /// Built-in families. `a` and `b` differ in structure geometry,
    /// intensities, and drift patterns, which is what the transfer setting
    /// needs.
    pub fn preset(name: &str) -> Result<FamilySpec> {
        match name {
            // two look-alike tubes orbiting a shared axis half a turn
            // apart: a slice shows two blobs whose class assignment flips
            // with z, so segmentation rewards position-aware features
            "a" => Ok(FamilySpec {
                family_id: "a".into(),
                dims: (16, 16, 24),
                spacing: (1.0, 1.0, 1.0),
                structures: vec![
                    StructureSpec {
                        center: (0.5, 0.5),
                        radius: 0.105,
                        intensity: 0.62,
                        drift_amp: (0.21, 0.21),
                        drift_freq: 0.5,
                        drift_phase: 0.0,
                        radius_mod: 0.10,
                        intensity_mod: 0.25,
                        intensity_phase: 2.0,
                    },
                    StructureSpec {
                        center: (0.5, 0.5),
                        radius: 0.095,
                        intensity: 0.78,
                        drift_amp: (0.21, 0.21),
                        drift_freq: 0.5,
                        drift_phase: std::f64::consts::PI,
                        radius_mod: 0.10,
                        intensity_mod: 0.25,
                        intensity_phase: 5.0,
                    },
                ],
                background_level: 0.18,
                background_x_slope: 0.08,
                background_z_amp: 0.06,
                noise_sigma: 0.06,
                jitter: 0.03,
                intensity_jitter: 0.35,
                phases_per_patient: 2,
            }),
            "b" => Ok(FamilySpec {
                family_id: "b".into(),
                dims: (16, 16, 24),
                spacing: (1.0, 1.0, 1.0),
                structures: vec![
                    StructureSpec {
                        center: (0.47, 0.53),
                        radius: 0.12,
                        intensity: 0.85,
                        drift_amp: (0.17, 0.17),
                        drift_freq: 0.45,
                        drift_phase: 0.0,
                        radius_mod: 0.20,
                        intensity_mod: 0.30,
                        intensity_phase: 0.5,
                    },
                    StructureSpec {
                        center: (0.47, 0.53),
                        radius: 0.09,
                        intensity: 0.55,
                        drift_amp: (0.17, 0.17),
                        drift_freq: 0.45,
                        drift_phase: std::f64::consts::PI,
                        radius_mod: 0.25,
                        intensity_mod: 0.35,
                        intensity_phase: 3.5,
                    },
                ],
                background_level: 0.24,
                background_x_slope: -0.08,
                background_z_amp: 0.09,
                noise_sigma: 0.07,
                jitter: 0.035,
                intensity_jitter: 0.40,
                phases_per_patient: 2,
            }),
            other => Err(Error::Config(format!(
                "unknown phantom family '{other}' (available: a, b)"
            ))),
        }
    }
}

/// Per-volume jittered copy of a structure.
struct JitteredStructure {
    center: (f64, f64),
    radius: f64,
    intensity: f64,
    drift_amp: (f64, f64),
    drift_freq: f64,
    drift_phase: f64,
    radius_mod: f64,
    intensity_mod: f64,
    intensity_phase: f64,
    phase: f64,
}

fn hash_str(s: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Deterministic phantom for `(family, seed)`. Identical inputs produce
/// bitwise-identical volumes. Seeds `p*phases_per_patient ..` through
/// `.. + phases_per_patient - 1` share patient `p`'s anatomy.
pub fn generate_synthetic_volume(family: &FamilySpec, seed: u64) -> Result<Volume> {
    let (nx, ny, n) = family.dims;
    if nx < 4 || ny < 4 || n < 4 {
        return Err(Error::Config(format!(
            "phantom dims must be at least 4 per axis, got {:?}",
            family.dims
        )));
    }
    if family.structures.is_empty() {
        return Err(Error::Config("phantom family needs at least one structure".into()));
    }
    if family.phases_per_patient == 0 {
        return Err(Error::Config("phases_per_patient must be >= 1".into()));
    }

    let patient = seed / family.phases_per_patient as u64;
    let phase = seed % family.phases_per_patient as u64;
    // anatomy and contrast are patient-level; the phase adds a small
    // deformation wobble and fresh noise
    let mut rng = Rng::from_seed_stream(patient, hash_str(&family.family_id));
    let mut phase_rng = Rng::from_seed_stream(seed, hash_str(&family.family_id) ^ 0x9E11);
    let jitter = family.jitter;
    let wobble = 0.006;

    let structures: Vec<JitteredStructure> = family
        .structures
        .iter()
        .map(|s| JitteredStructure {
            center: (
                s.center.0 + jitter * rng.range(-1.0, 1.0) + wobble * phase_rng.range(-1.0, 1.0),
                s.center.1 + jitter * rng.range(-1.0, 1.0) + wobble * phase_rng.range(-1.0, 1.0),
            ),
            radius: s.radius
                * (1.0 + rng.range(-1.0, 1.0) * jitter)
                * (1.0 + phase_rng.range(-0.02, 0.02)),
            intensity: s.intensity * (1.0 + rng.range(-1.0, 1.0) * family.intensity_jitter),
            drift_amp: (
                s.drift_amp.0 * (1.0 + rng.range(-0.15, 0.15)),
                s.drift_amp.1 * (1.0 + rng.range(-0.15, 0.15)),
            ),
            // phase and frequency jitter stay small regardless of the
            // geometry jitter: they shift content along z, and large shifts
            // would break the cross-volume position correspondence the
            // pairing rule relies on
            drift_freq: s.drift_freq * (1.0 + rng.range(-0.03, 0.03)),
            drift_phase: s.drift_phase,
            radius_mod: s.radius_mod,
            intensity_mod: s.intensity_mod,
            intensity_phase: s.intensity_phase,
            phase: rng.range(-1.0, 1.0) * (jitter * 2.0).min(0.15)
                + wobble * phase_rng.range(-1.0, 1.0),
        })
        .collect();
    let bg_level = family.background_level
        * (1.0 + rng.range(-1.0, 1.0) * family.intensity_jitter);

    let numel = nx * ny * n;
    let mut intensities = vec![0.0f32; numel];
    let mut labels = vec![0u16; numel];
    let tau = std::f64::consts::TAU;

    for z in 0..n {
        let zn = z as f64 / (n - 1) as f64;
        let bg_z = family.background_z_amp * (std::f64::consts::PI * zn).sin();
        // per-slice structure state
        let state: Vec<(f64, f64, f64, f64)> = structures
            .iter()
            .map(|s| {
                let arg = tau * s.drift_freq * zn + s.drift_phase + s.phase;
                let cx = s.center.0 + s.drift_amp.0 * arg.sin();
                let cy = s.center.1 + s.drift_amp.1 * arg.cos();
                let r = s.radius * (1.0 + s.radius_mod * (arg + 1.0).sin());
                let i = s.intensity * (1.0 + s.intensity_mod * (arg + s.intensity_phase).sin());
                (cx, cy, r, i)
            })
            .collect();
        for y in 0..ny {
            let yn = (y as f64 + 0.5) / ny as f64;
            for x in 0..nx {
                let xn = (x as f64 + 0.5) / nx as f64;
                let mut v = bg_level + family.background_x_slope * xn + bg_z;
                let mut label = 0u16;
                for (k, &(cx, cy, r, inten)) in state.iter().enumerate() {
                    let dx = xn - cx;
                    let dy = yn - cy;
                    let d = (dx * dx + dy * dy).sqrt() / r;
                    if d <= 1.0 {
                        v += inten * (1.0 - 0.5 * d * d);
                        label = (k + 1) as u16;
                    }
                }
                v += family.noise_sigma * phase_rng.gaussian();
                let idx = x + nx * (y + ny * z);
                intensities[idx] = v as f32;
                labels[idx] = label;
            }
        }
    }

    let volume = Volume::new(
        family.dims,
        family.spacing,
        intensities,
        Some(labels),
        family.num_classes(),
        format!("{}-p{patient}c{phase}", family.family_id),
        family.family_id.clone(),
    )?;

    // generator contract: every class owns at least one voxel
    let mut seen = vec![false; family.num_classes()];
    for &l in volume.raw_labels().unwrap() {
        seen[l as usize] = true;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(Error::Contract(format!(
            "generated volume is missing class {missing}; family geometry leaves the grid"
        )));
    }
    Ok(volume)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::extract_slice;

    #[test]
    fn deterministic_by_family_and_seed() {
        let fam = FamilySpec::preset("a").unwrap();
        let v1 = generate_synthetic_volume(&fam, 7).unwrap();
        let v2 = generate_synthetic_volume(&fam, 7).unwrap();
        assert_eq!(v1.intensities(), v2.intensities());
        assert_eq!(v1.raw_labels(), v2.raw_labels());
        let v3 = generate_synthetic_volume(&fam, 8).unwrap();
        assert_ne!(v1.intensities(), v3.intensities());
    }

    #[test]
    fn families_differ_for_same_seed() {
        let a = generate_synthetic_volume(&FamilySpec::preset("a").unwrap(), 5).unwrap();
        let b = generate_synthetic_volume(&FamilySpec::preset("b").unwrap(), 5).unwrap();
        assert_ne!(a.intensities(), b.intensities());
    }

    #[test]
    fn every_class_present_across_seeds() {
        for name in ["a", "b"] {
            let fam = FamilySpec::preset(name).unwrap();
            for seed in 0..30 {
                let v = generate_synthetic_volume(&fam, seed).unwrap();
                let labels = v.raw_labels().unwrap();
                for class in 0..fam.num_classes() as u16 {
                    assert!(
                        labels.contains(&class),
                        "family {name} seed {seed} missing class {class}"
                    );
                }
            }
        }
    }

    #[test]
    fn adjacent_slices_more_similar_than_distant_ones() {
        // mean |diff| between slices m and m+1 must undercut m and m+n/2,
        // for every m, averaged over 10 seeds
        let fam = FamilySpec::preset("a").unwrap();
        let n = fam.dims.2;
        let half = n / 2;
        let mut near = vec![0.0f64; n - half];
        let mut far = vec![0.0f64; n - half];
        for seed in 0..10 {
            let v = generate_synthetic_volume(&fam, seed).unwrap();
            let slices: Vec<_> = (0..n).map(|m| extract_slice(&v, m).unwrap()).collect();
            let mad = |a: &[f64], b: &[f64]| -> f64 {
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
            };
            for m in 0..(n - half) {
                near[m] += mad(&slices[m].pixels, &slices[m + 1].pixels);
                far[m] += mad(&slices[m].pixels, &slices[m + half].pixels);
            }
        }
        for m in 0..(n - half) {
            assert!(
                near[m] < far[m],
                "slice {m}: near {:.4} !< far {:.4}",
                near[m],
                far[m]
            );
        }
    }

    #[test]
    fn same_position_across_volumes_more_similar_than_far_positions() {
        // cross-patient alignment: slice m of patient A is closer to slice
        // m of patient B than to slice m + n/2 of patient B, on average
        let fam = FamilySpec::preset("a").unwrap();
        let phases = fam.phases_per_patient as u64;
        let n = fam.dims.2;
        let half = n / 2;
        let mut aligned = 0.0f64;
        let mut misaligned = 0.0f64;
        for seed in 0..10 {
            let va = generate_synthetic_volume(&fam, 2 * seed * phases).unwrap();
            let vb = generate_synthetic_volume(&fam, (2 * seed + 1) * phases).unwrap();
            let mad = |a: &[f64], b: &[f64]| -> f64 {
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
            };
            for m in 0..(n - half) {
                let sa = extract_slice(&va, m).unwrap();
                let sb_near = extract_slice(&vb, m).unwrap();
                let sb_far = extract_slice(&vb, m + half).unwrap();
                aligned += mad(&sa.pixels, &sb_near.pixels);
                misaligned += mad(&sa.pixels, &sb_far.pixels);
            }
        }
        assert!(
            aligned < misaligned,
            "aligned {aligned:.4} !< misaligned {misaligned:.4}"
        );
    }

    #[test]
    fn degenerate_dims_rejected() {
        let mut fam = FamilySpec::preset("a").unwrap();
        fam.dims = (3, 16, 24);
        assert!(generate_synthetic_volume(&fam, 0).is_err());
    }
}
