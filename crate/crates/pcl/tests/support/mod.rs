//! Shared helpers for integration tests: an independent scalar transcription
//! of the contrastive objective and deterministic dataset builders.
//! Not every test target uses every helper.
#![allow(dead_code)]

use std::path::PathBuf;

use pcl::pairing::PairMask;
use pcl::volume::{
    generate_synthetic_volume, percentile_normalize, save_volume, DatasetManifest, FamilySpec,
    ManifestEntry, Split,
};

/// Literal per-sample transcription of the loss: for each i with positives
/// Ω_i, mean over j in Ω_i of -log(e^{sim_ij/τ} / Σ_{k≠i} e^{sim_ik/τ}),
/// cosine similarity computed directly. No shared code with the library's
/// vectorized path.
pub fn naive_pcl_loss(rows: &[Vec<f64>], mask: &PairMask, tau: f64) -> (f64, Vec<f64>) {
    let m = rows.len();
    let cosine = |a: &[f64], b: &[f64]| -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let mut per_sample = vec![0.0; m];
    for i in 0..m {
        let omega: Vec<usize> = (0..m).filter(|&j| mask.is_positive(i, j)).collect();
        if omega.is_empty() {
            continue;
        }
        let mut acc = 0.0;
        for &j in &omega {
            let numer = (cosine(&rows[i], &rows[j]) / tau).exp();
            let mut denom = 0.0;
            for k in 0..m {
                if k != i {
                    denom += (cosine(&rows[i], &rows[k]) / tau).exp();
                }
            }
            acc += (numer / denom).ln();
        }
        per_sample[i] = -acc / omega.len() as f64;
    }
    (per_sample.iter().sum(), per_sample)
}

/// Writes `volumes` phantoms of the preset family into a temp directory and
/// returns the manifest path. Phase-0 volumes of each patient land in the
/// labeled pool, the rest in the pretraining split.
pub fn build_dataset(family: &str, tag: &str, volumes: u64) -> PathBuf {
    let fam = FamilySpec::preset(family).expect("preset family");
    let dir = std::env::temp_dir().join(format!("pcl-acceptance-{tag}"));
    std::fs::create_dir_all(&dir).unwrap();
    let mut entries = Vec::new();
    for seed in 0..volumes {
        let v = percentile_normalize(&generate_synthetic_volume(&fam, seed).unwrap());
        let name = format!("v{seed:03}.vvol");
        save_volume(&v, &dir.join(&name)).unwrap();
        let split = if seed % fam.phases_per_patient as u64 == 0 {
            Split::LabeledPool
        } else {
            Split::Pretrain
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(&name),
            family_id: fam.family_id.clone(),
            split,
        });
    }
    let mpath = dir.join("manifest.json");
    DatasetManifest::new(dir, entries)
        .unwrap()
        .save(&mpath)
        .unwrap();
    mpath
}
