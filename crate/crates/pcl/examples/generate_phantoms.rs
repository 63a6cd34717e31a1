//! Generate a family of synthetic phantom volumes, inspect their structure,
//! and write them to disk in the VVOL format with a manifest.
//!
//! ```bash
//! cargo run --release --example generate_phantoms
//! ```

use std::path::PathBuf;

use pcl::volume::{
    extract_slice, generate_synthetic_volume, percentile_normalize, save_volume, DatasetManifest,
    FamilySpec, ManifestEntry, Split,
};

fn main() -> pcl::Result<()> {
    let family = FamilySpec::preset("a")?;
    println!(
        "family '{}': dims {:?}, {} structures, {} classes, {} phases per patient",
        family.family_id,
        family.dims,
        family.structures.len(),
        family.num_classes(),
        family.phases_per_patient,
    );

    let out = std::env::temp_dir().join("pcl-example-phantoms");
    std::fs::create_dir_all(&out).expect("create output dir");

    let mut entries = Vec::new();
    for seed in 0..6u64 {
        let raw = generate_synthetic_volume(&family, seed)?;
        let volume = percentile_normalize(&raw);
        let name = format!("{}.vvol", volume.volume_id());
        save_volume(&volume, &out.join(&name))?;
        let split = if seed % family.phases_per_patient as u64 == 0 {
            Split::LabeledPool
        } else {
            Split::Pretrain
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(&name),
            family_id: family.family_id.clone(),
            split,
        });

        let labels = volume.labels().unwrap();
        let foreground = labels.iter().filter(|&&l| l > 0).count();
        println!(
            "  {}: intensity [{:.3}, {:.3}], {:.1}% foreground voxels",
            volume.volume_id(),
            volume.intensities().iter().cloned().fold(f32::MAX, f32::min),
            volume.intensities().iter().cloned().fold(f32::MIN, f32::max),
            100.0 * foreground as f64 / labels.len() as f64,
        );
    }

    let manifest_path = out.join("manifest.json");
    DatasetManifest::new(out.clone(), entries)?.save(&manifest_path)?;
    println!("manifest written to {}", manifest_path.display());

    // the property pairing relies on: along z, near slices resemble each
    // other more than far slices
    let volume = percentile_normalize(&generate_synthetic_volume(&family, 0)?);
    let n = volume.n_slices();
    let mad = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
    };
    let s0 = extract_slice(&volume, 4)?;
    let s1 = extract_slice(&volume, 5)?;
    let sfar = extract_slice(&volume, 4 + n / 2)?;
    println!(
        "slice 4 vs 5: mean |diff| {:.4}   slice 4 vs {}: mean |diff| {:.4}",
        mad(&s0.pixels, &s1.pixels),
        4 + n / 2,
        mad(&s0.pixels, &sfar.pixels),
    );
    println!("positions: slice 4 -> {:.4}, slice 5 -> {:.4}", s0.position, s1.position);
    Ok(())
}
