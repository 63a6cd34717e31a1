//! Spatial augmentations preserve the position value, which is what keeps
//! the pairing rule valid on augmented batches.
//!
//! ```bash
//! cargo run --release --example augmentations
//! ```

use pcl::augment::{make_contrastive_batch, random_augment, AugConfig};
use pcl::pairing::build_position_mask;
use pcl::rng::Rng;
use pcl::volume::{generate_synthetic_volume, percentile_normalize, sample_batch, FamilySpec};

fn main() -> pcl::Result<()> {
    let family = FamilySpec::preset("a")?;
    let volume = percentile_normalize(&generate_synthetic_volume(&family, 3)?).without_labels();
    let mut rng = Rng::new(42);

    let batch = sample_batch(&[volume], 4, &mut rng)?;
    println!("sampled positions: {:?}", batch.positions());

    // one augmentation: pixels change, metadata does not
    let cfg = AugConfig::default();
    let slice = &batch.slices[0];
    let augmented = random_augment(slice, &cfg, &mut rng);
    let moved: f64 = slice
        .pixels
        .iter()
        .zip(&augmented.pixels)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / slice.pixels.len() as f64;
    println!(
        "augmented slice {}: mean pixel change {:.4}, position {} -> {} (unchanged)",
        slice.slice_index, moved, slice.position, augmented.position
    );

    // identity ranges give a bitwise no-op
    let noop = random_augment(slice, &AugConfig::identity(), &mut rng);
    println!("identity config is a no-op: {}", noop.pixels == slice.pixels);

    // the 2N batch interleaves two augmentations per source slice
    let aug = make_contrastive_batch(&batch, &cfg, &mut rng);
    println!("contrastive batch positions: {:?}", aug.positions());

    // twins always pair under any threshold
    let mask = build_position_mask(&aug.positions(), 1e-6)?;
    let twins_paired = (0..batch.len()).all(|i| mask.is_positive(2 * i, 2 * i + 1));
    println!("twins positive even at t = 1e-6: {twins_paired}");
    Ok(())
}
