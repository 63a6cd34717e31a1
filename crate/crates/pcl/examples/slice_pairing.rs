//! Positive-pair mask construction: the position rule against the
//! twins-only and fixed-partition baselines, including the cases where
//! they disagree.
//!
//! ```bash
//! cargo run --release --example slice_pairing
//! ```

use pcl::pairing::{
    build_gcl_mask, build_position_mask, build_simclr_mask, false_negative_stats, PairMask,
};

fn show(mask: &PairMask, label: &str) {
    println!("{label}:");
    for i in 0..mask.size() {
        let row: String = (0..mask.size())
            .map(|j| if mask.is_positive(i, j) { '+' } else { '.' })
            .collect();
        println!("  {row}");
    }
}

fn main() -> pcl::Result<()> {
    // a twin-interleaved batch of 4 source slices: two nearby sources
    // from different volumes, two isolated ones
    let positions = [0.10, 0.10, 0.15, 0.15, 0.50, 0.50, 0.85, 0.85];
    println!("positions: {positions:?}\n");

    let pcl_mask = build_position_mask(&positions, 0.1)?;
    let gcl_mask = build_gcl_mask(&positions, 4);
    let simclr_mask = build_simclr_mask(positions.len() / 2);

    show(&pcl_mask, "position threshold (t = 0.1)");
    show(&gcl_mask, "fixed partitions (S = 4)");
    show(&simclr_mask, "augmentation twins only");

    // the position rule is deliberately non-transitive
    let tri = build_position_mask(&[0.0, 0.08, 0.16], 0.1)?;
    println!(
        "\nnon-transitivity: (0, 1) positive = {}, (1, 2) positive = {}, (0, 2) positive = {}",
        tri.is_positive(0, 1),
        tri.is_positive(1, 2),
        tri.is_positive(0, 2)
    );

    // partitioning splits neighbors that straddle a boundary
    let boundary = build_gcl_mask(&[0.24, 0.26], 4);
    println!(
        "partition boundary: positions 0.24 / 0.26 positive under S=4? {}",
        boundary.is_positive(0, 1)
    );

    // exact false-negative accounting against position ground truth
    println!("\nfalse negatives vs ground-truth threshold 0.1:");
    for (name, mask) in [
        ("pcl", &pcl_mask),
        ("gcl", &gcl_mask),
        ("simclr", &simclr_mask),
    ] {
        let stats = false_negative_stats(mask, &positions, 0.1)?;
        println!(
            "  {name:7} false negatives {:2} (rate {:.3}), false positives {:2}",
            stats.false_neg_count, stats.false_neg_rate, stats.false_pos_count
        );
    }
    Ok(())
}
