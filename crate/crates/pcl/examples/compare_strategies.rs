//! A reduced cross-validated comparison of pairing strategies, the same
//! machinery the `pcl compare` subcommand drives at full scale.
//!
//! ```bash
//! cargo run --release --example compare_strategies
//! ```

use std::path::PathBuf;

use pcl::train::{run_experiment, ExperimentSpec, Strategy};
use pcl::volume::{
    generate_synthetic_volume, percentile_normalize, save_volume, DatasetManifest, FamilySpec,
    ManifestEntry, Split,
};

fn main() -> pcl::Result<()> {
    // build a small dataset on disk, as `pcl generate-data` would
    let family = FamilySpec::preset("a")?;
    let dir = std::env::temp_dir().join("pcl-example-compare");
    std::fs::create_dir_all(&dir).expect("create dataset dir");
    let mut entries = Vec::new();
    for seed in 0..20u64 {
        let v = percentile_normalize(&generate_synthetic_volume(&family, seed)?);
        let name = format!("v{seed:02}.vvol");
        save_volume(&v, &dir.join(&name))?;
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
    }
    let manifest_path = dir.join("manifest.json");
    DatasetManifest::new(dir, entries)?.save(&manifest_path)?;

    // reduced sweep: 3 folds, 1 seed, all four strategies; training
    // settings stay at the desk defaults
    let mut spec = ExperimentSpec::desk_defaults(manifest_path);
    spec.strategies = vec![
        Strategy::Random,
        Strategy::SimClr,
        Strategy::Gcl { partitions: 4 },
        Strategy::Pcl { t: 0.1 },
    ];
    spec.folds = 3;
    spec.seeds = vec![0];

    println!("running the comparison (a few minutes at this scale)...");
    let report = run_experiment(&spec)?;

    println!("\nmean (std) Dice at M = 2 over {} runs per cell:", spec.folds);
    for s in &report.summaries {
        println!("  {:8} {:.3} ({:.3})", s.strategy, s.mean, s.std);
    }

    println!("\nfalse negatives of each strategy over the pretraining pool:");
    for f in &report.false_negative_stats {
        println!(
            "  {:8} false-negative rate {:.4}, false-positive rate {:.4}",
            f.strategy, f.stats.false_neg_rate, f.stats.false_pos_rate
        );
    }

    println!(
        "\nlabel reads during pretraining: {} (the pretraining path is label-blind)",
        report.label_reads_during_pretrain
    );
    println!("\nCSV head:");
    for line in report.to_csv().lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
