//! Command-line front end: data generation, pretraining, fine-tuning,
//! evaluation, strategy comparison, and false-negative analysis.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcl::augment::AugConfig;
use pcl::error::{Error, Result};
use pcl::model::{load_checkpoint, save_checkpoint, EncoderConfig};
use pcl::pairing::PairingConfig;
use pcl::rng::Rng;
use pcl::train::{
    analyze_false_negatives, evaluate_on_volumes, finetune, pretrain, run_experiment,
    ExperimentSpec, FinetuneConfig, PretrainConfig, Strategy,
};
use pcl::volume::{
    generate_synthetic_volume, percentile_normalize, save_volume, DatasetManifest, FamilySpec,
    ManifestEntry, PreprocessConfig, Split,
};

#[derive(Parser)]
#[command(
    name = "pcl",
    about = "Positional contrastive learning on synthetic volumetric phantoms",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a family of synthetic phantom volumes plus a manifest.
    GenerateData(GenerateArgs),
    /// Contrastive pretraining of the encoder (never reads labels).
    Pretrain(PretrainArgs),
    /// Supervised fine-tuning of the segmentation network.
    Finetune(FinetuneArgs),
    /// Dice evaluation of a trained model.
    Evaluate(EvaluateArgs),
    /// Cross-validated comparison of pairing strategies.
    Compare(CompareArgs),
    /// Exact false-negative/false-positive accounting per strategy.
    AnalyzeFn(AnalyzeArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Phantom family preset (a or b).
    #[arg(long)]
    family: String,
    /// Number of volumes to generate.
    #[arg(long, default_value_t = 20)]
    volumes: usize,
    /// Base seed; volume i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for VVOL files and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Pairing strategy: pcl, gcl, or simclr.
    #[arg(long)]
    strategy: String,
    /// Position threshold for pcl.
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    /// Partition count for gcl.
    #[arg(long, default_value_t = 4)]
    partitions: usize,
    /// Loss temperature.
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    /// Source slices per step (the contrastive batch holds twice this).
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// Initial SGD learning rate (cosine-decayed).
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Pretraining checkpoint, or "none" for random initialization.
    #[arg(long, default_value = "none")]
    init: String,
    /// Number of labeled volumes to fine-tune on.
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 5)]
    batch: usize,
    /// Adam learning rate (cosine-decayed).
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trained model output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained model checkpoint.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// JSON report output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Pretraining manifest from a different family (transfer setting).
    #[arg(long)]
    pretrain_manifest: Option<PathBuf>,
    /// Comma-separated strategies from random,simclr,gcl,pcl.
    #[arg(long, default_value = "random,simclr,pcl")]
    strategies: String,
    /// Comma-separated labeled-set sizes.
    #[arg(long, default_value = "2")]
    m_list: String,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = 4)]
    partitions: usize,
    #[arg(long, default_value_t = 0.1)]
    tau: f64,
    #[arg(long, default_value_t = 30)]
    pretrain_epochs: usize,
    #[arg(long, default_value_t = 50)]
    finetune_epochs: usize,
    /// Ground-truth threshold for the embedded false-negative analysis.
    #[arg(long, default_value_t = 0.1)]
    t_true: f64,
    /// Report path; JSON lands here, CSV next to it with a .csv extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Ground-truth similarity threshold.
    #[arg(long, default_value_t = 0.1)]
    t_true: f64,
    /// Comma-separated strategies from simclr,gcl,pcl.
    #[arg(long, default_value = "simclr,gcl,pcl")]
    strategies: String,
    #[arg(long, default_value_t = 0.1)]
    t: f64,
    #[arg(long, default_value_t = 4)]
    partitions: usize,
    /// JSON report output path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_strategies(list: &str, t: f64, partitions: usize) -> Result<Vec<Strategy>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| Strategy::parse(name, t, partitions))
        .collect()
}

fn parse_list<T: std::str::FromStr>(list: &str, what: &str) -> Result<Vec<T>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("cannot parse '{s}' in {what} list")))
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let family = FamilySpec::preset(&args.family)?;
    if args.volumes == 0 {
        return Err(Error::Config("--volumes must be >= 1".into()));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Io {
        path: args.out.display().to_string(),
        source: e,
    })?;
    let mut entries = Vec::with_capacity(args.volumes);
    let mut labeled = 0usize;
    for i in 0..args.volumes {
        let seed = args.seed + i as u64;
        let volume = generate_synthetic_volume(&family, seed)?;
        let volume = percentile_normalize(&volume);
        let name = format!("{}-{i:03}.vvol", family.family_id);
        save_volume(&volume, &args.out.join(&name))?;
        // one phase per patient carries labels into the fine-tuning pool;
        // the remaining phases are pretraining-only material
        let split = if seed.is_multiple_of(family.phases_per_patient as u64) {
            labeled += 1;
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
    let manifest = DatasetManifest::new(args.out.clone(), entries)?;
    let manifest_path = args.out.join("manifest.json");
    manifest.save(&manifest_path)?;
    println!(
        "wrote {} volumes of family '{}' ({labeled} labeled) and {}",
        args.volumes,
        family.family_id,
        manifest_path.display()
    );
    Ok(())
}

fn run_pretrain(args: PretrainArgs) -> Result<()> {
    let pairing = match args.strategy.as_str() {
        "pcl" => PairingConfig::Pcl { t: args.t },
        "gcl" => PairingConfig::Gcl {
            partitions: args.partitions,
        },
        "simclr" => PairingConfig::SimClr,
        other => {
            return Err(Error::Config(format!(
                "unknown strategy '{other}' (expected pcl|gcl|simclr)"
            )))
        }
    };
    let manifest = DatasetManifest::load(&args.manifest)?;
    let pool = manifest.load_pretrain_pool()?;
    let cfg = PretrainConfig {
        epochs: args.epochs,
        batch: args.batch,
        lr0: args.lr,
        pairing,
        temperature: args.tau,
        seed: args.seed,
        augment: AugConfig::default(),
        preprocess: PreprocessConfig::default(),
        model: EncoderConfig::default(),
    };
    let outcome = pretrain(&pool, &cfg)?;
    save_checkpoint(&outcome.checkpoint, &args.out)?;
    println!(
        "pretrained {} on {} volumes: loss {:.4} -> {:.4}, checkpoint {}",
        args.strategy,
        pool.len(),
        outcome.epoch_mean_loss.first().unwrap_or(&f64::NAN),
        outcome.epoch_mean_loss.last().unwrap_or(&f64::NAN),
        args.out.display()
    );
    Ok(())
}

fn run_finetune(args: FinetuneArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let labeled = manifest.load_split(Split::LabeledPool, false)?;
    if args.m > labeled.len() {
        return Err(Error::Config(format!(
            "--m {} exceeds the {} labeled volumes in the manifest",
            args.m,
            labeled.len()
        )));
    }
    let init = match args.init.as_str() {
        "none" => None,
        path => Some(load_checkpoint(Path::new(path))?),
    };
    let mut rng = Rng::from_seed_stream(args.seed, 0x5E1);
    let picked = rng.choose_indices(labeled.len(), args.m);
    let chosen: Vec<_> = picked.iter().map(|&i| labeled[i].clone()).collect();
    let cfg = FinetuneConfig {
        epochs: args.epochs,
        batch: args.batch,
        lr: args.lr,
        m: args.m,
        seed: args.seed,
        preprocess: PreprocessConfig::default(),
        model: EncoderConfig::default(),
    };
    let outcome = finetune(init.as_ref(), &chosen, &cfg)?;
    save_checkpoint(&outcome.checkpoint, &args.out)?;
    println!(
        "fine-tuned on {} volumes: cross-entropy {:.4} -> {:.4}, model {}",
        args.m,
        outcome.epoch_mean_loss.first().unwrap_or(&f64::NAN),
        outcome.epoch_mean_loss.last().unwrap_or(&f64::NAN),
        args.out.display()
    );
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.model)?;
    let manifest = DatasetManifest::load(&args.manifest)?;
    let mut volumes = manifest.load_split(Split::Test, false)?;
    if volumes.is_empty() {
        volumes = manifest.load_split(Split::LabeledPool, false)?;
    }
    let (per_volume, mean) =
        evaluate_on_volumes(&ckpt.params, &volumes, &PreprocessConfig::default())?;
    #[derive(serde::Serialize)]
    struct EvaluationReport {
        model: String,
        per_volume: Vec<VolumeDice>,
        mean: pcl::train::DiceScores,
    }
    #[derive(serde::Serialize)]
    struct VolumeDice {
        volume_id: String,
        dice: pcl::train::DiceScores,
    }
    let report = EvaluationReport {
        model: args.model.display().to_string(),
        per_volume: per_volume
            .into_iter()
            .map(|(volume_id, dice)| VolumeDice { volume_id, dice })
            .collect(),
        mean,
    };
    write_text(&args.out, &serde_json::to_string_pretty(&report)?)?;
    println!(
        "mean dice {:.4} over {} volumes, report {}",
        report.mean.mean,
        report.per_volume.len(),
        args.out.display()
    );
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let spec = ExperimentSpec {
        manifest: args.manifest,
        pretrain_manifest: args.pretrain_manifest,
        strategies: parse_strategies(&args.strategies, args.t, args.partitions)?,
        m_list: parse_list(&args.m_list, "m")?,
        folds: args.folds,
        seeds: parse_list(&args.seeds, "seed")?,
        pretrain_epochs: args.pretrain_epochs,
        finetune_epochs: args.finetune_epochs,
        temperature: args.tau,
        t_true: args.t_true,
        ..ExperimentSpec::desk_defaults(PathBuf::new())
    };
    let report = run_experiment(&spec)?;
    write_text(&args.out, &serde_json::to_string_pretty(&report)?)?;
    let csv_path = args.out.with_extension("csv");
    write_text(&csv_path, &report.to_csv())?;
    for s in &report.summaries {
        println!(
            "{:8} m={:<3} dice {:.4} ({:.4})  [n={}]",
            s.strategy, s.m, s.mean, s.std, s.n_runs
        );
    }
    println!(
        "report {} / {} ({:.1}s)",
        args.out.display(),
        csv_path.display(),
        report.wall_clock_seconds
    );
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.manifest)?;
    let pool = manifest.load_pretrain_pool()?;
    let strategies = parse_strategies(&args.strategies, args.t, args.partitions)?;
    let report = analyze_false_negatives(&pool, args.t_true, &strategies)?;
    write_text(&args.out, &serde_json::to_string_pretty(&report)?)?;
    for s in &report.per_strategy {
        println!(
            "{:8} false negatives {:6} (rate {:.4})  false positives {:6} (rate {:.4})",
            s.strategy,
            s.stats.false_neg_count,
            s.stats.false_neg_rate,
            s.stats.false_pos_count,
            s.stats.false_pos_rate
        );
    }
    println!("report {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenerateData(args) => run_generate(args),
        Command::Pretrain(args) => run_pretrain(args),
        Command::Finetune(args) => run_finetune(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Compare(args) => run_compare(args),
        Command::AnalyzeFn(args) => run_analyze(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
