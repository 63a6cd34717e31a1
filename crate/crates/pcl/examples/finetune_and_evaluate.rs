//! Fine-tune the segmentation network from a pretrained encoder and from
//! scratch, then compare Dice on held-out volumes.
//!
//! ```bash
//! cargo run --release --example finetune_and_evaluate
//! ```

use pcl::model::EncoderConfig;
use pcl::pairing::PairingConfig;
use pcl::train::{evaluate_on_volumes, finetune, pretrain, FinetuneConfig, PretrainConfig};
use pcl::volume::{generate_synthetic_volume, percentile_normalize, FamilySpec, PreprocessConfig, Volume};

fn main() -> pcl::Result<()> {
    let family = FamilySpec::preset("a")?;
    let volumes: Vec<Volume> = (0..20)
        .map(|s| percentile_normalize(&generate_synthetic_volume(&family, s).unwrap()))
        .collect();
    // phase-0 volumes of two distinct patients for fine-tuning, later
    // patients held out for evaluation
    let labeled = [volumes[0].clone(), volumes[2].clone()];
    let held_out = &volumes[10..20];

    let model = EncoderConfig {
        input_hw: (16, 16),
        hidden_dims: vec![128, 64],
        repr_dim: 20,
        proj_dim: 10,
        num_classes: 3,
    };

    println!("pretraining the encoder (position pairing, t = 0.1)...");
    let pre_cfg = PretrainConfig {
        epochs: 30,
        pairing: PairingConfig::Pcl { t: 0.1 },
        seed: 0,
        model: model.clone(),
        ..Default::default()
    };
    let pretrained = pretrain(&volumes, &pre_cfg)?;

    let ft_cfg = FinetuneConfig {
        epochs: 50,
        m: 2,
        seed: 0,
        model: model.clone(),
        ..Default::default()
    };

    println!("fine-tuning from the pretrained encoder...");
    let from_pretrained = finetune(Some(&pretrained.checkpoint), &labeled, &ft_cfg)?;
    println!("fine-tuning from random initialization...");
    let from_scratch = finetune(None, &labeled, &ft_cfg)?;

    let preprocess = PreprocessConfig::default();
    let (_, dice_pre) =
        evaluate_on_volumes(&from_pretrained.checkpoint.params, held_out, &preprocess)?;
    let (_, dice_rnd) = evaluate_on_volumes(&from_scratch.checkpoint.params, held_out, &preprocess)?;

    println!("\nheld-out Dice over {} volumes:", held_out.len());
    println!(
        "  pretrained init: mean {:.3}, per class {:?}",
        dice_pre.mean,
        dice_pre
            .per_class
            .iter()
            .map(|d| (d * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    println!(
        "  random init:     mean {:.3}, per class {:?}",
        dice_rnd.mean,
        dice_rnd
            .per_class
            .iter()
            .map(|d| (d * 1000.0).round() / 1000.0)
            .collect::<Vec<_>>()
    );
    Ok(())
}
