//! Transfer setting: pretrain the encoder on one phantom family, fine-tune
//! on another with different structure parameters.
//!
//! ```bash
//! cargo run --release --example transfer_learning
//! ```

use pcl::model::EncoderConfig;
use pcl::pairing::PairingConfig;
use pcl::train::{evaluate_on_volumes, finetune, pretrain, FinetuneConfig, PretrainConfig};
use pcl::volume::{generate_synthetic_volume, percentile_normalize, FamilySpec, PreprocessConfig, Volume};

fn family_volumes(name: &str, count: u64) -> pcl::Result<Vec<Volume>> {
    let family = FamilySpec::preset(name)?;
    (0..count)
        .map(|s| Ok(percentile_normalize(&generate_synthetic_volume(&family, s)?)))
        .collect()
}

fn main() -> pcl::Result<()> {
    let source = family_volumes("b", 12)?; // pretraining family
    let target = family_volumes("a", 12)?; // fine-tuning family

    let model = EncoderConfig {
        input_hw: (16, 16),
        hidden_dims: vec![128, 64],
        repr_dim: 20,
        proj_dim: 10,
        num_classes: 3,
    };

    println!("pretraining on family 'b' ({} volumes, labels never read)...", source.len());
    let pre = pretrain(
        &source,
        &PretrainConfig {
            epochs: 20,
            pairing: PairingConfig::Pcl { t: 0.1 },
            seed: 0,
            model: model.clone(),
            ..Default::default()
        },
    )?;
    assert_ne!(
        source[0].family_id(),
        target[0].family_id(),
        "transfer needs distinct families"
    );

    let ft = FinetuneConfig {
        epochs: 40,
        m: 2,
        seed: 0,
        model,
        ..Default::default()
    };
    println!("fine-tuning on 2 labeled volumes of family 'a'...");
    let transferred = finetune(Some(&pre.checkpoint), &target[..2], &ft)?;
    let scratch = finetune(None, &target[..2], &ft)?;

    let preprocess = PreprocessConfig::default();
    let held_out = &target[4..12];
    let (_, dice_transfer) =
        evaluate_on_volumes(&transferred.checkpoint.params, held_out, &preprocess)?;
    let (_, dice_scratch) = evaluate_on_volumes(&scratch.checkpoint.params, held_out, &preprocess)?;
    println!("\nheld-out Dice on family 'a' ({} volumes):", held_out.len());
    println!("  encoder transferred from 'b': {:.3}", dice_transfer.mean);
    println!("  random initialization:        {:.3}", dice_scratch.mean);
    Ok(())
}
