//! End-to-end self-supervised training on a synthetic blob dataset:
//! Otsu pseudo-labels + focal-tversky loss, then evaluation against the
//! ground truth the training never saw.

use std::time::Instant;

use sass_seg::pipeline::{load_manifest, materialize_synth, Split, SynthSpec};
use sass_seg::thresholding::{ThresholdKind, ThresholdMethod};
use sass_seg::trainer::{self, TrainConfig};

fn main() -> sass_seg::Result<()> {
    let dir = std::env::temp_dir().join("sass_seg_example_train");
    let spec = SynthSpec::new(64, 64);
    let manifest = materialize_synth(&dir, 300, &spec, 7)?;
    let entries = load_manifest(&manifest)?;
    println!("dataset: 300 synthetic 64x64 images at {}", dir.display());

    // How good are the pseudo-labels themselves? That is the ceiling the
    // trained model is judged against.
    let quality = trainer::pseudo_label_quality(
        &entries,
        Split::Test,
        &[ThresholdMethod::new(ThresholdKind::Otsu)],
        (64, 64),
    )?;
    let ceiling = quality[0].1.iou_macro;
    println!("otsu pseudo-mask vs ground truth: macro IoU {ceiling:.4}");

    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let (params, record) = trainer::train(&entries, &cfg)?;
    println!(
        "trained {} epochs in {:.1?} (best epoch {}): train loss {:.4} -> {:.4}",
        record.train_loss.len(),
        start.elapsed(),
        record.best_epoch,
        record.train_loss[0],
        record.train_loss[record.train_loss.len() - 1],
    );

    let report = trainer::evaluate(&params, &entries, Split::Test, (64, 64), 0.5)?;
    println!(
        "test split: macro IoU {:.4}, micro IoU {:.4}, recall {:.4}, accuracy {:.4}, collapse {}",
        report.iou_macro, report.iou_micro, report.recall, report.accuracy, report.collapse
    );
    println!(
        "model reaches {:.1}% of the pseudo-label ceiling",
        100.0 * report.iou_macro / ceiling
    );
    Ok(())
}
