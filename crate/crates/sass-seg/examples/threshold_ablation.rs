//! Desk-scale analog of the thresholding ablation: compare pseudo-label
//! quality per method on a held-out split, then train one model per method
//! and compare the resulting segmenters.
//!
//! Training five methods takes a few minutes; pass `--quick` to only rank
//! the pseudo-labels themselves.

use sass_seg::cli::ablation_threshold_methods;
use sass_seg::pipeline::{load_manifest, materialize_synth, Split, SynthSpec};
use sass_seg::trainer::{self, TrainConfig};

fn main() -> sass_seg::Result<()> {
    let quick = std::env::args().any(|a| a == "--quick");
    let dir = std::env::temp_dir().join("sass_seg_example_ablation");
    let manifest = materialize_synth(&dir, 150, &SynthSpec::new(64, 64), 7)?;
    let entries = load_manifest(&manifest)?;
    let methods = ablation_threshold_methods();

    println!("pseudo-label quality on the test split (no training):");
    println!("method,iou_macro,iou_micro,recall,accuracy");
    for (name, r) in
        trainer::pseudo_label_quality(&entries, Split::Test, &methods, (64, 64))?
    {
        println!(
            "{name},{:.4},{:.4},{:.4},{:.4}",
            r.iou_macro, r.iou_micro, r.recall, r.accuracy
        );
    }
    if quick {
        return Ok(());
    }

    println!("\ntrained segmenter per supervision method (test split):");
    println!("method,iou_macro,iou_micro,recall,accuracy,collapse");
    for method in &methods {
        let cfg = TrainConfig {
            threshold: method.clone(),
            epochs: 10,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (params, _) = trainer::train(&entries, &cfg)?;
        let r = trainer::evaluate(&params, &entries, Split::Test, (64, 64), 0.5)?;
        println!(
            "{},{:.4},{:.4},{:.4},{:.4},{}",
            method.name(),
            r.iou_macro,
            r.iou_micro,
            r.recall,
            r.accuracy,
            r.collapse
        );
    }
    Ok(())
}
