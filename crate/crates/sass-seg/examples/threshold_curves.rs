//! Inspect the global threshold criteria on a bimodal histogram: Otsu's
//! between-class variance, the minimum-error criterion, and the generalized
//! criterion that interpolates between them.

use sass_seg::imaging::Histogram;
use sass_seg::thresholding::{argmax_set, ght_threshold, met_threshold, otsu_threshold};

fn main() -> sass_seg::Result<()> {
    // Two discretized Gaussian modes of unequal mass.
    let mut counts = [0u64; 256];
    for (i, c) in counts.iter_mut().enumerate() {
        let g = |mu: f64, sigma: f64, scale: f64| {
            let z = (i as f64 - mu) / sigma;
            (scale * (-0.5 * z * z).exp()).round() as u64
        };
        *c = g(80.0, 12.0, 900.0) + g(185.0, 18.0, 400.0);
    }
    let hist = Histogram::from_counts(counts)?;

    let otsu = otsu_threshold(&hist)?;
    let met = met_threshold(&hist)?;
    let (_, sigma) = hist.stats();
    let ght = ght_threshold(&hist, 1.0, sigma, 0.0, 0.5)?;

    println!("otsu threshold {:.2} (argmax {:?})", otsu.threshold, argmax_set(&otsu.score_curve));
    println!("met  threshold {:.2}", met.threshold);
    println!("ght  threshold {:.2} (nu=1, tau=intensity std {:.1})", ght.threshold, sigma);

    // The curves themselves, CSV on stdout for plotting.
    println!("\ncut,otsu_score,met_score,ght_score");
    for t in 0..255 {
        println!(
            "{t},{},{},{}",
            otsu.score_curve[t], met.score_curve[t], ght.score_curve[t]
        );
    }
    Ok(())
}
