//! Evaluate every segmentation loss on one prediction/target pair and
//! verify a few analytic gradient entries against central finite
//! differences.

use sass_seg::losses::{LossSpec, ProbMask};
use sass_seg::rng::SplitMix64;
use sass_seg::thresholding::BinaryMask;

fn main() -> sass_seg::Result<()> {
    let mut rng = SplitMix64::new(3);
    let n = 16 * 16;
    let p = ProbMask::new(16, 16, (0..n).map(|_| rng.uniform(0.05, 0.95)).collect())?;
    let y = BinaryMask::new(16, 16, (0..n).map(|_| (rng.next_f64() < 0.3) as u8).collect())?;

    let specs = [
        LossSpec::Bce,
        LossSpec::Focal { alpha: 0.25, gamma: 2.0 },
        LossSpec::Dice { eps: 1e-6 },
        LossSpec::Tversky { alpha: 0.7, beta: 0.3, eps: 1e-6 },
        LossSpec::default_focal_tversky(),
    ];

    let step = 1e-4;
    for spec in &specs {
        let out = spec.evaluate(&p, &y)?;
        let mut worst = 0.0f64;
        for probe in [0usize, 57, 128, 200, 255] {
            let mut plus = p.clone();
            plus.data[probe] += step;
            let mut minus = p.clone();
            minus.data[probe] -= step;
            let numeric =
                (spec.evaluate(&plus, &y)?.value - spec.evaluate(&minus, &y)?.value) / (2.0 * step);
            let analytic = out.grad[probe];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        println!(
            "{:14} value {:.6}   worst finite-difference rel err {:.2e}",
            spec.name(),
            out.value,
            worst
        );
    }
    Ok(())
}
