//! Full-network gradient check: every one of the 2993 parameters' backward
//! gradient is compared against central finite differences on an 8x8 input.

use std::time::Instant;

use sass_seg::imaging::GrayImage;
use sass_seg::losses::focal_tversky_loss;
use sass_seg::rng::SplitMix64;
use sass_seg::segmenter::{self, SegmenterParams, PARAM_COUNT};
use sass_seg::thresholding::BinaryMask;

fn loss_at(params: &SegmenterParams, img: &GrayImage, target: &BinaryMask) -> f64 {
    let (probs, _) = segmenter::forward(params, std::slice::from_ref(img)).unwrap();
    focal_tversky_loss(&probs[0], target, 0.7, 0.3, 0.75, 1e-6)
        .unwrap()
        .value
}

fn main() {
    let mut rng = SplitMix64::new(1234);
    let img = GrayImage::new(8, 8, (0..64).map(|_| rng.below(256) as u8).collect()).unwrap();
    let target =
        BinaryMask::new(8, 8, (0..64).map(|_| (rng.next_f64() < 0.4) as u8).collect()).unwrap();
    let params = segmenter::init_params(99);

    let (probs, cache) = segmenter::forward(&params, std::slice::from_ref(&img)).unwrap();
    let loss = focal_tversky_loss(&probs[0], &target, 0.7, 0.3, 0.75, 1e-6).unwrap();
    let analytic = segmenter::backward(&params, &cache, &[loss.grad]).unwrap();

    let start = Instant::now();
    let step = 1e-5;
    let flat = params.flatten();
    let mut worst = (0.0f64, 0usize);
    for i in 0..PARAM_COUNT {
        let mut plus = flat.clone();
        plus[i] += step;
        let mut minus = flat.clone();
        minus[i] -= step;
        let numeric = (loss_at(&SegmenterParams::unflatten(&plus).unwrap(), &img, &target)
            - loss_at(&SegmenterParams::unflatten(&minus).unwrap(), &img, &target))
            / (2.0 * step);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    println!(
        "checked {PARAM_COUNT} parameters in {:.1?}; worst rel err {:.3e} (parameter {})",
        start.elapsed(),
        worst.0,
        worst.1
    );
    assert!(worst.0 <= 1e-4, "gradient check failed");
    println!("all gradients within 1e-4 of finite differences");
}
