//! Differentiable segmentation losses over per-pixel probabilities.
//!
//! Every loss is defined per image and returns both its value and the
//! gradient with respect to the predicted probabilities; the segmenter
//! composes the sigmoid derivative itself. Probabilities entering a
//! logarithm are clamped to [1e-7, 1 - 1e-7] and the gradient is defined as
//! zero wherever that clamp is active (subgradient convention). Batch
//! reduction is the caller's job: per-image losses are averaged, never
//! pooled into one confusion.

use crate::error::{Error, Result};
use crate::thresholding::BinaryMask;

/// Clamp bound for probabilities inside logarithms.
pub const PROB_CLAMP: f64 = 1e-7;

/// Per-pixel probability map produced by the segmenter.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ProbMask {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "probability data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("probabilities must lie in [0,1]"));
        }
        Ok(ProbMask {
            width,
            height,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Soft confusion counts: tp = sum p*y, fp = sum p*(1-y), fn = sum (1-p)*y,
/// tn = sum (1-p)*(1-y).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftConfusion {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
    pub tn: f64,
}

pub fn soft_confusion(p: &ProbMask, y: &BinaryMask) -> Result<SoftConfusion> {
    check_dims(p, y)?;
    let mut conf = SoftConfusion {
        tp: 0.0,
        fp: 0.0,
        fn_: 0.0,
        tn: 0.0,
    };
    for (&pi, &yi) in p.data.iter().zip(&y.data) {
        if yi == 1 {
            conf.tp += pi;
            conf.fn_ += 1.0 - pi;
        } else {
            conf.fp += pi;
            conf.tn += 1.0 - pi;
        }
    }
    Ok(conf)
}

/// Loss value plus gradient w.r.t. each predicted probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Which loss to train with, with its hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum LossSpec {
    Bce,
    Focal { alpha: f64, gamma: f64 },
    Dice { eps: f64 },
    Tversky { alpha: f64, beta: f64, eps: f64 },
    FocalTversky { alpha: f64, beta: f64, gamma_exp: f64, eps: f64 },
}

impl LossSpec {
    /// Defaults follow the focal-tversky originating convention:
    /// alpha = 0.7, beta = 0.3, gamma = 0.75.
    pub fn default_focal_tversky() -> Self {
        LossSpec::FocalTversky {
            alpha: 0.7,
            beta: 0.3,
            gamma_exp: 0.75,
            eps: 1e-6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Bce => "bce",
            LossSpec::Focal { .. } => "focal",
            LossSpec::Dice { .. } => "dice",
            LossSpec::Tversky { .. } => "tversky",
            LossSpec::FocalTversky { .. } => "focal_tversky",
        }
    }

    pub fn evaluate(&self, p: &ProbMask, y: &BinaryMask) -> Result<LossOutput> {
        match *self {
            LossSpec::Bce => bce_loss(p, y),
            LossSpec::Focal { alpha, gamma } => focal_loss(p, y, alpha, gamma),
            LossSpec::Dice { eps } => dice_loss(p, y, eps),
            LossSpec::Tversky { alpha, beta, eps } => tversky_loss(p, y, alpha, beta, eps),
            LossSpec::FocalTversky {
                alpha,
                beta,
                gamma_exp,
                eps,
            } => focal_tversky_loss(p, y, alpha, beta, gamma_exp, eps),
        }
    }
}

fn check_dims(p: &ProbMask, y: &BinaryMask) -> Result<()> {
    if p.width != y.width || p.height != y.height {
        return Err(Error::dims(format!(
            "prediction {}x{} vs target {}x{}",
            p.width, p.height, y.width, y.height
        )));
    }
    Ok(())
}

#[inline]
fn clamped(p: f64) -> (f64, bool) {
    if p < PROB_CLAMP {
        (PROB_CLAMP, true)
    } else if p > 1.0 - PROB_CLAMP {
        (1.0 - PROB_CLAMP, true)
    } else {
        (p, false)
    }
}

/// Binary cross-entropy, mean over pixels.
pub fn bce_loss(p: &ProbMask, y: &BinaryMask) -> Result<LossOutput> {
    check_dims(p, y)?;
    let n = p.data.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(p.data.len());
    for (&pi, &yi) in p.data.iter().zip(&y.data) {
        let (pc, active) = clamped(pi);
        value -= if yi == 1 { pc.ln() } else { (1.0 - pc).ln() };
        grad.push(if active {
            0.0
        } else if yi == 1 {
            -1.0 / (pc * n)
        } else {
            1.0 / ((1.0 - pc) * n)
        });
    }
    Ok(LossOutput {
        value: value / n,
        grad,
    })
}

/// Focal loss: per pixel `-alpha_t (1 - p_t)^gamma ln p_t` with
/// `p_t = p` when `y = 1` and `1 - p` otherwise, averaged over pixels.
pub fn focal_loss(p: &ProbMask, y: &BinaryMask, alpha: f64, gamma: f64) -> Result<LossOutput> {
    check_dims(p, y)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("focal alpha must be in [0,1], got {alpha}")));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!("focal gamma must be >= 0, got {gamma}")));
    }
    let n = p.data.len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(p.data.len());
    for (&pi, &yi) in p.data.iter().zip(&y.data) {
        // Clamp on p itself so the y = 0 branch reuses exactly the bce
        // arithmetic (focal with gamma = 0 must reduce to alpha * bce).
        let (pc, active) = clamped(pi);
        let (pt_raw, pt, alpha_t, sign) = if yi == 1 {
            (pi, pc, alpha, 1.0)
        } else {
            (1.0 - pi, 1.0 - pc, 1.0 - alpha, -1.0)
        };
        let pow = if gamma == 0.0 {
            1.0
        } else {
            (1.0 - pt_raw).powf(gamma)
        };
        value += -alpha_t * pow * pt.ln();
        grad.push(if active {
            0.0
        } else {
            // d/d p_t of -alpha (1 - p_t)^g ln p_t, then d p_t / d p = sign.
            let dpow = if gamma == 0.0 {
                0.0
            } else {
                gamma * (1.0 - pt).powf(gamma - 1.0)
            };
            sign * alpha_t * (dpow * pt.ln() - pow / pt) / n
        });
    }
    Ok(LossOutput {
        value: value / n,
        grad,
    })
}

/// Tversky loss: `1 - (tp + eps) / (tp + alpha*fn + beta*fp + eps)`.
pub fn tversky_loss(
    p: &ProbMask,
    y: &BinaryMask,
    alpha: f64,
    beta: f64,
    eps: f64,
) -> Result<LossOutput> {
    let (value, grad, _) = tversky_parts(p, y, alpha, beta, eps)?;
    Ok(LossOutput { value, grad })
}

/// Dice loss is the symmetric tversky loss (alpha = beta = 0.5); sharing the
/// code path keeps the reduction identity exact.
pub fn dice_loss(p: &ProbMask, y: &BinaryMask, eps: f64) -> Result<LossOutput> {
    tversky_loss(p, y, 0.5, 0.5, eps)
}

/// Focal-tversky loss: `(1 - TI)^gamma_exp`, chain rule through tversky.
pub fn focal_tversky_loss(
    p: &ProbMask,
    y: &BinaryMask,
    alpha: f64,
    beta: f64,
    gamma_exp: f64,
    eps: f64,
) -> Result<LossOutput> {
    if !(gamma_exp.is_finite() && gamma_exp > 0.0) {
        return Err(Error::invalid(format!(
            "focal-tversky exponent must be > 0, got {gamma_exp}"
        )));
    }
    let (base, mut grad, _) = tversky_parts(p, y, alpha, beta, eps)?;
    let value = base.powf(gamma_exp);
    // At the exact minimum (base = 0) the power rule blows up for
    // gamma_exp < 1; use the zero subgradient there.
    let scale = if base > 0.0 {
        gamma_exp * base.powf(gamma_exp - 1.0)
    } else {
        0.0
    };
    for g in &mut grad {
        *g *= scale;
    }
    Ok(LossOutput { value, grad })
}

/// Shared tversky computation: value `1 - TI`, gradient, and the index.
fn tversky_parts(
    p: &ProbMask,
    y: &BinaryMask,
    alpha: f64,
    beta: f64,
    eps: f64,
) -> Result<(f64, Vec<f64>, f64)> {
    check_dims(p, y)?;
    if !(alpha.is_finite() && alpha >= 0.0) || !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(format!(
            "tversky weights must be >= 0, got alpha {alpha}, beta {beta}"
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    let conf = soft_confusion(p, y)?;
    let num = conf.tp + eps;
    let den = conf.tp + alpha * conf.fn_ + beta * conf.fp + eps;
    let ti = num / den;
    // d num / d p_i = y_i; d den / d p_i = y_i (1 - alpha) + beta (1 - y_i).
    let grad = p
        .data
        .iter()
        .zip(&y.data)
        .map(|(_, &yi)| {
            let dnum = yi as f64;
            let dden = yi as f64 * (1.0 - alpha) + beta * (1.0 - yi as f64);
            -(dnum * den - num * dden) / (den * den)
        })
        .collect();
    Ok((1.0 - ti, grad, ti))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_pair(rng: &mut SplitMix64, w: usize, h: usize) -> (ProbMask, BinaryMask) {
        // Probabilities stay in [0.05, 0.95]: closer to 0 or 1, the central
        // difference's own truncation error (~(step/p)^2 / 3 for the log
        // losses) exceeds the 1e-5 tolerance, so the oracle would be the
        // inaccurate side.
        let p = ProbMask::new(w, h, (0..w * h).map(|_| rng.uniform(0.05, 0.95)).collect()).unwrap();
        let y = BinaryMask::new(w, h, (0..w * h).map(|_| (rng.next_f64() < 0.4) as u8).collect())
            .unwrap();
        (p, y)
    }

    fn hard_from(y: &BinaryMask) -> ProbMask {
        ProbMask::new(
            y.width,
            y.height,
            y.data.iter().map(|&v| v as f64).collect(),
        )
        .unwrap()
    }

    /// Central finite differences of `loss` at `p`, skipping pixels where
    /// the probability clamp is active.
    fn finite_diff_check<F>(loss: F, p: &ProbMask, y: &BinaryMask, tol: f64)
    where
        F: Fn(&ProbMask, &BinaryMask) -> LossOutput,
    {
        let step = 1e-4;
        let out = loss(p, y);
        for i in 0..p.data.len() {
            let pv = p.data[i];
            if pv < PROB_CLAMP || pv > 1.0 - PROB_CLAMP || pv - step < 0.0 || pv + step > 1.0 {
                continue;
            }
            let mut plus = p.clone();
            plus.data[i] = pv + step;
            let mut minus = p.clone();
            minus.data[i] = pv - step;
            let numeric = (loss(&plus, y).value - loss(&minus, y).value) / (2.0 * step);
            let analytic = out.grad[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom <= tol,
                "pixel {i}: analytic {analytic} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn soft_confusion_examples() {
        let y = BinaryMask::new(2, 1, vec![0, 1]).unwrap();
        let p = ProbMask::new(2, 1, vec![0.2, 0.8]).unwrap();
        let c = soft_confusion(&p, &y).unwrap();
        assert!((c.tp - 0.8).abs() < 1e-15);
        assert!((c.fp - 0.2).abs() < 1e-15);
        assert!((c.fn_ - 0.2).abs() < 1e-15);
        assert!((c.tn - 0.8).abs() < 1e-15);

        // Hard identity: p = y.
        let hard = hard_from(&y);
        let c = soft_confusion(&hard, &y).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1.0, 0.0, 0.0, 1.0));

        // Uniform half probabilities split each class evenly.
        let p_half = ProbMask::new(2, 1, vec![0.5, 0.5]).unwrap();
        let c = soft_confusion(&p_half, &y).unwrap();
        assert_eq!((c.tp, c.fn_), (0.5, 0.5));
        assert_eq!((c.fp, c.tn), (0.5, 0.5));
    }

    #[test]
    fn soft_confusion_sums_to_pixel_count() {
        let mut rng = SplitMix64::new(21);
        let (p, y) = random_pair(&mut rng, 16, 16);
        let c = soft_confusion(&p, &y).unwrap();
        assert!((c.tp + c.fp + c.fn_ + c.tn - 256.0).abs() < 1e-9);
    }

    #[test]
    fn soft_confusion_complement_symmetry() {
        let mut rng = SplitMix64::new(22);
        let (p, y) = random_pair(&mut rng, 8, 8);
        let flipped_p = ProbMask::new(8, 8, p.data.iter().map(|v| 1.0 - v).collect()).unwrap();
        let a = soft_confusion(&p, &y).unwrap();
        let b = soft_confusion(&flipped_p, &y.complement()).unwrap();
        assert!((a.tp - b.tn).abs() < 1e-12);
        assert!((a.fp - b.fn_).abs() < 1e-12);
        assert!((a.fn_ - b.fp).abs() < 1e-12);
        assert!((a.tn - b.tp).abs() < 1e-12);
    }

    #[test]
    fn bce_known_values() {
        let y = BinaryMask::new(2, 2, vec![1, 0, 1, 0]).unwrap();
        let exact = hard_from(&y);
        assert!(bce_loss(&exact, &y).unwrap().value <= 1e-6);

        let half = ProbMask::new(2, 2, vec![0.5; 4]).unwrap();
        let out = bce_loss(&half, &y).unwrap();
        assert!((out.value - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_complement_invariance() {
        let mut rng = SplitMix64::new(40);
        let (p, y) = random_pair(&mut rng, 8, 8);
        let flipped_p = ProbMask::new(8, 8, p.data.iter().map(|v| 1.0 - v).collect()).unwrap();
        let a = bce_loss(&p, &y).unwrap().value;
        let b = bce_loss(&flipped_p, &y.complement()).unwrap().value;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn focal_hand_value() {
        let y = BinaryMask::new(1, 1, vec![1]).unwrap();
        let p = ProbMask::new(1, 1, vec![0.9]).unwrap();
        let out = focal_loss(&p, &y, 0.25, 2.0).unwrap();
        // 0.25 * 0.1^2 * (-ln 0.9) = 2.634013e-4
        assert!((out.value - 2.634013e-4).abs() < 1e-9);
    }

    #[test]
    fn focal_perfect_prediction_is_zero() {
        let y = BinaryMask::new(2, 1, vec![1, 0]).unwrap();
        let p = hard_from(&y);
        let out = focal_loss(&p, &y, 0.25, 2.0).unwrap();
        assert_eq!(out.value, 0.0, "(1 - p_t)^gamma vanishes exactly");
    }

    #[test]
    fn identities_hold_to_1e12() {
        let mut rng = SplitMix64::new(55);
        for _ in 0..20 {
            let (p, y) = random_pair(&mut rng, 16, 16);

            let dice = dice_loss(&p, &y, 1e-6).unwrap();
            let tv = tversky_loss(&p, &y, 0.5, 0.5, 1e-6).unwrap();
            assert!((dice.value - tv.value).abs() < 1e-12);
            for (a, b) in dice.grad.iter().zip(&tv.grad) {
                assert!((a - b).abs() < 1e-12);
            }

            let ft = focal_tversky_loss(&p, &y, 0.7, 0.3, 1.0, 1e-6).unwrap();
            let tv2 = tversky_loss(&p, &y, 0.7, 0.3, 1e-6).unwrap();
            assert!((ft.value - tv2.value).abs() < 1e-12);
            for (a, b) in ft.grad.iter().zip(&tv2.grad) {
                assert!((a - b).abs() < 1e-12);
            }

            let f = focal_loss(&p, &y, 0.5, 0.0).unwrap();
            let b = bce_loss(&p, &y).unwrap();
            assert!((f.value - 0.5 * b.value).abs() < 1e-12);
            for (a, g) in f.grad.iter().zip(&b.grad) {
                assert!((a - 0.5 * g).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tversky_hand_value() {
        // tp = 0.8, fn = 0.2, fp = 0.2 built from two pixels.
        let y = BinaryMask::new(2, 1, vec![1, 0]).unwrap();
        let p = ProbMask::new(2, 1, vec![0.8, 0.2]).unwrap();
        let out = tversky_loss(&p, &y, 0.7, 0.3, 1e-6).unwrap();
        // 1 - 0.8/(0.8 + 0.7*0.2 + 0.3*0.2) = 0.2
        assert!((out.value - 0.2).abs() < 1e-5);
    }

    #[test]
    fn focal_tversky_hand_value() {
        assert!((0.2f64.powf(0.75) - 0.29907).abs() < 1e-5);
        let y = BinaryMask::new(2, 1, vec![1, 0]).unwrap();
        let p = ProbMask::new(2, 1, vec![0.8, 0.2]).unwrap();
        let out = focal_tversky_loss(&p, &y, 0.7, 0.3, 0.75, 1e-6).unwrap();
        assert!((out.value - 0.29907).abs() < 1e-4);
    }

    #[test]
    fn dice_extremes() {
        let y = BinaryMask::new(2, 1, vec![1, 0]).unwrap();
        let p = hard_from(&y);
        assert!(dice_loss(&p, &y, 1e-6).unwrap().value < 1e-5);

        // Disjoint hard masks.
        let p_disjoint = ProbMask::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(dice_loss(&p_disjoint, &y, 1e-6).unwrap().value > 0.999);
    }

    #[test]
    fn all_losses_nonnegative_and_zero_at_target() {
        let mut rng = SplitMix64::new(60);
        let specs = [
            LossSpec::Bce,
            LossSpec::Focal { alpha: 0.25, gamma: 2.0 },
            LossSpec::Dice { eps: 1e-6 },
            LossSpec::Tversky { alpha: 0.7, beta: 0.3, eps: 1e-6 },
            LossSpec::default_focal_tversky(),
        ];
        for _ in 0..10 {
            let (p, y) = random_pair(&mut rng, 8, 8);
            let hard = hard_from(&y);
            for spec in &specs {
                assert!(spec.evaluate(&p, &y).unwrap().value >= 0.0, "{}", spec.name());
                assert!(
                    spec.evaluate(&hard, &y).unwrap().value <= 1e-5,
                    "{} at target",
                    spec.name()
                );
            }
        }
    }

    #[test]
    fn losses_invariant_under_joint_permutation() {
        let mut rng = SplitMix64::new(61);
        let (p, y) = random_pair(&mut rng, 8, 8);
        let mut perm: Vec<usize> = (0..64).collect();
        rng.shuffle(&mut perm);
        let p2 = ProbMask::new(8, 8, perm.iter().map(|&i| p.data[i]).collect()).unwrap();
        let y2 = BinaryMask::new(8, 8, perm.iter().map(|&i| y.data[i]).collect()).unwrap();
        for spec in [
            LossSpec::Bce,
            LossSpec::Focal { alpha: 0.25, gamma: 2.0 },
            LossSpec::Dice { eps: 1e-6 },
            LossSpec::default_focal_tversky(),
        ] {
            let a = spec.evaluate(&p, &y).unwrap().value;
            let b = spec.evaluate(&p2, &y2).unwrap().value;
            assert!((a - b).abs() < 1e-12, "{}", spec.name());
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SplitMix64::new(0x5EED);
        for _ in 0..50 {
            let (p, y) = random_pair(&mut rng, 16, 16);
            finite_diff_check(|p, y| bce_loss(p, y).unwrap(), &p, &y, 1e-5);
            finite_diff_check(|p, y| focal_loss(p, y, 0.25, 2.0).unwrap(), &p, &y, 1e-5);
            finite_diff_check(|p, y| dice_loss(p, y, 1e-6).unwrap(), &p, &y, 1e-5);
            finite_diff_check(
                |p, y| tversky_loss(p, y, 0.7, 0.3, 1e-6).unwrap(),
                &p,
                &y,
                1e-5,
            );
            finite_diff_check(
                |p, y| focal_tversky_loss(p, y, 0.7, 0.3, 0.75, 1e-6).unwrap(),
                &p,
                &y,
                1e-5,
            );
        }
    }

    #[test]
    fn dim_mismatch_is_rejected() {
        let p = ProbMask::new(2, 2, vec![0.5; 4]).unwrap();
        let y = BinaryMask::new(2, 1, vec![1, 0]).unwrap();
        assert!(bce_loss(&p, &y).is_err());
        assert!(soft_confusion(&p, &y).is_err());
    }

    #[test]
    fn bad_hyperparameters_are_rejected() {
        let y = BinaryMask::new(1, 1, vec![1]).unwrap();
        let p = ProbMask::new(1, 1, vec![0.5]).unwrap();
        assert!(focal_loss(&p, &y, 1.5, 2.0).is_err());
        assert!(focal_loss(&p, &y, 0.5, -1.0).is_err());
        assert!(tversky_loss(&p, &y, -0.1, 0.3, 1e-6).is_err());
        assert!(tversky_loss(&p, &y, 0.7, 0.3, 0.0).is_err());
        assert!(focal_tversky_loss(&p, &y, 0.7, 0.3, 0.0, 1e-6).is_err());
        assert!(focal_tversky_loss(&p, &y, 0.7, 0.3, -1.0, 1e-6).is_err());
    }
}
