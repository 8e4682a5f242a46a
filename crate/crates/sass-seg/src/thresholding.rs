//! Binarization methods used to generate pseudo-labels.
//!
//! Global methods (fixed, Otsu, minimum-error, generalized histogram
//! thresholding) search the 255 candidate cuts `t` of a 256-bin histogram,
//! where class 0 holds intensities `<= t` and class 1 holds `> t`. Ties are
//! broken by taking the arithmetic mean of the maximizing cut set, which is
//! why thresholds are real-valued; masks always use a strict `>` comparison.
//! Local methods (adaptive mean / adaptive Gaussian) threshold each pixel
//! against a windowed statistic.

use crate::error::{Error, Result};
use crate::imaging::{compute_histogram, GrayImage, Histogram};

/// Numerical floor applied to class masses and variances so that logs and
/// divisions stay finite on degenerate histograms.
const MASS_FLOOR: f64 = 1e-30;

/// Per-pixel {0,1} mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "mask data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![value & 1; width * height],
        }
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn foreground_fraction(&self) -> f64 {
        self.foreground_count() as f64 / self.data.len() as f64
    }
}

/// Which binarization to run, plus an optional polarity flip applied to the
/// finished mask. Foreground defaults to "above threshold".
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdMethod {
    pub kind: ThresholdKind,
    pub invert: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdKind {
    /// One fixed cut for every image.
    Fixed(f64),
    Otsu,
    /// Minimum-error thresholding; identical to `Ght` with `nu = kappa = 0`.
    Met,
    /// Generalized histogram thresholding. `tau = None` means "use the
    /// image's intensity standard deviation", resolved per image.
    Ght {
        nu: f64,
        tau: Option<f64>,
        kappa: f64,
        omega: f64,
    },
    AdaptiveMean {
        window: usize,
        c: f64,
    },
    AdaptiveGaussian {
        window: usize,
        sigma: f64,
        c: f64,
    },
}

impl ThresholdMethod {
    pub fn new(kind: ThresholdKind) -> Self {
        ThresholdMethod {
            kind,
            invert: false,
        }
    }

    /// Short name used in CSV reports.
    pub fn name(&self) -> &'static str {
        match self.kind {
            ThresholdKind::Fixed(_) => "fixed",
            ThresholdKind::Otsu => "otsu",
            ThresholdKind::Met => "met",
            ThresholdKind::Ght { .. } => "ght",
            ThresholdKind::AdaptiveMean { .. } => "adaptive_mean",
            ThresholdKind::AdaptiveGaussian { .. } => "adaptive_gaussian",
        }
    }
}

/// Outcome of a global threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    /// Mean of the maximizing cut set; real-valued.
    pub threshold: f64,
    /// Criterion value per candidate cut `t` in `0..=254`. Empty for
    /// `Fixed`, which searches nothing.
    pub score_curve: Vec<f64>,
}

/// All cuts achieving the exact maximum of the curve.
pub fn argmax_set(curve: &[f64]) -> Vec<usize> {
    let max = curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    curve
        .iter()
        .enumerate()
        .filter(|(_, &s)| s == max)
        .map(|(t, _)| t)
        .collect()
}

fn mean_of_argmax(curve: &[f64]) -> f64 {
    let set = argmax_set(curve);
    set.iter().sum::<usize>() as f64 / set.len() as f64
}

/// Otsu's method: maximize the between-class variance
/// `score(t) = w0(t) * w1(t) * (mu0(t) - mu1(t))^2` with `w` the class mass
/// fractions. Cuts with an empty class score 0.
///
/// Cumulative statistics are integer sums, so the score is bit-identical to
/// recomputing class statistics from scratch at every cut.
pub fn otsu_threshold(h: &Histogram) -> Result<ThresholdResult> {
    if h.total == 0 {
        return Err(Error::invalid("empty histogram"));
    }
    let total = h.total as f64;
    let sum_all: u64 = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &n)| i as u64 * n)
        .sum();

    let mut curve = Vec::with_capacity(255);
    let mut count0 = 0u64;
    let mut sum0 = 0u64;
    for t in 0..255usize {
        count0 += h.counts[t];
        sum0 += t as u64 * h.counts[t];
        let count1 = h.total - count0;
        let score = if count0 == 0 || count1 == 0 {
            0.0
        } else {
            let w0 = count0 as f64 / total;
            let w1 = count1 as f64 / total;
            let mu0 = sum0 as f64 / count0 as f64;
            let mu1 = (sum_all - sum0) as f64 / count1 as f64;
            let diff = mu0 - mu1;
            w0 * w1 * diff * diff
        };
        curve.push(score);
    }
    Ok(ThresholdResult {
        threshold: mean_of_argmax(&curve),
        score_curve: curve,
    })
}

/// Generalized histogram thresholding.
///
/// For each cut, with raw class masses `w_k` (floored at 1e-30), mass shares
/// `p_k = w_k / (w0 + w1)`, class means `mu_k` and within-class scatters
/// `d_k = sum n_i (i - mu_k)^2`:
///
/// ```text
/// v_k = max(1e-30, (p_k nu tau^2 + d_k) / (p_k nu + w_k))
/// f_k = -d_k / v_k - w_k ln v_k + 2 (w_k + kappa w(k)) ln w_k
/// ```
///
/// with `w(0) = omega`, `w(1) = 1 - omega`, and the threshold maximizes
/// `f_0 + f_1`. `nu -> inf` with `tau = 1` recovers Otsu's criterion;
/// `nu = kappa = 0` recovers minimum-error thresholding.
pub fn ght_threshold(
    h: &Histogram,
    nu: f64,
    tau: f64,
    kappa: f64,
    omega: f64,
) -> Result<ThresholdResult> {
    validate_ght_params(nu, tau, kappa, omega)?;
    if h.total == 0 {
        return Err(Error::invalid("empty histogram"));
    }

    let n_all: u64 = h.total;
    let s1_all: u64 = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &n)| i as u64 * n)
        .sum();
    let s2_all: u64 = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &n)| (i * i) as u64 * n)
        .sum();

    let mut curve = Vec::with_capacity(255);
    let mut c0 = 0u64;
    let mut m1 = 0u64;
    let mut m2 = 0u64;
    for t in 0..255usize {
        c0 += h.counts[t];
        m1 += t as u64 * h.counts[t];
        m2 += (t * t) as u64 * h.counts[t];

        let w0 = (c0 as f64).max(MASS_FLOOR);
        let w1 = ((n_all - c0) as f64).max(MASS_FLOOR);
        let w_sum = w0 + w1;
        let f0 = ght_half(w0, m1, m2, w_sum, nu, tau, kappa * omega);
        let f1 = ght_half(
            w1,
            s1_all - m1,
            s2_all - m2,
            w_sum,
            nu,
            tau,
            kappa * (1.0 - omega),
        );
        curve.push(f0 + f1);
    }
    Ok(ThresholdResult {
        threshold: mean_of_argmax(&curve),
        score_curve: curve,
    })
}

/// One class's contribution. `w` is the floored class mass, `s1`/`s2` the
/// raw first/second moments, `w_sum` the sum of both floored masses, and
/// `kappa_w` the class's share of the concentration prior.
fn ght_half(w: f64, s1: u64, s2: u64, w_sum: f64, nu: f64, tau: f64, kappa_w: f64) -> f64 {
    let s1 = s1 as f64;
    let s2 = s2 as f64;
    // d = sum n (i - mu)^2 = s2 - s1^2 / w, guarded against rounding.
    let d = (s2 - s1 * s1 / w).max(0.0);
    let p = w / w_sum;
    let v = ((p * nu * tau * tau + d) / (p * nu + w)).max(MASS_FLOOR);
    -d / v - w * v.ln() + 2.0 * (w + kappa_w) * w.ln()
}

fn validate_ght_params(nu: f64, tau: f64, kappa: f64, omega: f64) -> Result<()> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::invalid(format!("ght nu must be >= 0, got {nu}")));
    }
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid(format!("ght tau must be >= 0, got {tau}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::invalid(format!("ght kappa must be >= 0, got {kappa}")));
    }
    if !(omega.is_finite() && (0.0..=1.0).contains(&omega)) {
        return Err(Error::invalid(format!(
            "ght omega must be in [0,1], got {omega}"
        )));
    }
    Ok(())
}

/// Minimum-error thresholding, by definition `ght_threshold` with
/// `nu = 0`, `kappa = 0` (tau is irrelevant at nu = 0).
pub fn met_threshold(h: &Histogram) -> Result<ThresholdResult> {
    ght_threshold(h, 0.0, 1.0, 0.0, 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveKind {
    Mean,
    Gaussian,
}

/// Local thresholding: each pixel is compared against the (plain or
/// Gaussian-weighted) mean of the `window` x `window` neighborhood around
/// it, computed with edge-replicate padding, offset by `c`. Foreground is
/// `pixel > T(x, y)` with `T = local mean + c`, so a positive `c` makes the
/// detector conservative (a constant image binarizes to all background).
pub fn adaptive_threshold(
    img: &GrayImage,
    kind: AdaptiveKind,
    window: usize,
    sigma: f64,
    c: f64,
) -> Result<BinaryMask> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::invalid(format!(
            "adaptive window must be odd and >= 3, got {window}"
        )));
    }
    if kind == AdaptiveKind::Gaussian && !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    let r = (window / 2) as isize;
    let (w, h) = (img.width as isize, img.height as isize);

    // 1-D kernel; all ones for the mean variant. The normalizer is the sum
    // over the full window (replicate padding keeps every tap in play).
    let kernel: Vec<f64> = match kind {
        AdaptiveKind::Mean => vec![1.0; window],
        AdaptiveKind::Gaussian => (0..window)
            .map(|u| {
                let du = u as f64 - r as f64;
                (-du * du / (2.0 * sigma * sigma)).exp()
            })
            .collect(),
    };
    let mut norm = 0.0;
    for ky in &kernel {
        for kx in &kernel {
            norm += ky * kx;
        }
    }

    let mut data = Vec::with_capacity(img.width * img.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (uy, ky) in kernel.iter().enumerate() {
                let sy = (y + uy as isize - r).clamp(0, h - 1) as usize;
                for (ux, kx) in kernel.iter().enumerate() {
                    let sx = (x + ux as isize - r).clamp(0, w - 1) as usize;
                    acc += ky * kx * img.get(sx, sy) as f64;
                }
            }
            let local_threshold = acc / norm + c;
            data.push((img.get(x as usize, y as usize) as f64 > local_threshold) as u8);
        }
    }
    Ok(BinaryMask {
        width: img.width,
        height: img.height,
        data,
    })
}

/// Binarize against a global threshold: foreground is strictly greater.
pub fn threshold_mask(img: &GrayImage, threshold: f64) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        data: img
            .data
            .iter()
            .map(|&v| (v as f64 > threshold) as u8)
            .collect(),
    }
}

/// Run the method on one image. Global methods compute a fresh threshold
/// from this image's histogram, so the cut adapts per image. Returns the
/// mask together with the search outcome (None for local methods).
pub fn pseudo_mask_detailed(
    img: &GrayImage,
    method: &ThresholdMethod,
) -> Result<(BinaryMask, Option<ThresholdResult>)> {
    let (mask, detail) = match &method.kind {
        ThresholdKind::Fixed(t) => {
            if !t.is_finite() {
                return Err(Error::invalid("fixed threshold must be finite"));
            }
            (
                threshold_mask(img, *t),
                Some(ThresholdResult {
                    threshold: *t,
                    score_curve: Vec::new(),
                }),
            )
        }
        ThresholdKind::Otsu => {
            let res = otsu_threshold(&compute_histogram(img)?)?;
            (threshold_mask(img, res.threshold), Some(res))
        }
        ThresholdKind::Met => {
            let res = met_threshold(&compute_histogram(img)?)?;
            (threshold_mask(img, res.threshold), Some(res))
        }
        ThresholdKind::Ght {
            nu,
            tau,
            kappa,
            omega,
        } => {
            let resolved_tau = match tau {
                Some(t) => *t,
                None => img.intensity_stats().1,
            };
            let res = ght_threshold(&compute_histogram(img)?, *nu, resolved_tau, *kappa, *omega)?;
            (threshold_mask(img, res.threshold), Some(res))
        }
        ThresholdKind::AdaptiveMean { window, c } => (
            adaptive_threshold(img, AdaptiveKind::Mean, *window, 1.0, *c)?,
            None,
        ),
        ThresholdKind::AdaptiveGaussian { window, sigma, c } => (
            adaptive_threshold(img, AdaptiveKind::Gaussian, *window, *sigma, *c)?,
            None,
        ),
    };
    Ok(if method.invert {
        (mask.complement(), detail)
    } else {
        (mask, detail)
    })
}

/// [`pseudo_mask_detailed`] without the search outcome.
pub fn generate_pseudo_mask(img: &GrayImage, method: &ThresholdMethod) -> Result<BinaryMask> {
    pseudo_mask_detailed(img, method).map(|(mask, _)| mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn hist_from_pairs(pairs: &[(usize, u64)]) -> Histogram {
        let mut counts = [0u64; 256];
        for &(bin, n) in pairs {
            counts[bin] += n;
        }
        Histogram::from_counts(counts).unwrap()
    }

    fn random_hist(rng: &mut SplitMix64, max_count: u64) -> Histogram {
        let mut counts = [0u64; 256];
        for c in counts.iter_mut() {
            *c = rng.below(max_count + 1);
        }
        if counts.iter().all(|&c| c == 0) {
            counts[128] = 1;
        }
        Histogram::from_counts(counts).unwrap()
    }

    /// O(L^2) Otsu: recompute class statistics from scratch at every cut,
    /// with the same formula ordering as the implementation.
    fn otsu_brute_force_curve(h: &Histogram) -> Vec<f64> {
        let total = h.total as f64;
        (0..255usize)
            .map(|t| {
                let mut count0 = 0u64;
                let mut sum0 = 0u64;
                for i in 0..=t {
                    count0 += h.counts[i];
                    sum0 += i as u64 * h.counts[i];
                }
                let mut count1 = 0u64;
                let mut sum1 = 0u64;
                for i in t + 1..256 {
                    count1 += h.counts[i];
                    sum1 += i as u64 * h.counts[i];
                }
                if count0 == 0 || count1 == 0 {
                    0.0
                } else {
                    let w0 = count0 as f64 / total;
                    let w1 = count1 as f64 / total;
                    let mu0 = sum0 as f64 / count0 as f64;
                    let mu1 = sum1 as f64 / count1 as f64;
                    let diff = mu0 - mu1;
                    w0 * w1 * diff * diff
                }
            })
            .collect()
    }

    /// Minimum-error criterion evaluated directly from per-class statistics
    /// (v_k = d_k / w_k), independent of the GHT code path.
    fn met_direct_curve(h: &Histogram) -> Vec<f64> {
        (0..255usize)
            .map(|t| {
                let class = |range: std::ops::Range<usize>| -> f64 {
                    let count: u64 = range.clone().map(|i| h.counts[i]).sum();
                    let w = (count as f64).max(1e-30);
                    let mu = range
                        .clone()
                        .map(|i| i as f64 * h.counts[i] as f64)
                        .sum::<f64>()
                        / w;
                    let d: f64 = range
                        .clone()
                        .map(|i| h.counts[i] as f64 * (i as f64 - mu) * (i as f64 - mu))
                        .sum();
                    let v = (d / w).max(1e-30);
                    -d / v - w * v.ln() + 2.0 * w * w.ln()
                };
                class(0..t + 1) + class(t + 1..256)
            })
            .collect()
    }

    #[test]
    fn otsu_two_spike_histogram() {
        let h = hist_from_pairs(&[(50, 10), (200, 10)]);
        let res = otsu_threshold(&h).unwrap();
        // Every cut in [50, 199] separates the spikes perfectly.
        assert_eq!(argmax_set(&res.score_curve), (50..200).collect::<Vec<_>>());
        assert_eq!(res.threshold, 124.5);
    }

    #[test]
    fn otsu_single_bin_degenerates_to_midpoint() {
        let h = hist_from_pairs(&[(77, 9)]);
        let res = otsu_threshold(&h).unwrap();
        assert!(res.score_curve.iter().all(|&s| s == 0.0));
        assert_eq!(res.threshold, 127.0);
        let img = GrayImage::filled(3, 3, 77).unwrap();
        let mask = generate_pseudo_mask(&img, &ThresholdMethod::new(ThresholdKind::Otsu)).unwrap();
        let fg = mask.foreground_count();
        assert!(fg == 0 || fg == 9, "mask must be a single class");
    }

    #[test]
    fn otsu_matches_brute_force_on_random_histograms() {
        let mut rng = SplitMix64::new(0xA11CE);
        for _ in 0..200 {
            let h = random_hist(&mut rng, 1000);
            let fast = otsu_threshold(&h).unwrap();
            let brute = otsu_brute_force_curve(&h);
            assert_eq!(fast.score_curve, brute, "score curves must be bit-identical");
            assert_eq!(argmax_set(&fast.score_curve), argmax_set(&brute));
        }
    }

    #[test]
    fn otsu_argmax_translates_with_histogram_shift() {
        let mut rng = SplitMix64::new(0x5317);
        for _ in 0..50 {
            let mut lo = [0u64; 256];
            for item in lo.iter_mut().take(200) {
                *item = rng.below(100);
            }
            if lo.iter().all(|&c| c == 0) {
                lo[10] = 1;
            }
            let shift = 30usize;
            let mut hi = [0u64; 256];
            for (i, &c) in lo.iter().take(200).enumerate() {
                hi[i + shift] = c;
            }
            let a = otsu_threshold(&Histogram::from_counts(lo).unwrap()).unwrap();
            let b = otsu_threshold(&Histogram::from_counts(hi).unwrap()).unwrap();
            let shifted: Vec<usize> = argmax_set(&a.score_curve).iter().map(|t| t + shift).collect();
            assert_eq!(shifted, argmax_set(&b.score_curve));
        }
    }

    #[test]
    fn ght_reduces_to_met_at_nu_zero() {
        let mut rng = SplitMix64::new(0xBEEF);
        for _ in 0..100 {
            let h = random_hist(&mut rng, 50);
            let ght = ght_threshold(&h, 0.0, 123.0, 0.0, 0.5).unwrap();
            let met = met_direct_curve(&h);
            assert_eq!(
                argmax_set(&ght.score_curve),
                argmax_set(&met),
                "nu=0, kappa=0 must locate the minimum-error optimum"
            );
        }
    }

    #[test]
    fn ght_reduces_to_otsu_at_large_nu() {
        let mut rng = SplitMix64::new(0xCAFE);
        for _ in 0..100 {
            let h = random_hist(&mut rng, 20);
            let ght = ght_threshold(&h, 1e9, 1.0, 0.0, 0.5).unwrap();
            let otsu = otsu_threshold(&h).unwrap();
            assert_eq!(
                argmax_set(&ght.score_curve),
                argmax_set(&otsu.score_curve),
                "large-nu GHT must locate Otsu's optimum"
            );
        }
    }

    #[test]
    fn met_is_the_ght_alias_bit_exactly() {
        let mut rng = SplitMix64::new(0x9);
        for _ in 0..20 {
            let h = random_hist(&mut rng, 300);
            let met = met_threshold(&h).unwrap();
            for &tau in &[0.5, 1.0, 42.0] {
                let ght = ght_threshold(&h, 0.0, tau, 0.0, 0.5).unwrap();
                assert_eq!(met, ght, "tau is irrelevant at nu = 0");
            }
        }
    }

    #[test]
    fn met_separates_two_gaussian_modes() {
        // Two equal-mass discretized Gaussians at 60 and 190, sigma ~ 10.
        let mut counts = [0u64; 256];
        for i in 0..256usize {
            let g = |mu: f64| {
                let z = (i as f64 - mu) / 10.0;
                (1000.0 * (-0.5 * z * z).exp()).round() as u64
            };
            counts[i] = g(60.0) + g(190.0);
        }
        let h = Histogram::from_counts(counts).unwrap();
        let res = met_threshold(&h).unwrap();
        assert!(
            res.threshold > 90.0 && res.threshold < 160.0,
            "threshold {} should fall between the modes",
            res.threshold
        );
    }

    #[test]
    fn met_single_bin_degenerates_to_midpoint() {
        let h = hist_from_pairs(&[(42, 5)]);
        let res = met_threshold(&h).unwrap();
        assert_eq!(res.threshold, 127.0);
    }

    #[test]
    fn ght_symmetric_bimodal_centers() {
        // Mass mirrored around the midpoint between bins 100 and 150.
        let h = hist_from_pairs(&[(100, 40), (150, 40), (90, 10), (160, 10)]);
        let res = ght_threshold(&h, 1.0, 30.0, 0.1, 0.5).unwrap();
        assert_eq!(res.threshold, 124.5);
    }

    #[test]
    fn ght_curve_always_finite() {
        let mut rng = SplitMix64::new(0xF00D);
        for _ in 0..50 {
            let h = random_hist(&mut rng, 5);
            for &(nu, tau, kappa, omega) in
                &[(0.0, 0.0, 0.0, 0.0), (1.0, 0.0, 5.0, 1.0), (1e12, 100.0, 1e3, 0.3)]
            {
                let res = ght_threshold(&h, nu, tau, kappa, omega).unwrap();
                assert!(res.score_curve.iter().all(|s| s.is_finite()));
            }
        }
        // Extreme degenerate case: all mass in one bin.
        let h = hist_from_pairs(&[(0, 1)]);
        let res = ght_threshold(&h, 0.0, 1.0, 0.0, 0.5).unwrap();
        assert!(res.score_curve.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn ght_rejects_bad_params() {
        let h = hist_from_pairs(&[(1, 1), (2, 1)]);
        assert!(ght_threshold(&h, -1.0, 1.0, 0.0, 0.5).is_err());
        assert!(ght_threshold(&h, 1.0, -1.0, 0.0, 0.5).is_err());
        assert!(ght_threshold(&h, 1.0, 1.0, -0.1, 0.5).is_err());
        assert!(ght_threshold(&h, 1.0, 1.0, 0.0, 1.5).is_err());
        assert!(ght_threshold(&h, f64::NAN, 1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn adaptive_constant_image_polarity() {
        let img = GrayImage::filled(8, 8, 100).unwrap();
        let above = adaptive_threshold(&img, AdaptiveKind::Mean, 5, 1.0, 2.0).unwrap();
        assert_eq!(above.foreground_count(), 0, "c > 0 puts everything below T");
        let below = adaptive_threshold(&img, AdaptiveKind::Mean, 5, 1.0, -2.0).unwrap();
        assert_eq!(below.foreground_count(), 64, "c < 0 puts everything above T");
    }

    /// Brute-force oracle: direct windowed statistic per pixel, replicate
    /// padding, identical tap order.
    fn adaptive_oracle(
        img: &GrayImage,
        kind: AdaptiveKind,
        window: usize,
        sigma: f64,
        c: f64,
    ) -> Vec<u8> {
        let r = (window / 2) as isize;
        let (w, h) = (img.width as isize, img.height as isize);
        let weight = |u: usize| -> f64 {
            match kind {
                AdaptiveKind::Mean => 1.0,
                AdaptiveKind::Gaussian => {
                    let du = u as f64 - r as f64;
                    (-du * du / (2.0 * sigma * sigma)).exp()
                }
            }
        };
        let mut norm = 0.0;
        for uy in 0..window {
            for ux in 0..window {
                norm += weight(uy) * weight(ux);
            }
        }
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for uy in 0..window {
                    let sy = (y + uy as isize - r).clamp(0, h - 1) as usize;
                    for ux in 0..window {
                        let sx = (x + ux as isize - r).clamp(0, w - 1) as usize;
                        acc += weight(uy) * weight(ux) * img.get(sx, sy) as f64;
                    }
                }
                out.push((img.get(x as usize, y as usize) as f64 > acc / norm + c) as u8);
            }
        }
        out
    }

    #[test]
    fn adaptive_matches_brute_force_exactly() {
        let mut rng = SplitMix64::new(0x7777);
        for trial in 0..10 {
            let data: Vec<u8> = (0..16 * 16).map(|_| rng.below(256) as u8).collect();
            let img = GrayImage::new(16, 16, data).unwrap();
            let mean = adaptive_threshold(&img, AdaptiveKind::Mean, 5, 1.0, 3.0).unwrap();
            assert_eq!(
                mean.data,
                adaptive_oracle(&img, AdaptiveKind::Mean, 5, 1.0, 3.0),
                "mean, trial {trial}"
            );
            let gauss = adaptive_threshold(&img, AdaptiveKind::Gaussian, 7, 1.5, -1.0).unwrap();
            assert_eq!(
                gauss.data,
                adaptive_oracle(&img, AdaptiveKind::Gaussian, 7, 1.5, -1.0),
                "gaussian, trial {trial}"
            );
        }
    }

    #[test]
    fn adaptive_rejects_even_or_tiny_window() {
        let img = GrayImage::filled(8, 8, 10).unwrap();
        assert!(adaptive_threshold(&img, AdaptiveKind::Mean, 4, 1.0, 0.0).is_err());
        assert!(adaptive_threshold(&img, AdaptiveKind::Mean, 1, 1.0, 0.0).is_err());
        assert!(adaptive_threshold(&img, AdaptiveKind::Gaussian, 5, 0.0, 0.0).is_err());
    }

    #[test]
    fn fixed_threshold_on_ramp() {
        let data: Vec<u8> = (0..=255).collect();
        let img = GrayImage::new(256, 1, data).unwrap();
        let m = ThresholdMethod::new(ThresholdKind::Fixed(127.0));
        let mask = generate_pseudo_mask(&img, &m).unwrap();
        for (i, &v) in mask.data.iter().enumerate() {
            assert_eq!(v, (i >= 128) as u8);
        }
    }

    #[test]
    fn per_image_thresholds_differ_across_ranges() {
        let dark = GrayImage::new(4, 1, vec![10, 20, 30, 40]).unwrap();
        let bright = GrayImage::new(4, 1, vec![200, 210, 220, 230]).unwrap();
        let t_dark = otsu_threshold(&compute_histogram(&dark).unwrap())
            .unwrap()
            .threshold;
        let t_bright = otsu_threshold(&compute_histogram(&bright).unwrap())
            .unwrap()
            .threshold;
        assert_ne!(t_dark, t_bright);
    }

    #[test]
    fn invert_complements_the_mask() {
        let mut rng = SplitMix64::new(3);
        let data: Vec<u8> = (0..64).map(|_| rng.below(256) as u8).collect();
        let img = GrayImage::new(8, 8, data).unwrap();
        for kind in [
            ThresholdKind::Otsu,
            ThresholdKind::Fixed(100.0),
            ThresholdKind::AdaptiveMean { window: 3, c: 0.0 },
        ] {
            let plain = generate_pseudo_mask(&img, &ThresholdMethod::new(kind.clone())).unwrap();
            let flipped = generate_pseudo_mask(
                &img,
                &ThresholdMethod {
                    kind,
                    invert: true,
                },
            )
            .unwrap();
            assert_eq!(plain.complement(), flipped);
        }
    }

    #[test]
    fn mask_depends_only_on_intensities_and_threshold() {
        // Same multiset of pixels in a different arrangement: same global
        // threshold, and the mask is a pure per-pixel function of intensity.
        let a = GrayImage::new(4, 1, vec![10, 200, 30, 220]).unwrap();
        let b = GrayImage::new(4, 1, vec![220, 30, 200, 10]).unwrap();
        let ta = otsu_threshold(&compute_histogram(&a).unwrap()).unwrap();
        let tb = otsu_threshold(&compute_histogram(&b).unwrap()).unwrap();
        assert_eq!(ta, tb);
        let ma = threshold_mask(&a, ta.threshold);
        let mb = threshold_mask(&b, tb.threshold);
        for (i, &v) in a.data.iter().enumerate() {
            let j = b.data.iter().position(|&u| u == v).unwrap();
            assert_eq!(ma.data[i], mb.data[j]);
        }
    }

    #[test]
    fn ght_auto_tau_uses_image_std() {
        let img = GrayImage::new(4, 1, vec![0, 0, 200, 200]).unwrap();
        let auto = ThresholdMethod::new(ThresholdKind::Ght {
            nu: 1.0,
            tau: None,
            kappa: 0.0,
            omega: 0.5,
        });
        let explicit = ThresholdMethod::new(ThresholdKind::Ght {
            nu: 1.0,
            tau: Some(100.0), // std of {0,0,200,200}
            kappa: 0.0,
            omega: 0.5,
        });
        let (ma, da) = pseudo_mask_detailed(&img, &auto).unwrap();
        let (me, de) = pseudo_mask_detailed(&img, &explicit).unwrap();
        assert_eq!(ma, me);
        assert_eq!(da, de);
    }
}
