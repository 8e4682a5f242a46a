//! The training loop, in self-supervised and supervised modes.
//!
//! Self-supervised training never touches ground-truth masks: each batch is
//! augmented and then re-thresholded, so the pseudo-labels follow the
//! augmented pixels. Supervised mode differs only in the label source (the
//! manifest's masks, augmented geometrically alongside the image).
//! Validation loss drives early stopping; `patience = 0` disables it.
//! A `(manifest, config, seed)` triple determines every output bit for bit,
//! regardless of thread count.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::error::{Error, Result};
use crate::imaging::{self, GrayImage};
use crate::losses::LossSpec;
use crate::metrics::{self, EvalReport, HardConfusion};
use crate::pipeline::{augment, AugmentSpec, ManifestEntry, Split};
use crate::rng::{fnv1a64, SplitMix64};
use crate::segmenter::{self, OptimizerState, SegmenterParams};
use crate::thresholding::{generate_pseudo_mask, BinaryMask, ThresholdKind, ThresholdMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    SelfSup,
    Supervised,
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainMode::SelfSup => "selfsup",
            TrainMode::Supervised => "supervised",
        })
    }
}

/// Everything that determines a training run (together with the manifest).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub threshold: ThresholdMethod,
    pub loss: LossSpec,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub seed: u64,
    pub eval_resize: (usize, usize),
    pub hflip_p: f64,
    pub vflip_p: f64,
    pub brightness_delta: f64,
    pub contrast_range: (f64, f64),
}

impl Default for TrainConfig {
    /// Desk-scale defaults: 64x64 inputs, Otsu pseudo-labels, focal-tversky
    /// loss, 50 epochs, batch 16, patience 5, flips only.
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::SelfSup,
            threshold: ThresholdMethod::new(ThresholdKind::Otsu),
            loss: LossSpec::default_focal_tversky(),
            epochs: 50,
            batch_size: 16,
            lr: 1e-3,
            patience: 5,
            seed: 1,
            eval_resize: (64, 64),
            hflip_p: 0.5,
            vflip_p: 0.5,
            brightness_delta: 0.0,
            contrast_range: (1.0, 1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::Config(format!("lr must be >= 0, got {}", self.lr)));
        }
        let (w, h) = self.eval_resize;
        if w < 2 || h < 2 || w % 2 != 0 || h % 2 != 0 {
            return Err(Error::Config(format!(
                "eval_resize {w}x{h} must be even in both dims (one pooling stage)"
            )));
        }
        self.augment_spec().validate()
    }

    pub fn augment_spec(&self) -> AugmentSpec {
        AugmentSpec {
            resize_to: self.eval_resize,
            hflip_p: self.hflip_p,
            vflip_p: self.vflip_p,
            brightness_delta: self.brightness_delta,
            contrast_range: self.contrast_range,
            seed: self.seed,
        }
    }

    /// Stable `key = value` text of the resolved configuration. The seed is
    /// optional so the run-directory hash can group seeds of one setup.
    pub fn canonical_text(&self, include_seed: bool) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", self.mode);
        for (k, v) in describe_threshold(&self.threshold) {
            let _ = writeln!(s, "threshold.{k} = {v}");
        }
        for (k, v) in describe_loss(&self.loss) {
            let _ = writeln!(s, "loss.{k} = {v}");
        }
        let _ = writeln!(s, "train.epochs = {}", self.epochs);
        let _ = writeln!(s, "train.batch_size = {}", self.batch_size);
        let _ = writeln!(s, "train.lr = {}", self.lr);
        let _ = writeln!(s, "train.patience = {}", self.patience);
        if include_seed {
            let _ = writeln!(s, "train.seed = {}", self.seed);
        }
        let _ = writeln!(s, "train.eval_w = {}", self.eval_resize.0);
        let _ = writeln!(s, "train.eval_h = {}", self.eval_resize.1);
        let _ = writeln!(s, "augment.hflip_p = {}", self.hflip_p);
        let _ = writeln!(s, "augment.vflip_p = {}", self.vflip_p);
        let _ = writeln!(s, "augment.brightness_delta = {}", self.brightness_delta);
        let _ = writeln!(s, "augment.contrast_lo = {}", self.contrast_range.0);
        let _ = writeln!(s, "augment.contrast_hi = {}", self.contrast_range.1);
        s
    }

    /// Hex FNV-1a hash of the seedless canonical text; names the run
    /// directory that groups this configuration's seeds.
    pub fn config_hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.canonical_text(false).as_bytes()))
    }
}

pub fn describe_threshold(m: &ThresholdMethod) -> Vec<(String, String)> {
    let mut kv = vec![("method".to_string(), m.name().to_string())];
    match &m.kind {
        ThresholdKind::Fixed(t) => kv.push(("t".into(), t.to_string())),
        ThresholdKind::Otsu | ThresholdKind::Met => {}
        ThresholdKind::Ght {
            nu,
            tau,
            kappa,
            omega,
        } => {
            kv.push(("nu".into(), nu.to_string()));
            kv.push((
                "tau".into(),
                tau.map_or("auto".to_string(), |t| t.to_string()),
            ));
            kv.push(("kappa".into(), kappa.to_string()));
            kv.push(("omega".into(), omega.to_string()));
        }
        ThresholdKind::AdaptiveMean { window, c } => {
            kv.push(("window".into(), window.to_string()));
            kv.push(("c".into(), c.to_string()));
        }
        ThresholdKind::AdaptiveGaussian { window, sigma, c } => {
            kv.push(("window".into(), window.to_string()));
            kv.push(("sigma".into(), sigma.to_string()));
            kv.push(("c".into(), c.to_string()));
        }
    }
    kv.push(("invert".into(), m.invert.to_string()));
    kv
}

pub fn describe_loss(l: &LossSpec) -> Vec<(String, String)> {
    let mut kv = vec![("kind".to_string(), l.name().to_string())];
    match *l {
        LossSpec::Bce => {}
        LossSpec::Focal { alpha, gamma } => {
            kv.push(("alpha".into(), alpha.to_string()));
            kv.push(("gamma".into(), gamma.to_string()));
        }
        LossSpec::Dice { eps } => kv.push(("eps".into(), eps.to_string())),
        LossSpec::Tversky { alpha, beta, eps } => {
            kv.push(("alpha".into(), alpha.to_string()));
            kv.push(("beta".into(), beta.to_string()));
            kv.push(("eps".into(), eps.to_string()));
        }
        LossSpec::FocalTversky {
            alpha,
            beta,
            gamma_exp,
            eps,
        } => {
            kv.push(("alpha".into(), alpha.to_string()));
            kv.push(("beta".into(), beta.to_string()));
            kv.push(("gamma".into(), gamma_exp.to_string()));
            kv.push(("eps".into(), eps.to_string()));
        }
    }
    kv
}

/// What one training run recorded. Loss vectors have one entry per epoch
/// actually run; `best_epoch` indexes the minimal validation loss.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub seed: u64,
    pub config_hash: String,
    /// Filled by [`train_and_evaluate`]; plain [`train`] never reads masks.
    pub evals: Vec<(Split, EvalReport)>,
}

struct LoadedSample {
    img: GrayImage,
    mask: Option<BinaryMask>,
}

fn load_split(entries: &[ManifestEntry], split: Split, need_masks: bool) -> Result<Vec<LoadedSample>> {
    let mut out = Vec::new();
    for e in entries.iter().filter(|e| e.split == split) {
        if need_masks && e.mask_path.is_none() {
            return Err(Error::invalid(format!(
                "supervised mode requires a mask for every {split} entry; first without one: {}",
                e.image_path.display()
            )));
        }
        let img = e.load_image()?;
        let mask = if need_masks { Some(e.load_mask()?) } else { None };
        out.push(LoadedSample { img, mask });
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("empty {split} split")));
    }
    Ok(out)
}

/// Deterministic validation samples: resize only, labels from the config's
/// mode (pseudo-labels in selfsup, ground truth in supervised).
fn prep_validation(samples: &[LoadedSample], cfg: &TrainConfig) -> Result<Vec<(GrayImage, BinaryMask)>> {
    let (w, h) = cfg.eval_resize;
    samples
        .iter()
        .map(|s| {
            let img = imaging::resize_bilinear(&s.img, w, h)?;
            let label = match cfg.mode {
                TrainMode::SelfSup => generate_pseudo_mask(&img, &cfg.threshold)?,
                TrainMode::Supervised => {
                    let m = s.mask.as_ref().expect("supervised masks were loaded");
                    resize_mask(m, w, h)?
                }
            };
            Ok((img, label))
        })
        .collect()
}

fn resize_mask(mask: &BinaryMask, w: usize, h: usize) -> Result<BinaryMask> {
    let as_gray = GrayImage {
        width: mask.width,
        height: mask.height,
        data: mask.data.clone(),
    };
    let resized = imaging::resize_nearest(&as_gray, w, h)?;
    Ok(BinaryMask {
        width: w,
        height: h,
        data: resized.data,
    })
}

/// Mean per-sample loss over a prepared set, in fixed batches.
fn mean_loss(
    params: &SegmenterParams,
    prepped: &[(GrayImage, BinaryMask)],
    loss: &LossSpec,
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for chunk in prepped.chunks(batch_size) {
        let imgs: Vec<GrayImage> = chunk.iter().map(|(i, _)| i.clone()).collect();
        let (probs, _) = segmenter::forward(params, &imgs)?;
        for (p, (_, label)) in probs.iter().zip(chunk) {
            total += loss.evaluate(p, label)?.value;
        }
    }
    Ok(total / prepped.len() as f64)
}

/// Train per the config and return the best-validation-loss parameters with
/// the full record. Ground-truth masks are read only in supervised mode.
pub fn train(entries: &[ManifestEntry], cfg: &TrainConfig) -> Result<(SegmenterParams, RunRecord)> {
    cfg.validate()?;
    let need_masks = cfg.mode == TrainMode::Supervised;
    let train_samples = load_split(entries, Split::Train, need_masks)?;
    let val_samples = load_split(entries, Split::Val, need_masks)?;
    let val_prepped = prep_validation(&val_samples, cfg)?;
    let aug = cfg.augment_spec();

    let mut params = segmenter::init_params(cfg.seed);
    let mut opt = OptimizerState::new(cfg.lr);

    let n_train = train_samples.len();
    let mut train_loss = Vec::new();
    let mut val_loss = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        SplitMix64::from_pair(cfg.seed ^ 0x5348_5546_464c_4553, epoch as u64).shuffle(&mut order);

        let mut epoch_loss_sum = 0.0;
        for batch_indices in order.chunks(cfg.batch_size) {
            let mut imgs = Vec::with_capacity(batch_indices.len());
            let mut labels = Vec::with_capacity(batch_indices.len());
            for &idx in batch_indices {
                let sample = &train_samples[idx];
                let sample_stream = epoch as u64 * n_train as u64 + idx as u64;
                let (aug_img, aug_mask) =
                    augment(&sample.img, sample.mask.as_ref(), &aug, sample_stream)?;
                let label = match cfg.mode {
                    TrainMode::SelfSup => generate_pseudo_mask(&aug_img, &cfg.threshold)?,
                    TrainMode::Supervised => aug_mask.expect("supervised masks were loaded"),
                };
                imgs.push(aug_img);
                labels.push(label);
            }

            let (probs, cache) = segmenter::forward(&params, &imgs)?;
            let mut grads = Vec::with_capacity(probs.len());
            for (p, label) in probs.iter().zip(&labels) {
                let out = cfg.loss.evaluate(p, label)?;
                epoch_loss_sum += out.value;
                grads.push(out.grad);
            }
            let grad = segmenter::backward(&params, &cache, &grads)?;
            opt.apply(&mut params, &grad)?;
        }
        train_loss.push(epoch_loss_sum / n_train as f64);

        let v = mean_loss(&params, &val_prepped, &cfg.loss, cfg.batch_size)?;
        val_loss.push(v);
        if v < best_val {
            best_val = v;
            best_epoch = epoch;
            best_params = params.clone();
        }
        if cfg.patience > 0 && epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let record = RunRecord {
        train_loss,
        val_loss,
        best_epoch,
        seed: cfg.seed,
        config_hash: cfg.config_hash(),
        evals: Vec::new(),
    };
    Ok((best_params, record))
}

/// Per-image forward/binarize/score against ground truth over one split.
/// Reports macro (mean per-image) and micro (pooled) IoU; recall, accuracy
/// and the collapse diagnosis come from the pooled confusion.
pub fn evaluate(
    params: &SegmenterParams,
    entries: &[ManifestEntry],
    split: Split,
    resize: (usize, usize),
    cut: f64,
) -> Result<EvalReport> {
    evaluate_with(
        |img| {
            let (probs, _) = segmenter::forward(params, std::slice::from_ref(img))?;
            Ok(probs.into_iter().next().unwrap())
        },
        entries,
        split,
        resize,
        cut,
    )
}

/// Evaluation harness with an injectable predictor, so the scoring path can
/// be exercised with oracle outputs.
fn evaluate_with<F>(
    mut predict: F,
    entries: &[ManifestEntry],
    split: Split,
    resize: (usize, usize),
    cut: f64,
) -> Result<EvalReport>
where
    F: FnMut(&GrayImage) -> Result<crate::losses::ProbMask>,
{
    let (w, h) = resize;
    let mut pooled = HardConfusion::default();
    let mut macro_sum = 0.0;
    let mut count = 0usize;
    for e in entries.iter().filter(|e| e.split == split) {
        let img = imaging::resize_bilinear(&e.load_image()?, w, h)?;
        let gt = resize_mask(&e.load_mask()?, w, h)?;
        let probs = predict(&img)?;
        let pred = metrics::binarize(&probs, cut)?;
        let conf = HardConfusion::from_masks(&pred, &gt)?;
        macro_sum += conf.iou();
        pooled.merge(&conf);
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(format!("no {split} entries to evaluate")));
    }
    let (recall, accuracy) = metrics::recall_accuracy(&pooled)?;
    let iou_micro = pooled.iou();
    Ok(EvalReport {
        iou_macro: macro_sum / count as f64,
        iou_micro,
        recall,
        accuracy,
        collapse: metrics::collapse_diagnose(iou_micro, accuracy, pooled.foreground_fraction()),
    })
}

/// Train, then evaluate on the requested splits (which must carry masks).
pub fn train_and_evaluate(
    entries: &[ManifestEntry],
    cfg: &TrainConfig,
    eval_splits: &[Split],
) -> Result<(SegmenterParams, RunRecord)> {
    let (params, mut record) = train(entries, cfg)?;
    for &split in eval_splits {
        let report = evaluate(&params, entries, split, cfg.eval_resize, 0.5)?;
        record.evals.push((split, report));
    }
    Ok((params, record))
}

/// Pseudo-label quality: IoU of each method's masks against ground truth,
/// with no training involved.
pub fn pseudo_label_quality(
    entries: &[ManifestEntry],
    split: Split,
    methods: &[ThresholdMethod],
    resize: (usize, usize),
) -> Result<Vec<(String, EvalReport)>> {
    methods
        .iter()
        .map(|m| {
            let report = evaluate_with(
                |img| {
                    let mask = generate_pseudo_mask(img, m)?;
                    crate::losses::ProbMask::new(
                        mask.width,
                        mask.height,
                        mask.data.iter().map(|&v| v as f64).collect(),
                    )
                },
                entries,
                split,
                resize,
                0.5,
            )?;
            Ok((m.name().to_string(), report))
        })
        .collect()
}

/// Mean and sample standard deviation (0 for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub record: RunRecord,
    pub report: EvalReport,
}

/// Aggregated metric: (mean, sample std) per quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub iou_macro: (f64, f64),
    pub iou_micro: (f64, f64),
    pub recall: (f64, f64),
    pub accuracy: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeedOutcome {
    /// One run per requested seed, in the order given.
    pub runs: Vec<SeedRun>,
    pub aggregate: Aggregate,
}

/// Maximum worker threads, from `SASS_SEG_THREADS` (default 1).
pub fn thread_cap() -> usize {
    std::env::var("SASS_SEG_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Run independent jobs, optionally on several threads. Results keep their
/// submission order, so parallelism never changes outputs.
pub fn run_jobs<T, F>(jobs: Vec<F>, cap: usize) -> Vec<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if cap <= 1 || jobs.len() <= 1 {
        return jobs.into_iter().map(|j| j()).collect();
    }
    let queue: Mutex<VecDeque<(usize, F)>> = Mutex::new(jobs.into_iter().enumerate().collect());
    let n = queue.lock().unwrap().len();
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..cap.min(n) {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop_front();
                match job {
                    Some((idx, f)) => {
                        let out = f();
                        *slots[idx].lock().unwrap() = Some(out);
                    }
                    None => break,
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().expect("job completed"))
        .collect()
}

/// Train + evaluate (test split) once per seed and aggregate. Aggregation
/// sorts by seed first, so the outcome does not depend on seed order.
pub fn multi_seed_run(
    entries: &[ManifestEntry],
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<MultiSeedOutcome> {
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }
    let jobs: Vec<_> = seeds
        .iter()
        .map(|&seed| {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            move || -> Result<SeedRun> {
                let (_, record) = train_and_evaluate(entries, &cfg, &[Split::Test])?;
                let report = record.evals[0].1.clone();
                Ok(SeedRun {
                    seed,
                    record,
                    report,
                })
            }
        })
        .collect();
    let runs: Vec<SeedRun> = run_jobs(jobs, thread_cap())
        .into_iter()
        .collect::<Result<_>>()?;

    let mut sorted: Vec<&SeedRun> = runs.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    let collect = |f: fn(&EvalReport) -> f64| -> Vec<f64> {
        sorted.iter().map(|r| f(&r.report)).collect()
    };
    let aggregate = Aggregate {
        iou_macro: mean_std(&collect(|r| r.iou_macro)),
        iou_micro: mean_std(&collect(|r| r.iou_micro)),
        recall: mean_std(&collect(|r| r.recall)),
        accuracy: mean_std(&collect(|r| r.accuracy)),
    };
    Ok(MultiSeedOutcome { runs, aggregate })
}

/// CSV header shared by every evaluation report.
pub const METRICS_CSV_HEADER: &str =
    "split,seed,method,loss,iou_macro,iou_micro,recall,accuracy,collapse";

pub fn metrics_csv_row(
    split: &str,
    seed: u64,
    method: &str,
    loss: &str,
    report: &EvalReport,
) -> String {
    format!(
        "{split},{seed},{method},{loss},{:.6},{:.6},{:.6},{:.6},{}",
        report.iou_macro, report.iou_micro, report.recall, report.accuracy, report.collapse
    )
}

/// Write `history.csv`, `metrics.csv`, `checkpoint.bin` and `meta.txt`
/// under `<out_root>/<config-hash>/<seed>/`. Only `meta.txt` contains a
/// timestamp; everything else is byte-deterministic.
pub fn write_run_dir(
    out_root: &Path,
    cfg: &TrainConfig,
    params: &SegmenterParams,
    record: &RunRecord,
) -> Result<PathBuf> {
    let dir = out_root
        .join(cfg.config_hash())
        .join(cfg.seed.to_string());
    fs::create_dir_all(&dir)?;

    let mut history = String::from("epoch,train_loss,val_loss\n");
    for (i, (t, v)) in record.train_loss.iter().zip(&record.val_loss).enumerate() {
        let _ = writeln!(history, "{i},{t:.9},{v:.9}");
    }
    fs::write(dir.join("history.csv"), history)?;

    let mut table = format!("{METRICS_CSV_HEADER}\n");
    for (split, report) in &record.evals {
        let _ = writeln!(
            table,
            "{}",
            metrics_csv_row(
                &split.to_string(),
                cfg.seed,
                cfg.threshold.name(),
                cfg.loss.name(),
                report
            )
        );
    }
    fs::write(dir.join("metrics.csv"), table)?;

    segmenter::save_checkpoint(&dir.join("checkpoint.bin"), params)?;

    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = format!(
        "{}best_epoch = {}\nepochs_run = {}\nunix_time = {}\n",
        cfg.canonical_text(true),
        record.best_epoch,
        record.val_loss.len(),
        timestamp
    );
    fs::write(dir.join("meta.txt"), meta)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::ProbMask;
    use crate::metrics::Collapse;
    use crate::pipeline::{self, load_manifest, SynthSpec};

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "sass_seg_trainer_{tag}_{}",
            std::process::id()
        ));
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    /// A 10-image 16x16 dataset (7 train / 1 val / 2 test).
    fn tiny_dataset(tag: &str) -> Vec<ManifestEntry> {
        let dir = tmpdir(tag);
        let spec = SynthSpec::new(16, 16);
        let manifest = pipeline::materialize_synth(&dir, 10, &spec, 11).unwrap();
        load_manifest(&manifest).unwrap()
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            batch_size: 4,
            eval_resize: (16, 16),
            ..TrainConfig::default()
        }
    }

    #[test]
    fn patience_zero_runs_every_epoch() {
        let entries = tiny_dataset("patience");
        let cfg = TrainConfig {
            patience: 0,
            epochs: 4,
            ..tiny_config()
        };
        let (_, record) = train(&entries, &cfg).unwrap();
        assert_eq!(record.train_loss.len(), 4);
        assert_eq!(record.val_loss.len(), 4);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let entries = tiny_dataset("lr0");
        let cfg = TrainConfig {
            lr: 0.0,
            hflip_p: 0.0,
            vflip_p: 0.0,
            patience: 0,
            ..tiny_config()
        };
        let (params, record) = train(&entries, &cfg).unwrap();
        assert_eq!(params, segmenter::init_params(cfg.seed));
        for loss in &record.train_loss {
            assert_eq!(*loss, record.train_loss[0], "loss must stay constant");
        }
    }

    #[test]
    fn selfsup_never_reads_masks() {
        let entries: Vec<ManifestEntry> = tiny_dataset("nomask")
            .into_iter()
            .map(|mut e| {
                e.mask_path = None;
                e
            })
            .collect();
        let cfg = TrainConfig {
            epochs: 1,
            ..tiny_config()
        };
        let (params, _) = train(&entries, &cfg).unwrap();
        assert!(evaluate(&params, &entries, Split::Test, (16, 16), 0.5).is_err());
    }

    #[test]
    fn supervised_requires_masks_and_names_the_gap() {
        let mut entries = tiny_dataset("needmask");
        let victim = entries
            .iter_mut()
            .find(|e| e.split == Split::Train)
            .unwrap();
        victim.mask_path = None;
        let missing = victim.image_path.clone();
        let cfg = TrainConfig {
            mode: TrainMode::Supervised,
            ..tiny_config()
        };
        let err = train(&entries, &cfg).unwrap_err();
        assert!(
            err.to_string().contains(missing.file_name().unwrap().to_str().unwrap()),
            "error should name the maskless entry: {err}"
        );
    }

    #[test]
    fn best_epoch_is_minimal_and_reproducible() {
        let entries = tiny_dataset("best");
        let cfg = TrainConfig {
            epochs: 5,
            patience: 0,
            ..tiny_config()
        };
        let (params, record) = train(&entries, &cfg).unwrap();
        let best = record.val_loss[record.best_epoch];
        for &v in &record.val_loss {
            assert!(best <= v);
        }
        // Returned params reproduce the recorded best validation loss.
        let val_samples = load_split(&entries, Split::Val, false).unwrap();
        let prepped = prep_validation(&val_samples, &cfg).unwrap();
        let recomputed = mean_loss(&params, &prepped, &cfg.loss, cfg.batch_size).unwrap();
        assert_eq!(recomputed, best);
    }

    #[test]
    fn training_is_deterministic() {
        let entries = tiny_dataset("det");
        let cfg = tiny_config();
        let (p1, r1) = train(&entries, &cfg).unwrap();
        let (p2, r2) = train(&entries, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn oracle_predictor_scores_perfectly() {
        let entries = tiny_dataset("oracle");
        // Feed ground truth through the evaluation path.
        let by_image: std::collections::HashMap<PathBuf, BinaryMask> = entries
            .iter()
            .map(|e| (e.image_path.clone(), e.load_mask().unwrap()))
            .collect();
        let order: Vec<&ManifestEntry> =
            entries.iter().filter(|e| e.split == Split::Test).collect();
        let mut cursor = 0usize;
        let report = evaluate_with(
            |_img| {
                let gt = &by_image[&order[cursor].image_path];
                cursor += 1;
                ProbMask::new(
                    gt.width,
                    gt.height,
                    gt.data.iter().map(|&v| v as f64).collect(),
                )
            },
            &entries,
            Split::Test,
            (16, 16),
            0.5,
        )
        .unwrap();
        assert_eq!(report.iou_macro, 1.0);
        assert_eq!(report.iou_micro, 1.0);
        assert_eq!(report.collapse, Collapse::None);
    }

    #[test]
    fn zero_params_collapse_to_background() {
        let entries = tiny_dataset("collapse");
        let params = SegmenterParams::zeros(); // sigmoid(0) = 0.5, strict cut -> background
        let report = evaluate(&params, &entries, Split::Test, (16, 16), 0.5).unwrap();
        assert_eq!(report.iou_micro, 0.0);
        assert_eq!(report.collapse, Collapse::BackgroundCollapse);
    }

    #[test]
    fn supervised_on_pseudo_labels_matches_selfsup() {
        // Replace ground truth with the Otsu pseudo-labels of the originals;
        // with flips-only augmentation the two modes must coincide exactly.
        let dir = tmpdir("modes");
        let spec = SynthSpec::new(16, 16);
        let method = ThresholdMethod::new(ThresholdKind::Otsu);
        let mut rows = Vec::new();
        for i in 0..10u64 {
            let (img, _) = pipeline::synth_blob_image(&spec, 31, i);
            let pseudo = generate_pseudo_mask(&img, &method).unwrap();
            let img_name = format!("img_{i:05}.png");
            let msk_name = format!("msk_{i:05}.png");
            crate::imaging::io::save_gray(&dir.join(&img_name), &img).unwrap();
            crate::imaging::io::save_mask(&dir.join(&msk_name), &pseudo).unwrap();
            let split = match i {
                0..=6 => Split::Train,
                7 => Split::Val,
                _ => Split::Test,
            };
            rows.push((img_name, Some(msk_name), split));
        }
        let manifest = pipeline::write_manifest(&dir, &rows).unwrap();
        let entries = load_manifest(&manifest).unwrap();

        let selfsup = TrainConfig {
            epochs: 3,
            batch_size: 4,
            eval_resize: (16, 16),
            ..TrainConfig::default()
        };
        let supervised = TrainConfig {
            mode: TrainMode::Supervised,
            ..selfsup.clone()
        };
        let (p1, r1) = train(&entries, &selfsup).unwrap();
        let (p2, r2) = train(&entries, &supervised).unwrap();
        assert_eq!(p1, p2, "parameters must match bit for bit");
        assert_eq!(r1.train_loss, r2.train_loss);
        assert_eq!(r1.val_loss, r2.val_loss);
        assert_eq!(r1.best_epoch, r2.best_epoch);
    }

    #[test]
    fn multi_seed_aggregation_conventions() {
        let entries = tiny_dataset("seeds");
        let cfg = TrainConfig {
            epochs: 2,
            ..tiny_config()
        };
        let single = multi_seed_run(&entries, &cfg, &[5]).unwrap();
        assert_eq!(single.aggregate.iou_macro.1, 0.0, "single seed: std = 0");

        let twice = multi_seed_run(&entries, &cfg, &[5, 5]).unwrap();
        assert_eq!(twice.runs[0].report, twice.runs[1].report);
        assert_eq!(twice.aggregate.iou_macro.1, 0.0);

        let fwd = multi_seed_run(&entries, &cfg, &[2, 3]).unwrap();
        let rev = multi_seed_run(&entries, &cfg, &[3, 2]).unwrap();
        assert_eq!(fwd.aggregate, rev.aggregate, "order independence");
    }

    #[test]
    fn run_jobs_parallel_preserves_order() {
        let jobs: Vec<Box<dyn FnOnce() -> usize + Send>> = (0..16usize)
            .map(|i| Box::new(move || i * i) as Box<dyn FnOnce() -> usize + Send>)
            .collect();
        let out = run_jobs(jobs, 4);
        assert_eq!(out, (0..16usize).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn run_dir_contents() {
        let entries = tiny_dataset("rundir");
        let cfg = TrainConfig {
            epochs: 2,
            ..tiny_config()
        };
        let (params, record) = train_and_evaluate(&entries, &cfg, &[Split::Test]).unwrap();
        let out = tmpdir("rundir_out");
        let dir = write_run_dir(&out, &cfg, &params, &record).unwrap();
        assert!(dir.join("history.csv").is_file());
        assert!(dir.join("metrics.csv").is_file());
        assert!(dir.join("checkpoint.bin").is_file());
        assert!(dir.join("meta.txt").is_file());

        let history = fs::read_to_string(dir.join("history.csv")).unwrap();
        assert_eq!(history.lines().count(), 1 + record.val_loss.len());
        let metrics_text = fs::read_to_string(dir.join("metrics.csv")).unwrap();
        assert!(metrics_text.starts_with(METRICS_CSV_HEADER));
        assert!(metrics_text.contains("test,1,otsu,focal_tversky"));

        let loaded = segmenter::load_checkpoint(&dir.join("checkpoint.bin")).unwrap();
        assert_eq!(loaded, params);
    }

    #[test]
    fn config_hash_groups_seeds() {
        let a = TrainConfig::default();
        let mut b = TrainConfig::default();
        b.seed = 99;
        assert_eq!(a.config_hash(), b.config_hash(), "seed is not part of the hash");
        let mut c = TrainConfig::default();
        c.lr = 2e-3;
        assert_ne!(a.config_hash(), c.config_hash());
    }
}
