//! Config files and the command implementations behind the `sass-seg`
//! binary. The binary itself only parses arguments and dispatches here.
//!
//! The config file is a flat `key = value` text format with one `[section]`
//! per module (`[train]`, `[threshold]`, `[loss]`, `[augment]`); unknown
//! sections or keys are rejected. Command-line flags override file values.
//! Every command writes byte-identical outputs when re-run on identical
//! inputs; timestamps live only in `meta.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::io as imgio;
use crate::losses::LossSpec;
use crate::pipeline::{self, load_manifest, ManifestEntry, Split, SynthSpec};
use crate::segmenter;
use crate::thresholding::{pseudo_mask_detailed, ThresholdKind, ThresholdMethod};
use crate::trainer::{
    self, metrics_csv_row, run_jobs, thread_cap, TrainConfig, TrainMode, METRICS_CSV_HEADER,
};

/// Threshold method under construction from flags or config keys.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodDraft {
    pub method: String,
    pub fixed_t: f64,
    pub nu: f64,
    /// `None` means "per-image intensity std".
    pub tau: Option<f64>,
    pub kappa: f64,
    pub omega: f64,
    pub window: usize,
    /// `None` means `window / 6`.
    pub sigma: Option<f64>,
    pub c: f64,
    pub invert: bool,
}

impl Default for MethodDraft {
    fn default() -> Self {
        MethodDraft {
            method: "otsu".into(),
            fixed_t: 127.0,
            nu: 1.0,
            tau: None,
            kappa: 0.0,
            omega: 0.5,
            window: 11,
            sigma: None,
            c: 2.0,
            invert: false,
        }
    }
}

impl MethodDraft {
    pub fn from_method(m: &ThresholdMethod) -> Self {
        let mut draft = MethodDraft {
            method: m.name().into(),
            invert: m.invert,
            ..MethodDraft::default()
        };
        match m.kind {
            ThresholdKind::Fixed(t) => draft.fixed_t = t,
            ThresholdKind::Otsu | ThresholdKind::Met => {}
            ThresholdKind::Ght {
                nu,
                tau,
                kappa,
                omega,
            } => {
                draft.nu = nu;
                draft.tau = tau;
                draft.kappa = kappa;
                draft.omega = omega;
            }
            ThresholdKind::AdaptiveMean { window, c } => {
                draft.window = window;
                draft.c = c;
            }
            ThresholdKind::AdaptiveGaussian { window, sigma, c } => {
                draft.window = window;
                draft.sigma = Some(sigma);
                draft.c = c;
            }
        }
        draft
    }

    pub fn build(&self) -> Result<ThresholdMethod> {
        let kind = match self.method.as_str() {
            "fixed" => ThresholdKind::Fixed(self.fixed_t),
            "otsu" => ThresholdKind::Otsu,
            "met" => ThresholdKind::Met,
            "ght" => ThresholdKind::Ght {
                nu: self.nu,
                tau: self.tau,
                kappa: self.kappa,
                omega: self.omega,
            },
            "adaptive-mean" | "adaptive_mean" => ThresholdKind::AdaptiveMean {
                window: self.window,
                c: self.c,
            },
            "adaptive-gaussian" | "adaptive_gaussian" => ThresholdKind::AdaptiveGaussian {
                window: self.window,
                sigma: self.sigma.unwrap_or(self.window as f64 / 6.0),
                c: self.c,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown threshold method `{other}` \
                     (fixed|otsu|met|ght|adaptive-mean|adaptive-gaussian)"
                )))
            }
        };
        Ok(ThresholdMethod {
            kind,
            invert: self.invert,
        })
    }
}

/// Loss under construction from flags or config keys. Unset fields take the
/// loss's conventional defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossDraft {
    pub kind: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
}

impl LossDraft {
    pub fn build(&self) -> Result<LossSpec> {
        let eps = self.eps.unwrap_or(1e-6);
        Ok(match self.kind.as_str() {
            "bce" => LossSpec::Bce,
            "focal" => LossSpec::Focal {
                alpha: self.alpha.unwrap_or(0.25),
                gamma: self.gamma.unwrap_or(2.0),
            },
            "dice" => LossSpec::Dice { eps },
            "tversky" => LossSpec::Tversky {
                alpha: self.alpha.unwrap_or(0.7),
                beta: self.beta.unwrap_or(0.3),
                eps,
            },
            "focal_tversky" | "focal-tversky" => LossSpec::FocalTversky {
                alpha: self.alpha.unwrap_or(0.7),
                beta: self.beta.unwrap_or(0.3),
                gamma_exp: self.gamma.unwrap_or(0.75),
                eps,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown loss `{other}` (bce|focal|dice|tversky|focal_tversky)"
                )))
            }
        })
    }
}

fn parse_num<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse `{value}`")))
}

fn parse_opt_auto(section: &str, key: &str, value: &str) -> Result<Option<f64>> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(section, key, value).map(Some)
    }
}

/// Apply a config file on top of `cfg`. Unknown sections or keys are errors.
pub fn apply_config_file(cfg: &mut TrainConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut threshold = MethodDraft::from_method(&cfg.threshold);
    let mut loss = LossDraft {
        kind: cfg.loss.name().into(),
        ..LossDraft::default()
    };

    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            section = line[1..line.len() - 1].trim().to_string();
            if !["train", "threshold", "loss", "augment"].contains(&section.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown section [{section}]",
                    lineno + 1
                )));
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let unknown = || {
            Error::Config(format!(
                "line {}: unknown key `{key}` in section [{section}]",
                lineno + 1
            ))
        };
        match section.as_str() {
            "train" => match key {
                "mode" => {
                    cfg.mode = match value {
                        "selfsup" => TrainMode::SelfSup,
                        "supervised" => TrainMode::Supervised,
                        _ => {
                            return Err(Error::Config(format!(
                                "mode must be selfsup|supervised, got `{value}`"
                            )))
                        }
                    }
                }
                "epochs" => cfg.epochs = parse_num(&section, key, value)?,
                "batch_size" => cfg.batch_size = parse_num(&section, key, value)?,
                "lr" => cfg.lr = parse_num(&section, key, value)?,
                "patience" => cfg.patience = parse_num(&section, key, value)?,
                "seed" => cfg.seed = parse_num(&section, key, value)?,
                "eval_w" => cfg.eval_resize.0 = parse_num(&section, key, value)?,
                "eval_h" => cfg.eval_resize.1 = parse_num(&section, key, value)?,
                _ => return Err(unknown()),
            },
            "threshold" => match key {
                "method" => threshold.method = value.to_string(),
                "t" => threshold.fixed_t = parse_num(&section, key, value)?,
                "nu" => threshold.nu = parse_num(&section, key, value)?,
                "tau" => threshold.tau = parse_opt_auto(&section, key, value)?,
                "kappa" => threshold.kappa = parse_num(&section, key, value)?,
                "omega" => threshold.omega = parse_num(&section, key, value)?,
                "window" => threshold.window = parse_num(&section, key, value)?,
                "sigma" => threshold.sigma = parse_opt_auto(&section, key, value)?,
                "c" => threshold.c = parse_num(&section, key, value)?,
                "invert" => threshold.invert = parse_num(&section, key, value)?,
                _ => return Err(unknown()),
            },
            "loss" => match key {
                "kind" => loss.kind = value.to_string(),
                "alpha" => loss.alpha = Some(parse_num(&section, key, value)?),
                "beta" => loss.beta = Some(parse_num(&section, key, value)?),
                "gamma" => loss.gamma = Some(parse_num(&section, key, value)?),
                "eps" => loss.eps = Some(parse_num(&section, key, value)?),
                _ => return Err(unknown()),
            },
            "augment" => match key {
                "hflip_p" => cfg.hflip_p = parse_num(&section, key, value)?,
                "vflip_p" => cfg.vflip_p = parse_num(&section, key, value)?,
                "brightness_delta" => cfg.brightness_delta = parse_num(&section, key, value)?,
                "contrast_lo" => cfg.contrast_range.0 = parse_num(&section, key, value)?,
                "contrast_hi" => cfg.contrast_range.1 = parse_num(&section, key, value)?,
                _ => return Err(unknown()),
            },
            _ => {
                return Err(Error::Config(format!(
                    "line {}: key `{key}` outside any section",
                    lineno + 1
                )))
            }
        }
    }
    cfg.threshold = threshold.build()?;
    cfg.loss = loss.build()?;
    Ok(())
}

/// Generate a synthetic blob dataset and its manifest. Returns the manifest
/// path. `sparse` selects the low-foreground (~5%) variant.
pub fn cmd_synth(
    out: &Path,
    n: usize,
    width: usize,
    height: usize,
    seed: u64,
    sparse: bool,
) -> Result<PathBuf> {
    let spec = if sparse {
        SynthSpec::sparse(width, height)
    } else {
        SynthSpec::new(width, height)
    };
    pipeline::materialize_synth(out, n, &spec, seed)
}

/// Threshold every manifest image, writing one mask per image plus
/// `thresholds.csv` (`image,method,threshold`; the threshold column is
/// empty for local methods). With `dump_curves`, per-image score curves go
/// to `curves/<stem>.csv` as `cut,score` rows.
pub fn cmd_pseudo_mask(
    manifest: &Path,
    method: &ThresholdMethod,
    out: &Path,
    dump_curves: bool,
) -> Result<()> {
    let entries = load_manifest(manifest)?;
    fs::create_dir_all(out)?;
    if dump_curves {
        fs::create_dir_all(out.join("curves"))?;
    }
    let mut csv = String::from("image,method,threshold\n");
    for e in &entries {
        let img = e.load_image()?;
        let (mask, detail) = pseudo_mask_detailed(&img, method)?;
        let stem = e
            .image_path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .to_string();
        imgio::save_mask(&out.join(format!("{stem}_mask.png")), &mask)?;
        let threshold_field = detail
            .as_ref()
            .map(|d| format!("{:.6}", d.threshold))
            .unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{threshold_field}",
            e.image_path.file_name().unwrap().to_string_lossy(),
            method.name()
        );
        if dump_curves {
            if let Some(d) = &detail {
                let mut curve = String::from("cut,score\n");
                for (cut, score) in d.score_curve.iter().enumerate() {
                    let _ = writeln!(curve, "{cut},{score}");
                }
                fs::write(out.join("curves").join(format!("{stem}.csv")), curve)?;
            }
        }
    }
    fs::write(out.join("thresholds.csv"), csv)?;
    Ok(())
}

/// Which splits have a mask on every entry (and at least one entry).
fn fully_masked_splits(entries: &[ManifestEntry]) -> Vec<Split> {
    [Split::Val, Split::Test]
        .into_iter()
        .filter(|&s| {
            let mut of_split = entries.iter().filter(|e| e.split == s).peekable();
            of_split.peek().is_some() && of_split.all(|e| e.mask_path.is_some())
        })
        .collect()
}

/// Train per the config; evaluation runs on every split that is fully
/// masked, so unlabeled self-supervised corpora still train. Returns the
/// run directory.
pub fn cmd_train(manifest: &Path, cfg: &TrainConfig, out_root: &Path) -> Result<PathBuf> {
    let entries = load_manifest(manifest)?;
    let eval_splits = fully_masked_splits(&entries);
    let (params, record) = trainer::train_and_evaluate(&entries, cfg, &eval_splits)?;
    trainer::write_run_dir(out_root, cfg, &params, &record)
}

/// Evaluate a checkpoint on one split; writes `metrics.csv` into `out`.
pub fn cmd_eval(
    manifest: &Path,
    checkpoint: &Path,
    cfg: &TrainConfig,
    split: Split,
    cut: f64,
    out: &Path,
) -> Result<PathBuf> {
    let entries = load_manifest(manifest)?;
    let params = segmenter::load_checkpoint(checkpoint)?;
    let report = trainer::evaluate(&params, &entries, split, cfg.eval_resize, cut)?;
    fs::create_dir_all(out)?;
    let mut csv = format!("{METRICS_CSV_HEADER}\n");
    let _ = writeln!(
        csv,
        "{}",
        metrics_csv_row(
            &split.to_string(),
            cfg.seed,
            cfg.threshold.name(),
            cfg.loss.name(),
            &report
        )
    );
    let path = out.join("metrics.csv");
    fs::write(&path, csv)?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblateAxis {
    Thresholds,
    Losses,
    Epochs,
    Batch,
}

impl AblateAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "thresholds" => Ok(AblateAxis::Thresholds),
            "losses" => Ok(AblateAxis::Losses),
            "epochs" => Ok(AblateAxis::Epochs),
            "batch" => Ok(AblateAxis::Batch),
            other => Err(Error::Config(format!(
                "unknown ablation axis `{other}` (thresholds|losses|epochs|batch)"
            ))),
        }
    }

    fn column(&self) -> &'static str {
        match self {
            AblateAxis::Thresholds => "method",
            AblateAxis::Losses => "loss",
            AblateAxis::Epochs => "epochs",
            AblateAxis::Batch => "batch",
        }
    }
}

/// The standard comparison set for the thresholds axis.
pub fn ablation_threshold_methods() -> Vec<ThresholdMethod> {
    let d = MethodDraft::default();
    ["adaptive-mean", "adaptive-gaussian", "ght", "otsu", "met"]
        .iter()
        .map(|name| {
            MethodDraft {
                method: name.to_string(),
                ..d.clone()
            }
            .build()
            .expect("fixed method set")
        })
        .collect()
}

fn ablation_losses() -> Vec<LossSpec> {
    ["bce", "focal", "dice", "tversky", "focal_tversky"]
        .iter()
        .map(|kind| {
            LossDraft {
                kind: kind.to_string(),
                ..LossDraft::default()
            }
            .build()
            .expect("fixed loss set")
        })
        .collect()
}

/// Sweep one axis of the configuration, training once per (value, seed),
/// and write `ablate_<axis>.csv` with one row per run. Rows appear in sweep
/// order; runs fan out over `SASS_SEG_THREADS`.
pub fn cmd_ablate(
    manifest: &Path,
    base: &TrainConfig,
    axis: AblateAxis,
    values: Option<&[String]>,
    seeds: &[u64],
    out: &Path,
) -> Result<PathBuf> {
    let entries = load_manifest(manifest)?;
    if seeds.is_empty() {
        return Err(Error::invalid("need at least one seed"));
    }

    // (label, config) pairs for the sweep.
    let mut variants: Vec<(String, TrainConfig)> = Vec::new();
    match axis {
        AblateAxis::Thresholds => {
            if values.is_some() {
                return Err(Error::Config(
                    "the thresholds axis has a fixed method set; --values is not accepted".into(),
                ));
            }
            for m in ablation_threshold_methods() {
                let mut cfg = base.clone();
                cfg.threshold = m.clone();
                variants.push((m.name().to_string(), cfg));
            }
        }
        AblateAxis::Losses => {
            if values.is_some() {
                return Err(Error::Config(
                    "the losses axis has a fixed loss set; --values is not accepted".into(),
                ));
            }
            for l in ablation_losses() {
                let mut cfg = base.clone();
                cfg.loss = l.clone();
                variants.push((l.name().to_string(), cfg));
            }
        }
        AblateAxis::Epochs => {
            let defaults = ["10".into(), "20".into(), "50".into(), "70".into()];
            for v in values.unwrap_or(&defaults) {
                let epochs: usize = v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad epoch count `{v}`")))?;
                let mut cfg = base.clone();
                cfg.epochs = epochs;
                variants.push((v.clone(), cfg));
            }
        }
        AblateAxis::Batch => {
            let defaults = ["8".into(), "16".into(), "32".into()];
            for v in values.unwrap_or(&defaults) {
                let batch: usize = v
                    .parse()
                    .map_err(|_| Error::Config(format!("bad batch size `{v}`")))?;
                let mut cfg = base.clone();
                cfg.batch_size = batch;
                variants.push((v.clone(), cfg));
            }
        }
    }

    let mut jobs = Vec::new();
    for (label, cfg) in &variants {
        for &seed in seeds {
            let mut cfg = cfg.clone();
            cfg.seed = seed;
            let label = label.clone();
            let entries = &entries;
            jobs.push(move || -> Result<String> {
                let (_, record) = trainer::train_and_evaluate(entries, &cfg, &[Split::Test])?;
                let report = &record.evals[0].1;
                Ok(format!(
                    "{label},{seed},{:.6},{:.6},{:.6},{:.6},{}",
                    report.iou_macro,
                    report.iou_micro,
                    report.recall,
                    report.accuracy,
                    report.collapse
                ))
            });
        }
    }
    let rows: Vec<String> = run_jobs(jobs, thread_cap())
        .into_iter()
        .collect::<Result<_>>()?;

    fs::create_dir_all(out)?;
    let mut csv = format!(
        "{},seed,iou_macro,iou_micro,recall,accuracy,collapse\n",
        axis.column()
    );
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    let path = out.join(format!("ablate_{}.csv", axis.column()));
    fs::write(&path, csv)?;
    Ok(path)
}
