//! Thin command-line front end; all logic lives in the library's `cli`
//! module.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sass_seg::cli::{self, AblateAxis, LossDraft, MethodDraft};
use sass_seg::pipeline::Split;
use sass_seg::trainer::{TrainConfig, TrainMode};
use sass_seg::Result;

#[derive(Parser)]
#[command(
    name = "sass-seg",
    about = "Self-adaptive semantic segmentation: thresholding pseudo-labels \
             supervising a tiny encoder-decoder",
    version
)]
struct Cli {
    /// Config file (`key = value` with [train]/[threshold]/[loss]/[augment]
    /// sections); command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Training / generation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic blob dataset plus manifest.
    Synth {
        /// Number of image/mask pairs.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        /// Low-foreground (~5%) variant.
        #[arg(long)]
        sparse: bool,
    },
    /// Threshold every manifest image into a pseudo-mask.
    PseudoMask {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        /// Also dump per-image score curves as CSV.
        #[arg(long)]
        curves: bool,
    },
    /// Train a segmenter (self-supervised by default).
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        overrides: TrainArgs,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// train | val | test
        #[arg(long, default_value = "test")]
        split: String,
        /// Binarization cut in (0,1).
        #[arg(long, default_value_t = 0.5)]
        cut: f64,
        #[command(flatten)]
        overrides: TrainArgs,
    },
    /// Sweep one axis (thresholds | losses | epochs | batch) across seeds.
    Ablate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        axis: String,
        /// Axis values for epochs/batch sweeps (e.g. --values 8,16,32).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<String>>,
        /// Seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        seeds: Vec<u64>,
        #[command(flatten)]
        overrides: TrainArgs,
    },
}

/// Threshold method flags shared by `pseudo-mask`, `train` and `eval`.
#[derive(Args)]
struct MethodArgs {
    /// fixed | otsu | met | ght | adaptive-mean | adaptive-gaussian
    #[arg(long, default_value = "otsu")]
    method: String,
    /// Cut for the fixed method.
    #[arg(long, default_value_t = 127.0)]
    fixed_t: f64,
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// GHT tau; omit for per-image intensity std.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.5)]
    omega: f64,
    /// Adaptive window (odd, >= 3).
    #[arg(long, default_value_t = 11)]
    window: usize,
    /// Adaptive Gaussian sigma; omit for window/6.
    #[arg(long)]
    sigma: Option<f64>,
    /// Adaptive offset subtracted from the local mean.
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Complement the mask (foreground below threshold).
    #[arg(long)]
    invert: bool,
}

impl MethodArgs {
    fn to_draft(&self) -> MethodDraft {
        MethodDraft {
            method: self.method.clone(),
            fixed_t: self.fixed_t,
            nu: self.nu,
            tau: self.tau,
            kappa: self.kappa,
            omega: self.omega,
            window: self.window,
            sigma: self.sigma,
            c: self.c,
            invert: self.invert,
        }
    }
}

/// Training overrides applied after the config file.
#[derive(Args)]
struct TrainArgs {
    /// selfsup | supervised
    #[arg(long)]
    mode: Option<String>,
    /// Threshold method override (see pseudo-mask flags for parameters).
    #[arg(long)]
    method: Option<String>,
    /// bce | focal | dice | tversky | focal_tversky
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    /// Working resolution (square), even.
    #[arg(long)]
    size: Option<usize>,
}

impl TrainArgs {
    fn apply(&self, cfg: &mut TrainConfig) -> Result<()> {
        if let Some(mode) = &self.mode {
            cfg.mode = match mode.as_str() {
                "selfsup" => TrainMode::SelfSup,
                "supervised" => TrainMode::Supervised,
                other => {
                    return Err(sass_seg::Error::Config(format!(
                        "mode must be selfsup|supervised, got `{other}`"
                    )))
                }
            };
        }
        if let Some(method) = &self.method {
            cfg.threshold = MethodDraft {
                method: method.clone(),
                ..MethodDraft::from_method(&cfg.threshold)
            }
            .build()?;
        }
        if let Some(loss) = &self.loss {
            cfg.loss = LossDraft {
                kind: loss.clone(),
                ..LossDraft::default()
            }
            .build()?;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.patience {
            cfg.patience = v;
        }
        if let Some(v) = self.size {
            cfg.eval_resize = (v, v);
        }
        Ok(())
    }
}

fn build_config(cli: &Cli, overrides: Option<&TrainArgs>) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &cli.config {
        cli::apply_config_file(&mut cfg, path)?;
    }
    if let Some(args) = overrides {
        args.apply(&mut cfg)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_split(s: &str) -> Result<Split> {
    Split::parse(s)
        .ok_or_else(|| sass_seg::Error::Config(format!("split must be train|val|test, got `{s}`")))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth {
            n,
            width,
            height,
            sparse,
        } => {
            let seed = cli.seed.unwrap_or(7);
            let manifest = cli::cmd_synth(&cli.out, *n, *width, *height, seed, *sparse)?;
            println!("wrote {} images; manifest at {}", n, manifest.display());
        }
        Command::PseudoMask {
            manifest,
            method,
            curves,
        } => {
            let method = method.to_draft().build()?;
            cli::cmd_pseudo_mask(manifest, &method, &cli.out, *curves)?;
            println!("masks and thresholds.csv written to {}", cli.out.display());
        }
        Command::Train {
            manifest,
            overrides,
        } => {
            let cfg = build_config(cli, Some(overrides))?;
            let dir = cli::cmd_train(manifest, &cfg, &cli.out)?;
            println!("run directory: {}", dir.display());
        }
        Command::Eval {
            manifest,
            checkpoint,
            split,
            cut,
            overrides,
        } => {
            let cfg = build_config(cli, Some(overrides))?;
            let split = parse_split(split)?;
            let path = cli::cmd_eval(manifest, checkpoint, &cfg, split, *cut, &cli.out)?;
            println!("metrics written to {}", path.display());
        }
        Command::Ablate {
            manifest,
            axis,
            values,
            seeds,
            overrides,
        } => {
            let cfg = build_config(cli, Some(overrides))?;
            let axis = AblateAxis::parse(axis)?;
            let path = cli::cmd_ablate(manifest, &cfg, axis, values.as_deref(), seeds, &cli.out)?;
            println!("ablation table written to {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
