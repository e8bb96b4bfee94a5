use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pawfuse_cli::commands::{cmd_dedup, cmd_eda, cmd_predict, cmd_train};
use pawfuse_cli::config::{Overrides, RunConfig};

/// Pet photo popularity: dataset analysis, duplicate search, KFold training
/// of the metadata and image models, and fused prediction.
#[derive(Parser)]
#[command(name = "pawfuse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Histograms, feature correlations and duplicate summary of the training set.
    Eda(Common),
    /// Perceptual-hash duplicate groups, written as CSV.
    Dedup(Common),
    /// Trains both models on every fold and writes checkpoints and a manifest.
    Train(Common),
    /// Fused, fold-averaged predictions for a test CSV.
    Predict(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; relative paths inside resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; for `predict`, the directory `train` wrote.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest Hamming distance (0..=64) counted as a duplicate.
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    folds: Option<usize>,
    /// Test-time augmentation views per image.
    #[arg(long)]
    tta: Option<usize>,
    #[arg(long)]
    train_csv: Option<PathBuf>,
    #[arg(long)]
    test_csv: Option<PathBuf>,
    #[arg(long)]
    image_dir: Option<PathBuf>,
    #[arg(long)]
    test_image_dir: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
}

impl Common {
    fn resolve(self) -> anyhow::Result<RunConfig> {
        let overrides = Overrides {
            seed: self.seed,
            out: self.out,
            threshold: self.threshold,
            folds: self.folds,
            tta: self.tta,
            train_csv: self.train_csv,
            test_csv: self.test_csv,
            image_dir: self.image_dir,
            test_image_dir: self.test_image_dir,
            embeddings: self.embeddings,
            annotations: self.annotations,
        };
        RunConfig::resolve(self.config.as_deref(), overrides)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let written = match cli.command {
        Command::Eda(c) => cmd_eda(&c.resolve()?)?,
        Command::Dedup(c) => cmd_dedup(&c.resolve()?)?,
        Command::Predict(c) => cmd_predict(&c.resolve()?)?,
        Command::Train(c) => {
            let cfg = c.resolve()?;
            let manifest = cmd_train(&cfg)?;
            for f in &manifest.folds {
                println!(
                    "fold {}: val_meta {:.4} val_image {:.4} std {:.4} w_meta {:.4} w_pic {:.4}{}",
                    f.fold,
                    f.val_meta,
                    f.val_image,
                    f.std,
                    f.w_meta,
                    f.w_pic,
                    if f.degenerate { " degenerate" } else { "" }
                );
            }
            vec![cfg.out_dir().join(pawfuse_cli::manifest::MANIFEST_FILE)]
        }
    };
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PAWFUSE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
