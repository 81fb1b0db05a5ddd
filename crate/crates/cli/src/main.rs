//! `hyst`: ingest a MultiWOZ-format corpus, train the open-vocabulary and
//! joint trackers, pick the per-slot hybrid, ensemble seeds and report joint
//! goal accuracy.

mod artifacts;
mod config;
mod pipeline;
mod report;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};
use hyst_core::corpus::Split;
use hyst_core::synthetic::{write_synthetic, SyntheticConfig};

use config::{resolve, FileConfig, FlagOverrides};
use pipeline::{Pipeline, Tracker};

#[derive(Debug, Parser)]
#[command(name = "hyst", version, about = "Hybrid open-vocabulary / joint dialogue state tracking pipeline")]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Split to predict and evaluate on (train, dev or test).
    #[arg(long, global = true)]
    split: Option<Split>,
    /// Restrict training, prediction or hybrid selection to one configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Longest n-gram considered as a candidate value.
    #[arg(long, global = true)]
    max_ngram: Option<usize>,
    /// Probability above which a candidate fills a slot.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Root directory for run artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus directory; defaults to $HYST_DATA_DIR, then $MULTIWOZ_DIR.
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Small models on a deterministic 10% subsample.
    #[arg(long, global = true)]
    desk_scale: bool,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and subsample the corpus and record the dialogue ids per split.
    Ingest,
    /// Corpus and per-slot statistics.
    Stats,
    /// Candidate sets for every user turn, plus reachability ceilings.
    Candidates,
    /// Train the open-vocabulary tracker.
    TrainOv,
    /// Train the joint tracker.
    TrainJst,
    /// Predict dev and evaluation-split states with both trackers.
    Predict,
    /// Choose a tracker per slot on dev and stitch predictions.
    SelectHybrid,
    /// Majority-vote the seeds of each tracker and build the ensemble hybrid.
    Ensemble,
    /// Score predictions against gold and write the report.
    Evaluate {
        /// Prediction files to score instead of the run's own systems.
        #[arg(long, num_args = 1..)]
        predictions: Vec<PathBuf>,
    },
    /// Run every stage end to end.
    Reproduce,
    /// Write a synthetic corpus in the same file layout, for trying the pipeline.
    Synth {
        /// Destination directory.
        dir: PathBuf,
        /// Number of dialogues to generate.
        #[arg(long, default_value_t = 2000)]
        dialogues: usize,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();

    if let Command::Synth { dir, dialogues } = &cli.command {
        let config = SyntheticConfig {
            n_dialogues: *dialogues,
            seed: cli.seed.unwrap_or(0),
        };
        write_synthetic(dir, &config)?;
        println!("wrote {dialogues} synthetic dialogues to {}", dir.display());
        return Ok(());
    }

    let file = cli.config.as_deref().map(FileConfig::read).transpose()?;
    let flags = FlagOverrides {
        desk_scale: cli.desk_scale,
        data_dir: cli.data_dir.clone(),
        out_dir: cli.out.clone(),
        split: cli.split,
        max_ngram: cli.max_ngram,
        threshold: cli.threshold,
    };
    let mut p = Pipeline::new(resolve(file.as_ref(), &flags))?.quiet(cli.quiet);
    if !cli.quiet {
        eprintln!("run directory {} (config {})", p.run.root().display(), &p.run.hash()[..16]);
    }
    let seed = cli.seed;

    match cli.command {
        Command::Ingest => {
            p.ingest()?;
        }
        Command::Stats => print!("{}", p.stats()?),
        Command::Candidates => {
            p.candidates()?;
        }
        Command::TrainOv => p.train(Tracker::Ov, seed)?,
        Command::TrainJst => p.train(Tracker::Jst, seed)?,
        Command::Predict => p.predict(seed)?,
        Command::SelectHybrid => p.select_hybrid(seed)?,
        Command::Ensemble => p.ensemble()?,
        Command::Evaluate { predictions } if predictions.is_empty() => print!("{}", p.evaluate_run()?.to_text()),
        Command::Evaluate { predictions } => print!("{}", p.evaluate_files(&predictions)?.to_text()),
        Command::Reproduce => print!("{}", p.reproduce()?),
        Command::Synth { .. } => unreachable!("handled above"),
    }
    Ok(())
}
