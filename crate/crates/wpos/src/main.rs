use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use wpos::pipeline;
use wpos::ExperimentConfig;
use wpos_nn::ModelKind;

#[derive(Parser)]
#[command(name = "wpos", version, about = "Zone-level UWB positioning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (TOML). Built-in desk-scale defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to one model.
    #[arg(long, value_parser = parse_model)]
    model: Option<ModelKind>,
    /// Override the number of repeats per cell.
    #[arg(long)]
    repeats: Option<usize>,
    /// Single-threaded, bit-reproducible execution.
    #[arg(long)]
    deterministic: bool,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Simulate datasets for every configured cell.
    Generate(Common),
    /// Run feature-size selection on the generated training splits.
    SelectF(Common),
    /// Train the configured models and save checkpoints.
    Train(Common),
    /// Evaluate checkpoints on the test splits and write metrics.
    Eval(Common),
    /// Reconstruct the ten-bin worked example.
    Table1 {
        /// Also write table1.csv to this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize metrics and selected feature sizes.
    Report(Common),
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(r) = self.repeats {
            cfg.repeats = r;
        }
        if let Some(m) = self.model {
            cfg.models = vec![m];
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate(c) => pipeline::cmd_generate(&c.config()?, c.threads()),
        Command::SelectF(c) => {
            for row in pipeline::cmd_select_f(&c.config()?)? {
                println!("scenario {} los {} snr {} repeat {}: F* = {}", row.scenario, row.los, row.snr_db, row.repeat, row.f_star);
            }
            Ok(())
        }
        Command::Train(c) => {
            let cfg = c.config()?;
            pipeline::cmd_train(&cfg, &cfg.models, c.threads())
        }
        Command::Eval(c) => {
            let cfg = c.config()?;
            pipeline::cmd_eval(&cfg, &cfg.models)?;
            print!("{}", pipeline::cmd_report(&cfg)?);
            Ok(())
        }
        Command::Table1 { out } => {
            print!("{}", pipeline::cmd_table1(out.as_deref())?);
            Ok(())
        }
        Command::Report(c) => {
            print!("{}", pipeline::cmd_report(&c.config()?)?);
            Ok(())
        }
    }
}
