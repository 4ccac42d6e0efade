use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dsr_core::probe::{export_latents, probe_report};
use dsr_core::trainer::{evaluate, run, RunConfig, SavedRun};
use dsr_core::{Error, Result};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(
    name = "dsr",
    version,
    about = "Sequence-representation SAC on distracting point-mass tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed (or every configured seed) and write metrics and a checkpoint.
    Train {
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Train only this seed, writing directly into `--out`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Disable an auxiliary loss: im, rm, dm or all. Repeatable.
        #[arg(long, value_name = "TERM")]
        ablate: Vec<String>,
    },
    /// Evaluate the deterministic policy of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// `eval` for the configured evaluation scenes, or comma-separated scene seeds.
        #[arg(long, default_value = "eval")]
        scenes: String,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export latents as CSV and print linear-probe diagnostics.
    Probe {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_scenes(arg: &str, eval: &[u64]) -> Result<Vec<u64>> {
    if arg == "eval" {
        return Ok(eval.to_vec());
    }
    arg.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad scene seed `{s}`")))
        })
        .collect()
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            ablate,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            for a in &ablate {
                cfg.ablation.disable(a)?;
            }
            let runs: Vec<(u64, PathBuf)> = match seed {
                Some(s) => vec![(s, out)],
                None => cfg
                    .schedule
                    .seeds
                    .iter()
                    .map(|&s| (s, out.join(format!("seed-{s}"))))
                    .collect(),
            };
            for (s, dir) in runs {
                let outcome = run(&cfg, s, Some(&dir))?;
                println!("{}", serde_json::to_string(outcome.final_record())?);
            }
        }
        Command::Eval {
            checkpoint,
            scenes,
            episodes,
            seed,
        } => {
            let saved = SavedRun::load(&checkpoint)?;
            let spec = &saved.config.env;
            let scenes = parse_scenes(&scenes, &spec.eval_scenes)?;
            let s = evaluate(&saved.policy(), spec, &scenes, episodes, seed)?;
            println!(
                "{}",
                serde_json::json!({ "mean": s.mean, "std": s.std, "returns": s.returns })
            );
        }
        Command::Probe {
            checkpoint,
            out,
            samples,
            pairs,
            seed,
        } => {
            let saved = SavedRun::load(&checkpoint)?;
            let l = &saved.learner;
            let spec = &saved.config.env;
            export_latents(&l.agent, &l.store, spec, samples, seed, &out)?;
            let report = probe_report(
                &l.agent,
                &l.store,
                spec,
                samples,
                pairs,
                seed,
                &saved.dir.display().to_string(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
