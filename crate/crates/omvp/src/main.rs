use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use omvp::attention::{collect_attention, incoming_attention, write_csv};
use omvp::checkpoint::Checkpoint;
use omvp::config::parse_preset;
use omvp::metrics::write_eval;
use omvp::render::render_episode;
use omvp::run::{cmd_train, eval_checkpoint, eval_scenario};
use omvp::{Error, Result};
use omvp_core::env::EnvConfig;
use omvp_core::trainer::Actor;

#[derive(Parser)]
#[command(name = "omvp", version, about = "Occluded multi-vehicle pursuit: train, evaluate and inspect agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Scenario {
    /// Grid width (odd); defaults to the checkpoint's.
    #[arg(long)]
    width: Option<usize>,
    /// Pursuers and evaders, e.g. `8v4`; defaults to the checkpoint's.
    #[arg(long)]
    scenario: Option<String>,
    /// Every evader keeps still.
    #[arg(long)]
    pin_still: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train from a TOML config; prints the run directory.
    Train { config: PathBuf },
    /// Greedy evaluation of a checkpoint.
    Eval {
        checkpoint: PathBuf,
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the summary as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Play one greedy episode as ASCII frames plus a JSON-lines trace.
    Render {
        /// Checkpoint path, or `random` for uniform play.
        checkpoint: String,
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "trace.jsonl")]
        trace: PathBuf,
    },
    /// Export attention weights at step `t` (and `t - 1`) as CSV.
    Attention {
        checkpoint: PathBuf,
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        t: u32,
        #[arg(long, default_value = "attention.csv")]
        out: PathBuf,
    },
}

fn preset(s: &Option<String>) -> Result<Option<(usize, usize)>> {
    s.as_deref()
        .map(|p| parse_preset(p).ok_or_else(|| Error::Config(format!("scenario {p:?} is not of the form <pursuers>v<evaders>"))))
        .transpose()
}

fn scenario_for(ck: &Checkpoint, s: &Scenario) -> Result<EnvConfig> {
    eval_scenario(ck, s.width, preset(&s.scenario)?, s.pin_still)
}

fn run(cli: Cli) -> Result<()> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Train { config } => {
            let run = cmd_train(&config)?;
            let last = run.outcome.metrics.last();
            writeln!(stdout, "{}", run.dir.display())?;
            if let Some(row) = last {
                writeln!(
                    stdout,
                    "env steps {}, train steps {}, final eval mean reward {}",
                    row.env_step, row.train_step, row.eval_mean_reward
                )?;
            }
        }
        Command::Eval { checkpoint, scenario, episodes, seed, csv } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let env = scenario_for(&ck, &scenario)?;
            let s = eval_checkpoint(&ck, &env, episodes, seed)?;
            write_eval(&mut stdout, seed, &s)?;
            if let Some(path) = csv {
                write_eval(fs::File::create(path)?, seed, &s)?;
            }
        }
        Command::Render { checkpoint, scenario, seed, trace } => {
            let mut file = io::BufWriter::new(fs::File::create(&trace)?);
            if checkpoint == "random" {
                let mut env = EnvConfig::default();
                if let Some(w) = scenario.width {
                    env.width = w;
                }
                if let Some((n, m)) = preset(&scenario.scenario)? {
                    env.pursuers = n;
                    env.evaders = m;
                }
                if scenario.pin_still {
                    env.pinned_strategy = Some(omvp_core::env::StrategyTag::Still);
                }
                env.validate()?;
                render_episode(Actor::Uniform, &env, seed, &mut stdout, &mut file)?;
            } else {
                let ck = Checkpoint::load(checkpoint.as_ref())?;
                let env = scenario_for(&ck, &scenario)?;
                let nets = ck.nets_for(&env)?;
                render_episode(nets.actor(), &env, seed, &mut stdout, &mut file)?;
            }
            file.flush()?;
        }
        Command::Attention { checkpoint, scenario, seed, t, out } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let env = scenario_for(&ck, &scenario)?;
            let nets = ck.nets_for(&env)?;
            let steps = collect_attention(nets.actor(), &env, seed, t)?;
            write_csv(fs::File::create(&out)?, &steps)?;
            let now = steps.last().expect("at least step t is collected");
            writeln!(stdout, "agent,mean_incoming_attention")?;
            for (k, a) in incoming_attention(now, env.pursuers).iter().enumerate() {
                writeln!(stdout, "{k},{a}")?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
