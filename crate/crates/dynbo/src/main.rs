use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dynbo::instance::{dump_instance, parse_instance};
use dynbo::report::{baseline_for, load_results, statistics, summary_rows, table_string};
use dynbo::{emit_plot_data, load_config, run_experiment, PlotKind};
use dynbo_core::benchmarks::{mpb_advance, mpb_eval, mpb_init, true_optimum, MpbSettings, MpbState, PeakShape};
use dynbo_core::rng::seeded;
use dynbo_core::Bounds;

/// Transfer-learning Bayesian optimization on dynamic benchmarks.
#[derive(Parser, Debug)]
#[command(name = "dynbo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run every configured (problem, algorithm, repetition) and write the results.
    Run {
        config: PathBuf,
        /// Overrides the configured output directory.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the configured number of worker threads.
        #[arg(long)]
        parallelism: Option<usize>,
    },
    /// Print the summary and statistics tables of a results directory.
    Report { results: PathBuf },
    /// Write plot-ready tables into a results directory.
    Plotdata {
        results: PathBuf,
        /// trajectory, bars or rho
        #[arg(long)]
        kind: PlotKind,
    },
    /// Inspect benchmark instances.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Print an instance at a given step in the dump format.
    Dump(Generator),
    /// Evaluate a point and print the value and the true optimum.
    Eval {
        #[command(flatten)]
        generator: Generator,
        /// Read the instance from a dump file instead of generating it.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Comma-separated coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct Generator {
    /// cone or gaussian
    #[arg(long, default_value = "cone")]
    shape: String,
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 5)]
    peaks: usize,
    #[arg(long, default_value_t = 1.0)]
    height_severity: f64,
    #[arg(long, default_value_t = 1.0)]
    shift_severity: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time step to show, from 1.
    #[arg(long, default_value_t = 1)]
    step: usize,
}

impl Generator {
    fn settings(&self) -> MpbSettings {
        MpbSettings::with_severities(self.height_severity, self.shift_severity)
    }

    fn state(&self) -> Result<MpbState> {
        let shape = match self.shape.as_str() {
            "cone" => PeakShape::Cone,
            "gaussian" => PeakShape::Gaussian,
            other => bail!("unknown shape {other:?}; expected cone or gaussian"),
        };
        if self.step == 0 {
            bail!("--step counts from 1");
        }
        let bounds = Bounds::uniform(self.dim, 0.0, 100.0)?;
        let mut rng = seeded(self.seed);
        let mut state = mpb_init(self.peaks, shape, &bounds, &self.settings(), &mut rng)?;
        while state.step < self.step {
            state = mpb_advance(&state, &mut rng);
        }
        Ok(state)
    }
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, output, parallelism } => {
            let mut cfg = load_config(&config)?;
            if let Some(o) = output {
                cfg.output = o;
            }
            if parallelism.is_some() {
                cfg.parallelism = parallelism;
            }
            let outcome = run_experiment(&cfg)?;
            println!("{} runs completed, results in {}", outcome.completed, outcome.dir.display());
            for f in &outcome.failures {
                eprintln!("failed: {} {} rep {}: {}", f.problem, f.algorithm, f.repetition, f.message);
            }
            Ok(outcome.success())
        }
        Command::Report { results } => {
            let set = load_results(&results)?;
            print!("{}", table_string(&summary_rows(&set))?);
            println!();
            print!("{}", table_string(&statistics(&set, &baseline_for(&results, &set))?)?);
            Ok(true)
        }
        Command::Plotdata { results, kind } => {
            let path = emit_plot_data(&results, kind)?;
            println!("{}", path.display());
            Ok(true)
        }
        Command::Bench { command: BenchCommand::Dump(g) } => {
            print!("{}", dump_instance(&g.state()?));
            Ok(true)
        }
        Command::Bench { command: BenchCommand::Eval { generator, instance, point } } => {
            let state = match instance {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    parse_instance(&text, &generator.settings())?
                }
                None => generator.state()?,
            };
            let value = mpb_eval(&state, &point)?;
            let (x, f) = true_optimum(&state);
            println!("value,{value}");
            println!("optimum,{f}");
            println!("argmax,{}", x.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
