//! `kep`: generate pools, solve exchanges, and run multi-stage simulations.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use kep_core::{ConfigError, KepError, ModelError, ParseError, SolverError};

use commands::{SolveOutputs, Status};
use config::{ConfigProblem, Settings};

#[derive(Parser)]
#[command(name = "kep", version, about = "Kidney exchange across cooperating countries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a compatibility graph from a population description.
    Gen {
        /// key=value population file (pairs, altruists, patient-blood,
        /// donor-blood, pra, incompatible-only, seed).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one joint exchange on an instance file.
    Solve(SolveArgs),
    /// Simulate the three regimes over the stages of a horizon.
    Simulate(SimArgs),
    /// Simulate every combination of bounds and pool ratios.
    Sweep(SimArgs),
    /// Rebuild the table and charts from earlier CSV output.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// key=value file with any of the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// National cycle caps, one per country or one for all (e.g. 3:inf).
    #[arg(long)]
    bounds: Option<String>,
    #[arg(long)]
    international_cap: Option<String>,
    /// Longest segment in nodes, per country or one for all.
    #[arg(long)]
    segment_caps: Option<String>,
    /// Segments per country per international cycle.
    #[arg(long)]
    max_segments: Option<String>,
    /// Pairs per country per international cycle.
    #[arg(long)]
    max_pairs: Option<String>,
    /// Countries per international cycle.
    #[arg(long)]
    max_countries: Option<String>,
    #[arg(long)]
    chains: bool,
    /// auto, cycle, edge, mixed or atcz.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    export_lp: Option<PathBuf>,
    /// Print every constraint with its family tag.
    #[arg(long)]
    explain: bool,
    /// Print the enumerated candidate cycles.
    #[arg(long)]
    dump_cycles: bool,
    /// Write the solution summary here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seconds before the best solution found so far is reported.
    #[arg(long)]
    timeout: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    /// key=value file with any of the options below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// K1:K2, comma-separated for a sweep.
    #[arg(long)]
    bounds: Option<String>,
    /// a:b pool ratio, comma-separated for a sweep.
    #[arg(long)]
    ratio: Option<String>,
    /// Comma-separated subset of local, seq, merged.
    #[arg(long)]
    regimes: Option<String>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// desk or paper population sizes.
    #[arg(long)]
    scale: Option<String>,
    /// Pairs per country, one value or two comma-separated.
    #[arg(long)]
    pairs: Option<String>,
    /// Seconds per solve.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    chains: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SimArgs {
    fn settings(&self) -> Result<Settings> {
        let mut s = Settings::load(self.config.as_deref())?;
        s.set("bounds", self.bounds.as_ref());
        s.set("ratio", self.ratio.as_ref());
        s.set("regimes", self.regimes.as_ref());
        s.set("stages", self.stages);
        s.set("instances", self.instances);
        s.set("seed", self.seed);
        s.set("scale", self.scale.as_ref());
        s.set("pairs", self.pairs.as_ref());
        s.set("timeout", self.timeout);
        s.set("chains", self.chains.then_some(true));
        s.set("out", self.out.as_ref().map(|p| p.display()));
        Ok(s)
    }

    fn out_dir(settings: &Settings) -> PathBuf {
        PathBuf::from(settings.get("out").unwrap_or("kep-output"))
    }
}

impl SolveArgs {
    fn settings(&self) -> Result<Settings> {
        let mut s = Settings::load(self.config.as_deref())?;
        s.set("bounds", self.bounds.as_ref());
        s.set("international-cap", self.international_cap.as_ref());
        s.set("segment-caps", self.segment_caps.as_ref());
        s.set("max-segments", self.max_segments.as_ref());
        s.set("max-pairs", self.max_pairs.as_ref());
        s.set("max-countries", self.max_countries.as_ref());
        s.set("chains", self.chains.then_some(true));
        s.set("model", self.model.as_ref());
        s.set("export-lp", self.export_lp.as_ref().map(|p| p.display()));
        s.set("timeout", self.timeout);
        Ok(s)
    }
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Gen { spec, seed, out } => {
            let mut s = Settings::load(spec.as_deref())?;
            s.set("seed", seed);
            commands::gen(&s, &out)
        }
        Command::Solve(args) => {
            let outputs = SolveOutputs { explain: args.explain, dump_cycles: args.dump_cycles, out: args.out.clone() };
            commands::solve_instance(&args.instance, &args.settings()?, &outputs)
        }
        Command::Simulate(args) => {
            let s = args.settings()?;
            commands::simulate(&s, &SimArgs::out_dir(&s))
        }
        Command::Sweep(args) => {
            let s = args.settings()?;
            commands::run_sweep(&s, &SimArgs::out_dir(&s))
        }
        Command::Report { input, out } => {
            let out = out.unwrap_or_else(|| input.clone());
            commands::report(&input, &out)
        }
    }
}

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;
const EXIT_IO: u8 = 4;

fn kep_exit_code(e: &KepError) -> Option<u8> {
    match e {
        KepError::Config(_) | KepError::Graph(_) => Some(EXIT_CONFIG),
        KepError::Model(m) => model_exit_code(m),
        KepError::Solver(s) => solver_exit_code(s),
        KepError::Decode(_) => None,
    }
}

fn model_exit_code(e: &ModelError) -> Option<u8> {
    match e {
        ModelError::Unsupported(_) | ModelError::Config(_) | ModelError::Graph(_) => Some(EXIT_CONFIG),
        ModelError::UnknownNode(_) | ModelError::Invalid(_) => None,
    }
}

fn solver_exit_code(e: &SolverError) -> Option<u8> {
    matches!(e, SolverError::TimedOut { .. }).then_some(EXIT_TIMEOUT)
}

/// Maps the first recognised cause in the chain to an exit code.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        let code = if cause.is::<std::io::Error>() {
            Some(EXIT_IO)
        } else if cause.is::<ConfigProblem>() || cause.is::<ConfigError>() || cause.is::<ParseError>() {
            Some(EXIT_CONFIG)
        } else if let Some(e) = cause.downcast_ref::<KepError>() {
            kep_exit_code(e)
        } else if let Some(e) = cause.downcast_ref::<ModelError>() {
            model_exit_code(e)
        } else if let Some(e) = cause.downcast_ref::<SolverError>() {
            solver_exit_code(e)
        } else {
            None
        };
        if let Some(code) = code {
            return code;
        }
    }
    EXIT_FAILURE
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::TimedOut) => {
            eprintln!("warning: time limit reached; results use the best solutions found");
            ExitCode::from(EXIT_TIMEOUT)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn exit_codes_follow_the_cause() {
        let io = anyhow::Error::from(std::io::Error::new(std::io::ErrorKind::NotFound, "x")).context("reading");
        assert_eq!(exit_code(&io), EXIT_IO);
        let parse: Result<()> = Err(ParseError { line: 1, message: "bad".into() }.into());
        assert_eq!(exit_code(&parse.context("in file").unwrap_err()), EXIT_CONFIG);
        let unsupported = anyhow::Error::from(KepError::Model(ModelError::Unsupported("edge".into())));
        assert_eq!(exit_code(&unsupported), EXIT_CONFIG);
        assert_eq!(exit_code(&config::problem("x")), EXIT_CONFIG);
        assert_eq!(exit_code(&anyhow::Error::from(SolverError::Infeasible)), EXIT_FAILURE);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_FAILURE);
    }
}
