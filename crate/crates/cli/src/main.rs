//! `tpwn`: structural checks, exact expected time, oracles and PERT
//! reductions for timed probabilistic workflow nets.
//!
//! Exit codes: 0 on success, 1 when the input fails validation, 2 on usage
//! errors. Results go to stdout, diagnostics to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tpwn_core::analysis::{analyze, AnalysisError, AnalysisOptions};
use tpwn_core::chain::{build_chain, ChainOptions, DEFAULT_CHAIN_CAP};
use tpwn_core::generate::{generate_net, GeneratorParams};
use tpwn_core::io::{emit_net, parse_net, parse_net_lenient, parse_pert, AnalysisReport, DECIMAL_DIGITS};
use tpwn_core::net::WorkflowNet;
use tpwn_core::oracle::{
    enumerate_expected_time, simulate, EnumerationOptions, Estimate, SchedulerRule, SimulationOptions,
};
use tpwn_core::pert::{expected_project_duration, reduce_rational, reduce_unit_weights, DEFAULT_EDGE_CAP};
use tpwn_core::scalar::{format_decimal, format_rational, parse_rational};
use tpwn_core::structure::{analyze_structure, DEFAULT_MARKING_CAP};
use tpwn_core::timing::TieBreak;

#[derive(Parser)]
#[command(name = "tpwn", version, about = "Expected time of timed probabilistic workflow nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report workflow shape, 1-safety, soundness, free-choice and
    /// confusion-freeness.
    Check {
        net: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MARKING_CAP)]
        max_markings: usize,
        #[arg(long)]
        json: bool,
    },
    /// Exact expected time, or "infinite" for unsound nets.
    ExpectedTime {
        net: PathBuf,
        /// Skip reachability exploration and trust the net to be a sound TPWN.
        #[arg(long)]
        assume_sound: bool,
        #[arg(long, default_value_t = DEFAULT_CHAIN_CAP)]
        max_states: usize,
        #[arg(long, default_value_t = DEFAULT_MARKING_CAP)]
        max_markings: usize,
        #[arg(long, value_enum, default_value_t = Tie::Least)]
        tie: Tie,
        #[arg(long)]
        json: bool,
    },
    /// Write the earliest-first scheduler chain as Graphviz DOT.
    Chain {
        net: PathBuf,
        /// Output file, or `-` for stdout.
        #[arg(long)]
        dot: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHAIN_CAP)]
        max_states: usize,
        #[arg(long, value_enum, default_value_t = Tie::Least)]
        tie: Tie,
    },
    /// Expected time by enumerating scheduler-compatible runs.
    Enumerate {
        net: PathBuf,
        /// Drop branches below this probability, e.g. `1/1000000000`.
        #[arg(long, default_value = "0")]
        mass_epsilon: String,
        #[arg(long, value_enum, default_value_t = Scheduler::Earliest)]
        scheduler: Scheduler,
        #[arg(long, default_value_t = 10_000)]
        max_depth: usize,
    },
    /// Monte Carlo estimate under a random scheduler.
    Simulate {
        net: PathBuf,
        #[arg(long)]
        runs: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        step_cap: u64,
        #[arg(long)]
        json: bool,
    },
    /// Two-state stochastic PERT networks.
    Pert {
        #[command(subcommand)]
        command: PertCommand,
    },
    /// Random sound free-choice net.
    Generate(GenerateArgs),
}

#[derive(Subcommand)]
enum PertCommand {
    /// Validate a network.
    Check { pert: PathBuf },
    /// Expected project duration by enumeration.
    Expected {
        pert: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EDGE_CAP)]
        edge_cap: usize,
    },
    /// Translate into a net with the same expected time.
    Reduce {
        pert: PathBuf,
        /// Use weight-1 binary gadgets; needs dyadic probabilities.
        #[arg(long)]
        unit_weights: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    places: usize,
    #[arg(long)]
    seed: u64,
    /// Inclusive duration range `lo:hi`.
    #[arg(long, default_value = "1:10", value_parser = parse_range)]
    times: (u64, u64),
    /// Inclusive integer weight range `lo:hi`.
    #[arg(long, default_value = "1:10", value_parser = parse_range)]
    weights: (u64, u64),
    #[arg(long)]
    no_loops: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tie {
    Least,
    Greatest,
}

impl From<Tie> for TieBreak {
    fn from(t: Tie) -> Self {
        match t {
            Tie::Least => TieBreak::LeastIndex,
            Tie::Greatest => TieBreak::GreatestIndex,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheduler {
    Earliest,
    Leftmost,
    Rightmost,
}

impl From<Scheduler> for SchedulerRule {
    fn from(s: Scheduler) -> Self {
        match s {
            Scheduler::Earliest => SchedulerRule::Earliest,
            Scheduler::Leftmost => SchedulerRule::Leftmost,
            Scheduler::Rightmost => SchedulerRule::Rightmost,
        }
    }
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected lo:hi, got `{s}`"))?;
    let lo: u64 = lo.trim().parse().map_err(|e| format!("`{lo}`: {e}"))?;
    let hi: u64 = hi.trim().parse().map_err(|e| format!("`{hi}`: {e}"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

/// Error that maps to exit code 1.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl ToString) -> anyhow::Error {
    Invalid(msg.to_string()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_net(path: &Path, strict: bool) -> Result<WorkflowNet> {
    let text = read(path)?;
    let parsed = if strict { parse_net(&text) } else { parse_net_lenient(&text) };
    parsed.map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            fs::write(p, text).with_context(|| format!("cannot write {}", p.display()))
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Check { net, max_markings, json } => {
            let net = load_net(&net, false)?;
            let (report, _) = analyze_structure(&net, max_markings);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("workflow shape:    {}", yes_no(report.is_workflow_shape));
                println!("1-safe:            {}", yes_no(report.is_1safe));
                println!("sound:             {}", yes_no(report.is_sound));
                println!("free-choice:       {}", yes_no(report.is_free_choice));
                println!("confusion-free:    {}", yes_no(report.is_confusion_free));
                let complete = if report.exploration_complete { "" } else { " (incomplete)" };
                println!("reachable markings: {}{complete}", report.reachable_marking_count);
            }
            for d in &report.diagnostics {
                eprintln!("{d}");
            }
            Ok(if report.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::ExpectedTime { net, assume_sound, max_states, max_markings, tie, json } => {
            let net = load_net(&net, false)?;
            let options = AnalysisOptions { assume_sound, max_markings, max_states, tie: tie.into() };
            let analysis = analyze(&net, options).map_err(|e| match e {
                AnalysisError::Rejected(d) => invalid(d),
                other => invalid(other),
            })?;
            let report = AnalysisReport::new(&analysis);
            if json {
                println!("{}", report.to_json());
            } else {
                println!("{}", report.headline());
                if let Some(n) = report.chain_states {
                    println!("chain states: {n}");
                }
                let t = &analysis.timings;
                println!(
                    "time: structure {:.3} ms, construction {:.3} ms, solving {:.3} ms",
                    t.structure.as_secs_f64() * 1e3,
                    t.construction.as_secs_f64() * 1e3,
                    t.solving.as_secs_f64() * 1e3
                );
            }
            if let Some(w) = &report.witness {
                eprintln!("{w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Chain { net, dot, max_states, tie } => {
            let net = load_net(&net, true)?;
            let chain = build_chain(&net, ChainOptions { max_states, tie: tie.into() }).map_err(invalid)?;
            write_output(Some(&dot), &chain.to_dot(&net))?;
            eprintln!("{} states", chain.len());
            Ok(ExitCode::SUCCESS)
        }
        Command::Enumerate { net, mass_epsilon, scheduler, max_depth } => {
            let net = load_net(&net, true)?;
            let mass_epsilon = parse_rational(&mass_epsilon)
                .map_err(|e| anyhow::anyhow!("--mass-epsilon: {e}"))?;
            let options = EnumerationOptions { rule: scheduler.into(), mass_epsilon, max_depth };
            let res = enumerate_expected_time(&net, &options).map_err(invalid)?;
            let show = |v| format!("{} (= {})", format_rational(v), format_decimal(v, DECIMAL_DIGITS));
            match &res.estimate {
                Estimate::Exact(v) => println!("exact {}", show(v)),
                Estimate::Bounds { lower, covered_mass } => {
                    println!("lower bound {}", show(lower));
                    println!("covered mass {}", show(covered_mass));
                }
            }
            println!("runs {}, pruned branches {}", res.runs_explored, res.branches_pruned);
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { net, runs, seed, step_cap, json } => {
            let net = load_net(&net, true)?;
            let res = simulate(&net, SimulationOptions { step_cap, ..SimulationOptions::new(runs, seed) });
            if json {
                println!("{}", serde_json::to_string_pretty(&res)?);
            } else {
                println!("mean {} std_error {} samples {}", res.mean, res.std_error, res.samples);
            }
            let failed = res.step_cap_exceeded + res.deadlocked + res.unsafe_firings;
            if failed > 0 {
                eprintln!(
                    "{failed} runs discarded: {} over the step cap, {} deadlocked, {} unsafe",
                    res.step_cap_exceeded, res.deadlocked, res.unsafe_firings
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Pert { command } => match command {
            PertCommand::Check { pert } => {
                let text = read(&pert)?;
                let pn = parse_pert(&text).map_err(|e| invalid(format!("{}: {e}", pert.display())))?;
                println!("valid: {} vertices, {} edges", pn.vertices.len(), pn.edges.len());
                Ok(ExitCode::SUCCESS)
            }
            PertCommand::Expected { pert, edge_cap } => {
                let pn = parse_pert(&read(&pert)?).map_err(|e| invalid(format!("{}: {e}", pert.display())))?;
                let v = expected_project_duration(&pn, edge_cap).map_err(invalid)?;
                println!("{}", format_rational(&v));
                Ok(ExitCode::SUCCESS)
            }
            PertCommand::Reduce { pert, unit_weights, output } => {
                let pn = parse_pert(&read(&pert)?).map_err(|e| invalid(format!("{}: {e}", pert.display())))?;
                let net = if unit_weights { reduce_unit_weights(&pn) } else { reduce_rational(&pn) }
                    .map_err(invalid)?;
                write_output(output.as_deref(), &emit_net(&net))?;
                Ok(ExitCode::SUCCESS)
            }
        },
        Command::Generate(args) => {
            if args.weights.1 == 0 {
                bail!("--weights: the upper end must be positive");
            }
            let params = GeneratorParams {
                places: args.places,
                times: args.times,
                weights: args.weights,
                allow_loops: !args.no_loops,
                ..GeneratorParams::default()
            };
            let net = generate_net(&params, args.seed);
            write_output(args.output.as_deref(), &emit_net(&net))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) if e.is::<Invalid>() => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
