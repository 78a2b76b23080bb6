use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use pmdp_core::ccp::{synthesize_with_progress, SynthesisError, TauSchedule};
use pmdp_core::encode::{build_nlp, nlp_to_qcqp, write_qcqp, SplitMethod};
use pmdp_core::graph::analyze;
use pmdp_core::mc::{check, McError};
use pmdp_core::parser::{parse_rational, parse_valuation, write_model, write_valuation, KeyValueBlock};
use pmdp_core::pso::{synthesize_pso, PsoConfig};
use pmdp_core::{gen, parse_model, parse_spec, CcpConfig, Pmdp, Rational, Specification, SynthesisResult, SynthesisStatus};

/// Exit codes by outcome category.
const OK: u8 = 0;
const INVALID: u8 = 1;
const NEGATIVE: u8 = 2;
const NOT_SUPPORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "pmdp", version, about = "Parameter synthesis for affine parametric MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for a parameter valuation that satisfies the specification.
    Synth(SynthArgs),
    /// Model check one valuation.
    Check(CheckArgs),
    /// Write the nonconvex program in its text listing.
    Encode(EncodeArgs),
    /// Generate a benchmark model.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ccp,
    Pso,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Bilinear,
    Eigen,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Grid,
    Maze,
    Chain,
}

#[derive(Args)]
struct ProblemArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Specification such as `P<=0.3` or `E>=12`.
    #[arg(long)]
    spec: String,
    /// Lower bound on every instantiated transition probability.
    #[arg(long, value_parser = rational_arg, default_value = "1/100000")]
    eps_graph: Rational,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    method: Method,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Write the instantiation here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration limit (CCP iterations per attempt or PSO generations).
    #[arg(long)]
    max_iters: Option<usize>,
    /// Value-iteration tolerance.
    #[arg(long)]
    mc_tol: Option<f64>,
    #[arg(long)]
    tau0: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    /// Multiply the penalty weight by this factor each iteration instead of
    /// the additive update.
    #[arg(long)]
    tau_growth: Option<f64>,
    #[arg(long, value_enum, default_value = "bilinear")]
    split: Split,
    /// Re-anchor at the solver's state values instead of model-checked ones.
    #[arg(long)]
    no_mc_feedback: bool,
    /// Rebuild the convex program and cold-start the solver every iteration.
    #[arg(long)]
    no_incremental: bool,
    /// Randomized restarts after the first attempt.
    #[arg(long)]
    restarts: Option<usize>,
    /// Write the nonconvex program before solving.
    #[arg(long)]
    dump_qcqp: Option<PathBuf>,
    /// Print one line per CCP iteration on stderr.
    #[arg(long)]
    progress: bool,
    /// Swarm size.
    #[arg(long)]
    particles: Option<usize>,
    /// Worker threads for particle evaluation.
    #[arg(long)]
    jobs: Option<usize>,
    /// PSO wall-clock budget in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Valuation file with one `<id> = <decimal>` per line.
    #[arg(long)]
    valuation: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: Family,
    /// Side length (grid, maze) or number of steps (chain).
    #[arg(long)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    params: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maze only: a single action per state.
    #[arg(long)]
    pmc: bool,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INVALID } else { OK });
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Encode(a) => cmd_encode(&a),
        Command::Gen(a) => cmd_gen(&a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INVALID)
        }
    }
}

fn load(p: &ProblemArgs) -> Result<(Pmdp, Specification)> {
    let text = fs::read_to_string(&p.model).with_context(|| format!("reading {}", p.model.display()))?;
    let m = parse_model(&text).with_context(|| format!("{}", p.model.display()))?;
    let spec = parse_spec(&p.spec).with_context(|| format!("specification `{}`", p.spec))?;
    Ok((m, spec))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn encode_listing(m: &Pmdp, spec: &Specification, eps: &Rational) -> Result<String> {
    let analysis = analyze(m, spec)?;
    let nlp = build_nlp(m, spec, &analysis, eps)?;
    Ok(write_qcqp(&nlp_to_qcqp(&nlp)))
}

fn cmd_synth(a: &SynthArgs) -> Result<u8> {
    let (m, spec) = load(&a.problem)?;
    if let Some(path) = &a.dump_qcqp {
        write_out(Some(path), &encode_listing(&m, &spec, &a.problem.eps_graph)?)?;
    }
    let outcome = match a.method {
        Method::Ccp => {
            let mut cfg = CcpConfig {
                tau0: a.tau0,
                eps_graph: a.problem.eps_graph.clone(),
                split: match a.split {
                    Split::Bilinear => SplitMethod::Bilinear,
                    Split::Eigen => SplitMethod::Eigen,
                },
                mc_feedback: !a.no_mc_feedback,
                incremental: !a.no_incremental,
                ..CcpConfig::default()
            };
            if let Some(t) = a.tau_max {
                cfg.tau_max = t;
            }
            if let Some(g) = a.tau_growth {
                cfg.schedule = TauSchedule::Multiplicative(g);
            }
            if let Some(n) = a.max_iters {
                cfg.max_iters = n;
            }
            if let Some(t) = a.mc_tol {
                cfg.mc_tol = t;
            }
            if let Some(r) = a.restarts {
                cfg.restarts = r;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            let progress = a.progress;
            synthesize_with_progress(&m, &spec, &cfg, &mut |p| {
                if progress {
                    eprintln!("{p}");
                }
            })
        }
        Method::Pso => {
            let mut cfg = PsoConfig {
                eps_graph: a.problem.eps_graph.clone(),
                jobs: a.jobs,
                time_limit: a.time_limit.map(Duration::from_secs_f64),
                ..PsoConfig::default()
            };
            if let Some(n) = a.max_iters {
                cfg.max_iters = n;
            }
            if let Some(t) = a.mc_tol {
                cfg.mc_tol = t;
            }
            if let Some(p) = a.particles {
                cfg.particles = p;
            }
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            synthesize_pso(&m, &spec, &cfg)
        }
    };
    let r = match outcome {
        Ok(r) => r,
        Err(SynthesisError::NotSupported(why)) => {
            eprintln!("not supported: {why}");
            println!("status = not-supported");
            return Ok(NOT_SUPPORTED);
        }
        Err(e) => return Err(e.into()),
    };
    report(&m, a, &r)
}

fn report(m: &Pmdp, a: &SynthArgs, r: &SynthesisResult) -> Result<u8> {
    let mut stats = KeyValueBlock::default();
    stats.push("status", r.status);
    stats.push(
        "method",
        match a.method {
            Method::Ccp => "ccp",
            Method::Pso => "pso",
        },
    );
    if let Some(v) = r.value {
        stats.push("value", v);
    }
    stats.push("iterations", r.iterations);
    stats.push("restarts", r.restarts);
    stats.push("encode_time", format!("{:.6}", r.encode_time.as_secs_f64()));
    stats.push("solver_time", format!("{:.6}", r.solver_time.as_secs_f64()));
    stats.push("total_time", format!("{:.6}", r.total_time.as_secs_f64()));
    stats.push("solver_fraction", format!("{:.4}", r.solver_fraction()));
    print!("{stats}");

    if r.status != SynthesisStatus::Feasible {
        return Ok(NEGATIVE);
    }
    let values = r.values.as_deref().context("feasible result without values")?;
    let valuation = write_valuation(m, values);
    println!();
    print!("{valuation}");
    if let Some(path) = &a.out {
        write_out(Some(path), &valuation)?;
    }
    Ok(OK)
}

fn cmd_check(a: &CheckArgs) -> Result<u8> {
    let (m, spec) = load(&a.problem)?;
    let text = fs::read_to_string(&a.valuation).with_context(|| format!("reading {}", a.valuation.display()))?;
    let u = parse_valuation(&text, &m).with_context(|| format!("{}", a.valuation.display()))?;
    match check(&m, &u, &spec, &a.problem.eps_graph) {
        Ok(o) => {
            let mut out = KeyValueBlock::default();
            out.push("value", o.value);
            out.push("holds", o.holds);
            print!("{out}");
            Ok(if o.holds { OK } else { NEGATIVE })
        }
        Err(McError::IllDefined(violations)) => {
            eprintln!("valuation is not well defined:");
            for v in violations {
                eprintln!("  {v}");
            }
            Ok(INVALID)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_encode(a: &EncodeArgs) -> Result<u8> {
    let (m, spec) = load(&a.problem)?;
    write_out(a.out.as_deref(), &encode_listing(&m, &spec, &a.problem.eps_graph)?)?;
    Ok(OK)
}

fn cmd_gen(a: &GenArgs) -> Result<u8> {
    anyhow::ensure!(a.size >= 1, "size must be at least 1");
    anyhow::ensure!(a.params >= 1, "need at least one parameter");
    let m = match a.family {
        Family::Grid => gen::grid(a.size, a.params, a.seed),
        Family::Maze => {
            anyhow::ensure!(a.size >= 2, "maze needs size at least 2");
            gen::maze(a.size, a.params, a.seed, a.pmc)
        }
        Family::Chain => gen::chain(a.size, a.params),
    };
    write_out(a.out.as_deref(), &write_model(&m))?;
    Ok(OK)
}
