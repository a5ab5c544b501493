//! `tdsim`: generate fixture states, estimate trace distances, run seed
//! sweeps, and execute the acceptance suite.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use tdsim::accept::{run_acceptance, FaultInjection};
use tdsim::sweep::{run_sweep, SweepPlan};
use tdsim_core::algorithms::{
    estimate_purified_states, estimate_samples, swap_test_pure, ApproxLowRankProfile,
    EstimateReport, EstimationConfig,
};
use tdsim_core::block_encoding::purify;
use tdsim_core::estimators::BackendMode;
use tdsim_core::fixtures::{gen_from_spec, to_json_string, FamilySpec, FixtureSpec, GeneratedState};

#[derive(Parser)]
#[command(
    name = "tdsim",
    about = "Desk-scale simulator for trace-distance estimation between low-rank mixed states",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fixture state (with its spectral profile) as JSON.
    Gen(GenArgs),
    /// Estimate the trace distance between two stored states.
    Estimate(EstimateArgs),
    /// SWAP-test estimator for two pure states.
    SwapPure(SwapArgs),
    /// Run a sweep plan and write rows, checkpoints, and a summary.
    Sweep(SweepArgs),
    /// Run the acceptance suite; exits nonzero on any failure.
    Accept(AcceptArgs),
}

#[derive(Args)]
struct GenArgs {
    /// State family: low-rank | depolarized | gibbs | power-law | pure
    #[arg(long)]
    family: String,
    /// System qubits.
    #[arg(long)]
    n: usize,
    /// Rank (low-rank, depolarized).
    #[arg(long)]
    rank: Option<usize>,
    /// Depolarizing strength (depolarized).
    #[arg(long)]
    lambda: Option<f64>,
    /// Level cut (gibbs).
    #[arg(long)]
    k: Option<usize>,
    /// Spectral gap above the cut (gibbs).
    #[arg(long)]
    gap: Option<f64>,
    /// Envelope constant (power-law).
    #[arg(long)]
    cap_c: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Output path for the state + profile JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Access model: purified | samples
    #[arg(long)]
    mode: String,
    #[arg(long)]
    state_a: PathBuf,
    #[arg(long)]
    state_b: PathBuf,
    #[arg(long)]
    eps: f64,
    /// Rank bound deriving the threshold (overrides embedded profiles).
    #[arg(long)]
    rank_bound: Option<usize>,
    /// Profile JSON applied to both states (overrides embedded profiles).
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Explicit threshold (overrides every derivation).
    #[arg(long)]
    delta_p: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// ideal | sampling | qae (default: the algorithm's own choice)
    #[arg(long)]
    backend: Option<String>,
    /// Odd repetition count for median amplification.
    #[arg(long, default_value_t = tdsim_core::config::DEFAULT_MEDIAN_K)]
    median_k: usize,
    /// Append the report row to this CSV file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SwapArgs {
    #[arg(long)]
    state_a: PathBuf,
    #[arg(long)]
    state_b: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, default_value_t = tdsim_core::config::DEFAULT_MEDIAN_K)]
    median_k: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep plan JSON.
    #[arg(long)]
    plan: PathBuf,
    /// Output directory for rows.csv, checkpoints, and summary.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AcceptArgs {
    /// Run only criteria whose tags contain this string (or a criterion id).
    #[arg(long)]
    only: Option<String>,
    /// Negative control: corrupt a subsystem so its criterion fails.
    #[arg(long)]
    inject_fault: Option<String>,
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(args) => cmd_gen(args).map(|_| 0),
        Command::Estimate(args) => cmd_estimate(args).map(|_| 0),
        Command::SwapPure(args) => cmd_swap(args).map(|_| 0),
        Command::Sweep(args) => cmd_sweep(args).map(|_| 0),
        Command::Accept(args) => cmd_accept(args),
    }
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let family = match args.family.as_str() {
        "low-rank" => FamilySpec::LowRank {
            r: args.rank.context("--rank required for low-rank")?,
        },
        "depolarized" => FamilySpec::Depolarized {
            r: args.rank.context("--rank required for depolarized")?,
            lambda: args.lambda.context("--lambda required for depolarized")?,
        },
        "gibbs" => FamilySpec::Gibbs {
            k: args.k.context("--k required for gibbs")?,
            gap: args.gap.context("--gap required for gibbs")?,
        },
        "power-law" => FamilySpec::PowerLaw {
            c: args.cap_c.context("--cap-c required for power-law")?,
        },
        "pure" => FamilySpec::Pure,
        other => bail!("unknown family '{other}'"),
    };
    let spec = FixtureSpec {
        family,
        n: args.n,
        seed: args.seed,
    };
    let state = gen_from_spec(&spec)?;
    fs::write(&args.out, to_json_string(&state)?)?;
    println!(
        "wrote {} ({} qubits, rank {})",
        args.out.display(),
        state.state.n(),
        state.state.rank()
    );
    Ok(())
}

fn load_state(path: &Path) -> Result<GeneratedState> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading state file {}", path.display()))?;
    // accept either a bare density operator or a state + profile bundle
    if let Ok(state) = serde_json::from_str::<GeneratedState>(&text) {
        return Ok(state);
    }
    let state: tdsim_core::DensityOperator = serde_json::from_str(&text)
        .with_context(|| format!("parsing state file {}", path.display()))?;
    Ok(GeneratedState {
        profile: ApproxLowRankProfile::ExactLowRank { r: state.rank() },
        state,
    })
}

fn parse_backend(name: &Option<String>) -> Result<Option<BackendMode>> {
    match name {
        None => Ok(None),
        Some(s) => Ok(Some(s.parse().map_err(|e| anyhow!("{e}"))?)),
    }
}

fn append_csv(path: &Path, report: &EstimateReport) -> Result<()> {
    let fresh = !path.exists();
    let mut file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(file, "{}", EstimateReport::csv_header())?;
    }
    writeln!(file, "{}", report.csv_row())?;
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> Result<()> {
    let a = load_state(&args.state_a)?;
    let b = load_state(&args.state_b)?;
    let mut cfg = EstimationConfig::new(args.eps, args.seed)?.with_median_k(args.median_k);
    if let Some(dp) = args.delta_p {
        cfg = cfg.with_delta_p(dp);
    } else if let Some(r) = args.rank_bound {
        cfg = cfg.with_rank_bound(r);
    } else if let Some(profile_path) = &args.profile {
        let text = fs::read_to_string(profile_path)?;
        let profile: ApproxLowRankProfile = serde_json::from_str(&text)?;
        cfg = cfg.with_profiles(profile.clone(), profile);
    } else {
        cfg = cfg.with_profiles(a.profile.clone(), b.profile.clone());
    }
    if let Some(backend) = parse_backend(&args.backend)? {
        cfg = cfg.with_backend(backend);
    }
    let report = match args.mode.as_str() {
        "purified" => estimate_purified_states(&a.state, &b.state, &cfg)?,
        "samples" => estimate_samples(&a.state, &b.state, &cfg)?,
        other => bail!("unknown mode '{other}' (expected purified or samples)"),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(csv) = &args.csv {
        append_csv(csv, &report)?;
    }
    Ok(())
}

fn cmd_swap(args: SwapArgs) -> Result<()> {
    let a = load_state(&args.state_a)?;
    let b = load_state(&args.state_b)?;
    let o_a = purify(&a.state, "O_psi")?;
    let o_b = purify(&b.state, "O_phi")?;
    let mut cfg = EstimationConfig::new(args.eps, args.seed)?.with_median_k(args.median_k);
    if let Some(backend) = parse_backend(&args.backend)? {
        cfg = cfg.with_backend(backend);
    }
    let report = swap_test_pure(&o_a, &o_b, args.eps, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if let Some(csv) = &args.csv {
        append_csv(csv, &report)?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&args.plan)
        .with_context(|| format!("reading plan {}", args.plan.display()))?;
    let plan: SweepPlan = serde_json::from_str(&text)?;
    let outcome = run_sweep(&plan, Some(&args.out))?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary)?);
    if outcome.summary.partial {
        bail!("sweep aborted early; partial results written");
    }
    Ok(())
}

fn cmd_accept(args: AcceptArgs) -> Result<i32> {
    let fault = match &args.inject_fault {
        None => None,
        Some(s) => Some(s.parse::<FaultInjection>().map_err(|e| anyhow!("{e}"))?),
    };
    let results = run_acceptance(args.only.as_deref(), fault);
    if results.is_empty() {
        bail!("no criteria match the filter");
    }
    for r in &results {
        println!("{}", r.line());
    }
    let failures = results.iter().filter(|r| !r.passed).count();
    if failures > 0 {
        eprintln!("{failures} criterion(s) failed");
        Ok(1)
    } else {
        println!("all {} criteria passed", results.len());
        Ok(0)
    }
}
