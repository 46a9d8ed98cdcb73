use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smcprice::compare::compare_variance;
use smcprice::config::{self, Config};
use smcprice::experiment::{self, Experiment};
use smcprice::output;
use smcprice::selftest::run_selftest;
use smcprice::{CliError, CliResult};

/// Worker-thread count; unset means one per core.
const THREADS_ENV: &str = "SMCPRICE_THREADS";

#[derive(Parser)]
#[command(
    name = "smcprice",
    version,
    about = "Sequential Monte Carlo option pricing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretely monitored barrier call.
    Barrier {
        #[arg(long, value_enum)]
        method: Option<BarrierMethodArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Arithmetic Asian call under the BNS model.
    Asian {
        #[arg(long, value_enum)]
        method: Option<AsianMethodArg>,
        #[command(flatten)]
        common: Common,
    },
    /// Delta and vega of the barrier call.
    Greeks {
        #[command(flatten)]
        common: Common,
    },
    /// Quick closed-form checks.
    Selftest,
    /// Variance ratio Var(b)/Var(a) of two reports.
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum BarrierMethodArg {
    Sis,
    Sir,
    Tempered,
}

#[derive(Clone, Copy, ValueEnum)]
enum AsianMethodArg {
    Smc,
    Is,
}

#[derive(Args)]
struct Common {
    /// Bundled configuration: table1, fig2a, fig2b, greeks, asian.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    /// Number of monitoring dates or averaging periods.
    #[arg(long)]
    m: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override any field: `--set barrier.sigma=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load(common: &Common, section: &str, method: Option<&str>) -> CliResult<Config> {
    let text = match (&common.preset, &common.config) {
        (Some(p), _) => config::preset(p)?.to_string(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?,
        (None, None) => return Err(CliError::Config("one of --preset or --config is required".into())),
    };
    let mut overrides = Vec::new();
    if let Some(m) = method {
        overrides.push(format!("{section}.method=\"{m}\""));
    }
    let flags = [
        ("seed", common.seed.map(|v| v.to_string())),
        ("reps", common.reps.map(|v| v.to_string())),
        ("particles", common.particles.map(|v| v.to_string())),
        ("m", common.m.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            overrides.push(format!("{section}.{key}={v}"));
        }
    }
    overrides.extend(common.set.iter().cloned());
    config::load(&text, &overrides)
}

fn run_experiment(common: &Common, which: Experiment, section: &str, method: Option<&str>) -> CliResult<()> {
    let cfg = load(common, section, method)?;
    // Keep only the section that runs, so the stored config reproduces exactly this run.
    let cfg = Config {
        barrier: cfg.barrier.filter(|_| which == Experiment::Barrier),
        asian: cfg.asian.filter(|_| which == Experiment::Asian),
        greeks: cfg.greeks.filter(|_| which == Experiment::Greeks),
    };
    let seed = match which {
        Experiment::Barrier => cfg.barrier.as_ref().map(|c| c.seed),
        Experiment::Asian => cfg.asian.as_ref().map(|c| c.seed),
        Experiment::Greeks => cfg.greeks.as_ref().map(|c| c.seed),
    }
    .unwrap_or(0);
    let t = Instant::now();
    let out = experiment::run(&cfg, which)?;
    let wall_ms = t.elapsed().as_secs_f64() * 1e3;
    let report = output::build_report(&cfg, seed, &out, wall_ms)?;
    output::write_all(&common.out, &out, &report)?;
    let agg = &out.report.aggregate;
    println!(
        "{} {}: mean {:.6} ± {:.6} (2 SD, {} reps), mean final ESS {:.1}, median resamples {}",
        out.experiment,
        out.method,
        agg.mean,
        agg.two_sd,
        agg.reps,
        agg.mean_ess_final,
        out.median_resamples()
    );
    if let Some(r) = out.reference {
        println!("reference {r:.6}");
    }
    for col in [
        "price_acceptance",
        "birth_death_acceptance",
        "delta",
        "vega",
        "fd_delta",
        "fd_vega",
    ] {
        if let Some(xs) = out.extra(col) {
            let finite: Vec<f64> = xs.into_iter().filter(|x| x.is_finite()).collect();
            if finite.len() > 1 {
                let e = smcprice_core::report::Estimate::from_samples(&finite);
                println!("{col}: mean {:.6} sd {:.6}", e.mean, e.sd);
            }
        }
    }
    println!("wrote {}", common.out.display());
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Barrier { method, common } => {
            let m = method.map(|m| match m {
                BarrierMethodArg::Sis => "sis",
                BarrierMethodArg::Sir => "sir",
                BarrierMethodArg::Tempered => "tempered",
            });
            run_experiment(&common, Experiment::Barrier, "barrier", m)?;
        }
        Command::Asian { method, common } => {
            let m = method.map(|m| match m {
                AsianMethodArg::Smc => "smc",
                AsianMethodArg::Is => "is",
            });
            run_experiment(&common, Experiment::Asian, "asian", m)?;
        }
        Command::Greeks { common } => run_experiment(&common, Experiment::Greeks, "greeks", None)?,
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
        Command::Compare { a, b } => {
            let ra = output::read_report(&a)?;
            let rb = output::read_report(&b)?;
            let v = compare_variance(&ra.estimates(), &rb.estimates())?;
            println!("variance ratio {:.6e} (jackknife SE {:.3e})", v.ratio, v.se);
        }
    }
    Ok(true)
}

fn configure_threads() -> CliResult<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| dispatch(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
