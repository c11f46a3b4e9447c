use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use rsqc::cli::{self, Context, LawChoice};
use rsqc::dynprog::Mode;
use rsqc::montecarlo::Estimator;

#[derive(Parser, Debug)]
#[command(name = "rsqc", version, about = "Risk-sensitive feedback control of a monitored two-level atom")]
struct Args {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "rsqc.toml")]
    config: PathBuf,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides `mc.master_seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 picks the number of cores. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Rs,
    Rn,
}

#[derive(clap::Args, Debug)]
struct LawArgs {
    /// Policy container written by `solve`.
    #[arg(long, conflicts_with_all = ["zero_control", "constant"])]
    policy: Option<PathBuf>,
    /// Run with u = 0.
    #[arg(long)]
    zero_control: bool,
    /// Constant control `RE,IM`.
    #[arg(long, value_parser = parse_complex, conflicts_with = "zero_control")]
    constant: Option<Complex64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the dynamic programme and write the value grid and policy.
    Solve {
        #[arg(long, value_enum, default_value = "rs")]
        mode: ModeArg,
    },
    /// Simulate closed-loop trajectories and write them as JSON lines.
    Simulate {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// Monte Carlo estimate of a cost functional.
    Evaluate {
        #[command(flatten)]
        law: LawArgs,
        /// rs-ref, rs-phys, rn-phys or rn-ref.
        #[arg(long, default_value = "rs-phys")]
        estimator: Estimator,
        #[arg(long)]
        n_paths: Option<usize>,
    },
    /// Integrate the unmonitored master equation under an open-loop control.
    Master,
    /// Risk-sensitive cost of two policies over a range of risk parameters.
    Compare {
        #[arg(long)]
        policy_a: PathBuf,
        #[arg(long)]
        policy_b: PathBuf,
        /// Comma-separated list of mu values.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.5,1")]
        mu: Vec<f64>,
        #[arg(long)]
        n_paths: Option<usize>,
    },
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let (re, im) = s.split_once(',').unwrap_or((s, "0"));
    let re: f64 = re.trim().parse().map_err(|e| format!("real part: {e}"))?;
    let im: f64 = im.trim().parse().map_err(|e| format!("imaginary part: {e}"))?;
    Ok(Complex64::new(re, im))
}

impl LawArgs {
    fn choice(&self) -> anyhow::Result<LawChoice> {
        Ok(match (&self.policy, self.zero_control, self.constant) {
            (Some(p), _, _) => LawChoice::PolicyFile(p.clone()),
            (None, true, _) => LawChoice::Zero,
            (None, false, Some(u)) => LawChoice::Constant(u),
            (None, false, None) => {
                return Err(rsqc::Error::Config(
                    "one of --policy, --zero-control or --constant is required".into(),
                ))
                .context("choosing the control law")
            }
        })
    }
}

fn run(args: Args) -> anyhow::Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .context("starting the worker pool")?;
    let ctx = Context::load(&args.config, args.out, args.seed)
        .with_context(|| format!("loading {}", args.config.display()))?;
    match args.command {
        Command::Solve { mode } => {
            let mode = match mode {
                ModeArg::Rs => Mode::RiskSensitive,
                ModeArg::Rn => Mode::RiskNeutral,
            };
            cli::cmd_solve(&ctx, mode).context("solve")?;
        }
        Command::Simulate { law, n_paths } => {
            cli::cmd_simulate(&ctx, &law.choice()?, n_paths).context("simulate")?;
        }
        Command::Evaluate { law, estimator, n_paths } => {
            cli::cmd_evaluate(&ctx, &law.choice()?, estimator, n_paths).context("evaluate")?;
        }
        Command::Master => {
            cli::cmd_master(&ctx).context("master")?;
        }
        Command::Compare {
            policy_a,
            policy_b,
            mu,
            n_paths,
        } => {
            cli::cmd_compare(&ctx, &policy_a, &policy_b, &mu, n_paths).context("compare")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<rsqc::Error>())
                .map(cli::exit_code)
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
