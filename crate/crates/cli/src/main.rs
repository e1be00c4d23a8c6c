//! `fsep`: simulations, exact solutions and statistical checks for the
//! facilitated exclusion and stack models, reporting JSON lines.

mod run;
mod spec;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fsep_core::gibbs::ParitySource;
use fsep_core::Error;

use spec::{Command, ExperimentSpec, Model, ObserverString, StateSpec, VerifyTest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(
                Error::InvalidParameter(_)
                | Error::Parse(_)
                | Error::RingTooShort(_)
                | Error::LengthMismatch { .. }
                | Error::ClassMismatch { .. }
                | Error::Unbalanced { .. }
                | Error::HeightOverflow(_),
            ) => 1,
            CliError::Core(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fsep", version, about = "Facilitated exclusion and stack models on rings")]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write JSON lines here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Read the whole experiment from a JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Base seed; FSEP_SEED overrides it when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Evolve one ring and report observers.
    Simulate {
        #[arg(long, value_enum)]
        model: Model,
        /// Initial state: ring:M:..., bernoulli:rho=R, fixed:rho=R,
        /// gibbs:zeta=Z, gibbs:rho_e=R or etis:rho_e=R,kappa=K.
        #[arg(long)]
        state: StateSpec,
        /// Ring length for sampled states (stack sites for Gibbs states).
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        steps: u64,
        /// cylinder:k=K, frozen, regions or parity, with optional @every.
        #[arg(long = "observe")]
        observers: Vec<ObserverString>,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Exact finite-ring and transfer-matrix results.
    Exact {
        #[command(subcommand)]
        which: ExactSub,
    },
    /// Sample stationary stack rings.
    Gibbs {
        #[arg(long, conflicts_with = "rho_e", required_unless_present = "rho_e")]
        zeta: Option<f64>,
        #[arg(long)]
        rho_e: Option<f64>,
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        samples: u64,
        /// Parity law as JSON, e.g. {"kind":"bernoulli","kappa":0.3}.
        #[arg(long, value_parser = parse_parity, default_value = r#"{"kind":"even"}"#)]
        parity: ParitySource,
        /// Window length of the reported cylinder table.
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Also print every sampled ring.
        #[arg(long)]
        emit_configs: bool,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Quench low-density exclusion rings until nothing moves.
    Quench {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        sites: usize,
        #[arg(long, default_value_t = 1)]
        runs: u64,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run one statistical or exact check; exits 2 when it fails.
    Verify {
        #[command(subcommand)]
        test: VerifySub,
    },
}

#[derive(Subcommand, Debug)]
enum ExactSub {
    /// Stationary law of the stack dynamics on a small ring.
    Ring {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        particles: u64,
        /// Solve in exact rational arithmetic.
        #[arg(long)]
        rational: bool,
        #[arg(long, default_value_t = 200_000)]
        state_cap: usize,
        #[arg(long, default_value_t = 1000)]
        table_cap: usize,
    },
    /// Infinite-volume quantities from the transfer operator.
    Transfer {
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        hmax: Option<u32>,
        /// Height words such as 0,2; repeatable.
        #[arg(long = "cylinder")]
        cylinders: Vec<String>,
        /// Also report cylinder probabilities on a ring of this length.
        #[arg(long)]
        ring_sites: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum VerifySub {
    Stationarity {
        #[arg(long, value_enum, default_value = "ssm")]
        model: Model,
        #[arg(long)]
        state: StateSpec,
        #[arg(long, default_value_t = 256)]
        sites: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Windows per table.
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 4)]
        stride: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    DetailedBalance {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        particles: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    Renewal {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        runs: u64,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    Halfdensity {
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        runs: u64,
        #[arg(long, default_value_t = 10_000_000)]
        max_steps: u64,
        #[command(flatten)]
        seed: SeedArg,
    },
    Equivariance {
        #[arg(long)]
        zeta: f64,
        #[arg(long, default_value_t = 256)]
        sites: usize,
        #[arg(long, default_value_t = 1)]
        steps: u64,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 4)]
        stride: usize,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    Correlation {
        #[arg(long)]
        zeta: f64,
        #[arg(long)]
        sites: usize,
        #[arg(long)]
        samples: u64,
        #[arg(long, default_value_t = 0.1)]
        tolerance: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
}

fn parse_parity(s: &str) -> Result<ParitySource, String> {
    let p: ParitySource = serde_json::from_str(s).map_err(|e| e.to_string())?;
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

impl From<Sub> for Command {
    fn from(sub: Sub) -> Command {
        match sub {
            Sub::Simulate {
                model,
                state,
                sites,
                steps,
                observers,
                seed,
            } => Command::Simulate {
                model,
                state,
                sites,
                steps,
                seed: seed.seed,
                observers,
            },
            Sub::Exact {
                which:
                    ExactSub::Ring {
                        sites,
                        particles,
                        rational,
                        state_cap,
                        table_cap,
                    },
            } => Command::ExactRing {
                sites,
                particles,
                state_cap,
                table_cap,
                rational,
            },
            Sub::Exact {
                which:
                    ExactSub::Transfer {
                        zeta,
                        hmax,
                        cylinders,
                        ring_sites,
                    },
            } => Command::ExactTransfer {
                zeta,
                hmax,
                cylinders,
                ring_sites,
            },
            Sub::Gibbs {
                zeta,
                rho_e,
                sites,
                samples,
                parity,
                k,
                emit_configs,
                seed,
            } => Command::Gibbs {
                zeta,
                rho_e,
                sites,
                samples,
                parity,
                seed: seed.seed,
                k,
                emit_configs,
            },
            Sub::Quench {
                rho,
                sites,
                runs,
                max_steps,
                seed,
            } => Command::Quench {
                rho,
                sites,
                seed: seed.seed,
                runs,
                max_steps,
            },
            Sub::Verify { test } => {
                let (test, seed) = match test {
                    VerifySub::Stationarity {
                        model,
                        state,
                        sites,
                        k,
                        samples,
                        stride,
                        alpha,
                        seed,
                    } => (
                        VerifyTest::Stationarity {
                            model,
                            state,
                            sites,
                            k,
                            samples,
                            stride,
                            alpha,
                        },
                        seed.seed,
                    ),
                    VerifySub::DetailedBalance {
                        sites,
                        particles,
                        tolerance,
                    } => (
                        VerifyTest::DetailedBalance {
                            sites,
                            particles,
                            tolerance,
                        },
                        0,
                    ),
                    VerifySub::Renewal {
                        rho,
                        sites,
                        runs,
                        alpha,
                        seed,
                    } => (VerifyTest::Renewal { rho, sites, runs, alpha }, seed.seed),
                    VerifySub::Halfdensity {
                        sites,
                        runs,
                        max_steps,
                        seed,
                    } => (VerifyTest::Halfdensity { sites, runs, max_steps }, seed.seed),
                    VerifySub::Equivariance {
                        zeta,
                        sites,
                        steps,
                        k,
                        samples,
                        stride,
                        alpha,
                        seed,
                    } => (
                        VerifyTest::Equivariance {
                            zeta,
                            sites,
                            steps,
                            k,
                            samples,
                            stride,
                            alpha,
                        },
                        seed.seed,
                    ),
                    VerifySub::Correlation {
                        zeta,
                        sites,
                        samples,
                        tolerance,
                        seed,
                    } => (
                        VerifyTest::Correlation {
                            zeta,
                            sites,
                            samples,
                            tolerance,
                        },
                        seed.seed,
                    ),
                };
                Command::Verify { test, seed }
            }
        }
    }
}

fn build_spec(cli: Cli) -> Result<(ExperimentSpec, Option<usize>), CliError> {
    let mut spec = match (cli.spec, cli.command) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<ExperimentSpec>(&text)
                .map_err(|e| CliError::Usage(format!("bad spec file {}: {e}", path.display())))?
        }
        (None, Some(sub)) => ExperimentSpec {
            command: sub.into(),
            output: None,
        },
        _ => return Err(CliError::Usage("give a subcommand or --spec FILE".into())),
    };
    if let Some(out) = cli.output {
        spec.output = Some(out.to_string_lossy().into_owned());
    }
    if let Ok(raw) = std::env::var("FSEP_SEED") {
        let seed = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("FSEP_SEED={raw:?} is not an unsigned integer")))?;
        spec.command.set_seed(seed);
    }
    Ok((spec, cli.threads))
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let (spec, threads) = build_spec(cli)?;
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out = run::run(&spec)?;
    let mut text = String::new();
    for line in std::iter::once(run::manifest(&spec)).chain(out.lines) {
        text.push_str(&serde_json::to_string(&line).expect("json values serialize"));
        text.push('\n');
    }
    match &spec.output {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(out.pass)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("fsep: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
