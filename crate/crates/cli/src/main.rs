use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lanczos_composite_cli::config::{InnerSpec, OuterSpec, Problem, DEFAULT_U0, DEFAULT_WIDTH};
use lanczos_composite_cli::{cmd_run, cmd_sweep, CliError, ConfigFile, Result};

#[derive(Parser, Debug)]
#[command(
    name = "lanczos-composite",
    version,
    about = "Polynomial surrogates of g(f(x)) with few evaluations of g"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build one surrogate and write its artifacts.
    Run(ConfigArgs),
    /// Tabulate error and loss of orthogonality over grid sizes and iteration counts.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Orders per dimension to sweep. Defaults to 1 through the configured order.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum InnerKind {
    SimpleFunctions,
    Constant,
    InverseReynolds,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OuterKind {
    Exp,
    Identity,
    Poly,
}

/// Every flag mirrors a config file entry and overrides it.
#[derive(Args, Debug)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    problem: Option<Problem>,
    /// Degree of the poly-g problem.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    dimension: Option<usize>,
    /// Quadrature order in every dimension.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    /// Input interval as `lower,upper`; repeat once per dimension.
    #[arg(long = "interval", allow_hyphen_values = true)]
    intervals: Vec<String>,
    /// Builtin inner function.
    #[arg(long = "f", value_enum)]
    f_kind: Option<InnerKind>,
    /// Shifts of simple-functions, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    delta: Option<Vec<f64>>,
    /// Value of the constant inner function.
    #[arg(long, allow_hyphen_values = true)]
    constant: Option<f64>,
    #[arg(long)]
    u0: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    /// Shell command evaluating f with the line protocol.
    #[arg(long, conflicts_with = "f_kind")]
    f_command: Option<String>,
    /// Builtin outer function.
    #[arg(long = "g", value_enum)]
    g_kind: Option<OuterKind>,
    /// Coefficients of poly, increasing powers, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    coefficients: Option<Vec<f64>>,
    /// Shell command evaluating g with the line protocol.
    #[arg(long, conflicts_with = "g_kind")]
    g_command: Option<String>,
    /// log10 threshold on the loss of orthogonality.
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Drop transformed nodes with weight below this value.
    #[arg(long)]
    ghost_tol: Option<f64>,
    /// Also evaluate g at every grid node and report the error.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    oracle: Option<bool>,
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds allowed per external evaluator batch.
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    validation_points: Option<usize>,
}

impl ConfigArgs {
    fn into_config(self) -> Result<ConfigFile> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let intervals = if self.intervals.is_empty() {
            None
        } else {
            Some(
                self.intervals
                    .iter()
                    .map(|s| parse_interval(s))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let f = self.inner_spec()?;
        let g = self.outer_spec()?;
        Ok(file.merge(ConfigFile {
            problem: self.problem,
            degree: self.degree,
            dimension: self.dimension,
            order: self.order,
            orders: self.orders,
            intervals,
            f,
            g,
            tol: self.tol,
            k_max: self.k_max,
            ghost_tol: self.ghost_tol,
            oracle: self.oracle,
            output_dir: self.output_dir,
            seed: self.seed,
            timeout: self.timeout,
            validation_points: self.validation_points,
            eval_points: None,
        }))
    }

    fn inner_spec(&self) -> Result<Option<InnerSpec>> {
        let stray =
            |flag: &str, kind: &str| Err(CliError::Config(format!("--{flag} requires --f {kind}")));
        if let Some(command) = &self.f_command {
            return Ok(Some(InnerSpec::External {
                command: command.clone(),
            }));
        }
        let kind = self.f_kind;
        if self.delta.is_some() && !matches!(kind, Some(InnerKind::SimpleFunctions)) {
            return stray("delta", "simple-functions");
        }
        if self.constant.is_some() && !matches!(kind, Some(InnerKind::Constant)) {
            return stray("constant", "constant");
        }
        if (self.u0.is_some() || self.width.is_some())
            && !matches!(kind, Some(InnerKind::InverseReynolds))
        {
            return stray("u0/--width", "inverse-reynolds");
        }
        Ok(match kind {
            None => None,
            Some(InnerKind::SimpleFunctions) => Some(InnerSpec::SimpleFunctions {
                delta: self.delta.clone(),
            }),
            Some(InnerKind::Constant) => Some(InnerSpec::Constant {
                value: self
                    .constant
                    .ok_or_else(|| CliError::Config("--f constant requires --constant".into()))?,
            }),
            Some(InnerKind::InverseReynolds) => Some(InnerSpec::InverseReynolds {
                u0: self.u0.unwrap_or(DEFAULT_U0),
                width: self.width.unwrap_or(DEFAULT_WIDTH),
            }),
        })
    }

    fn outer_spec(&self) -> Result<Option<OuterSpec>> {
        if let Some(command) = &self.g_command {
            return Ok(Some(OuterSpec::External {
                command: command.clone(),
            }));
        }
        if self.coefficients.is_some() && !matches!(self.g_kind, Some(OuterKind::Poly)) {
            return Err(CliError::Config("--coefficients requires --g poly".into()));
        }
        Ok(match self.g_kind {
            None => None,
            Some(OuterKind::Exp) => Some(OuterSpec::Exp),
            Some(OuterKind::Identity) => Some(OuterSpec::Identity),
            Some(OuterKind::Poly) => Some(OuterSpec::Poly {
                coefficients: self
                    .coefficients
                    .clone()
                    .ok_or_else(|| CliError::Config("--g poly requires --coefficients".into()))?,
            }),
        })
    }
}

fn parse_interval(s: &str) -> Result<[f64; 2]> {
    let bad = || CliError::Config(format!("interval `{s}` is not `lower,upper`"));
    let (lo, hi) = s.split_once(',').ok_or_else(bad)?;
    Ok([
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
    ])
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let config = args.into_config()?.resolve()?;
            let outcome = cmd_run(&config)?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            let m = &outcome.manifest;
            print!(
                "m={} k={} f_evals={} g_evals={} stop={} tau={:.2}",
                m.counts.m, m.counts.k, m.counts.f_evals, m.counts.g_evals, m.stop_reason, m.tau
            );
            if let Some(e) = m.error {
                print!(" error={:.3e} relative={:.3e}", e.absolute, e.relative);
            }
            println!();
            println!("wrote {}", config.output_dir.display());
        }
        Command::Sweep(args) => {
            let n_grid = args.n_grid;
            let config = args.config.into_config()?.resolve()?;
            let n_grid =
                n_grid.unwrap_or_else(|| (1..=*config.orders.iter().max().unwrap_or(&1)).collect());
            let outcome = cmd_sweep(&config, &n_grid, config.k_max)?;
            println!(
                "{} rows, g_evals={}",
                outcome.manifest.rows, outcome.manifest.g_evals
            );
            println!("wrote {}", config.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
