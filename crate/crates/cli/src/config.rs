//! Experiment configuration.
//!
//! A TOML file and command-line flags share one schema ([`ConfigFile`]). Flags
//! override file entries field by field; [`ConfigFile::resolve`] fills
//! defaults and validates, producing the [`ExperimentConfig`] that is echoed
//! into every manifest.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::ValueEnum;
use lanczos_composite::measure::DEFAULT_TOL;
use lanczos_composite::pseudospectral::{Interval, TensorGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_DIMENSION: usize = 2;
pub const DEFAULT_ORDER: usize = 9;
pub const DEFAULT_DELTA: f64 = 1.3;
pub const DEFAULT_POLY_DEGREE: usize = 2;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// Inlet velocity and channel width of the flow recipe.
pub const DEFAULT_U0: f64 = 0.01;
pub const DEFAULT_WIDTH: f64 = 0.1;

/// Named problems that fill in `f` and `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    /// `f = prod_r 1/(x_r - delta_r)`, `g = exp`.
    SimpleFunctions,
    /// Same `f`, identity `g`.
    IdentityG,
    /// Same `f`, `g(t) = 1 + t + ... + t^degree`.
    PolyG,
    /// Constant `f`, `g = exp`.
    ConstantF,
}

/// The inner function `f` on the input box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnerSpec {
    /// `prod_r 1/(x_r - delta_r)`. `delta` defaults to 1.3 in every dimension.
    SimpleFunctions {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delta: Option<Vec<f64>>,
    },
    Constant {
        value: f64,
    },
    /// `mu / (rho * u0 * width)` for inputs `(rho, mu)`.
    InverseReynolds {
        #[serde(default = "default_u0")]
        u0: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    External {
        command: String,
    },
}

fn default_u0() -> f64 {
    DEFAULT_U0
}

fn default_width() -> f64 {
    DEFAULT_WIDTH
}

/// The outer function `g` on the range of `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OuterSpec {
    Exp,
    Identity,
    /// Coefficients in increasing powers.
    Poly {
        coefficients: Vec<f64>,
    },
    External {
        command: String,
    },
}

/// Partially specified configuration, as read from a file or flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub problem: Option<Problem>,
    /// Degree for the `poly-g` problem.
    pub degree: Option<usize>,
    pub dimension: Option<usize>,
    /// Order used in every dimension when `orders` is absent.
    pub order: Option<usize>,
    pub orders: Option<Vec<usize>>,
    pub intervals: Option<Vec<[f64; 2]>>,
    pub f: Option<InnerSpec>,
    pub g: Option<OuterSpec>,
    pub tol: Option<f64>,
    pub k_max: Option<usize>,
    pub ghost_tol: Option<f64>,
    pub oracle: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Seconds allowed per external batch.
    pub timeout: Option<f64>,
    /// Random off-grid points checked against `g(f(x))` when the oracle is on.
    pub validation_points: Option<usize>,
    /// Points at which the surrogate is evaluated and reported.
    pub eval_points: Option<Vec<Vec<f64>>>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<Problem>,
    pub dimension: usize,
    pub orders: Vec<usize>,
    pub intervals: Vec<[f64; 2]>,
    pub f: InnerSpec,
    pub g: OuterSpec,
    pub tol: f64,
    pub k_max: Option<usize>,
    pub ghost_tol: f64,
    pub oracle: bool,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub timeout: Option<f64>,
    pub validation_points: usize,
    pub eval_points: Vec<Vec<f64>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            source: e.into(),
        })?;
        toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            source: e.into(),
        })
    }

    /// Entries set in `other` win.
    pub fn merge(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            problem: other.problem.or(self.problem),
            degree: other.degree.or(self.degree),
            dimension: other.dimension.or(self.dimension),
            order: other.order.or(self.order),
            orders: other.orders.or(self.orders),
            intervals: other.intervals.or(self.intervals),
            f: other.f.or(self.f),
            g: other.g.or(self.g),
            tol: other.tol.or(self.tol),
            k_max: other.k_max.or(self.k_max),
            ghost_tol: other.ghost_tol.or(self.ghost_tol),
            oracle: other.oracle.or(self.oracle),
            output_dir: other.output_dir.or(self.output_dir),
            seed: other.seed.or(self.seed),
            timeout: other.timeout.or(self.timeout),
            validation_points: other.validation_points.or(self.validation_points),
            eval_points: other.eval_points.or(self.eval_points),
        }
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        if self.degree.is_some() && self.problem != Some(Problem::PolyG) {
            return Err(CliError::config(
                "`degree` only applies to the poly-g problem",
            ));
        }
        let (preset_f, preset_g) = match self.problem {
            Some(p) => {
                let (f, g) = preset(p, self.degree.unwrap_or(DEFAULT_POLY_DEGREE));
                (Some(f), Some(g))
            }
            None => (None, None),
        };
        let mut f = self
            .f
            .or(preset_f)
            .ok_or_else(|| CliError::config("no inner function: set `f` or `problem`"))?;
        let g = self
            .g
            .or(preset_g)
            .ok_or_else(|| CliError::config("no outer function: set `g` or `problem`"))?;

        let orders = match (self.orders, self.order) {
            (Some(_), Some(_)) => {
                return Err(CliError::config("set either `order` or `orders`, not both"))
            }
            (Some(orders), None) => orders,
            (None, order) => {
                vec![order.unwrap_or(DEFAULT_ORDER); self.dimension.unwrap_or(DEFAULT_DIMENSION)]
            }
        };
        let dimension = orders.len();
        if dimension == 0 {
            return Err(CliError::config("dimension must be at least 1"));
        }
        if let Some(d) = self.dimension {
            if d != dimension {
                return Err(CliError::config(format!(
                    "dimension {d} does not match {dimension} orders"
                )));
            }
        }
        if orders.contains(&0) {
            return Err(CliError::config("orders must be positive"));
        }

        let intervals = self.intervals.unwrap_or_else(|| {
            vec![[Interval::REFERENCE.lower, Interval::REFERENCE.upper]; dimension]
        });
        if intervals.len() != dimension {
            return Err(CliError::config(format!(
                "{} intervals for dimension {dimension}",
                intervals.len()
            )));
        }
        for &[lo, hi] in &intervals {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(CliError::config(format!("invalid interval [{lo}, {hi}]")));
            }
        }

        validate_inner(&mut f, &intervals)?;
        validate_outer(&g)?;

        let tol = self.tol.unwrap_or(DEFAULT_TOL);
        if !tol.is_finite() {
            return Err(CliError::config("`tol` must be finite"));
        }
        if self.k_max == Some(0) {
            return Err(CliError::config("`k_max` must be positive"));
        }
        let ghost_tol = self.ghost_tol.unwrap_or(0.0);
        if !(0.0..1.0).contains(&ghost_tol) {
            return Err(CliError::config("`ghost_tol` must lie in [0, 1)"));
        }
        if let Some(t) = self.timeout {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::config(
                    "`timeout` must be a positive number of seconds",
                ));
            }
        }
        let eval_points = self.eval_points.unwrap_or_default();
        if let Some(p) = eval_points.iter().find(|p| p.len() != dimension) {
            return Err(CliError::config(format!(
                "evaluation point {p:?} does not have {dimension} coordinates"
            )));
        }

        Ok(ExperimentConfig {
            problem: self.problem,
            dimension,
            orders,
            intervals,
            f,
            g,
            tol,
            k_max: self.k_max,
            ghost_tol,
            oracle: self.oracle.unwrap_or(false),
            output_dir: self
                .output_dir
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            seed: self.seed.unwrap_or(0),
            timeout: self.timeout,
            validation_points: self.validation_points.unwrap_or(0),
            eval_points,
        })
    }
}

fn preset(problem: Problem, degree: usize) -> (InnerSpec, OuterSpec) {
    let simple = InnerSpec::SimpleFunctions { delta: None };
    match problem {
        Problem::SimpleFunctions => (simple, OuterSpec::Exp),
        Problem::IdentityG => (simple, OuterSpec::Identity),
        Problem::PolyG => (
            simple,
            OuterSpec::Poly {
                coefficients: vec![1.0; degree + 1],
            },
        ),
        Problem::ConstantF => (InnerSpec::Constant { value: 1.0 }, OuterSpec::Exp),
    }
}

fn validate_inner(f: &mut InnerSpec, intervals: &[[f64; 2]]) -> Result<()> {
    let d = intervals.len();
    match f {
        InnerSpec::SimpleFunctions { delta } => {
            let delta = delta.get_or_insert_with(|| vec![DEFAULT_DELTA; d]);
            if delta.len() != d {
                return Err(CliError::config(format!(
                    "{} shifts for dimension {d}",
                    delta.len()
                )));
            }
            for (r, (&s, &[lo, hi])) in delta.iter().zip(intervals).enumerate() {
                if !s.is_finite() || (lo..=hi).contains(&s) {
                    return Err(CliError::config(format!(
                        "shift {s} in dimension {} must lie outside [{lo}, {hi}]",
                        r + 1
                    )));
                }
            }
        }
        InnerSpec::Constant { value } => {
            if !value.is_finite() {
                return Err(CliError::config("constant value must be finite"));
            }
        }
        InnerSpec::InverseReynolds { u0, width } => {
            if d != 2 {
                return Err(CliError::config(
                    "inverse-reynolds takes two inputs (density, viscosity)",
                ));
            }
            if !(*u0 > 0.0 && *width > 0.0) {
                return Err(CliError::config("`u0` and `width` must be positive"));
            }
            let [lo, hi] = intervals[0];
            if lo <= 0.0 && hi >= 0.0 {
                return Err(CliError::config("density interval must exclude zero"));
            }
        }
        InnerSpec::External { command } => {
            if command.trim().is_empty() {
                return Err(CliError::config("empty command for f"));
            }
        }
    }
    Ok(())
}

fn validate_outer(g: &OuterSpec) -> Result<()> {
    match g {
        OuterSpec::Poly { coefficients } => {
            if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                return Err(CliError::config(
                    "polynomial coefficients must be a non-empty list of finite numbers",
                ));
            }
        }
        OuterSpec::External { command } if command.trim().is_empty() => {
            return Err(CliError::config("empty command for g"));
        }
        _ => {}
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn intervals(&self) -> Result<Vec<Interval>> {
        self.intervals
            .iter()
            .map(|&[lo, hi]| Interval::new(lo, hi).map_err(CliError::from))
            .collect()
    }

    /// Tensor Gauss-Legendre grid with the given orders on the configured box.
    pub fn grid_with_orders(&self, orders: &[usize]) -> Result<TensorGrid> {
        Ok(TensorGrid::gauss_legendre(orders, &self.intervals()?)?)
    }

    pub fn grid(&self) -> Result<TensorGrid> {
        self.grid_with_orders(&self.orders)
    }

    pub fn timeout(&self) -> Option<Duration> {
        self.timeout.map(Duration::from_secs_f64)
    }
}
