//! The `run` and `sweep` subcommands.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use lanczos_composite::composite::{
    build_surrogate, oracle_h_values, surrogate_from_lanczos, CompositeSurrogate, SurrogateOptions,
};
use lanczos_composite::measure::{lanczos_run, starting_vector, DiagonalOperator, LanczosOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{format_float, write_json, Table};
use crate::problems::{inner_evaluator, outer_evaluator};

pub const SCHEMA_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const COEFFICIENTS_FILE: &str = "coefficients.csv";
pub const QUADRATURE_FILE: &str = "quadrature_f.csv";
pub const TAU_FILE: &str = "tau.csv";
pub const ERROR_FILE: &str = "error.csv";
pub const EVALUATIONS_FILE: &str = "evaluations.csv";
pub const SURFACE_FILE: &str = "error_surface.csv";
pub const SWEEP_MANIFEST_FILE: &str = "sweep.json";

/// Floor applied before taking `log10` of an error.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub counts: RunCounts,
    pub stop_reason: String,
    pub tau: f64,
    pub tau_history: Vec<f64>,
    /// Nodes removed by the ghost filter.
    pub pruned: Vec<PrunedNode>,
    pub error: Option<ErrorSummary>,
    pub validation: Option<Validation>,
    pub extrapolated_points: usize,
    pub timings: Timings,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunCounts {
    pub m: usize,
    pub k: usize,
    pub iterations: usize,
    pub f_evals: usize,
    pub g_evals: usize,
    /// Spent on reference values only.
    pub oracle_f_evals: usize,
    pub oracle_g_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrunedNode {
    pub theta: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub points: usize,
    pub max_abs_error: f64,
    pub rms_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub surrogate_seconds: f64,
    pub oracle_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub surrogate: CompositeSurrogate,
    /// Human-readable notices, e.g. extrapolated evaluation points.
    pub warnings: Vec<String>,
}

pub fn cmd_run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let start = Instant::now();
    let grid = Arc::new(config.grid()?);
    let mut f = inner_evaluator(&config.f, config.timeout());
    let mut g = outer_evaluator(&config.g, config.timeout());
    let surrogate = build_surrogate(
        &mut f,
        &mut g,
        grid.clone(),
        SurrogateOptions {
            tol: config.tol,
            k_max: config.k_max,
            ghost_tol: config.ghost_tol,
        },
    )?;
    let surrogate_seconds = start.elapsed().as_secs_f64();

    let oracle_start = Instant::now();
    let mut oracle_f = inner_evaluator(&config.f, config.timeout());
    let mut oracle_g = outer_evaluator(&config.g, config.timeout());
    let mut error = None;
    let mut validation = None;
    if config.oracle {
        let h_true = oracle_h_values(surrogate.f_values(), &mut oracle_g)?;
        let e = surrogate.approximation_error(&h_true)?;
        error = Some(ErrorSummary {
            absolute: e.absolute,
            relative: e.relative,
        });
        if config.validation_points > 0 {
            validation = Some(validate(
                config,
                &surrogate,
                &mut |x| oracle_f.evaluate_batch(x),
                &mut |t| oracle_g.evaluate_batch(t),
            )?);
        }
    }
    let oracle_seconds = oracle_start.elapsed().as_secs_f64();

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut artifacts = vec![
        COEFFICIENTS_FILE.to_string(),
        QUADRATURE_FILE.to_string(),
        TAU_FILE.to_string(),
    ];
    write_coefficients(&dir.join(COEFFICIENTS_FILE), &surrogate)?;
    write_quadrature(&dir.join(QUADRATURE_FILE), &surrogate)?;
    write_tau(&dir.join(TAU_FILE), surrogate.lanczos().tau_history())?;
    let counts = surrogate.counts();
    if let Some(e) = error {
        let mut t = Table::new(&["m", "k", "error", "relative_error"])?;
        t.row(&[
            counts.m.to_string(),
            counts.k.to_string(),
            format_float(e.absolute),
            format_float(e.relative),
        ])?;
        t.write(&dir.join(ERROR_FILE))?;
        artifacts.push(ERROR_FILE.to_string());
    }

    let mut warnings = Vec::new();
    let mut extrapolated_points = 0;
    if !config.eval_points.is_empty() {
        let mut header: Vec<String> = (1..=config.dimension).map(|r| format!("x{r}")).collect();
        header.extend(["value".to_string(), "extrapolated".to_string()]);
        let mut t = Table::new(&header)?;
        for x in &config.eval_points {
            let pv = surrogate.eval_flagged(x)?;
            if pv.extrapolated {
                extrapolated_points += 1;
                warnings.push(format!(
                    "point {x:?} lies outside the domain box; the surrogate value is extrapolated"
                ));
            }
            let mut row: Vec<String> = x.iter().map(|&v| format_float(v)).collect();
            row.push(format_float(pv.value));
            row.push(pv.extrapolated.to_string());
            t.row(&row)?;
        }
        t.write(&dir.join(EVALUATIONS_FILE))?;
        artifacts.push(EVALUATIONS_FILE.to_string());
    }

    let lanczos = surrogate.lanczos();
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        counts: RunCounts {
            m: counts.m,
            k: counts.k,
            iterations: counts.iterations,
            f_evals: counts.f_evals,
            g_evals: counts.g_evals,
            oracle_f_evals: oracle_f.evaluations(),
            oracle_g_evals: oracle_g.evaluations(),
        },
        stop_reason: lanczos.stop_reason().as_str().to_string(),
        tau: lanczos.tau(),
        tau_history: lanczos.tau_history().to_vec(),
        pruned: surrogate
            .pruned()
            .iter()
            .map(|&(theta, mu)| PrunedNode { theta, mu })
            .collect(),
        error,
        validation,
        extrapolated_points,
        timings: Timings {
            surrogate_seconds,
            oracle_seconds,
            total_seconds: start.elapsed().as_secs_f64(),
        },
        artifacts,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RunOutcome {
        manifest,
        surrogate,
        warnings,
    })
}

type Batch<'a> = dyn FnMut(&[Vec<f64>]) -> lanczos_composite::Result<Vec<f64>> + 'a;

fn validate(
    config: &ExperimentConfig,
    surrogate: &CompositeSurrogate,
    f: &mut Batch<'_>,
    g: &mut Batch<'_>,
) -> Result<Validation> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let points: Vec<Vec<f64>> = (0..config.validation_points)
        .map(|_| {
            config
                .intervals
                .iter()
                .map(|&[lo, hi]| rng.gen_range(lo..=hi))
                .collect()
        })
        .collect();
    let f_values = f(&points)?;
    let thetas: Vec<Vec<f64>> = f_values.iter().map(|&v| vec![v]).collect();
    let truth = g(&thetas)?;
    let mut max_abs: f64 = 0.0;
    let mut sum_sq = 0.0;
    for (x, h) in points.iter().zip(&truth) {
        let diff = (surrogate.eval(x)? - h).abs();
        max_abs = max_abs.max(diff);
        sum_sq += diff * diff;
    }
    Ok(Validation {
        points: points.len(),
        max_abs_error: max_abs,
        rms_error: (sum_sq / points.len() as f64).sqrt(),
    })
}

fn write_coefficients(path: &Path, surrogate: &CompositeSurrogate) -> Result<()> {
    let coeffs = surrogate.coeffs();
    let grid = coeffs.grid();
    let mut header: Vec<String> = (1..=grid.dims()).map(|r| format!("i{r}")).collect();
    header.push("coefficient".to_string());
    let mut t = Table::new(&header)?;
    for (linear, &c) in coeffs.coeffs().iter().enumerate() {
        let mut row: Vec<String> = grid
            .multi_index(linear)
            .iter()
            .map(|i| i.to_string())
            .collect();
        row.push(format_float(c));
        t.row(&row)?;
    }
    t.write(path)
}

fn write_quadrature(path: &Path, surrogate: &CompositeSurrogate) -> Result<()> {
    let rule = surrogate.transform();
    let mut t = Table::new(&["j", "theta", "mu"])?;
    for (j, (&theta, &mu)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        t.row(&[j.to_string(), format_float(theta), format_float(mu)])?;
    }
    t.write(path)
}

fn write_tau(path: &Path, history: &[f64]) -> Result<()> {
    let mut t = Table::new(&["iteration", "tau"])?;
    for (i, &tau) in history.iter().enumerate() {
        t.row(&[(i + 1).to_string(), format_float(tau)])?;
    }
    t.write(path)
}

/// One cell of the error surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub m: usize,
    pub k: usize,
    /// Absolute error at the grid nodes.
    pub error: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub n_grid: Vec<usize>,
    pub k_max: Option<usize>,
    pub rows: usize,
    pub f_evals: usize,
    pub g_evals: usize,
    pub total_seconds: f64,
    pub artifacts: Vec<String>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub manifest: SweepManifest,
    pub surface: Vec<SurfacePoint>,
}

/// Error and loss of orthogonality for every `k` up to `k_max` (or `m`) on
/// isotropic grids of each order in `n_grid`. A single unstopped Lanczos run
/// per grid is truncated at each `k`.
pub fn cmd_sweep(
    config: &ExperimentConfig,
    n_grid: &[usize],
    k_max: Option<usize>,
) -> Result<SweepOutcome> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(CliError::config(
            "grid orders must be a non-empty list of positive integers",
        ));
    }
    if k_max == Some(0) {
        return Err(CliError::config("`k_max` must be positive"));
    }
    let start = Instant::now();
    let mut f = inner_evaluator(&config.f, config.timeout());
    let mut g = outer_evaluator(&config.g, config.timeout());
    let mut surface = Vec::new();
    for &n in n_grid {
        let grid = Arc::new(config.grid_with_orders(&vec![n; config.dimension])?);
        let m = grid.node_count();
        let f_values = f.evaluate_batch(&grid.flat_nodes())?;
        let h_true = oracle_h_values(&f_values, &mut g)?;
        let state = lanczos_run(
            &DiagonalOperator::new(f_values.clone())?,
            &starting_vector(&grid),
            LanczosOptions {
                tol: f64::INFINITY,
                k_max: Some(k_max.unwrap_or(m).min(m)),
                reorthogonalize: false,
            },
        )?;
        for k in 1..=state.k() {
            let truncated = state.truncated(k)?;
            let tau = truncated.tau();
            let s = surrogate_from_lanczos(
                grid.clone(),
                f_values.clone(),
                truncated,
                &mut g,
                config.ghost_tol,
            )?;
            let e = s.approximation_error(&h_true)?;
            surface.push(SurfacePoint {
                m,
                k,
                error: e.absolute,
                tau,
            });
        }
    }

    let dir = &config.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut t = Table::new(&["m", "k", "log10_error", "tau"])?;
    for p in &surface {
        t.row(&[
            p.m.to_string(),
            p.k.to_string(),
            format_float(p.error.max(LOG_FLOOR).log10()),
            format_float(p.tau),
        ])?;
    }
    t.write(&dir.join(SURFACE_FILE))?;
    let manifest = SweepManifest {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        n_grid: n_grid.to_vec(),
        k_max,
        rows: surface.len(),
        f_evals: f.evaluations(),
        g_evals: g.evaluations(),
        total_seconds: start.elapsed().as_secs_f64(),
        artifacts: vec![SURFACE_FILE.to_string()],
    };
    write_json(&dir.join(SWEEP_MANIFEST_FILE), &manifest)?;
    Ok(SweepOutcome { manifest, surface })
}
