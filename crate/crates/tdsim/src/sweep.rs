//! Seed sweeps and scaling studies: run the estimators over a grid of
//! `eps`, rank, or threshold values, record per-trial rows, and summarize
//! success rates and measured cost exponents.
//!
//! Cost exponents are extracted two ways: `raw_slope` regresses the
//! logarithm of the measured totals directly, while `lognorm_slope` first
//! divides out the known logarithmic factor of the cost model
//! (`ln(1/eps_p)` on the eps axis), leaving the polynomial exponent that
//! the scaling claims pin down. Summary numbers are recomputable from the
//! emitted rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use tdsim_core::algorithms::{estimate_purified_states, estimate_samples, EstimateReport, EstimationConfig};
use tdsim_core::error::Error;
use tdsim_core::estimators::BackendMode;
use tdsim_core::fixtures::gen_low_rank;
use tdsim_core::rng::RngStream;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Eps,
    Rank,
    Delta,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Purified,
    Samples,
}

/// Declarative description of one sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    /// Grid values along the axis (ranks are given as integers-in-f64).
    pub grid: Vec<f64>,
    pub trials: usize,
    /// System qubits of the generated states.
    pub n: usize,
    /// Fixture rank (fixed when the axis is not `rank`).
    pub rank: usize,
    /// Target accuracy (fixed when the axis is not `eps`).
    pub eps: f64,
    pub mode: SweepMode,
    pub backend: Option<BackendMode>,
    pub seed_base: u64,
    #[serde(default = "default_median_k")]
    pub median_k: usize,
}

fn default_median_k() -> usize {
    tdsim_core::config::DEFAULT_MEDIAN_K
}

impl SweepPlan {
    pub fn validate(&self) -> Result<(), Error> {
        if self.trials == 0 {
            return Err(Error::Argument("trials must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Argument("grid must be non-empty".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.grid.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::Argument("grid must be strictly monotone".into()));
        }
        Ok(())
    }
}

/// One (grid point, trial) outcome.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: f64,
    pub trial: usize,
    pub seed: u64,
    pub mode: String,
    pub eps: f64,
    pub delta_p: f64,
    pub estimate: f64,
    pub exact: f64,
    pub abs_error: f64,
    pub queries_total: u64,
    pub samples_total: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointSummary {
    pub point: f64,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_queries: f64,
    pub mean_samples: f64,
    pub mean_abs_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub per_point: Vec<PointSummary>,
    /// Regression of ln(total) against ln(axis scale).
    pub raw_slope: f64,
    /// Same regression after dividing out the known log factor.
    pub lognorm_slope: f64,
    /// Whether the plan aborted early (dimension cap); rows are partial.
    pub partial: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

fn run_one(plan: &SweepPlan, point: f64, seed: u64) -> Result<EstimateReport, Error> {
    let (eps, rank) = match plan.axis {
        SweepAxis::Eps => (point, plan.rank),
        SweepAxis::Rank => (plan.eps, point.round() as usize),
        SweepAxis::Delta => (plan.eps, plan.rank),
    };
    let gen_stream = RngStream::root(seed).child("sweep");
    let a = gen_low_rank(plan.n, rank, &gen_stream.child("a"))?.state;
    let b = gen_low_rank(plan.n, rank, &gen_stream.child("b"))?.state;
    let mut cfg = EstimationConfig::new(eps, seed)?.with_median_k(plan.median_k);
    cfg = match plan.axis {
        SweepAxis::Delta => cfg.with_delta_p(point),
        _ => cfg.with_rank_bound(rank),
    };
    if let Some(backend) = plan.backend {
        cfg = cfg.with_backend(backend);
    }
    match plan.mode {
        SweepMode::Purified => estimate_purified_states(&a, &b, &cfg),
        SweepMode::Samples => estimate_samples(&a, &b, &cfg),
    }
}

/// Cost total the scaling claims constrain: oracle queries on the purified
/// path, copies consumed on the sample path.
fn cost_of(row: &SweepRow, mode: SweepMode) -> f64 {
    match mode {
        SweepMode::Purified => row.queries_total as f64,
        SweepMode::Samples => row.samples_total as f64,
    }
}

fn regression_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if var == 0.0 {
        f64::NAN
    } else {
        cov / var
    }
}

/// The abscissa of the scaling regression: `1/eps`, rank, or `1/delta`.
fn axis_scale(axis: SweepAxis, point: f64) -> f64 {
    match axis {
        SweepAxis::Eps => 1.0 / point,
        SweepAxis::Rank => point,
        SweepAxis::Delta => 1.0 / point,
    }
}

/// Known polylog factor of the cost model along the axis.
fn log_factor(plan: &SweepPlan, point: f64) -> f64 {
    match (plan.axis, plan.mode) {
        (SweepAxis::Eps, SweepMode::Purified) => (8.0 / point).ln(),
        (SweepAxis::Eps, SweepMode::Samples) => {
            // degree log times the squared channel-budget log
            let l = (12.0 / point).ln();
            l * l * l
        }
        _ => 1.0,
    }
}

pub fn summarize(plan: &SweepPlan, rows: &[SweepRow], partial: bool) -> SweepSummary {
    let mut per_point = Vec::new();
    let mut reg_raw = Vec::new();
    let mut reg_norm = Vec::new();
    for &point in &plan.grid {
        let point_rows: Vec<&SweepRow> = rows.iter().filter(|r| r.point == point).collect();
        if point_rows.is_empty() {
            continue;
        }
        let trials = point_rows.len();
        let eps = match plan.axis {
            SweepAxis::Eps => point,
            _ => plan.eps,
        };
        let success = point_rows.iter().filter(|r| r.abs_error <= eps).count();
        let mean_queries =
            point_rows.iter().map(|r| r.queries_total as f64).sum::<f64>() / trials as f64;
        let mean_samples =
            point_rows.iter().map(|r| r.samples_total as f64).sum::<f64>() / trials as f64;
        let mean_abs_error =
            point_rows.iter().map(|r| r.abs_error).sum::<f64>() / trials as f64;
        per_point.push(PointSummary {
            point,
            trials,
            success_rate: success as f64 / trials as f64,
            mean_queries,
            mean_samples,
            mean_abs_error,
        });
        let cost = point_rows.iter().map(|r| cost_of(r, plan.mode)).sum::<f64>() / trials as f64;
        let x = axis_scale(plan.axis, point).ln();
        reg_raw.push((x, cost.ln()));
        reg_norm.push((x, (cost / log_factor(plan, point)).ln()));
    }
    SweepSummary {
        per_point,
        raw_slope: regression_slope(&reg_raw),
        lognorm_slope: regression_slope(&reg_norm),
        partial,
    }
}

/// Execute a plan. Trials run on the worker pool; rows come back in plan
/// order. A dimension-cap failure aborts the remaining grid and flags the
/// summary as partial. Checkpoints and rows are written when `out_dir` is
/// given.
pub fn run_sweep(plan: &SweepPlan, out_dir: Option<&Path>) -> Result<SweepOutcome, Error> {
    plan.validate()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
    }
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut partial = false;
    'grid: for (pi, &point) in plan.grid.iter().enumerate() {
        let results: Vec<Result<EstimateReport, Error>> = (0..plan.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = plan.seed_base + (pi * plan.trials + trial) as u64;
                run_one(plan, point, seed)
            })
            .collect();
        let mut point_rows = Vec::new();
        for (trial, res) in results.into_iter().enumerate() {
            match res {
                Ok(rep) => point_rows.push(SweepRow {
                    point,
                    trial,
                    seed: rep.seed,
                    mode: rep.mode.clone(),
                    eps: rep.eps,
                    delta_p: rep.delta_p,
                    estimate: rep.estimate,
                    exact: rep.exact,
                    abs_error: rep.abs_error,
                    queries_total: rep.queries_total,
                    samples_total: rep.samples_total,
                }),
                Err(Error::QubitCap { requested, cap }) => {
                    eprintln!(
                        "sweep aborted at point {point}: {requested} qubits exceeds cap {cap}"
                    );
                    partial = true;
                    rows.extend(point_rows);
                    break 'grid;
                }
                Err(e) => return Err(e),
            }
        }
        if let Some(dir) = out_dir {
            let checkpoint = dir.join(format!("point_{pi}.json"));
            fs::write(&checkpoint, serde_json::to_string_pretty(&point_rows)?)?;
        }
        rows.extend(point_rows);
    }
    let summary = summarize(plan, &rows, partial);
    if let Some(dir) = out_dir {
        let mut csv = String::from(
            "point,trial,seed,mode,eps,delta_p,estimate,exact,abs_error,queries_total,samples_total\n",
        );
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.point,
                r.trial,
                r.seed,
                r.mode,
                r.eps,
                r.delta_p,
                r.estimate,
                r.exact,
                r.abs_error,
                r.queries_total,
                r.samples_total
            ));
        }
        fs::write(dir.join("rows.csv"), csv)?;
        fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
    }
    Ok(SweepOutcome { rows, summary })
}
