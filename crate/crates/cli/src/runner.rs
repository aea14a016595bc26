//! Experiment execution: one cell per (algorithm, step, dimension, horizon),
//! CSV artifacts per cell, a timing table and a machine-readable summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use dofw_core::algorithms::{
    run, Algorithm, DogdGradientPoint, RunSpec, RunTrace, TraceLevel,
};
use dofw_core::csvio;
use dofw_core::feasible::FeasibleSet;
use dofw_core::losses::{AnyStream, LossStream, RidgeConfig, RidgeStream, StaticStream};
use dofw_core::metrics::{
    consensus_diagnostics, dynamic_regret, regret_bound, timing_report, BoundInputs,
    ComparatorSeries, RegretBound, TimingRow, VariationOptions, VariationSeries,
};
use dofw_core::network::{generate_schedule, verify_assumption1, MixingSchedule};
use dofw_core::point::Point;
use dofw_core::Error;

use crate::config::{ExperimentConfig, StepConfig};
use crate::CliError;

const CONSERVATION_TOL: f64 = 1e-8;
const FEASIBILITY_TOL: f64 = 1e-10;

/// Pass/fail record of one cell's invariant checks.
#[derive(Clone, Debug, Serialize)]
pub struct CellChecks {
    pub assumption1_ok: bool,
    /// Max per-coordinate gap in the tracked-gradient conservation law
    /// (DOFW only).
    pub tracking_residual: Option<f64>,
    pub tracking_ok: bool,
    pub feasibility_residual: f64,
    pub feasibility_ok: bool,
    pub envelopes_ordered: bool,
    /// Regret never exceeds the evaluated bound, all agents, all prefixes
    /// (DOFW cells with budgets enabled).
    pub regret_within_bound: Option<bool>,
}

impl CellChecks {
    fn all_ok(&self) -> bool {
        self.assumption1_ok
            && self.tracking_ok
            && self.feasibility_ok
            && self.envelopes_ordered
            && self.regret_within_bound.unwrap_or(true)
    }
}

/// Constants backing the exported bound column.
#[derive(Clone, Debug, Serialize)]
pub struct BoundConstants {
    pub sigma: f64,
    pub gamma_cap: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub l_x: f64,
    pub g_x: f64,
    pub diameter: f64,
    pub zeta_observed: f64,
    pub rhs_at_horizon: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub name: String,
    pub algorithm: String,
    pub dim: usize,
    pub horizon: usize,
    pub alpha: f64,
    pub final_avg_regret_over_t: f64,
    pub h_total: Option<f64>,
    pub d_total: Option<f64>,
    pub mean_round_secs: f64,
    pub checks: CellChecks,
    pub bound: Option<BoundConstants>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub ok: bool,
    pub cells: Vec<CellSummary>,
}

/// Validates, certifies, runs every cell and writes all artifacts under
/// `out_dir`. With `check_only` the run stops after certification.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    check_only: bool,
) -> Result<ExperimentSummary, CliError> {
    let validation = config.validate();
    if !validation.ok {
        return Err(CliError::Config(validation.errors.join("; ")));
    }
    if check_only {
        println!("configuration valid; schedules certified");
        return Ok(ExperimentSummary { seed: config.seed, ok: true, cells: Vec::new() });
    }
    fs::create_dir_all(out_dir)?;

    let topology = config.topology()?;
    let horizons = config.effective_horizons()?;
    let dims = config.effective_dims();
    let cells = config.cells()?;
    let n = config.network.n;

    let mut summaries = Vec::new();
    let mut timing_rows: Vec<TimingRow> = Vec::new();
    let mut all_ok = true;

    for &dim in &dims {
        let set = config.build_set(dim)?;
        for &horizon in &horizons {
            let schedule =
                generate_schedule::<f64>(n, horizon, config.network.q, config.network_seed(), topology)
                    .map_err(|e| CliError::Config(format!("network: {e}")))?;
            let cert = verify_assumption1(&schedule);
            if !cert.ok {
                return Err(CliError::Invariant(format!(
                    "schedule failed certification: {}",
                    cert.violations[0]
                )));
            }
            if config.emit.schedule {
                let file = fs::File::create(out_dir.join(format!("schedule_T{horizon}.csv")))?;
                csvio::write_schedule_csv(file, &schedule).map_cli()?;
            }

            let stream = build_stream(config, dim, horizon)?;
            if config.emit.stream {
                if let AnyStream::Ridge(ridge) = &stream {
                    let file =
                        fs::File::create(out_dir.join(format!("stream_d{dim}_T{horizon}.csv")))?;
                    csvio::write_stream_csv(file, ridge).map_cli()?;
                }
            }

            // Time-invariant streams solve one comparator and coast on warm
            // starts; time-varying ones parallelize independent cold solves.
            let comparators = match &stream {
                AnyStream::Static(_) => ComparatorSeries::compute_warm_started(
                    &stream,
                    &set,
                    horizon,
                    config.comparator_tol,
                ),
                AnyStream::Ridge(_) => {
                    ComparatorSeries::compute(&stream, &set, horizon, config.comparator_tol)
                }
            }
            .map_err(|e| CliError::Config(format!("comparator: {e}")))?;
            let budgets = if config.emit.budgets {
                let ht = dofw_core::metrics::variation_ht(
                    &stream,
                    &set,
                    horizon,
                    &VariationOptions { seed: config.seed, ..VariationOptions::default() },
                )
                .map_cli()?;
                let dt = dofw_core::metrics::variation_dt(&stream, &set, horizon).map_cli()?;
                Some((ht, dt))
            } else {
                None
            };

            for (algorithm, step, gradient_at) in &cells {
                let (summary, trace) = run_cell(CellInputs {
                    config,
                    out_dir,
                    set: &set,
                    schedule: &schedule,
                    stream: &stream,
                    comparators: &comparators,
                    budgets: budgets.as_ref(),
                    cert_ok: cert.ok,
                    zeta_observed: cert.zeta_observed,
                    algorithm: *algorithm,
                    step,
                    gradient_at: *gradient_at,
                    dim,
                    horizon,
                })?;
                println!(
                    "{}: regret/T {:.6}, mean round {:.3}us, checks {}",
                    summary.name,
                    summary.final_avg_regret_over_t,
                    summary.mean_round_secs * 1e6,
                    if summary.checks.all_ok() { "ok" } else { "FAILED" }
                );
                all_ok &= summary.checks.all_ok();
                summaries.push(summary);
                timing_rows.extend(timing_report(&[&trace]));
            }
        }
    }

    let file = fs::File::create(out_dir.join("timing.csv"))?;
    csvio::write_timing_csv(file, &timing_rows).map_cli()?;

    let summary = ExperimentSummary { seed: config.seed, ok: all_ok, cells: summaries };
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("serializable summary") + "\n",
    )?;
    if !all_ok {
        return Err(CliError::Invariant(
            "one or more cells failed their invariant checks; see summary.json".into(),
        ));
    }
    Ok(summary)
}

struct CellInputs<'a> {
    config: &'a ExperimentConfig,
    out_dir: &'a Path,
    set: &'a FeasibleSet<f64>,
    schedule: &'a MixingSchedule<f64>,
    stream: &'a AnyStream<f64>,
    comparators: &'a ComparatorSeries<f64>,
    budgets: Option<&'a (VariationSeries<f64>, VariationSeries<f64>)>,
    cert_ok: bool,
    zeta_observed: f64,
    algorithm: Algorithm,
    step: &'a StepConfig,
    gradient_at: DogdGradientPoint,
    dim: usize,
    horizon: usize,
}

fn run_cell(inputs: CellInputs<'_>) -> Result<(CellSummary, RunTrace<f64>), CliError> {
    let CellInputs {
        config,
        out_dir,
        set,
        schedule,
        stream,
        comparators,
        budgets,
        cert_ok,
        zeta_observed,
        algorithm,
        step,
        gradient_at,
        dim,
        horizon,
    } = inputs;

    let schedule_step = step.to_schedule();
    let alpha = schedule_step.alpha_at(horizon).map_cli()?;
    let want_diag = config.emit.diagnostics && algorithm == Algorithm::Dofw;
    let spec = RunSpec {
        algorithm,
        step: schedule_step,
        horizon,
        x_init: dofw_core::algorithms::XInit::FirstVertex,
        trace_level: if want_diag { TraceLevel::Full } else { TraceLevel::Light },
        dogd_gradient_point: gradient_at,
    };
    let trace = run(&spec, set, schedule, stream).map_cli()?;

    let mut report = dynamic_regret(&trace, stream, comparators).map_cli()?;
    if let Some((ht, dt)) = budgets {
        report.attach_budgets(ht, dt);
    }

    // The bound column is the Frank-Wolfe method's guarantee; the baseline's
    // rows leave it blank.
    let bound = match budgets {
        Some(budgets) if algorithm == Algorithm::Dofw => Some(evaluate_bound(
            config,
            set,
            schedule,
            stream,
            zeta_observed,
            alpha,
            horizon,
            budgets,
        )?),
        _ => None,
    };
    if let Some((b, _)) = &bound {
        report.attach_bound(b).map_cli()?;
    }

    let name = format!(
        "{}_{}_d{dim}_T{horizon}",
        algorithm.as_str(),
        step.label()
    );
    let cell_dir = out_dir.join(&name);
    fs::create_dir_all(&cell_dir)?;
    if config.emit.trace {
        let file = fs::File::create(cell_dir.join("trace.csv"))?;
        csvio::write_trace_csv(file, &trace).map_cli()?;
    }
    if config.emit.regret {
        let file = fs::File::create(cell_dir.join("regret.csv"))?;
        csvio::write_regret_csv(file, &report).map_cli()?;
    }
    if want_diag {
        let diag = consensus_diagnostics(&trace).map_cli()?;
        let file = fs::File::create(cell_dir.join("diagnostics.csv"))?;
        csvio::write_diagnostics_csv(file, &diag).map_cli()?;
    }

    let tracking_residual = trace.tracking_residual();
    let mut envelopes_ordered = true;
    for t in 0..horizon {
        envelopes_ordered &= report.inf_over_t[t] <= report.avg_over_t[t] + 1e-12
            && report.avg_over_t[t] <= report.sup_over_t[t] + 1e-12;
    }
    let regret_within_bound = report.bound_rhs.as_ref().map(|rhs| {
        (1..=horizon).all(|t| {
            (0..trace.agents()).all(|j| report.cumulative(j, t) <= rhs[t - 1])
        })
    });
    let checks = CellChecks {
        assumption1_ok: cert_ok,
        tracking_residual,
        tracking_ok: tracking_residual.map(|r| r <= CONSERVATION_TOL).unwrap_or(true),
        feasibility_residual: trace.feasibility_residual(),
        feasibility_ok: trace.feasibility_residual() <= FEASIBILITY_TOL,
        envelopes_ordered,
        regret_within_bound,
    };

    let summary = CellSummary {
        name,
        algorithm: algorithm.as_str().into(),
        dim,
        horizon,
        alpha,
        final_avg_regret_over_t: report.final_avg_over_t(),
        h_total: budgets.map(|(ht, _)| ht.cumulative[horizon - 1]),
        d_total: budgets.map(|(_, dt)| dt.cumulative[horizon - 1]),
        mean_round_secs: trace.mean_round_secs(),
        checks,
        bound: bound.map(|(_, constants)| constants),
    };
    Ok((summary, trace))
}

#[allow(clippy::too_many_arguments)]
fn evaluate_bound(
    config: &ExperimentConfig,
    set: &FeasibleSet<f64>,
    schedule: &MixingSchedule<f64>,
    stream: &AnyStream<f64>,
    zeta_observed: f64,
    alpha: f64,
    horizon: usize,
    budgets: &(VariationSeries<f64>, VariationSeries<f64>),
) -> Result<(RegretBound<f64>, BoundConstants), CliError> {
    let n = stream.agents();
    let d = stream.dim();
    let constants = stream.constants(set).map_cli()?;

    let first = set.first_vertex();
    let x_init: Vec<Point<f64>> = (0..n).map(|_| first.clone()).collect();
    // Mixed first-round points and the gradients revealed there.
    let mut stacked = vec![0.0f64; n * d];
    for i in 0..n {
        stacked[i * d..(i + 1) * d].copy_from_slice(first.as_slice());
    }
    let mut mixed = vec![0.0f64; n * d];
    schedule.matrix(1).mix_into(&stacked, d, &mut mixed);
    let grads_at_init: Vec<Point<f64>> = (0..n)
        .map(|i| stream.gradient(i, 1, &mixed[i * d..(i + 1) * d]))
        .collect();

    let (ht, dt) = budgets;
    let bound = regret_bound(&BoundInputs {
        agents: n,
        diameter: set.diameter(),
        l_x: constants.l_x,
        g_x: constants.g_x,
        zeta: zeta_observed,
        q: config.network.q,
        alpha,
        horizon,
        h_t: ht.cumulative[horizon - 1],
        d_t: dt.cumulative[horizon - 1],
        x_init: &x_init,
        grads_at_init: &grads_at_init,
    })
    .map_cli()?;
    let constants_out = BoundConstants {
        sigma: bound.sigma,
        gamma_cap: bound.gamma_cap,
        c1: bound.c1,
        c2: bound.c2,
        c3: bound.c3,
        c4: bound.c4,
        l_x: constants.l_x,
        g_x: constants.g_x,
        diameter: set.diameter(),
        zeta_observed,
        rhs_at_horizon: bound.rhs,
    };
    Ok((bound, constants_out))
}

fn build_stream(
    config: &ExperimentConfig,
    dim: usize,
    horizon: usize,
) -> Result<AnyStream<f64>, CliError> {
    let ridge_config = RidgeConfig {
        agents: config.network.n,
        dim,
        horizon,
        lambda1: config.loss.lambda1,
        seed: config.loss_seed(),
        static_features: config.loss.static_features,
    };
    match config.loss.kind.as_str() {
        "ridge" => Ok(AnyStream::Ridge(RidgeStream::generate(ridge_config).map_cli()?)),
        "static" => {
            let base = RidgeStream::generate(RidgeConfig { horizon: 1, ..ridge_config })
                .map_cli()?;
            let stat = StaticStream::from_ridge_round(&base, 1, horizon).map_cli()?;
            Ok(AnyStream::Static(stat))
        }
        other => Err(CliError::Config(format!("loss.kind: unknown loss {other:?}"))),
    }
}

trait MapCli<T> {
    fn map_cli(self) -> Result<T, CliError>;
}

impl<T> MapCli<T> for Result<T, Error> {
    fn map_cli(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Default output directory when neither the config nor the flag names one.
pub fn default_out_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .out_dir
        .as_deref()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out"))
}
