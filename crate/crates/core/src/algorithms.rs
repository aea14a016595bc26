//! Round-by-round engines: projection-free distributed online Frank-Wolfe
//! with gradient tracking (DOFW) and the projection-based distributed online
//! gradient descent baseline (DOGD).
//!
//! Every round is synchronous: agents mix the pre-round snapshot, reveal
//! gradients at the mixed point, and update independently. Per-agent work
//! inside a round is order-independent by construction.

use std::time::{Duration, Instant};

use crate::error::Error;
use crate::feasible::FeasibleSet;
use crate::losses::LossStream;
use crate::network::{Mixing, MixingSchedule};
use crate::point::Point;
use crate::scalar::{real, real_of, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Dofw,
    Dogd,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Dofw => "dofw",
            Algorithm::Dogd => "dogd",
        }
    }
}

/// Where DOGD evaluates its gradient; the baseline's published variants
/// differ here, so the choice is a flag.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DogdGradientPoint {
    /// At the post-consensus point (mirrors where DOFW reveals gradients).
    #[default]
    Mixed,
    /// At the agent's own pre-mix decision.
    Premix,
}

/// Constant step size selected from the run horizon.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule<S> {
    /// Fixed `alpha`, must already lie in (0, 1].
    Constant(S),
    /// `alpha = gamma * sqrt((h_estimate + 1) / T)`, clamped to (0, 1]:
    /// the horizon-adaptive schedule driven by a function-variation budget
    /// estimate.
    HorizonSqrt { gamma: S, h_estimate: S },
    /// `alpha = coeff / T^exponent`, clamped to (0, 1].
    Power { coeff: S, exponent: S },
}

impl<S: Scalar> StepSchedule<S> {
    /// Resolves the step size for a run of `horizon` rounds.
    pub fn alpha_at(&self, horizon: usize) -> Result<S, Error> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        let t = real_of::<S>(horizon);
        let raw = match *self {
            StepSchedule::Constant(alpha) => {
                if !(alpha > S::zero() && alpha <= S::one()) {
                    return Err(Error::InvalidParameter(format!(
                        "constant step {alpha} outside (0, 1]"
                    )));
                }
                return Ok(alpha);
            }
            StepSchedule::HorizonSqrt { gamma, h_estimate } => {
                if h_estimate < S::zero() {
                    return Err(Error::InvalidParameter(
                        "budget estimate must be nonnegative".into(),
                    ));
                }
                gamma * ((h_estimate + S::one()) / t).sqrt()
            }
            StepSchedule::Power { coeff, exponent } => coeff / t.powf(exponent),
        };
        if !raw.is_finite() || raw <= S::zero() {
            return Err(Error::InvalidParameter(format!(
                "step schedule produced non-positive alpha {raw}"
            )));
        }
        Ok(raw.min(S::one()))
    }
}

/// Collective DOFW state: current decisions plus the gradient-tracking
/// memory from the previous round.
#[derive(Clone, Debug)]
pub struct DofwAgentState<S> {
    n: usize,
    d: usize,
    /// Stacked decisions `x_{i,t}`, agent-major.
    x: Vec<S>,
    /// Tracked gradients of the previous round (unset before round 1 runs).
    grad_hat_prev: Vec<S>,
    /// Local gradients revealed in the previous round.
    grad_prev: Vec<S>,
    next_round: usize,
}

impl<S: Scalar> DofwAgentState<S> {
    pub fn new(n: usize, d: usize, x_init: Vec<S>) -> Self {
        assert_eq!(x_init.len(), n * d);
        DofwAgentState {
            n,
            d,
            x: x_init,
            grad_hat_prev: vec![S::zero(); n * d],
            grad_prev: vec![S::zero(); n * d],
            next_round: 1,
        }
    }

    pub fn decisions(&self) -> &[S] {
        &self.x
    }

    pub fn decision(&self, agent: usize) -> &[S] {
        &self.x[agent * self.d..(agent + 1) * self.d]
    }

    pub fn next_round(&self) -> usize {
        self.next_round
    }
}

/// Collective DOGD state: just the decisions.
#[derive(Clone, Debug)]
pub struct DogdAgentState<S> {
    n: usize,
    d: usize,
    x: Vec<S>,
    next_round: usize,
}

impl<S: Scalar> DogdAgentState<S> {
    pub fn new(n: usize, d: usize, x_init: Vec<S>) -> Self {
        assert_eq!(x_init.len(), n * d);
        DogdAgentState { n, d, x: x_init, next_round: 1 }
    }

    pub fn decisions(&self) -> &[S] {
        &self.x
    }

    pub fn next_round(&self) -> usize {
        self.next_round
    }
}

/// Everything one DOFW round produces, agent-major stacked vectors.
#[derive(Clone, Debug)]
pub struct DofwRoundRecord<S> {
    pub x_hat: Vec<S>,
    pub grads: Vec<S>,
    pub grad_bar: Vec<S>,
    pub grad_hat: Vec<S>,
    pub v: Vec<S>,
    pub x_next: Vec<S>,
    pub compute_time: Duration,
}

/// Everything one DOGD round produces.
#[derive(Clone, Debug)]
pub struct DogdRoundRecord<S> {
    pub x_hat: Vec<S>,
    pub grads: Vec<S>,
    pub x_next: Vec<S>,
    pub compute_time: Duration,
}

struct Scratch<S> {
    x_hat: Vec<S>,
    grads: Vec<S>,
    grad_bar: Vec<S>,
    grad_hat: Vec<S>,
    v: Vec<S>,
    x_next: Vec<S>,
}

impl<S: Scalar> Scratch<S> {
    fn new(n: usize, d: usize) -> Self {
        Scratch {
            x_hat: vec![S::zero(); n * d],
            grads: vec![S::zero(); n * d],
            grad_bar: vec![S::zero(); n * d],
            grad_hat: vec![S::zero(); n * d],
            v: vec![S::zero(); n * d],
            x_next: vec![S::zero(); n * d],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_round_inputs<S: Scalar, L: LossStream<S> + ?Sized>(
    n: usize,
    d: usize,
    next_round: usize,
    a_t: &Mixing<S>,
    stream: &L,
    t: usize,
    set: &FeasibleSet<S>,
) -> Result<(), Error> {
    if a_t.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a_t.n() });
    }
    if stream.agents() != n {
        return Err(Error::DimensionMismatch { expected: n, got: stream.agents() });
    }
    if stream.dim() != d || set.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: set.dim() });
    }
    if t != next_round {
        return Err(Error::RoundOrder { expected: next_round, got: t });
    }
    if t > stream.max_round() {
        return Err(Error::IndexOutOfRange {
            context: "round past stream data",
            got: t,
            limit: stream.max_round(),
        });
    }
    Ok(())
}

/// One synchronous DOFW round at time `t`:
/// mix decisions, reveal gradients at the mixed points, advance the tracking
/// recursion, mix the tracked gradients, take the oracle step.
///
/// `order` is the agent processing order; results are bit-identical for any
/// permutation because each phase reads only pre-phase snapshots.
#[allow(clippy::too_many_arguments)]
fn dofw_phases<S: Scalar, L: LossStream<S> + ?Sized>(
    state: &DofwAgentState<S>,
    a_t: &Mixing<S>,
    stream: &L,
    t: usize,
    alpha: S,
    set: &FeasibleSet<S>,
    scratch: &mut Scratch<S>,
    order: &[usize],
) -> Result<(), Error> {
    let d = state.d;
    for &i in order {
        let lo = i * d;
        let hi = lo + d;
        a_t.mix_row_into(i, &state.x, d, &mut scratch.x_hat[lo..hi]);
        stream.gradient_into(i, t, &scratch.x_hat[lo..hi], &mut scratch.grads[lo..hi]);
        if t == 1 {
            scratch.grad_bar[lo..hi].copy_from_slice(&scratch.grads[lo..hi]);
        } else {
            for k in lo..hi {
                scratch.grad_bar[k] =
                    state.grad_hat_prev[k] + scratch.grads[k] - state.grad_prev[k];
            }
        }
    }
    for &i in order {
        let lo = i * d;
        let hi = lo + d;
        a_t.mix_row_into(i, &scratch.grad_bar, d, &mut scratch.grad_hat[lo..hi]);
        set.lmo_into(&scratch.grad_hat[lo..hi], &mut scratch.v[lo..hi])?;
        for k in lo..hi {
            scratch.x_next[k] =
                scratch.x_hat[k] + alpha * (scratch.v[k] - scratch.x_hat[k]);
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn dogd_phases<S: Scalar, L: LossStream<S> + ?Sized>(
    state: &DogdAgentState<S>,
    a_t: &Mixing<S>,
    stream: &L,
    t: usize,
    alpha: S,
    set: &FeasibleSet<S>,
    gradient_point: DogdGradientPoint,
    scratch: &mut Scratch<S>,
    order: &[usize],
) -> Result<(), Error> {
    let d = state.d;
    for &i in order {
        let lo = i * d;
        let hi = lo + d;
        a_t.mix_row_into(i, &state.x, d, &mut scratch.x_hat[lo..hi]);
        let eval_at = match gradient_point {
            DogdGradientPoint::Mixed => &scratch.x_hat[lo..hi],
            DogdGradientPoint::Premix => &state.x[lo..hi],
        };
        stream.gradient_into(i, t, eval_at, &mut scratch.grads[lo..hi]);
        for k in lo..hi {
            // Reuse the oracle buffer for the pre-projection point.
            scratch.v[k] = scratch.x_hat[k] - alpha * scratch.grads[k];
        }
        set.project_into(&scratch.v[lo..hi], &mut scratch.x_next[lo..hi])?;
    }
    Ok(())
}

/// Runs one DOFW round, advancing `state` and returning the full record.
/// `alpha` must lie in (0, 1].
pub fn dofw_round<S: Scalar, L: LossStream<S> + ?Sized>(
    state: &mut DofwAgentState<S>,
    a_t: &Mixing<S>,
    stream: &L,
    t: usize,
    alpha: S,
    set: &FeasibleSet<S>,
) -> Result<DofwRoundRecord<S>, Error> {
    if !(alpha > S::zero() && alpha <= S::one()) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
    }
    check_round_inputs(state.n, state.d, state.next_round, a_t, stream, t, set)?;
    let mut scratch = Scratch::new(state.n, state.d);
    let order: Vec<usize> = (0..state.n).collect();
    let start = Instant::now();
    dofw_phases(state, a_t, stream, t, alpha, set, &mut scratch, &order)?;
    let compute_time = start.elapsed();
    state.x.copy_from_slice(&scratch.x_next);
    state.grad_hat_prev.copy_from_slice(&scratch.grad_hat);
    state.grad_prev.copy_from_slice(&scratch.grads);
    state.next_round += 1;
    Ok(DofwRoundRecord {
        x_hat: scratch.x_hat,
        grads: scratch.grads,
        grad_bar: scratch.grad_bar,
        grad_hat: scratch.grad_hat,
        v: scratch.v,
        x_next: scratch.x_next,
        compute_time,
    })
}

/// Runs one DOGD round, advancing `state`. A zero step is allowed (the
/// update degenerates to projected consensus).
pub fn dogd_round<S: Scalar, L: LossStream<S> + ?Sized>(
    state: &mut DogdAgentState<S>,
    a_t: &Mixing<S>,
    stream: &L,
    t: usize,
    alpha: S,
    set: &FeasibleSet<S>,
    gradient_point: DogdGradientPoint,
) -> Result<DogdRoundRecord<S>, Error> {
    if !(alpha >= S::zero() && alpha <= S::one()) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside [0, 1]")));
    }
    check_round_inputs(state.n, state.d, state.next_round, a_t, stream, t, set)?;
    let mut scratch = Scratch::new(state.n, state.d);
    let order: Vec<usize> = (0..state.n).collect();
    let start = Instant::now();
    dogd_phases(state, a_t, stream, t, alpha, set, gradient_point, &mut scratch, &order)?;
    let compute_time = start.elapsed();
    state.x.copy_from_slice(&scratch.x_next);
    state.next_round += 1;
    Ok(DogdRoundRecord {
        x_hat: scratch.x_hat,
        grads: scratch.grads,
        x_next: scratch.x_next,
        compute_time,
    })
}

/// How much per-round data a run keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceLevel {
    /// Decisions and timings only.
    Light,
    /// Decisions, mixed points, gradients and (for DOFW) tracking internals.
    Full,
}

/// Initial decisions.
#[derive(Clone, Debug, Default)]
pub enum XInit<S> {
    /// Every agent starts at the set's first vertex.
    #[default]
    FirstVertex,
    /// Explicit per-agent starts (must all be feasible).
    PerAgent(Vec<Point<S>>),
}

/// DOFW-only internals kept by a full trace.
#[derive(Clone, Debug)]
pub struct TrackingDiagnostics<S> {
    /// `grad_bar` recursion outputs, `horizon * n * d`.
    pub grad_bar: Vec<S>,
    /// Mixed tracked gradients.
    pub grad_hat: Vec<S>,
    /// Oracle vertices.
    pub v: Vec<S>,
}

/// Complete record of one run.
#[derive(Clone, Debug)]
pub struct RunTrace<S> {
    algorithm: Algorithm,
    n: usize,
    d: usize,
    horizon: usize,
    level: TraceLevel,
    /// `x_{i,t}` for t = 1..=horizon, stacked round-major then agent-major.
    decisions: Vec<S>,
    /// `x_{i,horizon+1}`.
    final_decisions: Vec<S>,
    /// Mixed points (Full traces).
    x_hat: Vec<S>,
    /// Revealed gradients (Full traces).
    grads: Vec<S>,
    diagnostics: Option<TrackingDiagnostics<S>>,
    round_times_ns: Vec<u64>,
    /// Max per-coordinate gap between the tracked-gradient sum and the local
    /// gradient sum, across all rounds (DOFW only).
    tracking_residual: Option<S>,
    /// Worst feasibility violation seen across decisions, mixed points and
    /// oracle outputs.
    feasibility_residual: S,
}

impl<S: Scalar> RunTrace<S> {
    /// Wraps an externally produced decision sequence (CSV import, fixtures)
    /// so the metrics can run on it.
    pub fn from_decisions(
        algorithm: Algorithm,
        n: usize,
        d: usize,
        horizon: usize,
        decisions: Vec<S>,
        round_times_ns: Vec<u64>,
    ) -> Result<Self, Error> {
        if decisions.len() != horizon * n * d {
            return Err(Error::DimensionMismatch {
                expected: horizon * n * d,
                got: decisions.len(),
            });
        }
        if round_times_ns.len() != horizon {
            return Err(Error::DimensionMismatch {
                expected: horizon,
                got: round_times_ns.len(),
            });
        }
        let final_decisions = decisions[(horizon - 1) * n * d..].to_vec();
        Ok(RunTrace {
            algorithm,
            n,
            d,
            horizon,
            level: TraceLevel::Light,
            decisions,
            final_decisions,
            x_hat: Vec::new(),
            grads: Vec::new(),
            diagnostics: None,
            round_times_ns,
            tracking_residual: None,
            feasibility_residual: S::zero(),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn level(&self) -> TraceLevel {
        self.level
    }

    fn slot(&self, t: usize, agent: usize) -> std::ops::Range<usize> {
        debug_assert!(t >= 1 && t <= self.horizon && agent < self.n);
        let base = ((t - 1) * self.n + agent) * self.d;
        base..base + self.d
    }

    /// `x_{agent,t}` (pre-mix decision of round `t`).
    pub fn decision(&self, agent: usize, t: usize) -> &[S] {
        &self.decisions[self.slot(t, agent)]
    }

    pub fn decisions(&self) -> &[S] {
        &self.decisions
    }

    pub fn final_decision(&self, agent: usize) -> &[S] {
        &self.final_decisions[agent * self.d..(agent + 1) * self.d]
    }

    pub fn mixed(&self, agent: usize, t: usize) -> Option<&[S]> {
        if self.x_hat.is_empty() {
            return None;
        }
        Some(&self.x_hat[self.slot(t, agent)])
    }

    pub fn gradient(&self, agent: usize, t: usize) -> Option<&[S]> {
        if self.grads.is_empty() {
            return None;
        }
        Some(&self.grads[self.slot(t, agent)])
    }

    pub fn diagnostics(&self) -> Option<&TrackingDiagnostics<S>> {
        self.diagnostics.as_ref()
    }

    pub fn round_times_ns(&self) -> &[u64] {
        &self.round_times_ns
    }

    pub fn tracking_residual(&self) -> Option<S> {
        self.tracking_residual
    }

    pub fn feasibility_residual(&self) -> S {
        self.feasibility_residual
    }

    pub fn mean_round_secs(&self) -> f64 {
        if self.round_times_ns.is_empty() {
            return 0.0;
        }
        let total: u64 = self.round_times_ns.iter().sum();
        total as f64 * 1e-9 / self.round_times_ns.len() as f64
    }

    pub fn total_secs(&self) -> f64 {
        self.round_times_ns.iter().sum::<u64>() as f64 * 1e-9
    }
}

/// Parameters of [`run`].
#[derive(Clone, Debug)]
pub struct RunSpec<S> {
    pub algorithm: Algorithm,
    pub step: StepSchedule<S>,
    pub horizon: usize,
    pub x_init: XInit<S>,
    pub trace_level: TraceLevel,
    pub dogd_gradient_point: DogdGradientPoint,
}

impl<S: Scalar> RunSpec<S> {
    pub fn new(algorithm: Algorithm, step: StepSchedule<S>, horizon: usize) -> Self {
        RunSpec {
            algorithm,
            step,
            horizon,
            x_init: XInit::FirstVertex,
            trace_level: TraceLevel::Full,
            dogd_gradient_point: DogdGradientPoint::Mixed,
        }
    }
}

const FEASIBILITY_TOL: f64 = 1e-10;

/// Runs a full horizon. Deterministic in its inputs; per-round wall-clock
/// times cover only the local computation (consensus arithmetic, gradient
/// evaluation, oracle or projection, step), not trace bookkeeping.
pub fn run<S: Scalar, L: LossStream<S> + ?Sized>(
    spec: &RunSpec<S>,
    set: &FeasibleSet<S>,
    schedule: &MixingSchedule<S>,
    stream: &L,
) -> Result<RunTrace<S>, Error> {
    let n = stream.agents();
    let d = stream.dim();
    let horizon = spec.horizon;
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    if schedule.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: schedule.n() });
    }
    if set.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: set.dim() });
    }
    if schedule.horizon() < horizon {
        return Err(Error::HorizonMismatch(format!(
            "schedule has {} rounds, run needs {horizon}",
            schedule.horizon()
        )));
    }
    if stream.max_round() < horizon {
        return Err(Error::HorizonMismatch(format!(
            "stream has {} rounds, run needs {horizon}",
            stream.max_round()
        )));
    }

    let mut x_init = vec![S::zero(); n * d];
    match &spec.x_init {
        XInit::FirstVertex => {
            let v = set.first_vertex();
            for i in 0..n {
                x_init[i * d..(i + 1) * d].copy_from_slice(v.as_slice());
            }
        }
        XInit::PerAgent(points) => {
            if points.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: points.len() });
            }
            for (i, p) in points.iter().enumerate() {
                if p.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, got: p.dim() });
                }
                if !set.contains(p.as_slice(), real(FEASIBILITY_TOL)) {
                    return Err(Error::InvalidParameter(format!(
                        "initial decision of agent {i} is infeasible"
                    )));
                }
                x_init[i * d..(i + 1) * d].copy_from_slice(p.as_slice());
            }
        }
    }

    let alpha = spec.step.alpha_at(horizon)?;
    let full = spec.trace_level == TraceLevel::Full;
    let is_dofw = spec.algorithm == Algorithm::Dofw;

    let mut decisions = Vec::with_capacity(horizon * n * d);
    let mut x_hat_log = if full { Vec::with_capacity(horizon * n * d) } else { Vec::new() };
    let mut grads_log = if full { Vec::with_capacity(horizon * n * d) } else { Vec::new() };
    let mut diag = if full && is_dofw {
        Some(TrackingDiagnostics {
            grad_bar: Vec::with_capacity(horizon * n * d),
            grad_hat: Vec::with_capacity(horizon * n * d),
            v: Vec::with_capacity(horizon * n * d),
        })
    } else {
        None
    };
    let mut round_times_ns = Vec::with_capacity(horizon);
    let mut tracking_residual = S::zero();
    let mut feasibility_residual = S::zero();

    let mut scratch = Scratch::new(n, d);
    let order: Vec<usize> = (0..n).collect();
    let mut dofw_state = DofwAgentState::new(n, d, x_init.clone());
    let mut dogd_state = DogdAgentState::new(n, d, x_init);

    for t in 1..=horizon {
        let a_t = schedule.matrix(t);
        let start = Instant::now();
        if is_dofw {
            dofw_phases(&dofw_state, a_t, stream, t, alpha, set, &mut scratch, &order)?;
        } else {
            dogd_phases(
                &dogd_state,
                a_t,
                stream,
                t,
                alpha,
                set,
                spec.dogd_gradient_point,
                &mut scratch,
                &order,
            )?;
        }
        let elapsed = start.elapsed();
        round_times_ns.push(elapsed.as_nanos() as u64);

        let x_t = if is_dofw { &dofw_state.x } else { &dogd_state.x };
        decisions.extend_from_slice(x_t);
        for i in 0..n {
            let lo = i * d;
            let hi = lo + d;
            feasibility_residual = feasibility_residual
                .max(set.violation(&x_t[lo..hi]))
                .max(set.violation(&scratch.x_hat[lo..hi]))
                .max(set.violation(&scratch.x_next[lo..hi]));
            if is_dofw {
                feasibility_residual =
                    feasibility_residual.max(set.violation(&scratch.v[lo..hi]));
            }
        }
        if is_dofw {
            // Tracked-gradient conservation: the grad_bar sum must equal the
            // revealed gradient sum coordinate-wise, every round.
            for k in 0..d {
                let mut bar = S::zero();
                let mut loc = S::zero();
                for i in 0..n {
                    bar = bar + scratch.grad_bar[i * d + k];
                    loc = loc + scratch.grads[i * d + k];
                }
                tracking_residual = tracking_residual.max((bar - loc).abs());
            }
        }
        if full {
            x_hat_log.extend_from_slice(&scratch.x_hat);
            grads_log.extend_from_slice(&scratch.grads);
            if let Some(diag) = diag.as_mut() {
                diag.grad_bar.extend_from_slice(&scratch.grad_bar);
                diag.grad_hat.extend_from_slice(&scratch.grad_hat);
                diag.v.extend_from_slice(&scratch.v);
            }
        }

        if is_dofw {
            std::mem::swap(&mut dofw_state.x, &mut scratch.x_next);
            std::mem::swap(&mut dofw_state.grad_hat_prev, &mut scratch.grad_hat);
            std::mem::swap(&mut dofw_state.grad_prev, &mut scratch.grads);
            dofw_state.next_round += 1;
        } else {
            std::mem::swap(&mut dogd_state.x, &mut scratch.x_next);
            dogd_state.next_round += 1;
        }
    }

    let final_decisions = if is_dofw { dofw_state.x } else { dogd_state.x };
    Ok(RunTrace {
        algorithm: spec.algorithm,
        n,
        d,
        horizon,
        level: spec.trace_level,
        decisions,
        final_decisions,
        x_hat: x_hat_log,
        grads: grads_log,
        diagnostics: diag,
        round_times_ns,
        tracking_residual: if is_dofw { Some(tracking_residual) } else { None },
        feasibility_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossConstants, RidgeConfig, RidgeStream};
    use crate::network::{generate_schedule, Topology};
    use crate::point::dot;
    use crate::testutil::{ConstGradStream, PointDistanceStream};

    fn simplex(d: usize) -> FeasibleSet<f64> {
        FeasibleSet::simplex(d).unwrap()
    }

    #[test]
    fn alpha_at_examples() {
        // Independent route: alpha = exp(-(ln 4 + 1.6 ln 10)).
        let expected = (-(4.0f64.ln() + 1.6 * 10.0f64.ln())).exp();
        let s = StepSchedule::Power { coeff: 0.25, exponent: 0.4 };
        let a = s.alpha_at(10_000).unwrap();
        assert!((a - expected).abs() < 1e-15);
        assert!((a - 6.279716e-3).abs() < 1e-9);

        let c = StepSchedule::HorizonSqrt { gamma: 1.0, h_estimate: 0.0 };
        assert_eq!(c.alpha_at(4).unwrap(), 0.5);

        assert_eq!(StepSchedule::Constant(1.0).alpha_at(7).unwrap(), 1.0);
    }

    #[test]
    fn alpha_at_rejects_and_clamps() {
        assert!(StepSchedule::Constant(0.0).alpha_at(10).is_err());
        assert!(StepSchedule::Constant(1.5).alpha_at(10).is_err());
        assert!(StepSchedule::HorizonSqrt { gamma: 0.0, h_estimate: 0.0 }
            .alpha_at(10)
            .is_err());
        assert!(StepSchedule::Power { coeff: -1.0, exponent: 0.4 }.alpha_at(10).is_err());
        // Oversized raw values clamp to the admissible boundary.
        let s = StepSchedule::Power { coeff: 10.0, exponent: 0.0 };
        assert_eq!(s.alpha_at(3).unwrap(), 1.0);
    }

    #[test]
    fn dofw_single_agent_linear_loss_jumps_to_vertex() {
        let set = simplex(2);
        let stream = ConstGradStream::new(1, vec![1.0, -1.0], 10);
        let a = generate_schedule::<f64>(1, 1, 1, 0, Topology::StaticComplete).unwrap();
        let mut state = DofwAgentState::new(1, 2, vec![1.0, 0.0]);
        let rec = dofw_round(&mut state, a.matrix(1), &stream, 1, 1.0, &set).unwrap();
        assert_eq!(rec.x_hat, vec![1.0, 0.0]);
        assert_eq!(rec.grad_hat, vec![1.0, -1.0]);
        assert_eq!(rec.v, vec![0.0, 1.0]);
        assert_eq!(state.decisions(), &[0.0, 1.0]);
    }

    #[test]
    fn dofw_round_validates_inputs() {
        let set = simplex(2);
        let stream = ConstGradStream::new(2, vec![1.0, -1.0], 10);
        let sched = generate_schedule::<f64>(2, 5, 1, 0, Topology::StaticComplete).unwrap();
        let mut state = DofwAgentState::new(2, 2, vec![1.0, 0.0, 1.0, 0.0]);
        assert!(dofw_round(&mut state, sched.matrix(1), &stream, 1, 0.0, &set).is_err());
        assert!(dofw_round(&mut state, sched.matrix(1), &stream, 1, 1.5, &set).is_err());
        // Round order is enforced (tracking memory would be missing at t=2).
        let err = dofw_round(&mut state, sched.matrix(2), &stream, 2, 0.5, &set);
        assert!(matches!(err, Err(Error::RoundOrder { expected: 1, got: 2 })));
    }

    /// By-hand execution of both engines for n = 2, d = 2, two rounds.
    /// All inputs are dyadic so every intermediate is exact in binary.
    mod hand_fixture {
        use super::*;
        use crate::network::MixingSchedule;

        fn fixture() -> (FeasibleSet<f64>, RidgeStream<f64>, MixingSchedule<f64>) {
            let set = simplex(2);
            // Agent 0: a = (1, 0), l = 0; agent 1: a = (0, 1), l = 0; both rounds.
            let features = vec![
                1.0, 0.0, 0.0, 1.0, // t = 1
                1.0, 0.0, 0.0, 1.0, // t = 2
            ];
            let labels = vec![0.0, 0.0, 0.0, 0.0];
            let stream = RidgeStream::from_parts(2, 2, 0.0, features, labels).unwrap();
            let a = Mixing::from_dense(2, vec![0.75, 0.25, 0.25, 0.75]);
            let schedule = MixingSchedule::from_matrices(
                2,
                1,
                0.25,
                Topology::StaticComplete,
                vec![a.clone(), a],
            );
            (set, stream, schedule)
        }

        #[test]
        fn dofw_two_rounds_match_hand_computation() {
            let (set, stream, schedule) = fixture();
            let mut state =
                DofwAgentState::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
            let r1 =
                dofw_round(&mut state, schedule.matrix(1), &stream, 1, 0.5, &set).unwrap();
            assert_eq!(r1.x_hat, vec![0.75, 0.25, 0.25, 0.75]);
            assert_eq!(r1.grads, vec![0.75, 0.0, 0.0, 0.75]);
            assert_eq!(r1.grad_bar, r1.grads);
            assert_eq!(r1.grad_hat, vec![0.5625, 0.1875, 0.1875, 0.5625]);
            assert_eq!(r1.v, vec![0.0, 1.0, 1.0, 0.0]);
            assert_eq!(r1.x_next, vec![0.375, 0.625, 0.625, 0.375]);

            let r2 =
                dofw_round(&mut state, schedule.matrix(2), &stream, 2, 0.5, &set).unwrap();
            assert_eq!(r2.x_hat, vec![0.4375, 0.5625, 0.5625, 0.4375]);
            assert_eq!(r2.grads, vec![0.4375, 0.0, 0.0, 0.4375]);
            assert_eq!(r2.grad_bar, vec![0.25, 0.1875, 0.1875, 0.25]);
            assert_eq!(r2.grad_hat, vec![0.234375, 0.203125, 0.203125, 0.234375]);
            assert_eq!(r2.v, vec![0.0, 1.0, 1.0, 0.0]);
            assert_eq!(r2.x_next, vec![0.21875, 0.78125, 0.78125, 0.21875]);
        }

        #[test]
        fn dogd_two_rounds_match_hand_computation() {
            let (set, stream, schedule) = fixture();
            let mut state =
                DogdAgentState::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
            let r1 = dogd_round(
                &mut state,
                schedule.matrix(1),
                &stream,
                1,
                0.5,
                &set,
                DogdGradientPoint::Mixed,
            )
            .unwrap();
            assert_eq!(r1.x_hat, vec![0.75, 0.25, 0.25, 0.75]);
            assert_eq!(r1.x_next, vec![0.5625, 0.4375, 0.4375, 0.5625]);

            let r2 = dogd_round(
                &mut state,
                schedule.matrix(2),
                &stream,
                2,
                0.5,
                &set,
                DogdGradientPoint::Mixed,
            )
            .unwrap();
            assert_eq!(r2.x_hat, vec![0.53125, 0.46875, 0.46875, 0.53125]);
            assert_eq!(r2.x_next, vec![0.3984375, 0.6015625, 0.6015625, 0.3984375]);
        }
    }

    #[test]
    fn dogd_zero_step_is_projected_consensus() {
        let set = simplex(3);
        let stream = ConstGradStream::new(1, vec![1.0, 2.0, 3.0], 5);
        let sched = generate_schedule::<f64>(1, 5, 1, 0, Topology::StaticComplete).unwrap();
        let mut state = DogdAgentState::new(1, 3, vec![0.2, 0.3, 0.5]);
        let rec = dogd_round(
            &mut state,
            sched.matrix(1),
            &stream,
            1,
            0.0,
            &set,
            DogdGradientPoint::Mixed,
        )
        .unwrap();
        assert_eq!(rec.x_next, vec![0.2, 0.3, 0.5]);
    }

    #[test]
    fn dogd_full_step_on_point_distance_reaches_target() {
        // f(x) = 0.5 ||x - c||^2 with feasible c and alpha = 1 lands on c.
        let set = simplex(2);
        let c = vec![0.25, 0.75];
        let stream = PointDistanceStream::new(1, c.clone(), 5);
        let sched = generate_schedule::<f64>(1, 5, 1, 0, Topology::StaticComplete).unwrap();
        let mut state = DogdAgentState::new(1, 2, vec![1.0, 0.0]);
        let rec = dogd_round(
            &mut state,
            sched.matrix(1),
            &stream,
            1,
            1.0,
            &set,
            DogdGradientPoint::Mixed,
        )
        .unwrap();
        for (got, want) in rec.x_next.iter().zip(&c) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_agents_on_complete_graph_stay_synchronized() {
        let set = simplex(3);
        let stream = ConstGradStream::new(4, vec![0.3, -0.2, 0.1], 6);
        let sched = generate_schedule::<f64>(4, 6, 1, 0, Topology::StaticComplete).unwrap();
        let spec = RunSpec::new(Algorithm::Dofw, StepSchedule::Constant(0.25), 6);
        let trace = run(&spec, &set, &sched, &stream).unwrap();
        for t in 1..=6 {
            let first = trace.mixed(0, t).unwrap();
            for i in 1..4 {
                assert_eq!(trace.mixed(i, t).unwrap(), first);
            }
        }
    }

    #[test]
    fn run_is_deterministic_and_complete() {
        let set = simplex(4);
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 11,
            ..RidgeConfig::new(3, 4, 12)
        })
        .unwrap();
        let sched = generate_schedule::<f64>(3, 12, 2, 5, Topology::CycleSplit).unwrap();
        let spec = RunSpec::new(
            Algorithm::Dofw,
            StepSchedule::Power { coeff: 0.25, exponent: 0.4 },
            12,
        );
        let t1 = run(&spec, &set, &sched, &stream).unwrap();
        let t2 = run(&spec, &set, &sched, &stream).unwrap();
        assert_eq!(t1.decisions(), t2.decisions());
        assert_eq!(t1.horizon(), 12);
        assert_eq!(t1.decisions().len(), 12 * 3 * 4);
        assert_eq!(t1.round_times_ns().len(), 12);

        let one_round = RunSpec { horizon: 1, ..spec };
        let t = run(&one_round, &set, &sched, &stream).unwrap();
        assert_eq!(t.horizon(), 1);
    }

    #[test]
    fn trace_feasibility_and_conservation_residuals() {
        let set = simplex(5);
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 21,
            ..RidgeConfig::new(4, 5, 40)
        })
        .unwrap();
        let sched = generate_schedule::<f64>(4, 40, 4, 9, Topology::RandomGossip).unwrap();
        let spec = RunSpec::new(Algorithm::Dofw, StepSchedule::Constant(0.1), 40);
        let trace = run(&spec, &set, &sched, &stream).unwrap();
        assert!(trace.feasibility_residual() <= 1e-10);
        assert!(trace.tracking_residual().unwrap() <= 1e-8);
    }

    #[test]
    fn average_dynamics_identity() {
        // x_avg advances by alpha * (v_avg - x_avg): double stochasticity
        // makes the mixed average equal the decision average.
        let set = simplex(4);
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 31,
            ..RidgeConfig::new(5, 4, 30)
        })
        .unwrap();
        let sched = generate_schedule::<f64>(5, 30, 4, 2, Topology::CycleSplit).unwrap();
        let alpha = 0.2;
        let spec = RunSpec::new(Algorithm::Dofw, StepSchedule::Constant(alpha), 30);
        let trace = run(&spec, &set, &sched, &stream).unwrap();
        let diag = trace.diagnostics().unwrap();
        let (n, d) = (5usize, 4usize);
        for t in 1..=29usize {
            for k in 0..d {
                let avg = |buf: &[f64], t: usize| {
                    (0..n).map(|i| buf[((t - 1) * n + i) * d + k]).sum::<f64>() / n as f64
                };
                let x_avg_t = avg(trace.decisions(), t);
                let x_avg_next = avg(trace.decisions(), t + 1);
                let v_avg_t = avg(&diag.v, t);
                let predicted = x_avg_t + alpha * (v_avg_t - x_avg_t);
                assert!((x_avg_next - predicted).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_agent_tracking_equals_local_gradient() {
        let set = simplex(3);
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 41,
            ..RidgeConfig::new(1, 3, 25)
        })
        .unwrap();
        let sched = generate_schedule::<f64>(1, 25, 1, 0, Topology::StaticComplete).unwrap();
        let spec = RunSpec::new(Algorithm::Dofw, StepSchedule::Constant(0.3), 25);
        let trace = run(&spec, &set, &sched, &stream).unwrap();
        let diag = trace.diagnostics().unwrap();
        for t in 1..=25usize {
            let lo = (t - 1) * 3;
            for k in 0..3 {
                let tracked = diag.grad_hat[lo + k];
                let local = trace.gradient(0, t).unwrap()[k];
                assert!((tracked - local).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn uniform_mixing_tracks_average_gradient() {
        let set = simplex(4);
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 51,
            ..RidgeConfig::new(6, 4, 20)
        })
        .unwrap();
        let sched = generate_schedule::<f64>(6, 20, 1, 0, Topology::StaticComplete).unwrap();
        let spec = RunSpec::new(Algorithm::Dofw, StepSchedule::Constant(0.2), 20);
        let trace = run(&spec, &set, &sched, &stream).unwrap();
        let diag = trace.diagnostics().unwrap();
        let (n, d) = (6usize, 4usize);
        for t in 1..=20usize {
            for k in 0..d {
                let avg_grad = (0..n)
                    .map(|i| trace.gradient(i, t).unwrap()[k])
                    .sum::<f64>()
                    / n as f64;
                for i in 0..n {
                    let tracked = diag.grad_hat[((t - 1) * n + i) * d + k];
                    assert!((tracked - avg_grad).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn agent_processing_order_does_not_change_the_round() {
        let set = simplex(3);
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 61,
            ..RidgeConfig::new(5, 3, 4)
        })
        .unwrap();
        let sched = generate_schedule::<f64>(5, 4, 4, 1, Topology::CycleSplit).unwrap();
        let state = DofwAgentState::new(5, 3, {
            let mut x = Vec::new();
            for _ in 0..5 {
                x.extend_from_slice(&[1.0, 0.0, 0.0]);
            }
            x
        });
        let natural: Vec<usize> = (0..5).collect();
        let permuted = vec![3usize, 0, 4, 1, 2];
        let mut s1 = Scratch::new(5, 3);
        let mut s2 = Scratch::new(5, 3);
        dofw_phases(&state, sched.matrix(1), &stream, 1, 0.5, &set, &mut s1, &natural)
            .unwrap();
        dofw_phases(&state, sched.matrix(1), &stream, 1, 0.5, &set, &mut s2, &permuted)
            .unwrap();
        assert_eq!(s1.x_next, s2.x_next);
        assert_eq!(s1.grad_hat, s2.grad_hat);
        assert_eq!(s1.v, s2.v);
    }

    #[test]
    fn both_engines_respect_non_simplex_sets() {
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 71,
            ..RidgeConfig::new(3, 4, 30)
        })
        .unwrap();
        let sched = generate_schedule::<f64>(3, 30, 2, 4, Topology::CycleSplit).unwrap();
        for set in [
            FeasibleSet::l1_ball(4, 1.5).unwrap(),
            FeasibleSet::boxed(4, -0.5, 0.75).unwrap(),
        ] {
            for algorithm in [Algorithm::Dofw, Algorithm::Dogd] {
                let spec = RunSpec::new(algorithm, StepSchedule::Constant(0.2), 30);
                let trace = run(&spec, &set, &sched, &stream).unwrap();
                assert!(trace.feasibility_residual() <= 1e-10, "{set:?} {algorithm:?}");
                if algorithm == Algorithm::Dofw {
                    assert!(trace.tracking_residual().unwrap() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn run_rejects_infeasible_start_and_short_inputs() {
        let set = simplex(2);
        let stream = ConstGradStream::new(2, vec![1.0, 0.0], 5);
        let sched = generate_schedule::<f64>(2, 5, 1, 0, Topology::StaticComplete).unwrap();
        let mut spec = RunSpec::new(Algorithm::Dofw, StepSchedule::Constant(0.5), 5);
        spec.x_init = XInit::PerAgent(vec![
            Point::new(vec![0.9, 0.3]),
            Point::new(vec![1.0, 0.0]),
        ]);
        assert!(run(&spec, &set, &sched, &stream).is_err());

        let long = RunSpec::new(Algorithm::Dofw, StepSchedule::Constant(0.5), 9);
        assert!(matches!(
            run(&long, &set, &sched, &stream),
            Err(Error::HorizonMismatch(_))
        ));
    }

    // Exercised here so the trait contract stays honest for non-quadratic
    // use: constants() is the only stream hook the engines never call.
    #[test]
    fn test_streams_report_constants() {
        let set = simplex(2);
        let c = ConstGradStream::new(1, vec![3.0, 4.0], 3);
        let LossConstants { l_x, g_x } = c.constants(&set).unwrap();
        assert_eq!(l_x, 5.0);
        assert_eq!(g_x, 0.0);
        let q = PointDistanceStream::new(1, vec![1.0, 0.0], 3);
        let qc = q.constants(&set).unwrap();
        assert!(qc.g_x >= 1.0);
        assert!(qc.l_x >= dot(&[1.0f64, 0.0], &[1.0, 0.0]).sqrt());
    }
}
