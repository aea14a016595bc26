//! Measurement machinery: per-round comparators, dynamic regret, variation
//! budgets, the a-priori regret bound with its network constants, consensus
//! diagnostics and the cumulative inequality checks built from them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algorithms::RunTrace;
use crate::error::Error;
use crate::feasible::FeasibleSet;
use crate::losses::LossStream;
use crate::network::ErgodicityConstants;
use crate::point::{dist, dot, norm, Point};
use crate::scalar::{real, real_of, Scalar};

/// `F_t(x) = sum_i f_{i,t}(x)`.
pub fn total_value<S: Scalar, L: LossStream<S> + ?Sized>(stream: &L, t: usize, x: &[S]) -> S {
    (0..stream.agents()).map(|i| stream.value(i, t, x)).sum()
}

fn total_gradient_into<S: Scalar, L: LossStream<S> + ?Sized>(
    stream: &L,
    t: usize,
    x: &[S],
    scratch: &mut [S],
    out: &mut [S],
) {
    out.fill(S::zero());
    for i in 0..stream.agents() {
        stream.gradient_into(i, t, x, scratch);
        for (o, &s) in out.iter_mut().zip(scratch.iter()) {
            *o = *o + s;
        }
    }
}

/// A solved per-round comparator.
#[derive(Clone, Debug)]
pub struct RoundOptimum<S> {
    pub x_star: Point<S>,
    pub f_star: S,
    /// Final Frank-Wolfe gap; certifies `F(x_star) - F* <= fw_gap`.
    pub fw_gap: S,
    pub iterations: usize,
}

/// Hard ceiling on comparator iterations; the nominal cap `10 d / tol` is
/// astronomically loose and a solve that "needs" more than this is stuck.
const COMPARATOR_ITER_CEILING: usize = 20_000_000;

/// Iterations without halving the best gap before a solve counts as stalled.
const STALL_WINDOW: usize = 200_000;

/// Minimizes `F_t` over the set with the conditional-gradient method and
/// exact line search (the one extra function evaluation recovers the exact
/// curvature along the segment because the streams are quadratic).
///
/// Stops when the Frank-Wolfe gap drops to `tol`, which certifies the
/// result. `start` warm-starts the solve; the set's center is used
/// otherwise.
pub fn per_round_optimum<S: Scalar, L: LossStream<S> + ?Sized>(
    stream: &L,
    t: usize,
    set: &FeasibleSet<S>,
    tol: S,
    start: Option<&[S]>,
) -> Result<RoundOptimum<S>, Error> {
    if !(tol > S::zero()) {
        return Err(Error::InvalidParameter("comparator tolerance must be > 0".into()));
    }
    let d = set.dim();
    if stream.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: stream.dim() });
    }
    let mut x: Vec<S> = match start {
        Some(s) => {
            let mut p = vec![S::zero(); d];
            set.project_into(s, &mut p)?;
            p
        }
        None => set.center().into_vec(),
    };
    let mut g = vec![S::zero(); d];
    let mut scratch = vec![S::zero(); d];
    let mut v = vec![S::zero(); d];

    let tol_f = tol.to_f64().unwrap_or(f64::MIN_POSITIVE);
    let cap = ((10.0 * d as f64 / tol_f).ceil() as usize).min(COMPARATOR_ITER_CEILING);

    let mut fx = total_value(stream, t, &x);
    let mut gap = S::zero();
    // Stall detection: near-singular instances can make the gap plateau just
    // above the tolerance; bail out instead of spinning to the cap.
    let mut best_gap = S::infinity();
    let mut last_improvement = 0usize;
    let half = real::<S>(0.5);
    for iter in 0..cap {
        total_gradient_into(stream, t, &x, &mut scratch, &mut g);
        set.lmo_into(&g, &mut v)?;
        gap = dot(&g, &x) - dot(&g, &v);
        if gap <= tol {
            let f_star = total_value(stream, t, &x);
            return Ok(RoundOptimum { x_star: Point::new(x), f_star, fw_gap: gap, iterations: iter });
        }
        if gap < best_gap * half {
            best_gap = gap;
            last_improvement = iter;
        }
        if iter - last_improvement > STALL_WINDOW {
            return Err(Error::NonConvergence {
                tol: tol_f,
                gap: best_gap.to_f64().unwrap_or(f64::NAN),
                iterations: iter,
            });
        }
        let fv = total_value(stream, t, &v);
        let curvature = real::<S>(2.0) * (fv - fx + gap);
        let step = if curvature > S::zero() {
            (gap / curvature).min(S::one())
        } else {
            S::one()
        };
        for (xk, &vk) in x.iter_mut().zip(&v) {
            *xk = *xk + step * (vk - *xk);
        }
        if iter % 64 == 63 {
            fx = total_value(stream, t, &x);
        } else {
            fx = fx - step * gap
                + real::<S>(0.5) * step * step * curvature.max(S::zero());
        }
    }
    Err(Error::NonConvergence {
        tol: tol_f,
        gap: gap.to_f64().unwrap_or(f64::NAN),
        iterations: cap,
    })
}

/// Comparator trajectory `x_t*` with certified objective values.
#[derive(Clone, Debug)]
pub struct ComparatorSeries<S> {
    dim: usize,
    x_star: Vec<S>,
    f_star: Vec<S>,
    gaps: Vec<S>,
    pub tol: S,
}

impl<S: Scalar> ComparatorSeries<S> {
    /// Solves every round independently (parallel, started from the set
    /// center).
    pub fn compute<L: LossStream<S> + ?Sized>(
        stream: &L,
        set: &FeasibleSet<S>,
        horizon: usize,
        tol: S,
    ) -> Result<Self, Error> {
        if horizon > stream.max_round() {
            return Err(Error::HorizonMismatch(format!(
                "comparators for {horizon} rounds, stream has {}",
                stream.max_round()
            )));
        }
        let solved: Result<Vec<RoundOptimum<S>>, Error> = (1..=horizon)
            .into_par_iter()
            .map(|t| per_round_optimum(stream, t, set, tol, None))
            .collect();
        Self::assemble(set.dim(), solved?, tol)
    }

    /// Solves rounds in order, warm-starting each from the previous
    /// optimum. Much faster when consecutive losses are close (or equal).
    /// A warm start sitting on the wrong low-dimensional face can stall the
    /// conditional-gradient iteration, so a stalled solve retries cold from
    /// the set center before giving up.
    pub fn compute_warm_started<L: LossStream<S> + ?Sized>(
        stream: &L,
        set: &FeasibleSet<S>,
        horizon: usize,
        tol: S,
    ) -> Result<Self, Error> {
        if horizon > stream.max_round() {
            return Err(Error::HorizonMismatch(format!(
                "comparators for {horizon} rounds, stream has {}",
                stream.max_round()
            )));
        }
        let mut solved = Vec::with_capacity(horizon);
        let mut prev: Option<Vec<S>> = None;
        for t in 1..=horizon {
            let opt = match per_round_optimum(stream, t, set, tol, prev.as_deref()) {
                Err(Error::NonConvergence { .. }) if prev.is_some() => {
                    per_round_optimum(stream, t, set, tol, None)?
                }
                other => other?,
            };
            prev = Some(opt.x_star.as_slice().to_vec());
            solved.push(opt);
        }
        Self::assemble(set.dim(), solved, tol)
    }

    fn assemble(dim: usize, solved: Vec<RoundOptimum<S>>, tol: S) -> Result<Self, Error> {
        let horizon = solved.len();
        let mut x_star = Vec::with_capacity(horizon * dim);
        let mut f_star = Vec::with_capacity(horizon);
        let mut gaps = Vec::with_capacity(horizon);
        for opt in solved {
            x_star.extend_from_slice(opt.x_star.as_slice());
            f_star.push(opt.f_star);
            gaps.push(opt.fw_gap);
        }
        Ok(ComparatorSeries { dim, x_star, f_star, gaps, tol })
    }

    /// Builds a series from explicit per-round optima (fixtures, replays).
    pub fn from_parts(dim: usize, x_star: Vec<S>, f_star: Vec<S>, tol: S) -> Self {
        assert_eq!(x_star.len(), f_star.len() * dim);
        let gaps = vec![S::zero(); f_star.len()];
        ComparatorSeries { dim, x_star, f_star, gaps, tol }
    }

    pub fn horizon(&self) -> usize {
        self.f_star.len()
    }

    pub fn x_star(&self, t: usize) -> &[S] {
        &self.x_star[(t - 1) * self.dim..t * self.dim]
    }

    pub fn f_star(&self, t: usize) -> S {
        self.f_star[t - 1]
    }

    pub fn fw_gap(&self, t: usize) -> S {
        self.gaps[t - 1]
    }

    pub fn max_gap(&self) -> S {
        self.gaps.iter().copied().fold(S::zero(), S::max)
    }
}

/// Dynamic regret of every agent at every prefix, plus the normalized
/// envelopes, with optional budget and bound columns for export.
#[derive(Clone, Debug)]
pub struct RegretReport<S> {
    pub agents: usize,
    pub horizon: usize,
    /// Cumulative regret, round-major then agent-major.
    pub per_agent: Vec<S>,
    /// `(1/n) sum_j Regret_j(T') / T'`.
    pub avg_over_t: Vec<S>,
    /// `max_j Regret_j(T') / T'`.
    pub sup_over_t: Vec<S>,
    /// `min_j Regret_j(T') / T'`.
    pub inf_over_t: Vec<S>,
    pub h_cumulative: Option<Vec<S>>,
    pub d_cumulative: Option<Vec<S>>,
    pub bound_rhs: Option<Vec<S>>,
}

impl<S: Scalar> RegretReport<S> {
    pub fn cumulative(&self, agent: usize, t: usize) -> S {
        self.per_agent[(t - 1) * self.agents + agent]
    }

    pub fn final_avg_over_t(&self) -> S {
        *self.avg_over_t.last().expect("nonempty report")
    }

    pub fn attach_budgets(&mut self, ht: &VariationSeries<S>, dt: &VariationSeries<S>) {
        let take = |s: &VariationSeries<S>| {
            s.cumulative.iter().copied().take(self.horizon).collect::<Vec<_>>()
        };
        self.h_cumulative = Some(take(ht));
        self.d_cumulative = Some(take(dt));
    }

    /// Evaluates the regret bound at every prefix from the attached budget
    /// series.
    pub fn attach_bound(&mut self, bound: &RegretBound<S>) -> Result<(), Error> {
        let (h, d) = match (&self.h_cumulative, &self.d_cumulative) {
            (Some(h), Some(d)) => (h, d),
            _ => {
                return Err(Error::InvalidParameter(
                    "attach budgets before the bound".into(),
                ))
            }
        };
        let rhs = (1..=self.horizon)
            .map(|t| bound.rhs_at(t, h.get(t - 1).copied().unwrap_or(S::zero()),
                                  d.get(t - 1).copied().unwrap_or(S::zero())))
            .collect();
        self.bound_rhs = Some(rhs);
        Ok(())
    }
}

/// Charges each round's loss at the decision the agent actually played
/// (pre-mix) and subtracts the comparator's value.
pub fn dynamic_regret<S: Scalar, L: LossStream<S> + ?Sized>(
    trace: &RunTrace<S>,
    stream: &L,
    comparators: &ComparatorSeries<S>,
) -> Result<RegretReport<S>, Error> {
    let n = trace.agents();
    let horizon = trace.horizon();
    if stream.agents() != n {
        return Err(Error::DimensionMismatch { expected: n, got: stream.agents() });
    }
    if stream.dim() != trace.dim() {
        return Err(Error::DimensionMismatch { expected: trace.dim(), got: stream.dim() });
    }
    if comparators.horizon() < horizon || stream.max_round() < horizon {
        return Err(Error::HorizonMismatch(format!(
            "trace horizon {horizon} exceeds comparators ({}) or stream ({})",
            comparators.horizon(),
            stream.max_round()
        )));
    }

    let mut per_agent = Vec::with_capacity(horizon * n);
    let mut avg_over_t = Vec::with_capacity(horizon);
    let mut sup_over_t = Vec::with_capacity(horizon);
    let mut inf_over_t = Vec::with_capacity(horizon);
    let mut cum = vec![S::zero(); n];
    for t in 1..=horizon {
        let f_star = comparators.f_star(t);
        for (j, c) in cum.iter_mut().enumerate() {
            let f_jt = total_value(stream, t, trace.decision(j, t));
            *c = *c + (f_jt - f_star);
            per_agent.push(*c);
        }
        let t_s = real_of::<S>(t);
        let sum: S = cum.iter().copied().sum();
        avg_over_t.push(sum / real_of::<S>(n) / t_s);
        sup_over_t.push(cum.iter().copied().fold(S::neg_infinity(), S::max) / t_s);
        inf_over_t.push(cum.iter().copied().fold(S::infinity(), S::min) / t_s);
    }
    Ok(RegretReport {
        agents: n,
        horizon,
        per_agent,
        avg_over_t,
        sup_over_t,
        inf_over_t,
        h_cumulative: None,
        d_cumulative: None,
        bound_rhs: None,
    })
}

/// Per-round worst-case variation and its running sum.
#[derive(Clone, Debug)]
pub struct VariationSeries<S> {
    /// `sup_t` for t = 1..=horizon (each uses round t+1 data).
    pub per_round: Vec<S>,
    pub cumulative: Vec<S>,
    /// Whether the maximization was exact (vertex enumeration suffices) or
    /// a certified-lower / heuristic-upper estimate.
    pub exact: bool,
}

impl<S: Scalar> VariationSeries<S> {
    pub fn total(&self) -> S {
        self.cumulative.last().copied().unwrap_or(S::zero())
    }

    fn from_per_round(per_round: Vec<S>, exact: bool) -> Self {
        let mut cumulative = Vec::with_capacity(per_round.len());
        let mut acc = S::zero();
        for &v in &per_round {
            acc = acc + v;
            cumulative.push(acc);
        }
        VariationSeries { per_round, cumulative, exact }
    }
}

/// Knobs of the function-variation estimator.
#[derive(Clone, Copy, Debug)]
pub struct VariationOptions {
    /// Random restarts of the projected ascent per (agent, round, sign).
    pub starts: usize,
    /// Ascent iterations per start.
    pub iters: usize,
    pub seed: u64,
}

impl Default for VariationOptions {
    fn default() -> Self {
        VariationOptions { starts: 20, iters: 60, seed: 0xd0f3 }
    }
}

/// Function variation: per round, `max_i max_x |f_{i,t+1}(x) - f_{i,t}(x)|`.
///
/// The difference of two convex quadratics is indefinite, so the exact max
/// is out of reach in general: the estimate is the best of exact vertex
/// enumeration (a certified lower bound) and multi-start projected gradient
/// ascent on both signs of the difference.
pub fn variation_ht<S: Scalar, L: LossStream<S> + ?Sized>(
    stream: &L,
    set: &FeasibleSet<S>,
    horizon: usize,
    opts: &VariationOptions,
) -> Result<VariationSeries<S>, Error> {
    check_variation_inputs(stream, set, horizon)?;
    let vertices = set.vertices()?;
    let n = stream.agents();
    let d = set.dim();
    let per_round: Result<Vec<S>, Error> = (1..=horizon)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(opts.seed ^ (t as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let mut best_round = S::zero();
            let mut ga = vec![S::zero(); d];
            let mut gb = vec![S::zero(); d];
            for i in 0..n {
                let diff_value =
                    |x: &[S]| stream.value(i, t + 1, x) - stream.value(i, t, x);
                for v in &vertices {
                    best_round = best_round.max(diff_value(v.as_slice()).abs());
                }
                for sign in [S::one(), -S::one()] {
                    for _ in 0..opts.starts {
                        let start = set.sample(&mut rng);
                        let reached = projected_ascent(
                            set,
                            start.into_vec(),
                            |x| sign * diff_value(x),
                            |x, out| {
                                stream.gradient_into(i, t + 1, x, &mut ga);
                                stream.gradient_into(i, t, x, &mut gb);
                                for ((o, &a), &b) in out.iter_mut().zip(&ga).zip(&gb) {
                                    *o = sign * (a - b);
                                }
                            },
                            opts.iters,
                        )?;
                        best_round = best_round.max(reached.abs());
                    }
                }
            }
            Ok(best_round)
        })
        .collect();
    Ok(VariationSeries::from_per_round(per_round?, false))
}

/// Gradient variation: per round, `max_i max_x ||grad f_{i,t+1}(x) -
/// grad f_{i,t}(x)||`. The difference is affine in `x` for quadratic
/// streams, its norm convex, so vertex enumeration is exact.
pub fn variation_dt<S: Scalar, L: LossStream<S> + ?Sized>(
    stream: &L,
    set: &FeasibleSet<S>,
    horizon: usize,
) -> Result<VariationSeries<S>, Error> {
    check_variation_inputs(stream, set, horizon)?;
    let vertices = set.vertices()?;
    let n = stream.agents();
    let d = set.dim();
    let per_round: Vec<S> = (1..=horizon)
        .into_par_iter()
        .map(|t| {
            let mut ga = vec![S::zero(); d];
            let mut gb = vec![S::zero(); d];
            let mut best = S::zero();
            for i in 0..n {
                for v in &vertices {
                    stream.gradient_into(i, t + 1, v.as_slice(), &mut ga);
                    stream.gradient_into(i, t, v.as_slice(), &mut gb);
                    best = best.max(dist(&ga, &gb));
                }
            }
            best
        })
        .collect();
    Ok(VariationSeries::from_per_round(per_round, true))
}

fn check_variation_inputs<S: Scalar, L: LossStream<S> + ?Sized>(
    stream: &L,
    set: &FeasibleSet<S>,
    horizon: usize,
) -> Result<(), Error> {
    if set.dim() != stream.dim() {
        return Err(Error::DimensionMismatch { expected: stream.dim(), got: set.dim() });
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("variation horizon must be >= 1".into()));
    }
    if stream.max_round() != usize::MAX && horizon + 1 > stream.max_round() {
        return Err(Error::HorizonMismatch(format!(
            "variation over {horizon} rounds needs round {} data",
            horizon + 1
        )));
    }
    Ok(())
}

/// Projected gradient ascent with an adaptive step; returns the best
/// objective value reached.
fn projected_ascent<S: Scalar>(
    set: &FeasibleSet<S>,
    mut x: Vec<S>,
    value: impl Fn(&[S]) -> S,
    mut gradient: impl FnMut(&[S], &mut [S]),
    iters: usize,
) -> Result<S, Error> {
    let d = x.len();
    let mut g = vec![S::zero(); d];
    let mut proposal = vec![S::zero(); d];
    let mut candidate = vec![S::zero(); d];
    let mut fx = value(&x);
    let mut step = S::one();
    for _ in 0..iters {
        gradient(&x, &mut g);
        for ((p, &xk), &gk) in candidate.iter_mut().zip(&x).zip(&g) {
            *p = xk + step * gk;
        }
        set.project_into(&candidate, &mut proposal)?;
        let fp = value(&proposal);
        if fp > fx {
            std::mem::swap(&mut x, &mut proposal);
            fx = fp;
            step = step * real(1.5);
        } else {
            step = step * real(0.5);
            if step < real(1e-14) {
                break;
            }
        }
    }
    Ok(fx)
}

/// Inputs of the a-priori regret bound.
#[derive(Clone, Debug)]
pub struct BoundInputs<'a, S> {
    pub agents: usize,
    pub diameter: S,
    pub l_x: S,
    pub g_x: S,
    pub zeta: S,
    pub q: usize,
    pub alpha: S,
    pub horizon: usize,
    pub h_t: S,
    pub d_t: S,
    /// Initial decisions `x_{i,1}`.
    pub x_init: &'a [Point<S>],
    /// Gradients revealed at the first round's mixed points.
    pub grads_at_init: &'a [Point<S>],
}

/// The evaluated bound: network constants, the four structural constants,
/// and the right-hand side
/// `C1 + C2 alpha T + (2n/alpha) H_T + C3/alpha + C4 D_T`.
#[derive(Clone, Copy, Debug)]
pub struct RegretBound<S> {
    pub agents: usize,
    pub alpha: S,
    pub sigma: S,
    pub gamma_cap: S,
    pub c1: S,
    pub c2: S,
    pub c3: S,
    pub c4: S,
    pub rhs: S,
}

impl<S: Scalar> RegretBound<S> {
    /// Re-evaluates the right-hand side at a prefix with its measured
    /// budgets (the constants do not depend on the horizon).
    pub fn rhs_at(&self, horizon: usize, h_t: S, d_t: S) -> S {
        let n = real_of::<S>(self.agents);
        let t = real_of::<S>(horizon);
        self.c1
            + self.c2 * self.alpha * t
            + (real::<S>(2.0) * n / self.alpha) * h_t
            + self.c3 / self.alpha
            + self.c4 * d_t
    }
}

pub fn regret_bound<S: Scalar>(inputs: &BoundInputs<'_, S>) -> Result<RegretBound<S>, Error> {
    let BoundInputs {
        agents,
        diameter: m,
        l_x,
        g_x,
        zeta,
        q,
        alpha,
        horizon,
        h_t,
        d_t,
        x_init,
        grads_at_init,
    } = *inputs;
    if x_init.len() != agents || grads_at_init.len() != agents {
        return Err(Error::DimensionMismatch { expected: agents, got: x_init.len() });
    }
    if !(alpha > S::zero() && alpha <= S::one()) {
        return Err(Error::InvalidParameter(format!("alpha {alpha} outside (0, 1]")));
    }
    let ErgodicityConstants { sigma, gamma_cap } = ErgodicityConstants::new(agents, zeta, q)?;
    let n = real_of::<S>(agents);
    let d = x_init[0].dim();
    let mut avg = vec![S::zero(); d];
    for p in x_init {
        for (a, &c) in avg.iter_mut().zip(p.as_slice()) {
            *a = *a + c / n;
        }
    }
    let spread: S = x_init.iter().map(|p| dist(p.as_slice(), &avg)).sum();
    let init_norms: S = x_init.iter().map(|p| p.norm()).sum();
    let grad_norms: S = grads_at_init.iter().map(|p| p.norm()).sum();

    let two = real::<S>(2.0);
    let four = real::<S>(4.0);
    let mix = gamma_cap / (S::one() - sigma);
    let c1 = n * l_x * spread
        + two * m * n * mix * grad_norms
        + (n * l_x + two * m * g_x + four * m * n * mix * g_x) * (n * mix) * init_norms;
    let c2 = two * n * n * l_x * m
        + (four * m * g_x + n * l_x + four * m * n * mix * g_x) * (n * n * m * mix)
        + n * g_x * m * m / two;
    let c3 = n * l_x * m;
    let c4 = two * m * n * n * mix + n * m;

    let bound = RegretBound {
        agents,
        alpha,
        sigma,
        gamma_cap,
        c1,
        c2,
        c3,
        c4,
        rhs: S::zero(),
    };
    let rhs = bound.rhs_at(horizon, h_t, d_t);
    Ok(RegretBound { rhs, ..bound })
}

/// Per-round consensus quality of a full DOFW trace.
#[derive(Clone, Debug)]
pub struct DiagnosticsSeries<S> {
    /// `sum_i ||xhat_{i,t} - x_avg,t||`.
    pub consensus_err: Vec<S>,
    /// `sum_i ||ghat_{i,t} - (1/n) sum_j g_{j,t}||`.
    pub grad_consensus_err: Vec<S>,
    /// `sum_i ||g_{i,t} - g_{i,t-1}||` (zero at t = 1).
    pub delta_sum: Vec<S>,
    pub cum_consensus_err: Vec<S>,
    pub cum_grad_consensus_err: Vec<S>,
    pub cum_delta_sum: Vec<S>,
}

/// Extracts the three per-round deviation series the cumulative inequality
/// checks consume.
pub fn consensus_diagnostics<S: Scalar>(
    trace: &RunTrace<S>,
) -> Result<DiagnosticsSeries<S>, Error> {
    let diag = trace.diagnostics().ok_or(Error::MissingDiagnostics)?;
    let n = trace.agents();
    let d = trace.dim();
    let horizon = trace.horizon();
    let n_s = real_of::<S>(n);

    let mut consensus_err = Vec::with_capacity(horizon);
    let mut grad_consensus_err = Vec::with_capacity(horizon);
    let mut delta_sum = Vec::with_capacity(horizon);
    let mut x_avg = vec![S::zero(); d];
    let mut g_avg = vec![S::zero(); d];
    for t in 1..=horizon {
        x_avg.fill(S::zero());
        g_avg.fill(S::zero());
        for i in 0..n {
            let x = trace.decision(i, t);
            let g = trace.gradient(i, t).ok_or(Error::MissingDiagnostics)?;
            for k in 0..d {
                x_avg[k] = x_avg[k] + x[k] / n_s;
                g_avg[k] = g_avg[k] + g[k] / n_s;
            }
        }
        let mut cons = S::zero();
        let mut gcons = S::zero();
        let mut dsum = S::zero();
        for i in 0..n {
            let xhat = trace.mixed(i, t).ok_or(Error::MissingDiagnostics)?;
            cons = cons + dist(xhat, &x_avg);
            let lo = ((t - 1) * n + i) * d;
            gcons = gcons + dist(&diag.grad_hat[lo..lo + d], &g_avg);
            if t >= 2 {
                let g_now = trace.gradient(i, t).expect("checked above");
                let g_prev = trace.gradient(i, t - 1).expect("checked above");
                dsum = dsum + dist(g_now, g_prev);
            }
        }
        consensus_err.push(cons);
        grad_consensus_err.push(gcons);
        delta_sum.push(dsum);
    }

    let cumsum = |v: &[S]| {
        let mut acc = S::zero();
        v.iter()
            .map(|&x| {
                acc = acc + x;
                acc
            })
            .collect::<Vec<_>>()
    };
    Ok(DiagnosticsSeries {
        cum_consensus_err: cumsum(&consensus_err),
        cum_grad_consensus_err: cumsum(&grad_consensus_err),
        cum_delta_sum: cumsum(&delta_sum),
        consensus_err,
        grad_consensus_err,
        delta_sum,
    })
}

/// One cumulative inequality: measured left side against the closed-form
/// right side.
#[derive(Clone, Copy, Debug)]
pub struct LemmaCheck<S> {
    pub lhs: S,
    pub rhs: S,
    pub ok: bool,
}

impl<S: Scalar> LemmaCheck<S> {
    fn new(lhs: S, rhs: S) -> Self {
        LemmaCheck { lhs, rhs, ok: lhs <= rhs }
    }
}

/// The four cumulative inequalities a run must satisfy.
#[derive(Clone, Copy, Debug)]
pub struct LemmaChecks<S> {
    /// Consensus-error bound on `sum_t sum_i ||xhat - x_avg||`.
    pub consistency: LemmaCheck<S>,
    /// Gradient-difference accumulation bound on `sum_t sum_i ||delta||`.
    pub delta_sum: LemmaCheck<S>,
    /// Tracked-gradient deviation bound.
    pub grad_consensus: LemmaCheck<S>,
    /// Average-decision regret bound (needs comparators).
    pub average_regret: Option<LemmaCheck<S>>,
}

impl<S: Scalar> LemmaChecks<S> {
    pub fn all_ok(&self) -> bool {
        self.consistency.ok
            && self.delta_sum.ok
            && self.grad_consensus.ok
            && self.average_regret.map(|c| c.ok).unwrap_or(true)
    }
}

/// Everything the lemma right-hand sides need.
#[derive(Clone, Copy, Debug)]
pub struct LemmaInputs<S> {
    pub constants: ErgodicityConstants<S>,
    pub diameter: S,
    pub l_x: S,
    pub g_x: S,
    pub alpha: S,
    pub h_t: S,
    pub d_t: S,
}

pub fn lemma_checks<S: Scalar, L: LossStream<S> + ?Sized>(
    trace: &RunTrace<S>,
    stream: &L,
    diagnostics: &DiagnosticsSeries<S>,
    inputs: &LemmaInputs<S>,
    comparators: Option<&ComparatorSeries<S>>,
) -> Result<LemmaChecks<S>, Error> {
    let n_u = trace.agents();
    let horizon = trace.horizon();
    let n = real_of::<S>(n_u);
    let t_s = real_of::<S>(horizon);
    let LemmaInputs { constants, diameter: m, l_x, g_x, alpha, h_t, d_t } = *inputs;
    let mix = constants.gamma_cap / (S::one() - constants.sigma);
    let two = real::<S>(2.0);

    let init_norms: S = (0..n_u).map(|i| norm(trace.decision(i, 1))).sum();
    let init_grad_norms: S = (0..n_u)
        .map(|i| trace.gradient(i, 1).map(norm).ok_or(Error::MissingDiagnostics))
        .sum::<Result<S, Error>>()?;

    // Consensus error accumulation.
    let consistency_lhs = *diagnostics
        .cum_consensus_err
        .last()
        .ok_or(Error::MissingDiagnostics)?;
    let consistency_rhs = n * mix * init_norms + alpha * t_s * n * n * m * mix;

    // Gradient-difference accumulation; the consensus sum enters lagged by
    // one round.
    let delta_lhs = *diagnostics.cum_delta_sum.last().ok_or(Error::MissingDiagnostics)?;
    let lagged_consensus = if horizon >= 2 {
        diagnostics.cum_consensus_err[horizon - 2]
    } else {
        S::zero()
    };
    let delta_rhs = two * g_x * lagged_consensus + n * d_t + n * m * g_x * alpha * t_s;

    // Tracked-gradient deviation accumulation.
    let grad_lhs = *diagnostics
        .cum_grad_consensus_err
        .last()
        .ok_or(Error::MissingDiagnostics)?;
    let grad_rhs = n * mix * init_grad_norms + n * mix * delta_lhs;

    // Average-decision regret.
    let average_regret = match comparators {
        None => None,
        Some(comparators) => {
            if comparators.horizon() < horizon {
                return Err(Error::HorizonMismatch(format!(
                    "lemma checks need {horizon} comparators, got {}",
                    comparators.horizon()
                )));
            }
            let d = trace.dim();
            let mut x_avg = vec![S::zero(); d];
            let mut lhs = S::zero();
            for t in 1..=horizon {
                x_avg.fill(S::zero());
                for i in 0..n_u {
                    for (a, &c) in x_avg.iter_mut().zip(trace.decision(i, t)) {
                        *a = *a + c / n;
                    }
                }
                lhs = lhs + (total_value(stream, t, &x_avg) - comparators.f_star(t));
            }
            let pre = horizon.saturating_sub(1);
            let cons_prefix =
                if pre >= 1 { diagnostics.cum_consensus_err[pre - 1] } else { S::zero() };
            let gcons_prefix = if pre >= 1 {
                diagnostics.cum_grad_consensus_err[pre - 1]
            } else {
                S::zero()
            };
            let rhs = two * n / alpha * h_t
                + n * l_x * m / alpha
                + two * m * gcons_prefix
                + two * m * g_x * cons_prefix
                + n * g_x * m * m * alpha * t_s / two
                + n * m * d_t;
            Some(LemmaCheck::new(lhs, rhs))
        }
    };

    Ok(LemmaChecks {
        consistency: LemmaCheck::new(consistency_lhs, consistency_rhs),
        delta_sum: LemmaCheck::new(delta_lhs, delta_rhs),
        grad_consensus: LemmaCheck::new(grad_lhs, grad_rhs),
        average_regret,
    })
}

/// One aggregate row of the timing comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub algorithm: String,
    pub dim: usize,
    pub rounds: usize,
    pub mean_round_secs: f64,
    pub total_secs: f64,
}

pub fn timing_report<S: Scalar>(traces: &[&RunTrace<S>]) -> Vec<TimingRow> {
    traces
        .iter()
        .map(|t| TimingRow {
            algorithm: t.algorithm().as_str().to_string(),
            dim: t.dim(),
            rounds: t.horizon(),
            mean_round_secs: t.mean_round_secs(),
            total_secs: t.total_secs(),
        })
        .collect()
}
