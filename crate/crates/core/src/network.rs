//! Time-varying communication networks: doubly stochastic mixing matrices,
//! joint-connectivity certification, transition matrices and their geometric
//! mixing constants.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::point::axpy;
use crate::scalar::{real, real_of, Scalar};

/// One round's mixing matrix. Dense storage plus per-row nonzero lists so
/// the consensus step costs O(nnz * d) rather than O(n^2 * d).
#[derive(Clone, Debug)]
pub struct Mixing<S> {
    n: usize,
    dense: Vec<S>,
    rows: Vec<Vec<(usize, S)>>,
}

impl<S: Scalar> Mixing<S> {
    pub fn from_dense(n: usize, dense: Vec<S>) -> Self {
        assert_eq!(dense.len(), n * n, "dense mixing matrix must be n*n");
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| dense[i * n + j] != S::zero())
                    .map(|j| (j, dense[i * n + j]))
                    .collect()
            })
            .collect();
        Mixing { n, dense, rows }
    }

    pub fn uniform(n: usize) -> Self {
        let w = S::one() / real_of(n);
        Mixing::from_dense(n, vec![w; n * n])
    }

    pub fn identity(n: usize) -> Self {
        let mut dense = vec![S::zero(); n * n];
        for i in 0..n {
            dense[i * n + i] = S::one();
        }
        Mixing::from_dense(n, dense)
    }

    /// Lazy pairwise gossip on the given edges (must form a matching):
    /// matched endpoints average each other, everyone else keeps their value.
    pub fn gossip_matching(n: usize, edges: &[(usize, usize)]) -> Self {
        let half = real::<S>(0.5);
        let mut dense = vec![S::zero(); n * n];
        for i in 0..n {
            dense[i * n + i] = S::one();
        }
        for &(u, v) in edges {
            debug_assert!(u != v && u < n && v < n);
            debug_assert_eq!(dense[u * n + u], S::one(), "edges must form a matching");
            debug_assert_eq!(dense[v * n + v], S::one(), "edges must form a matching");
            dense[u * n + u] = half;
            dense[v * n + v] = half;
            dense[u * n + v] = half;
            dense[v * n + u] = half;
        }
        Mixing::from_dense(n, dense)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> S {
        self.dense[i * self.n + j]
    }

    pub fn dense(&self) -> &[S] {
        &self.dense
    }

    /// `out_i = sum_j A_ij x_j` for stacked `d`-vectors, agents in row-major
    /// order. Only touches the nonzero pattern.
    pub fn mix_into(&self, stacked: &[S], d: usize, out: &mut [S]) {
        debug_assert_eq!(stacked.len(), self.n * d);
        debug_assert_eq!(out.len(), self.n * d);
        for i in 0..self.n {
            let (head, tail) = out.split_at_mut(i * d);
            let _ = head;
            self.mix_row_into(i, stacked, d, &mut tail[..d]);
        }
    }

    /// Row `i` of the consensus step: `out = sum_j A_ij x_j`.
    pub fn mix_row_into(&self, i: usize, stacked: &[S], d: usize, out: &mut [S]) {
        debug_assert_eq!(stacked.len(), self.n * d);
        debug_assert_eq!(out.len(), d);
        out.fill(S::zero());
        for &(j, w) in &self.rows[i] {
            axpy(out, w, &stacked[j * d..(j + 1) * d]);
        }
    }

    /// Dense product `self * other`.
    pub fn matmul(&self, other: &Mixing<S>) -> Mixing<S> {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut dense = vec![S::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.dense[i * n + k];
                if a == S::zero() {
                    continue;
                }
                for j in 0..n {
                    dense[i * n + j] = dense[i * n + j] + a * other.dense[k * n + j];
                }
            }
        }
        Mixing::from_dense(n, dense)
    }

    fn row_sum(&self, i: usize) -> S {
        (0..self.n).map(|j| self.entry(i, j)).sum()
    }

    fn col_sum(&self, j: usize) -> S {
        (0..self.n).map(|i| self.entry(i, j)).sum()
    }
}

/// Network generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Round t activates edge (t-1 mod n) of a fixed Hamiltonian cycle with
    /// lazy gossip weights; any window of n-1 consecutive rounds unions to a
    /// spanning path.
    CycleSplit,
    /// Random matching gossip per round; the tail of every Q-window is
    /// overwritten with a deterministic matching decomposition of the cycle
    /// so joint connectivity is guaranteed, not just likely.
    RandomGossip,
    /// Uniform averaging every round.
    StaticComplete,
}

impl Topology {
    pub fn as_str(&self) -> &'static str {
        match self {
            Topology::CycleSplit => "cycle_split",
            Topology::RandomGossip => "random_gossip",
            Topology::StaticComplete => "static_complete",
        }
    }
}

/// A sequence `A_1 .. A_T` of mixing matrices with its connectivity window
/// `Q` and the lower bound `zeta` on positive entries.
#[derive(Clone, Debug)]
pub struct MixingSchedule<S> {
    n: usize,
    q: usize,
    zeta: S,
    topology: Topology,
    matrices: Vec<Mixing<S>>,
}

impl<S: Scalar> MixingSchedule<S> {
    pub fn from_matrices(
        n: usize,
        q: usize,
        zeta: S,
        topology: Topology,
        matrices: Vec<Mixing<S>>,
    ) -> Self {
        MixingSchedule { n, q, zeta, topology, matrices }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Claimed lower bound on positive entries (certify with
    /// [`verify_assumption1`]).
    pub fn zeta(&self) -> S {
        self.zeta
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn horizon(&self) -> usize {
        self.matrices.len()
    }

    /// Mixing matrix of round `t` (1-based).
    pub fn matrix(&self, t: usize) -> &Mixing<S> {
        &self.matrices[t - 1]
    }

    pub fn matrices(&self) -> &[Mixing<S>] {
        &self.matrices
    }

    pub fn ergodicity_constants(&self) -> Result<ErgodicityConstants<S>, Error> {
        ErgodicityConstants::new(self.n, self.zeta, self.q)
    }
}

/// Geometric mixing constants of a schedule: products of its matrices
/// approach uniform averaging at rate `sigma` with prefactor `gamma_cap`.
#[derive(Clone, Copy, Debug)]
pub struct ErgodicityConstants<S> {
    pub sigma: S,
    pub gamma_cap: S,
}

impl<S: Scalar> ErgodicityConstants<S> {
    /// `sigma = (1 - zeta/(4 n^2))^(1/Q)`, `gamma_cap` the matching
    /// prefactor `(1 - zeta/(4 n^2))^((1-2Q)/Q)`.
    pub fn new(n: usize, zeta: S, q: usize) -> Result<Self, Error> {
        if q == 0 {
            return Err(Error::InvalidParameter("Q must be >= 1".into()));
        }
        let four_n2 = real::<S>(4.0) * real_of::<S>(n) * real_of::<S>(n);
        if !(zeta > S::zero()) || zeta >= four_n2 {
            return Err(Error::InvalidParameter(format!(
                "zeta must lie in (0, 4n^2); got {zeta}"
            )));
        }
        let base = S::one() - zeta / four_n2;
        let qs = real_of::<S>(q);
        let sigma = base.powf(S::one() / qs);
        let gamma_cap = base.powf((S::one() - real::<S>(2.0) * qs) / qs);
        if !sigma.is_finite() || !gamma_cap.is_finite() || sigma >= S::one() {
            return Err(Error::InvalidParameter(
                "degenerate ergodicity constants".into(),
            ));
        }
        Ok(ErgodicityConstants { sigma, gamma_cap })
    }
}

/// A single failed check of the mixing assumptions.
#[derive(Clone, Debug, PartialEq)]
pub enum AssumptionViolation {
    RowSum { t: usize, row: usize, sum: f64 },
    ColSum { t: usize, col: usize, sum: f64 },
    NegativeEntry { t: usize, row: usize, col: usize, value: f64 },
    ZeroDiagonal { t: usize, agent: usize },
    DisconnectedWindow { first_round: usize, last_round: usize },
}

impl std::fmt::Display for AssumptionViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AssumptionViolation::RowSum { t, row, sum } => {
                write!(f, "round {t}: row {row} sums to {sum}")
            }
            AssumptionViolation::ColSum { t, col, sum } => {
                write!(f, "round {t}: column {col} sums to {sum}")
            }
            AssumptionViolation::NegativeEntry { t, row, col, value } => {
                write!(f, "round {t}: entry ({row},{col}) = {value} is negative")
            }
            AssumptionViolation::ZeroDiagonal { t, agent } => {
                write!(f, "round {t}: agent {agent} has no self-loop")
            }
            AssumptionViolation::DisconnectedWindow { first_round, last_round } => {
                write!(f, "union over rounds {first_round}..={last_round} is not strongly connected")
            }
        }
    }
}

/// Result of certifying a schedule against the mixing assumptions.
#[derive(Clone, Debug)]
pub struct Assumption1Report<S> {
    pub ok: bool,
    /// Smallest positive entry across all rounds (the achievable `zeta`).
    pub zeta_observed: S,
    pub violations: Vec<AssumptionViolation>,
}

const STOCHASTICITY_TOL: f64 = 1e-12;

/// Checks double stochasticity, positive diagonals, nonnegativity and strong
/// connectivity of every complete Q-window union.
pub fn verify_assumption1<S: Scalar>(schedule: &MixingSchedule<S>) -> Assumption1Report<S> {
    let n = schedule.n();
    let tol = real::<S>(STOCHASTICITY_TOL);
    let mut violations = Vec::new();
    let mut zeta_observed = S::infinity();

    for t in 1..=schedule.horizon() {
        let a = schedule.matrix(t);
        for i in 0..n {
            let rs = a.row_sum(i);
            if (rs - S::one()).abs() > tol {
                violations.push(AssumptionViolation::RowSum {
                    t,
                    row: i,
                    sum: rs.to_f64().unwrap_or(f64::NAN),
                });
            }
            let cs = a.col_sum(i);
            if (cs - S::one()).abs() > tol {
                violations.push(AssumptionViolation::ColSum {
                    t,
                    col: i,
                    sum: cs.to_f64().unwrap_or(f64::NAN),
                });
            }
            if !(a.entry(i, i) > S::zero()) {
                violations.push(AssumptionViolation::ZeroDiagonal { t, agent: i });
            }
            for j in 0..n {
                let w = a.entry(i, j);
                if w < S::zero() {
                    violations.push(AssumptionViolation::NegativeEntry {
                        t,
                        row: i,
                        col: j,
                        value: w.to_f64().unwrap_or(f64::NAN),
                    });
                } else if w > S::zero() && w < zeta_observed {
                    zeta_observed = w;
                }
            }
        }
    }

    // Strong connectivity of each complete window [kQ+1, (k+1)Q].
    let q = schedule.q();
    let mut k = 0usize;
    while (k + 1) * q <= schedule.horizon() {
        let first_round = k * q + 1;
        let last_round = (k + 1) * q;
        let mut adj = vec![false; n * n];
        for t in first_round..=last_round {
            let a = schedule.matrix(t);
            for i in 0..n {
                for j in 0..n {
                    if a.entry(i, j) > S::zero() {
                        // A positive (i,j) entry means j -> i communication.
                        adj[j * n + i] = true;
                    }
                }
            }
        }
        if !strongly_connected(n, &adj) {
            violations.push(AssumptionViolation::DisconnectedWindow { first_round, last_round });
        }
        k += 1;
    }

    if !zeta_observed.is_finite() {
        zeta_observed = S::zero();
    }
    Assumption1Report { ok: violations.is_empty(), zeta_observed, violations }
}

/// BFS reachability from node 0 along `adj` and its reverse.
fn strongly_connected(n: usize, adj: &[bool]) -> bool {
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let edge = if forward { adj[u * n + v] } else { adj[v * n + u] };
                if edge && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Generates a schedule of `horizon` matrices satisfying the mixing
/// assumptions with window `q`. Deterministic in `seed`.
pub fn generate_schedule<S: Scalar>(
    n: usize,
    horizon: usize,
    q: usize,
    seed: u64,
    topology: Topology,
) -> Result<MixingSchedule<S>, Error> {
    if n == 0 || horizon == 0 || q == 0 {
        return Err(Error::InvalidParameter(
            "schedule needs n >= 1, horizon >= 1, Q >= 1".into(),
        ));
    }
    if n == 1 {
        let ms = vec![Mixing::identity(1); horizon];
        return Ok(MixingSchedule::from_matrices(1, q, S::one(), topology, ms));
    }

    let half = real::<S>(0.5);
    let matrices: Vec<Mixing<S>> = match topology {
        Topology::StaticComplete => vec![Mixing::uniform(n); horizon],
        Topology::CycleSplit => {
            let edges = cycle_edges(n);
            let needed = n - 1;
            if q < needed {
                return Err(Error::InfeasibleSchedule(format!(
                    "cycle_split on {n} agents activates one edge per round, so a window of \
                     Q = {q} rounds cannot be strongly connected; need Q >= {needed}"
                )));
            }
            (1..=horizon)
                .map(|t| Mixing::gossip_matching(n, &[edges[(t - 1) % edges.len()]]))
                .collect()
        }
        Topology::RandomGossip => {
            let fallback = cycle_matchings(n);
            if q < fallback.len() {
                return Err(Error::InfeasibleSchedule(format!(
                    "random_gossip on {n} agents needs Q >= {} fallback sub-rounds per window \
                     to keep every window's union strongly connected, got {q}",
                    fallback.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut nodes: Vec<usize> = (0..n).collect();
            (1..=horizon)
                .map(|t| {
                    let pos = (t - 1) % q;
                    // Deterministic tail of each window guarantees coverage.
                    if pos >= q - fallback.len() {
                        let idx = pos - (q - fallback.len());
                        Mixing::gossip_matching(n, &fallback[idx])
                    } else {
                        nodes.shuffle(&mut rng);
                        let edges: Vec<(usize, usize)> =
                            nodes.chunks_exact(2).map(|p| (p[0], p[1])).collect();
                        Mixing::gossip_matching(n, &edges)
                    }
                })
                .collect()
        }
    };

    let zeta = match topology {
        Topology::StaticComplete => S::one() / real_of(n),
        _ => half,
    };
    Ok(MixingSchedule::from_matrices(n, q, zeta, topology, matrices))
}

/// Undirected Hamiltonian cycle edge list (deduplicated for n = 2).
fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    (0..n).map(|k| (k, (k + 1) % n)).collect()
}

/// Partition of the cycle's edges into matchings: 1 for n = 2, 2 for even n,
/// 3 for odd n.
fn cycle_matchings(n: usize) -> Vec<Vec<(usize, usize)>> {
    let edges = cycle_edges(n);
    if n == 2 {
        return vec![edges];
    }
    if n.is_multiple_of(2) {
        let even = edges.iter().copied().step_by(2).collect();
        let odd = edges.iter().copied().skip(1).step_by(2).collect();
        vec![even, odd]
    } else {
        // Odd cycle: edges 0..n-1 alternate into two matchings, the closing
        // edge (n-1, 0) shares endpoints with both and goes alone.
        let even = edges[..n - 1].iter().copied().step_by(2).collect();
        let odd = edges[..n - 1].iter().copied().skip(1).step_by(2).collect();
        vec![even, odd, vec![edges[n - 1]]]
    }
}

/// Transition matrix `Phi(t, s0) = A_t A_{t-1} ... A_{s0}` (1-based rounds).
pub fn transition_matrix<S: Scalar>(
    schedule: &MixingSchedule<S>,
    t: usize,
    s0: usize,
) -> Result<Mixing<S>, Error> {
    if s0 == 0 || s0 > t {
        return Err(Error::IndexOutOfRange {
            context: "transition matrix needs 1 <= s0 <= t",
            got: s0,
            limit: t,
        });
    }
    if t > schedule.horizon() {
        return Err(Error::IndexOutOfRange {
            context: "transition matrix round past horizon",
            got: t,
            limit: schedule.horizon(),
        });
    }
    let mut product = schedule.matrix(s0).clone();
    for tau in s0 + 1..=t {
        product = schedule.matrix(tau).matmul(&product);
    }
    Ok(product)
}

/// Empirical check of the geometric mixing bound
/// `|[Phi(t,s)]_ij - 1/n| <= gamma_cap * sigma^(t-s)` over all start rounds
/// and lags up to `max_lag`.
#[derive(Clone, Debug)]
pub struct ErgodicityReport<S> {
    pub ok: bool,
    /// Largest observed LHS/RHS ratio (<= 1 means the bound holds).
    pub max_ratio: S,
    /// `(t, s0)` attaining the worst ratio.
    pub worst_pair: Option<(usize, usize)>,
}

pub fn check_ergodicity_bound<S: Scalar>(
    schedule: &MixingSchedule<S>,
    max_lag: usize,
) -> Result<ErgodicityReport<S>, Error> {
    let report = verify_assumption1(schedule);
    if !report.ok {
        return Err(Error::InvalidSchedule(
            report
                .violations
                .first()
                .map(|v| v.to_string())
                .unwrap_or_else(|| "unknown violation".into()),
        ));
    }
    let n = schedule.n();
    let constants = ErgodicityConstants::new(n, report.zeta_observed, schedule.q())?;
    let inv_n = S::one() / real_of::<S>(n);

    let mut max_ratio = S::zero();
    let mut worst_pair = None;
    for s0 in 1..=schedule.horizon() {
        let mut product = schedule.matrix(s0).clone();
        let mut bound = constants.gamma_cap; // lag 0
        for t in s0..=schedule.horizon().min(s0 + max_lag) {
            if t > s0 {
                product = schedule.matrix(t).matmul(&product);
                bound = bound * constants.sigma;
            }
            let mut worst_entry = S::zero();
            for &w in product.dense() {
                worst_entry = worst_entry.max((w - inv_n).abs());
            }
            let ratio = worst_entry / bound;
            if ratio > max_ratio {
                max_ratio = ratio;
                worst_pair = Some((t, s0));
            }
        }
    }
    Ok(ErgodicityReport { ok: max_ratio <= S::one(), max_ratio, worst_pair })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_agent_schedule_is_trivial() {
        let s = generate_schedule::<f64>(1, 5, 1, 0, Topology::CycleSplit).unwrap();
        assert_eq!(s.horizon(), 5);
        assert_eq!(s.matrix(1).entry(0, 0), 1.0);
        assert!(verify_assumption1(&s).ok);
    }

    #[test]
    fn static_complete_is_uniform_and_certified() {
        let s = generate_schedule::<f64>(4, 6, 1, 0, Topology::StaticComplete).unwrap();
        for t in 1..=6 {
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(s.matrix(t).entry(i, j), 0.25);
                }
            }
        }
        let report = verify_assumption1(&s);
        assert!(report.ok);
        assert_eq!(report.zeta_observed, 0.25);
    }

    #[test]
    fn cycle_split_union_is_strongly_connected() {
        // Brute-force reachability over each window union is exercised by the
        // verifier itself; this pins the example n=5, Q=5.
        let s = generate_schedule::<f64>(5, 25, 5, 0, Topology::CycleSplit).unwrap();
        let report = verify_assumption1(&s);
        assert!(report.ok, "{:?}", report.violations);
        assert_eq!(report.zeta_observed, 0.5);
    }

    #[test]
    fn cycle_split_rejects_small_q() {
        let err = generate_schedule::<f64>(6, 10, 3, 0, Topology::CycleSplit);
        assert!(matches!(err, Err(Error::InfeasibleSchedule(_))));
    }

    #[test]
    fn tampered_row_is_reported() {
        let mut s = generate_schedule::<f64>(3, 4, 2, 0, Topology::CycleSplit).unwrap();
        let mut dense = s.matrices()[1].dense().to_vec();
        dense[0] -= 0.1; // row 0 now sums to 0.9
        let tampered = Mixing::from_dense(3, dense);
        let mut ms = s.matrices().to_vec();
        ms[1] = tampered;
        s = MixingSchedule::from_matrices(3, 2, 0.5, Topology::CycleSplit, ms);
        let report = verify_assumption1(&s);
        assert!(!report.ok);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, AssumptionViolation::RowSum { t: 2, row: 0, .. })));
    }

    #[test]
    fn random_gossip_certifies_across_sizes() {
        for n in [2usize, 3, 4, 5, 8] {
            let q = cycle_matchings(n).len().max(3);
            let s = generate_schedule::<f64>(n, 3 * q, q, 7, Topology::RandomGossip).unwrap();
            let report = verify_assumption1(&s);
            assert!(report.ok, "n={n}: {:?}", report.violations);
        }
    }

    #[test]
    fn schedules_are_seed_deterministic() {
        let a = generate_schedule::<f64>(6, 30, 5, 99, Topology::RandomGossip).unwrap();
        let b = generate_schedule::<f64>(6, 30, 5, 99, Topology::RandomGossip).unwrap();
        for t in 1..=30 {
            assert_eq!(a.matrix(t).dense(), b.matrix(t).dense());
        }
        let c = generate_schedule::<f64>(6, 30, 5, 100, Topology::RandomGossip).unwrap();
        let differs = (1..=30).any(|t| a.matrix(t).dense() != c.matrix(t).dense());
        assert!(differs);
    }

    #[test]
    fn transition_matrix_matches_hand_product() {
        let s = generate_schedule::<f64>(3, 3, 2, 0, Topology::CycleSplit).unwrap();
        // Independent full-precision multiplication of the three factors.
        let (a1, a2, a3) = (s.matrix(1), s.matrix(2), s.matrix(3));
        let mut expected = vec![0.0f64; 9];
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        acc += a3.entry(i, k) * a2.entry(k, l) * a1.entry(l, j);
                    }
                }
                expected[i * 3 + j] = acc;
            }
        }
        let phi = transition_matrix(&s, 3, 1).unwrap();
        for (got, want) in phi.dense().iter().zip(&expected) {
            assert!((got - want).abs() < 1e-15);
        }
        // Single factor case.
        let phi1 = transition_matrix(&s, 2, 2).unwrap();
        assert_eq!(phi1.dense(), s.matrix(2).dense());
    }

    #[test]
    fn transition_matrix_stays_doubly_stochastic() {
        let s = generate_schedule::<f64>(5, 40, 5, 3, Topology::RandomGossip).unwrap();
        for (t, s0) in [(1, 1), (10, 1), (40, 17), (33, 30)] {
            let phi = transition_matrix(&s, t, s0).unwrap();
            for i in 0..5 {
                assert!((phi.row_sum(i) - 1.0).abs() < 1e-10);
                assert!((phi.col_sum(i) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn transition_matrix_bounds_checked() {
        let s = generate_schedule::<f64>(3, 4, 2, 0, Topology::CycleSplit).unwrap();
        assert!(transition_matrix(&s, 5, 1).is_err());
        assert!(transition_matrix(&s, 2, 3).is_err());
        assert!(transition_matrix(&s, 2, 0).is_err());
    }

    #[test]
    fn static_complete_transition_is_uniform() {
        let s = generate_schedule::<f64>(4, 10, 1, 0, Topology::StaticComplete).unwrap();
        let phi = transition_matrix(&s, 7, 2).unwrap();
        for &w in phi.dense() {
            assert!((w - 0.25).abs() < 1e-14);
        }
    }

    #[test]
    fn ergodicity_bound_trivial_cases() {
        let s1 = generate_schedule::<f64>(1, 10, 1, 0, Topology::StaticComplete).unwrap();
        let r1 = check_ergodicity_bound(&s1, 5).unwrap();
        assert!(r1.ok);
        assert_eq!(r1.max_ratio, 0.0);

        let s = generate_schedule::<f64>(4, 20, 1, 0, Topology::StaticComplete).unwrap();
        let r = check_ergodicity_bound(&s, 10).unwrap();
        assert!(r.ok);
        assert_eq!(r.max_ratio, 0.0);
    }

    #[test]
    fn ergodicity_bound_cycle_split_exhaustive() {
        let s = generate_schedule::<f64>(5, 60, 5, 0, Topology::CycleSplit).unwrap();
        let r = check_ergodicity_bound(&s, 50).unwrap();
        assert!(r.ok, "max ratio {} at {:?}", r.max_ratio, r.worst_pair);
    }

    #[test]
    fn ergodicity_bound_holds_for_every_certified_schedule() {
        // Every (topology, n, Q) the generators accept with n up to 20 and
        // Q in {1, 2, 5}.
        let mut cases = Vec::new();
        for n in [2usize, 3, 5, 8, 20] {
            for q in [1usize, 2, 5] {
                for topology in
                    [Topology::StaticComplete, Topology::CycleSplit, Topology::RandomGossip]
                {
                    cases.push((topology, n, q));
                }
            }
        }
        let mut checked = 0;
        for (topology, n, q) in cases {
            let schedule = match generate_schedule::<f64>(n, 45, q, 31, topology) {
                Ok(s) => s,
                Err(Error::InfeasibleSchedule(_)) => continue,
                Err(e) => panic!("{topology:?} n={n} Q={q}: {e}"),
            };
            assert!(verify_assumption1(&schedule).ok, "{topology:?} n={n} Q={q}");
            let r = check_ergodicity_bound(&schedule, 30).unwrap();
            assert!(
                r.ok,
                "{topology:?} n={n} Q={q}: ratio {} at {:?}",
                r.max_ratio, r.worst_pair
            );
            checked += 1;
        }
        assert!(checked >= 20, "only {checked} feasible combinations exercised");
    }

    #[test]
    fn ergodicity_constants_match_direct_substitution() {
        let c = ErgodicityConstants::new(1, 1.0f64, 1).unwrap();
        assert!((c.sigma - 0.75).abs() < 1e-15);
        assert!((c.gamma_cap - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ergodicity_rejects_uncertified_schedule() {
        let bad = MixingSchedule::from_matrices(
            2,
            1,
            0.5,
            Topology::StaticComplete,
            vec![Mixing::from_dense(2, vec![1.0, 0.0, 1.0, 0.0])],
        );
        assert!(matches!(
            check_ergodicity_bound(&bad, 5),
            Err(Error::InvalidSchedule(_))
        ));
    }
}
