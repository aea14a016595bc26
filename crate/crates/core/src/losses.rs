//! Online loss streams: the time-varying ridge-regression stream used in the
//! experiments and a time-invariant variant of it.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::feasible::FeasibleSet;
use crate::point::{dot, norm, Point};
use crate::scalar::{real, real_of, Scalar};

/// Per-agent, per-round convex losses revealed online.
///
/// Rounds are 1-based. `value`/`gradient_into` panic on an agent or round
/// index out of range; the data layout makes those logic errors, not
/// recoverable conditions.
pub trait LossStream<S: Scalar>: Send + Sync {
    fn agents(&self) -> usize;
    fn dim(&self) -> usize;
    /// Rounds a run is meant to use.
    fn horizon(&self) -> usize;
    /// Rounds with data available; variation budgets over `horizon` rounds
    /// need `horizon + 1`.
    fn max_round(&self) -> usize;
    fn value(&self, agent: usize, t: usize, x: &[S]) -> S;
    fn gradient_into(&self, agent: usize, t: usize, x: &[S], out: &mut [S]);

    fn gradient(&self, agent: usize, t: usize, x: &[S]) -> Point<S> {
        let mut out = vec![S::zero(); self.dim()];
        self.gradient_into(agent, t, x, &mut out);
        Point::new(out)
    }

    /// Valid Lipschitz bounds over the set: `l_x` for function values (and
    /// hence gradient norms) and `g_x` for gradients.
    fn constants(&self, set: &FeasibleSet<S>) -> Result<LossConstants<S>, Error>;
}

/// Lipschitz data of a stream over a compact set.
#[derive(Clone, Copy, Debug)]
pub struct LossConstants<S> {
    pub l_x: S,
    pub g_x: S,
}

/// Configuration for [`RidgeStream::generate`].
#[derive(Clone, Copy, Debug)]
pub struct RidgeConfig<S> {
    pub agents: usize,
    pub dim: usize,
    pub horizon: usize,
    pub lambda1: S,
    pub seed: u64,
    /// Draw features once and reuse them every round (labels still move).
    pub static_features: bool,
}

impl<S: Scalar> RidgeConfig<S> {
    pub fn new(agents: usize, dim: usize, horizon: usize) -> Self {
        RidgeConfig {
            agents,
            dim,
            horizon,
            lambda1: real(5e-6),
            seed: 0,
            static_features: false,
        }
    }
}

/// Fully materialized ridge-regression stream:
/// `f_{i,t}(x) = 0.5 (a_{i,t}^T x - l_{i,t})^2 + lambda1 ||x||^2`
/// with feature entries uniform in [-5, 5] and labels
/// `l_{i,t} = a_{i,t}^T x0 + 2 xi / (d sqrt(t))`, `x0` the uniform vector,
/// `xi` uniform in [0, 1].
#[derive(Clone, Debug)]
pub struct RidgeStream<S> {
    n: usize,
    d: usize,
    horizon: usize,
    rounds: usize,
    lambda1: S,
    features: Vec<S>,
    labels: Vec<S>,
}

impl<S: Scalar> RidgeStream<S> {
    /// Generates `horizon + 1` rounds of data (the extra round feeds the
    /// variation budgets). Deterministic in `seed`.
    pub fn generate(config: RidgeConfig<S>) -> Result<Self, Error> {
        let RidgeConfig { agents: n, dim: d, horizon, lambda1, seed, static_features } = config;
        if n == 0 || d == 0 || horizon == 0 {
            return Err(Error::InvalidParameter(
                "ridge stream needs agents, dim, horizon >= 1".into(),
            ));
        }
        if !(lambda1 >= S::zero()) || !lambda1.is_finite() {
            return Err(Error::InvalidParameter("lambda1 must be finite and >= 0".into()));
        }
        let rounds = horizon + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let feat_dist = Uniform::new_inclusive(real::<S>(-5.0), real::<S>(5.0))
            .expect("valid uniform range");
        let noise_dist =
            Uniform::new_inclusive(S::zero(), S::one()).expect("valid uniform range");

        let mut features = vec![S::zero(); rounds * n * d];
        let mut labels = vec![S::zero(); rounds * n];
        let x0 = S::one() / real_of::<S>(d);
        let two = real::<S>(2.0);
        for t in 1..=rounds {
            for i in 0..n {
                let base = ((t - 1) * n + i) * d;
                if static_features && t > 1 {
                    let src = i * d;
                    for k in 0..d {
                        features[base + k] = features[src + k];
                    }
                } else {
                    for k in 0..d {
                        features[base + k] = feat_dist.sample(&mut rng);
                    }
                }
                let mean: S = features[base..base + d].iter().copied().sum::<S>() * x0;
                let xi = noise_dist.sample(&mut rng);
                labels[(t - 1) * n + i] =
                    mean + two * xi / (real_of::<S>(d) * real_of::<S>(t).sqrt());
            }
        }
        Ok(RidgeStream { n, d, horizon, rounds, lambda1, features, labels })
    }

    /// Builds a stream from explicit data (CSV import, fixtures). The number
    /// of rounds is `features.len() / (agents * dim)`; all of them are
    /// usable as horizon.
    pub fn from_parts(
        agents: usize,
        dim: usize,
        lambda1: S,
        features: Vec<S>,
        labels: Vec<S>,
    ) -> Result<Self, Error> {
        if agents == 0 || dim == 0 {
            return Err(Error::InvalidParameter("agents and dim must be >= 1".into()));
        }
        let per_round = agents * dim;
        if features.is_empty() || !features.len().is_multiple_of(per_round) {
            return Err(Error::InvalidParameter(format!(
                "feature buffer length {} is not a positive multiple of agents*dim = {per_round}",
                features.len()
            )));
        }
        let rounds = features.len() / per_round;
        if labels.len() != rounds * agents {
            return Err(Error::InvalidParameter(format!(
                "label buffer length {} does not match {rounds} rounds x {agents} agents",
                labels.len()
            )));
        }
        if features.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "stream data" });
        }
        Ok(RidgeStream { n: agents, d: dim, horizon: rounds, rounds, lambda1, features, labels })
    }

    pub fn lambda1(&self) -> S {
        self.lambda1
    }

    pub fn feature(&self, agent: usize, t: usize) -> &[S] {
        self.check_index(agent, t);
        let base = ((t - 1) * self.n + agent) * self.d;
        &self.features[base..base + self.d]
    }

    pub fn label(&self, agent: usize, t: usize) -> S {
        self.check_index(agent, t);
        self.labels[(t - 1) * self.n + agent]
    }

    fn check_index(&self, agent: usize, t: usize) {
        assert!(agent < self.n, "agent {agent} out of range (n = {})", self.n);
        assert!(
            t >= 1 && t <= self.rounds,
            "round {t} out of range (1..={})",
            self.rounds
        );
    }
}

impl<S: Scalar> LossStream<S> for RidgeStream<S> {
    fn agents(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn max_round(&self) -> usize {
        self.rounds
    }

    fn value(&self, agent: usize, t: usize, x: &[S]) -> S {
        let a = self.feature(agent, t);
        debug_assert_eq!(x.len(), self.d);
        let r = dot(a, x) - self.label(agent, t);
        real::<S>(0.5) * r * r + self.lambda1 * dot(x, x)
    }

    fn gradient_into(&self, agent: usize, t: usize, x: &[S], out: &mut [S]) {
        let a = self.feature(agent, t);
        debug_assert_eq!(x.len(), self.d);
        debug_assert_eq!(out.len(), self.d);
        let r = dot(a, x) - self.label(agent, t);
        let two_lambda = self.lambda1 + self.lambda1;
        for ((o, &ak), &xk) in out.iter_mut().zip(a).zip(x) {
            *o = ak * r + two_lambda * xk;
        }
    }

    fn constants(&self, set: &FeasibleSet<S>) -> Result<LossConstants<S>, Error> {
        let l_x = vertex_gradient_max(self, set, self.rounds)?;
        // Hessian a a^T + 2 lambda I has spectral norm ||a||^2 + 2 lambda.
        let mut sq = S::zero();
        for t in 1..=self.rounds {
            for i in 0..self.n {
                let a = self.feature(i, t);
                sq = sq.max(dot(a, a));
            }
        }
        Ok(LossConstants { l_x, g_x: sq + self.lambda1 + self.lambda1 })
    }
}

/// `||grad f||` of an affine-gradient loss is convex, so its maximum over a
/// polytope sits on a vertex; enumerate them for an exact bound.
fn vertex_gradient_max<S: Scalar, L: LossStream<S> + ?Sized>(
    stream: &L,
    set: &FeasibleSet<S>,
    rounds: usize,
) -> Result<S, Error> {
    if set.dim() != stream.dim() {
        return Err(Error::DimensionMismatch { expected: stream.dim(), got: set.dim() });
    }
    let vertices = set.vertices()?;
    let mut l_x = S::zero();
    let mut grad = vec![S::zero(); stream.dim()];
    for t in 1..=rounds {
        for i in 0..stream.agents() {
            for v in &vertices {
                stream.gradient_into(i, t, v.as_slice(), &mut grad);
                l_x = l_x.max(norm(&grad));
            }
        }
    }
    Ok(l_x)
}

/// Time-invariant stream: one ridge round replayed forever.
#[derive(Clone, Debug)]
pub struct StaticStream<S> {
    n: usize,
    d: usize,
    horizon: usize,
    lambda1: S,
    features: Vec<S>,
    labels: Vec<S>,
}

impl<S: Scalar> StaticStream<S> {
    /// Freezes round `round` of a ridge stream.
    pub fn from_ridge_round(
        base: &RidgeStream<S>,
        round: usize,
        horizon: usize,
    ) -> Result<Self, Error> {
        if round == 0 || round > base.max_round() {
            return Err(Error::IndexOutOfRange {
                context: "static stream base round",
                got: round,
                limit: base.max_round(),
            });
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        let (n, d) = (base.agents(), base.dim());
        let mut features = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            features.extend_from_slice(base.feature(i, round));
            labels.push(base.label(i, round));
        }
        Ok(StaticStream { n, d, horizon, lambda1: base.lambda1(), features, labels })
    }

    pub fn feature(&self, agent: usize) -> &[S] {
        assert!(agent < self.n, "agent {agent} out of range (n = {})", self.n);
        &self.features[agent * self.d..(agent + 1) * self.d]
    }

    pub fn label(&self, agent: usize) -> S {
        assert!(agent < self.n, "agent {agent} out of range (n = {})", self.n);
        self.labels[agent]
    }

    pub fn lambda1(&self) -> S {
        self.lambda1
    }
}

impl<S: Scalar> LossStream<S> for StaticStream<S> {
    fn agents(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn max_round(&self) -> usize {
        usize::MAX
    }

    fn value(&self, agent: usize, t: usize, x: &[S]) -> S {
        assert!(t >= 1, "rounds are 1-based");
        let a = self.feature(agent);
        let r = dot(a, x) - self.label(agent);
        real::<S>(0.5) * r * r + self.lambda1 * dot(x, x)
    }

    fn gradient_into(&self, agent: usize, t: usize, x: &[S], out: &mut [S]) {
        assert!(t >= 1, "rounds are 1-based");
        let a = self.feature(agent);
        let r = dot(a, x) - self.label(agent);
        let two_lambda = self.lambda1 + self.lambda1;
        for ((o, &ak), &xk) in out.iter_mut().zip(a).zip(x) {
            *o = ak * r + two_lambda * xk;
        }
    }

    fn constants(&self, set: &FeasibleSet<S>) -> Result<LossConstants<S>, Error> {
        let l_x = vertex_gradient_max(self, set, 1)?;
        let mut sq = S::zero();
        for i in 0..self.n {
            let a = self.feature(i);
            sq = sq.max(dot(a, a));
        }
        Ok(LossConstants { l_x, g_x: sq + self.lambda1 + self.lambda1 })
    }
}

/// Stream dispatch for configuration-driven callers.
#[derive(Clone, Debug)]
pub enum AnyStream<S> {
    Ridge(RidgeStream<S>),
    Static(StaticStream<S>),
}

impl<S: Scalar> LossStream<S> for AnyStream<S> {
    fn agents(&self) -> usize {
        match self {
            AnyStream::Ridge(s) => s.agents(),
            AnyStream::Static(s) => s.agents(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            AnyStream::Ridge(s) => s.dim(),
            AnyStream::Static(s) => s.dim(),
        }
    }

    fn horizon(&self) -> usize {
        match self {
            AnyStream::Ridge(s) => s.horizon(),
            AnyStream::Static(s) => s.horizon(),
        }
    }

    fn max_round(&self) -> usize {
        match self {
            AnyStream::Ridge(s) => s.max_round(),
            AnyStream::Static(s) => s.max_round(),
        }
    }

    fn value(&self, agent: usize, t: usize, x: &[S]) -> S {
        match self {
            AnyStream::Ridge(s) => s.value(agent, t, x),
            AnyStream::Static(s) => s.value(agent, t, x),
        }
    }

    fn gradient_into(&self, agent: usize, t: usize, x: &[S], out: &mut [S]) {
        match self {
            AnyStream::Ridge(s) => s.gradient_into(agent, t, x, out),
            AnyStream::Static(s) => s.gradient_into(agent, t, x, out),
        }
    }

    fn constants(&self, set: &FeasibleSet<S>) -> Result<LossConstants<S>, Error> {
        match self {
            AnyStream::Ridge(s) => s.constants(set),
            AnyStream::Static(s) => s.constants(set),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn one_loss(features: Vec<f64>, label: f64, lambda1: f64) -> RidgeStream<f64> {
        let d = features.len();
        RidgeStream::from_parts(1, d, lambda1, features, vec![label]).unwrap()
    }

    #[test]
    fn value_examples() {
        let s = one_loss(vec![1.0, 0.0], 0.5, 0.0);
        assert_eq!(s.value(0, 1, &[0.5, 0.5]), 0.0);
        let reg = one_loss(vec![0.0, 0.0], 0.0, 1.0);
        assert_eq!(reg.value(0, 1, &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn value_matches_expanded_quadratic() {
        // Independent route: expand 0.5 (a.x)^2 - (a.x) l + 0.5 l^2 + lambda ||x||^2.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..=5.0)).collect();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let l: f64 = rng.random_range(-2.0..=2.0);
            let lambda = 0.37;
            let s = one_loss(a.clone(), l, lambda);
            let ax = dot(&a, &x);
            let expanded = 0.5 * ax * ax - ax * l + 0.5 * l * l + lambda * dot(&x, &x);
            assert!((s.value(0, 1, &x) - expanded).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_examples() {
        let s = one_loss(vec![1.0, 0.0], 0.0, 0.0);
        let g = s.gradient(0, 1, &[0.5, 0.5]);
        assert_eq!(g.as_slice(), &[0.5, 0.0]);
        // Residual zero gives a zero gradient.
        let z = one_loss(vec![2.0, 1.0], 2.5, 0.0);
        let g = z.gradient(0, 1, &[1.0, 0.5]);
        assert!(g.iter().all(|&c| c.abs() < 1e-15));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 5,
            ..RidgeConfig::new(3, 5, 20)
        })
        .unwrap();
        let h = 1e-5;
        for _ in 0..100 {
            let i = rng.random_range(0..3);
            let t = rng.random_range(1..=20);
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let g = stream.gradient(i, t, &x);
            let mut fd = vec![0.0; 5];
            for k in 0..5 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                fd[k] = (stream.value(i, t, &xp) - stream.value(i, t, &xm)) / (2.0 * h);
            }
            let err = crate::point::dist(g.as_slice(), &fd);
            assert!(err / g.norm().max(1.0) < 1e-6, "rel err {err}");
        }
    }

    #[test]
    fn generated_labels_follow_uniform_x0() {
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 42,
            ..RidgeConfig::new(20, 8, 10)
        })
        .unwrap();
        for t in 1..=11 {
            for i in 0..20 {
                let a = stream.feature(i, t);
                assert!(a.iter().all(|&c| (-5.0..=5.0).contains(&c)));
                let mean: f64 = a.iter().sum::<f64>() / 8.0;
                let noise = stream.label(i, t) - mean;
                let cap = 2.0 / (8.0 * (t as f64).sqrt());
                assert!(noise >= 0.0 && noise <= cap, "noise {noise} cap {cap}");
            }
        }
    }

    #[test]
    fn streams_are_seed_deterministic() {
        let cfg = RidgeConfig::<f64> { seed: 9, ..RidgeConfig::new(4, 6, 15) };
        let a = RidgeStream::generate(cfg).unwrap();
        let b = RidgeStream::generate(cfg).unwrap();
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
        let c = RidgeStream::generate(RidgeConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a.features, c.features);
    }

    #[test]
    fn static_features_reuses_round_one() {
        let cfg = RidgeConfig::<f64> {
            seed: 3,
            static_features: true,
            ..RidgeConfig::new(3, 4, 9)
        };
        let s = RidgeStream::generate(cfg).unwrap();
        for t in 2..=10 {
            for i in 0..3 {
                assert_eq!(s.feature(i, t), s.feature(i, 1));
            }
        }
    }

    #[test]
    fn lipschitz_constants_examples() {
        let set = FeasibleSet::simplex(2).unwrap();
        let s = one_loss(vec![1.0, 0.0], 0.0, 0.0);
        let c = s.constants(&set).unwrap();
        assert_eq!(c.g_x, 1.0);
        assert_eq!(c.l_x, 1.0);

        let zero = one_loss(vec![0.0, 0.0], 0.0, 0.0);
        let c = zero.constants(&set).unwrap();
        assert_eq!(c.l_x, 0.0);
        assert_eq!(c.g_x, 0.0);

        // The regularizer shifts the curvature bound by exactly 2 lambda.
        let lam = 0.25;
        let with_reg = one_loss(vec![3.0, -1.0], 0.7, lam);
        let without = one_loss(vec![3.0, -1.0], 0.7, 0.0);
        let cw = with_reg.constants(&set).unwrap();
        let co = without.constants(&set).unwrap();
        assert!((cw.g_x - (co.g_x + 2.0 * lam)).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_bounds_hold_on_random_pairs() {
        let set = FeasibleSet::<f64>::simplex(5).unwrap();
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 14,
            ..RidgeConfig::new(4, 5, 12)
        })
        .unwrap();
        let c = stream.constants(&set).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..500 {
            let i = rng.random_range(0..4);
            let t = rng.random_range(1..=13);
            let x = set.sample(&mut rng);
            let y = set.sample(&mut rng);
            let gx = stream.gradient(i, t, x.as_slice());
            let gy = stream.gradient(i, t, y.as_slice());
            assert!(gx.norm() <= c.l_x + 1e-10);
            assert!(gx.dist(&gy) <= c.g_x * x.dist(&y) + 1e-10);
        }
    }

    #[test]
    fn convexity_spot_check() {
        let set = FeasibleSet::simplex(6).unwrap();
        let stream = RidgeStream::generate(RidgeConfig {
            seed: 2,
            ..RidgeConfig::new(3, 6, 8)
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..300 {
            let i = rng.random_range(0..3);
            let t = rng.random_range(1..=9);
            let x = set.sample(&mut rng);
            let y = set.sample(&mut rng);
            let w: f64 = rng.random_range(0.0..=1.0);
            let mix: Vec<f64> = x
                .iter()
                .zip(y.iter())
                .map(|(&a, &b)| w * a + (1.0 - w) * b)
                .collect();
            let lhs = stream.value(i, t, &mix);
            let rhs = w * stream.value(i, t, x.as_slice())
                + (1.0 - w) * stream.value(i, t, y.as_slice());
            assert!(lhs <= rhs + 1e-12);
        }
    }

    #[test]
    fn static_stream_is_time_invariant() {
        let base = RidgeStream::generate(RidgeConfig {
            seed: 4,
            ..RidgeConfig::new(3, 4, 6)
        })
        .unwrap();
        let stat = StaticStream::from_ridge_round(&base, 2, 100).unwrap();
        let x = [0.25, 0.25, 0.25, 0.25];
        for i in 0..3 {
            let v1 = stat.value(i, 1, &x);
            let g1 = stat.gradient(i, 1, &x);
            for t in [2usize, 17, 100, 3000] {
                assert_eq!(stat.value(i, t, &x), v1);
                assert_eq!(stat.gradient(i, t, &x), g1);
            }
            assert_eq!(v1, base.value(i, 2, &x));
        }
    }
}
