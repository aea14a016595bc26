//! Compact convex constraint sets with the two primitives the algorithms
//! need: a linear minimization oracle (Frank-Wolfe) and a Euclidean
//! projection (gradient-descent baseline).

use rand::{Rng, RngExt};

use crate::error::Error;
use crate::point::Point;
use crate::scalar::{real, real_of, Scalar};

/// Supported constraint sets. All are convex, compact polytopes (the box is
/// axis-aligned with the same bounds in every coordinate).
#[derive(Clone, Debug, PartialEq)]
pub enum FeasibleSet<S> {
    /// Probability simplex `{ x >= 0, sum x = 1 }`.
    Simplex { dim: usize },
    /// l1 ball of the given radius.
    L1Ball { dim: usize, radius: S },
    /// `[lo, hi]^dim`.
    Box { dim: usize, lo: S, hi: S },
}

impl<S: Scalar> FeasibleSet<S> {
    pub fn simplex(dim: usize) -> Result<Self, Error> {
        if dim == 0 {
            return Err(Error::InvalidParameter("simplex dimension must be >= 1".into()));
        }
        Ok(FeasibleSet::Simplex { dim })
    }

    pub fn l1_ball(dim: usize, radius: S) -> Result<Self, Error> {
        if dim == 0 || !(radius > S::zero()) || !radius.is_finite() {
            return Err(Error::InvalidParameter(
                "l1 ball needs dim >= 1 and a finite positive radius".into(),
            ));
        }
        Ok(FeasibleSet::L1Ball { dim, radius })
    }

    pub fn boxed(dim: usize, lo: S, hi: S) -> Result<Self, Error> {
        if dim == 0 || !lo.is_finite() || !hi.is_finite() || !(lo < hi) {
            return Err(Error::InvalidParameter(
                "box needs dim >= 1 and finite lo < hi".into(),
            ));
        }
        Ok(FeasibleSet::Box { dim, lo, hi })
    }

    pub fn dim(&self) -> usize {
        match *self {
            FeasibleSet::Simplex { dim }
            | FeasibleSet::L1Ball { dim, .. }
            | FeasibleSet::Box { dim, .. } => dim,
        }
    }

    fn check_input(&self, v: &[S], context: &'static str) -> Result<(), Error> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { context });
        }
        Ok(())
    }

    /// Linear minimization oracle: a vertex `v` minimizing `<v, g>`.
    ///
    /// Ties are broken toward the lowest coordinate index so traces are
    /// reproducible.
    pub fn lmo(&self, g: &Point<S>) -> Result<Point<S>, Error> {
        let mut out = vec![S::zero(); self.dim()];
        self.lmo_into(g.as_slice(), &mut out)?;
        Ok(Point::new(out))
    }

    /// Slice-level oracle used in the round loops.
    pub fn lmo_into(&self, g: &[S], out: &mut [S]) -> Result<(), Error> {
        self.check_input(g, "lmo gradient")?;
        debug_assert_eq!(out.len(), self.dim());
        out.fill(S::zero());
        match *self {
            FeasibleSet::Simplex { .. } => {
                let mut best = 0usize;
                for (k, &gk) in g.iter().enumerate() {
                    if gk < g[best] {
                        best = k;
                    }
                }
                out[best] = S::one();
            }
            FeasibleSet::L1Ball { radius, .. } => {
                let mut best = 0usize;
                for (k, &gk) in g.iter().enumerate() {
                    if gk.abs() > g[best].abs() {
                        best = k;
                    }
                }
                // -r * sign(g_k) * e_k; a zero gradient still returns a vertex.
                out[best] = if g[best] > S::zero() { -radius } else { radius };
            }
            FeasibleSet::Box { lo, hi, .. } => {
                for (o, &gk) in out.iter_mut().zip(g) {
                    *o = if gk > S::zero() { lo } else { hi };
                }
            }
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, y: &Point<S>) -> Result<Point<S>, Error> {
        let mut out = vec![S::zero(); self.dim()];
        self.project_into(y.as_slice(), &mut out)?;
        Ok(Point::new(out))
    }

    /// Slice-level projection used in the round loops.
    pub fn project_into(&self, y: &[S], out: &mut [S]) -> Result<(), Error> {
        self.check_input(y, "projection input")?;
        debug_assert_eq!(out.len(), self.dim());
        match *self {
            FeasibleSet::Simplex { .. } => project_simplex(y, S::one(), out),
            FeasibleSet::L1Ball { radius, .. } => {
                let l1: S = y.iter().map(|c| c.abs()).sum();
                if l1 <= radius {
                    out.copy_from_slice(y);
                } else {
                    // Project |y| onto the radius-r simplex, then restore signs.
                    let abs: Vec<S> = y.iter().map(|c| c.abs()).collect();
                    project_simplex(&abs, radius, out);
                    for (o, &yk) in out.iter_mut().zip(y) {
                        if yk < S::zero() {
                            *o = -*o;
                        }
                    }
                }
            }
            FeasibleSet::Box { lo, hi, .. } => {
                for (o, &yk) in out.iter_mut().zip(y) {
                    *o = yk.max(lo).min(hi);
                }
            }
        }
        Ok(())
    }

    /// Exact diameter `max ||x1 - x2||` over the set.
    pub fn diameter(&self) -> S {
        match *self {
            FeasibleSet::Simplex { dim } => {
                if dim >= 2 {
                    real::<S>(2.0).sqrt()
                } else {
                    S::zero()
                }
            }
            FeasibleSet::L1Ball { radius, .. } => radius + radius,
            FeasibleSet::Box { dim, lo, hi } => (hi - lo) * real_of::<S>(dim).sqrt(),
        }
    }

    /// How far `x` is from satisfying the set's constraints (0 = feasible).
    pub fn violation(&self, x: &[S]) -> S {
        if x.len() != self.dim() {
            return S::infinity();
        }
        match *self {
            FeasibleSet::Simplex { .. } => {
                let sum: S = x.iter().copied().sum();
                let neg = x
                    .iter()
                    .map(|&c| (-c).max(S::zero()))
                    .fold(S::zero(), S::max);
                (sum - S::one()).abs().max(neg)
            }
            FeasibleSet::L1Ball { radius, .. } => {
                let l1: S = x.iter().map(|c| c.abs()).sum();
                (l1 - radius).max(S::zero())
            }
            FeasibleSet::Box { lo, hi, .. } => x
                .iter()
                .map(|&c| (lo - c).max(c - hi).max(S::zero()))
                .fold(S::zero(), S::max),
        }
    }

    pub fn contains(&self, x: &[S], tol: S) -> bool {
        self.violation(x) <= tol
    }

    /// The point all round loops may start from: first vertex of the set.
    pub fn first_vertex(&self) -> Point<S> {
        match *self {
            FeasibleSet::Simplex { dim } => Point::scaled_basis(dim, 0, S::one()),
            FeasibleSet::L1Ball { dim, radius } => Point::scaled_basis(dim, 0, radius),
            FeasibleSet::Box { dim, lo, .. } => Point::filled(dim, lo),
        }
    }

    /// Analytic-ish center, a good warm start for interior optima.
    pub fn center(&self) -> Point<S> {
        match *self {
            FeasibleSet::Simplex { dim } => Point::filled(dim, S::one() / real_of(dim)),
            FeasibleSet::L1Ball { dim, .. } => Point::zeros(dim),
            FeasibleSet::Box { dim, lo, hi } => Point::filled(dim, (lo + hi) / real(2.0)),
        }
    }

    /// Full vertex list. Errors for boxes beyond 2^20 corners.
    pub fn vertices(&self) -> Result<Vec<Point<S>>, Error> {
        match *self {
            FeasibleSet::Simplex { dim } => Ok((0..dim)
                .map(|k| Point::scaled_basis(dim, k, S::one()))
                .collect()),
            FeasibleSet::L1Ball { dim, radius } => {
                let mut vs = Vec::with_capacity(2 * dim);
                for k in 0..dim {
                    vs.push(Point::scaled_basis(dim, k, radius));
                    vs.push(Point::scaled_basis(dim, k, -radius));
                }
                Ok(vs)
            }
            FeasibleSet::Box { dim, lo, hi } => {
                if dim > 20 {
                    return Err(Error::UnsupportedSet(format!(
                        "box vertex enumeration needs 2^{dim} corners"
                    )));
                }
                let mut vs = Vec::with_capacity(1 << dim);
                for mask in 0..(1usize << dim) {
                    let coords = (0..dim)
                        .map(|k| if mask >> k & 1 == 1 { hi } else { lo })
                        .collect();
                    vs.push(Point::new(coords));
                }
                Ok(vs)
            }
        }
    }

    /// Draws a random feasible point (used by estimators and tests).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Point<S> {
        match *self {
            FeasibleSet::Simplex { dim } => Point::new(sample_simplex(dim, S::one(), rng)),
            FeasibleSet::L1Ball { dim, radius } => {
                let mut coords = sample_simplex(dim, radius, rng);
                for c in coords.iter_mut() {
                    if rng.random_range(0u8..2) == 1 {
                        *c = -*c;
                    }
                }
                // Uniform radial factor keeps interior points likely.
                let u: S = rng.random_range(S::zero()..=S::one());
                let shrink = u.powf(S::one() / real_of(dim));
                Point::new(coords.into_iter().map(|c| c * shrink).collect())
            }
            FeasibleSet::Box { dim, lo, hi } => {
                Point::new((0..dim).map(|_| rng.random_range(lo..=hi)).collect())
            }
        }
    }
}

/// Projection onto `{ x >= 0, sum x = total }` by sorting and thresholding:
/// the largest `rho` entries are shifted by a common `theta` chosen so the
/// result sums to `total`, everything else clips to zero.
fn project_simplex<S: Scalar>(y: &[S], total: S, out: &mut [S]) {
    let mut sorted: Vec<S> = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cumsum = S::zero();
    let mut theta = S::zero();
    let mut rho = 0usize;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum = cumsum + u;
        let candidate = (cumsum - total) / real_of(k + 1);
        if u - candidate > S::zero() {
            theta = candidate;
            rho = k + 1;
        }
    }
    debug_assert!(rho > 0);
    for (o, &yk) in out.iter_mut().zip(y) {
        *o = (yk - theta).max(S::zero());
    }
}

/// Uniform sample from `{ x >= 0, sum x = total }` via exponential spacings.
fn sample_simplex<S: Scalar, R: Rng>(dim: usize, total: S, rng: &mut R) -> Vec<S> {
    let mut coords: Vec<S> = (0..dim)
        .map(|_| {
            let u: S = rng.random_range(S::epsilon()..=S::one());
            -u.ln()
        })
        .collect();
    let sum: S = coords.iter().copied().sum();
    for c in coords.iter_mut() {
        *c = *c / sum * total;
    }
    coords
}
