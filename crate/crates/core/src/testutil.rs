//! Tiny hand-analyzable loss streams shared by the unit tests.

use crate::error::Error;
use crate::feasible::FeasibleSet;
use crate::losses::{LossConstants, LossStream};
use crate::point::norm;
use crate::scalar::{real, Scalar};

/// Linear loss `f(x) = <c, x>` for every agent and round.
#[derive(Clone, Debug)]
pub struct ConstGradStream<S> {
    n: usize,
    c: Vec<S>,
    horizon: usize,
}

impl<S: Scalar> ConstGradStream<S> {
    pub fn new(n: usize, c: Vec<S>, horizon: usize) -> Self {
        ConstGradStream { n, c, horizon }
    }
}

impl<S: Scalar> LossStream<S> for ConstGradStream<S> {
    fn agents(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.c.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn max_round(&self) -> usize {
        usize::MAX
    }

    fn value(&self, _agent: usize, _t: usize, x: &[S]) -> S {
        crate::point::dot(&self.c, x)
    }

    fn gradient_into(&self, _agent: usize, _t: usize, _x: &[S], out: &mut [S]) {
        out.copy_from_slice(&self.c);
    }

    fn constants(&self, _set: &FeasibleSet<S>) -> Result<LossConstants<S>, Error> {
        Ok(LossConstants { l_x: norm(&self.c), g_x: S::zero() })
    }
}

/// `f(x) = 0.5 ||x - c||^2` for every agent and round.
#[derive(Clone, Debug)]
pub struct PointDistanceStream<S> {
    n: usize,
    c: Vec<S>,
    horizon: usize,
}

impl<S: Scalar> PointDistanceStream<S> {
    pub fn new(n: usize, c: Vec<S>, horizon: usize) -> Self {
        PointDistanceStream { n, c, horizon }
    }
}

impl<S: Scalar> LossStream<S> for PointDistanceStream<S> {
    fn agents(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.c.len()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn max_round(&self) -> usize {
        usize::MAX
    }

    fn value(&self, _agent: usize, _t: usize, x: &[S]) -> S {
        let half = real::<S>(0.5);
        half * crate::point::dist(x, &self.c).powi(2)
    }

    fn gradient_into(&self, _agent: usize, _t: usize, x: &[S], out: &mut [S]) {
        for ((o, &xk), &ck) in out.iter_mut().zip(x).zip(&self.c) {
            *o = xk - ck;
        }
    }

    fn constants(&self, set: &FeasibleSet<S>) -> Result<LossConstants<S>, Error> {
        // ||x - c|| over a compact set is at most diameter + ||c - any point||;
        // vertex enumeration gives the exact max of the affine gradient norm.
        let vertices = set.vertices()?;
        let mut l_x = S::zero();
        let mut g = vec![S::zero(); self.c.len()];
        for v in &vertices {
            self.gradient_into(0, 1, v.as_slice(), &mut g);
            l_x = l_x.max(norm(&g));
        }
        Ok(LossConstants { l_x, g_x: S::one() })
    }
}
