//! Dense decision vectors.

use std::ops::{Index, IndexMut};

use crate::error::Error;
use crate::scalar::Scalar;

/// A decision vector in the ambient space of a feasible set.
///
/// The coordinate buffer is plain storage; feasibility and finiteness are
/// checked by the operations that consume points (oracles, projections,
/// round updates), matching where those error contracts live.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<S> {
    coords: Vec<S>,
}

impl<S: Scalar> Point<S> {
    pub fn new(coords: Vec<S>) -> Self {
        Point { coords }
    }

    /// Validating constructor: rejects NaN/infinite entries.
    pub fn checked(coords: Vec<S>) -> Result<Self, Error> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite { context: "point coordinates" });
        }
        Ok(Point { coords })
    }

    pub fn zeros(dim: usize) -> Self {
        Point { coords: vec![S::zero(); dim] }
    }

    /// `value * e_k` in dimension `dim`.
    pub fn scaled_basis(dim: usize, k: usize, value: S) -> Self {
        let mut coords = vec![S::zero(); dim];
        coords[k] = value;
        Point { coords }
    }

    pub fn filled(dim: usize, value: S) -> Self {
        Point { coords: vec![value; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.coords
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.coords
    }

    pub fn into_vec(self) -> Vec<S> {
        self.coords
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.coords.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Self) -> S {
        dot(&self.coords, &other.coords)
    }

    pub fn norm(&self) -> S {
        norm(&self.coords)
    }

    pub fn dist(&self, other: &Self) -> S {
        dist(&self.coords, &other.coords)
    }

    /// `self + scale * dir`.
    pub fn add_scaled(&self, scale: S, dir: &Self) -> Self {
        let coords = self
            .coords
            .iter()
            .zip(&dir.coords)
            .map(|(&a, &b)| a + scale * b)
            .collect();
        Point { coords }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| a - b)
            .collect();
        Point { coords }
    }
}

impl<S: Scalar> From<Vec<S>> for Point<S> {
    fn from(coords: Vec<S>) -> Self {
        Point { coords }
    }
}

impl<S> Index<usize> for Point<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.coords[i]
    }
}

impl<S> IndexMut<usize> for Point<S> {
    fn index_mut(&mut self, i: usize) -> &mut S {
        &mut self.coords[i]
    }
}

/// Inner product of two equally sized slices.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Euclidean norm.
#[inline]
pub fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// Euclidean distance.
#[inline]
pub fn dist<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<S>()
        .sqrt()
}

/// `out += scale * src`.
#[inline]
pub fn axpy<S: Scalar>(out: &mut [S], scale: S, src: &[S]) {
    debug_assert_eq!(out.len(), src.len());
    for (o, &s) in out.iter_mut().zip(src) {
        *o = *o + scale * s;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checked_rejects_nan() {
        assert!(Point::checked(vec![0.0, f64::NAN]).is_err());
        assert!(Point::checked(vec![0.0, 1.0]).is_ok());
    }

    #[test]
    fn arithmetic_helpers() {
        let a = Point::new(vec![1.0, 2.0]);
        let b = Point::new(vec![3.0, -1.0]);
        assert_eq!(a.dot(&b), 1.0);
        assert_eq!(a.add_scaled(2.0, &b).as_slice(), &[7.0, 0.0]);
        assert_eq!(a.sub(&b).as_slice(), &[-2.0, 3.0]);
        assert!((a.dist(&b) - (4.0f64 + 9.0).sqrt()).abs() < 1e-15);
    }
}
