//! Simulation library for distributed online convex optimization over
//! time-varying networks.
//!
//! The library provides:
//!
//! * [`feasible`] — compact constraint sets (simplex, l1 ball, box) with a
//!   linear minimization oracle, Euclidean projection and exact diameters;
//! * [`network`] — generators and validators for sequences of doubly
//!   stochastic mixing matrices with joint connectivity, plus transition
//!   matrices and their geometric mixing constants;
//! * [`losses`] — online loss streams (time-varying ridge regression and a
//!   time-invariant variant) with exact gradients and Lipschitz constants;
//! * [`algorithms`] — the projection-free distributed online Frank-Wolfe
//!   method with gradient tracking (DOFW) and a projection-based distributed
//!   online gradient descent baseline (DOGD);
//! * [`metrics`] — per-round comparators, dynamic regret, variation budgets,
//!   the a-priori regret bound, and consensus diagnostics;
//! * [`csvio`] — CSV export/import of schedules, streams, traces and reports.
//!
//! All numerics are generic over the scalar type through [`Scalar`]
//! (implemented for `f32` and `f64`); the `*64` aliases below pick the
//! double-precision instantiation used by the CLI.

// Parameter guards are written as negations (`!(x > 0)`) so NaN falls into
// the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod csvio;
pub mod error;
pub mod feasible;
pub mod losses;
pub mod metrics;
pub mod network;
pub mod point;
pub mod scalar;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::Error;
pub use point::Point;
pub use scalar::Scalar;

/// Double-precision instantiations, the default throughout the CLI.
pub type Point64 = Point<f64>;
pub type FeasibleSet64 = feasible::FeasibleSet<f64>;
pub type MixingSchedule64 = network::MixingSchedule<f64>;
pub type RidgeStream64 = losses::RidgeStream<f64>;
pub type RunTrace64 = algorithms::RunTrace<f64>;
pub type StepSchedule64 = algorithms::StepSchedule<f64>;

#[cfg(test)]
mod tests {
    use crate::algorithms::{run, Algorithm, RunSpec, StepSchedule};
    use crate::feasible::FeasibleSet;
    use crate::losses::{RidgeConfig, RidgeStream};
    use crate::metrics::{dynamic_regret, ComparatorSeries};
    use crate::network::{generate_schedule, Topology};

    // The whole pipeline must instantiate at both float widths.
    fn smoke<S: crate::Scalar>() -> S {
        let set = FeasibleSet::<S>::simplex(3).unwrap();
        let stream = RidgeStream::<S>::generate(RidgeConfig {
            seed: 2,
            ..RidgeConfig::new(3, 3, 12)
        })
        .unwrap();
        let schedule = generate_schedule::<S>(3, 12, 2, 1, Topology::CycleSplit).unwrap();
        let spec = RunSpec::new(
            Algorithm::Dofw,
            StepSchedule::Power {
                coeff: crate::scalar::real(0.25),
                exponent: crate::scalar::real(0.4),
            },
            12,
        );
        let trace = run(&spec, &set, &schedule, &stream).unwrap();
        let tol = crate::scalar::real::<S>(1e-4);
        let comparators = ComparatorSeries::compute(&stream, &set, 12, tol).unwrap();
        let report = dynamic_regret(&trace, &stream, &comparators).unwrap();
        report.final_avg_over_t()
    }

    #[test]
    fn pipeline_instantiates_for_f32_and_f64() {
        let r32 = smoke::<f32>();
        let r64 = smoke::<f64>();
        assert!(r32.is_finite() && r64.is_finite());
        assert!(r32 >= -1e-3 && r64 >= -1e-9);
    }
}
