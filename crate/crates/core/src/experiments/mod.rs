//! Finite-volume sweeps, disorder ensembles, ergodic averages, boundary layers.
//!
//! All drivers keep the lattice spacing fixed and grow the box, so the
//! thermodynamic limit is separated from the continuum limit. Jobs run on the
//! rayon pool; results are merged in job order.

pub mod boundary;
pub mod ergodic;
pub mod stats;
pub mod sweep;

pub use boundary::{run_boundary_layer_probe, BoundaryPlan, BoundaryRecord, BoundaryRow};
pub use ergodic::{run_ergodic_average, ErgodicPlan, ErgodicRecord};
pub use stats::{error_order, loglog_slope, successive_difference_rate, Moments, RateFit};
pub use sweep::{
    run_convergence_sweep, run_disorder_ensemble, ConvergenceRow, EnsembleStats, SplitCheck, StatRow, SweepPlan,
    VarianceSlope, VarianceTest,
};
