//! Gaussian surrogates: branching random walk maxima, and ballot and
//! general barrier probabilities for Gaussian random walks by dynamic
//! programming and Monte Carlo.

mod barrier;
mod brw;
mod conditional;

pub use barrier::{
    ballot_bounds, ballot_dp, ballot_mc, barrier_dp, barrier_mc, barrier_walk_prob,
    calibrate_ballot, BallotBounds, BallotQuery, BarrierSpec, DpOptions, DpResult, Method,
    WalkEstimate,
};
pub use brw::{
    brw_depth_sweep, brw_exact_max_laws, brw_exceedances, brw_level_maxima, brw_max_samples,
    fit_subleading, iid_max, iid_max_quantile, sample_brw_max, sample_median, subtree_max_laws,
    BrwExceedance, BrwParams, DepthSweep, ExactMaxLaw, SubleadingFit, SweepSide, MAX_DEPTH,
};
pub use conditional::{brw_conditional_sweep, ConditionalSweep};
