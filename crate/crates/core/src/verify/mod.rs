//! Grid and sampled checks of the maximum-principle machinery: viscosity
//! subsolutions, barriers, the Hopf lemma, propagation of maxima and the
//! strong comparison constructions.

mod barrier;
mod grid;
mod propagation;
mod scp;
mod subsolution;

pub use barrier::{
    barrier_eval, barrier_jet, barrier_strictness, hopf_test, Barrier, CandidateCheck, HopfParams, HopfReport,
    HopfVerdict, StrictnessParams, StrictnessReport,
};
pub use grid::{ExceptionalNode, GridFunction, JetFn, Semicontinuity, SmoothFunction};
pub use propagation::{propagation_test, PropagationParams, PropagationReport, PropagationStatus, SubunitCheck};
pub use scp::{
    estimate_lipschitz_p, scp_difference_check, strict_lift_check, LiftParams, PointFailure, ScpDifferenceReport,
    StrictLift, StrictLiftReport,
};
pub use subsolution::{
    check_subsolution, JetParams, JetSource, SubsolutionReport, SubsolutionVerdict, Violation,
};
