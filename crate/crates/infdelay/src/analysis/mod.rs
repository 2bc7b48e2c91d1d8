//! Empirical stability toolkit for kernel systems.
//!
//! Everything here is measurement, not proof: gains are lower bounds from
//! explicit probe families, decay fits are least-squares consistency checks
//! with window-doubling cross-validation, and verdicts are tri-state
//! (`CONSISTENT` / `INCONSISTENT` / `INCONCLUSIVE`) because finite windows
//! cannot certify suprema over all times.

mod b0;
mod classify;
mod gain;
mod identify;
mod profile;

pub use b0::{
    b0_sufficiency, depth_tail_lp, B0ConditionI, B0ConditionII, B0Report, CertStatus,
    CompositeEvidence, DepthTailObservation, LpTailObservation,
};
pub use classify::{classify, GammaGridPoint, StabilityReport};
pub use gain::{gain_probe_forcings, lplq_gain, GainEstimate, GainTracePoint};
pub use identify::{
    kernel_identify, system_blackbox, BandBound, BandEntryReport, IdentifiedKernel,
    IdentifyReport,
};
pub use profile::{
    decay_profile, doubled_profile, stability_fit, DecayProfile, FitMode, FitVerdict,
    StabilityFitResult,
};

use thiserror::Error;

use crate::solver::SolverError;
use crate::system::SystemError;

/// Errors from analysis operations.
#[derive(Debug, Error)]
pub enum AnalysisError {
    /// Underlying trajectory computation failed.
    #[error(transparent)]
    Solver(#[from] SolverError),
    /// Applying the kernel to a history failed.
    #[error(transparent)]
    System(#[from] SystemError),
    /// Exponent pair outside `1 <= p <= q <= infinity`.
    #[error("invalid exponents p = {p}, q = {q}: need 1 <= p <= q (infinity allowed)")]
    BadExponents {
        /// Requested input exponent.
        p: f64,
        /// Requested output exponent.
        q: f64,
    },
    /// A structural parameter was out of range.
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    /// The identification probes detected behaviour impossible for a
    /// kernel-determined system.
    #[error(
        "black box deviates from kernel-determined behaviour at time {time} \
         (deviation {deviation:e})"
    )]
    NotKernelDetermined {
        /// Time step where the intermediate state was wrong.
        time: u64,
        /// Size of the deviation.
        deviation: f64,
    },
}
