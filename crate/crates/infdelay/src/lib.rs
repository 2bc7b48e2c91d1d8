//! Simulation and empirical stability analysis of linear difference systems
//! with unbounded (infinite) delay.
//!
//! The systems under study evolve in `X = R^d` (with the max-abs-entry norm)
//! according to
//!
//! ```text
//! x(n + 1) = sum_{k = 0}^{infinity} L(n, k) x(n - k) + f(n),      n >= tau,
//! ```
//!
//! where each `L(n, k)` is a `d x d` matrix acting on the state `k` steps in
//! the past and `f` is an external forcing. The entire history of a solution
//! at time `n` is collected into a *phase vector* `x_n` with coordinates
//! `x_n^[m] = x(n + m)` for `m <= 0`, living in an exponentially weighted
//! sequence space: either the weighted-sup space with norm
//! `sup_{m <= 0} |phi^[m]| e^{gamma m}` or its summable counterpart
//! `( sum_{m <= 0} |phi^[m] e^{gamma m}|^r )^{1/r}`.
//!
//! The crate provides:
//!
//! * [`phase`] — weighted phase-space vectors, norms, shifts, projections;
//! * [`system`] — kernel-defined systems, operator-norm brackets, memory
//!   fading diagnostics, sub-diagonal truncation;
//! * [`solver`] — trajectory computation, the reduced first-order form on the
//!   phase space, the prehistory accumulation operator, and the consistency
//!   residual between the two formulations;
//! * [`analysis`] — input-to-state gain estimation between weighted `l^p`
//!   and `l^q` norms, homogeneous decay profiles with exponential /
//! uniform stability fits, black-box kernel identification, and
//!   boundedness evidence for the unweighted sup phase space;
//! * [`registry`] — a library of built-in example systems with closed-form
//!   solution oracles and expected analysis outcomes;
//! * [`spec`] — a JSON description format for systems;
//! * [`report`] — deterministic JSON/CSV report serialization;
//! * [`checks`] — the self-verification suite run by `infdelay verify`.

pub mod analysis;
pub mod checks;
pub mod phase;
pub mod registry;
pub mod report;
pub mod rng;
pub mod solver;
pub mod spec;
pub mod state;
pub mod system;

pub use phase::{PhaseVector, RExponent, WeightSpec};
pub use solver::{PhaseTrajectory, Trajectory};
pub use state::{mat_norm, max_norm};
pub use system::{ConditionReport, ConditionVerdict, KernelSystem, NormInterval, TailCertificate};
