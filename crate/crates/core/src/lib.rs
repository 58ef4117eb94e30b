//! Dynamics of selfish path selection over two parallel paths.
//!
//! End-hosts distribute a unit traffic demand over two paths and re-evaluate
//! their choice over time, observing path costs with a staleness delay `T`.
//! Stale observations make load-adaptive selection oscillate; this crate
//! models that system at desk scale and implements two router-enforceable
//! mechanisms (FLOSS and CROSS) that restore stability while keeping the
//! prescribed behavior individually rational.
//!
//! The crate is organized around a fluid (Wardrop) model and a finite-agent
//! cross-check:
//!
//! - [`system`]: the parallel-path system tuple, load-dependent path costs.
//! - [`closed_form`]: exact oscillation structure under greedy selection and
//!   under mixed greedy/antagonist profiles.
//! - [`trajectory`]: sampled load trajectories, classification, CSV export.
//! - [`dde`]: delay-differential integrator (method of steps) for greedy,
//!   proportional-rerouting, and gradient-reallocation dynamics.
//! - [`strategy`]: strategy-cost calculus and equilibrium deviation tests.
//! - [`floss`]: interval registrations with a migration allowance.
//! - [`cross`]: balancing trials with puzzle-priced backup registrations.
//! - [`agents`]: discrete-event simulation of `N` flows with stale
//!   observations and router-side enforcement plumbing.
//! - [`bloom`]: Bloom filter used by the router-side flow registries.
//!
//! All randomness is seeded; identical seeds reproduce identical runs.

// Guards like `!(x > 0.0)` are deliberate: they reject NaN along with the
// out-of-range values, which `x <= 0.0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod bloom;
pub mod closed_form;
pub mod cross;
pub mod dde;
pub mod floss;
pub mod hashing;
pub mod stats;
pub mod strategy;
pub mod system;
pub mod trajectory;

pub use closed_form::{
    greedy_closed_form, limit_imbalance, mixed_profile_closed_form, oscillation_params,
    LimitImbalance, OscillationParams,
};
pub use dde::{classify_damping, integrate, DampingKind, DampingVerdict, Dynamics, History};
pub use strategy::{
    compare_greedy_vs_convergent, mixed_strategy_slope, mixed_strategy_slope_analytic,
    pss_deviation_test, relevant_span, strategy_cost, strategy_cost_at, usage_cost, CostReport,
    RelevantSpan, Strategy, Verdict,
};
pub use system::{path_cost, ParallelPathSystem, Path, PathCost};
pub use trajectory::{classify, Classification, Trajectory};
