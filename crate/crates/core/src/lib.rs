//! Age-of-information scheduling toolkit: a closed-form scheduling index
//! for broadcast networks with random arrivals and lossy links, exact
//! dynamic-programming oracles that validate the structure it relies on,
//! and a deterministic discrete-event simulator for policy comparison.
//!
//! Time is slotted. Each client's freshness is tracked by two coordinates:
//! the age of the newest buffered packet and the age of the receiver's
//! information. The scheduler serves at most one client per slot over a
//! Bernoulli channel; new packets arrive as Bernoulli processes and replace
//! the buffer.

pub mod index;
pub mod mdp;
pub mod model;
pub mod policy;
pub mod sim;
pub mod streams;

pub use index::{
    aoi_lower_bound, approx_whittle_index, first_threshold_bound, index_breakdown,
    limiting_threshold, mean_refresh_interval, threshold_bound, IndexBranch, IndexBreakdown,
    IndexValue, ThresholdBounds,
};
pub use mdp::{
    extract_active_passive, numeric_whittle, solve_decoupled, solve_joint_optimal,
    verify_structure, Action, CheckResult, DecoupledProblem, JointAction, JointProblem,
    JointSolution, MdpError, MdpSolution, StructureReport, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use model::{
    average_aoi, step_client, ClientParams, ClientState, KahanSum, ModelError, SlotOutcome,
    MAX_HORIZON,
};
pub use policy::{
    IndexPolicy, MaxAgePolicy, NetworkState, Policy, PolicyDecision, PolicyInstance, PolicyKind,
    PolicySpec, RandomPolicy, RoundRobinPolicy, TablePolicy, TieRule,
};
pub use sim::{replicate, run, SimConfig, SimResult};
pub use streams::{ClientStreams, KeyedStream, StreamKind};
