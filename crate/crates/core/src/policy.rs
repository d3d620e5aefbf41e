//! Scheduling policies: who (if anyone) gets the slot.
//!
//! All policies are deterministic functions of the network state and a keyed
//! random stream, so runs are reproducible and policies can be compared under
//! common random numbers. At most one client is served per slot by
//! construction of [`PolicyDecision`]. Serving a client whose freshness gap
//! is zero cannot change the receiver's state, so every built-in policy
//! idles rather than burn the slot on a futile transmission.

use crate::index::approx_whittle_index;
use crate::mdp::{JointAction, JointSolution};
use crate::model::{ClientParams, ClientState};
use crate::streams::KeyedStream;
use std::str::FromStr;
use std::sync::Arc;

/// Everything a policy may look at when allocating one slot.
#[derive(Debug, Clone, Copy)]
pub struct NetworkState<'a> {
    pub states: &'a [ClientState],
    pub params: &'a [ClientParams],
    /// Current slot, starting at 1; keys any random draw the policy makes.
    pub slot: u64,
}

impl<'a> NetworkState<'a> {
    pub fn new(states: &'a [ClientState], params: &'a [ClientParams], slot: u64) -> Self {
        debug_assert_eq!(states.len(), params.len());
        debug_assert!(!states.is_empty() && slot >= 1);
        NetworkState { states, params, slot }
    }
}

/// One slot's allocation: a single client or nobody.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyDecision {
    Idle,
    Serve(usize),
}

/// How index policies resolve exactly equal index values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Deterministic: the tied client with the lowest position wins.
    #[default]
    LowestIndex,
    /// Uniform over the tied clients, drawn from the policy stream.
    Random,
}

impl FromStr for TieRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lowest-index" => Ok(TieRule::LowestIndex),
            "random" => Ok(TieRule::Random),
            other => Err(format!("unknown tie rule `{other}` (lowest-index, random)")),
        }
    }
}

/// The scheduling contract: pick at most one client for this slot.
///
/// `stream` is a per-replication random stream dedicated to policy-internal
/// draws (random baselines, random tie-breaks), keyed by slot so decisions
/// stay independent of call order.
pub trait Policy {
    fn decide(&mut self, ns: &NetworkState<'_>, stream: &KeyedStream) -> PolicyDecision;
}

/// Serve the largest value; `tie` settles exact equals; all-zero means idle.
fn serve_argmax(
    values: impl Iterator<Item = f64>,
    tie: TieRule,
    slot: u64,
    stream: &KeyedStream,
) -> PolicyDecision {
    let mut best = f64::NEG_INFINITY;
    let mut tied: Vec<usize> = Vec::new();
    for (i, v) in values.enumerate() {
        if v > best {
            best = v;
            tied.clear();
            tied.push(i);
        } else if v == best {
            tied.push(i);
        }
    }
    if best <= 0.0 {
        return PolicyDecision::Idle;
    }
    match tie {
        TieRule::LowestIndex => PolicyDecision::Serve(tied[0]),
        TieRule::Random => PolicyDecision::Serve(tied[stream.index_at(slot, tied.len())]),
    }
}

/// Index policy: serve the client whose scheduling index is largest.
///
/// With `assume_reliable` the index is evaluated as if every channel were
/// perfect, which ignores channel statistics entirely — the arrival-aware
/// baseline. Both variants share this code path, so they differ only through
/// the channel parameter.
#[derive(Debug, Clone, Copy)]
pub struct IndexPolicy {
    tie: TieRule,
    assume_reliable: bool,
}

impl IndexPolicy {
    pub fn approx(tie: TieRule) -> Self {
        IndexPolicy { tie, assume_reliable: false }
    }

    pub fn arrival_aware(tie: TieRule) -> Self {
        IndexPolicy { tie, assume_reliable: true }
    }
}

impl Policy for IndexPolicy {
    fn decide(&mut self, ns: &NetworkState<'_>, stream: &KeyedStream) -> PolicyDecision {
        let reliable = self.assume_reliable;
        let values = ns.states.iter().zip(ns.params).map(|(s, &p)| {
            let p = if reliable { p.with_reliable_channel() } else { p };
            approx_whittle_index(s.packet_age(), s.freshness_gap(), p).get()
        });
        serve_argmax(values, self.tie, ns.slot, stream)
    }
}

/// Serve the client whose information is oldest (largest age), skipping
/// clients whose buffer holds nothing fresher than what they already have.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxAgePolicy;

impl Policy for MaxAgePolicy {
    fn decide(&mut self, ns: &NetworkState<'_>, stream: &KeyedStream) -> PolicyDecision {
        let values = ns
            .states
            .iter()
            .map(|s| if s.freshness_gap() >= 1 { s.aoi() as f64 } else { 0.0 });
        serve_argmax(values, TieRule::LowestIndex, ns.slot, stream)
    }
}

/// Cycle through the clients in fixed order, skipping zero-gap clients.
#[derive(Debug, Clone, Copy)]
pub struct RoundRobinPolicy {
    next: usize,
}

impl RoundRobinPolicy {
    pub fn new() -> Self {
        RoundRobinPolicy { next: 0 }
    }
}

impl Default for RoundRobinPolicy {
    fn default() -> Self {
        Self::new()
    }
}

impl Policy for RoundRobinPolicy {
    fn decide(&mut self, ns: &NetworkState<'_>, _stream: &KeyedStream) -> PolicyDecision {
        let n = ns.states.len();
        for off in 0..n {
            let i = (self.next + off) % n;
            if ns.states[i].freshness_gap() >= 1 {
                self.next = (i + 1) % n;
                return PolicyDecision::Serve(i);
            }
        }
        PolicyDecision::Idle
    }
}

/// Serve a uniformly random client among those with something new to send.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn decide(&mut self, ns: &NetworkState<'_>, stream: &KeyedStream) -> PolicyDecision {
        let eligible: Vec<usize> = (0..ns.states.len())
            .filter(|&i| ns.states[i].freshness_gap() >= 1)
            .collect();
        if eligible.is_empty() {
            return PolicyDecision::Idle;
        }
        PolicyDecision::Serve(eligible[stream.index_at(ns.slot, eligible.len())])
    }
}

/// Execute an exactly-solved decision table; states beyond the table's age
/// cap are clamped onto it.
#[derive(Debug, Clone)]
pub struct TablePolicy {
    table: Arc<JointSolution>,
}

impl TablePolicy {
    pub fn new(table: Arc<JointSolution>) -> Self {
        TablePolicy { table }
    }
}

impl Policy for TablePolicy {
    fn decide(&mut self, ns: &NetworkState<'_>, _stream: &KeyedStream) -> PolicyDecision {
        assert_eq!(
            ns.states.len(),
            self.table.n_clients(),
            "decision table solved for a different client count"
        );
        // With no gap anywhere, serving and idling are exactly value-tied
        // (a delivery changes nothing); the table breaks that tie toward
        // serving, but this layer keeps the no-futile-transmission contract.
        if ns.states.iter().all(|s| s.freshness_gap() == 0) {
            return PolicyDecision::Idle;
        }
        let clip = |v: u64| v.min(u32::MAX as u64) as u32;
        let coords: Vec<(u32, u32)> =
            ns.states.iter().map(|s| (clip(s.packet_age()), clip(s.freshness_gap()))).collect();
        match self.table.action(&coords) {
            JointAction::Idle => PolicyDecision::Idle,
            JointAction::Serve(i) => PolicyDecision::Serve(i),
        }
    }
}

/// Policy selected by name (configuration front ends).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    ApproxIndex,
    ArrivalAware,
    MaxAge,
    RoundRobin,
    Random,
    OptimalTable,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::ApproxIndex,
        PolicyKind::ArrivalAware,
        PolicyKind::MaxAge,
        PolicyKind::RoundRobin,
        PolicyKind::Random,
        PolicyKind::OptimalTable,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::ApproxIndex => "approx-index",
            PolicyKind::ArrivalAware => "arrival-aware",
            PolicyKind::MaxAge => "max-age",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::Random => "random",
            PolicyKind::OptimalTable => "optimal-table",
        }
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<_> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown policy `{s}` (one of: {})", names.join(", "))
            })
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully-resolved policy choice, cheap to instantiate once per replication.
/// The optimal-table variant carries its solved table so replications share
/// one solve.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    ApproxIndex { tie: TieRule },
    ArrivalAware { tie: TieRule },
    MaxAge,
    RoundRobin,
    Random,
    OptimalTable { table: Arc<JointSolution> },
}

impl PolicySpec {
    pub fn kind(&self) -> PolicyKind {
        match self {
            PolicySpec::ApproxIndex { .. } => PolicyKind::ApproxIndex,
            PolicySpec::ArrivalAware { .. } => PolicyKind::ArrivalAware,
            PolicySpec::MaxAge => PolicyKind::MaxAge,
            PolicySpec::RoundRobin => PolicyKind::RoundRobin,
            PolicySpec::Random => PolicyKind::Random,
            PolicySpec::OptimalTable { .. } => PolicyKind::OptimalTable,
        }
    }

    /// Fresh policy instance (own cursor state) for one replication.
    pub fn instantiate(&self) -> PolicyInstance {
        match self {
            PolicySpec::ApproxIndex { tie } => PolicyInstance::Index(IndexPolicy::approx(*tie)),
            PolicySpec::ArrivalAware { tie } => {
                PolicyInstance::Index(IndexPolicy::arrival_aware(*tie))
            }
            PolicySpec::MaxAge => PolicyInstance::MaxAge(MaxAgePolicy),
            PolicySpec::RoundRobin => PolicyInstance::RoundRobin(RoundRobinPolicy::new()),
            PolicySpec::Random => PolicyInstance::Random(RandomPolicy),
            PolicySpec::OptimalTable { table } => {
                PolicyInstance::Table(TablePolicy::new(table.clone()))
            }
        }
    }
}

/// Concrete instance of any built-in policy (one per replication).
#[derive(Debug, Clone)]
pub enum PolicyInstance {
    Index(IndexPolicy),
    MaxAge(MaxAgePolicy),
    RoundRobin(RoundRobinPolicy),
    Random(RandomPolicy),
    Table(TablePolicy),
}

impl Policy for PolicyInstance {
    fn decide(&mut self, ns: &NetworkState<'_>, stream: &KeyedStream) -> PolicyDecision {
        match self {
            PolicyInstance::Index(p) => p.decide(ns, stream),
            PolicyInstance::MaxAge(p) => p.decide(ns, stream),
            PolicyInstance::RoundRobin(p) => p.decide(ns, stream),
            PolicyInstance::Random(p) => p.decide(ns, stream),
            PolicyInstance::Table(p) => p.decide(ns, stream),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{solve_joint_optimal, JointProblem};
    use crate::streams::StreamKind;

    fn st(a: u64, aoi: u64) -> ClientState {
        ClientState::new(a, aoi).unwrap()
    }

    fn pr(l: f64, p: f64) -> ClientParams {
        ClientParams::new(l, p).unwrap()
    }

    fn stream() -> KeyedStream {
        KeyedStream::new(7, 1, 0, StreamKind::Policy)
    }

    #[test]
    fn every_policy_idles_when_no_gap_anywhere() {
        let states = [st(3, 3), st(5, 5)];
        let params = [pr(0.5, 0.5), pr(0.5, 0.5)];
        let ns = NetworkState::new(&states, &params, 1);
        let s = stream();
        let joint = JointProblem::new(params.to_vec(), 8).unwrap();
        let table = Arc::new(solve_joint_optimal(&joint, 1e-9, 200_000).unwrap());
        let specs = [
            PolicySpec::ApproxIndex { tie: TieRule::LowestIndex },
            PolicySpec::ArrivalAware { tie: TieRule::Random },
            PolicySpec::MaxAge,
            PolicySpec::RoundRobin,
            PolicySpec::Random,
            PolicySpec::OptimalTable { table },
        ];
        for spec in specs {
            let mut p = spec.instantiate();
            assert_eq!(
                p.decide(&ns, &s),
                PolicyDecision::Idle,
                "{} served a futile slot",
                spec.kind()
            );
        }
    }

    #[test]
    fn index_argmax_prefers_larger_gap() {
        // deterministic clients: indices d(d+1)/2 = 6 vs 3
        let states = [st(1, 4), st(1, 3)];
        let params = [pr(1.0, 1.0), pr(1.0, 1.0)];
        let ns = NetworkState::new(&states, &params, 1);
        let mut p = IndexPolicy::approx(TieRule::LowestIndex);
        assert_eq!(p.decide(&ns, &stream()), PolicyDecision::Serve(0));
    }

    #[test]
    fn exact_tie_goes_to_lowest_position() {
        let states = [st(2, 6), st(2, 6)];
        let params = [pr(0.5, 0.5), pr(0.5, 0.5)];
        let ns = NetworkState::new(&states, &params, 9);
        let mut p = IndexPolicy::approx(TieRule::LowestIndex);
        assert_eq!(p.decide(&ns, &stream()), PolicyDecision::Serve(0));
    }

    #[test]
    fn random_tie_break_reaches_every_tied_client() {
        let states = [st(2, 6), st(2, 6)];
        let params = [pr(0.5, 0.5), pr(0.5, 0.5)];
        let s = stream();
        let mut p = IndexPolicy::approx(TieRule::Random);
        let mut counts = [0usize; 2];
        for slot in 1..=2000 {
            let ns = NetworkState::new(&states, &params, slot);
            match p.decide(&ns, &s) {
                PolicyDecision::Serve(i) => counts[i] += 1,
                PolicyDecision::Idle => panic!("should never idle"),
            }
        }
        assert_eq!(counts[0] + counts[1], 2000);
        // both sides of a fair coin, five sigma
        assert!((counts[0] as f64 - 1000.0).abs() < 5.0 * (2000.0f64 * 0.25).sqrt());
    }

    #[test]
    fn arrival_aware_ignores_channel_quality() {
        // high-reliability client sits second; the channel-aware index picks
        // it, the arrival-aware one ties and falls to the first position
        let states = [st(2, 6), st(2, 6)];
        let params = [pr(0.5, 0.1), pr(0.5, 0.9)];
        let ns = NetworkState::new(&states, &params, 3);
        let mut chan = IndexPolicy::approx(TieRule::LowestIndex);
        let mut blind = IndexPolicy::arrival_aware(TieRule::LowestIndex);
        assert_eq!(chan.decide(&ns, &stream()), PolicyDecision::Serve(1));
        assert_eq!(blind.decide(&ns, &stream()), PolicyDecision::Serve(0));
    }

    #[test]
    fn max_age_serves_oldest_information_with_positive_gap() {
        let params = [pr(0.5, 0.5), pr(0.5, 0.5)];
        let older = [st(8, 9), st(3, 4)];
        let ns = NetworkState::new(&older, &params, 1);
        assert_eq!(MaxAgePolicy.decide(&ns, &stream()), PolicyDecision::Serve(0));
        // the oldest client has nothing new; the younger one gets the slot
        let stale = [st(9, 9), st(3, 4)];
        let ns = NetworkState::new(&stale, &params, 2);
        assert_eq!(MaxAgePolicy.decide(&ns, &stream()), PolicyDecision::Serve(1));
    }

    #[test]
    fn round_robin_cycles_and_skips_empty_buffers() {
        let params = [pr(0.5, 0.5); 3];
        let all = [st(1, 2), st(1, 2), st(1, 2)];
        let s = stream();
        let mut p = RoundRobinPolicy::new();
        let mut served = Vec::new();
        for slot in 1..=4 {
            let ns = NetworkState::new(&all, &params, slot);
            served.push(p.decide(&ns, &s));
        }
        assert_eq!(
            served,
            vec![
                PolicyDecision::Serve(0),
                PolicyDecision::Serve(1),
                PolicyDecision::Serve(2),
                PolicyDecision::Serve(0),
            ]
        );
        // cursor sits after client 0; client 1 has gap 0 and is skipped
        let part = [st(1, 2), st(2, 2), st(1, 2)];
        let ns = NetworkState::new(&part, &params, 5);
        assert_eq!(p.decide(&ns, &s), PolicyDecision::Serve(2));
    }

    #[test]
    fn random_policy_spreads_over_eligible_clients() {
        let params = [pr(0.5, 0.5); 3];
        let states = [st(1, 2), st(2, 2), st(1, 3)]; // middle one ineligible
        let s = stream();
        let mut counts = [0usize; 3];
        for slot in 1..=3000 {
            let ns = NetworkState::new(&states, &params, slot);
            match RandomPolicy.decide(&ns, &s) {
                PolicyDecision::Serve(i) => counts[i] += 1,
                PolicyDecision::Idle => panic!("eligible clients exist"),
            }
        }
        assert_eq!(counts[1], 0);
        assert!(counts[0] > 1200 && counts[2] > 1200, "{counts:?}");
    }

    #[test]
    fn table_policy_follows_the_solved_table_and_clamps() {
        let params = vec![pr(1.0, 1.0), pr(1.0, 1.0)];
        let joint = JointProblem::new(params.clone(), 6).unwrap();
        let sol = Arc::new(solve_joint_optimal(&joint, 1e-10, 200_000).unwrap());
        let mut p = TablePolicy::new(sol.clone());
        let states = [st(1, 4), st(1, 3)];
        let ns = NetworkState::new(&states, &params, 1);
        let direct = sol.action(&[(1, 3), (1, 2)]);
        let dec = p.decide(&ns, &stream());
        match (direct, dec) {
            (JointAction::Serve(i), PolicyDecision::Serve(j)) => assert_eq!(i, j),
            (JointAction::Idle, PolicyDecision::Idle) => {}
            other => panic!("table and policy disagree: {other:?}"),
        }
        // beyond the cap: decision equals the clamped state's decision
        let big = [st(1, 40), st(1, 3)];
        let ns_big = NetworkState::new(&big, &params, 2);
        let clamped = [st(1, 7), st(1, 3)];
        let ns_clamped = NetworkState::new(&clamped, &params, 2);
        assert_eq!(p.decide(&ns_big, &stream()), p.decide(&ns_clamped, &stream()));
    }

    #[test]
    fn policy_names_round_trip() {
        for kind in PolicyKind::ALL {
            assert_eq!(kind.name().parse::<PolicyKind>().unwrap(), kind);
        }
        assert!("frobnicate".parse::<PolicyKind>().is_err());
        assert_eq!("lowest-index".parse::<TieRule>().unwrap(), TieRule::LowestIndex);
        assert_eq!("random".parse::<TieRule>().unwrap(), TieRule::Random);
        assert!("coin".parse::<TieRule>().is_err());
    }
}
