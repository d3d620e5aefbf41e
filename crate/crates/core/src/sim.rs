//! Slotted Monte-Carlo simulation of the broadcast network under any policy.
//!
//! Every random draw is addressed by `(seed, replication, client, purpose,
//! slot)`, so a replication is a pure function of its configuration: results
//! are independent of scheduling order, replications can run concurrently,
//! and two policies simulated under the same seed see identical arrival
//! processes and identical channel fates whenever they schedule the same
//! client in the same slot (common random numbers).
//!
//! Per-client age sums accumulate in `u64` — exactly — and are divided once
//! at the end, so long horizons lose nothing to floating-point roundoff.

use crate::model::{step_client, ClientParams, ClientState, ModelError, SlotOutcome, MAX_HORIZON};
use crate::policy::{NetworkState, Policy, PolicyDecision, PolicySpec};
use crate::streams::{ClientStreams, KeyedStream, StreamKind};
use rayon::prelude::*;

/// One simulation experiment: an instance, a policy, and a random seed.
#[derive(Debug, Clone)]
pub struct SimConfig {
    clients: Vec<ClientParams>,
    horizon: u64,
    warmup: u64,
    seed: u64,
    replications: u32,
    policy: PolicySpec,
}

impl SimConfig {
    /// Standard configuration: warm-up defaults to 10% of the horizon,
    /// one replication.
    pub fn new(
        clients: Vec<ClientParams>,
        horizon: u64,
        seed: u64,
        policy: PolicySpec,
    ) -> Result<Self, ModelError> {
        SimConfig::with_warmup(clients, horizon, horizon / 10, seed, policy)
    }

    pub fn with_warmup(
        clients: Vec<ClientParams>,
        horizon: u64,
        warmup: u64,
        seed: u64,
        policy: PolicySpec,
    ) -> Result<Self, ModelError> {
        if clients.is_empty() {
            return Err(ModelError::NoClients);
        }
        if horizon > MAX_HORIZON {
            return Err(ModelError::HorizonTooLarge(horizon));
        }
        if warmup >= horizon {
            return Err(ModelError::WarmupTooLong { warmup, horizon });
        }
        Ok(SimConfig { clients, horizon, warmup, seed, replications: 1, policy })
    }

    pub fn replications(mut self, replications: u32) -> Result<Self, ModelError> {
        if replications == 0 {
            return Err(ModelError::NoReplications);
        }
        self.replications = replications;
        Ok(self)
    }

    pub fn clients(&self) -> &[ClientParams] {
        &self.clients
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn warmup(&self) -> u64 {
        self.warmup
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication_count(&self) -> u32 {
        self.replications
    }

    pub fn policy(&self) -> &PolicySpec {
        &self.policy
    }
}

/// Measured output of one replication (or the aggregate over several).
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Per-client average age over the measured window (mean across
    /// replications when aggregated).
    pub per_client_avg_aoi: Vec<f64>,
    /// Mean of the per-client averages — the network-wide average age.
    pub network_avg_aoi: f64,
    /// Mean of the per-replication network averages.
    pub replication_mean: f64,
    /// Standard error of that mean (0 for a single replication).
    pub replication_stderr: f64,
    /// Total slots stepped (all replications; averaging excludes warm-up).
    pub slots_simulated: u64,
    /// Successful deliveries per client (summed across replications).
    pub deliveries: Vec<u64>,
}

/// Simulate one replication.
///
/// Slot `t` (1-based): record every client's current age (after warm-up),
/// ask the policy for a decision, draw arrivals for all clients and the
/// channel fate for the scheduled one, then advance all clients.
pub fn run(cfg: &SimConfig, replication: u32) -> SimResult {
    let n = cfg.clients.len();
    let mut states: Vec<ClientState> = vec![ClientState::fresh(); n];
    let streams: Vec<ClientStreams> = (0..n)
        .map(|i| ClientStreams::new(cfg.seed, replication, i as u32))
        .collect();
    let policy_stream = KeyedStream::new(cfg.seed, replication, 0, StreamKind::Policy);
    let mut policy = cfg.policy.instantiate();

    let mut age_sums: Vec<u64> = vec![0; n];
    let mut deliveries: Vec<u64> = vec![0; n];

    for t in 1..=cfg.horizon {
        if t > cfg.warmup {
            for (sum, s) in age_sums.iter_mut().zip(&states) {
                *sum += s.aoi();
            }
        }
        let decision = policy.decide(&NetworkState::new(&states, &cfg.clients, t), &policy_stream);
        for (i, state) in states.iter_mut().enumerate() {
            let scheduled = decision == PolicyDecision::Serve(i);
            let outcome = SlotOutcome {
                arrival: streams[i].arrival.bernoulli_at(t, cfg.clients[i].arrival_prob()),
                // unscheduled channel fates are unobservable; skip the draw
                channel: scheduled
                    && streams[i].channel.bernoulli_at(t, cfg.clients[i].success_prob()),
            };
            if scheduled && outcome.channel {
                deliveries[i] += 1;
            }
            *state = step_client(*state, scheduled, outcome);
        }
    }

    let measured = (cfg.horizon - cfg.warmup) as f64;
    let per_client_avg_aoi: Vec<f64> =
        age_sums.iter().map(|&s| s as f64 / measured).collect();
    let network_avg_aoi = per_client_avg_aoi.iter().sum::<f64>() / n as f64;
    SimResult {
        per_client_avg_aoi,
        network_avg_aoi,
        replication_mean: network_avg_aoi,
        replication_stderr: 0.0,
        slots_simulated: cfg.horizon,
        deliveries,
    }
}

/// Run every replication (concurrently when a thread pool is available) and
/// aggregate: means across replications, plus the standard error of the
/// network average. Output is independent of execution order.
pub fn replicate(cfg: &SimConfig) -> SimResult {
    let reps = cfg.replications;
    let results: Vec<SimResult> =
        (1..=reps).into_par_iter().map(|r| run(cfg, r)).collect();
    if results.len() == 1 {
        return results.into_iter().next().unwrap();
    }

    let n = cfg.clients.len();
    let rf = reps as f64;
    let mut per_client_avg_aoi = vec![0.0; n];
    let mut deliveries = vec![0u64; n];
    let mut slots_simulated = 0u64;
    for res in &results {
        for i in 0..n {
            per_client_avg_aoi[i] += res.per_client_avg_aoi[i] / rf;
            deliveries[i] += res.deliveries[i];
        }
        slots_simulated += res.slots_simulated;
    }
    let means: Vec<f64> = results.iter().map(|r| r.network_avg_aoi).collect();
    let mean = means.iter().sum::<f64>() / rf;
    let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / (rf - 1.0);
    let stderr = (var / rf).sqrt();

    SimResult {
        per_client_avg_aoi,
        network_avg_aoi: mean,
        replication_mean: mean,
        replication_stderr: stderr,
        slots_simulated,
        deliveries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::TieRule;

    fn pr(l: f64, p: f64) -> ClientParams {
        ClientParams::new(l, p).unwrap()
    }

    fn approx() -> PolicySpec {
        PolicySpec::ApproxIndex { tie: TieRule::LowestIndex }
    }

    #[test]
    fn config_validation() {
        assert!(matches!(
            SimConfig::new(vec![], 100, 1, approx()),
            Err(ModelError::NoClients)
        ));
        assert!(matches!(
            SimConfig::new(vec![pr(0.5, 0.5)], MAX_HORIZON + 1, 1, approx()),
            Err(ModelError::HorizonTooLarge(_))
        ));
        assert!(matches!(
            SimConfig::with_warmup(vec![pr(0.5, 0.5)], 100, 100, 1, approx()),
            Err(ModelError::WarmupTooLong { .. })
        ));
        assert!(matches!(
            SimConfig::new(vec![pr(0.5, 0.5)], 100, 1, approx()).unwrap().replications(0),
            Err(ModelError::NoReplications)
        ));
        let cfg = SimConfig::new(vec![pr(0.5, 0.5)], 100, 1, approx()).unwrap();
        assert_eq!(cfg.warmup(), 10);
    }

    #[test]
    fn deterministic_single_client_settles_at_two() {
        // certain arrivals, certain channel: age alternates at 2
        let cfg =
            SimConfig::with_warmup(vec![pr(1.0, 1.0)], 10_000, 100, 42, approx()).unwrap();
        let res = run(&cfg, 1);
        assert!((res.network_avg_aoi - 2.0).abs() < 1e-9, "{}", res.network_avg_aoi);
        assert_eq!(res.deliveries[0], 9_999); // first slot has gap 0: idle
        assert_eq!(res.slots_simulated, 10_000);
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let clients = vec![pr(0.4, 0.7), pr(0.8, 0.3)];
        let cfg = SimConfig::new(clients, 20_000, 7, approx()).unwrap();
        assert_eq!(run(&cfg, 3), run(&cfg, 3));
        // a different replication really is different
        assert_ne!(run(&cfg, 3).network_avg_aoi, run(&cfg, 4).network_avg_aoi);
    }

    #[test]
    fn single_replication_aggregate_is_the_run_itself() {
        let cfg = SimConfig::new(vec![pr(0.5, 0.5)], 5_000, 11, approx()).unwrap();
        let agg = replicate(&cfg);
        assert_eq!(agg, run(&cfg, 1));
        assert_eq!(agg.replication_stderr, 0.0);
    }

    #[test]
    fn deterministic_instance_has_zero_stderr() {
        let cfg = SimConfig::new(vec![pr(1.0, 1.0)], 5_000, 5, approx())
            .unwrap()
            .replications(8)
            .unwrap();
        let agg = replicate(&cfg);
        assert_eq!(agg.replication_stderr, 0.0);
        assert_eq!(agg.slots_simulated, 8 * 5_000);
    }

    #[test]
    fn stochastic_stderr_matches_sample_std() {
        let cfg = SimConfig::new(vec![pr(0.3, 0.6)], 4_000, 9, approx())
            .unwrap()
            .replications(8)
            .unwrap();
        let singles: Vec<f64> =
            (1..=8).map(|r| run(&cfg, r).network_avg_aoi).collect();
        let mean = singles.iter().sum::<f64>() / 8.0;
        let sd =
            (singles.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / 7.0).sqrt();
        let agg = replicate(&cfg);
        assert!(agg.replication_stderr > 0.0);
        assert!((agg.replication_stderr - sd / 8f64.sqrt()).abs() < 1e-12);
        assert!((agg.replication_mean - mean).abs() < 1e-12);
    }

    #[test]
    fn arrivals_are_policy_independent_and_aoi_never_jumps_up() {
        // the same seed under two policies: every AoI drop coincides with a
        // delivery, and deliveries never push AoI below packet_age + 1
        let clients = vec![pr(0.5, 0.7), pr(0.5, 0.7)];
        for spec in [approx(), PolicySpec::RoundRobin] {
            let cfg =
                SimConfig::with_warmup(clients.clone(), 2_000, 0, 13, spec).unwrap();
            let mut states = vec![ClientState::fresh(); 2];
            let streams: Vec<ClientStreams> =
                (0..2).map(|i| ClientStreams::new(13, 1, i as u32)).collect();
            let pstream = KeyedStream::new(13, 1, 0, StreamKind::Policy);
            let mut policy = cfg.policy().instantiate();
            for t in 1..=cfg.horizon() {
                let decision =
                    policy.decide(&NetworkState::new(&states, &clients, t), &pstream);
                for (i, s) in states.iter_mut().enumerate() {
                    let scheduled = decision == PolicyDecision::Serve(i);
                    let outcome = SlotOutcome {
                        arrival: streams[i].arrival.bernoulli_at(t, 0.5),
                        channel: scheduled && streams[i].channel.bernoulli_at(t, 0.7),
                    };
                    let next = step_client(*s, scheduled, outcome);
                    if next.aoi() < s.aoi() + 1 {
                        assert!(scheduled && outcome.channel, "AoI fell without delivery");
                        assert_eq!(next.aoi(), s.packet_age() + 1);
                    }
                    *s = next;
                }
            }
        }
    }
}
