//! Per-client state and slot dynamics for the broadcast network.
//!
//! Time is slotted. The base station buffers at most one packet per client
//! (always the freshest), and each client tracks the age of the information
//! it last received. Two ages describe a client completely:
//!
//! * `packet_age` — slots since the buffered packet was generated,
//! * `aoi` — slots since the packet the client last received was generated.
//!
//! A slot proceeds as: schedule one client (or idle) at the slot start, the
//! transmission succeeds with the client's channel probability, and a new
//! packet arrives at the slot end with the client's arrival probability.
//! Delivering a packet of age `packet_age` makes next slot's AoI
//! `packet_age + 1`; otherwise the AoI just grows by one.

use thiserror::Error;

/// Largest accepted horizon. Ages and exact per-client AoI sums are held in
/// `u64`; the AoI at slot `t` is at most `t`, so over `1e9` slots a running
/// sum stays below `5e17`, comfortably inside `u64`.
pub const MAX_HORIZON: u64 = 1_000_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("arrival probability must lie in (0, 1], got {0}")]
    InvalidArrivalProb(f64),
    #[error("channel success probability must lie in (0, 1], got {0}")]
    InvalidSuccessProb(f64),
    #[error("client state needs 1 <= packet_age <= aoi, got packet_age={packet_age}, aoi={aoi}")]
    InvalidState { packet_age: u64, aoi: u64 },
    #[error("average AoI needs a nonempty trace")]
    EmptyTrace,
    #[error("client count must be positive")]
    NoClients,
    #[error("horizon {0} exceeds the supported maximum {MAX_HORIZON}")]
    HorizonTooLarge(u64),
    #[error("warm-up ({warmup}) must leave measured slots: horizon {horizon}")]
    WarmupTooLong { warmup: u64, horizon: u64 },
    #[error("replication count must be positive")]
    NoReplications,
}

/// Static per-client parameters: Bernoulli arrival rate and channel success
/// probability. Both must lie in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientParams {
    arrival_prob: f64,
    success_prob: f64,
}

impl ClientParams {
    pub fn new(arrival_prob: f64, success_prob: f64) -> Result<Self, ModelError> {
        if !(arrival_prob > 0.0 && arrival_prob <= 1.0) {
            return Err(ModelError::InvalidArrivalProb(arrival_prob));
        }
        if !(success_prob > 0.0 && success_prob <= 1.0) {
            return Err(ModelError::InvalidSuccessProb(success_prob));
        }
        Ok(ClientParams { arrival_prob, success_prob })
    }

    pub fn arrival_prob(&self) -> f64 {
        self.arrival_prob
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }

    /// Same client with the channel treated as perfectly reliable.
    pub fn with_reliable_channel(&self) -> ClientParams {
        ClientParams { arrival_prob: self.arrival_prob, success_prob: 1.0 }
    }
}

/// Dynamic per-client state; invariant `1 <= packet_age <= aoi`.
///
/// The buffer is never empty: after the first slot there is always a freshest
/// packet, possibly the one already delivered (then `freshness_gap() == 0`
/// and transmitting it cannot reduce the AoI).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClientState {
    packet_age: u64,
    aoi: u64,
}

impl ClientState {
    /// Initial state used by the simulator: a fresh system where the buffered
    /// packet is the delivered one (`packet_age = aoi = 1`).
    pub fn fresh() -> Self {
        ClientState { packet_age: 1, aoi: 1 }
    }

    pub fn new(packet_age: u64, aoi: u64) -> Result<Self, ModelError> {
        if packet_age < 1 || packet_age > aoi {
            return Err(ModelError::InvalidState { packet_age, aoi });
        }
        Ok(ClientState { packet_age, aoi })
    }

    pub fn packet_age(&self) -> u64 {
        self.packet_age
    }

    pub fn aoi(&self) -> u64 {
        self.aoi
    }

    /// AoI reduction a successful delivery would achieve next slot.
    pub fn freshness_gap(&self) -> u64 {
        self.aoi - self.packet_age
    }
}

/// Random events of one slot for one client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotOutcome {
    /// A new packet for this client arrived at the end of the slot.
    pub arrival: bool,
    /// The channel would deliver this slot's transmission (only consulted when
    /// the client is actually scheduled).
    pub channel: bool,
}

/// Advance one client by one slot.
///
/// The AoI update happens first (delivery replaces the client's information
/// with the buffered packet), then the arrival refreshes the buffer. The
/// returned state again satisfies `1 <= packet_age <= aoi`.
pub fn step_client(state: ClientState, scheduled: bool, outcome: SlotOutcome) -> ClientState {
    let aoi = if scheduled && outcome.channel { state.packet_age + 1 } else { state.aoi + 1 };
    let packet_age = if outcome.arrival { 1 } else { state.packet_age + 1 };
    debug_assert!(packet_age >= 1 && packet_age <= aoi);
    ClientState { packet_age, aoi }
}

/// Kahan (compensated) running sum; keeps long traces exact to f64 precision.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let y = value - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Time-average AoI per client: the mean of per-slot network AoI sums divided
/// by the client count. `slot_sums[t]` is the AoI summed over clients at the
/// start of slot `t`, before that slot's scheduling decision.
pub fn average_aoi(slot_sums: &[f64], clients: usize) -> Result<f64, ModelError> {
    if slot_sums.is_empty() {
        return Err(ModelError::EmptyTrace);
    }
    if clients == 0 {
        return Err(ModelError::NoClients);
    }
    let mut acc = KahanSum::default();
    for &s in slot_sums {
        acc.add(s);
    }
    Ok(acc.value() / (slot_sums.len() as f64 * clients as f64))
}
