//! Counter-keyed random streams.
//!
//! Every random draw in a simulation is addressed by
//! `(seed, replication, client, purpose, slot)` instead of consuming a shared
//! sequential generator. That makes runs reproducible bit-for-bit, makes the
//! draw order irrelevant, and gives common random numbers across policies:
//! the arrival and channel bits for a given client and slot are the same no
//! matter which policy is being simulated.
//!
//! The construction is SplitMix64: a stream is a 64-bit key mixed from the
//! address fields, and the value at `slot` is the avalanche finalizer applied
//! to `key + slot * GAMMA`.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 avalanche finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a stream's draws are used for. Distinct purposes give independent
/// streams even for the same client.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Packet arrivals at the end of each slot.
    Arrival = 0,
    /// Channel success of a transmission attempted this slot.
    Channel = 1,
    /// Randomness consumed by the scheduling policy itself (tie breaks,
    /// random baseline).
    Policy = 2,
}

/// One addressable random stream; cheap to construct and `Copy`.
#[derive(Debug, Clone, Copy)]
pub struct KeyedStream {
    key: u64,
}

impl KeyedStream {
    pub fn new(seed: u64, replication: u32, client: u32, kind: StreamKind) -> Self {
        // Chain the address fields through the finalizer so that streams
        // differing in any one field decorrelate completely.
        let mut key = mix(seed ^ GAMMA);
        key = mix(key ^ (((replication as u64) << 32) | client as u64));
        key = mix(key ^ (kind as u64).wrapping_mul(GAMMA));
        KeyedStream { key }
    }

    /// Raw 64-bit value at a slot.
    #[inline]
    pub fn value_at(&self, slot: u64) -> u64 {
        mix(self.key.wrapping_add(slot.wrapping_mul(GAMMA)))
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform_at(&self, slot: u64) -> f64 {
        (self.value_at(slot) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw; `prob = 1.0` is always true (uniform is strictly < 1).
    #[inline]
    pub fn bernoulli_at(&self, slot: u64, prob: f64) -> bool {
        self.uniform_at(slot) < prob
    }

    /// Unbiased-enough index draw in `0..n` (64-bit multiply-shift).
    #[inline]
    pub fn index_at(&self, slot: u64, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.value_at(slot) as u128) * (n as u128)) >> 64) as usize
    }
}

/// The two per-client event streams of a simulation replication.
#[derive(Debug, Clone, Copy)]
pub struct ClientStreams {
    pub arrival: KeyedStream,
    pub channel: KeyedStream,
}

impl ClientStreams {
    pub fn new(seed: u64, replication: u32, client: u32) -> Self {
        ClientStreams {
            arrival: KeyedStream::new(seed, replication, client, StreamKind::Arrival),
            channel: KeyedStream::new(seed, replication, client, StreamKind::Channel),
        }
    }
}

/// Sample both slot events for one client. The channel bit is drawn from its
/// own keyed stream, so sampling it eagerly here is equivalent to the
/// engine's lazy draw for the scheduled client only.
pub fn sample_outcome(
    params: crate::model::ClientParams,
    streams: &ClientStreams,
    slot: u64,
) -> crate::model::SlotOutcome {
    crate::model::SlotOutcome {
        arrival: streams.arrival.bernoulli_at(slot, params.arrival_prob()),
        channel: streams.channel.bernoulli_at(slot, params.success_prob()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClientParams;

    #[test]
    fn draws_are_reproducible_across_instances() {
        let a = KeyedStream::new(7, 1, 3, StreamKind::Arrival);
        let b = KeyedStream::new(7, 1, 3, StreamKind::Arrival);
        for slot in [0u64, 1, 2, 999_999_999] {
            assert_eq!(a.value_at(slot), b.value_at(slot));
        }
    }

    #[test]
    fn any_address_field_changes_the_stream() {
        let base = KeyedStream::new(7, 1, 3, StreamKind::Arrival);
        let variants = [
            KeyedStream::new(8, 1, 3, StreamKind::Arrival),
            KeyedStream::new(7, 2, 3, StreamKind::Arrival),
            KeyedStream::new(7, 1, 4, StreamKind::Arrival),
            KeyedStream::new(7, 1, 3, StreamKind::Channel),
        ];
        for v in variants {
            let same = (0..64).filter(|&s| v.value_at(s) == base.value_at(s)).count();
            assert_eq!(same, 0);
        }
    }

    #[test]
    fn degenerate_probabilities() {
        let s = KeyedStream::new(1, 0, 0, StreamKind::Channel);
        for slot in 0..1000 {
            assert!(s.bernoulli_at(slot, 1.0));
            assert!(!s.bernoulli_at(slot, 0.0));
        }
    }

    #[test]
    fn empirical_rate_five_sigma() {
        // 1e6 Bernoulli(0.2) draws: sd of the mean is 0.0004, allow 5 sigma.
        let s = KeyedStream::new(123, 0, 0, StreamKind::Arrival);
        let hits = (0..1_000_000).filter(|&t| s.bernoulli_at(t, 0.2)).count();
        let rate = hits as f64 / 1e6;
        assert!((rate - 0.2).abs() < 0.002, "rate {rate}");
    }

    #[test]
    fn uniform_mean_is_centered() {
        let s = KeyedStream::new(5, 0, 9, StreamKind::Policy);
        let mean: f64 = (0..1_000_000).map(|t| s.uniform_at(t)).sum::<f64>() / 1e6;
        assert!((mean - 0.5).abs() < 0.002, "mean {mean}");
    }

    #[test]
    fn index_draws_cover_range() {
        let s = KeyedStream::new(5, 0, 9, StreamKind::Policy);
        let mut seen = [false; 7];
        for t in 0..10_000 {
            seen[s.index_at(t, 7)] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn sample_outcome_reads_both_purposes() {
        let params = ClientParams::new(1.0, 1.0).unwrap();
        let streams = ClientStreams::new(42, 0, 0);
        let o = sample_outcome(params, &streams, 17);
        assert!(o.arrival && o.channel);
    }
}
