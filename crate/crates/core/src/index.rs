//! Closed-form scheduling quantities.
//!
//! The scheduler ranks clients by an approximate Whittle index computed from
//! the client's `(packet_age, freshness_gap)` state and its `(lambda, p)`
//! parameters. The index is piecewise: quadratic where a delivery would
//! follow a long build-up, linear where deliveries are routine. This module
//! also exposes the threshold bounds the index is built from and the
//! network-wide AoI lower bound used to calibrate simulations.

use crate::model::{ClientParams, ModelError};

/// Expected slots per effective refresh opportunity,
/// `1/lambda + (1 - p)/p`: mean wait for a fresh packet plus the mean number
/// of extra transmission attempts a delivery costs.
pub fn mean_refresh_interval(params: ClientParams) -> f64 {
    1.0 / params.arrival_prob() + (1.0 - params.success_prob()) / params.success_prob()
}

/// A nonnegative scheduling priority; larger means more urgent.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct IndexValue(f64);

impl IndexValue {
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Which piece of the index formula applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexBranch {
    Quadratic,
    Linear,
}

/// Full evaluation trace of the index at one state, for inspection.
#[derive(Debug, Clone, Copy)]
pub struct IndexBreakdown {
    pub index: f64,
    pub branch: IndexBranch,
    /// Effective build-up length the quadratic piece prices.
    pub x: f64,
    pub quadratic_value: f64,
    pub linear_value: f64,
    /// Branch test: quadratic iff `condition_lhs >= condition_rhs`.
    pub condition_lhs: f64,
    pub condition_rhs: f64,
}

pub(crate) fn index_breakdown_real(a: f64, d: f64, params: ClientParams) -> IndexBreakdown {
    debug_assert!(a >= 1.0 && d >= 0.0);
    let delta = mean_refresh_interval(params);
    let p = params.success_prob();
    let x = (d * delta + a * (a - 1.0) / 2.0) / (a - 1.0 + delta);
    let quadratic_value = p / 2.0 * x * x + p * (delta - 0.5) * x;
    let linear_value = p * d * delta;
    let condition_lhs = d * delta / a;
    let condition_rhs = (a - 1.0) / 2.0 + delta;
    let branch =
        if condition_lhs >= condition_rhs { IndexBranch::Quadratic } else { IndexBranch::Linear };
    let index = match branch {
        IndexBranch::Quadratic => quadratic_value,
        IndexBranch::Linear => linear_value,
    };
    IndexBreakdown { index, branch, x, quadratic_value, linear_value, condition_lhs, condition_rhs }
}

/// Evaluation trace of [`approx_whittle_index`] at an integer state.
pub fn index_breakdown(packet_age: u64, gap: u64, params: ClientParams) -> IndexBreakdown {
    assert!(packet_age >= 1, "packet_age must be at least 1");
    index_breakdown_real(packet_age as f64, gap as f64, params)
}

/// Approximate Whittle index of a client at `(packet_age, gap)`.
///
/// Zero gap means the buffered packet is already delivered, so the index is
/// zero. Ties at the branch boundary take the quadratic piece; the two pieces
/// agree exactly there (the build-up `x` equals `packet_age` on the
/// boundary), so the choice only fixes the evaluation path.
pub fn approx_whittle_index(packet_age: u64, gap: u64, params: ClientParams) -> IndexValue {
    if gap == 0 {
        return IndexValue(0.0);
    }
    IndexValue(index_breakdown(packet_age, gap, params).index)
}

/// Upper bound on the activation threshold at `packet_age = 1`:
/// `sqrt(2W/p + (Delta - 1/2)^2) - (Delta - 1/2)`.
pub fn first_threshold_bound(subsidy: f64, params: ClientParams) -> f64 {
    debug_assert!(subsidy >= 0.0);
    let delta = mean_refresh_interval(params);
    let c = delta - 0.5;
    (2.0 * subsidy / params.success_prob() + c * c).sqrt() - c
}

/// Threshold the activation boundary settles at for large `packet_age`:
/// `lambda W / (lambda + p - p lambda)`, equivalently `W / (p Delta)`.
pub fn limiting_threshold(subsidy: f64, params: ClientParams) -> f64 {
    debug_assert!(subsidy >= 0.0);
    let l = params.arrival_prob();
    let p = params.success_prob();
    l * subsidy / (l + p - p * l)
}

pub(crate) fn threshold_bound_real(a: f64, subsidy: f64, params: ClientParams) -> f64 {
    debug_assert!(a >= 1.0);
    if subsidy == 0.0 {
        return 0.0;
    }
    let delta = mean_refresh_interval(params);
    let p = params.success_prob();
    let d1 = first_threshold_bound(subsidy, params);
    if a <= d1 {
        (a - 1.0) / delta * (subsidy / (p * d1) + (d1 + 1.0 - a) / 2.0 - delta) + d1
    } else {
        subsidy / (p * delta)
    }
}

/// Per-`packet_age` upper bound on the activation threshold. Piecewise: a
/// quadratic-in-`a` bound up to the first-threshold bound, then the limiting
/// value `W/(p Delta)`. At `packet_age = 1` it returns
/// [`first_threshold_bound`] exactly; with zero subsidy it is zero.
pub fn threshold_bound(packet_age: u64, subsidy: f64, params: ClientParams) -> f64 {
    assert!(packet_age >= 1, "packet_age must be at least 1");
    threshold_bound_real(packet_age as f64, subsidy, params)
}

/// The threshold bounds for one `(subsidy, params)` pair, bundled.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdBounds {
    params: ClientParams,
    subsidy: f64,
    first: f64,
    limiting: f64,
}

impl ThresholdBounds {
    pub fn new(subsidy: f64, params: ClientParams) -> Self {
        ThresholdBounds {
            params,
            subsidy,
            first: first_threshold_bound(subsidy, params),
            limiting: limiting_threshold(subsidy, params),
        }
    }

    /// Bound at `packet_age = 1`.
    pub fn first(&self) -> f64 {
        self.first
    }

    /// Bound for large `packet_age` (the stable threshold).
    pub fn limiting(&self) -> f64 {
        self.limiting
    }

    /// Bound at a given `packet_age`.
    pub fn at(&self, packet_age: u64) -> f64 {
        threshold_bound(packet_age, self.subsidy, self.params)
    }
}

/// Network AoI lower bound `(1/2N) (sum_i 1/sqrt(p_i))^2 + 1/2` over the
/// clients' channel probabilities. No policy can average below this.
pub fn aoi_lower_bound(success_probs: &[f64]) -> Result<f64, ModelError> {
    if success_probs.is_empty() {
        return Err(ModelError::NoClients);
    }
    let mut sum = 0.0;
    for &p in success_probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(ModelError::InvalidSuccessProb(p));
        }
        sum += 1.0 / p.sqrt();
    }
    Ok(sum * sum / (2.0 * success_probs.len() as f64) + 0.5)
}
