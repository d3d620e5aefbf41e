//! Machine checks of the structural properties the approximate index rests
//! on, evaluated on a converged subsidy-problem solution.
//!
//! All checks run on *interior* states: far enough from the truncation
//! boundary that clipped transitions cannot leak measurable bias in. Bias
//! differences survive a slot with probability `1-lambda` (no arrival, on the
//! idle column) or `1-p` (failed delivery, in the active region) while total
//! age climbs by one, so clipping at the far diagonal decays into the
//! interior at `max(1-lambda, 1-p)` per slot; clipping at the age boundary
//! decays at `1-lambda`. Margins push both below the shared target that also
//! sizes verification grids.

use super::{decay_slots, Action, MdpSolution, INTERIOR_DECAY};
use crate::index::{limiting_threshold, mean_refresh_interval, ThresholdBounds};

/// Outcome of one structural check.
#[derive(Debug, Clone, Copy)]
pub struct CheckResult {
    /// Largest absolute deviation observed (0 when nothing was checked).
    pub residual: f64,
    /// Number of states (or state pairs) examined.
    pub checked: usize,
    pub pass: bool,
}

impl CheckResult {
    fn empty() -> Self {
        CheckResult { residual: 0.0, checked: 0, pass: true }
    }
}

/// Residuals of the structural identities on the interior of the grid.
#[derive(Debug, Clone)]
pub struct StructureReport {
    /// Idle states with equal total age `packet_age + gap` share one bias value.
    pub passive_diagonal_bias: CheckResult,
    /// Bias climb from gap 0 to the activation threshold equals `W/p`
    /// (allowing one gap increment of slack for the integer threshold).
    pub threshold_bias_jump: CheckResult,
    /// Beyond the stable threshold, one unit of gap adds `(1-p)/p` bias.
    pub stable_gap_increment: CheckResult,
    /// Beyond the stable threshold, one unit of packet age at gap 0 adds
    /// `Delta` bias.
    pub stable_age_increment: CheckResult,
    /// The activation threshold settles at the limiting value (within 1).
    pub stable_threshold: CheckResult,
    /// Bias never decreases in the gap.
    pub bias_monotone_in_gap: CheckResult,
    /// Activation thresholds never decrease in the packet age.
    pub threshold_monotone_in_age: CheckResult,
    /// Each age row is idle below its threshold and updates above it.
    pub policy_is_threshold: CheckResult,
    /// Extracted thresholds respect the closed-form upper bounds (+1 slack).
    pub threshold_bounds_hold: CheckResult,
    /// Closed form of the idle-column bias,
    /// `h(a,0) = (a-1)(J_raw + W) - a(a-1)/2`, up to the first threshold.
    pub idle_bias_closed_form: CheckResult,
}

impl StructureReport {
    pub fn rows(&self) -> [(&'static str, &CheckResult); 10] {
        [
            ("passive_diagonal_bias", &self.passive_diagonal_bias),
            ("threshold_bias_jump", &self.threshold_bias_jump),
            ("stable_gap_increment", &self.stable_gap_increment),
            ("stable_age_increment", &self.stable_age_increment),
            ("stable_threshold", &self.stable_threshold),
            ("bias_monotone_in_gap", &self.bias_monotone_in_gap),
            ("threshold_monotone_in_age", &self.threshold_monotone_in_age),
            ("policy_is_threshold", &self.policy_is_threshold),
            ("threshold_bounds_hold", &self.threshold_bounds_hold),
            ("idle_bias_closed_form", &self.idle_bias_closed_form),
        ]
    }

    pub fn all_pass(&self) -> bool {
        self.rows().iter().all(|(_, c)| c.pass)
    }

    /// Total states/pairs examined across all checks.
    pub fn total_checked(&self) -> usize {
        self.rows().iter().map(|(_, c)| c.checked).sum()
    }
}

/// Run every structural check on a converged solution.
///
/// `tol` is the residual tolerance for the exact-identity checks (the
/// acceptance suite uses 1e-6). Monotonicity and threshold-shape checks use
/// a fixed 1e-9 numerical allowance; the integer-threshold checks allow the
/// documented +-1 slack.
pub fn verify_structure(sol: &MdpSolution, tol: f64) -> StructureReport {
    let prob = *sol.problem();
    let params = prob.params();
    let l = params.arrival_prob();
    let p = params.success_prob();
    let w = prob.subsidy();
    let a_max = prob.a_max();
    let d_max = prob.d_max();
    let dstar_c = limiting_threshold(w, params).ceil() as u32;
    let m_a = decay_slots(1.0 - l, INTERIOR_DECAY);
    let m_d = decay_slots((1.0 - l).max(1.0 - p), INTERIOR_DECAY);
    let interior = |a: u32, d: u32| a + m_a <= a_max && a + d + m_d + dstar_c <= d_max;
    const EPS: f64 = 1e-9;

    // idle states with the same total age share one bias value
    let passive_diagonal_bias = {
        let mut residual = 0.0f64;
        let mut checked = 0usize;
        let k_hi = d_max.saturating_sub(m_d + dstar_c);
        for k in 2..=k_hi {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            let mut members = 0usize;
            for a in 1..=k.min(a_max) {
                let d = k - a;
                if d > d_max || !interior(a, d) {
                    continue;
                }
                if sol.action(a, d) == Action::Idle {
                    let v = sol.bias(a, d);
                    lo = lo.min(v);
                    hi = hi.max(v);
                    members += 1;
                }
            }
            if members >= 2 {
                residual = residual.max(hi - lo);
                checked += members;
            }
        }
        CheckResult { residual, checked, pass: residual <= tol }
    };

    // climb from h(a,0) to h(a,D_a) equals W/p, one gap increment of slack
    let threshold_bias_jump = {
        let mut residual = 0.0f64;
        let mut checked = 0usize;
        let mut pass = true;
        for a in 1..a_max {
            let t = sol.threshold(a);
            if t == 0 || t > d_max || !interior(a, t) {
                continue;
            }
            let raw = (sol.bias(a, t) - sol.bias(a, 0) - w / p).abs();
            let slack = (sol.bias(a, t) - sol.bias(a, t - 1)).max(0.0);
            residual = residual.max(raw);
            checked += 1;
            if raw > slack + tol {
                pass = false;
            }
        }
        CheckResult { residual, checked, pass }
    };

    // one unit of gap adds (1-p)/p beyond the stable threshold
    let stable_gap_increment = {
        let g = (1.0 - p) / p;
        let mut residual = 0.0f64;
        let mut checked = 0usize;
        for a in 1..=a_max {
            for d in dstar_c..d_max {
                if !interior(a, d + 1) {
                    break;
                }
                let r = (sol.bias(a, d + 1) - sol.bias(a, d) - g).abs();
                residual = residual.max(r);
                checked += 1;
            }
        }
        CheckResult { residual, checked, pass: residual <= tol }
    };

    // one unit of age at gap 0 adds Delta beyond the stable threshold
    let stable_age_increment = {
        let delta = mean_refresh_interval(params);
        let mut residual = 0.0f64;
        let mut checked = 0usize;
        for a in dstar_c.max(1)..a_max {
            if !interior(a + 1, 0) {
                break;
            }
            let r = (sol.bias(a + 1, 0) - sol.bias(a, 0) - delta).abs();
            residual = residual.max(r);
            checked += 1;
        }
        CheckResult { residual, checked, pass: residual <= tol }
    };

    // threshold settles at the limiting value, probed at the deepest interior age
    let stable_threshold = {
        let dstar = limiting_threshold(w, params);
        let probe = (1..=a_max).rev().find(|&a| interior(a, 0) && a >= dstar_c + 2);
        match probe {
            Some(a) => {
                let residual = (sol.threshold(a) as f64 - dstar).abs();
                CheckResult { residual, checked: 1, pass: residual <= 1.0 + EPS }
            }
            None => CheckResult::empty(),
        }
    };

    let bias_monotone_in_gap = {
        let mut residual = 0.0f64;
        let mut checked = 0usize;
        for a in 1..=a_max {
            for d in 0..d_max {
                if !interior(a, d + 1) {
                    break;
                }
                residual = residual.max(sol.bias(a, d) - sol.bias(a, d + 1));
                checked += 1;
            }
        }
        CheckResult { residual: residual.max(0.0), checked, pass: residual <= EPS }
    };

    let threshold_monotone_in_age = {
        let mut residual = 0i64;
        let mut checked = 0usize;
        for a in 1..a_max {
            if !interior(a + 1, 0) {
                break;
            }
            let drop = sol.threshold(a) as i64 - sol.threshold(a + 1) as i64;
            residual = residual.max(drop);
            checked += 1;
        }
        CheckResult { residual: residual.max(0) as f64, checked, pass: residual <= 0 }
    };

    // idle strictly below the row threshold, update at and above it
    let policy_is_threshold = {
        let mut violations = 0usize;
        let mut checked = 0usize;
        for a in 1..=a_max {
            let t = sol.threshold(a);
            for d in 0..=d_max {
                if !interior(a, d) {
                    break;
                }
                checked += 1;
                let want_update = d >= t;
                let is_update = sol.action(a, d) == Action::Update;
                if want_update != is_update {
                    violations += 1;
                }
            }
        }
        CheckResult { residual: violations as f64, checked, pass: violations == 0 }
    };

    // extracted thresholds never exceed the closed-form bounds by more than 1
    let threshold_bounds_hold = {
        let bounds = ThresholdBounds::new(w, params);
        let mut residual = 0.0f64;
        let mut checked = 0usize;
        for a in 1..=a_max {
            if !interior(a, 0) || sol.threshold(a) > d_max {
                continue;
            }
            let excess = sol.threshold(a) as f64 - bounds.at(a as u64);
            residual = residual.max(excess);
            checked += 1;
        }
        CheckResult { residual: residual.max(0.0), checked, pass: residual <= 1.0 + EPS }
    };

    // closed form of the idle column up to the first threshold; the raw
    // average cost plus the subsidy is the J the recursion telescopes with
    let idle_bias_closed_form = {
        let d1 = sol.threshold(1);
        if d1 > d_max {
            CheckResult::empty()
        } else {
            let j_tilde = sol.bellman_avg_cost() + w;
            let mut residual = 0.0f64;
            let mut checked = 0usize;
            for a in 1..=d1.min(a_max) {
                if !interior(a, 0) {
                    break;
                }
                let af = a as f64;
                let expect = (af - 1.0) * j_tilde - af * (af - 1.0) / 2.0;
                residual = residual.max((sol.bias(a, 0) - expect).abs());
                checked += 1;
            }
            CheckResult { residual, checked, pass: residual <= tol }
        }
    };

    StructureReport {
        passive_diagonal_bias,
        threshold_bias_jump,
        stable_gap_increment,
        stable_age_increment,
        stable_threshold,
        bias_monotone_in_gap,
        threshold_monotone_in_age,
        policy_is_threshold,
        threshold_bounds_hold,
        idle_bias_closed_form,
    }
}
