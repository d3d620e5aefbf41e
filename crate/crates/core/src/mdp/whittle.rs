//! Numeric Whittle index: the smallest subsidy that makes idling optimal in
//! a given state, found by bisection over converged subsidy-problem solves.
//!
//! This is the slow, assumption-free reference the closed-form index is
//! validated against. Each probe solves the full truncated grid, so the
//! bisection warm-starts every solve from the previous bias to keep the
//! total cost close to a single cold solve.

use super::{
    solve_decoupled_with_init, Action, DecoupledProblem, MdpError, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::model::ClientParams;

/// Action chosen in `(packet_age, gap)` once the subsidy-`w` problem has
/// converged, reusing `warm` as the starting bias when shapes match.
fn probe(
    packet_age: u32,
    gap: u32,
    params: ClientParams,
    w: f64,
    prob_shape: (u32, u32),
    warm: &mut Option<Vec<f64>>,
) -> Result<Action, MdpError> {
    let prob = DecoupledProblem::unchecked(params, w, prob_shape.0, prob_shape.1);
    let sol = solve_decoupled_with_init(&prob, DEFAULT_TOL, DEFAULT_MAX_ITER, warm.take())?;
    let act = sol.action(packet_age, gap);
    *warm = Some(sol.into_bias());
    Ok(act)
}

/// Smallest subsidy making idling optimal in `(packet_age, gap)`, to within
/// `tol_w`, searched over `[0, w_hi]`.
///
/// A zero gap has nothing to send that would change the receiver's state, so
/// its index is exactly 0. Otherwise the subsidy axis is scanned coarsely to
/// confirm the active set shrinks monotonically with the subsidy and that
/// `w_hi` actually brackets the switch; both failure modes are reported
/// rather than silently clamped.
pub fn numeric_whittle(
    packet_age: u32,
    gap: u32,
    params: ClientParams,
    w_hi: f64,
    tol_w: f64,
) -> Result<f64, MdpError> {
    assert!(packet_age >= 1, "packet age starts at 1");
    assert!(w_hi > 0.0 && tol_w > 0.0);
    if gap == 0 {
        return Ok(0.0);
    }

    // One grid reused for the whole search, sized for the largest subsidy.
    let (mut need_a, mut need_d) = DecoupledProblem::min_bounds(params, w_hi);
    need_a = need_a.max(packet_age + 8);
    need_d = need_d.max(packet_age + gap + 8);
    let shape = (need_a + 8, need_d + 12);

    let mut warm: Option<Vec<f64>> = None;
    let probe_at =
        |w: f64, warm: &mut Option<Vec<f64>>| probe(packet_age, gap, params, w, shape, warm);

    // Coarse sweep: activity must be a prefix of the subsidy axis.
    let sweep = [0.0, 0.25 * w_hi, 0.5 * w_hi, 0.75 * w_hi, w_hi];
    let mut acts = [Action::Idle; 5];
    for (i, &w) in sweep.iter().enumerate() {
        acts[i] = probe_at(w, &mut warm)?;
    }
    for i in 1..sweep.len() {
        if acts[i] == Action::Update && acts[i - 1] == Action::Idle {
            return Err(MdpError::NonMonotonePassivity {
                packet_age,
                gap,
                w: sweep[i],
            });
        }
    }
    if acts[0] == Action::Idle {
        // Idle even unsubsidized: the switch point is at or below zero.
        return Ok(0.0);
    }
    if acts[4] == Action::Update {
        return Err(MdpError::BracketFailure { packet_age, gap, w_hi });
    }

    // Tightest bracket the sweep established, then bisect.
    let mut lo = sweep[acts.iter().rposition(|&a| a == Action::Update).unwrap()];
    let mut hi = sweep[acts.iter().position(|&a| a == Action::Idle).unwrap()];
    while hi - lo > tol_w {
        let mid = 0.5 * (lo + hi);
        match probe_at(mid, &mut warm)? {
            Action::Update => lo = mid,
            Action::Idle => hi = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}
