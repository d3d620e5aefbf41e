//! Exact solution of the full scheduling problem for one or two clients.
//!
//! The joint state is the product of per-client `(packet_age, gap)` pairs,
//! both coordinates truncated at `age_cap` (transitions clamp at the edge).
//! Each slot the scheduler serves at most one client; the stage cost is the
//! sum of the clients' pre-decision ages `packet_age + gap`. Relative value
//! iteration yields the optimal per-client average age and the full decision
//! table, which the table-driven policy executes and the simulator is
//! checked against.

use super::{MdpError, STALL_WINDOW};
use crate::model::{ClientParams, ModelError};

/// Scheduling decision in the joint problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointAction {
    Idle,
    /// Serve the client with this position in the client list.
    Serve(usize),
}

/// The truncated joint scheduling problem.
#[derive(Debug, Clone)]
pub struct JointProblem {
    clients: Vec<ClientParams>,
    age_cap: u32,
}

impl JointProblem {
    pub fn new(clients: Vec<ClientParams>, age_cap: u32) -> Result<Self, MdpError> {
        if clients.is_empty() {
            return Err(ModelError::NoClients.into());
        }
        if clients.len() > 2 {
            return Err(MdpError::TooManyClients(clients.len()));
        }
        if age_cap < 4 {
            return Err(MdpError::AgeCapTooSmall(age_cap));
        }
        Ok(JointProblem { clients, age_cap })
    }

    pub fn clients(&self) -> &[ClientParams] {
        &self.clients
    }

    pub fn age_cap(&self) -> u32 {
        self.age_cap
    }

    /// Per-client state count: ages `1..=cap` by gaps `0..=cap`.
    fn states_per_client(&self) -> usize {
        self.age_cap as usize * (self.age_cap as usize + 1)
    }
}

/// Per-client transition kernel on the truncated `(packet_age, gap)` grid,
/// split into the branch pairs shared by every action.
///
/// Unserved (or failed delivery): the age total keeps growing —
/// arrival `(1, a+d)`, otherwise `(a+1, d)`. A successful delivery collapses
/// the gap — arrival `(1, a)`, otherwise `(a+1, 0)`. Successes happen with
/// probability `p` only when this client is served, so the served-client
/// expectation reuses the idle branches with weight `1 - p`.
struct Kernel {
    lam: f64,
    p: f64,
    idle_arr: Vec<u32>,
    idle_no: Vec<u32>,
    hit_arr: Vec<u32>,
    hit_no: Vec<u32>,
    cost: Vec<f64>,
}

impl Kernel {
    fn build(params: ClientParams, cap: u32) -> Kernel {
        let sidx = |a: u32, d: u32| -> u32 { (a - 1) * (cap + 1) + d };
        let n = (cap * (cap + 1)) as usize;
        let mut k = Kernel {
            lam: params.arrival_prob(),
            p: params.success_prob(),
            idle_arr: Vec::with_capacity(n),
            idle_no: Vec::with_capacity(n),
            hit_arr: Vec::with_capacity(n),
            hit_no: Vec::with_capacity(n),
            cost: Vec::with_capacity(n),
        };
        for a in 1..=cap {
            let na = (a + 1).min(cap);
            for d in 0..=cap {
                k.idle_arr.push(sidx(1, (a + d).min(cap)));
                k.idle_no.push(sidx(na, d));
                k.hit_arr.push(sidx(1, a.min(cap)));
                k.hit_no.push(sidx(na, 0));
                k.cost.push((a + d) as f64);
            }
        }
        k
    }
}

/// Expected next-slot value for a single client under `h`, idle branches.
#[inline]
fn e1(h: &[f64], row: usize, k: &Kernel, s: usize) -> f64 {
    k.lam * h[row + k.idle_arr[s] as usize] + (1.0 - k.lam) * h[row + k.idle_no[s] as usize]
}

/// Same, successful-delivery branches.
#[inline]
fn e1_hit(h: &[f64], row: usize, k: &Kernel, s: usize) -> f64 {
    k.lam * h[row + k.hit_arr[s] as usize] + (1.0 - k.lam) * h[row + k.hit_no[s] as usize]
}

/// Action values (serve-0, idle) at one single-client state, stage cost excluded.
#[inline]
fn q1(h: &[f64], k0: &Kernel, s0: usize) -> (f64, f64) {
    let idle = e1(h, 0, k0, s0);
    let hit = k0.lam * h[k0.hit_arr[s0] as usize] + (1.0 - k0.lam) * h[k0.hit_no[s0] as usize];
    let serve = (1.0 - k0.p) * idle + k0.p * hit;
    (serve, idle)
}

/// Action values (serve-0, serve-1, idle) at one two-client state, stage cost
/// excluded. `n1` is client 1's state count (the joint stride).
#[inline]
fn q2(h: &[f64], k0: &Kernel, k1: &Kernel, n1: usize, s0: usize, s1: usize) -> (f64, f64, f64) {
    let row_ia = k0.idle_arr[s0] as usize * n1;
    let row_in = k0.idle_no[s0] as usize * n1;
    let ei_a = e1(h, row_ia, k1, s1);
    let ei_n = e1(h, row_in, k1, s1);
    let idle = k0.lam * ei_a + (1.0 - k0.lam) * ei_n;
    let hit0 = k0.lam * e1(h, k0.hit_arr[s0] as usize * n1, k1, s1)
        + (1.0 - k0.lam) * e1(h, k0.hit_no[s0] as usize * n1, k1, s1);
    let serve0 = (1.0 - k0.p) * idle + k0.p * hit0;
    let hit1 = k0.lam * e1_hit(h, row_ia, k1, s1) + (1.0 - k0.lam) * e1_hit(h, row_in, k1, s1);
    let serve1 = (1.0 - k1.p) * idle + k1.p * hit1;
    (serve0, serve1, idle)
}

const IDLE_CODE: u8 = u8::MAX;

/// Converged solution of the joint problem.
#[derive(Debug, Clone)]
pub struct JointSolution {
    clients: Vec<ClientParams>,
    age_cap: u32,
    j_per_client: f64,
    bias: Vec<f64>,
    policy: Vec<u8>,
    saturated: bool,
    iterations: u64,
    span: f64,
}

impl JointSolution {
    pub fn clients(&self) -> &[ClientParams] {
        &self.clients
    }

    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn age_cap(&self) -> u32 {
        self.age_cap
    }

    /// Optimal long-run average age per client (total average cost / N).
    pub fn avg_aoi_per_client(&self) -> f64 {
        self.j_per_client
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Span of the final value-iteration step.
    pub fn span(&self) -> f64 {
        self.span
    }

    /// True when the optimal policy idles in a state whose gap touches the
    /// cap: urgency there is distorted by the truncation, so the cap should
    /// be enlarged before the table is trusted.
    pub fn saturated(&self) -> bool {
        self.saturated
    }

    /// Error form of [`Self::saturated`] for checked pipelines.
    pub fn check_saturation(&self) -> Result<(), MdpError> {
        if self.saturated {
            Err(MdpError::TruncationSaturated { d_max: self.age_cap })
        } else {
            Ok(())
        }
    }

    fn clamp_sidx(&self, (a, d): (u32, u32)) -> usize {
        let cap = self.age_cap;
        let a = a.clamp(1, cap);
        let d = d.min(cap);
        ((a - 1) * (cap + 1) + d) as usize
    }

    fn joint_idx(&self, states: &[(u32, u32)]) -> usize {
        assert_eq!(states.len(), self.clients.len(), "state count != client count");
        let mut idx = 0usize;
        for &s in states {
            idx = idx * self.states_per_client() + self.clamp_sidx(s);
        }
        idx
    }

    fn states_per_client(&self) -> usize {
        self.age_cap as usize * (self.age_cap as usize + 1)
    }

    /// Optimal action for the given per-client `(packet_age, gap)` states.
    /// Out-of-range coordinates clamp onto the table's grid.
    pub fn action(&self, states: &[(u32, u32)]) -> JointAction {
        match self.policy[self.joint_idx(states)] {
            IDLE_CODE => JointAction::Idle,
            i => JointAction::Serve(i as usize),
        }
    }

    /// Every action whose value is optimal at this state (within 1e-9),
    /// in the order serve-0, serve-1, idle. The stored table picks the first.
    pub fn optimal_actions(&self, states: &[(u32, u32)]) -> Vec<JointAction> {
        let idx = self.joint_idx(states);
        let qs: Vec<(JointAction, f64)> = match self.clients.len() {
            1 => {
                let k0 = Kernel::build(self.clients[0], self.age_cap);
                let (s, i) = q1(&self.bias, &k0, idx);
                vec![(JointAction::Serve(0), s), (JointAction::Idle, i)]
            }
            _ => {
                let k0 = Kernel::build(self.clients[0], self.age_cap);
                let k1 = Kernel::build(self.clients[1], self.age_cap);
                let n1 = self.states_per_client();
                let (s0, s1, i) = q2(&self.bias, &k0, &k1, n1, idx / n1, idx % n1);
                vec![
                    (JointAction::Serve(0), s0),
                    (JointAction::Serve(1), s1),
                    (JointAction::Idle, i),
                ]
            }
        };
        let best = qs.iter().map(|&(_, q)| q).fold(f64::INFINITY, f64::min);
        let eps = 1e-9 * (1.0 + best.abs());
        qs.into_iter().filter(|&(_, q)| q <= best + eps).map(|(a, _)| a).collect()
    }
}

/// Solve the joint problem by relative value iteration (reference state:
/// every client fresh at `(1, 0)`). Convergence, damping, and the stall
/// fallback mirror the single-client solver; ties prefer serving, lower
/// client position first.
pub fn solve_joint_optimal(
    prob: &JointProblem,
    tol: f64,
    max_iter: u64,
) -> Result<JointSolution, MdpError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let cap = prob.age_cap;
    let kernels: Vec<Kernel> =
        prob.clients.iter().map(|&c| Kernel::build(c, cap)).collect();
    let per = prob.states_per_client();
    let n = per.pow(prob.clients.len() as u32);

    let mut h = vec![0.0; n];
    let mut th = vec![0.0; n];

    let deterministic = prob
        .clients
        .iter()
        .all(|c| c.arrival_prob() == 1.0 && c.success_prob() == 1.0);
    let mut damp = if deterministic { 0.5 } else { 1.0 };
    let mut span_at_check = f64::INFINITY;

    let mut converged_at = None;
    let mut final_span = f64::INFINITY;

    for it in 1..=max_iter {
        match kernels.as_slice() {
            [k0] => {
                for s0 in 0..per {
                    let (serve, idle) = q1(&h, k0, s0);
                    th[s0] = k0.cost[s0] + serve.min(idle);
                }
            }
            [k0, k1] => {
                for s0 in 0..per {
                    let c0 = k0.cost[s0];
                    for s1 in 0..per {
                        let (q_s0, q_s1, q_i) = q2(&h, k0, k1, per, s0, s1);
                        th[s0 * per + s1] = c0 + k1.cost[s1] + q_s0.min(q_s1).min(q_i);
                    }
                }
            }
            _ => unreachable!("constructor caps the client count at 2"),
        }
        let t_ref = th[0];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let step = damp * (th[i] - t_ref - h[i]);
            h[i] += step;
            if step < lo {
                lo = step;
            }
            if step > hi {
                hi = step;
            }
        }
        let span = hi - lo;
        final_span = span;
        if span < tol {
            converged_at = Some((it, t_ref));
            break;
        }
        if it % STALL_WINDOW == 0 {
            if damp == 1.0 && span > 0.9 * span_at_check {
                damp = 0.5;
            }
            span_at_check = span;
        }
    }

    let (iterations, t_ref) = converged_at.ok_or(MdpError::NonConvergence {
        iterations: max_iter,
        span: final_span,
        tol,
    })?;

    // Extract the decision table; flag truncation if the policy ever idles
    // while some gap sits on the cap.
    let mut policy = vec![IDLE_CODE; n];
    let mut saturated = false;
    let gap_capped = |s: usize| s % (cap as usize + 1) == cap as usize;
    match kernels.as_slice() {
        [k0] => {
            for s0 in 0..per {
                let (serve, idle) = q1(&h, k0, s0);
                if serve <= idle {
                    policy[s0] = 0;
                } else if gap_capped(s0) {
                    saturated = true;
                }
            }
        }
        [k0, k1] => {
            for s0 in 0..per {
                for s1 in 0..per {
                    let (q_s0, q_s1, q_i) = q2(&h, k0, k1, per, s0, s1);
                    let i = s0 * per + s1;
                    if q_s0 <= q_s1 && q_s0 <= q_i {
                        policy[i] = 0;
                    } else if q_s1 <= q_i {
                        policy[i] = 1;
                    } else if gap_capped(s0) || gap_capped(s1) {
                        saturated = true;
                    }
                }
            }
        }
        _ => unreachable!(),
    }

    Ok(JointSolution {
        clients: prob.clients.clone(),
        age_cap: cap,
        j_per_client: t_ref / prob.clients.len() as f64,
        bias: h,
        policy,
        saturated,
        iterations,
        span: final_span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64, p: f64) -> ClientParams {
        ClientParams::new(l, p).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        let c = params(0.5, 0.5);
        assert!(matches!(
            JointProblem::new(vec![], 8),
            Err(MdpError::Model(ModelError::NoClients))
        ));
        assert!(matches!(
            JointProblem::new(vec![c; 3], 8),
            Err(MdpError::TooManyClients(3))
        ));
        assert!(matches!(
            JointProblem::new(vec![c], 3),
            Err(MdpError::AgeCapTooSmall(3))
        ));
    }

    #[test]
    fn single_deterministic_client_averages_two() {
        // certain arrivals + certain channel: age alternates at 2 forever
        let prob = JointProblem::new(vec![params(1.0, 1.0)], 6).unwrap();
        let sol = solve_joint_optimal(&prob, 1e-10, 200_000).unwrap();
        assert!((sol.avg_aoi_per_client() - 2.0).abs() < 1e-6, "{}", sol.avg_aoi_per_client());
        assert_eq!(sol.action(&[(1, 1)]), JointAction::Serve(0));
        assert!(!sol.saturated());
    }

    #[test]
    fn single_client_matches_renewal_formula() {
        // always-serving one client gives mean age Delta + 1 by renewal
        // reward, and serving is weakly dominant, so that is the optimum
        let c = params(0.6, 0.9);
        let prob = JointProblem::new(vec![c], 24).unwrap();
        let sol = solve_joint_optimal(&prob, 1e-10, 200_000).unwrap();
        let expect = 1.0 / 0.6 + 0.1 / 0.9 + 1.0;
        assert!(
            (sol.avg_aoi_per_client() - expect).abs() < 1e-6,
            "got {} want {expect}",
            sol.avg_aoi_per_client()
        );
    }

    #[test]
    fn two_deterministic_clients_average_two_and_a_half() {
        // alternate service: each client's age cycles 2,3,2,3
        let prob = JointProblem::new(vec![params(1.0, 1.0); 2], 6).unwrap();
        let sol = solve_joint_optimal(&prob, 1e-10, 200_000).unwrap();
        assert!((sol.avg_aoi_per_client() - 2.5).abs() < 1e-6, "{}", sol.avg_aoi_per_client());
        assert!(!sol.saturated());
    }

    #[test]
    fn identical_clients_have_swap_symmetric_optima() {
        // the optimal action *sets* are swap-symmetric; the stored table
        // breaks ties toward the lower client position, so compare sets
        let prob = JointProblem::new(vec![params(0.7, 0.8); 2], 6).unwrap();
        let sol = solve_joint_optimal(&prob, 1e-10, 200_000).unwrap();
        let swap = |a: JointAction| match a {
            JointAction::Serve(0) => JointAction::Serve(1),
            JointAction::Serve(1) => JointAction::Serve(0),
            other => other,
        };
        for a0 in 1..=6u32 {
            for d0 in 0..=6u32 {
                for a1 in 1..=6u32 {
                    for d1 in 0..=6u32 {
                        let fwd = sol.optimal_actions(&[(a0, d0), (a1, d1)]);
                        let mut mapped: Vec<JointAction> =
                            fwd.into_iter().map(swap).collect();
                        mapped.sort_by_key(|a| match a {
                            JointAction::Serve(i) => *i,
                            JointAction::Idle => usize::MAX,
                        });
                        let rev = sol.optimal_actions(&[(a1, d1), (a0, d0)]);
                        assert_eq!(mapped, rev, "asymmetry at ({a0},{d0})/({a1},{d1})");
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_clients_solve_cleanly() {
        let prob =
            JointProblem::new(vec![params(0.6, 0.9), params(0.6, 0.6)], 8).unwrap();
        let sol = solve_joint_optimal(&prob, 1e-9, 200_000).unwrap();
        assert!(!sol.saturated());
        assert!(sol.avg_aoi_per_client() > 1.0);
        // out-of-range lookups clamp instead of panicking
        let _ = sol.action(&[(100, 100), (1, 0)]);
    }
}
