//! Plans in which the rear-end headway to the same-lane leader becomes active.
//!
//! A plan is a cubic pre-arc from entry to the first contact `t1`, a
//! boundary-riding arc, and optionally a cubic post-arc from the exit `t2`
//! to the merging point. For each candidate `t1` everything downstream is
//! determined; the cost `J(t1)` is then minimized over the feasible entry
//! times by a grid followed by golden-section refinement.

mod arc;
mod exit;
mod pre_arc;

pub use arc::{arc_solution, Arc};
pub use exit::{exit_candidates_case_a, exit_candidates_case_b, exit_system_case_a, exit_system_case_b, ExitSolution};
pub use pre_arc::{entry_indicator, pre_arc_coeffs};

use crate::error::{Error, Result};
use crate::model::{ExpSegment, PolySegment, ScenarioParams, Segment, Trajectory};
use crate::roots::{adaptive_simpson, golden_section};
use crate::safety::{scan_pieces, Headway, TOL_GAP};
use crate::unconstrained::{solve_case_b, CaseBParams, MergeTarget};

/// Spacing of the coarse search over entry times.
pub const T1_GRID: f64 = 0.05;
/// Final width of the golden-section refinement.
pub const T1_TOL: f64 = 1e-4;
/// Candidates this close to the entry time are skipped.
pub const T1_EXCLUSION: f64 = 1e-3;
const INFEASIBLE_GRID: f64 = 1e-2;
const INFEASIBLE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedPlan {
    pub t0: f64,
    /// First contact with the headway boundary.
    pub t1: f64,
    /// Exit from the boundary, if the plan leaves it before the merging point.
    pub t2: Option<f64>,
    pub pre_arc: PolySegment,
    /// Boundary-riding pieces, split where the leader's representation changes.
    pub arc: Vec<ExpSegment>,
    pub post_arc: Option<PolySegment>,
    pub t_m: f64,
    pub j_star: f64,
    /// Entry times that cannot be a first contact.
    pub infeasible_set: Vec<(f64, f64)>,
    /// Coarse-grid samples of `J(t1)`; `None` where no valid plan exists.
    pub j_curve: Vec<(f64, Option<f64>)>,
    /// Set when the optimum touches the boundary only at the merging point and
    /// the plan was re-solved with the headway as a terminal condition.
    pub terminal_contact: bool,
}

impl ConstrainedPlan {
    pub fn trajectory(&self) -> Result<Trajectory> {
        let mut segs = vec![Segment::Poly(self.pre_arc.clone())];
        segs.extend(self.arc.iter().cloned().map(Segment::Exp));
        if let Some(p) = &self.post_arc {
            segs.push(Segment::Poly(p.clone()));
        }
        Trajectory::new(segs, None)
    }

    pub fn infeasible_lower_boundary(&self) -> Option<f64> {
        self.infeasible_set.first().map(|iv| iv.0)
    }
}

/// `β (t_m - t0) + ∫ ½u²` for a pre-arc, arc and optional post-arc.
///
/// Exponential pieces are integrated in closed form; adaptive quadrature
/// takes over if that ever produces a non-finite value.
pub fn objective_of_t1(pre: &PolySegment, arc: &[ExpSegment], post: Option<&PolySegment>, beta: f64) -> f64 {
    let t_m = post
        .map(|p| p.t_end)
        .or_else(|| arc.last().map(|a| a.t_end))
        .unwrap_or(pre.t_end);
    let mut j = beta * (t_m - pre.t_start) + pre.control_energy();
    for seg in arc {
        let e = seg.control_energy();
        j += if e.is_finite() {
            e
        } else {
            adaptive_simpson(&|t: f64| 0.5 * seg.state_at(t).u.powi(2), seg.t_start, seg.t_end, 1e-12)
        };
    }
    if let Some(p) = post {
        j += p.control_energy();
    }
    j
}

fn headway(p: &ScenarioParams) -> Headway {
    Headway {
        phi: p.phi,
        delta: p.delta,
    }
}

fn pre_arc_at(t1: f64, t0: f64, v0: f64, leader: &Trajectory, h: Headway) -> Option<PolySegment> {
    let l = leader.eval(t1).ok()?;
    pre_arc_coeffs(t1, t0, v0, l, h).ok()
}

/// Whether the slack of `pre` dips below zero strictly before its end.
fn violates_before_end(pre: &PolySegment, leader: &Trajectory, h: Headway) -> bool {
    let piece = ExpSegment::polynomial(pre.t_start, pre.t_end, pre.x_poly());
    match scan_pieces(&[piece], leader, h, false) {
        Ok(r) => r.first_violation_time.is_some_and(|t| t < pre.t_end - 1e-6),
        Err(_) => true,
    }
}

/// Intervals of entry times within `[lo, hi]` that cannot be the first
/// contact with the boundary.
///
/// Behind a leader on polynomial pieces this is where the entry indicator
/// `u(t1) + φ·jerk - u_p(t1)` is positive. Behind a leader that itself rides
/// a boundary, each candidate is checked directly for an earlier violation.
/// Boundaries are located on a 10 ms grid and bisected to 1 µs.
pub fn infeasible_set(t0: f64, v0: f64, leader: &Trajectory, h: Headway, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let definitional = leader.has_constrained_arc();
    let bad = |t1: f64| -> bool {
        let Some(pre) = pre_arc_at(t1, t0, v0, leader, h) else {
            return true;
        };
        if definitional {
            violates_before_end(&pre, leader, h)
        } else {
            let l = leader.eval(t1).expect("pre-arc built");
            entry_indicator(&pre, l, h) > 0.0
        }
    };
    if !(hi > lo) {
        return Vec::new();
    }
    let n = ((hi - lo) / INFEASIBLE_GRID).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|k| {
            if k == n {
                hi
            } else {
                lo + (hi - lo) * k as f64 / n as f64
            }
        })
        .collect();
    let flags: Vec<bool> = grid.iter().map(|&t| bad(t)).collect();
    let refine = |mut a: f64, mut b: f64, fa: bool| {
        while b - a > INFEASIBLE_TOL {
            let m = 0.5 * (a + b);
            if bad(m) == fa {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    };
    let mut out = Vec::new();
    let mut open: Option<f64> = flags[0].then_some(lo);
    for k in 1..grid.len() {
        if flags[k] != flags[k - 1] {
            let edge = refine(grid[k - 1], grid[k], flags[k - 1]);
            if flags[k] {
                open = Some(edge);
            } else if let Some(a) = open.take() {
                out.push((a, edge));
            }
        }
    }
    if let Some(a) = open {
        out.push((a, hi));
    }
    out
}

#[derive(Clone, Copy)]
enum Terminal {
    /// Free terminal time with zero terminal control.
    Free,
    /// Merging tangency with the FIFO predecessor.
    Merge(MergeTarget),
}

struct Context<'a> {
    t0: f64,
    v0: f64,
    leader: &'a Trajectory,
    params: &'a ScenarioParams,
    terminal: Terminal,
}

struct Candidate {
    t1: f64,
    pre: PolySegment,
    arc: Vec<ExpSegment>,
    exit: Option<ExitSolution>,
    t_m: f64,
    j: f64,
}

impl Context<'_> {
    fn h(&self) -> Headway {
        headway(self.params)
    }

    fn case_b_params(&self) -> CaseBParams {
        CaseBParams {
            length: self.params.length,
            beta: self.params.beta,
            phi: self.params.phi,
            delta: self.params.delta,
        }
    }

    fn post_is_safe(&self, post: &PolySegment) -> bool {
        let piece = ExpSegment::polynomial(post.t_start, post.t_end, post.x_poly());
        scan_pieces(&[piece], self.leader, self.h(), false).is_ok_and(|r| r.min_gap_slack >= -TOL_GAP)
    }

    fn evaluate(&self, t1: f64) -> Option<Candidate> {
        let h = self.h();
        let length = self.params.length;
        let pre = pre_arc_at(t1, self.t0, self.v0, self.leader, h)?;
        let entry = pre.state_at(t1);
        if !(pre.min_speed() > 0.0) || entry.x >= length {
            return None;
        }
        if violates_before_end(&pre, self.leader, h) {
            return None;
        }
        let arc = Arc::build_to_position(t1, entry.v, self.leader, length, h).ok()?;
        let t_reach = arc.t_reach()?;
        let exits = match self.terminal {
            Terminal::Free => exit_candidates_case_a(&arc, t1, length, self.params.beta),
            Terminal::Merge(m) => exit_candidates_case_b(&arc, t1, &self.case_b_params(), &m),
        };
        let chosen = exits
            .into_iter()
            .find(|ex| ex.post.min_speed() > 0.0 && arc.min_speed_until(ex.t2) > 0.0 && self.post_is_safe(&ex.post));
        let (segments, exit, t_m) = match (chosen, self.terminal) {
            (Some(ex), _) => (arc.segments_until(ex.t2), Some(ex.clone()), ex.t_m),
            (None, Terminal::Free) => {
                if !(arc.min_speed_until(t_reach) > 0.0) {
                    return None;
                }
                (arc.segments_until(t_reach), None, t_reach)
            }
            (None, Terminal::Merge(_)) => return None,
        };
        let j = objective_of_t1(&pre, &segments, exit.as_ref().map(|e| &e.post), self.params.beta);
        j.is_finite().then_some(Candidate {
            t1,
            pre,
            arc: segments,
            exit,
            t_m,
            j,
        })
    }

    /// Latest entry time whose contact point is still before the merging point.
    fn entry_upper_bound(&self, lo: f64) -> Option<f64> {
        let h = self.h();
        let length = self.params.length;
        let inside =
            |t1: f64| pre_arc_at(t1, self.t0, self.v0, self.leader, h).is_some_and(|p| p.state_at(t1).x < length);
        if !inside(lo) {
            return None;
        }
        let cap = self.t0 + 20.0 * length / self.params.v_min.max(1e-3);
        let mut a = lo;
        let mut b = lo + 1.0;
        while inside(b) {
            a = b;
            b = a + 2.0 * (b - lo);
            if b > cap {
                return Some(a);
            }
        }
        while b - a > 1e-9 {
            let m = 0.5 * (a + b);
            if inside(m) {
                a = m;
            } else {
                b = m;
            }
        }
        Some(a)
    }

    fn solve(&self) -> Result<ConstrainedPlan> {
        let h = self.h();
        let lo = self.t0 + T1_EXCLUSION;
        let hi = self.entry_upper_bound(lo).ok_or_else(|| {
            Error::Infeasible(format!(
                "vehicle entering at t0={} reaches the merging point before any contact",
                self.t0
            ))
        })?;
        let infeasible = infeasible_set(self.t0, self.v0, self.leader, h, lo, hi);
        let excluded = |t: f64| infeasible.iter().any(|&(a, b)| t > a && t <= b);

        let n = ((hi - lo) / T1_GRID).floor() as usize;
        let mut grid: Vec<f64> = (0..=n).map(|k| lo + T1_GRID * k as f64).collect();
        if grid.last().is_some_and(|&t| hi - t > 1e-9) {
            grid.push(hi);
        }
        let mut curve = Vec::with_capacity(grid.len());
        let mut best: Option<(usize, Candidate)> = None;
        for (k, &t1) in grid.iter().enumerate() {
            let cand = if excluded(t1) { None } else { self.evaluate(t1) };
            curve.push((t1, cand.as_ref().map(|c| c.j)));
            if let Some(c) = cand {
                if best.as_ref().is_none_or(|(_, b)| c.j < b.j) {
                    best = Some((k, c));
                }
            }
        }
        let (k, mut best) = best.ok_or_else(|| {
            Error::Infeasible(format!(
                "no feasible first-contact time in ({lo}, {hi}] for vehicle entering at t0={}",
                self.t0
            ))
        })?;

        let a = grid[k.saturating_sub(1)];
        let b = grid[(k + 1).min(grid.len() - 1)];
        if b > a {
            let cost = |t: f64| {
                if excluded(t) {
                    return f64::INFINITY;
                }
                self.evaluate(t).map_or(f64::INFINITY, |c| c.j)
            };
            let (t_ref, j_ref) = golden_section(cost, a, b, T1_TOL);
            if j_ref < best.j {
                if let Some(c) = self.evaluate(t_ref) {
                    best = c;
                }
            }
        }

        let last_valid = curve.iter().rposition(|(_, j)| j.is_some());
        let at_end = last_valid == Some(k) && hi - best.t1 <= T1_GRID + 1e-9;
        if at_end && matches!(self.terminal, Terminal::Free) {
            if let Some(plan) = self.terminal_contact_plan(&infeasible, &curve, best.j)? {
                return Ok(plan);
            }
        }

        Ok(ConstrainedPlan {
            t0: self.t0,
            t1: best.t1,
            t2: best.exit.as_ref().map(|e| e.t2),
            pre_arc: best.pre,
            arc: best.arc,
            post_arc: best.exit.map(|e| e.post),
            t_m: best.t_m,
            j_star: best.j,
            infeasible_set: infeasible,
            j_curve: curve,
            terminal_contact: false,
        })
    }

    /// The headway treated as a terminal condition against the same-lane
    /// leader at the merging point. Used only if it is safe throughout and
    /// cheaper than the best interior contact.
    fn terminal_contact_plan(
        &self,
        infeasible: &[(f64, f64)],
        curve: &[(f64, Option<f64>)],
        j_interior: f64,
    ) -> Result<Option<ConstrainedPlan>> {
        let target = MergeTarget {
            v_prev_terminal: self.leader.terminal_speed(),
            t_prev_m: self.leader.t_m(),
        };
        let Ok(sol) = solve_case_b(self.t0, self.v0, &self.case_b_params(), &target) else {
            return Ok(None);
        };
        if sol.t_m < self.leader.t_m() {
            return Ok(None);
        }
        let traj = sol.trajectory()?;
        let ok = crate::safety::check_window(&traj, self.leader, self.t0, sol.t_m, self.h())
            .is_ok_and(|r| r.min_gap_slack >= -TOL_GAP);
        let j = sol.objective(self.params.beta);
        if !ok || j >= j_interior {
            return Ok(None);
        }
        Ok(Some(ConstrainedPlan {
            t0: self.t0,
            t1: sol.t_m,
            t2: None,
            pre_arc: sol.segment().clone(),
            arc: Vec::new(),
            post_arc: None,
            t_m: sol.t_m,
            j_star: j,
            infeasible_set: infeasible.to_vec(),
            j_curve: curve.to_vec(),
            terminal_contact: true,
        }))
    }
}

/// Constrained plan when the same-lane leader is also the FIFO predecessor.
///
/// `leader` must be evaluable (through its hold) until this vehicle reaches
/// the merging point.
pub fn algorithm1(t0: f64, v0: f64, leader: &Trajectory, params: &ScenarioParams) -> Result<ConstrainedPlan> {
    Context {
        t0,
        v0,
        leader,
        params,
        terminal: Terminal::Free,
    }
    .solve()
}

/// Constrained plan when the FIFO predecessor `prev` is in the other lane:
/// headway to the same-lane `leader` throughout, merging tangency with `prev`
/// at the merging point.
pub fn algorithm2(
    t0: f64,
    v0: f64,
    leader: &Trajectory,
    prev: &Trajectory,
    params: &ScenarioParams,
) -> Result<ConstrainedPlan> {
    let target = MergeTarget {
        v_prev_terminal: prev.terminal_speed(),
        t_prev_m: prev.t_m(),
    };
    Context {
        t0,
        v0,
        leader,
        params,
        terminal: Terminal::Merge(target),
    }
    .solve()
}
