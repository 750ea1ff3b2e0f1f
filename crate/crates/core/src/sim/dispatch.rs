//! Predecessor resolution and planner selection for one arriving vehicle.

use crate::constrained::{algorithm1, algorithm2, ConstrainedPlan};
use crate::error::{Error, Result};
use crate::model::{CavRecord, Lane, ScenarioParams, Trajectory};
use crate::safety::{check_window, gap, theorem1_guard, theorem4_guard, Headway, TOL_GAP};
use crate::unconstrained::{solve_case_a, solve_case_b, CaseBParams, MergeTarget};

/// Which of the two planning cases applies, by vehicle id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predecessors {
    NoPredecessor,
    /// The FIFO predecessor is also the same-lane predecessor.
    SameLane {
        leader: usize,
    },
    /// The FIFO predecessor `prev` is in the other lane; `same_lane` is the
    /// nearest same-lane vehicle ahead, if any.
    CrossLane {
        prev: usize,
        same_lane: Option<usize>,
    },
}

/// Resolves predecessors for a vehicle about to join `queue`, given as
/// `(id, lane)` in FIFO order including the vehicle that has just crossed.
/// `last_in_lane` is the most recent earlier arrival in the newcomer's lane,
/// used when no same-lane vehicle remains in the queue.
pub fn resolve_predecessors(queue: &[(usize, Lane)], lane: Lane, last_in_lane: Option<usize>) -> Predecessors {
    let Some(&(prev, prev_lane)) = queue.last() else {
        return Predecessors::NoPredecessor;
    };
    if prev_lane == lane {
        return Predecessors::SameLane { leader: prev };
    }
    let same_lane = queue
        .iter()
        .rev()
        .find(|(_, l)| *l == lane)
        .map(|(id, _)| *id)
        .or(last_in_lane);
    Predecessors::CrossLane { prev, same_lane }
}

/// How a plan was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlanKind {
    /// First vehicle in the queue.
    Unconstrained,
    /// Same-lane predecessor, guard satisfied: no check needed.
    CaseAGuarded,
    /// Same-lane predecessor, unconstrained plan checked and safe.
    CaseAChecked,
    /// Other-lane predecessor arriving well ahead: same-lane plan suffices.
    CaseAMergeGuarded,
    /// Other-lane predecessor, same-lane plan checked at the merge.
    CaseAMergeChecked,
    /// Other-lane predecessor: merging-tangency plan.
    CaseB,
    /// Merging-tangency solve failed; same-lane plan checked at the merge.
    CaseBFallback,
    /// Headway active against the same-lane leader.
    Algorithm1,
    /// Headway active against the same-lane leader, with merging tangency to
    /// an other-lane predecessor.
    Algorithm2,
}

impl PlanKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlanKind::Unconstrained => "unconstrained",
            PlanKind::CaseAGuarded => "case_a_guarded",
            PlanKind::CaseAChecked => "case_a_checked",
            PlanKind::CaseAMergeGuarded => "case_a_merge_guarded",
            PlanKind::CaseAMergeChecked => "case_a_merge_checked",
            PlanKind::CaseB => "case_b",
            PlanKind::CaseBFallback => "case_b_fallback",
            PlanKind::Algorithm1 => "algorithm1",
            PlanKind::Algorithm2 => "algorithm2",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub trajectory: Trajectory,
    pub kind: PlanKind,
    pub constrained: Option<ConstrainedPlan>,
}

/// Predecessor records with their plans, borrowed from the coordinator.
#[derive(Clone, Copy, Debug)]
pub enum PredecessorPlans<'a> {
    NoPredecessor,
    SameLane {
        leader: &'a CavRecord,
    },
    CrossLane {
        prev: &'a CavRecord,
        same_lane: Option<&'a CavRecord>,
    },
}

fn plan_of(r: &CavRecord) -> Result<&Trajectory> {
    r.trajectory
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("predecessor {} has no plan", r.id)))
}

fn headway(p: &ScenarioParams) -> Headway {
    Headway {
        phi: p.phi,
        delta: p.delta,
    }
}

fn case_b_params(p: &ScenarioParams) -> CaseBParams {
    CaseBParams {
        length: p.length,
        beta: p.beta,
        phi: p.phi,
        delta: p.delta,
    }
}

fn is_safe_behind(traj: &Trajectory, leader: &Trajectory, p: &ScenarioParams) -> Result<bool> {
    let r = check_window(traj, leader, traj.t0(), traj.t_m(), headway(p))?;
    Ok(r.min_gap_slack >= -TOL_GAP)
}

fn from_constrained(plan: ConstrainedPlan, kind: PlanKind) -> Result<PlanOutcome> {
    Ok(PlanOutcome {
        trajectory: plan.trajectory()?,
        kind,
        constrained: Some(plan),
    })
}

/// Whether `r` follows the free same-lane optimum for its own entry, the
/// premise of both guard conditions.
fn on_free_plan(r: &CavRecord, p: &ScenarioParams) -> bool {
    let (Some(t), Ok(free)) = (&r.trajectory, solve_case_a(r.t0, r.v0, p.length, p.beta)) else {
        return false;
    };
    t.segments().len() == 1 && (t.t_m() - free.t_m).abs() <= 1e-9 * (1.0 + free.t_m.abs())
}

fn merge_ok(traj: &Trajectory, prev: &Trajectory, p: &ScenarioParams) -> Result<bool> {
    Ok(gap(traj, prev, traj.t_m(), headway(p))? >= -TOL_GAP)
}

/// Constrained plan behind `leader` that also respects the merge with the
/// other-lane predecessor `prev`; tangency is only imposed when needed.
fn constrained_with_merge(
    t0: f64,
    v0: f64,
    leader: &Trajectory,
    prev: &Trajectory,
    p: &ScenarioParams,
) -> Result<PlanOutcome> {
    let first = algorithm1(t0, v0, leader, p);
    if let Ok(plan) = &first {
        let out = from_constrained(plan.clone(), PlanKind::Algorithm1)?;
        if merge_ok(&out.trajectory, prev, p)? {
            return Ok(out);
        }
    }
    match algorithm2(t0, v0, leader, prev, p) {
        Ok(plan) => from_constrained(plan, PlanKind::Algorithm2),
        Err(e) => Err(first.err().unwrap_or(e)),
    }
}

/// Plans one vehicle: guards first, then the unconstrained solution, then the
/// constrained planners if the unconstrained plan breaks the headway.
///
/// Predecessor plans must be evaluable (through their holds) until this
/// vehicle crosses the merging point.
pub fn plan_cav(t0: f64, v0: f64, preds: PredecessorPlans<'_>, p: &ScenarioParams) -> Result<PlanOutcome> {
    let plain = |kind| -> Result<PlanOutcome> {
        Ok(PlanOutcome {
            trajectory: solve_case_a(t0, v0, p.length, p.beta)?.trajectory()?,
            kind,
            constrained: None,
        })
    };
    let guard1 = |l: &CavRecord| theorem1_guard(v0, l.v0, t0, l.t0, p.phi, p.delta) && on_free_plan(l, p);
    match preds {
        PredecessorPlans::NoPredecessor => plain(PlanKind::Unconstrained),
        PredecessorPlans::SameLane { leader } => {
            if guard1(leader) {
                return plain(PlanKind::CaseAGuarded);
            }
            let lt = plan_of(leader)?;
            let out = plain(PlanKind::CaseAChecked)?;
            if is_safe_behind(&out.trajectory, lt, p)? {
                return Ok(out);
            }
            from_constrained(algorithm1(t0, v0, lt, p)?, PlanKind::Algorithm1)
        }
        PredecessorPlans::CrossLane { prev, same_lane } => {
            let pt = plan_of(prev)?;
            let guard4 = theorem4_guard(v0, prev.v0, t0, prev.t0, p.phi, p.delta) && on_free_plan(prev, p);
            let free = plain(PlanKind::CaseAMergeGuarded)?;
            let out = if guard4 {
                free
            } else if merge_ok(&free.trajectory, pt, p)? {
                PlanOutcome {
                    kind: PlanKind::CaseAMergeChecked,
                    ..free
                }
            } else {
                let target = MergeTarget {
                    v_prev_terminal: pt.terminal_speed(),
                    t_prev_m: pt.t_m(),
                };
                match solve_case_b(t0, v0, &case_b_params(p), &target) {
                    Ok(sol) => PlanOutcome {
                        trajectory: sol.trajectory()?,
                        kind: PlanKind::CaseB,
                        constrained: None,
                    },
                    Err(Error::NoFeasibleRoot { .. }) => PlanOutcome {
                        kind: PlanKind::CaseBFallback,
                        ..free
                    },
                    Err(e) => return Err(e),
                }
            };
            let safe_ahead = match same_lane {
                Some(l) if !guard1(l) => is_safe_behind(&out.trajectory, plan_of(l)?, p)?,
                _ => true,
            };
            if safe_ahead {
                if out.kind == PlanKind::CaseBFallback && !merge_ok(&out.trajectory, pt, p)? {
                    return Err(Error::Infeasible(format!(
                        "no merging-tangency plan and the same-lane plan breaks the merge at t={}",
                        out.trajectory.t_m()
                    )));
                }
                return Ok(out);
            }
            let lt = plan_of(same_lane.expect("checked above"))?;
            constrained_with_merge(t0, v0, lt, pt, p)
        }
    }
}
