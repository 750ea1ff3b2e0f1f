//! Leaving the constrained arc at `t2` onto an unconstrained cubic that
//! reaches the merging point optimally, with control continuous at `t2`.
//!
//! Each exit time fixes the cubic's initial state, and the terminal
//! conditions then determine its travel time and jerk. What remains is a
//! scalar transversality residual in `t2`, scanned for sign changes.

use super::arc::Arc;
use crate::model::{PolySegment, State};
use crate::roots::{brent, sign_change_brackets};
use crate::unconstrained::{CaseBParams, MergeTarget};

const T2_GRID: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct ExitSolution {
    pub t2: f64,
    pub t_m: f64,
    pub post: PolySegment,
    /// Transversality residual at the returned root.
    pub residual: f64,
}

/// Smallest positive root of `c2 T² + c1 T + c0`.
fn first_positive_root(c2: f64, c1: f64, c0: f64) -> Option<f64> {
    let (n, r) = crate::poly::quadratic_roots(c2, c1, c0);
    r[..n]
        .iter()
        .copied()
        .filter(|t| t.is_finite() && *t >= 1e-12)
        .min_by(f64::total_cmp)
}

/// Post-arc with zero terminal control: returns `(T, jerk, residual)`.
fn case_a_exit(st: State, length: f64, beta: f64) -> Option<(f64, f64, f64)> {
    // x(T) = x2 + v2 T + u2 T²/3 with u = u2 (1 - τ/T).
    let t = first_positive_root(st.u / 3.0, st.v, st.x - length)?;
    let jerk = -st.u / t;
    let v_end = st.v + st.u * t / 2.0;
    if !(v_end > 0.0) || !(st.v > 0.0) {
        return None;
    }
    Some((t, jerk, beta + jerk * v_end))
}

/// Post-arc ending in merging tangency: returns `(T, jerk, residual)`.
fn case_b_exit(t2: f64, st: State, p: &CaseBParams, m: &MergeTarget) -> Option<(f64, f64, f64)> {
    let vp = m.v_prev_terminal;
    let t = first_positive_root(
        vp + p.phi * st.u / 2.0,
        vp * (t2 - m.t_prev_m) + 2.0 * p.phi * st.v - p.delta,
        -3.0 * p.phi * (p.length - st.x),
    )?;
    let jerk = 6.0 * (p.length - st.x - st.v * t - st.u * t * t / 2.0) / t.powi(3);
    let u_end = st.u + jerk * t;
    let v_end = st.v + st.u * t + jerk * t * t / 2.0;
    let res = p.beta + jerk * v_end - 0.5 * u_end * u_end + u_end * vp / p.phi;
    Some((t, jerk, res))
}

fn collect<F>(arc: &Arc, t1: f64, residual: F) -> Vec<ExitSolution>
where
    F: Fn(f64) -> Option<(f64, f64, f64)>,
{
    let Some(t_hi) = arc.t_reach() else {
        return Vec::new();
    };
    if !(t_hi > t1) {
        return Vec::new();
    }
    let r = |t2: f64| residual(t2).map_or(f64::NAN, |x| x.2);
    let n = ((t_hi - t1) / T2_GRID).ceil().max(2.0) as usize;
    let lo = t1 + 1e-9 * (1.0 + t1.abs());
    let mut out = Vec::new();
    for (a, b) in sign_change_brackets(r, lo, t_hi, n) {
        let Some(t2) = brent(r, a, b, 1e-12) else {
            continue;
        };
        let Some((t, jerk, res)) = residual(t2) else {
            continue;
        };
        let st = arc.state_at(t2);
        out.push(ExitSolution {
            t2,
            t_m: t2 + t,
            post: PolySegment::from_local(t2, t2 + t, jerk, st.u, st.v, st.x),
            residual: res,
        });
    }
    out
}

/// Every exit onto a zero-terminal-control cubic, in increasing `t2`.
pub fn exit_candidates_case_a(arc: &Arc, t1: f64, length: f64, beta: f64) -> Vec<ExitSolution> {
    collect(arc, t1, |t2| case_a_exit(arc.state_at(t2), length, beta))
}

/// First exit onto a zero-terminal-control cubic, or `None` when the arc
/// should run all the way to the merging point.
pub fn exit_system_case_a(arc: &Arc, t1: f64, length: f64, beta: f64) -> Option<ExitSolution> {
    exit_candidates_case_a(arc, t1, length, beta).into_iter().next()
}

/// Every exit onto a cubic ending in merging tangency with the FIFO
/// predecessor, in increasing `t2`.
pub fn exit_candidates_case_b(arc: &Arc, t1: f64, params: &CaseBParams, target: &MergeTarget) -> Vec<ExitSolution> {
    collect(arc, t1, |t2| case_b_exit(t2, arc.state_at(t2), params, target))
}

/// First exit onto a cubic ending in merging tangency.
pub fn exit_system_case_b(
    arc: &Arc,
    t1: f64,
    params: &CaseBParams,
    target: &MergeTarget,
) -> crate::Result<ExitSolution> {
    exit_candidates_case_b(arc, t1, params, target)
        .into_iter()
        .next()
        .ok_or(crate::Error::NoFeasibleRoot {
            what: "constrained-arc exit (merging tangency)",
            candidates: vec![],
        })
}
