//! Fixtures and checks shared by the integration suites.
#![allow(dead_code)]

use cavmerge::constrained::{algorithm1, algorithm2, ConstrainedPlan};
use cavmerge::model::{ScenarioParams, Trajectory};
use cavmerge::safety::{check_window, Headway};
use cavmerge::unconstrained::{solve_case_a, solve_case_b, CaseBParams, MergeTarget};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const BETA: f64 = 2.667;
pub const L: f64 = 400.0;
pub const H: Headway = Headway { phi: 1.8, delta: 0.0 };

pub fn params() -> ScenarioParams {
    ScenarioParams {
        beta: BETA,
        ..ScenarioParams::merging_experiment()
    }
}

pub fn case_b_params(beta: f64) -> CaseBParams {
    CaseBParams {
        length: L,
        beta,
        phi: H.phi,
        delta: H.delta,
    }
}

pub fn held(t: Trajectory) -> Trajectory {
    t.with_hold_until(Some(f64::INFINITY))
}

pub fn target_of(prev: &Trajectory) -> MergeTarget {
    MergeTarget {
        v_prev_terminal: prev.terminal_speed(),
        t_prev_m: prev.t_m(),
    }
}

/// Free leader entering at 0 s with 20 m/s.
pub fn first_leader() -> Trajectory {
    held(solve_case_a(0.0, 20.0, L, BETA).unwrap().trajectory().unwrap())
}

/// Other-lane vehicle entering at 0.1 s, merging behind [`first_leader`].
pub fn other_lane_prev(leader: &Trajectory) -> Trajectory {
    let s = solve_case_b(0.1, 20.0, &case_b_params(BETA), &target_of(leader)).unwrap();
    held(s.trajectory().unwrap())
}

/// Same-lane follower entering at 2.7 s with 27 m/s.
pub fn case_a_constrained() -> (Trajectory, ConstrainedPlan) {
    let leader = first_leader();
    let plan = algorithm1(2.7, 27.0, &leader, &params()).unwrap();
    (leader, plan)
}

/// Follower entering at 2.55 s with 28 m/s behind both vehicles above.
pub fn case_b_constrained() -> (Trajectory, Trajectory, ConstrainedPlan) {
    let leader = first_leader();
    let prev = other_lane_prev(&leader);
    let plan = algorithm2(2.55, 28.0, &leader, &prev, &params()).unwrap();
    (leader, prev, plan)
}

/// Largest speed gap between the closed-form arc of `plan` and an RK4
/// integration of `v̇ = (v_p - v)/φ` with step `dt`.
pub fn rk4_arc_deviation(plan: &ConstrainedPlan, leader: &Trajectory, phi: f64, dt: f64) -> f64 {
    let traj = plan.trajectory().unwrap();
    let t1 = plan.t1;
    let t2 = plan.t2.unwrap_or(plan.t_m);
    let vp = |t: f64| leader.eval(t).unwrap().v;
    let f = |t: f64, v: f64| (vp(t) - v) / phi;
    let mut t = t1;
    let mut v = traj.eval(t1).unwrap().v;
    let mut worst = 0.0_f64;
    while t < t2 {
        let h = dt.min(t2 - t);
        let k1 = f(t, v);
        let k2 = f(t + h / 2.0, v + h / 2.0 * k1);
        let k3 = f(t + h / 2.0, v + h / 2.0 * k2);
        let k4 = f(t + h, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        worst = worst.max((traj.eval(t.min(t2)).unwrap().v - v).abs());
    }
    worst
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Case A instance `(t0, v0, β)` with the experiment's length.
pub fn case_a_instance() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..100.0_f64, 10.0..30.0_f64, 0.01..10.0_f64)
}

/// Sign and identity properties of one free plan with `β > 0`: negative
/// jerk, zero terminal control, terminal speed `-β/a`, speed increasing,
/// travel time no longer than at constant speed.
pub fn check_free_plan((t0, v0, beta): (f64, f64, f64)) -> Result<(), TestCaseError> {
    let s = solve_case_a(t0, v0, L, beta).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(s.a < 0.0, || format!("jerk {} not negative", s.a))?;
    ensure(s.max_residual() < 1e-8, || format!("residual {}", s.max_residual()))?;
    let u_end = s.a * s.t_m + s.b;
    ensure(u_end.abs() < 1e-8 * s.b.abs().max(1.0), || format!("u(t_m) = {u_end}"))?;
    let v_m = s.terminal_speed();
    ensure(close(v_m, -beta / s.a, 1e-8), || {
        format!("v(t_m) {v_m} vs -β/a {}", -beta / s.a)
    })?;
    ensure(s.t_m - t0 <= L / v0, || {
        format!("travel {} above {}", s.t_m - t0, L / v0)
    })?;
    let seg = s.segment();
    let mut prev = v0;
    for k in 1..=1000 {
        let t = t0 + (s.t_m - t0) * k as f64 / 1000.0;
        let st = seg.state_at(t);
        if k < 1000 {
            ensure(st.u > 0.0, || format!("u({t}) = {} not positive", st.u))?;
        }
        ensure(st.v > prev, || format!("speed not increasing at {t}"))?;
        prev = st.v;
    }
    Ok(())
}

/// Entering later changes neither the jerk nor the shape of the plan.
pub fn check_time_shift((t0, v0, beta): (f64, f64, f64), shift: f64) -> Result<(), TestCaseError> {
    let a = solve_case_a(t0, v0, L, beta).unwrap();
    let b = solve_case_a(t0 + shift, v0, L, beta).unwrap();
    ensure(close(a.a, b.a, 1e-9), || format!("jerk {} vs {}", a.a, b.a))?;
    ensure(close(b.t_m - a.t_m, shift, 1e-8), || {
        format!("t_m moved by {}", b.t_m - a.t_m)
    })?;
    for k in 0..=20 {
        let s = (a.t_m - t0) * k as f64 / 20.0;
        let (x, y) = (a.segment().state_at(t0 + s), b.segment().state_at(t0 + shift + s));
        ensure(
            close(x.x, y.x, 1e-8) && close(x.v, y.v, 1e-8) && close(x.u, y.u, 1e-8),
            || format!("states differ {s} s after entry: {x:?} vs {y:?}"),
        )?;
    }
    Ok(())
}

/// A faster entrant reaches a higher terminal speed sooner with a jerk
/// closer to zero.
pub fn check_speed_monotonicity(t0: f64, v_lo: f64, v_hi: f64, beta: f64) -> Result<(), TestCaseError> {
    let lo = solve_case_a(t0, v_lo, L, beta).unwrap();
    let hi = solve_case_a(t0, v_hi, L, beta).unwrap();
    ensure(lo.terminal_speed() < hi.terminal_speed(), || {
        "terminal speed not increasing".into()
    })?;
    ensure(lo.t_m - t0 > hi.t_m - t0, || "travel time not decreasing".into())?;
    ensure(lo.a < hi.a && hi.a < 0.0, || format!("jerks {} {}", lo.a, hi.a))
}

/// Leader `(v0, β)` entering at 0 s, follower speed ratio, extra gap
/// beyond the guard, and `δ`.
pub fn guarded_pair() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    (
        10.0..30.0_f64,
        0.01..10.0_f64,
        0.34..1.0_f64,
        0.0..5.0_f64,
        0.0..5.0_f64,
    )
}

/// A follower that enters no faster and at least one headway after its
/// leader stays strictly clear under free control.
pub fn check_guarded_pair((v_lead, beta, ratio, extra, delta): (f64, f64, f64, f64, f64)) -> Result<(), TestCaseError> {
    let v_follow = (v_lead * ratio).max(10.0).min(v_lead);
    let phi = H.phi;
    let t0 = phi + delta / v_follow + extra;
    let h = Headway { phi, delta };
    ensure(
        cavmerge::safety::theorem1_guard(v_follow, v_lead, t0, 0.0, phi, delta),
        || "instance does not pass the guard".into(),
    )?;
    let leader = held(solve_case_a(0.0, v_lead, L, beta).unwrap().trajectory().unwrap());
    let follower = solve_case_a(t0, v_follow, L, beta).unwrap().trajectory().unwrap();
    let r = check_window(&follower, &leader, t0, follower.t_m(), h).unwrap();
    ensure(r.min_gap_slack > 0.0, || {
        format!("min slack {} at {}", r.min_gap_slack, r.t_at_min)
    })
}

/// Leader `(v0, β)`, entry time and entry-control fraction in `[0, 1]`
/// mapped onto the admissible range.
pub fn arc_instance() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (10.0..30.0_f64, 0.01..3.0_f64, 0.0..1.0_f64, 0.0..1.0_f64)
}

/// An arc entered with admissible control behind a leader whose control
/// is admissible keeps its own control admissible, sampled every `dt`.
pub fn check_arc_bounds((v_lead, beta, entry, frac): (f64, f64, f64, f64), dt: f64) -> Result<(), TestCaseError> {
    let p = params();
    let lead = solve_case_a(0.0, v_lead, L, beta).unwrap();
    let leader_u0 = lead.segment().state_at(0.0).u;
    if leader_u0 > p.u_max {
        return Err(TestCaseError::reject("leader control out of bounds"));
    }
    let leader = held(lead.trajectory().unwrap());
    let t1 = entry * leader.t_m();
    let vp = leader.eval(t1).unwrap().v;
    let u_entry = p.u_min + frac * (p.u_max - p.u_min);
    let v_entry = vp - H.phi * u_entry;
    if v_entry <= 0.0 {
        return Err(TestCaseError::reject("entry speed not positive"));
    }
    let t_end = leader.t_m() + 10.0;
    let arc = cavmerge::constrained::Arc::build(t1, v_entry, &leader, t_end, H).unwrap();
    let n = ((t_end - t1) / dt).ceil() as usize;
    for k in 0..=n {
        let t = (t1 + dt * k as f64).min(t_end);
        let u = arc.state_at(t).u;
        ensure(u >= p.u_min - 1e-9 && u <= p.u_max + 1e-9, || {
            format!("u({t}) = {u} outside [{}, {}]", p.u_min, p.u_max)
        })?;
    }
    Ok(())
}
