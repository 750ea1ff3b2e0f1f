//! Optimal trajectories when no state constraint is active.
//!
//! Both cases reduce to a single scalar equation. With the same-lane leader
//! being the FIFO predecessor, the terminal speed solves a quartic. Against a
//! predecessor in the other lane, fixing the travel time `T` makes the
//! boundary conditions linear in the jerk and initial acceleration, leaving
//! the transversality residual as a scalar function of `T`.

use crate::error::{Error, Result};
use crate::model::{PolySegment, Segment, Trajectory};
use crate::roots::{brent, sign_change_brackets};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CaseTag {
    /// The FIFO predecessor is also the physical predecessor.
    CaseA,
    /// The FIFO predecessor is in the other lane.
    CaseB,
}

/// One unconstrained cubic arc from `t0` to `t_m` plus residual diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct UnconstrainedCoeffs {
    /// Absolute-time coefficients: `u = a t + b`.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub t0: f64,
    pub t_m: f64,
    /// Residuals of the five defining equations, each divided by the largest
    /// term magnitude in its row.
    pub residuals: [f64; 5],
    pub case_tag: CaseTag,
    segment: PolySegment,
}

impl UnconstrainedCoeffs {
    fn from_local(t0: f64, t_m: f64, jerk: f64, u0: f64, v0: f64, case_tag: CaseTag, residuals: [f64; 5]) -> Self {
        let segment = PolySegment::from_local(t0, t_m, jerk, u0, v0, 0.0);
        let (a, b, c, d) = segment.absolute_coeffs();
        UnconstrainedCoeffs {
            a,
            b,
            c,
            d,
            t0,
            t_m,
            residuals,
            case_tag,
            segment,
        }
    }

    /// The arc in local-time form, exact at `t0`.
    pub fn segment(&self) -> &PolySegment {
        &self.segment
    }

    pub fn terminal_speed(&self) -> f64 {
        self.segment.state_at(self.t_m).v
    }

    pub fn terminal_control(&self) -> f64 {
        self.segment.state_at(self.t_m).u
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::new(vec![Segment::Poly(self.segment.clone())], None)
    }

    pub fn objective(&self, beta: f64) -> f64 {
        beta * (self.t_m - self.t0) + self.segment.control_energy()
    }
}

fn scaled(terms: &[f64]) -> f64 {
    let sum: f64 = terms.iter().sum();
    let mag = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    if mag == 0.0 {
        0.0
    } else {
        sum / mag
    }
}

/// Residuals of the two initial conditions and the terminal position, in
/// absolute-time coefficients.
#[allow(clippy::too_many_arguments)]
fn boundary_residuals(a: f64, b: f64, c: f64, d: f64, t0: f64, v0: f64, t_m: f64, length: f64) -> [f64; 3] {
    [
        scaled(&[a * t0 * t0 / 2.0, b * t0, c, -v0]),
        scaled(&[a * t0.powi(3) / 6.0, b * t0 * t0 / 2.0, c * t0, d]),
        scaled(&[a * t_m.powi(3) / 6.0, b * t_m * t_m / 2.0, c * t_m, d, -length]),
    ]
}

/// Travel-time minimizing trajectory with free terminal time and zero
/// terminal control.
pub fn solve_case_a(t0: f64, v0: f64, length: f64, beta: f64) -> Result<UnconstrainedCoeffs> {
    if !(v0 > 0.0) || !(length > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "case A needs v0 > 0 and L > 0 (v0={v0}, L={length})"
        )));
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be >= 0, got {beta}")));
    }
    if beta == 0.0 {
        let t_m = t0 + length / v0;
        let mut out = UnconstrainedCoeffs::from_local(t0, t_m, 0.0, 0.0, v0, CaseTag::CaseA, [0.0; 5]);
        out.residuals = case_a_residuals(&out, v0, length, beta);
        return Ok(out);
    }
    let v_m = terminal_speed_quartic_root(v0, length, beta).ok_or(Error::NoFeasibleRoot {
        what: "terminal-speed quartic",
        candidates: vec![],
    })?;
    let jerk = -beta / v_m;
    let travel = 3.0 * length / (v0 + 2.0 * v_m);
    let t_m = t0 + travel;
    // u(t_m) = 0 fixes the initial acceleration.
    let u0 = -jerk * travel;
    let mut out = UnconstrainedCoeffs::from_local(t0, t_m, jerk, u0, v0, CaseTag::CaseA, [0.0; 5]);
    out.residuals = case_a_residuals(&out, v0, length, beta);
    Ok(out)
}

fn case_a_residuals(s: &UnconstrainedCoeffs, v0: f64, length: f64, beta: f64) -> [f64; 5] {
    let (a, b, c, d, t0, t_m) = (s.a, s.b, s.c, s.d, s.t0, s.t_m);
    let [r0, r1, r2] = boundary_residuals(a, b, c, d, t0, v0, t_m, length);
    let term = s.segment.state_at(t_m);
    let r3 = scaled(&[a * t_m, b]);
    let r4 = scaled(&[beta, a * term.v, -0.5 * term.u * term.u]);
    [r0, r1, r2, r3, r4]
}

/// The unique root above `v0` of `4 v⁴ - 3 v0² v² - v0³ v - 4.5 β L² = 0`.
///
/// The polynomial is negative at `v0` and increasing beyond it, so a bracket
/// is found by doubling.
fn terminal_speed_quartic_root(v0: f64, length: f64, beta: f64) -> Option<f64> {
    let k = 4.5 * beta * length * length;
    let p = |v: f64| ((4.0 * v * v - 3.0 * v0 * v0) * v - v0.powi(3)) * v - k;
    let mut hi = 2.0 * v0;
    let mut n = 0;
    while p(hi) <= 0.0 {
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return None;
        }
    }
    let root = brent(p, v0, hi, 1e-14 * hi)?;
    // Polish with Newton; the bracket already pins the branch.
    let dp = |v: f64| 16.0 * v.powi(3) - 6.0 * v0 * v0 * v - v0.powi(3);
    let mut v = root;
    for _ in 0..3 {
        let step = p(v) / dp(v);
        if !step.is_finite() {
            break;
        }
        v -= step;
    }
    (v > v0).then_some(v)
}

/// Travel time from the closed-form expression `3 a L / (a v0 - 2β)`.
pub fn closed_form_travel_time(a: f64, v0: f64, length: f64, beta: f64) -> Result<f64> {
    if a == 0.0 {
        if beta == 0.0 {
            return Ok(length / v0);
        }
        return Err(Error::InvalidParameter("a = 0 with beta > 0 is inconsistent".into()));
    }
    let den = a * v0 - 2.0 * beta;
    if den == 0.0 {
        return Err(Error::InvalidParameter("zero denominator".into()));
    }
    Ok(3.0 * a * length / den)
}

/// FIFO predecessor data for the merging constraint, taken past its own
/// terminal time under the constant-speed hold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeTarget {
    pub v_prev_terminal: f64,
    pub t_prev_m: f64,
}

/// Scenario constants shared by the case-B equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CaseBParams {
    pub length: f64,
    pub beta: f64,
    pub phi: f64,
    pub delta: f64,
}

/// For fixed travel time `T`, the local jerk and initial acceleration that
/// reach `L` with the merging tangency speed. Returns `(jerk, u0, v_T)`.
fn case_b_linear(t0: f64, v0: f64, travel: f64, p: &CaseBParams, m: &MergeTarget) -> (f64, f64, f64) {
    let t = travel;
    let v_t = (m.v_prev_terminal * (t0 + t - m.t_prev_m) - p.delta) / p.phi;
    // [T²/2  T ] [A]   [v_T - v0    ]
    // [T³/6 T²/2] [B] = [L - v0 T    ]   det = T⁴/12
    let r1 = v_t - v0;
    let r2 = p.length - v0 * t;
    let det = t.powi(4) / 12.0;
    let jerk = (t * t / 2.0 * r1 - t * r2) / det;
    let u0 = (-t.powi(3) / 6.0 * r1 + t * t / 2.0 * r2) / det;
    (jerk, u0, v_t)
}

fn case_b_transversality(jerk: f64, v_t: f64, u_t: f64, p: &CaseBParams, m: &MergeTarget) -> f64 {
    p.beta + jerk * v_t - 0.5 * u_t * u_t + u_t * m.v_prev_terminal / p.phi
}

/// Scalar residual in the travel time `T`.
fn case_b_residual(t0: f64, v0: f64, travel: f64, p: &CaseBParams, m: &MergeTarget) -> f64 {
    let (jerk, u0, v_t) = case_b_linear(t0, v0, travel, p, m);
    case_b_transversality(jerk, v_t, u0 + jerk * travel, p, m)
}

/// Earliest travel time at which the merging tangency speed is positive.
fn case_b_lower_bound(t0: f64, p: &CaseBParams, m: &MergeTarget) -> f64 {
    (m.t_prev_m - t0 + p.delta / m.v_prev_terminal).max(0.0)
}

/// Optimal trajectory when the FIFO predecessor is in the other lane: the
/// merging constraint holds with equality at `t_m` and the terminal time obeys
/// the moving-boundary transversality condition.
///
/// Among all roots with positive speed throughout, the lowest-cost one is
/// returned; otherwise the error lists every root found.
pub fn solve_case_b(t0: f64, v0: f64, params: &CaseBParams, target: &MergeTarget) -> Result<UnconstrainedCoeffs> {
    check_case_b_inputs(v0, params, target)?;
    let lo = case_b_lower_bound(t0, params, target);
    let hi = lo + 20.0 * params.length / v0.min(target.v_prev_terminal) + 60.0;
    let f = |t: f64| case_b_residual(t0, v0, t, params, target);
    // Avoid the degenerate T = 0 endpoint of the linear solve.
    let start = lo + 1e-9 * (1.0 + lo);
    let mut candidates = Vec::new();
    let mut best: Option<UnconstrainedCoeffs> = None;
    for (a, b) in sign_change_brackets(f, start, hi, 20_000) {
        let Some(travel) = brent(f, a, b, 1e-13 * (1.0 + b)) else {
            continue;
        };
        candidates.push(t0 + travel);
        let (jerk, u0, _) = case_b_linear(t0, v0, travel, params, target);
        let sol = UnconstrainedCoeffs::from_local(t0, t0 + travel, jerk, u0, v0, CaseTag::CaseB, [0.0; 5]);
        if !(sol.segment.min_speed() > 0.0) {
            continue;
        }
        if best
            .as_ref()
            .is_none_or(|b| sol.objective(params.beta) < b.objective(params.beta))
        {
            best = Some(sol);
        }
    }
    let mut sol = best.ok_or(Error::NoFeasibleRoot {
        what: "case B transversality",
        candidates,
    })?;
    sol.residuals = case_b_residuals(&sol, v0, params, target);
    Ok(sol)
}

fn check_case_b_inputs(v0: f64, params: &CaseBParams, target: &MergeTarget) -> Result<()> {
    if !(target.v_prev_terminal > 0.0) {
        return Err(Error::InvalidParameter(
            "predecessor terminal speed must be positive".into(),
        ));
    }
    if !(v0 > 0.0) || !(params.length > 0.0) || !(params.phi > 0.0) || !(params.beta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "case B needs v0 > 0, L > 0, phi > 0, beta >= 0 (v0={v0})"
        )));
    }
    Ok(())
}

fn case_b_residuals(s: &UnconstrainedCoeffs, v0: f64, p: &CaseBParams, m: &MergeTarget) -> [f64; 5] {
    let [r0, r1, r2] = boundary_residuals(s.a, s.b, s.c, s.d, s.t0, v0, s.t_m, p.length);
    let term = s.segment.state_at(s.t_m);
    let r3 = scaled(&[
        m.v_prev_terminal * s.t_m,
        -m.v_prev_terminal * m.t_prev_m,
        -p.phi * term.v,
        -p.delta,
    ]);
    let r4 = scaled(&[
        p.beta,
        s.a * term.v,
        -0.5 * term.u * term.u,
        term.u * m.v_prev_terminal / p.phi,
    ]);
    [r0, r1, r2, r3, r4]
}

/// Merging tangency residual `v_prev (t_m - t_prev_m) - φ v(t_m) - δ` in metres.
pub fn merge_tangency_residual(s: &UnconstrainedCoeffs, p: &CaseBParams, m: &MergeTarget) -> f64 {
    m.v_prev_terminal * (s.t_m - m.t_prev_m) - p.phi * s.terminal_speed() - p.delta
}

/// Case B with the extra requirement that the terminal speed equals the
/// predecessor's, leaving the arrival speed free. Returns the required
/// arrival speed and the resulting trajectory.
///
/// The tangency then fixes the travel time, and transversality becomes a
/// quadratic in the jerk; the root whose arrival speed lies in `(0, v_max]`
/// is kept (the cheaper one if both do).
pub fn solve_case_b_matched_speed(
    t0: f64,
    params: &CaseBParams,
    target: &MergeTarget,
    v_max: f64,
) -> Result<(f64, UnconstrainedCoeffs)> {
    check_case_b_inputs(1.0, params, target)?;
    let vp = target.v_prev_terminal;
    let travel = target.t_prev_m - t0 + params.phi + params.delta / vp;
    if !(travel > 0.0) {
        return Err(Error::NoFeasibleRoot {
            what: "matched-speed travel time",
            candidates: vec![t0 + travel],
        });
    }
    let t = travel;
    // u(T) = k1 A + k0
    let k0 = 2.0 * (vp * t - params.length) / (t * t);
    let k1 = t / 3.0;
    let quad = crate::poly::Poly::new(vec![
        params.beta - 0.5 * k0 * k0 + k0 * vp / params.phi,
        vp - k1 * k0 + k1 * vp / params.phi,
        -0.5 * k1 * k1,
    ]);
    let roots = quad.real_roots_upto_quadratic(f64::NEG_INFINITY, f64::INFINITY);
    let mut best: Option<(f64, UnconstrainedCoeffs)> = None;
    let mut candidates = Vec::new();
    for jerk in roots {
        let u0 = 2.0 * (vp * t - params.length - jerk * t.powi(3) / 3.0) / (t * t);
        let v0 = vp - u0 * t - jerk * t * t / 2.0;
        candidates.push(v0);
        if !(v0 > 0.0 && v0 <= v_max) {
            continue;
        }
        let sol = UnconstrainedCoeffs::from_local(t0, t0 + t, jerk, u0, v0, CaseTag::CaseB, [0.0; 5]);
        if !(sol.segment.min_speed() > 0.0) {
            continue;
        }
        if best
            .as_ref()
            .is_none_or(|(_, b)| sol.objective(params.beta) < b.objective(params.beta))
        {
            best = Some((v0, sol));
        }
    }
    let (v0, mut sol) = best.ok_or(Error::NoFeasibleRoot {
        what: "matched-speed arrival speed",
        candidates,
    })?;
    sol.residuals = case_b_residuals(&sol, v0, params, target);
    Ok((v0, sol))
}

#[cfg(test)]
mod tests {
    use super::*;

    const L: f64 = 400.0;
    const BETA: f64 = 2.667;

    fn reference_b() -> (CaseBParams, MergeTarget) {
        (
            CaseBParams {
                length: L,
                beta: BETA,
                phi: 1.8,
                delta: 0.0,
            },
            MergeTarget {
                v_prev_terminal: 30.0,
                t_prev_m: 15.0,
            },
        )
    }

    #[test]
    fn beta_zero_is_constant_speed() {
        let s = solve_case_a(0.0, 20.0, L, 0.0).unwrap();
        assert_eq!((s.a, s.b, s.c, s.d), (0.0, 0.0, 20.0, 0.0));
        assert_eq!(s.t_m, 20.0);
        let end = s.trajectory().unwrap().eval(20.0).unwrap();
        assert_eq!((end.x, end.v, end.u), (400.0, 20.0, 0.0));
    }

    #[test]
    fn case_a_matches_brute_force_quartic_scan() {
        let v0 = 20.0;
        let s = solve_case_a(0.0, v0, L, BETA).unwrap();
        let p = |v: f64| 4.0 * v.powi(4) - 3.0 * v0 * v0 * v * v - v0.powi(3) * v - 4.5 * BETA * L * L;
        // Scan (v0, 100] at 1e-6 resolution for the sign change.
        let mut v = v0 + 1e-6;
        let mut prev = p(v);
        let mut found = None;
        while v < 100.0 {
            let next = v + 1e-6;
            let fv = p(next);
            if prev.signum() != fv.signum() {
                found = Some(next);
                break;
            }
            prev = fv;
            v = next;
        }
        let scanned = found.expect("root in scan range");
        assert!((s.terminal_speed() - scanned).abs() < 2e-6);
        assert!(s.t_m < 20.0 && s.terminal_speed() > v0);
        assert!(s.max_residual() < 1e-8, "{:?}", s.residuals);
    }

    #[test]
    fn case_a_time_shift() {
        let s0 = solve_case_a(0.0, 20.0, L, BETA).unwrap();
        let s5 = solve_case_a(5.0, 20.0, L, BETA).unwrap();
        assert!((s5.t_m - s0.t_m - 5.0).abs() < 1e-12);
        assert!((s5.a - s0.a).abs() < 1e-15);
    }

    #[test]
    fn travel_time_formula_agrees() {
        let s = solve_case_a(0.0, 20.0, L, BETA).unwrap();
        let t = closed_form_travel_time(s.a, 20.0, L, BETA).unwrap();
        assert!((t - (s.t_m - s.t0)).abs() < 1e-9);
        assert_eq!(closed_form_travel_time(0.0, 20.0, L, 0.0).unwrap(), 20.0);
        assert!(closed_form_travel_time(0.0, 20.0, L, 1.0).is_err());
    }

    #[test]
    fn case_b_example_terminal_time() {
        let (p, m) = reference_b();
        let s = solve_case_b(1.0, 20.0, &p, &m).unwrap();
        assert!((s.t_m - 16.6856).abs() < 1e-3, "t_m = {}", s.t_m);
        assert!(merge_tangency_residual(&s, &p, &m).abs() < 1e-6);
        assert!(s.max_residual() < 1e-8, "{:?}", s.residuals);
    }

    #[test]
    fn matched_speed_example() {
        let (p, m) = reference_b();
        let (v0, s) = solve_case_b_matched_speed(1.0, &p, &m, 30.0).unwrap();
        assert!((v0 - 16.2005).abs() < 1e-3, "v0 = {v0}");
        assert!((s.t_m - s.t0 - 15.8).abs() < 1e-9);
        assert!((s.terminal_speed() - 30.0).abs() < 1e-6);
        assert!(s.max_residual() < 1e-8);
    }

    #[test]
    fn matched_speed_is_continuous_in_predecessor_speed() {
        let (p, m) = reference_b();
        let (v_a, _) = solve_case_b_matched_speed(1.0, &p, &m, 30.0).unwrap();
        let bumped = MergeTarget {
            v_prev_terminal: 31.0,
            ..m
        };
        let (v_b, _) = solve_case_b_matched_speed(1.0, &p, &bumped, 40.0).unwrap();
        let slope = v_b - v_a;
        assert!(slope.is_finite() && slope.abs() < 10.0);
    }

    #[test]
    fn case_b_rejects_nonpositive_predecessor_speed() {
        let (p, mut m) = reference_b();
        m.v_prev_terminal = 0.0;
        assert!(matches!(
            solve_case_b(1.0, 20.0, &p, &m),
            Err(Error::InvalidParameter(_))
        ));
    }
}
