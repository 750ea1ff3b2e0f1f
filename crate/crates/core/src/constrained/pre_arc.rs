use crate::error::{Error, Result};
use crate::model::{PolySegment, State};
use crate::safety::Headway;

/// Cubic arc from `(t0, x = 0, v0)` that meets the headway boundary at `t1`
/// tangentially, with control matching the boundary-riding control there.
///
/// In local time `s = t - t0`, with `S = t1 - t0`, jerk `A` and initial
/// acceleration `B`:
///
/// ```text
/// φ (A S + B) + v(t1)         = v_p(t1)
/// x(t1) + φ v(t1) + δ         = x_p(t1)
/// ```
///
/// The determinant `φ²S²/2 + φS³/3 + S⁴/12` vanishes only at `S = 0`.
pub fn pre_arc_coeffs(t1: f64, t0: f64, v0: f64, leader_at_t1: State, h: Headway) -> Result<PolySegment> {
    let s = t1 - t0;
    let phi = h.phi;
    let det = phi * phi * s * s / 2.0 + phi * s.powi(3) / 3.0 + s.powi(4) / 12.0;
    if !(s > 0.0) || !(det > 0.0) || !det.is_finite() {
        return Err(Error::SingularSystem { t1 });
    }
    let m11 = phi * s + s * s / 2.0;
    let m12 = phi + s;
    let m21 = s.powi(3) / 6.0 + phi * s * s / 2.0;
    let m22 = s * s / 2.0 + phi * s;
    let r1 = leader_at_t1.v - v0;
    let r2 = leader_at_t1.x - h.delta - v0 * s - phi * v0;
    let jerk = (r1 * m22 - m12 * r2) / det;
    let u0 = (m11 * r2 - m21 * r1) / det;
    Ok(PolySegment::from_local(t0, t1, jerk, u0, v0, 0.0))
}

/// `u(t1) + φ·jerk - u_p(t1)`; positive means the slack was already
/// negative just before `t1`, so `t1` cannot be the first contact.
pub fn entry_indicator(pre: &PolySegment, leader_at_t1: State, h: Headway) -> f64 {
    pre.state_at(pre.t_end).u + h.phi * pre.a - leader_at_t1.u
}
