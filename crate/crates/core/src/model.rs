//! Scenario parameters, vehicle records and the piecewise-analytic trajectory
//! representation shared by the planners, the safety checker and the
//! simulator.
//!
//! All quantities are SI: metres, seconds, m/s and m/s². Segments keep their
//! closed forms in local time `s = t - t_start`; absolute-time coefficients in
//! the `u = a t + b` convention are available through
//! [`PolySegment::absolute_coeffs`].

use crate::error::{Error, Result};
use crate::poly::Poly;

/// Tolerance on position and speed jumps at segment breakpoints.
pub const CONTINUITY_TOL: f64 = 1e-9;
/// Tolerance on control jumps at internal breakpoints.
pub const CONTROL_CONTINUITY_TOL: f64 = 1e-6;
/// Slack allowed when a query lands a hair outside a trajectory's domain.
const DOMAIN_EPS: f64 = 1e-9;

/// Position, speed and acceleration at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    pub x: f64,
    pub v: f64,
    pub u: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioParams {
    /// Control-zone length (m).
    pub length: f64,
    /// Reaction-time headway coefficient (s).
    pub phi: f64,
    /// Standstill gap (m).
    pub delta: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Weight on travel time in the objective.
    pub beta: f64,
    /// Window within which a FIFO predecessor must hold its terminal speed.
    pub zeta: f64,
    /// Vehicles per hour on each lane.
    pub arrival_rate_per_lane: f64,
    pub rng_seed: u64,
}

impl ScenarioParams {
    /// The merging-experiment setup: L = 400 m, φ = 1.8 s, δ = 0,
    /// v ∈ [10, 30] m/s, u ∈ [-3.924, 3.924] m/s², α = 0.26, 600 veh/h/lane.
    pub fn merging_experiment() -> Self {
        let (u_min, u_max) = (-3.924, 3.924);
        let beta = alpha_to_beta(0.26, u_min, u_max).expect("valid alpha");
        let (phi, delta, v_min) = (1.8, 0.0, 10.0);
        ScenarioParams {
            length: 400.0,
            phi,
            delta,
            v_min,
            v_max: 30.0,
            u_min,
            u_max,
            beta,
            zeta: default_zeta(phi, delta, v_min),
            arrival_rate_per_lane: 600.0,
            rng_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.length > 0.0) {
            return bad("L must be positive");
        }
        if !(self.phi > 0.0) {
            return bad("phi must be positive");
        }
        if !(self.delta >= 0.0) {
            return bad("delta must be non-negative");
        }
        if !(self.v_min > 0.0 && self.v_min <= self.v_max) {
            return bad("speed bounds must satisfy 0 < v_min <= v_max");
        }
        if !(self.u_min < 0.0 && 0.0 < self.u_max) {
            return bad("acceleration bounds must satisfy u_min < 0 < u_max");
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return bad("beta must be finite and non-negative");
        }
        if !(self.zeta > self.phi) {
            return bad("zeta must exceed phi");
        }
        if !(self.arrival_rate_per_lane >= 0.0) {
            return bad("arrival rate must be non-negative");
        }
        Ok(())
    }
}

/// `φ + δ / v_min + 1 s`, used when no hold window is configured.
pub fn default_zeta(phi: f64, delta: f64, v_min: f64) -> f64 {
    phi + delta / v_min + 1.0
}

/// Converts the normalized weight α ∈ [0, 1) into the time penalty β.
pub fn alpha_to_beta(alpha: f64, u_min: f64, u_max: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1), got {alpha}"
        )));
    }
    let umax2 = u_max.powi(2).max(u_min.powi(2));
    Ok(alpha * umax2 / (2.0 * (1.0 - alpha)))
}

/// Inverse of [`alpha_to_beta`].
pub fn beta_to_alpha(beta: f64, u_min: f64, u_max: f64) -> f64 {
    let umax2 = u_max.powi(2).max(u_min.powi(2));
    2.0 * beta / (umax2 + 2.0 * beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lane {
    Main,
    Merging,
}

impl Lane {
    pub fn as_str(self) -> &'static str {
        match self {
            Lane::Main => "main",
            Lane::Merging => "merging",
        }
    }
}

/// One vehicle as seen by the coordinator.
#[derive(Clone, Debug, PartialEq)]
pub struct CavRecord {
    pub id: usize,
    pub lane: Lane,
    /// Control-zone arrival time (s).
    pub t0: f64,
    /// Arrival speed (m/s).
    pub v0: f64,
    /// Current index in the FIFO queue; -1 once dropped.
    pub fifo_index: i64,
    pub trajectory: Option<Trajectory>,
}

/// Unconstrained arc `u = a s + b`, `v = a s²/2 + b s + c`,
/// `x = a s³/6 + b s²/2 + c s + d`, with `s = t - t_start`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolySegment {
    pub t_start: f64,
    pub t_end: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl PolySegment {
    pub fn from_local(t_start: f64, t_end: f64, a: f64, b: f64, c: f64, d: f64) -> Self {
        PolySegment {
            t_start,
            t_end,
            a,
            b,
            c,
            d,
        }
    }

    /// Builds a segment from absolute-time coefficients, i.e.
    /// `u(t) = a t + b`, `v(t) = a t²/2 + b t + c`, `x(t) = a t³/6 + b t²/2 + c t + d`.
    pub fn from_absolute(t_start: f64, t_end: f64, a: f64, b: f64, c: f64, d: f64) -> Self {
        let t = t_start;
        let x0 = a * t.powi(3) / 6.0 + b * t * t / 2.0 + c * t + d;
        let v0 = a * t * t / 2.0 + b * t + c;
        let u0 = a * t + b;
        PolySegment::from_local(t_start, t_end, a, u0, v0, x0)
    }

    /// Absolute-time coefficients `(a, b, c, d)`.
    pub fn absolute_coeffs(&self) -> (f64, f64, f64, f64) {
        let t = self.t_start;
        let a = self.a;
        let b = self.b - a * t;
        let c = self.c - self.b * t + a * t * t / 2.0;
        let d = self.d - self.c * t + self.b * t * t / 2.0 - a * t.powi(3) / 6.0;
        (a, b, c, d)
    }

    pub fn state_at(&self, t: f64) -> State {
        let s = t - self.t_start;
        State {
            x: ((self.a / 6.0 * s + self.b / 2.0) * s + self.c) * s + self.d,
            v: (self.a / 2.0 * s + self.b) * s + self.c,
            u: self.a * s + self.b,
        }
    }

    /// Position polynomial in local time.
    pub fn x_poly(&self) -> Poly {
        Poly::new(vec![self.d, self.c, self.b / 2.0, self.a / 6.0])
    }

    /// `∫ ½u² dt` over the segment.
    pub fn control_energy(&self) -> f64 {
        let h = self.t_end - self.t_start;
        let (a, b) = (self.a, self.b);
        0.5 * (a * a * h.powi(3) / 3.0 + a * b * h * h + b * b * h)
    }

    /// Smallest speed on the segment (speed is quadratic in time).
    pub fn min_speed(&self) -> f64 {
        let h = self.t_end - self.t_start;
        let mut m = self.c.min(self.state_at(self.t_end).v);
        if self.a != 0.0 {
            let s = -self.b / self.a;
            if s > 0.0 && s < h {
                m = m.min(self.state_at(self.t_start + s).v);
            }
        }
        m
    }
}

/// Exponential-polynomial arc: `x(s) = base(s) + decay(s)·e^{-s/φ}` with
/// `s = t - t_start`.
///
/// This family is closed under the boundary-riding dynamics
/// `v̇ = (v_p - v)/φ` whenever the predecessor is itself polynomial or
/// exponential-polynomial, so arcs behind constrained predecessors stay in
/// closed form. With `decay = 0` it reduces to a polynomial piece.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub phi: f64,
    pub base: Poly,
    pub decay: Poly,
}

impl ExpSegment {
    pub fn polynomial(t_start: f64, t_end: f64, x_poly: Poly) -> Self {
        ExpSegment {
            t_start,
            t_end,
            phi: f64::INFINITY,
            base: x_poly,
            decay: Poly::zero(),
        }
    }

    fn decay_factor(&self, s: f64) -> f64 {
        if self.decay.is_zero() {
            0.0
        } else {
            (-s / self.phi).exp()
        }
    }

    /// Speed as `(poly part, decay-multiplier part)`.
    pub fn velocity_parts(&self) -> (Poly, Poly) {
        let k = 1.0 / self.phi;
        let base = self.base.derivative();
        let decay = &self.decay.derivative() - &self.decay.scale(k);
        (base, decay)
    }

    /// Control as `(poly part, decay-multiplier part)`.
    pub fn control_parts(&self) -> (Poly, Poly) {
        let k = 1.0 / self.phi;
        let (vb, vd) = self.velocity_parts();
        (vb.derivative(), &vd.derivative() - &vd.scale(k))
    }

    pub fn state_at(&self, t: f64) -> State {
        let s = t - self.t_start;
        let (b, b1, b2) = self.base.eval2(s);
        if self.decay.is_zero() {
            return State { x: b, v: b1, u: b2 };
        }
        let e = self.decay_factor(s);
        let k = 1.0 / self.phi;
        let (d, d1, d2) = self.decay.eval2(s);
        State {
            x: b + d * e,
            v: b1 + (d1 - k * d) * e,
            u: b2 + (d2 - 2.0 * k * d1 + k * k * d) * e,
        }
    }

    /// Re-expresses this piece in local time of a later origin `t_new`,
    /// returning `(base, decay)` valid for `s' = t - t_new`.
    pub fn rebased(&self, t_new: f64) -> (Poly, Poly) {
        let delta = t_new - self.t_start;
        let base = self.base.shift(delta);
        let decay = if self.decay.is_zero() {
            Poly::zero()
        } else {
            self.decay.shift(delta).scale((-delta / self.phi).exp())
        };
        (base, decay)
    }

    /// `∫ ½u² dt` over the segment in closed form.
    pub fn control_energy(&self) -> f64 {
        let (ub, ud) = self.control_parts();
        let span = self.t_end - self.t_start;
        let k = 1.0 / self.phi;
        let poly_part = (&ub * &ub).antiderivative().eval(span);
        let cross = crate::poly::integrate_poly_exp(&(&ub * &ud), k, span);
        let sq = crate::poly::integrate_poly_exp(&(&ud * &ud), 2.0 * k, span);
        0.5 * (poly_part + 2.0 * cross + sq)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    Poly(PolySegment),
    Exp(ExpSegment),
}

impl Segment {
    pub fn t_start(&self) -> f64 {
        match self {
            Segment::Poly(p) => p.t_start,
            Segment::Exp(e) => e.t_start,
        }
    }

    pub fn t_end(&self) -> f64 {
        match self {
            Segment::Poly(p) => p.t_end,
            Segment::Exp(e) => e.t_end,
        }
    }

    pub fn state_at(&self, t: f64) -> State {
        match self {
            Segment::Poly(p) => p.state_at(t),
            Segment::Exp(e) => e.state_at(t),
        }
    }

    pub fn is_exp(&self) -> bool {
        matches!(self, Segment::Exp(_))
    }

    /// Generic exponential-polynomial view of the segment.
    pub fn as_exp_poly(&self) -> ExpSegment {
        match self {
            Segment::Poly(p) => ExpSegment::polynomial(p.t_start, p.t_end, p.x_poly()),
            Segment::Exp(e) => e.clone(),
        }
    }

    pub fn control_energy(&self) -> f64 {
        match self {
            Segment::Poly(p) => p.control_energy(),
            Segment::Exp(e) => e.control_energy(),
        }
    }
}

/// Ordered, contiguous segments from `t0` to the merging-point time `t_m`,
/// optionally extended at constant terminal speed through `hold_until`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    segments: Vec<Segment>,
    t0: f64,
    t_m: f64,
    terminal: State,
    hold_until: Option<f64>,
}

impl Trajectory {
    /// Validates contiguity and continuity of `x`, `v` (and `u` at internal
    /// breakpoints) before accepting the segments.
    pub fn new(segments: Vec<Segment>, hold_until: Option<f64>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::Discontinuity("no segments".into()))?;
        let t0 = first.t_start();
        for seg in &segments {
            if !(seg.t_end() > seg.t_start()) {
                return Err(Error::Discontinuity(format!(
                    "empty segment [{}, {}]",
                    seg.t_start(),
                    seg.t_end()
                )));
            }
        }
        for pair in segments.windows(2) {
            let (l, r) = (&pair[0], &pair[1]);
            let tb = l.t_end();
            if (tb - r.t_start()).abs() > 1e-12 {
                return Err(Error::Discontinuity(format!(
                    "gap between segments at {} and {}",
                    tb,
                    r.t_start()
                )));
            }
            let sl = l.state_at(tb);
            let sr = r.state_at(r.t_start());
            if (sl.x - sr.x).abs() > CONTINUITY_TOL || (sl.v - sr.v).abs() > CONTINUITY_TOL {
                return Err(Error::Discontinuity(format!(
                    "state jump at t={tb}: ({}, {}) -> ({}, {})",
                    sl.x, sl.v, sr.x, sr.v
                )));
            }
            if (sl.u - sr.u).abs() > CONTROL_CONTINUITY_TOL {
                return Err(Error::Discontinuity(format!(
                    "control jump at t={tb}: {} -> {}",
                    sl.u, sr.u
                )));
            }
        }
        let last = segments.last().expect("non-empty");
        let t_m = last.t_end();
        let terminal = last.state_at(t_m);
        if let Some(h) = hold_until {
            if h < t_m - DOMAIN_EPS {
                return Err(Error::InvalidParameter(format!(
                    "hold_until {h} precedes terminal time {t_m}"
                )));
            }
        }
        Ok(Trajectory {
            segments,
            t0,
            t_m,
            terminal,
            hold_until,
        })
    }

    /// Single constant-speed segment from `(t0, x=0, v)` to `t_m`.
    pub fn constant_speed(t0: f64, v: f64, t_m: f64) -> Result<Self> {
        Trajectory::new(
            vec![Segment::Poly(PolySegment::from_local(t0, t_m, 0.0, 0.0, v, 0.0))],
            None,
        )
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_m(&self) -> f64 {
        self.t_m
    }

    pub fn hold_until(&self) -> Option<f64> {
        self.hold_until
    }

    pub fn terminal_state(&self) -> State {
        self.terminal
    }

    pub fn terminal_speed(&self) -> f64 {
        self.terminal.v
    }

    /// Last instant at which [`Trajectory::eval`] succeeds.
    pub fn domain_end(&self) -> f64 {
        self.hold_until.map_or(self.t_m, |h| h.max(self.t_m))
    }

    pub fn with_hold_until(&self, hold_until: Option<f64>) -> Self {
        let mut out = self.clone();
        out.hold_until = hold_until.map(|h| h.max(self.t_m));
        out
    }

    /// Whether any boundary-riding arc is present.
    pub fn has_constrained_arc(&self) -> bool {
        self.segments.iter().any(Segment::is_exp)
    }

    /// Internal breakpoints (segment boundaries excluding `t0` and `t_m`).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(Segment::t_start).collect()
    }

    /// Closed-form state at `t`. Past `t_m` the terminal speed is held with
    /// zero control through `hold_until`.
    pub fn eval(&self, t: f64) -> Result<State> {
        if t < self.t0 - DOMAIN_EPS || !t.is_finite() {
            return Err(Error::OutOfDomain {
                t,
                t0: self.t0,
                limit: self.domain_end(),
            });
        }
        if t <= self.t_m {
            let idx = self.segment_index(t);
            return Ok(self.segments[idx].state_at(t.max(self.t0)));
        }
        if t <= self.domain_end() + DOMAIN_EPS {
            let v = self.terminal.v;
            return Ok(State {
                x: self.terminal.x + v * (t - self.t_m),
                v,
                u: 0.0,
            });
        }
        Err(Error::OutOfDomain {
            t,
            t0: self.t0,
            limit: self.domain_end(),
        })
    }

    fn segment_index(&self, t: f64) -> usize {
        // Last segment whose start is <= t.
        let idx = self.segments.partition_point(|s| s.t_start() <= t);
        idx.saturating_sub(1)
    }

    /// Exponential-polynomial pieces covering `[t_from, t_to]`, clipped to the
    /// window, including the constant-speed hold as a final polynomial piece.
    pub fn pieces(&self, t_from: f64, t_to: f64) -> Result<Vec<ExpSegment>> {
        if t_from < self.t0 - DOMAIN_EPS {
            return Err(Error::OutOfDomain {
                t: t_from,
                t0: self.t0,
                limit: self.domain_end(),
            });
        }
        if t_to > self.domain_end() + DOMAIN_EPS {
            return Err(Error::OutOfDomain {
                t: t_to,
                t0: self.t0,
                limit: self.domain_end(),
            });
        }
        let mut out = Vec::new();
        for seg in &self.segments {
            let (a, b) = (seg.t_start().max(t_from), seg.t_end().min(t_to));
            if b > a {
                let full = seg.as_exp_poly();
                let (base, decay) = full.rebased(a);
                out.push(ExpSegment {
                    t_start: a,
                    t_end: b,
                    phi: full.phi,
                    base,
                    decay,
                });
            }
        }
        if t_to > self.t_m {
            let a = t_from.max(self.t_m);
            let b = t_to;
            if b > a {
                let st = self.terminal;
                let x_at_a = st.x + st.v * (a - self.t_m);
                out.push(ExpSegment::polynomial(a, b, Poly::new(vec![x_at_a, st.v])));
            }
        }
        Ok(out)
    }

    /// Checks `x(t0) = 0` and `x(t_m) = length`.
    pub fn check_endpoints(&self, length: f64, tol: f64) -> Result<()> {
        let x0 = self.segments[0].state_at(self.t0).x;
        if x0.abs() > tol {
            return Err(Error::Discontinuity(format!("x(t0) = {x0}, expected 0")));
        }
        if (self.terminal.x - length).abs() > tol {
            return Err(Error::Discontinuity(format!(
                "x(t_m) = {}, expected {length}",
                self.terminal.x
            )));
        }
        Ok(())
    }

    /// `β (t_m - t0) + ∫ ½u² dt` over `[t0, t_m]`.
    pub fn objective(&self, beta: f64) -> f64 {
        beta * (self.t_m - self.t0) + self.control_energy()
    }

    /// `∫ ½u² dt` over `[t0, t_m]`.
    pub fn control_energy(&self) -> f64 {
        self.segments.iter().map(Segment::control_energy).sum()
    }
}
