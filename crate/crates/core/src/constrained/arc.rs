use crate::error::{Error, Result};
use crate::model::{ExpSegment, State, Trajectory};
use crate::poly::Poly;
use crate::safety::Headway;

/// One boundary-riding piece with its speed and control parts cached.
#[derive(Clone, Debug)]
struct ArcPiece {
    seg: ExpSegment,
    vb: Poly,
    vd: Poly,
    ub: Poly,
    ud: Poly,
}

impl ArcPiece {
    fn new(seg: ExpSegment) -> Self {
        let (vb, vd) = seg.velocity_parts();
        let (ub, ud) = seg.control_parts();
        ArcPiece { seg, vb, vd, ub, ud }
    }

    fn state_at(&self, t: f64) -> State {
        let s = t - self.seg.t_start;
        let e = (-s / self.seg.phi).exp();
        State {
            x: self.seg.base.eval(s) + self.seg.decay.eval(s) * e,
            v: self.vb.eval(s) + self.vd.eval(s) * e,
            u: self.ub.eval(s) + self.ud.eval(s) * e,
        }
    }
}

/// Follower riding the headway boundary behind a given leader from `t1` on:
/// `v̇ = (v_p - v)/φ` and `x = x_p - φ v - δ` hold exactly.
#[derive(Clone, Debug)]
pub struct Arc {
    pieces: Vec<ArcPiece>,
    t_reach: Option<f64>,
}

/// One piece of the arc behind a leader piece `x_p = P(s) + Q(s) e^{-s/φ}`.
///
/// The speed is `Vp(s) + (R(s) + K) e^{-s/φ}` with `Vp = Σ (-φ)^k P_v^(k)`,
/// `R = ∫ Q_v / φ` and `K` fixed by the entry speed.
fn ride(leader: &ExpSegment, v_entry: f64, h: Headway) -> Result<ExpSegment> {
    if !leader.decay.is_zero() && (leader.phi - h.phi).abs() > 1e-12 * h.phi {
        return Err(Error::InvalidParameter(
            "leader arc decays with a different headway coefficient".into(),
        ));
    }
    let (pv, qv) = leader.velocity_parts();
    let mut vp = Poly::zero();
    let mut term = pv.clone();
    let mut k = 1.0;
    while !term.is_zero() {
        vp = &vp + &term.scale(k);
        term = term.derivative();
        k *= -h.phi;
    }
    let r = qv.antiderivative().scale(1.0 / h.phi);
    let kc = v_entry - vp.eval(0.0);
    let base = &(&leader.base - &vp.scale(h.phi)) - &Poly::constant(h.delta);
    let decay = &leader.decay - &(&r + &Poly::constant(kc)).scale(h.phi);
    Ok(ExpSegment {
        t_start: leader.t_start,
        t_end: leader.t_end,
        phi: h.phi,
        base,
        decay,
    })
}

/// Closed-form constrained arc over `[t1, t_end]`, split wherever the
/// leader's representation changes (including its terminal time).
pub fn arc_solution(t1: f64, v_entry: f64, leader: &Trajectory, t_end: f64, h: Headway) -> Result<Vec<ExpSegment>> {
    Ok(Arc::build(t1, v_entry, leader, t_end, h)?
        .pieces
        .into_iter()
        .map(|p| p.seg)
        .collect())
}

impl Arc {
    pub fn build(t1: f64, v_entry: f64, leader: &Trajectory, t_end: f64, h: Headway) -> Result<Self> {
        let lp = leader.pieces(t1, t_end).map_err(|_| Error::AssumptionBreach {
            t: t_end,
            t_m: leader.t_m(),
            hold_until: leader.hold_until(),
        })?;
        let mut pieces = Vec::with_capacity(lp.len());
        let mut v = v_entry;
        for l in &lp {
            let p = ArcPiece::new(ride(l, v, h)?);
            v = p.state_at(p.seg.t_end).v;
            pieces.push(p);
        }
        if pieces.is_empty() {
            return Err(Error::InvalidParameter(format!("empty arc window [{t1}, {t_end}]")));
        }
        Ok(Arc { pieces, t_reach: None })
    }

    /// Builds the arc far enough for its position to reach `target`, and
    /// records that time. Fails if it never gets there within a generous
    /// horizon.
    pub fn build_to_position(t1: f64, v_entry: f64, leader: &Trajectory, target: f64, h: Headway) -> Result<Self> {
        let mut horizon = leader.t_m().max(t1) + 20.0;
        for _ in 0..8 {
            let mut arc = Arc::build(t1, v_entry, leader, horizon, h)?;
            if let Some(t) = arc.first_time_at(target) {
                arc.t_reach = Some(t);
                return Ok(arc);
            }
            horizon = t1 + 3.0 * (horizon - t1);
        }
        Err(Error::Infeasible(format!(
            "constrained arc entered at t1={t1} never reaches x={target}"
        )))
    }

    fn first_time_at(&self, target: f64) -> Option<f64> {
        for p in &self.pieces {
            let (a, b) = (p.seg.t_start, p.seg.t_end);
            if p.state_at(b).x < target {
                continue;
            }
            if p.state_at(a).x >= target {
                return Some(a);
            }
            // Position may be non-monotone if speed dips negative; scan first.
            let n = 64;
            let mut lo = a;
            for k in 1..=n {
                let t = if k == n { b } else { a + (b - a) * k as f64 / n as f64 };
                if p.state_at(t).x >= target {
                    return crate::roots::brent(|t| p.state_at(t).x - target, lo, t, 1e-12);
                }
                lo = t;
            }
        }
        None
    }

    pub fn t_start(&self) -> f64 {
        self.pieces[0].seg.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.pieces.last().map_or(f64::NAN, |p| p.seg.t_end)
    }

    /// Time at which the arc reaches the target position, if built with
    /// [`Arc::build_to_position`].
    pub fn t_reach(&self) -> Option<f64> {
        self.t_reach
    }

    pub fn state_at(&self, t: f64) -> State {
        let idx = self.pieces.partition_point(|p| p.seg.t_start <= t).saturating_sub(1);
        self.pieces[idx].state_at(t)
    }

    /// Pieces clipped to `[t_start, t]`.
    pub fn segments_until(&self, t: f64) -> Vec<ExpSegment> {
        self.pieces
            .iter()
            .filter(|p| p.seg.t_start < t)
            .map(|p| {
                let mut seg = p.seg.clone();
                seg.t_end = seg.t_end.min(t);
                seg
            })
            .collect()
    }

    /// Smallest speed on `[t_start, t]`, sampled at the piece ends and a
    /// fine grid.
    pub fn min_speed_until(&self, t: f64) -> f64 {
        let mut m = f64::INFINITY;
        for p in self.pieces.iter().filter(|p| p.seg.t_start < t) {
            let (a, b) = (p.seg.t_start, p.seg.t_end.min(t));
            let n = ((b - a) / 0.05).ceil().max(1.0) as usize;
            for k in 0..=n {
                let tk = if k == n { b } else { a + (b - a) * k as f64 / n as f64 };
                m = m.min(p.state_at(tk).v);
            }
        }
        m
    }
}
