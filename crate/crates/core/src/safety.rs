//! Headway slack `x_p - x - φ v - δ` between a follower and its leader.

use crate::error::{Error, Result};
use crate::model::{ExpSegment, Trajectory};
use crate::roots::{bisect, golden_section};

/// Slack below `-TOL_GAP` counts as a violation.
pub const TOL_GAP: f64 = 1e-6;
/// Slack within `TOL_ACTIVE` of zero counts as riding the constraint.
pub const TOL_ACTIVE: f64 = 1e-4;

const EXP_GRID: f64 = 1e-3;
const ACTIVE_GRID: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Headway {
    pub phi: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SafetyReport {
    /// `(follower id, leader id)` when known.
    pub pair: Option<(usize, usize)>,
    pub t_from: f64,
    pub t_to: f64,
    pub min_gap_slack: f64,
    pub t_at_min: f64,
    pub first_violation_time: Option<f64>,
    pub active_intervals: Vec<(f64, f64)>,
}

impl SafetyReport {
    pub fn for_pair(mut self, follower: usize, leader: usize) -> Self {
        self.pair = Some((follower, leader));
        self
    }

    pub fn is_violated(&self) -> bool {
        self.first_violation_time.is_some()
    }
}

fn breach(leader: &Trajectory, t: f64) -> Error {
    Error::AssumptionBreach {
        t,
        t_m: leader.t_m(),
        hold_until: leader.hold_until(),
    }
}

/// Slack at a single instant. Past the leader's terminal time its
/// constant-speed hold is used.
pub fn gap(follower: &Trajectory, leader: &Trajectory, t: f64, h: Headway) -> Result<f64> {
    let f = follower.eval(t)?;
    let l = leader.eval(t).map_err(|_| breach(leader, t))?;
    Ok(l.x - f.x - h.phi * f.v - h.delta)
}

/// Minimum slack and first violation over `[t_from, t_to]`.
pub fn check_window(
    follower: &Trajectory,
    leader: &Trajectory,
    t_from: f64,
    t_to: f64,
    h: Headway,
) -> Result<SafetyReport> {
    if !(t_from <= t_to) {
        return Err(Error::InvalidParameter(format!("empty window [{t_from}, {t_to}]")));
    }
    if t_from == t_to {
        let s = gap(follower, leader, t_from, h)?;
        let mut acc = Accumulator::new(t_from, t_to);
        acc.point(t_from, s);
        acc.active_sample(t_from, s);
        acc.flush_active();
        return Ok(acc.finish());
    }
    let fp = follower.pieces(t_from, t_to)?;
    scan_pieces(&fp, leader, h, true)
}

/// Same as [`check_window`] for a follower given directly as pieces.
/// Active intervals are only computed when `with_active` is set.
pub fn scan_pieces(
    follower: &[ExpSegment],
    leader: &Trajectory,
    h: Headway,
    with_active: bool,
) -> Result<SafetyReport> {
    let (Some(first), Some(last)) = (follower.first(), follower.last()) else {
        return Err(Error::InvalidParameter("no follower pieces".into()));
    };
    let (t_from, t_to) = (first.t_start, last.t_end);
    let lp = leader.pieces(t_from, t_to).map_err(|_| breach(leader, t_to))?;
    let mut acc = Accumulator::new(t_from, t_to);
    let (mut i, mut j) = (0, 0);
    while i < follower.len() && j < lp.len() {
        let (f, l) = (&follower[i], &lp[j]);
        let a = f.t_start.max(l.t_start);
        let b = f.t_end.min(l.t_end);
        if b > a {
            scan_overlap(f, l, a, b, h, with_active, &mut acc);
        }
        if f.t_end <= l.t_end {
            i += 1;
        } else {
            j += 1;
        }
    }
    acc.flush_active();
    Ok(acc.finish())
}

struct Accumulator {
    t_from: f64,
    t_to: f64,
    min: f64,
    t_min: f64,
    first_violation: Option<f64>,
    active: Vec<(f64, f64)>,
    run: Option<(f64, f64)>,
}

impl Accumulator {
    fn new(t_from: f64, t_to: f64) -> Self {
        Accumulator {
            t_from,
            t_to,
            min: f64::INFINITY,
            t_min: t_from,
            first_violation: None,
            active: Vec::new(),
            run: None,
        }
    }

    fn point(&mut self, t: f64, s: f64) {
        if s < self.min {
            self.min = s;
            self.t_min = t;
        }
        if self.first_violation.is_none() && s < -TOL_GAP {
            self.first_violation = Some(t);
        }
    }

    fn active_sample(&mut self, t: f64, s: f64) {
        if s.abs() <= TOL_ACTIVE {
            self.run = Some(match self.run {
                Some((a, _)) => (a, t),
                None => (t, t),
            });
        } else {
            self.flush_active();
        }
    }

    fn flush_active(&mut self) {
        if let Some(r) = self.run.take() {
            match self.active.last_mut() {
                Some(last) if r.0 - last.1 <= 1e-9 => last.1 = r.1,
                _ => self.active.push(r),
            }
        }
    }

    fn finish(self) -> SafetyReport {
        SafetyReport {
            pair: None,
            t_from: self.t_from,
            t_to: self.t_to,
            min_gap_slack: self.min,
            t_at_min: self.t_min,
            first_violation_time: self.first_violation,
            active_intervals: self.active,
        }
    }
}

fn scan_overlap(f: &ExpSegment, l: &ExpSegment, a: f64, b: f64, h: Headway, with_active: bool, acc: &mut Accumulator) {
    let slack = |t: f64| {
        let fs = f.state_at(t);
        l.state_at(t).x - fs.x - h.phi * fs.v - h.delta
    };
    let span = b - a;
    let samples: Vec<f64> = if f.decay.is_zero() && l.decay.is_zero() {
        // Polynomial slack: extrema at roots of its derivative.
        let (fb, _) = f.rebased(a);
        let (lb, _) = l.rebased(a);
        let poly = &(&lb - &fb) - &fb.derivative().scale(h.phi);
        let d = poly.derivative();
        let mut pts = vec![a];
        if d.degree() <= 2 {
            pts.extend(
                d.real_roots_upto_quadratic(0.0, span)
                    .into_iter()
                    .filter(|s| *s > 0.0 && *s < span)
                    .map(|s| a + s),
            );
        }
        pts.push(b);
        pts
    } else {
        let n = (span / EXP_GRID).ceil().max(1.0) as usize;
        (0..=n)
            .map(|k| if k == n { b } else { a + span * k as f64 / n as f64 })
            .collect()
    };
    let values: Vec<f64> = samples.iter().map(|&t| slack(t)).collect();

    // Minimum, refined between grid neighbours when the slack is not polynomial.
    let (k_min, _) = values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |m, (k, &v)| if v < m.1 { (k, v) } else { m });
    let (mut t_min, mut v_min) = (samples[k_min], values[k_min]);
    if !(f.decay.is_zero() && l.decay.is_zero()) {
        let lo = samples[k_min.saturating_sub(1)];
        let hi = samples[(k_min + 1).min(samples.len() - 1)];
        if hi > lo {
            let (tr, vr) = golden_section(slack, lo, hi, 1e-9);
            if vr < v_min {
                t_min = tr;
                v_min = vr;
            }
        }
    }

    // First crossing below -TOL_GAP.
    if acc.first_violation.is_none() {
        if values[0] < -TOL_GAP {
            acc.first_violation = Some(samples[0]);
        } else {
            for k in 1..samples.len() {
                if values[k] < -TOL_GAP {
                    let t = bisect(|t| slack(t) + TOL_GAP, samples[k - 1], samples[k], 1e-10).unwrap_or(samples[k]);
                    acc.first_violation = Some(t);
                    break;
                }
            }
            if acc.first_violation.is_none() && v_min < -TOL_GAP {
                // Dip between grid points.
                let t = bisect(|t| slack(t) + TOL_GAP, samples[k_min.saturating_sub(1)], t_min, 1e-10).unwrap_or(t_min);
                acc.first_violation = Some(t);
            }
        }
    }
    if v_min < acc.min {
        acc.min = v_min;
        acc.t_min = t_min;
    }

    if with_active {
        let n = (span / ACTIVE_GRID).ceil().max(1.0) as usize;
        let grid: Vec<f64> = if samples.len() > n {
            samples
        } else {
            (0..=n)
                .map(|k| if k == n { b } else { a + span * k as f64 / n as f64 })
                .collect()
        };
        for t in grid {
            acc.active_sample(t, slack(t));
        }
    }
}

/// Sufficient condition for the headway to stay inactive under unconstrained
/// control: the follower is no faster at entry and enters at least one
/// headway later.
pub fn theorem1_guard(v0_i: f64, v0_ip: f64, t0_i: f64, t0_ip: f64, phi: f64, delta: f64) -> bool {
    v0_i <= v0_ip && t0_i - t0_ip >= phi + delta / v0_i
}

/// The same condition applied to the FIFO predecessor; when it holds the
/// merging constraint is met by the plain same-lane plan.
pub fn theorem4_guard(v0_i: f64, v0_im1: f64, t0_i: f64, t0_im1: f64, phi: f64, delta: f64) -> bool {
    theorem1_guard(v0_i, v0_im1, t0_i, t0_im1, phi, delta)
}
