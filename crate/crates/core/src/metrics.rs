//! Objective, fuel and per-lane run summaries.

use crate::error::{Error, Result};
use crate::model::{Lane, Trajectory};

/// Polynomial fuel-rate metamodel (mL/s):
/// cruise `w0 + w1 v + w2 v² + w3 v³`, acceleration `u (r0 + r1 v + r2 v²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FuelCoeffs {
    pub w: [f64; 4],
    pub r: [f64; 3],
}

impl Default for FuelCoeffs {
    /// Non-authoritative defaults for a mid-size passenger car. The cruise
    /// quadratic term is zero so that every coefficient is non-negative.
    fn default() -> Self {
        FuelCoeffs {
            w: [0.1569, 2.450e-2, 0.0, 5.975e-5],
            r: [0.07224, 9.681e-2, 1.075e-3],
        }
    }
}

impl FuelCoeffs {
    pub fn validate(&self) -> Result<()> {
        if self.w.iter().chain(&self.r).any(|c| !(*c >= 0.0)) {
            return Err(Error::InvalidParameter("fuel coefficients must be non-negative".into()));
        }
        Ok(())
    }

    pub fn cruise_rate(&self, v: f64) -> f64 {
        let w = &self.w;
        ((w[3] * v + w[2]) * v + w[1]) * v + w[0]
    }

    pub fn accel_rate(&self, v: f64, u: f64) -> f64 {
        let r = &self.r;
        u * ((r[2] * v + r[1]) * v + r[0])
    }
}

/// How braking (`u < 0`) is treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BrakingRule {
    /// No fuel at all while braking.
    #[default]
    ZeroAll,
    /// Only the acceleration term is dropped; cruise fuel still flows.
    ZeroAccelOnly,
}

impl BrakingRule {
    pub fn rate(self, c: &FuelCoeffs, v: f64, u: f64) -> f64 {
        if u >= 0.0 {
            c.cruise_rate(v) + c.accel_rate(v, u)
        } else {
            match self {
                BrakingRule::ZeroAll => 0.0,
                BrakingRule::ZeroAccelOnly => c.cruise_rate(v),
            }
        }
    }
}

/// `β (t_m - t0) + ∫ ½u²` in closed form.
pub fn objective(traj: &Trajectory, beta: f64) -> f64 {
    traj.objective(beta)
}

/// Fuel over `[t0, t_m]` by the trapezoid rule at step `dt` (the last step is
/// shortened to land on `t_m`).
pub fn fuel(traj: &Trajectory, coeffs: &FuelCoeffs, rule: BrakingRule, dt: f64) -> f64 {
    let (t0, t_m) = (traj.t0(), traj.t_m());
    let rate = |t: f64| {
        let s = traj.eval(t).expect("inside trajectory domain");
        rule.rate(coeffs, s.v, s.u)
    };
    let n = ((t_m - t0) / dt).ceil().max(1.0) as usize;
    let mut total = 0.0;
    let mut prev_t = t0;
    let mut prev_f = rate(t0);
    for k in 1..=n {
        let t = if k == n { t_m } else { t0 + dt * k as f64 };
        let f = rate(t);
        total += 0.5 * (prev_f + f) * (t - prev_t);
        prev_t = t;
        prev_f = f;
    }
    total
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LaneStats {
    pub count: usize,
    pub mean_travel_time: f64,
    pub mean_energy: f64,
    pub mean_objective: f64,
    pub mean_fuel: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunMetrics {
    pub main: LaneStats,
    pub merging: LaneStats,
    pub overall: LaneStats,
}

/// Per-vehicle figures feeding [`summarize`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleFigures {
    pub lane: Lane,
    pub travel_time: f64,
    pub energy: f64,
    pub objective: f64,
    pub fuel: f64,
}

impl VehicleFigures {
    pub fn from_trajectory(
        lane: Lane,
        traj: &Trajectory,
        beta: f64,
        coeffs: &FuelCoeffs,
        rule: BrakingRule,
        dt: f64,
    ) -> Self {
        VehicleFigures {
            lane,
            travel_time: traj.t_m() - traj.t0(),
            energy: traj.control_energy(),
            objective: traj.objective(beta),
            fuel: fuel(traj, coeffs, rule, dt),
        }
    }
}

fn lane_stats<'a>(it: impl Iterator<Item = &'a VehicleFigures>) -> LaneStats {
    let mut s = LaneStats::default();
    for v in it {
        s.count += 1;
        s.mean_travel_time += v.travel_time;
        s.mean_energy += v.energy;
        s.mean_objective += v.objective;
        s.mean_fuel += v.fuel;
    }
    if s.count > 0 {
        let n = s.count as f64;
        s.mean_travel_time /= n;
        s.mean_energy /= n;
        s.mean_objective /= n;
        s.mean_fuel /= n;
    }
    s
}

/// Mean travel time, energy, objective and fuel per lane and overall.
pub fn summarize(vehicles: &[VehicleFigures]) -> Result<RunMetrics> {
    if vehicles.is_empty() {
        return Err(Error::InvalidParameter("no vehicles to summarize".into()));
    }
    Ok(RunMetrics {
        main: lane_stats(vehicles.iter().filter(|v| v.lane == Lane::Main)),
        merging: lane_stats(vehicles.iter().filter(|v| v.lane == Lane::Merging)),
        overall: lane_stats(vehicles.iter()),
    })
}

impl RunMetrics {
    /// `key=value` lines, one block per split.
    pub fn to_text(&self, label: &str) -> String {
        let mut out = String::new();
        for (name, s) in [
            ("overall", &self.overall),
            ("main", &self.main),
            ("merging", &self.merging),
        ] {
            out.push_str(&format!("{label}.{name}.count={}\n", s.count));
            out.push_str(&format!("{label}.{name}.mean_travel_time={:.6}\n", s.mean_travel_time));
            out.push_str(&format!("{label}.{name}.mean_energy={:.6}\n", s.mean_energy));
            out.push_str(&format!("{label}.{name}.mean_objective={:.6}\n", s.mean_objective));
            out.push_str(&format!("{label}.{name}.mean_fuel={:.6}\n", s.mean_fuel));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PolySegment, Segment};

    #[test]
    fn objective_of_cruise() {
        let t = Trajectory::constant_speed(0.0, 20.0, 20.0).unwrap();
        assert_eq!(objective(&t, 0.0), 0.0);
        assert!((objective(&t, 2.667) - 53.34).abs() < 1e-12);
    }

    #[test]
    fn standstill_burns_idle_rate() {
        let t = Trajectory::new(
            vec![Segment::Poly(PolySegment::from_local(0.0, 10.0, 0.0, 0.0, 0.0, 0.0))],
            None,
        )
        .unwrap();
        let c = FuelCoeffs::default();
        let f = fuel(&t, &c, BrakingRule::ZeroAll, 0.01);
        assert!((f - c.w[0] * 10.0).abs() < 1e-9);
    }

    #[test]
    fn braking_everywhere_is_free_under_default_rule() {
        let t = Trajectory::new(
            vec![Segment::Poly(PolySegment::from_local(0.0, 5.0, 0.0, -1.0, 20.0, 0.0))],
            None,
        )
        .unwrap();
        let c = FuelCoeffs::default();
        assert_eq!(fuel(&t, &c, BrakingRule::ZeroAll, 0.01), 0.0);
        assert!(fuel(&t, &c, BrakingRule::ZeroAccelOnly, 0.01) > 0.0);
    }

    #[test]
    fn overall_is_count_weighted() {
        let mk = |lane, x: f64| VehicleFigures {
            lane,
            travel_time: x,
            energy: x,
            objective: x,
            fuel: x,
        };
        let v = vec![mk(Lane::Main, 1.0), mk(Lane::Main, 3.0), mk(Lane::Merging, 8.0)];
        let m = summarize(&v).unwrap();
        let w = (m.main.mean_objective * 2.0 + m.merging.mean_objective) / 3.0;
        assert!((m.overall.mean_objective - w).abs() < 1e-15);
        assert!(summarize(&[]).is_err());
    }
}
