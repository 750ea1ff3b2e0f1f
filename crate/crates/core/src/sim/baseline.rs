//! Constant-time-headway reference traffic (not a human-driver model).
//!
//! Each vehicle drives at one constant speed chosen so that it reaches the
//! merging point no earlier than at its free-flow time `t0 + L/v0` and at
//! least one headway `φ + δ/v` after its FIFO predecessor. It only serves as
//! a comparison row for the metrics harness.

use crate::error::Result;
use crate::model::{CavRecord, ScenarioParams, Trajectory};

/// Constant-speed trajectories for `records` taken in FIFO order.
pub fn time_headway_baseline(records: &[CavRecord], p: &ScenarioParams) -> Result<Vec<Trajectory>> {
    let mut out: Vec<Trajectory> = Vec::with_capacity(records.len());
    let mut prev_tm: Option<f64> = None;
    for r in records {
        let free = r.t0 + p.length / r.v0;
        let t_m = match prev_tm {
            // t_m - t_prev ≥ φ + δ (t_m - t0) / L, solved for t_m.
            Some(tp) => {
                let need = (tp + p.phi - p.delta * r.t0 / p.length) / (1.0 - p.delta / p.length);
                free.max(need)
            }
            None => free,
        };
        let v = p.length / (t_m - r.t0);
        out.push(Trajectory::constant_speed(r.t0, v, t_m)?);
        prev_tm = Some(t_m);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Lane;

    #[test]
    fn crossings_are_separated_by_a_headway() {
        let p = ScenarioParams::merging_experiment();
        let mk = |id, t0, v0| CavRecord {
            id,
            lane: Lane::Main,
            t0,
            v0,
            fifo_index: 0,
            trajectory: None,
        };
        let recs = vec![mk(0, 0.0, 20.0), mk(1, 0.5, 25.0), mk(2, 30.0, 20.0)];
        let tr = time_headway_baseline(&recs, &p).unwrap();
        assert_eq!(tr[0].t_m(), 20.0);
        assert!((tr[1].t_m() - 21.8).abs() < 1e-12);
        assert_eq!(tr[2].t_m(), 50.0);
    }
}
