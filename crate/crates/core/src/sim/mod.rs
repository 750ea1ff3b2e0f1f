//! Event-driven closed-loop simulation of a two-lane merge.
//!
//! Vehicles are planned once, on arrival, in FIFO order. Crossings of the
//! merging point shift the queue indices; the vehicle that crossed last keeps
//! index 0 until the next crossing. Every planned trajectory is held at its
//! terminal speed past the merging point so later vehicles can reference it.

mod arrivals;
mod baseline;
mod dispatch;

pub use arrivals::{generate_arrivals, SpeedDistribution};
pub use baseline::time_headway_baseline;
pub use dispatch::{plan_cav, resolve_predecessors, PlanKind, PlanOutcome, PredecessorPlans, Predecessors};

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, VecDeque};

use sha2::{Digest, Sha256};

use crate::constrained::ConstrainedPlan;
use crate::error::{Error, Result};
use crate::model::{CavRecord, Lane, ScenarioParams, Segment};
use crate::safety::{check_window, Headway, SafetyReport};

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub params: ScenarioParams,
    /// Arrivals are generated on `[0, horizon)`.
    pub horizon: f64,
    pub speeds: SpeedDistribution,
    /// Fresh speed draws tried before delaying an arrival that starts too
    /// close to its leader.
    pub max_resamples: usize,
    /// Delay applied when resampling does not help (s).
    pub delay_step: f64,
    /// Sampling step of the speed/acceleration bound monitor (s).
    pub monitor_dt: f64,
}

impl SimConfig {
    pub fn new(params: ScenarioParams, horizon: f64) -> Self {
        let speeds = SpeedDistribution::with_margin(params.v_min, params.v_max, 2.0);
        SimConfig {
            params,
            horizon,
            speeds,
            max_resamples: 10,
            delay_step: 0.5,
            monitor_dt: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Arrival,
    /// Constrained arc begins (first contact with the headway boundary).
    ContactStart,
    /// Constrained arc ends.
    ContactEnd,
    Crossing,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrival => "arrival",
            EventKind::ContactStart => "t1",
            EventKind::ContactEnd => "t2",
            EventKind::Crossing => "crossing",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub id: usize,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    SpeedBelowMin,
    SpeedAboveMax,
    AccelBelowMin,
    AccelAboveMax,
}

/// First sampled breach of a speed or acceleration bound for one vehicle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundViolation {
    pub id: usize,
    pub kind: BoundKind,
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FifoViolation {
    pub id: usize,
    pub prev: usize,
    pub t_m: f64,
    pub prev_t_m: f64,
}

#[derive(Clone, Debug)]
pub struct SimResult {
    /// All planned vehicles, indexed by id.
    pub records: Vec<CavRecord>,
    pub kinds: Vec<PlanKind>,
    /// Predecessors each vehicle was planned against, by id.
    pub predecessors: Vec<Predecessors>,
    pub constrained: HashMap<usize, ConstrainedPlan>,
    /// Same-lane pairs over the follower's whole trip.
    pub safety_reports: Vec<SafetyReport>,
    /// Other-lane FIFO pairs, at the follower's merging time.
    pub merge_reports: Vec<SafetyReport>,
    pub bound_violations: Vec<BoundViolation>,
    pub fifo_violations: Vec<FifoViolation>,
    /// Speed redraws caused by arrivals too close to their leader.
    pub resamples: usize,
    /// Arrivals postponed after redraws failed.
    pub delays: usize,
    pub events: Vec<Event>,
    /// SHA-256 over the bit patterns of every planned trajectory.
    pub digest: String,
}

impl SimResult {
    pub fn min_safety_slack(&self) -> f64 {
        self.safety_reports
            .iter()
            .chain(&self.merge_reports)
            .map(|r| r.min_gap_slack)
            .fold(f64::INFINITY, f64::min)
    }
}

struct Pending {
    t0: f64,
    id: usize,
    attempts: usize,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        self.t0.total_cmp(&o.t0).then(self.id.cmp(&o.id))
    }
}

/// FIFO queue including the vehicle that crossed most recently (index 0).
struct Queue {
    ids: VecDeque<usize>,
    has_zero: bool,
}

impl Queue {
    fn first_in_zone(&self) -> Option<usize> {
        self.ids.get(usize::from(self.has_zero)).copied()
    }

    fn index_of(&self, pos: usize) -> i64 {
        pos as i64 + if self.has_zero { 0 } else { 1 }
    }

    /// The first vehicle in the zone crosses: the previous index-0 vehicle
    /// is dropped and every index shifts down by one.
    fn cross(&mut self, records: &mut [CavRecord]) {
        if self.has_zero {
            let gone = self.ids.pop_front().expect("index-0 vehicle");
            records[gone].fifo_index = -1;
        }
        self.has_zero = true;
        for (pos, &i) in self.ids.iter().enumerate() {
            records[i].fifo_index = self.index_of(pos);
        }
    }
}

fn lane_slot(l: Lane) -> usize {
    match l {
        Lane::Main => 0,
        Lane::Merging => 1,
    }
}

/// Runs the coordinator over generated arrivals.
pub fn run(cfg: &SimConfig) -> Result<SimResult> {
    cfg.params.validate()?;
    let arrivals = generate_arrivals(
        cfg.params.arrival_rate_per_lane,
        cfg.horizon,
        cfg.params.rng_seed,
        cfg.speeds,
    );
    run_with_arrivals(cfg, arrivals)
}

/// Runs the coordinator over a given arrival list (ids must be `0..n`).
pub fn run_with_arrivals(cfg: &SimConfig, arrivals: Vec<CavRecord>) -> Result<SimResult> {
    let p = &cfg.params;
    let h = Headway {
        phi: p.phi,
        delta: p.delta,
    };
    let mut resample_rng = arrivals::stream(p.rng_seed, 100);
    let mut pending: BinaryHeap<Reverse<Pending>> = arrivals
        .iter()
        .map(|r| {
            Reverse(Pending {
                t0: r.t0,
                id: r.id,
                attempts: 0,
            })
        })
        .collect();
    let mut pool: Vec<Option<CavRecord>> = arrivals.into_iter().map(Some).collect();
    let mut records: Vec<CavRecord> = Vec::with_capacity(pool.len());
    // Original id -> position in `records`.
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut kinds = Vec::new();
    let mut constrained = HashMap::new();
    let mut events = Vec::new();
    let mut queue = Queue {
        ids: VecDeque::new(),
        has_zero: false,
    };
    let mut last_in_lane: [Option<usize>; 2] = [None, None];
    let mut pairs: Vec<(usize, Predecessors)> = Vec::new();
    let (mut resamples, mut delays) = (0, 0);

    while let Some(Reverse(mut next)) = pending.pop() {
        // Crossings up to this arrival.
        while let Some(front) = queue.first_in_zone() {
            let t_m = records[front].trajectory.as_ref().expect("planned").t_m();
            if t_m > next.t0 {
                break;
            }
            queue.cross(&mut records);
            events.push(Event {
                t: t_m,
                id: records[front].id,
                kind: EventKind::Crossing,
            });
        }

        let mut rec = pool[next.id].take().expect("pending arrival");
        rec.t0 = next.t0;
        let lane = rec.lane;
        let q: Vec<(usize, Lane)> = queue.ids.iter().map(|&i| (i, records[i].lane)).collect();
        let preds = resolve_predecessors(&q, lane, last_in_lane[lane_slot(lane)]);

        // Initial headway to the same-lane vehicle ahead must be positive.
        let ahead = match preds {
            Predecessors::SameLane { leader } => Some(leader),
            Predecessors::CrossLane { same_lane, .. } => same_lane,
            Predecessors::NoPredecessor => None,
        };
        if let Some(a) = ahead {
            let lt = records[a].trajectory.as_ref().expect("planned");
            let xa = lt.eval(rec.t0)?.x;
            let admissible = |v0: f64| xa - p.phi * v0 - p.delta > 0.0 && v0 >= p.v_min && v0 <= p.v_max;
            if !admissible(rec.v0) {
                let mut fixed = false;
                for _ in 0..cfg.max_resamples {
                    resamples += 1;
                    rec.v0 = cfg.speeds.sample(&mut resample_rng);
                    if admissible(rec.v0) {
                        fixed = true;
                        break;
                    }
                }
                if !fixed {
                    delays += 1;
                    next.t0 += cfg.delay_step;
                    next.attempts += 1;
                    pool[next.id] = Some(rec);
                    pending.push(Reverse(next));
                    continue;
                }
            }
        }

        let plans = match preds {
            Predecessors::NoPredecessor => PredecessorPlans::NoPredecessor,
            Predecessors::SameLane { leader } => PredecessorPlans::SameLane {
                leader: &records[leader],
            },
            Predecessors::CrossLane { prev, same_lane } => PredecessorPlans::CrossLane {
                prev: &records[prev],
                same_lane: same_lane.map(|s| &records[s]),
            },
        };
        let outcome = plan_cav(rec.t0, rec.v0, plans, p).map_err(|e| {
            Error::Infeasible(format!(
                "planning vehicle {} failed: {e}; replay: {}",
                rec.id,
                snapshot(&rec, preds, &records, p)
            ))
        })?;

        let pos = records.len();
        slot.insert(rec.id, pos);
        events.push(Event {
            t: rec.t0,
            id: rec.id,
            kind: EventKind::Arrival,
        });
        if let Some(cp) = &outcome.constrained {
            if !cp.terminal_contact {
                events.push(Event {
                    t: cp.t1,
                    id: rec.id,
                    kind: EventKind::ContactStart,
                });
                if let Some(t2) = cp.t2 {
                    events.push(Event {
                        t: t2,
                        id: rec.id,
                        kind: EventKind::ContactEnd,
                    });
                }
            }
        }
        rec.trajectory = Some(outcome.trajectory.with_hold_until(Some(f64::INFINITY)));
        rec.fifo_index = queue.index_of(queue.ids.len());
        kinds.push(outcome.kind);
        if let Some(cp) = outcome.constrained {
            constrained.insert(pos, cp);
        }
        pairs.push((pos, preds));
        records.push(rec);
        queue.ids.push_back(pos);
        last_in_lane[lane_slot(lane)] = Some(pos);
    }

    // Remaining crossings.
    while let Some(front) = queue.first_in_zone() {
        let t_m = records[front].trajectory.as_ref().expect("planned").t_m();
        queue.cross(&mut records);
        events.push(Event {
            t: t_m,
            id: records[front].id,
            kind: EventKind::Crossing,
        });
    }

    // Renumber so that ids follow planning order.
    for (pos, r) in records.iter_mut().enumerate() {
        r.id = pos;
    }
    for e in &mut events {
        e.id = slot[&e.id];
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.id.cmp(&b.id)));

    // Holds: each referenced predecessor keeps its speed until the last
    // follower that referenced it has crossed.
    let mut hold: Vec<Option<f64>> = vec![None; records.len()];
    let mut safety_reports = Vec::new();
    let mut merge_reports = Vec::new();
    for &(i, preds) in &pairs {
        let ti = records[i].trajectory.as_ref().expect("planned");
        let t_m = ti.t_m();
        let mut extend = |j: usize| {
            hold[j] = Some(hold[j].map_or(t_m, |h: f64| h.max(t_m)));
        };
        let ahead = match preds {
            Predecessors::SameLane { leader } => {
                extend(leader);
                Some(leader)
            }
            Predecessors::CrossLane { prev, same_lane } => {
                extend(prev);
                if let Some(s) = same_lane {
                    extend(s);
                }
                let pt = records[prev].trajectory.as_ref().expect("planned");
                merge_reports.push(check_window(ti, pt, t_m, t_m, h)?.for_pair(i, prev));
                same_lane
            }
            Predecessors::NoPredecessor => None,
        };
        if let Some(a) = ahead {
            let lt = records[a].trajectory.as_ref().expect("planned");
            safety_reports.push(check_window(ti, lt, ti.t0(), t_m, h)?.for_pair(i, a));
        }
    }
    for (r, hold) in records.iter_mut().zip(&hold) {
        let t = r.trajectory.take().expect("planned");
        r.trajectory = Some(t.with_hold_until(*hold));
    }

    let bound_violations = monitor_bounds(&records, p, cfg.monitor_dt);
    let fifo_violations = records
        .windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0].trajectory.as_ref()?, w[1].trajectory.as_ref()?);
            (b.t_m() < a.t_m() - 1e-9).then_some(FifoViolation {
                id: w[1].id,
                prev: w[0].id,
                t_m: b.t_m(),
                prev_t_m: a.t_m(),
            })
        })
        .collect();
    let digest = digest(&records);
    let predecessors = pairs.iter().map(|&(_, p)| p).collect();
    Ok(SimResult {
        records,
        kinds,
        predecessors,
        constrained,
        safety_reports,
        merge_reports,
        bound_violations,
        fifo_violations,
        resamples,
        delays,
        events,
        digest,
    })
}

fn snapshot(rec: &CavRecord, preds: Predecessors, records: &[CavRecord], p: &ScenarioParams) -> String {
    let describe = |i: usize| {
        let r = &records[i];
        let t = r.trajectory.as_ref();
        format!(
            "{{lane={}, t0={:?}, v0={:?}, t_m={:?}, v_m={:?}}}",
            r.lane.as_str(),
            r.t0,
            r.v0,
            t.map(|t| t.t_m()),
            t.map(|t| t.terminal_speed())
        )
    };
    let preds = match preds {
        Predecessors::NoPredecessor => "none".to_string(),
        Predecessors::SameLane { leader } => format!("same_lane={}", describe(leader)),
        Predecessors::CrossLane { prev, same_lane } => format!(
            "prev={}, same_lane={}",
            describe(prev),
            same_lane.map_or("none".into(), describe)
        ),
    };
    format!(
        "vehicle {{lane={}, t0={:?}, v0={:?}}}, {preds}, params={p:?}",
        rec.lane.as_str(),
        rec.t0,
        rec.v0
    )
}

fn monitor_bounds(records: &[CavRecord], p: &ScenarioParams, dt: f64) -> Vec<BoundViolation> {
    const EPS: f64 = 1e-9;
    let mut out = Vec::new();
    for r in records {
        let Some(t) = &r.trajectory else { continue };
        let mut seen = [false; 4];
        let n = ((t.t_m() - t.t0()) / dt).ceil().max(1.0) as usize;
        for k in 0..=n {
            let tk = if k == n { t.t_m() } else { t.t0() + dt * k as f64 };
            let s = t.eval(tk).expect("inside domain");
            let checks = [
                (s.v < p.v_min - EPS, BoundKind::SpeedBelowMin, s.v),
                (s.v > p.v_max + EPS, BoundKind::SpeedAboveMax, s.v),
                (s.u < p.u_min - EPS, BoundKind::AccelBelowMin, s.u),
                (s.u > p.u_max + EPS, BoundKind::AccelAboveMax, s.u),
            ];
            for (slot, (hit, kind, value)) in checks.into_iter().enumerate() {
                if hit && !seen[slot] {
                    seen[slot] = true;
                    out.push(BoundViolation {
                        id: r.id,
                        kind,
                        t: tk,
                        value,
                    });
                }
            }
        }
    }
    out
}

fn digest(records: &[CavRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update((r.id as u64).to_le_bytes());
        h.update([lane_slot(r.lane) as u8]);
        h.update(r.t0.to_bits().to_le_bytes());
        h.update(r.v0.to_bits().to_le_bytes());
        let Some(t) = &r.trajectory else { continue };
        for seg in t.segments() {
            let e = seg.as_exp_poly();
            h.update([u8::from(matches!(seg, Segment::Exp(_)))]);
            for x in [e.t_start, e.t_end]
                .iter()
                .chain(e.base.coeffs())
                .chain(e.decay.coeffs())
            {
                h.update(x.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::alpha_to_beta;

    fn short_config(seed: u64) -> SimConfig {
        let mut p = ScenarioParams::merging_experiment();
        p.rng_seed = seed;
        p.beta = alpha_to_beta(0.26, p.u_min, p.u_max).unwrap();
        SimConfig::new(p, 300.0)
    }

    #[test]
    fn short_run_is_safe_and_deterministic() {
        let cfg = short_config(3);
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.digest, b.digest);
        assert!(!a.records.is_empty());
        assert!(a.min_safety_slack() >= -1e-4, "{}", a.min_safety_slack());
    }

    #[test]
    fn every_pair_is_monitored() {
        let r = run(&short_config(5)).unwrap();
        let same = r.safety_reports.len();
        let merge = r.merge_reports.len();
        // Every vehicle but the first has a FIFO predecessor.
        let cross = r.records.windows(2).filter(|w| w[0].lane != w[1].lane).count();
        assert_eq!(merge, cross);
        assert!(same + 1 >= r.records.len() - cross);
    }

    #[test]
    fn indices_end_at_minus_one_or_zero() {
        let r = run(&short_config(7)).unwrap();
        let zeros = r.records.iter().filter(|x| x.fifo_index == 0).count();
        assert_eq!(zeros, 1);
        assert!(r.records.iter().all(|x| x.fifo_index == -1 || x.fifo_index == 0));
    }
}
