use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Uniform};

use crate::model::{CavRecord, Lane};

/// Arrival-speed law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpeedDistribution {
    pub lo: f64,
    pub hi: f64,
}

impl SpeedDistribution {
    /// Uniform on `[v_min + margin, v_max - margin]`.
    pub fn with_margin(v_min: f64, v_max: f64, margin: f64) -> Self {
        let (lo, hi) = (v_min + margin, v_max - margin);
        if lo <= hi {
            SpeedDistribution { lo, hi }
        } else {
            let mid = 0.5 * (v_min + v_max);
            SpeedDistribution { lo: mid, hi: mid }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.hi > self.lo {
            Uniform::new_inclusive(self.lo, self.hi)
                .expect("finite bounds")
                .sample(rng)
        } else {
            self.lo
        }
    }
}

const LANES: [Lane; 2] = [Lane::Main, Lane::Merging];

/// Stream ids for the per-purpose generators derived from one seed.
pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Two independent Poisson arrival streams over `[0, horizon)`, sorted by
/// arrival time, with ids assigned in that order.
pub fn generate_arrivals(rate_per_lane: f64, horizon: f64, seed: u64, speeds: SpeedDistribution) -> Vec<CavRecord> {
    let mut out = Vec::new();
    if !(rate_per_lane > 0.0) || !(horizon > 0.0) {
        return out;
    }
    let gaps = Exp::new(rate_per_lane / 3600.0).expect("positive rate");
    for (k, lane) in LANES.into_iter().enumerate() {
        let mut times = stream(seed, 2 * k as u64);
        let mut v = stream(seed, 2 * k as u64 + 1);
        let mut t = gaps.sample(&mut times);
        while t < horizon {
            out.push(CavRecord {
                id: 0,
                lane,
                t0: t,
                v0: speeds.sample(&mut v),
                fifo_index: 0,
                trajectory: None,
            });
            t += gaps.sample(&mut times);
        }
    }
    out.sort_by(|a, b| a.t0.total_cmp(&b.t0).then(a.lane.cmp(&b.lane)));
    for (i, r) in out.iter_mut().enumerate() {
        r.id = i;
    }
    out
}
