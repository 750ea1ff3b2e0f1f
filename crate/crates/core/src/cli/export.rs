//! Run outputs: sampled trajectories, events, metrics and plot data.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::CliError;
use crate::metrics::{summarize, BrakingRule, FuelCoeffs, RunMetrics, VehicleFigures};
use crate::model::{Lane, Trajectory};
use crate::safety::{gap, Headway, TOL_GAP};
use crate::sim::{time_headway_baseline, Predecessors, SimResult};

/// Fuel integration step (s).
pub const FUEL_DT: f64 = 0.01;

/// Sample times `t0, t0 + dt, …` ending exactly at `t_end`.
pub fn sample_times(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let n = ((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    (0..=n)
        .map(|k| if k == n { t_end } else { t0 + dt * k as f64 })
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn row<I, S>(w: &mut csv::Writer<fs::File>, path: &Path, fields: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(fields).map_err(|e| CliError::io(path, e))
}

fn same_lane_leader(p: Predecessors) -> Option<usize> {
    match p {
        Predecessors::SameLane { leader } => Some(leader),
        Predecessors::CrossLane { same_lane, .. } => same_lane,
        Predecessors::NoPredecessor => None,
    }
}

/// `cav_id,lane,t,x,v,u,slack_pred`, rows ordered by vehicle then time.
/// The slack is to the same-lane vehicle ahead and empty when there is none.
pub fn write_trajectories(res: &SimResult, h: Headway, sample_dt: f64, path: &Path) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    row(&mut w, path, ["cav_id", "lane", "t", "x", "v", "u", "slack_pred"])?;
    for (r, preds) in res.records.iter().zip(&res.predecessors) {
        let Some(traj) = &r.trajectory else { continue };
        let leader = same_lane_leader(*preds).and_then(|l| res.records[l].trajectory.as_ref());
        for t in sample_times(traj.t0(), traj.t_m(), sample_dt) {
            let s = traj.eval(t)?;
            let slack = match leader {
                Some(l) => gap(traj, l, t, h)?.to_string(),
                None => String::new(),
            };
            row(
                &mut w,
                path,
                [
                    r.id.to_string(),
                    r.lane.as_str().to_string(),
                    t.to_string(),
                    s.x.to_string(),
                    s.v.to_string(),
                    s.u.to_string(),
                    slack,
                ],
            )?;
        }
    }
    flush(w, path)
}

pub fn write_events(res: &SimResult, path: &Path) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    row(&mut w, path, ["t", "cav_id", "event"])?;
    for e in &res.events {
        row(
            &mut w,
            path,
            [e.t.to_string(), e.id.to_string(), e.kind.as_str().to_string()],
        )?;
    }
    flush(w, path)
}

/// `J(t1)` samples and gap profiles for every vehicle planned with an
/// active headway.
pub fn write_plot_data(res: &SimResult, h: Headway, sample_dt: f64, dir: &Path) -> Result<(), CliError> {
    let mut ids: Vec<usize> = res.constrained.keys().copied().collect();
    ids.sort_unstable();
    let jpath = dir.join("plot_jcurve.csv");
    let mut jw = csv_writer(&jpath)?;
    row(&mut jw, &jpath, ["cav_id", "t1", "j", "infeasible"])?;
    let gpath = dir.join("plot_gap.csv");
    let mut gw = csv_writer(&gpath)?;
    row(&mut gw, &gpath, ["cav_id", "t", "slack"])?;
    for id in ids {
        let plan = &res.constrained[&id];
        for &(t1, j) in &plan.j_curve {
            let inside = plan.infeasible_set.iter().any(|&(a, b)| t1 > a && t1 <= b);
            row(
                &mut jw,
                &jpath,
                [
                    id.to_string(),
                    t1.to_string(),
                    j.map_or(String::new(), |j| j.to_string()),
                    u8::from(inside).to_string(),
                ],
            )?;
        }
        let traj = res.records[id].trajectory.as_ref().expect("planned");
        if let Some(l) = same_lane_leader(res.predecessors[id]).and_then(|l| res.records[l].trajectory.as_ref()) {
            for t in sample_times(traj.t0(), traj.t_m(), sample_dt) {
                row(
                    &mut gw,
                    &gpath,
                    [id.to_string(), t.to_string(), gap(traj, l, t, h)?.to_string()],
                )?;
            }
        }
    }
    flush(jw, &jpath)?;
    flush(gw, &gpath)
}

fn figures(
    lanes_and_plans: impl Iterator<Item = (Lane, Trajectory)>,
    beta: f64,
    coeffs: &FuelCoeffs,
    rule: BrakingRule,
) -> Result<RunMetrics, CliError> {
    let v: Vec<VehicleFigures> = lanes_and_plans
        .map(|(lane, t)| VehicleFigures::from_trajectory(lane, &t, beta, coeffs, rule, FUEL_DT))
        .collect();
    Ok(summarize(&v)?)
}

/// Everything `metrics.txt` reports.
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub metrics: RunMetrics,
    pub baseline: Option<RunMetrics>,
    pub min_safety_slack: f64,
    pub safety_violations: usize,
    pub merge_violations: usize,
}

pub struct ExportOptions<'a> {
    pub seed: u64,
    pub beta: f64,
    pub headway: Headway,
    pub sample_dt: f64,
    pub fuel: &'a FuelCoeffs,
    pub braking: BrakingRule,
    pub baseline: bool,
}

/// Writes all run outputs into `dir` (created if needed).
pub fn export(
    res: &SimResult,
    opts: &ExportOptions<'_>,
    params: &crate::model::ScenarioParams,
    dir: &Path,
) -> Result<RunReport, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_trajectories(res, opts.headway, opts.sample_dt, &dir.join("trajectories.csv"))?;
    write_events(res, &dir.join("events.csv"))?;
    if !res.constrained.is_empty() {
        write_plot_data(res, opts.headway, opts.sample_dt, dir)?;
    }

    let plans = res
        .records
        .iter()
        .map(|r| (r.lane, r.trajectory.clone().expect("planned")));
    let metrics = figures(plans, opts.beta, opts.fuel, opts.braking)?;
    let baseline = if opts.baseline {
        let tr = time_headway_baseline(&res.records, params)?;
        let lanes = res.records.iter().map(|r| r.lane).zip(tr);
        Some(figures(lanes, opts.beta, opts.fuel, opts.braking)?)
    } else {
        None
    };
    let report = RunReport {
        seed: opts.seed,
        metrics,
        baseline,
        min_safety_slack: res.min_safety_slack(),
        safety_violations: res.safety_reports.iter().filter(|r| r.min_gap_slack < -TOL_GAP).count(),
        merge_violations: res.merge_reports.iter().filter(|r| r.min_gap_slack < -TOL_GAP).count(),
    };

    let mut text = String::new();
    text.push_str(&format!("seed={}\n", opts.seed));
    text.push_str(&format!("vehicles={}\n", res.records.len()));
    text.push_str(&format!("constrained_plans={}\n", res.constrained.len()));
    text.push_str(&format!("min_safety_slack={}\n", report.min_safety_slack));
    text.push_str(&format!("safety_violations={}\n", report.safety_violations));
    text.push_str(&format!("merge_violations={}\n", report.merge_violations));
    text.push_str(&format!("bound_violations={}\n", res.bound_violations.len()));
    text.push_str(&format!("fifo_violations={}\n", res.fifo_violations.len()));
    text.push_str(&format!("resamples={}\n", res.resamples));
    text.push_str(&format!("delays={}\n", res.delays));
    text.push_str(&format!("digest={}\n", res.digest));
    text.push_str(&report.metrics.to_text("oc"));
    if let Some(b) = &report.baseline {
        text.push_str(&b.to_text("baseline"));
    }
    let path = dir.join("metrics.txt");
    let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(&path, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_land_on_the_end() {
        let t = sample_times(0.0, 20.0, 1.0);
        assert_eq!(t.len(), 21);
        assert_eq!(*t.last().unwrap(), 20.0);
        let t = sample_times(1.0, 2.25, 0.5);
        assert_eq!(t, vec![1.0, 1.5, 2.0, 2.25]);
        assert_eq!(sample_times(3.0, 3.0, 0.1), vec![3.0]);
    }
}
