mod common;

use cavmerge::cli::{write_events, write_trajectories};
use cavmerge::model::{CavRecord, Lane, ScenarioParams};
use cavmerge::sim::{run, run_with_arrivals, SimConfig};
use common::*;

fn arrival(id: usize, lane: Lane, t0: f64, v0: f64) -> CavRecord {
    CavRecord {
        id,
        lane,
        t0,
        v0,
        fifo_index: -1,
        trajectory: None,
    }
}

#[test]
fn lone_cruiser_exports_exact_samples() {
    let p = ScenarioParams {
        beta: 0.0,
        ..ScenarioParams::merging_experiment()
    };
    let res = run_with_arrivals(&SimConfig::new(p, 60.0), vec![arrival(0, Lane::Main, 0.0, 20.0)]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trajectories.csv");
    write_trajectories(&res, H, 1.0, &path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.iter().all(|r| r[4] == "20" && r[5] == "0" && r[6].is_empty()));
    assert_eq!(rows[20][2], "20");
    assert_eq!(rows[20][3], "400");
}

#[test]
fn fast_follower_rides_the_headway() {
    let cfg = SimConfig::new(params(), 60.0);
    let arrivals = vec![arrival(0, Lane::Main, 0.0, 20.0), arrival(1, Lane::Main, 2.7, 27.0)];
    let res = run_with_arrivals(&cfg, arrivals).unwrap();
    assert!(res.min_safety_slack() >= -1e-6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.csv");
    write_events(&res, &path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let at = |event: &str| -> f64 {
        text.lines()
            .find(|l| l.ends_with(&format!(",1,{event}")))
            .unwrap_or_else(|| panic!("no {event} row in\n{text}"))
            .split(',')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((at("t1") - 9.25).abs() < 0.05);
    assert!((at("t2") - 15.76).abs() < 0.05);
    assert!(at("crossing") > at("t2"));
}

#[test]
fn hour_long_run_beats_free_flow() {
    let mut p = ScenarioParams::merging_experiment();
    p.beta = cavmerge::model::alpha_to_beta(0.26, p.u_min, p.u_max).unwrap();
    p.rng_seed = 11;
    let res = run(&SimConfig::new(p.clone(), 3600.0)).unwrap();
    assert!(res.min_safety_slack() >= -1e-4);
    assert!(res.fifo_violations.is_empty());
    let n = res.records.len() as f64;
    let travel: f64 = res
        .records
        .iter()
        .map(|r| r.trajectory.as_ref().unwrap().t_m() - r.t0)
        .sum::<f64>()
        / n;
    let free: f64 = res.records.iter().map(|r| p.length / r.v0).sum::<f64>() / n;
    assert!(travel < free, "mean travel {travel} vs free-flow {free}");
}
