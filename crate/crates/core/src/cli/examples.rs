//! Canned single-vehicle and small-group scenarios with plot-data output.

use std::fs;
use std::path::Path;

use super::export::sample_times;
use super::{CliError, ConfigError};
use crate::constrained::{algorithm1, algorithm2, entry_indicator, pre_arc_coeffs, ConstrainedPlan, T1_EXCLUSION};
use crate::error::Error;
use crate::model::{beta_to_alpha, ScenarioParams, Trajectory};
use crate::safety::{check_window, gap, Headway};
use crate::unconstrained::{solve_case_a, solve_case_b, solve_case_b_matched_speed, CaseBParams, MergeTarget};

pub const EXAMPLES: [&str; 5] = [
    "caseA_sweep_beta",
    "caseA_sweep_v0",
    "caseA_constrained",
    "caseB_sweep",
    "caseB_constrained",
];

const BETA: f64 = 2.667;
const PLOT_DT: f64 = 0.01;

type Summary = Vec<(String, String)>;

fn params() -> ScenarioParams {
    ScenarioParams {
        beta: BETA,
        ..ScenarioParams::merging_experiment()
    }
}

fn headway(p: &ScenarioParams) -> Headway {
    Headway {
        phi: p.phi,
        delta: p.delta,
    }
}

fn case_b_params(p: &ScenarioParams, beta: f64) -> CaseBParams {
    CaseBParams {
        length: p.length,
        beta,
        phi: p.phi,
        delta: p.delta,
    }
}

fn held(t: Trajectory) -> Trajectory {
    t.with_hold_until(Some(f64::INFINITY))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map_or(String::new(), num)
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_summary(dir: &Path, summary: &Summary) -> Result<(), CliError> {
    let text: String = summary.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let path = dir.join("summary.txt");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

/// Runs the named example, writes its plot data and `summary.txt` into
/// `dir`, and returns the summary.
pub fn run_example(name: &str, dir: &Path) -> Result<Summary, CliError> {
    if !EXAMPLES.contains(&name) {
        return Err(CliError::Config(ConfigError {
            line: None,
            message: format!("unknown example `{name}`; expected one of {}", EXAMPLES.join(", ")),
        }));
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let summary = match name {
        "caseA_sweep_beta" => sweep_beta(dir)?,
        "caseA_sweep_v0" => sweep_v0(dir)?,
        "caseA_constrained" => case_a_constrained(dir)?,
        "caseB_sweep" => case_b_sweep(dir)?,
        _ => case_b_constrained(dir)?,
    };
    write_summary(dir, &summary)?;
    Ok(summary)
}

fn case_a_row(t0: f64, v0: f64, p: &ScenarioParams, beta: f64) -> Result<Vec<String>, CliError> {
    let s = solve_case_a(t0, v0, p.length, beta)?;
    Ok(vec![
        num(beta),
        num(beta_to_alpha(beta, p.u_min, p.u_max)),
        num(v0),
        num(s.t_m - t0),
        num(s.terminal_speed()),
        num(s.objective(beta)),
    ])
}

const CASE_A_HEADER: [&str; 6] = ["beta", "alpha", "v0", "travel_time", "terminal_speed", "objective"];

fn sweep_beta(dir: &Path) -> Result<Summary, CliError> {
    let p = params();
    let rows = (0..=100)
        .map(|k| case_a_row(0.0, 20.0, &p, 0.1 * k as f64))
        .collect::<Result<Vec<_>, _>>()?;
    write_table(&dir.join("caseA_beta.csv"), &CASE_A_HEADER, &rows)?;
    let free = solve_case_a(0.0, 20.0, p.length, 0.0)?;
    let base = solve_case_a(0.0, 20.0, p.length, BETA)?;
    Ok(vec![
        ("travel_time_beta0".into(), num(free.t_m)),
        ("travel_time_beta_2.667".into(), num(base.t_m)),
        ("terminal_speed_beta_2.667".into(), num(base.terminal_speed())),
    ])
}

fn sweep_v0(dir: &Path) -> Result<Summary, CliError> {
    let p = params();
    let rows = (0..=40)
        .map(|k| case_a_row(0.0, 10.0 + 0.5 * k as f64, &p, BETA))
        .collect::<Result<Vec<_>, _>>()?;
    write_table(&dir.join("caseA_v0.csv"), &CASE_A_HEADER, &rows)?;
    let base = solve_case_a(0.0, 20.0, p.length, BETA)?;
    Ok(vec![("travel_time_v0_20".into(), num(base.t_m))])
}

fn case_b_sweep(dir: &Path) -> Result<Summary, CliError> {
    let p = params();
    let target = MergeTarget {
        v_prev_terminal: 30.0,
        t_prev_m: 15.0,
    };
    let b_row = |t0: f64, v0: f64, beta: f64| -> Result<Vec<String>, CliError> {
        let s = match solve_case_b(t0, v0, &case_b_params(&p, beta), &target) {
            Ok(s) => Some(s),
            Err(Error::NoFeasibleRoot { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        Ok(vec![
            num(t0),
            num(v0),
            num(beta),
            opt(s.as_ref().map(|s| s.t_m)),
            opt(s.as_ref().map(|s| s.t_m - t0)),
            opt(s.as_ref().map(|s| s.terminal_speed())),
            opt(s.as_ref().map(|s| s.objective(beta))),
        ])
    };
    let header = ["t0", "v0", "beta", "t_m", "travel_time", "terminal_speed", "objective"];
    let t0_rows = (0..=20)
        .map(|k| b_row(0.25 * k as f64, 20.0, BETA))
        .collect::<Result<Vec<_>, _>>()?;
    write_table(&dir.join("caseB_t0.csv"), &header, &t0_rows)?;
    let v0_rows = (0..=40)
        .map(|k| b_row(1.0, 10.0 + 0.5 * k as f64, BETA))
        .collect::<Result<Vec<_>, _>>()?;
    write_table(&dir.join("caseB_v0.csv"), &header, &v0_rows)?;
    let mut betas: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
    betas.push(BETA);
    betas.sort_by(f64::total_cmp);
    let beta_rows = betas
        .iter()
        .map(|&b| b_row(1.0, 20.0, b))
        .collect::<Result<Vec<_>, _>>()?;
    write_table(&dir.join("caseB_beta.csv"), &header, &beta_rows)?;

    let base = solve_case_b(1.0, 20.0, &case_b_params(&p, BETA), &target)?;
    let (v0, matched) = solve_case_b_matched_speed(1.0, &case_b_params(&p, BETA), &target, p.v_max)?;
    Ok(vec![
        ("t_m".into(), num(base.t_m)),
        ("terminal_speed".into(), num(base.terminal_speed())),
        ("matched_v0".into(), num(v0)),
        ("matched_travel_time".into(), num(matched.t_m - 1.0)),
    ])
}

/// Plot data shared by both constrained examples.
fn constrained_outputs(
    dir: &Path,
    plan: &ConstrainedPlan,
    v0: f64,
    leader: &Trajectory,
    h: Headway,
) -> Result<(Trajectory, Summary), CliError> {
    let traj = plan.trajectory()?;
    let t1_hi = plan.j_curve.last().map_or(plan.t_m, |c| c.0);
    let ind_rows: Vec<Vec<String>> = sample_times(plan.t0 + T1_EXCLUSION, t1_hi, PLOT_DT)
        .into_iter()
        .filter_map(|t1| {
            let l = leader.eval(t1).ok()?;
            let pre = pre_arc_coeffs(t1, plan.t0, v0, l, h).ok()?;
            Some(vec![num(t1), num(entry_indicator(&pre, l, h))])
        })
        .collect();
    write_table(&dir.join("entry_indicator.csv"), &["t1", "indicator"], &ind_rows)?;
    let j_rows: Vec<Vec<String>> = plan
        .j_curve
        .iter()
        .map(|&(t1, j)| {
            let inside = plan.infeasible_set.iter().any(|&(a, b)| t1 > a && t1 <= b);
            vec![num(t1), opt(j), u8::from(inside).to_string()]
        })
        .collect();
    write_table(&dir.join("jcurve.csv"), &["t1", "j", "infeasible"], &j_rows)?;
    let mut traj_rows = Vec::new();
    for (id, t) in [(0, leader), (1, &traj)] {
        let end = if id == 0 { traj.t_m().max(t.t_m()) } else { t.t_m() };
        for s in sample_times(t.t0(), end, PLOT_DT) {
            let st = t.eval(s)?;
            traj_rows.push(vec![id.to_string(), num(s), num(st.x), num(st.v), num(st.u)]);
        }
    }
    write_table(
        &dir.join("trajectories.csv"),
        &["cav_id", "t", "x", "v", "u"],
        &traj_rows,
    )?;
    let gap_rows = sample_times(traj.t0(), traj.t_m(), PLOT_DT)
        .into_iter()
        .map(|t| Ok(vec![num(t), num(gap(&traj, leader, t, h)?)]))
        .collect::<Result<Vec<_>, CliError>>()?;
    write_table(&dir.join("gap.csv"), &["t", "slack"], &gap_rows)?;
    let report = check_window(&traj, leader, traj.t0(), traj.t_m(), h)?;
    let summary = vec![
        ("t1".into(), num(plan.t1)),
        ("t2".into(), opt(plan.t2)),
        ("t_m".into(), num(plan.t_m)),
        ("j_star".into(), num(plan.j_star)),
        ("infeasible_lower".into(), opt(plan.infeasible_set.first().map(|i| i.0))),
        ("infeasible_upper".into(), opt(plan.infeasible_set.first().map(|i| i.1))),
        ("min_slack".into(), num(report.min_gap_slack)),
    ];
    Ok((traj, summary))
}

fn unconstrained_gap(dir: &Path, follower: &Trajectory, leader: &Trajectory, h: Headway) -> Result<f64, CliError> {
    let rows = sample_times(follower.t0(), follower.t_m(), PLOT_DT)
        .into_iter()
        .map(|t| Ok(vec![num(t), num(gap(follower, leader, t, h)?)]))
        .collect::<Result<Vec<_>, CliError>>()?;
    write_table(&dir.join("unconstrained_gap.csv"), &["t", "slack"], &rows)?;
    Ok(check_window(follower, leader, follower.t0(), follower.t_m(), h)?.min_gap_slack)
}

fn case_a_constrained(dir: &Path) -> Result<Summary, CliError> {
    let p = params();
    let h = headway(&p);
    let leader = held(solve_case_a(0.0, 20.0, p.length, BETA)?.trajectory()?);
    let free = solve_case_a(2.7, 27.0, p.length, BETA)?.trajectory()?;
    let free_min = unconstrained_gap(dir, &free, &leader, h)?;
    let plan = algorithm1(2.7, 27.0, &leader, &p)?;
    let (_, mut summary) = constrained_outputs(dir, &plan, 27.0, &leader, h)?;
    summary.push(("unconstrained_min_slack".into(), num(free_min)));
    Ok(summary)
}

fn case_b_constrained(dir: &Path) -> Result<Summary, CliError> {
    let p = params();
    let h = headway(&p);
    let cb = case_b_params(&p, BETA);
    let same_lane = held(solve_case_a(0.0, 20.0, p.length, BETA)?.trajectory()?);
    let prev_target = MergeTarget {
        v_prev_terminal: same_lane.terminal_speed(),
        t_prev_m: same_lane.t_m(),
    };
    let prev = held(solve_case_b(0.1, 20.0, &cb, &prev_target)?.trajectory()?);
    let target = MergeTarget {
        v_prev_terminal: prev.terminal_speed(),
        t_prev_m: prev.t_m(),
    };
    let free = solve_case_b(2.55, 28.0, &cb, &target)?.trajectory()?;
    let free_min = unconstrained_gap(dir, &free, &same_lane, h)?;
    let merge_rows = vec![
        vec![
            "prev_vs_first".into(),
            num(prev.t_m()),
            num(gap(&prev, &same_lane, prev.t_m(), h)?),
        ],
        vec![
            "follower_vs_prev".into(),
            num(free.t_m()),
            num(gap(&free, &prev, free.t_m(), h)?),
        ],
    ];
    write_table(
        &dir.join("unconstrained_merge.csv"),
        &["pair", "t_m", "slack"],
        &merge_rows,
    )?;

    let plan = algorithm2(2.55, 28.0, &same_lane, &prev, &p)?;
    let (traj, mut summary) = constrained_outputs(dir, &plan, 28.0, &same_lane, h)?;
    summary.push(("unconstrained_min_slack".into(), num(free_min)));
    summary.push(("merge_slack".into(), num(gap(&traj, &prev, traj.t_m(), h)?)));
    Ok(summary)
}
