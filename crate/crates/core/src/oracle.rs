//! Direct-collocation validator for small planning instances.
//!
//! For a fixed travel time `T` the trapezoidal transcription of the double
//! integrator, with headway rows against a fixed predecessor plan, is a convex
//! QP in the node states and controls. The outer problem over `T` is scalar
//! and is solved by a grid followed by golden-section refinement.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::error::{Error, Result};
use crate::model::Trajectory;
use crate::roots::golden_section;
use crate::safety::Headway;

pub const MIN_INTERVALS: usize = 50;
const T_GRID: usize = 40;
const T_TOL: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct CollocationProblem<'a> {
    /// Number of intervals `N`.
    pub intervals: usize,
    pub t0: f64,
    pub v0: f64,
    pub length: f64,
    pub beta: f64,
    pub headway: Headway,
    /// Same-lane predecessor; a slack row is added at every node.
    pub leader: Option<&'a Trajectory>,
    /// Other-lane predecessor; the headway is tight at the merging point.
    pub merge_with: Option<&'a Trajectory>,
    /// Search range for the travel time; defaults to `[0.2, 3] L/v0`.
    pub travel_range: Option<(f64, f64)>,
}

impl<'a> CollocationProblem<'a> {
    pub fn free(intervals: usize, t0: f64, v0: f64, length: f64, beta: f64, headway: Headway) -> Self {
        CollocationProblem {
            intervals,
            t0,
            v0,
            length,
            beta,
            headway,
            leader: None,
            merge_with: None,
            travel_range: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.intervals < MIN_INTERVALS {
            return Err(Error::InvalidParameter(format!(
                "collocation needs at least {MIN_INTERVALS} intervals, got {}",
                self.intervals
            )));
        }
        if !(self.v0 > 0.0 && self.length > 0.0 && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "v0={}, L={}, beta={}",
                self.v0, self.length, self.beta
            )));
        }
        Ok(())
    }

    fn range(&self) -> (f64, f64) {
        let free = self.length / self.v0;
        self.travel_range.unwrap_or((0.2 * free, 3.0 * free))
    }
}

/// Discrete optimum: node times and states with the objective
/// `β T + Σ trapezoid ½u²`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSolution {
    pub j: f64,
    pub t_m: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Default)]
struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Triplets {
    fn put(&mut self, r: usize, c: usize, x: f64) {
        self.rows.push(r);
        self.cols.push(c);
        self.vals.push(x);
    }
}

/// Trapezoid weights times the step.
fn weights(n: usize, h: f64) -> Vec<f64> {
    (0..=n).map(|k| if k == 0 || k == n { 0.5 * h } else { h }).collect()
}

/// Solves the QP for a fixed travel time. `Ok(None)` means infeasible.
pub fn solve_fixed_time(pb: &CollocationProblem<'_>, travel: f64) -> Result<Option<CollocationSolution>> {
    pb.validate()?;
    let n = pb.intervals;
    let m = n + 1;
    let h = travel / n as f64;
    // Variable blocks: positions, speeds, controls.
    let (xo, vo, uo) = (0, m, 2 * m);
    let (ix, iv, iu) = (|k: usize| xo + k, |k: usize| vo + k, |k: usize| uo + k);
    let nvar = 3 * m;
    let times: Vec<f64> = (0..=n).map(|k| pb.t0 + travel * k as f64 / n as f64).collect();
    let w = weights(n, h);

    // ½ zᵀPz with P diagonal on the controls.
    let p_mat = CscMatrix::new_from_triplets(
        nvar,
        nvar,
        (0..m).map(iu).collect(),
        (0..m).map(iu).collect(),
        w.clone(),
    );
    let q = vec![0.0; nvar];

    let mut a = Triplets::default();
    let mut b = Vec::new();
    let mut row = 0;
    for (c, rhs) in [(ix(0), 0.0), (iv(0), pb.v0), (ix(n), pb.length)] {
        a.put(row, c, 1.0);
        b.push(rhs);
        row += 1;
    }
    for k in 0..n {
        for (state, rate) in [(xo, vo), (vo, uo)] {
            a.put(row, state + k + 1, 1.0);
            a.put(row, state + k, -1.0);
            a.put(row, rate + k, -0.5 * h);
            a.put(row, rate + k + 1, -0.5 * h);
            b.push(0.0);
            row += 1;
        }
    }
    if let Some(prev) = pb.merge_with {
        let xp = prev.eval(pb.t0 + travel)?.x;
        a.put(row, iv(n), pb.headway.phi);
        b.push(xp - pb.length - pb.headway.delta);
        row += 1;
    }
    let n_eq = row;
    if let Some(leader) = pb.leader {
        for (k, &t) in times.iter().enumerate() {
            let xp = leader.eval(t)?.x;
            a.put(row, ix(k), 1.0);
            a.put(row, iv(k), pb.headway.phi);
            b.push(xp - pb.headway.delta);
            row += 1;
        }
    }
    let a_mat = CscMatrix::new_from_triplets(row, nvar, a.rows, a.cols, a.vals);
    let mut cones = vec![SupportedConeT::ZeroConeT(n_eq)];
    if row > n_eq {
        cones.push(SupportedConeT::NonnegativeConeT(row - n_eq));
    }
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .build()
        .map_err(|e| Error::NonConvergence(format!("solver settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &b, &cones, settings)
        .map_err(|e| Error::NonConvergence(format!("solver setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {}
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => return Ok(None),
        s => {
            return Err(Error::NonConvergence(format!(
                "T={travel}, N={n}: status {s:?} after {} iterations, primal residual {:e}, dual residual {:e}, u[0..3]={:?}",
                sol.iterations,
                sol.r_prim,
                sol.r_dual,
                &sol.x[iu(0)..iu(0) + 3.min(m)]
            )))
        }
    }
    let z = &sol.x;
    let u = z[iu(0)..].to_vec();
    let energy: f64 = u.iter().zip(&w).map(|(u, w)| 0.5 * w * u * u).sum();
    Ok(Some(CollocationSolution {
        j: pb.beta * travel + energy,
        t_m: pb.t0 + travel,
        t: times,
        x: z[..m].to_vec(),
        v: z[m..2 * m].to_vec(),
        u,
    }))
}

/// Minimizes over the travel time as well.
pub fn solve_collocation(pb: &CollocationProblem<'_>) -> Result<CollocationSolution> {
    pb.validate()?;
    let (lo, hi) = pb.range();
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!("travel range [{lo}, {hi}]")));
    }
    let cost = |t: f64| -> Result<f64> { Ok(solve_fixed_time(pb, t)?.map_or(f64::INFINITY, |s| s.j)) };
    let step = (hi - lo) / T_GRID as f64;
    let mut best = (f64::NAN, f64::INFINITY);
    for k in 0..=T_GRID {
        let t = lo + step * k as f64;
        let j = cost(t)?;
        if j < best.1 {
            best = (t, j);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Infeasible(format!(
            "no feasible travel time in [{lo}, {hi}] on the collocation grid"
        )));
    }
    let lo_ref = (best.0 - step).max(lo);
    let hi_ref = (best.0 + step).min(hi);
    let mut failure = None;
    let (t_ref, _) = golden_section(
        |t| match cost(t) {
            Ok(j) => j,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        lo_ref,
        hi_ref,
        T_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let refined = solve_fixed_time(pb, t_ref)?.filter(|s| s.j <= best.1);
    match refined {
        Some(s) => Ok(s),
        None => Ok(solve_fixed_time(pb, best.0)?.expect("feasible on the grid")),
    }
}

/// Objective of an analytic plan sampled on the collocation nodes, with
/// the same trapezoid weights as the QP.
pub fn sampled_objective(traj: &Trajectory, intervals: usize, beta: f64) -> Result<f64> {
    let travel = traj.t_m() - traj.t0();
    let w = weights(intervals, travel / intervals as f64);
    let mut energy = 0.0;
    for (k, w) in w.iter().enumerate() {
        let u = traj.eval(traj.t0() + travel * k as f64 / intervals as f64)?.u;
        energy += 0.5 * w * u * u;
    }
    Ok(beta * travel + energy)
}
