mod common;

use cavmerge::oracle::{sampled_objective, solve_collocation, CollocationProblem};
use cavmerge::unconstrained::solve_case_a;
use common::*;

fn j(pb: CollocationProblem<'_>) -> f64 {
    solve_collocation(&pb).unwrap().j
}

#[test]
fn refinement_shrinks_the_discretization_error() {
    let (leader, plan) = case_a_constrained();
    for (label, constrained) in [("free", false), ("same-lane", true)] {
        let (t0, v0) = if constrained { (2.7, 27.0) } else { (0.0, 20.0) };
        let at = |n| {
            let mut pb = CollocationProblem::free(n, t0, v0, L, BETA, H);
            if constrained {
                pb.leader = Some(&leader);
            }
            j(pb)
        };
        let (j200, j400, j800) = (at(200), at(400), at(800));
        assert!(
            (j400 - j200).abs() > (j800 - j400).abs(),
            "{label}: {j200} {j400} {j800}"
        );
        if constrained {
            assert!(j200 >= plan.j_star * (1.0 - 0.005), "{j200} vs {}", plan.j_star);
        }
    }
}

#[test]
fn grid_objectives_match_the_analytic_cost() {
    let s = solve_case_a(0.0, 20.0, L, BETA).unwrap();
    let sampled = sampled_objective(&s.trajectory().unwrap(), 200, BETA).unwrap();
    let col = j(CollocationProblem::free(200, 0.0, 20.0, L, BETA, H));
    let exact = s.objective(BETA);
    assert!((sampled - exact).abs() < 1e-3 * exact, "{sampled} vs {exact}");
    assert!((col - exact).abs() < 5e-3 * exact, "{col} vs {exact}");
}
