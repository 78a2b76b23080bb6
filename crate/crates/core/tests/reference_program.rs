//! The interior-point solver against a frozen optimum from an independent
//! conic solver, on the hand-written penalty program of the four-step chain.

use std::collections::HashMap;

use pmdp_core::qp::{ConvexConstraint, ConvexProgram, InteriorPoint, SolveStatus};

fn reference() -> HashMap<String, f64> {
    include_str!("data/chain_penalty_program.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let (k, v) = l.split_once(' ').unwrap();
            (k.to_string(), v.trim().parse().unwrap())
        })
        .collect()
}

// variables: v p0 p1 p2 k0 k1 k2
fn program() -> ConvexProgram {
    let inf = f64::INFINITY;
    ConvexProgram {
        lower: vec![1e-5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        upper: vec![1.0 - 1e-5, 0.3, 1.0, 1.0, inf, inf, inf],
        objective: vec![(1, 1.0), (4, 0.05), (5, 0.05), (6, 0.05)],
        constraints: vec![
            ConvexConstraint {
                quad: vec![(0, 0, 1.0), (0, 2, 0.5), (2, 2, 1.0)],
                linear: vec![(0, -1.0), (1, -1.0), (2, -0.6), (4, -1.0)],
                constant: 0.34,
            },
            ConvexConstraint {
                quad: vec![(0, 0, 1.0), (0, 3, -0.5), (3, 3, 1.0)],
                linear: vec![(0, -1.0), (2, -1.0), (3, 0.4), (5, -1.0)],
                constant: 0.34,
            },
            ConvexConstraint {
                quad: vec![(0, 0, 1.0)],
                linear: vec![(3, -1.0), (6, -1.0)],
                constant: 0.25,
            },
        ],
    }
}

#[test]
fn matches_reference_optimum() {
    let r = reference();
    let prog = program();
    let rep = InteriorPoint::default().solve(&prog, None);
    assert_eq!(rep.status, SolveStatus::Optimal);
    assert!(prog.max_violation(&rep.x) <= 1e-7);
    assert!((rep.objective - r["objective"]).abs() < 1e-7);
    for (i, name) in ["p0", "p1", "p2", "k0", "k1", "k2"].iter().enumerate() {
        let got = rep.x[i + 1];
        assert!((got - r[*name]).abs() < 1e-5, "{name}: {got} vs {}", r[*name]);
    }
}

#[test]
fn dropping_the_threshold_never_raises_the_optimum() {
    let mut prog = program();
    let with = InteriorPoint::default().solve(&prog, None).objective;
    prog.upper[1] = 1.0;
    let without = InteriorPoint::default().solve(&prog, None).objective;
    assert!(without <= with + 1e-8);
}

#[test]
fn warm_start_agrees_with_cold_start() {
    let prog = program();
    let mut solver = InteriorPoint::default();
    let cold = solver.solve(&prog, None);
    let mut moved = prog.clone();
    moved.constraints[0].constant += 0.01;
    let warm = solver.solve(&moved, Some(&cold));
    let fresh = InteriorPoint::default().solve(&moved, None);
    assert_eq!(warm.status, SolveStatus::Optimal);
    assert!((warm.objective - fresh.objective).abs() <= 1e-7);
}
