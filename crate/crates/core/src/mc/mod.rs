//! Numeric model checking of instantiated MDPs.
//!
//! Two paths share the same storage: Gauss-Seidel value iteration for the
//! fast checks inside the synthesis loop, and policy iteration with direct
//! sparse solves for certifying a candidate.

mod oracle;
mod sparse;

pub use oracle::{brute_force_oracle, OracleError, MAX_ENUMERATED_STRATEGIES};
pub use sparse::{InstantiatedMdp, ParametricMdp, SparseMdp};

use thiserror::Error;

use crate::graph::SupportGraph;
use crate::linalg;
use crate::model::{
    check_well_defined, Direction, Instantiation, ModelError, Pmdp, Rational, SpecKind, Specification,
};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Absolute slack when comparing a value against a threshold.
pub const HOLDS_SLACK: f64 = 1e-6;

/// Gauss-Seidel sweeps before switching to policy iteration. Chains with
/// huge expected costs converge far too slowly for plain iteration.
const SWEEP_BUDGET: usize = 5_000;
const MAX_POLICY_ROUNDS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Optimization {
    Max,
    Min,
}

impl Optimization {
    /// Direction of the adversary a specification has to hold against.
    pub fn adversary(spec: &Specification) -> Self {
        match spec.direction {
            Direction::AtMost => Optimization::Max,
            Direction::AtLeast => Optimization::Min,
        }
    }

    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Optimization::Max => a > b,
            Optimization::Min => a < b,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("goal set is not reached almost surely from reachable state {0}; expected cost is infinite")]
    InfiniteCost(usize),
    #[error("valuation is not well defined: {}", .0.join("; "))]
    IllDefined(Vec<String>),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("linear solve failed: {0}")]
    Numerical(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct McResult {
    pub values: Vec<f64>,
    /// Local choice index per state.
    pub strategy: Vec<usize>,
    /// Largest Bellman residual over the non-fixed states.
    pub residual: f64,
    pub iterations: usize,
}

impl McResult {
    pub fn value(&self, s: usize) -> f64 {
        self.values[s]
    }
}

/// Per state: `Some(v)` if the graph fixes the value, `None` if it must be
/// computed.
fn reach_seed(mdp: &SparseMdp, targets: &[bool], opt: Optimization) -> Vec<Option<f64>> {
    let g = SupportGraph::from_choices(mdp.successors());
    let (zero, one) = match opt {
        Optimization::Max => (g.prob0_max(targets), g.prob1_max(targets)),
        Optimization::Min => (g.prob0_min(targets), g.prob1_min(targets)),
    };
    (0..mdp.num_states())
        .map(|s| {
            if targets[s] || one[s] {
                Some(1.0)
            } else if zero[s] {
                Some(0.0)
            } else {
                None
            }
        })
        .collect()
}

/// Goal states are 0, states outside the region where every strategy reaches
/// the goal almost surely are infinite. Reachable infinite states are an error.
fn cost_seed(mdp: &SparseMdp, goal: &[bool]) -> Result<Vec<Option<f64>>, McError> {
    let g = SupportGraph::from_choices(mdp.successors());
    let sure = g.prob1_min(goal);
    let reachable = g.forward_reachable(mdp.initial);
    if let Some(s) = (0..mdp.num_states()).find(|&s| reachable[s] && !sure[s]) {
        return Err(McError::InfiniteCost(s));
    }
    Ok((0..mdp.num_states())
        .map(|s| {
            if goal[s] {
                Some(0.0)
            } else if !sure[s] {
                Some(f64::INFINITY)
            } else {
                None
            }
        })
        .collect())
}

fn q_value(mdp: &SparseMdp, c: usize, x: &[f64], with_cost: bool) -> f64 {
    let base = if with_cost { mdp.cost(c) } else { 0.0 };
    mdp.entries(c).fold(base, |acc, (t, p)| acc + p * x[t])
}

fn best_choice(mdp: &SparseMdp, s: usize, x: &[f64], opt: Optimization, with_cost: bool) -> (usize, f64) {
    let mut choices = mdp.choices(s);
    let first = choices.next().expect("every state has a choice");
    let mut best = (first, q_value(mdp, first, x, with_cost));
    for c in choices {
        let q = q_value(mdp, c, x, with_cost);
        if opt.better(q, best.1) {
            best = (c, q);
        }
    }
    best
}

fn value_iteration(
    mdp: &SparseMdp,
    seed: &[Option<f64>],
    opt: Optimization,
    tol: f64,
    with_cost: bool,
) -> (McResult, bool) {
    assert!(tol > 0.0, "tolerance must be positive");
    let n = mdp.num_states();
    let free: Vec<usize> = (0..n).filter(|&s| seed[s].is_none()).collect();
    let mut x: Vec<f64> = seed.iter().map(|v| v.unwrap_or(0.0)).collect();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < SWEEP_BUDGET {
        iterations += 1;
        let mut change: f64 = 0.0;
        for &s in &free {
            let (_, v) = best_choice(mdp, s, &x, opt, with_cost);
            let d = (v - x[s]).abs();
            change = change.max(if with_cost { d / x[s].abs().max(1.0) } else { d });
            x[s] = v;
        }
        if change < tol {
            converged = true;
            break;
        }
    }
    let mut strategy = vec![0; n];
    let mut residual: f64 = 0.0;
    for &s in &free {
        let (c, v) = best_choice(mdp, s, &x, opt, with_cost);
        strategy[s] = mdp.local_choice(s, c);
        residual = residual.max((v - x[s]).abs());
    }
    let result = McResult {
        values: x,
        strategy,
        residual,
        iterations,
    };
    (result, converged)
}

fn iterate_or_solve(
    mdp: &SparseMdp,
    seed: &[Option<f64>],
    opt: Optimization,
    tol: f64,
    with_cost: bool,
) -> Result<McResult, McError> {
    match value_iteration(mdp, seed, opt, tol, with_cost) {
        (r, true) => Ok(r),
        _ => policy_iteration(mdp, seed, opt, with_cost),
    }
}

/// Extremal probability of reaching `targets`, by value iteration.
pub fn extremal_reach(mdp: &SparseMdp, targets: &[bool], opt: Optimization, tol: f64) -> McResult {
    let seed = reach_seed(mdp, targets, opt);
    match value_iteration(mdp, &seed, opt, tol, false) {
        (r, true) => r,
        // Reachability chains never reach the fallback in practice, and the
        // sweeps already give a sound lower approximation.
        (r, false) => policy_iteration(mdp, &seed, opt, false).unwrap_or(r),
    }
}

/// Extremal expected total cost until reaching `goal`, by value iteration.
pub fn extremal_cost(mdp: &SparseMdp, goal: &[bool], opt: Optimization, tol: f64) -> Result<McResult, McError> {
    let seed = cost_seed(mdp, goal)?;
    iterate_or_solve(mdp, &seed, opt, tol, true)
}

/// Exact value of the Markov chain induced by `strategy` (global choice
/// indices). Fixed states keep their seed. Free states that cannot reach the
/// targets in the chain get 0 (reachability) or infinity (cost).
fn evaluate_chain(
    mdp: &SparseMdp,
    seed: &[Option<f64>],
    strategy: &[usize],
    with_cost: bool,
) -> Result<Vec<f64>, McError> {
    let n = mdp.num_states();
    let succ: Vec<Vec<Vec<usize>>> = (0..n)
        .map(|s| vec![mdp.entries(strategy[s]).filter(|(_, p)| *p > 0.0).map(|(t, _)| t).collect()])
        .collect();
    let chain = SupportGraph::from_choices(succ);
    let mut values: Vec<f64> = seed.iter().map(|v| v.unwrap_or(0.0)).collect();

    let unknown: Vec<bool> = if with_cost {
        // Goal reached almost surely iff no path to a state that cannot reach it.
        let goal: Vec<bool> = seed.iter().map(|v| *v == Some(0.0)).collect();
        let doomed: Vec<bool> = chain
            .prob0_max(&goal)
            .into_iter()
            .zip(seed)
            .map(|(z, v)| z || *v == Some(f64::INFINITY))
            .collect();
        let escape = chain.prob0_max(&doomed);
        (0..n)
            .map(|s| {
                if seed[s].is_some() {
                    false
                } else if !escape[s] {
                    values[s] = f64::INFINITY;
                    false
                } else {
                    true
                }
            })
            .collect()
    } else {
        let positive: Vec<bool> = seed.iter().map(|v| v.is_some_and(|x| x > 0.0)).collect();
        let zero = chain.prob0_max(&positive);
        (0..n).map(|s| seed[s].is_none() && !zero[s]).collect()
    };

    let index: Vec<Option<usize>> = {
        let mut k = 0;
        unknown
            .iter()
            .map(|&u| {
                u.then(|| {
                    k += 1;
                    k - 1
                })
            })
            .collect()
    };
    let states: Vec<usize> = (0..n).filter(|&s| unknown[s]).collect();
    let mut entries = Vec::new();
    let mut b = vec![0.0; states.len()];
    for (i, &s) in states.iter().enumerate() {
        let c = strategy[s];
        entries.push((i, i, 1.0));
        if with_cost {
            b[i] += mdp.cost(c);
        }
        for (t, p) in mdp.entries(c) {
            match index[t] {
                Some(j) => entries.push((i, j, -p)),
                None => b[i] += p * values[t],
            }
        }
    }
    let x = linalg::lu_solve(states.len(), entries, &b).map_err(McError::Numerical)?;
    for (i, &s) in states.iter().enumerate() {
        values[s] = x[i];
    }
    Ok(values)
}

fn policy_iteration(
    mdp: &SparseMdp,
    seed: &[Option<f64>],
    opt: Optimization,
    with_cost: bool,
) -> Result<McResult, McError> {
    let n = mdp.num_states();
    let (start, _) = value_iteration(mdp, seed, opt, 1e-10, with_cost);
    let mut strategy: Vec<usize> = (0..n).map(|s| mdp.choices(s).start + start.strategy[s]).collect();
    let mut rounds = 0;
    loop {
        rounds += 1;
        let values = evaluate_chain(mdp, seed, &strategy, with_cost)?;
        let mut switched = false;
        let mut residual: f64 = 0.0;
        for s in (0..n).filter(|&s| seed[s].is_none()) {
            let current = values[s];
            let (c, q) = best_choice(mdp, s, &values, opt, with_cost);
            let margin = 1e-12 * current.abs().max(1.0);
            let improves = match opt {
                Optimization::Max => q > current + margin,
                Optimization::Min => q < current - margin,
            };
            if improves && c != strategy[s] {
                strategy[s] = c;
                switched = true;
            }
            if current.is_finite() {
                residual = residual.max((q - current).abs());
            }
        }
        if !switched || rounds >= MAX_POLICY_ROUNDS {
            return Ok(McResult {
                values,
                strategy: (0..n).map(|s| mdp.local_choice(s, strategy[s])).collect(),
                residual,
                iterations: start.iterations + rounds,
            });
        }
    }
}

/// Certified extremal reachability: policy iteration where every strategy is
/// evaluated by a direct sparse solve.
pub fn certify_reach(mdp: &SparseMdp, targets: &[bool], opt: Optimization) -> Result<McResult, McError> {
    let seed = reach_seed(mdp, targets, opt);
    policy_iteration(mdp, &seed, opt, false)
}

/// Certified extremal expected cost.
pub fn certify_cost(mdp: &SparseMdp, goal: &[bool], opt: Optimization) -> Result<McResult, McError> {
    let seed = cost_seed(mdp, goal)?;
    policy_iteration(mdp, &seed, opt, true)
}

/// Evaluates `spec` on an instantiated matrix against the adversary it
/// quantifies over. `exact` selects the certified path.
pub fn evaluate(mdp: &SparseMdp, spec: &Specification, tol: f64, exact: bool) -> Result<McResult, McError> {
    let opt = Optimization::adversary(spec);
    let targets = mdp.targets.clone();
    match (spec.kind, exact) {
        (SpecKind::ReachProbability, false) => Ok(extremal_reach(mdp, &targets, opt, tol)),
        (SpecKind::ReachProbability, true) => certify_reach(mdp, &targets, opt),
        (SpecKind::ExpectedCost, false) => extremal_cost(mdp, &targets, opt, tol),
        (SpecKind::ExpectedCost, true) => certify_cost(mdp, &targets, opt),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub holds: bool,
    pub value: f64,
}

/// Checks `spec` on `m` instantiated at `u`. The valuation must be well
/// defined at `eps_graph`. The verdict uses the certified path.
pub fn check(
    m: &Pmdp,
    u: &Instantiation,
    spec: &Specification,
    eps_graph: &Rational,
) -> Result<CheckOutcome, McError> {
    let verdict = check_well_defined(m, u, eps_graph)?;
    if !verdict.is_well_defined() {
        return Err(McError::IllDefined(verdict.describe(m)));
    }
    let values = u.to_f64_vec(m)?;
    let mut inst = InstantiatedMdp::of_pmdp(m);
    inst.set_valuation(&values);
    let r = evaluate(inst.matrix(), spec, DEFAULT_TOL, true)?;
    let value = r.value(inst.matrix().initial);
    Ok(CheckOutcome {
        holds: spec.holds_for(value, HOLDS_SLACK),
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::SINGLE_PARAM_CHAIN;
    use crate::model::{from_f64, rational, ConcreteChoice, ConcreteMdp};
    use crate::parser::{parse_model, parse_spec};

    fn chain_at(v: f64) -> SparseMdp {
        let m = parse_model(SINGLE_PARAM_CHAIN).unwrap();
        let mut inst = InstantiatedMdp::of_pmdp(&m);
        inst.set_valuation(&[v]);
        inst.matrix().clone()
    }

    fn mdp(rows: Vec<Vec<(Vec<(usize, f64)>, f64)>>, targets: &[usize]) -> SparseMdp {
        let n = rows.len();
        let concrete = ConcreteMdp {
            initial: 0,
            targets: (0..n).map(|s| targets.contains(&s)).collect(),
            choices: rows
                .into_iter()
                .map(|r| {
                    r.into_iter()
                        .map(|(transitions, cost)| ConcreteChoice { transitions, cost })
                        .collect()
                })
                .collect(),
        };
        SparseMdp::from(&concrete)
    }

    #[test]
    fn chain_value_is_product() {
        let a = chain_at(0.5);
        let r = extremal_reach(&a, &a.targets.clone(), Optimization::Max, DEFAULT_TOL);
        assert!((r.value(0) - 0.125).abs() < 1e-9);
        // initial and target states are numbered first: s0 s3 s1 s4 s2
        assert_eq!(r.value(1), 1.0);
        assert_eq!(r.value(3), 0.0);
        let c = certify_reach(&a, &a.targets.clone(), Optimization::Max).unwrap();
        assert!((c.value(0) - 0.125).abs() < 1e-14);
    }

    #[test]
    fn in_place_update_matches_fresh_instantiation() {
        let m = parse_model(SINGLE_PARAM_CHAIN).unwrap();
        let mut inst = InstantiatedMdp::of_pmdp(&m);
        inst.set_valuation(&[0.9]);
        inst.set_valuation(&[0.25]);
        let u = Instantiation::from_f64(&[0.25]);
        let fresh = SparseMdp::from(&m.instantiate(&u).unwrap().to_f64());
        assert_eq!(inst.matrix(), &fresh);
    }

    #[test]
    fn initial_target() {
        let a = mdp(vec![vec![(vec![(0, 1.0)], 0.0)]], &[0]);
        let r = extremal_reach(&a, &[true], Optimization::Min, DEFAULT_TOL);
        assert_eq!(r.value(0), 1.0);
    }

    #[test]
    fn one_step_argmax() {
        let a = mdp(
            vec![
                vec![(vec![(1, 0.3), (2, 0.7)], 0.0), (vec![(1, 0.7), (2, 0.3)], 0.0)],
                vec![(vec![(1, 1.0)], 0.0)],
                vec![(vec![(2, 1.0)], 0.0)],
            ],
            &[1],
        );
        let t = a.targets.clone();
        let r = extremal_reach(&a, &t, Optimization::Max, DEFAULT_TOL);
        assert!((r.value(0) - 0.7).abs() < 1e-12);
        assert_eq!(r.strategy[0], 1);
        let r = extremal_reach(&a, &t, Optimization::Min, DEFAULT_TOL);
        assert!((r.value(0) - 0.3).abs() < 1e-12);
        assert_eq!(r.strategy[0], 0);
    }

    #[test]
    fn cost_examples() {
        // one unit-cost step into the goal
        let a = mdp(vec![vec![(vec![(1, 1.0)], 1.0)], vec![(vec![(1, 1.0)], 0.0)]], &[1]);
        let r = extremal_cost(&a, &a.targets.clone(), Optimization::Max, DEFAULT_TOL).unwrap();
        assert_eq!(r.values, vec![1.0, 0.0]);
        // chain of three unit-cost steps
        let b = mdp(
            vec![
                vec![(vec![(1, 1.0)], 1.0)],
                vec![(vec![(2, 1.0)], 1.0)],
                vec![(vec![(3, 1.0)], 1.0)],
                vec![(vec![(3, 1.0)], 0.0)],
            ],
            &[3],
        );
        let r = certify_cost(&b, &b.targets.clone(), Optimization::Min).unwrap();
        assert!((r.value(0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cost_with_loop_is_geometric() {
        // each attempt costs 2 and succeeds with probability 1/4
        let a = mdp(
            vec![vec![(vec![(0, 0.75), (1, 0.25)], 2.0)], vec![(vec![(1, 1.0)], 0.0)]],
            &[1],
        );
        let t = a.targets.clone();
        let vi = extremal_cost(&a, &t, Optimization::Max, DEFAULT_TOL).unwrap();
        let ex = certify_cost(&a, &t, Optimization::Max).unwrap();
        assert!((vi.value(0) - 8.0).abs() < 1e-6);
        assert!((ex.value(0) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_cost_is_reported() {
        let a = mdp(
            vec![
                vec![(vec![(1, 0.5), (2, 0.5)], 1.0)],
                vec![(vec![(1, 1.0)], 0.0)],
                vec![(vec![(2, 1.0)], 0.0)],
            ],
            &[1],
        );
        assert_eq!(
            extremal_cost(&a, &a.targets.clone(), Optimization::Min, DEFAULT_TOL),
            Err(McError::InfiniteCost(0))
        );
    }

    #[test]
    fn policy_iteration_leaves_tied_self_loop() {
        // "stay" ties with "go" at the fixed point of value iteration
        let a = mdp(
            vec![
                vec![(vec![(0, 1.0)], 0.0), (vec![(1, 0.5), (2, 0.5)], 0.0)],
                vec![(vec![(1, 1.0)], 0.0)],
                vec![(vec![(2, 1.0)], 0.0)],
            ],
            &[1],
        );
        let r = certify_reach(&a, &a.targets.clone(), Optimization::Max).unwrap();
        assert!((r.value(0) - 0.5).abs() < 1e-14);
        assert_eq!(r.strategy[0], 1);
    }

    #[test]
    fn check_examples() {
        let m = parse_model(SINGLE_PARAM_CHAIN).unwrap();
        let eps = rational(1, 100_000);
        let spec = parse_spec("P<=0.1").unwrap();
        let low = check(&m, &Instantiation::from_f64(&[0.1]), &spec, &eps).unwrap();
        assert!(low.holds);
        assert!((low.value - 0.009).abs() < 1e-12);
        let high = check(&m, &Instantiation::from_f64(&[0.5]), &spec, &eps).unwrap();
        assert!(!high.holds);
        assert!((high.value - 0.125).abs() < 1e-12);
        let mut zero = Instantiation::new();
        zero.insert(crate::model::ParamId(0), from_f64(0.0));
        assert!(matches!(check(&m, &zero, &spec, &eps), Err(McError::IllDefined(_))));
    }
}
