//! Synthetic benchmark families.
//!
//! Every generator is a pure function of its arguments and builds rows that
//! sum to one identically in the parameters. Every entry stays positive on
//! the whole parameter box, so any valuation in the box is graph preserving.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{rational, AffineExpr, Choice, Interval, ModelKind, ParamId, Parameter, Pmdp, Rational, StateId};

struct Builder {
    names: Vec<String>,
    choices: Vec<Vec<Choice>>,
    targets: BTreeSet<StateId>,
}

impl Builder {
    fn new(names: Vec<String>) -> Self {
        let n = names.len();
        Self {
            names,
            choices: vec![Vec::new(); n],
            targets: BTreeSet::new(),
        }
    }

    fn add(&mut self, s: usize, action: &str, transitions: Vec<(usize, AffineExpr)>, cost: Option<Rational>) {
        self.choices[s].push(Choice {
            action: action.to_string(),
            transitions: transitions.into_iter().map(|(t, f)| (StateId(t), f)).collect(),
            cost,
        });
    }

    fn absorbing(&mut self, s: usize, action: &str) {
        self.add(s, action, vec![(s, AffineExpr::constant(Rational::from_integer(1.into())))], None);
    }

    /// `bounds: None` leaves the default `[eps, 1 - eps]` box.
    fn finish(self, kind: ModelKind, initial: usize, num_params: usize, bounds: Option<Interval>) -> Pmdp {
        let params = (0..num_params)
            .map(|i| Parameter {
                name: format!("v{i}"),
                bounds: bounds.clone(),
            })
            .collect();
        Pmdp::new(kind, self.names, StateId(initial), params, self.choices, self.targets)
            .expect("generators build valid models")
    }
}

fn param(i: usize) -> AffineExpr {
    AffineExpr::param(ParamId(i))
}

fn one_minus(i: usize) -> AffineExpr {
    &AffineExpr::constant(rational(1, 1)) - &param(i)
}

fn constant(n: i64, d: i64) -> AffineExpr {
    AffineExpr::constant(rational(n, d))
}

/// Chain of `n` steps with parameters `v0..v{k-1}` used round-robin: step
/// `i` succeeds with probability `v_{i mod k}` and otherwise falls into
/// `sink`. Reaching `goal` has probability `∏_i v_{i mod k}`.
pub fn chain(n: usize, k: usize) -> Pmdp {
    assert!(n >= 1 && k >= 1, "chain needs a step and a parameter");
    let k = k.min(n);
    let mut names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    names.push("goal".into());
    names.push("sink".into());
    let (goal, sink) = (n, n + 1);
    let mut b = Builder::new(names);
    for i in 0..n {
        let next = if i + 1 == n { goal } else { i + 1 };
        b.add(i, "tau", vec![(next, param(i % k)), (sink, one_minus(i % k))], None);
    }
    b.absorbing(goal, "tau");
    b.absorbing(sink, "tau");
    b.targets.insert(StateId(goal));
    b.finish(ModelKind::Pmc, 0, k, None)
}

fn neighbours(size: usize, c: usize) -> Vec<(usize, &'static str)> {
    let (r, col) = (c / size, c % size);
    let mut out = Vec::with_capacity(4);
    if r > 0 {
        out.push((c - size, "up"));
    }
    if r + 1 < size {
        out.push((c + size, "down"));
    }
    if col > 0 {
        out.push((c - 1, "left"));
    }
    if col + 1 < size {
        out.push((c + 1, "right"));
    }
    out
}

/// Spreads `cells` over `params` parameters, each parameter used about
/// equally often.
fn assign(cells: usize, params: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..cells).map(|i| i % params).collect();
    ids.shuffle(rng);
    ids
}

/// `size × size` grid world: start top left, goal bottom right, about a
/// tenth of the other cells are absorbing traps. Each move succeeds with
/// `9/10·v`, stays put with `9/10·(1 − v)` and slips to a fixed other
/// neighbour with `1/10`, where `v ∈ [1/100, 99/100]` is the cell's
/// parameter.
pub fn grid(size: usize, params: usize, seed: u64) -> Pmdp {
    assert!(size >= 1 && params >= 1, "grid needs a cell and a parameter");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = size * size;
    let goal = cells - 1;
    let names = (0..cells).map(|c| format!("g{}_{}", c / size, c % size)).collect();
    let mut b = Builder::new(names);
    let ids = assign(cells, params, &mut rng);
    for c in 0..cells {
        let trap = c != 0 && c != goal && rng.random_bool(0.1);
        if c == goal || trap {
            b.absorbing(c, "stay");
            continue;
        }
        let nb = neighbours(size, c);
        for (i, &(t, dir)) in nb.iter().enumerate() {
            let slip = nb[(i + 1 + rng.random_range(0..nb.len() - 1)) % nb.len()].0;
            let v = ids[c];
            b.add(
                c,
                dir,
                vec![
                    (t, &param(v) * &rational(9, 10)),
                    (c, &one_minus(v) * &rational(9, 10)),
                    (slip, constant(1, 10)),
                ],
                Some(rational(1, 1)),
            );
        }
    }
    b.targets.insert(StateId(goal));
    b.finish(ModelKind::Pmdp, 0, params, Some(Interval::new(rational(1, 100), rational(99, 100))))
}

/// `size × size` maze on a random spanning tree rooted at the goal (bottom
/// right). In each cell action `a` moves towards the goal with probability
/// `v` and to a fixed other neighbour otherwise. Unless `pmc`, about a
/// quarter of the cells also offer action `b`, which swaps the two outcomes.
/// Every step costs one, and the goal is reached almost surely under every
/// strategy.
pub fn maze(size: usize, params: usize, seed: u64, pmc: bool) -> Pmdp {
    assert!(size >= 2 && params >= 1, "maze needs two cells and a parameter");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = size * size;
    let goal = cells - 1;
    // randomised breadth-first search from the goal
    let mut parent = vec![usize::MAX; cells];
    parent[goal] = goal;
    let mut queue = VecDeque::from([goal]);
    while let Some(c) = queue.pop_front() {
        let mut nb = neighbours(size, c);
        nb.shuffle(&mut rng);
        for (t, _) in nb {
            if parent[t] == usize::MAX {
                parent[t] = c;
                queue.push_back(t);
            }
        }
    }
    let names = (0..cells).map(|c| format!("m{}_{}", c / size, c % size)).collect();
    let mut b = Builder::new(names);
    let ids = assign(cells - 1, params, &mut rng);
    let one = Some(rational(1, 1));
    for c in 0..cells {
        if c == goal {
            b.absorbing(c, "a");
            continue;
        }
        let others: Vec<usize> = neighbours(size, c).into_iter().map(|e| e.0).filter(|&t| t != parent[c]).collect();
        let other = others[rng.random_range(0..others.len())];
        let v = ids[c];
        b.add(c, "a", vec![(parent[c], param(v)), (other, one_minus(v))], one.clone());
        if !pmc && rng.random_bool(0.25) {
            b.add(c, "b", vec![(parent[c], one_minus(v)), (other, param(v))], one.clone());
        }
    }
    b.targets.insert(StateId(goal));
    let kind = if pmc { ModelKind::Pmc } else { ModelKind::Pmdp };
    if pmc {
        for row in &mut b.choices {
            for ch in row {
                ch.action = "tau".into();
            }
        }
    }
    b.finish(kind, 0, params, None)
}

/// Small random pMDP for property tests: `states` states (two of them the
/// absorbing `goal` and `sink`), up to `actions` actions per state and
/// `params` parameters, each in `[1/10, 9/10]`. Rows mix one-parameter splits `c·v / c·(1 − v) /
/// 1 − c`, two-parameter averages and constant rows.
pub fn random(states: usize, actions: usize, params: usize, seed: u64) -> Pmdp {
    assert!(states >= 3 && actions >= 1 && params >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = (0..states)
        .map(|s| match s {
            _ if s == states - 2 => "goal".to_string(),
            _ if s == states - 1 => "sink".to_string(),
            _ => format!("r{s}"),
        })
        .collect();
    let mut b = Builder::new(names);
    let (goal, sink) = (states - 2, states - 1);
    let pick = |rng: &mut ChaCha8Rng, avoid: &[usize]| loop {
        let t = rng.random_range(0..states);
        if !avoid.contains(&t) {
            return t;
        }
    };
    for s in 0..goal {
        let count = rng.random_range(1..=actions);
        for a in 0..count {
            let t1 = pick(&mut rng, &[]);
            let t2 = pick(&mut rng, &[t1]);
            let v = rng.random_range(0..params);
            let row = match rng.random_range(0..4) {
                0 => vec![(t1, param(v)), (t2, one_minus(v))],
                1 => {
                    let t3 = pick(&mut rng, &[t1, t2]);
                    let c = rational(rng.random_range(1..4), 4);
                    let rest = &constant(1, 1) - &AffineExpr::constant(c.clone());
                    vec![(t1, &param(v) * &c), (t2, &one_minus(v) * &c), (t3, rest)]
                }
                2 if params > 1 => {
                    let w = (v + 1 + rng.random_range(0..params - 1)) % params;
                    let avg = &(&param(v) + &param(w)) * &rational(1, 2);
                    vec![(t1, avg.clone()), (t2, &constant(1, 1) - &avg)]
                }
                _ => {
                    let c = rng.random_range(1..4);
                    vec![(t1, constant(c, 4)), (t2, constant(4 - c, 4))]
                }
            };
            b.add(s, &format!("a{a}"), row, Some(rational(rng.random_range(1..4), 1)));
        }
    }
    b.absorbing(goal, "a0");
    b.absorbing(sink, "a0");
    b.targets.insert(StateId(goal));
    b.finish(ModelKind::Pmdp, 0, params, Some(Interval::new(rational(1, 10), rational(9, 10))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SupportGraph;
    use crate::mc::{evaluate, InstantiatedMdp};
    use crate::parser::{parse_model, parse_spec, write_model};

    fn round_trips(m: &Pmdp) {
        assert_eq!(&parse_model(&write_model(m)).unwrap(), m);
    }

    #[test]
    fn chain_value_is_a_product() {
        let m = chain(5, 2);
        assert_eq!(m.num_states(), 7);
        round_trips(&m);
        let mut inst = InstantiatedMdp::of_pmdp(&m);
        inst.set_valuation(&[0.9, 0.5]);
        let r = evaluate(inst.matrix(), &parse_spec("P<=1").unwrap(), 1e-12, true).unwrap();
        let expect = 0.9 * 0.5 * 0.9 * 0.5 * 0.9;
        assert!((r.value(0) - expect).abs() < 1e-14);
    }

    #[test]
    fn grid_is_valid_and_deterministic() {
        let m = grid(4, 8, 0);
        assert_eq!(m.num_states(), 16);
        assert_eq!(m.num_params(), 8);
        round_trips(&m);
        assert_eq!(m, grid(4, 8, 0));
        assert_ne!(m, grid(4, 8, 1));
    }

    #[test]
    fn maze_has_choices_and_reaches_goal() {
        let m = maze(3, 4, 0, false);
        assert!(m.states().any(|s| m.choices(s).len() == 2));
        round_trips(&m);
        let targets: Vec<bool> = m.states().map(|s| m.is_target(s)).collect();
        let g = SupportGraph::of_pmdp(&m);
        assert!(g.prob1_min(&targets).iter().all(|&x| x));
        let p = maze(4, 3, 2, true);
        assert!(p.states().all(|s| p.choices(s).len() == 1));
        round_trips(&p);
    }

    #[test]
    fn large_maze_dimensions() {
        let m = maze(32, 512, 0, true);
        assert_eq!(m.num_states(), 1024);
        assert_eq!(m.num_params(), 512);
    }

    #[test]
    fn random_models_are_valid() {
        for seed in 0..50 {
            let m = random(12, 3, 4, seed);
            round_trips(&m);
            assert!(m.states().all(|s| (1..=3).contains(&m.choices(s).len())));
        }
    }
}
