//! Parameter-independent graph preprocessing.
//!
//! For graph-preserving instantiations the support of every transition is
//! fixed, so the states with reachability value 0 or 1 can be computed once on
//! the underlying graph and substituted out of the encoding.

use std::collections::VecDeque;

use thiserror::Error;

use crate::model::{ConcreteMdp, Direction, Pmdp, SpecKind, Specification, StateId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("goal set is not reached almost surely from reachable state {0}; expected cost is infinite")]
    InfeasibleCost(String),
}

/// Support graph: per state, per choice, the successors with nonzero
/// probability.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportGraph {
    succ: Vec<Vec<Vec<usize>>>,
    pred: Vec<Vec<usize>>,
}

impl SupportGraph {
    pub fn from_choices(succ: Vec<Vec<Vec<usize>>>) -> Self {
        let n = succ.len();
        let mut pred = vec![Vec::new(); n];
        for (s, row) in succ.iter().enumerate() {
            for c in row {
                for &t in c {
                    if pred[t].last() != Some(&s) {
                        pred[t].push(s);
                    }
                }
            }
        }
        for p in &mut pred {
            p.sort_unstable();
            p.dedup();
        }
        Self { succ, pred }
    }

    /// Edges whose transition function is not identically zero.
    pub fn of_pmdp(m: &Pmdp) -> Self {
        Self::from_choices(
            m.states()
                .map(|s| {
                    m.choices(s)
                        .iter()
                        .map(|c| {
                            c.transitions
                                .iter()
                                .filter(|(_, f)| !f.is_zero())
                                .map(|(t, _)| t.0)
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Edges with strictly positive probability.
    pub fn of_mdp(mdp: &ConcreteMdp<f64>) -> Self {
        Self::from_choices(
            mdp.choices
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| c.transitions.iter().filter(|(_, p)| *p > 0.0).map(|(t, _)| *t).collect())
                        .collect()
                })
                .collect(),
        )
    }

    pub fn num_states(&self) -> usize {
        self.succ.len()
    }

    pub fn choices(&self, s: usize) -> &[Vec<usize>] {
        &self.succ[s]
    }

    /// States reachable from `from` under some strategy.
    pub fn forward_reachable(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(s) = queue.pop_front() {
            for c in &self.succ[s] {
                for &t in c {
                    if !seen[t] {
                        seen[t] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
        seen
    }

    /// States with a path into `set` whose intermediate states all satisfy
    /// `through`. Members of `set` are included.
    fn backward_reachable(&self, set: &[bool], through: &[bool]) -> Vec<bool> {
        let mut seen = set.to_vec();
        let mut queue: VecDeque<usize> = (0..set.len()).filter(|&s| set[s]).collect();
        while let Some(t) = queue.pop_front() {
            for &s in &self.pred[t] {
                if !seen[s] && through[s] {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
        }
        seen
    }

    /// Maximal reachability probability is 0.
    pub fn prob0_max(&self, targets: &[bool]) -> Vec<bool> {
        let all = vec![true; self.num_states()];
        self.backward_reachable(targets, &all).into_iter().map(|r| !r).collect()
    }

    /// Minimal reachability probability is 0: some strategy avoids the
    /// targets forever.
    pub fn prob0_min(&self, targets: &[bool]) -> Vec<bool> {
        let n = self.num_states();
        let mut forced = targets.to_vec();
        // least fixed point of: every choice has a successor in `forced`
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if !forced[s] && self.succ[s].iter().all(|c| c.iter().any(|&t| forced[t])) {
                    forced[s] = true;
                    changed = true;
                }
            }
        }
        forced.into_iter().map(|f| !f).collect()
    }

    /// Minimal reachability probability is 1: every strategy reaches the
    /// targets almost surely.
    pub fn prob1_min(&self, targets: &[bool]) -> Vec<bool> {
        let avoid = self.prob0_min(targets);
        let non_target: Vec<bool> = targets.iter().map(|t| !t).collect();
        self.backward_reachable(&avoid, &non_target)
            .into_iter()
            .map(|r| !r)
            .collect()
    }

    /// Maximal reachability probability is 1.
    pub fn prob1_max(&self, targets: &[bool]) -> Vec<bool> {
        let n = self.num_states();
        let mut outer = vec![true; n];
        loop {
            let mut inner = targets.to_vec();
            let mut changed = true;
            while changed {
                changed = false;
                for s in 0..n {
                    if inner[s] || !outer[s] {
                        continue;
                    }
                    let ok = self.succ[s]
                        .iter()
                        .any(|c| c.iter().all(|&t| outer[t]) && c.iter().any(|&t| inner[t]));
                    if ok {
                        inner[s] = true;
                        changed = true;
                    }
                }
            }
            if inner == outer {
                return outer;
            }
            outer = inner;
        }
    }
}

/// Result of [`analyze`]: which states have a value fixed by the graph.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphAnalysis {
    pub kind: SpecKind,
    /// Value 0 for the adversary relevant to the specification.
    pub prob0: Vec<bool>,
    /// Value 1 under all strategies.
    pub prob1: Vec<bool>,
    pub reachable: Vec<bool>,
    pub targets: Vec<bool>,
}

impl GraphAnalysis {
    /// Value substituted for `s` in the encoding, if fixed by the graph.
    pub fn fixed_value(&self, s: usize) -> Option<f64> {
        match self.kind {
            SpecKind::ReachProbability if self.prob0[s] => Some(0.0),
            SpecKind::ReachProbability if self.prob1[s] => Some(1.0),
            SpecKind::ExpectedCost if self.targets[s] => Some(0.0),
            _ => None,
        }
    }

    /// Reachable states whose value is not fixed: these get variables.
    pub fn free_states(&self) -> Vec<usize> {
        (0..self.reachable.len())
            .filter(|&s| self.reachable[s] && self.fixed_value(s).is_none())
            .collect()
    }
}

/// Graph preprocessing for `spec`. At-most specifications face a maximizing
/// adversary, at-least specifications a minimizing one.
pub fn analyze(m: &Pmdp, spec: &Specification) -> Result<GraphAnalysis, GraphError> {
    let g = SupportGraph::of_pmdp(m);
    let targets: Vec<bool> = m.states().map(|s| m.is_target(s)).collect();
    let reachable = g.forward_reachable(m.initial().0);
    let prob1 = g.prob1_min(&targets);
    let prob0 = match (spec.kind, spec.direction) {
        (SpecKind::ReachProbability, Direction::AtMost) => g.prob0_max(&targets),
        (SpecKind::ReachProbability, Direction::AtLeast) => g.prob0_min(&targets),
        (SpecKind::ExpectedCost, _) => {
            if let Some(s) = (0..m.num_states()).find(|&s| reachable[s] && !prob1[s]) {
                return Err(GraphError::InfeasibleCost(m.state_name(StateId(s)).to_string()));
            }
            vec![false; m.num_states()]
        }
    };
    Ok(GraphAnalysis {
        kind: spec.kind,
        prob0,
        prob1,
        reachable,
        targets,
    })
}
