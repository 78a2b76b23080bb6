//! Compressed storage for instantiated MDPs, updated in place per valuation.

use std::sync::Arc;

use crate::model::{AffineF64, ConcreteMdp, Pmdp};

/// An MDP in compressed row form: states own a contiguous range of choices,
/// choices own a contiguous range of entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMdp {
    pub initial: usize,
    pub targets: Vec<bool>,
    state_start: Vec<usize>,
    choice_start: Vec<usize>,
    succ: Vec<usize>,
    prob: Vec<f64>,
    cost: Vec<f64>,
}

impl SparseMdp {
    pub fn num_states(&self) -> usize {
        self.state_start.len() - 1
    }

    pub fn num_choices(&self) -> usize {
        self.choice_start.len() - 1
    }

    /// Global choice indices of state `s`.
    pub fn choices(&self, s: usize) -> std::ops::Range<usize> {
        self.state_start[s]..self.state_start[s + 1]
    }

    pub fn entries(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.choice_start[c]..self.choice_start[c + 1];
        self.succ[r.clone()].iter().copied().zip(self.prob[r].iter().copied())
    }

    pub fn cost(&self, c: usize) -> f64 {
        self.cost[c]
    }

    /// Local index of global choice `c` within its state.
    pub fn local_choice(&self, s: usize, c: usize) -> usize {
        c - self.state_start[s]
    }

    pub fn successors(&self) -> Vec<Vec<Vec<usize>>> {
        (0..self.num_states())
            .map(|s| {
                self.choices(s)
                    .map(|c| self.entries(c).filter(|(_, p)| *p > 0.0).map(|(t, _)| t).collect())
                    .collect()
            })
            .collect()
    }

    pub fn to_concrete(&self) -> ConcreteMdp<f64> {
        ConcreteMdp {
            initial: self.initial,
            targets: self.targets.clone(),
            choices: (0..self.num_states())
                .map(|s| {
                    self.choices(s)
                        .map(|c| crate::model::ConcreteChoice {
                            transitions: self.entries(c).collect(),
                            cost: self.cost[c],
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

impl From<&ConcreteMdp<f64>> for SparseMdp {
    fn from(mdp: &ConcreteMdp<f64>) -> Self {
        let mut state_start = vec![0];
        let mut choice_start = vec![0];
        let mut succ = Vec::new();
        let mut prob = Vec::new();
        let mut cost = Vec::new();
        for row in &mdp.choices {
            for c in row {
                for (t, p) in &c.transitions {
                    succ.push(*t);
                    prob.push(*p);
                }
                choice_start.push(succ.len());
                cost.push(c.cost);
            }
            state_start.push(cost.len());
        }
        Self {
            initial: mdp.initial,
            targets: mdp.targets.clone(),
            state_start,
            choice_start,
            succ,
            prob,
            cost,
        }
    }
}

/// The parameter-dependent part of a pMDP in float form: which entries of the
/// compressed matrix depend on parameters, and how.
#[derive(Debug)]
pub struct ParametricMdp {
    base: SparseMdp,
    dependent: Vec<(usize, AffineF64)>,
    num_params: usize,
}

impl ParametricMdp {
    pub fn new(m: &Pmdp) -> Self {
        let mut state_start = vec![0];
        let mut choice_start = vec![0];
        let mut succ = Vec::new();
        let mut prob = Vec::new();
        let mut cost = Vec::new();
        let mut dependent = Vec::new();
        for s in m.states() {
            for c in m.choices(s) {
                for (t, f) in &c.transitions {
                    let form = f.to_f64_form();
                    if !form.terms.is_empty() {
                        dependent.push((succ.len(), form.clone()));
                    }
                    succ.push(t.0);
                    prob.push(form.constant);
                }
                choice_start.push(succ.len());
                cost.push(crate::model::to_f64(&c.cost_or_zero()));
            }
            state_start.push(cost.len());
        }
        Self {
            base: SparseMdp {
                initial: m.initial().0,
                targets: m.states().map(|s| m.is_target(s)).collect(),
                state_start,
                choice_start,
                succ,
                prob,
                cost,
            },
            dependent,
            num_params: m.num_params(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn num_dependent_entries(&self) -> usize {
        self.dependent.len()
    }

    /// A fresh matrix holding the constant entries.
    pub fn matrix(&self) -> SparseMdp {
        self.base.clone()
    }

    /// Rewrites only the parameter-dependent entries of `into`.
    pub fn write_valuation(&self, values: &[f64], into: &mut SparseMdp) {
        assert_eq!(values.len(), self.num_params, "valuation has wrong dimension");
        for (slot, f) in &self.dependent {
            into.prob[*slot] = f.evaluate(values);
        }
    }
}

/// A matrix buffer bound to one pMDP. One instance per thread.
#[derive(Clone, Debug)]
pub struct InstantiatedMdp {
    template: Arc<ParametricMdp>,
    matrix: SparseMdp,
}

impl InstantiatedMdp {
    pub fn new(template: Arc<ParametricMdp>) -> Self {
        let matrix = template.matrix();
        Self { template, matrix }
    }

    pub fn of_pmdp(m: &Pmdp) -> Self {
        Self::new(Arc::new(ParametricMdp::new(m)))
    }

    pub fn set_valuation(&mut self, values: &[f64]) {
        self.template.write_valuation(values, &mut self.matrix);
    }

    pub fn matrix(&self) -> &SparseMdp {
        &self.matrix
    }

    pub fn template(&self) -> &Arc<ParametricMdp> {
        &self.template
    }
}
