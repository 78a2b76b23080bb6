use super::dc::DcProblem;
use super::qcqp::QuadForm;
use crate::qp::{ConvexConstraint, ConvexProgram};

#[derive(Clone, Debug, PartialEq)]
struct Slot {
    /// Index into the constraint's `linear` vector.
    pos: usize,
    var: usize,
    base: f64,
    weight: f64,
}

/// The penalty program at one anchor. Only the linear slots touched by a
/// concave part, the constants and the penalty objective weights depend on
/// the anchor and `τ`; [`ConvexifiedProgram::refresh`] rewrites just those.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexifiedProgram {
    pub program: ConvexProgram,
    pub anchor: Vec<f64>,
    pub tau: f64,
    slots: Vec<Vec<Slot>>,
    constants: Vec<f64>,
    /// Positions of penalty variables in the objective.
    penalty_terms: Vec<usize>,
}

fn tangent_constant(base: f64, slots: &[Slot], anchor: &[f64]) -> f64 {
    base + slots.iter().map(|s| s.weight * anchor[s.var] * anchor[s.var]).sum::<f64>()
}

/// Replaces each concave part `−Σ w_i x_i²` by its tangent at `anchor` and
/// adds the penalty variables with weight `tau` to the objective.
pub fn convexify(dc: &DcProblem, anchor: &[f64], tau: f64) -> ConvexifiedProgram {
    assert_eq!(anchor.len(), dc.num_base_vars, "anchor dimension");
    let mut constraints = Vec::with_capacity(dc.constraints.len());
    let mut slots = Vec::with_capacity(dc.constraints.len());
    let mut constants = Vec::with_capacity(dc.constraints.len());
    for c in &dc.constraints {
        let mut form: QuadForm = c.convex.clone();
        // make sure every concave variable has a linear slot, even a zero one
        for &(v, _) in &c.weights {
            form.add_linear(v, 0.0);
        }
        if let Some(k) = c.penalty {
            form.add_linear(k, -1.0);
        }
        let mine: Vec<Slot> = c
            .weights
            .iter()
            .map(|&(var, weight)| {
                let pos = form.linear.binary_search_by_key(&var, |e| e.0).expect("slot");
                Slot {
                    pos,
                    var,
                    base: form.linear[pos].1,
                    weight,
                }
            })
            .collect();
        for s in &mine {
            form.linear[s.pos].1 = s.base - 2.0 * s.weight * anchor[s.var];
        }
        constants.push(form.constant);
        form.constant = tangent_constant(form.constant, &mine, anchor);
        constraints.push(ConvexConstraint {
            quad: form.quad,
            linear: form.linear,
            constant: form.constant,
        });
        slots.push(mine);
    }
    let mut objective = dc.objective.clone();
    let mut penalty_terms = Vec::new();
    for k in dc.penalty_vars() {
        penalty_terms.push(objective.len());
        objective.push((k, tau));
    }
    ConvexifiedProgram {
        program: ConvexProgram {
            lower: dc.lower.clone(),
            upper: dc.upper.clone(),
            objective,
            constraints,
        },
        anchor: anchor.to_vec(),
        tau,
        slots,
        constants,
        penalty_terms,
    }
}

impl ConvexifiedProgram {
    /// Moves the anchor and penalty weight in place. The result is
    /// coefficient-identical to a fresh [`convexify`] at `(anchor, tau)`.
    pub fn refresh(&mut self, anchor: &[f64], tau: f64) {
        assert_eq!(anchor.len(), self.anchor.len(), "anchor dimension");
        for ((c, mine), &base) in self.program.constraints.iter_mut().zip(&self.slots).zip(&self.constants) {
            for s in mine {
                c.linear[s.pos].1 = s.base - 2.0 * s.weight * anchor[s.var];
            }
            c.constant = tangent_constant(base, mine, anchor);
        }
        for &i in &self.penalty_terms {
            self.program.objective[i].1 = tau;
        }
        self.anchor.copy_from_slice(anchor);
        self.tau = tau;
    }

    pub fn num_penalties(&self) -> usize {
        self.penalty_terms.len()
    }

    /// Sum of the penalty variables at `x`.
    pub fn penalty_sum(&self, x: &[f64]) -> f64 {
        self.penalty_terms.iter().map(|&i| x[self.program.objective[i].0].max(0.0)).sum()
    }
}
