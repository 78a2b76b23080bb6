use super::{InitialValue, Nlp, VarKind};
use crate::model::{to_f64, StateId};

/// `xᵀPx + qᵀx + r` with `P` symmetric, stored as its upper triangle
/// `(i, j, P_ij)`, `i <= j`, sorted and without duplicates. A product
/// `a·x_i·x_j` with `i != j` is stored as `P_ij = a/2`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadForm {
    pub quad: Vec<(usize, usize, f64)>,
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
}

impl QuadForm {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for &(i, j, p) in &self.quad {
            v += if i == j { p * x[i] * x[i] } else { 2.0 * p * x[i] * x[j] };
        }
        for &(i, q) in &self.linear {
            v += q * x[i];
        }
        v
    }

    /// `dᵀPd`.
    pub fn curvature(&self, d: &[f64]) -> f64 {
        self.quad
            .iter()
            .map(|&(i, j, p)| if i == j { p * d[i] * d[i] } else { 2.0 * p * d[i] * d[j] })
            .sum()
    }

    pub fn is_affine(&self) -> bool {
        self.quad.is_empty()
    }

    /// Variables with a nonzero entry in `P`, ascending.
    pub fn quad_vars(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.quad.iter().flat_map(|&(i, j, _)| [i, j]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Dense `P` restricted to `vars`, for tests and small examples.
    pub fn dense(&self, vars: &[usize]) -> Vec<Vec<f64>> {
        let pos = |v: usize| vars.iter().position(|&w| w == v);
        let mut m = vec![vec![0.0; vars.len()]; vars.len()];
        for &(i, j, p) in &self.quad {
            if let (Some(a), Some(b)) = (pos(i), pos(j)) {
                m[a][b] = p;
                m[b][a] = p;
            }
        }
        m
    }

    /// Adds `p` to the `(i, j)` entry of the upper triangle.
    pub fn add_quad(&mut self, i: usize, j: usize, p: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match self.quad.binary_search_by(|e| (e.0, e.1).cmp(&(i, j))) {
            Ok(k) => self.quad[k].2 += p,
            Err(k) => self.quad.insert(k, (i, j, p)),
        }
    }

    pub fn add_linear(&mut self, i: usize, q: f64) {
        match self.linear.binary_search_by_key(&i, |e| e.0) {
            Ok(k) => self.linear[k].1 += q,
            Err(k) => self.linear.insert(k, (i, q)),
        }
    }

    /// Drops explicit zeros.
    pub fn prune(&mut self) {
        self.quad.retain(|e| e.2 != 0.0);
        self.linear.retain(|e| e.1 != 0.0);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ConstraintKind {
    /// Bellman inequality of `state` under `action`; gets a penalty variable.
    Bellman { state: StateId, action: String },
    /// Graph preservation over several parameters; kept hard.
    WellDefined,
}

/// `form(x) <= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct QcqpConstraint {
    pub kind: ConstraintKind,
    pub form: QuadForm,
}

/// Standard form: minimize a linear objective subject to `form_i(x) <= 0`
/// and variable bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct QcqpProblem {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<QcqpConstraint>,
    pub num_params: usize,
}

impl QcqpProblem {
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn bellman_count(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| matches!(c.kind, ConstraintKind::Bellman { .. }))
            .count()
    }
}

/// Lowers the symbolic NLP. Every transition function is affine, so each
/// product `f(v)·p` contributes bilinear cells between parameters and state
/// values and nothing of higher degree.
pub fn nlp_to_qcqp(nlp: &Nlp) -> QcqpProblem {
    let sense = nlp.sense();
    let mut constraints = Vec::with_capacity(nlp.bellman.len() + nlp.well_defined.len());
    for row in &nlp.bellman {
        let mut form = QuadForm::default();
        form.constant = sense * to_f64(row.constant.constant_part());
        for (p, a) in row.constant.coefficients() {
            form.add_linear(p.0, sense * to_f64(a));
        }
        for (j, f) in &row.terms {
            let b0 = to_f64(f.constant_part());
            if b0 != 0.0 {
                form.add_linear(*j, sense * b0);
            }
            for (p, b) in f.coefficients() {
                form.add_quad(p.0, *j, sense * to_f64(b) / 2.0);
            }
        }
        form.add_linear(row.var, -sense);
        form.prune();
        constraints.push(QcqpConstraint {
            kind: ConstraintKind::Bellman {
                state: row.state,
                action: row.action.clone(),
            },
            form,
        });
    }
    for (f, bound) in &nlp.well_defined {
        let mut form = QuadForm {
            constant: to_f64(bound) - to_f64(f.constant_part()),
            ..QuadForm::default()
        };
        for (p, a) in f.coefficients() {
            form.add_linear(p.0, -to_f64(a));
        }
        form.prune();
        constraints.push(QcqpConstraint {
            kind: ConstraintKind::WellDefined,
            form,
        });
    }
    let objective = match nlp.initial {
        InitialValue::Var(i) => vec![(i, sense)],
        InitialValue::Fixed(_) => Vec::new(),
    };
    debug_assert!(nlp.space.vars.iter().all(|v| !matches!(v.kind, VarKind::Penalty(_))));
    QcqpProblem {
        names: nlp.space.vars.iter().map(|v| v.name.clone()).collect(),
        lower: nlp.space.vars.iter().map(|v| v.lower).collect(),
        upper: nlp.space.vars.iter().map(|v| v.upper).collect(),
        objective,
        constraints,
        num_params: nlp.space.num_params,
    }
}
