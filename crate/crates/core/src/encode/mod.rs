//! From a pMDP and a specification to a sequence of convex programs.
//!
//! [`build_nlp`] writes the Bellman inequalities symbolically, [`nlp_to_qcqp`]
//! lowers them to quadratic forms over `x = (parameters, state values)`,
//! [`dc_split_bilinear`] / [`dc_split_eigen`] separate each form into a
//! convex part minus a weighted sum of squares, and [`convexify`] linearizes
//! that sum of squares at an anchor and adds penalty variables.

mod convexify;
mod dc;
mod dump;
mod qcqp;

pub use convexify::{convexify, ConvexifiedProgram};
pub use dc::{dc_split, dc_split_bilinear, dc_split_eigen, dc_split_eigen_with_shift, gershgorin_bound, Concave, DcConstraint, DcProblem, SplitMethod};
pub use dump::{parse_qcqp, write_qcqp, DumpError};
pub use qcqp::{nlp_to_qcqp, ConstraintKind, QcqpConstraint, QcqpProblem, QuadForm};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::graph::GraphAnalysis;
use crate::model::{
    format_rational, rational, to_f64, well_definedness_is_universal, AffineExpr, Direction, Interval, ModelError,
    ParamId, Pmdp, Rational, SpecKind, Specification, StateId,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodeError {
    #[error("transition {state} -> {successor} is the constant {value}, below the graph-preservation bound")]
    ConstantBelowEpsilon {
        state: String,
        successor: String,
        value: String,
    },
    #[error("no parameter value keeps every transition of `{0}` above the graph-preservation bound")]
    EmptyRegion(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Debug, PartialEq)]
pub enum VarKind {
    Param(ParamId),
    State(StateId),
    Penalty(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub kind: VarKind,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// Parameters first, then one value variable per free state.
#[derive(Clone, Debug, PartialEq)]
pub struct VariableSpace {
    pub vars: Vec<Variable>,
    pub num_params: usize,
    /// Variable index per state, `None` for states whose value is fixed or
    /// that are unreachable.
    pub state_var: Vec<Option<usize>>,
}

impl VariableSpace {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn num_states(&self) -> usize {
        self.vars.len() - self.num_params
    }
}

/// Value of the initial state in the encoding.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialValue {
    Var(usize),
    Fixed(f64),
}

/// `value(v) = constant(v) + Σ f(v)·x_var`. At-most specifications require
/// `x_state >= value`, at-least specifications `x_state <= value`.
#[derive(Clone, Debug, PartialEq)]
pub struct BellmanRow {
    pub state: StateId,
    pub action: String,
    pub var: usize,
    pub constant: AffineExpr,
    pub terms: Vec<(usize, AffineExpr)>,
}

/// The synthesis problem with graph-fixed values substituted.
#[derive(Clone, Debug, PartialEq)]
pub struct Nlp {
    pub spec: Specification,
    pub space: VariableSpace,
    /// Parameter box after folding in single-parameter well-definedness rows.
    pub param_box: Vec<Interval>,
    pub initial: InitialValue,
    pub bellman: Vec<BellmanRow>,
    /// Rows `f(v) >= bound` over several parameters that the box does not
    /// already imply.
    pub well_defined: Vec<(AffineExpr, Rational)>,
    /// True when every transition stays above the bound on the whole box, so
    /// no well-definedness rows were needed.
    pub universal: bool,
}

impl Nlp {
    /// `+1` when the state-value variables are upper bounds (at-most).
    pub fn sense(&self) -> f64 {
        match self.spec.direction {
            Direction::AtMost => 1.0,
            Direction::AtLeast => -1.0,
        }
    }
}

/// Multi-parameter well-definedness rows are encoded with this relative
/// margin so a floating-point optimum still passes the exact check.
const MULTI_PARAM_MARGIN: (i64, i64) = (101, 100);

fn tighten(bounds: &mut [Interval], f: &AffineExpr, eps: &Rational, what: &str) -> Result<(), EncodeError> {
    let (p, a) = {
        let mut it = f.coefficients();
        let (p, a) = it.next().expect("one parameter");
        (p, a.clone())
    };
    // a·v + b >= eps
    let limit = (eps - f.constant_part()) / &a;
    let b = &mut bounds[p.0];
    if a.is_positive() {
        if b.lo.as_ref().is_none_or(|lo| &limit > lo) {
            b.lo = Some(limit);
        }
    } else if b.hi.as_ref().is_none_or(|hi| &limit < hi) {
        b.hi = Some(limit);
    }
    match (&b.lo, &b.hi) {
        (Some(lo), Some(hi)) if lo > hi => Err(EncodeError::EmptyRegion(what.to_string())),
        _ => Ok(()),
    }
}

fn state_bounds(spec: &Specification) -> (f64, f64) {
    match (spec.kind, spec.direction) {
        (SpecKind::ReachProbability, _) => (0.0, 1.0),
        (SpecKind::ExpectedCost, Direction::AtMost) => (0.0, f64::INFINITY),
        // the mirrored system needs a cap: p_s may otherwise grow with its penalty
        (SpecKind::ExpectedCost, Direction::AtLeast) => (0.0, 100.0 * spec.threshold_f64().max(1.0)),
    }
}

/// Builds the synthesis NLP for `spec`, eliminating every state whose value
/// `analysis` fixes.
pub fn build_nlp(m: &Pmdp, spec: &Specification, analysis: &GraphAnalysis, eps_graph: &Rational) -> Result<Nlp, EncodeError> {
    let mut param_box = m.param_box(eps_graph);
    let universal = param_box.iter().all(Interval::is_finite) && well_definedness_is_universal(m, eps_graph)?;
    let mut well_defined = Vec::new();
    if !universal {
        let margin = eps_graph * rational(MULTI_PARAM_MARGIN.0, MULTI_PARAM_MARGIN.1);
        for s in m.states() {
            for c in m.choices(s) {
                for (t, f) in &c.transitions {
                    let what = format!("{} -> {}", m.state_name(s), m.state_name(*t));
                    match f.coefficients().count() {
                        0 if f.constant_part() < eps_graph => {
                            return Err(EncodeError::ConstantBelowEpsilon {
                                state: m.state_name(s).to_string(),
                                successor: m.state_name(*t).to_string(),
                                value: format_rational(f.constant_part()),
                            })
                        }
                        0 => {}
                        1 => tighten(&mut param_box, f, eps_graph, &what)?,
                        _ => {}
                    }
                }
            }
        }
        // multi-parameter rows, checked against the tightened box
        for s in m.states() {
            for c in m.choices(s) {
                for (_, f) in &c.transitions {
                    if f.coefficients().count() > 1
                        && f.min_over_box(&param_box).is_none_or(|min| &min < eps_graph)
                        && !well_defined.iter().any(|(g, _)| g == f)
                    {
                        well_defined.push((f.clone(), margin.clone()));
                    }
                }
            }
        }
    }

    let mut vars: Vec<Variable> = m
        .params()
        .iter()
        .zip(&param_box)
        .enumerate()
        .map(|(i, (p, b))| Variable {
            kind: VarKind::Param(ParamId(i)),
            name: format!("v:{}", p.name),
            lower: b.lo_f64(),
            upper: b.hi_f64(),
        })
        .collect();
    let num_params = vars.len();
    let (lo, hi) = state_bounds(spec);
    let mut state_var = vec![None; m.num_states()];
    for s in analysis.free_states() {
        state_var[s] = Some(vars.len());
        vars.push(Variable {
            kind: VarKind::State(StateId(s)),
            name: format!("p:{}", m.state_name(StateId(s))),
            lower: lo,
            upper: hi,
        });
    }

    let init = m.initial().0;
    let threshold = spec.threshold_f64();
    let initial = match (state_var[init], analysis.fixed_value(init)) {
        (Some(i), _) => {
            match spec.direction {
                Direction::AtMost => vars[i].upper = vars[i].upper.min(threshold),
                Direction::AtLeast => vars[i].lower = vars[i].lower.max(threshold),
            }
            InitialValue::Var(i)
        }
        (None, Some(v)) => InitialValue::Fixed(v),
        (None, None) => unreachable!("the initial state is reachable"),
    };

    let with_cost = spec.kind == SpecKind::ExpectedCost;
    let mut bellman = Vec::new();
    for s in m.states() {
        let Some(var) = state_var[s.0] else { continue };
        for c in m.choices(s) {
            let mut constant = if with_cost {
                AffineExpr::constant(c.cost_or_zero())
            } else {
                AffineExpr::zero()
            };
            let mut terms: Vec<(usize, AffineExpr)> = Vec::new();
            for (t, f) in &c.transitions {
                if let Some(j) = state_var[t.0] {
                    match terms.iter_mut().find(|(k, _)| *k == j) {
                        Some((_, g)) => *g += f,
                        None => terms.push((j, f.clone())),
                    }
                } else {
                    let v = analysis.fixed_value(t.0).expect("successor of a free state is fixed or free");
                    if v != 0.0 {
                        constant += &f.scale(&value_to_rational(v));
                    }
                }
            }
            terms.retain(|(_, g)| !g.is_zero());
            terms.sort_by_key(|(k, _)| *k);
            bellman.push(BellmanRow {
                state: s,
                action: c.action.clone(),
                var,
                constant,
                terms,
            });
        }
    }

    Ok(Nlp {
        spec: spec.clone(),
        space: VariableSpace {
            vars,
            num_params,
            state_var,
        },
        param_box,
        initial,
        bellman,
        well_defined,
        universal,
    })
}

fn value_to_rational(v: f64) -> Rational {
    if v == 1.0 {
        Rational::one()
    } else {
        debug_assert_eq!(v, 0.0);
        Rational::zero()
    }
}

/// Starting point: box centers for parameters, the threshold for every
/// state value, clamped to the variable bounds.
pub fn initial_anchor(nlp: &Nlp) -> Vec<f64> {
    let threshold = to_f64(&nlp.spec.threshold);
    nlp.space
        .vars
        .iter()
        .map(|v| match v.kind {
            VarKind::Param(_) => match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) => 0.5 * (v.lower + v.upper),
                (true, false) => v.lower + 1.0,
                (false, true) => v.upper - 1.0,
                (false, false) => 0.0,
            },
            _ => threshold.clamp(v.lower, v.upper),
        })
        .collect()
}
