//! Affine parametric MDPs, instantiations and specifications.
//!
//! Everything symbolic in here is exact: transition functions, box bounds and
//! thresholds are rationals. Only [`ConcreteMdp::to_f64`] leaves exact
//! arithmetic, for the numeric model checker.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// Index of a parameter in [`Pmdp::params`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub usize);

/// Index of a state in a [`Pmdp`] or [`ConcreteMdp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {0} is not bound by the instantiation")]
    UnboundParameter(String),
    #[error("state {0} has no enabled action")]
    NoActions(String),
    #[error("row ({state}, {action}) sums to {sum}, not identically 1")]
    RowSum {
        state: String,
        action: String,
        sum: String,
    },
    #[error("duplicate transition ({state}, {action}, {successor})")]
    DuplicateTransition {
        state: String,
        action: String,
        successor: String,
    },
    #[error("unknown parameter index {0}")]
    UnknownParameter(usize),
    #[error("unknown state index {0}")]
    UnknownState(usize),
    #[error("negative cost {cost} at ({state}, {action})")]
    NegativeCost {
        state: String,
        action: String,
        cost: String,
    },
    #[error("a pMC state must have exactly one action, {state} has {count}")]
    PmcActions { state: String, count: usize },
    #[error("parameter {0} has an empty box")]
    EmptyBox(String),
    #[error("parameter {0} has an unbounded box")]
    UnboundedBox(String),
    #[error("{0}")]
    InvalidSpecification(String),
}

/// `constant + Σ coefficient·parameter`, kept in canonical form (no zero
/// coefficients).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct AffineExpr {
    constant: Rational,
    coefficients: BTreeMap<ParamId, Rational>,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self {
            constant: c,
            coefficients: BTreeMap::new(),
        }
    }

    pub fn param(p: ParamId) -> Self {
        Self::term(Rational::one(), p)
    }

    pub fn term(coefficient: Rational, p: ParamId) -> Self {
        let mut e = Self::zero();
        e.add_term(coefficient, p);
        e
    }

    pub fn add_term(&mut self, coefficient: Rational, p: ParamId) {
        if coefficient.is_zero() {
            return;
        }
        let slot = self.coefficients.entry(p).or_insert_with(Rational::zero);
        *slot += coefficient;
        if slot.is_zero() {
            self.coefficients.remove(&p);
        }
    }

    pub fn constant_part(&self) -> &Rational {
        &self.constant
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (ParamId, &Rational)> + '_ {
        self.coefficients.iter().map(|(p, c)| (*p, c))
    }

    pub fn coefficient(&self, p: ParamId) -> Rational {
        self.coefficients.get(&p).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.is_constant() && self.constant.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.is_constant() && self.constant.is_one()
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.coefficients.keys().copied()
    }

    pub fn scale(&self, k: &Rational) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        Self {
            constant: &self.constant * k,
            coefficients: self
                .coefficients
                .iter()
                .map(|(p, c)| (*p, c * k))
                .collect(),
        }
    }

    /// Exact value at `u`.
    pub fn evaluate(&self, u: &Instantiation) -> Result<Rational, ModelError> {
        let mut acc = self.constant.clone();
        for (p, c) in &self.coefficients {
            let value = u
                .get(*p)
                .ok_or_else(|| ModelError::UnboundParameter(format!("#{}", p.0)))?;
            acc += c * value;
        }
        Ok(acc)
    }

    /// Floating-point value at a dense parameter vector.
    pub fn evaluate_f64(&self, values: &[f64]) -> f64 {
        self.to_f64_form().evaluate(values)
    }

    pub fn to_f64_form(&self) -> AffineF64 {
        AffineF64 {
            constant: to_f64(&self.constant),
            terms: self
                .coefficients
                .iter()
                .map(|(p, c)| (p.0, to_f64(c)))
                .collect(),
        }
    }

    /// Minimum over a box, taken coordinate-wise. `None` when unbounded below.
    pub fn min_over_box(&self, bounds: &[Interval]) -> Option<Rational> {
        let mut acc = self.constant.clone();
        for (p, c) in &self.coefficients {
            let b = &bounds[p.0];
            let end = if c.is_positive() { &b.lo } else { &b.hi };
            acc += c * end.as_ref()?;
        }
        Some(acc)
    }

    pub fn max_over_box(&self, bounds: &[Interval]) -> Option<Rational> {
        self.neg_ref().min_over_box(bounds).map(|m| -m)
    }

    fn neg_ref(&self) -> Self {
        self.scale(&-Rational::one())
    }
}

impl Add<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn add(self, rhs: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: AffineExpr) -> AffineExpr {
        self += &rhs;
        self
    }
}

impl AddAssign<&AffineExpr> for AffineExpr {
    fn add_assign(&mut self, rhs: &AffineExpr) {
        self.constant += &rhs.constant;
        for (p, c) in &rhs.coefficients {
            self.add_term(c.clone(), *p);
        }
    }
}

impl Sub<&AffineExpr> for &AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: &AffineExpr) -> AffineExpr {
        self + &rhs.neg_ref()
    }
}

impl Sub for AffineExpr {
    type Output = AffineExpr;
    fn sub(self, rhs: AffineExpr) -> AffineExpr {
        &self - &rhs
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.neg_ref()
    }
}

impl Mul<&Rational> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, k: &Rational) -> AffineExpr {
        self.scale(k)
    }
}

/// Floating-point image of an [`AffineExpr`] over dense parameter indices.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineF64 {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineF64 {
    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(p, c)| acc + c * values[p])
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational image of a finite float.
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite float")
}

pub fn rational(numer: i64, denom: i64) -> Rational {
    Rational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Closed interval; `None` on either side means unbounded.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        Self {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.lo.as_ref().is_none_or(|lo| lo <= x) && self.hi.as_ref().is_none_or(|hi| x <= hi)
    }

    pub fn lo_f64(&self) -> f64 {
        self.lo.as_ref().map_or(f64::NEG_INFINITY, to_f64)
    }

    pub fn hi_f64(&self) -> f64 {
        self.hi.as_ref().map_or(f64::INFINITY, to_f64)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    /// Box bounds as written in the model; `None` selects the default
    /// `[eps, 1 - eps]` at solve time.
    pub bounds: Option<Interval>,
}

/// One enabled action of a state with its distribution and optional cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub action: String,
    pub transitions: Vec<(StateId, AffineExpr)>,
    pub cost: Option<Rational>,
}

impl Choice {
    pub fn row_sum(&self) -> AffineExpr {
        let mut sum = AffineExpr::zero();
        for (_, f) in &self.transitions {
            sum += f;
        }
        sum
    }

    pub fn cost_or_zero(&self) -> Rational {
        self.cost.clone().unwrap_or_else(Rational::zero)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Pmc,
    Pmdp,
}

/// An affine parametric MDP. Immutable once built through [`Pmdp::new`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pmdp {
    kind: ModelKind,
    state_names: Vec<String>,
    initial: StateId,
    params: Vec<Parameter>,
    choices: Vec<Vec<Choice>>,
    targets: BTreeSet<StateId>,
}

impl Pmdp {
    pub fn new(
        kind: ModelKind,
        state_names: Vec<String>,
        initial: StateId,
        params: Vec<Parameter>,
        choices: Vec<Vec<Choice>>,
        targets: BTreeSet<StateId>,
    ) -> Result<Self, ModelError> {
        let n = state_names.len();
        if choices.len() != n {
            return Err(ModelError::UnknownState(choices.len().max(n)));
        }
        if initial.0 >= n {
            return Err(ModelError::UnknownState(initial.0));
        }
        if let Some(t) = targets.iter().find(|t| t.0 >= n) {
            return Err(ModelError::UnknownState(t.0));
        }
        for p in &params {
            if let Some(Interval {
                lo: Some(lo),
                hi: Some(hi),
            }) = &p.bounds
            {
                if lo > hi {
                    return Err(ModelError::EmptyBox(p.name.clone()));
                }
            }
        }
        for (s, row) in choices.iter().enumerate() {
            let name = &state_names[s];
            if row.is_empty() {
                return Err(ModelError::NoActions(name.clone()));
            }
            if kind == ModelKind::Pmc && row.len() != 1 {
                return Err(ModelError::PmcActions {
                    state: name.clone(),
                    count: row.len(),
                });
            }
            for choice in row {
                let mut seen = BTreeSet::new();
                for (succ, f) in &choice.transitions {
                    if succ.0 >= n {
                        return Err(ModelError::UnknownState(succ.0));
                    }
                    if !seen.insert(*succ) {
                        return Err(ModelError::DuplicateTransition {
                            state: name.clone(),
                            action: choice.action.clone(),
                            successor: state_names[succ.0].clone(),
                        });
                    }
                    if let Some(p) = f.params().find(|p| p.0 >= params.len()) {
                        return Err(ModelError::UnknownParameter(p.0));
                    }
                }
                let sum = choice.row_sum();
                if !sum.is_one() {
                    return Err(ModelError::RowSum {
                        state: name.clone(),
                        action: choice.action.clone(),
                        sum: format_affine(&sum, &params),
                    });
                }
                if let Some(c) = &choice.cost {
                    if c.is_negative() {
                        return Err(ModelError::NegativeCost {
                            state: name.clone(),
                            action: choice.action.clone(),
                            cost: c.to_string(),
                        });
                    }
                }
            }
        }
        Ok(Self {
            kind,
            state_names,
            initial,
            params,
            choices,
            targets,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choices.iter().map(Vec::len).sum()
    }

    pub fn num_transitions(&self) -> usize {
        self.choices
            .iter()
            .flatten()
            .map(|c| c.transitions.len())
            .sum()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.0]
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(StateId)
    }

    pub fn params(&self) -> &[Parameter] {
        &self.params
    }

    pub fn param_index(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn choices(&self, s: StateId) -> &[Choice] {
        &self.choices[s.0]
    }

    pub fn targets(&self) -> &BTreeSet<StateId> {
        &self.targets
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.targets.contains(&s)
    }

    pub fn has_costs(&self) -> bool {
        self.choices.iter().flatten().any(|c| c.cost.is_some())
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states()).map(StateId)
    }

    /// Parameter box with the `[eps, 1 - eps]` default filled in.
    pub fn param_box(&self, eps_graph: &Rational) -> Vec<Interval> {
        self.params
            .iter()
            .map(|p| {
                p.bounds.clone().unwrap_or_else(|| {
                    Interval::new(eps_graph.clone(), Rational::one() - eps_graph)
                })
            })
            .collect()
    }

    /// Transition functions that actually depend on a parameter.
    pub fn is_parametric(&self) -> bool {
        self.choices
            .iter()
            .flatten()
            .flat_map(|c| c.transitions.iter())
            .any(|(_, f)| !f.is_constant())
    }

    pub fn instantiate(&self, u: &Instantiation) -> Result<ConcreteMdp<Rational>, ModelError> {
        instantiate(self, u)
    }
}

/// Assignment of values to parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Instantiation {
    values: BTreeMap<ParamId, Rational>,
}

impl Instantiation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_f64(values: &[f64]) -> Self {
        Self {
            values: values
                .iter()
                .enumerate()
                .map(|(i, v)| (ParamId(i), from_f64(*v)))
                .collect(),
        }
    }

    pub fn insert(&mut self, p: ParamId, value: Rational) {
        self.values.insert(p, value);
    }

    pub fn get(&self, p: ParamId) -> Option<&Rational> {
        self.values.get(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Rational)> + '_ {
        self.values.iter().map(|(p, v)| (*p, v))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Dense float vector over `0..num_params`; fails on the first gap.
    pub fn to_f64_vec(&self, m: &Pmdp) -> Result<Vec<f64>, ModelError> {
        (0..m.num_params())
            .map(|i| {
                self.values
                    .get(&ParamId(i))
                    .map(to_f64)
                    .ok_or_else(|| ModelError::UnboundParameter(m.params[i].name.clone()))
            })
            .collect()
    }

    fn check_total(&self, m: &Pmdp) -> Result<(), ModelError> {
        for (i, p) in m.params.iter().enumerate() {
            if !self.values.contains_key(&ParamId(i)) {
                return Err(ModelError::UnboundParameter(p.name.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecKind {
    ReachProbability,
    ExpectedCost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    AtMost,
    AtLeast,
}

/// `P<=λ`, `P>=λ`, `E<=κ` or `E>=κ` over the model's target set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Specification {
    pub kind: SpecKind,
    pub direction: Direction,
    pub threshold: Rational,
}

impl Specification {
    pub fn new(kind: SpecKind, direction: Direction, threshold: Rational) -> Result<Self, ModelError> {
        match kind {
            SpecKind::ReachProbability if threshold.is_negative() || threshold > Rational::one() => {
                return Err(ModelError::InvalidSpecification(format!(
                    "probability threshold {threshold} outside [0, 1]"
                )))
            }
            SpecKind::ExpectedCost if threshold.is_negative() => {
                return Err(ModelError::InvalidSpecification(format!(
                    "cost threshold {threshold} is negative"
                )))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            direction,
            threshold,
        })
    }

    pub fn threshold_f64(&self) -> f64 {
        to_f64(&self.threshold)
    }

    /// Whether `value` satisfies the threshold up to an absolute `slack`.
    pub fn holds_for(&self, value: f64, slack: f64) -> bool {
        let t = self.threshold_f64();
        match self.direction {
            Direction::AtMost => value <= t + slack,
            Direction::AtLeast => value >= t - slack,
        }
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            SpecKind::ReachProbability => 'P',
            SpecKind::ExpectedCost => 'E',
        };
        let d = match self.direction {
            Direction::AtMost => "<=",
            Direction::AtLeast => ">=",
        };
        write!(f, "{k}{d}{}", format_rational(&self.threshold))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteChoice<T> {
    pub transitions: Vec<(usize, T)>,
    pub cost: T,
}

/// A pMDP with all parameters replaced by values.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcreteMdp<T> {
    pub initial: usize,
    pub choices: Vec<Vec<ConcreteChoice<T>>>,
    pub targets: Vec<bool>,
}

impl<T> ConcreteMdp<T> {
    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn target_set(&self) -> Vec<usize> {
        (0..self.targets.len()).filter(|&s| self.targets[s]).collect()
    }
}

impl ConcreteMdp<Rational> {
    pub fn to_f64(&self) -> ConcreteMdp<f64> {
        ConcreteMdp {
            initial: self.initial,
            targets: self.targets.clone(),
            choices: self
                .choices
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| ConcreteChoice {
                            transitions: c.transitions.iter().map(|(s, p)| (*s, to_f64(p))).collect(),
                            cost: to_f64(&c.cost),
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

pub fn instantiate(m: &Pmdp, u: &Instantiation) -> Result<ConcreteMdp<Rational>, ModelError> {
    u.check_total(m)?;
    let choices = m
        .choices
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| {
                    Ok(ConcreteChoice {
                        transitions: c
                            .transitions
                            .iter()
                            .map(|(s, f)| Ok((s.0, f.evaluate(u)?)))
                            .collect::<Result<_, ModelError>>()?,
                        cost: c.cost_or_zero(),
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(ConcreteMdp {
        initial: m.initial.0,
        choices,
        targets: (0..m.num_states()).map(|s| m.is_target(StateId(s))).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Instantiated entry below `eps_graph`.
    Entry {
        state: StateId,
        choice: usize,
        successor: StateId,
        value: Rational,
    },
    /// Instantiated row does not sum to exactly one.
    RowSum {
        state: StateId,
        choice: usize,
        sum: Rational,
    },
    /// Parameter value outside its box.
    OutOfBox { param: ParamId, value: Rational },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WellDefinedness {
    pub violations: Vec<Violation>,
}

impl WellDefinedness {
    pub fn is_well_defined(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn describe(&self, m: &Pmdp) -> Vec<String> {
        self.violations
            .iter()
            .map(|v| match v {
                Violation::Entry {
                    state,
                    choice,
                    successor,
                    value,
                } => format!(
                    "P({}, {}, {}) = {} below eps_graph",
                    m.state_name(*state),
                    m.choices(*state)[*choice].action,
                    m.state_name(*successor),
                    format_rational(value)
                ),
                Violation::RowSum { state, choice, sum } => format!(
                    "row ({}, {}) sums to {}",
                    m.state_name(*state),
                    m.choices(*state)[*choice].action,
                    format_rational(sum)
                ),
                Violation::OutOfBox { param, value } => format!(
                    "parameter {} = {} outside its box",
                    m.params[param.0].name,
                    format_rational(value)
                ),
            })
            .collect()
    }
}

/// Exact graph-preservation check of `u`: every entry `>= eps_graph` and every
/// row summing to one.
pub fn check_well_defined(
    m: &Pmdp,
    u: &Instantiation,
    eps_graph: &Rational,
) -> Result<WellDefinedness, ModelError> {
    u.check_total(m)?;
    let mut out = WellDefinedness::default();
    for s in m.states() {
        for (ci, c) in m.choices(s).iter().enumerate() {
            let mut sum = Rational::zero();
            for (succ, f) in &c.transitions {
                let value = f.evaluate(u)?;
                if &value < eps_graph {
                    out.violations.push(Violation::Entry {
                        state: s,
                        choice: ci,
                        successor: *succ,
                        value: value.clone(),
                    });
                }
                sum += value;
            }
            if !sum.is_one() {
                out.violations.push(Violation::RowSum {
                    state: s,
                    choice: ci,
                    sum,
                });
            }
        }
    }
    Ok(out)
}

/// True iff every transition function stays `>= eps_graph` on the whole box.
pub fn well_definedness_is_universal(m: &Pmdp, eps_graph: &Rational) -> Result<bool, ModelError> {
    let bounds = m.param_box(eps_graph);
    for (p, b) in m.params.iter().zip(&bounds) {
        if !b.is_finite() {
            return Err(ModelError::UnboundedBox(p.name.clone()));
        }
    }
    for c in m.choices.iter().flatten() {
        for (_, f) in &c.transitions {
            let min = f.min_over_box(&bounds).expect("finite box");
            if &min < eps_graph {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Shortest exact rendering: integers plainly, otherwise `a/b`.
pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Renders an expression in the model-file grammar.
pub fn format_affine(e: &AffineExpr, params: &[Parameter]) -> String {
    let mut out = String::new();
    let has_constant = !e.constant.is_zero() || e.is_constant();
    if has_constant {
        out.push_str(&format_rational(&e.constant));
    }
    for (p, c) in e.coefficients() {
        let name = params.get(p.0).map_or_else(|| format!("#{}", p.0), |x| x.name.clone());
        let magnitude = c.abs();
        let body = if magnitude.is_one() {
            name
        } else {
            format!("{}*{}", format_rational(&magnitude), name)
        };
        if out.is_empty() {
            if c.is_negative() {
                out.push('-');
            }
        } else {
            out.push_str(if c.is_negative() { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_model;
    use crate::fixtures::SINGLE_PARAM_CHAIN as FIG1;

    fn r(x: &str) -> Rational {
        crate::parser::parse_rational(x).unwrap()
    }

    fn fig1() -> Pmdp {
        parse_model(FIG1).unwrap()
    }

    fn at(m: &Pmdp, v: &str) -> Instantiation {
        let mut u = Instantiation::new();
        u.insert(m.param_index("v").unwrap(), r(v));
        u
    }

    #[test]
    fn evaluate_affine_examples() {
        let v = ParamId(0);
        let mut u = Instantiation::new();
        u.insert(v, r("0.3"));
        let one_minus_v = AffineExpr::constant(Rational::one()) - AffineExpr::param(v);
        assert_eq!(one_minus_v.evaluate(&u).unwrap(), r("0.7"));

        u.insert(v, r("0.5"));
        assert_eq!(AffineExpr::param(v).evaluate(&u).unwrap(), r("0.5"));

        let p = ParamId(1);
        u.insert(p, Rational::one());
        let e = AffineExpr::constant(r("0.5")) + AffineExpr::term(r("0.5"), p);
        assert_eq!(e.evaluate(&u).unwrap(), Rational::one());
    }

    #[test]
    fn evaluate_reports_unbound_parameter() {
        let e = AffineExpr::param(ParamId(3));
        assert!(matches!(
            e.evaluate(&Instantiation::new()),
            Err(ModelError::UnboundParameter(_))
        ));
    }

    #[test]
    fn canonical_form_drops_cancelled_terms() {
        let v = ParamId(0);
        let e = AffineExpr::param(v) - AffineExpr::param(v);
        assert!(e.is_zero());
        assert_eq!(e, AffineExpr::zero());
    }

    #[test]
    fn instantiate_fig1_at_half() {
        let m = fig1();
        let mdp = m.instantiate(&at(&m, "0.5")).unwrap();
        let s = |n: &str| m.state_index(n).unwrap().0;
        let prob = |from: &str, to: &str| -> Rational {
            mdp.choices[s(from)][0]
                .transitions
                .iter()
                .find(|(t, _)| *t == s(to))
                .unwrap()
                .1
                .clone()
        };
        assert_eq!(prob("s0", "s1"), r("0.5"));
        assert_eq!(prob("s1", "s2"), r("0.5"));
        assert_eq!(prob("s2", "s3"), r("0.5"));
        assert_eq!(prob("s0", "s4"), r("0.5"));
        for row in mdp.choices.iter().flatten() {
            let sum: Rational = row.transitions.iter().map(|(_, p)| p.clone()).sum();
            assert!(sum.is_one());
        }
    }

    #[test]
    fn instantiate_constant_model_is_identity() {
        let text = "@type pmdp\n@initial a\n@targets b\na go b 1/3\na go a 2/3\na stay a 1\nb x b 1\n";
        let m = parse_model(text).unwrap();
        let mdp = m.instantiate(&Instantiation::new()).unwrap();
        assert_eq!(mdp.choices[0][0].transitions[0].1, rational(1, 3));
        assert_eq!(mdp.choices[0][1].transitions[0].1, Rational::one());
    }

    #[test]
    fn instantiate_at_zero_keeps_zero_entry() {
        let m = fig1();
        let mdp = m.instantiate(&at(&m, "0")).unwrap();
        let s0 = m.state_index("s0").unwrap().0;
        let s1 = m.state_index("s1").unwrap().0;
        let entry = mdp.choices[s0][0].transitions.iter().find(|(t, _)| *t == s1).unwrap();
        assert!(entry.1.is_zero());
    }

    #[test]
    fn well_defined_examples() {
        let m = fig1();
        let eps = r("0.00001");
        assert!(check_well_defined(&m, &at(&m, "0.5"), &eps).unwrap().is_well_defined());

        let w = check_well_defined(&m, &at(&m, "0.000001"), &eps).unwrap();
        let s0 = m.state_index("s0").unwrap();
        let s1 = m.state_index("s1").unwrap();
        assert!(w.violations.iter().any(|v| matches!(v,
            Violation::Entry { state, successor, .. } if *state == s0 && *successor == s1)));

        let w = check_well_defined(&m, &at(&m, "1"), &eps).unwrap();
        let s2 = m.state_index("s2").unwrap();
        assert!(w.violations.iter().any(|v| matches!(v,
            Violation::Entry { state, successor, value, .. }
                if *state == s1 && *successor == s2 && value.is_zero())));
    }

    #[test]
    fn universal_well_definedness_examples() {
        let eps = r("0.00001");
        // default box is [eps, 1 - eps]
        assert!(well_definedness_is_universal(&fig1(), &eps).unwrap());

        let wide = FIG1.replace("@parameters v", "@parameters v [0,1]");
        assert!(!well_definedness_is_universal(&parse_model(&wide).unwrap(), &eps).unwrap());

        let constant = "@type pmc\n@initial a\n@targets b\na b 1/2\na a 1/2\nb b 1\n";
        assert!(well_definedness_is_universal(&parse_model(constant).unwrap(), &eps).unwrap());
    }

    #[test]
    fn unbounded_box_is_an_error() {
        let text = FIG1.replace("@parameters v", "@parameters v [0,inf]");
        let m = parse_model(&text).unwrap();
        assert!(matches!(
            well_definedness_is_universal(&m, &r("0.00001")),
            Err(ModelError::UnboundedBox(_))
        ));
    }

    #[test]
    fn box_minimum_is_coordinatewise() {
        let bounds = vec![
            Interval::new(r("0.1"), r("0.9")),
            Interval::new(r("-1"), r("2")),
        ];
        // 1 - v + 3w - 2 ... min at v = 0.9, w = -1
        let mut e = AffineExpr::constant(r("1"));
        e.add_term(r("-1"), ParamId(0));
        e.add_term(r("3"), ParamId(1));
        assert_eq!(e.min_over_box(&bounds).unwrap(), r("-2.9"));
        assert_eq!(e.max_over_box(&bounds).unwrap(), r("6.9"));
    }

    #[test]
    fn spec_threshold_validation() {
        assert!(Specification::new(SpecKind::ReachProbability, Direction::AtMost, r("2")).is_err());
        assert!(Specification::new(SpecKind::ExpectedCost, Direction::AtMost, r("-1")).is_err());
        assert!(Specification::new(SpecKind::ExpectedCost, Direction::AtMost, r("14")).is_ok());
    }

    #[test]
    fn format_affine_matches_grammar() {
        let params = vec![
            Parameter { name: "v".into(), bounds: None },
            Parameter { name: "w".into(), bounds: None },
        ];
        let mut e = AffineExpr::constant(Rational::one());
        e.add_term(-Rational::one(), ParamId(0));
        e.add_term(r("1/2"), ParamId(1));
        assert_eq!(format_affine(&e, &params), "1 - v + 1/2*w");
        assert_eq!(format_affine(&AffineExpr::param(ParamId(0)), &params), "v");
        assert_eq!(format_affine(&-AffineExpr::param(ParamId(0)), &params), "-v");
        assert_eq!(format_affine(&AffineExpr::zero(), &params), "0");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_rational() -> impl Strategy<Value = Rational> {
            (-50i64..50, 1i64..20).prop_map(|(n, d)| rational(n, d))
        }

        fn expr(params: usize) -> impl Strategy<Value = AffineExpr> {
            (small_rational(), prop::collection::vec((0..params, small_rational()), 0..4)).prop_map(
                |(c, terms)| {
                    let mut e = AffineExpr::constant(c);
                    for (p, k) in terms {
                        e.add_term(k, ParamId(p));
                    }
                    e
                },
            )
        }

        fn valuation(params: usize) -> impl Strategy<Value = Instantiation> {
            prop::collection::vec(small_rational(), params).prop_map(|vals| {
                let mut u = Instantiation::new();
                for (i, v) in vals.into_iter().enumerate() {
                    u.insert(ParamId(i), v);
                }
                u
            })
        }

        proptest! {
            #[test]
            fn evaluation_is_additive(a in expr(3), b in expr(3), u in valuation(3)) {
                let lhs = (&a + &b).evaluate(&u).unwrap();
                let rhs = a.evaluate(&u).unwrap() + b.evaluate(&u).unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn no_zero_coefficients(a in expr(3), b in expr(3)) {
                let e = &a - &b;
                prop_assert!(e.coefficients().all(|(_, c)| !c.is_zero()));
            }
        }
    }
}
