//! Penalty convex-concave procedure with the model checker in the loop.
//!
//! Each iteration solves the convexified penalty program at the current
//! anchor, model checks the parameter part of the solution, and either stops
//! with a certified valuation or moves the anchor: parameters from the
//! solver, state values from the model checker. The penalty weight grows by
//! the largest anchored state value each round.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::encode::{
    build_nlp, convexify, dc_split, initial_anchor, nlp_to_qcqp, ConvexifiedProgram, DcProblem, EncodeError,
    InitialValue, Nlp, SplitMethod,
};
use crate::graph::{analyze, GraphAnalysis, GraphError};
use crate::mc::{evaluate, InstantiatedMdp, McError, DEFAULT_TOL, HOLDS_SLACK};
use crate::model::{
    check_well_defined, rational, to_f64, Instantiation, Interval, ModelError, ParamId, Pmdp, Rational, SpecKind,
    Specification,
};
use crate::parser::parse_rational;
use crate::qp::{InteriorPoint, SolveReport, SolveStatus, Tolerances};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauSchedule {
    /// `τ ← τ + max_s p̂_s`.
    Additive,
    /// `τ ← factor·τ`.
    Multiplicative(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CcpConfig {
    /// Initial penalty weight; `None` picks 0.05 for reachability and 5 for
    /// expected cost.
    pub tau0: Option<f64>,
    pub tau_max: f64,
    pub schedule: TauSchedule,
    pub eps_graph: Rational,
    pub max_iters: usize,
    pub penalty_tol: f64,
    pub restarts: usize,
    pub split: SplitMethod,
    pub mc_tol: f64,
    /// Re-anchor state values at model-checked values instead of the
    /// solver's.
    pub mc_feedback: bool,
    /// Refresh the program in place and warm-start the solver; otherwise
    /// rebuild and cold-start every iteration.
    pub incremental: bool,
    /// End an attempt after this many iterations without a 0.01% drop of the
    /// best penalty; 0 disables.
    pub stall_window: usize,
    pub seed: u64,
    pub solver: Tolerances,
}

impl Default for CcpConfig {
    fn default() -> Self {
        Self {
            tau0: None,
            tau_max: 1e4,
            schedule: TauSchedule::Additive,
            eps_graph: rational(1, 100_000),
            max_iters: 100,
            penalty_tol: 1e-8,
            restarts: 3,
            split: SplitMethod::Bilinear,
            mc_tol: DEFAULT_TOL,
            mc_feedback: true,
            incremental: true,
            stall_window: 25,
            seed: 0,
            solver: Tolerances::default(),
        }
    }
}

impl CcpConfig {
    pub fn tau0_for(&self, spec: &Specification) -> f64 {
        self.tau0.unwrap_or(match spec.kind {
            SpecKind::ReachProbability => 0.05,
            SpecKind::ExpectedCost => 5.0,
        })
    }

    fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |m: &str| Err(SynthesisError::Config(m.to_string()));
        if self.tau0.is_some_and(|t| !(t > 0.0)) {
            return bad("tau0 must be positive");
        }
        if self.tau0.is_some_and(|t| self.tau_max < t) || !(self.tau_max > 0.0) {
            return bad("tau_max must be at least tau0");
        }
        if self.eps_graph <= Rational::from_integer(0.into()) {
            return bad("eps_graph must be positive");
        }
        if let TauSchedule::Multiplicative(f) = self.schedule {
            if !(f > 1.0) {
                return bad("multiplicative schedule needs a factor above 1");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthesisStatus {
    Feasible,
    Exhausted,
    InfeasibleInstance,
}

impl fmt::Display for SynthesisStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisStatus::Feasible => "feasible",
            SynthesisStatus::Exhausted => "exhausted",
            SynthesisStatus::InfeasibleInstance => "infeasible-instance",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    pub status: SynthesisStatus,
    /// The certified valuation when feasible, otherwise the best candidate
    /// seen (if any was well defined).
    pub instantiation: Option<Instantiation>,
    /// `instantiation` as floats, in parameter order.
    pub values: Option<Vec<f64>>,
    /// Exactly solved value at the initial state for a feasible result, the
    /// iterative value of the best candidate otherwise.
    pub value: Option<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub solver_time: Duration,
    pub encode_time: Duration,
    pub total_time: Duration,
}

impl SynthesisResult {
    pub fn solver_fraction(&self) -> f64 {
        let total = self.total_time.as_secs_f64();
        if total > 0.0 {
            self.solver_time.as_secs_f64() / total
        } else {
            0.0
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthesisError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Check(#[from] McError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    NotSupported(String),
}

/// One line of the progress stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Progress {
    pub restart: usize,
    pub iteration: usize,
    pub tau: f64,
    pub penalty: f64,
    /// Model-checked value at the initial state, `NaN` if the candidate was
    /// not well defined.
    pub value: f64,
    pub note: Option<&'static str>,
}

impl fmt::Display for Progress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "restart={} iter={} tau={:.6e} penalty={:.6e} value={:.9}",
            self.restart, self.iteration, self.tau, self.penalty, self.value
        )?;
        if let Some(n) = self.note {
            write!(f, " note={n}")?;
        }
        Ok(())
    }
}

/// Picks the decimal closest to `x` inside `b` whose float rendering reads
/// back to the same rational, so a valuation file reproduces the exact
/// value that was checked.
pub fn snap_to_box(x: f64, b: &Interval) -> (f64, Rational) {
    let mut f = x;
    if let Some(lo) = &b.lo {
        f = f.max(to_f64(lo));
    }
    if let Some(hi) = &b.hi {
        f = f.min(to_f64(hi));
    }
    for _ in 0..64 {
        let r = parse_rational(&f.to_string()).expect("float rendering parses");
        if b.lo.as_ref().is_some_and(|lo| &r < lo) {
            f = f.next_up();
        } else if b.hi.as_ref().is_some_and(|hi| &r > hi) {
            f = f.next_down();
        } else {
            return (f, r);
        }
    }
    unreachable!("box narrower than a few ulps")
}

fn instantiation_of(values: &[Rational]) -> Instantiation {
    let mut u = Instantiation::new();
    for (i, v) in values.iter().enumerate() {
        u.insert(ParamId(i), v.clone());
    }
    u
}

/// Builds the program for one iteration from scratch.
struct Encoding {
    nlp: Nlp,
    dc: DcProblem,
}

fn encode(m: &Pmdp, spec: &Specification, a: &GraphAnalysis, cfg: &CcpConfig) -> Result<Encoding, SynthesisError> {
    let nlp = build_nlp(m, spec, a, &cfg.eps_graph)?;
    let dc = dc_split(&nlp_to_qcqp(&nlp), cfg.split);
    Ok(Encoding { nlp, dc })
}

struct Candidate {
    values: Vec<f64>,
    exact: Vec<Rational>,
    value: f64,
}

/// Outcome of checking one parameter point.
enum Checked {
    Certified(f64),
    Fails(Vec<f64>),
    IllDefined,
}

struct Checker<'a> {
    m: &'a Pmdp,
    spec: &'a Specification,
    eps: &'a Rational,
    inst: InstantiatedMdp,
    mc_tol: f64,
}

impl Checker<'_> {
    /// Fast check; if it passes (or `force`), the exact certification. A
    /// fast pass that fails certification counts as a failure.
    fn run(&mut self, exact: &[Rational], values: &[f64], force: bool) -> Result<(Checked, f64), SynthesisError> {
        let u = instantiation_of(exact);
        if !check_well_defined(self.m, &u, self.eps)?.is_well_defined() {
            return Ok((Checked::IllDefined, f64::NAN));
        }
        self.inst.set_valuation(values);
        let mdp = self.inst.matrix();
        let fast = match evaluate(mdp, self.spec, self.mc_tol, false) {
            Ok(r) => r,
            Err(McError::InfiniteCost(_)) => return Ok((Checked::Fails(Vec::new()), f64::INFINITY)),
            Err(e) => return Err(e.into()),
        };
        let value = fast.value(mdp.initial);
        if force || self.spec.holds_for(value, 0.0) {
            let exact = evaluate(mdp, self.spec, self.mc_tol, true)?;
            let v = exact.value(mdp.initial);
            if self.spec.holds_for(v, HOLDS_SLACK) {
                return Ok((Checked::Certified(v), v));
            }
        }
        Ok((Checked::Fails(fast.values), value))
    }
}

fn better(spec: &Specification, a: f64, b: f64) -> bool {
    match spec.direction {
        crate::model::Direction::AtMost => a < b,
        crate::model::Direction::AtLeast => a > b,
    }
}

/// Runs the procedure with default progress handling (none).
pub fn synthesize(m: &Pmdp, spec: &Specification, cfg: &CcpConfig) -> Result<SynthesisResult, SynthesisError> {
    synthesize_with_progress(m, spec, cfg, &mut |_| {})
}

pub fn synthesize_with_progress(
    m: &Pmdp,
    spec: &Specification,
    cfg: &CcpConfig,
    progress: &mut dyn FnMut(&Progress),
) -> Result<SynthesisResult, SynthesisError> {
    cfg.validate()?;
    let start = Instant::now();
    let analysis = analyze(m, spec)?;
    let t0 = Instant::now();
    let mut enc = encode(m, spec, &analysis, cfg)?;
    let mut encode_time = t0.elapsed();
    let mut solver_time = Duration::ZERO;
    let param_box = enc.nlp.param_box.clone();
    let nv = m.num_params();
    let mut checker = Checker {
        m,
        spec,
        eps: &cfg.eps_graph,
        inst: InstantiatedMdp::of_pmdp(m),
        mc_tol: cfg.mc_tol,
    };
    let base_anchor = initial_anchor(&enc.nlp);
    let snap_all = |x: &[f64]| -> (Vec<f64>, Vec<Rational>) {
        (0..nv).map(|i| snap_to_box(x[i], &param_box[i])).unzip()
    };

    let finish = |status, cand: Option<Candidate>, iterations, restarts, solver_time, encode_time| {
        let (instantiation, values, value) = match cand {
            Some(c) => (Some(instantiation_of(&c.exact)), Some(c.values), Some(c.value)),
            None => (None, None, None),
        };
        SynthesisResult {
            status,
            instantiation,
            values,
            value,
            iterations,
            restarts,
            solver_time,
            encode_time,
            total_time: start.elapsed(),
        }
    };

    // the graph alone decides the initial value: no parameter can matter
    if let InitialValue::Fixed(_) = enc.nlp.initial {
        let (values, exact) = snap_all(&base_anchor);
        let (checked, value) = checker.run(&exact, &values, true)?;
        let status = match checked {
            Checked::Certified(_) => SynthesisStatus::Feasible,
            _ => SynthesisStatus::InfeasibleInstance,
        };
        let cand = Candidate { values, exact, value };
        return Ok(finish(status, Some(cand), 0, 0, solver_time, encode_time));
    }

    let tau0 = cfg.tau0_for(spec);
    let tau_max = cfg.tau_max.max(tau0);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut iterations = 0;
    let mut best: Option<Candidate> = None;
    let space = enc.nlp.space.clone();
    let free: Vec<usize> = (nv..space.len()).collect();

    for restart in 0..=cfg.restarts {
        let mut anchor = base_anchor.clone();
        if restart > 0 {
            for (i, b) in param_box.iter().enumerate() {
                let (lo, hi) = (b.lo_f64(), b.hi_f64());
                let r = 0.25 * (hi - lo);
                anchor[i] = (anchor[i] + rng.random_range(-r..=r)).clamp(lo, hi);
            }
        }
        let mut tau = tau0;
        let mut solver = InteriorPoint::new(cfg.solver);
        let mut prog: Option<ConvexifiedProgram> = None;
        let mut warm: Option<SolveReport> = None;
        let mut best_penalty = f64::INFINITY;
        let mut since_improvement = 0;

        for it in 0..cfg.max_iters {
            iterations += 1;
            let t = Instant::now();
            match (&mut prog, cfg.incremental) {
                (Some(p), true) => p.refresh(&anchor, tau),
                (_, true) => prog = Some(convexify(&enc.dc, &anchor, tau)),
                (_, false) => {
                    enc = encode(m, spec, &analysis, cfg)?;
                    prog = Some(convexify(&enc.dc, &anchor, tau));
                    solver = InteriorPoint::new(cfg.solver);
                }
            }
            encode_time += t.elapsed();
            let p = prog.as_ref().expect("program built");
            let t = Instant::now();
            let rep = solver.solve(&p.program, if cfg.incremental { warm.as_ref() } else { None });
            solver_time += t.elapsed();
            if matches!(rep.status, SolveStatus::NumericalFailure | SolveStatus::Infeasible)
                || rep.x.iter().any(|v| !v.is_finite())
            {
                progress(&Progress {
                    restart,
                    iteration: it,
                    tau,
                    penalty: f64::NAN,
                    value: f64::NAN,
                    note: Some("solver-failure"),
                });
                break;
            }
            let penalty = p.penalty_sum(&rep.x);
            let (values, exact) = snap_all(&rep.x);
            let zero_penalty = penalty <= cfg.penalty_tol;
            let (checked, value) = checker.run(&exact, &values, zero_penalty)?;
            let mut note = None;
            let mc_values = match checked {
                Checked::Certified(v) => {
                    progress(&Progress {
                        restart,
                        iteration: it,
                        tau,
                        penalty,
                        value: v,
                        note: Some("certified"),
                    });
                    let cand = Candidate { values, exact, value: v };
                    return Ok(finish(SynthesisStatus::Feasible, Some(cand), iterations, restart, solver_time, encode_time));
                }
                Checked::Fails(v) => {
                    if zero_penalty {
                        note = Some("spurious");
                    }
                    if best.as_ref().is_none_or(|b| better(spec, value, b.value)) {
                        best = Some(Candidate {
                            values: values.clone(),
                            exact: exact.clone(),
                            value,
                        });
                    }
                    Some(v)
                }
                Checked::IllDefined => {
                    note = Some("ill-defined");
                    None
                }
            };
            progress(&Progress {
                restart,
                iteration: it,
                tau,
                penalty,
                value,
                note,
            });

            // next anchor
            anchor[..nv].copy_from_slice(&values);
            let mut top = 0.0f64;
            for &j in &free {
                let var = &space.vars[j];
                let crate::encode::VarKind::State(s) = var.kind else { continue };
                let raw = match &mc_values {
                    Some(v) if cfg.mc_feedback && !v.is_empty() => v[s.0],
                    _ => rep.x[j],
                };
                let clamped = if raw.is_finite() { raw.clamp(var.lower, var.upper) } else { var.upper };
                anchor[j] = if clamped.is_finite() { clamped } else { rep.x[j] };
                if !m.is_target(s) {
                    top = top.max(anchor[j]);
                }
            }
            tau = match cfg.schedule {
                TauSchedule::Additive => (tau + top).min(tau_max),
                TauSchedule::Multiplicative(f) => (tau * f).min(tau_max),
            };
            warm = Some(rep);

            if penalty < best_penalty * (1.0 - 1e-4) {
                best_penalty = penalty;
                since_improvement = 0;
            } else {
                since_improvement += 1;
                if cfg.stall_window > 0 && since_improvement >= cfg.stall_window {
                    break;
                }
            }
        }
    }
    Ok(finish(SynthesisStatus::Exhausted, best, iterations, cfg.restarts, solver_time, encode_time))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{SIMPLEX_PMDP, SINGLE_PARAM_CHAIN};
    use crate::mc::check;
    use crate::parser::{parse_model, parse_spec};

    fn run(model: &str, spec: &str, cfg: &CcpConfig) -> (Pmdp, Specification, SynthesisResult) {
        let m = parse_model(model).unwrap();
        let s = parse_spec(spec).unwrap();
        let r = synthesize(&m, &s, cfg).unwrap();
        (m, s, r)
    }

    fn certified(m: &Pmdp, s: &Specification, r: &SynthesisResult) {
        assert_eq!(r.status, SynthesisStatus::Feasible);
        let u = r.instantiation.as_ref().unwrap();
        let out = check(m, u, s, &rational(1, 100_000)).unwrap();
        assert!(out.holds, "value {}", out.value);
    }

    #[test]
    fn chain_at_most() {
        let (m, s, r) = run(SINGLE_PARAM_CHAIN, "P<=0.3", &CcpConfig::default());
        certified(&m, &s, &r);
        assert!(r.iterations <= 20);
        let v = r.values.as_ref().unwrap()[0];
        assert!(v * v * (1.0 - v) <= 0.3 + 1e-6);
    }

    #[test]
    fn chain_tight_at_most() {
        let (m, s, r) = run(SINGLE_PARAM_CHAIN, "P<=0.01", &CcpConfig::default());
        certified(&m, &s, &r);
    }

    #[test]
    fn chain_at_least() {
        let (m, s, r) = run(SINGLE_PARAM_CHAIN, "P>=0.14", &CcpConfig::default());
        certified(&m, &s, &r);
        let v = r.values.as_ref().unwrap()[0];
        assert!(v * v * (1.0 - v) >= 0.14 - 1e-6);
    }

    #[test]
    fn chain_above_the_maximum_is_exhausted() {
        let (_, _, r) = run(SINGLE_PARAM_CHAIN, "P>=0.2", &CcpConfig::default());
        assert_eq!(r.status, SynthesisStatus::Exhausted);
        // best candidate sits near the maximiser 2/3
        let v = r.values.unwrap()[0];
        assert!((v - 2.0 / 3.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn threshold_one_needs_one_iteration() {
        let (m, s, r) = run(SINGLE_PARAM_CHAIN, "P<=1", &CcpConfig::default());
        certified(&m, &s, &r);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn without_feedback_still_certified() {
        let cfg = CcpConfig {
            mc_feedback: false,
            ..CcpConfig::default()
        };
        let (m, s, r) = run(SINGLE_PARAM_CHAIN, "P<=0.05", &cfg);
        certified(&m, &s, &r);
    }

    #[test]
    fn without_incremental_refresh() {
        let cfg = CcpConfig {
            incremental: false,
            split: SplitMethod::Eigen,
            ..CcpConfig::default()
        };
        let (m, s, r) = run(SINGLE_PARAM_CHAIN, "P<=0.05", &cfg);
        certified(&m, &s, &r);
    }

    #[test]
    fn simplex_region() {
        let (m, s, r) = run(SIMPLEX_PMDP, "P>=0.9", &CcpConfig::default());
        certified(&m, &s, &r);
    }

    #[test]
    fn expected_cost() {
        let text = "@type pmc\n@parameters v\n@initial a\n@targets g\n@costs\na 1\n@transitions\na g v\na a 1 - v\ng g 1\n";
        let (m, s, r) = run(text, "E<=4", &CcpConfig::default());
        certified(&m, &s, &r);
        assert!(r.values.unwrap()[0] >= 0.25 - 1e-9);
        let (m, s, r) = run(text, "E>=4", &CcpConfig::default());
        certified(&m, &s, &r);
    }

    #[test]
    fn graph_fixed_initial_state() {
        let text = "@type pmc\n@parameters v\n@initial a\n@targets t\na t 1\nt t 1\nz z v\nz t 1 - v\n";
        let (_, _, r) = run(text, "P<=0.5", &CcpConfig::default());
        assert_eq!(r.status, SynthesisStatus::InfeasibleInstance);
        let (m, s, r) = run(text, "P>=0.5", &CcpConfig::default());
        certified(&m, &s, &r);
    }

    #[test]
    fn progress_lines() {
        let m = parse_model(SINGLE_PARAM_CHAIN).unwrap();
        let s = parse_spec("P<=0.02").unwrap();
        let mut lines = Vec::new();
        let r = synthesize_with_progress(&m, &s, &CcpConfig::default(), &mut |p| lines.push(p.clone())).unwrap();
        assert_eq!(lines.len(), r.iterations);
        assert!(lines.windows(2).all(|w| w[0].tau <= w[1].tau));
        assert!(lines[0].to_string().starts_with("restart=0 iter=0 tau="));
    }

    #[test]
    fn tau_is_capped() {
        let m = parse_model(SINGLE_PARAM_CHAIN).unwrap();
        let s = parse_spec("P>=0.2").unwrap();
        let cfg = CcpConfig {
            tau_max: 0.5,
            restarts: 0,
            ..CcpConfig::default()
        };
        let mut taus = Vec::new();
        synthesize_with_progress(&m, &s, &cfg, &mut |p| taus.push(p.tau)).unwrap();
        assert!(taus.iter().all(|&t| t <= 0.5));
        assert!(taus.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_bad_config() {
        let m = parse_model(SINGLE_PARAM_CHAIN).unwrap();
        let s = parse_spec("P<=0.3").unwrap();
        let cfg = CcpConfig {
            tau0: Some(-1.0),
            ..CcpConfig::default()
        };
        assert!(matches!(synthesize(&m, &s, &cfg), Err(SynthesisError::Config(_))));
    }

    #[test]
    fn snapping_reads_back() {
        let b = Interval::new(rational(1, 3), rational(2, 3));
        let (f, r) = snap_to_box(0.1, &b);
        assert!(r >= rational(1, 3));
        assert_eq!(parse_rational(&f.to_string()).unwrap(), r);
        let (f, r) = snap_to_box(0.9, &b);
        assert!(r <= rational(2, 3));
        assert_eq!(parse_rational(&f.to_string()).unwrap(), r);
        assert_eq!(snap_to_box(0.5, &b).0, 0.5);
    }
}
