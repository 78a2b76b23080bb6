//! Particle swarm search over the parameter box, a sampling baseline.
//!
//! Fitness is the iterative model-checking value at the initial state
//! against the specification's adversary; a particle whose value meets the
//! threshold is certified exactly before it is reported.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ccp::{snap_to_box, SynthesisError, SynthesisResult, SynthesisStatus};
use crate::mc::{evaluate, InstantiatedMdp, McError, DEFAULT_TOL, HOLDS_SLACK};
use crate::model::{rational, well_definedness_is_universal, Direction, Instantiation, ParamId, Pmdp, Rational, Specification};

#[derive(Clone, Debug, PartialEq)]
pub struct PsoConfig {
    pub particles: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub eps_graph: Rational,
    pub mc_tol: f64,
    /// Worker threads for fitness evaluation; `None` uses the global pool.
    pub jobs: Option<usize>,
    /// Wall-clock budget; results are no longer reproducible when it binds.
    pub time_limit: Option<Duration>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            particles: 40,
            inertia: 0.7298,
            cognitive: 1.49618,
            social: 1.49618,
            max_iters: 500,
            seed: 0,
            eps_graph: rational(1, 100_000),
            mc_tol: DEFAULT_TOL,
            jobs: None,
            time_limit: None,
        }
    }
}

/// Best point found by [`optimize`].
#[derive(Clone, Debug, PartialEq)]
pub struct PsoOptimum {
    pub values: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// `a` is strictly better than `b` for the side of the threshold `spec`
/// wants to be on; NaN is worst.
fn better(dir: Direction, a: f64, b: f64) -> bool {
    if a.is_nan() {
        return false;
    }
    if b.is_nan() {
        return true;
    }
    match dir {
        Direction::AtMost => a < b,
        Direction::AtLeast => a > b,
    }
}

struct Swarm<'a> {
    m: &'a Pmdp,
    spec: &'a Specification,
    cfg: &'a PsoConfig,
    lo: Vec<f64>,
    hi: Vec<f64>,
    pos: Vec<Vec<f64>>,
    vel: Vec<Vec<f64>>,
    best_pos: Vec<Vec<f64>>,
    best_val: Vec<f64>,
    global: usize,
    rng: ChaCha8Rng,
    eval_time: Duration,
}

impl<'a> Swarm<'a> {
    fn new(m: &'a Pmdp, spec: &'a Specification, cfg: &'a PsoConfig) -> Result<Self, SynthesisError> {
        if cfg.particles < 2 || !(cfg.inertia > 0.0 && cfg.cognitive > 0.0 && cfg.social > 0.0) {
            return Err(SynthesisError::Config("swarm needs two particles and positive coefficients".into()));
        }
        let bounds = m.param_box(&cfg.eps_graph);
        let rectangular = bounds.iter().all(|b| b.is_finite()) && well_definedness_is_universal(m, &cfg.eps_graph)?;
        if !rectangular {
            return Err(SynthesisError::NotSupported(
                "the well-defined parameter region is not the full box; the swarm needs a hyper-rectangle".into(),
            ));
        }
        let lo: Vec<f64> = bounds.iter().map(|b| b.lo_f64()).collect();
        let hi: Vec<f64> = bounds.iter().map(|b| b.hi_f64()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let n = lo.len();
        let mut pos = Vec::with_capacity(cfg.particles);
        let mut vel = Vec::with_capacity(cfg.particles);
        for _ in 0..cfg.particles {
            pos.push((0..n).map(|i| rng.random_range(lo[i]..=hi[i])).collect::<Vec<f64>>());
            vel.push(
                (0..n)
                    .map(|i| {
                        let w = 0.5 * (hi[i] - lo[i]);
                        rng.random_range(-w..=w)
                    })
                    .collect::<Vec<f64>>(),
            );
        }
        Ok(Self {
            m,
            spec,
            cfg,
            lo,
            hi,
            best_pos: pos.clone(),
            best_val: vec![f64::NAN; cfg.particles],
            pos,
            vel,
            global: 0,
            rng,
            eval_time: Duration::ZERO,
        })
    }

    fn fitness(&mut self) -> Vec<f64> {
        let t = Instant::now();
        let template = InstantiatedMdp::of_pmdp(self.m).template().clone();
        let (spec, tol) = (self.spec, self.cfg.mc_tol);
        let eval = || -> Vec<f64> {
            self.pos
                .par_iter()
                .map_init(
                    || InstantiatedMdp::new(template.clone()),
                    |inst, x| {
                        inst.set_valuation(x);
                        match evaluate(inst.matrix(), spec, tol, false) {
                            Ok(r) => r.value(inst.matrix().initial),
                            Err(McError::InfiniteCost(_)) => f64::INFINITY,
                            Err(_) => f64::NAN,
                        }
                    },
                )
                .collect()
        };
        let out = match self.cfg.jobs {
            Some(j) => rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map(|pool| pool.install(eval))
                .unwrap_or_else(|_| eval()),
            None => eval(),
        };
        self.eval_time += t.elapsed();
        out
    }

    fn record(&mut self, values: &[f64]) {
        let dir = self.spec.direction;
        for (i, &v) in values.iter().enumerate() {
            if better(dir, v, self.best_val[i]) {
                self.best_val[i] = v;
                self.best_pos[i].clone_from(&self.pos[i]);
            }
        }
        // ties go to the lower index
        for i in 0..values.len() {
            if better(dir, self.best_val[i], self.best_val[self.global]) {
                self.global = i;
            }
        }
    }

    fn step(&mut self) {
        let cfg = self.cfg;
        let g = self.best_pos[self.global].clone();
        for p in 0..self.pos.len() {
            for i in 0..self.lo.len() {
                let (lo, hi) = (self.lo[i], self.hi[i]);
                let w = hi - lo;
                let r1: f64 = self.rng.random();
                let r2: f64 = self.rng.random();
                let x = self.pos[p][i];
                let mut v = cfg.inertia * self.vel[p][i]
                    + cfg.cognitive * r1 * (self.best_pos[p][i] - x)
                    + cfg.social * r2 * (g[i] - x);
                v = v.clamp(-w, w);
                let mut y = x + v;
                if y < lo {
                    y = 2.0 * lo - y;
                    v = -v;
                } else if y > hi {
                    y = 2.0 * hi - y;
                    v = -v;
                }
                self.pos[p][i] = y.clamp(lo, hi);
                self.vel[p][i] = v;
            }
        }
    }

    fn out_of_time(&self, start: Instant) -> bool {
        self.cfg.time_limit.is_some_and(|l| start.elapsed() >= l)
    }

    /// Exact certification of particle `p`, if its snapped valuation meets
    /// the threshold.
    fn certify(&self, p: usize) -> Result<Option<(Vec<f64>, Instantiation, f64)>, SynthesisError> {
        let bounds = self.m.param_box(&self.cfg.eps_graph);
        let mut u = Instantiation::new();
        let mut values = Vec::with_capacity(bounds.len());
        for (i, b) in bounds.iter().enumerate() {
            let (f, r) = snap_to_box(self.pos[p][i], b);
            values.push(f);
            u.insert(ParamId(i), r);
        }
        let mut inst = InstantiatedMdp::of_pmdp(self.m);
        inst.set_valuation(&values);
        let r = evaluate(inst.matrix(), self.spec, self.cfg.mc_tol, true)?;
        let v = r.value(inst.matrix().initial);
        Ok(self.spec.holds_for(v, HOLDS_SLACK).then_some((values, u, v)))
    }
}

/// Searches the box for a valuation meeting `spec`; stops at the first
/// certified particle.
pub fn synthesize_pso(m: &Pmdp, spec: &Specification, cfg: &PsoConfig) -> Result<SynthesisResult, SynthesisError> {
    let start = Instant::now();
    let mut swarm = Swarm::new(m, spec, cfg)?;
    let mut iterations = 0;
    let finish = |status, found: Option<(Vec<f64>, Instantiation, f64)>, iterations, eval_time| SynthesisResult {
        status,
        values: found.as_ref().map(|f| f.0.clone()),
        instantiation: found.as_ref().map(|f| f.1.clone()),
        value: found.map(|f| f.2),
        iterations,
        restarts: 0,
        solver_time: eval_time,
        encode_time: Duration::ZERO,
        total_time: start.elapsed(),
    };
    while iterations < cfg.max_iters && !swarm.out_of_time(start) {
        iterations += 1;
        let values = swarm.fitness();
        swarm.record(&values);
        for (p, &v) in values.iter().enumerate() {
            if spec.holds_for(v, 0.0) {
                if let Some(found) = swarm.certify(p)? {
                    return Ok(finish(SynthesisStatus::Feasible, Some(found), iterations, swarm.eval_time));
                }
            }
        }
        swarm.step();
    }
    let g = swarm.global;
    let best = swarm.best_pos[g].clone();
    let value = swarm.best_val[g];
    let mut u = Instantiation::new();
    let bounds = m.param_box(&cfg.eps_graph);
    let mut values = Vec::with_capacity(best.len());
    for (i, b) in bounds.iter().enumerate() {
        let (f, r) = snap_to_box(best[i], b);
        values.push(f);
        u.insert(ParamId(i), r);
    }
    let found = (!value.is_nan()).then_some((values, u, value));
    Ok(finish(SynthesisStatus::Exhausted, found, iterations, swarm.eval_time))
}

/// Runs the full swarm without stopping at the threshold and returns the
/// best value found: the smallest worst-case value for at-most
/// specifications, the largest for at-least ones.
pub fn optimize(m: &Pmdp, spec: &Specification, cfg: &PsoConfig) -> Result<PsoOptimum, SynthesisError> {
    let start = Instant::now();
    let mut swarm = Swarm::new(m, spec, cfg)?;
    let mut iterations = 0;
    while iterations < cfg.max_iters && !swarm.out_of_time(start) {
        iterations += 1;
        let values = swarm.fitness();
        swarm.record(&values);
        swarm.step();
    }
    Ok(PsoOptimum {
        values: swarm.best_pos[swarm.global].clone(),
        value: swarm.best_val[swarm.global],
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{SIMPLEX_PMDP, SINGLE_PARAM_CHAIN};
    use crate::mc::check;
    use crate::parser::{parse_model, parse_spec};

    fn chain() -> Pmdp {
        parse_model(SINGLE_PARAM_CHAIN).unwrap()
    }

    #[test]
    fn chain_feasible() {
        let m = chain();
        let s = parse_spec("P<=0.3").unwrap();
        let r = synthesize_pso(&m, &s, &PsoConfig::default()).unwrap();
        assert_eq!(r.status, SynthesisStatus::Feasible);
        let out = check(&m, r.instantiation.as_ref().unwrap(), &s, &rational(1, 100_000)).unwrap();
        assert!(out.holds);
    }

    #[test]
    fn chain_optimum() {
        let m = chain();
        let s = parse_spec("P>=0").unwrap();
        let cfg = PsoConfig {
            max_iters: 100,
            ..PsoConfig::default()
        };
        let best = optimize(&m, &s, &cfg).unwrap();
        assert!((best.value - 4.0 / 27.0).abs() < 1e-6, "{}", best.value);
        assert!((best.values[0] - 2.0 / 3.0).abs() < 1e-2);
    }

    #[test]
    fn unreachable_threshold_is_exhausted() {
        let m = chain();
        let s = parse_spec("P>=0.2").unwrap();
        let cfg = PsoConfig {
            max_iters: 30,
            ..PsoConfig::default()
        };
        let r = synthesize_pso(&m, &s, &cfg).unwrap();
        assert_eq!(r.status, SynthesisStatus::Exhausted);
        assert!(r.value.unwrap() <= 4.0 / 27.0 + 1e-9);
    }

    #[test]
    fn simplex_is_not_supported() {
        let m = parse_model(SIMPLEX_PMDP).unwrap();
        let s = parse_spec("P>=0.5").unwrap();
        assert!(matches!(
            synthesize_pso(&m, &s, &PsoConfig::default()),
            Err(SynthesisError::NotSupported(_))
        ));
    }

    #[test]
    fn deterministic_per_seed_and_jobs() {
        let m = crate::gen::grid(3, 4, 1);
        let s = parse_spec("P>=0.99").unwrap();
        let cfg = PsoConfig {
            max_iters: 15,
            seed: 7,
            ..PsoConfig::default()
        };
        let a = synthesize_pso(&m, &s, &cfg).unwrap();
        let b = synthesize_pso(&m, &s, &PsoConfig { jobs: Some(1), ..cfg.clone() }).unwrap();
        assert_eq!((a.status, &a.values, a.value, a.iterations), (b.status, &b.values, b.value, b.iterations));
    }

    #[test]
    fn particles_stay_in_the_box() {
        let m = crate::gen::chain(6, 3);
        let s = parse_spec("P>=0.5").unwrap();
        let cfg = PsoConfig {
            inertia: 2.0,
            ..PsoConfig::default()
        };
        let mut swarm = Swarm::new(&m, &s, &cfg).unwrap();
        for _ in 0..50 {
            let v = swarm.fitness();
            swarm.record(&v);
            swarm.step();
            for p in &swarm.pos {
                for (i, &x) in p.iter().enumerate() {
                    assert!(swarm.lo[i] <= x && x <= swarm.hi[i]);
                }
            }
        }
    }
}
