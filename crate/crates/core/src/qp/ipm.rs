//! Infeasible-start primal-dual interior-point method with Mehrotra
//! predictor-corrector steps and a filter-style line search.
//!
//! Every constraint (bounds included) becomes `f_i(x) + s_i = 0` with
//! `s, z > 0`. The Newton system is reduced to the primal block
//! `(Σ z_i ∇²f_i + Σ (z_i/s_i) ∇f_i ∇f_iᵀ) dx = rhs`, whose sparsity is the
//! union of the per-constraint variable cliques. That pattern and its
//! symbolic Cholesky factorization are computed once per program structure
//! and reused across solves.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{Conj, Mat, Side};

use super::{ConvexProgram, ConvexSolver, SolveReport, SolveStatus, Tolerances};

const STEP_FRACTION: f64 = 0.99;
const MAX_BACKTRACKS: usize = 30;
const MAX_RESTARTS: usize = 2;

struct Row {
    vars: Vec<usize>,
    /// Value slot of each local pair `a <= b`, see [`pair_index`].
    slots: Vec<usize>,
    quad_local: Vec<(usize, usize)>,
    linear_local: Vec<usize>,
}

#[inline]
fn pair_index(a: usize, b: usize, k: usize) -> usize {
    a * k - a * (a + 1) / 2 + b
}

struct Bound {
    var: usize,
    upper: bool,
}

struct Structure {
    shape: Vec<(Vec<(usize, usize)>, Vec<usize>)>,
    finite: Vec<(bool, bool)>,
    n: usize,
    rows: Vec<Row>,
    bounds: Vec<Bound>,
    diag: Vec<usize>,
    symbolic: SymbolicSparseColMat<usize>,
    llt: SymbolicLlt<usize>,
}

fn shape_of(prog: &ConvexProgram) -> Vec<(Vec<(usize, usize)>, Vec<usize>)> {
    prog.constraints
        .iter()
        .map(|c| {
            (
                c.quad.iter().map(|&(i, j, _)| (i, j)).collect(),
                c.linear.iter().map(|&(i, _)| i).collect(),
            )
        })
        .collect()
}

fn finiteness(prog: &ConvexProgram) -> Vec<(bool, bool)> {
    (0..prog.num_vars())
        .map(|j| (prog.lower[j].is_finite(), prog.upper[j].is_finite()))
        .collect()
}

impl Structure {
    fn new(prog: &ConvexProgram) -> Result<Self, String> {
        let n = prog.num_vars();
        let mut cells: Vec<(usize, usize)> = (0..n).map(|j| (j, j)).collect();
        let mut vars_per_row = Vec::with_capacity(prog.constraints.len());
        for c in &prog.constraints {
            let mut vars: Vec<usize> = c
                .quad
                .iter()
                .flat_map(|&(i, j, _)| [i, j])
                .chain(c.linear.iter().map(|&(i, _)| i))
                .collect();
            vars.sort_unstable();
            vars.dedup();
            for (a, &va) in vars.iter().enumerate() {
                for &vb in &vars[a..] {
                    cells.push((vb, va));
                }
            }
            vars_per_row.push(vars);
        }
        // column-major, upper triangle: (col, row) with row <= col
        cells.sort_unstable();
        cells.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(cells.len());
        for &(c, r) in &cells {
            col_ptr[c + 1] += 1;
            row_idx.push(r);
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let slot = |r: usize, c: usize| -> usize {
            let (lo, hi) = (r.min(c), r.max(c));
            let start = col_ptr[hi];
            start + row_idx[start..col_ptr[hi + 1]].binary_search(&lo).expect("cell in pattern")
        };
        let diag = (0..n).map(|j| slot(j, j)).collect();
        let rows = prog
            .constraints
            .iter()
            .zip(vars_per_row)
            .map(|(c, vars)| {
                let k = vars.len();
                let mut slots = Vec::with_capacity(k * (k + 1) / 2);
                for a in 0..k {
                    for b in a..k {
                        slots.push(slot(vars[a], vars[b]));
                    }
                }
                let local = |v: usize| vars.binary_search(&v).expect("variable of row");
                Row {
                    quad_local: c.quad.iter().map(|&(i, j, _)| (local(i), local(j))).collect(),
                    linear_local: c.linear.iter().map(|&(i, _)| local(i)).collect(),
                    slots,
                    vars,
                }
            })
            .collect();
        let mut bounds = Vec::new();
        for j in 0..n {
            if prog.lower[j].is_finite() {
                bounds.push(Bound { var: j, upper: false });
            }
            if prog.upper[j].is_finite() {
                bounds.push(Bound { var: j, upper: true });
            }
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let llt = SymbolicLlt::try_new(symbolic.as_ref(), Side::Upper).map_err(|e| format!("{e:?}"))?;
        Ok(Self {
            shape: shape_of(prog),
            finite: finiteness(prog),
            n,
            rows,
            bounds,
            diag,
            symbolic,
            llt,
        })
    }

    fn matches(&self, prog: &ConvexProgram) -> bool {
        self.n == prog.num_vars() && self.finite == finiteness(prog) && self.shape == shape_of(prog)
    }
}

/// Interior-point solver. Caches the KKT pattern and its symbolic
/// factorization for as long as successive programs share a structure.
pub struct InteriorPoint {
    pub tolerances: Tolerances,
    structure: Option<Structure>,
    symbolic_builds: usize,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self::new(Tolerances::default())
    }
}

impl ConvexSolver for InteriorPoint {
    fn solve(&mut self, prog: &ConvexProgram, warm: Option<&SolveReport>) -> SolveReport {
        InteriorPoint::solve(self, prog, warm)
    }
}

struct Point {
    x: Vec<f64>,
    s: Vec<f64>,
    z: Vec<f64>,
}

/// Scaled row values and local gradients at some `x`.
struct Eval {
    f: Vec<f64>,
    grads: Vec<Vec<f64>>,
    /// Sum of the absolute values of the terms of each row, the scale at
    /// which its residual is judged.
    mag: Vec<f64>,
}

struct Residuals {
    rd: Vec<f64>,
    rp: Vec<f64>,
    rd_norm: f64,
    rp_norm: f64,
    /// Residuals relative to the size of the terms they balance.
    rd_rel: f64,
    rp_rel: f64,
    mu: f64,
}

impl InteriorPoint {
    pub fn new(tolerances: Tolerances) -> Self {
        Self {
            tolerances,
            structure: None,
            symbolic_builds: 0,
        }
    }

    /// Number of symbolic factorizations performed so far.
    pub fn symbolic_builds(&self) -> usize {
        self.symbolic_builds
    }

    pub fn solve(&mut self, prog: &ConvexProgram, warm: Option<&SolveReport>) -> SolveReport {
        if !self.structure.as_ref().is_some_and(|s| s.matches(prog)) {
            match Structure::new(prog) {
                Ok(s) => {
                    self.structure = Some(s);
                    self.symbolic_builds += 1;
                }
                Err(_) => return failure(prog),
            }
        }
        let st = self.structure.as_ref().expect("structure built");
        let scale: Vec<f64> = prog.constraints.iter().map(|c| c.largest_coefficient().max(1.0)).collect();
        let total_rows = st.rows.len() + st.bounds.len();
        let warm = warm.filter(|w| w.x.len() == st.n && w.duals.len() == total_rows);

        let mut iterations = 0;
        let mut last = None;
        for attempt in 0..=MAX_RESTARTS {
            let start = match (attempt, warm) {
                (0, Some(w)) => warm_point(st, prog, &scale, w),
                (0, None) | (1, Some(_)) => cold_point(st, prog, &scale, 0.0),
                _ => cold_point(st, prog, &scale, 1e-2 * attempt as f64),
            };
            let mut report = run(st, prog, &scale, start, &self.tolerances);
            iterations += report.iterations;
            report.iterations = iterations;
            if report.status != SolveStatus::NumericalFailure {
                return report;
            }
            last = Some(report);
        }
        last.expect("at least one attempt")
    }
}

fn failure(prog: &ConvexProgram) -> SolveReport {
    SolveReport {
        status: SolveStatus::NumericalFailure,
        x: vec![0.0; prog.num_vars()],
        duals: Vec::new(),
        objective: f64::NAN,
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
        gap: f64::INFINITY,
    }
}

fn interior(prog: &ConvexProgram, j: usize, x: f64, margin: f64) -> f64 {
    let (lo, hi) = (prog.lower[j], prog.upper[j]);
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let w = (hi - lo).max(0.0);
            let pad = (margin * w).max(1e-12).min(0.5 * w);
            x.clamp(lo + pad, hi - pad)
        }
        (true, false) => x.max(lo + margin.max(1e-8)),
        (false, true) => x.min(hi - margin.max(1e-8)),
        (false, false) => x,
    }
}

fn cold_point(st: &Structure, prog: &ConvexProgram, scale: &[f64], jitter: f64) -> Point {
    let x: Vec<f64> = (0..st.n)
        .map(|j| {
            let (lo, hi) = (prog.lower[j], prog.upper[j]);
            let guess = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (true, false) => lo + 1.0,
                (false, true) => hi - 1.0,
                (false, false) => 0.0,
            };
            // deterministic spread for restarts
            let wiggle = jitter * (((j * 7919) % 13) as f64 / 6.0 - 1.0);
            interior(prog, j, guess + wiggle, 0.25)
        })
        .collect();
    let e = evaluate(st, prog, scale, &x);
    let s: Vec<f64> = e.f.iter().map(|&f| (-f).max(1.0)).collect();
    let z = vec![1.0; s.len()];
    Point { x, s, z }
}

fn warm_point(st: &Structure, prog: &ConvexProgram, scale: &[f64], w: &SolveReport) -> Point {
    let x: Vec<f64> = (0..st.n).map(|j| interior(prog, j, w.x[j], 1e-4)).collect();
    let e = evaluate(st, prog, scale, &x);
    // A generous floor recentres the previous optimum, which sits on the
    // boundary of the old program and far from the new central path.
    const FLOOR: f64 = 1.0;
    let s: Vec<f64> = e.f.iter().map(|&f| (-f).max(FLOOR)).collect();
    let z: Vec<f64> = w.duals.iter().map(|&z| z.max(FLOOR)).collect();
    Point { x, s, z }
}

fn evaluate(st: &Structure, prog: &ConvexProgram, scale: &[f64], x: &[f64]) -> Eval {
    let mut f = Vec::with_capacity(st.rows.len() + st.bounds.len());
    let mut mag = Vec::with_capacity(st.rows.len() + st.bounds.len());
    let mut grads = Vec::with_capacity(st.rows.len());
    for (i, (row, c)) in st.rows.iter().zip(&prog.constraints).enumerate() {
        let mut g = vec![0.0; row.vars.len()];
        let mut v = c.constant;
        let mut m = c.constant.abs();
        for (&(a, b), &(i0, j0, p)) in row.quad_local.iter().zip(&c.quad) {
            let t = if a == b {
                g[a] += 2.0 * p * x[i0];
                p * x[i0] * x[i0]
            } else {
                g[a] += 2.0 * p * x[j0];
                g[b] += 2.0 * p * x[i0];
                2.0 * p * x[i0] * x[j0]
            };
            v += t;
            m += t.abs();
        }
        for (&a, &(j, q)) in row.linear_local.iter().zip(&c.linear) {
            v += q * x[j];
            m += (q * x[j]).abs();
            g[a] += q;
        }
        let inv = 1.0 / scale[i];
        g.iter_mut().for_each(|x| *x *= inv);
        f.push(v * inv);
        mag.push(m * inv);
        grads.push(g);
    }
    for b in &st.bounds {
        let j = b.var;
        let bound = if b.upper { prog.upper[j] } else { prog.lower[j] };
        f.push(if b.upper { x[j] - bound } else { bound - x[j] });
        mag.push(x[j].abs() + bound.abs());
    }
    Eval { f, grads, mag }
}

fn residuals(st: &Structure, c: &[f64], e: &Eval, p: &Point) -> Residuals {
    let mut rd = c.to_vec();
    let mut rd_mag: Vec<f64> = c.iter().map(|c| c.abs()).collect();
    for (i, row) in st.rows.iter().enumerate() {
        for (a, &v) in row.vars.iter().enumerate() {
            let t = p.z[i] * e.grads[i][a];
            rd[v] += t;
            rd_mag[v] += t.abs();
        }
    }
    let m = st.rows.len();
    for (k, b) in st.bounds.iter().enumerate() {
        let z = p.z[m + k];
        rd[b.var] += if b.upper { z } else { -z };
        rd_mag[b.var] += z;
    }
    let rp: Vec<f64> = e.f.iter().zip(&p.s).map(|(f, s)| f + s).collect();
    let relative = |r: &[f64], mag: &[f64]| r.iter().zip(mag).fold(0.0, |a: f64, (r, m)| a.max(r.abs() / (1.0 + m)));
    let rp_mag: Vec<f64> = e.mag.iter().zip(&p.s).map(|(m, s)| m + s).collect();
    let mu = p.s.iter().zip(&p.z).map(|(s, z)| s * z).sum::<f64>() / p.s.len().max(1) as f64;
    Residuals {
        rd_norm: inf_norm(&rd),
        rp_norm: inf_norm(&rp),
        rd_rel: relative(&rd, &rd_mag),
        rp_rel: relative(&rp, &rp_mag),
        rd,
        rp,
        mu,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn fill_kkt(st: &Structure, prog: &ConvexProgram, scale: &[f64], e: &Eval, p: &Point, delta: f64, val: &mut [f64]) {
    val.iter_mut().for_each(|v| *v = 0.0);
    for (i, (row, c)) in st.rows.iter().zip(&prog.constraints).enumerate() {
        let k = row.vars.len();
        let w = p.z[i] / p.s[i];
        let g = &e.grads[i];
        let mut idx = 0;
        for a in 0..k {
            let wa = w * g[a];
            for b in a..k {
                val[row.slots[idx]] += wa * g[b];
                idx += 1;
            }
        }
        let h = 2.0 * p.z[i] / scale[i];
        for (&(a, b), &(_, _, coef)) in row.quad_local.iter().zip(&c.quad) {
            let (lo, hi) = (a.min(b), a.max(b));
            val[row.slots[pair_index(lo, hi, k)]] += h * coef;
        }
    }
    let m = st.rows.len();
    for (kb, b) in st.bounds.iter().enumerate() {
        val[st.diag[b.var]] += p.z[m + kb] / p.s[m + kb];
    }
    for &d in &st.diag {
        val[d] += delta;
    }
}

/// Row-wise `J dx`.
fn jacobian_times(st: &Structure, e: &Eval, dx: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = st
        .rows
        .iter()
        .zip(&e.grads)
        .map(|(row, g)| row.vars.iter().zip(g).map(|(&v, gv)| gv * dx[v]).sum())
        .collect();
    out.extend(st.bounds.iter().map(|b| if b.upper { dx[b.var] } else { -dx[b.var] }));
    out
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dz: Vec<f64>,
}

/// Solves the reduced Newton system for complementarity residual `rc`.
fn direction(st: &Structure, llt: &Llt<usize, f64>, e: &Eval, p: &Point, r: &Residuals, rc: &[f64]) -> Direction {
    let m = st.rows.len();
    let mut rhs = Mat::<f64>::from_fn(st.n, 1, |j, _| -r.rd[j]);
    for (i, row) in st.rows.iter().enumerate() {
        let t = (p.z[i] * r.rp[i] - rc[i]) / p.s[i];
        for (a, &v) in row.vars.iter().enumerate() {
            rhs[(v, 0)] -= e.grads[i][a] * t;
        }
    }
    for (kb, b) in st.bounds.iter().enumerate() {
        let i = m + kb;
        let t = (p.z[i] * r.rp[i] - rc[i]) / p.s[i];
        rhs[(b.var, 0)] -= if b.upper { t } else { -t };
    }
    llt.solve_in_place_with_conj(Conj::No, rhs.as_mut());
    let dx: Vec<f64> = (0..st.n).map(|j| rhs[(j, 0)]).collect();
    let jdx = jacobian_times(st, e, &dx);
    let ds: Vec<f64> = r.rp.iter().zip(&jdx).map(|(rp, j)| -rp - j).collect();
    let dz: Vec<f64> = (0..ds.len()).map(|i| (-rc[i] - p.z[i] * ds[i]) / p.s[i]).collect();
    Direction { dx, ds, dz }
}

fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

fn run(st: &Structure, prog: &ConvexProgram, scale: &[f64], mut p: Point, tol: &Tolerances) -> SolveReport {
    let mut c = vec![0.0; st.n];
    for &(j, v) in &prog.objective {
        c[j] += v;
    }
    let total = p.s.len().max(1) as f64;
    let mut values = vec![0.0; st.symbolic.row_idx().len()];
    let mut e = evaluate(st, prog, scale, &p.x);
    let mut r = residuals(st, &c, &e, &p);
    let mut mu;
    // residual budget for steps that only improve the objective
    let theta_max = 1e4 * (1.0 + r.rp.iter().map(|v| v.abs()).sum::<f64>());
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;

    let barrier = |x: &[f64], s: &[f64], mu: f64| -> f64 {
        let obj: f64 = c.iter().zip(x).map(|(c, x)| c * x).sum();
        let logs: f64 = s.iter().map(|s| s.ln()).sum();
        obj - mu * logs
    };

    while iterations < tol.max_iterations {
        let violation = e.f.iter().zip(&e.mag).fold(0.0, |a: f64, (f, m)| a.max(f.max(0.0) / (1.0 + m)));
        let objective = prog.objective_value(&p.x);
        if r.rp_rel <= tol.feasibility
            && violation <= tol.feasibility
            && r.rd_rel <= tol.feasibility
            && r.mu * total <= tol.gap * (1.0 + objective.abs())
        {
            status = SolveStatus::Optimal;
            break;
        }
        iterations += 1;

        let mut delta = 1e-10;
        let llt = loop {
            fill_kkt(st, prog, scale, &e, &p, delta, &mut values);
            let mat = SparseColMatRef::new(st.symbolic.as_ref(), &values);
            match Llt::try_new_with_symbolic(st.llt.clone(), mat, Side::Upper) {
                Ok(l) => break Some(l),
                Err(_) if delta < 1e-2 => delta *= 100.0,
                Err(_) => break None,
            }
        };
        let Some(llt) = llt else {
            status = SolveStatus::NumericalFailure;
            break;
        };

        // predictor: pure Newton step towards complementarity
        let rc_aff: Vec<f64> = p.s.iter().zip(&p.z).map(|(s, z)| s * z).collect();
        let aff = direction(st, &llt, &e, &p, &r, &rc_aff);
        let ap = max_step(&p.s, &aff.ds).min(1.0);
        let ad = max_step(&p.z, &aff.dz).min(1.0);
        let mu_aff = p
            .s
            .iter()
            .zip(&aff.ds)
            .zip(p.z.iter().zip(&aff.dz))
            .map(|((s, ds), (z, dz))| (s + ap * ds) * (z + ad * dz))
            .sum::<f64>()
            / total;
        let sigma = (mu_aff / r.mu).clamp(0.0, 1.0).powi(3);
        let floor = 0.1 * tol.gap.min(tol.feasibility) / total;
        mu = (sigma * r.mu).max(floor);

        // corrector
        let rc: Vec<f64> = (0..p.s.len())
            .map(|i| p.s[i] * p.z[i] + aff.ds[i] * aff.dz[i] - mu)
            .collect();
        let d = direction(st, &llt, &e, &p, &r, &rc);
        if d.dx.iter().chain(&d.ds).chain(&d.dz).any(|v| !v.is_finite()) {
            status = SolveStatus::NumericalFailure;
            break;
        }
        let fraction = STEP_FRACTION.max(1.0 - r.mu);
        let alpha_s = (fraction * max_step(&p.s, &d.ds)).min(1.0);
        let alpha_z = (fraction * max_step(&p.z, &d.dz)).min(1.0);

        // Step acceptance in the spirit of a filter: a step is taken if it
        // shrinks the slack-equation residual or, without letting that
        // residual grow past its budget, decreases the barrier objective.
        // An exact-penalty merit would need a weight that explodes once the
        // residual is tiny, and then only accepts vanishing steps.
        let theta0: f64 = r.rp.iter().map(|v| v.abs()).sum();
        let slope = c.iter().zip(&d.dx).map(|(c, dx)| c * dx).sum::<f64>()
            - mu * p.s.iter().zip(&d.ds).map(|(s, ds)| ds / s).sum::<f64>();
        let phi0 = barrier(&p.x, &p.s, mu);
        let mut alpha = alpha_s;
        let mut trial = None;
        for _ in 0..MAX_BACKTRACKS {
            let x: Vec<f64> = p.x.iter().zip(&d.dx).map(|(x, dx)| x + alpha * dx).collect();
            let s: Vec<f64> = p.s.iter().zip(&d.ds).map(|(s, ds)| s + alpha * ds).collect();
            let qe = evaluate(st, prog, scale, &x);
            let theta: f64 = qe.f.iter().zip(&s).map(|(f, s)| (f + s).abs()).sum();
            let phi = barrier(&x, &s, mu);
            let reduces_residual = theta <= (1.0 - 1e-4 * alpha) * theta0;
            let roundoff = 1e-13 * (1.0 + phi0.abs());
            let reduces_objective = phi <= phi0 + 1e-4 * alpha * slope.min(0.0) + roundoff && theta <= theta_max.max(theta0);
            // once the slack equations hold to tolerance, only the
            // fraction-to-boundary rule limits the step
            let settled = qe.f.iter().zip(&s).zip(&qe.mag).all(|((f, s), m)| (f + s).abs() <= tol.feasibility * (1.0 + m + s));
            if phi.is_finite() && (reduces_residual || reduces_objective || settled) {
                trial = Some((x, s, qe));
                break;
            }
            alpha *= 0.5;
        }
        let Some((x, s, qe)) = trial else {
            status = SolveStatus::NumericalFailure;
            break;
        };
        let z: Vec<f64> = p
            .z
            .iter()
            .zip(&d.dz)
            .zip(&s)
            .map(|((z, dz), s)| {
                // keep the duals within a band around the central path
                let z = z + alpha_z * dz;
                z.clamp(mu / (1e10 * s), 1e10 * mu / s)
            })
            .collect();
        p = Point { x, s, z };
        e = qe;
        r = residuals(st, &c, &e, &p);
    }

    let objective = prog.objective_value(&p.x);
    SolveReport {
        status,
        objective,
        iterations,
        primal_residual: r.rp_norm,
        dual_residual: r.rd_norm,
        gap: r.mu * total,
        duals: p.z,
        x: p.x,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::ConvexConstraint;

    fn solve(prog: &ConvexProgram) -> SolveReport {
        InteriorPoint::default().solve(prog, None)
    }

    #[test]
    fn pair_indexing() {
        let k = 4;
        let mut idx = 0;
        for a in 0..k {
            for b in a..k {
                assert_eq!(pair_index(a, b, k), idx);
                idx += 1;
            }
        }
    }

    #[test]
    fn disk_minimum() {
        // minimize x s.t. x² ≤ 1
        let prog = ConvexProgram {
            lower: vec![f64::NEG_INFINITY],
            upper: vec![f64::INFINITY],
            objective: vec![(0, 1.0)],
            constraints: vec![ConvexConstraint {
                quad: vec![(0, 0, 1.0)],
                linear: vec![],
                constant: -1.0,
            }],
        };
        let r = solve(&prog);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] + 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!((r.objective + 1.0).abs() < 1e-6);
    }

    #[test]
    fn penalty_lp() {
        // minimize k s.t. k ≥ 0, k + p ≥ 0.5, 0 ≤ p ≤ 0.3
        let prog = ConvexProgram {
            lower: vec![0.0, 0.0],
            upper: vec![f64::INFINITY, 0.3],
            objective: vec![(0, 1.0)],
            constraints: vec![ConvexConstraint {
                quad: vec![],
                linear: vec![(0, -1.0), (1, -1.0)],
                constant: 0.5,
            }],
        };
        let r = solve(&prog);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 0.2).abs() < 1e-7);
        assert!((r.x[1] - 0.3).abs() < 1e-7);
    }

    #[test]
    fn coupled_quadratics() {
        // minimize -x - y s.t. x² + y² ≤ 2, (x-1)² ≤ 1 → x = y = 1
        let prog = ConvexProgram {
            lower: vec![f64::NEG_INFINITY; 2],
            upper: vec![f64::INFINITY; 2],
            objective: vec![(0, -1.0), (1, -1.0)],
            constraints: vec![
                ConvexConstraint {
                    quad: vec![(0, 0, 1.0), (1, 1, 1.0)],
                    linear: vec![],
                    constant: -2.0,
                },
                ConvexConstraint {
                    quad: vec![(0, 0, 1.0)],
                    linear: vec![(0, -2.0)],
                    constant: 0.0,
                },
            ],
        };
        let r = solve(&prog);
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!(prog.max_violation(&r.x) <= 1e-7);
    }

    #[test]
    fn symbolic_factorization_is_reused() {
        let mut prog = ConvexProgram {
            lower: vec![0.0, 0.0],
            upper: vec![f64::INFINITY, 0.3],
            objective: vec![(0, 1.0)],
            constraints: vec![ConvexConstraint {
                quad: vec![],
                linear: vec![(0, -1.0), (1, -1.0)],
                constant: 0.5,
            }],
        };
        let mut ipm = InteriorPoint::default();
        let first = ipm.solve(&prog, None);
        prog.constraints[0].constant = 0.6;
        let second = ipm.solve(&prog, Some(&first));
        assert_eq!(ipm.symbolic_builds(), 1);
        assert_eq!(second.status, SolveStatus::Optimal);
        assert!((second.x[0] - 0.3).abs() < 1e-7);
    }
}
