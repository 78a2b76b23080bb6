//! Convex QCQP solving.
//!
//! The synthesis loop only talks to [`ConvexSolver`]; [`InteriorPoint`] is the
//! built-in implementation.

mod ipm;

pub use ipm::InteriorPoint;

/// `xᵀPx + qᵀx + r ≤ 0`. `quad` lists the upper triangle of the symmetric
/// `P` as `(i, j, P_ij)` with `i <= j`, so an off-diagonal entry contributes
/// `2 P_ij x_i x_j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvexConstraint {
    pub quad: Vec<(usize, usize, f64)>,
    pub linear: Vec<(usize, f64)>,
    pub constant: f64,
}

impl ConvexConstraint {
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

    pub fn largest_coefficient(&self) -> f64 {
        self.quad
            .iter()
            .map(|t| t.2.abs())
            .chain(self.linear.iter().map(|t| t.1.abs()))
            .chain(std::iter::once(self.constant.abs()))
            .fold(0.0, f64::max)
    }
}

/// Minimize a linear objective over convex quadratic constraints and variable
/// bounds. Infinite bounds mean no bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexProgram {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<ConvexConstraint>,
}

impl ConvexProgram {
    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * x[i]).sum()
    }

    /// Largest violation of a constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = (0..self.num_vars())
            .map(|j| (self.lower[j] - x[j]).max(x[j] - self.upper[j]))
            .fold(0.0, f64::max);
        self.constraints.iter().map(|c| c.value(x)).fold(bounds, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    /// Multipliers of the quadratic constraints followed by those of the
    /// finite bounds, in the solver's internal row order.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub feasibility: f64,
    pub gap: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-8,
            gap: 1e-8,
            max_iterations: 200,
        }
    }
}

/// The seam between the synthesis loop and a convex solver.
pub trait ConvexSolver {
    /// Solves `prog`, optionally warm-started from a previous report on a
    /// program with the same structure.
    fn solve(&mut self, prog: &ConvexProgram, warm: Option<&SolveReport>) -> SolveReport;
}
