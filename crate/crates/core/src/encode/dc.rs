use super::qcqp::{ConstraintKind, QcqpProblem, QuadForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SplitMethod {
    #[default]
    Bilinear,
    Eigen,
}

/// How the subtracted sum of squares of a DC constraint came about.
#[derive(Clone, Debug, PartialEq)]
pub enum Concave {
    /// `P⁻ = tI` on the variables of `P`.
    Shift { t: f64, vars: Vec<usize> },
    /// `2c·y·z = c(y+z)² − c(y²+z²)` for `c > 0`, and with `y−z` for `c < 0`.
    /// Negative diagonal entries of `P` show up as `(i, i, c)`.
    Bilinear(Vec<(usize, usize, f64)>),
}

/// `convex(x) − Σ w_i x_i² <= 0` with `convex` PSD.
#[derive(Clone, Debug, PartialEq)]
pub struct DcConstraint {
    pub kind: ConstraintKind,
    pub convex: QuadForm,
    pub concave: Concave,
    /// Diagonal of `P⁻`: `(variable, weight)`, weights positive, ascending.
    pub weights: Vec<(usize, f64)>,
    /// Index of this constraint's penalty variable, if it is penalized.
    pub penalty: Option<usize>,
}

impl DcConstraint {
    pub fn concave_value(&self, x: &[f64]) -> f64 {
        self.weights.iter().map(|&(i, w)| w * x[i] * x[i]).sum()
    }

    /// `convex(x) − concave(x)`, the original form.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.convex.value(x) - self.concave_value(x)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcProblem {
    pub names: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<DcConstraint>,
    pub num_params: usize,
    /// Variables before the penalties.
    pub num_base_vars: usize,
    pub method: SplitMethod,
}

impl DcProblem {
    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn penalty_vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.num_base_vars..self.names.len()
    }
}

/// `max_i Σ_j |P_ij|`, an upper bound on the spectral radius of `P`.
pub fn gershgorin_bound(form: &QuadForm) -> f64 {
    let vars = form.quad_vars();
    let mut rows = vec![0.0; vars.len()];
    let pos = |v: usize| vars.binary_search(&v).expect("variable of P");
    for &(i, j, p) in &form.quad {
        rows[pos(i)] += p.abs();
        if i != j {
            rows[pos(j)] += p.abs();
        }
    }
    rows.into_iter().fold(0.0, f64::max)
}

fn eigen_constraint(form: &QuadForm, t: Option<f64>) -> (QuadForm, Concave, Vec<(usize, f64)>) {
    let vars = form.quad_vars();
    let t = t.unwrap_or_else(|| gershgorin_bound(form));
    let mut convex = form.clone();
    if t > 0.0 {
        for &v in &vars {
            convex.add_quad(v, v, t);
        }
    }
    let weights = if t > 0.0 { vars.iter().map(|&v| (v, t)).collect() } else { Vec::new() };
    let vars = if t > 0.0 { vars } else { Vec::new() };
    (convex, Concave::Shift { t, vars }, weights)
}

fn bilinear_constraint(form: &QuadForm) -> (QuadForm, Concave, Vec<(usize, f64)>) {
    let mut convex = form.clone();
    let mut terms = Vec::new();
    let mut weights: Vec<(usize, f64)> = Vec::new();
    let mut add_weight = |v: usize, w: f64| match weights.binary_search_by_key(&v, |e| e.0) {
        Ok(k) => weights[k].1 += w,
        Err(k) => weights.insert(k, (v, w)),
    };
    for &(i, j, p) in &form.quad {
        if i != j {
            add_weight(i, p.abs());
            add_weight(j, p.abs());
            terms.push((i, j, p));
        } else if p < 0.0 {
            add_weight(i, -p);
            terms.push((i, i, p));
        }
    }
    for &(v, w) in &weights {
        convex.add_quad(v, v, w);
    }
    convex.prune();
    (convex, Concave::Bilinear(terms), weights)
}

fn split(qcqp: &QcqpProblem, method: SplitMethod, t: Option<f64>) -> DcProblem {
    let mut names = qcqp.names.clone();
    let mut lower = qcqp.lower.clone();
    let mut upper = qcqp.upper.clone();
    let num_base_vars = names.len();
    let mut constraints = Vec::with_capacity(qcqp.constraints.len());
    let mut penalties = 0;
    for c in &qcqp.constraints {
        let (convex, concave, weights) = match method {
            SplitMethod::Eigen => eigen_constraint(&c.form, t),
            SplitMethod::Bilinear => bilinear_constraint(&c.form),
        };
        let penalty = match c.kind {
            ConstraintKind::Bellman { .. } => {
                let k = names.len();
                names.push(format!("k:{penalties}"));
                lower.push(0.0);
                upper.push(f64::INFINITY);
                penalties += 1;
                Some(k)
            }
            ConstraintKind::WellDefined => None,
        };
        constraints.push(DcConstraint {
            kind: c.kind.clone(),
            convex,
            concave,
            weights,
            penalty,
        });
    }
    DcProblem {
        names,
        lower,
        upper,
        objective: qcqp.objective.clone(),
        constraints,
        num_params: qcqp.num_params,
        num_base_vars,
        method,
    }
}

pub fn dc_split(qcqp: &QcqpProblem, method: SplitMethod) -> DcProblem {
    split(qcqp, method, None)
}

/// `P⁺ = P + tI` with `t` the Gershgorin bound of each constraint.
pub fn dc_split_eigen(qcqp: &QcqpProblem) -> DcProblem {
    split(qcqp, SplitMethod::Eigen, None)
}

/// Same with one fixed `t` for every quadratic constraint. `t` must be at
/// least the largest negative eigenvalue magnitude for `P⁺` to be convex.
pub fn dc_split_eigen_with_shift(qcqp: &QcqpProblem, t: f64) -> DcProblem {
    split(qcqp, SplitMethod::Eigen, Some(t))
}

pub fn dc_split_bilinear(qcqp: &QcqpProblem) -> DcProblem {
    split(qcqp, SplitMethod::Bilinear, None)
}
