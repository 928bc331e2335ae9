//! Linear conic programs over Hermitian PSD blocks and a nonnegative orthant.
//!
//! A problem is stated over complex Hermitian blocks `X_b ⪰ 0` and scalar
//! variables `x_j ≥ 0`:
//!
//! ```text
//! max / min   Σ_b tr(C_b X_b) + Σ_j c_j x_j
//! s.t.        Σ_b tr(A_ib X_b) + Σ_j a_ij x_j  {=, ≤, ≥}  b_i
//! ```
//!
//! Every coefficient matrix is hermitized on insertion, so each functional is
//! real-valued. [`solve`] maps the problem onto a real symmetric program
//! through [`realify`](crate::matrix::realify) (with the factor 1/2 that
//! compensates `tr(realify(A) realify(X)) = 2 tr(AX)`), runs a primal-dual
//! interior-point method, and maps the iterate back.

mod ipm;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{invalid, Result};
use crate::matrix::{hermitian_eig, hermitize, real_trace, trace_product, CMatrix};

pub use ipm::SolverOptions;

/// Default interior-point tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default interior-point iteration cap.
pub const DEFAULT_MAX_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Eq,
    Le,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "=",
            Relation::Le => "<=",
            Relation::Ge => ">=",
        }
    }

    /// Amount by which `value` fails `value {rel} rhs` (zero when satisfied).
    pub fn violation(self, value: f64, rhs: f64) -> f64 {
        match self {
            Relation::Eq => (value - rhs).abs(),
            Relation::Le => (value - rhs).max(0.0),
            Relation::Ge => (rhs - value).max(0.0),
        }
    }
}

/// Sparse linear functional over the problem variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub blocks: Vec<(usize, CMatrix)>,
    pub nonneg: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `tr(A X_block)`; `A` is replaced by its Hermitian part.
    pub fn block(mut self, block: usize, coeff: CMatrix) -> Self {
        self.add_block(block, coeff);
        self
    }

    pub fn nonneg(mut self, index: usize, coeff: f64) -> Self {
        self.add_nonneg(index, coeff);
        self
    }

    pub fn add_block(&mut self, block: usize, coeff: CMatrix) {
        let coeff = hermitize(&coeff);
        if let Some((_, existing)) = self.blocks.iter_mut().find(|(b, _)| *b == block) {
            *existing += coeff;
        } else {
            self.blocks.push((block, coeff));
        }
    }

    pub fn add_nonneg(&mut self, index: usize, coeff: f64) {
        if let Some((_, existing)) = self.nonneg.iter_mut().find(|(j, _)| *j == index) {
            *existing += coeff;
        } else {
            self.nonneg.push((index, coeff));
        }
    }

    /// Value of the functional at `(blocks, nonneg)`.
    pub fn evaluate(&self, blocks: &[CMatrix], nonneg: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (b, a) in &self.blocks {
            acc += trace_product(a, &blocks[*b]).re;
        }
        for (j, c) in &self.nonneg {
            acc += c * nonneg[*j];
        }
        acc
    }

    fn block_coeff(&self, block: usize) -> Option<&CMatrix> {
        self.blocks.iter().find(|(b, _)| *b == block).map(|(_, a)| a)
    }

    fn nonneg_coeff(&self, index: usize) -> f64 {
        self.nonneg
            .iter()
            .filter(|(j, _)| *j == index)
            .map(|(_, c)| *c)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    /// Free-form tag used in audits and debug dumps.
    pub label: String,
    pub form: LinearForm,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    /// Dimensions of the Hermitian PSD blocks.
    pub blocks: Vec<usize>,
    pub nonneg: usize,
    pub sense: Sense,
    pub objective: LinearForm,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>, nonneg: usize, sense: Sense) -> Self {
        Self {
            blocks,
            nonneg,
            sense,
            objective: LinearForm::new(),
            constraints: Vec::new(),
        }
    }

    pub fn set_objective(&mut self, form: LinearForm) {
        self.objective = form;
    }

    /// Appends a constraint and returns its index.
    pub fn add_constraint(
        &mut self,
        label: impl Into<String>,
        form: LinearForm,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            label: label.into(),
            form,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn constraint_index(&self, label: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c.label == label)
    }

    fn check_form(&self, form: &LinearForm, what: &str) -> Result<()> {
        for (b, a) in &form.blocks {
            let Some(&dim) = self.blocks.get(*b) else {
                return invalid(format!("{what}: block index {b} out of range"));
            };
            if a.nrows() != dim || a.ncols() != dim {
                return invalid(format!(
                    "{what}: block {b} coefficient is {}x{}, expected {dim}x{dim}",
                    a.nrows(),
                    a.ncols()
                ));
            }
            if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return invalid(format!("{what}: non-finite coefficient in block {b}"));
            }
        }
        for (j, c) in &form.nonneg {
            if *j >= self.nonneg {
                return invalid(format!("{what}: nonneg index {j} out of range"));
            }
            if !c.is_finite() {
                return invalid(format!("{what}: non-finite nonneg coefficient"));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() && self.nonneg == 0 {
            return invalid("problem has no variables");
        }
        if self.blocks.iter().any(|&d| d == 0) {
            return invalid("PSD block of dimension zero");
        }
        self.check_form(&self.objective, "objective")?;
        for c in &self.constraints {
            self.check_form(&c.form, &c.label)?;
            if !c.rhs.is_finite() {
                return invalid(format!("{}: non-finite right-hand side", c.label));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, blocks: &[CMatrix], nonneg: &[f64]) -> f64 {
        self.objective.evaluate(blocks, nonneg)
    }

    /// Values of every constraint functional at the given point.
    pub fn constraint_values(&self, blocks: &[CMatrix], nonneg: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.form.evaluate(blocks, nonneg))
            .collect()
    }

    /// Largest constraint violation at a point (cones excluded).
    pub fn max_violation(&self, blocks: &[CMatrix], nonneg: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.relation.violation(c.form.evaluate(blocks, nonneg), c.rhs))
            .fold(0.0, f64::max)
    }

    /// Debug dump: coefficient matrices as nested `[re, im]` pairs.
    pub fn to_json(&self) -> Value {
        fn matrix(a: &CMatrix) -> Value {
            Value::Array(
                (0..a.nrows())
                    .map(|i| {
                        Value::Array(
                            (0..a.ncols())
                                .map(|j| json!([a[(i, j)].re, a[(i, j)].im]))
                                .collect(),
                        )
                    })
                    .collect(),
            )
        }
        fn form(f: &LinearForm) -> Value {
            json!({
                "blocks": f.blocks.iter()
                    .map(|(b, a)| json!({"block": b, "matrix": matrix(a)}))
                    .collect::<Vec<_>>(),
                "nonneg": f.nonneg.iter().map(|(j, c)| json!([j, c])).collect::<Vec<_>>(),
            })
        }
        json!({
            "sense": match self.sense { Sense::Maximize => "maximize", Sense::Minimize => "minimize" },
            "blocks": self.blocks,
            "nonneg": self.nonneg,
            "objective": form(&self.objective),
            "constraints": self.constraints.iter().map(|c| {
                let mut v = form(&c.form);
                v["label"] = json!(c.label);
                v["relation"] = json!(c.relation.symbol());
                v["rhs"] = json!(c.rhs);
                v
            }).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIters,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub blocks: Vec<CMatrix>,
    pub nonneg: Vec<f64>,
    /// Constraint multipliers. For a maximization, `Σ y_i A_i - C ⪰ 0` with
    /// `y_i ≥ 0` on `≤` rows; for a minimization, `C - Σ y_i A_i ⪰ 0` with
    /// `y_i ≥ 0` on `≥` rows. Either way the dual objective is `bᵀy`.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    /// `|primal - dual| / (1 + |primal| + |dual|)`.
    pub duality_gap: f64,
    pub max_constraint_violation: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Solves `problem` to relative accuracy `tol`.
///
/// Malformed input is an error; infeasibility, unboundedness and iteration
/// exhaustion are reported through [`SdpSolution::status`].
pub fn solve(problem: &SdpProblem, tol: f64, max_iters: usize) -> Result<SdpSolution> {
    solve_with(
        problem,
        &SolverOptions {
            tol,
            max_iters,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_with(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    if !(options.tol > 0.0) {
        return invalid("solver tolerance must be positive");
    }
    ipm::solve(problem, options)
}

/// Optimality certificate residuals, recomputed from problem data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// Largest constraint or cone violation of the primal point.
    pub primal_res: f64,
    /// Largest cone or sign violation of the dual slack `±(C - Σ y_i A_i)`.
    pub dual_res: f64,
    /// Relative primal/dual objective gap.
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal_res.max(self.dual_res).max(self.gap)
    }
}

/// Verifies a solution against the problem data without touching solver state.
pub fn kkt_residuals(problem: &SdpProblem, solution: &SdpSolution) -> Result<KktResiduals> {
    if solution.blocks.len() != problem.blocks.len()
        || solution.nonneg.len() != problem.nonneg
        || solution.duals.len() != problem.constraints.len()
    {
        return invalid("solution dimensions do not match the problem");
    }
    for (x, &dim) in solution.blocks.iter().zip(&problem.blocks) {
        if x.nrows() != dim || x.ncols() != dim {
            return invalid("solution block has the wrong dimension");
        }
    }
    let x = &solution.blocks;
    let xn = &solution.nonneg;

    let mut primal_res = problem.max_violation(x, xn);
    for b in x {
        primal_res = primal_res.max(-hermitian_eig(&hermitize(b))?.min_eigenvalue());
    }
    for v in xn {
        primal_res = primal_res.max(-v);
    }

    let sign = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let y = &solution.duals;
    let mut dual_res: f64 = 0.0;
    for (c, &yi) in problem.constraints.iter().zip(y) {
        // multiplier sign for the relation in the chosen sense
        let wrong = match (problem.sense, c.relation) {
            (_, Relation::Eq) => 0.0,
            (Sense::Maximize, Relation::Le) | (Sense::Minimize, Relation::Ge) => -yi,
            (Sense::Maximize, Relation::Ge) | (Sense::Minimize, Relation::Le) => yi,
        };
        dual_res = dual_res.max(wrong);
    }
    for (b, &dim) in problem.blocks.iter().enumerate() {
        let mut z = problem
            .objective
            .block_coeff(b)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(dim, dim));
        for (c, &yi) in problem.constraints.iter().zip(y) {
            if let Some(a) = c.form.block_coeff(b) {
                z -= a.scale(yi);
            }
        }
        z.scale_mut(sign);
        dual_res = dual_res.max(-hermitian_eig(&hermitize(&z))?.min_eigenvalue());
    }
    for j in 0..problem.nonneg {
        let mut z = problem.objective.nonneg_coeff(j);
        for (c, &yi) in problem.constraints.iter().zip(y) {
            z -= yi * c.form.nonneg_coeff(j);
        }
        dual_res = dual_res.max(-sign * z);
    }

    let pobj = problem.objective_value(x, xn);
    let dobj: f64 = problem
        .constraints
        .iter()
        .zip(y)
        .map(|(c, yi)| c.rhs * yi)
        .sum();
    let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
    Ok(KktResiduals {
        primal_res,
        dual_res,
        gap,
    })
}

/// Trace of every block in a solution (convenience for audits).
pub fn block_traces(solution: &SdpSolution) -> Vec<f64> {
    solution.blocks.iter().map(real_trace).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::CVector;
    use num_complex::Complex64;

    fn diag(vals: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&CVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| Complex64::new(v, 0.0)),
        ))
    }

    fn trace_bound_problem() -> SdpProblem {
        let mut p = SdpProblem::new(vec![1], 0, Sense::Maximize);
        p.set_objective(LinearForm::new().block(0, diag(&[1.0])));
        p.add_constraint("trace", LinearForm::new().block(0, diag(&[1.0])), Relation::Le, 5.0);
        p
    }

    #[test]
    fn trace_bound_optimum() {
        let p = trace_bound_problem();
        let s = solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 5.0).abs() < 1e-7);
        let r = kkt_residuals(&p, &s).unwrap();
        assert!(r.max() < 1e-7, "{r:?}");
    }

    #[test]
    fn largest_eigenvalue_via_epigraph() {
        let mut p = SdpProblem::new(vec![2], 1, Sense::Maximize);
        p.set_objective(LinearForm::new().nonneg(0, 1.0));
        p.add_constraint(
            "epigraph",
            LinearForm::new().block(0, diag(&[1.0, 2.0])).nonneg(0, -1.0),
            Relation::Ge,
            0.0,
        );
        p.add_constraint("budget", LinearForm::new().block(0, diag(&[1.0, 1.0])), Relation::Le, 1.0);
        let s = solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.nonneg[0] - 2.0).abs() < 1e-6);
        let x = &s.blocks[0];
        assert!((x[(1, 1)].re - 1.0).abs() < 1e-6);
        assert!(x[(0, 0)].re.abs() < 1e-6);
        assert!(x[(0, 1)].norm() < 1e-6);
    }

    #[test]
    fn analytic_certificate_has_zero_residuals() {
        let p = trace_bound_problem();
        let s = SdpSolution {
            status: SolveStatus::Optimal,
            blocks: vec![diag(&[5.0])],
            nonneg: vec![],
            duals: vec![1.0],
            objective: 5.0,
            dual_objective: 5.0,
            duality_gap: 0.0,
            max_constraint_violation: 0.0,
            iterations: 0,
        };
        let r = kkt_residuals(&p, &s).unwrap();
        assert!(r.max() <= 1e-10);

        let mut perturbed = s.clone();
        perturbed.blocks[0][(0, 0)] += Complex64::new(0.1, 0.0);
        assert!(kkt_residuals(&p, &perturbed).unwrap().primal_res >= 0.05);

        let mut wrong_dims = s;
        wrong_dims.duals.push(0.0);
        assert!(kkt_residuals(&p, &wrong_dims).is_err());
    }

    #[test]
    fn infeasible_problem_is_reported() {
        // x ⪰ 0 with tr(x) <= 1 and tr(x) >= 2
        let mut p = SdpProblem::new(vec![2], 0, Sense::Maximize);
        p.set_objective(LinearForm::new().block(0, diag(&[1.0, 0.0])));
        p.add_constraint("hi", LinearForm::new().block(0, diag(&[1.0, 1.0])), Relation::Le, 1.0);
        p.add_constraint("lo", LinearForm::new().block(0, diag(&[1.0, 1.0])), Relation::Ge, 2.0);
        let s = solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_problem_is_reported() {
        let mut p = SdpProblem::new(vec![2], 0, Sense::Maximize);
        p.set_objective(LinearForm::new().block(0, diag(&[1.0, 1.0])));
        p.add_constraint("off", LinearForm::new().block(0, diag(&[1.0, -1.0])), Relation::Eq, 0.0);
        let s = solve(&p, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert_eq!(s.status, SolveStatus::Unbounded);
    }

    #[test]
    fn malformed_problems_rejected() {
        let mut p = trace_bound_problem();
        p.constraints[0].form.blocks[0].1 = diag(&[1.0, 1.0]);
        assert!(solve(&p, 1e-8, 100).is_err());
        let p = SdpProblem::new(vec![], 0, Sense::Minimize);
        assert!(solve(&p, 1e-8, 100).is_err());
        assert!(solve(&trace_bound_problem(), 0.0, 100).is_err());
    }

    #[test]
    fn deterministic_solves() {
        let p = trace_bound_problem();
        let a = solve(&p, 1e-9, 100).unwrap();
        let b = solve(&p, 1e-9, 100).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn json_dump_layout() {
        let v = trace_bound_problem().to_json();
        assert_eq!(v["sense"], "maximize");
        assert_eq!(v["blocks"][0], 1);
        assert_eq!(v["constraints"][0]["relation"], "<=");
        assert_eq!(v["constraints"][0]["rhs"], 5.0);
        assert_eq!(v["constraints"][0]["blocks"][0]["matrix"][0][0][0], 1.0);
    }

    #[test]
    fn forms_merge_duplicate_entries() {
        let f = LinearForm::new()
            .block(0, diag(&[1.0]))
            .block(0, diag(&[2.0]))
            .nonneg(1, 1.0)
            .nonneg(1, 0.5);
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.blocks[0].1[(0, 0)].re, 3.0);
        assert_eq!(f.nonneg, vec![(1, 1.5)]);
    }
}
