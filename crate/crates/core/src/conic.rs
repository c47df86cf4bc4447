//! Second-order cone programs in a small index-based form and a solver
//! interface over them.
//!
//! A program is `minimize c.x` subject to linear equalities `A x = b`,
//! per-variable bounds and cones `||x[tail]|| <= x[head]`. The default
//! backend is Clarabel; the program itself knows nothing about the backend.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default solver tolerance for feasibility and duality gap.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("solver backend failure: {0}")]
    Backend(String),
}

/// Second-order cone `||x[tail]||_2 <= x[head]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub head: usize,
    pub tail: Vec<usize>,
}

/// Sparse linear equality `sum coef * x[col] = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

macro_rules! infinite_bounds_as_null {
    ($name:ident, $inf:expr) => {
        mod $name {
            use serde::{Deserialize, Deserializer, Serialize, Serializer};

            pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
                let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
                opt.serialize(s)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
                let opt = Vec::<Option<f64>>::deserialize(d)?;
                Ok(opt.into_iter().map(|x| x.unwrap_or($inf)).collect())
            }
        }
    };
}

infinite_bounds_as_null!(lower_bounds, f64::NEG_INFINITY);
infinite_bounds_as_null!(upper_bounds, f64::INFINITY);

/// A second-order cone program. Variables are created with
/// [`ConicProgram::add_var`] and addressed by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    objective: Vec<f64>,
    #[serde(with = "lower_bounds")]
    lower: Vec<f64>,
    #[serde(with = "upper_bounds")]
    upper: Vec<f64>,
    equalities: Vec<Equality>,
    cones: Vec<Cone>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a variable with bounds (use infinities for free sides).
    pub fn add_var(&mut self, lower: f64, upper: f64) -> usize {
        self.objective.push(0.0);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_free(&mut self) -> usize {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_vars(&mut self, count: usize, lower: f64, upper: f64) -> Vec<usize> {
        (0..count).map(|_| self.add_var(lower, upper)).collect()
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn fix(&mut self, var: usize, value: f64) {
        self.set_bounds(var, value, value);
    }

    pub fn add_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(Equality { terms, rhs });
    }

    /// `sum coef * x[col] >= rhs`, expressed with a non-negative slack.
    pub fn add_greater_equal(&mut self, mut terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        let slack = self.add_var(0.0, f64::INFINITY);
        terms.push((slack, -1.0));
        self.add_equality(terms, rhs);
        slack
    }

    pub fn add_cone(&mut self, head: usize, tail: Vec<usize>) {
        self.cones.push(Cone { head, tail });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Structural checks: indices in range, finite data, ordered bounds and
    /// each variable heading at most one cone.
    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.num_vars();
        let bad = |m: String| Err(ConicError::Malformed(m));
        if self.objective.iter().any(|c| !c.is_finite()) {
            return bad("non-finite objective coefficient".into());
        }
        for i in 0..n {
            let (l, u) = (self.lower[i], self.upper[i]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return bad(format!("variable {i} has invalid bounds [{l}, {u}]"));
            }
        }
        for (k, eq) in self.equalities.iter().enumerate() {
            if !eq.rhs.is_finite() {
                return bad(format!("equality {k} has non-finite right-hand side"));
            }
            for &(col, coef) in &eq.terms {
                if col >= n {
                    return bad(format!("equality {k} references variable {col} of {n}"));
                }
                if !coef.is_finite() {
                    return bad(format!("equality {k} has a non-finite coefficient"));
                }
            }
        }
        let mut heads = vec![false; n];
        for (k, cone) in self.cones.iter().enumerate() {
            if cone.head >= n || cone.tail.iter().any(|&t| t >= n) {
                return bad(format!("cone {k} references a variable out of range"));
            }
            if heads[cone.head] {
                return bad(format!("variable {} heads more than one cone", cone.head));
            }
            heads[cone.head] = true;
        }
        Ok(())
    }

    /// Plain-data dump for offline inspection.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program serialises")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: ConicStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest absolute constraint violation of `x`, as measured by [`verify`].
    pub primal_residual: f64,
    pub iterations: u32,
}

/// Constraint violations of a candidate point, each as a maximum absolute value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub equality: f64,
    pub bounds: f64,
    pub cones: f64,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.equality.max(self.bounds).max(self.cones)
    }
}

/// Measure how far `x` is from satisfying every constraint of `program`.
pub fn verify(program: &ConicProgram, x: &[f64]) -> Result<FeasibilityReport, ConicError> {
    program.validate()?;
    if x.len() != program.num_vars() {
        return Err(ConicError::Malformed(format!(
            "point has {} entries, program has {} variables",
            x.len(),
            program.num_vars()
        )));
    }
    let mut report = FeasibilityReport::default();
    for eq in &program.equalities {
        let lhs: f64 = eq.terms.iter().map(|&(c, a)| a * x[c]).sum();
        report.equality = report.equality.max((lhs - eq.rhs).abs());
    }
    for (i, &xi) in x.iter().enumerate() {
        let v = (program.lower[i] - xi).max(xi - program.upper[i]).max(0.0);
        report.bounds = report.bounds.max(v);
    }
    for cone in &program.cones {
        let norm = cone.tail.iter().map(|&t| x[t] * x[t]).sum::<f64>().sqrt();
        report.cones = report.cones.max((norm - x[cone.head]).max(0.0));
    }
    Ok(report)
}

/// A conic solver backend.
pub trait ConicSolver {
    fn solve(&self, program: &ConicProgram, tolerance: f64) -> Result<ConicSolution, ConicError>;
}

/// Interior-point backend built on Clarabel.
#[derive(Debug, Clone, Copy)]
pub struct ClarabelBackend {
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { max_iter: 200 }
    }
}

/// Column-compressed matrix from triplets, summing duplicates.
fn csc_from_triplets(m: usize, n: usize, mut triplets: Vec<(usize, usize, f64)>) -> CscMatrix<f64> {
    triplets.sort_by_key(|&(row, col, _)| (col, row));
    let mut colptr = vec![0usize; n + 1];
    let mut rowval = Vec::with_capacity(triplets.len());
    let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
    let mut last: Option<(usize, usize)> = None;
    for (r, c, v) in triplets {
        if last == Some((r, c)) {
            *nzval.last_mut().unwrap() += v;
            continue;
        }
        rowval.push(r);
        nzval.push(v);
        colptr[c + 1] += 1;
        last = Some((r, c));
    }
    for c in 0..n {
        colptr[c + 1] += colptr[c];
    }
    CscMatrix::new(m, n, colptr, rowval, nzval)
}

impl ConicSolver for ClarabelBackend {
    fn solve(&self, program: &ConicProgram, tolerance: f64) -> Result<ConicSolution, ConicError> {
        program.validate()?;
        if !(tolerance > 0.0) {
            return Err(ConicError::Malformed("tolerance must be positive".into()));
        }
        let n = program.num_vars();
        let mut trip = Vec::new();
        let mut b = Vec::new();
        let mut row = 0usize;

        // Zero cone: equalities and fixed variables.
        for eq in &program.equalities {
            for &(c, a) in &eq.terms {
                trip.push((row, c, a));
            }
            b.push(eq.rhs);
            row += 1;
        }
        for i in 0..n {
            if program.lower[i] == program.upper[i] {
                trip.push((row, i, 1.0));
                b.push(program.lower[i]);
                row += 1;
            }
        }
        let zero_rows = row;

        // Non-negative cone: finite one-sided bounds.
        for i in 0..n {
            let (l, u) = (program.lower[i], program.upper[i]);
            if l == u {
                continue;
            }
            if l.is_finite() {
                trip.push((row, i, -1.0));
                b.push(-l);
                row += 1;
            }
            if u.is_finite() {
                trip.push((row, i, 1.0));
                b.push(u);
                row += 1;
            }
        }
        let nonneg_rows = row - zero_rows;

        let mut cones = Vec::with_capacity(program.cones.len() + 2);
        if zero_rows > 0 {
            cones.push(SupportedConeT::ZeroConeT(zero_rows));
        }
        if nonneg_rows > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(nonneg_rows));
        }
        for cone in &program.cones {
            trip.push((row, cone.head, -1.0));
            b.push(0.0);
            row += 1;
            for &t in &cone.tail {
                trip.push((row, t, -1.0));
                b.push(0.0);
                row += 1;
            }
            cones.push(SupportedConeT::SecondOrderConeT(1 + cone.tail.len()));
        }

        let a = csc_from_triplets(row, n, trip);
        let p = CscMatrix::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_feas(tolerance)
            .tol_gap_abs(tolerance)
            .tol_gap_rel(tolerance)
            .tol_ktratio(tolerance.max(1e-8) * 1e-2)
            .build()
            .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &program.objective, &a, &b, &cones, settings)
            .map_err(|e| ConicError::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let x = sol.x.clone();
        let residual = verify(program, &x)?.max_violation();
        let status = match sol.status {
            SolverStatus::Solved => ConicStatus::Optimal,
            SolverStatus::AlmostSolved if residual <= tolerance.sqrt() => ConicStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                ConicStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                ConicStatus::Unbounded
            }
            _ => ConicStatus::NumericalFailure,
        };
        Ok(ConicSolution {
            status,
            objective: program.objective_value(&x),
            x,
            primal_residual: residual,
            iterations: sol.iterations,
        })
    }
}

/// Solve with the default backend.
pub fn solve(program: &ConicProgram, tolerance: f64) -> Result<ConicSolution, ConicError> {
    ClarabelBackend::default().solve(program, tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_lp_hits_lower_bound() {
        let mut p = ConicProgram::new();
        let x = p.add_var(2.0, 5.0);
        p.add_objective(x, 1.0);
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.x[x] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn norm_minimisation_on_a_line() {
        // min t  s.t. ||(x, y)|| <= t, x + y = 2  -> t = sqrt(2).
        let mut p = ConicProgram::new();
        let t = p.add_free();
        let x = p.add_free();
        let y = p.add_free();
        p.add_objective(t, 1.0);
        p.add_equality(vec![(x, 1.0), (y, 1.0)], 2.0);
        p.add_cone(t, vec![x, y]);
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, ConicStatus::Optimal);
        assert!((s.objective - 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn conflicting_bounds_are_infeasible() {
        let mut p = ConicProgram::new();
        let x = p.add_var(0.0, 1.0);
        p.add_equality(vec![(x, 1.0)], 3.0);
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, ConicStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_is_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.add_objective(x, -1.0);
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert_eq!(s.status, ConicStatus::Unbounded);
    }

    #[test]
    fn malformed_programs_are_rejected() {
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.add_equality(vec![(x + 4, 1.0)], 0.0);
        assert!(matches!(solve(&p, 1e-8), Err(ConicError::Malformed(_))));

        let mut p = ConicProgram::new();
        let t = p.add_free();
        let y = p.add_free();
        p.add_cone(t, vec![y]);
        p.add_cone(t, vec![y]);
        assert!(p.validate().is_err());
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.add_equality(vec![(x, 1.0), (x, 1.0)], 4.0);
        p.add_objective(x, 1.0);
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert!((s.x[x] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn greater_equal_via_slack() {
        let mut p = ConicProgram::new();
        let x = p.add_free();
        p.add_greater_equal(vec![(x, 2.0)], 3.0);
        p.add_objective(x, 1.0);
        let s = solve(&p, DEFAULT_TOLERANCE).unwrap();
        assert!((s.x[x] - 1.5).abs() < 1e-7);
    }

    #[test]
    fn json_dump_round_trips() {
        let mut p = ConicProgram::new();
        let t = p.add_var(0.0, 10.0);
        let x = p.add_free();
        p.add_cone(t, vec![x]);
        p.add_equality(vec![(x, 1.0)], 1.0);
        let back: ConicProgram = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }
}
