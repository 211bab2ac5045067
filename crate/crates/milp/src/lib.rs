//! Exact solver for small mixed-binary linear programs.
//!
//! [`lp_solve`] solves the continuous relaxation with a dense bounded-variable
//! simplex; [`solve`] runs best-bound branch-and-bound over the binary
//! variables on top of it. Everything is single-threaded and deterministic:
//! identical models give identical solutions.
//!
//! ```
//! use pricer_milp::{solve, MilpModel, Relation, Sense, SolveOptions, SolveStatus};
//!
//! let mut m = MilpModel::new(Sense::Maximize);
//! let a = m.add_binary("a");
//! let b = m.add_binary("b");
//! m.add_objective_term(a, 5.0);
//! m.add_objective_term(b, 4.0);
//! m.add_constraint("pack", vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
//! let sol = solve(&m, &SolveOptions::default()).unwrap();
//! assert_eq!(sol.status, SolveStatus::Optimal);
//! assert_eq!(sol.objective_value, 5.0);
//! ```

mod branch;
mod error;
mod model;
mod simplex;

pub use branch::{SolveOptions, INTEGRALITY_TOL};
pub use error::{MilpError, MilpResult};
pub use model::{Constraint, MilpModel, Relation, Sense, VarId, VarKind, Variable};

use simplex::{LpEngine, LpStatus};

/// Absolute tolerance used for constraint satisfaction.
pub const FEASIBILITY_TOL: f64 = simplex::PRIMAL_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Stopped by the node limit (or an LP iteration limit) before the gap closed.
    IterationLimit,
    /// Stopped by the time limit before the gap closed.
    TimeLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Value per variable, indexed by [`VarId::index`]; empty when no
    /// feasible point is known.
    pub values: Vec<f64>,
    /// Objective of `values` (NaN when there is none).
    pub objective_value: f64,
    /// Best proven bound on the optimum, in the model's own sense.
    pub bound: f64,
    pub nodes_explored: usize,
}

impl MilpSolution {
    fn without_incumbent(status: SolveStatus, bound: f64, nodes: usize) -> Self {
        Self {
            status,
            values: Vec::new(),
            objective_value: f64::NAN,
            bound,
            nodes_explored: nodes,
        }
    }

    pub fn has_incumbent(&self) -> bool {
        !self.values.is_empty() || (self.status == SolveStatus::Optimal && self.objective_value.is_finite())
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.index()]
    }
}

/// Solves the continuous relaxation of `model` (binaries become `[0, 1]`).
pub fn lp_solve(model: &MilpModel) -> MilpResult<MilpSolution> {
    model.validate()?;
    if model.num_vars() == 0 {
        return Ok(trivial(model));
    }
    let mut engine = LpEngine::new(model);
    let status = engine.solve()?;
    Ok(match status {
        LpStatus::Optimal => {
            let values = engine.values().to_vec();
            let objective_value = model.evaluate_objective(&values);
            MilpSolution {
                status: SolveStatus::Optimal,
                values,
                objective_value,
                bound: objective_value,
                nodes_explored: 1,
            }
        }
        LpStatus::Infeasible => MilpSolution::without_incumbent(SolveStatus::Infeasible, f64::NAN, 1),
        LpStatus::Unbounded => MilpSolution::without_incumbent(SolveStatus::Unbounded, f64::NAN, 1),
        LpStatus::IterationLimit => MilpSolution::without_incumbent(SolveStatus::IterationLimit, f64::NAN, 1),
    })
}

/// Branch-and-bound over the binary variables of `model`.
///
/// Returns [`SolveStatus::Optimal`] once the incumbent is within `opts.gap`
/// (absolute) of the best open bound. Node and time limits stop the search
/// early with the incumbent found so far, if any.
pub fn solve(model: &MilpModel, opts: &SolveOptions) -> MilpResult<MilpSolution> {
    model.validate()?;
    if opts.gap < 0.0 || opts.gap.is_nan() {
        return Err(MilpError::InvalidModel("gap must be nonnegative".into()));
    }
    if model.num_vars() == 0 {
        return Ok(trivial(model));
    }
    branch::branch_and_bound(model, opts)
}

fn trivial(model: &MilpModel) -> MilpSolution {
    let feasible = model.constraints().iter().all(|c| {
        let zero_ok = match c.relation {
            Relation::Le => 0.0 <= c.rhs + FEASIBILITY_TOL,
            Relation::Ge => 0.0 >= c.rhs - FEASIBILITY_TOL,
            Relation::Eq => c.rhs.abs() <= FEASIBILITY_TOL,
        };
        zero_ok
    });
    if !feasible {
        return MilpSolution::without_incumbent(SolveStatus::Infeasible, f64::NAN, 0);
    }
    let c = model.objective_constant();
    MilpSolution {
        status: SolveStatus::Optimal,
        values: Vec::new(),
        objective_value: c,
        bound: c,
        nodes_explored: 0,
    }
}
