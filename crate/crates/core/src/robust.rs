//! Min-max regret pricing under interval uncertainty by cut generation.
//!
//! The master problem chooses an allocation `q`, utilities `u` and a regret
//! estimate `θ`, subject to envy-freeness in every scenario of the box and
//! one cut per deterministic optimum found so far. Each iteration extracts
//! the scenario that is worst for the master's allocation (its own
//! valuations at the lower bound, everything else at the upper bound), solves
//! the deterministic problem there, and uses the gap as an upper bound on the
//! optimal regret. The loop ends when the bounds meet within `gap`.

use std::time::{Duration, Instant};

use log::info;
use pricer_milp::{self as milp, MilpModel, Relation, Sense, SolveOptions, SolveStatus, VarId};

use crate::det::{self, add_envy_rows, add_matching, allocation_from_values, min_utilities_robust};
use crate::error::{PricingError, Result};
use crate::feasibility::{pricing_solution, robust_violation, value_under_scenario, FEASIBILITY_TOL};
use crate::oracle::enumerate_vertex_scenarios;
use crate::types::{Allocation, IntervalUncertainty, PricingSolution, UtilityVector, ValuationMatrix};

/// Default absolute stopping gap between the regret bounds.
pub const DEFAULT_GAP: f64 = 0.05;

/// Largest K accepted by [`evaluate_regret_exact`] by default.
pub const EXACT_REGRET_CAP: usize = 3;

/// A deterministic optimum `(u′, q′)` from some scenario. In the master it
/// becomes `θ ≥ Σ_ij q′_ij (x⁺_ij + (x⁻_ij − x⁺_ij) q_ij) − Σ_i u′_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub u_prime: UtilityVector,
    pub q_prime: Allocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RobustStatus {
    Optimal,
    IterationLimit,
    TimeLimit,
}

#[derive(Clone, Debug)]
pub struct RobustOptions {
    pub gap: f64,
    pub max_iterations: usize,
    pub time_limit: Option<Duration>,
    /// Absolute gap handed to the master and sub-problem solvers.
    pub inner_gap: f64,
    pub node_limit: usize,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            gap: DEFAULT_GAP,
            max_iterations: 500,
            time_limit: None,
            inner_gap: 0.0,
            node_limit: SolveOptions::default().node_limit,
        }
    }
}

/// One pass of the loop, as logged.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lb: f64,
    pub ub: f64,
    pub cuts: usize,
    pub master_value: f64,
    /// Deterministic optimum at the worst-case scenario; `None` when the loop
    /// stopped right after the master.
    pub sub_value: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RobustSolution {
    /// Incumbent, priced at the lower bounds.
    pub solution: PricingSolution,
    /// Final upper bound, i.e. the certified regret of the incumbent.
    pub regret: f64,
    pub lower_bound: f64,
    pub lb_trace: Vec<f64>,
    pub ub_trace: Vec<f64>,
    pub cuts: Vec<Cut>,
    pub iterations: usize,
    pub status: RobustStatus,
    pub log: Vec<IterationRecord>,
}

/// The master program and its variable handles.
#[derive(Clone, Debug)]
pub struct MasterMilp {
    pub model: MilpModel,
    pub q: Vec<VarId>,
    pub u: Vec<VarId>,
    pub theta: VarId,
}

/// Builds the master: `min θ − Σ_i (Σ_j q_ij x⁻_ij − u_i)` with robust
/// envy-freeness rows for `i ≠ j` and one row per cut.
pub fn build_master(s: &IntervalUncertainty, cuts: &[Cut]) -> Result<MasterMilp> {
    let k = s.k();
    let (lo, hi) = (s.lower(), s.upper());
    let mut model = MilpModel::new(Sense::Minimize);
    let q = add_matching(&mut model, k);
    let u: Vec<VarId> = (0..k)
        .map(|i| model.add_continuous(format!("u_{i}"), 0.0, f64::INFINITY))
        .collect();
    let theta = model.add_continuous("theta", 0.0, f64::INFINITY);
    model.add_objective_term(theta, 1.0);
    for i in 0..k {
        for j in 0..k {
            model.add_objective_term(q[i * k + j], -lo.get(i, j));
        }
        model.add_objective_term(u[i], 1.0);
    }
    add_envy_rows(
        &mut model,
        k,
        &q,
        &u,
        |i, j, kk| hi.get(j, kk) - lo.get(i, kk),
        |i, kk| lo.get(i, kk),
    );
    for (n, cut) in cuts.iter().enumerate() {
        if cut.q_prime.k() != k || cut.u_prime.len() != k {
            return Err(PricingError::Dimension {
                expected: k,
                found: cut.q_prime.k(),
            });
        }
        let mut terms = vec![(theta, 1.0)];
        let mut rhs = -cut.u_prime.sum();
        for (i, j) in cut.q_prime.pairs() {
            rhs += hi.get(i, j);
            let coef = lo.get(i, j) - hi.get(i, j);
            if coef != 0.0 {
                terms.push((q[i * k + j], -coef));
            }
        }
        model.add_constraint(format!("cut_{n}"), terms, Relation::Ge, rhs);
    }
    Ok(MasterMilp { model, q, u, theta })
}

/// Lower bounds where `q_hat` assigns, upper bounds elsewhere.
pub fn worst_case_scenario(q_hat: &Allocation, s: &IntervalUncertainty) -> Result<ValuationMatrix> {
    let k = s.k();
    if q_hat.k() != k {
        return Err(PricingError::Dimension {
            expected: k,
            found: q_hat.k(),
        });
    }
    let data = (0..k * k)
        .map(|idx| {
            let (i, j) = (idx / k, idx % k);
            if q_hat.is_assigned(i, j) {
                s.lower().get(i, j)
            } else {
                s.upper().get(i, j)
            }
        })
        .collect();
    ValuationMatrix::new(k, data)
}

fn remaining(start: Instant, limit: Option<Duration>) -> Option<Duration> {
    limit.map(|l| l.saturating_sub(start.elapsed()))
}

fn limit_status(status: SolveStatus) -> Option<RobustStatus> {
    match status {
        SolveStatus::TimeLimit => Some(RobustStatus::TimeLimit),
        SolveStatus::IterationLimit => Some(RobustStatus::IterationLimit),
        _ => None,
    }
}

/// Runs the cut-generation loop with default options except `gap`.
pub fn solve_robust(s: &IntervalUncertainty, gap: f64) -> Result<RobustSolution> {
    solve_robust_with(
        s,
        &RobustOptions {
            gap,
            ..RobustOptions::default()
        },
    )
}

/// Runs the cut-generation loop.
///
/// The lower bound is replaced by the master value only when larger and the
/// upper bound only on strict improvement, which also replaces the
/// incumbent. Hitting the iteration or time limit returns the incumbent with
/// the matching status.
pub fn solve_robust_with(s: &IntervalUncertainty, opts: &RobustOptions) -> Result<RobustSolution> {
    if !(opts.gap >= 0.0) {
        return Err(PricingError::InvalidInput("gap must be nonnegative".into()));
    }
    let start = Instant::now();
    let k = s.k();
    let mut lb = f64::NEG_INFINITY;
    let mut ub = f64::INFINITY;
    let mut lb_trace = Vec::new();
    let mut ub_trace = Vec::new();
    let mut cuts: Vec<Cut> = Vec::new();
    let mut log_records = Vec::new();
    let mut incumbent: Option<(UtilityVector, Allocation)> = None;
    let mut status = RobustStatus::IterationLimit;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if remaining(start, opts.time_limit).is_some_and(|r| r.is_zero()) {
            status = RobustStatus::TimeLimit;
            break;
        }
        iterations += 1;
        let solver_opts = SolveOptions {
            gap: opts.inner_gap,
            node_limit: opts.node_limit,
            time_limit: remaining(start, opts.time_limit),
        };

        let master = build_master(s, &cuts)?;
        let msol = milp::solve(&master.model, &solver_opts)?;
        if !msol.has_incumbent() {
            if let Some(st) = limit_status(msol.status) {
                status = st;
                break;
            }
            return Err(PricingError::Internal(format!(
                "master problem reported {:?}",
                msol.status
            )));
        }
        let q_hat = allocation_from_values(&msol.values, &master.q, k)?;
        let u_hat = match min_utilities_robust(&q_hat, s) {
            Some(u) => u,
            None => UtilityVector::new(master.u.iter().map(|&v| msol.value(v).max(0.0)).collect())?,
        };
        let v_hat = if msol.status == SolveStatus::Optimal {
            msol.objective_value
        } else {
            msol.bound
        };
        if v_hat > lb {
            lb = v_hat;
        }
        lb_trace.push(lb);
        if let Some(st) = limit_status(msol.status) {
            ub_trace.push(ub);
            status = st;
            break;
        }
        if ub - lb <= opts.gap {
            ub_trace.push(ub);
            info!(
                "iter={iterations} lb={lb:.6} ub={ub:.6} cuts={} master={v_hat:.6} sub=-",
                cuts.len()
            );
            log_records.push(IterationRecord {
                iteration: iterations,
                lb,
                ub,
                cuts: cuts.len(),
                master_value: v_hat,
                sub_value: None,
            });
            status = RobustStatus::Optimal;
            break;
        }

        let scenario = worst_case_scenario(&q_hat, s)?;
        let sub = det::solve_deterministic_with(&scenario, &solver_opts)?;
        let candidate = sub.solution.revenue - value_under_scenario(&u_hat, &q_hat, &scenario)?;
        if candidate < ub {
            ub = candidate;
            incumbent = Some((u_hat.clone(), q_hat.clone()));
        }
        ub_trace.push(ub);
        info!(
            "iter={iterations} lb={lb:.6} ub={ub:.6} cuts={} master={v_hat:.6} sub={:.6}",
            cuts.len(),
            sub.solution.revenue
        );
        log_records.push(IterationRecord {
            iteration: iterations,
            lb,
            ub,
            cuts: cuts.len(),
            master_value: v_hat,
            sub_value: Some(sub.solution.revenue),
        });
        if let Some(st) = limit_status(sub.status) {
            status = st;
            break;
        }
        if ub - lb <= opts.gap {
            status = RobustStatus::Optimal;
            break;
        }
        cuts.push(Cut {
            u_prime: sub.solution.utilities.clone(),
            q_prime: sub.solution.allocation.clone(),
        });
    }

    let (u, q) = incumbent.ok_or_else(|| {
        PricingError::SolverLimit(format!("stopped with {status:?} before any candidate was evaluated"))
    })?;
    let solution = pricing_solution(u, q, s.lower(), s.upper())?;
    Ok(RobustSolution {
        solution,
        regret: ub,
        lower_bound: lb,
        lb_trace,
        ub_trace,
        cuts,
        iterations,
        status,
        log: log_records,
    })
}

/// Worst-case regret of `(u, q)` over all vertex scenarios of `s`, with the
/// deterministic optimum at each vertex found by enumeration.
pub fn evaluate_regret_exact(u: &UtilityVector, q: &Allocation, s: &IntervalUncertainty) -> Result<f64> {
    evaluate_regret_exact_capped(u, q, s, EXACT_REGRET_CAP)
}

pub fn evaluate_regret_exact_capped(
    u: &UtilityVector,
    q: &Allocation,
    s: &IntervalUncertainty,
    cap: usize,
) -> Result<f64> {
    if s.k() > cap {
        return Err(PricingError::CapExceeded {
            what: "K",
            limit: cap,
            actual: s.k(),
        });
    }
    if let Some(v) = robust_violation(u, q, s, FEASIBILITY_TOL)? {
        return Err(PricingError::InvalidInput(format!(
            "candidate is not robust feasible: {v}"
        )));
    }
    let mut worst = f64::NEG_INFINITY;
    for x in enumerate_vertex_scenarios(s)? {
        let opt = det::solve_deterministic_enumerate(&x)?.revenue;
        worst = worst.max(opt - value_under_scenario(u, q, &x)?);
    }
    Ok(worst)
}
