//! Brute-force ground truth for small instances.
//!
//! Nothing here goes through the cut-generation loop: the robust optimum is
//! found by trying every allocation, with the worst case taken over explicit
//! vertex scenarios and the utilities chosen by a small linear program.

use pricer_milp::{self as milp, MilpModel, Relation, Sense, SolveStatus};

use crate::det::{for_each_partial_permutation, solve_deterministic_enumerate, TIE_TOL};
use crate::error::{PricingError, Result};
use crate::feasibility::{ic_violation, pricing_solution, value_under_scenario, FEASIBILITY_TOL};
use crate::robust::{RobustSolution, RobustStatus};
use crate::types::{Allocation, DiscreteScenarioSet, IntervalUncertainty, UtilityVector, ValuationMatrix};

/// Most interval entries of positive width accepted by vertex enumeration.
pub const VERTEX_ENTRY_CAP: usize = 16;

/// Largest K accepted by [`brute_force_robust`].
pub const BRUTE_FORCE_CAP: usize = 3;

/// Row-major indices of entries with `lower < upper`.
fn free_entries(s: &IntervalUncertainty) -> Vec<usize> {
    let (lo, hi) = (s.lower().as_slice(), s.upper().as_slice());
    (0..lo.len()).filter(|&e| lo[e] < hi[e]).collect()
}

/// All vertex scenarios of `s`.
///
/// Only entries of positive width vary. Vertex `n` sets the `b`-th such entry
/// (row-major order) to its upper bound iff bit `b` of `n` is set, so vertex 0
/// is the lower-bound matrix and the last one the upper-bound matrix.
pub fn enumerate_vertex_scenarios(s: &IntervalUncertainty) -> Result<Vec<ValuationMatrix>> {
    let free = free_entries(s);
    if free.len() > VERTEX_ENTRY_CAP {
        return Err(PricingError::CapExceeded {
            what: "interval entries of positive width",
            limit: VERTEX_ENTRY_CAP,
            actual: free.len(),
        });
    }
    let (lo, hi) = (s.lower().as_slice(), s.upper().as_slice());
    (0..1usize << free.len())
        .map(|n| {
            let mut data = lo.to_vec();
            for (b, &e) in free.iter().enumerate() {
                if n >> b & 1 == 1 {
                    data[e] = hi[e];
                }
            }
            ValuationMatrix::new(s.k(), data)
        })
        .collect()
}

/// Minimal worst-case regret over all robust-feasible candidates.
///
/// For each allocation `Q` solves the LP
/// `min t` s.t. `t − Σ_i u_i ≥ opt(X_v) − Σ Q·X_v` for every vertex `X_v`,
/// robust envy-freeness for `i ≠ j`, `0 ≤ u_i ≤ Σ_k Q_ik x⁻_ik`.
/// The vertex rows share their left-hand side, so only the largest
/// right-hand side is kept. Ties between allocations (within 1e-9) go to more
/// items sold at a positive lower valuation, then to the lexicographically
/// smallest 0/1 matrix.
pub fn brute_force_robust(s: &IntervalUncertainty) -> Result<RobustSolution> {
    let k = s.k();
    if k > BRUTE_FORCE_CAP {
        return Err(PricingError::CapExceeded {
            what: "K",
            limit: BRUTE_FORCE_CAP,
            actual: k,
        });
    }
    let vertices = enumerate_vertex_scenarios(s)?;
    let opts: Vec<f64> = vertices
        .iter()
        .map(|x| solve_deterministic_enumerate(x).map(|sol| sol.revenue))
        .collect::<Result<_>>()?;
    let (lo, hi) = (s.lower(), s.upper());

    let mut best: Option<(f64, usize, Vec<u8>, Allocation, UtilityVector)> = None;
    let mut evaluated = 0;
    let mut failure = None;
    for_each_partial_permutation(k, |q| {
        if failure.is_some() {
            return;
        }
        let worst_rhs = vertices
            .iter()
            .zip(&opts)
            .map(|(x, opt)| opt - q.pairs().map(|(i, j)| x.get(i, j)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);

        let mut lp = MilpModel::new(Sense::Minimize);
        let t = lp.add_continuous("t", f64::NEG_INFINITY, f64::INFINITY);
        let u: Vec<_> = (0..k)
            .map(|i| {
                let cap = q.item_of(i).map_or(0.0, |j| lo.get(i, j));
                lp.add_continuous(format!("u_{i}"), 0.0, cap)
            })
            .collect();
        lp.add_objective_term(t, 1.0);
        let mut terms = vec![(t, 1.0)];
        terms.extend(u.iter().map(|&v| (v, -1.0)));
        lp.add_constraint("worst", terms, Relation::Ge, worst_rhs);
        for i in 0..k {
            let Some(kk) = q.item_of(i) else { continue };
            for j in 0..k {
                if i != j {
                    let c = hi.get(j, kk) - lo.get(i, kk);
                    lp.add_constraint(format!("ic_{i}_{j}"), vec![(u[j], 1.0), (u[i], -1.0)], Relation::Ge, c);
                }
            }
        }
        let sol = match milp::lp_solve(&lp) {
            Ok(sol) => sol,
            Err(e) => {
                failure = Some(PricingError::from(e));
                return;
            }
        };
        evaluated += 1;
        if sol.status != SolveStatus::Optimal {
            return;
        }
        let regret = sol.value(t);
        let sold = q.pairs().filter(|&(i, j)| lo.get(i, j) > 0.0).count();
        let key = q.to_matrix().concat();
        let better = match &best {
            None => true,
            Some((r, bs, bk, _, _)) => {
                regret < r - TIE_TOL || (regret <= r + TIE_TOL && (sold > *bs || (sold == *bs && key < *bk)))
            }
        };
        if better {
            let uv = u.iter().map(|&v| sol.value(v).max(0.0)).collect();
            match UtilityVector::new(uv) {
                Ok(uv) => best = Some((regret, sold, key, q.clone(), uv)),
                Err(e) => failure = Some(e),
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (regret, _, _, q, u) =
        best.ok_or_else(|| PricingError::Internal("no allocation admits robust prices".into()))?;
    let solution = pricing_solution(u, q, lo, hi)?;
    Ok(RobustSolution {
        solution,
        regret,
        lower_bound: regret,
        lb_trace: vec![regret],
        ub_trace: vec![regret],
        cuts: Vec::new(),
        iterations: evaluated,
        status: RobustStatus::Optimal,
        log: Vec::new(),
    })
}

/// Worst regret of `(u, q)` over a finite scenario list. Fails, naming the
/// scenario index, if `(u, q)` is not envy-free there.
pub fn regret_under_discrete_set(u: &UtilityVector, q: &Allocation, d: &DiscreteScenarioSet) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (n, x) in d.scenarios().iter().enumerate() {
        if let Some(v) = ic_violation(u, q, x, FEASIBILITY_TOL)? {
            return Err(PricingError::InfeasibleScenario {
                scenario: n,
                reason: v.to_string(),
            });
        }
        let opt = solve_deterministic_enumerate(x)?.revenue;
        worst = worst.max(opt - value_under_scenario(u, q, x)?);
    }
    Ok(worst)
}
