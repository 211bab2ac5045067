//! Exact pricing for a single known valuation matrix.
//!
//! Two independent routes: the mixed-binary program solved by branch-and-bound
//! ([`solve_deterministic`]) and exhaustive enumeration of partial
//! permutations with minimal utilities from longest paths
//! ([`solve_deterministic_enumerate`]).

use pricer_milp::{self as milp, MilpModel, Relation, Sense, SolveOptions, SolveStatus, VarId};

use crate::error::{PricingError, Result};
use crate::feasibility::{pricing_solution, FEASIBILITY_TOL};
use crate::types::{Allocation, IntervalUncertainty, PricingSolution, UtilityVector, ValuationMatrix};

/// Largest K accepted by [`solve_deterministic_enumerate`] by default.
pub const ENUMERATION_CAP: usize = 5;

/// Revenues closer than this are treated as ties.
pub(crate) const TIE_TOL: f64 = 1e-9;

/// The deterministic pricing program together with its variable handles.
#[derive(Clone, Debug)]
pub struct DeterministicMilp {
    pub model: MilpModel,
    /// `q[i * k + j]` is the binary "item j goes to buyer i".
    pub q: Vec<VarId>,
    pub u: Vec<VarId>,
}

/// Constraint counts by family, as built.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelCounts {
    pub binaries: usize,
    pub continuous: usize,
    pub ic: usize,
    pub matching: usize,
    /// `u_i ≤ Σ_k q_ik x_ik`: nonnegative price, zero utility when unmatched.
    pub linking: usize,
    pub cuts: usize,
}

impl ModelCounts {
    pub fn of(model: &MilpModel) -> Self {
        let mut c = ModelCounts {
            binaries: 0,
            continuous: 0,
            ic: 0,
            matching: 0,
            linking: 0,
            cuts: 0,
        };
        for v in model.variables() {
            match v.kind {
                milp::VarKind::Binary => c.binaries += 1,
                milp::VarKind::Continuous => c.continuous += 1,
            }
        }
        for con in model.constraints() {
            let family = con.name.split('_').next().unwrap_or("");
            match family {
                "ic" => c.ic += 1,
                "row" | "col" => c.matching += 1,
                "link" => c.linking += 1,
                "cut" => c.cuts += 1,
                _ => {}
            }
        }
        c
    }
}

/// Adds `K²` binaries with row and column sums at most one.
pub(crate) fn add_matching(model: &mut MilpModel, k: usize) -> Vec<VarId> {
    let q: Vec<VarId> = (0..k * k)
        .map(|idx| model.add_binary(format!("q_{}_{}", idx / k, idx % k)))
        .collect();
    for i in 0..k {
        let terms = (0..k).map(|j| (q[i * k + j], 1.0)).collect();
        model.add_constraint(format!("row_{i}"), terms, Relation::Le, 1.0);
    }
    for j in 0..k {
        let terms = (0..k).map(|i| (q[i * k + j], 1.0)).collect();
        model.add_constraint(format!("col_{j}"), terms, Relation::Le, 1.0);
    }
    q
}

/// Adds `u_j − u_i − Σ_k q_ik c(i, j, k) ≥ 0` for every `i ≠ j` and the
/// linking rows `u_i − Σ_k q_ik v(i, k) ≤ 0`.
pub(crate) fn add_envy_rows(
    model: &mut MilpModel,
    k: usize,
    q: &[VarId],
    u: &[VarId],
    c: impl Fn(usize, usize, usize) -> f64,
    v: impl Fn(usize, usize) -> f64,
) {
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let mut terms = vec![(u[j], 1.0), (u[i], -1.0)];
            for kk in 0..k {
                let coef = c(i, j, kk);
                if coef != 0.0 {
                    terms.push((q[i * k + kk], -coef));
                }
            }
            model.add_constraint(format!("ic_{i}_{j}"), terms, Relation::Ge, 0.0);
        }
    }
    for i in 0..k {
        let mut terms = vec![(u[i], 1.0)];
        for kk in 0..k {
            let val = v(i, kk);
            if val != 0.0 {
                terms.push((q[i * k + kk], -val));
            }
        }
        model.add_constraint(format!("link_{i}"), terms, Relation::Le, 0.0);
    }
}

/// `max Σ_i (Σ_j q_ij x_ij − u_i)` over partial permutations `q` and
/// utilities `u ≥ 0` satisfying the envy-freeness rows.
pub fn build_deterministic_milp(x: &ValuationMatrix) -> DeterministicMilp {
    let k = x.k();
    let mut model = MilpModel::new(Sense::Maximize);
    let q = add_matching(&mut model, k);
    let u: Vec<VarId> = (0..k)
        .map(|i| model.add_continuous(format!("u_{i}"), 0.0, f64::INFINITY))
        .collect();
    for i in 0..k {
        for j in 0..k {
            model.add_objective_term(q[i * k + j], x.get(i, j));
        }
        model.add_objective_term(u[i], -1.0);
    }
    add_envy_rows(
        &mut model,
        k,
        &q,
        &u,
        |i, j, kk| x.get(j, kk) - x.get(i, kk),
        |i, kk| x.get(i, kk),
    );
    DeterministicMilp { model, q, u }
}

/// Reads the allocation out of solved `q` values.
pub(crate) fn allocation_from_values(values: &[f64], q: &[VarId], k: usize) -> Result<Allocation> {
    let mut item_of = vec![None; k];
    for i in 0..k {
        for j in 0..k {
            if values[q[i * k + j].index()] > 0.5 {
                item_of[i] = Some(j);
            }
        }
    }
    Allocation::new(item_of)
}

/// Outcome of the branch-and-bound route, with solver diagnostics.
#[derive(Clone, Debug)]
pub struct DeterministicResult {
    pub solution: PricingSolution,
    pub status: SolveStatus,
    /// Best proven upper bound on the revenue.
    pub bound: f64,
    pub nodes: usize,
}

/// Solves the deterministic program with explicit solver options. The
/// utilities of the returned allocation are recomputed as the minimal
/// solution of its difference constraints, which is what the program
/// optimizes for fixed `q`.
pub fn solve_deterministic_with(x: &ValuationMatrix, opts: &SolveOptions) -> Result<DeterministicResult> {
    let k = x.k();
    let det = build_deterministic_milp(x);
    let sol = milp::solve(&det.model, opts)?;
    if !sol.has_incumbent() {
        return Err(match sol.status {
            SolveStatus::IterationLimit | SolveStatus::TimeLimit => PricingError::SolverLimit(format!(
                "deterministic program stopped with {:?} and no incumbent",
                sol.status
            )),
            other => PricingError::Internal(format!("deterministic program reported {other:?}")),
        });
    }
    let q = allocation_from_values(&sol.values, &det.q, k)?;
    let u = min_utilities_for_allocation(&q, x)
        .ok_or_else(|| PricingError::Internal("solver allocation admits no envy-free utilities".into()))?;
    let solution = pricing_solution(u, q, x, x)?;
    Ok(DeterministicResult {
        solution,
        status: sol.status,
        bound: sol.bound,
        nodes: sol.nodes_explored,
    })
}

/// Revenue-maximizing envy-free pricing for `x`, with absolute optimality gap `gap`.
pub fn solve_deterministic(x: &ValuationMatrix, gap: f64) -> Result<PricingSolution> {
    let opts = SolveOptions {
        gap,
        ..SolveOptions::default()
    };
    let res = solve_deterministic_with(x, &opts)?;
    if res.status != SolveStatus::Optimal {
        return Err(PricingError::SolverLimit(format!(
            "deterministic program stopped with {:?}",
            res.status
        )));
    }
    Ok(res.solution)
}

/// Longest paths from a virtual source joined to every node by a zero edge.
/// Returns `None` when some cycle has positive weight.
fn longest_paths(k: usize, weight: impl Fn(usize, usize) -> f64) -> Option<Vec<f64>> {
    let w: Vec<f64> = (0..k * k).map(|idx| weight(idx / k, idx % k)).collect();
    let mut d = vec![0.0f64; k];
    // K + 1 nodes: K rounds suffice without positive cycles
    for _ in 0..k {
        let mut changed = false;
        for i in 0..k {
            for j in 0..k {
                if i != j && d[i] + w[i * k + j] > d[j] {
                    d[j] = d[i] + w[i * k + j];
                    changed = true;
                }
            }
        }
        if !changed {
            return Some(d);
        }
    }
    for i in 0..k {
        for j in 0..k {
            if i != j && d[i] + w[i * k + j] > d[j] + FEASIBILITY_TOL {
                return None;
            }
        }
    }
    Some(d)
}

/// Componentwise-minimal `u ≥ 0` with `u_j − u_i ≥ Σ_k q_ik (x_jk − x_ik)`
/// for all `i ≠ j`, or `None` if no such `u` exists.
pub fn min_utilities_for_allocation(q: &Allocation, x: &ValuationMatrix) -> Option<UtilityVector> {
    let k = x.k();
    let d = longest_paths(k, |i, j| q.item_of(i).map_or(0.0, |kk| x.get(j, kk) - x.get(i, kk)))?;
    UtilityVector::new(d).ok()
}

/// As [`min_utilities_for_allocation`] for the robust constraints
/// `u_j − u_i ≥ Σ_k q_ik (upper_jk − lower_ik)`.
pub fn min_utilities_robust(q: &Allocation, s: &IntervalUncertainty) -> Option<UtilityVector> {
    let (lo, hi) = (s.lower(), s.upper());
    let d = longest_paths(s.k(), |i, j| {
        q.item_of(i).map_or(0.0, |kk| hi.get(j, kk) - lo.get(i, kk))
    })?;
    UtilityVector::new(d).ok()
}

/// Calls `visit` on every partial permutation of size `k`, in lexicographic
/// order of the assignment vector with `Some(0) < … < Some(k-1) < None`.
pub fn for_each_partial_permutation(k: usize, mut visit: impl FnMut(&Allocation)) {
    fn rec(i: usize, k: usize, used: &mut [bool], cur: &mut Vec<Option<usize>>, visit: &mut dyn FnMut(&Allocation)) {
        if i == k {
            visit(&Allocation::new(cur.clone()).expect("enumerated allocation is a partial permutation"));
            return;
        }
        for j in 0..k {
            if !used[j] {
                used[j] = true;
                cur.push(Some(j));
                rec(i + 1, k, used, cur, visit);
                cur.pop();
                used[j] = false;
            }
        }
        cur.push(None);
        rec(i + 1, k, used, cur, visit);
        cur.pop();
    }
    rec(0, k, &mut vec![false; k], &mut Vec::with_capacity(k), &mut visit);
}

/// Minimal utilities for `q` under `x` if they also leave every sold price
/// nonnegative; the revenue alongside.
pub(crate) fn evaluate_allocation(q: &Allocation, x: &ValuationMatrix) -> Option<(UtilityVector, f64)> {
    let u = min_utilities_for_allocation(q, x)?;
    let mut revenue = 0.0;
    for i in 0..x.k() {
        match q.item_of(i) {
            Some(j) => {
                let price = x.get(i, j) - u.get(i);
                if price < -FEASIBILITY_TOL {
                    return None;
                }
                revenue += price;
            }
            None if u.get(i) > FEASIBILITY_TOL => return None,
            None => {}
        }
    }
    Some((u, revenue))
}

/// Exhaustive exact pricing for `K ≤ ENUMERATION_CAP`.
pub fn solve_deterministic_enumerate(x: &ValuationMatrix) -> Result<PricingSolution> {
    solve_deterministic_enumerate_capped(x, ENUMERATION_CAP)
}

/// Items sold at a strictly positive valuation; zero-value matches are
/// revenue-neutral and never preferred.
fn valuable_sales(q: &Allocation, x: &ValuationMatrix) -> usize {
    q.pairs().filter(|&(i, j)| x.get(i, j) > 0.0).count()
}

/// Row-major flattening of the 0/1 matrix; the empty allocation is smallest.
fn matrix_key(q: &Allocation) -> Vec<u8> {
    q.to_matrix().concat()
}

/// Exhaustive exact pricing with an explicit cap on `K`.
///
/// Among revenue ties (within 1e-9) the allocation selling more items at a
/// positive valuation wins, then the lexicographically smallest 0/1 matrix
/// read row by row.
pub fn solve_deterministic_enumerate_capped(x: &ValuationMatrix, cap: usize) -> Result<PricingSolution> {
    let k = x.k();
    if k > cap {
        return Err(PricingError::CapExceeded {
            what: "K",
            limit: cap,
            actual: k,
        });
    }
    let mut best: Option<(f64, usize, Allocation, UtilityVector)> = None;
    for_each_partial_permutation(k, |q| {
        let Some((u, revenue)) = evaluate_allocation(q, x) else {
            return;
        };
        let sold = valuable_sales(q, x);
        let better = match &best {
            None => true,
            Some((r, s, bq, _)) => {
                revenue > r + TIE_TOL
                    || (revenue >= r - TIE_TOL && (sold > *s || (sold == *s && matrix_key(q) < matrix_key(bq))))
            }
        };
        if better {
            best = Some((revenue, sold, q.clone(), u));
        }
    });
    let (_, _, q, u) = best.ok_or_else(|| PricingError::Internal("empty allocation was rejected".into()))?;
    pricing_solution(u, q, x, x)
}

/// Optimal deterministic revenue by enumeration.
pub fn optimal_revenue_enumerate(x: &ValuationMatrix) -> Result<f64> {
    Ok(solve_deterministic_enumerate(x)?.revenue)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ItemPrice;

    fn m(rows: &[&[f64]]) -> ValuationMatrix {
        ValuationMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn model_counts() {
        let c = ModelCounts::of(&build_deterministic_milp(&m(&[&[5.0]])).model);
        assert_eq!((c.binaries, c.continuous, c.ic, c.matching, c.linking), (1, 1, 0, 2, 1));
        let c = ModelCounts::of(&build_deterministic_milp(&m(&[&[1.0, 2.0], &[3.0, 4.0]])).model);
        assert_eq!((c.binaries, c.continuous, c.ic, c.matching), (4, 2, 2, 4));
        let x3 = ValuationMatrix::zeros(3);
        let c = ModelCounts::of(&build_deterministic_milp(&x3).model);
        assert_eq!((c.binaries, c.continuous, c.ic), (9, 3, 6));
    }

    #[test]
    fn solve_examples() {
        let s = solve_deterministic(&m(&[&[5.0]]), 0.0).unwrap();
        assert_eq!(s.revenue, 5.0);
        assert_eq!(s.prices, vec![ItemPrice::Sold(5.0)]);
        assert_eq!(s.utilities.as_slice(), &[0.0]);

        let s = solve_deterministic(&m(&[&[10.0, 9.0], &[6.0, 8.0]]), 0.0).unwrap();
        assert_eq!(s.revenue, 17.0);
        assert_eq!(s.allocation, Allocation::identity(2));
        assert_eq!(s.utilities.as_slice(), &[1.0, 0.0]);
        assert_eq!(s.prices, vec![ItemPrice::Sold(9.0), ItemPrice::Sold(8.0)]);

        let s = solve_deterministic(&m(&[&[10.0, 0.0], &[0.0, 8.0]]), 0.0).unwrap();
        assert_eq!(s.revenue, 18.0);
        assert_eq!(s.utilities.as_slice(), &[0.0, 0.0]);

        let s = solve_deterministic(&ValuationMatrix::zeros(3), 0.0).unwrap();
        assert_eq!(s.revenue, 0.0);
    }

    #[test]
    fn min_utilities_examples() {
        let diag = Allocation::identity(2);
        let u = min_utilities_for_allocation(&diag, &m(&[&[10.0, 9.0], &[6.0, 8.0]])).unwrap();
        assert_eq!(u.as_slice(), &[1.0, 0.0]);
        assert!(min_utilities_for_allocation(&diag, &m(&[&[0.0, 10.0], &[10.0, 0.0]])).is_none());
        let u = min_utilities_for_allocation(&Allocation::empty(3), &ValuationMatrix::zeros(3)).unwrap();
        assert_eq!(u.as_slice(), &[0.0; 3]);
    }

    #[test]
    fn enumerate_examples() {
        let s = solve_deterministic_enumerate(&m(&[&[10.0, 9.0], &[6.0, 8.0]])).unwrap();
        assert_eq!(s.revenue, 17.0);
        for a in [0.0, 2.5] {
            let s = solve_deterministic_enumerate(&m(&[&[a]])).unwrap();
            assert_eq!(s.revenue, a);
            assert_eq!(s.sold_count, usize::from(a > 0.0));
        }
        let s = solve_deterministic_enumerate(&m(&[&[3.0; 3], &[3.0; 3], &[3.0; 3]])).unwrap();
        assert_eq!(s.revenue, 9.0);
        assert_eq!(s.sold_count, 3);
        assert_eq!(s.allocation, Allocation::new(vec![Some(2), Some(1), Some(0)]).unwrap());
        assert!(solve_deterministic_enumerate(&ValuationMatrix::zeros(6)).is_err());
    }

    #[test]
    fn partial_permutation_count() {
        let counts: Vec<usize> = (1..=4)
            .map(|k| {
                let mut n = 0;
                for_each_partial_permutation(k, |_| n += 1);
                n
            })
            .collect();
        assert_eq!(counts, vec![2, 7, 34, 209]);
    }
}
