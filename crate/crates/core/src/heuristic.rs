//! Fast pricing: maximum-weight assignment followed by price repair.

use crate::error::Result;
use crate::feasibility::{ic_violation, pricing_solution, Violation, FEASIBILITY_TOL};
use crate::types::{Allocation, PricingSolution, UtilityVector, ValuationMatrix};

/// Utility gains below this are not treated as envy during repair.
const REPAIR_TOL: f64 = 1e-10;

/// Minimum-cost perfect assignment (Hungarian method with potentials).
/// Returns `col_of[row]`.
fn hungarian_min(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based arrays as in the classic O(n^3) formulation; index 0 is a sentinel
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            col_of[row_of[j] - 1] = j - 1;
        }
    }
    col_of
}

/// Maximum total weight of a perfect matching between `rows` and `cols`.
fn max_weight_on(x: &ValuationMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let col_of = hungarian_min(rows.len(), |a, b| -x.get(rows[a], cols[b]));
    col_of.iter().enumerate().map(|(a, &b)| x.get(rows[a], cols[b])).sum()
}

/// Maximum-weight perfect matching of `x`.
///
/// Among optimal matchings the one whose item vector (buyer 0's item, buyer
/// 1's item, …) is lexicographically smallest is returned: each buyer in turn
/// takes the lowest-indexed item that still completes an optimal matching.
pub fn max_weight_assignment(x: &ValuationMatrix) -> Allocation {
    let k = x.k();
    let total = max_weight_on(x, &(0..k).collect::<Vec<_>>(), &(0..k).collect::<Vec<_>>());
    let tol = 1e-9 * total.abs().max(1.0);
    let mut free_cols: Vec<usize> = (0..k).collect();
    let mut fixed = 0.0;
    let mut item_of = Vec::with_capacity(k);
    for i in 0..k {
        let rest_rows: Vec<usize> = (i + 1..k).collect();
        let mut chosen = None;
        for (pos, &j) in free_cols.iter().enumerate() {
            let mut rest_cols = free_cols.clone();
            rest_cols.remove(pos);
            let w = fixed + x.get(i, j) + max_weight_on(x, &rest_rows, &rest_cols);
            if w >= total - tol {
                chosen = Some(pos);
                break;
            }
        }
        // an optimal completion always exists; fall back to the best one defensively
        let pos = chosen.unwrap_or_else(|| {
            let mut best = (f64::NEG_INFINITY, 0);
            for (pos, &j) in free_cols.iter().enumerate() {
                let mut rest_cols = free_cols.clone();
                rest_cols.remove(pos);
                let w = x.get(i, j) + max_weight_on(x, &rest_rows, &rest_cols);
                if w > best.0 {
                    best = (w, pos);
                }
            }
            best.1
        });
        let j = free_cols.remove(pos);
        fixed += x.get(i, j);
        item_of.push(Some(j));
    }
    Allocation::new(item_of).expect("matching is a permutation")
}

/// Total valuation of the matched pairs.
pub fn matching_weight(q: &Allocation, x: &ValuationMatrix) -> f64 {
    q.pairs().map(|(i, j)| x.get(i, j)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeuristicStatus {
    /// A full pass made no change.
    Converged,
    /// The pass budget ran out; the final state still passed the IC check.
    NotConverged,
    /// The final state violates envy-freeness or individual rationality.
    Failed,
}

#[derive(Clone, Debug)]
pub struct HeuristicResult {
    pub solution: PricingSolution,
    pub status: HeuristicStatus,
    pub passes: usize,
    /// Items dropped because their price would have become negative.
    pub removed: usize,
    /// Set when `status` is `Failed`.
    pub violation: Option<Violation>,
}

pub fn default_max_passes(k: usize) -> usize {
    4 * k * k
}

/// Prices the maximum-weight assignment of `x`.
///
/// Starts from each item's price equal to its holder's valuation. Each pass
/// visits buyers in order; a matched buyer whose best alternative
/// `Û = max_j (x_ij − p_j)` beats their current utility `U` gets their own
/// item's price lowered by `Û − U`. If that price turns negative the item is
/// withdrawn and the buyer left unmatched with zero utility.
pub fn heuristic_solve(x: &ValuationMatrix, max_passes: usize) -> Result<HeuristicResult> {
    let k = x.k();
    let a = max_weight_assignment(x);
    let mut item_of: Vec<Option<usize>> = a.assignment().to_vec();
    let mut price = vec![0.0; k];
    let mut sold = vec![false; k];
    for (i, j) in a.pairs() {
        price[j] = x.get(i, j);
        sold[j] = true;
    }

    let mut passes = 0;
    let mut removed = 0;
    let mut converged = false;
    while passes < max_passes {
        passes += 1;
        let mut changed = false;
        for i in 0..k {
            let Some(j0) = item_of[i] else {
                continue;
            };
            let current = x.get(i, j0) - price[j0];
            let best = (0..k)
                .filter(|&j| sold[j])
                .map(|j| x.get(i, j) - price[j])
                .fold(0.0f64, f64::max);
            if best > current + REPAIR_TOL {
                price[j0] = x.get(i, j0) - best;
                changed = true;
                if price[j0] < -FEASIBILITY_TOL {
                    sold[j0] = false;
                    item_of[i] = None;
                    removed += 1;
                } else if price[j0] < 0.0 {
                    price[j0] = 0.0;
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }

    let q = Allocation::new(item_of)?;
    let u: Vec<f64> = (0..k)
        .map(|i| q.item_of(i).map_or(0.0, |j| x.get(i, j) - price[j]))
        .collect();
    let u = UtilityVector::new(u)?;
    let violation = ic_violation(&u, &q, x, FEASIBILITY_TOL)?;
    let status = match (&violation, converged) {
        (Some(_), _) => HeuristicStatus::Failed,
        (None, true) => HeuristicStatus::Converged,
        (None, false) => HeuristicStatus::NotConverged,
    };
    let solution = pricing_solution(u, q, x, x)?;
    Ok(HeuristicResult {
        solution,
        status,
        passes,
        removed,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ItemPrice;

    fn m(rows: &[&[f64]]) -> ValuationMatrix {
        ValuationMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn assignment_examples() {
        let x = m(&[&[10.0, 9.0], &[6.0, 8.0]]);
        let a = max_weight_assignment(&x);
        assert_eq!(a, Allocation::identity(2));
        assert_eq!(matching_weight(&a, &x), 18.0);

        let x = m(&[&[5.0, 0.0], &[0.0, 7.0]]);
        assert_eq!(matching_weight(&max_weight_assignment(&x), &x), 12.0);

        assert_eq!(
            max_weight_assignment(&ValuationMatrix::zeros(4)),
            Allocation::identity(4)
        );
    }

    #[test]
    fn assignment_prefers_lexicographic_ties() {
        // both permutations weigh 2
        let x = m(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(max_weight_assignment(&x), Allocation::identity(2));
        let x = m(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        assert_eq!(
            max_weight_assignment(&x),
            Allocation::new(vec![Some(1), Some(2), Some(0)]).unwrap()
        );
    }

    #[test]
    fn heuristic_examples() {
        let r = heuristic_solve(&m(&[&[10.0, 9.0], &[6.0, 8.0]]), 16).unwrap();
        assert_eq!(r.status, HeuristicStatus::Converged);
        assert_eq!(r.solution.prices, vec![ItemPrice::Sold(9.0), ItemPrice::Sold(8.0)]);
        assert_eq!(r.solution.utilities.as_slice(), &[1.0, 0.0]);
        assert_eq!(r.solution.revenue, 17.0);
        assert_eq!(r.passes, 2);

        let r = heuristic_solve(&m(&[&[10.0, 0.0], &[0.0, 8.0]]), 16).unwrap();
        assert_eq!(r.solution.revenue, 18.0);
        assert_eq!(r.passes, 1);

        let r = heuristic_solve(&m(&[&[5.0]]), 4).unwrap();
        assert_eq!(r.solution.prices, vec![ItemPrice::Sold(5.0)]);
    }

    #[test]
    fn exhausted_budget_is_flagged() {
        let r = heuristic_solve(&m(&[&[10.0, 9.0], &[6.0, 8.0]]), 1).unwrap();
        assert_eq!(r.status, HeuristicStatus::NotConverged);
    }
}
