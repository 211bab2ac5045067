//! Value, regret, envy-freeness checks and price recovery.

use std::fmt;

use crate::error::{PricingError, Result};
use crate::types::{Allocation, IntervalUncertainty, ItemPrice, PricingSolution, UtilityVector, ValuationMatrix};

/// Default absolute tolerance for exact feasibility checks.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// The first constraint a candidate `(u, q)` breaks.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// `envious` would rather take the bundle of `holder`:
    /// `u[envious] - u[holder] < rhs`.
    Envy {
        envious: usize,
        holder: usize,
        lhs: f64,
        rhs: f64,
    },
    NegativeUtility {
        buyer: usize,
        utility: f64,
    },
    /// Unmatched buyers have utility exactly zero.
    UnmatchedUtility {
        buyer: usize,
        utility: f64,
    },
    /// Matched buyer's utility exceeds the reference valuation, so the
    /// implied price is negative.
    NegativePrice {
        buyer: usize,
        item: usize,
        price: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Envy { envious, holder, lhs, rhs } => write!(
                f,
                "envy constraint (buyer {envious} vs bundle of buyer {holder}): u[{envious}] - u[{holder}] = {lhs} < {rhs}"
            ),
            Violation::NegativeUtility { buyer, utility } => {
                write!(f, "individual rationality: u[{buyer}] = {utility} < 0")
            }
            Violation::UnmatchedUtility { buyer, utility } => {
                write!(f, "unmatched buyer {buyer} has nonzero utility {utility}")
            }
            Violation::NegativePrice { buyer, item, price } => {
                write!(f, "item {item} held by buyer {buyer} has negative price {price}")
            }
        }
    }
}

fn check_dims(k: usize, u: &UtilityVector, q: &Allocation) -> Result<()> {
    if u.len() != k {
        return Err(PricingError::Dimension {
            expected: k,
            found: u.len(),
        });
    }
    if q.k() != k {
        return Err(PricingError::Dimension {
            expected: k,
            found: q.k(),
        });
    }
    Ok(())
}

/// `Σ_i (Σ_j q_ij x_ij − u_i)`: revenue of the candidate when `x` is realized.
pub fn value_under_scenario(u: &UtilityVector, q: &Allocation, x: &ValuationMatrix) -> Result<f64> {
    check_dims(x.k(), u, q)?;
    let matched: f64 = q.pairs().map(|(i, j)| x.get(i, j)).sum();
    Ok(matched - u.sum())
}

/// `opt_value − value_under_scenario(u, q, x)`.
pub fn regret(u: &UtilityVector, q: &Allocation, x: &ValuationMatrix, opt_value: f64) -> Result<f64> {
    Ok(opt_value - value_under_scenario(u, q, x)?)
}

/// Shared check for the deterministic and interval cases.
///
/// `envy_rhs(i, j)` is the right-hand side of `u_j − u_i ≥ ·` for the bundle
/// of buyer `i`; `price_ref(i, j)` is the valuation prices are recovered from.
fn first_violation(
    u: &UtilityVector,
    q: &Allocation,
    tol: f64,
    envy_rhs: impl Fn(usize, usize) -> f64,
    price_ref: impl Fn(usize, usize) -> f64,
) -> Option<Violation> {
    let k = q.k();
    for i in 0..k {
        let ui = u.get(i);
        if ui < -tol {
            return Some(Violation::NegativeUtility { buyer: i, utility: ui });
        }
        match q.item_of(i) {
            None if ui > tol => return Some(Violation::UnmatchedUtility { buyer: i, utility: ui }),
            Some(item) => {
                let price = price_ref(i, item) - ui;
                if price < -tol {
                    return Some(Violation::NegativePrice { buyer: i, item, price });
                }
            }
            None => {}
        }
    }
    for i in 0..k {
        if q.item_of(i).is_none() {
            // empty bundle: every c_ij is zero, covered by u ≥ 0
            continue;
        }
        for j in 0..k {
            if i == j {
                continue;
            }
            let lhs = u.get(j) - u.get(i);
            let rhs = envy_rhs(i, j);
            if lhs < rhs - tol {
                return Some(Violation::Envy {
                    envious: j,
                    holder: i,
                    lhs,
                    rhs,
                });
            }
        }
    }
    None
}

/// First violated IC/IR condition of `(u, q)` under `x`, if any.
///
/// Checks `u_j − u_i ≥ Σ_k q_ik (x_jk − x_ik)` for all `i ≠ j`, `u ≥ 0`,
/// zero utility for unmatched buyers and nonnegative implied prices.
pub fn ic_violation(u: &UtilityVector, q: &Allocation, x: &ValuationMatrix, tol: f64) -> Result<Option<Violation>> {
    check_dims(x.k(), u, q)?;
    Ok(first_violation(
        u,
        q,
        tol,
        |i, j| q.item_of(i).map_or(0.0, |k| x.get(j, k) - x.get(i, k)),
        |i, k| x.get(i, k),
    ))
}

pub fn is_ic_feasible(u: &UtilityVector, q: &Allocation, x: &ValuationMatrix, tol: f64) -> bool {
    matches!(ic_violation(u, q, x, tol), Ok(None))
}

/// First violated robust IC/IR condition: envy constraints use
/// `upper[j][k] − lower[i][k]`, prices are recovered at the lower bounds.
pub fn robust_violation(
    u: &UtilityVector,
    q: &Allocation,
    s: &IntervalUncertainty,
    tol: f64,
) -> Result<Option<Violation>> {
    check_dims(s.k(), u, q)?;
    let (lo, hi) = (s.lower(), s.upper());
    Ok(first_violation(
        u,
        q,
        tol,
        |i, j| q.item_of(i).map_or(0.0, |k| hi.get(j, k) - lo.get(i, k)),
        |i, k| lo.get(i, k),
    ))
}

pub fn is_robust_feasible(u: &UtilityVector, q: &Allocation, s: &IntervalUncertainty, tol: f64) -> bool {
    matches!(robust_violation(u, q, s, tol), Ok(None))
}

/// Prices implied by `(u, q)` at `x_ref`; unsold items are priced one unit
/// above the largest valuation in their column of `ceiling`.
pub fn recover_prices_with_ceiling(
    u: &UtilityVector,
    q: &Allocation,
    x_ref: &ValuationMatrix,
    ceiling: &ValuationMatrix,
) -> Result<Vec<ItemPrice>> {
    check_dims(x_ref.k(), u, q)?;
    let k = x_ref.k();
    let mut prices: Vec<ItemPrice> = (0..k).map(|j| ItemPrice::Unsold(1.0 + ceiling.column_max(j))).collect();
    for (i, j) in q.pairs() {
        let mut p = x_ref.get(i, j) - u.get(i);
        if p < -FEASIBILITY_TOL {
            return Err(PricingError::NegativePrice {
                buyer: i,
                item: j,
                price: p,
            });
        }
        if p < 0.0 {
            p = 0.0;
        }
        prices[j] = ItemPrice::Sold(p);
    }
    Ok(prices)
}

pub fn recover_prices(u: &UtilityVector, q: &Allocation, x_ref: &ValuationMatrix) -> Result<Vec<ItemPrice>> {
    recover_prices_with_ceiling(u, q, x_ref, x_ref)
}

/// Assembles prices and the reported metrics for a candidate.
pub fn pricing_solution(
    u: UtilityVector,
    q: Allocation,
    x_ref: &ValuationMatrix,
    ceiling: &ValuationMatrix,
) -> Result<PricingSolution> {
    let prices = recover_prices_with_ceiling(&u, &q, x_ref, ceiling)?;
    let revenue = prices.iter().filter(|p| p.is_sold()).map(|p| p.value()).sum();
    Ok(PricingSolution {
        welfare: u.sum(),
        sold_count: q.sold_count(),
        allocation: q,
        utilities: u,
        prices,
        revenue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x22() -> ValuationMatrix {
        ValuationMatrix::from_rows(&[vec![10.0, 9.0], vec![6.0, 8.0]]).unwrap()
    }

    fn u(v: &[f64]) -> UtilityVector {
        UtilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn value_examples() {
        let x1 = ValuationMatrix::from_rows(&[vec![5.0]]).unwrap();
        assert_eq!(
            value_under_scenario(&u(&[0.0]), &Allocation::identity(1), &x1).unwrap(),
            5.0
        );
        assert_eq!(
            value_under_scenario(&u(&[1.0, 0.0]), &Allocation::identity(2), &x22()).unwrap(),
            17.0
        );
        assert_eq!(
            value_under_scenario(&u(&[0.0, 0.0]), &Allocation::empty(2), &x22()).unwrap(),
            0.0
        );
        assert!(value_under_scenario(&u(&[0.0]), &Allocation::identity(2), &x22()).is_err());
    }

    #[test]
    fn ic_examples() {
        let diag = Allocation::identity(2);
        assert!(is_ic_feasible(&u(&[1.0, 0.0]), &diag, &x22(), FEASIBILITY_TOL));
        let v = ic_violation(&u(&[0.0, 0.0]), &diag, &x22(), FEASIBILITY_TOL).unwrap();
        assert_eq!(
            v,
            Some(Violation::Envy {
                envious: 0,
                holder: 1,
                lhs: 0.0,
                rhs: 1.0
            })
        );
        let x1 = ValuationMatrix::from_rows(&[vec![3.0]]).unwrap();
        assert!(is_ic_feasible(&u(&[0.0]), &Allocation::empty(1), &x1, FEASIBILITY_TOL));
    }

    #[test]
    fn unmatched_buyer_needs_zero_utility() {
        let x1 = ValuationMatrix::from_rows(&[vec![3.0]]).unwrap();
        let v = ic_violation(&u(&[0.5]), &Allocation::empty(1), &x1, FEASIBILITY_TOL).unwrap();
        assert!(matches!(v, Some(Violation::UnmatchedUtility { buyer: 0, .. })));
        let v = ic_violation(&u(&[4.0]), &Allocation::identity(1), &x1, FEASIBILITY_TOL).unwrap();
        assert!(matches!(v, Some(Violation::NegativePrice { item: 0, .. })));
    }

    #[test]
    fn robust_examples() {
        let s1 = IntervalUncertainty::from_rows(&[vec![2.0]], &[vec![5.0]]).unwrap();
        assert!(is_robust_feasible(
            &u(&[0.0]),
            &Allocation::identity(1),
            &s1,
            FEASIBILITY_TOL
        ));

        let degenerate = IntervalUncertainty::degenerate(&x22());
        assert!(is_robust_feasible(
            &u(&[1.0, 0.0]),
            &Allocation::identity(2),
            &degenerate,
            FEASIBILITY_TOL
        ));

        let lower = vec![vec![5.0, 0.0], vec![0.0, 5.0]];
        let s = IntervalUncertainty::from_rows(&lower, &[vec![6.0, 4.0], vec![4.0, 6.0]]).unwrap();
        assert!(is_robust_feasible(
            &u(&[0.0, 0.0]),
            &Allocation::identity(2),
            &s,
            FEASIBILITY_TOL
        ));
        let s = IntervalUncertainty::from_rows(&lower, &[vec![6.0, 7.0], vec![4.0, 6.0]]).unwrap();
        assert!(!is_robust_feasible(
            &u(&[0.0, 0.0]),
            &Allocation::identity(2),
            &s,
            FEASIBILITY_TOL
        ));
    }

    #[test]
    fn price_examples() {
        let p = recover_prices(&u(&[1.0, 0.0]), &Allocation::identity(2), &x22()).unwrap();
        assert_eq!(p, vec![ItemPrice::Sold(9.0), ItemPrice::Sold(8.0)]);

        let x1 = ValuationMatrix::from_rows(&[vec![5.0]]).unwrap();
        let p = recover_prices(&u(&[0.0]), &Allocation::identity(1), &x1).unwrap();
        assert_eq!(p, vec![ItemPrice::Sold(5.0)]);

        let x = ValuationMatrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let q = Allocation::new(vec![Some(0), None]).unwrap();
        let p = recover_prices(&u(&[0.0, 0.0]), &q, &x).unwrap();
        assert_eq!(p, vec![ItemPrice::Sold(4.0), ItemPrice::Unsold(4.0)]);

        assert!(matches!(
            recover_prices(&u(&[6.0]), &Allocation::identity(1), &x1),
            Err(PricingError::NegativePrice { .. })
        ));
    }

    #[test]
    fn regret_examples() {
        let diag = Allocation::identity(2);
        assert_eq!(regret(&u(&[1.0, 0.0]), &diag, &x22(), 17.0).unwrap(), 0.0);
        assert_eq!(
            regret(&u(&[0.0, 0.0]), &Allocation::empty(2), &x22(), 17.0).unwrap(),
            17.0
        );
        for a in [0.5, 3.0, 100.0] {
            let x = ValuationMatrix::from_rows(&[vec![a]]).unwrap();
            assert_eq!(regret(&u(&[0.0]), &Allocation::identity(1), &x, a).unwrap(), 0.0);
        }
    }
}
