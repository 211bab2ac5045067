//! Square valuation data, allocations and pricing results.
//!
//! Matrices are buyer-major: entry `(i, j)` is buyer `i`'s valuation of item
//! `j`. All types validate their invariants on construction and are immutable
//! afterwards.

use crate::error::{PricingError, Result};

/// One concrete K×K valuation profile.
#[derive(Clone, Debug, PartialEq)]
pub struct ValuationMatrix {
    k: usize,
    x: Vec<f64>,
}

impl ValuationMatrix {
    /// Builds a matrix from row-major data of length `k * k`.
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(PricingError::InvalidInput("matrix side must be positive".into()));
        }
        if data.len() != k * k {
            return Err(PricingError::Dimension {
                expected: k * k,
                found: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(PricingError::InvalidInput(format!(
                "valuations must be finite and nonnegative, got {v}"
            )));
        }
        Ok(Self { k, x: data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let mut data = Vec::with_capacity(k * k);
        for row in rows {
            if row.len() != k {
                return Err(PricingError::Dimension {
                    expected: k,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(k, data)
    }

    pub fn zeros(k: usize) -> Self {
        Self { k, x: vec![0.0; k * k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, buyer: usize, item: usize) -> f64 {
        self.x[buyer * self.k + item]
    }

    pub fn row(&self, buyer: usize) -> &[f64] {
        &self.x[buyer * self.k..(buyer + 1) * self.k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.k).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    /// Largest valuation any buyer has for `item`.
    pub fn column_max(&self, item: usize) -> f64 {
        (0..self.k).map(|i| self.get(i, item)).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.k, self.x.iter().map(|v| v * factor).collect())
    }

    /// Copy with buyers reordered: row `i` of the result is row `perm[i]`.
    pub fn permute_buyers(&self, perm: &[usize]) -> Self {
        let mut x = Vec::with_capacity(self.x.len());
        for &p in perm {
            x.extend_from_slice(self.row(p));
        }
        Self { k: self.k, x }
    }
}

/// Interval uncertainty set: each valuation lies in `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalUncertainty {
    lower: ValuationMatrix,
    upper: ValuationMatrix,
}

impl IntervalUncertainty {
    pub fn new(lower: ValuationMatrix, upper: ValuationMatrix) -> Result<Self> {
        if lower.k() != upper.k() {
            return Err(PricingError::Dimension {
                expected: lower.k(),
                found: upper.k(),
            });
        }
        for (idx, (lo, hi)) in lower.as_slice().iter().zip(upper.as_slice()).enumerate() {
            if lo > hi {
                return Err(PricingError::InvalidInput(format!(
                    "interval ({}, {}) has lower bound {lo} above upper bound {hi}",
                    idx / lower.k(),
                    idx % lower.k()
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn from_rows(lower: &[Vec<f64>], upper: &[Vec<f64>]) -> Result<Self> {
        Self::new(ValuationMatrix::from_rows(lower)?, ValuationMatrix::from_rows(upper)?)
    }

    /// Zero-width intervals around a single scenario.
    pub fn degenerate(x: &ValuationMatrix) -> Self {
        Self {
            lower: x.clone(),
            upper: x.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.lower.k()
    }

    pub fn lower(&self) -> &ValuationMatrix {
        &self.lower
    }

    pub fn upper(&self) -> &ValuationMatrix {
        &self.upper
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: &ValuationMatrix) -> bool {
        x.k() == self.k()
            && x.as_slice()
                .iter()
                .zip(self.lower.as_slice().iter().zip(self.upper.as_slice()))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn permute_buyers(&self, perm: &[usize]) -> Self {
        Self {
            lower: self.lower.permute_buyers(perm),
            upper: self.upper.permute_buyers(perm),
        }
    }
}

/// A finite list of scenarios of equal dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteScenarioSet {
    scenarios: Vec<ValuationMatrix>,
}

impl DiscreteScenarioSet {
    pub fn new(scenarios: Vec<ValuationMatrix>) -> Result<Self> {
        let first = scenarios
            .first()
            .ok_or_else(|| PricingError::InvalidInput("scenario set must not be empty".into()))?;
        let k = first.k();
        if let Some(bad) = scenarios.iter().find(|s| s.k() != k) {
            return Err(PricingError::Dimension {
                expected: k,
                found: bad.k(),
            });
        }
        Ok(Self { scenarios })
    }

    pub fn k(&self) -> usize {
        self.scenarios[0].k()
    }

    pub fn scenarios(&self) -> &[ValuationMatrix] {
        &self.scenarios
    }
}

/// Partial one-to-one assignment of items to buyers.
///
/// Stored as `item_of[buyer]`, so every buyer holds at most one item; the
/// constructor rejects an item assigned twice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation {
    item_of: Vec<Option<usize>>,
}

impl Allocation {
    pub fn new(item_of: Vec<Option<usize>>) -> Result<Self> {
        let k = item_of.len();
        let mut seen = vec![false; k];
        for item in item_of.iter().flatten() {
            if *item >= k {
                return Err(PricingError::InvalidInput(format!(
                    "item {item} out of range for K={k}"
                )));
            }
            if seen[*item] {
                return Err(PricingError::InvalidInput(format!("item {item} allocated twice")));
            }
            seen[*item] = true;
        }
        Ok(Self { item_of })
    }

    pub fn empty(k: usize) -> Self {
        Self { item_of: vec![None; k] }
    }

    pub fn identity(k: usize) -> Self {
        Self {
            item_of: (0..k).map(Some).collect(),
        }
    }

    /// From a 0/1 matrix with row and column sums at most one.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self> {
        let k = rows.len();
        let mut item_of = vec![None; k];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(PricingError::Dimension {
                    expected: k,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 if item_of[i].is_none() => item_of[i] = Some(j),
                    1 => return Err(PricingError::InvalidInput(format!("buyer {i} holds two items"))),
                    _ => return Err(PricingError::InvalidInput(format!("entry ({i}, {j}) is not binary"))),
                }
            }
        }
        Self::new(item_of)
    }

    pub fn k(&self) -> usize {
        self.item_of.len()
    }

    pub fn item_of(&self, buyer: usize) -> Option<usize> {
        self.item_of[buyer]
    }

    pub fn buyer_of(&self, item: usize) -> Option<usize> {
        self.item_of.iter().position(|&it| it == Some(item))
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.item_of
    }

    #[inline]
    pub fn is_assigned(&self, buyer: usize, item: usize) -> bool {
        self.item_of[buyer] == Some(item)
    }

    pub fn sold_count(&self) -> usize {
        self.item_of.iter().flatten().count()
    }

    /// Matched `(buyer, item)` pairs in buyer order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.item_of.iter().enumerate().filter_map(|(i, it)| it.map(|j| (i, j)))
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        let k = self.k();
        (0..k)
            .map(|i| (0..k).map(|j| u8::from(self.is_assigned(i, j))).collect())
            .collect()
    }

    pub fn permute_buyers(&self, perm: &[usize]) -> Self {
        Self {
            item_of: perm.iter().map(|&p| self.item_of[p]).collect(),
        }
    }
}

/// Per-buyer utilities. Entries are finite; the sign is checked by the
/// feasibility predicates so that invalid candidates can still be examined.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilityVector(Vec<f64>);

impl UtilityVector {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if let Some(v) = u.iter().find(|v| !v.is_finite()) {
            return Err(PricingError::InvalidInput(format!("utility {v} is not finite")));
        }
        Ok(Self(u))
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, buyer: usize) -> f64 {
        self.0[buyer]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Posted price of one item.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ItemPrice {
    Sold(f64),
    /// Unsold item, posted above every buyer's valuation.
    Unsold(f64),
}

impl ItemPrice {
    pub fn value(self) -> f64 {
        match self {
            ItemPrice::Sold(p) | ItemPrice::Unsold(p) => p,
        }
    }

    pub fn is_sold(self) -> bool {
        matches!(self, ItemPrice::Sold(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PricingSolution {
    pub allocation: Allocation,
    pub utilities: UtilityVector,
    pub prices: Vec<ItemPrice>,
    /// Sum of the prices of sold items.
    pub revenue: f64,
    /// Sum of buyers' utilities.
    pub welfare: f64,
    pub sold_count: usize,
}

impl PricingSolution {
    /// Sold items excluding padding rows/columns.
    pub fn sold_excluding(&self, dummy_buyer: &[bool], dummy_item: &[bool]) -> usize {
        self.allocation
            .pairs()
            .filter(|&(i, j)| !dummy_buyer[i] && !dummy_item[j])
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valuation_matrix_rejects_bad_entries() {
        assert!(ValuationMatrix::from_rows(&[vec![1.0, 2.0]]).is_err());
        assert!(ValuationMatrix::from_rows(&[vec![-1.0]]).is_err());
        assert!(ValuationMatrix::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(ValuationMatrix::from_rows(&[]).is_err());
    }

    #[test]
    fn interval_rejects_crossed_bounds() {
        assert!(IntervalUncertainty::from_rows(&[vec![3.0]], &[vec![2.0]]).is_err());
        assert!(IntervalUncertainty::from_rows(&[vec![2.0]], &[vec![2.0]])
            .unwrap()
            .is_degenerate());
    }

    #[test]
    fn allocation_rejects_double_sale() {
        assert!(Allocation::new(vec![Some(0), Some(0)]).is_err());
        assert!(Allocation::from_matrix(&[vec![1, 1], vec![0, 0]]).is_err());
        assert!(Allocation::from_matrix(&[vec![1, 0], vec![1, 0]]).is_err());
        let a = Allocation::from_matrix(&[vec![0, 1], vec![0, 0]]).unwrap();
        assert_eq!(a.item_of(0), Some(1));
        assert_eq!(a.buyer_of(1), Some(0));
        assert_eq!(a.sold_count(), 1);
    }

    #[test]
    fn scenario_set_requires_uniform_dimension() {
        assert!(DiscreteScenarioSet::new(vec![]).is_err());
        let a = ValuationMatrix::zeros(1);
        let b = ValuationMatrix::zeros(2);
        assert!(DiscreteScenarioSet::new(vec![a, b]).is_err());
    }
}
