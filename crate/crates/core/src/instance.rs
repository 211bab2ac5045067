//! Reduction of multi-demand, rectangular instances to square unit-demand ones.

use crate::error::{PricingError, Result};
use crate::types::{IntervalUncertainty, ValuationMatrix};

/// Valuation rows are buyer-major: one row per original buyer, one column per item.
#[derive(Clone, Debug, PartialEq)]
pub enum RawValuations {
    Point(Vec<Vec<f64>>),
    Interval { lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawInstance {
    pub m_items: usize,
    pub n_buyers: usize,
    pub demands: Vec<usize>,
    pub valuations: RawValuations,
}

impl RawInstance {
    /// Unit demand for every buyer.
    pub fn unit_demand(valuations: RawValuations) -> Self {
        let rows = match &valuations {
            RawValuations::Point(x) => x,
            RawValuations::Interval { lower, .. } => lower,
        };
        let n_buyers = rows.len();
        let m_items = rows.first().map_or(0, Vec::len);
        Self {
            m_items,
            n_buyers,
            demands: vec![1; n_buyers],
            valuations,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SquareData {
    Point(ValuationMatrix),
    Interval(IntervalUncertainty),
}

impl SquareData {
    pub fn k(&self) -> usize {
        match self {
            SquareData::Point(x) => x.k(),
            SquareData::Interval(s) => s.k(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedInstance {
    pub data: SquareData,
    /// Original buyer behind each square row; `None` for padding.
    pub buyer_of_row: Vec<Option<usize>>,
    /// Original item behind each square column; `None` for padding.
    pub item_of_col: Vec<Option<usize>>,
}

impl NormalizedInstance {
    pub fn k(&self) -> usize {
        self.data.k()
    }

    pub fn dummy_rows(&self) -> Vec<bool> {
        self.buyer_of_row.iter().map(Option::is_none).collect()
    }

    pub fn dummy_cols(&self) -> Vec<bool> {
        self.item_of_col.iter().map(Option::is_none).collect()
    }
}

fn check_rows(rows: &[Vec<f64>], n: usize, m: usize) -> Result<()> {
    if rows.len() != n {
        return Err(PricingError::Dimension {
            expected: n,
            found: rows.len(),
        });
    }
    for row in rows {
        if row.len() != m {
            return Err(PricingError::Dimension {
                expected: m,
                found: row.len(),
            });
        }
    }
    Ok(())
}

fn expand(rows: &[Vec<f64>], buyer_of_row: &[Option<usize>], k: usize) -> Vec<Vec<f64>> {
    buyer_of_row
        .iter()
        .map(|b| {
            let mut row = vec![0.0; k];
            if let Some(b) = b {
                row[..rows[*b].len()].copy_from_slice(&rows[*b]);
            }
            row
        })
        .collect()
}

/// Splits each buyer into `D_i` unit-demand copies and pads with zero rows or
/// columns to a `K × K` matrix, `K = max(items, total demand)`.
pub fn normalize_instance(raw: &RawInstance) -> Result<NormalizedInstance> {
    let n = raw.n_buyers;
    let m = raw.m_items;
    if raw.demands.len() != n {
        return Err(PricingError::Dimension {
            expected: n,
            found: raw.demands.len(),
        });
    }
    if let Some((i, d)) = raw.demands.iter().enumerate().find(|(_, d)| **d == 0 || **d > m) {
        return Err(PricingError::InvalidInput(format!(
            "buyer {i} has demand {d}, expected 1..={m}"
        )));
    }
    match &raw.valuations {
        RawValuations::Point(x) => check_rows(x, n, m)?,
        RawValuations::Interval { lower, upper } => {
            check_rows(lower, n, m)?;
            check_rows(upper, n, m)?;
        }
    }

    let mut buyer_of_row: Vec<Option<usize>> = raw
        .demands
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| std::iter::repeat_n(Some(i), d))
        .collect();
    let k = buyer_of_row.len().max(m);
    if k == 0 {
        return Err(PricingError::InvalidInput("instance has no buyers and no items".into()));
    }
    buyer_of_row.resize(k, None);
    let item_of_col = (0..k).map(|j| (j < m).then_some(j)).collect();

    let data = match &raw.valuations {
        RawValuations::Point(x) => SquareData::Point(ValuationMatrix::from_rows(&expand(x, &buyer_of_row, k))?),
        RawValuations::Interval { lower, upper } => SquareData::Interval(IntervalUncertainty::from_rows(
            &expand(lower, &buyer_of_row, k),
            &expand(upper, &buyer_of_row, k),
        )?),
    };
    Ok(NormalizedInstance {
        data,
        buyer_of_row,
        item_of_col,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(rows: Vec<Vec<f64>>, demands: Vec<usize>) -> RawInstance {
        RawInstance {
            m_items: rows[0].len(),
            n_buyers: rows.len(),
            demands,
            valuations: RawValuations::Point(rows),
        }
    }

    #[test]
    fn single_buyer_single_item() {
        let n = normalize_instance(&point(vec![vec![5.0]], vec![1])).unwrap();
        assert_eq!(
            n.data,
            SquareData::Point(ValuationMatrix::from_rows(&[vec![5.0]]).unwrap())
        );
        assert_eq!(n.buyer_of_row, vec![Some(0)]);
        assert_eq!(n.item_of_col, vec![Some(0)]);
    }

    #[test]
    fn demand_two_duplicates_row() {
        let n = normalize_instance(&point(vec![vec![7.0, 4.0]], vec![2])).unwrap();
        let expect = ValuationMatrix::from_rows(&[vec![7.0, 4.0], vec![7.0, 4.0]]).unwrap();
        assert_eq!(n.data, SquareData::Point(expect));
        assert_eq!(n.buyer_of_row, vec![Some(0), Some(0)]);
    }

    #[test]
    fn three_buyers_two_items_gets_dummy_item() {
        let raw = point(vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], vec![1, 1, 1]);
        let n = normalize_instance(&raw).unwrap();
        let SquareData::Point(x) = &n.data else { panic!() };
        assert_eq!(x.k(), 3);
        assert!((0..3).all(|i| x.get(i, 2) == 0.0));
        assert_eq!(n.dummy_cols(), vec![false, false, true]);
        assert_eq!(n.dummy_rows(), vec![false, false, false]);
    }

    #[test]
    fn interval_padding_is_zero_width() {
        let raw = RawInstance {
            m_items: 2,
            n_buyers: 1,
            demands: vec![1],
            valuations: RawValuations::Interval {
                lower: vec![vec![1.0, 2.0]],
                upper: vec![vec![3.0, 4.0]],
            },
        };
        let n = normalize_instance(&raw).unwrap();
        let SquareData::Interval(s) = &n.data else { panic!() };
        assert_eq!(s.lower().row(1), &[0.0, 0.0]);
        assert_eq!(s.upper().row(1), &[0.0, 0.0]);
        assert_eq!(n.buyer_of_row, vec![Some(0), None]);
    }

    #[test]
    fn rejects_mismatched_demands() {
        let mut raw = point(vec![vec![1.0]], vec![1]);
        raw.demands = vec![1, 1];
        assert!(normalize_instance(&raw).is_err());
        raw.demands = vec![2];
        assert!(normalize_instance(&raw).is_err());
        raw.demands = vec![0];
        assert!(normalize_instance(&raw).is_err());
    }

    #[test]
    fn idempotent_on_square_unit_demand() {
        let raw = point(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![1, 1]);
        let once = normalize_instance(&raw).unwrap();
        let SquareData::Point(x) = &once.data else { panic!() };
        let twice = normalize_instance(&point(x.rows(), vec![1, 1])).unwrap();
        assert_eq!(once, twice);
    }
}
