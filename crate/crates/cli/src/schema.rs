//! JSON files read and written by the command line.
//!
//! Matrices are buyer-major: `lower[i][j]` is buyer `i`'s valuation bound for
//! item `j`. Every float written is first rounded to 9 significant digits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use regret_pricer::instance::{normalize_instance, NormalizedInstance, RawInstance, RawValuations};

use crate::error::CliError;

/// Rounds to 9 significant digits; non-finite values pass through.
pub fn sig9(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

pub fn sig9_all(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| sig9(x)).collect()
}

fn sig9_rows(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    m.iter().map(|r| sig9_all(r)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstanceKind {
    Interval,
    Deterministic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub kind: InstanceKind,
    pub buyers: usize,
    pub items: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demands: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuations: Option<Vec<Vec<f64>>>,
}

impl InstanceFile {
    pub fn interval(lower: Vec<Vec<f64>>, upper: Vec<Vec<f64>>) -> Self {
        Self {
            kind: InstanceKind::Interval,
            buyers: lower.len(),
            items: lower.first().map_or(0, Vec::len),
            demands: None,
            lower: Some(sig9_rows(&lower)),
            upper: Some(sig9_rows(&upper)),
            valuations: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }

    pub fn to_raw(&self) -> Result<RawInstance, CliError> {
        let valuations = match (self.kind, &self.lower, &self.upper, &self.valuations) {
            (InstanceKind::Interval, Some(lo), Some(hi), None) => RawValuations::Interval {
                lower: lo.clone(),
                upper: hi.clone(),
            },
            (InstanceKind::Deterministic, None, None, Some(v)) => RawValuations::Point(v.clone()),
            (InstanceKind::Interval, ..) => {
                return Err(CliError::Invalid(
                    "interval instance needs `lower` and `upper` only".into(),
                ))
            }
            (InstanceKind::Deterministic, ..) => {
                return Err(CliError::Invalid(
                    "deterministic instance needs `valuations` only".into(),
                ))
            }
        };
        Ok(RawInstance {
            m_items: self.items,
            n_buyers: self.buyers,
            demands: self.demands.clone().unwrap_or_else(|| vec![1; self.buyers]),
            valuations,
        })
    }

    pub fn normalize(&self) -> Result<NormalizedInstance, CliError> {
        Ok(normalize_instance(&self.to_raw()?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SoldPair {
    pub buyer: usize,
    pub item: usize,
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub mode: String,
    pub status: String,
    /// Side of the normalized square instance.
    pub k: usize,
    /// Valuation matrix used by `det` and `heuristic`: `lower`, `upper`,
    /// `point` or a file path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub eps: f64,
    /// Item of every normalized buyer row, `null` when unmatched.
    pub assignment: Vec<Option<usize>>,
    /// Utility of every normalized buyer row.
    pub utilities: Vec<f64>,
    /// Sales between original buyers and items.
    pub allocation: Vec<SoldPair>,
    /// Price of every original item; `null` for unsold items.
    pub prices: Vec<Option<f64>>,
    pub revenue: f64,
    pub welfare: f64,
    pub sold: usize,
    pub regret: Option<f64>,
    pub lower_bound: Option<f64>,
    pub lb_trace: Vec<f64>,
    pub ub_trace: Vec<f64>,
    pub cuts: usize,
    pub iterations: usize,
    pub time_s: f64,
}

impl ResultFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_digits() {
        assert_eq!(sig9(1.0 / 3.0), 0.333333333);
        assert_eq!(sig9(123456.7891234), 123456.789);
        assert_eq!(sig9(0.0), 0.0);
        assert!(sig9(f64::NAN).is_nan());
    }

    #[test]
    fn instance_round_trip() {
        let f = InstanceFile::interval(vec![vec![2.0]], vec![vec![5.0]]);
        let text = to_json(&f);
        assert!(text.contains("\"kind\": \"interval\""));
        assert_eq!(serde_json::from_str::<InstanceFile>(&text).unwrap(), f);
    }

    #[test]
    fn mismatched_kind_is_rejected() {
        let text = r#"{"kind":"deterministic","buyers":1,"items":1,"lower":[[1]],"upper":[[2]]}"#;
        let f: InstanceFile = serde_json::from_str(text).unwrap();
        assert!(matches!(f.to_raw(), Err(CliError::Invalid(_))));
    }
}
