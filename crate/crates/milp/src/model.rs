//! Model description for mixed-binary linear programs.
//!
//! A [`MilpModel`] is a list of bounded variables (continuous or binary), a
//! list of linear constraints with sparse coefficients, and a linear objective
//! with a constant term. Models are plain data: building one never touches a
//! solver.
//!
//! # Text dump format
//!
//! [`MilpModel::to_text`] writes one item per line:
//!
//! ```text
//! sense max
//! objective 0 + 5 a + 4 b
//! var a binary 0 1
//! var b binary 0 1
//! con pack: 1 a + 1 b <= 1
//! ```
//!
//! `objective` starts with the constant term; `var` lines carry kind, lower and
//! upper bound (`-inf`/`inf` for missing bounds); `con` lines carry the
//! constraint name, the sparse left-hand side, the relation (`<=`, `>=`, `=`)
//! and the right-hand side. Coefficients use Rust's shortest round-trip
//! formatting so the dump is exact.

use std::fmt::Write as _;

use crate::error::{MilpError, MilpResult};

/// Index of a variable inside its model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MilpModel {
    sense: Sense,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    objective_constant: f64,
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            variables: Vec::new(),
            constraints: Vec::new(),
            objective: Vec::new(),
            objective_constant: 0.0,
        }
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    /// Dense objective coefficients, one per variable.
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        self.objective.push(0.0);
        id
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    /// Adds `c` to the objective coefficient of `var`.
    pub fn add_objective_term(&mut self, var: VarId, c: f64) {
        self.objective[var.0] += c;
    }

    pub fn add_objective_constant(&mut self, c: f64) {
        self.objective_constant += c;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> usize {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Tightens the bounds of an existing variable.
    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.variables[var.0];
        v.lower = lower;
        v.upper = upper;
    }

    pub fn validate(&self) -> MilpResult<()> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(MilpError::InvalidModel(format!("variable {} has a NaN bound", v.name)));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(MilpError::InvalidModel(format!(
                    "variable {} has an empty infinite bound",
                    v.name
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(MilpError::InvalidModel(format!(
                    "binary variable {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(MilpError::InvalidModel(format!(
                    "objective coefficient of {} is not finite",
                    self.variables[j].name
                )));
            }
        }
        if !self.objective_constant.is_finite() {
            return Err(MilpError::InvalidModel("objective constant is not finite".into()));
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(MilpError::InvalidModel(format!(
                    "constraint {} has a non-finite rhs",
                    c.name
                )));
            }
            for &(v, a) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(MilpError::InvalidModel(format!(
                        "constraint {} references unknown variable {}",
                        c.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(MilpError::InvalidModel(format!(
                        "constraint {} has a non-finite coefficient",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Objective value of `values` including the constant term.
    pub fn evaluate_objective(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().zip(values).map(|(c, x)| c * x).sum::<f64>()
    }

    /// Largest violation of any bound or constraint by `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(v, a)| a * values[v.0]).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "sense {sense}");
        let _ = write!(out, "objective {}", fmt_num(self.objective_constant));
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " + {} {}", fmt_num(c), self.variables[j].name);
            }
        }
        out.push('\n');
        for v in &self.variables {
            let kind = match v.kind {
                VarKind::Continuous => "continuous",
                VarKind::Binary => "binary",
            };
            let _ = writeln!(out, "var {} {} {} {}", v.name, kind, fmt_num(v.lower), fmt_num(v.upper));
        }
        for c in &self.constraints {
            let _ = write!(out, "con {}:", c.name);
            for (n, &(v, a)) in c.terms.iter().enumerate() {
                let sep = if n == 0 { " " } else { " + " };
                let _ = write!(out, "{sep}{} {}", fmt_num(a), self.variables[v.0].name);
            }
            if c.terms.is_empty() {
                out.push_str(" 0");
            }
            let _ = writeln!(out, " {} {}", c.relation.symbol(), fmt_num(c.rhs));
        }
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}
