//! Best-bound branch-and-bound over binary variables.
//!
//! Children are evaluated eagerly: right after a node is branched, both child
//! relaxations are solved on the shared [`LpEngine`] and pushed with their own
//! LP bound. The open node with the smallest bound (internal minimization) is
//! expanded next; ties go to the deeper node, then to the older one.
//! Each open node keeps its optimal basis, and its first child starts from it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::MilpResult;
use crate::model::{MilpModel, Sense, VarKind};
use crate::simplex::{BasisSnapshot, LpEngine, LpStatus};
use crate::{MilpSolution, SolveStatus};

/// Binary values closer than this to 0 or 1 count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Absolute gap between incumbent and best bound accepted as optimal.
    pub gap: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap: 0.0,
            node_limit: 2_000_000,
            time_limit: None,
        }
    }
}

struct Node {
    bound: f64,
    depth: usize,
    id: usize,
    fixes: Vec<(usize, f64)>,
    basis: BasisSnapshot,
    branch_var: usize,
    branch_value: f64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: "greater" means "expand first".
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.id.cmp(&self.id))
    }
}

enum Evaluated {
    Pruned,
    Integral(f64, Vec<f64>),
    Fractional(f64, usize, f64),
}

struct Search {
    engine: LpEngine,
    binaries: Vec<usize>,
    base_bounds: Vec<(f64, f64)>,
    applied: Vec<usize>,
}

impl Search {
    fn apply(&mut self, fixes: &[(usize, f64)]) {
        for &j in &self.applied {
            let (lo, hi) = self.base_bounds[j];
            self.engine.set_bounds(j, lo, hi);
        }
        self.applied.clear();
        for &(j, v) in fixes {
            self.engine.set_bounds(j, v, v);
            self.applied.push(j);
        }
    }

    fn evaluate(&mut self, fixes: &[(usize, f64)], start: Option<&BasisSnapshot>) -> MilpResult<(LpStatus, Evaluated)> {
        self.apply(fixes);
        if let Some(snap) = start {
            self.engine.restore(snap)?;
        }
        let status = self.engine.solve()?;
        if status != LpStatus::Optimal {
            return Ok((status, Evaluated::Pruned));
        }
        let obj = self.engine.objective();
        let values = self.engine.values();
        let mut pick = None;
        let mut best = f64::INFINITY;
        for &j in &self.binaries {
            let v = values[j];
            let frac = (v - v.round()).abs();
            if frac > INTEGRALITY_TOL {
                let dist = (v - 0.5).abs();
                if dist < best {
                    best = dist;
                    pick = Some((j, v));
                }
            }
        }
        Ok(match pick {
            Some((j, v)) => (status, Evaluated::Fractional(obj, j, v)),
            None => {
                let mut vals = values;
                for &j in &self.binaries {
                    vals[j] = vals[j].round();
                }
                (status, Evaluated::Integral(obj, vals))
            }
        })
    }
}

pub(crate) fn branch_and_bound(model: &MilpModel, opts: &SolveOptions) -> MilpResult<MilpSolution> {
    let start = Instant::now();
    let sign = match model.sense() {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let constant = model.objective_constant();
    let external = |internal: f64| sign * internal + constant;

    let binaries: Vec<usize> = model
        .variables()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let mut engine = LpEngine::new(model);
    // binaries with fractional bounds are rounded inward
    for &j in &binaries {
        let (lo, hi) = engine.bounds(j);
        engine.set_bounds(j, lo.ceil(), hi.floor());
    }
    let base_bounds = (0..model.num_vars()).map(|j| engine.bounds(j)).collect();

    let mut search = Search {
        engine,
        binaries,
        base_bounds,
        applied: Vec::new(),
    };

    let mut nodes = 0usize;
    let (root_status, root) = search.evaluate(&[], None)?;
    nodes += 1;
    match root_status {
        LpStatus::Infeasible => {
            return Ok(MilpSolution::without_incumbent(
                SolveStatus::Infeasible,
                f64::NAN,
                nodes,
            ))
        }
        LpStatus::Unbounded => return Ok(MilpSolution::without_incumbent(SolveStatus::Unbounded, f64::NAN, nodes)),
        LpStatus::IterationLimit => {
            return Ok(MilpSolution::without_incumbent(
                SolveStatus::IterationLimit,
                f64::NAN,
                nodes,
            ))
        }
        LpStatus::Optimal => {}
    }

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    // bound of a node whose expansion was interrupted by a limit
    let mut interrupted = f64::INFINITY;

    match root {
        Evaluated::Integral(obj, vals) => incumbent = Some((obj, vals)),
        Evaluated::Fractional(obj, j, v) => {
            heap.push(Node {
                bound: obj,
                depth: 0,
                id: next_id,
                fixes: Vec::new(),
                basis: search.engine.snapshot(),
                branch_var: j,
                branch_value: v,
            });
            next_id += 1;
        }
        Evaluated::Pruned => unreachable!("root evaluation is optimal"),
    }

    let tolerance = |inc: f64| opts.gap.max(1e-9 * inc.abs().max(1.0));
    let mut limit_status = None;

    while let Some(top) = heap.peek() {
        if let Some((inc, _)) = &incumbent {
            if inc - top.bound <= tolerance(*inc) {
                break;
            }
        }
        if nodes >= opts.node_limit {
            limit_status = Some(SolveStatus::IterationLimit);
            break;
        }
        if let Some(limit) = opts.time_limit {
            if start.elapsed() >= limit {
                limit_status = Some(SolveStatus::TimeLimit);
                break;
            }
        }
        let node = heap.pop().expect("peeked");

        // nearer rounding first
        let j = node.branch_var;
        let first = if node.branch_value >= 0.5 { 1.0 } else { 0.0 };
        for (n, value) in [first, 1.0 - first].into_iter().enumerate() {
            let mut fixes = node.fixes.clone();
            fixes.push((j, value));
            // the second child starts from the first one's basis
            let start = (n == 0).then_some(&node.basis);
            let (status, eval) = search.evaluate(&fixes, start)?;
            nodes += 1;
            if status == LpStatus::IterationLimit {
                limit_status = Some(SolveStatus::IterationLimit);
            }
            match eval {
                Evaluated::Pruned => {}
                Evaluated::Integral(obj, vals) => {
                    if incumbent.as_ref().is_none_or(|(inc, _)| obj < *inc) {
                        incumbent = Some((obj, vals));
                    }
                }
                Evaluated::Fractional(obj, bj, bv) => {
                    let dominated = incumbent.as_ref().is_some_and(|(inc, _)| inc - obj <= tolerance(*inc));
                    if !dominated {
                        heap.push(Node {
                            bound: obj,
                            depth: node.depth + 1,
                            id: next_id,
                            fixes,
                            basis: search.engine.snapshot(),
                            branch_var: bj,
                            branch_value: bv,
                        });
                        next_id += 1;
                    }
                }
            }
        }
        if limit_status.is_some() {
            interrupted = node.bound;
            break;
        }
    }

    let open_bound = heap.peek().map_or(f64::INFINITY, |n| n.bound).min(interrupted);
    let status = match (&incumbent, limit_status) {
        (None, None) => {
            return Ok(MilpSolution::without_incumbent(
                SolveStatus::Infeasible,
                f64::NAN,
                nodes,
            ));
        }
        (Some(_), None) => SolveStatus::Optimal,
        (_, Some(st)) => st,
    };
    let bound = match &incumbent {
        Some((inc, _)) => open_bound.min(*inc),
        None => open_bound,
    };
    Ok(match incumbent {
        Some((_, values)) => {
            let objective_value = model.evaluate_objective(&values);
            MilpSolution {
                status,
                objective_value,
                bound: external(bound),
                values,
                nodes_explored: nodes,
            }
        }
        None => MilpSolution::without_incumbent(status, external(bound), nodes),
    })
}
