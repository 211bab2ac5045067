//! Random interval instances and the averaged experiment table.
//!
//! # Instance stream
//!
//! An instance is drawn from a ChaCha20 generator seeded with
//! `ChaCha20Rng::seed_from_u64(seed)`. Entries are visited row-major
//! (buyer `i`, then item `j`); for each entry two uniform `[0, 1)` doubles
//! `a`, `b` are taken in that order and
//! `lower = x_min + (x_max − x_min)·a`, `upper = lower + Δ·b`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{PricingError, Result};
use crate::robust::{solve_robust_with, RobustOptions, RobustStatus};
use crate::types::{IntervalUncertainty, ValuationMatrix};

/// Per-instance time limit used when none is given.
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(120);

pub const CSV_HEADER: &str = "K,optimal_regret,robust_revenue,robust_welfare,sold_items,time_s,reps";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorParams {
    pub x_min_lower: f64,
    pub x_max_lower: f64,
    pub delta: f64,
    pub k: usize,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.x_min_lower.is_finite()
            && self.x_max_lower.is_finite()
            && self.delta.is_finite()
            && 0.0 <= self.x_min_lower
            && self.x_min_lower <= self.x_max_lower
            && self.delta >= 0.0;
        if !ok {
            return Err(PricingError::InvalidInput(format!(
                "need 0 <= xmin <= xmax and delta >= 0, got ({}, {}, {})",
                self.x_min_lower, self.x_max_lower, self.delta
            )));
        }
        if self.k == 0 {
            return Err(PricingError::InvalidInput("K must be positive".into()));
        }
        Ok(())
    }
}

/// Value ranges `(x_min, x_max, Δ)` without size or seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueRanges {
    pub x_min_lower: f64,
    pub x_max_lower: f64,
    pub delta: f64,
}

impl ValueRanges {
    pub fn with(self, k: usize, seed: u64) -> GeneratorParams {
        GeneratorParams {
            x_min_lower: self.x_min_lower,
            x_max_lower: self.x_max_lower,
            delta: self.delta,
            k,
            seed,
        }
    }
}

/// The four parameter rows of the reference experiment table.
pub const TABLE1_PRESETS: [(&str, ValueRanges); 4] = [
    (
        "table1-row1",
        ValueRanges {
            x_min_lower: 10.0,
            x_max_lower: 500.0,
            delta: 30.0,
        },
    ),
    (
        "table1-row2",
        ValueRanges {
            x_min_lower: 10.0,
            x_max_lower: 500.0,
            delta: 50.0,
        },
    ),
    (
        "table1-row3",
        ValueRanges {
            x_min_lower: 100.0,
            x_max_lower: 500.0,
            delta: 50.0,
        },
    ),
    (
        "table1-row4",
        ValueRanges {
            x_min_lower: 100.0,
            x_max_lower: 1000.0,
            delta: 50.0,
        },
    ),
];

pub fn preset(name: &str) -> Option<ValueRanges> {
    TABLE1_PRESETS.iter().find(|(n, _)| *n == name).map(|(_, r)| *r)
}

pub fn generate_instance(p: &GeneratorParams) -> Result<IntervalUncertainty> {
    p.validate()?;
    let k = p.k;
    let mut rng = ChaCha20Rng::seed_from_u64(p.seed);
    let mut lower = Vec::with_capacity(k * k);
    let mut upper = Vec::with_capacity(k * k);
    for _ in 0..k * k {
        let a: f64 = rng.gen();
        let b: f64 = rng.gen();
        let lo = p.x_min_lower + (p.x_max_lower - p.x_min_lower) * a;
        lower.push(lo);
        upper.push(lo + p.delta * b);
    }
    IntervalUncertainty::new(ValuationMatrix::new(k, lower)?, ValuationMatrix::new(k, upper)?)
}

/// Outcome of one repetition.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    /// `Err` carries the failure message.
    pub status: std::result::Result<RobustStatus, String>,
    pub regret: f64,
    pub revenue: f64,
    pub welfare: f64,
    pub sold: usize,
    pub time_s: f64,
    pub cuts: usize,
    pub iterations: usize,
    pub lb_trace: Vec<f64>,
    pub ub_trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct StatusCounts {
    pub optimal: usize,
    pub iteration_limit: usize,
    pub time_limit: usize,
    pub failed: usize,
}

/// One table row: means over the repetitions that reached optimality.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub ranges: ValueRanges,
    pub k: usize,
    pub mean_regret: f64,
    pub mean_revenue: f64,
    pub mean_welfare: f64,
    pub mean_sold: f64,
    pub mean_time_s: f64,
    pub reps: usize,
    pub statuses: StatusCounts,
    /// Per-seed records in seed order.
    pub runs: Vec<RunRecord>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub k_list: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    pub robust: RobustOptions,
    /// Worker threads for repetitions.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k_list: vec![5],
            reps: 10,
            base_seed: 0,
            robust: RobustOptions {
                time_limit: Some(DEFAULT_TIME_LIMIT),
                ..RobustOptions::default()
            },
            jobs: 1,
        }
    }
}

fn run_one(p: &GeneratorParams, opts: &RobustOptions) -> RunRecord {
    let start = Instant::now();
    let outcome = generate_instance(p).and_then(|s| solve_robust_with(&s, opts));
    let time_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(r) => RunRecord {
            seed: p.seed,
            status: Ok(r.status),
            regret: r.regret,
            revenue: r.solution.revenue,
            welfare: r.solution.welfare,
            sold: r.solution.sold_count,
            time_s,
            cuts: r.cuts.len(),
            iterations: r.iterations,
            lb_trace: r.lb_trace,
            ub_trace: r.ub_trace,
        },
        Err(e) => RunRecord {
            seed: p.seed,
            status: Err(e.to_string()),
            regret: f64::NAN,
            revenue: f64::NAN,
            welfare: f64::NAN,
            sold: 0,
            time_s,
            cuts: 0,
            iterations: 0,
            lb_trace: Vec::new(),
            ub_trace: Vec::new(),
        },
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Solves `reps` instances (seeds `base_seed + r`) for every range and K,
/// in that order, and averages them. Failed runs are recorded, never fatal.
pub fn run_experiment(ranges: &[ValueRanges], cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    if cfg.reps == 0 {
        return Err(PricingError::InvalidInput("reps must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for r in ranges {
        for &k in &cfg.k_list {
            let params: Vec<GeneratorParams> = (0..cfg.reps as u64)
                .map(|rep| r.with(k, cfg.base_seed.wrapping_add(rep)))
                .collect();
            params[0].validate()?;
            let runs = run_all(&params, &cfg.robust, cfg.jobs.max(1));
            rows.push(aggregate(*r, k, runs));
        }
    }
    Ok(rows)
}

fn run_all(params: &[GeneratorParams], opts: &RobustOptions, jobs: usize) -> Vec<RunRecord> {
    if jobs == 1 {
        return params.iter().map(|p| run_one(p, opts)).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<RunRecord>>> = Mutex::new(vec![None; params.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(params.len()) {
            scope.spawn(|| loop {
                let n = next.fetch_add(1, Ordering::Relaxed);
                let Some(p) = params.get(n) else { break };
                let rec = run_one(p, opts);
                out.lock().expect("worker panicked")[n] = Some(rec);
            });
        }
    });
    out.into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every repetition ran"))
        .collect()
}

fn aggregate(ranges: ValueRanges, k: usize, runs: Vec<RunRecord>) -> ExperimentRow {
    let mut statuses = StatusCounts::default();
    for r in &runs {
        match r.status {
            Ok(RobustStatus::Optimal) => statuses.optimal += 1,
            Ok(RobustStatus::IterationLimit) => statuses.iteration_limit += 1,
            Ok(RobustStatus::TimeLimit) => statuses.time_limit += 1,
            Err(_) => statuses.failed += 1,
        }
    }
    let done = || runs.iter().filter(|r| r.status == Ok(RobustStatus::Optimal));
    ExperimentRow {
        ranges,
        k,
        mean_regret: mean(done().map(|r| r.regret)),
        mean_revenue: mean(done().map(|r| r.revenue)),
        mean_welfare: mean(done().map(|r| r.welfare)),
        mean_sold: mean(done().map(|r| r.sold as f64)),
        mean_time_s: mean(done().map(|r| r.time_s)),
        reps: runs.len(),
        statuses,
        runs,
    }
}

/// The seven table columns of a row, as written to CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub k: usize,
    pub optimal_regret: f64,
    pub robust_revenue: f64,
    pub robust_welfare: f64,
    pub sold_items: f64,
    pub time_s: f64,
    pub reps: usize,
}

impl From<&ExperimentRow> for CsvRow {
    fn from(r: &ExperimentRow) -> Self {
        Self {
            k: r.k,
            optimal_regret: r.mean_regret,
            robust_revenue: r.mean_revenue,
            robust_welfare: r.mean_welfare,
            sold_items: r.mean_sold,
            time_s: r.mean_time_s,
            reps: r.reps,
        }
    }
}

pub fn write_csv(rows: &[CsvRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.2},{:.2},{:.2},{:.2},{:.2},{}\n",
            r.k, r.optimal_regret, r.robust_revenue, r.robust_welfare, r.sold_items, r.time_s, r.reps
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let bad = |line: usize, what: &str| PricingError::InvalidInput(format!("csv line {line}: {what}"));
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(bad(1, "unexpected header"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(n + 2, "expected 7 fields"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n + 2, "bad number"));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(n + 2, "bad integer"));
            Ok(CsvRow {
                k: int(f[0])?,
                optimal_regret: num(f[1])?,
                robust_revenue: num(f[2])?,
                robust_welfare: num(f[3])?,
                sold_items: num(f[4])?,
                time_s: num(f[5])?,
                reps: int(f[6])?,
            })
        })
        .collect()
}
