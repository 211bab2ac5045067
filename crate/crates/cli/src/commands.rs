use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pricer_milp::{SolveOptions, SolveStatus};
use regret_pricer::bench::{self, run_experiment, write_csv, CsvRow, ExperimentConfig, GeneratorParams, ValueRanges};
use regret_pricer::det::{build_deterministic_milp, solve_deterministic_with};
use regret_pricer::feasibility::{ic_violation, pricing_solution, robust_violation, FEASIBILITY_TOL};
use regret_pricer::heuristic::{default_max_passes, heuristic_solve, HeuristicStatus};
use regret_pricer::instance::{NormalizedInstance, SquareData};
use regret_pricer::oracle::{brute_force_robust, VERTEX_ENTRY_CAP};
use regret_pricer::robust::{
    build_master, evaluate_regret_exact, solve_robust_with, RobustOptions, RobustStatus, EXACT_REGRET_CAP,
};
use regret_pricer::{Allocation, IntervalUncertainty, PricingSolution, UtilityVector, ValuationMatrix};

use crate::error::CliError;
use crate::schema::{sig9, sig9_all, to_json, InstanceFile, InstanceKind, ResultFile, SoldPair};
use crate::{BenchArgs, GenArgs, Mode, SolveArgs, VerifyArgs};

pub const SEED_ENV: &str = "REGRET_PRICER_SEED";

fn seed_or_env(seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn time_limit(secs: Option<f64>) -> Result<Option<Duration>, CliError> {
    secs.map(|s| Duration::try_from_secs_f64(s).map_err(|_| CliError::Invalid(format!("bad time limit {s}"))))
        .transpose()
}

pub fn gen(a: &GenArgs) -> Result<(), CliError> {
    let p = GeneratorParams {
        x_min_lower: a.xmin,
        x_max_lower: a.xmax,
        delta: a.delta,
        k: a.k,
        seed: seed_or_env(a.seed)?,
    };
    let s = bench::generate_instance(&p)?;
    let file = InstanceFile::interval(s.lower().rows(), s.upper().rows());
    write_or_print(a.out.as_deref(), &to_json(&file))
}

/// The uncertainty set of an instance; point instances become degenerate intervals.
fn interval_of(n: &NormalizedInstance) -> IntervalUncertainty {
    match &n.data {
        SquareData::Interval(s) => s.clone(),
        SquareData::Point(x) => IntervalUncertainty::degenerate(x),
    }
}

/// The valuation matrix `det` and `heuristic` work on, with its label.
fn scenario_of(n: &NormalizedInstance, scenario: Option<&str>) -> Result<(ValuationMatrix, String), CliError> {
    match (&n.data, scenario) {
        (SquareData::Point(x), None | Some("point")) => Ok((x.clone(), "point".into())),
        (SquareData::Interval(s), Some("lower")) => Ok((s.lower().clone(), "lower".into())),
        (SquareData::Interval(s), Some("upper")) => Ok((s.upper().clone(), "upper".into())),
        (SquareData::Interval(_), None) => Err(CliError::Invalid(
            "det and heuristic need one valuation matrix: pass --scenario lower|upper|<file>".into(),
        )),
        (_, Some(path)) => {
            let f = InstanceFile::read(Path::new(path))?;
            if f.kind != InstanceKind::Deterministic {
                return Err(CliError::Invalid(format!(
                    "{path}: scenario file must be a deterministic instance"
                )));
            }
            match f.normalize()?.data {
                SquareData::Point(x) if x.k() == n.k() => Ok((x, path.to_string())),
                _ => Err(CliError::Invalid(format!(
                    "{path}: scenario size differs from the instance"
                ))),
            }
        }
    }
}

struct Outcome {
    solution: PricingSolution,
    status: String,
    limited: bool,
    regret: Option<f64>,
    lower_bound: Option<f64>,
    lb_trace: Vec<f64>,
    ub_trace: Vec<f64>,
    cuts: usize,
    iterations: usize,
}

impl Outcome {
    fn plain(solution: PricingSolution, status: &str, limited: bool) -> Self {
        Self {
            solution,
            status: status.into(),
            limited,
            regret: None,
            lower_bound: None,
            lb_trace: Vec::new(),
            ub_trace: Vec::new(),
            cuts: 0,
            iterations: 0,
        }
    }
}

fn robust_status(st: RobustStatus) -> (&'static str, bool) {
    match st {
        RobustStatus::Optimal => ("optimal", false),
        RobustStatus::IterationLimit => ("iteration_limit", true),
        RobustStatus::TimeLimit => ("time_limit", true),
    }
}

fn milp_status(st: SolveStatus) -> (&'static str, bool) {
    match st {
        SolveStatus::Optimal => ("optimal", false),
        SolveStatus::IterationLimit => ("iteration_limit", true),
        SolveStatus::TimeLimit => ("time_limit", true),
        SolveStatus::Infeasible => ("infeasible", true),
        SolveStatus::Unbounded => ("unbounded", true),
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Robust => "robust",
        Mode::Det => "det",
        Mode::Heuristic => "heuristic",
        Mode::Oracle => "oracle",
    }
}

pub fn solve(a: &SolveArgs) -> Result<(), CliError> {
    if !(a.eps >= 0.0 && a.eps.is_finite()) {
        return Err(CliError::Invalid(format!(
            "--eps must be finite and nonnegative, got {}",
            a.eps
        )));
    }
    let file = InstanceFile::read(&a.instance)?;
    let inst = file.normalize()?;
    let limit = time_limit(a.time_limit)?;
    let robust_like = matches!(a.mode, Mode::Robust | Mode::Oracle);
    if robust_like && a.scenario.is_some() {
        return Err(CliError::Invalid(
            "--scenario applies to det and heuristic modes only".into(),
        ));
    }

    let start = Instant::now();
    let mut scenario_label = None;
    let outcome = match a.mode {
        Mode::Robust => {
            let s = interval_of(&inst);
            if let Some(p) = &a.dump_model {
                let master = build_master(&s, &[])?;
                fs::write(p, master.model.to_text()).map_err(|e| CliError::io(p, e))?;
            }
            let opts = RobustOptions {
                gap: a.eps,
                time_limit: limit,
                ..RobustOptions::default()
            };
            let r = solve_robust_with(&s, &opts)?;
            let (status, limited) = robust_status(r.status);
            Outcome {
                status: status.into(),
                limited,
                regret: Some(r.regret),
                lower_bound: Some(r.lower_bound),
                cuts: r.cuts.len(),
                iterations: r.iterations,
                lb_trace: r.lb_trace,
                ub_trace: r.ub_trace,
                solution: r.solution,
            }
        }
        Mode::Oracle => {
            if a.dump_model.is_some() {
                return Err(CliError::Invalid("--dump-model applies to robust and det modes".into()));
            }
            let r = brute_force_robust(&interval_of(&inst))?;
            Outcome {
                status: "optimal".into(),
                limited: false,
                regret: Some(r.regret),
                lower_bound: Some(r.lower_bound),
                cuts: 0,
                iterations: r.iterations,
                lb_trace: r.lb_trace,
                ub_trace: r.ub_trace,
                solution: r.solution,
            }
        }
        Mode::Det => {
            let (x, label) = scenario_of(&inst, a.scenario.as_deref())?;
            scenario_label = Some(label);
            if let Some(p) = &a.dump_model {
                fs::write(p, build_deterministic_milp(&x).model.to_text()).map_err(|e| CliError::io(p, e))?;
            }
            let opts = SolveOptions {
                time_limit: limit,
                ..SolveOptions::default()
            };
            let r = solve_deterministic_with(&x, &opts)?;
            let (status, limited) = milp_status(r.status);
            Outcome::plain(r.solution, status, limited)
        }
        Mode::Heuristic => {
            if a.dump_model.is_some() {
                return Err(CliError::Invalid("--dump-model applies to robust and det modes".into()));
            }
            let (x, label) = scenario_of(&inst, a.scenario.as_deref())?;
            scenario_label = Some(label);
            let r = heuristic_solve(&x, default_max_passes(x.k()))?;
            let status = match r.status {
                HeuristicStatus::Converged => "converged",
                HeuristicStatus::NotConverged => "not_converged",
                HeuristicStatus::Failed => "failed",
            };
            let mut o = Outcome::plain(r.solution, status, r.status != HeuristicStatus::Converged);
            o.iterations = r.passes;
            o
        }
    };
    let elapsed = if a.no_timing {
        0.0
    } else {
        start.elapsed().as_secs_f64()
    };

    let result = result_file(&inst, mode_name(a.mode), scenario_label, a.eps, &outcome, elapsed);
    write_or_print(a.out.as_deref(), &to_json(&result))?;
    let regret = result.regret.map_or_else(|| "none".to_string(), |r| r.to_string());
    println!(
        "mode={} value={} regret={} sold={}",
        result.mode, result.revenue, regret, result.sold
    );
    if outcome.status == "failed" {
        return Err(CliError::Verification("heuristic output is not envy-free".into()));
    }
    if outcome.limited {
        return Err(CliError::Limit(format!(
            "solver stopped with status {}",
            outcome.status
        )));
    }
    Ok(())
}

fn result_file(
    inst: &NormalizedInstance,
    mode: &str,
    scenario: Option<String>,
    eps: f64,
    o: &Outcome,
    time_s: f64,
) -> ResultFile {
    let sol = &o.solution;
    let q = &sol.allocation;
    let n_items = inst.item_of_col.iter().flatten().count();
    let mut prices = vec![None; n_items];
    let mut allocation = Vec::new();
    for (row, col) in q.pairs() {
        if let (Some(buyer), Some(item)) = (inst.buyer_of_row[row], inst.item_of_col[col]) {
            let price = sig9(sol.prices[col].value());
            prices[item] = Some(price);
            allocation.push(SoldPair { buyer, item, price });
        }
    }
    allocation.sort_by_key(|p| (p.buyer, p.item));
    ResultFile {
        mode: mode.into(),
        status: o.status.clone(),
        k: inst.k(),
        scenario,
        eps: sig9(eps),
        assignment: q.assignment().to_vec(),
        utilities: sig9_all(sol.utilities.as_slice()),
        allocation,
        prices,
        revenue: sig9(sol.revenue),
        welfare: sig9(sol.welfare),
        sold: sol.sold_excluding(&inst.dummy_rows(), &inst.dummy_cols()),
        regret: o.regret.map(sig9),
        lower_bound: o.lower_bound.map(sig9),
        lb_trace: sig9_all(&o.lb_trace),
        ub_trace: sig9_all(&o.ub_trace),
        cuts: o.cuts,
        iterations: o.iterations,
        time_s: sig9(time_s),
    }
}

/// Tolerance for checks on values that went through 9-digit rounding.
fn rounding_tol(scale: f64) -> f64 {
    FEASIBILITY_TOL + 1e-8 * scale.abs().max(1.0)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    let inst = InstanceFile::read(&a.instance)?.normalize()?;
    let res = ResultFile::read(&a.result)?;
    let k = inst.k();
    if res.k != k || res.assignment.len() != k || res.utilities.len() != k {
        return Err(CliError::Invalid(format!(
            "result is for K={}, instance has K={k}",
            res.k
        )));
    }
    let q = Allocation::new(res.assignment.clone())?;
    let u = UtilityVector::new(res.utilities.clone())?;
    let s = interval_of(&inst);

    let robust_like = matches!(res.mode.as_str(), "robust" | "oracle");
    let (reference, ceiling) = if robust_like {
        (s.lower().clone(), s.upper().clone())
    } else {
        let (x, _) = scenario_of(&inst, res.scenario.as_deref())?;
        (x.clone(), x)
    };
    let scale = max_abs(u.as_slice()).max(max_abs(ceiling.as_slice()));
    let tol = rounding_tol(scale);

    let mut failures = 0;
    let mut report = |name: &str, outcome: Result<(), String>| match outcome {
        Ok(()) => println!("PASS {name}"),
        Err(why) => {
            failures += 1;
            println!("FAIL {name}: {why}");
        }
    };

    let violation = if robust_like {
        robust_violation(&u, &q, &s, tol)?
    } else {
        ic_violation(&u, &q, &reference, tol)?
    };
    let label = if robust_like {
        "robust feasibility"
    } else {
        "envy-freeness"
    };
    report(label, violation.map_or(Ok(()), |v| Err(v.to_string())));

    match pricing_solution(u.clone(), q.clone(), &reference, &ceiling) {
        Ok(sol) => {
            let rev_tol = rounding_tol(sol.revenue) * k as f64;
            let rev = if (sol.revenue - res.revenue).abs() <= rev_tol {
                Ok(())
            } else {
                Err(format!("recomputed {} vs reported {}", sol.revenue, res.revenue))
            };
            report("revenue", rev);
            let sold = sol.sold_excluding(&inst.dummy_rows(), &inst.dummy_cols());
            report(
                "sold items",
                if sold == res.sold {
                    Ok(())
                } else {
                    Err(format!("recomputed {sold} vs reported {}", res.sold))
                },
            );
        }
        Err(e) => report("revenue", Err(e.to_string())),
    }

    if robust_like {
        let free = s
            .lower()
            .as_slice()
            .iter()
            .zip(s.upper().as_slice())
            .filter(|(a, b)| a < b)
            .count();
        match res.regret {
            None => report("regret", Err("missing from result".into())),
            Some(_) if k > EXACT_REGRET_CAP || free > VERTEX_ENTRY_CAP => {
                println!("SKIP regret: K={k} is above the exact evaluation cap");
            }
            Some(reported) => {
                let exact = evaluate_regret_exact(&u, &q, &s)?;
                let allowed = res.eps + rounding_tol(exact) * k as f64;
                report(
                    "regret",
                    if (exact - reported).abs() <= allowed {
                        Ok(())
                    } else {
                        Err(format!(
                            "exact worst case {exact} vs reported {reported} (eps {})",
                            res.eps
                        ))
                    },
                );
            }
        }
    }

    if failures > 0 {
        return Err(CliError::Verification(format!("{failures} check(s) failed")));
    }
    Ok(())
}

fn parse_k_list(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<usize>() {
            Ok(k) if k > 0 => Ok(k),
            _ => Err(CliError::Invalid(format!("bad K {t:?} in --k-list"))),
        })
        .collect()
}

pub fn bench(a: &BenchArgs) -> Result<(), CliError> {
    let ranges = match (&a.preset, a.xmin, a.xmax, a.delta) {
        (Some(name), ..) => bench::preset(name).ok_or_else(|| CliError::Invalid(format!("unknown preset {name:?}")))?,
        (None, Some(x_min_lower), Some(x_max_lower), Some(delta)) => ValueRanges {
            x_min_lower,
            x_max_lower,
            delta,
        },
        _ => {
            return Err(CliError::Invalid(
                "pass --preset or all of --xmin, --xmax, --delta".into(),
            ))
        }
    };
    if a.reps == 0 {
        return Err(CliError::Invalid("--reps must be at least 1".into()));
    }
    let cfg = ExperimentConfig {
        k_list: parse_k_list(&a.k_list)?,
        reps: a.reps,
        base_seed: seed_or_env(a.seed)?,
        robust: RobustOptions {
            gap: a.eps,
            time_limit: time_limit(Some(a.time_limit))?,
            ..RobustOptions::default()
        },
        jobs: a.jobs.max(1),
    };
    let mut rows = run_experiment(&[ranges], &cfg)?;
    if a.no_timing {
        for r in &mut rows {
            r.mean_time_s = 0.0;
            r.runs.iter_mut().for_each(|run| run.time_s = 0.0);
        }
    }
    if let Some(dir) = &a.runs_dir {
        write_runs(dir, &rows)?;
    }
    let mut incomplete = 0;
    for r in &rows {
        let st = &r.statuses;
        eprintln!(
            "K={} optimal={} iteration_limit={} time_limit={} failed={}",
            r.k, st.optimal, st.iteration_limit, st.time_limit, st.failed
        );
        incomplete += r.reps - st.optimal;
    }
    let csv: Vec<CsvRow> = rows.iter().map(CsvRow::from).collect();
    write_or_print(a.out.as_deref(), &write_csv(&csv))?;
    if incomplete > 0 {
        return Err(CliError::Limit(format!("{incomplete} run(s) did not finish optimally")));
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct RunFile<'a> {
    k: usize,
    seed: u64,
    status: String,
    regret: f64,
    revenue: f64,
    welfare: f64,
    sold: usize,
    cuts: usize,
    iterations: usize,
    lb_trace: Vec<f64>,
    ub_trace: Vec<f64>,
    time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

fn write_runs(dir: &PathBuf, rows: &[bench::ExperimentRow]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for row in rows {
        for run in &row.runs {
            let (status, error) = match &run.status {
                Ok(st) => (robust_status(*st).0.to_string(), None),
                Err(e) => ("failed".to_string(), Some(e.as_str())),
            };
            let f = RunFile {
                k: row.k,
                seed: run.seed,
                status,
                regret: sig9(run.regret),
                revenue: sig9(run.revenue),
                welfare: sig9(run.welfare),
                sold: run.sold,
                cuts: run.cuts,
                iterations: run.iterations,
                lb_trace: sig9_all(&run.lb_trace),
                ub_trace: sig9_all(&run.ub_trace),
                time_s: sig9(run.time_s),
                error,
            };
            let path = dir.join(format!("run-k{}-seed{}.json", row.k, run.seed));
            fs::write(&path, to_json(&f)).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}
