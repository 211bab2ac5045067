use pricer_milp::{MilpModel, Relation, Sense, SolveStatus};
use proptest::prelude::*;
use regret_pricer::bench::{generate_instance, GeneratorParams};
use regret_pricer::det::{
    for_each_partial_permutation, min_utilities_for_allocation, min_utilities_robust, solve_deterministic,
    solve_deterministic_enumerate,
};
use regret_pricer::feasibility::{is_ic_feasible, is_robust_feasible, recover_prices, value_under_scenario};
use regret_pricer::heuristic::{
    default_max_passes, heuristic_solve, matching_weight, max_weight_assignment, HeuristicStatus,
};
use regret_pricer::instance::{normalize_instance, RawInstance, RawValuations, SquareData};
use regret_pricer::oracle::{brute_force_robust, enumerate_vertex_scenarios};
use regret_pricer::robust::{evaluate_regret_exact, solve_robust, RobustStatus};
use regret_pricer::{Allocation, IntervalUncertainty, ItemPrice, UtilityVector, ValuationMatrix, FEASIBILITY_TOL};

fn matrix(max_k: usize, hi: f64) -> impl Strategy<Value = ValuationMatrix> {
    (1..=max_k).prop_flat_map(move |k| {
        prop::collection::vec(0.0..hi, k * k).prop_map(move |v| ValuationMatrix::new(k, v).unwrap())
    })
}

/// Entries drawn from a small grid so that ties and equal valuations occur.
fn grid_matrix(max_k: usize) -> impl Strategy<Value = ValuationMatrix> {
    (1..=max_k).prop_flat_map(|k| {
        prop::collection::vec(0u8..6, k * k)
            .prop_map(move |v| ValuationMatrix::new(k, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

fn interval(k: usize, hi: f64, width: f64) -> impl Strategy<Value = IntervalUncertainty> {
    (
        prop::collection::vec(1.0..hi, k * k),
        prop::collection::vec(0.0..=width, k * k),
    )
        .prop_map(move |(lo, w)| {
            let up = lo.iter().zip(&w).map(|(a, b)| a + b).collect();
            IntervalUncertainty::new(
                ValuationMatrix::new(k, lo).unwrap(),
                ValuationMatrix::new(k, up).unwrap(),
            )
            .unwrap()
        })
}

fn partial_permutation(k: usize) -> impl Strategy<Value = Allocation> {
    (
        Just((0..k).collect::<Vec<_>>()).prop_shuffle(),
        prop::collection::vec(any::<bool>(), k),
    )
        .prop_map(|(perm, keep)| {
            Allocation::new(perm.into_iter().zip(keep).map(|(j, b)| b.then_some(j)).collect()).unwrap()
        })
}

fn all_allocations(k: usize) -> Vec<Allocation> {
    let mut out = Vec::new();
    for_each_partial_permutation(k, |q| out.push(q.clone()));
    out
}

/// Smallest `Σ u` under the envy rows of a fixed allocation, by LP.
fn lp_min_sum(q: &Allocation, x: &ValuationMatrix) -> Option<f64> {
    let k = x.k();
    let mut lp = MilpModel::new(Sense::Minimize);
    let u: Vec<_> = (0..k)
        .map(|i| {
            let hi = if q.item_of(i).is_some() { f64::INFINITY } else { 0.0 };
            lp.add_continuous(format!("u{i}"), 0.0, hi)
        })
        .collect();
    for &v in &u {
        lp.add_objective_term(v, 1.0);
    }
    for i in 0..k {
        let Some(kk) = q.item_of(i) else { continue };
        for j in (0..k).filter(|&j| j != i) {
            lp.add_constraint(
                format!("e{i}{j}"),
                vec![(u[j], 1.0), (u[i], -1.0)],
                Relation::Ge,
                x.get(j, kk) - x.get(i, kk),
            );
        }
    }
    let sol = pricer_milp::lp_solve(&lp).unwrap();
    (sol.status == SolveStatus::Optimal).then_some(sol.objective_value)
}

/// Envy-freeness straight from the definition: nobody prefers another sold
/// item at its price, or nothing at all, to their own bundle.
fn envy_free_by_enumeration(q: &Allocation, prices: &[ItemPrice], x: &ValuationMatrix) -> bool {
    let k = x.k();
    (0..k).all(|i| {
        let own = q.item_of(i).map_or(0.0, |j| x.get(i, j) - prices[j].value());
        own >= -1e-9
            && (0..k)
                .filter(|&j| prices[j].is_sold())
                .all(|j| x.get(i, j) - prices[j].value() <= own + 1e-9)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn milp_matches_enumeration(x in matrix(4, 50.0)) {
        let milp = solve_deterministic(&x, 0.0).unwrap();
        let brute = solve_deterministic_enumerate(&x).unwrap();
        prop_assert!((milp.revenue - brute.revenue).abs() <= 1e-6, "milp {} brute {}", milp.revenue, brute.revenue);
    }

    #[test]
    fn milp_matches_enumeration_with_ties(x in grid_matrix(4)) {
        let milp = solve_deterministic(&x, 0.0).unwrap();
        let brute = solve_deterministic_enumerate(&x).unwrap();
        prop_assert!((milp.revenue - brute.revenue).abs() <= 1e-6);
    }

    #[test]
    fn minimal_utilities_match_lp(x in matrix(4, 30.0), seed in any::<u64>()) {
        let all = all_allocations(x.k());
        let q = &all[(seed % all.len() as u64) as usize];
        let bf = min_utilities_for_allocation(q, &x);
        let lp = lp_min_sum(q, &x);
        prop_assert_eq!(bf.is_some(), lp.is_some());
        if let (Some(u), Some(s)) = (bf, lp) {
            prop_assert!((u.sum() - s).abs() <= 1e-6, "bellman-ford {} lp {}", u.sum(), s);
            prop_assert!(is_ic_feasible(&u, q, &x, 1e-9) || q.pairs().any(|(i, j)| u.get(i) > x.get(i, j)));
        }
    }

    #[test]
    fn feasible_utilities_dominate_minimal(x in matrix(3, 30.0), q in (1usize..=3).prop_flat_map(partial_permutation), bumps in prop::collection::vec(0.0..10.0f64, 3)) {
        prop_assume!(q.k() == x.k());
        let Some(umin) = min_utilities_for_allocation(&q, &x) else { return Ok(()) };
        // raising every matched utility by the same amount keeps matched-matched envy rows intact
        let b = bumps[0];
        let raised: Vec<f64> = (0..x.k()).map(|i| if q.item_of(i).is_some() { umin.get(i) + b } else { 0.0 }).collect();
        let raised = UtilityVector::new(raised).unwrap();
        if is_ic_feasible(&raised, &q, &x, 1e-9) {
            prop_assert!(value_under_scenario(&raised, &q, &x).unwrap() <= value_under_scenario(&umin, &q, &x).unwrap() + 1e-9);
        }
    }

    #[test]
    fn revenue_below_max_weight_matching(x in matrix(4, 100.0)) {
        let opt = solve_deterministic_enumerate(&x).unwrap().revenue;
        let mw = matching_weight(&max_weight_assignment(&x), &x);
        prop_assert!(opt <= mw + 1e-6);
    }

    #[test]
    fn scaling_scales_revenue(x in matrix(4, 40.0), lambda in 0.1..10.0f64) {
        let base = solve_deterministic_enumerate(&x).unwrap();
        let xs = x.scaled(lambda).unwrap();
        let scaled = solve_deterministic_enumerate(&xs).unwrap();
        prop_assert!((scaled.revenue - lambda * base.revenue).abs() <= 1e-6 * (1.0 + scaled.revenue));
        // the original optimal allocation stays optimal after scaling
        let u = min_utilities_for_allocation(&base.allocation, &xs).unwrap();
        let v = value_under_scenario(&u, &base.allocation, &xs).unwrap();
        prop_assert!((v - scaled.revenue).abs() <= 1e-6 * (1.0 + v));
    }

    #[test]
    fn heuristic_sandwich(x in matrix(6, 100.0)) {
        let h = heuristic_solve(&x, default_max_passes(x.k())).unwrap();
        prop_assert_ne!(h.status, HeuristicStatus::Failed);
        prop_assert!(is_ic_feasible(&h.solution.utilities, &h.solution.allocation, &x, FEASIBILITY_TOL));
        prop_assert!(h.solution.utilities.as_slice().iter().all(|&u| u >= 0.0));
        let mw = matching_weight(&max_weight_assignment(&x), &x);
        if x.k() <= 4 {
            let opt = solve_deterministic_enumerate(&x).unwrap().revenue;
            prop_assert!(h.solution.revenue <= opt + 1e-6 && opt <= mw + 1e-6);
        } else {
            let opt = solve_deterministic(&x, 0.0).unwrap().revenue;
            prop_assert!(h.solution.revenue <= opt + 1e-6 && opt <= mw + 1e-6);
        }
    }

    #[test]
    fn heuristic_handles_ties(x in grid_matrix(5)) {
        let h = heuristic_solve(&x, default_max_passes(x.k())).unwrap();
        prop_assert!(is_ic_feasible(&h.solution.utilities, &h.solution.allocation, &x, FEASIBILITY_TOL));
        let opt = solve_deterministic(&x, 0.0).unwrap().revenue;
        prop_assert!(h.solution.revenue <= opt + 1e-6);
    }

    #[test]
    fn ic_feasible_means_envy_free(x in grid_matrix(4), seed in any::<u64>()) {
        let all = all_allocations(x.k());
        let q = &all[(seed % all.len() as u64) as usize];
        let Some(u) = min_utilities_for_allocation(q, &x) else { return Ok(()) };
        if is_ic_feasible(&u, q, &x, FEASIBILITY_TOL) {
            let p = recover_prices(&u, q, &x).unwrap();
            prop_assert!(envy_free_by_enumeration(q, &p, &x));
        }
    }

    #[test]
    fn robust_feasible_implies_ic_at_vertices(s in (1usize..=2).prop_flat_map(|k| interval(k, 20.0, 5.0)), seed in any::<u64>()) {
        let all = all_allocations(s.k());
        let q = &all[(seed % all.len() as u64) as usize];
        let Some(u) = min_utilities_robust(q, &s) else { return Ok(()) };
        if is_robust_feasible(&u, q, &s, FEASIBILITY_TOL) {
            for x in enumerate_vertex_scenarios(&s).unwrap() {
                prop_assert!(is_ic_feasible(&u, q, &x, FEASIBILITY_TOL));
            }
        }
    }

    #[test]
    fn degenerate_robust_equals_ic(x in grid_matrix(3), seed in any::<u64>(), uvals in prop::collection::vec(0u8..4, 3)) {
        let k = x.k();
        let all = all_allocations(k);
        let q = &all[(seed % all.len() as u64) as usize];
        let u: Vec<f64> = (0..k).map(|i| if q.item_of(i).is_some() { f64::from(uvals[i]) } else { 0.0 }).collect();
        let u = UtilityVector::new(u).unwrap();
        let s = IntervalUncertainty::degenerate(&x);
        prop_assert_eq!(is_robust_feasible(&u, q, &s, FEASIBILITY_TOL), is_ic_feasible(&u, q, &x, FEASIBILITY_TOL));
    }

    #[test]
    fn normalization_is_idempotent_on_square(x in matrix(4, 10.0)) {
        let raw = RawInstance::unit_demand(RawValuations::Point(x.rows()));
        let n = normalize_instance(&raw).unwrap();
        prop_assert_eq!(&n.data, &SquareData::Point(x.clone()));
        prop_assert!(n.dummy_rows().iter().chain(n.dummy_cols().iter()).all(|d| !d));
    }

    #[test]
    fn generated_instances_are_valid(k in 1usize..6, delta in 0.0..40.0f64, lo in 0.0..100.0f64, span in 0.0..400.0f64, seed in any::<u64>()) {
        let p = GeneratorParams { x_min_lower: lo, x_max_lower: lo + span, delta, k, seed };
        let s = generate_instance(&p).unwrap();
        for (&a, &b) in s.lower().as_slice().iter().zip(s.upper().as_slice()) {
            prop_assert!(a >= lo && a <= lo + span && b >= a && b - a <= delta);
        }
        prop_assert_eq!(generate_instance(&p).unwrap(), s);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_permutation_invariant(s in (2usize..=3).prop_flat_map(|k| interval(k, 20.0, 4.0)), perm_seed in any::<u64>()) {
        let k = s.k();
        let mut perm: Vec<usize> = (0..k).collect();
        perm.rotate_left((perm_seed % k as u64) as usize);
        if perm_seed % 2 == 1 {
            perm.swap(0, k - 1);
        }
        let a = brute_force_robust(&s).unwrap().regret;
        let b = brute_force_robust(&s.permute_buyers(&perm)).unwrap().regret;
        prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }

    #[test]
    fn oracle_dummy_padding_invariant(s in interval(2, 20.0, 4.0)) {
        let pad = |m: &ValuationMatrix| {
            let mut rows = m.rows();
            for r in &mut rows {
                r.push(0.0);
            }
            rows.push(vec![0.0; 3]);
            rows
        };
        let padded = IntervalUncertainty::from_rows(&pad(s.lower()), &pad(s.upper())).unwrap();
        let a = brute_force_robust(&s).unwrap().regret;
        let b = brute_force_robust(&padded).unwrap().regret;
        prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }

    #[test]
    fn oracle_is_minimal(s in (1usize..=2).prop_flat_map(|k| interval(k, 20.0, 5.0))) {
        let best = brute_force_robust(&s).unwrap();
        let exact = evaluate_regret_exact(&best.solution.utilities, &best.solution.allocation, &s).unwrap();
        prop_assert!((exact - best.regret).abs() <= 1e-6);
        for q in all_allocations(s.k()) {
            let Some(u) = min_utilities_robust(&q, &s) else { continue };
            if !is_robust_feasible(&u, &q, &s, FEASIBILITY_TOL) {
                continue;
            }
            let r = evaluate_regret_exact(&u, &q, &s).unwrap();
            prop_assert!(best.regret <= r + 1e-6, "oracle {} beaten by {:?} at {}", best.regret, q, r);
        }
    }

    #[test]
    fn robust_bounds_are_monotone(s in (1usize..=3).prop_flat_map(|k| interval(k, 20.0, 5.0))) {
        let r = solve_robust(&s, 1e-6).unwrap();
        prop_assert!(r.lb_trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(r.ub_trace.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(r.status, RobustStatus::Optimal);
        prop_assert!(r.regret - r.lower_bound <= 1e-6);
        prop_assert!(is_robust_feasible(&r.solution.utilities, &r.solution.allocation, &s, FEASIBILITY_TOL));
        for c in &r.cuts {
            prop_assert_eq!(c.u_prime.len(), s.k());
        }
    }

    #[test]
    fn certified_lower_bound_is_valid(s in (1usize..=2).prop_flat_map(|k| interval(k, 20.0, 5.0))) {
        let r = solve_robust(&s, 1e-6).unwrap();
        let exact = evaluate_regret_exact(&r.solution.utilities, &r.solution.allocation, &s).unwrap();
        let oracle = brute_force_robust(&s).unwrap().regret;
        prop_assert!(exact >= r.lower_bound - 1e-6);
        prop_assert!(oracle >= r.lower_bound - 1e-6);
    }
}

#[test]
fn heuristic_on_all_equal_rows_sells_everything() {
    let x = ValuationMatrix::from_rows(&[vec![3.0; 3], vec![3.0; 3], vec![3.0; 3]]).unwrap();
    let h = heuristic_solve(&x, default_max_passes(3)).unwrap();
    assert_eq!(h.solution.revenue, 9.0);
}
