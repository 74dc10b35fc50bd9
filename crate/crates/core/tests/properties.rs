//! Randomized invariant checks. Each case draws a generator seed; the
//! instance comes from the shared seeded generator so failures replay.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use fairmatch::bench::{bench, RunConfig};
use fairmatch::datagen::{ingest_reader, ColumnMap};
use fairmatch::decomp::{exact_disjoint_solve, Event, WindowId};
use fairmatch::ext::{feasibility_scale, solve_extended, Algorithm, FairnessObjective, RunOptions, Variant};
use fairmatch::flow::{solve_integral_gflp, FlowNetwork};
use fairmatch::gapprox::{g_solve, two_g_solve};
use fairmatch::greedy::{bicriteria_decompose, ScanOrder};
use fairmatch::instance::{collapse_groups, compute_stats, Instance, Window};
use fairmatch::lp::{
    build_disjoint, build_gflp, build_group_approx, build_mod, build_primal_if, solve_vertex, GflpBounds, LpOutcome,
    RowKind, SimplexOptions,
};
use fairmatch::verify::audit;
use fairmatch::Error;
use proptest::prelude::*;

fn opts() -> SimplexOptions {
    SimplexOptions::default()
}

fn optimum(lp: &fairmatch::lp::LinearProgram) -> Option<Vec<f64>> {
    match solve_vertex::<f64>(lp, &opts()).expect("solver runs") {
        LpOutcome::Optimal(sol) => Some(sol.x),
        LpOutcome::Infeasible(_) => None,
    }
}

fn overlapping(max_items: usize) -> Shape {
    Shape {
        max_items,
        max_platforms: 6,
        max_groups: 5,
        max_delta: 3,
        max_degree: 3,
        lower_bounds: false,
        fairness: true,
        max_edges: usize::MAX,
    }
}

/// Raises every nonempty pair's cap to at least `g`.
fn caps_at_least_g(inst: &Instance) -> Instance {
    let g = compute_stats(inst).g as i64;
    let windows: BTreeMap<(usize, usize), Window> = inst
        .nonempty_pairs()
        .into_iter()
        .map(|(p, h)| {
            let w = inst.group_window(p, h);
            ((p, h), Window::new(0, w.upper.max(g)))
        })
        .collect();
    inst.with_group_windows(&windows)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, .. ProptestConfig::default() })]

    #[test]
    fn collapse_is_idempotent_and_disjoint(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &overlapping(20));
        let (once, _) = collapse_groups(&inst).unwrap();
        let (twice, _) = collapse_groups(&once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(compute_stats(&once).delta, 1);
    }

    #[test]
    fn valid_instances_build_every_formulation(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &overlapping(20));
        let g = compute_stats(&inst).g;
        let (collapsed, _) = collapse_groups(&inst).unwrap();
        let _ = build_primal_if(&inst);
        let _ = build_gflp(&inst, None);
        prop_assert!(build_mod(&collapsed, g).is_ok());
        prop_assert!(build_group_approx(&collapsed, g).is_ok());
        let disjoint = random_instance(&mut rng(seed), &Shape::disjoint(20, 6));
        let _ = build_disjoint(&disjoint);
    }

    #[test]
    fn gflp_vertices_are_integral_with_integral_platform_sums(seed in any::<u64>()) {
        let mut shape = Shape::disjoint(30, 8);
        shape.fairness = false;
        let inst = random_instance(&mut rng(seed), &shape);
        let bounds = GflpBounds::from_instance(&inst);
        let lp = build_gflp(&inst, Some(&bounds));
        let flow = solve_integral_gflp(&inst, &bounds).unwrap();
        match (optimum(&lp), flow) {
            (Some(x), Some(m)) => {
                prop_assert!(x.iter().all(|v| (v - v.round()).abs() <= 1e-9));
                for p in 0..inst.num_platforms() {
                    let s: f64 = inst.platform_edges(p).iter().map(|&e| x[e]).sum();
                    prop_assert!((s - s.round()).abs() <= 1e-9, "platform {} sums to {}", p, s);
                }
                prop_assert_eq!(x.iter().sum::<f64>().round() as usize, m.len());
            }
            (None, None) => {}
            (x, m) => prop_assert!(false, "LP feasible {} but flow feasible {}", x.is_some(), m.is_some()),
        }
    }

    #[test]
    fn fairness_lp_points_are_group_lp_points(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &overlapping(25));
        // the fairness LP has no platform rows, so compare the rows both share
        if let Some(x) = optimum(&build_primal_if(&inst)) {
            let gflp = build_gflp(&inst, None);
            for (_, r) in gflp.rows_of(|k| matches!(k, RowKind::Group { .. } | RowKind::Item(_))) {
                let v: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                prop_assert!(r.lower - 1e-9 <= v && v <= r.upper + 1e-9, "{:?} at {}", r.kind, v);
            }
        }
    }

    #[test]
    fn shrunken_group_points_meet_scaled_caps(seed in any::<u64>()) {
        let inst = caps_at_least_g(&random_instance(&mut rng(seed), &overlapping(25)));
        let g = compute_stats(&inst).g;
        let (collapsed, _) = collapse_groups(&inst).unwrap();
        let x = optimum(&build_gflp(&inst, None)).expect("zero is feasible without lower bounds");
        let half: Vec<f64> = x.iter().map(|v| v / (2 * g) as f64).collect();
        let one: Vec<f64> = x.iter().map(|v| v / g as f64).collect();
        prop_assert!(build_mod(&collapsed, g).unwrap().max_violation(&half) <= 1e-9);
        prop_assert!(build_group_approx(&collapsed, g).unwrap().max_violation(&one) <= 1e-9);
    }

    #[test]
    fn lower_bound_flow_conserves_and_respects_bounds(
        arcs in prop::collection::vec((0usize..6, 0usize..6, 0i64..3, 0i64..4), 1..20)
    ) {
        let (s, t) = (0, 5);
        let mut net = FlowNetwork::new(6);
        let ids: Vec<usize> = arcs
            .iter()
            .filter(|(u, v, _, _)| u != v)
            .map(|&(u, v, lo, extra)| net.add_arc(u, v, lo, lo + extra))
            .collect();
        if let Some(value) = net.max_flow_with_lower_bounds(s, t) {
            let mut balance = [0i64; 6];
            for &id in &ids {
                let f = net.flow(id);
                let (lo, hi) = net.bounds(id);
                prop_assert!(lo <= f && f <= hi);
                balance[net.tail(id)] -= f;
                balance[net.head(id)] += f;
            }
            for (v, b) in balance.iter().enumerate() {
                if v != s && v != t {
                    prop_assert_eq!(*b, 0, "node {} unbalanced", v);
                }
            }
            prop_assert_eq!(balance[t], value);
            prop_assert_eq!(balance[s], -value);
        }
    }

    #[test]
    fn json_round_trip_is_identity(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &overlapping(15));
        let text = inst.to_json();
        let back = Instance::from_json(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn ingest_then_json_round_trips(
        rows in prop::collection::vec((0u8..8, 0u8..4, prop::option::weighted(0.9, 0u8..3)), 1..30)
    ) {
        let mut csv = String::from("who,where,kind\n");
        for (a, p, h) in &rows {
            let h = h.map_or("NA".to_string(), |h| format!("g{h}"));
            csv.push_str(&format!("i{a},p{p},{h}\n"));
        }
        let cols = ColumnMap { item: "who".into(), platform: "where".into(), group: "kind".into() };
        match ingest_reader(csv.as_bytes(), &cols) {
            Ok(inst) => {
                let distinct: BTreeSet<(u8, u8)> =
                    rows.iter().filter(|r| r.2.is_some()).map(|r| (r.0, r.1)).collect();
                prop_assert_eq!(inst.num_edges(), distinct.len());
                prop_assert_eq!(Instance::from_json(&inst.to_json()).unwrap(), inst);
            }
            Err(e) => prop_assert!(rows.iter().all(|r| r.2.is_none()), "unexpected error {}", e),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, .. ProptestConfig::default() })]

    #[test]
    fn exact_decomposition_invariants(seed in any::<u64>()) {
        let Some(inst) = feasible_disjoint(seed) else { return Ok(()) };
        let sol = match exact_disjoint_solve::<f64>(&inst, &opts()) {
            Ok(sol) => sol,
            Err(Error::Infeasible(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let total: f64 = sol.distribution.entries.iter().map(|(_, w)| w).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        let marg = marginals(&sol.distribution, inst.num_edges());
        for (e, (&x, &y)) in sol.lp.x.iter().zip(&marg).enumerate() {
            prop_assert!((x - y).abs() <= 1e-8, "edge {}: x = {} but marginal {}", e, x, y);
        }
        for (m, w) in &sol.distribution.entries {
            prop_assert!(*w > 0.0);
            prop_assert!(recount_strong(&inst, &m.edges));
        }

        let pairs = compute_stats(&inst).platform_groups.len();
        let limit = inst.num_edges() + 2 * (inst.num_platforms() + pairs);
        prop_assert!(sol.trace.steps.len() <= limit, "{} rounds, limit {}", sol.trace.steps.len(), limit);

        let mut tight: BTreeSet<WindowId> = BTreeSet::new();
        for step in &sol.trace.steps {
            prop_assert!(step.residual >= 0.0);
            for (p, w) in step.platform_windows.iter().enumerate() {
                let own = inst.platform_window(p);
                prop_assert!(own.lower <= w.lower && w.upper <= own.upper.max(w.lower));
                if tight.contains(&WindowId::Platform(p)) {
                    prop_assert_eq!(w.lower, w.upper, "platform {} loosened", p);
                }
            }
            for (&(p, h), w) in &step.group_windows {
                let own = inst.group_window(p, h);
                prop_assert!(own.lower <= w.lower && w.upper <= own.upper.max(w.lower));
                if tight.contains(&WindowId::Group(p, h)) {
                    prop_assert_eq!(w.lower, w.upper, "pair ({}, {}) loosened", p, h);
                }
            }
            for ev in &step.events {
                if let Event::Tightened(id) = ev {
                    tight.insert(*id);
                }
            }
        }
    }

    #[test]
    fn greedy_peeling_invariants(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &overlapping(30));
        let Ok((run, _)) = bicriteria_decompose::<f64>(&inst, 1e-3, ScanOrder::PreferenceRank, &opts()) else {
            return Ok(());
        };
        prop_assert!(run.checks(inst.num_edges()).all(1e-9));
        prop_assert!(run.residual.iter().all(|v| *v >= 0.0));
        // mass peeled from round i on never exceeds the norm entering it
        let mut tail = 0.0;
        for step in run.steps.iter().rev() {
            tail += step.alpha * step.matching.len() as f64;
            prop_assert!(tail <= step.norm_before + 1e-9);
        }
        for (m, _) in &run.distribution.entries {
            prop_assert!(recount_group_fair(&inst, &m.edges));
        }
    }

    #[test]
    fn g_modes_respect_their_violation_bounds(seed in any::<u64>()) {
        let inst = caps_at_least_g(&random_instance(&mut rng(seed), &overlapping(20)));
        let delta = delta_of(&inst) as i64;
        for (mode, allowed) in [(0, 0), (1, delta)] {
            let res = if mode == 0 { two_g_solve::<f64>(&inst, &opts()) } else { g_solve::<f64>(&inst, &opts()) };
            let Ok(res) = res else { continue };
            prop_assert!(res.hypothesis_ok);
            prop_assert!(res.scaled_point_feasible);
            let target: Vec<f64> = res.x.iter().map(|v| v / res.divisor as f64).collect();
            let marg = marginals(&res.distribution, inst.num_edges());
            for (x, y) in target.iter().zip(&marg) {
                prop_assert!((x - y).abs() <= 1e-8);
            }
            for (m, _) in &res.distribution.entries {
                prop_assert!(cap_excess(&inst, &m.edges) <= allowed);
            }
        }
    }

    #[test]
    fn scaling_multiplier_is_maximal(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &Shape::disjoint(20, 6));
        let Ok((t, _)) = feasibility_scale(&build_disjoint(&inst), &opts()) else { return Ok(()) };
        // the step must move L·t by more than the solver's feasibility tolerance
        if t < 1.0 - 1e-3 {
            let above = inst.with_scaled_if_lower(t + 1e-3);
            prop_assert!(optimum(&build_disjoint(&above)).is_none(), "t* = {} is not maximal", t);
            let below = inst.with_scaled_if_lower(t * (1.0 - 1e-9));
            prop_assert!(optimum(&build_disjoint(&below)).is_some());
        }
    }

    #[test]
    fn auxiliary_objectives_certify_mu(seed in any::<u64>()) {
        let Some(inst) = feasible_disjoint(seed) else { return Ok(()) };
        let run = RunOptions { scale: true, ..RunOptions::default() };
        for variant in [Variant::MaxminGroup, Variant::MindomGroup] {
            let obj = FairnessObjective { variant, zeta: 0.0 };
            let Ok(sol) = solve_extended::<f64>(&inst, obj, Algorithm::Exact, &run) else { continue };
            let mu = sol.mu.expect("auxiliary objective reports mu");
            for (p, h) in inst.nonempty_pairs() {
                let s: f64 = inst.group_edges(p, h).iter().map(|&e| sol.x[e]).sum();
                match variant {
                    Variant::MaxminGroup => prop_assert!(s >= mu - 2e-9, "({p}, {h}) sum {s} below mu {mu}"),
                    _ => prop_assert!(s <= mu + 2e-9, "({p}, {h}) sum {s} above mu {mu}"),
                }
            }
        }
    }

    #[test]
    fn bench_sol_matches_audit_exactly(seed in any::<u64>()) {
        let inst = random_instance(&mut rng(seed), &overlapping(20));
        for algorithm in [Algorithm::Greedy, Algorithm::TwoG, Algorithm::G] {
            let cfg = RunConfig { algorithm, ..RunConfig::default() };
            let Ok((row, sol)) = bench(&cfg, &inst) else { continue };
            let report = audit(&sol.audit_instance, &sol.distribution, &sol.t, &sol.delta, 1e-9);
            prop_assert_eq!(row.sol, report.expected_size);
        }
    }
}
