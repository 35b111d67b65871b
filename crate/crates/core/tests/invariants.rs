use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucscreen::costbound::{fit_cost_bound, quantile_loss_curve, CostPoint};
use ucscreen::demandset::{self, membership, DemandHistory};
use ucscreen::grid::{build_ptdf, Generator, Grid, Line};
use ucscreen::harness::{random_split_indices, worst_case_split};
use ucscreen::screening::{screen_all, MethodConfig};
use ucscreen::synth::random_system;
use ucscreen::uc::{solve_uc, ConstraintMask, Side};

fn system(seed: u64) -> ucscreen::synth::SynthSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(4..=9);
    let g = rng.gen_range(2..=5);
    random_system(&mut rng, n, g)
}

fn balanced_injections(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
    let mean = q.iter().sum::<f64>() / n as f64;
    q.iter_mut().for_each(|v| *v -= mean);
    q
}

/// Tree where bus i hangs off `parents[i - 1]`.
fn tree(parents: &[usize], susceptance: &[f64]) -> Grid {
    let n = parents.len() + 1;
    let buses: Vec<String> = (0..n).map(|i| format!("b{i}")).collect();
    let lines = parents
        .iter()
        .zip(susceptance)
        .enumerate()
        .map(|(k, (&p, &b))| Line {
            id: format!("l{}", k + 1),
            from: buses[p].clone(),
            to: buses[k + 1].clone(),
            susceptance: b,
            capacity: 100.0,
        })
        .collect();
    let gens = vec![Generator {
        id: "g1".into(),
        bus: buses[0].clone(),
        cost: 1.0,
        pmin: 0.0,
        pmax: 100.0,
    }];
    Grid::new("tree", buses.clone(), &buses[0], lines, gens).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flows_do_not_depend_on_the_slack_bus(seed in any::<u64>()) {
        let sys = system(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let q = balanced_injections(&mut rng, sys.grid.num_buses());
        let base = build_ptdf(&sys.grid).unwrap().line_flows(&q).unwrap();
        let other = rng.gen_range(0..sys.grid.num_buses());
        let moved = build_ptdf(&sys.grid.with_slack(other)).unwrap().line_flows(&q).unwrap();
        for (a, b) in base.iter().zip(&moved) {
            prop_assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn flows_balance_at_every_bus(seed in any::<u64>()) {
        let sys = system(seed);
        let g = &sys.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let q = balanced_injections(&mut rng, g.num_buses());
        let f = build_ptdf(g).unwrap().line_flows(&q).unwrap();
        let mut net = vec![0.0; g.num_buses()];
        for (l, flow) in f.iter().enumerate() {
            let (a, b) = g.line_ends(l);
            net[a] += flow;
            net[b] -= flow;
        }
        for (n, (out, inj)) in net.iter().zip(&q).enumerate() {
            prop_assert!((out - inj).abs() < 1e-8, "bus {n}: {out} vs {inj}");
        }
    }

    #[test]
    fn radial_flows_ignore_susceptance(seed in any::<u64>(), n in 2usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = balanced_injections(&mut rng, n);
        let parents: Vec<usize> = (1..n).map(|i| rng.gen_range(0..i)).collect();
        let weights: Vec<f64> = (1..n).map(|_| rng.gen_range(0.5..20.0)).collect();
        let plain = tree(&parents, &vec![1.0; n - 1]);
        let weighted = tree(&parents, &weights);
        let a = build_ptdf(&plain).unwrap().line_flows(&q).unwrap();
        let b = build_ptdf(&weighted).unwrap().line_flows(&q).unwrap();
        // On a tree the flow on edge (parent, i) is the injection of i's subtree.
        for (l, line) in plain.lines().iter().enumerate() {
            let i = plain.bus_index(&line.to).unwrap();
            let mut subtree = vec![false; n];
            subtree[i] = true;
            for k in i + 1..n {
                if subtree[parents[k - 1]] {
                    subtree[k] = true;
                }
            }
            let expected: f64 = -(0..n).filter(|&k| subtree[k]).map(|k| q[k]).sum::<f64>();
            prop_assert!((a[l] - expected).abs() < 1e-8, "line {l}: {} vs {expected}", a[l]);
            prop_assert!((a[l] - b[l]).abs() < 1e-8);
        }
    }

    #[test]
    fn hull_lies_inside_box(seed in any::<u64>()) {
        let sys = system(seed);
        let h = demandset::generate_history(&sys.factors, 30, sys.load_range, 0.2, seed).unwrap();
        let bx = demandset::box_from_history(&h).unwrap();
        let hull = demandset::hull_from_history(&h, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let d = hull.sample(&mut rng);
            prop_assert!(membership(&hull, &d).unwrap());
            prop_assert!(membership(&bx, &d).unwrap());
        }
        for t in 0..h.len() {
            prop_assert!(membership(&hull, h.row(t)).unwrap());
        }
    }

    #[test]
    fn fewer_kept_sides_never_cost_more(seed in any::<u64>()) {
        let sys = system(seed);
        let g = &sys.grid;
        let ptdf = build_ptdf(g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = rng.gen_range(sys.load_range.0..sys.load_range.1);
        let d: Vec<f64> = sys.factors.xi.iter().map(|x| x * total).collect();
        let mut mask = ConstraintMask::full(g.num_lines());
        let mut prev = match solve_uc(g, &ptdf, &d, &mask) {
            Ok(s) => Some(s.cost),
            Err(_) => None,
        };
        for _ in 0..4 {
            let l = rng.gen_range(0..g.num_lines());
            mask.set(l, if rng.gen_bool(0.5) { Side::Upper } else { Side::Lower }, false);
            let cur = solve_uc(g, &ptdf, &d, &mask).ok().map(|s| s.cost);
            if let Some(p) = prev {
                let c = cur.expect("a relaxation of a feasible UC is feasible");
                prop_assert!(c <= p + 1e-6 * p.abs().max(1.0), "{c} > {p}");
            }
            prev = cur.or(prev);
        }
    }

    #[test]
    fn larger_kappa_never_removes_more(seed in any::<u64>()) {
        let sys = system(seed);
        let g = &sys.grid;
        let ptdf = build_ptdf(g).unwrap();
        let h = demandset::generate_history(&sys.factors, 12, sys.load_range, 0.2, seed).unwrap();
        let tight = screen_all(g, &ptdf, &MethodConfig::cc(demandset::hull_from_history(&h, 1.0).unwrap())).unwrap();
        let loose = screen_all(g, &ptdf, &MethodConfig::cc(demandset::hull_from_history(&h, 1.3).unwrap())).unwrap();
        prop_assert!(loose.removable_set().is_subset(&tight.removable_set()));
    }

    #[test]
    fn cost_bound_envelopes_every_point(
        raw in prop::collection::vec((0.0..100.0f64, 0.0..1000.0f64), 8..40),
        n in 1usize..=3,
    ) {
        let pts: Vec<CostPoint> = raw.iter().map(|&(demand, cost)| CostPoint { demand, cost }).collect();
        if let Ok(model) = fit_cost_bound(&pts, n) {
            for p in &pts {
                let slack = model.evaluate(p.demand).unwrap() - p.cost;
                prop_assert!(slack >= -1e-9 * p.cost.abs().max(1.0), "slack {slack} at {}", p.demand);
            }
        }
    }

    #[test]
    fn loss_curve_is_nonincreasing(raw in prop::collection::vec((0.0..100.0f64, 0.0..1000.0f64), 10..40)) {
        let pts: Vec<CostPoint> = raw.iter().map(|&(demand, cost)| CostPoint { demand, cost }).collect();
        let curve = quantile_loss_curve(&pts, 4).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0), "{curve:?}");
        }
    }

    #[test]
    fn worst_case_test_set_holds_the_largest_aggregates(
        rows in prop::collection::vec(prop::collection::vec(0.0..10.0f64, 3), 2..30),
        k in 1usize..10,
    ) {
        let n_test = k.min(rows.len() - 1);
        let labels = (0..rows.len()).map(|t| format!("t{t}")).collect();
        let h = DemandHistory::new(vec!["a".into(), "b".into(), "c".into()], labels, rows).unwrap();
        let (train, test) = worst_case_split(&h, n_test).unwrap();
        prop_assert_eq!(test.len(), n_test);
        prop_assert_eq!(train.len() + test.len(), h.len());
        let lowest_test = (0..test.len()).map(|t| test.aggregate(t)).fold(f64::INFINITY, f64::min);
        let highest_train = (0..train.len()).map(|t| train.aggregate(t)).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lowest_test >= highest_train);
    }

    #[test]
    fn random_split_partitions_the_periods(n in 2usize..200, frac in 0.05..0.9f64, seed in any::<u64>()) {
        let n_test = (frac * n as f64).round() as usize;
        let split = random_split_indices(n, frac, seed);
        if n_test >= n {
            prop_assert!(split.is_err());
            return Ok(());
        }
        let (train, test) = split.unwrap();
        prop_assert_eq!(test.len(), n_test);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(random_split_indices(n, frac, seed).unwrap(), (train, test));
    }

    #[test]
    fn generated_demands_stay_in_range(seed in any::<u64>(), width in 0.0..0.5f64) {
        let sys = system(seed);
        let (lo, hi) = sys.load_range;
        let h = demandset::generate_history(&sys.factors, 50, (lo, hi), width, seed).unwrap();
        for t in 0..h.len() {
            for (v, x) in h.row(t).iter().zip(&sys.factors.xi) {
                prop_assert!(*v >= (1.0 - width) * lo * x - 1e-9 && *v <= (1.0 + width) * hi * x + 1e-9);
            }
            let agg = h.aggregate(t);
            prop_assert!(agg >= (1.0 - width) * lo - 1e-9 && agg <= (1.0 + width) * hi + 1e-9);
        }
    }
}
