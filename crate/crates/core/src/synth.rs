//! Random test systems: connected grids with a small fleet and load
//! allocation factors, with line limits tight enough that some bind.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::demandset::AllocationFactors;
use crate::grid::{build_ptdf, Generator, Grid, Line};

#[derive(Debug, Clone)]
pub struct SynthSystem {
    pub grid: Grid,
    pub factors: AllocationFactors,
    /// Aggregate net-load range the fleet can serve comfortably.
    pub load_range: (f64, f64),
}

/// Random spanning tree plus about `n_buses / 2` chords.
fn random_topology<R: Rng>(rng: &mut R, n_buses: usize) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for i in 1..n_buses {
        edges.push((rng.gen_range(0..i), i));
    }
    let extra = n_buses / 2;
    let mut attempts = 0;
    while edges.len() < n_buses - 1 + extra && attempts < 100 {
        attempts += 1;
        let a = rng.gen_range(0..n_buses);
        let b = rng.gen_range(0..n_buses);
        if a == b || edges.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            continue;
        }
        edges.push((a.min(b), a.max(b)));
    }
    edges
}

/// Merit-order dispatch with every unit on, ignoring the network.
fn merit_order(gens: &[Generator], total: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..gens.len()).collect();
    order.sort_by(|&a, &b| gens[a].cost.total_cmp(&gens[b].cost));
    let mut p: Vec<f64> = gens.iter().map(|g| g.pmin).collect();
    let mut rest = total - p.iter().sum::<f64>();
    for g in order {
        let add = rest.clamp(0.0, gens[g].pmax - p[g]);
        p[g] += add;
        rest -= add;
    }
    p
}

pub fn random_system<R: Rng>(rng: &mut R, n_buses: usize, n_generators: usize) -> SynthSystem {
    assert!(n_buses >= 2 && n_generators >= 1);
    let buses: Vec<String> = (1..=n_buses).map(|i| format!("b{i}")).collect();
    let gens: Vec<Generator> = (0..n_generators)
        .map(|k| {
            let pmax = rng.gen_range(30.0..100.0_f64).round();
            Generator {
                id: format!("g{}", k + 1),
                bus: buses[rng.gen_range(0..n_buses)].clone(),
                cost: rng.gen_range(5.0..50.0_f64).round() + 0.1 * k as f64,
                pmin: (rng.gen_range(0.0..0.4) * pmax).round(),
                pmax,
            }
        })
        .collect();
    let mut lines: Vec<Line> = random_topology(rng, n_buses)
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| Line {
            id: format!("l{}", i + 1),
            from: buses[a].clone(),
            to: buses[b].clone(),
            susceptance: rng.gen_range(1.0..10.0_f64),
            capacity: 1e6,
        })
        .collect();

    let mut load_buses: Vec<usize> = (0..n_buses).collect();
    load_buses.shuffle(rng);
    load_buses.truncate(rng.gen_range(2..=n_buses));
    let mut xi = vec![0.0; n_buses];
    for &b in &load_buses {
        xi[b] = rng.gen_range(0.2..1.0);
    }
    let s: f64 = xi.iter().sum();
    xi.iter_mut().for_each(|x| *x /= s);

    let cap: f64 = gens.iter().map(|g| g.pmax).sum();
    let load_range = (0.35 * cap, 0.6 * cap);

    // Size limits from merit-order flows at a few load levels.
    let slack = buses[0].clone();
    let loose = Grid::new("synth", buses.clone(), &slack, lines.clone(), gens.clone()).expect("valid synthetic grid");
    let ptdf = build_ptdf(&loose).expect("connected synthetic grid");
    let mut peak = vec![0.0_f64; lines.len()];
    for k in 0..=4 {
        let total = load_range.0 + (load_range.1 - load_range.0) * k as f64 / 4.0;
        let d: Vec<f64> = xi.iter().map(|x| x * total).collect();
        let q = loose.injections(&merit_order(&gens, total), &d);
        for (pk, f) in peak.iter_mut().zip(ptdf.line_flows(&q).expect("dimensions match")) {
            *pk = pk.max(f.abs());
        }
    }
    for (line, pk) in lines.iter_mut().zip(&peak) {
        line.capacity = (pk * rng.gen_range(0.7..1.4)).max(5.0).round();
    }
    let grid = Grid::new(
        format!("synth-{n_buses}b-{n_generators}g"),
        buses.clone(),
        &slack,
        lines,
        gens,
    )
    .expect("valid synthetic grid");
    SynthSystem {
        grid,
        factors: AllocationFactors { buses, xi },
        load_range,
    }
}
