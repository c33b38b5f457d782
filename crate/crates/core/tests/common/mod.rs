#![allow(dead_code)]

use branched_core::measures::{Atom, SignedConfig};
use branched_core::transport::{FreeAtoms, Layout, TransportPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn y_instance() -> SignedConfig<f64> {
    SignedConfig::new(
        2,
        vec![Atom::new(vec![-1.0, 2.0], 1.0), Atom::new(vec![1.0, 2.0], 1.0)],
        vec![Atom::new(vec![0.0, 0.0], 2.0)],
    )
    .unwrap()
}

pub fn unit_edge() -> SignedConfig<f64> {
    SignedConfig::new(
        2,
        vec![Atom::new(vec![0.0, 0.0], 1.0)],
        vec![Atom::new(vec![1.0, 0.0], 1.0)],
    )
    .unwrap()
}

fn masses(rng: &mut ChaCha8Rng, count: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..count).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|m| m / total).collect()
}

/// Unit total mass on each side, positions uniform in the unit square.
pub fn random_config(rng: &mut ChaCha8Rng, sources: usize, sinks: usize) -> SignedConfig<f64> {
    let mut side = |count: usize| -> Vec<Atom<f64>> {
        let m = masses(rng, count);
        m.into_iter()
            .map(|m| Atom::new(vec![rng.gen::<f64>(), rng.gen::<f64>()], m))
            .collect()
    };
    let s = side(sources);
    let k = side(sinks);
    SignedConfig::new(2, s, k).unwrap()
}

pub fn random_atoms(rng: &mut ChaCha8Rng, n: usize) -> FreeAtoms<f64> {
    FreeAtoms::new((0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect())
}

/// A feasible plan built from random source→free*→sink routes plus random
/// circulations among free atoms, so cycles, self-loops and parallel paths
/// all occur.
pub fn random_plan(rng: &mut ChaCha8Rng, config: &SignedConfig<f64>, n: usize) -> TransportPlan<f64> {
    let layout = Layout::new(config, n);
    let mut plan = TransportPlan::new(layout);
    let mut supply: Vec<f64> = config.sources.iter().map(|a| a.mass).collect();
    let mut demand: Vec<f64> = config.sinks.iter().map(|a| a.mass).collect();
    let (mut i, mut j) = (0, 0);
    // north-west corner on the terminals, each piece routed through free atoms
    while i < supply.len() && j < demand.len() {
        let piece = supply[i].min(demand[j]);
        let pieces = rng.gen_range(1..=3);
        for _ in 0..pieces {
            let share = piece / pieces as f64;
            let hops = if n == 0 { 0 } else { rng.gen_range(0..=4) };
            let mut path = vec![layout.source(i)];
            for _ in 0..hops {
                path.push(layout.free_node(rng.gen_range(0..n)));
            }
            path.push(layout.sink(j));
            for w in path.windows(2) {
                plan.add(w[0], w[1], share);
            }
        }
        supply[i] -= piece;
        demand[j] -= piece;
        if supply[i] <= 1e-15 {
            i += 1;
        }
        if demand[j] <= 1e-15 {
            j += 1;
        }
    }
    if n > 0 {
        for _ in 0..rng.gen_range(0..3) {
            let len = rng.gen_range(1..=4);
            let cycle: Vec<usize> = (0..len).map(|_| layout.free_node(rng.gen_range(0..n))).collect();
            let m = rng.gen_range(0.01..0.3);
            for t in 0..len {
                plan.add(cycle[t], cycle[(t + 1) % len], m);
            }
        }
    }
    plan
}

/// Minimum of `Σ γ_{uv}|ζ_u − ζ_v|^q` over feasible plans, by enumerating
/// every spanning tree of the arc set (the bases of the transshipment LP),
/// solving the tree flow by leaf peeling and keeping the cheapest
/// nonnegative one. Independent of the library's flow code.
pub fn brute_force_plan_cost(config: &SignedConfig<f64>, atoms: &[Vec<f64>], q: f64) -> f64 {
    let s = config.sources.len();
    let k = config.sinks.len();
    let n = atoms.len();
    let v = s + k + n;
    let mut pos: Vec<Vec<f64>> = Vec::with_capacity(v);
    let mut supply = Vec::with_capacity(v);
    for a in &config.sources {
        pos.push(a.position.clone());
        supply.push(a.mass);
    }
    for a in &config.sinks {
        pos.push(a.position.clone());
        supply.push(-a.mass);
    }
    for z in atoms {
        pos.push(z.clone());
        supply.push(0.0);
    }
    let emits = |u: usize| u < s || u >= s + k;
    let absorbs = |u: usize| u >= s;
    let mut arcs = Vec::new();
    for a in 0..v {
        for b in 0..v {
            if a != b && emits(a) && absorbs(b) {
                let d: f64 = pos[a].iter().zip(&pos[b]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                arcs.push((a, b, d.powf(q)));
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut chosen = Vec::with_capacity(v - 1);
    let parent: Vec<usize> = (0..v).collect();
    spanning(&arcs, 0, v - 1, parent, &mut chosen, &mut |tree: &[usize]| {
        if let Some(c) = tree_flow_cost(&arcs, tree, &supply) {
            best = best.min(c);
        }
    });
    best
}

fn find(p: &mut [usize], mut x: usize) -> usize {
    while p[x] != x {
        x = p[x];
    }
    x
}

fn spanning(
    arcs: &[(usize, usize, f64)],
    from: usize,
    need: usize,
    parent: Vec<usize>,
    chosen: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    if chosen.len() == need {
        visit(chosen);
        return;
    }
    if arcs.len() - from < need - chosen.len() {
        return;
    }
    for e in from..arcs.len() {
        if arcs.len() - e < need - chosen.len() {
            break;
        }
        let mut p = parent.clone();
        let (ra, rb) = (find(&mut p, arcs[e].0), find(&mut p, arcs[e].1));
        if ra == rb {
            continue;
        }
        p[ra] = rb;
        chosen.push(e);
        spanning(arcs, e + 1, need, p, chosen, visit);
        chosen.pop();
    }
}

fn tree_flow_cost(arcs: &[(usize, usize, f64)], tree: &[usize], supply: &[f64]) -> Option<f64> {
    let v = supply.len();
    let mut b = supply.to_vec();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); v];
    for (t, &e) in tree.iter().enumerate() {
        incident[arcs[e].0].push(t);
        incident[arcs[e].1].push(t);
    }
    let mut alive = vec![true; tree.len()];
    let mut deg: Vec<usize> = incident.iter().map(|i| i.len()).collect();
    let mut cost = 0.0;
    let mut stack: Vec<usize> = (0..v).filter(|&u| deg[u] == 1).collect();
    while let Some(u) = stack.pop() {
        if deg[u] != 1 {
            continue;
        }
        let t = *incident[u].iter().find(|&&t| alive[t]).unwrap();
        alive[t] = false;
        let (a, h, c) = arcs[tree[t]];
        // flow on (a → h) that balances the leaf u
        let f = if u == a { b[u] } else { -b[u] };
        if f < -1e-12 {
            return None;
        }
        let other = if u == a { h } else { a };
        b[other] += b[u];
        b[u] = 0.0;
        cost += f.max(0.0) * c;
        deg[u] = 0;
        deg[other] -= 1;
        if deg[other] == 1 {
            stack.push(other);
        }
    }
    Some(cost)
}
