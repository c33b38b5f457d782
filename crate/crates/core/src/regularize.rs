//! Regular plans: no positive-flow cycles and no two distinct positive-flow
//! paths between the same pair of nodes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dist;
use crate::measures::SignedConfig;
use crate::scalar::Scalar;
use crate::transport::{node_positions, FreeAtoms, TransportPlan};

/// Flows at or below this fraction of the total mass count as zero.
pub const ZERO_FLOW: f64 = 1e-12;

/// First witness of a failed regularity check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    SelfLoop(usize),
    Cycle(Vec<usize>),
    ParallelPaths(Vec<usize>, Vec<usize>),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::SelfLoop(i) => write!(f, "self-loop at node {i}"),
            Violation::Cycle(c) => write!(f, "positive cycle {c:?}"),
            Violation::ParallelPaths(a, b) => write!(f, "parallel paths {a:?} and {b:?}"),
        }
    }
}

/// A maximal run of positive arcs through interior vertices of in- and
/// out-degree one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain<T> {
    pub nodes: Vec<usize>,
    pub flow: T,
}

impl<T> Chain<T> {
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

fn threshold<T: Scalar>(plan: &TransportPlan<T>) -> T {
    let total: T = (0..plan.layout.sources).map(|i| plan.outflow(i)).sum();
    T::lit(ZERO_FLOW) * total.max(T::min_positive_value())
}

/// Out-neighbors over arcs above the zero threshold, ascending.
fn support<T: Scalar>(plan: &TransportPlan<T>) -> Vec<Vec<usize>> {
    let thr = threshold(plan);
    let mut out = vec![Vec::new(); plan.layout.len()];
    for (u, v, g) in plan.arcs() {
        if g > thr {
            out[u].push(v);
        }
    }
    out
}

fn find_cycle(out: &[Vec<usize>]) -> Option<Vec<usize>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Open,
        Closed,
    }
    let n = out.len();
    let mut mark = vec![Mark::New; n];
    let mut stack_nodes: Vec<usize> = Vec::new();
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        // (node, next child index)
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Open;
        stack_nodes.push(root);
        while let Some(&mut (u, ref mut next)) = stack.last_mut() {
            if *next < out[u].len() {
                let w = out[u][*next];
                *next += 1;
                match mark[w] {
                    Mark::New => {
                        mark[w] = Mark::Open;
                        stack.push((w, 0));
                        stack_nodes.push(w);
                    }
                    Mark::Open => {
                        let start = stack_nodes.iter().position(|&x| x == w).unwrap();
                        return Some(stack_nodes[start..].to_vec());
                    }
                    Mark::Closed => {}
                }
            } else {
                mark[u] = Mark::Closed;
                stack.pop();
                stack_nodes.pop();
            }
        }
    }
    None
}

/// Subtracts the bottleneck flow around positive cycles until none remain.
///
/// Marginals and conservation are unchanged and `F_q` cannot increase.
pub fn cancel_cycles<T: Scalar>(plan: &TransportPlan<T>) -> TransportPlan<T> {
    let mut plan = plan.clone();
    while let Some(cycle) = find_cycle(&support(&plan)) {
        let arcs: Vec<(usize, usize)> = (0..cycle.len())
            .map(|k| (cycle[k], cycle[(k + 1) % cycle.len()]))
            .collect();
        let delta = arcs
            .iter()
            .map(|&(u, v)| plan.get(u, v))
            .fold(T::infinity(), T::min);
        for &(u, v) in &arcs {
            let g = plan.get(u, v);
            plan.set(u, v, if g <= delta { T::zero() } else { g - delta });
        }
    }
    plan
}

/// Kahn order with smallest-index-first tie-break.
fn topological_order(out: &[Vec<usize>]) -> Vec<usize> {
    let n = out.len();
    let mut indeg = vec![0usize; n];
    for vs in out {
        for &v in vs {
            indeg[v] += 1;
        }
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&u| indeg[u] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = ready.pop_first() {
        order.push(u);
        for &v in &out[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.insert(v);
            }
        }
    }
    order
}

/// Two distinct paths from `from` to a common endpoint with disjoint
/// interiors, if any exist. Requires an acyclic support.
fn parallel_paths_from(
    from: usize,
    out: &[Vec<usize>],
    preds: &[Vec<usize>],
    order: &[usize],
) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = out.len();
    let mut count = vec![0u8; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    count[from] = 1;
    let start = order.iter().position(|&x| x == from)?;
    for &v in &order[start + 1..] {
        let reach: Vec<usize> = preds[v].iter().copied().filter(|&p| count[p] > 0).collect();
        let total: u32 = reach.iter().map(|&p| count[p] as u32).sum();
        if total >= 2 {
            // v is the first node reached twice, so each reaching pred has count 1
            let (a, b) = (reach[0], reach[1]);
            let trace = |mut x: usize| {
                let mut path = vec![x];
                while let Some(p) = parent[x] {
                    path.push(p);
                    x = p;
                }
                path.reverse();
                path
            };
            let mut pa = trace(a);
            let mut pb = trace(b);
            pa.push(v);
            pb.push(v);
            let common = pa.iter().zip(&pb).take_while(|(x, y)| x == y).count();
            return Some((pa[common - 1..].to_vec(), pb[common - 1..].to_vec()));
        }
        if total == 1 {
            count[v] = 1;
            parent[v] = Some(reach[0]);
        }
    }
    None
}

fn first_parallel_pair(out: &[Vec<usize>]) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = out.len();
    let mut preds = vec![Vec::new(); n];
    for (u, vs) in out.iter().enumerate() {
        for &v in vs {
            preds[v].push(u);
        }
    }
    let order = topological_order(out);
    (0..n).find_map(|u| parallel_paths_from(u, out, &preds, &order))
}

fn path_cost<T: Scalar>(path: &[usize], pos: &[&[T]], q: T) -> T {
    path.windows(2).map(|w| dist(pos[w[0]], pos[w[1]]).powf(q)).sum()
}

/// Moves flow from the costlier of two parallel paths onto the cheaper one
/// until no two distinct positive paths share both endpoints.
///
/// Path costs are `Σ |ζ_a − ζ_b|^q` along the path, the per-unit cost under
/// `F_q`. Pairs are processed from the smallest start node and the scan
/// restarts after every reroute.
pub fn merge_parallel_paths<T: Scalar>(
    plan: &TransportPlan<T>,
    config: &SignedConfig<T>,
    atoms: &FreeAtoms<T>,
    q: T,
) -> Result<TransportPlan<T>> {
    let mut plan = plan.clone();
    let pos = node_positions(config, atoms);
    loop {
        let out = support(&plan);
        if find_cycle(&out).is_some() {
            return Err(Error::NotRegular("support has a cycle".into()));
        }
        let Some((p1, p2)) = first_parallel_pair(&out) else {
            return Ok(plan);
        };
        let (c1, c2) = (path_cost(&p1, &pos, q), path_cost(&p2, &pos, q));
        let (keep, drop) = if c1 <= c2 { (p1, p2) } else { (p2, p1) };
        let delta = drop
            .windows(2)
            .map(|w| plan.get(w[0], w[1]))
            .fold(T::infinity(), T::min);
        for w in drop.windows(2) {
            let g = plan.get(w[0], w[1]);
            plan.set(w[0], w[1], if g <= delta { T::zero() } else { g - delta });
        }
        for w in keep.windows(2) {
            plan.add(w[0], w[1], delta);
        }
    }
}

/// `merge_parallel_paths ∘ cancel_cycles`.
pub fn regularize<T: Scalar>(
    plan: &TransportPlan<T>,
    config: &SignedConfig<T>,
    atoms: &FreeAtoms<T>,
    q: T,
) -> Result<TransportPlan<T>> {
    merge_parallel_paths(&cancel_cycles(plan), config, atoms, q)
}

/// Checks both regularity conditions, returning the first violation.
pub fn check_regular<T: Scalar>(plan: &TransportPlan<T>) -> std::result::Result<(), Violation> {
    let out = support(plan);
    for (u, vs) in out.iter().enumerate() {
        if vs.contains(&u) {
            return Err(Violation::SelfLoop(u));
        }
    }
    if let Some(c) = find_cycle(&out) {
        return Err(Violation::Cycle(c));
    }
    if let Some((a, b)) = first_parallel_pair(&out) {
        return Err(Violation::ParallelPaths(a, b));
    }
    Ok(())
}

pub fn is_regular<T: Scalar>(plan: &TransportPlan<T>) -> bool {
    check_regular(plan).is_ok()
}

/// Splits the positive support of a regular plan into maximal chains.
///
/// Every positive arc lands in exactly one chain. Chains run between nodes
/// that are terminals or have in- or out-degree other than one.
pub fn maximal_chains<T: Scalar>(plan: &TransportPlan<T>) -> Result<Vec<Chain<T>>> {
    check_regular(plan).map_err(|v| Error::NotRegular(v.to_string()))?;
    let out = support(plan);
    let n = out.len();
    let mut indeg = vec![0usize; n];
    for vs in &out {
        for &v in vs {
            indeg[v] += 1;
        }
    }
    let layout = plan.layout;
    let interior = |v: usize| !layout.is_terminal(v) && indeg[v] == 1 && out[v].len() == 1;
    let mut chains = Vec::new();
    for u in 0..n {
        if interior(u) {
            continue;
        }
        for &first in &out[u] {
            let flow = plan.get(u, first);
            let mut nodes = vec![u, first];
            let mut cur = first;
            while interior(cur) {
                let next = out[cur][0];
                let g = plan.get(cur, next);
                if (g - flow).abs() > T::lit(1e-9) * flow.max(g) {
                    return Err(Error::UnequalChainFlow {
                        first: flow.to_f64_lossy(),
                        other: g.to_f64_lossy(),
                    });
                }
                nodes.push(next);
                cur = next;
            }
            chains.push(Chain { nodes, flow });
        }
    }
    Ok(chains)
}
