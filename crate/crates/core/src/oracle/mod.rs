//! Exhaustive reference solver for `Ŵ^(q)(λ)` on small instances: enumerate
//! tree topologies, place Steiner points optimally, keep the cheapest.

mod steiner;
mod topology;

pub use topology::{enumerate_topologies, enumerate_topologies_capped, Topology, ENUMERATION_CAP};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{dist, Point};
use crate::measures::{SignedConfig, Side};
use crate::network::{graph_cost, Role, WeightedDigraph};
use crate::scalar::Scalar;

/// Default Steiner budget `2N − 2`.
pub fn default_s_max<T: Scalar>(config: &SignedConfig<T>) -> usize {
    (2 * config.n_terminals_per_side()).saturating_sub(2)
}

/// Optimal Steiner positions and cost `Σ m_e^{1/q}|e|` for one topology.
pub fn solve_topology<T: Scalar>(
    topology: &Topology,
    config: &SignedConfig<T>,
    q: T,
) -> (Vec<Point<T>>, T) {
    let p = steiner::place(topology, config, q);
    (p.positions, p.cost)
}

/// Moves the non-terminal vertices of `g` to minimize `Σ m_e^{1/q}|e|` with
/// the topology and weights held fixed.
pub fn optimize_branch_points<T: Scalar>(g: &WeightedDigraph<T>, q: T) -> WeightedDigraph<T> {
    // terminals first, as the placement routine expects
    let mut order: Vec<usize> = (0..g.vertices.len()).filter(|&v| g.vertices[v].role.is_terminal()).collect();
    let t = order.len();
    order.extend((0..g.vertices.len()).filter(|&v| !g.vertices[v].role.is_terminal()));
    if order.len() == t {
        return g.clone();
    }
    let mut label = vec![0; order.len()];
    for (l, &v) in order.iter().enumerate() {
        label[v] = l;
    }
    let inv = T::one() / q;
    let edges: Vec<(usize, usize, T)> = g
        .edges
        .iter()
        .map(|e| (label[e.tail], label[e.head], e.weight.powf(inv)))
        .collect();
    let pos: Vec<Point<T>> = order.iter().map(|&v| g.vertices[v].position.clone()).collect();
    let scale = crate::geometry::diameter(&pos.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
    let pos = steiner::irls(t, &edges, pos, scale);
    let mut out = WeightedDigraph::new(g.dimension);
    for (v, vert) in g.vertices.iter().enumerate() {
        out.add_vertex(vert.role, pos[label[v]].clone());
    }
    for e in &g.edges {
        out.add_edge(e.tail, e.head, e.weight);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTopology<T> {
    pub index: usize,
    pub steiner: usize,
    pub edges: Vec<(usize, usize)>,
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution<T> {
    pub topology: Topology,
    pub steiner_positions: Vec<Point<T>>,
    /// Optimal network with degenerate edges contracted.
    pub graph: WeightedDigraph<T>,
    pub cost: T,
    /// Every enumerated topology, cheapest first.
    pub table: Vec<RankedTopology<T>>,
}

impl<T: Scalar> OracleSolution<T> {
    /// Norm of the weighted unit-vector sum at each Steiner vertex of
    /// `graph`; `None` where the point coincides with a neighbor.
    pub fn stationarity(&self, q: T) -> Vec<Option<T>> {
        let g = &self.graph;
        let edges: Vec<(usize, usize, T)> = g
            .edges
            .iter()
            .map(|e| (e.tail, e.head, e.weight.powf(T::one() / q)))
            .collect();
        let pos: Vec<Point<T>> = g.vertices.iter().map(|v| v.position.clone()).collect();
        let scale = crate::geometry::diameter(&pos.iter().map(|p| p.as_slice()).collect::<Vec<_>>());
        g.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| matches!(v.role, Role::Steiner(_)))
            .map(|(i, _)| steiner::stationarity(i, &edges, &pos, T::lit(1e-9) * scale))
            .collect()
    }
}

fn realize<T: Scalar>(
    topology: &Topology,
    config: &SignedConfig<T>,
    steiner_positions: &[Point<T>],
) -> WeightedDigraph<T> {
    let t = topology.terminals.len();
    let mut pos: Vec<Point<T>> = topology
        .terminals
        .iter()
        .map(|&(side, i)| match side {
            Side::Source => config.sources[i].position.clone(),
            Side::Sink => config.sinks[i].position.clone(),
        })
        .collect();
    pos.extend(steiner_positions.iter().cloned());

    // contract Steiner labels onto coincident neighbors
    let tiny = T::lit(1e-9) * config.diameter();
    let mut rep: Vec<usize> = (0..pos.len()).collect();
    fn find(rep: &mut [usize], mut x: usize) -> usize {
        while rep[x] != x {
            rep[x] = rep[rep[x]];
            x = rep[x];
        }
        x
    }
    for &(a, b) in &topology.edges {
        if dist(&pos[a], &pos[b]) < tiny && (a >= t || b >= t) {
            let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
            if ra != rb {
                // keep the terminal, or the smaller Steiner label
                let (keep, gone) = if ra.min(rb) < t || ra < rb { (ra.min(rb), ra.max(rb)) } else { (rb, ra) };
                rep[gone] = keep;
            }
        }
    }

    let mut g = WeightedDigraph::new(config.dimension);
    let mut index = vec![usize::MAX; pos.len()];
    let mut steiner_count = 0;
    for label in 0..pos.len() {
        if find(&mut rep, label) != label {
            continue;
        }
        let role = if label < t {
            match topology.terminals[label] {
                (Side::Source, i) => Role::Source(i),
                (Side::Sink, j) => Role::Sink(j),
            }
        } else {
            steiner_count += 1;
            Role::Steiner(steiner_count - 1)
        };
        index[label] = g.add_vertex(role, pos[label].clone());
    }
    for (a, b, m) in topology.flows(config) {
        let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
        if ra != rb {
            g.add_edge(index[ra], index[rb], m);
        }
    }
    g
}

/// Cheapest tree over all topologies with at most `s_max` Steiner points.
pub fn oracle<T: Scalar>(config: &SignedConfig<T>, q: T, s_max: usize) -> Result<OracleSolution<T>> {
    let topologies = enumerate_topologies(config, s_max)?;
    let solved: Vec<(Vec<Point<T>>, T)> = topologies
        .par_iter()
        .map(|t| solve_topology(t, config, q))
        .collect();
    let mut table: Vec<RankedTopology<T>> = topologies
        .iter()
        .zip(&solved)
        .enumerate()
        .map(|(index, (t, (_, cost)))| RankedTopology {
            index,
            steiner: t.steiner,
            edges: t.edges.clone(),
            cost: *cost,
        })
        .collect();
    table.sort_by(|a, b| {
        a.cost
            .partial_cmp(&b.cost)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.index.cmp(&b.index))
    });
    let best = table[0].index;
    let topology = topologies[best].clone();
    let steiner_positions = solved[best].0.clone();
    let graph = realize(&topology, config, &steiner_positions);
    let cost = graph_cost(&graph, q);
    Ok(OracleSolution {
        topology,
        steiner_positions,
        graph,
        cost,
        table,
    })
}
