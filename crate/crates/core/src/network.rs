//! Embedded weighted digraphs induced by plans, their chain reduction, and
//! structural checks on reduced trees.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{bounding_box, dist, lerp, point_segment_dist, Point};
use crate::measures::SignedConfig;
use crate::regularize::{check_regular, ZERO_FLOW};
use crate::scalar::Scalar;
use crate::transport::{node_positions, FreeAtoms, NodeKind, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum Role {
    Source(usize),
    Sink(usize),
    /// Free atom of a transport plan.
    Free(usize),
    /// Branch point of an oracle network.
    Steiner(usize),
}

impl Role {
    pub fn is_terminal(self) -> bool {
        matches!(self, Role::Source(_) | Role::Sink(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex<T> {
    pub role: Role,
    pub position: Point<T>,
}

/// Directed edge carrying flow `weight` from `tail` to `head`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge<T> {
    pub tail: usize,
    pub head: usize,
    pub weight: T,
    pub length: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDigraph<T> {
    pub dimension: usize,
    pub vertices: Vec<Vertex<T>>,
    pub edges: Vec<Edge<T>>,
}

impl<T: Scalar> WeightedDigraph<T> {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            vertices: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn add_vertex(&mut self, role: Role, position: Point<T>) -> usize {
        self.vertices.push(Vertex { role, position });
        self.vertices.len() - 1
    }

    pub fn add_edge(&mut self, tail: usize, head: usize, weight: T) {
        let length = dist(&self.vertices[tail].position, &self.vertices[head].position);
        self.edges.push(Edge {
            tail,
            head,
            weight,
            length,
        });
    }

    pub fn degrees(&self) -> Vec<(usize, usize)> {
        let mut deg = vec![(0, 0); self.vertices.len()];
        for e in &self.edges {
            deg[e.head].0 += 1;
            deg[e.tail].1 += 1;
        }
        deg
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|e| e.tail == v || e.head == v)
            .count()
    }

    pub fn segment(&self, e: &Edge<T>) -> (&[T], &[T]) {
        (
            &self.vertices[e.tail].position,
            &self.vertices[e.head].position,
        )
    }

    /// `Σ_e m_e |e|^q`.
    pub fn cost_q(&self, q: T) -> T {
        self.edges.iter().map(|e| e.weight * e.length.powf(q)).sum()
    }

    /// Acyclic as an undirected multigraph.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.tail), find(&mut parent, e.head));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }

    /// Terminal flux matches the instance and interior vertices conserve flow.
    pub fn check_flux(&self, config: &SignedConfig<T>, rel_tol: T) -> std::result::Result<(), String> {
        let tol = rel_tol * config.total_mass();
        let mut net = vec![T::zero(); self.vertices.len()];
        for e in &self.edges {
            net[e.tail] = net[e.tail] + e.weight;
            net[e.head] = net[e.head] - e.weight;
        }
        for (v, vert) in self.vertices.iter().enumerate() {
            let want = match vert.role {
                Role::Source(i) => config.sources[i].mass,
                Role::Sink(j) => -config.sinks[j].mass,
                Role::Free(_) | Role::Steiner(_) => T::zero(),
            };
            if (net[v] - want).abs() > tol {
                return Err(format!("vertex {v} ({:?}) has net outflow {}, expected {want}", vert.role, net[v]));
            }
        }
        Ok(())
    }
}

/// `Σ_e |e|·m_e^{1/q}`.
pub fn graph_cost<T: Scalar>(g: &WeightedDigraph<T>, q: T) -> T {
    let inv = T::one() / q;
    g.edges.iter().map(|e| e.length * e.weight.powf(inv)).sum()
}

/// Graph of a regular plan: terminals, free atoms that carry flow, and one
/// edge per positive entry.
pub fn plan_to_graph<T: Scalar>(
    config: &SignedConfig<T>,
    atoms: &FreeAtoms<T>,
    plan: &TransportPlan<T>,
) -> Result<WeightedDigraph<T>> {
    check_regular(plan).map_err(|v| Error::NotRegular(v.to_string()))?;
    let layout = plan.layout;
    let pos = node_positions(config, atoms);
    let thr = T::lit(ZERO_FLOW) * config.total_mass();
    let mut g = WeightedDigraph::new(config.dimension);
    let mut index = vec![usize::MAX; layout.len()];
    for node in 0..layout.len() {
        let role = match layout.kind(node) {
            NodeKind::Source(i) => Role::Source(i),
            NodeKind::Sink(j) => Role::Sink(j),
            NodeKind::Free(a) => {
                if plan.throughput(a) <= thr {
                    continue;
                }
                Role::Free(a)
            }
        };
        index[node] = g.add_vertex(role, pos[node].to_vec());
    }
    for (u, v, w) in plan.arcs() {
        if w > thr && index[u] != usize::MAX && index[v] != usize::MAX {
            g.add_edge(index[u], index[v], w);
        }
    }
    Ok(g)
}

/// A graph without interior degree-2 vertices, remembering the vertex
/// positions of the chain each edge replaced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedTree<T> {
    pub graph: WeightedDigraph<T>,
    /// Per edge, positions from tail to head including collapsed vertices.
    pub chains: Vec<Vec<Point<T>>>,
}

impl<T: Scalar> ReducedTree<T> {
    /// Cost of the chains as drawn minus the cost of the straight edges.
    pub fn straightness_defect(&self, q: T) -> T {
        let inv = T::one() / q;
        self.graph
            .edges
            .iter()
            .zip(&self.chains)
            .map(|(e, ch)| {
                let drawn: T = ch.windows(2).map(|w| dist(&w[0], &w[1])).sum();
                (drawn - e.length) * e.weight.powf(inv)
            })
            .sum()
    }

    pub fn interior_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.graph
            .vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.role.is_terminal())
            .map(|(i, _)| i)
    }
}

/// Collapses every maximal chain through interior degree-2 vertices into one
/// straight edge carrying the chain's common flow.
pub fn reduce_graph<T: Scalar>(g: &WeightedDigraph<T>) -> Result<ReducedTree<T>> {
    if !g.is_forest() {
        return Err(Error::Cyclic);
    }
    let deg = g.degrees();
    let mut out_edges = vec![Vec::new(); g.vertices.len()];
    for (i, e) in g.edges.iter().enumerate() {
        out_edges[e.tail].push(i);
    }
    let interior =
        |v: usize| !g.vertices[v].role.is_terminal() && deg[v].0 == 1 && deg[v].1 == 1;

    let mut reduced = WeightedDigraph::new(g.dimension);
    let mut index = vec![usize::MAX; g.vertices.len()];
    for (v, vert) in g.vertices.iter().enumerate() {
        if !interior(v) {
            index[v] = reduced.add_vertex(vert.role, vert.position.clone());
        }
    }
    let mut chains = Vec::new();
    for v in 0..g.vertices.len() {
        if interior(v) {
            continue;
        }
        for &first in &out_edges[v] {
            let weight = g.edges[first].weight;
            let mut points = vec![g.vertices[v].position.clone()];
            let mut cur = g.edges[first].head;
            points.push(g.vertices[cur].position.clone());
            while interior(cur) {
                let e = &g.edges[out_edges[cur][0]];
                if (e.weight - weight).abs() > T::lit(1e-6) * weight.max(e.weight) {
                    return Err(Error::UnequalChainFlow {
                        first: weight.to_f64_lossy(),
                        other: e.weight.to_f64_lossy(),
                    });
                }
                cur = e.head;
                points.push(g.vertices[cur].position.clone());
            }
            reduced.add_edge(index[v], index[cur], weight);
            chains.push(points);
        }
    }
    Ok(ReducedTree {
        graph: reduced,
        chains,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub witness: Option<String>,
}

/// Pass/fail per structural property of a reduced tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub checks: Vec<Check>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for StructureReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{:<16} {}", c.name, if c.passed { "ok" } else { "FAIL" })?;
            if let Some(w) = &c.witness {
                write!(f, "  ({w})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Relative tolerance for collinearity and equal spacing along chains.
pub const CHAIN_TOL: f64 = 1e-5;

fn chain_defect<T: Scalar>(points: &[Point<T>]) -> Option<String> {
    let (a, b) = (&points[0], &points[points.len() - 1]);
    let len = dist(a, b);
    let gaps: Vec<T> = points.windows(2).map(|w| dist(&w[0], &w[1])).collect();
    let total: T = gaps.iter().copied().sum();
    let scale = len.max(total);
    let tol = T::lit(CHAIN_TOL);
    for p in &points[1..points.len() - 1] {
        let off = point_segment_dist(p, a, b);
        if off > tol * scale {
            return Some(format!("point {p:?} is {off} off its chord"));
        }
    }
    let mean = total / T::from_usize_lossy(gaps.len());
    for (i, &gap) in gaps.iter().enumerate() {
        if (gap - mean).abs() > tol * mean {
            return Some(format!("gap {i} is {gap}, mean {mean}"));
        }
    }
    None
}

/// Checks acyclicity, interior degrees, vertex count, straight equally spaced
/// chains, edge-weight bracket, flux and containment in the terminals'
/// bounding box inflated by 10%.
pub fn verify_structure<T: Scalar>(t: &ReducedTree<T>, config: &SignedConfig<T>) -> StructureReport {
    let g = &t.graph;
    let mut checks = Vec::new();
    let mut push = |name: &str, witness: Option<String>| {
        checks.push(Check {
            name: name.to_string(),
            passed: witness.is_none(),
            witness,
        });
    };

    push("acyclic", (!g.is_forest()).then(|| "undirected cycle".to_string()));

    let low_degree = g
        .vertices
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.role.is_terminal())
        .find(|(i, _)| g.degree(*i) < 3)
        .map(|(i, v)| format!("vertex {i} ({:?}) has degree {}", v.role, g.degree(i)));
    push("interior_degree", low_degree);

    let n = config.n_terminals_per_side();
    let cap = 2 * n * n * n + 2 * n;
    push(
        "vertex_count",
        (g.vertices.len() > cap).then(|| format!("{} vertices > {cap}", g.vertices.len())),
    );

    let bent = t
        .chains
        .iter()
        .enumerate()
        .find_map(|(i, ch)| chain_defect(ch).map(|w| format!("edge {i}: {w}")));
    push("line_segments", bent);

    let lo = config.smallest_positive_mass() / T::from_usize_lossy(4 * n * n);
    let hi = config.total_mass();
    let slack = T::lit(1e-9) * hi;
    let bad_weight = g
        .edges
        .iter()
        .enumerate()
        .find(|(_, e)| e.weight < lo - slack || e.weight > hi + slack)
        .map(|(i, e)| format!("edge {i} weight {} outside [{lo}, {hi}]", e.weight));
    push("weight_bounds", bad_weight);

    push("flux", g.check_flux(config, T::lit(1e-9)).err());

    let k = config.dimension;
    let (mut bl, mut bh) = bounding_box(config.terminal_positions(), k);
    let tiny = T::lit(1e-9) * config.diameter();
    for c in 0..k {
        let margin = T::lit(0.1) * (bh[c] - bl[c]) + tiny;
        bl[c] = bl[c] - margin;
        bh[c] = bh[c] + margin;
    }
    let outside = g
        .vertices
        .iter()
        .map(|v| &v.position)
        .chain(t.chains.iter().flatten())
        .find(|p| (0..k).any(|c| p[c] < bl[c] || p[c] > bh[c]))
        .map(|p| format!("point {p:?} outside the inflated box"));
    push("bounded", outside);

    StructureReport { checks }
}

/// Points every `spacing` along each edge, endpoints included, plus isolated
/// vertices.
pub fn sample_points<T: Scalar>(g: &WeightedDigraph<T>, spacing: T) -> Vec<Point<T>> {
    let mut pts: Vec<Point<T>> = Vec::new();
    let mut touched = vec![false; g.vertices.len()];
    for e in &g.edges {
        touched[e.tail] = true;
        touched[e.head] = true;
        let (a, b) = g.segment(e);
        let steps = (e.length / spacing).ceil().to_usize().unwrap_or(1).max(1);
        for s in 0..=steps {
            pts.push(lerp(a, b, T::from_usize_lossy(s) / T::from_usize_lossy(steps)));
        }
    }
    for (v, vert) in g.vertices.iter().enumerate() {
        if !touched[v] {
            pts.push(vert.position.clone());
        }
    }
    pts
}

/// Vertex table and edge table for on-disk graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument<T> {
    pub dimension: usize,
    pub vertices: Vec<VertexRow<T>>,
    pub edges: Vec<EdgeRow<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexRow<T> {
    pub id: usize,
    pub role: Role,
    pub coordinates: Point<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow<T> {
    pub tail: usize,
    pub head: usize,
    pub weight: T,
    pub length: T,
}

impl<T: Scalar> From<&WeightedDigraph<T>> for GraphDocument<T> {
    fn from(g: &WeightedDigraph<T>) -> Self {
        Self {
            dimension: g.dimension,
            vertices: g
                .vertices
                .iter()
                .enumerate()
                .map(|(id, v)| VertexRow {
                    id,
                    role: v.role,
                    coordinates: v.position.clone(),
                })
                .collect(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeRow {
                    tail: e.tail,
                    head: e.head,
                    weight: e.weight,
                    length: e.length,
                })
                .collect(),
        }
    }
}

impl<T: Scalar> TryFrom<&GraphDocument<T>> for WeightedDigraph<T> {
    type Error = Error;

    fn try_from(doc: &GraphDocument<T>) -> Result<Self> {
        let mut g = WeightedDigraph::new(doc.dimension);
        for (i, row) in doc.vertices.iter().enumerate() {
            if row.id != i {
                return Err(Error::Parse(format!("vertex ids must be 0..n, found {} at {i}", row.id)));
            }
            if row.coordinates.len() != doc.dimension {
                return Err(Error::Parse(format!("vertex {i} has the wrong dimension")));
            }
            g.add_vertex(row.role, row.coordinates.clone());
        }
        for e in &doc.edges {
            if e.tail >= g.vertices.len() || e.head >= g.vertices.len() {
                return Err(Error::Parse(format!("edge {}→{} out of range", e.tail, e.head)));
            }
            g.add_edge(e.tail, e.head, e.weight);
        }
        Ok(g)
    }
}
