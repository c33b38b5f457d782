use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, Point};
use crate::measures::SignedConfig;
use crate::scalar::Scalar;

/// Positions of the `n` free atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FreeAtoms<T>(pub Vec<Point<T>>);

impl<T: Scalar> FreeAtoms<T> {
    pub fn new(positions: Vec<Point<T>>) -> Self {
        Self(positions)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, dimension: usize) -> Result<()> {
        for (index, p) in self.0.iter().enumerate() {
            if p.len() != dimension {
                return Err(Error::FreeAtomDimension {
                    index,
                    expected: dimension,
                    found: p.len(),
                });
            }
        }
        Ok(())
    }
}

/// Role of a node in the combined index set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "role", content = "index", rename_all = "lowercase")]
pub enum NodeKind {
    Source(usize),
    Sink(usize),
    Free(usize),
}

/// Flat node numbering: sources, then sinks, then free atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub sources: usize,
    pub sinks: usize,
    pub free: usize,
}

impl Layout {
    pub fn new<T: Scalar>(config: &SignedConfig<T>, free: usize) -> Self {
        Self {
            sources: config.sources.len(),
            sinks: config.sinks.len(),
            free,
        }
    }

    pub fn len(&self) -> usize {
        self.sources + self.sinks + self.free
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source(&self, i: usize) -> usize {
        i
    }

    pub fn sink(&self, j: usize) -> usize {
        self.sources + j
    }

    pub fn free_node(&self, a: usize) -> usize {
        self.sources + self.sinks + a
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        if node < self.sources {
            NodeKind::Source(node)
        } else if node < self.sources + self.sinks {
            NodeKind::Sink(node - self.sources)
        } else {
            NodeKind::Free(node - self.sources - self.sinks)
        }
    }

    pub fn is_terminal(&self, node: usize) -> bool {
        node < self.sources + self.sinks
    }

    /// Whether flow may leave `node` (sources and free atoms).
    pub fn can_emit(&self, node: usize) -> bool {
        !matches!(self.kind(node), NodeKind::Sink(_))
    }

    /// Whether flow may enter `node` (sinks and free atoms).
    pub fn can_absorb(&self, node: usize) -> bool {
        !matches!(self.kind(node), NodeKind::Source(_))
    }

    /// Row index of the plan matrix: sources first, then free atoms.
    pub fn row_of(&self, node: usize) -> Option<usize> {
        match self.kind(node) {
            NodeKind::Source(i) => Some(i),
            NodeKind::Free(a) => Some(self.sources + a),
            NodeKind::Sink(_) => None,
        }
    }

    /// Column index of the plan matrix: sinks first, then free atoms.
    pub fn col_of(&self, node: usize) -> Option<usize> {
        match self.kind(node) {
            NodeKind::Sink(j) => Some(j),
            NodeKind::Free(a) => Some(self.sinks + a),
            NodeKind::Source(_) => None,
        }
    }

    pub fn node_of_row(&self, row: usize) -> Option<usize> {
        if row < self.sources {
            Some(self.source(row))
        } else if row < self.sources + self.free {
            Some(self.free_node(row - self.sources))
        } else {
            None
        }
    }

    pub fn node_of_col(&self, col: usize) -> Option<usize> {
        if col < self.sinks {
            Some(self.sink(col))
        } else if col < self.sinks + self.free {
            Some(self.free_node(col - self.sinks))
        } else {
            None
        }
    }
}

/// Positions of every node in flat order.
pub fn node_positions<'a, T: Scalar>(
    config: &'a SignedConfig<T>,
    atoms: &'a FreeAtoms<T>,
) -> Vec<&'a [T]> {
    config
        .sources
        .iter()
        .chain(&config.sinks)
        .map(|a| a.position.as_slice())
        .chain(atoms.0.iter().map(|p| p.as_slice()))
        .collect()
}

/// Dense matrix of arc costs `|ζ_u − ζ_v|^q` over flat node ids.
///
/// Arcs into sources, out of sinks and self-loops are infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    pub layout: Layout,
    data: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[u * self.layout.len() + v]
    }

    pub fn is_arc(&self, u: usize, v: usize) -> bool {
        self.get(u, v).is_finite()
    }
}

pub fn cost_matrix<T: Scalar>(config: &SignedConfig<T>, atoms: &FreeAtoms<T>, q: T) -> CostMatrix<T> {
    let layout = Layout::new(config, atoms.len());
    let pos = node_positions(config, atoms);
    let v = layout.len();
    let mut data = vec![T::infinity(); v * v];
    for u in 0..v {
        if !layout.can_emit(u) {
            continue;
        }
        for w in 0..v {
            if u != w && layout.can_absorb(w) {
                data[u * v + w] = dist(pos[u], pos[w]).powf(q);
            }
        }
    }
    CostMatrix { layout, data }
}

/// Sparse nonnegative flow `γ` over the combined index set.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    pub layout: Layout,
    arcs: BTreeMap<(usize, usize), T>,
}

impl<T: Scalar> TransportPlan<T> {
    pub fn new(layout: Layout) -> Self {
        Self {
            layout,
            arcs: BTreeMap::new(),
        }
    }

    pub fn get(&self, u: usize, v: usize) -> T {
        self.arcs.get(&(u, v)).copied().unwrap_or_else(T::zero)
    }

    /// Sets `γ_{u,v}`; zero removes the entry.
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        debug_assert!(value >= T::zero(), "negative flow {value} on ({u},{v})");
        if value > T::zero() {
            self.arcs.insert((u, v), value);
        } else {
            self.arcs.remove(&(u, v));
        }
    }

    pub fn add(&mut self, u: usize, v: usize, delta: T) {
        let next = self.get(u, v) + delta;
        self.set(u, v, next.max(T::zero()));
    }

    /// Positive entries in lexicographic `(tail, head)` order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.arcs.iter().map(|(&(u, v), &g)| (u, v, g))
    }

    pub fn support_len(&self) -> usize {
        self.arcs.len()
    }

    pub fn outflow(&self, node: usize) -> T {
        self.arcs
            .range((node, 0)..(node + 1, 0))
            .map(|(_, &g)| g)
            .sum()
    }

    pub fn inflow(&self, node: usize) -> T {
        self.arcs
            .iter()
            .filter(|(&(_, v), _)| v == node)
            .map(|(_, &g)| g)
            .sum()
    }

    /// `μ({z_a}) = Σ_j γ_{a,j}` for free atom `a`.
    pub fn throughput(&self, free_atom: usize) -> T {
        self.outflow(self.layout.free_node(free_atom))
    }

    /// `F_q(Z, γ) = Σ γ_{u,v} |ζ_u − ζ_v|^q`.
    pub fn cost(&self, config: &SignedConfig<T>, atoms: &FreeAtoms<T>, q: T) -> T {
        let pos = node_positions(config, atoms);
        self.arcs()
            .map(|(u, v, g)| g * dist(pos[u], pos[v]).powf(q))
            .sum()
    }

    /// Drops entries at or below `threshold`.
    pub fn prune(&mut self, threshold: T) {
        self.arcs.retain(|_, g| *g > threshold);
    }

    /// Checks nonnegativity, both marginals and conservation at free atoms.
    pub fn check_feasible(&self, config: &SignedConfig<T>, rel_tol: T) -> std::result::Result<(), String> {
        let scale = config.total_mass();
        let tol = rel_tol * scale;
        for (u, v, g) in self.arcs() {
            if g < T::zero() {
                return Err(format!("negative entry {g} at ({u},{v})"));
            }
            if !self.layout.can_emit(u) || !self.layout.can_absorb(v) {
                return Err(format!("arc ({u},{v}) violates the index convention"));
            }
        }
        for (i, a) in config.sources.iter().enumerate() {
            let out = self.outflow(self.layout.source(i));
            if (out - a.mass).abs() > tol {
                return Err(format!("source {i} emits {out}, mass {}", a.mass));
            }
        }
        for (j, a) in config.sinks.iter().enumerate() {
            let inn = self.inflow(self.layout.sink(j));
            if (inn - a.mass).abs() > tol {
                return Err(format!("sink {j} absorbs {inn}, mass {}", a.mass));
            }
        }
        for a in 0..self.layout.free {
            let node = self.layout.free_node(a);
            let (inn, out) = (self.inflow(node), self.outflow(node));
            if (inn - out).abs() > tol {
                return Err(format!("free atom {a}: inflow {inn} != outflow {out}"));
            }
        }
        Ok(())
    }

    /// Sparse `(row, col, γ)` triplets: rows are sources then free atoms,
    /// columns are sinks then free atoms.
    pub fn triplets(&self) -> Vec<(usize, usize, T)> {
        self.arcs()
            .filter_map(|(u, v, g)| Some((self.layout.row_of(u)?, self.layout.col_of(v)?, g)))
            .collect()
    }

    pub fn from_triplets(layout: Layout, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut plan = Self::new(layout);
        for &(r, c, g) in triplets {
            let u = layout
                .node_of_row(r)
                .ok_or_else(|| Error::Parse(format!("row {r} out of range")))?;
            let v = layout
                .node_of_col(c)
                .ok_or_else(|| Error::Parse(format!("column {c} out of range")))?;
            if !(g >= T::zero()) {
                return Err(Error::Parse(format!("entry ({r},{c}) is negative")));
            }
            plan.add(u, v, g);
        }
        Ok(plan)
    }
}

/// Serializable sparse plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument<T> {
    pub layout: Layout,
    pub entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> From<&TransportPlan<T>> for PlanDocument<T> {
    fn from(plan: &TransportPlan<T>) -> Self {
        Self {
            layout: plan.layout,
            entries: plan.triplets(),
        }
    }
}

impl<T: Scalar> TryFrom<&PlanDocument<T>> for TransportPlan<T> {
    type Error = Error;

    fn try_from(doc: &PlanDocument<T>) -> Result<Self> {
        TransportPlan::from_triplets(doc.layout, &doc.entries)
    }
}
