//! Labeled tree topologies over terminals plus anonymous Steiner points.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{SignedConfig, Side};
use crate::scalar::Scalar;

/// Default cap on enumerated Prüfer sequences.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// A tree on `terminals.len() + steiner` labels; labels at or beyond
/// `terminals.len()` are Steiner points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub terminals: Vec<(Side, usize)>,
    pub steiner: usize,
    /// Undirected edges, smaller label first.
    pub edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn labels(&self) -> usize {
        self.terminals.len() + self.steiner
    }

    pub fn is_steiner(&self, label: usize) -> bool {
        label >= self.terminals.len()
    }

    pub fn degree(&self, label: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == label || b == label)
            .count()
    }

    /// Signed supplies per label: `+m` at sources, `−m` at sinks, 0 elsewhere.
    pub fn supplies<T: Scalar>(&self, config: &SignedConfig<T>) -> Vec<T> {
        let mut b = vec![T::zero(); self.labels()];
        for (l, &(side, i)) in self.terminals.iter().enumerate() {
            b[l] = match side {
                Side::Source => config.sources[i].mass,
                Side::Sink => -config.sinks[i].mass,
            };
        }
        b
    }

    /// Oriented flows `(tail, head, m_e)`, one per edge, fixed by conservation.
    pub fn flows<T: Scalar>(&self, config: &SignedConfig<T>) -> Vec<(usize, usize, T)> {
        let n = self.labels();
        let supply = self.supplies(config);
        let mut adj = vec![Vec::new(); n];
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            adj[a].push((b, i));
            adj[b].push((a, i));
        }
        // iterative DFS from label 0, then accumulate subtree sums bottom-up
        let mut order = Vec::with_capacity(n);
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            order.push(v);
            for &(w, e) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some((v, e));
                    stack.push(w);
                }
            }
        }
        let mut subtree = supply;
        let mut out = vec![(0, 0, T::zero()); self.edges.len()];
        for &v in order.iter().rev() {
            if let Some((p, e)) = parent[v] {
                let f = subtree[v];
                out[e] = if f >= T::zero() { (v, p, f) } else { (p, v, -f) };
                subtree[p] = subtree[p] + f;
            }
        }
        out
    }

    /// Canonical form up to permutations of Steiner labels.
    fn canonical(&self) -> String {
        let n = self.labels();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        fn enc(v: usize, parent: usize, adj: &[Vec<usize>], t: usize) -> String {
            let mut kids: Vec<String> = adj[v]
                .iter()
                .filter(|&&w| w != parent)
                .map(|&w| enc(w, v, adj, t))
                .collect();
            kids.sort();
            let head = if v < t { format!("t{v}") } else { "s".to_string() };
            format!("{head}({})", kids.join(","))
        }
        enc(0, usize::MAX, &adj, self.terminals.len())
    }
}

fn prufer_decode(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).expect("Prüfer leaf");
        edges.push((leaf.min(x), leaf.max(x)));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Every tree on the positive-mass terminals plus `s ≤ s_max` Steiner points
/// of degree at least 3, once per Steiner relabeling, skipping trees whose
/// flows vanish on some edge.
pub fn enumerate_topologies<T: Scalar>(config: &SignedConfig<T>, s_max: usize) -> Result<Vec<Topology>> {
    enumerate_topologies_capped(config, s_max, ENUMERATION_CAP)
}

pub fn enumerate_topologies_capped<T: Scalar>(
    config: &SignedConfig<T>,
    s_max: usize,
    cap: usize,
) -> Result<Vec<Topology>> {
    let terminals: Vec<(Side, usize)> = config
        .sources
        .iter()
        .enumerate()
        .filter(|(_, a)| a.mass > T::zero())
        .map(|(i, _)| (Side::Source, i))
        .chain(
            config
                .sinks
                .iter()
                .enumerate()
                .filter(|(_, a)| a.mass > T::zero())
                .map(|(j, _)| (Side::Sink, j)),
        )
        .collect();
    let t = terminals.len();
    let thr = T::lit(crate::regularize::ZERO_FLOW) * config.total_mass();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut generated = 0usize;
    let s_top = s_max.min(t.saturating_sub(2));
    for s in 0..=s_top {
        let n = t + s;
        let len = n - 2;
        let mut seq = vec![0usize; len];
        let mut occ = vec![0usize; s];
        let mut sink = |seq: &[usize]| -> Result<()> {
            generated += 1;
            if generated > cap {
                return Err(Error::EnumerationCap(cap));
            }
            let topo = Topology {
                terminals: terminals.clone(),
                steiner: s,
                edges: prufer_decode(seq, n),
            };
            if topo.flows(config).iter().any(|&(_, _, f)| f <= thr) {
                return Ok(());
            }
            if seen.insert(topo.canonical()) {
                out.push(topo);
            }
            Ok(())
        };
        fill(&mut seq, 0, t, s, &mut occ, &mut sink)?;
    }
    Ok(out)
}

/// Depth-first Prüfer sequences in which every Steiner label appears twice
/// or more.
fn fill(
    seq: &mut Vec<usize>,
    pos: usize,
    t: usize,
    s: usize,
    occ: &mut Vec<usize>,
    sink: &mut impl FnMut(&[usize]) -> Result<()>,
) -> Result<()> {
    let missing: usize = occ.iter().map(|&o| 2usize.saturating_sub(o)).sum();
    if seq.len() - pos < missing {
        return Ok(());
    }
    if pos == seq.len() {
        return sink(seq);
    }
    for label in 0..t + s {
        seq[pos] = label;
        if label >= t {
            occ[label - t] += 1;
        }
        fill(seq, pos + 1, t, s, occ, sink)?;
        if label >= t {
            occ[label - t] -= 1;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Atom;

    fn config(sources: &[(f64, f64, f64)], sinks: &[(f64, f64, f64)]) -> SignedConfig<f64> {
        let atoms = |v: &[(f64, f64, f64)]| {
            v.iter()
                .map(|&(x, y, m)| Atom::new(vec![x, y], m))
                .collect::<Vec<_>>()
        };
        SignedConfig::new(2, atoms(sources), atoms(sinks)).unwrap()
    }

    #[test]
    fn two_terminals_have_one_tree() {
        let c = config(&[(0.0, 0.0, 1.0)], &[(1.0, 0.0, 1.0)]);
        let ts = enumerate_topologies(&c, 0).unwrap();
        assert_eq!(ts.len(), 1);
        assert_eq!(ts[0].edges, vec![(0, 1)]);
    }

    #[test]
    fn three_terminals_have_four_trees() {
        let c = config(&[(-1.0, 2.0, 1.0), (1.0, 2.0, 1.0)], &[(0.0, 0.0, 2.0)]);
        let ts = enumerate_topologies(&c, 1).unwrap();
        assert_eq!(ts.len(), 4);
        assert_eq!(ts.iter().filter(|t| t.steiner == 1).count(), 1);
        let star = ts.iter().find(|t| t.steiner == 1).unwrap();
        assert_eq!(star.degree(3), 3);
    }

    #[test]
    fn four_terminals_include_every_double_y() {
        let c = config(
            &[(0.0, 0.0, 1.0), (0.0, 1.0, 2.0)],
            &[(3.0, 0.0, 1.5), (3.0, 1.0, 1.5)],
        );
        let ts = enumerate_topologies(&c, 2).unwrap();
        let mut pairings = HashSet::new();
        for t in ts.iter().filter(|t| t.steiner == 2) {
            if (4..6).all(|s| t.degree(s) == 3) {
                // terminals hanging off Steiner point 4
                let mut side: Vec<usize> = t
                    .edges
                    .iter()
                    .filter_map(|&(a, b)| (b == 4 && a < 4).then_some(a))
                    .collect();
                side.sort();
                let key = if side.contains(&0) {
                    side
                } else {
                    (0..4).filter(|x| !side.contains(x)).collect()
                };
                pairings.insert(key);
            }
        }
        let want: HashSet<Vec<usize>> = [vec![0, 1], vec![0, 2], vec![0, 3]].into_iter().collect();
        assert_eq!(pairings, want);
    }

    #[test]
    fn steiner_degree_at_least_three() {
        let c = config(
            &[(0.0, 0.0, 1.0), (0.0, 1.0, 1.0), (1.0, 2.0, 1.0)],
            &[(3.0, 0.0, 1.0), (3.0, 1.0, 1.0), (4.0, 2.0, 1.0)],
        );
        let ts = enumerate_topologies(&c, 4).unwrap();
        for t in &ts {
            for s in t.terminals.len()..t.labels() {
                assert!(t.degree(s) >= 3);
            }
        }
        assert!(ts.iter().any(|t| t.steiner == 4));
    }

    #[test]
    fn cap_is_reported() {
        let c = config(&[(-1.0, 2.0, 1.0), (1.0, 2.0, 1.0)], &[(0.0, 0.0, 2.0)]);
        assert_eq!(
            enumerate_topologies_capped(&c, 1, 2),
            Err(Error::EnumerationCap(2))
        );
    }

    #[test]
    fn flows_follow_conservation() {
        let c = config(&[(-1.0, 2.0, 1.0), (1.0, 2.0, 1.0)], &[(0.0, 0.0, 2.0)]);
        let star = Topology {
            terminals: vec![(Side::Source, 0), (Side::Source, 1), (Side::Sink, 0)],
            steiner: 1,
            edges: vec![(0, 3), (1, 3), (2, 3)],
        };
        assert_eq!(star.flows(&c), vec![(0, 3, 1.0), (1, 3, 1.0), (3, 2, 2.0)]);
    }
}
