//! Successive shortest paths on a dense uncapacitated network.
//!
//! Every finite entry of the cost matrix is an arc of unbounded capacity.
//! Reduced costs stay nonnegative through node potentials, so each round is a
//! plain O(V²) Dijkstra. Ties are broken toward the smallest node index.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct FlowSolution<T> {
    /// Dense `V × V` flow.
    pub flow: Vec<T>,
}

/// Minimizes `Σ cost(u,v)·f(u,v)` subject to `out(u) − in(u) = supply[u]`.
///
/// `cost(u, v)` returns `None` for a missing arc. Imbalance up to `slack` is
/// left unrouted.
pub(crate) fn min_cost_flow<T: Scalar>(
    supply: &[T],
    cost: impl Fn(usize, usize) -> Option<T>,
    slack: T,
) -> Result<FlowSolution<T>> {
    let v = supply.len();
    let mut c = vec![T::infinity(); v * v];
    for a in 0..v {
        for b in 0..v {
            if a != b {
                if let Some(x) = cost(a, b) {
                    c[a * v + b] = x;
                }
            }
        }
    }
    let mut flow = vec![T::zero(); v * v];
    let mut excess: Vec<T> = supply.to_vec();
    // nonnegative arc costs: zero potentials are feasible
    let mut potential = vec![T::zero(); v];
    let cap = 10 * v * v + 100;
    let mut augmentations = 0;

    let mut dist = vec![T::infinity(); v];
    let mut pred: Vec<Option<(usize, bool)>> = vec![None; v];
    let mut done = vec![false; v];

    loop {
        let any_excess = excess.iter().any(|&e| e > slack);
        let any_deficit = excess.iter().any(|&e| e < -slack);
        if !any_excess || !any_deficit {
            break;
        }
        if augmentations >= cap {
            return Err(Error::FlowNotConverged {
                iterations: augmentations,
            });
        }

        dist.iter_mut().for_each(|d| *d = T::infinity());
        pred.iter_mut().for_each(|p| *p = None);
        done.iter_mut().for_each(|d| *d = false);
        for u in 0..v {
            if excess[u] > slack {
                dist[u] = T::zero();
            }
        }
        loop {
            let mut best: Option<usize> = None;
            for u in 0..v {
                if !done[u] && dist[u].is_finite() && best.is_none_or(|b| dist[u] < dist[b]) {
                    best = Some(u);
                }
            }
            let Some(u) = best else { break };
            done[u] = true;
            for w in 0..v {
                if done[w] {
                    continue;
                }
                // forward arc u→w, unbounded
                let fwd = c[u * v + w];
                if fwd.is_finite() {
                    let rc = (fwd + potential[u] - potential[w]).max(T::zero());
                    let nd = dist[u] + rc;
                    if nd < dist[w] {
                        dist[w] = nd;
                        pred[w] = Some((u, true));
                    }
                }
                // backward arc u→w cancels flow on w→u
                if flow[w * v + u] > T::zero() {
                    let rc = (-c[w * v + u] + potential[u] - potential[w]).max(T::zero());
                    let nd = dist[u] + rc;
                    if nd < dist[w] {
                        dist[w] = nd;
                        pred[w] = Some((u, false));
                    }
                }
            }
        }

        let mut target: Option<usize> = None;
        for u in 0..v {
            if excess[u] < -slack && dist[u].is_finite() && target.is_none_or(|t| dist[u] < dist[t]) {
                target = Some(u);
            }
        }
        let Some(t) = target else {
            return Err(Error::FlowNotConverged {
                iterations: augmentations,
            });
        };
        let dt = dist[t];
        for u in 0..v {
            potential[u] = potential[u] + dist[u].min(dt);
        }

        // bottleneck along the path
        let mut delta = -excess[t];
        let mut node = t;
        while let Some((prev, forward)) = pred[node] {
            if !forward {
                delta = delta.min(flow[node * v + prev]);
            }
            node = prev;
        }
        let s = node;
        delta = delta.min(excess[s]);

        let mut node = t;
        while let Some((prev, forward)) = pred[node] {
            if forward {
                flow[prev * v + node] = flow[prev * v + node] + delta;
            } else {
                let f = &mut flow[node * v + prev];
                *f = if *f <= delta { T::zero() } else { *f - delta };
            }
            node = prev;
        }
        excess[s] = excess[s] - delta;
        excess[t] = excess[t] + delta;
        augmentations += 1;
    }

    Ok(FlowSolution { flow })
}
