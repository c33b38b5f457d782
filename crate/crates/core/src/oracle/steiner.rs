//! Steiner point placement for a fixed topology: minimize `Σ w_e |p_a − p_b|`
//! with `w_e = m_e^{1/q}` by iteratively reweighted least squares.

use crate::geometry::{dist, norm, sub, Point};
use crate::linalg::SymMatrix;
use crate::measures::{SignedConfig, Side};
use crate::scalar::Scalar;

use super::topology::Topology;

const MAX_SWEEPS: usize = 50_000;

pub(crate) struct Placement<T> {
    pub positions: Vec<Point<T>>,
    pub cost: T,
}

fn terminal_position<T: Scalar>(config: &SignedConfig<T>, (side, i): (Side, usize)) -> Point<T> {
    match side {
        Side::Source => config.sources[i].position.clone(),
        Side::Sink => config.sinks[i].position.clone(),
    }
}

fn weighted_cost<T: Scalar>(edges: &[(usize, usize, T)], pos: &[Point<T>]) -> T {
    edges.iter().map(|&(a, b, w)| w * dist(&pos[a], &pos[b])).sum()
}

/// One IRLS solve from `start`. Terminal labels keep their positions.
pub(crate) fn irls<T: Scalar>(
    t: usize,
    edges: &[(usize, usize, T)],
    mut pos: Vec<Point<T>>,
    scale: T,
) -> Vec<Point<T>> {
    let s = pos.len() - t;
    if s == 0 {
        return pos;
    }
    let k = pos[0].len();
    let floor = T::lit(1e-15) * scale;
    let stop = T::lit(1e-15) * scale;
    for _ in 0..MAX_SWEEPS {
        let mut lap = SymMatrix::zeros(s);
        let mut rhs = vec![vec![T::zero(); k]; s];
        for &(a, b, w) in edges {
            let c = w / dist(&pos[a], &pos[b]).max(floor);
            match (a >= t, b >= t) {
                (true, true) => {
                    let (i, j) = (a - t, b - t);
                    lap.add(i, i, c);
                    lap.add(j, j, c);
                    lap.add(i, j, -c);
                    lap.add(j, i, -c);
                }
                (true, false) | (false, true) => {
                    let (st, term) = if a >= t { (a - t, b) } else { (b - t, a) };
                    lap.add(st, st, c);
                    for d in 0..k {
                        rhs[st][d] = rhs[st][d] + c * pos[term][d];
                    }
                }
                (false, false) => {}
            }
        }
        let mut moved = T::zero();
        let mut next = pos.clone();
        for d in 0..k {
            let b: Vec<T> = rhs.iter().map(|r| r[d]).collect();
            let Some(x) = lap.solve_shifted(&b) else {
                return pos;
            };
            for i in 0..s {
                next[t + i][d] = x[i];
            }
        }
        for i in t..pos.len() {
            moved = moved.max(dist(&pos[i], &next[i]));
        }
        pos = next;
        if moved <= stop {
            break;
        }
    }
    pos
}

/// Norm of `Σ_e w_e · (unit vector from the point along e)` at a Steiner
/// label, or `None` when the point sits on a neighbor.
pub(crate) fn stationarity<T: Scalar>(
    label: usize,
    edges: &[(usize, usize, T)],
    pos: &[Point<T>],
    coincide: T,
) -> Option<T> {
    let k = pos[label].len();
    let mut sum = vec![T::zero(); k];
    for &(a, b, w) in edges {
        let other = if a == label {
            b
        } else if b == label {
            a
        } else {
            continue;
        };
        let d = sub(&pos[other], &pos[label]);
        let r = norm(&d);
        if r <= coincide {
            return None;
        }
        for c in 0..k {
            sum[c] = sum[c] + w * d[c] / r;
        }
    }
    Some(norm(&sum))
}

pub(crate) fn place<T: Scalar>(topology: &Topology, config: &SignedConfig<T>, q: T) -> Placement<T> {
    let t = topology.terminals.len();
    let inv = T::one() / q;
    let edges: Vec<(usize, usize, T)> = topology
        .flows(config)
        .into_iter()
        .map(|(a, b, m)| (a, b, m.powf(inv)))
        .collect();
    let mut pos: Vec<Point<T>> = topology
        .terminals
        .iter()
        .map(|&l| terminal_position(config, l))
        .collect();
    let k = config.dimension;
    let centroid: Point<T> = (0..k)
        .map(|d| pos.iter().map(|p| p[d]).sum::<T>() / T::from_usize_lossy(t))
        .collect();
    let scale = config.diameter().max(T::min_positive_value());
    for i in 0..topology.steiner {
        // distinct deterministic offsets so Steiner points do not start stacked
        let mut p = centroid.clone();
        p[i % k] = p[i % k] + scale * T::lit(1e-3) * T::from_usize_lossy(i + 1);
        pos.push(p);
    }
    let mut best = irls(t, &edges, pos, scale);
    let mut best_cost = weighted_cost(&edges, &best);

    // a Steiner point stuck on a neighbor: perturb and retry once
    let coincide = T::lit(1e-9) * scale;
    let stuck = (t..topology.labels()).any(|l| stationarity(l, &edges, &best, coincide).is_none());
    if stuck {
        let mut retry = best.clone();
        for (i, p) in retry.iter_mut().enumerate().skip(t) {
            p[(i + 1) % k] = p[(i + 1) % k] + scale * T::lit(0.05);
        }
        let retry = irls(t, &edges, retry, scale);
        let c = weighted_cost(&edges, &retry);
        if c < best_cost {
            best = retry;
            best_cost = c;
        }
    }
    Placement {
        positions: best.split_off(t),
        cost: best_cost,
    }
}
