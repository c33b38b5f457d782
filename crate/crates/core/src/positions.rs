//! Free-atom positions: the convex inner problem for a fixed plan and the
//! outer alternation between plans and positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocate::{allocate, largest_remainder};
use crate::error::Result;
use crate::geometry::{bounding_box, dist, lerp, sub, Point};
use crate::linalg::SymMatrix;
use crate::measures::{CostParams, SignedConfig};
use crate::network::{plan_to_graph, reduce_graph};
use crate::oracle::optimize_branch_points;
use crate::regularize::{regularize, ZERO_FLOW};
use crate::scalar::Scalar;
use crate::transport::{
    min_cost_plan, node_positions, FreeAtoms, NodeKind, PlanDocument, TransportPlan,
};

const ARMIJO: f64 = 1e-4;
const REFINE_ROUNDS: usize = 4;

/// `∇_{z_a} F_q(Z, γ)` for every free atom.
///
/// Each positive arc contributes `γ·q|d|^{q−2}d` with `d = ζ_u − ζ_v` to its
/// tail and the negative to its head. Coincident endpoints contribute zero.
pub fn grad_positions<T: Scalar>(
    config: &SignedConfig<T>,
    atoms: &FreeAtoms<T>,
    plan: &TransportPlan<T>,
    q: T,
) -> Vec<Point<T>> {
    let k = config.dimension;
    let layout = plan.layout;
    let pos = node_positions(config, atoms);
    let mut grad = vec![vec![T::zero(); k]; atoms.len()];
    for (u, v, g) in plan.arcs() {
        let d = sub(pos[u], pos[v]);
        let r = crate::geometry::norm(&d);
        if r == T::zero() {
            continue;
        }
        let coef = g * q * r.powf(q - T::lit(2.0));
        if let NodeKind::Free(a) = layout.kind(u) {
            for c in 0..k {
                grad[a][c] = grad[a][c] + coef * d[c];
            }
        }
        if let NodeKind::Free(b) = layout.kind(v) {
            for c in 0..k {
                grad[b][c] = grad[b][c] - coef * d[c];
            }
        }
    }
    grad
}

/// Outcome of the inner position solve.
#[derive(Debug, Clone)]
pub struct PositionSolve<T> {
    pub atoms: FreeAtoms<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the gradient over atoms with positive throughput.
    pub grad_norm: T,
}

fn grad_scale<T: Scalar>(config: &SignedConfig<T>, q: T) -> T {
    let d = config.diameter();
    let d = if d > T::zero() { d } else { T::one() };
    config.total_mass() * d.powf(q - T::one())
}

/// Minimizes `F_q(·, γ)` over the positions of atoms that carry flow.
///
/// Damped Newton steps on the block Hessian with Armijo backtracking
/// (halving); falls back to steepest descent when the Newton direction is not
/// a descent direction. Unused atoms stay where they are.
pub fn optimize_positions<T: Scalar>(
    config: &SignedConfig<T>,
    plan: &TransportPlan<T>,
    start: &FreeAtoms<T>,
    q: T,
    tol: T,
    max_iterations: usize,
) -> PositionSolve<T> {
    let k = config.dimension;
    let layout = plan.layout;
    let thr = T::lit(ZERO_FLOW) * config.total_mass();
    let active: Vec<usize> = (0..start.len())
        .filter(|&a| plan.throughput(a) > thr || plan.inflow(layout.free_node(a)) > thr)
        .collect();
    let mut slot = vec![usize::MAX; start.len()];
    for (s, &a) in active.iter().enumerate() {
        slot[a] = s;
    }
    let target = tol * grad_scale(config, q);
    let mut atoms = start.clone();
    let mut f = plan.cost(config, &atoms, q);
    let inf_norm = |g: &[Point<T>]| {
        active
            .iter()
            .flat_map(|&a| g[a].iter().map(|x| x.abs()))
            .fold(T::zero(), T::max)
    };

    let mut iterations = 0;
    let mut grad = grad_positions(config, &atoms, plan, q);
    let mut gnorm = inf_norm(&grad);
    while gnorm > target && iterations < max_iterations && !active.is_empty() {
        iterations += 1;
        let dim = active.len() * k;
        let g_flat: Vec<T> = active.iter().flat_map(|&a| grad[a].clone()).collect();
        let hess = hessian(config, &atoms, plan, q, &slot, dim);
        let neg: Vec<T> = g_flat.iter().map(|&x| -x).collect();
        let mut step = hess.solve_shifted(&neg).unwrap_or_else(|| neg.clone());
        let mut slope: T = step.iter().zip(&g_flat).map(|(&p, &g)| p * g).sum();
        if !(slope < T::zero()) {
            step = neg.clone();
            slope = -g_flat.iter().map(|&x| x * x).sum::<T>();
        }
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial = atoms.clone();
            for (s, &a) in active.iter().enumerate() {
                for c in 0..k {
                    trial.0[a][c] = atoms.0[a][c] + t * step[s * k + c];
                }
            }
            let ft = plan.cost(config, &trial, q);
            if ft <= f + T::lit(ARMIJO) * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t = t * T::lit(0.5);
        }
        let Some((next, fnext)) = accepted else {
            // no representable decrease left
            break;
        };
        atoms = next;
        f = fnext;
        grad = grad_positions(config, &atoms, plan, q);
        gnorm = inf_norm(&grad);
    }
    PositionSolve {
        atoms,
        iterations,
        converged: gnorm <= target,
        grad_norm: gnorm,
    }
}

fn hessian<T: Scalar>(
    config: &SignedConfig<T>,
    atoms: &FreeAtoms<T>,
    plan: &TransportPlan<T>,
    q: T,
    slot: &[usize],
    dim: usize,
) -> SymMatrix<T> {
    let k = config.dimension;
    let layout = plan.layout;
    let pos = node_positions(config, atoms);
    let floor = T::lit(1e-12) * config.diameter().max(T::min_positive_value());
    let mut h = SymMatrix::zeros(dim);
    let var = |node: usize| match layout.kind(node) {
        NodeKind::Free(a) if slot[a] != usize::MAX => Some(slot[a]),
        _ => None,
    };
    for (u, v, g) in plan.arcs() {
        let (su, sv) = (var(u), var(v));
        if su.is_none() && sv.is_none() {
            continue;
        }
        let d = sub(pos[u], pos[v]);
        let r = crate::geometry::norm(&d).max(floor);
        let base = g * q * r.powf(q - T::lit(2.0));
        let radial = (q - T::lit(2.0)) / (r * r);
        let block = |i: usize, j: usize| {
            let id = if i == j { T::one() } else { T::zero() };
            base * (id + radial * d[i] * d[j])
        };
        for i in 0..k {
            for j in 0..k {
                let b = block(i, j);
                if let Some(a) = su {
                    h.add(a * k + i, a * k + j, b);
                }
                if let Some(c) = sv {
                    h.add(c * k + i, c * k + j, b);
                }
                if let (Some(a), Some(c)) = (su, sv) {
                    h.add(a * k + i, c * k + j, -b);
                    h.add(c * k + i, a * k + j, -b);
                }
            }
        }
    }
    h
}

/// Best joint minimizer found for `W̄^(n)_q`.
#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub atoms: FreeAtoms<T>,
    pub plan: TransportPlan<T>,
    /// `F_q(Z, γ)`, the q-th power of `wbar`.
    pub cost_q: T,
    pub wbar: T,
    /// `n^{1−1/q}·wbar`.
    pub rescaled: T,
    pub iterations: usize,
    pub converged: bool,
    /// Free atoms that carry no flow.
    pub unused: Vec<usize>,
    /// Whether every half-step kept the cost non-increasing.
    pub monotone: bool,
    /// Index of the winning start (0 is the deterministic seed).
    pub start: usize,
    pub start_costs: Vec<T>,
    /// Accepted re-allocation rounds after the multistart.
    pub refinements: usize,
}

impl<T: Scalar> SolveResult<T> {
    pub fn n(&self) -> usize {
        self.atoms.len()
    }

    /// Free atoms with positive throughput and their masses `μ({z_a})`.
    pub fn measure(&self) -> Vec<(Point<T>, T)> {
        (0..self.atoms.len())
            .filter(|a| !self.unused.contains(a))
            .map(|a| (self.atoms.0[a].clone(), self.plan.throughput(a)))
            .collect()
    }
}

fn finish<T: Scalar>(
    config: &SignedConfig<T>,
    atoms: FreeAtoms<T>,
    plan: TransportPlan<T>,
    cost_q: T,
    q: T,
) -> SolveResult<T> {
    let n = atoms.len();
    let thr = T::lit(ZERO_FLOW) * config.total_mass();
    let unused = (0..n).filter(|&a| plan.throughput(a) <= thr).collect();
    let wbar = cost_q.max(T::zero()).powf(T::one() / q);
    let rescaled = T::from_usize_lossy(n).powf(T::one() - T::one() / q) * wbar;
    SolveResult {
        atoms,
        plan,
        cost_q,
        wbar,
        rescaled,
        iterations: 0,
        converged: true,
        unused,
        monotone: true,
        start: 0,
        start_costs: Vec::new(),
        refinements: 0,
    }
}

/// Atoms spread along the segments of a `W_1`-optimal matching, in numbers
/// proportional to `γ^{1/q}|x − y|`.
pub fn matching_seed<T: Scalar>(config: &SignedConfig<T>, n: usize, q: T) -> Result<FreeAtoms<T>> {
    let none = FreeAtoms::empty();
    let (plan, _) = min_cost_plan(config, &none, T::one())?;
    let pos = node_positions(config, &none);
    let segs: Vec<(usize, usize, T)> = plan.arcs().collect();
    let weights: Vec<T> = segs
        .iter()
        .map(|&(u, v, g)| g.powf(T::one() / q) * dist(pos[u], pos[v]))
        .collect();
    let counts = largest_remainder(&weights, n, 0);
    let mut atoms = Vec::with_capacity(n);
    for (&(u, v, _), &c) in segs.iter().zip(&counts) {
        for l in 1..=c {
            let t = T::from_usize_lossy(l) / T::from_usize_lossy(c + 1);
            atoms.push(lerp(pos[u], pos[v], t));
        }
    }
    Ok(FreeAtoms::new(atoms))
}

/// `n` atoms uniform in the terminals' bounding box.
pub fn random_seed<T: Scalar>(config: &SignedConfig<T>, n: usize, rng: &mut impl Rng) -> FreeAtoms<T> {
    let k = config.dimension;
    let (lo, hi) = bounding_box(config.terminal_positions(), k);
    FreeAtoms::new(
        (0..n)
            .map(|_| {
                (0..k)
                    .map(|c| {
                        let u = T::lit(rng.gen::<f64>());
                        lo[c] + (hi[c] - lo[c]) * u
                    })
                    .collect()
            })
            .collect(),
    )
}

/// Moves unused atoms to midpoints of the costliest arcs, splitting each
/// chosen arc in two. Leaves the plan cost unchanged.
fn relocate_unused<T: Scalar>(
    config: &SignedConfig<T>,
    atoms: &mut FreeAtoms<T>,
    plan: &TransportPlan<T>,
    q: T,
) -> usize {
    let thr = T::lit(ZERO_FLOW) * config.total_mass();
    let unused: Vec<usize> = (0..atoms.len())
        .filter(|&a| plan.throughput(a) <= thr)
        .collect();
    if unused.is_empty() {
        return 0;
    }
    let pos: Vec<Point<T>> = node_positions(config, atoms)
        .into_iter()
        .map(|p| p.to_vec())
        .collect();
    let mut segs: Vec<(Point<T>, Point<T>, T)> = plan
        .arcs()
        .map(|(u, v, g)| (pos[u].clone(), pos[v].clone(), g))
        .collect();
    let mut moved = 0;
    for a in unused {
        let best = segs
            .iter()
            .enumerate()
            .map(|(i, (p, r, g))| (i, *g * dist(p, r).powf(q)))
            .fold(None::<(usize, T)>, |acc, (i, c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((i, c)),
            });
        let Some((i, c)) = best else { break };
        if !(c > T::zero()) {
            break;
        }
        let (p, r, g) = segs.swap_remove(i);
        let mid = lerp(&p, &r, T::lit(0.5));
        atoms.0[a] = mid.clone();
        segs.push((p, mid.clone(), g));
        segs.push((mid, r, g));
        moved += 1;
    }
    moved
}

fn run_start<T: Scalar>(
    config: &SignedConfig<T>,
    start: FreeAtoms<T>,
    params: &CostParams<T>,
) -> Result<SolveResult<T>> {
    let q = params.q;
    let slack = T::lit(1e-12);
    let mut atoms = start;
    let mut monotone = true;
    let mut prev = T::infinity();
    let mut converged = false;
    let mut rounds = 0;
    let mut state: Option<(TransportPlan<T>, T)> = None;
    let mut check = |before: T, after: T| {
        if after > before + slack * before.abs().max(T::one()) {
            monotone = false;
        }
    };
    while rounds < params.outer_iterations {
        rounds += 1;
        if let Some((old_plan, _)) = &state {
            // the previous plan is feasible at the current positions
            let at_current = old_plan.cost(config, &atoms, q);
            prev = prev.min(at_current);
        }
        let (plan, c_plan) = min_cost_plan(config, &atoms, q)?;
        check(prev, c_plan);
        let plan = regularize(&plan, config, &atoms, q)?;
        let c_reg = plan.cost(config, &atoms, q);
        check(c_plan, c_reg);
        let solved = optimize_positions(
            config,
            &plan,
            &atoms,
            q,
            params.position_tol,
            params.position_iterations,
        );
        let c_pos = plan.cost(config, &solved.atoms, q);
        check(c_reg, c_pos);
        atoms = solved.atoms;
        let relocated = relocate_unused(config, &mut atoms, &plan, q);
        let decrease = prev - c_pos;
        state = Some((plan, c_pos));
        if relocated == 0 && prev.is_finite() && decrease <= params.outer_tol * prev.abs() {
            converged = solved.converged || decrease <= T::zero();
            break;
        }
        prev = c_pos;
    }
    let (plan, cost) = state.expect("at least one round runs");
    let mut res = finish(config, atoms, plan, cost, q);
    res.iterations = rounds;
    res.converged = converged;
    res.monotone = monotone;
    Ok(res)
}

/// Alternates exact plan solves, regularization and position solves from
/// several starts and keeps the cheapest result.
///
/// Start 0 seeds atoms along a `W_1` matching; starts `1..=restarts` are
/// uniform in the terminals' bounding box, each with its own stream of the
/// seeded generator. `extra` starts are appended after those.
pub fn alternate_minimize<T: Scalar>(
    config: &SignedConfig<T>,
    n: usize,
    params: &CostParams<T>,
) -> Result<SolveResult<T>> {
    alternate_minimize_with(config, n, params, &[])
}

pub fn alternate_minimize_with<T: Scalar>(
    config: &SignedConfig<T>,
    n: usize,
    params: &CostParams<T>,
    extra: &[FreeAtoms<T>],
) -> Result<SolveResult<T>> {
    let q = params.q;
    if n == 0 {
        let empty = FreeAtoms::empty();
        let (plan, cost) = min_cost_plan(config, &empty, q)?;
        return Ok(finish(config, empty, plan, cost, q));
    }
    let mut starts = vec![matching_seed(config, n, q)?];
    for s in 1..=params.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(s as u64);
        starts.push(random_seed(config, n, &mut rng));
    }
    starts.extend(extra.iter().filter(|z| z.len() == n).cloned());

    let results: Vec<Result<SolveResult<T>>> = starts
        .into_par_iter()
        .map(|z| run_start(config, z, params))
        .collect();
    let mut best: Option<SolveResult<T>> = None;
    let mut costs = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let mut r = r?;
        r.start = i;
        costs.push(r.cost_q);
        if best.as_ref().is_none_or(|b| r.cost_q < b.cost_q) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    best.start_costs = costs;
    refine(config, best, params)
}

/// Re-spreads the atoms along the reduced tree of the incumbent, with branch
/// points moved to their continuum optimum and optimal per-edge counts, and
/// alternates again while that lowers the cost. Escapes minima where the
/// junction is pinned by a bad split of atoms between branches.
fn refine<T: Scalar>(
    config: &SignedConfig<T>,
    mut best: SolveResult<T>,
    params: &CostParams<T>,
) -> Result<SolveResult<T>> {
    let n = best.n();
    for _ in 0..REFINE_ROUNDS {
        let Ok(g) = plan_to_graph(config, &best.atoms, &best.plan) else { break };
        let Ok(tree) = reduce_graph(&g) else { break };
        if tree.graph.edges.is_empty() || tree.graph.edges.len() > n {
            break;
        }
        let straight = optimize_branch_points(&tree.graph, params.q);
        let Ok(alloc) = allocate(&straight, n, params.q) else { break };
        let r = run_start(config, alloc.atoms(), params)?;
        if !(r.cost_q < best.cost_q * (T::one() - params.outer_tol)) {
            break;
        }
        let (start, start_costs) = (best.start, std::mem::take(&mut best.start_costs));
        best = SolveResult { start, start_costs, refinements: best.refinements + 1, ..r };
    }
    Ok(best)
}

/// Serializable summary of a [`SolveResult`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport<T> {
    pub n: usize,
    pub q: T,
    pub positions: Vec<Point<T>>,
    pub plan: PlanDocument<T>,
    pub cost_q: T,
    pub wbar: T,
    pub rescaled: T,
    pub iterations: usize,
    pub converged: bool,
    pub monotone: bool,
    pub unused: Vec<usize>,
    pub start: usize,
    pub start_costs: Vec<T>,
    pub refinements: usize,
}

impl<T: Scalar> SolveReport<T> {
    pub fn new(result: &SolveResult<T>, q: T) -> Self {
        Self {
            n: result.n(),
            q,
            positions: result.atoms.0.clone(),
            plan: PlanDocument::from(&result.plan),
            cost_q: result.cost_q,
            wbar: result.wbar,
            rescaled: result.rescaled,
            iterations: result.iterations,
            converged: result.converged,
            monotone: result.monotone,
            unused: result.unused.clone(),
            start: result.start,
            start_costs: result.start_costs.clone(),
            refinements: result.refinements,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::Atom;
    use crate::transport::Layout;

    fn segment() -> SignedConfig<f64> {
        SignedConfig::new(
            2,
            vec![Atom::new(vec![0.0, 0.0], 1.0)],
            vec![Atom::new(vec![1.0, 0.0], 1.0)],
        )
        .unwrap()
    }

    fn chain_plan(c: &SignedConfig<f64>, n: usize) -> TransportPlan<f64> {
        let l = Layout::new(c, n);
        let mut p = TransportPlan::new(l);
        let mut prev = l.source(0);
        for a in 0..n {
            p.set(prev, l.free_node(a), 1.0);
            prev = l.free_node(a);
        }
        p.set(prev, l.sink(0), 1.0);
        p
    }

    #[test]
    fn midpoint_is_stationary() {
        let c = segment();
        let z = FreeAtoms::new(vec![vec![0.5, 0.0]]);
        let g = grad_positions(&c, &z, &chain_plan(&c, 1), 2.0);
        assert_eq!(g, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn gradient_by_hand() {
        let c = segment();
        let z = FreeAtoms::new(vec![vec![0.25, 0.0]]);
        let g = grad_positions(&c, &z, &chain_plan(&c, 1), 2.0);
        assert_eq!(g, vec![vec![-1.0, 0.0]]);
    }

    #[test]
    fn single_atom_moves_to_midpoint() {
        let c = segment();
        let z0 = FreeAtoms::new(vec![vec![0.9, 0.7]]);
        let s = optimize_positions(&c, &chain_plan(&c, 1), &z0, 2.0, 1e-12, 500);
        assert!(s.converged);
        assert!(dist(&s.atoms.0[0], &[0.5, 0.0]) < 1e-9);
    }

    #[test]
    fn chain_atoms_are_equally_spaced() {
        let c = segment();
        let z0 = FreeAtoms::new(vec![vec![0.1, 0.3], vec![0.2, -0.4], vec![0.95, 0.1]]);
        for q in [1.5, 2.0, 3.0] {
            let s = optimize_positions(&c, &chain_plan(&c, 3), &z0, q, 1e-12, 500);
            for (a, want) in [0.25, 0.5, 0.75].iter().enumerate() {
                assert!(
                    dist(&s.atoms.0[a], &[*want, 0.0]) < 1e-6,
                    "q={q} atom {a} at {:?}",
                    s.atoms.0[a]
                );
            }
        }
    }

    #[test]
    fn unused_atoms_stay_put() {
        let c = segment();
        let l = Layout::new(&c, 2);
        let mut p = TransportPlan::new(l);
        p.set(l.source(0), l.free_node(0), 1.0);
        p.set(l.free_node(0), l.sink(0), 1.0);
        let z0 = FreeAtoms::new(vec![vec![0.3, 0.3], vec![5.0, 5.0]]);
        let s = optimize_positions(&c, &p, &z0, 2.0, 1e-12, 500);
        assert_eq!(s.atoms.0[1], vec![5.0, 5.0]);
    }

    #[test]
    fn no_free_atoms_is_plain_wasserstein() {
        let c = SignedConfig::new(
            1,
            vec![Atom::new(vec![0.0], 4.0)],
            vec![Atom::new(vec![2.0], 4.0)],
        )
        .unwrap();
        let r = alternate_minimize(&c, 0, &CostParams::new(2.0).unwrap()).unwrap();
        assert!((r.wbar - 4.0f64.sqrt() * 2.0).abs() < 1e-12);
        assert_eq!(r.rescaled, 0.0);
    }

    #[test]
    fn three_atoms_on_a_unit_edge() {
        let r = alternate_minimize(&segment(), 3, &CostParams::new(2.0).unwrap()).unwrap();
        assert!((r.cost_q - 0.25).abs() < 1e-10, "{}", r.cost_q);
        assert!((r.wbar - 0.5).abs() < 1e-10);
        assert!((r.rescaled - 3f64.sqrt() * 0.5).abs() < 1e-9);
        assert!(r.monotone);
        assert!(r.unused.is_empty());
    }

    #[test]
    fn seeds_are_reproducible() {
        let p = CostParams::new(2.0).unwrap().with_seed(7).with_restarts(3);
        let a = alternate_minimize(&segment(), 4, &p).unwrap();
        let b = alternate_minimize(&segment(), 4, &p).unwrap();
        assert_eq!(a.cost_q.to_bits(), b.cost_q.to_bits());
        assert_eq!(a.atoms, b.atoms);
    }
}
