//! Transport plans over sources, sinks and free atoms, solved as exact
//! min-cost flows.

mod flow;
mod plan;

pub use plan::{
    cost_matrix, node_positions, CostMatrix, FreeAtoms, Layout, NodeKind, PlanDocument,
    TransportPlan,
};

use crate::error::{Error, Result};
use crate::geometry::dist;
use crate::measures::{Atom, SignedConfig, BALANCE_TOL};
use crate::scalar::Scalar;

fn slack<T: Scalar>(total: T) -> T {
    T::lit(BALANCE_TOL).max(total * T::epsilon() * T::lit(64.0))
}

/// Optimal plan over `Γ(n, λ⁺, λ⁻)` for fixed free-atom positions.
///
/// Returns the plan and `F_q(Z, γ)`, which is `W_q^q(μ+λ⁺, μ+λ⁻)` for the
/// measure `μ` the plan induces on the free atoms.
pub fn min_cost_plan<T: Scalar>(
    config: &SignedConfig<T>,
    atoms: &FreeAtoms<T>,
    q: T,
) -> Result<(TransportPlan<T>, T)> {
    atoms.check(config.dimension)?;
    let costs = cost_matrix(config, atoms, q);
    let layout = costs.layout;
    let mut supply = vec![T::zero(); layout.len()];
    for (i, a) in config.sources.iter().enumerate() {
        supply[layout.source(i)] = a.mass;
    }
    for (j, a) in config.sinks.iter().enumerate() {
        supply[layout.sink(j)] = -a.mass;
    }
    let sol = flow::min_cost_flow(
        &supply,
        |u, v| costs.is_arc(u, v).then(|| costs.get(u, v)),
        slack(config.total_mass()),
    )?;
    let n = layout.len();
    let mut plan = TransportPlan::new(layout);
    let mut total = T::zero();
    for u in 0..n {
        for v in 0..n {
            let g = sol.flow[u * n + v];
            if g > T::zero() {
                plan.set(u, v, g);
                total = total + g * costs.get(u, v);
            }
        }
    }
    Ok((plan, total))
}

/// `W_q` between two balanced atomic measures, `q ≥ 1`.
pub fn wasserstein_q<T: Scalar>(plus: &[Atom<T>], minus: &[Atom<T>], q: T) -> Result<T> {
    if q < T::one() {
        return Err(Error::ExponentTooSmall(q.to_f64_lossy()));
    }
    if plus.is_empty() {
        return Err(Error::NoSources);
    }
    if minus.is_empty() {
        return Err(Error::NoSinks);
    }
    let a: T = plus.iter().map(|x| x.mass).sum();
    let b: T = minus.iter().map(|x| x.mass).sum();
    if (a - b).abs() > T::lit(BALANCE_TOL) {
        return Err(Error::Unbalanced {
            sources: a.to_f64_lossy(),
            sinks: b.to_f64_lossy(),
        });
    }
    let ns = plus.len();
    let supply: Vec<T> = plus
        .iter()
        .map(|x| x.mass)
        .chain(minus.iter().map(|x| -x.mass))
        .collect();
    let cost = |u: usize, v: usize| {
        (u < ns && v >= ns).then(|| dist(&plus[u].position, &minus[v - ns].position).powf(q))
    };
    let sol = flow::min_cost_flow(&supply, cost, slack(a))?;
    let n = supply.len();
    let mut total = T::zero();
    for u in 0..ns {
        for v in ns..n {
            let g = sol.flow[u * n + v];
            if g > T::zero() {
                total = total + g * cost(u, v).unwrap();
            }
        }
    }
    Ok(total.max(T::zero()).powf(T::one() / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_pair() -> SignedConfig<f64> {
        SignedConfig::new(
            2,
            vec![Atom::new(vec![0.0, 0.0], 1.0)],
            vec![Atom::new(vec![1.0, 0.0], 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn cost_matrix_entries() {
        let c = unit_pair();
        let z = FreeAtoms::new(vec![vec![0.5, 0.0], vec![0.5, 0.0]]);
        let f = cost_matrix(&c, &z, 2.0);
        let l = f.layout;
        assert_eq!(f.get(l.source(0), l.sink(0)), 1.0);
        assert_eq!(f.get(l.source(0), l.free_node(0)), 0.25);
        assert_eq!(f.get(l.free_node(0), l.free_node(1)), 0.0);
        assert!(!f.is_arc(l.free_node(0), l.free_node(0)));
        assert!(!f.is_arc(l.sink(0), l.source(0)));
    }

    #[test]
    fn forced_direct_plan() {
        let (plan, cost) = min_cost_plan(&unit_pair(), &FreeAtoms::empty(), 2.0).unwrap();
        assert_eq!(plan.get(0, 1), 1.0);
        assert_eq!(cost, 1.0);
    }

    #[test]
    fn relay_through_midpoint() {
        let z = FreeAtoms::new(vec![vec![0.5, 0.0]]);
        let (plan, cost) = min_cost_plan(&unit_pair(), &z, 2.0).unwrap();
        assert_eq!(cost, 0.5);
        assert_eq!(plan.throughput(0), 1.0);
        assert_eq!(plan.get(0, 1), 0.0);
        plan.check_feasible(&unit_pair(), 1e-9).unwrap();
    }

    #[test]
    fn wasserstein_of_identical_measures_is_zero() {
        let a = vec![Atom::new(vec![0.0, 1.0], 0.3), Atom::new(vec![2.0, 1.0], 0.7)];
        assert_eq!(wasserstein_q(&a, &a, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn wasserstein_single_atoms() {
        let a = vec![Atom::new(vec![0.0], 4.0)];
        let b = vec![Atom::new(vec![3.0], 4.0)];
        let w: f64 = wasserstein_q(&a, &b, 2.0).unwrap();
        assert!((w - 2.0 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_rejects_unbalanced() {
        let a = vec![Atom::new(vec![0.0], 1.0)];
        let b = vec![Atom::new(vec![3.0], 2.0)];
        assert!(matches!(wasserstein_q(&a, &b, 2.0), Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn plan_triplets_round_trip() {
        let z = FreeAtoms::new(vec![vec![0.5, 0.0]]);
        let (plan, _) = min_cost_plan(&unit_pair(), &z, 2.0).unwrap();
        let doc = PlanDocument::from(&plan);
        // rows: source 0 then free 0 (row 1); columns: sink 0 then free 0 (col 1)
        assert_eq!(doc.entries, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        let back = TransportPlan::try_from(&doc).unwrap();
        assert_eq!(back, plan);
    }
}
