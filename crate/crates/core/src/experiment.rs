//! n-sweeps of the solver against the oracle, with the bounds that sandwich
//! the rescaled cost and Hausdorff distances between embedded trees.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::allocate::{allocate, allocation_upper_bound};
use crate::error::{Error, Result};
use crate::geometry::{point_segment_dist, Point};
use crate::measures::{CostParams, SignedConfig};
use crate::network::{plan_to_graph, reduce_graph, sample_points, WeightedDigraph};
use crate::oracle::{default_s_max, oracle, OracleSolution};
use crate::positions::{alternate_minimize_with, SolveResult};
use crate::scalar::Scalar;

/// Both one-sided distances and where they are attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausdorffReport<T> {
    pub distance: T,
    /// `sup_{x∈g1} d(x, g2)`.
    pub forward: T,
    /// `sup_{y∈g2} d(y, g1)`.
    pub backward: T,
    pub forward_witness: Point<T>,
    pub backward_witness: Point<T>,
    pub resolution: T,
    pub samples: (usize, usize),
}

fn distance_to_graph<T: Scalar>(p: &[T], g: &WeightedDigraph<T>) -> T {
    let mut best = T::infinity();
    let mut touched = vec![false; g.vertices.len()];
    for e in &g.edges {
        touched[e.tail] = true;
        touched[e.head] = true;
        let (a, b) = g.segment(e);
        best = best.min(point_segment_dist(p, a, b));
    }
    for (v, vert) in g.vertices.iter().enumerate() {
        if !touched[v] {
            best = best.min(crate::geometry::dist(p, &vert.position));
        }
    }
    best
}

fn one_sided<T: Scalar>(from: &WeightedDigraph<T>, to: &WeightedDigraph<T>, res: T) -> (T, Point<T>, usize) {
    let pts = sample_points(from, res);
    let count = pts.len();
    let mut worst = (T::zero(), pts[0].clone());
    for p in pts {
        let d = distance_to_graph(&p, to);
        if d > worst.0 {
            worst = (d, p);
        }
    }
    (worst.0, worst.1, count)
}

/// Hausdorff distance between the unions of closed edge segments, exact up
/// to `resolution`.
pub fn hausdorff_report<T: Scalar>(
    g1: &WeightedDigraph<T>,
    g2: &WeightedDigraph<T>,
    resolution: T,
) -> Result<HausdorffReport<T>> {
    if g1.vertices.is_empty() || g2.vertices.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if g1.dimension != g2.dimension {
        return Err(Error::DimensionMismatch {
            side: "second graph",
            index: 0,
            expected: g1.dimension,
            found: g2.dimension,
        });
    }
    let (forward, fw, n1) = one_sided(g1, g2, resolution);
    let (backward, bw, n2) = one_sided(g2, g1, resolution);
    Ok(HausdorffReport {
        distance: forward.max(backward),
        forward,
        backward,
        forward_witness: fw,
        backward_witness: bw,
        resolution,
        samples: (n1, n2),
    })
}

pub fn hausdorff<T: Scalar>(g1: &WeightedDigraph<T>, g2: &WeightedDigraph<T>, resolution: T) -> Result<T> {
    hausdorff_report(g1, g2, resolution).map(|r| r.distance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord<T> {
    pub n: usize,
    pub wbar: T,
    /// `n^{1−1/q}·wbar`.
    pub rescaled: T,
    /// Rescaled cost of atoms allocated along the oracle tree.
    pub upper: Option<T>,
    /// `Ŵ·(n/(n+2N³))^{1−1/q}`, below `rescaled` whenever the solver is optimal.
    pub lower: Option<T>,
    pub hausdorff: Option<T>,
    pub seconds: f64,
    pub converged: bool,
    pub error: Option<String>,
}

impl<T: Scalar> SweepRecord<T> {
    fn failed(n: usize, err: &Error, seconds: f64) -> Self {
        Self {
            n,
            wbar: T::nan(),
            rescaled: T::nan(),
            upper: None,
            lower: None,
            hausdorff: None,
            seconds,
            converged: false,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Skip the oracle (bounds and Hausdorff columns stay empty).
    pub no_oracle: bool,
    pub s_max: Option<usize>,
    /// Also start the solver from the atoms allocated along the oracle tree.
    pub seed_from_oracle: bool,
}

#[derive(Debug, Clone)]
pub struct SweepRun<T> {
    pub n: usize,
    pub solve: SolveResult<T>,
    pub tree: WeightedDigraph<T>,
}

#[derive(Debug, Clone)]
pub struct Sweep<T> {
    pub oracle: Option<OracleSolution<T>>,
    pub records: Vec<SweepRecord<T>>,
    /// Successful runs, in the order of `records`.
    pub runs: Vec<SweepRun<T>>,
}

/// `(n/(n+2N³))^{1−1/q}`.
pub fn lower_factor<T: Scalar>(config: &SignedConfig<T>, n: usize, q: T) -> T {
    let big_n = config.n_terminals_per_side();
    let n_t = T::from_usize_lossy(n);
    let pad = T::from_usize_lossy(2 * big_n * big_n * big_n);
    (n_t / (n_t + pad)).powf(T::one() - T::one() / q)
}

/// Solver tree reduced to terminals and branch points.
pub fn solver_tree<T: Scalar>(config: &SignedConfig<T>, r: &SolveResult<T>) -> Result<WeightedDigraph<T>> {
    let g = plan_to_graph(config, &r.atoms, &r.plan)?;
    Ok(reduce_graph(&g)?.graph)
}

fn one_n<T: Scalar>(
    config: &SignedConfig<T>,
    n: usize,
    params: &CostParams<T>,
    reference: Option<&OracleSolution<T>>,
    seed_from_oracle: bool,
) -> Result<(SweepRecord<T>, SweepRun<T>)> {
    let q = params.q;
    let start = Instant::now();
    let expo = T::one() - T::one() / q;
    let scale = T::from_usize_lossy(n).powf(expo);
    let alloc = match reference {
        Some(o) if n >= o.graph.edges.len() && n > 0 => Some(allocate(&o.graph, n, q)?),
        _ => None,
    };
    let extra: Vec<_> = match (&alloc, seed_from_oracle) {
        (Some(a), true) => vec![a.atoms()],
        _ => Vec::new(),
    };
    let solve = alternate_minimize_with(config, n, params, &extra)?;
    let tree = solver_tree(config, &solve)?;
    let upper = match &alloc {
        Some(a) => Some(scale * allocation_upper_bound(config, a, q)?),
        None => None,
    };
    let lower = reference.map(|o| o.cost * lower_factor(config, n, q));
    let hausdorff = match reference {
        Some(o) => Some(hausdorff(&tree, &o.graph, config.diameter() / T::lit(1e4))?),
        None => None,
    };
    let record = SweepRecord {
        n,
        wbar: solve.wbar,
        rescaled: solve.rescaled,
        upper,
        lower,
        hausdorff,
        seconds: start.elapsed().as_secs_f64(),
        converged: solve.converged,
        error: None,
    };
    Ok((record, SweepRun { n, solve, tree }))
}

/// Runs the solver at each `n`; a failure at one `n` is recorded and the
/// sweep moves on.
pub fn sweep<T: Scalar>(
    config: &SignedConfig<T>,
    n_list: &[usize],
    params: &CostParams<T>,
    options: &SweepOptions,
) -> Result<Sweep<T>> {
    let reference = if options.no_oracle {
        None
    } else {
        let s_max = options.s_max.unwrap_or_else(|| default_s_max(config));
        Some(oracle(config, params.q, s_max)?)
    };
    let mut records = Vec::with_capacity(n_list.len());
    let mut runs = Vec::new();
    for &n in n_list {
        let start = Instant::now();
        match one_n(config, n, params, reference.as_ref(), options.seed_from_oracle) {
            Ok((rec, run)) => {
                records.push(rec);
                runs.push(run);
            }
            Err(e) => records.push(SweepRecord::failed(n, &e, start.elapsed().as_secs_f64())),
        }
    }
    Ok(Sweep {
        oracle: reference,
        records,
        runs,
    })
}

#[derive(Serialize)]
struct CsvRow<T> {
    n: usize,
    wbar: T,
    rescaled: T,
    upper: Option<T>,
    lower: Option<T>,
    hausdorff: Option<T>,
    seconds: f64,
}

/// CSV with columns `n,wbar,rescaled,upper,lower,hausdorff,seconds`; missing
/// values are empty cells.
pub fn write_csv<T: Scalar, W: Write>(records: &[SweepRecord<T>], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(CsvRow {
            n: r.n,
            wbar: r.wbar,
            rescaled: r.rescaled,
            upper: r.upper,
            lower: r.lower,
            hausdorff: r.hausdorff,
            seconds: r.seconds,
        })?;
    }
    w.flush()?;
    Ok(())
}
