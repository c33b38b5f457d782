// `!(q > 1.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use branched_core::experiment::{hausdorff_report, sweep, write_csv, SweepOptions};
use branched_core::measures::{validate, CostParams, ProblemFile};
use branched_core::network::{reduce_graph, plan_to_graph, verify_structure, GraphDocument};
use branched_core::oracle::{default_s_max, oracle};
use branched_core::positions::{alternate_minimize, SolveReport};
use branched_core::render::render_svg;
use branched_core::{Config, Graph};
use clap::{Parser, Subcommand};
use serde::Serialize;

const EXIT_INVALID: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

/// Approximate optimal branched transport networks with atomic relaxations.
#[derive(Parser)]
#[command(name = "branched", version)]
struct Cli {
    /// Seed for every random start.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Overrides the exponent stored in the problem file.
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Random starts on top of the deterministic one.
    #[arg(long, global = true, default_value_t = 8)]
    restarts: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem file and print a summary.
    Validate { problem: PathBuf },
    /// Solve for one number of free atoms.
    Solve {
        problem: PathBuf,
        #[arg(short)]
        n: usize,
    },
    /// Exhaustive small-instance reference solution.
    Oracle {
        problem: PathBuf,
        #[arg(long)]
        s_max: Option<usize>,
    },
    /// Solve for several n and compare with the oracle.
    Sweep {
        problem: PathBuf,
        /// Comma-separated list of n.
        #[arg(short, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long)]
        no_oracle: bool,
        #[arg(long)]
        s_max: Option<usize>,
        /// Add atoms allocated along the oracle tree as an extra start.
        #[arg(long)]
        seed_from_oracle: bool,
    },
    /// Draw a graph document as SVG.
    Render {
        graph: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Hausdorff distance between two graph documents.
    Compare {
        first: PathBuf,
        second: PathBuf,
        /// Sampling resolution; defaults to diameter/10^4.
        #[arg(long)]
        resolution: Option<f64>,
    },
}

/// Problems with the input rather than the computation.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Invalid(String);

fn load_problem(path: &Path, q: Option<f64>) -> Result<(Config, f64)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = ProblemFile::parse(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    let config = file
        .config()
        .and_then(validate)
        .map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    let q = q.unwrap_or(file.q);
    if !(q > 1.0) {
        return Err(Invalid(format!("exponent q = {q} must exceed 1")).into());
    }
    Ok((config, q))
}

fn load_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: GraphDocument<f64> =
        serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    Graph::try_from(&doc).map_err(|e| Invalid(format!("{}: {e}", path.display())).into())
}

/// Writes through a temporary file so readers never see a partial document.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    write_atomic(path, &serde_json::to_string_pretty(value)?)
}

fn write_graph(dir: &Path, stem: &str, g: &Graph, q: f64) -> Result<()> {
    write_json(&dir.join(format!("{stem}.graph.json")), &GraphDocument::from(g))?;
    if g.dimension == 2 {
        write_atomic(&dir.join(format!("{stem}.svg")), &render_svg(g, q)?)?;
    }
    Ok(())
}

fn params(cli: &Cli, q: f64) -> Result<CostParams<f64>> {
    Ok(CostParams::new(q)?.with_restarts(cli.restarts).with_seed(cli.seed))
}

#[derive(Serialize)]
struct SolveOutput {
    #[serde(flatten)]
    report: SolveReport<f64>,
    seed: u64,
    restarts: usize,
    structure: Option<String>,
    structure_passed: Option<bool>,
}

fn run(cli: &Cli) -> Result<u8> {
    fs::create_dir_all(&cli.out_dir).with_context(|| format!("creating {}", cli.out_dir.display()))?;
    let dir = cli.out_dir.as_path();
    match &cli.command {
        Command::Validate { problem } => {
            let (c, q) = load_problem(problem, cli.q)?;
            println!(
                "valid: dimension {}, {} sources, {} sinks, total mass {}, q = {q}, diameter {}",
                c.dimension,
                c.sources.len(),
                c.sinks.len(),
                c.total_mass(),
                c.diameter()
            );
            for (side, i) in c.zero_mass_atoms() {
                println!("note: {side:?} {i} has zero mass and is ignored");
            }
            Ok(0)
        }
        Command::Solve { problem, n } => {
            let (c, q) = load_problem(problem, cli.q)?;
            let res = alternate_minimize(&c, *n, &params(cli, q)?)?;
            let tree = plan_to_graph(&c, &res.atoms, &res.plan).and_then(|g| reduce_graph(&g));
            let (structure, passed) = match &tree {
                Ok(t) => {
                    let r = verify_structure(t, &c);
                    (Some(r.to_string()), Some(r.passed()))
                }
                Err(e) => (Some(e.to_string()), None),
            };
            write_json(
                &dir.join(format!("solve_n{n}.json")),
                &SolveOutput {
                    report: SolveReport::new(&res, q),
                    seed: cli.seed,
                    restarts: cli.restarts,
                    structure,
                    structure_passed: passed,
                },
            )?;
            if let Ok(t) = &tree {
                write_graph(dir, &format!("solve_n{n}"), &t.graph, q)?;
            }
            println!(
                "n = {n}: wbar = {}, rescaled = {}, converged = {}",
                res.wbar, res.rescaled, res.converged
            );
            Ok(if res.converged { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Oracle { problem, s_max } => {
            let (c, q) = load_problem(problem, cli.q)?;
            let s_max = s_max.unwrap_or_else(|| default_s_max(&c));
            let sol = oracle(&c, q, s_max)?;
            write_json(&dir.join("oracle.json"), &sol)?;
            write_graph(dir, "oracle", &sol.graph, q)?;
            println!(
                "oracle: cost {} over {} topologies (s_max = {s_max}), {} Steiner points",
                sol.cost,
                sol.table.len(),
                sol.topology.steiner
            );
            Ok(0)
        }
        Command::Sweep {
            problem,
            n,
            no_oracle,
            s_max,
            seed_from_oracle,
        } => {
            let (c, q) = load_problem(problem, cli.q)?;
            let options = SweepOptions {
                no_oracle: *no_oracle,
                s_max: *s_max,
                seed_from_oracle: *seed_from_oracle,
            };
            let result = sweep(&c, n, &params(cli, q)?, &options)?;
            let mut csv = Vec::new();
            write_csv(&result.records, &mut csv)?;
            write_atomic(&dir.join("sweep.csv"), &String::from_utf8(csv)?)?;
            write_json(&dir.join("sweep.json"), &result.records)?;
            if let Some(o) = &result.oracle {
                write_json(&dir.join("oracle.json"), o)?;
                write_graph(dir, "oracle", &o.graph, q)?;
            }
            for run in &result.runs {
                write_json(&dir.join(format!("solve_n{}.json", run.n)), &SolveReport::new(&run.solve, q))?;
                write_graph(dir, &format!("solve_n{}", run.n), &run.tree, q)?;
            }
            let mut all_converged = true;
            for r in &result.records {
                match &r.error {
                    Some(e) => {
                        all_converged = false;
                        eprintln!("n = {}: failed: {e}", r.n);
                    }
                    None => {
                        all_converged &= r.converged;
                        println!("n = {}: rescaled = {}, hausdorff = {:?}", r.n, r.rescaled, r.hausdorff);
                    }
                }
            }
            Ok(if all_converged { 0 } else { EXIT_NOT_CONVERGED })
        }
        Command::Render { graph, output } => {
            let g = load_graph(graph)?;
            let q = cli.q.unwrap_or(2.0);
            let svg = render_svg(&g, q).map_err(|e| Invalid(e.to_string()))?;
            let out = output.clone().unwrap_or_else(|| {
                let stem = graph.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                dir.join(format!("{}.svg", stem.trim_end_matches(".graph")))
            });
            write_atomic(&out, &svg)?;
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Compare {
            first,
            second,
            resolution,
        } => {
            let (a, b) = (load_graph(first)?, load_graph(second)?);
            if a.dimension != b.dimension {
                return Err(Invalid(format!("dimensions differ: {} vs {}", a.dimension, b.dimension)).into());
            }
            let res = resolution.unwrap_or_else(|| {
                let pts: Vec<&[f64]> = a.vertices.iter().chain(&b.vertices).map(|v| v.position.as_slice()).collect();
                branched_core::geometry::diameter(&pts).max(1e-300) / 1e4
            });
            let report = hausdorff_report(&a, &b, res).map_err(|e| Invalid(e.to_string()))?;
            write_json(&dir.join("compare.json"), &report)?;
            println!("hausdorff = {}", report.distance);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Invalid>().is_some() {
                ExitCode::from(EXIT_INVALID)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
