//! Problem instances: signed atomic measures `λ = λ⁺ − λ⁻` and cost parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scalar::Scalar;

/// Absolute tolerance on `Σ m_i − Σ m*_j`.
pub const BALANCE_TOL: f64 = 1e-12;

/// A weighted Dirac mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom<T> {
    pub position: Point<T>,
    pub mass: T,
}

impl<T: Scalar> Atom<T> {
    pub fn new(position: impl Into<Point<T>>, mass: T) -> Self {
        Self {
            position: position.into(),
            mass,
        }
    }
}

/// Which side of the instance a terminal belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Sink,
}

impl Side {
    fn label(self) -> &'static str {
        match self {
            Side::Source => "sources",
            Side::Sink => "sinks",
        }
    }
}

/// Source atoms (`λ⁺`) and sink atoms (`λ⁻`) of equal total mass.
///
/// The two sides may hold different numbers of atoms; a side with fewer atoms
/// behaves as if padded with zero-mass atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedConfig<T> {
    pub dimension: usize,
    pub sources: Vec<Atom<T>>,
    pub sinks: Vec<Atom<T>>,
}

impl<T: Scalar> SignedConfig<T> {
    pub fn new(dimension: usize, sources: Vec<Atom<T>>, sinks: Vec<Atom<T>>) -> Result<Self> {
        validate(Self {
            dimension,
            sources,
            sinks,
        })
    }

    /// Number of atoms on the larger side.
    pub fn n_terminals_per_side(&self) -> usize {
        self.sources.len().max(self.sinks.len())
    }

    pub fn terminal_count(&self) -> usize {
        self.sources.len() + self.sinks.len()
    }

    pub fn total_mass(&self) -> T {
        total_mass(self)
    }

    /// Zero-mass atoms, which are legal but never required network vertices.
    pub fn zero_mass_atoms(&self) -> Vec<(Side, usize)> {
        let src = self
            .sources
            .iter()
            .enumerate()
            .filter(|(_, a)| a.mass == T::zero())
            .map(|(i, _)| (Side::Source, i));
        let snk = self
            .sinks
            .iter()
            .enumerate()
            .filter(|(_, a)| a.mass == T::zero())
            .map(|(i, _)| (Side::Sink, i));
        src.chain(snk).collect()
    }

    pub fn terminal_positions(&self) -> impl Iterator<Item = &[T]> {
        self.sources
            .iter()
            .chain(&self.sinks)
            .map(|a| a.position.as_slice())
    }

    pub fn smallest_positive_mass(&self) -> T {
        self.sources
            .iter()
            .chain(&self.sinks)
            .map(|a| a.mass)
            .filter(|&m| m > T::zero())
            .fold(T::infinity(), T::min)
    }

    pub fn diameter(&self) -> T {
        let pts: Vec<&[T]> = self.terminal_positions().collect();
        crate::geometry::diameter(&pts)
    }
}

/// Checks balance, dimensions and finiteness; returns the config unchanged.
pub fn validate<T: Scalar>(config: SignedConfig<T>) -> Result<SignedConfig<T>> {
    if config.dimension == 0 {
        return Err(Error::ZeroDimension);
    }
    if config.sources.is_empty() {
        return Err(Error::NoSources);
    }
    if config.sinks.is_empty() {
        return Err(Error::NoSinks);
    }
    for (side, atoms) in [(Side::Source, &config.sources), (Side::Sink, &config.sinks)] {
        for (index, atom) in atoms.iter().enumerate() {
            if atom.position.len() != config.dimension {
                return Err(Error::DimensionMismatch {
                    side: side.label(),
                    index,
                    expected: config.dimension,
                    found: atom.position.len(),
                });
            }
            if !atom.mass.is_finite() || atom.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite {
                    side: side.label(),
                    index,
                });
            }
            if atom.mass < T::zero() {
                return Err(Error::NegativeMass {
                    side: side.label(),
                    index,
                    mass: atom.mass.to_f64_lossy(),
                });
            }
        }
    }
    let plus: T = config.sources.iter().map(|a| a.mass).sum();
    let minus: T = config.sinks.iter().map(|a| a.mass).sum();
    if (plus - minus).abs() > T::lit(BALANCE_TOL) {
        return Err(Error::Unbalanced {
            sources: plus.to_f64_lossy(),
            sinks: minus.to_f64_lossy(),
        });
    }
    if plus <= T::zero() {
        return Err(Error::ZeroTotalMass);
    }
    Ok(config)
}

pub fn total_mass<T: Scalar>(config: &SignedConfig<T>) -> T {
    config.sources.iter().map(|a| a.mass).sum()
}

/// Exponent and solver budgets used downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams<T> {
    pub q: T,
    /// Relative cost decrease that ends the outer alternation.
    pub outer_tol: T,
    pub outer_iterations: usize,
    /// Scaled gradient tolerance for the position solver.
    pub position_tol: T,
    pub position_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl<T: Scalar> CostParams<T> {
    pub fn new(q: T) -> Result<Self> {
        if !(q > T::one()) {
            return Err(Error::ExponentTooSmall(q.to_f64_lossy()));
        }
        Ok(Self {
            q,
            outer_tol: T::lit(1e-8),
            outer_iterations: 200,
            position_tol: T::lit(1e-10),
            position_iterations: 500,
            restarts: 8,
            seed: 0,
        })
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// On-disk problem document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub dimension: usize,
    pub q: f64,
    pub sources: Vec<Atom<f64>>,
    pub sinks: Vec<Atom<f64>>,
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem documents always serialize")
    }

    pub fn from_config(config: &SignedConfig<f64>, q: f64) -> Self {
        Self {
            dimension: config.dimension,
            q,
            sources: config.sources.clone(),
            sinks: config.sinks.clone(),
        }
    }

    pub fn config(&self) -> Result<SignedConfig<f64>> {
        SignedConfig::new(self.dimension, self.sources.clone(), self.sinks.clone())
    }
}
