//! Example problems at desk scale, each with independent reference data.
//!
//! | name         | problem                                                   |
//! |--------------|-----------------------------------------------------------|
//! | `odl`        | orthogonal dictionary learning on the sphere              |
//! | `attack`     | adversarial perturbation of a tiny relu classifier        |
//! | `topology`   | compliance minimization of a spring chain                 |
//! | `procrustes` | orthogonality-constrained least squares                   |
//! | `pde`        | sine-basis collocation of a two-point boundary problem    |
//!
//! Every instance implements [`Example`]: a [`ProblemDefinition`], a point
//! known to be feasible, and a plain-loop evaluation of the same objective
//! and constraints that does not go through the tape.

mod attack;
mod config;
mod odl;
mod pde;
mod procrustes;
mod topology;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::ad::AdError;
use crate::problem::{PackedPoint, ProblemDefinition, ProblemError};

pub use attack::{build_attack, AttackInstance, AttackMode, AttackNetwork, Metric};
pub use config::{
    AttackConfig, ExampleConfig, OdlConfig, PdeConfig, ProcrustesConfig, TopologyConfig,
};
pub use odl::{build_odl, OdlInstance};
pub use pde::{build_pde, PdeInstance, PdeMode, Source};
pub use procrustes::{build_procrustes, ProcrustesInstance};
pub use topology::{build_topology, Load, TopologyInstance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GalleryError {
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("unknown key `{key}` for example `{example}`")]
    UnknownKey { example: String, key: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl GalleryError {
    /// The configuration key the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            GalleryError::Invalid { key, .. } | GalleryError::UnknownKey { key, .. } => Some(key),
            _ => None,
        }
    }
}

pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> GalleryError {
    GalleryError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl From<AdError> for GalleryError {
    fn from(e: AdError) -> Self {
        GalleryError::Problem(e.into())
    }
}

/// Objective and constraint values computed without the tape.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValues {
    pub f: f64,
    pub ci: Vec<f64>,
    pub ce: Vec<f64>,
}

/// A constructed example problem.
pub trait Example: Send + Sync {
    fn problem(&self) -> &ProblemDefinition;

    /// A point with zero constraint violation, when one is known in
    /// closed form.
    fn feasible_point(&self) -> Option<PackedPoint>;

    /// Objective and constraints by direct loops over the example's data.
    fn reference(&self, x: &PackedPoint) -> ReferenceValues;
}

/// Registered example names with one-line descriptions, in listing order.
pub const REGISTRY: &[(&str, &str)] = &[
    (
        "odl",
        "orthogonal dictionary learning: min (1/m)|q^T Y|_1 s.t. q^T q = 1",
    ),
    (
        "attack",
        "adversarial attack on a tiny relu classifier (max-loss or min-distortion)",
    ),
    (
        "topology",
        "spring-chain compliance minimization with equilibrium, volume and box constraints",
    ),
    (
        "procrustes",
        "orthogonality-constrained least squares min |WA - B|_F^2 s.t. W^T W = I",
    ),
    (
        "pde",
        "sine-basis collocation of u'' = g on [0, 1] with zero boundary values",
    ),
];

/// Builds the example described by `config`.
pub fn build(config: &ExampleConfig) -> Result<Box<dyn Example>, GalleryError> {
    Ok(match config {
        ExampleConfig::Odl(c) => Box::new(build_odl(c)?),
        ExampleConfig::Attack(c) => Box::new(build_attack(c)?),
        ExampleConfig::Topology(c) => Box::new(build_topology(c)?),
        ExampleConfig::Procrustes(c) => Box::new(build_procrustes(c)?),
        ExampleConfig::Pde(c) => Box::new(build_pde(c)?),
    })
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // filled row by row so the stream order does not depend on storage order
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Haar-distributed random orthogonal matrix with determinant `+1`.
pub(crate) fn random_rotation(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    q
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}
