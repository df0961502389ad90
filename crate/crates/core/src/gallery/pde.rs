use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use super::{rng, Example, GalleryError, PdeConfig, ReferenceValues};
use crate::problem::{Model, PackedPoint, ProblemDefinition, VariableSpec};
use crate::tensor::Tensor;

/// Right-hand side `g` of `u'' = g` on `[0, 1]`, `u(0) = u(1) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    /// `g ≡ −2`, solved by `u = x(1 − x)`.
    MinusTwo,
    /// `g ≡ 0`, solved by `u = 0`.
    Zero,
    /// `g = −π² sin(πx)`, solved by `u = sin(πx)`.
    Sine,
}

impl Source {
    pub fn g(self, x: f64) -> f64 {
        match self {
            Source::MinusTwo => -2.0,
            Source::Zero => 0.0,
            Source::Sine => -PI * PI * (PI * x).sin(),
        }
    }

    /// The exact solution.
    pub fn solution(self, x: f64) -> f64 {
        match self {
            Source::MinusTwo => x * (1.0 - x),
            Source::Zero => 0.0,
            Source::Sine => (PI * x).sin(),
        }
    }
}

impl FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "minus-two" => Ok(Source::MinusTwo),
            "zero" => Ok(Source::Zero),
            "sine" => Ok(Source::Sine),
            other => Err(format!("expected minus-two, zero or sine, got `{other}`")),
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::MinusTwo => "minus-two",
            Source::Zero => "zero",
            Source::Sine => "sine",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeMode {
    /// Constant objective: only the collocation equations matter.
    Pde,
    /// Least-squares fit to observations of the exact solution, with the
    /// collocation equations as constraints.
    Supervised,
}

impl FromStr for PdeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pde" => Ok(PdeMode::Pde),
            "supervised" => Ok(PdeMode::Supervised),
            other => Err(format!("expected pde or supervised, got `{other}`")),
        }
    }
}

impl fmt::Display for PdeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PdeMode::Pde => "pde",
            PdeMode::Supervised => "supervised",
        })
    }
}

/// `u(x; θ) = Σₖ θₖ sin(kπx)` with `u''(xⱼ; θ) = g(xⱼ)` imposed at
/// `M` interior points `xⱼ = j/(M + 1)`.
pub struct PdeInstance {
    pub config: PdeConfig,
    pub collocation: Vec<f64>,
    /// Observation sites and values for the supervised loss.
    pub data: Vec<(f64, f64)>,
    problem: ProblemDefinition,
}

fn basis(k: usize, x: f64) -> f64 {
    (k as f64 * PI * x).sin()
}

fn basis_dd(k: usize, x: f64) -> f64 {
    let w = k as f64 * PI;
    -w * w * (w * x).sin()
}

pub fn build_pde(config: &PdeConfig) -> Result<PdeInstance, GalleryError> {
    config.validate()?;
    let (kk, m) = (config.k, config.m);
    let collocation: Vec<f64> = (1..=m).map(|j| j as f64 / (m + 1) as f64).collect();
    let data: Vec<(f64, f64)> = match config.mode {
        PdeMode::Pde => vec![],
        PdeMode::Supervised => {
            let mut rng = rng(config.seed);
            (0..config.n_data)
                .map(|_| {
                    let x: f64 = rng.random_range(0.0..1.0);
                    (x, config.source.solution(x))
                })
                .collect()
        }
    };
    let mut d2 = Vec::with_capacity(m * kk);
    for &x in &collocation {
        d2.extend((1..=kk).map(|k| basis_dd(k, x)));
    }
    let d2 = Arc::new(Tensor::from_vec(vec![m, kk], d2));
    let rhs = Arc::new(Tensor::vector(
        collocation.iter().map(|&x| config.source.g(x)).collect(),
    ));
    let fit = (!data.is_empty()).then(|| {
        let mut s = Vec::with_capacity(data.len() * kk);
        for &(x, _) in &data {
            s.extend((1..=kk).map(|k| basis(k, x)));
        }
        let obs: Vec<f64> = data.iter().map(|&(_, y)| y).collect();
        Arc::new((
            Tensor::from_vec(vec![data.len(), kk], s),
            Tensor::vector(obs),
        ))
    });
    let vars = VariableSpec::new().with("theta", &[kk])?;
    let problem = ProblemDefinition::new(vars, move |v| {
        let t = v.tape();
        let theta = &v["theta"];
        let residual = t
            .constant((*d2).clone())
            .matmul(theta)?
            .sub(&t.constant((*rhs).clone()))?;
        let objective = match &fit {
            None => t.scalar(0.0),
            Some(fit) => {
                let (s, obs) = &**fit;
                t.constant(s.clone())
                    .matmul(theta)?
                    .sub(&t.constant(obs.clone()))?
                    .square()
                    .mean()
            }
        };
        Ok(Model::new(objective).eq("collocation", residual))
    })?;
    Ok(PdeInstance {
        config: config.clone(),
        collocation,
        data,
        problem,
    })
}

impl PdeInstance {
    /// `u(x; θ)`.
    pub fn eval_u(&self, theta: &[f64], x: f64) -> f64 {
        theta
            .iter()
            .enumerate()
            .map(|(i, t)| t * basis(i + 1, x))
            .sum()
    }

    /// Largest `|u(xⱼ; θ) − u*(xⱼ)|` over the collocation points.
    pub fn collocation_error(&self, theta: &[f64]) -> f64 {
        self.collocation
            .iter()
            .map(|&x| (self.eval_u(theta, x) - self.config.source.solution(x)).abs())
            .fold(0.0, f64::max)
    }
}

impl Example for PdeInstance {
    fn problem(&self) -> &ProblemDefinition {
        &self.problem
    }

    /// Known only when the exact solution lies in the basis; with
    /// `g ≡ −2` the collocation equations have no exact solution for `M > K`.
    fn feasible_point(&self) -> Option<PackedPoint> {
        let mut theta = vec![0.0; self.config.k];
        match self.config.source {
            Source::Zero => {}
            Source::Sine => theta[0] = 1.0,
            Source::MinusTwo => return None,
        }
        Some(PackedPoint(theta))
    }

    fn reference(&self, p: &PackedPoint) -> ReferenceValues {
        let theta = p.as_slice();
        let ce = self
            .collocation
            .iter()
            .map(|&x| {
                let upp: f64 = theta
                    .iter()
                    .enumerate()
                    .map(|(i, t)| t * basis_dd(i + 1, x))
                    .sum();
                upp - self.config.source.g(x)
            })
            .collect();
        let f = if self.data.is_empty() {
            0.0
        } else {
            let sse: f64 = self
                .data
                .iter()
                .map(|&(x, y)| (self.eval_u(theta, x) - y).powi(2))
                .sum();
            sse / self.data.len() as f64
        };
        ReferenceValues { f, ci: vec![], ce }
    }
}
