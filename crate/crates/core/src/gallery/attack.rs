use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    gaussian_matrix, invalid, rng, row_major, AttackConfig, Example, GalleryError, ReferenceValues,
};
use crate::ad::{Norm, Tape, Var};
use crate::problem::{Model, PackedPoint, ProblemDefinition, VariableSpec};
use crate::tensor::Tensor;

pub const INPUT_DIM: usize = 8;
pub const CLASSES: usize = 3;
pub const EMBED_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    /// Maximize the margin loss inside the perturbation budget.
    MaxLoss,
    /// Smallest perturbation that changes the predicted class.
    MinDistortion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// Euclidean distance between inputs.
    L2,
    /// Euclidean distance between relu embeddings of the inputs.
    Embed,
}

impl FromStr for AttackMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max-loss" => Ok(AttackMode::MaxLoss),
            "min-distortion" => Ok(AttackMode::MinDistortion),
            other => Err(format!(
                "expected max-loss or min-distortion, got `{other}`"
            )),
        }
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackMode::MaxLoss => "max-loss",
            AttackMode::MinDistortion => "min-distortion",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "l2" => Ok(Metric::L2),
            "embed" => Ok(Metric::Embed),
            other => Err(format!("expected l2 or embed, got `{other}`")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::L2 => "l2",
            Metric::Embed => "embed",
        })
    }
}

/// Fixed random two-layer relu classifier `ℝ⁸ → ℝ³` and one-layer relu
/// embedder `ℝ⁸ → ℝ⁴`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackNetwork {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub we: DMatrix<f64>,
    pub be: DVector<f64>,
}

fn relu_layer(w: &DMatrix<f64>, b: &DVector<f64>, x: &[f64], relu: bool) -> Vec<f64> {
    (0..w.nrows())
        .map(|i| {
            let mut s = b[i];
            for j in 0..w.ncols() {
                s += w[(i, j)] * x[j];
            }
            if relu {
                s.max(0.0)
            } else {
                s
            }
        })
        .collect()
}

impl AttackNetwork {
    fn random(rng: &mut rand_chacha::ChaCha8Rng, hidden: usize) -> Self {
        let s1 = 1.0 / (INPUT_DIM as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        let w1 = gaussian_matrix(rng, hidden, INPUT_DIM) * (2.0 * s1);
        let b1 = gaussian_matrix(rng, hidden, 1).column(0) * 0.5;
        let w2 = gaussian_matrix(rng, CLASSES, hidden) * s2;
        let b2 = gaussian_matrix(rng, CLASSES, 1).column(0) * 0.1;
        let we = gaussian_matrix(rng, EMBED_DIM, INPUT_DIM) * s1;
        let be = gaussian_matrix(rng, EMBED_DIM, 1).column(0) * 0.1;
        Self {
            w1,
            b1: b1.into_owned(),
            w2,
            b2: b2.into_owned(),
            we,
            be: be.into_owned(),
        }
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let h = relu_layer(&self.w1, &self.b1, x, true);
        relu_layer(&self.w2, &self.b2, &h, false)
    }

    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        relu_layer(&self.we, &self.be, x, true)
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let z = self.logits(x);
        (0..CLASSES).fold(0, |best, i| if z[i] > z[best] { i } else { best })
    }

    /// `max_{i≠y} zᵢ − z_y`; positive iff `x` is classified away from `y`.
    pub fn margin(&self, x: &[f64], label: usize) -> f64 {
        let z = self.logits(x);
        let other = (0..CLASSES)
            .filter(|&i| i != label)
            .map(|i| z[i])
            .fold(f64::NEG_INFINITY, f64::max);
        other - z[label]
    }

    pub fn distance(&self, metric: Metric, a: &[f64], b: &[f64]) -> f64 {
        let (ea, eb) = match metric {
            Metric::L2 => (a.to_vec(), b.to_vec()),
            Metric::Embed => (self.embed(a), self.embed(b)),
        };
        ea.iter()
            .zip(&eb)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    }
}

fn constant(t: &Tape, m: &DMatrix<f64>) -> Var {
    t.constant(Tensor::from_vec(vec![m.nrows(), m.ncols()], row_major(m)))
}

fn constant_vec(t: &Tape, v: &DVector<f64>) -> Var {
    t.constant(Tensor::vector(v.iter().copied().collect()))
}

/// Adversarial perturbation problem on a fixed tiny network.
pub struct AttackInstance {
    pub config: AttackConfig,
    pub network: Arc<AttackNetwork>,
    /// The clean input, correctly classified as `label`.
    pub input: Vec<f64>,
    pub label: usize,
    problem: ProblemDefinition,
    feasible: Vec<f64>,
}

/// Builds the attack instance; network, input and label come from
/// `config.seed`.
pub fn build_attack(config: &AttackConfig) -> Result<AttackInstance, GalleryError> {
    config.validate()?;
    let mut rng = rng(config.seed);
    let network = Arc::new(AttackNetwork::random(&mut rng, config.hidden));
    let input: Vec<f64> = (0..INPUT_DIM).map(|_| rng.random_range(0.0..1.0)).collect();
    let label = network.predict(&input);

    let feasible = match config.mode {
        AttackMode::MaxLoss => input.clone(),
        AttackMode::MinDistortion => (0..100_000)
            .map(|_| {
                (0..INPUT_DIM)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect::<Vec<f64>>()
            })
            .find(|p| network.margin(p, label) > 0.0)
            .ok_or_else(|| invalid("seed", "the classifier predicts one class on the whole box"))?,
    };

    let (mode, metric, eps) = (config.mode, config.metric, config.eps);
    let net = Arc::clone(&network);
    let x_clean = input.clone();
    let vars = VariableSpec::new().with("x_adv", &[INPUT_DIM])?;
    let problem = ProblemDefinition::new(vars, move |v| {
        let t = v.tape();
        let xa = &v["x_adv"];
        let hidden = constant(t, &net.w1)
            .matmul(xa)?
            .add(&constant_vec(t, &net.b1))?
            .relu();
        let z = constant(t, &net.w2)
            .matmul(&hidden)?
            .add(&constant_vec(t, &net.b2))?;
        let others: Vec<Var> = (0..CLASSES)
            .filter(|&i| i != label)
            .map(|i| z.index(&[i]))
            .collect::<Result<_, _>>()?;
        let margin = t.concat(&others)?.max().sub(&z.index(&[label])?)?;
        let clean = t.constant(Tensor::vector(x_clean.clone()));
        let dist = match metric {
            Metric::L2 => xa.sub(&clean)?.norm(Norm::L2),
            Metric::Embed => {
                let we = constant(t, &net.we);
                let be = constant_vec(t, &net.be);
                let ea = we.matmul(xa)?.add(&be)?.relu();
                let ec = we.matmul(&clean)?.add(&be)?.relu();
                ea.sub(&ec)?.norm(Norm::L2)
            }
        };
        let upper = xa.add_scalar(-1.0);
        let lower = xa.neg();
        let model = match mode {
            AttackMode::MaxLoss => Model::new(margin.neg()).ineq("distance", dist.add_scalar(-eps)),
            AttackMode::MinDistortion => Model::new(dist).ineq("misclassified", margin.neg()),
        };
        Ok(model.ineq("upper", upper).ineq("lower", lower))
    })?;
    Ok(AttackInstance {
        config: config.clone(),
        network,
        input,
        label,
        problem,
        feasible,
    })
}

impl AttackInstance {
    pub fn distance(&self, x: &[f64]) -> f64 {
        self.network.distance(self.config.metric, &self.input, x)
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.network.margin(x, self.label)
    }

    /// Best objective value found by `samples` random points around the
    /// clean input, or `None` when no sample is feasible.
    ///
    /// Samples are `clip(x + r·s)` with `s` uniform on the unit sphere and
    /// `r` uniform in `[0, ε]` for max-loss or `[0, √8]` for min-distortion.
    /// Max-loss returns the largest margin among samples within the budget;
    /// min-distortion returns the smallest distance among misclassified
    /// samples.
    pub fn random_search(&self, samples: usize, seed: u64) -> Option<f64> {
        let mut rng = rng(seed);
        let reach = match (self.config.mode, self.config.metric) {
            (AttackMode::MaxLoss, Metric::L2) => self.config.eps,
            _ => (INPUT_DIM as f64).sqrt(),
        };
        let mut best: Option<f64> = None;
        for _ in 0..samples {
            let dir: Vec<f64> = (0..INPUT_DIM)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let r = rng.random_range(0.0..reach);
            let x: Vec<f64> = self
                .input
                .iter()
                .zip(&dir)
                .map(|(a, d)| (a + r * d / norm).clamp(0.0, 1.0))
                .collect();
            let value = match self.config.mode {
                AttackMode::MaxLoss if self.distance(&x) <= self.config.eps => self.margin(&x),
                AttackMode::MinDistortion if self.margin(&x) >= 0.0 => -self.distance(&x),
                _ => continue,
            };
            best = Some(best.map_or(value, |b| b.max(value)));
        }
        best.map(|v| match self.config.mode {
            AttackMode::MaxLoss => v,
            AttackMode::MinDistortion => -v,
        })
    }
}

impl Example for AttackInstance {
    fn problem(&self) -> &ProblemDefinition {
        &self.problem
    }

    fn feasible_point(&self) -> Option<PackedPoint> {
        Some(PackedPoint(self.feasible.clone()))
    }

    fn reference(&self, x: &PackedPoint) -> ReferenceValues {
        let x = x.as_slice();
        let margin = self.margin(x);
        let dist = self.distance(x);
        let (f, mut ci) = match self.config.mode {
            AttackMode::MaxLoss => (-margin, vec![dist - self.config.eps]),
            AttackMode::MinDistortion => (dist, vec![-margin]),
        };
        ci.extend(x.iter().map(|v| v - 1.0));
        ci.extend(x.iter().map(|v| -v));
        ReferenceValues { f, ci, ce: vec![] }
    }
}
