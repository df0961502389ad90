use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{random_rotation, rng, row_major, Example, GalleryError, OdlConfig, ReferenceValues};
use crate::problem::{Model, PackedPoint, ProblemDefinition, VariableSpec};
use crate::tensor::Tensor;

/// Orthogonal dictionary learning: `min (1/m)‖qᵀY‖₁ s.t. qᵀq = 1` with
/// `Y = AX`, `A` orthogonal and `X` sparse.
pub struct OdlInstance {
    pub config: OdlConfig,
    problem: ProblemDefinition,
    /// The dictionary; its columns (up to sign) are the global minimizers.
    pub dictionary: DMatrix<f64>,
    pub data: DMatrix<f64>,
}

/// Builds the ODL instance with dictionary and codes drawn from `config.seed`.
pub fn build_odl(config: &OdlConfig) -> Result<OdlInstance, GalleryError> {
    config.validate()?;
    let (n, m) = (config.n, config.m);
    let mut rng = rng(config.seed);
    let a = random_rotation(&mut rng, n);
    let mut x = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let g: f64 = StandardNormal.sample(&mut rng);
            if rng.random_bool(config.theta) {
                x[(i, j)] = g;
            }
        }
    }
    let y = &a * &x;
    let y_tensor = Arc::new(Tensor::from_vec(vec![n, m], row_major(&y)));
    let vars = VariableSpec::new().with("q", &[n])?;
    let problem = ProblemDefinition::new(vars, move |v| {
        let q = &v["q"];
        let y = v.tape().constant((*y_tensor).clone());
        let f = q.matmul(&y)?.abs().sum().scale(1.0 / m as f64);
        let c = q.square().sum().add_scalar(-1.0);
        Ok(Model::new(f).eq("c1", c))
    })?;
    Ok(OdlInstance {
        config: config.clone(),
        problem,
        dictionary: a,
        data: y,
    })
}

impl OdlInstance {
    /// `max_j |qᵀaⱼ|` over the dictionary columns.
    pub fn recovery(&self, q: &[f64]) -> f64 {
        (0..self.config.n)
            .map(|j| {
                let col = self.dictionary.column(j);
                q.iter()
                    .zip(col.iter())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

impl Example for OdlInstance {
    fn problem(&self) -> &ProblemDefinition {
        &self.problem
    }

    fn feasible_point(&self) -> Option<PackedPoint> {
        Some(PackedPoint(
            self.dictionary.column(0).iter().copied().collect(),
        ))
    }

    fn reference(&self, x: &PackedPoint) -> ReferenceValues {
        let (n, m) = (self.config.n, self.config.m);
        let q = x.as_slice();
        let mut f = 0.0;
        for j in 0..m {
            let s: f64 = (0..n).map(|i| q[i] * self.data[(i, j)]).sum();
            f += s.abs();
        }
        let norm2: f64 = q.iter().map(|v| v * v).sum();
        ReferenceValues {
            f: f / m as f64,
            ci: vec![],
            ce: vec![norm2 - 1.0],
        }
    }
}
