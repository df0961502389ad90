use std::sync::Arc;

use nalgebra::DMatrix;

use super::{
    gaussian_matrix, random_rotation, rng, row_major, Example, GalleryError, ProcrustesConfig,
    ReferenceValues,
};
use crate::problem::{Model, PackedPoint, ProblemDefinition, VariableSpec};
use crate::tensor::Tensor;

/// `min ‖WA − B‖²_F s.t. WᵀW = I` with `B = QA` for a rotation `Q`.
pub struct ProcrustesInstance {
    pub config: ProcrustesConfig,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub rotation: DMatrix<f64>,
    problem: ProblemDefinition,
}

pub fn build_procrustes(config: &ProcrustesConfig) -> Result<ProcrustesInstance, GalleryError> {
    config.validate()?;
    let mut rng = rng(config.seed);
    let a = gaussian_matrix(&mut rng, config.n, config.n);
    let q = random_rotation(&mut rng, config.n);
    let b = &q * &a;
    with_data(config, a, b, q)
}

fn with_data(
    config: &ProcrustesConfig,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    rotation: DMatrix<f64>,
) -> Result<ProcrustesInstance, GalleryError> {
    let n = config.n;
    let at = Arc::new(Tensor::from_vec(vec![n, n], row_major(&a)));
    let bt = Arc::new(Tensor::from_vec(vec![n, n], row_major(&b)));
    let vars = VariableSpec::new().with("W", &[n, n])?;
    let problem = ProblemDefinition::new(vars, move |v| {
        let t = v.tape();
        let w = &v["W"];
        let residual = w
            .matmul(&t.constant((*at).clone()))?
            .sub(&t.constant((*bt).clone()))?;
        let gram = w.t()?.matmul(w)?.sub(&t.constant(Tensor::eye(n)))?;
        Ok(Model::new(residual.square().sum()).eq("orthogonality", gram))
    })?;
    Ok(ProcrustesInstance {
        config: config.clone(),
        a,
        b,
        rotation,
        problem,
    })
}

impl ProcrustesInstance {
    /// Instance with `B = A`, whose solution is the identity.
    pub fn aligned(config: &ProcrustesConfig) -> Result<Self, GalleryError> {
        config.validate()?;
        let mut rng = rng(config.seed);
        let a = gaussian_matrix(&mut rng, config.n, config.n);
        let n = config.n;
        with_data(config, a.clone(), a, DMatrix::identity(n, n))
    }

    /// Closed-form minimizer `UVᵀ` from the SVD `BAᵀ = UΣVᵀ`.
    pub fn svd_solution(&self) -> DMatrix<f64> {
        let m = &self.b * self.a.transpose();
        let svd = m.svd(true, true);
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested Vᵀ");
        u * vt
    }

    pub fn objective(&self, w: &DMatrix<f64>) -> f64 {
        (w * &self.a - &self.b).norm_squared()
    }

    /// Unpacks the row-major variable into a matrix.
    pub fn matrix(&self, x: &PackedPoint) -> DMatrix<f64> {
        let n = self.config.n;
        DMatrix::from_row_slice(n, n, x.as_slice())
    }
}

impl Example for ProcrustesInstance {
    fn problem(&self) -> &ProblemDefinition {
        &self.problem
    }

    fn feasible_point(&self) -> Option<PackedPoint> {
        Some(PackedPoint(row_major(&DMatrix::identity(
            self.config.n,
            self.config.n,
        ))))
    }

    fn reference(&self, x: &PackedPoint) -> ReferenceValues {
        let n = self.config.n;
        let w = x.as_slice();
        let mut f = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut s = -self.b[(i, j)];
                for k in 0..n {
                    s += w[i * n + k] * self.a[(k, j)];
                }
                f += s * s;
            }
        }
        let mut ce = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut s = if i == j { -1.0 } else { 0.0 };
                for k in 0..n {
                    s += w[k * n + i] * w[k * n + j];
                }
                ce.push(s);
            }
        }
        ReferenceValues { f, ci: vec![], ce }
    }
}
