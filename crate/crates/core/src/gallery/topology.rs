use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use super::{gaussian_matrix, rng, Example, GalleryError, ReferenceValues, TopologyConfig};
use crate::ad::{Tape, Var};
use crate::problem::{Model, PackedPoint, ProblemDefinition, VariableSpec};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Load {
    /// Unit force on the free end.
    Tip,
    /// Unit total force spread evenly over the nodes.
    Uniform,
}

impl FromStr for Load {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tip" => Ok(Load::Tip),
            "uniform" => Ok(Load::Uniform),
            other => Err(format!("expected tip or uniform, got `{other}`")),
        }
    }
}

impl fmt::Display for Load {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Load::Tip => "tip",
            Load::Uniform => "uniform",
        })
    }
}

/// Compliance minimization of a serial chain of `d` springs fixed at the
/// left end. Spring `i` joins node `i − 1` and node `i` (node 0 is the
/// support) and has stiffness `k_min + xᵢ(k_max − k_min)`.
pub struct TopologyInstance {
    pub config: TopologyConfig,
    pub force: Vec<f64>,
    /// Fixed network input of the generated-design variant.
    pub dip_input: Option<Vec<f64>>,
    problem: ProblemDefinition,
}

/// `K(x)u` for the chain, on the tape.
fn stiffness_times(t: &Tape, k: &Var, u: &Var, d: usize) -> Result<Var, crate::ad::AdError> {
    let zero = t.constant(Tensor::vector(vec![0.0]));
    let u_prev = t.concat(&[zero.clone(), u.slice(0, d - 1)?])?;
    let tension = k.mul(&u.sub(&u_prev)?)?;
    let t_next = t.concat(&[tension.slice(1, d)?, zero])?;
    tension.sub(&t_next)
}

/// Design generated as `sigmoid(W₂ relu(W₁β + b₁) + b₂)`.
fn dip_design(t: &Tape, v: &crate::problem::Vars, beta: &[f64]) -> Result<Var, crate::ad::AdError> {
    let beta = t.constant(Tensor::vector(beta.to_vec()));
    let h = v["w1"].matmul(&beta)?.add(&v["b1"])?.relu();
    let z = v["w2"].matmul(&h)?.add(&v["b2"])?;
    let denom = z.neg().exp().add_scalar(1.0);
    t.constant(Tensor::full(denom.shape(), 1.0)).div(&denom)
}

pub fn build_topology(config: &TopologyConfig) -> Result<TopologyInstance, GalleryError> {
    config.validate()?;
    let d = config.d;
    let force: Vec<f64> = match config.load {
        Load::Tip => (0..d).map(|i| if i + 1 == d { 1.0 } else { 0.0 }).collect(),
        Load::Uniform => vec![1.0 / d as f64; d],
    };
    let (k_min, k_max, v0) = (config.k_min, config.k_max, config.v0);
    let budget = v0 * d as f64;
    let f_ext = force.clone();

    let (vars, dip_input) = if config.dip {
        let w = config.dip_width;
        let mut rng = rng(config.seed);
        let beta: Vec<f64> = gaussian_matrix(&mut rng, w, 1).iter().copied().collect();
        let vars = VariableSpec::new()
            .with("w1", &[w, w])?
            .with("b1", &[w])?
            .with("w2", &[d, w])?
            .with("b2", &[d])?
            .with("u", &[d])?;
        (vars, Some(beta))
    } else {
        (VariableSpec::new().with("x", &[d])?.with("u", &[d])?, None)
    };
    let beta = dip_input.clone();
    let problem = ProblemDefinition::new(vars, move |v| {
        let t = v.tape();
        let x = match &beta {
            Some(b) => dip_design(t, v, b)?,
            None => v["x"].clone(),
        };
        let u = &v["u"];
        let k = x.scale(k_max - k_min).add_scalar(k_min);
        let ku = stiffness_times(t, &k, u, d)?;
        let compliance = u.dot(&ku)?;
        let f = t.constant(Tensor::vector(f_ext.clone()));
        let mut model = Model::new(compliance)
            .eq("equilibrium", ku.sub(&f)?)
            .ineq("volume", x.sum().add_scalar(-budget));
        if beta.is_none() {
            model = model
                .ineq("upper", x.add_scalar(-1.0))
                .ineq("lower", x.neg());
        }
        Ok(model)
    })?;
    Ok(TopologyInstance {
        config: config.clone(),
        force,
        dip_input,
        problem,
    })
}

impl TopologyInstance {
    pub fn stiffnesses(&self, x: &[f64]) -> Vec<f64> {
        let c = &self.config;
        x.iter()
            .map(|xi| c.k_min + xi * (c.k_max - c.k_min))
            .collect()
    }

    /// Assembled tridiagonal `K(x)`.
    pub fn stiffness_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.config.d;
        let k = self.stiffnesses(x);
        let mut km = DMatrix::zeros(d, d);
        for i in 0..d {
            km[(i, i)] += k[i];
            if i + 1 < d {
                km[(i, i)] += k[i + 1];
                km[(i, i + 1)] = -k[i + 1];
                km[(i + 1, i)] = -k[i + 1];
            }
        }
        km
    }

    /// `u = K(x)⁻¹f` by a dense solve.
    pub fn displacement(&self, x: &[f64]) -> Vec<f64> {
        let km = self.stiffness_matrix(x);
        let u = km
            .lu()
            .solve(&DVector::from_column_slice(&self.force))
            .expect("chain stiffness is positive definite");
        u.iter().copied().collect()
    }

    /// Compliance `fᵀu` of a design at equilibrium.
    pub fn compliance(&self, x: &[f64]) -> f64 {
        self.displacement(x)
            .iter()
            .zip(&self.force)
            .map(|(u, f)| u * f)
            .sum()
    }

    /// Best design on a uniform grid with `steps` intervals per axis among
    /// designs within the material budget; `None` unless `d = 2` without
    /// the reparametrization.
    pub fn grid_optimum(&self, steps: usize) -> Option<(Vec<f64>, f64)> {
        if self.config.d != 2 || self.dip_input.is_some() || steps == 0 {
            return None;
        }
        let budget = self.config.v0 * 2.0;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = vec![i as f64 / steps as f64, j as f64 / steps as f64];
                if x[0] + x[1] > budget + 1e-12 {
                    continue;
                }
                let c = self.compliance(&x);
                if best.as_ref().is_none_or(|(_, b)| c < *b) {
                    best = Some((x, c));
                }
            }
        }
        best
    }

    /// The design encoded by a packed point.
    pub fn design(&self, p: &PackedPoint) -> Vec<f64> {
        let d = self.config.d;
        let x = p.as_slice();
        match &self.dip_input {
            None => x[..d].to_vec(),
            Some(beta) => {
                let w = self.config.dip_width;
                let (w1, rest) = x.split_at(w * w);
                let (b1, rest) = rest.split_at(w);
                let (w2, rest) = rest.split_at(d * w);
                let b2 = &rest[..d];
                let h: Vec<f64> = (0..w)
                    .map(|i| {
                        (b1[i] + (0..w).map(|j| w1[i * w + j] * beta[j]).sum::<f64>()).max(0.0)
                    })
                    .collect();
                (0..d)
                    .map(|i| {
                        let z = b2[i] + (0..w).map(|j| w2[i * w + j] * h[j]).sum::<f64>();
                        1.0 / (1.0 + (-z).exp())
                    })
                    .collect()
            }
        }
    }

    fn displacement_part<'a>(&self, p: &'a PackedPoint) -> &'a [f64] {
        let x = p.as_slice();
        &x[x.len() - self.config.d..]
    }
}

impl Example for TopologyInstance {
    fn problem(&self) -> &ProblemDefinition {
        &self.problem
    }

    fn feasible_point(&self) -> Option<PackedPoint> {
        let d = self.config.d;
        match &self.dip_input {
            None => {
                let x = vec![self.config.v0; d];
                let mut p = x.clone();
                p.extend(self.displacement(&x));
                Some(PackedPoint(p))
            }
            Some(_) => {
                let w = self.config.dip_width;
                let level = self.config.v0.min(0.5);
                let b2 = (level / (1.0 - level)).ln();
                let mut p = vec![0.0; w * w + w + d * w];
                p.extend(std::iter::repeat_n(b2, d));
                let x = self.design(&PackedPoint(p.clone()));
                p.extend(self.displacement(&x));
                Some(PackedPoint(p))
            }
        }
    }

    fn reference(&self, p: &PackedPoint) -> ReferenceValues {
        let d = self.config.d;
        let x = self.design(p);
        let u = self.displacement_part(p);
        let k = self.stiffnesses(&x);
        let mut ku = vec![0.0; d];
        for i in 0..d {
            let left = if i == 0 { 0.0 } else { u[i - 1] };
            ku[i] += k[i] * (u[i] - left);
            if i + 1 < d {
                ku[i] -= k[i + 1] * (u[i + 1] - u[i]);
            }
        }
        let f = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
        let ce = ku.iter().zip(&self.force).map(|(a, b)| a - b).collect();
        let mut ci = vec![x.iter().sum::<f64>() - self.config.v0 * d as f64];
        if self.dip_input.is_none() {
            ci.extend(x.iter().map(|v| v - 1.0));
            ci.extend(x.iter().map(|v| -v));
        }
        ReferenceValues { f, ci, ce }
    }
}
