use nalgebra::{DMatrix, DVector};

use super::{QpError, QpStatus};

/// Smallest Euclidean norm over the convex hull of the columns of `g`.
///
/// Returns the norm and the simplex weights `λ` attaining it. Columns are
/// rescaled by the largest column norm, then Wolfe's min-norm-point
/// algorithm is run: a corral of affinely independent columns is grown by
/// the column most opposed to the current point, and shrunk whenever the
/// affine minimizer of the corral leaves the simplex. `tol` is relative
/// to the largest squared column norm.
pub fn min_norm_in_hull(
    g: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>), QpError> {
    let k = g.ncols();
    if k == 0 {
        return Err(QpError::Invalid("empty gradient set".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(QpError::Invalid("non-finite gradient entry".into()));
    }
    let uniform = vec![1.0 / k as f64; k];
    if k == 1 {
        return Ok((g.column(0).norm(), uniform));
    }
    let scale = g.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok((0.0, uniform));
    }
    let gs = g / scale;
    let gram = gs.tr_mul(&gs);

    let first = (0..k)
        .min_by(|&a, &b| gram[(a, a)].total_cmp(&gram[(b, b)]))
        .expect("k > 0");
    let mut corral = vec![first];
    let mut weights = vec![1.0];
    let mut solved = false;
    for _ in 0..max_iter {
        // ⟨x, g_j⟩ for the current point x = Σ weights·columns
        let xg: Vec<f64> = (0..k)
            .map(|j| {
                corral
                    .iter()
                    .zip(&weights)
                    .map(|(&i, w)| w * gram[(i, j)])
                    .sum()
            })
            .collect();
        let xx: f64 = corral.iter().zip(&weights).map(|(&i, w)| w * xg[i]).sum();
        let (j, best) = xg
            .iter()
            .enumerate()
            .filter(|(j, _)| !corral.contains(j))
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, v)| (j, *v))
            .unwrap_or((usize::MAX, f64::INFINITY));
        if best >= xx - tol {
            solved = true;
            break;
        }
        corral.push(j);
        weights.push(0.0);
        loop {
            let Some(alpha) = affine_minimizer(&gram, &corral) else {
                // affinely dependent corral: drop the column just added
                corral.pop();
                weights.pop();
                solved = true;
                break;
            };
            if alpha.iter().all(|&a| a > 0.0) {
                weights = alpha;
                break;
            }
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= 0.0)
                .map(|(&w, &a)| w / (w - a))
                .fold(1.0, f64::min);
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w += theta * (a - *w);
            }
            let mut keep = 0;
            for i in 0..corral.len() {
                if weights[i] > 1e-15 {
                    corral[keep] = corral[i];
                    weights[keep] = weights[i];
                    keep += 1;
                }
            }
            corral.truncate(keep);
            weights.truncate(keep);
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        if solved {
            break;
        }
    }
    if !solved {
        return Err(QpError::Failed(QpStatus::MaxIter));
    }
    let mut lambda = vec![0.0; k];
    for (&i, &w) in corral.iter().zip(&weights) {
        lambda[i] = w;
    }
    let measure = (g * DVector::from_column_slice(&lambda)).norm();
    Ok((measure, lambda))
}

/// Weights `α` with `Σα = 1` minimizing `‖Σ αᵢ gᵢ‖` over the affine hull of
/// the corral, or `None` when the corral is affinely dependent.
fn affine_minimizer(gram: &DMatrix<f64>, corral: &[usize]) -> Option<Vec<f64>> {
    let s = corral.len();
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for (a, &i) in corral.iter().enumerate() {
        for (b, &j) in corral.iter().enumerate() {
            kkt[(a, b)] = gram[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let svd = kkt.svd(true, true);
    let top = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-13 * top {
        return None;
    }
    let sol = svd.solve(&rhs, 0.0).ok()?;
    Some(sol.iter().take(s).copied().collect())
}
