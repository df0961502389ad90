//! The three quadratic programming tools: the general ADMM solver, the
//! exact box-constrained solver and the min-norm point of a convex hull.

use nalgebra::{DMatrix, DVector};
use nonsmooth_sqp::qp::{min_norm_in_hull, solve_box_qp, solve_qp, QpData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // min ½|x|² - x₁ - x₂  s.t.  x₁ + x₂ ≤ 1,  0 ≤ x
    let p = DMatrix::identity(2, 2);
    let q = DVector::from_vec(vec![-1.0, -1.0]);
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    let l = DVector::from_vec(vec![f64::NEG_INFINITY, 0.0, 0.0]);
    let u = DVector::from_vec(vec![1.0, f64::INFINITY, f64::INFINITY]);
    let data = QpData::new(p, q, a, l, u)?;
    let sol = solve_qp(&data, 1e-9, 20_000);
    println!(
        "ADMM: x = ({:.6}, {:.6}), status {}, {} iterations",
        sol.x[0],
        sol.x[1],
        sol.status.as_str(),
        sol.iterations
    );

    // min ½xᵀPx + qᵀx  s.t.  -1 ≤ x ≤ 1 with a singular P
    let p = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    let q = DVector::from_vec(vec![-4.0, 1.0, 0.5]);
    let ones = DVector::from_element(3, 1.0);
    let sol = solve_box_qp(&p, &q, &(-&ones), &ones, 1e-12, 100)?;
    println!(
        "box QP: x = ({:.6}, {:.6}, {:.6}), status {}",
        sol.x[0],
        sol.x[1],
        sol.x[2],
        sol.status.as_str()
    );

    // gradients (1, 1), (-1, 1) and (0, 2): the hull's closest point to 0 is (0, 1)
    let g = DMatrix::from_column_slice(2, 3, &[1.0, 1.0, -1.0, 1.0, 0.0, 2.0]);
    let (norm, weights) = min_norm_in_hull(&g, 1e-12, 100)?;
    println!("min-norm point: norm {norm:.6}, weights {weights:.3?}");
    Ok(())
}
