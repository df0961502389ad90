//! Orthogonal Procrustes: fit an orthogonal W with WA close to B and
//! compare with the closed-form SVD solution.

use nonsmooth_sqp::gallery::{build_procrustes, Example, ProcrustesConfig};
use nonsmooth_sqp::solver::{solve, SolverOptions};

fn main() {
    for seed in 0..5 {
        let inst = build_procrustes(&ProcrustesConfig {
            seed,
            ..Default::default()
        })
        .expect("default configuration is valid");
        let sol = solve(
            inst.problem(),
            &SolverOptions {
                seed,
                ..Default::default()
            },
        )
        .expect("solver options are valid");
        let w = inst.matrix(&sol.best.x);
        let oracle = inst.objective(&inst.svd_solution());
        let n = w.nrows();
        let orth = (w.transpose() * &w - nalgebra::DMatrix::identity(n, n)).amax();
        println!(
            "seed {seed}: {:<20} |WA - B|^2 = {:.3e}  SVD optimum = {:.3e}  |W'W - I| = {:.1e}  det W = {:+.3}",
            sol.termination.as_str(),
            inst.objective(&w),
            oracle,
            orth,
            w.determinant()
        );
    }
}
