//! Orthogonal dictionary learning: recover a column of a random orthogonal
//! dictionary from sparse samples by minimizing an l1 loss on the sphere.

use nonsmooth_sqp::gallery::{build_odl, Example, OdlConfig};
use nonsmooth_sqp::solver::{solve, SolverOptions};

fn main() {
    let config = OdlConfig::default();
    println!(
        "n = {}, m = {}, theta = {}",
        config.n, config.m, config.theta
    );
    for seed in 0..5 {
        let inst = build_odl(&OdlConfig {
            seed,
            ..config.clone()
        })
        .expect("default configuration is valid");
        let opts = SolverOptions {
            seed,
            ..Default::default()
        };
        let sol = solve(inst.problem(), &opts).expect("solver options are valid");
        let q = sol.best.x.as_slice();
        println!(
            "seed {seed}: {:<20} iterations {:>4}  max |q.a_j| = {:.12}  |q.q - 1| = {:.1e}",
            sol.termination.as_str(),
            sol.iterations(),
            inst.recovery(q),
            sol.best.viol_eq
        );
    }
}
