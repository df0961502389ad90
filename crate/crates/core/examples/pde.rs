//! Collocation of u'' = g on [0, 1] with a sine basis, posed as equality
//! constraints on the basis coefficients.

use nonsmooth_sqp::gallery::{build_pde, Example, PdeConfig, Source};
use nonsmooth_sqp::solver::{solve, SolverOptions};

fn main() {
    for source in [Source::Sine, Source::MinusTwo] {
        let inst = build_pde(&PdeConfig {
            source,
            ..Default::default()
        })
        .expect("configuration is valid");
        let sol =
            solve(inst.problem(), &SolverOptions::default()).expect("solver options are valid");
        let theta = sol.best.x.as_slice();
        println!(
            "g = {source}: {} after {} iterations, max collocation residual {:.2e}, max error vs exact u {:.2e}",
            sol.termination,
            sol.iterations(),
            sol.best.viol_eq,
            inst.collocation_error(theta)
        );
        for x in [0.25, 0.5, 0.75] {
            println!(
                "  u({x}) = {:.6}  exact {:.6}",
                inst.eval_u(theta, x),
                source.solution(x)
            );
        }
    }
}
