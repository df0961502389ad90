//! Adversarial perturbations of a tiny relu classifier, in both the
//! max-loss and the min-distortion formulation, against random search.

use nonsmooth_sqp::gallery::{build_attack, AttackConfig, AttackMode, Example};
use nonsmooth_sqp::solver::{solve, SolverOptions};

fn main() {
    for mode in [AttackMode::MaxLoss, AttackMode::MinDistortion] {
        println!("{mode}");
        for seed in 0..5 {
            let inst = build_attack(&AttackConfig {
                mode,
                seed,
                ..Default::default()
            })
            .expect("default configuration is valid");
            let opts = SolverOptions {
                seed,
                x0: inst.feasible_point(),
                ..Default::default()
            };
            let sol = solve(inst.problem(), &opts).expect("solver options are valid");
            let x = sol.best.x.as_slice();
            let baseline = inst.random_search(10_000, seed + 100).unwrap_or(f64::NAN);
            let (value, label) = match mode {
                AttackMode::MaxLoss => (inst.margin(x), "margin"),
                AttackMode::MinDistortion => (inst.distance(x), "radius"),
            };
            println!(
                "  seed {seed}: {label} {value:.5} (random search {baseline:.5}), violation {:.1e}, {}",
                sol.best.max_violation(),
                sol.termination
            );
        }
    }
}
