//! Spring-chain topology optimization: distribute a material budget over
//! springs to minimize compliance under equilibrium constraints.

use nonsmooth_sqp::gallery::{build_topology, Example, TopologyConfig};
use nonsmooth_sqp::solver::{solve, SolverOptions};

fn main() {
    for d in [2, 10] {
        let inst = build_topology(&TopologyConfig {
            d,
            ..Default::default()
        })
        .expect("configuration is valid");
        let opts = SolverOptions {
            x0: inst.feasible_point(),
            ..Default::default()
        };
        let sol = solve(inst.problem(), &opts).expect("solver options are valid");
        let x = inst.design(&sol.best.x);
        println!(
            "d = {d}: {} after {} iterations, compliance {:.6}, violation {:.1e}",
            sol.termination,
            sol.iterations(),
            inst.compliance(&x),
            sol.best.max_violation()
        );
        let design: Vec<String> = x.iter().map(|v| format!("{v:.3}")).collect();
        println!("  design [{}]", design.join(", "));
        if let Some((grid_x, grid_c)) = inst.grid_optimum(1000) {
            println!(
                "  grid optimum {grid_c:.6} at ({:.3}, {:.3})",
                grid_x[0], grid_x[1]
            );
        }
    }
}
