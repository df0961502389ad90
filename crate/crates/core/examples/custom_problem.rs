//! Defining a problem from scratch: minimize the l1 distance to a point
//! subject to landing on the unit circle and staying in a half-plane.

use nonsmooth_sqp::ad::Norm;
use nonsmooth_sqp::problem::{Model, ProblemDefinition, VariableSpec};
use nonsmooth_sqp::solver::{solve, SolverOptions};
use nonsmooth_sqp::Tensor;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vars = VariableSpec::new().with("p", &[2])?;
    let problem = ProblemDefinition::new(vars, |v| {
        let t = v.tape();
        let p = &v["p"];
        let target = t.constant(Tensor::vector(vec![2.0, 1.0]));
        let objective = p.sub(&target)?.norm(Norm::L1);
        let circle = p.dot(p)?.add_scalar(-1.0);
        let half_plane = p.index(&[1])?.neg().add_scalar(0.2);
        Ok(Model::new(objective)
            .eq("circle", circle)
            .ineq("half_plane", half_plane))
    })?;

    let sol = solve(&problem, &SolverOptions::default())?;
    println!("termination: {}", sol.termination);
    for (name, value) in &sol.best.variables {
        println!("{name} = {:?}", value.data());
    }
    println!(
        "objective {:.10}, violation {:.1e}, {} iterations",
        sol.best.f,
        sol.best.max_violation(),
        sol.iterations()
    );
    Ok(())
}
