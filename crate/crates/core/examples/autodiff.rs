//! Reverse-mode gradients of a small nonsmooth expression, checked against
//! central differences.

use nonsmooth_sqp::ad::{Norm, Tape};
use nonsmooth_sqp::Tensor;

fn loss(x: &[f64], w: &[f64]) -> f64 {
    let z: Vec<f64> = (0..2)
        .map(|i| (w[2 * i] * x[0] + w[2 * i + 1] * x[1]).max(0.0))
        .collect();
    z.iter().map(|v| v * v).sum::<f64>().sqrt() + x.iter().map(|v| v.abs()).sum::<f64>()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x0 = vec![0.7, -1.3];
    let w0 = vec![1.0, 0.5, -2.0, 0.25];

    let tape = Tape::new();
    let x = tape.leaf("x", Tensor::vector(x0.clone()))?;
    let w = tape.leaf("w", Tensor::from_vec(vec![2, 2], w0.clone()))?;
    let hidden = w.matmul(&x)?.relu();
    let f = hidden.norm(Norm::L2).add(&x.norm(Norm::L1))?;
    let grads = tape.backward(&f)?;

    println!("f = {:.12}  (plain loop {:.12})", f.item(), loss(&x0, &w0));
    let h = 1e-6;
    let gx = grads.get("x").expect("x is a leaf");
    for i in 0..2 {
        let (mut p, mut m) = (x0.clone(), x0.clone());
        p[i] += h;
        m[i] -= h;
        let fd = (loss(&p, &w0) - loss(&m, &w0)) / (2.0 * h);
        println!(
            "df/dx[{i}] = {:+.10}  finite difference {fd:+.10}",
            gx.data()[i]
        );
    }
    let gw = grads.get("w").expect("w is a leaf");
    println!("df/dw = {:?}", gw.data());
    Ok(())
}
