use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vec_leaf(tape: &Tape, name: &str, v: &[f64]) -> Var {
    tape.leaf(name, Tensor::vector(v.to_vec())).unwrap()
}

#[test]
fn matmul_shape_rule() {
    let tape = Tape::new();
    let a = tape.constant(Tensor::zeros([2, 3]));
    let b = tape.constant(Tensor::zeros([3, 4]));
    assert_eq!(a.matmul(&b).unwrap().shape(), vec![2, 4]);
    let v = tape.constant(Tensor::zeros([3]));
    assert_eq!(a.matmul(&v).unwrap().shape(), vec![2]);
    let err = b.matmul(&a).unwrap_err();
    assert_eq!(
        err,
        AdError::ShapeMismatch {
            op: "matmul",
            lhs: vec![3, 4],
            rhs: vec![2, 3]
        }
    );
}

#[test]
fn l1_norm_value() {
    let tape = Tape::new();
    let q = vec_leaf(&tape, "q", &[1.0, -2.0, 0.0]);
    assert_eq!(q.pnorm(1.0).unwrap().item(), 3.0);
    assert!(matches!(q.pnorm(3.0), Err(AdError::UnsupportedNorm(_))));
}

#[test]
fn odl_objective_matches_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
    let tape = Tape::new();
    let q = tape
        .leaf("q", Tensor::from_vec([3, 1], vec![1.0, 0.0, 0.0]))
        .unwrap();
    let ym = tape.constant(Tensor::from_vec([3, 5], y.clone()));
    let f = q
        .t()
        .unwrap()
        .matmul(&ym)
        .unwrap()
        .pnorm(1.0)
        .unwrap()
        .scale(1.0 / 5.0);
    let expected: f64 = (0..5).map(|j| y[j].abs()).sum::<f64>() / 5.0;
    assert!((f.item() - expected).abs() <= 1e-15);
}

#[test]
fn squared_norm_gradient() {
    let tape = Tape::new();
    let q = vec_leaf(&tape, "q", &[1.5, -2.0, 0.25]);
    let f = q.pnorm(2.0).unwrap().square();
    let g = f.backward().unwrap();
    for (gi, qi) in g.get("q").unwrap().data().iter().zip([1.5, -2.0, 0.25]) {
        assert!((gi - 2.0 * qi).abs() < 1e-14);
    }
}

#[test]
fn odl_identity_gradient_is_scaled_sign() {
    let tape = Tape::new();
    let q = tape
        .leaf("q", Tensor::from_vec([3, 1], vec![0.5, -0.2, 0.1]))
        .unwrap();
    let y = tape.constant(Tensor::eye(3));
    let f = q
        .t()
        .unwrap()
        .matmul(&y)
        .unwrap()
        .pnorm(1.0)
        .unwrap()
        .scale(1.0 / 3.0);
    let g = f.backward().unwrap();
    let third = 1.0 / 3.0;
    assert_eq!(g.get("q").unwrap().data(), &[third, -third, third]);
    assert_eq!(g.get("q").unwrap().shape(), &[3, 1]);
}

#[test]
fn kink_conventions() {
    let tape = Tape::new();
    let x = vec_leaf(&tape, "x", &[0.0, 2.0, -2.0, 2.0]);
    let g = x.abs().sum().backward().unwrap();
    assert_eq!(g.get("x").unwrap().data(), &[0.0, 1.0, -1.0, 1.0]);
    let g = x.relu().sum().backward().unwrap();
    assert_eq!(g.get("x").unwrap().data(), &[0.0, 1.0, 0.0, 1.0]);
    // ties: lowest flat index wins
    let g = x.max().backward().unwrap();
    assert_eq!(g.get("x").unwrap().data(), &[0.0, 1.0, 0.0, 0.0]);
    let g = x.norm(Norm::Inf).backward().unwrap();
    assert_eq!(g.get("x").unwrap().data(), &[0.0, 1.0, 0.0, 0.0]);
    let z = vec_leaf(&tape, "z", &[0.0, 0.0]);
    let g = z.norm(Norm::L2).backward().unwrap();
    assert_eq!(g.get("z").unwrap().data(), &[0.0, 0.0]);
}

#[test]
fn non_scalar_root_is_rejected() {
    let tape = Tape::new();
    let x = vec_leaf(&tape, "x", &[1.0, 2.0]);
    assert_eq!(x.backward().unwrap_err(), AdError::NonScalarRoot(vec![2]));
}

#[test]
fn domain_errors() {
    let tape = Tape::new();
    let x = vec_leaf(&tape, "x", &[1.0, -1.0]);
    assert!(matches!(x.sqrt(), Err(AdError::Domain { op: "sqrt", .. })));
    assert!(matches!(x.log(), Err(AdError::Domain { op: "log", .. })));
    let z = vec_leaf(&tape, "z", &[0.0]);
    assert!(matches!(z.log(), Err(AdError::Domain { op: "log", .. })));
}

#[test]
fn elementwise_shape_errors_name_op() {
    let tape = Tape::new();
    let a = vec_leaf(&tape, "a", &[1.0, 2.0]);
    let b = vec_leaf(&tape, "b", &[1.0, 2.0, 3.0]);
    match a.add(&b).unwrap_err() {
        AdError::ShapeMismatch { op, lhs, rhs } => {
            assert_eq!(op, "add");
            assert_eq!(lhs, vec![2]);
            assert_eq!(rhs, vec![3]);
        }
        e => panic!("unexpected {e:?}"),
    }
    // scalar broadcast is allowed
    let s = tape.scalar(2.0);
    assert_eq!(a.mul(&s).unwrap().value().data(), &[2.0, 4.0]);
}

#[test]
fn duplicate_leaf_names_rejected() {
    let tape = Tape::new();
    vec_leaf(&tape, "x", &[1.0]);
    assert_eq!(
        tape.leaf("x", Tensor::scalar(0.0)).unwrap_err(),
        AdError::DuplicateLeaf("x".into())
    );
}

#[test]
fn mixing_tapes_is_an_error() {
    let t1 = Tape::new();
    let t2 = Tape::new();
    let a = vec_leaf(&t1, "a", &[1.0]);
    let b = vec_leaf(&t2, "b", &[1.0]);
    assert_eq!(a.add(&b).unwrap_err(), AdError::ForeignTape);
}

#[test]
fn broadcast_gradient_sums_into_scalar() {
    let tape = Tape::new();
    let s = tape.leaf("s", Tensor::scalar(3.0)).unwrap();
    let v = vec_leaf(&tape, "v", &[1.0, 2.0, 4.0]);
    let g = v.mul(&s).unwrap().sum().backward().unwrap();
    assert_eq!(g.get("s").unwrap().item(), 7.0);
    assert_eq!(g.get("v").unwrap().data(), &[3.0, 3.0, 3.0]);
}

#[test]
fn slice_index_concat_route_adjoints() {
    let tape = Tape::new();
    let m = tape
        .leaf(
            "m",
            Tensor::from_vec([3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
        )
        .unwrap();
    let rows = m.slice(1, 3).unwrap();
    assert_eq!(rows.shape(), vec![2, 2]);
    let e = m.index(&[0, 1]).unwrap();
    assert_eq!(e.item(), 2.0);
    let c = tape.concat(&[e.clone(), rows.flatten()]).unwrap();
    assert_eq!(c.value().data(), &[2.0, 3.0, 4.0, 5.0, 6.0]);
    let w = tape.constant(Tensor::vector(vec![1.0, 10.0, 20.0, 30.0, 40.0]));
    let g = c.dot(&w).unwrap().backward().unwrap();
    assert_eq!(
        g.get("m").unwrap().data(),
        &[0.0, 1.0, 10.0, 20.0, 30.0, 40.0]
    );
}

#[test]
fn unreached_and_frozen_leaves() {
    let tape = Tape::new();
    let a = vec_leaf(&tape, "a", &[1.0]);
    let _b = vec_leaf(&tape, "b", &[1.0, 1.0]);
    let c = tape.frozen_leaf("c", Tensor::vector(vec![2.0])).unwrap();
    let g = a.mul(&c).unwrap().sum().backward().unwrap();
    assert_eq!(g.len(), 2);
    assert_eq!(g.get("a").unwrap().data(), &[2.0]);
    assert_eq!(g.get("b").unwrap().data(), &[0.0, 0.0]);
    assert!(g.get("c").is_none());
}

#[test]
fn backward_is_repeatable_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let tape = Tape::new();
    let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
    let xv = tape.leaf("x", Tensor::from_vec([2, 3], x)).unwrap();
    let f = xv
        .matmul(&xv.t().unwrap())
        .unwrap()
        .exp()
        .sum()
        .add(&xv.abs().max())
        .unwrap();
    let g1 = f.backward().unwrap();
    let g2 = f.backward().unwrap();
    let bits = |g: &Gradients| -> Vec<u64> {
        g.get("x")
            .unwrap()
            .data()
            .iter()
            .map(|v| v.to_bits())
            .collect()
    };
    assert_eq!(bits(&g1), bits(&g2));
}

#[test]
fn fault_hook_flips_abs_gradient() {
    let tape = Tape::new();
    let x = vec_leaf(&tape, "x", &[2.0]);
    let f = x.abs().sum();
    fault::set_abs_gradient_flipped(true);
    let flipped = f.backward().unwrap();
    fault::set_abs_gradient_flipped(false);
    assert_eq!(flipped.get("x").unwrap().data(), &[-1.0]);
    assert_eq!(f.backward().unwrap().get("x").unwrap().data(), &[1.0]);
}
