use super::*;
use crate::rng;
use crate::Error;
use rand::Rng;

fn randn(seed: u64, stage: &str, n: usize) -> NdArray {
    let mut rng = rng::derive(seed, stage);
    NdArray::from_vec((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
}

#[test]
fn add_elementwise() {
    let mut g = Graph::new();
    let a = g.leaf(NdArray::from_vec(vec![1.0, 2.0]));
    let b = g.leaf(NdArray::from_vec(vec![3.0, 4.0]));
    let c = g.add(a, b).unwrap();
    assert_eq!(g.data(c).data(), &[4.0, 6.0]);
}

#[test]
fn log_inverts_exp() {
    let mut g = Graph::new();
    let x = g.leaf(NdArray::from_vec(vec![0.5, 2.0]));
    let e = g.exp(x);
    let back = g.log(e);
    for (a, b) in g.data(back).data().iter().zip(g.data(x).data()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn mul_gradient_is_other_factor() {
    let mut g = Graph::new();
    let a = g.leaf_grad(NdArray::from_vec(vec![2.0]));
    let b = g.leaf(NdArray::from_vec(vec![3.0]));
    let p = g.mul(a, b).unwrap();
    let loss = g.sum(p);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(a).unwrap(), &[3.0]);
}

#[test]
fn shape_mismatch_names_both_shapes() {
    let mut g = Graph::new();
    let a = g.leaf(NdArray::zeros(vec![2, 3]));
    let b = g.leaf(NdArray::zeros(vec![3, 2]));
    let err = g.add(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
}

#[test]
fn sum_and_mean_reduce() {
    let mut g = Graph::new();
    let a = g.leaf(NdArray::from_vec(vec![1.0, 2.0, 3.0]));
    let s = g.sum(a);
    assert_eq!(g.data(s).item(), 6.0);

    let ones = g.leaf(NdArray::filled(vec![4, 4], 1.0));
    let m = g.mean(ones);
    assert_eq!(g.data(m).item(), 1.0);
}

#[test]
fn max_reduce_routes_gradient_to_argmax() {
    let mut g = Graph::new();
    let a = g.leaf_grad(NdArray::from_vec(vec![1.0, 5.0, 2.0]));
    let m = g.max(a);
    assert_eq!(g.data(m).item(), 5.0);
    g.backward(m).unwrap();
    assert_eq!(g.grad(a).unwrap(), &[0.0, 1.0, 0.0]);
}

#[test]
fn max_reduce_tie_routes_to_first() {
    let mut g = Graph::new();
    let a = g.leaf_grad(NdArray::from_vec(vec![3.0, 7.0, 7.0, 1.0]));
    let m = g.max(a);
    g.backward(m).unwrap();
    assert_eq!(g.grad(a).unwrap(), &[0.0, 1.0, 0.0, 0.0]);
}

#[test]
fn axis_reduce() {
    let mut g = Graph::new();
    // [[1,2,3],[4,5,6]]
    let a = g.leaf(NdArray::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
    let rows = g.reduce(ReduceKind::Sum, a, Some(&[1])).unwrap();
    assert_eq!(g.shape(rows), &[2]);
    assert_eq!(g.data(rows).data(), &[6.0, 15.0]);
    let cols = g.reduce(ReduceKind::Max, a, Some(&[0])).unwrap();
    assert_eq!(g.data(cols).data(), &[4.0, 5.0, 6.0]);
    let err = g.reduce(ReduceKind::Sum, a, Some(&[2])).unwrap_err();
    assert!(matches!(err, Error::InvalidAxis { axis: 2, rank: 2 }));
}

#[test]
fn backward_populates_leaf_gradients() {
    // loss = sum(x^2), x=[1,2] -> grad [2,4]
    let mut g = Graph::new();
    let x = g.leaf_grad(NdArray::from_vec(vec![1.0, 2.0]));
    let sq = g.mul(x, x).unwrap();
    let loss = g.sum(sq);
    g.backward(loss).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0]);
}

#[test]
fn sigmoid_gradient_at_zero() {
    // loss = sigmoid(w * x) at w=0, x=1 -> dloss/dw = 0.25
    let mut g = Graph::new();
    let w = g.leaf_grad(NdArray::from_vec(vec![0.0]));
    let x = g.leaf(NdArray::from_vec(vec![1.0]));
    let wx = g.mul(w, x).unwrap();
    let s = g.sigmoid(wx);
    let loss = g.sum(s);
    g.backward(loss).unwrap();
    assert!((g.grad(w).unwrap()[0] - 0.25).abs() < 1e-15);
}

#[test]
fn non_scalar_loss_rejected() {
    let mut g = Graph::new();
    let x = g.leaf_grad(NdArray::from_vec(vec![1.0, 2.0]));
    let y = g.neg(x);
    assert!(matches!(
        g.backward(y),
        Err(Error::NonScalarLoss { .. })
    ));
}

#[test]
fn second_backward_fails() {
    let mut g = Graph::new();
    let x = g.leaf_grad(NdArray::from_vec(vec![1.0]));
    let loss = g.sum(x);
    g.backward(loss).unwrap();
    assert!(matches!(g.backward(loss), Err(Error::GraphConsumed)));
}

#[test]
fn backward_applies_one_rule_per_recorded_op() {
    let mut g = Graph::new();
    let x = g.leaf_grad(NdArray::from_vec(vec![0.3, -0.7]));
    let a = g.exp(x);
    let b = g.mul(a, a).unwrap();
    let c = g.add_scalar(b, 1.0);
    let d = g.log(c);
    let loss = g.sum(d);
    let _ = loss;
    assert_eq!(g.op_count(), 5);
    g.backward(loss).unwrap();
    assert_eq!(g.backward_applications(), 5);
}

#[test]
fn three_layer_composition_matches_finite_differences() {
    // An arbitrary smooth 3-stage composition.
    let f = |g: &mut Graph, ts: &[Tensor]| -> crate::Result<Tensor> {
        let x = ts[0];
        let h1 = g.tanh(x);
        let h1 = g.mul_scalar(h1, 1.7);
        let h2 = g.sigmoid(h1);
        let h2b = g.mul(h2, h1)?;
        let h3 = g.exp(h2b);
        let s = g.sum(h3);
        let sq = g.mul(s, s)?;
        Ok(sq)
    };
    for seed in 0..5 {
        let x = randn(seed, "fd3layer", 12);
        let report = grad_check_multi(&f, &[x], 1e-5, 1e-6).unwrap();
        assert!(
            report.passed(),
            "seed {seed}: max rel err {}",
            report.max_rel_err
        );
    }
}

#[test]
fn grad_check_sum_is_exact() {
    // With integer inputs and a power-of-two step both routes evaluate
    // without rounding, so backward and central difference are exactly 1.
    let f = |g: &mut Graph, t: Tensor| -> crate::Result<Tensor> { Ok(g.sum(t)) };
    let x = NdArray::from_vec((1..=8).map(|v| v as f64).collect());
    let report = grad_check(&f, &x, 0.5, 1e-12).unwrap();
    assert_eq!(report.max_rel_err, 0.0);
}

#[test]
fn registered_ops_match_finite_differences_20_seeds() {
    // Composite touching every elementwise/reduce op with a smooth loss.
    let f = |g: &mut Graph, ts: &[Tensor]| -> crate::Result<Tensor> {
        let (x, y) = (ts[0], ts[1]);
        let a = g.add(x, y)?;
        let s = g.sub(x, y)?;
        let m = g.mul(a, s)?;
        let e = g.exp(s);
        let d = g.div(m, e)?;
        let c = g.clamp(d, -10.0, 10.0);
        let n = g.neg(c);
        let sq = g.mul(n, n)?;
        let plus = g.add_scalar(sq, 1.0);
        let l = g.log(plus);
        let lr = g.leaky_relu(l, 0.01);
        let t = g.tanh(lr);
        let sg = g.sigmoid(t);
        let mx = g.max(sg);
        let mn = g.mean(sg);
        let su = g.sum(sg);
        let mm = g.mul(mx, mn)?;
        g.add(mm, su)
    };
    for seed in 0..20 {
        let x = randn(seed, "ops-x", 9);
        let y = randn(seed, "ops-y", 9);
        let report = grad_check_multi(&f, &[x, y], 1e-5, 1e-5).unwrap();
        assert!(
            report.passed(),
            "seed {seed}: max rel err {}",
            report.max_rel_err
        );
    }
}

#[test]
fn forward_is_deterministic() {
    let run = || {
        let mut g = Graph::new();
        let x = g.leaf(randn(42, "determinism", 32));
        let e = g.exp(x);
        let t = g.tanh(e);
        let s = g.sum(t);
        g.data(s).item()
    };
    let a = run();
    let b = run();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn concat_and_narrow_roundtrip_with_gradients() {
    let f = |g: &mut Graph, ts: &[Tensor]| -> crate::Result<Tensor> {
        let joined = g.concat(0, &[ts[0], ts[1]])?;
        let left = g.narrow(joined, 0, 0, 2)?;
        let right = g.narrow(joined, 0, 2, 3)?;
        let l = g.sum(left);
        let r = g.sum(right);
        let rr = g.mul(r, r)?;
        g.add(l, rr)
    };
    let a = randn(3, "cat-a", 2);
    let b = randn(3, "cat-b", 3);
    let report = grad_check_multi(&f, &[a, b], 1e-5, 1e-6).unwrap();
    assert!(report.passed(), "max rel err {}", report.max_rel_err);
}

#[test]
fn session_caches_parameter_leaves_and_accumulates_shared_gradients() {
    let mut params = ParamSet::new();
    let w = params.add("w", NdArray::from_vec(vec![1.5]));
    let mut sess = Session::new(&params);
    let w1 = sess.param(w);
    let w2 = sess.param(w);
    assert_eq!(w1, w2);
    // loss = w*c1 + w*c2 -> dw = c1 + c2
    let c1 = sess.input(NdArray::from_vec(vec![2.0]));
    let c2 = sess.input(NdArray::from_vec(vec![5.0]));
    let a = sess.mul(w1, c1).unwrap();
    let b = sess.mul(w2, c2).unwrap();
    let s = sess.add(a, b).unwrap();
    let loss = sess.sum(s);
    sess.backward(loss).unwrap();
    assert_eq!(sess.param_grad(w).unwrap(), &[7.0]);
}
