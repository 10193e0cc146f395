use lop_tensor::{
    gradient_check, gradient_check_params, BatchNormState, BnMode, Graph, ParamStore, Tensor, Var,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-6;
const TOL: f64 = 1e-4;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Fixed random projection so that non-scalar outputs become a scalar loss
/// with a non-trivial upstream gradient.
fn project(g: &mut Graph<f64>, v: Var) -> lop_tensor::Result<Var> {
    let n = g.value(v).numel();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7919 % 23) as f64 - 11.0) / 7.0).collect();
    g.weighted_sum(v, &w)
}

fn check<F>(name: &str, shapes: &[&[usize]], f: F)
where
    F: Fn(&mut Graph<f64>, &[Var]) -> lop_tensor::Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(name.len() as u64 * 31 + 5);
    let inputs: Vec<_> = shapes.iter().map(|s| rand_tensor(&mut rng, s)).collect();
    let report = gradient_check(
        |g, v| {
            let out = f(g, v)?;
            project(g, out)
        },
        &inputs,
        EPS,
    )
    .unwrap();
    assert!(report.checked > 0);
    assert!(
        report.max_rel_error < TOL,
        "{name}: relative error {} at {:?}",
        report.max_rel_error,
        report.worst
    );
}

#[test]
fn linear_and_matmul() {
    check("linear", &[&[2, 3, 4], &[4, 5], &[5]], |g, v| g.linear(v[0], v[1], Some(v[2])));
    check("linear-nobias", &[&[3, 4], &[4, 2]], |g, v| g.linear(v[0], v[1], None));
    check("matmul", &[&[3, 4], &[4, 2]], |g, v| g.matmul(v[0], v[1]));
}

#[test]
fn elementwise() {
    check("add", &[&[2, 3], &[2, 3]], |g, v| g.add(v[0], v[1]));
    check("sub", &[&[2, 3], &[2, 3]], |g, v| g.sub(v[0], v[1]));
    check("mul", &[&[2, 3], &[2, 3]], |g, v| g.mul(v[0], v[1]));
    check("scale", &[&[4]], |g, v| g.scale(v[0], -2.5));
    check("sigmoid", &[&[2, 5]], |g, v| g.sigmoid(v[0]));
    check("tanh", &[&[2, 5]], |g, v| g.tanh(v[0]));
    // relu is checked away from the kink
    let mut g = Graph::<f64>::new();
    let x = g.tracked(Tensor::new(&[4], vec![-1.0, 0.5, 2.0, -0.3]).unwrap());
    let y = g.relu(x).unwrap();
    let s = g.sum_all(y).unwrap();
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.get(x).unwrap(), &[0.0, 1.0, 1.0, 0.0]);
}

#[test]
fn reductions_and_shape_ops() {
    check("softmax0", &[&[3, 4]], |g, v| g.softmax(v[0], 0, None));
    check("softmax1", &[&[3, 4]], |g, v| g.softmax(v[0], 1, None));
    let mask = [true, false, true, true, false, true];
    check("softmax-masked", &[&[2, 3]], |g, v| g.softmax(v[0], 1, Some(&mask)));
    check("concat", &[&[2, 3], &[2, 1]], |g, v| g.concat(&[v[0], v[1]], 1));
    check("concat0", &[&[1, 3], &[2, 3]], |g, v| g.concat(&[v[0], v[1]], 0));
    check("mean", &[&[2, 3, 4]], |g, v| g.mean(v[0], 1));
    check("sum_all", &[&[2, 3]], |g, v| g.sum_all(v[0]));
    check("reshape", &[&[2, 3]], |g, v| g.reshape(v[0], &[3, 2]));
}

#[test]
fn fused_graph_ops() {
    check("pair_sum", &[&[2, 3, 2], &[2, 3, 2], &[2, 3, 3, 2]], |g, v| {
        g.pair_sum(Some(v[2]), v[0], v[1])
    });
    check("gated", &[&[2, 3, 3, 2], &[2, 3, 2]], |g, v| g.gated_neighbor_sum(v[0], v[1]));
    let w = [0.5, 0.0, 0.5, 1.0, 0.0, 0.0];
    check("weighted_node_sum", &[&[2, 3, 4]], |g, v| g.weighted_node_sum(v[0], &w));
    check("attn_scores", &[&[2, 4], &[2, 3, 4]], |g, v| g.attn_scores(v[0], v[1], 2));
    check("attn_combine", &[&[2, 2, 3], &[2, 3, 4]], |g, v| g.attn_combine(v[0], v[1], 2));
    let mask = [true, true, false, false, true, true];
    check("select_log_prob", &[&[2, 3]], |g, v| {
        let lp = g.select_log_prob(v[0], &mask, &[1, 2])?;
        Ok(lp)
    });
}

#[test]
fn batch_norm_gradients() {
    for mode in [BnMode::Train, BnMode::Infer] {
        let name = if mode == BnMode::Train { "bn-train" } else { "bn-infer" };
        check(name, &[&[4, 3, 2], &[2], &[2]], |g, v| {
            let mut st = BatchNormState::<f64>::new(2);
            st.running_mean = vec![0.3, -0.2];
            st.running_var = vec![0.5, 2.0];
            g.batch_norm(v[0], v[1], v[2], &mut st, mode)
        });
    }
}

#[test]
fn group_batch_norm_gradients() {
    check("group-bn", &[&[3, 4, 2], &[2], &[2]], |g, v| g.group_batch_norm(v[0], v[1], v[2], 3, 1e-5));
    check("group-bn-edges", &[&[2, 3, 3, 2], &[2], &[2]], |g, v| g.group_batch_norm(v[0], v[1], v[2], 2, 1e-5));
}

#[test]
fn group_batch_norm_normalizes_each_group() {
    let mut g = Graph::<f64>::new();
    let x = g.constant(Tensor::new(&[2, 3, 1], vec![1.0, 2.0, 3.0, 100.0, 300.0, 500.0]).unwrap());
    let gamma = g.constant(Tensor::full(&[1], 1.0));
    let beta = g.constant(Tensor::zeros(&[1]));
    let y = g.group_batch_norm(x, gamma, beta, 2, 0.0).unwrap();
    let v = g.value(y).data();
    let expect = (1.5f64).sqrt();
    for k in 0..2 {
        assert!((v[3 * k] + expect).abs() < 1e-12);
        assert!(v[3 * k + 1].abs() < 1e-12);
        assert!((v[3 * k + 2] - expect).abs() < 1e-12);
    }
    let one = g.constant(Tensor::zeros(&[2, 1, 1]));
    assert!(g.group_batch_norm(one, gamma, beta, 2, 1e-5).is_err());
}

#[test]
fn composite_through_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::<f64>::new();
    let w1 = store.add_uniform("w1", &[3, 4], 0.5, &mut || rng.gen::<f64>()).unwrap();
    let w2 = store.add_uniform("w2", &[4, 1], 0.5, &mut || rng.gen::<f64>()).unwrap();
    let x = rand_tensor(&mut rng, &[5, 3]);
    let report = gradient_check_params(
        &store,
        |g, s| {
            let xv = g.constant(x.clone());
            let a = g.param(s, w1);
            let b = g.param(s, w2);
            let h = g.linear(xv, a, None)?;
            let h = g.tanh(h)?;
            let o = g.linear(h, b, None)?;
            let o = g.mul(o, o)?;
            g.sum_all(o)
        },
        EPS,
        usize::MAX,
    )
    .unwrap();
    assert_eq!(report.checked, 16);
    assert!(report.max_rel_error < TOL, "{report:?}");
}

#[test]
fn softmax_masked_entries_are_exact_zero() {
    let mut g = Graph::<f32>::new();
    let x = g.constant(Tensor::new(&[1, 4], vec![3.0, 100.0, -2.0, 0.5]).unwrap());
    let y = g.softmax(x, 1, Some(&[true, false, true, true])).unwrap();
    let p = g.value(y).data();
    assert_eq!(p[1], 0.0);
    assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    assert!(g.softmax(x, 1, Some(&[false; 4])).is_err());
}

#[test]
fn batch_norm_train_statistics() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = Tensor::new(&[64, 3], (0..192).map(|i| rng.gen_range(-5.0..5.0) + i as f64 % 3.0 * 10.0).collect()).unwrap();
    let mut g = Graph::<f64>::new();
    let xv = g.constant(x);
    let gamma = g.constant(Tensor::full(&[3], 1.0));
    let beta = g.constant(Tensor::zeros(&[3]));
    let mut st = BatchNormState::new(3);
    let y = g.batch_norm(xv, gamma, beta, &mut st, BnMode::Train).unwrap();
    let data = g.value(y).data();
    for c in 0..3 {
        let col: Vec<f64> = data.iter().skip(c).step_by(3).copied().collect();
        let mean = col.iter().sum::<f64>() / 64.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 64.0;
        assert!(mean.abs() < 1e-6);
        // eps in the denominator shrinks the variance slightly below 1
        assert!((var - 1.0).abs() < 1e-5, "var {var}");
    }
    // running stats moved away from their initial values
    assert!(st.running_mean.iter().all(|&m| m != 0.0));

    let mut g = Graph::<f64>::new();
    let one = g.constant(Tensor::new(&[1, 3], vec![1.0, 2.0, 3.0]).unwrap());
    let gm = g.constant(Tensor::full(&[3], 1.0));
    let bt = g.constant(Tensor::zeros(&[3]));
    assert!(g.batch_norm(one, gm, bt, &mut st, BnMode::Train).is_err());
    assert!(g.batch_norm(one, gm, bt, &mut st, BnMode::Infer).is_ok());
}

#[test]
fn backward_requires_single_element_root() {
    let mut g = Graph::<f64>::new();
    let x = g.tracked(Tensor::zeros(&[2, 2]));
    assert!(g.backward(x).is_err());
}

#[test]
fn shape_mismatches_are_errors() {
    let mut g = Graph::<f32>::new();
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[3, 2]));
    assert!(g.add(a, b).is_err());
    assert!(g.linear(a, a, None).is_err());
    assert!(g.matmul(a, a).is_err());
    assert!(g.concat(&[a, b], 0).is_err());
}

#[test]
fn overflow_is_reported() {
    let mut g = Graph::<f32>::new();
    let a = g.constant(Tensor::full(&[2], 3e38));
    assert!(g.add(a, a).is_err());
}

#[test]
fn inference_graph_tracks_nothing() {
    let mut store = ParamStore::<f32>::new();
    let id = store.add("w", Tensor::full(&[2], 1.0)).unwrap();
    let mut g = Graph::inference();
    let w = g.param(&store, id);
    let s = g.sum_all(w).unwrap();
    assert!(!g.requires_grad(s));
    let grads = g.backward(s).unwrap();
    assert!(grads.get(w).is_none());
}
