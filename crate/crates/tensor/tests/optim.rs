use lop_tensor::{clip_grad_norm, Adam, Checkpoint, BatchNormState, Graph, ParamStore, Tensor};

#[test]
fn adam_minimizes_quadratic() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", Tensor::full(&[1], 1.0)).unwrap();
    let adam = Adam::new(0.05).unwrap();
    let mut reached = None;
    for step in 1..=500 {
        let mut g = Graph::new();
        let w = g.param(&store, id);
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum_all(sq).unwrap();
        g.backward_into(loss, &mut store).unwrap();
        adam.step(&mut store);
        if store.get(id).value.item().abs() < 1e-3 && reached.is_none() {
            reached = Some(step);
        }
    }
    assert!(reached.is_some(), "final w = {}", store.get(id).value.item());
}

#[test]
fn adam_zero_gradient_is_noop_and_steps_are_bounded() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", Tensor::new(&[3], vec![0.1, -2.0, 5.0]).unwrap()).unwrap();
    let adam = Adam::new(0.01).unwrap();
    let before = store.get(id).value.clone();
    adam.step(&mut store);
    assert_eq!(store.get(id).value, before);

    store.get_mut(id).grad = vec![1e6, -1e-6, 3.0];
    adam.step(&mut store);
    for (a, b) in store.get(id).value.data().iter().zip(before.data()) {
        assert!((a - b).abs() <= 0.01 * 1.0001);
    }
    assert!(store.get(id).grad.iter().all(|&g| g == 0.0));
    assert!(Adam::new(0.0).is_err());
}

#[test]
fn clipping_caps_global_norm() {
    let mut store = ParamStore::<f64>::new();
    let a = store.add("a", Tensor::zeros(&[2])).unwrap();
    let b = store.add("b", Tensor::zeros(&[1])).unwrap();
    store.get_mut(a).grad = vec![3.0, 0.0];
    store.get_mut(b).grad = vec![4.0];
    let norm = clip_grad_norm(&mut store, 1.0);
    assert_eq!(norm, 5.0);
    assert!((store.grad_norm() - 1.0).abs() < 1e-12);
    assert!((store.get(a).grad[0] - 0.6).abs() < 1e-12);
    assert_eq!(clip_grad_norm(&mut store, 10.0), store.grad_norm());
}

fn sample_store() -> ParamStore<f32> {
    let mut s = ParamStore::new();
    let a = s.add("layer.w", Tensor::new(&[2, 2], vec![1.0, -2.5, 3.25, 1e-7]).unwrap()).unwrap();
    s.add("layer.b", Tensor::new(&[2], vec![0.5, 0.25]).unwrap()).unwrap();
    s.get_mut(a).grad = vec![1.0, 1.0, 1.0, 1.0];
    Adam::new(0.1).unwrap().step(&mut s);
    s
}

#[test]
fn checkpoint_round_trip() {
    let store = sample_store();
    let mut bn = BatchNormState::<f32>::new(2);
    bn.running_mean = vec![0.1, 0.2];
    let mut ck = Checkpoint::new(serde_json::json!({"d": 32, "name": "x"}));
    ck.put_params(&store, true).unwrap();
    ck.put_batch_norm("bn0", &bn).unwrap();
    ck.counters.insert("epoch".into(), 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);

    let mut fresh = ParamStore::<f32>::new();
    fresh.add("layer.w", Tensor::zeros(&[2, 2])).unwrap();
    fresh.add("layer.b", Tensor::zeros(&[2])).unwrap();
    back.load_params(&mut fresh).unwrap();
    for (p, q) in fresh.iter().zip(store.iter()) {
        assert_eq!(p.value, q.value);
        assert_eq!(p.first_moment, q.first_moment);
        assert_eq!(p.second_moment, q.second_moment);
        assert_eq!(p.step, q.step);
    }
    let mut bn2 = BatchNormState::<f32>::new(2);
    back.load_batch_norm("bn0", &mut bn2).unwrap();
    assert_eq!(bn2, bn);
    assert_eq!(back.meta["d"], 32);
}

#[test]
fn checkpoint_rejects_damage() {
    let mut ck = Checkpoint::new(serde_json::json!({}));
    ck.put_params(&sample_store(), false).unwrap();
    let bytes = ck.to_bytes().unwrap();
    for cut in [0, 5, 19, 30, bytes.len() - 1] {
        assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut wrong_version = bytes.clone();
    wrong_version[8] = 9;
    let err = Checkpoint::from_bytes(&wrong_version).unwrap_err().to_string();
    assert!(err.contains("version"), "{err}");

    let mut other = ParamStore::<f32>::new();
    other.add("layer.w", Tensor::zeros(&[3, 2])).unwrap();
    assert!(ck.load_params(&mut other).is_err());
    let mut missing = ParamStore::<f32>::new();
    missing.add("other", Tensor::zeros(&[1])).unwrap();
    assert!(ck.load_params(&mut missing).is_err());
}
