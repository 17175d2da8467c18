use ndarray::{array, Array2};
use proptest::prelude::*;

use super::*;
use crate::seed;

fn single(weights: Array2<f64>, bias: Vec<f64>, activation: Activation) -> Network {
    Network::new(vec![DenseLayer {
        weights,
        bias: bias.into(),
        activation,
    }])
    .unwrap()
}

#[test]
fn zero_tanh_network_outputs_zero() {
    let net = Network::new(vec![
        DenseLayer::zeros(3, 4, Activation::Tanh),
        DenseLayer::zeros(4, 2, Activation::Tanh),
    ])
    .unwrap();
    assert_eq!(net.forward_one(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn identity_linear_layer() {
    let net = single(Array2::eye(3), vec![0.0; 3], Activation::Linear);
    assert_eq!(net.forward_one(&[0.5, -1.5, 2.0]).unwrap(), vec![0.5, -1.5, 2.0]);
}

#[test]
fn hand_matrix_example() {
    let net = single(array![[1.0, 2.0], [3.0, 4.0]], vec![0.5, -0.5], Activation::Linear);
    assert_eq!(net.forward_one(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
}

#[test]
fn forward_rejects_wrong_width() {
    let net = single(Array2::eye(2), vec![0.0; 2], Activation::Linear);
    assert!(net.forward_one(&[1.0]).is_err());
}

#[test]
fn softmax_examples() {
    assert_eq!(softmax(&[0.0, 0.0, 0.0]), vec![1.0 / 3.0; 3]);
    let p = softmax(&[1f64.ln(), 2f64.ln(), 3f64.ln()]);
    for (a, b) in p.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
        assert!((a - b).abs() < 1e-15);
    }
    let big = softmax(&[1000.0, 1000.0]);
    assert_eq!(big, vec![0.5, 0.5]);
}

proptest! {
    #[test]
    fn softmax_is_a_shift_invariant_distribution(v in proptest::collection::vec(-30.0f64..30.0, 1..12), c in -50.0f64..50.0) {
        let p = softmax(&v);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        for (a, b) in p.iter().zip(softmax(&shifted)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_output_gradient_gives_zero_gradients() {
    let net = Network::init(&[5, 4, 3], Activation::Tanh, Activation::Linear, &mut seed::rng(1)).unwrap();
    let x = Array2::from_shape_fn((2, 5), |(i, j)| (i + j) as f64 * 0.1);
    let tape = net.forward(x.view()).unwrap();
    let (g, gx) = net.backward(&tape, &Array2::zeros((2, 3))).unwrap();
    assert!(g.flat().iter().all(|&v| v == 0.0));
    assert!(gx.iter().all(|&v| v == 0.0));
}

#[test]
fn linear_layer_squared_loss_gradient() {
    // L = 1/2 |y - t|^2 with y = W x + b: dL/dW = (y - t) x^T, dL/db = y - t
    let net = single(array![[0.3, -0.2, 0.1], [0.5, 0.4, -0.6]], vec![0.1, -0.1], Activation::Linear);
    let x = array![[1.0, 2.0, -1.0]];
    let t = array![[0.2, 0.7]];
    let tape = net.forward(x.view()).unwrap();
    let resid = tape.output() - &t;
    let (g, _) = net.backward(&tape, &resid).unwrap();
    let expected_w = resid.t().dot(&x);
    assert_eq!(g.layers[0].weights, expected_w);
    assert_eq!(g.layers[0].bias.to_vec(), resid.row(0).to_vec());
}

/// Central-difference gradient of `loss` over the network's parameters.
fn numeric_gradient(net: &Network, h: f64, loss: &dyn Fn(&Network) -> f64) -> Vec<f64> {
    let base = net.params_flat();
    let mut probe = net.clone();
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_params_flat(&p).unwrap();
            let up = loss(&probe);
            p[i] = base[i] - h;
            probe.set_params_flat(&p).unwrap();
            let down = loss(&probe);
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn assert_gradients_close(analytic: &[f64], numeric: &[f64]) {
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        if a.abs() < 1e-8 && n.abs() < 1e-8 {
            assert!((a - n).abs() < 1e-7, "param {i}: {a} vs {n}");
        } else {
            let rel = (a - n).abs() / a.abs().max(n.abs());
            assert!(rel < 1e-4, "param {i}: analytic {a}, numeric {n}, rel {rel}");
        }
    }
}

#[test]
fn tanh_network_matches_finite_differences() {
    let net = Network::init(&[8, 6, 4], Activation::Tanh, Activation::Tanh, &mut seed::rng(3)).unwrap();
    let mut rng = seed::rng(4);
    let x = Array2::from_shape_simple_fn((3, 8), || rand::Rng::random_range(&mut rng, -1.0..1.0));
    let t = Array2::from_shape_simple_fn((3, 4), || rand::Rng::random_range(&mut rng, -1.0..1.0));
    let loss = |n: &Network| {
        let y = n.predict(x.view()).unwrap();
        0.5 * (&y - &t).mapv(|d| d * d).sum()
    };
    let tape = net.forward(x.view()).unwrap();
    let (g, _) = net.backward(&tape, &(tape.output() - &t)).unwrap();
    assert_gradients_close(&g.flat(), &numeric_gradient(&net, 1e-5, &loss));
}

#[test]
fn mixed_softmax_head_matches_finite_differences() {
    // blocks: softmax(3), linear(1), softmax(2); loss: cross-entropy + squared error
    let head = Activation::SoftmaxBlocks {
        segments: vec![
            Segment { width: 3, softmax: true },
            Segment { width: 1, softmax: false },
            Segment { width: 2, softmax: true },
        ],
    };
    let net = Network::init(&[5, 7, 6], Activation::Tanh, head, &mut seed::rng(11)).unwrap();
    let x = array![[0.1, -0.4, 0.9, 0.0, 0.3], [-0.7, 0.2, 0.5, 1.0, -0.1]];
    let target = array![[0.0, 1.0, 0.0, 0.4, 1.0, 0.0], [1.0, 0.0, 0.0, -0.8, 0.0, 1.0]];
    let is_numeric = |j: usize| j == 3;
    let loss = |n: &Network| {
        let y = n.predict(x.view()).unwrap();
        let mut l = 0.0;
        for ((i, j), &yv) in y.indexed_iter() {
            let t = target[[i, j]];
            l += if is_numeric(j) { 0.5 * (t - yv).powi(2) } else { -t * yv.ln() };
        }
        l
    };
    let tape = net.forward(x.view()).unwrap();
    let y = tape.output();
    let grad = Array2::from_shape_fn(y.dim(), |(i, j)| {
        let t = target[[i, j]];
        if is_numeric(j) {
            y[[i, j]] - t
        } else {
            -t / y[[i, j]]
        }
    });
    let (g, _) = net.backward(&tape, &grad).unwrap();
    assert_gradients_close(&g.flat(), &numeric_gradient(&net, 1e-5, &loss));
}

#[test]
fn rmsprop_zero_gradient_decays_accumulator() {
    let mut net = single(array![[1.0, 2.0]], vec![0.5], Activation::Linear);
    let before = net.clone();
    let mut opt = RmsProp::new(&net, RmsPropConfig::default());
    let mut g = Gradients::zeros_like(&net);
    g.layers[0].weights[[0, 0]] = 2.0;
    opt.step(&mut net, &g).unwrap();
    let a0 = opt.accumulators().layers[0].weights[[0, 0]];
    let after_first = net.clone();
    let zero = Gradients::zeros_like(&net);
    opt.step(&mut net, &zero).unwrap();
    assert_eq!(net, after_first);
    assert_ne!(after_first, before);
    assert!((opt.accumulators().layers[0].weights[[0, 0]] - 0.9 * a0).abs() < 1e-15);
}

#[test]
fn rmsprop_first_step_is_normalized() {
    let cfg = RmsPropConfig::default();
    assert_eq!((cfg.learning_rate, cfg.rho, cfg.epsilon), (0.001, 0.9, 1e-8));
    for g in [3.0, -0.5, 0.1] {
        let mut net = single(array![[0.0]], vec![0.0], Activation::Linear);
        let mut opt = RmsProp::new(&net, cfg);
        let mut grads = Gradients::zeros_like(&net);
        grads.layers[0].weights[[0, 0]] = g;
        opt.step(&mut net, &grads).unwrap();
        let expected = -cfg.learning_rate * g / ((1.0 - cfg.rho) * g * g + cfg.epsilon).sqrt();
        assert!((net.layers[0].weights[[0, 0]] - expected).abs() < 1e-15);
        let approx = -cfg.learning_rate * g.signum() / (1.0 - cfg.rho).sqrt();
        assert!((expected - approx).abs() / approx.abs() < 1e-4);
    }
}

#[test]
fn rmsprop_rejects_shape_mismatch() {
    let mut net = single(array![[1.0, 2.0]], vec![0.5], Activation::Linear);
    let other = single(array![[1.0], [2.0]], vec![0.5, 0.5], Activation::Linear);
    let mut opt = RmsProp::new(&net, RmsPropConfig::default());
    assert!(opt.step(&mut net, &Gradients::zeros_like(&other)).is_err());
}

proptest! {
    #[test]
    fn rmsprop_accumulator_nonnegative(gs in proptest::collection::vec(-1e3f64..1e3, 1..20)) {
        let mut net = single(array![[0.0]], vec![0.0], Activation::Linear);
        let mut opt = RmsProp::new(&net, RmsPropConfig::default());
        for g in gs {
            let mut grads = Gradients::zeros_like(&net);
            grads.layers[0].weights[[0, 0]] = g;
            grads.layers[0].bias[0] = -g;
            opt.step(&mut net, &grads).unwrap();
            prop_assert!(opt.accumulators().flat().iter().all(|&a| a >= 0.0));
        }
    }
}

#[test]
fn init_is_seeded_with_zero_bias() {
    let a = Network::init(&[10, 8, 3], Activation::Tanh, Activation::Linear, &mut seed::rng(42)).unwrap();
    let b = Network::init(&[10, 8, 3], Activation::Tanh, Activation::Linear, &mut seed::rng(42)).unwrap();
    let c = Network::init(&[10, 8, 3], Activation::Tanh, Activation::Linear, &mut seed::rng(43)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.layers.iter().all(|l| l.bias.iter().all(|&x| x == 0.0)));
}

#[test]
fn init_weight_variance_matches_glorot() {
    let net = Network::init(&[200, 150], Activation::Tanh, Activation::Linear, &mut seed::rng(5)).unwrap();
    let w = &net.layers[0].weights;
    let n = w.len() as f64;
    let mean = w.sum() / n;
    let var = w.mapv(|x| (x - mean).powi(2)).sum() / (n - 1.0);
    let expected = 2.0 / 350.0;
    assert!((var - expected).abs() / expected < 0.03, "var {var} vs {expected}");
}

#[test]
fn network_json_round_trip() {
    let head = Activation::SoftmaxBlocks {
        segments: vec![Segment { width: 2, softmax: true }, Segment { width: 1, softmax: false }],
    };
    let net = Network::init(&[4, 5, 3], Activation::Tanh, head, &mut seed::rng(8)).unwrap();
    let text = serde_json::to_string(&net).unwrap();
    let back: Network = serde_json::from_str(&text).unwrap();
    assert_eq!(back, net);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["layers"][0]["in_dim"], 4);
    assert_eq!(v["layers"][1]["activation"]["type"], "softmax_blocks");
}
