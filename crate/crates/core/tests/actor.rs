mod common;

use common::*;
use proptest::prelude::*;
use strix::actor::{train_distributed, DistEngine, MapReduceEngine, ParallelNdarray};
use strix::algodiff::{self, AdValue};
use strix::models::{input, linear, Activation, Network};
use strix::optim::{self, Batch, LearningRate, Loss, OptimParams, Stopping};

proptest! {
    #[test]
    fn lifted_ops_equal_sequential(
        rows in 1usize..40,
        cols in 1usize..5,
        seed in 0u64..1000,
        workers in 1usize..=8,
    ) {
        let x = centered(&[rows, cols], seed);
        let p = ParallelNdarray::new(MapReduceEngine::new(workers).unwrap());
        prop_assert!(p.map(|v: f64| -v, &x).unwrap().bitwise_eq(&x.neg()));
        prop_assert!(p.relu(&x).unwrap().bitwise_eq(&x.relu()));
        prop_assert!(p.sin(&x).unwrap().bitwise_eq(&x.sin()));
        prop_assert_eq!(p.sum(&x).unwrap().to_bits(), x.sum().to_bits());
        prop_assert_eq!(p.min(&x).unwrap().to_bits(), x.min().to_bits());
        prop_assert_eq!(p.max(&x).unwrap().to_bits(), x.max().to_bits());
        let f = |a: f64, v: f64| a * 0.5 + v.cos();
        prop_assert_eq!(p.fold(0.25, f, &x).unwrap().to_bits(), x.fold(0.25, f).to_bits());
        let e = p.engine();
        prop_assert!(e.mr_collect(&e.split(&x).unwrap()).unwrap().bitwise_eq(&x));
    }
}

#[test]
fn lifted_ops_work_on_f32() {
    let x = strix::Ndarray::<f32>::uniform(&[17, 3], 5).unwrap();
    for w in 1..=8 {
        let p = ParallelNdarray::new(MapReduceEngine::new(w).unwrap());
        assert_eq!(p.sum(&x).unwrap().to_bits(), x.sum().to_bits());
        assert!(p.relu(&x).unwrap().bitwise_eq(&x.relu()));
    }
}

fn regression_fixture() -> (Arr, Arr) {
    let x = centered(&[64, 3], 50);
    let w = arr(&[3, 1], &[1.0, -2.0, 0.5]);
    let y = x.matmul(&w).unwrap().add(&noise(&[64, 1], 0.1, 51)).unwrap();
    (x, y)
}

fn quad(th: &[AdValue], x: &Arr, y: &Arr) -> strix::Result<AdValue> {
    let p = AdValue::array(x.clone()).matmul(&th[0])?;
    optim::loss_eval(Loss::Quadratic, &p, &AdValue::array(y.clone()))
}

#[test]
fn shard_mean_gradient_equals_full_batch() {
    let (x, y) = regression_fixture();
    let theta = vec![centered(&[3, 1], 52)];
    let (_, full) = algodiff::value_and_grads(|th| quad(th, &x, &y), &theta).unwrap();
    for k in [2, 4, 8] {
        let e = MapReduceEngine::new(k).unwrap();
        let (xs, ys) = (e.split(&x).unwrap(), e.split(&y).unwrap());
        let mut mean = Arr::zeros(&[3, 1]).unwrap();
        for (xi, yi) in xs.iter().zip(&ys) {
            let (_, g) = algodiff::value_and_grads(|th| quad(th, xi, yi), &theta).unwrap();
            mean = mean.add(&g[0]).unwrap();
        }
        let mean = mean.map(|v| v / k as f64);
        assert!(max_abs_diff(&mean, &full[0]) <= 1e-12);
    }
}

fn net_params() -> OptimParams {
    OptimParams {
        batch: Batch::Full,
        loss: Loss::CrossEntropy,
        learning_rate: LearningRate::Const(0.5),
        stopping: Stopping::ConstThreshold(0.0),
        epochs: 200.0,
        ..Default::default()
    }
}

fn classification() -> (Network, Arr, Arr) {
    let net = Network::new(&[input(2), linear(5, Activation::Tanh), linear(2, Activation::Softmax)], 8).unwrap();
    let x = centered(&[48, 2], 60);
    let mut y = Vec::new();
    for r in 0..48 {
        let inside = x.data()[2 * r].powi(2) + x.data()[2 * r + 1].powi(2) < 0.5;
        y.extend_from_slice(if inside { &[1.0, 0.0] } else { &[0.0, 1.0] });
    }
    (net, x, arr(&[48, 2], &y))
}

#[test]
fn one_worker_is_bitwise_sequential() {
    let (net, x, y) = classification();
    let p = net_params();
    let f = |th: &[AdValue], xb: &Arr, yb: &Arr| net.loss_with(p.loss, th, xb, yb);
    let seq = optim::minimize(&p, f, net.params().to_vec(), &net.penalised(), &x, &y).unwrap();
    for engine in [DistEngine::ParamServer, DistEngine::MapReduce] {
        let d = train_distributed(engine, 1, &p, f, net.params().to_vec(), &net.penalised(), &x, &y).unwrap();
        assert_eq!(d, seq);
    }
}

#[test]
fn four_workers_track_sequential_history() {
    let (net, x, y) = classification();
    let p = net_params();
    let f = |th: &[AdValue], xb: &Arr, yb: &Arr| net.loss_with(p.loss, th, xb, yb);
    let seq = optim::minimize(&p, f, net.params().to_vec(), &net.penalised(), &x, &y).unwrap();
    for engine in [DistEngine::ParamServer, DistEngine::MapReduce] {
        let d = train_distributed(engine, 4, &p, f, net.params().to_vec(), &net.penalised(), &x, &y).unwrap();
        assert_eq!(d.history.len(), seq.history.len());
        let worst = d
            .history
            .iter()
            .zip(&seq.history)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{engine:?}: {worst:e}");
        let again = train_distributed(engine, 4, &p, f, net.params().to_vec(), &net.penalised(), &x, &y).unwrap();
        assert_eq!(again, d);
    }
}

#[test]
fn mini_batches_and_bad_configs() {
    let (x, y) = regression_fixture();
    let p = OptimParams {
        batch: Batch::Mini(16),
        learning_rate: LearningRate::Const(0.1),
        epochs: 5.0,
        seed: 3,
        ..Default::default()
    };
    let theta = vec![Arr::zeros(&[3, 1]).unwrap()];
    let seq = optim::minimize(&p, quad, theta.clone(), &[true], &x, &y).unwrap();
    let one = train_distributed(DistEngine::ParamServer, 1, &p, quad, theta.clone(), &[true], &x, &y).unwrap();
    assert_eq!(one, seq);
    let stoch = OptimParams { batch: Batch::Stochastic, ..p };
    assert!(train_distributed(DistEngine::ParamServer, 2, &stoch, quad, theta.clone(), &[true], &x, &y).is_err());
    let tiny = OptimParams { batch: Batch::Mini(2), ..p };
    assert!(train_distributed(DistEngine::MapReduce, 4, &tiny, quad, theta, &[true], &x, &y).is_err());
}
