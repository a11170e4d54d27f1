//! Regression models and feedforward networks, all trained through
//! [`optim::minimize`].

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::algodiff::{self, AdValue, Arr};
use crate::error::{Error, Result};
use crate::ndarray::text::{read_array, write_array, LineReader};
use crate::optim::{
    self, Batch, Gradient, LearningRate, Loss, Minimized, OptimParams, Regularisation, Stopping,
};

fn check_rows(x: &Arr, y: &Arr) -> Result<()> {
    if x.rank() != 2 || y.rank() != 2 {
        return Err(Error::DimMismatch("x and y must be matrices".into()));
    }
    if x.shape()[0] != y.shape()[0] {
        return Err(Error::DimMismatch(format!(
            "x has {} rows, y has {}",
            x.shape()[0],
            y.shape()[0]
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `[features; outputs]`
    pub w: Arr,
    /// `[1; outputs]`, all zero when `intercept` is false.
    pub b: Arr,
    pub intercept: bool,
    pub history: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &Arr) -> Result<Arr> {
        x.matmul(&self.w)?.add(&self.b)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("strix-linear 1\nintercept {}\n", self.intercept);
        write_array(&mut s, &self.w);
        write_array(&mut s, &self.b);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text);
        expect_magic(&mut r, "strix-linear")?;
        let intercept = match r.next_line().map(|(_, l)| l.split_whitespace().collect::<Vec<_>>()) {
            Some(f) if f.len() == 2 && f[0] == "intercept" => f[1]
                .parse::<bool>()
                .map_err(|_| r.error("intercept must be true or false"))?,
            _ => return Err(r.error("expected intercept line")),
        };
        let w: Arr = read_array(&mut r)?;
        let b: Arr = read_array(&mut r)?;
        r.expect_end()?;
        if w.rank() != 2 || b.shape() != [1, w.shape()[1]] {
            return Err(Error::Parse {
                line: 0,
                msg: format!("bias shape {:?} does not match weights {:?}", b.shape(), w.shape()),
            });
        }
        Ok(LinearModel {
            w,
            b,
            intercept,
            history: Vec::new(),
        })
    }
}

fn expect_magic(r: &mut LineReader<'_>, magic: &str) -> Result<()> {
    match r.next_line() {
        Some((_, l)) if l.split_whitespace().collect::<Vec<_>>() == [magic, "1"] => Ok(()),
        _ => Err(r.error(format!("expected `{magic} 1` header"))),
    }
}

/// Fits `x·w + b` to `y` under `params`. The regulariser applies to `w` only.
pub fn linear_reg(intercept: bool, params: &OptimParams, x: &Arr, y: &Arr) -> Result<LinearModel> {
    check_rows(x, y)?;
    let (d, k) = (x.shape()[1], y.shape()[1]);
    let mut theta0 = vec![Arr::zeros(&[d, k])?];
    let mut penalised = vec![true];
    if intercept {
        theta0.push(Arr::zeros(&[1, k])?);
        penalised.push(false);
    }
    let loss = params.loss;
    let f = |th: &[AdValue], xb: &Arr, yb: &Arr| {
        let xb = AdValue::array(xb.clone());
        let mut p = xb.matmul(&th[0])?;
        if let Some(b) = th.get(1) {
            p = algodiff::add(&p, b)?;
        }
        optim::loss_eval(loss, &p, &AdValue::array(yb.clone()))
    };
    let Minimized { mut theta, history, .. } = optim::minimize(params, f, theta0, &penalised, x, y)?;
    let b = if intercept {
        theta.pop().expect("bias")
    } else {
        Arr::zeros(&[1, k])?
    };
    Ok(LinearModel {
        w: theta.pop().expect("weights"),
        b,
        intercept,
        history,
    })
}

/// The lasso configuration: full batch, plain gradient with an Adagrad rate
/// of 1, a 1e-16 threshold and 1000 epochs.
pub fn regression_params(regularisation: Regularisation) -> OptimParams {
    OptimParams {
        batch: Batch::Full,
        loss: Loss::Quadratic,
        gradient: Gradient::GD,
        learning_rate: LearningRate::Adagrad(1.0),
        regularisation,
        stopping: Stopping::ConstThreshold(1e-16),
        epochs: 1000.0,
        seed: 0,
    }
}

pub fn ols(intercept: bool, x: &Arr, y: &Arr) -> Result<LinearModel> {
    linear_reg(intercept, &regression_params(Regularisation::NoneReg), x, y)
}

/// Minimises `mean(½‖x·w + b − y‖²) + alpha‖w‖²`. Without an intercept the
/// exact minimiser is `(XᵀX + 2·n·alpha·I)⁻¹ Xᵀy`.
pub fn ridge(intercept: bool, alpha: f64, x: &Arr, y: &Arr) -> Result<LinearModel> {
    linear_reg(intercept, &regression_params(Regularisation::L2norm(alpha)), x, y)
}

pub fn lasso(intercept: bool, alpha: f64, x: &Arr, y: &Arr) -> Result<LinearModel> {
    linear_reg(intercept, &regression_params(Regularisation::L1norm(alpha)), x, y)
}

pub fn svm_params(alpha: f64) -> OptimParams {
    OptimParams {
        batch: Batch::Full,
        loss: Loss::Hinge,
        gradient: Gradient::GD,
        learning_rate: LearningRate::Const(0.1),
        regularisation: Regularisation::L2norm(alpha),
        stopping: Stopping::ConstThreshold(1e-12),
        epochs: 1000.0,
        seed: 0,
    }
}

/// Linear SVM with labels in {−1, 1}; `params` should use the hinge loss.
pub fn svm_reg(params: &OptimParams, x: &Arr, y: &Arr) -> Result<LinearModel> {
    if let Some(&bad) = y.data().iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::BadLabel(bad));
    }
    linear_reg(true, params, x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Softmax,
    Relu,
    Sigmoid,
    NoneAct,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::NoneAct => "none",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            Activation::Tanh,
            Activation::Softmax,
            Activation::Relu,
            Activation::Sigmoid,
            Activation::NoneAct,
        ]
        .into_iter()
        .find(|a| a.name() == s)
    }

    fn apply(self, z: &AdValue) -> Result<AdValue> {
        Ok(match self {
            Activation::Tanh => z.tanh(),
            Activation::Softmax => z.softmax_rows()?,
            Activation::Relu => z.relu(),
            Activation::Sigmoid => z.sigmoid(),
            Activation::NoneAct => z.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Input(usize),
    Linear(usize, Activation),
}

pub fn input(dim: usize) -> Layer {
    Layer::Input(dim)
}

pub fn linear(out: usize, act: Activation) -> Layer {
    Layer::Linear(out, act)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    /// `[W0, b0, W1, b1, ...]` with `W: [in; out]` and `b: [1; out]`.
    params: Vec<Arr>,
}

fn layer_dims(layers: &[Layer]) -> Result<Vec<(usize, usize, Activation)>> {
    let mut it = layers.iter();
    let mut width = match it.next() {
        Some(Layer::Input(d)) if *d > 0 => *d,
        _ => return Err(Error::DimMismatch("network must start with a positive Input layer".into())),
    };
    let mut dims = Vec::new();
    for l in it {
        match *l {
            Layer::Linear(out, act) if out > 0 => {
                dims.push((width, out, act));
                width = out;
            }
            Layer::Linear(..) => return Err(Error::DimMismatch("linear layer of width 0".into())),
            Layer::Input(_) => return Err(Error::DimMismatch("input layer after the first".into())),
        }
    }
    Ok(dims)
}

impl Network {
    /// Glorot-uniform weights from `seed`, zero biases.
    pub fn new(layers: &[Layer], seed: u64) -> Result<Self> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut params = Vec::new();
        for (i, o, _) in layer_dims(layers)? {
            let r = (6.0 / (i + o) as f64).sqrt();
            let data = (0..i * o).map(|_| rng.random_range(-r..=r)).collect();
            params.push(Arr::from_vec(&[i, o], data)?);
            params.push(Arr::zeros(&[1, o])?);
        }
        Ok(Network {
            layers: layers.to_vec(),
            params,
        })
    }

    pub fn zeroed(layers: &[Layer]) -> Result<Self> {
        let mut params = Vec::new();
        for (i, o, _) in layer_dims(layers)? {
            params.push(Arr::zeros(&[i, o])?);
            params.push(Arr::zeros(&[1, o])?);
        }
        Ok(Network {
            layers: layers.to_vec(),
            params,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &[Arr] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<Arr>) -> Result<()> {
        if params.len() != self.params.len()
            || params.iter().zip(&self.params).any(|(a, b)| a.shape() != b.shape())
        {
            return Err(Error::DimMismatch("parameter shapes differ from the network's".into()));
        }
        self.params = params;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Arr::numel).sum()
    }

    pub fn input_dim(&self) -> usize {
        match self.layers[0] {
            Layer::Input(d) => d,
            Layer::Linear(..) => unreachable!("validated at construction"),
        }
    }

    fn activations(&self) -> impl Iterator<Item = Activation> + '_ {
        self.layers[1..].iter().map(|l| match l {
            Layer::Linear(_, a) => *a,
            Layer::Input(_) => unreachable!("validated at construction"),
        })
    }

    /// Forward pass with explicit (possibly AD-tracked) parameters.
    pub fn forward_with(&self, params: &[AdValue], x: &AdValue) -> Result<AdValue> {
        let xs = x.shape();
        if xs.len() != 2 || xs[1] != self.input_dim() {
            return Err(Error::DimMismatch(format!(
                "input of shape {xs:?} for a network taking {} features",
                self.input_dim()
            )));
        }
        let mut h = x.clone();
        for (k, act) in self.activations().enumerate() {
            let z = algodiff::add(&h.matmul(&params[2 * k])?, &params[2 * k + 1])?;
            h = act.apply(&z)?;
        }
        Ok(h)
    }

    pub fn forward(&self, x: &AdValue) -> Result<AdValue> {
        let ps: Vec<AdValue> = self.params.iter().cloned().map(AdValue::array).collect();
        self.forward_with(&ps, x)
    }

    pub fn predict(&self, x: &Arr) -> Result<Arr> {
        Ok(self.forward(&AdValue::array(x.clone()))?.to_array())
    }

    /// Loss of the network on `(x, y)` as a function of `params`.
    pub fn loss_with(&self, loss: Loss, params: &[AdValue], x: &Arr, y: &Arr) -> Result<AdValue> {
        let p = self.forward_with(params, &AdValue::array(x.clone()))?;
        optim::loss_eval(loss, &p, &AdValue::array(y.clone()))
    }

    /// Penalty flags for the parameter list: weights yes, biases no.
    pub fn penalised(&self) -> Vec<bool> {
        (0..self.params.len()).map(|i| i % 2 == 0).collect()
    }

    /// Trains all layer parameters; returns the objective history.
    pub fn train(&mut self, params: &OptimParams, x: &Arr, y: &Arr) -> Result<Vec<f64>> {
        check_rows(x, y)?;
        let f = |th: &[AdValue], xb: &Arr, yb: &Arr| self.loss_with(params.loss, th, xb, yb);
        let r = optim::minimize(params, f, self.params.clone(), &self.penalised(), x, y)?;
        self.params = r.theta;
        Ok(r.history)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("strix-network 1\nlayers {}\n", self.layers.len());
        for l in &self.layers {
            match l {
                Layer::Input(d) => s.push_str(&format!("input {d}\n")),
                Layer::Linear(o, a) => s.push_str(&format!("linear {o} {}\n", a.name())),
            }
        }
        for p in &self.params {
            write_array(&mut s, p);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = LineReader::new(text);
        expect_magic(&mut r, "strix-network")?;
        let count = match r.next_line().map(|(_, l)| l.split_whitespace().collect::<Vec<_>>()) {
            Some(f) if f.len() == 2 && f[0] == "layers" => {
                f[1].parse::<usize>().map_err(|_| r.error("bad layer count"))?
            }
            _ => return Err(r.error("expected layers line")),
        };
        let mut layers = Vec::new();
        for _ in 0..count {
            let f: Vec<&str> = match r.next_line() {
                Some((_, l)) => l.split_whitespace().collect(),
                None => return Err(r.error("missing layer line")),
            };
            let dim = |s: &str| s.parse::<usize>().map_err(|_| r.error("bad layer width"));
            let layer = match f.as_slice() {
                ["input", d] => Layer::Input(dim(d)?),
                ["linear", o, a] => Layer::Linear(
                    dim(o)?,
                    Activation::from_name(a).ok_or_else(|| r.error("unknown activation"))?,
                ),
                _ => return Err(r.error("bad layer line")),
            };
            layers.push(layer);
        }
        // shapes come from the header; check them without allocating
        let mut params = Vec::new();
        for (i, o, _) in layer_dims(&layers)? {
            for shape in [[i, o], [1, o]] {
                let p = read_array::<f64>(&mut r)?;
                if p.shape() != shape {
                    return Err(r.error(format!("expected a {shape:?} array, found {:?}", p.shape())));
                }
                params.push(p);
            }
        }
        r.expect_end()?;
        Ok(Network { layers, params })
    }
}

/// Fraction of rows whose arg-max matches the one-hot target's.
pub fn accuracy(pred: &Arr, target: &Arr) -> f64 {
    let argmax = |a: &Arr, r: usize| {
        let k = a.shape()[1];
        let row = &a.data()[r * k..(r + 1) * k];
        (0..k).fold(0, |best, j| if row[j] > row[best] { j } else { best })
    };
    let n = pred.shape()[0];
    let hits = (0..n).filter(|&r| argmax(pred, r) == argmax(target, r)).count();
    hits as f64 / n as f64
}
