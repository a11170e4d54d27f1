//! Configurable gradient-based minimisation.
//!
//! A run is described by [`OptimParams`]: how data is batched, which loss is
//! used, how the descent direction and learning rate are derived, the
//! regulariser and when to stop. [`Engine`] holds the mutable state and
//! performs one observe-then-step update; [`minimize`] drives it over a
//! dataset. Parallel trainers reuse `Engine` directly.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::algodiff::{self, AdValue, Arr};
use crate::error::{Error, Result};
use crate::slice::{FancyEntry, FancySpec, SliceEntry};

pub const ADAGRAD_EPS: f64 = 1e-8;
pub const CROSS_ENTROPY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Batch {
    Full,
    Mini(usize),
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Quadratic,
    CrossEntropy,
    Hinge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gradient {
    GD,
    Momentum(f64),
    /// Direction scaled by the accumulated squared gradient.
    Adagrad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Const(f64),
    Adagrad(f64),
    /// `base / (1 + rate * k)` at step `k`.
    Decay(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularisation {
    NoneReg,
    L1norm(f64),
    L2norm(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stopping {
    ConstThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimParams {
    pub batch: Batch,
    pub loss: Loss,
    pub gradient: Gradient,
    pub learning_rate: LearningRate,
    pub regularisation: Regularisation,
    pub stopping: Stopping,
    /// May be fractional; the last epoch is then partial.
    pub epochs: f64,
    /// Seeds mini-batch shuffling.
    pub seed: u64,
}

impl Default for OptimParams {
    fn default() -> Self {
        OptimParams {
            batch: Batch::Full,
            loss: Loss::Quadratic,
            gradient: Gradient::GD,
            learning_rate: LearningRate::Const(0.01),
            regularisation: Regularisation::NoneReg,
            stopping: Stopping::ConstThreshold(1e-16),
            epochs: 1000.0,
            seed: 0,
        }
    }
}

impl OptimParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParam(m.to_string()));
        match self.regularisation {
            Regularisation::L1norm(a) | Regularisation::L2norm(a) if !(a >= 0.0) => {
                return bad("regularisation alpha must be >= 0")
            }
            _ => {}
        }
        let Stopping::ConstThreshold(eps) = self.stopping;
        if !(eps >= 0.0) {
            return bad("stopping threshold must be >= 0");
        }
        if self.batch == Batch::Mini(0) {
            return bad("mini-batch size must be >= 1");
        }
        if !(self.epochs > 0.0) || !self.epochs.is_finite() {
            return bad("epochs must be positive");
        }
        Ok(())
    }

    fn batch_size(&self, n: usize) -> usize {
        match self.batch {
            Batch::Full => n,
            Batch::Mini(m) => m.min(n),
            Batch::Stochastic => 1,
        }
    }

    /// Total number of update steps for a dataset of `n` samples.
    pub fn step_budget(&self, n: usize) -> usize {
        let per_epoch = n.div_ceil(self.batch_size(n).max(1)).max(1);
        ((self.epochs * per_epoch as f64).ceil() as usize).max(1)
    }
}

fn samples(shape: &[usize]) -> f64 {
    if shape.len() >= 2 {
        shape[0] as f64
    } else {
        1.0
    }
}

/// Mean loss over the samples (rows) of `prediction`.
///
/// For `CrossEntropy`, `prediction` holds probabilities, which are clamped to
/// `[1e-12, 1]` before the log.
pub fn loss_eval(loss: Loss, prediction: &AdValue, target: &AdValue) -> Result<AdValue> {
    let (ps, ts) = (prediction.shape(), target.shape());
    if ps != ts {
        return Err(Error::ShapeMismatch {
            expected: ts,
            got: ps,
        });
    }
    let n = samples(&ps);
    let total = match loss {
        Loss::Quadratic => (prediction - target).sqr().sum() * (0.5 / n),
        Loss::CrossEntropy => {
            let logp = prediction.clamp(CROSS_ENTROPY_FLOOR, 1.0).log();
            -(target * &logp).sum() / n
        }
        Loss::Hinge => (1.0 - target * prediction).relu().sum() / n,
    };
    Ok(total)
}

/// Value of the regulariser over the penalised parameters.
pub fn penalty(reg: Regularisation, theta: &[Arr], penalised: &[bool]) -> f64 {
    let per = |f: &dyn Fn(f64) -> f64| -> f64 {
        theta
            .iter()
            .zip(penalised)
            .filter(|(_, &p)| p)
            .map(|(t, _)| t.fold(0.0, |acc, v| acc + f(v)))
            .sum()
    };
    match reg {
        Regularisation::NoneReg => 0.0,
        Regularisation::L1norm(a) => a * per(&|v| v.abs()),
        Regularisation::L2norm(a) => a * per(&|v| v * v),
    }
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub iteration: usize,
    pub velocity: Vec<Arr>,
    /// Running sum of squared gradients.
    pub g2: Vec<Arr>,
    pub history: Vec<f64>,
    /// Which parameters the regulariser applies to.
    pub penalised: Vec<bool>,
}

impl OptimState {
    pub fn new(theta: &[Arr], penalised: &[bool]) -> Result<Self> {
        if penalised.len() != theta.len() {
            return Err(Error::DimMismatch(format!(
                "{} parameters but {} penalty flags",
                theta.len(),
                penalised.len()
            )));
        }
        let zeros = || theta.iter().map(|t| Arr::zeros(t.shape())).collect::<Result<Vec<_>>>();
        Ok(OptimState {
            iteration: 0,
            velocity: zeros()?,
            g2: zeros()?,
            history: Vec::new(),
            penalised: penalised.to_vec(),
        })
    }
}

/// One update of `theta` given the loss gradient `g`.
pub fn step(params: &OptimParams, state: &mut OptimState, theta: &mut [Arr], g: &[Arr]) -> Result<()> {
    if g.len() != theta.len() || state.g2.len() != theta.len() {
        return Err(Error::DimMismatch(format!(
            "{} parameters, {} gradients",
            theta.len(),
            g.len()
        )));
    }
    let uses_g2 = params.gradient == Gradient::Adagrad
        || matches!(params.learning_rate, LearningRate::Adagrad(_));
    for i in 0..theta.len() {
        if g[i].shape() != theta[i].shape() {
            return Err(Error::ShapeMismatch {
                expected: theta[i].shape().to_vec(),
                got: g[i].shape().to_vec(),
            });
        }
        let mut gi = g[i].clone();
        if state.penalised[i] {
            match params.regularisation {
                Regularisation::NoneReg => {}
                Regularisation::L1norm(a) => {
                    gi.zip_(&theta[i], |gv, t| gv + a * sign0(t))?;
                }
                Regularisation::L2norm(a) => {
                    gi.zip_(&theta[i], |gv, t| gv + 2.0 * a * t)?;
                }
            }
        }
        if uses_g2 {
            state.g2[i].zip_(&gi, |acc, v| acc + v * v)?;
        }
        let dir = match params.gradient {
            Gradient::GD => gi.neg(),
            Gradient::Momentum(m) => {
                state.velocity[i].zip_(&gi, |v, gv| m * v - gv)?;
                state.velocity[i].clone()
            }
            Gradient::Adagrad => {
                let mut d = gi.neg();
                d.zip_(&state.g2[i], |dv, s| dv / (s.sqrt() + ADAGRAD_EPS))?;
                d
            }
        };
        let k = state.iteration as f64;
        match params.learning_rate {
            LearningRate::Const(eta) => {
                theta[i].zip_(&dir, |t, d| t + eta * d)?;
            }
            LearningRate::Decay(base, r) => {
                let eta = base / (1.0 + r * k);
                theta[i].zip_(&dir, |t, d| t + eta * d)?;
            }
            LearningRate::Adagrad(base) => {
                let rate = state.g2[i].map(|s| base / (s.sqrt() + ADAGRAD_EPS));
                theta[i].zip_(&rate.mul(&dir)?, |t, u| t + u)?;
            }
        }
    }
    state.iteration += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Optimiser state plus the stopping rule.
#[derive(Debug, Clone)]
pub struct Engine {
    pub params: OptimParams,
    pub state: OptimState,
    budget: usize,
}

impl Engine {
    pub fn new(params: OptimParams, theta: &[Arr], penalised: &[bool], budget: usize) -> Result<Self> {
        params.validate()?;
        Ok(Engine {
            params,
            state: OptimState::new(theta, penalised)?,
            budget: budget.max(1),
        })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Records the objective at `theta`, then either stops or takes a step.
    pub fn update(&mut self, theta: &mut [Arr], loss: f64, g: &[Arr]) -> Result<Control> {
        let total = loss + penalty(self.params.regularisation, theta, &self.state.penalised);
        if total.is_nan() {
            return Err(Error::Divergence {
                history: std::mem::take(&mut self.state.history),
            });
        }
        let Stopping::ConstThreshold(eps) = self.params.stopping;
        let converged = matches!(self.state.history.last(), Some(prev) if (total - prev).abs() < eps);
        self.state.history.push(total);
        if converged {
            return Ok(Control::Stop);
        }
        step(&self.params, &mut self.state, theta, g)?;
        Ok(if self.state.iteration >= self.budget {
            Control::Stop
        } else {
            Control::Continue
        })
    }
}

/// Produces the `(x, y)` batch for each step according to the batch policy.
#[derive(Debug, Clone)]
pub struct Batcher<'a> {
    x: &'a Arr,
    y: &'a Arr,
    size: usize,
    order: Vec<usize>,
    pos: usize,
    rng: Xoshiro256PlusPlus,
}

impl<'a> Batcher<'a> {
    pub fn new(params: &OptimParams, x: &'a Arr, y: &'a Arr) -> Result<Self> {
        let n = x.shape()[0];
        if y.shape()[0] != n {
            return Err(Error::DimMismatch(format!(
                "x has {n} rows, y has {}",
                y.shape()[0]
            )));
        }
        Ok(Batcher {
            x,
            y,
            size: params.batch_size(n),
            order: (0..n).collect(),
            pos: n,
            rng: Xoshiro256PlusPlus::seed_from_u64(params.seed),
        })
    }

    pub fn samples(&self) -> usize {
        self.order.len()
    }

    pub fn next_batch(&mut self) -> Result<(Arr, Arr)> {
        let n = self.order.len();
        if self.size >= n {
            return Ok((self.x.clone(), self.y.clone()));
        }
        if self.pos >= n {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.size).min(n);
        let idx: Vec<isize> = self.order[self.pos..end].iter().map(|&i| i as isize).collect();
        self.pos = end;
        let pick = |a: &Arr| {
            let mut spec = vec![FancyEntry::List(idx.clone())];
            spec.extend((1..a.rank()).map(|_| FancyEntry::Slice(SliceEntry::All)));
            a.get_fancy(&FancySpec(spec))
        };
        Ok((pick(self.x)?, pick(self.y)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimized {
    pub theta: Vec<Arr>,
    /// Objective (loss plus penalty) observed before each step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Minimises `f(theta, x_batch, y_batch)` over the dataset `(x, y)`.
pub fn minimize<F>(
    params: &OptimParams,
    f: F,
    theta0: Vec<Arr>,
    penalised: &[bool],
    x: &Arr,
    y: &Arr,
) -> Result<Minimized>
where
    F: Fn(&[AdValue], &Arr, &Arr) -> Result<AdValue>,
{
    let mut batcher = Batcher::new(params, x, y)?;
    let budget = params.step_budget(batcher.samples());
    let mut engine = Engine::new(*params, &theta0, penalised, budget)?;
    let mut theta = theta0;
    loop {
        let (xb, yb) = batcher.next_batch()?;
        let (l, g) = algodiff::value_and_grads(|th| f(th, &xb, &yb), &theta)?;
        if engine.update(&mut theta, l, &g)? == Control::Stop {
            break;
        }
    }
    Ok(Minimized {
        theta,
        iterations: engine.state.iteration,
        history: engine.state.history,
    })
}

/// Minimises a data-free objective; `epochs` counts steps.
pub fn minimize_fn<F>(params: &OptimParams, f: F, theta0: Vec<Arr>) -> Result<Minimized>
where
    F: Fn(&[AdValue]) -> Result<AdValue>,
{
    let penalised = vec![true; theta0.len()];
    let budget = params.step_budget(1);
    let mut engine = Engine::new(*params, &theta0, &penalised, budget)?;
    let mut theta = theta0;
    loop {
        let (l, g) = algodiff::value_and_grads(&f, &theta)?;
        if engine.update(&mut theta, l, &g)? == Control::Stop {
            break;
        }
    }
    Ok(Minimized {
        theta,
        iterations: engine.state.iteration,
        history: engine.state.history,
    })
}
