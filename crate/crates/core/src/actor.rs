//! In-process parallel engines.
//!
//! [`MapReduceEngine`] splits arrays along axis 0 into at most `workers`
//! contiguous chunks and runs them on scoped threads; results are always
//! merged in chunk order. [`ParamServer`] runs synchronous rounds: every
//! worker pulls the same snapshot, pushes a gradient, and the round closes
//! with the mean gradient handed to a registered updater.
//!
//! [`ParallelNdarray`] and [`train_distributed`] lift the sequential array
//! and training code onto these engines with unchanged results.

use std::ops::Range;

use crate::algodiff::{self, AdValue, Arr};
use crate::element::Element;
use crate::error::{Error, Result};
use crate::ndarray::{scalar, Ndarray};
use crate::optim::{Batch, Batcher, Control, Engine, Minimized, OptimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapReduceEngine {
    workers: usize,
}

impl MapReduceEngine {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidParam("worker count must be >= 1".into()));
        }
        Ok(MapReduceEngine { workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Contiguous ranges covering `0..n`; sizes differ by at most one.
    pub fn chunks(&self, n: usize) -> Vec<Range<usize>> {
        let k = self.workers.min(n);
        let (base, extra) = if k == 0 { (0, 0) } else { (n / k, n % k) };
        let mut lo = 0;
        (0..k)
            .map(|i| {
                let len = base + usize::from(i < extra);
                let r = lo..lo + len;
                lo += len;
                r
            })
            .collect()
    }

    /// Splits `x` along axis 0.
    pub fn split<T: Element>(&self, x: &Ndarray<T>) -> Result<Vec<Ndarray<T>>> {
        self.chunks(x.shape()[0])
            .into_iter()
            .map(|r| x.rows(r.start, r.len()))
            .collect()
    }

    /// Runs `job` on every chunk in parallel and returns results in chunk
    /// order.
    pub fn run<T, R, J>(&self, x: &Ndarray<T>, job: J) -> Result<Vec<R>>
    where
        T: Element,
        R: Send,
        J: Fn(usize, Ndarray<T>) -> R + Sync,
    {
        let parts = self.split(x)?;
        let job = &job;
        Ok(std::thread::scope(|s| {
            let handles: Vec<_> = parts
                .into_iter()
                .enumerate()
                .map(|(i, p)| s.spawn(move || job(i, p)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        }))
    }

    pub fn mr_map<T: Element, F: Fn(T) -> T + Sync>(&self, f: F, x: &Ndarray<T>) -> Result<Ndarray<T>> {
        let parts = self.run(x, |_, p| p.map(&f))?;
        self.mr_collect(&parts)
    }

    /// Folds each chunk with `g`, then combines the partials left to right.
    pub fn mr_reduce<T: Element, G: Fn(T, T) -> T + Sync>(&self, g: G, x: &Ndarray<T>) -> Result<T> {
        let partials = self.run(x, |_, p| {
            let d = p.data();
            d[1..].iter().fold(d[0], |a, &v| g(a, v))
        })?;
        let mut it = partials.into_iter();
        let first = it.next().ok_or(Error::EmptyInput)?;
        Ok(it.fold(first, g))
    }

    /// Concatenates chunks along axis 0 in the given order.
    pub fn mr_collect<T: Element>(&self, parts: &[Ndarray<T>]) -> Result<Ndarray<T>> {
        Ndarray::concat_rows(parts)
    }
}

/// The array operations routed through a [`MapReduceEngine`].
///
/// Results equal the sequential ones bitwise. `fold` threads the running
/// accumulator through the chunks in order, so it matches a sequential fold
/// for any `f`; `reduce` combines independent per-chunk partials and is only
/// exact for operations such as `min` and `max`.
#[derive(Debug, Clone, Copy)]
pub struct ParallelNdarray {
    engine: MapReduceEngine,
}

impl ParallelNdarray {
    pub fn new(engine: MapReduceEngine) -> Self {
        ParallelNdarray { engine }
    }

    pub fn engine(&self) -> &MapReduceEngine {
        &self.engine
    }

    pub fn map<T: Element, F: Fn(T) -> T + Sync>(&self, f: F, x: &Ndarray<T>) -> Result<Ndarray<T>> {
        self.engine.mr_map(f, x)
    }

    pub fn fold<T: Element, A, F: Fn(A, T) -> A>(&self, init: A, f: F, x: &Ndarray<T>) -> Result<A> {
        let mut acc = init;
        for part in self.engine.split(x)? {
            acc = part.fold(acc, &f);
        }
        Ok(acc)
    }

    pub fn reduce<T: Element, G: Fn(T, T) -> T + Sync>(&self, g: G, x: &Ndarray<T>) -> Result<T> {
        self.engine.mr_reduce(g, x)
    }

    pub fn relu<T: Element>(&self, x: &Ndarray<T>) -> Result<Ndarray<T>> {
        self.map(scalar::relu, x)
    }

    pub fn neg<T: Element>(&self, x: &Ndarray<T>) -> Result<Ndarray<T>> {
        self.map(|v: T| -v, x)
    }

    pub fn sin<T: Element>(&self, x: &Ndarray<T>) -> Result<Ndarray<T>> {
        self.map(T::sin, x)
    }

    pub fn exp<T: Element>(&self, x: &Ndarray<T>) -> Result<Ndarray<T>> {
        self.map(T::exp, x)
    }

    pub fn sum<T: Element>(&self, x: &Ndarray<T>) -> Result<T> {
        self.fold(T::zero(), |a, v| a + v, x)
    }

    pub fn min<T: Element>(&self, x: &Ndarray<T>) -> Result<T> {
        self.reduce(T::min, x)
    }

    pub fn max<T: Element>(&self, x: &Ndarray<T>) -> Result<T> {
        self.reduce(T::max, x)
    }

    /// Scans cross chunk boundaries and are not offered.
    pub fn cumsum<T: Element>(&self, _x: &Ndarray<T>, _axis: usize) -> Result<Ndarray<T>> {
        Err(Error::Unsupported("cumsum on a distributed array"))
    }
}

/// Receives the mean loss and gradient at the end of each round.
pub trait Updater {
    fn update(&mut self, theta: &mut [Arr], loss: f64, grads: &[Arr]) -> Result<Control>;
}

impl Updater for Engine {
    fn update(&mut self, theta: &mut [Arr], loss: f64, grads: &[Arr]) -> Result<Control> {
        Engine::update(self, theta, loss, grads)
    }
}

impl<F: FnMut(&mut [Arr], f64, &[Arr]) -> Result<Control>> Updater for F {
    fn update(&mut self, theta: &mut [Arr], loss: f64, grads: &[Arr]) -> Result<Control> {
        self(theta, loss, grads)
    }
}

/// Synchronous parameter server. Parameters change only when the last
/// worker of a round pushes, so every pull within a round sees the same
/// snapshot.
#[derive(Debug)]
pub struct ParamServer<U> {
    params: Vec<Arr>,
    pending: Vec<Option<(f64, Vec<Arr>)>>,
    updater: Option<U>,
    round: usize,
    stopped: bool,
}

impl<U: Updater> ParamServer<U> {
    pub fn new(workers: usize, params: Vec<Arr>) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidParam("worker count must be >= 1".into()));
        }
        Ok(ParamServer {
            params,
            pending: vec![None; workers],
            updater: None,
            round: 0,
            stopped: false,
        })
    }

    pub fn workers(&self) -> usize {
        self.pending.len()
    }

    pub fn register(&mut self, updater: U) {
        self.updater = Some(updater);
    }

    pub fn updater(&self) -> Option<&U> {
        self.updater.as_ref()
    }

    pub fn into_parts(self) -> (Vec<Arr>, Option<U>) {
        (self.params, self.updater)
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn params(&self) -> &[Arr] {
        &self.params
    }

    pub fn pull(&self, worker: usize) -> Result<Vec<Arr>> {
        if worker >= self.pending.len() {
            return Err(Error::UnknownWorker(worker));
        }
        Ok(self.params.clone())
    }

    /// Records a worker's loss and gradient. Returns the updater's verdict
    /// when this push completes the round.
    pub fn push(&mut self, worker: usize, loss: f64, grads: Vec<Arr>) -> Result<Option<Control>> {
        if self.updater.is_none() {
            return Err(Error::NotRegistered);
        }
        if self.stopped {
            return Err(Error::Contract("push after training stopped".into()));
        }
        let slot = self.pending.get_mut(worker).ok_or(Error::UnknownWorker(worker))?;
        if slot.is_some() {
            return Err(Error::DoublePush(worker));
        }
        if grads.len() != self.params.len()
            || grads.iter().zip(&self.params).any(|(g, p)| g.shape() != p.shape())
        {
            return Err(Error::DimMismatch("gradient shapes differ from parameters".into()));
        }
        *slot = Some((loss, grads));
        if self.pending.iter().any(Option::is_none) {
            return Ok(None);
        }
        let k = self.pending.len() as f64;
        let mut reports = self.pending.iter_mut().map(|s| s.take().expect("complete round"));
        let (mut loss, mut mean) = reports.next().expect("at least one worker");
        for (l, g) in reports {
            loss += l;
            for (m, gi) in mean.iter_mut().zip(&g) {
                m.zip_(gi, |a, b| a + b)?;
            }
        }
        let loss = loss / k;
        for m in &mut mean {
            m.map_(|v| v / k);
        }
        let control = self
            .updater
            .as_mut()
            .expect("checked above")
            .update(&mut self.params, loss, &mean)?;
        self.round += 1;
        self.stopped = control == Control::Stop;
        Ok(Some(control))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistEngine {
    ParamServer,
    MapReduce,
}

/// Data-parallel training of `f(theta, x_shard, y_shard)`.
///
/// Each round takes the next batch, splits it into `workers` shards with
/// sizes differing by at most one, computes per-shard losses and gradients
/// on identical parameters in parallel, and steps on their mean. With equal
/// shard sizes this is the full-batch gradient; with one worker it is the
/// sequential run, bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn train_distributed<F>(
    engine: DistEngine,
    workers: usize,
    params: &OptimParams,
    f: F,
    theta0: Vec<Arr>,
    penalised: &[bool],
    x: &Arr,
    y: &Arr,
) -> Result<Minimized>
where
    F: Fn(&[AdValue], &Arr, &Arr) -> Result<AdValue> + Sync,
{
    if params.batch == Batch::Stochastic {
        return Err(Error::InvalidParam("distributed training needs Full or Mini batches".into()));
    }
    let mr = MapReduceEngine::new(workers)?;
    let mut batcher = Batcher::new(params, x, y)?;
    let budget = params.step_budget(batcher.samples());
    let opt = Engine::new(*params, &theta0, penalised, budget)?;
    let f = &f;
    let shard_grads = |theta: &[Arr], xb: &Arr, yb: &Arr| -> Result<Vec<(f64, Vec<Arr>)>> {
        let ys = mr.split(yb)?;
        mr.run(xb, |i, xs| algodiff::value_and_grads(|th| f(th, &xs, &ys[i]), theta))?
            .into_iter()
            .collect()
    };
    match engine {
        DistEngine::ParamServer => {
            let mut server = ParamServer::new(workers, theta0)?;
            server.register(opt);
            loop {
                let (xb, yb) = batcher.next_batch()?;
                if xb.shape()[0] < workers {
                    return Err(Error::InvalidParam("batch smaller than worker count".into()));
                }
                let snapshot = server.pull(0)?;
                let reports = shard_grads(&snapshot, &xb, &yb)?;
                let mut done = None;
                for (w, (l, g)) in reports.into_iter().enumerate() {
                    done = server.push(w, l, g)?;
                }
                if done == Some(Control::Stop) {
                    break;
                }
            }
            let (theta, opt) = server.into_parts();
            let opt = opt.expect("registered");
            Ok(Minimized {
                theta,
                iterations: opt.state.iteration,
                history: opt.state.history,
            })
        }
        DistEngine::MapReduce => {
            let mut opt = opt;
            let mut theta = theta0;
            loop {
                let (xb, yb) = batcher.next_batch()?;
                if xb.shape()[0] < workers {
                    return Err(Error::InvalidParam("batch smaller than worker count".into()));
                }
                let reports = shard_grads(&theta, &xb, &yb)?;
                let k = reports.len() as f64;
                let mut it = reports.into_iter();
                let (mut loss, mut mean) = it.next().expect("non-empty batch");
                for (l, g) in it {
                    loss += l;
                    for (m, gi) in mean.iter_mut().zip(&g) {
                        m.zip_(gi, |a, b| a + b)?;
                    }
                }
                for m in &mut mean {
                    m.map_(|v| v / k);
                }
                if opt.update(&mut theta, loss / k, &mean)? == Control::Stop {
                    break;
                }
            }
            Ok(Minimized {
                theta,
                iterations: opt.state.iteration,
                history: opt.state.history,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_partition() {
        for w in 1..=8 {
            let e = MapReduceEngine::new(w).unwrap();
            for n in 1..40 {
                let c = e.chunks(n);
                assert_eq!(c.len(), w.min(n));
                assert_eq!(c[0].start, 0);
                assert_eq!(c.last().unwrap().end, n);
                assert!(c.windows(2).all(|p| p[0].end == p[1].start));
                let lens: Vec<usize> = c.iter().map(|r| r.len()).collect();
                assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
            }
        }
        assert!(MapReduceEngine::new(0).is_err());
    }

    #[test]
    fn reduce_sequential_ten() {
        let e = MapReduceEngine::new(3).unwrap();
        let x = Ndarray::<f64>::sequential(&[10]).unwrap();
        assert_eq!(e.mr_reduce(|a, b| a + b, &x).unwrap(), 45.0);
        assert_eq!(e.mr_collect(&e.split(&x).unwrap()).unwrap(), x);
        assert_eq!(e.mr_collect::<f64>(&[]).unwrap_err(), Error::EmptyInput);
    }

    #[test]
    fn cumsum_unsupported() {
        let p = ParallelNdarray::new(MapReduceEngine::new(2).unwrap());
        let x = Ndarray::<f64>::ones(&[4]).unwrap();
        assert!(matches!(p.cumsum(&x, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn server_round_rules() {
        let theta = vec![Arr::ones(&[2]).unwrap()];
        let mut ps = ParamServer::new(2, theta.clone()).unwrap();
        let g = || vec![Arr::ones(&[2]).unwrap()];
        assert_eq!(ps.push(0, 0.0, g()).unwrap_err(), Error::NotRegistered);
        ps.register(|th: &mut [Arr], _l: f64, gr: &[Arr]| {
            th[0].zip_(&gr[0], |t, d| t - d)?;
            Ok(Control::Continue)
        });
        assert_eq!(ps.push(0, 1.0, g()).unwrap(), None);
        assert_eq!(ps.pull(1).unwrap(), theta);
        assert_eq!(ps.push(0, 1.0, g()).unwrap_err(), Error::DoublePush(0));
        assert_eq!(ps.push(5, 1.0, g()).unwrap_err(), Error::UnknownWorker(5));
        assert_eq!(ps.pull(2).unwrap_err(), Error::UnknownWorker(2));
        assert_eq!(ps.push(1, 3.0, g()).unwrap(), Some(Control::Continue));
        assert_eq!(ps.round(), 1);
        assert_eq!(ps.pull(0).unwrap()[0].data(), &[0.0, 0.0]);
    }
}
