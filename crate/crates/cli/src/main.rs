use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use strix::actor::{train_distributed, DistEngine};
use strix::algodiff::{self, AdGraph, AdValue};
use strix::bench::{bench_run, parse_ops, BenchConfig, Op};
use strix::models::{self, input, linear, Activation, Network};
use strix::optim::{Batch, LearningRate, Loss, OptimParams, Regularisation, Stopping};
use strix::Ndarray;

type Arr = Ndarray<f64>;

#[derive(Parser)]
#[command(name = "strix", version, about = "Benchmarks and demos for the strix numerical library")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Time the core operation set on a seeded uniform square matrix
    Bench(BenchArgs),
    /// Write the reverse-mode graph of a small function as DOT
    Graph(GraphArgs),
    /// Fit a lasso model on a sparse synthetic problem
    Lasso(LassoArgs),
    /// Train a 2-4-2 network on XOR
    TrainXor(XorArgs),
    /// Data-parallel network training
    DistTrain(DistArgs),
}

#[derive(Args)]
struct BenchArgs {
    /// Matrix side length
    #[arg(long, default_value_t = 1000)]
    size: usize,
    #[arg(long, default_value_t = 100)]
    repeats: usize,
    /// Leading runs excluded from the statistics
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of slice-cols,slice-rows,relu,sum,cumsum,add,inv,iter
    #[arg(long)]
    ops: Option<String>,
    /// CSV output path (op,mean_ms,std_ms)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GraphArgs {
    /// Length of the two input vectors
    #[arg(long, default_value_t = 4)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// DOT output path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LassoArgs {
    #[arg(long, default_value_t = 0.001)]
    alpha: f64,
    /// Number of samples
    #[arg(long, default_value_t = 200)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Loss history CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct XorArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Loss history CSV path
    #[arg(long)]
    out: Option<PathBuf>,
    /// Save the trained network in text form
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Mapreduce,
    Ps,
}

#[derive(Args)]
struct DistArgs {
    #[arg(long, value_enum, default_value_t = EngineArg::Ps)]
    engine: EngineArg,
    #[arg(long, default_value_t = 4)]
    workers: usize,
    /// Number of samples
    #[arg(long, default_value_t = 48)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200.0)]
    epochs: f64,
    /// Loss history CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            if !e.use_stderr() {
                print!("{text}");
                return ExitCode::SUCCESS;
            }
            eprint!("{text}");
            // value errors from clap omit the usage line
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
    };
    let res = match cli.cmd {
        Cmd::Bench(a) => bench(a),
        Cmd::Graph(a) => graph(a),
        Cmd::Lasso(a) => lasso(a),
        Cmd::TrainXor(a) => train_xor(a),
        Cmd::DistTrain(a) => dist_train(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn write_out(path: &Path, text: &str) -> strix::Result<()> {
    fs::write(path, text).map_err(|e| strix::Error::Io(format!("{}: {e}", path.display())))
}

fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("iteration,loss\n");
    for (i, l) in history.iter().enumerate() {
        s.push_str(&format!("{i},{l}\n"));
    }
    s
}

/// Seeded values uniform in [-1, 1).
fn centered(shape: &[usize], seed: u64) -> strix::Result<Arr> {
    Ok(Arr::uniform(shape, seed)?.map(|v| 2.0 * v - 1.0))
}

fn bench(a: BenchArgs) -> strix::Result<()> {
    let config = BenchConfig {
        size: a.size,
        repeats: a.repeats,
        warmup: a.warmup,
        seed: a.seed,
        ops: match &a.ops {
            Some(s) => parse_ops(s)?,
            None => Op::ALL.to_vec(),
        },
    };
    let report = bench_run(&config)?;
    print!("{}", report.to_table());
    if let Some(p) = &a.out {
        write_out(p, &report.to_csv())?;
    }
    Ok(())
}

fn demo_fn(x: &AdValue, y: &AdValue) -> AdValue {
    ((x * (x + x).sin() + (AdValue::F(1.0) * x.sqrt()) / AdValue::F(7.0)) * y.relu()).sum()
}

fn graph(a: GraphArgs) -> strix::Result<()> {
    if a.size == 0 {
        return Err(strix::Error::InvalidParam("size must be positive".into()));
    }
    let x = Arr::uniform(&[a.size], a.seed)?.map(|v| v + 0.5);
    let y = centered(&[a.size], a.seed.wrapping_add(1))?;
    let tag = algodiff::next_tag();
    let xv = AdValue::make_reverse(x.into(), tag);
    let yv = AdValue::make_reverse(y.into(), tag);
    let dot = AdGraph::from_output(&demo_fn(&xv, &yv)).to_dot();
    match &a.out {
        Some(p) => write_out(p, &dot),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}

fn lasso(a: LassoArgs) -> strix::Result<()> {
    let d = 20;
    let x = centered(&[a.size, d], a.seed)?;
    let mut w0 = vec![0.0; d];
    w0[2] = 1.5;
    w0[7] = -2.0;
    w0[13] = 0.8;
    let w0 = Arr::from_vec(&[d, 1], w0)?;
    let noise = centered(&[a.size, 1], a.seed.wrapping_add(1))?.map(|v| v * 0.01 * 3f64.sqrt());
    let y = x.matmul(&w0)?.add(&noise)?;
    let params = OptimParams {
        learning_rate: LearningRate::Decay(0.5, 0.05),
        regularisation: Regularisation::L1norm(a.alpha),
        stopping: Stopping::ConstThreshold(0.0),
        epochs: 5000.0,
        seed: a.seed,
        ..Default::default()
    };
    let m = models::linear_reg(false, &params, &x, &y)?;
    let w: Vec<String> = m.w.data().iter().map(|v| format!("{v:.4}")).collect();
    println!("alpha {} iterations {} final loss {}", a.alpha, m.history.len(), m.history.last().copied().unwrap_or(f64::NAN));
    println!("w = [{}]", w.join(", "));
    if let Some(p) = &a.out {
        write_out(p, &history_csv(&m.history))?;
    }
    Ok(())
}

fn train_xor(a: XorArgs) -> strix::Result<()> {
    let x = Arr::from_vec(&[4, 2], vec![0., 0., 0., 1., 1., 0., 1., 1.])?;
    let y = Arr::from_vec(&[4, 2], vec![1., 0., 0., 1., 0., 1., 1., 0.])?;
    let mut net = Network::new(&[input(2), linear(4, Activation::Tanh), linear(2, Activation::Softmax)], a.seed)?;
    let params = OptimParams {
        loss: Loss::CrossEntropy,
        learning_rate: LearningRate::Const(0.5),
        stopping: Stopping::ConstThreshold(0.0),
        epochs: 5000.0,
        seed: a.seed,
        ..Default::default()
    };
    let history = net.train(&params, &x, &y)?;
    let acc = models::accuracy(&net.predict(&x)?, &y);
    println!("iterations {} final loss {} accuracy {acc}", history.len(), history.last().copied().unwrap_or(f64::NAN));
    if let Some(p) = &a.out {
        write_out(p, &history_csv(&history))?;
    }
    if let Some(p) = &a.model {
        write_out(p, &net.to_text())?;
    }
    Ok(())
}

fn dist_train(a: DistArgs) -> strix::Result<()> {
    let n = a.size;
    let x = centered(&[n, 2], a.seed.wrapping_add(1))?;
    let mut y = Vec::with_capacity(2 * n);
    for r in 0..n {
        let inside = x.data()[2 * r].powi(2) + x.data()[2 * r + 1].powi(2) < 0.5;
        y.extend_from_slice(if inside { &[1.0, 0.0] } else { &[0.0, 1.0] });
    }
    let y = Arr::from_vec(&[n, 2], y)?;
    let net = Network::new(&[input(2), linear(5, Activation::Tanh), linear(2, Activation::Softmax)], a.seed)?;
    let params = OptimParams {
        batch: Batch::Full,
        loss: Loss::CrossEntropy,
        learning_rate: LearningRate::Const(0.5),
        stopping: Stopping::ConstThreshold(0.0),
        epochs: a.epochs,
        seed: a.seed,
        ..Default::default()
    };
    let engine = match a.engine {
        EngineArg::Mapreduce => DistEngine::MapReduce,
        EngineArg::Ps => DistEngine::ParamServer,
    };
    let f = |th: &[AdValue], xb: &Arr, yb: &Arr| net.loss_with(params.loss, th, xb, yb);
    let run = train_distributed(engine, a.workers, &params, f, net.params().to_vec(), &net.penalised(), &x, &y)?;
    let mut trained = net.clone();
    trained.set_params(run.theta)?;
    let acc = models::accuracy(&trained.predict(&x)?, &y);
    println!(
        "workers {} iterations {} final loss {} accuracy {acc}",
        a.workers,
        run.iterations,
        run.history.last().copied().unwrap_or(f64::NAN)
    );
    if let Some(p) = &a.out {
        write_out(p, &history_csv(&run.history))?;
    }
    Ok(())
}
