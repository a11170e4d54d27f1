//! Microbenchmark harness for the core operation set.
//!
//! Every op runs `repeats` times on a seeded uniform square matrix; the first
//! `warmup` runs are dropped and the rest give the mean and sample standard
//! deviation in milliseconds. Each op's result is hashed so two runs with the
//! same seed can be compared without keeping the outputs around.

use std::fmt::Write as _;
use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::ndarray::Ndarray;
use crate::slice::{SliceEntry, SliceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    SliceCols,
    SliceRows,
    Relu,
    Sum,
    Cumsum,
    Add,
    Inv,
    Iter,
}

impl Op {
    pub const ALL: [Op; 8] = [
        Op::SliceCols,
        Op::SliceRows,
        Op::Relu,
        Op::Sum,
        Op::Cumsum,
        Op::Add,
        Op::Inv,
        Op::Iter,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Op::SliceCols => "slice-cols",
            Op::SliceRows => "slice-rows",
            Op::Relu => "relu",
            Op::Sum => "sum",
            Op::Cumsum => "cumsum",
            Op::Add => "add",
            Op::Inv => "inv",
            Op::Iter => "iter",
        }
    }

    /// Row label as printed in the report, with the slice bound for `size`.
    pub fn label(self, size: usize) -> String {
        let half = (size / 2).max(1) - 1;
        match self {
            Op::SliceCols => format!("slicing [*; 0:{half}]"),
            Op::SliceRows => format!("slicing [0:{half}; *]"),
            Op::Relu => "relu (map)".into(),
            Op::Sum => "sum (fold)".into(),
            Op::Cumsum => "cumsum (scan)".into(),
            Op::Add => "x + y".into(),
            Op::Inv => "inv(x)".into(),
            Op::Iter => "iter".into(),
        }
    }

    /// Runs the op once. Scalar results come back as a one-element array.
    pub fn run(self, x: &Ndarray<f64>, y: &Ndarray<f64>) -> Result<Ndarray<f64>> {
        let half = (x.shape()[0] / 2).max(1) as isize - 1;
        match self {
            Op::SliceCols => x.get_slice(&SliceSpec(vec![SliceEntry::All, SliceEntry::range(0, half)])),
            Op::SliceRows => x.get_slice(&SliceSpec(vec![SliceEntry::range(0, half), SliceEntry::All])),
            Op::Relu => Ok(x.relu()),
            Op::Sum => Ok(Ndarray::scalar(x.sum())),
            Op::Cumsum => x.cumsum(1),
            Op::Add => x.add(y),
            Op::Inv => x.inv(),
            Op::Iter => {
                let mut acc = 0.0;
                x.iter(|v| acc = black_box(acc + v));
                Ok(Ndarray::scalar(acc))
            }
        }
    }
}

impl FromStr for Op {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Op::ALL
            .into_iter()
            .find(|op| op.key() == s.trim())
            .ok_or_else(|| Error::UnknownOp(s.to_string()))
    }
}

/// Parses a comma-separated op list such as `relu,sum,inv`.
pub fn parse_ops(s: &str) -> Result<Vec<Op>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub size: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub seed: u64,
    pub ops: Vec<Op>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            size: 1000,
            repeats: 100,
            warmup: 10,
            seed: 0,
            ops: Op::ALL.to_vec(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats <= self.warmup {
            return Err(Error::InvalidParam(format!(
                "repeats ({}) must exceed warmup ({})",
                self.repeats, self.warmup
            )));
        }
        if self.size < 2 {
            return Err(Error::InvalidParam(format!("matrix size must be at least 2, got {}", self.size)));
        }
        if self.ops.is_empty() {
            return Err(Error::InvalidParam("no operations selected".into()));
        }
        Ok(())
    }

    /// The two seeded inputs; `y` is only used by `x + y`.
    pub fn inputs(&self) -> Result<(Ndarray<f64>, Ndarray<f64>)> {
        let shape = [self.size, self.size];
        Ok((
            Ndarray::uniform(&shape, self.seed)?,
            Ndarray::uniform(&shape, self.seed.wrapping_add(1))?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub op: Op,
    pub label: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub runs: usize,
    pub checksum: u64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub size: usize,
    pub rows: Vec<BenchRow>,
}

/// FNV-1a over the shape and the bit patterns of the values.
pub fn checksum(a: &Ndarray<f64>) -> u64 {
    const PRIME: u64 = 0x100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |w: u64| {
        for b in w.to_le_bytes() {
            h = (h ^ b as u64).wrapping_mul(PRIME);
        }
    };
    a.shape().iter().for_each(|&d| eat(d as u64));
    a.data().iter().for_each(|v| eat(v.to_bits()));
    h
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn bench_run(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let (x, y) = config.inputs()?;
    let mut rows = Vec::with_capacity(config.ops.len());
    for &op in &config.ops {
        let mut times = Vec::with_capacity(config.repeats - config.warmup);
        let mut sum = None;
        for rep in 0..config.repeats {
            let t = Instant::now();
            let out = black_box(op.run(black_box(&x), black_box(&y))?);
            let ms = t.elapsed().as_secs_f64() * 1e3;
            if rep >= config.warmup {
                times.push(ms);
            }
            if sum.is_none() {
                sum = Some(checksum(&out));
            }
        }
        let (mean_ms, std_ms) = mean_std(&times);
        rows.push(BenchRow {
            op,
            label: op.label(config.size),
            mean_ms,
            std_ms,
            runs: times.len(),
            checksum: sum.unwrap_or_default(),
        });
    }
    Ok(BenchReport {
        size: config.size,
        rows,
    })
}

fn fmt_ms(v: f64) -> String {
    if v >= 100.0 {
        format!("{v:.0}")
    } else if v >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}

impl BenchReport {
    /// Aligned table, one `mean (std)` cell per op.
    pub fn to_table(&self) -> String {
        let head = "Operation";
        let w = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(head.len());
        let mut s = String::new();
        let _ = writeln!(s, "{head:<w$}  time (ms)");
        let _ = writeln!(s, "{}", "-".repeat(w + 2 + 14));
        for r in &self.rows {
            let _ = writeln!(s, "{:<w$}  {} ({})", r.label, fmt_ms(r.mean_ms), fmt_ms(r.std_ms));
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("op,mean_ms,std_ms\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.6}", r.op.key(), r.mean_ms, r.std_ms);
        }
        s
    }
}
