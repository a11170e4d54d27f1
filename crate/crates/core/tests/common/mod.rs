#![allow(dead_code)]

use strix::Ndarray;

pub type Arr = Ndarray<f64>;

/// Central finite differences of a scalar function of an array, with step
/// `1e-5 * max(1, |x_i|)` per coordinate.
pub fn fd_grad(f: impl Fn(&Arr) -> f64, x: &Arr) -> Arr {
    let mut g = Vec::with_capacity(x.numel());
    for i in 0..x.numel() {
        let h = 1e-5 * x.data()[i].abs().max(1.0);
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        g.push((f(&xp) - f(&xm)) / (2.0 * h));
    }
    Arr::from_vec(x.shape(), g).unwrap()
}

/// Largest `|a - b| / max(1, |b|)` over all elements.
pub fn max_rel_err(a: &Arr, b: &Arr) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn arr(shape: &[usize], d: &[f64]) -> Arr {
    Arr::from_vec(shape, d.to_vec()).unwrap()
}

/// Seeded values uniform in [-1, 1).
pub fn centered(shape: &[usize], seed: u64) -> Arr {
    Arr::uniform(shape, seed).unwrap().map(|v| 2.0 * v - 1.0)
}

/// Zero-mean noise with standard deviation `sigma` (uniform, so bounded).
pub fn noise(shape: &[usize], sigma: f64, seed: u64) -> Arr {
    centered(shape, seed).map(|v| v * sigma * 3f64.sqrt())
}

/// Solves `(XᵀX + lambda·I) w = Xᵀy` directly.
pub fn normal_equations(x: &Arr, y: &Arr, lambda: f64) -> Arr {
    let xt = x.transpose().unwrap();
    let d = x.shape()[1];
    let eye = Arr::eye(d).unwrap().map(|v| v * lambda);
    let a = xt.matmul(x).unwrap().add(&eye).unwrap();
    strix::linalg::solve(&a, &xt.matmul(y).unwrap()).unwrap()
}

pub fn max_abs_diff(a: &Arr, b: &Arr) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact lasso minimiser of `mean(½(x·w − y)²) + alpha‖w‖₁` by cyclic
/// coordinate descent with soft thresholding.
pub fn lasso_cd(x: &Arr, y: &Arr, alpha: f64, sweeps: usize) -> Vec<f64> {
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let xd = x.data();
    let col = |j: usize| (0..n).map(move |i| xd[i * d + j]);
    let norms: Vec<f64> = (0..d).map(|j| col(j).map(|v| v * v).sum::<f64>() / n as f64).collect();
    let mut w = vec![0.0; d];
    let mut resid: Vec<f64> = y.data().to_vec();
    for _ in 0..sweeps {
        for j in 0..d {
            let rho = col(j).zip(&resid).map(|(a, r)| a * r).sum::<f64>() / n as f64 + norms[j] * w[j];
            let new = rho.signum() * (rho.abs() - alpha).max(0.0) / norms[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (i, r) in resid.iter_mut().enumerate() {
                    *r -= delta * xd[i * d + j];
                }
                w[j] = new;
            }
        }
    }
    w
}
