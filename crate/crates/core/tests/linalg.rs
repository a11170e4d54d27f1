mod common;

use common::*;
use proptest::prelude::*;
use strix::linalg::{self, Lu};
use strix::{Error, Ndarray};

/// Diagonally dominant, hence well conditioned.
fn well_conditioned(n: usize, seed: u64) -> Arr {
    let mut a = centered(&[n, n], seed);
    for i in 0..n {
        a.data_mut()[i * n + i] += n as f64;
    }
    a
}

fn identity_residual(a: &Arr, b: &Arr) -> f64 {
    let n = a.shape()[0];
    let r = a.matmul(b).unwrap().sub(&Arr::eye(n).unwrap()).unwrap();
    linalg::norm_inf(&r).unwrap()
}

/// Plain triple loop.
fn naive_matmul(a: &Arr, b: &Arr) -> Arr {
    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[i * n + j] = (0..k).map(|p| a.data()[i * k + p] * b.data()[p * n + j]).sum();
        }
    }
    Arr::from_vec(&[m, n], out).unwrap()
}

proptest! {
    #[test]
    fn inverse_residual(n in 1usize..30, seed in any::<u64>()) {
        let a = well_conditioned(n, seed);
        let ai = a.inv().unwrap();
        prop_assert!(identity_residual(&a, &ai) <= 1e-8);
        let back = ai.inv().unwrap();
        prop_assert!(max_abs_diff(&back, &a) <= 1e-8 * n as f64);
    }

    #[test]
    fn solve_recovers_x(n in 1usize..25, k in 1usize..4, seed in any::<u64>()) {
        let a = well_conditioned(n, seed);
        let x0 = centered(&[n, k], seed + 1);
        let x = linalg::solve(&a, &a.matmul(&x0).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&x, &x0) <= 1e-8);
    }

    #[test]
    fn matmul_matches_naive_and_associates(m in 1usize..8, k in 1usize..8, n in 1usize..8, p in 1usize..8, seed in any::<u64>()) {
        let a = centered(&[m, k], seed);
        let b = centered(&[k, n], seed + 1);
        let c = centered(&[n, p], seed + 2);
        prop_assert!(max_abs_diff(&a.matmul(&b).unwrap(), &naive_matmul(&a, &b)) <= 1e-12);
        let l = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let r = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(max_rel_err(&l, &r) <= 1e-10);
        let t = a.matmul(&b).unwrap().transpose().unwrap();
        let tt = b.transpose().unwrap().matmul(&a.transpose().unwrap()).unwrap();
        prop_assert!(max_abs_diff(&t, &tt) <= 1e-12);
    }

    #[test]
    fn pivot_is_permutation(n in 1usize..20, seed in any::<u64>()) {
        let lu = Lu::factor(&centered(&[n, n], seed)).unwrap();
        let mut seen = lu.perm().to_vec();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn uniform_1000_inverse() {
    let a = Arr::uniform(&[1000, 1000], 42).unwrap();
    let ai = a.inv().unwrap();
    let r = identity_residual(&a, &ai);
    println!("residual {r:e}");
    assert!(r <= 1e-8);
}

#[test]
fn singular_inputs() {
    let rank1 = Arr::from_vec(&[3, 3], vec![1., 2., 3., 2., 4., 6., 3., 6., 9.]).unwrap();
    assert!(matches!(rank1.inv(), Err(Error::Singular { .. })));
    let zero = Arr::zeros(&[4, 4]).unwrap();
    assert!(matches!(zero.inv(), Err(Error::Singular { .. })));
    let f = Ndarray::<f32>::from_vec(&[2, 2], vec![1., 2., 2., 4.]).unwrap();
    assert!(matches!(f.inv(), Err(Error::Singular { .. })));
    assert!(matches!(Arr::zeros(&[2, 3]).unwrap().inv(), Err(Error::NotMatrix(_)) | Err(Error::DimMismatch(_))));
}

#[test]
fn small_cases() {
    let d = Arr::from_vec(&[2, 2], vec![2., 0., 0., 4.]).unwrap();
    assert_eq!(d.inv().unwrap().data(), &[0.5, 0.0, 0.0, 0.25]);
    let a = Arr::from_vec(&[2, 2], vec![1., 2., 3., 4.]).unwrap();
    let b = Arr::from_vec(&[2, 1], vec![5., 6.]).unwrap();
    assert_eq!(a.matmul(&b).unwrap().data(), &[17.0, 39.0]);
    assert!(Arr::eye(5).unwrap().inv().unwrap().bitwise_eq(&Arr::eye(5).unwrap()));
}
