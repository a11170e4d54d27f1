mod common;

use common::*;
use proptest::prelude::*;
use strix::{Error, Ndarray};

fn shape_strategy() -> impl Strategy<Value = Vec<usize>> {
    proptest::collection::vec(1usize..6, 1..4)
}

fn array_strategy() -> impl Strategy<Value = Arr> {
    (shape_strategy(), any::<u64>()).prop_map(|(s, seed)| centered(&s, seed).map(|v| v * 10.0))
}

type Pair = (fn(&Arr) -> Arr, fn(&mut Arr) -> &mut Arr, fn(f64) -> f64);

fn unary_table() -> Vec<Pair> {
    vec![
        (Arr::sin, Arr::sin_, f64::sin),
        (Arr::cos, Arr::cos_, f64::cos),
        (Arr::tan, Arr::tan_, f64::tan),
        (Arr::tanh, Arr::tanh_, f64::tanh),
        (Arr::exp, Arr::exp_, f64::exp),
        (Arr::log, Arr::log_, f64::ln),
        (Arr::sqrt, Arr::sqrt_, f64::sqrt),
        (Arr::abs, Arr::abs_, f64::abs),
        (Arr::ceil, Arr::ceil_, f64::ceil),
        (Arr::floor, Arr::floor_, f64::floor),
        (Arr::relu, Arr::relu_, |v| if v > 0.0 { v } else { 0.0 }),
        (Arr::neg, Arr::neg_, |v| -v),
        (Arr::sqr, Arr::sqr_, |v| v * v),
        (Arr::sigmoid, Arr::sigmoid_, |v| 1.0 / (1.0 + (-v).exp())),
    ]
}

proptest! {
    #[test]
    fn data_length_matches_shape(s in shape_strategy()) {
        for a in [Arr::zeros(&s).unwrap(), Arr::ones(&s).unwrap(), Arr::sequential(&s).unwrap(), Arr::uniform(&s, 1).unwrap()] {
            prop_assert_eq!(a.data().len(), s.iter().product::<usize>());
        }
    }

    #[test]
    fn vmath_equals_scalar_map_and_in_place(x in array_strategy()) {
        for (f, f_, g) in unary_table() {
            let v = f(&x);
            prop_assert!(v.bitwise_eq(&x.map(g)));
            let mut y = x.clone();
            let ptr = y.data().as_ptr();
            let same = f_(&mut y).data().as_ptr() == ptr;
            prop_assert!(same);
            prop_assert!(y.bitwise_eq(&v));
        }
    }

    #[test]
    fn fold_matches_loop(x in array_strategy()) {
        let mut acc = 0.0;
        for &v in x.data() {
            acc += v;
        }
        prop_assert_eq!(x.sum().to_bits(), acc.to_bits());
        let mut via_iter = 0.0;
        x.iter(|v| via_iter += v);
        prop_assert_eq!(via_iter.to_bits(), acc.to_bits());
    }

    #[test]
    fn scan_last_equals_fold(x in array_strategy(), axis_pick in 0usize..4) {
        let axis = axis_pick % x.rank();
        let c = x.cumsum(axis).unwrap();
        let s = x.sum_axis(axis).unwrap();
        let shape = x.shape();
        let strides = x.strides();
        let n = shape[axis];
        // walk every position of the reduced array and compare with the last scan entry
        for (k, &sv) in s.data().iter().enumerate() {
            let mut rem = k;
            let mut off = 0;
            for d in (0..shape.len()).rev() {
                if d == axis {
                    continue;
                }
                off += (rem % shape[d]) * strides[d];
                rem /= shape[d];
            }
            let last = c.data()[off + (n - 1) * strides[axis]];
            prop_assert_eq!(last.to_bits(), sv.to_bits());
        }
    }

    #[test]
    fn reshape_flatten_sequential(s in shape_strategy()) {
        let n: usize = s.iter().product();
        let flat = Arr::sequential(&[n]).unwrap().reshape(&s).unwrap().flatten();
        let expected: Vec<f64> = (0..n).map(|i| i as f64).collect();
        prop_assert_eq!(flat.data(), expected.as_slice());
    }

    #[test]
    fn uniform_in_unit_interval(s in shape_strategy(), seed in any::<u64>()) {
        let a = Arr::uniform(&s, seed).unwrap();
        prop_assert!(a.data().iter().all(|v| (0.0..1.0).contains(v)));
        prop_assert!(a.bitwise_eq(&Arr::uniform(&s, seed).unwrap()));
    }

    #[test]
    fn axis_reductions_agree_with_loops(x in array_strategy()) {
        let cols = *x.shape().last().unwrap();
        let rows = x.numel() / cols;
        let last = x.rank() - 1;
        let mins = x.min_axis(last).unwrap();
        let maxs = x.max_axis(last).unwrap();
        for r in 0..rows {
            let row = &x.data()[r * cols..(r + 1) * cols];
            prop_assert_eq!(mins.data()[r], row.iter().cloned().fold(f64::INFINITY, f64::min));
            prop_assert_eq!(maxs.data()[r], row.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        }
        prop_assert!(x.std() >= 0.0);
    }
}

#[test]
fn iteration_counts() {
    let mut calls = 0usize;
    Arr::zeros(&[1000, 1000]).unwrap().iter(|_| calls += 1);
    assert_eq!(calls, 1_000_000);
    let mut one = 0;
    Arr::ones(&[1]).unwrap().iter(|_| one += 1);
    assert_eq!(one, 1);
}

#[test]
fn shape_errors() {
    assert!(matches!(Arr::zeros(&[]), Err(Error::InvalidShape(_))));
    assert!(matches!(Arr::zeros(&[2, 0]), Err(Error::InvalidShape(_))));
    assert!(Arr::sequential(&[2, 3]).unwrap().reshape(&[4]).is_err());
    let x = Arr::sequential(&[2, 3]).unwrap();
    assert!(matches!(x.sum_axis(2), Err(Error::AxisOutOfRange { .. })));
}

#[test]
fn f32_kind_shares_the_implementation() {
    let x = Ndarray::<f32>::sequential(&[2, 3]).unwrap();
    assert_eq!(x.kind(), strix::Kind::F32);
    assert_eq!(x.cumsum(1).unwrap().data(), &[0.0, 1.0, 3.0, 3.0, 7.0, 12.0]);
    assert_eq!(x.sum(), 15.0);
}
