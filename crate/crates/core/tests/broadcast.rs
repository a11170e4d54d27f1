mod common;

use common::*;
use proptest::prelude::*;
use strix::broadcast::{broadcast_plan, map2_strided};
use strix::Error;

/// Materialises `a` at `out` shape by copying with explicit index arithmetic.
fn tile(a: &Arr, out: &[usize]) -> Arr {
    let pad = out.len() - a.rank();
    let ashape: Vec<usize> = std::iter::repeat_n(1, pad).chain(a.shape().iter().copied()).collect();
    let n: usize = out.iter().product();
    let mut data = Vec::with_capacity(n);
    for lin in 0..n {
        let mut rem = lin;
        let mut idx = vec![0; out.len()];
        for d in (0..out.len()).rev() {
            idx[d] = rem % out[d];
            rem /= out[d];
        }
        let mut off = 0;
        for d in 0..out.len() {
            let i = if ashape[d] == 1 { 0 } else { idx[d] };
            off = off * ashape[d] + i;
        }
        data.push(a.data()[off]);
    }
    Arr::from_vec(out, data).unwrap()
}

/// An output shape plus two operand shapes that broadcast to it.
fn compatible() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, Vec<usize>)> {
    proptest::collection::vec(1usize..6, 1..5).prop_flat_map(|out| {
        let r = out.len();
        (
            Just(out),
            proptest::collection::vec(any::<bool>(), r),
            proptest::collection::vec(any::<bool>(), r),
            0..=r,
            0..=r,
        )
            .prop_map(|(out, ma, mb, da, db)| {
                let mk = |mask: &[bool], drop: usize| -> Vec<usize> {
                    let drop = drop.min(out.len() - 1);
                    out.iter()
                        .zip(mask)
                        .skip(drop)
                        .map(|(&n, &one)| if one { 1 } else { n })
                        .collect()
                };
                let (a, b) = (mk(&ma, da), mk(&mb, db));
                (out, a, b)
            })
    })
}

type Bin = (fn(&Arr, &Arr) -> strix::Result<Arr>, fn(f64, f64) -> f64);

fn binops() -> Vec<Bin> {
    vec![
        (Arr::add, |x, y| x + y),
        (Arr::sub, |x, y| x - y),
        (Arr::mul, |x, y| x * y),
        (Arr::div, |x, y| x / y),
        (Arr::pow, f64::powf),
        (Arr::min2, f64::min),
        (Arr::max2, f64::max),
        (Arr::atan2, f64::atan2),
        (Arr::rem, |x, y| x % y),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn binops_match_tiling((_, sa, sb) in compatible(), seed in any::<u64>()) {
        let a = Arr::uniform(&sa, seed).unwrap().map(|v| v + 0.5);
        let b = centered(&sb, seed ^ 7);
        let real_out: Vec<usize> = {
            let r = sa.len().max(sb.len());
            let pa: Vec<usize> = std::iter::repeat_n(1, r - sa.len()).chain(sa.iter().copied()).collect();
            let pb: Vec<usize> = std::iter::repeat_n(1, r - sb.len()).chain(sb.iter().copied()).collect();
            pa.iter().zip(&pb).map(|(&x, &y)| x.max(y)).collect()
        };
        let (ta, tb) = (tile(&a, &real_out), tile(&b, &real_out));
        for (op, f) in binops() {
            let got = op(&a, &b).unwrap();
            let expected = Arr::from_vec(&real_out, ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect()).unwrap();
            prop_assert!(got.bitwise_eq(&expected));
        }
    }

    #[test]
    fn incompatible_shapes_rejected(
        shape in proptest::collection::vec(2usize..6, 1..5),
        dim_pick in 0usize..4,
        bump in 1usize..4,
    ) {
        let d = dim_pick % shape.len();
        let mut other = shape.clone();
        other[d] += bump;
        let a = Arr::zeros(&shape).unwrap();
        let b = Arr::zeros(&other).unwrap();
        let rejected = matches!(a.add(&b), Err(Error::Broadcast { .. }));
        prop_assert!(rejected);
        prop_assert!(broadcast_plan(&shape, &other).is_err());
    }

    #[test]
    fn strided_kernel_agrees_with_fast_path(shape in proptest::collection::vec(1usize..6, 1..5), seed in any::<u64>()) {
        let a = centered(&shape, seed);
        let b = centered(&shape, seed + 1);
        let plan = broadcast_plan(&shape, &shape).unwrap();
        prop_assert!(plan.same_shape);
        let slow = map2_strided(&plan, &a, &b, |x, y| x * y + x);
        let fast = a.mul(&b).unwrap().add(&a).unwrap();
        prop_assert!(slow.bitwise_eq(&fast));
    }

    #[test]
    fn identities(shape in proptest::collection::vec(1usize..6, 1..4), seed in any::<u64>()) {
        let a = centered(&shape, seed);
        let b = centered(&shape, seed + 1);
        prop_assert!(a.add(&b).unwrap().bitwise_eq(&b.add(&a).unwrap()));
        prop_assert!(a.add(&Arr::zeros(&shape).unwrap()).unwrap().bitwise_eq(&a));
        prop_assert!(a.mul(&Arr::ones(&shape).unwrap()).unwrap().bitwise_eq(&a));
        prop_assert!(a.mul_scalar(1.0).bitwise_eq(&a));
        let all_gt = a.gt_elt(&b).unwrap().min() == 1.0;
        prop_assert_eq!(all_gt, a.gt(&b).unwrap());
        let all_eq = a.eq_elt(&a).unwrap().min() == 1.0;
        prop_assert!(all_eq && a.equal(&a).unwrap());
    }

    #[test]
    fn sum_to_inverts_tiling((out, sa, _) in compatible(), seed in any::<u64>()) {
        let a = centered(&sa, seed);
        let wide = a.broadcast_to(&out).unwrap();
        let copies = (out.iter().product::<usize>() / sa.iter().product::<usize>()) as f64;
        let back = wide.sum_to(&sa).unwrap();
        prop_assert!(back.approx_eq(&a.map(|v| v * copies), 1e-12));
    }
}
