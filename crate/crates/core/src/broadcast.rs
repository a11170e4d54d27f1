//! Implicit broadcasting for binary operators.
//!
//! The lower-rank operand is left-padded with ones, then each dimension pair
//! must be equal or contain a one. Same-shape operands skip the strided
//! kernel and run a single flat loop.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::ndarray::{strides_of, Ndarray};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stretch {
    None,
    /// Left operand has size 1 here and is repeated.
    Left,
    /// Right operand has size 1 here and is repeated.
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BroadcastPlan {
    pub a_shape: Vec<usize>,
    pub b_shape: Vec<usize>,
    pub out_shape: Vec<usize>,
    pub stretch: Vec<Stretch>,
    pub same_shape: bool,
}

fn pad(shape: &[usize], rank: usize) -> Vec<usize> {
    let mut out = vec![1; rank - shape.len()];
    out.extend_from_slice(shape);
    out
}

pub fn broadcast_plan(a: &[usize], b: &[usize]) -> Result<BroadcastPlan> {
    let rank = a.len().max(b.len());
    let pa = pad(a, rank);
    let pb = pad(b, rank);
    let mut out = Vec::with_capacity(rank);
    let mut stretch = Vec::with_capacity(rank);
    for (&x, &y) in pa.iter().zip(&pb) {
        let s = if x == y {
            Stretch::None
        } else if x == 1 {
            Stretch::Left
        } else if y == 1 {
            Stretch::Right
        } else {
            return Err(Error::Broadcast {
                a: a.to_vec(),
                b: b.to_vec(),
            });
        };
        out.push(x.max(y));
        stretch.push(s);
    }
    Ok(BroadcastPlan {
        same_shape: a == b,
        a_shape: pa,
        b_shape: pb,
        out_shape: out,
        stretch,
    })
}

/// Output shape of broadcasting `a` with `b`.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    Ok(broadcast_plan(a, b)?.out_shape)
}

fn stretched_strides(shape: &[usize]) -> Vec<usize> {
    strides_of(shape)
        .into_iter()
        .zip(shape)
        .map(|(s, &d)| if d == 1 { 0 } else { s })
        .collect()
}

/// Applies `f` pairwise under broadcasting.
pub fn map2<T: Element, F: Fn(T, T) -> T>(a: &Ndarray<T>, b: &Ndarray<T>, f: F) -> Result<Ndarray<T>> {
    let plan = broadcast_plan(a.shape(), b.shape())?;
    if plan.same_shape {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        return Ok(Ndarray::from_parts(plan.out_shape, data));
    }
    Ok(map2_strided(&plan, a, b, f))
}

/// The general strided kernel, usable on same-shape inputs as well.
pub fn map2_strided<T: Element, F: Fn(T, T) -> T>(
    plan: &BroadcastPlan,
    a: &Ndarray<T>,
    b: &Ndarray<T>,
    f: F,
) -> Ndarray<T> {
    let out_shape = &plan.out_shape;
    let rank = out_shape.len();
    let sa = stretched_strides(&plan.a_shape);
    let sb = stretched_strides(&plan.b_shape);
    let n: usize = out_shape.iter().product();
    let (da, db) = (a.data(), b.data());
    let mut out = Vec::with_capacity(n);
    let mut idx = vec![0usize; rank];
    let (mut oa, mut ob) = (0usize, 0usize);
    let inner = out_shape[rank - 1];
    let (ia, ib) = (sa[rank - 1], sb[rank - 1]);
    'outer: loop {
        for k in 0..inner {
            out.push(f(da[oa + k * ia], db[ob + k * ib]));
        }
        let mut d = rank - 1;
        loop {
            if d == 0 {
                break 'outer;
            }
            d -= 1;
            idx[d] += 1;
            oa += sa[d];
            ob += sb[d];
            if idx[d] < out_shape[d] {
                break;
            }
            oa -= sa[d] * idx[d];
            ob -= sb[d] * idx[d];
            idx[d] = 0;
        }
    }
    Ndarray::from_parts(out_shape.clone(), out)
}

/// Floating remainder with the sign of the dividend.
fn fmod<T: Element>(x: T, y: T) -> T {
    x % y
}

macro_rules! binops {
    ($( $(#[$meta:meta])* $name:ident, $scalar:ident, $scalar_l:ident => $f:expr; )*) => {
        impl<T: Element> Ndarray<T> {
            $(
                $(#[$meta])*
                pub fn $name(&self, other: &Self) -> Result<Self> {
                    map2(self, other, $f)
                }

                pub fn $scalar(&self, s: T) -> Self {
                    let f = $f;
                    self.map(|v| f(v, s))
                }

                pub fn $scalar_l(s: T, x: &Self) -> Self {
                    let f = $f;
                    x.map(|v| f(s, v))
                }
            )*
        }
    };
}

binops! {
    add, add_scalar, scalar_add => |x: T, y: T| x + y;
    sub, sub_scalar, scalar_sub => |x: T, y: T| x - y;
    mul, mul_scalar, scalar_mul => |x: T, y: T| x * y;
    div, div_scalar, scalar_div => |x: T, y: T| x / y;
    pow, pow_scalar, scalar_pow => |x: T, y: T| x.powf(y);
    /// Elementwise minimum.
    min2, min2_scalar, scalar_min2 => |x: T, y: T| x.min(y);
    max2, max2_scalar, scalar_max2 => |x: T, y: T| x.max(y);
    atan2, atan2_scalar, scalar_atan2 => |x: T, y: T| x.atan2(y);
    /// `%`: floating remainder.
    rem, rem_scalar, scalar_rem => fmod;
}

fn indicator<T: Element>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

impl<T: Element> Ndarray<T> {
    /// Same-shape in-place update `self[i] = f(self[i], other[i])`.
    pub fn zip_<F: Fn(T, T) -> T>(&mut self, other: &Self, f: F) -> Result<&mut Self> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape().to_vec(),
                got: other.shape().to_vec(),
            });
        }
        for (x, &y) in self.data_mut().iter_mut().zip(other.data()) {
            *x = f(*x, y);
        }
        Ok(self)
    }

    /// `>.`: 1 where `self > other`, else 0.
    pub fn gt_elt(&self, other: &Self) -> Result<Self> {
        map2(self, other, |x, y| indicator(x > y))
    }

    pub fn lt_elt(&self, other: &Self) -> Result<Self> {
        map2(self, other, |x, y| indicator(x < y))
    }

    pub fn ge_elt(&self, other: &Self) -> Result<Self> {
        map2(self, other, |x, y| indicator(x >= y))
    }

    pub fn le_elt(&self, other: &Self) -> Result<Self> {
        map2(self, other, |x, y| indicator(x <= y))
    }

    pub fn eq_elt(&self, other: &Self) -> Result<Self> {
        map2(self, other, |x, y| indicator(x == y))
    }

    pub fn ne_elt(&self, other: &Self) -> Result<Self> {
        map2(self, other, |x, y| indicator(x != y))
    }

    /// `>`: true when the relation holds for every broadcast element pair.
    pub fn gt(&self, other: &Self) -> Result<bool> {
        all_pairs(self, other, |x, y| x > y)
    }

    pub fn lt(&self, other: &Self) -> Result<bool> {
        all_pairs(self, other, |x, y| x < y)
    }

    pub fn ge(&self, other: &Self) -> Result<bool> {
        all_pairs(self, other, |x, y| x >= y)
    }

    pub fn le(&self, other: &Self) -> Result<bool> {
        all_pairs(self, other, |x, y| x <= y)
    }

    pub fn equal(&self, other: &Self) -> Result<bool> {
        all_pairs(self, other, |x, y| x == y)
    }

    /// Sums over broadcast dimensions so the result has shape `target`;
    /// the adjoint of broadcasting from `target` to `self.shape()`.
    pub fn sum_to(&self, target: &[usize]) -> Result<Self> {
        if self.shape() == target {
            return Ok(self.clone());
        }
        let plan = broadcast_plan(target, self.shape())?;
        if plan.out_shape != self.shape() {
            return Err(Error::Broadcast {
                a: target.to_vec(),
                b: self.shape().to_vec(),
            });
        }
        let mut acc = self.clone();
        for (d, s) in plan.stretch.iter().enumerate().rev() {
            if *s == Stretch::Left && acc.shape()[d] > 1 {
                let mut shape = acc.shape().to_vec();
                let reduced = acc.sum_axis(d)?;
                shape[d] = 1;
                acc = reduced.reshape(&shape)?;
            }
        }
        acc.reshape(target)
    }

    /// Materialises the broadcast of `self` to `target`.
    pub fn broadcast_to(&self, target: &[usize]) -> Result<Self> {
        let plan = broadcast_plan(self.shape(), target)?;
        if plan.out_shape != target {
            return Err(Error::Broadcast {
                a: self.shape().to_vec(),
                b: target.to_vec(),
            });
        }
        let zeros = Ndarray::zeros(target)?;
        map2(self, &zeros, |x, _| x)
    }
}

fn all_pairs<T: Element, F: Fn(T, T) -> bool>(a: &Ndarray<T>, b: &Ndarray<T>, f: F) -> Result<bool> {
    let m = map2(a, b, |x, y| indicator(f(x, y)))?;
    Ok(m.data().iter().all(|&v| v == T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    type A = Ndarray<f64>;

    fn v(d: &[f64]) -> A {
        A::from_vec(&[d.len()], d.to_vec()).unwrap()
    }

    #[test]
    fn plans() {
        let p = broadcast_plan(&[3, 1], &[1, 4]).unwrap();
        assert_eq!(p.out_shape, vec![3, 4]);
        assert_eq!(p.stretch, vec![Stretch::Right, Stretch::Left]);
        let q = broadcast_plan(&[5, 4], &[4]).unwrap();
        assert_eq!(q.b_shape, vec![1, 4]);
        assert_eq!(q.out_shape, vec![5, 4]);
        assert!(!q.same_shape);
        assert!(broadcast_plan(&[2, 2], &[2, 2]).unwrap().same_shape);
        assert!(matches!(broadcast_plan(&[3, 2], &[2, 2]), Err(Error::Broadcast { .. })));
    }

    #[test]
    fn binops() {
        assert_eq!(v(&[1., 2., 3.]).add(&v(&[10.])).unwrap().data(), &[11., 12., 13.]);
        let col = A::from_vec(&[3, 1], vec![0., 1., 2.]).unwrap();
        let row = A::from_vec(&[1, 3], vec![0., 10., 20.]).unwrap();
        let s = col.add(&row).unwrap();
        assert_eq!(s.shape(), &[3, 3]);
        assert_eq!(s.data(), &[0., 10., 20., 1., 11., 21., 2., 12., 22.]);
        let x = A::uniform(&[4, 3], 5).unwrap();
        assert!(x.add(&A::zeros(&[4, 3]).unwrap()).unwrap().bitwise_eq(&x));
        assert_eq!(v(&[7., -7.]).rem(&v(&[3.])).unwrap().data(), &[1., -1.]);
        assert_eq!(v(&[2.]).pow(&v(&[3.])).unwrap().data(), &[8.]);
        assert_eq!(v(&[1., 5.]).max2(&v(&[3.])).unwrap().data(), &[3., 5.]);
    }

    #[test]
    fn scalars() {
        assert_eq!(v(&[1., 2.]).add_scalar(1.).data(), &[2., 3.]);
        let x = A::uniform(&[3, 3], 1).unwrap();
        assert!(x.mul_scalar(1.0).bitwise_eq(&x));
        assert_eq!(A::scalar_sub(1., &v(&[0.25])).data(), &[0.75]);
        assert!(x.div_scalar(3.).bitwise_eq(&x.div(&A::scalar(3.)).unwrap()));
    }

    #[test]
    fn comparisons() {
        assert_eq!(v(&[1., 5.]).gt_elt(&v(&[3., 3.])).unwrap().data(), &[0., 1.]);
        let x = A::uniform(&[2, 3], 2).unwrap();
        assert!(x.equal(&x).unwrap());
        assert!(!v(&[1., 2.]).lt(&v(&[2., 2.])).unwrap());
        assert!(v(&[1., 2.]).le(&v(&[2., 2.])).unwrap());
        assert!(v(&[1., 2.]).gt(&v(&[1., 2., 3.])).is_err());
    }

    #[test]
    fn sum_to_and_broadcast_to() {
        let x = A::sequential(&[2, 3]).unwrap();
        assert_eq!(x.sum_to(&[1, 3]).unwrap().data(), &[3., 5., 7.]);
        assert_eq!(x.sum_to(&[3]).unwrap().data(), &[3., 5., 7.]);
        assert_eq!(x.sum_to(&[2, 1]).unwrap().data(), &[3., 12.]);
        assert_eq!(x.sum_to(&[1]).unwrap().data(), &[15.]);
        assert!(x.sum_to(&[4]).is_err());
        let r = v(&[1., 2.]).broadcast_to(&[3, 2]).unwrap();
        assert_eq!(r.data(), &[1., 2., 1., 2., 1., 2.]);
        assert!(r.broadcast_to(&[2]).is_err());
    }

    #[test]
    fn zip_inplace() {
        let mut a = v(&[1., 2.]);
        a.zip_(&v(&[3., 4.]), |x, y| x * y).unwrap();
        assert_eq!(a.data(), &[3., 8.]);
        assert!(a.zip_(&v(&[1.]), |x, _| x).is_err());
    }
}
