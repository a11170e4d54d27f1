//! Differentiable operations and their derivative rules.

use std::ops;

use super::{AdValue, Arr, BinOp, RevNode, RevOp, UnOp};
use crate::error::{Error, Result};
use crate::ndarray::scalar;

fn elementwise(op: &UnOp) -> Option<fn(f64) -> f64> {
    Some(match op {
        UnOp::Neg => scalar::neg,
        UnOp::Sin => f64::sin,
        UnOp::Cos => f64::cos,
        UnOp::Tan => f64::tan,
        UnOp::Sqrt => f64::sqrt,
        UnOp::Exp => f64::exp,
        UnOp::Log => f64::ln,
        UnOp::Relu => scalar::relu,
        UnOp::Tanh => f64::tanh,
        UnOp::Sigmoid => scalar::sigmoid,
        _ => return None,
    })
}

fn const_unary(op: &UnOp, c: &AdValue) -> Result<AdValue> {
    if let Some(f) = elementwise(op) {
        return Ok(match c {
            AdValue::F(v) => AdValue::F(f(*v)),
            AdValue::Arr(a) => AdValue::array(a.map(f)),
            _ => unreachable!(),
        });
    }
    match (op, c) {
        (UnOp::Clamp(lo, hi), AdValue::F(v)) => Ok(AdValue::F(v.max(*lo).min(*hi))),
        (UnOp::Clamp(lo, hi), AdValue::Arr(a)) => {
            Ok(AdValue::array(a.map(|v| v.max(*lo).min(*hi))))
        }
        (UnOp::Sum, AdValue::F(v)) => Ok(AdValue::F(*v)),
        (UnOp::Sum, AdValue::Arr(a)) => Ok(AdValue::F(a.sum())),
        (UnOp::SumKeep(axis), AdValue::Arr(a)) => {
            let mut shape = a.shape().to_vec();
            let s = a.sum_axis(*axis)?;
            shape[*axis] = 1;
            Ok(AdValue::array(s.reshape(&shape)?))
        }
        (UnOp::Transpose, AdValue::F(v)) => Ok(AdValue::F(*v)),
        (UnOp::Transpose, AdValue::Arr(a)) => Ok(AdValue::array(a.transpose()?)),
        (UnOp::Reshape(s), AdValue::Arr(a)) => Ok(AdValue::array((**a).clone().reshape(s)?)),
        (UnOp::Reshape(s), AdValue::F(v)) => Ok(AdValue::array(Arr::scalar(*v).reshape(s)?)),
        (UnOp::Expand(s), AdValue::F(v)) if s.is_empty() => Ok(AdValue::F(*v)),
        (UnOp::Expand(s), AdValue::F(v)) => Ok(AdValue::array(Arr::full(s, *v)?)),
        (UnOp::Expand(s), AdValue::Arr(a)) if a.shape() == s.as_slice() => Ok(c.clone()),
        (UnOp::Expand(s), AdValue::Arr(a)) if !s.is_empty() => Ok(AdValue::array(a.broadcast_to(s)?)),
        (UnOp::SumTo(s), AdValue::F(v)) if s.is_empty() => Ok(AdValue::F(*v)),
        (UnOp::SumTo(s), AdValue::Arr(a)) if s.is_empty() => Ok(AdValue::F(a.sum())),
        (UnOp::SumTo(s), AdValue::Arr(a)) if a.shape() == s.as_slice() => Ok(c.clone()),
        (UnOp::SumTo(s), AdValue::Arr(a)) => Ok(AdValue::array(a.sum_to(s)?)),
        _ => Err(Error::Contract(format!(
            "{} is not defined for {:?}",
            op.name(),
            c.shape()
        ))),
    }
}

fn const_binary(op: BinOp, a: &AdValue, b: &AdValue) -> Result<AdValue> {
    use AdValue::{Arr as A, F};
    let f: fn(f64, f64) -> f64 = match op {
        BinOp::Add => |x, y| x + y,
        BinOp::Sub => |x, y| x - y,
        BinOp::Mul => |x, y| x * y,
        BinOp::Div => |x, y| x / y,
        BinOp::Pow => f64::powf,
        BinOp::MatMul => {
            return match (a, b) {
                (A(x), A(y)) => Ok(AdValue::array(x.matmul(y)?)),
                _ => Err(Error::Contract("matmul needs two matrices".into())),
            }
        }
    };
    Ok(match (a, b) {
        (F(x), F(y)) => F(f(*x, *y)),
        (F(x), A(y)) => AdValue::array(y.map(|v| f(*x, v))),
        (A(x), F(y)) => AdValue::array(x.map(|v| f(v, *y))),
        (A(x), A(y)) => AdValue::array(crate::broadcast::map2(x, y, f)?),
        _ => unreachable!(),
    })
}

pub(crate) fn unary(op: UnOp, a: &AdValue) -> Result<AdValue> {
    match a {
        AdValue::F(_) | AdValue::Arr(_) => const_unary(&op, a),
        AdValue::Forward(d) => {
            let cp = unary(op.clone(), &d.primal)?;
            let ct = tangent_unary(&op, &d.primal, &cp, &d.tangent)?;
            AdValue::make_forward(cp, ct, d.tag)
        }
        AdValue::Reverse(n) => {
            let cp = unary(op.clone(), &n.primal)?;
            Ok(AdValue::reverse_node(cp, RevOp::Unary(op, a.clone()), n.tag))
        }
    }
}

pub(crate) fn binary(op: BinOp, a: &AdValue, b: &AdValue) -> Result<AdValue> {
    let (ta, tb) = (a.tag(), b.tag());
    if ta == 0 && tb == 0 {
        return const_binary(op, a, b);
    }
    let tag = ta.max(tb);
    let (a_active, b_active) = (ta == tag, tb == tag);
    let forward = matches!(if a_active { a } else { b }, AdValue::Forward(_));
    if a_active && b_active && matches!(a, AdValue::Forward(_)) != matches!(b, AdValue::Forward(_)) {
        return Err(Error::Contract(format!(
            "forward and reverse values share tag {tag}"
        )));
    }
    let ap = if a_active { a.primal() } else { a.clone() };
    let bp = if b_active { b.primal() } else { b.clone() };
    let cp = binary(op, &ap, &bp)?;
    if forward {
        let at = a_active.then(|| a.tangent_at(tag));
        let bt = b_active.then(|| b.tangent_at(tag));
        let ct = tangent_binary(op, &ap, &bp, &cp, at, bt)?;
        AdValue::make_forward(cp, ct, tag)
    } else {
        let rop = RevOp::Binary {
            op,
            a: a.clone(),
            b: b.clone(),
            a_active,
            b_active,
        };
        Ok(AdValue::reverse_node(cp, rop, tag))
    }
}

/// Elementwise derivative factor for unary ops whose derivative is a
/// pointwise multiplier: `d out = d in * factor`.
fn unary_factor(op: &UnOp, x: &AdValue, y: &AdValue) -> Result<Option<AdValue>> {
    Ok(Some(match op {
        UnOp::Sin => x.cos(),
        UnOp::Cos => x.sin().neg(),
        UnOp::Tan => add(&AdValue::F(1.0), &mul(y, y)?)?,
        UnOp::Sqrt => div(&AdValue::F(0.5), y)?,
        UnOp::Exp => y.clone(),
        UnOp::Log => div(&AdValue::F(1.0), x)?,
        UnOp::Tanh => sub(&AdValue::F(1.0), &mul(y, y)?)?,
        UnOp::Sigmoid => mul(y, &sub(&AdValue::F(1.0), y)?)?,
        UnOp::Relu => const_mask(x, scalar::step),
        UnOp::Clamp(lo, hi) => {
            let (lo, hi) = (*lo, *hi);
            const_mask(x, move |v| if v >= lo && v <= hi { 1.0 } else { 0.0 })
        }
        _ => return Ok(None),
    }))
}

/// A piecewise-constant derivative evaluated on the raw value.
fn const_mask(x: &AdValue, f: impl Fn(f64) -> f64) -> AdValue {
    match x.raw() {
        AdValue::F(v) => AdValue::F(f(v)),
        AdValue::Arr(a) => AdValue::array(a.map(f)),
        _ => unreachable!(),
    }
}

fn tangent_unary(op: &UnOp, x: &AdValue, y: &AdValue, t: &AdValue) -> Result<AdValue> {
    if let Some(k) = unary_factor(op, x, y)? {
        return mul(t, &k);
    }
    // The remaining ops are linear, so the tangent goes through the op itself.
    unary(op.clone(), t)
}

fn tangent_binary(
    op: BinOp,
    a: &AdValue,
    b: &AdValue,
    c: &AdValue,
    at: Option<AdValue>,
    bt: Option<AdValue>,
) -> Result<AdValue> {
    let shape = c.shape();
    let ta = |t: &AdValue| -> Result<AdValue> {
        match op {
            BinOp::Add | BinOp::Sub => t.expand(&shape),
            BinOp::Mul => mul(t, b),
            BinOp::Div => div(t, b),
            BinOp::Pow => mul(t, &mul(b, &pow(a, &sub(b, &AdValue::F(1.0))?)?)?),
            BinOp::MatMul => matmul(t, b),
        }
    };
    let tb = |t: &AdValue| -> Result<AdValue> {
        match op {
            BinOp::Add => t.expand(&shape),
            BinOp::Sub => t.neg().expand(&shape),
            BinOp::Mul => mul(a, t),
            BinOp::Div => Ok(div(&mul(t, c)?, b)?.neg()),
            BinOp::Pow => mul(t, &mul(c, &a.log())?),
            BinOp::MatMul => matmul(a, t),
        }
    };
    match (at, bt) {
        (Some(x), Some(y)) => add(&ta(&x)?, &tb(&y)?),
        (Some(x), None) => ta(&x),
        (None, Some(y)) => tb(&y),
        (None, None) => Ok(c.zeros_like()),
    }
}

/// Parent contributions of one node given its accumulated adjoint.
pub(crate) fn backward(n: &RevNode, d: &AdValue) -> Result<Vec<(AdValue, AdValue)>> {
    match &n.op {
        RevOp::Input => Ok(vec![]),
        RevOp::Unary(op, a) => {
            let x = a.primal();
            let contrib = if let Some(k) = unary_factor(op, &x, &n.primal)? {
                mul(d, &k)?
            } else {
                match op {
                    UnOp::Neg => d.neg(),
                    UnOp::Sum | UnOp::SumKeep(_) | UnOp::SumTo(_) => d.expand(&x.shape())?,
                    UnOp::Expand(_) => d.sum_to(&x.shape())?,
                    UnOp::Transpose => d.transpose()?,
                    UnOp::Reshape(_) => d.reshape(&x.shape())?,
                    _ => unreachable!("{op:?} has a pointwise factor"),
                }
            };
            Ok(vec![(contrib, a.clone())])
        }
        RevOp::Binary {
            op,
            a,
            b,
            a_active,
            b_active,
        } => {
            let ap = if *a_active { a.primal() } else { a.clone() };
            let bp = if *b_active { b.primal() } else { b.clone() };
            let c = &n.primal;
            let mut out = Vec::with_capacity(2);
            if *a_active {
                let g = match op {
                    BinOp::Add | BinOp::Sub => d.clone(),
                    BinOp::Mul => mul(d, &bp)?,
                    BinOp::Div => div(d, &bp)?,
                    BinOp::Pow => mul(d, &mul(&bp, &pow(&ap, &sub(&bp, &AdValue::F(1.0))?)?)?)?,
                    BinOp::MatMul => matmul(d, &bp.transpose()?)?,
                };
                out.push((g.sum_to(&ap.shape())?, a.clone()));
            }
            if *b_active {
                let g = match op {
                    BinOp::Add => d.clone(),
                    BinOp::Sub => d.neg(),
                    BinOp::Mul => mul(d, &ap)?,
                    BinOp::Div => div(&mul(d, c)?, &bp)?.neg(),
                    BinOp::Pow => mul(d, &mul(c, &ap.log())?)?,
                    BinOp::MatMul => matmul(&ap.transpose()?, d)?,
                };
                out.push((g.sum_to(&bp.shape())?, b.clone()));
            }
            Ok(out)
        }
    }
}

pub fn add(a: &AdValue, b: &AdValue) -> Result<AdValue> {
    binary(BinOp::Add, a, b)
}

pub fn sub(a: &AdValue, b: &AdValue) -> Result<AdValue> {
    binary(BinOp::Sub, a, b)
}

pub fn mul(a: &AdValue, b: &AdValue) -> Result<AdValue> {
    binary(BinOp::Mul, a, b)
}

pub fn div(a: &AdValue, b: &AdValue) -> Result<AdValue> {
    binary(BinOp::Div, a, b)
}

pub fn pow(a: &AdValue, b: &AdValue) -> Result<AdValue> {
    binary(BinOp::Pow, a, b)
}

pub fn matmul(a: &AdValue, b: &AdValue) -> Result<AdValue> {
    binary(BinOp::MatMul, a, b)
}

macro_rules! pointwise {
    ($($name:ident => $op:expr;)*) => {
        impl AdValue {
            $(
                pub fn $name(&self) -> AdValue {
                    unary($op, self).expect("pointwise ops preserve shape")
                }
            )*
        }
    };
}

pointwise! {
    neg => UnOp::Neg;
    sin => UnOp::Sin;
    cos => UnOp::Cos;
    tan => UnOp::Tan;
    sqrt => UnOp::Sqrt;
    exp => UnOp::Exp;
    log => UnOp::Log;
    relu => UnOp::Relu;
    tanh => UnOp::Tanh;
    sigmoid => UnOp::Sigmoid;
    sum => UnOp::Sum;
}

impl AdValue {
    pub fn sqr(&self) -> AdValue {
        mul(self, self).expect("same shape")
    }

    /// Clamps into `[lo, hi]`; the derivative is 1 inside and 0 outside.
    pub fn clamp(&self, lo: f64, hi: f64) -> AdValue {
        unary(UnOp::Clamp(lo, hi), self).expect("pointwise ops preserve shape")
    }

    /// Sum along `axis`, keeping that axis with size 1.
    pub fn sum_axis(&self, axis: usize) -> Result<AdValue> {
        unary(UnOp::SumKeep(axis), self)
    }

    pub fn transpose(&self) -> Result<AdValue> {
        unary(UnOp::Transpose, self)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<AdValue> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        unary(UnOp::Reshape(shape.to_vec()), self)
    }

    /// Broadcasts to `shape`; an empty shape means scalar.
    pub fn expand(&self, shape: &[usize]) -> Result<AdValue> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        unary(UnOp::Expand(shape.to_vec()), self)
    }

    /// Sums broadcast dimensions away so the result has `shape`.
    pub fn sum_to(&self, shape: &[usize]) -> Result<AdValue> {
        if self.shape() == shape {
            return Ok(self.clone());
        }
        unary(UnOp::SumTo(shape.to_vec()), self)
    }

    /// Row-wise softmax of a matrix, shifted by the row maximum.
    pub fn softmax_rows(&self) -> Result<AdValue> {
        let raw = self.to_array();
        let shift = AdValue::array(raw.max_axis(1)?.reshape(&[raw.shape()[0], 1])?);
        let e = sub(self, &shift)?.exp();
        div(&e, &e.sum_axis(1)?)
    }

    pub fn matmul(&self, other: &AdValue) -> Result<AdValue> {
        matmul(self, other)
    }
}

fn or_panic(r: Result<AdValue>) -> AdValue {
    r.unwrap_or_else(|e| panic!("{e}"))
}

macro_rules! operator {
    ($trait:ident, $method:ident, $f:ident) => {
        impl ops::$trait<&AdValue> for &AdValue {
            type Output = AdValue;
            fn $method(self, rhs: &AdValue) -> AdValue {
                or_panic($f(self, rhs))
            }
        }
        impl ops::$trait<AdValue> for AdValue {
            type Output = AdValue;
            fn $method(self, rhs: AdValue) -> AdValue {
                or_panic($f(&self, &rhs))
            }
        }
        impl ops::$trait<&AdValue> for AdValue {
            type Output = AdValue;
            fn $method(self, rhs: &AdValue) -> AdValue {
                or_panic($f(&self, rhs))
            }
        }
        impl ops::$trait<AdValue> for &AdValue {
            type Output = AdValue;
            fn $method(self, rhs: AdValue) -> AdValue {
                or_panic($f(self, &rhs))
            }
        }
        impl ops::$trait<f64> for AdValue {
            type Output = AdValue;
            fn $method(self, rhs: f64) -> AdValue {
                or_panic($f(&self, &AdValue::F(rhs)))
            }
        }
        impl ops::$trait<f64> for &AdValue {
            type Output = AdValue;
            fn $method(self, rhs: f64) -> AdValue {
                or_panic($f(self, &AdValue::F(rhs)))
            }
        }
        impl ops::$trait<AdValue> for f64 {
            type Output = AdValue;
            fn $method(self, rhs: AdValue) -> AdValue {
                or_panic($f(&AdValue::F(self), &rhs))
            }
        }
    };
}

// Operators panic on shape errors; use the free functions to get a Result.
operator!(Add, add, add);
operator!(Sub, sub, sub);
operator!(Mul, mul, mul);
operator!(Div, div, div);

impl ops::Neg for AdValue {
    type Output = AdValue;
    fn neg(self) -> AdValue {
        AdValue::neg(&self)
    }
}

impl ops::Neg for &AdValue {
    type Output = AdValue;
    fn neg(self) -> AdValue {
        AdValue::neg(self)
    }
}
