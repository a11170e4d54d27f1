//! Derivative operators.

use super::{next_tag, reverse_prop, AdValue, Arr};
use crate::error::{Error, Result};

/// Derivative of a scalar function at an arbitrary (possibly already
/// differentiated) point. Forward mode with tangent 1.
pub fn diff_ad<F>(f: F, x: &AdValue) -> Result<AdValue>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let tag = next_tag();
    let seed = AdValue::make_forward(x.clone(), x.ones_like(), tag)?;
    Ok(f(&seed)?.tangent_at(tag))
}

/// `(f(x), f'(x))`.
pub fn diff_value<F>(f: F, x: f64) -> Result<(f64, f64)>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let tag = next_tag();
    let seed = AdValue::make_forward(AdValue::F(x), AdValue::F(1.0), tag)?;
    let y = f(&seed)?;
    let value = scalar_of(&y.primal_at(tag))?;
    let slope = scalar_of(&y.tangent_at(tag))?;
    Ok((value, slope))
}

pub fn diff<F>(f: F, x: f64) -> Result<f64>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    diff_value(f, x).map(|(_, d)| d)
}

fn scalar_of(v: &AdValue) -> Result<f64> {
    v.to_f64()
        .ok_or_else(|| Error::Contract(format!("expected a scalar, got shape {:?}", v.shape())))
}

fn check_scalar_output(y: &AdValue) -> Result<()> {
    if !y.is_scalar() {
        return Err(Error::Contract(format!(
            "gradient needs a scalar output, got shape {:?}",
            y.shape()
        )));
    }
    Ok(())
}

/// Runs `f` on reverse-mode copies of `xs`, sweeps back from the scalar
/// output and returns the output value at this level with one adjoint per
/// input.
fn reverse_many<F>(f: F, xs: &[AdValue]) -> Result<(AdValue, Vec<AdValue>)>
where
    F: Fn(&[AdValue]) -> Result<AdValue>,
{
    let tag = next_tag();
    let inputs: Vec<AdValue> = xs
        .iter()
        .map(|x| AdValue::make_reverse(x.clone(), tag))
        .collect();
    let y = f(&inputs)?;
    check_scalar_output(&y)?;
    if y.tag() == tag && matches!(y, AdValue::Reverse(_)) {
        reverse_prop(&y.ones_like(), &y)?;
        let grads = inputs
            .iter()
            .map(|x| x.adjoint().expect("reverse input"))
            .collect();
        Ok((y.primal(), grads))
    } else {
        Ok((y.clone(), xs.iter().map(AdValue::zeros_like).collect()))
    }
}

/// Gradient at an arbitrary (possibly already differentiated) point.
pub fn grad_ad<F>(f: F, x: &AdValue) -> Result<AdValue>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let (_, mut g) = reverse_many(|xs| f(&xs[0]), std::slice::from_ref(x))?;
    Ok(g.pop().expect("one input"))
}

/// `(f(x), ∇f(x))` for a scalar-valued `f`.
pub fn grad_value<F>(f: F, x: &Arr) -> Result<(f64, Arr)>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let (y, mut g) = reverse_many(|xs| f(&xs[0]), &[AdValue::array(x.clone())])?;
    Ok((scalar_of(&y)?, g.pop().expect("one input").to_array()))
}

pub fn grad<F>(f: F, x: &Arr) -> Result<Arr>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    grad_value(f, x).map(|(_, g)| g)
}

/// Value and gradients of a scalar function of several arrays.
pub fn value_and_grads<F>(f: F, xs: &[Arr]) -> Result<(f64, Vec<Arr>)>
where
    F: Fn(&[AdValue]) -> Result<AdValue>,
{
    let inputs: Vec<AdValue> = xs.iter().cloned().map(AdValue::array).collect();
    let (y, grads) = reverse_many(f, &inputs)?;
    Ok((
        scalar_of(&y)?,
        grads.iter().map(AdValue::to_array).collect(),
    ))
}

/// Jacobian `[m; n]` of `f: R^n -> R^m` (inputs and outputs flattened),
/// one reverse sweep per output.
pub fn jacobian<F>(f: F, x: &Arr) -> Result<Arr>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let tag = next_tag();
    let input = AdValue::make_reverse(AdValue::array(x.clone()), tag);
    let y = f(&input)?;
    let yshape = y.shape();
    let m = yshape.iter().product::<usize>().max(1);
    let n = x.numel();
    let mut out = vec![0.0; m * n];
    if y.tag() == tag && matches!(y, AdValue::Reverse(_)) {
        for i in 0..m {
            let seed = if yshape.is_empty() {
                AdValue::F(1.0)
            } else {
                let mut e = Arr::zeros(&yshape)?;
                e.data_mut()[i] = 1.0;
                AdValue::array(e)
            };
            reverse_prop(&seed, &y)?;
            let g = input.adjoint().expect("reverse input").to_array();
            out[i * n..(i + 1) * n].copy_from_slice(g.data());
        }
    }
    Arr::from_vec(&[m, n], out)
}

/// Hessian `[n; n]` of a scalar function, forward-over-reverse: column j is
/// the directional derivative of the gradient along the j-th basis vector.
pub fn hessian<F>(f: F, x: &Arr) -> Result<Arr>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let n = x.numel();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        let tag = next_tag();
        let mut e = Arr::zeros(x.shape())?;
        e.data_mut()[j] = 1.0;
        let xd = AdValue::make_forward(AdValue::array(x.clone()), AdValue::array(e), tag)?;
        let g = grad_ad(&f, &xd)?;
        let col = g.tangent_at(tag).to_array();
        for (i, v) in col.data().iter().enumerate() {
            out[i * n + j] = *v;
        }
    }
    Arr::from_vec(&[n, n], out)
}

/// Jacobian-vector product: `(f(x), J v)`.
pub fn jvp<F>(f: F, x: &Arr, v: &Arr) -> Result<(Arr, Arr)>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let tag = next_tag();
    let xd = AdValue::make_forward(AdValue::array(x.clone()), AdValue::array(v.clone()), tag)?;
    let y = f(&xd)?;
    Ok((y.primal_at(tag).to_array(), y.tangent_at(tag).to_array()))
}

/// Vector-Jacobian product: `(f(x), vᵀ J)`; `v` has the output's shape.
pub fn vjp<F>(f: F, x: &Arr, v: &Arr) -> Result<(Arr, Arr)>
where
    F: Fn(&AdValue) -> Result<AdValue>,
{
    let tag = next_tag();
    let input = AdValue::make_reverse(AdValue::array(x.clone()), tag);
    let y = f(&input)?;
    if y.tag() != tag || !matches!(y, AdValue::Reverse(_)) {
        return Ok((y.to_array(), Arr::zeros(x.shape())?));
    }
    let seed = if y.shape().is_empty() {
        AdValue::F(v.first())
    } else {
        AdValue::array(v.clone())
    };
    reverse_prop(&seed, &y)?;
    Ok((
        y.primal().to_array(),
        input.adjoint().expect("reverse input").to_array(),
    ))
}
