//! Dense row-major n-dimensional arrays.
//!
//! Everything elementwise is expressed through three primitives:
//! [`Ndarray::map`], [`Ndarray::fold`] and [`Ndarray::scan`]. The vectorised
//! maths functions (`sin`, `relu`, ...) are `map` instances and each has an
//! in-place twin with a trailing underscore (`sin_`) that overwrites the
//! receiver's buffer.

pub(crate) mod text;

pub use text::AnyArray;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::element::{Element, Kind};
use crate::error::{Error, Result};

/// Arrays at or above this many elements are split across threads by
/// [`Ndarray::map_par`].
pub const PAR_THRESHOLD: usize = 1 << 16;

/// Scalar kernels shared by the array, lazy-graph and differentiation layers.
pub mod scalar {
    use num_traits::Float;

    #[inline]
    pub fn relu<T: Float>(v: T) -> T {
        if v > T::zero() {
            v
        } else {
            T::zero()
        }
    }

    #[inline]
    pub fn sigmoid<T: Float>(v: T) -> T {
        T::one() / (T::one() + (-v).exp())
    }

    #[inline]
    pub fn neg<T: Float>(v: T) -> T {
        -v
    }

    /// Unit step used as the derivative of relu; 0 at the kink.
    #[inline]
    pub fn step<T: Float>(v: T) -> T {
        if v > T::zero() {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// How [`Ndarray::create`] fills a fresh array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Zeros,
    Ones,
    /// 0, 1, 2, ... in row-major order.
    Sequential,
    /// i.i.d. U[0, 1) from a xoshiro256++ generator seeded with `seed`.
    Uniform { seed: u64 },
}

/// Validates a shape and returns its element count.
pub fn numel_of(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidShape(shape.to_vec()))
}

/// Row-major strides for `shape`.
pub fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for d in (0..shape.len().saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    strides
}

/// Splits `shape` around `axis` into (outer, len, inner) extents.
fn lanes(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ndarray<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

macro_rules! vmath {
    ($( $(#[$meta:meta])* $name:ident, $inplace:ident => $f:expr; )*) => {
        $(
            $(#[$meta])*
            pub fn $name(&self) -> Self {
                self.map($f)
            }

            pub fn $inplace(&mut self) -> &mut Self {
                self.map_($f)
            }
        )*
    };
}

impl<T: Element> Ndarray<T> {
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = numel_of(shape)?;
        if n != data.len() {
            return Err(Error::ReshapeMismatch {
                from: vec![data.len()],
                to: shape.to_vec(),
                from_len: data.len(),
                to_len: n,
            });
        }
        Ok(Ndarray {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn create(shape: &[usize], fill: Fill) -> Result<Self> {
        let n = numel_of(shape)?;
        let data = match fill {
            Fill::Zeros => vec![T::zero(); n],
            Fill::Ones => vec![T::one(); n],
            Fill::Sequential => (0..n).map(|i| T::from_f64(i as f64)).collect(),
            Fill::Uniform { seed } => {
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
                (0..n).map(|_| T::sample_unit(&mut rng)).collect()
            }
        };
        Ok(Ndarray {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::create(shape, Fill::Zeros)
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::create(shape, Fill::Ones)
    }

    pub fn sequential(shape: &[usize]) -> Result<Self> {
        Self::create(shape, Fill::Sequential)
    }

    pub fn uniform(shape: &[usize], seed: u64) -> Result<Self> {
        Self::create(shape, Fill::Uniform { seed })
    }

    /// Uniform samples drawn from a caller-owned generator.
    pub fn uniform_with<R: rand::Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Result<Self> {
        let n = numel_of(shape)?;
        let data = (0..n).map(|_| T::sample_unit(rng)).collect();
        Ok(Ndarray {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn full(shape: &[usize], v: T) -> Result<Self> {
        let n = numel_of(shape)?;
        Ok(Ndarray {
            shape: shape.to_vec(),
            data: vec![v; n],
        })
    }

    /// Shape-`[1]` array holding `v`.
    pub fn scalar(v: T) -> Self {
        Ndarray {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn eye(n: usize) -> Result<Self> {
        let mut a = Self::zeros(&[n, n])?;
        for i in 0..n {
            a.data[i * n + i] = T::one();
        }
        Ok(a)
    }

    pub fn kind(&self) -> Kind {
        T::KIND
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.shape)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    fn offset(&self, index: &[usize]) -> Option<usize> {
        if index.len() != self.shape.len() {
            return None;
        }
        let mut off = 0;
        for ((&i, &d), s) in index.iter().zip(&self.shape).zip(self.strides()) {
            if i >= d {
                return None;
            }
            off += i * s;
        }
        Some(off)
    }

    pub fn get(&self, index: &[usize]) -> Option<T> {
        self.offset(index).map(|o| self.data[o])
    }

    pub fn set(&mut self, index: &[usize], v: T) -> Result<()> {
        let off = self.offset(index).ok_or_else(|| Error::ShapeMismatch {
            expected: self.shape.clone(),
            got: index.to_vec(),
        })?;
        self.data[off] = v;
        Ok(())
    }

    /// First element; the value of a shape-`[1]` array.
    pub fn first(&self) -> T {
        self.data[0]
    }

    pub fn map<F: Fn(T) -> T>(&self, f: F) -> Self {
        Ndarray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn map_<F: Fn(T) -> T>(&mut self, f: F) -> &mut Self {
        self.data.iter_mut().for_each(|v| *v = f(*v));
        self
    }

    /// Same result as [`map`](Self::map); large arrays are split into
    /// contiguous chunks processed on scoped threads.
    pub fn map_par<F: Fn(T) -> T + Sync>(&self, f: F) -> Self {
        let n = self.data.len();
        let threads = std::thread::available_parallelism().map_or(1, |p| p.get());
        if n < PAR_THRESHOLD || threads < 2 {
            return self.map(f);
        }
        let mut out = self.data.clone();
        let chunk = n.div_ceil(threads);
        std::thread::scope(|s| {
            for part in out.chunks_mut(chunk) {
                let f = &f;
                s.spawn(move || part.iter_mut().for_each(|v| *v = f(*v)));
            }
        });
        Ndarray {
            shape: self.shape.clone(),
            data: out,
        }
    }

    /// Applies `f` to every element in row-major order.
    pub fn iter<F: FnMut(T)>(&self, mut f: F) {
        for &v in &self.data {
            f(v);
        }
    }

    /// Left fold over all elements in row-major order.
    pub fn fold<A, F: Fn(A, T) -> A>(&self, init: A, f: F) -> A {
        self.data.iter().fold(init, |acc, &v| f(acc, v))
    }

    /// Folds every lane along `axis`. The axis is removed from the output
    /// shape; folding a rank-1 array yields shape `[1]`.
    pub fn fold_axis<F: Fn(T, T) -> T>(&self, axis: usize, init: T, f: F) -> Result<Self> {
        self.check_axis(axis)?;
        let (outer, len, inner) = lanes(&self.shape, axis);
        let mut out = vec![init; outer * inner];
        for o in 0..outer {
            let base = o * len * inner;
            for k in 0..len {
                let row = &self.data[base + k * inner..base + (k + 1) * inner];
                for (acc, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc = f(*acc, v);
                }
            }
        }
        Ok(Ndarray {
            shape: self.reduced_shape(axis),
            data: out,
        })
    }

    /// Prefix accumulation along `axis`: `out[0] = x[0]`,
    /// `out[k] = f(out[k-1], x[k])`.
    pub fn scan<F: Fn(T, T) -> T>(&self, axis: usize, f: F) -> Result<Self> {
        self.check_axis(axis)?;
        let (outer, len, inner) = lanes(&self.shape, axis);
        let mut out = self.data.clone();
        for o in 0..outer {
            let base = o * len * inner;
            for k in 1..len {
                for i in 0..inner {
                    let cur = base + k * inner + i;
                    out[cur] = f(out[cur - inner], out[cur]);
                }
            }
        }
        Ok(Ndarray {
            shape: self.shape.clone(),
            data: out,
        })
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.rank() {
            return Err(Error::AxisOutOfRange {
                axis,
                rank: self.rank(),
            });
        }
        Ok(())
    }

    fn reduced_shape(&self, axis: usize) -> Vec<usize> {
        let mut shape = self.shape.clone();
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        shape
    }

    pub fn sum(&self) -> T {
        self.fold(T::zero(), |a, v| a + v)
    }

    pub fn min(&self) -> T {
        self.fold(T::infinity(), |a, v| a.min(v))
    }

    pub fn max(&self) -> T {
        self.fold(T::neg_infinity(), |a, v| a.max(v))
    }

    pub fn mean(&self) -> T {
        self.sum() / T::from_f64(self.numel() as f64)
    }

    /// Population standard deviation.
    pub fn std(&self) -> T {
        let mu = self.mean();
        let ss = self.fold(T::zero(), |a, v| a + (v - mu) * (v - mu));
        (ss / T::from_f64(self.numel() as f64)).sqrt()
    }

    pub fn sum_axis(&self, axis: usize) -> Result<Self> {
        self.fold_axis(axis, T::zero(), |a, v| a + v)
    }

    pub fn min_axis(&self, axis: usize) -> Result<Self> {
        self.fold_axis(axis, T::infinity(), |a, v| a.min(v))
    }

    pub fn max_axis(&self, axis: usize) -> Result<Self> {
        self.fold_axis(axis, T::neg_infinity(), |a, v| a.max(v))
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Self> {
        let n = T::from_f64(self.shape.get(axis).copied().unwrap_or(1) as f64);
        Ok(self.sum_axis(axis)?.map(|v| v / n))
    }

    pub fn std_axis(&self, axis: usize) -> Result<Self> {
        self.check_axis(axis)?;
        let mean = self.mean_axis(axis)?;
        let (outer, len, inner) = lanes(&self.shape, axis);
        let mut ss = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for k in 0..len {
                for i in 0..inner {
                    let d = self.data[(o * len + k) * inner + i] - mean.data[o * inner + i];
                    ss[o * inner + i] = ss[o * inner + i] + d * d;
                }
            }
        }
        let n = T::from_f64(len as f64);
        Ok(Ndarray {
            shape: mean.shape,
            data: ss.into_iter().map(|v| (v / n).sqrt()).collect(),
        })
    }

    pub fn cumsum(&self, axis: usize) -> Result<Self> {
        self.scan(axis, |a, v| a + v)
    }

    pub fn cumprod(&self, axis: usize) -> Result<Self> {
        self.scan(axis, |a, v| a * v)
    }

    pub fn cummin(&self, axis: usize) -> Result<Self> {
        self.scan(axis, |a, v| a.min(v))
    }

    pub fn cummax(&self, axis: usize) -> Result<Self> {
        self.scan(axis, |a, v| a.max(v))
    }

    vmath! {
        sin, sin_ => |v: T| v.sin();
        cos, cos_ => |v: T| v.cos();
        tan, tan_ => |v: T| v.tan();
        tanh, tanh_ => |v: T| v.tanh();
        exp, exp_ => |v: T| v.exp();
        /// Natural logarithm; negative inputs give NaN.
        log, log_ => |v: T| v.ln();
        sqrt, sqrt_ => |v: T| v.sqrt();
        neg, neg_ => scalar::neg;
        abs, abs_ => |v: T| v.abs();
        sqr, sqr_ => |v: T| v * v;
        relu, relu_ => scalar::relu;
        ceil, ceil_ => |v: T| v.ceil();
        floor, floor_ => |v: T| v.floor();
        sigmoid, sigmoid_ => scalar::sigmoid;
    }

    /// Reinterprets the buffer under a new shape without copying.
    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let n = numel_of(shape)?;
        if n != self.data.len() {
            return Err(Error::ReshapeMismatch {
                from: self.shape,
                to: shape.to_vec(),
                from_len: self.data.len(),
                to_len: n,
            });
        }
        Ok(Ndarray {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    pub fn flatten(self) -> Self {
        let n = self.data.len();
        Ndarray {
            shape: vec![n],
            data: self.data,
        }
    }

    /// Element-wise comparison with a tolerance, for tests and diagnostics.
    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| (a - b).abs() <= tol)
    }

    /// True when both arrays have the same shape and identical bit patterns.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits_u64() == b.to_bits_u64())
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Ndarray { shape, data }
    }
}

impl Ndarray<f64> {
    pub fn to_f32(&self) -> Ndarray<f32> {
        Ndarray {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| v as f32).collect(),
        }
    }
}
