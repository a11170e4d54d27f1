//! Native dense linear algebra on rank-2 arrays.

use crate::element::Element;
use crate::error::{Error, Result};
use crate::ndarray::Ndarray;

fn dims<T: Element>(a: &Ndarray<T>) -> Result<(usize, usize)> {
    match *a.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::NotMatrix(a.shape().to_vec())),
    }
}

/// `out[i, :] += s * row` over two distinct rows of one buffer.
#[inline]
fn axpy<T: Element>(dst: &mut [T], s: T, src: &[T]) {
    for (d, &x) in dst.iter_mut().zip(src) {
        *d = *d + s * x;
    }
}

/// Product in i-k-j loop order; the accumulation order is fixed.
pub fn matmul<T: Element>(a: &Ndarray<T>, b: &Ndarray<T>) -> Result<Ndarray<T>> {
    let (m, k) = dims(a)?;
    let (k2, n) = dims(b)?;
    if k != k2 {
        return Err(Error::DimMismatch(format!(
            "matmul {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![T::zero(); m * n];
    let (da, db) = (a.data(), b.data());
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            axpy(row, da[i * k + p], &db[p * n..(p + 1) * n]);
        }
    }
    Ndarray::from_vec(&[m, n], out)
}

pub fn transpose<T: Element>(a: &Ndarray<T>) -> Result<Ndarray<T>> {
    let (r, c) = dims(a)?;
    let d = a.data();
    let mut out = Vec::with_capacity(r * c);
    for j in 0..c {
        out.extend((0..r).map(|i| d[i * c + j]));
    }
    Ndarray::from_vec(&[c, r], out)
}

/// Packed LU factors with the row permutation from partial pivoting:
/// `P A = L U`, unit-diagonal `L` below the diagonal and `U` on and above.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Element> Lu<T> {
    pub fn factor(a: &Ndarray<T>) -> Result<Self> {
        let (n, c) = dims(a)?;
        if n != c {
            return Err(Error::DimMismatch(format!("square matrix expected, got {:?}", a.shape())));
        }
        let mut lu = a.data().to_vec();
        let max_abs = lu.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tol = T::from_f64(T::SINGULAR_TOL) * max_abs;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pv >= tol) || pv == T::zero() {
                return Err(Error::Singular {
                    column: k,
                    pivot: pv.to_f64().unwrap_or(f64::NAN),
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (top, bottom) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &top[k * n..];
            let diag = pivot_row[k];
            for row in bottom.chunks_mut(n) {
                let l = row[k] / diag;
                row[k] = l;
                if l != T::zero() {
                    axpy(&mut row[k + 1..], -l, &pivot_row[k + 1..]);
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    /// `perm[i]` is the original row placed at position `i`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &Ndarray<T>) -> Result<Ndarray<T>> {
        let n = self.n;
        let (r, m) = dims(b)?;
        if r != n {
            return Err(Error::DimMismatch(format!(
                "solve: {n}x{n} system with right-hand side {:?}",
                b.shape()
            )));
        }
        let src = b.data();
        let mut x = Vec::with_capacity(n * m);
        for &p in &self.perm {
            x.extend_from_slice(&src[p * m..(p + 1) * m]);
        }
        let lu = &self.lu;
        for i in 1..n {
            let (done, rest) = x.split_at_mut(i * m);
            let xi = &mut rest[..m];
            for k in 0..i {
                let l = lu[i * n + k];
                if l != T::zero() {
                    axpy(xi, -l, &done[k * m..(k + 1) * m]);
                }
            }
        }
        for i in (0..n).rev() {
            let (head, solved) = x.split_at_mut((i + 1) * m);
            let xi = &mut head[i * m..];
            for k in i + 1..n {
                let u = lu[i * n + k];
                if u != T::zero() {
                    axpy(xi, -u, &solved[(k - i - 1) * m..(k - i) * m]);
                }
            }
            let d = lu[i * n + i];
            xi.iter_mut().for_each(|v| *v = *v / d);
        }
        Ndarray::from_vec(&[n, m], x)
    }
}

pub fn solve<T: Element>(a: &Ndarray<T>, b: &Ndarray<T>) -> Result<Ndarray<T>> {
    Lu::factor(a)?.solve(b)
}

pub fn inv<T: Element>(a: &Ndarray<T>) -> Result<Ndarray<T>> {
    let lu = Lu::factor(a)?;
    lu.solve(&Ndarray::eye(lu.n)?)
}

impl<T: Element> Ndarray<T> {
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        matmul(self, other)
    }

    pub fn transpose(&self) -> Result<Self> {
        transpose(self)
    }

    pub fn inv(&self) -> Result<Self> {
        inv(self)
    }
}

/// Infinity norm (maximum absolute row sum).
pub fn norm_inf<T: Element>(a: &Ndarray<T>) -> Result<T> {
    let (_, c) = dims(a)?;
    Ok(a
        .data()
        .chunks(c)
        .map(|row| row.iter().fold(T::zero(), |s, v| s + v.abs()))
        .fold(T::zero(), T::max))
}
