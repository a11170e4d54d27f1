use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::Float;
use rand::distr::{Distribution, StandardUniform};
use rand::Rng;

/// Element precision of an array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    F32,
    F64,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::F32 => "f32",
            Kind::F64 => "f64",
        }
    }

    pub fn from_name(s: &str) -> Option<Kind> {
        match s {
            "f32" => Some(Kind::F32),
            "f64" => Some(Kind::F64),
            _ => None,
        }
    }
}

/// Floating point element types an [`Ndarray`](crate::Ndarray) may hold.
pub trait Element:
    Float + Debug + Display + LowerExp + FromStr + Default + Send + Sync + 'static
{
    const KIND: Kind;

    /// Pivot magnitude (relative to the largest entry) below which LU
    /// factorisation reports a singular matrix.
    const SINGULAR_TOL: f64;

    /// Draws one sample from U[0, 1).
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn from_f64(v: f64) -> Self;

    fn to_bits_u64(self) -> u64;
}

impl Element for f64 {
    const KIND: Kind = Kind::F64;
    const SINGULAR_TOL: f64 = 1e-12;

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits()
    }
}

impl Element for f32 {
    const KIND: Kind = Kind::F32;
    const SINGULAR_TOL: f64 = 1e-6;

    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardUniform.sample(rng)
    }

    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_bits_u64(self) -> u64 {
        self.to_bits() as u64
    }
}
