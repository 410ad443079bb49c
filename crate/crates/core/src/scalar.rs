//! Scalar abstraction for the similarity math.
//!
//! Backends exchange `f64` over the wire; scoring code is written against
//! [`Scalar`] so the beam search and the similarity helpers run unchanged
//! in `f32` or `f64`.

use std::collections::HashSet;
use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast};

pub trait Scalar: Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Lossy conversion from the wire type.
    fn from_real(v: f64) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    fn to_real(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + NumCast + Sum + Debug + Display + Default + Send + Sync + 'static {}

/// Cosine similarity, `dot / (|a| * |b|)`. Zero vectors and length
/// mismatches yield zero.
pub fn cosine<S: Scalar>(a: &[S], b: &[S]) -> S {
    if a.len() != b.len() || a.is_empty() {
        return S::zero();
    }
    let mut dot = S::zero();
    let mut na = S::zero();
    let mut nb = S::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    let denom = na.sqrt() * nb.sqrt();
    if denom == S::zero() {
        return S::zero();
    }
    dot / denom
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean<S: Scalar>(values: &[S]) -> S {
    if values.is_empty() {
        return S::zero();
    }
    let n = S::from_usize(values.len()).unwrap_or_else(S::one);
    values.iter().copied().sum::<S>() / n
}

/// Scales `v` to unit L2 norm in place. Zero vectors are left untouched.
pub fn normalize<S: Scalar>(v: &mut [S]) {
    let norm = v.iter().map(|&x| x * x).sum::<S>().sqrt();
    if norm > S::zero() {
        for x in v.iter_mut() {
            *x = *x / norm;
        }
    }
}

/// Jaccard index of two token sets; zero when both are empty.
pub fn jaccard<S: Scalar>(a: &HashSet<String>, b: &HashSet<String>) -> S {
    let union = a.union(b).count();
    if union == 0 {
        return S::zero();
    }
    let inter = a.intersection(b).count();
    S::from_usize(inter).unwrap() / S::from_usize(union).unwrap()
}

/// Overlap normalized by the geometric mean of the set sizes.
pub fn ochiai<S: Scalar>(a: &HashSet<String>, b: &HashSet<String>) -> S {
    if a.is_empty() || b.is_empty() {
        return S::zero();
    }
    let inter = S::from_usize(a.intersection(b).count()).unwrap();
    let denom = (S::from_usize(a.len()).unwrap() * S::from_usize(b.len()).unwrap()).sqrt();
    inter / denom
}
