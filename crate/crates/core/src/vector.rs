//! Embeddings, cosine similarity/distance and pool z-score normalization.
//!
//! Vectors are stored as `f32` (the width most encoders emit and the width
//! persisted on disk) but every similarity is accumulated in `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default epsilon added to the standard deviation in [`zscore_normalize`].
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("degenerate vector: {0}")]
    Degenerate(&'static str),
    #[error("non-finite component at index {0}")]
    NonFinite(usize),
    #[error("cannot normalize an empty score pool")]
    EmptyPool,
    #[error("epsilon must be positive and finite, got {0}")]
    Epsilon(f64),
}

/// A fixed-dimension, finite, non-zero real vector.
///
/// The Euclidean norm is computed once at construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct Embedding {
    values: Vec<f32>,
    norm: f64,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::Degenerate("empty vector"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite(i));
        }
        let norm = values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            return Err(VectorError::Degenerate("all-zero vector"));
        }
        Ok(Self { values, norm })
    }

    /// Builds an embedding from `f64` components, rounding to `f32`.
    pub fn from_f64(values: &[f64]) -> Result<Self, VectorError> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    /// Rescales `values` to unit length before storing them.
    pub fn normalized(values: &[f64]) -> Result<Self, VectorError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(VectorError::Degenerate("cannot normalize zero vector"));
        }
        Self::from_f64(&values.iter().map(|v| v / norm).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }
}

impl PartialEq for Embedding {
    /// Bitwise equality of the stored components.
    fn eq(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl TryFrom<Vec<f32>> for Embedding {
    type Error = VectorError;

    fn try_from(values: Vec<f32>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<Embedding> for Vec<f32> {
    fn from(e: Embedding) -> Self {
        e.values
    }
}

/// Milliseconds since the Unix epoch, UTC.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn from_millis(ms: u64) -> Self {
        Self(ms)
    }

    pub fn millis(self) -> u64 {
        self.0
    }

    pub fn distance(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }

    pub fn now() -> Self {
        let ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self(ms)
    }
}

impl std::fmt::Display for Timestamp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn check_dims(a: &Embedding, b: &Embedding) -> Result<(), VectorError> {
    if a.dim() != b.dim() {
        return Err(VectorError::Dimension {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Cosine similarity for embeddings already known to share a dimension.
#[inline]
pub(crate) fn cosine_unchecked(a: &Embedding, b: &Embedding) -> f64 {
    (dot(&a.values, &b.values) / (a.norm * b.norm)).clamp(-1.0, 1.0)
}

/// `dot(a, b) / (|a| |b|)`, clamped to `[-1, 1]` against rounding.
pub fn cosine_similarity(a: &Embedding, b: &Embedding) -> Result<f64, VectorError> {
    check_dims(a, b)?;
    Ok(cosine_unchecked(a, b))
}

/// `1 - cosine_similarity(a, b)`, in `[0, 2]`.
pub fn cosine_distance(a: &Embedding, b: &Embedding) -> Result<f64, VectorError> {
    cosine_similarity(a, b).map(|s| 1.0 - s)
}

/// Cosine similarity over raw slices, for callers that have not built an
/// [`Embedding`]. Zero vectors are rejected rather than producing NaN.
pub fn cosine_slices(a: &[f32], b: &[f32]) -> Result<f64, VectorError> {
    if a.len() != b.len() {
        return Err(VectorError::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(VectorError::Degenerate("all-zero vector"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Maps each score to `(x - mean) / (std + epsilon)` using the population
/// standard deviation of the whole pool. Output order matches input order.
pub fn zscore_normalize(pool: &[f64], epsilon: f64) -> Result<Vec<f64>, VectorError> {
    if pool.is_empty() {
        return Err(VectorError::EmptyPool);
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(VectorError::Epsilon(epsilon));
    }
    // a constant pool has zero spread; avoid rounding residue in the mean
    if pool.iter().all(|x| *x == pool[0]) {
        return Ok(vec![0.0; pool.len()]);
    }
    let n = pool.len() as f64;
    let mean = pool.iter().sum::<f64>() / n;
    let var = pool.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + epsilon;
    Ok(pool.iter().map(|x| (x - mean) / denom).collect())
}

/// Index of the first maximal element. NaN entries are never selected.
pub fn argmax(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in xs.iter().enumerate() {
        if x.is_nan() {
            continue;
        }
        match best {
            Some(b) if xs[b] >= x => {}
            _ => best = Some(i),
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&emb(&[1., 0.]), &emb(&[1., 0.])).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&emb(&[1., 0.]), &emb(&[0., 1.])).unwrap(), 0.0);
        let s = cosine_similarity(&emb(&[1., 1.]), &emb(&[1., 0.])).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(cosine_distance(&emb(&[1., 0.]), &emb(&[1., 0.])).unwrap(), 0.0);
        assert_eq!(cosine_distance(&emb(&[1., 0.]), &emb(&[0., 1.])).unwrap(), 1.0);
        assert_eq!(cosine_distance(&emb(&[1., 0.]), &emb(&[-1., 0.])).unwrap(), 2.0);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(
            Embedding::new(vec![0.0, 0.0]),
            Err(VectorError::Degenerate(_))
        ));
        assert!(matches!(
            Embedding::new(vec![1.0, f32::NAN]),
            Err(VectorError::NonFinite(1))
        ));
        assert!(Embedding::new(vec![]).is_err());
        assert!(matches!(
            cosine_similarity(&emb(&[1., 0.]), &emb(&[1., 0., 0.])),
            Err(VectorError::Dimension { expected: 2, actual: 3 })
        ));
        assert!(matches!(
            cosine_slices(&[0.0, 0.0], &[1.0, 0.0]),
            Err(VectorError::Degenerate(_))
        ));
    }

    #[test]
    fn zscore_examples() {
        assert_eq!(zscore_normalize(&[5., 5., 5.], 1e-8).unwrap(), vec![0., 0., 0.]);
        assert_eq!(zscore_normalize(&[7.], 1e-8).unwrap(), vec![0.]);

        // Two-pass oracle: mean 2, population variance 2/3.
        let xs = [1.0, 2.0, 3.0];
        let mean = xs.iter().sum::<f64>() / 3.0;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let z = zscore_normalize(&xs, 1e-8).unwrap();
        for (zi, xi) in z.iter().zip(xs) {
            assert!((zi - (xi - mean) / (sd + 1e-8)).abs() < 1e-12);
        }
        assert!((z[2] - 1.224_744_871).abs() < 1e-7);
        assert_eq!(z[1], 0.0);

        assert_eq!(zscore_normalize(&[0.1; 7], 1e-8).unwrap(), vec![0.0; 7]);
        assert_eq!(zscore_normalize(&[], 1e-8), Err(VectorError::EmptyPool));
        assert!(zscore_normalize(&[1.0], 0.0).is_err());
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), Some(1));
        assert_eq!(argmax(&[]), None);
        assert_eq!(argmax(&[f64::NAN, 0.5]), Some(1));
    }

    #[test]
    fn serde_round_trip_rejects_zero() {
        let e = emb(&[0.25, -1.5, 3.0]);
        let s = serde_json::to_string(&e).unwrap();
        let back: Embedding = serde_json::from_str(&s).unwrap();
        assert_eq!(back, e);
        assert!(serde_json::from_str::<Embedding>("[0.0, 0.0]").is_err());
    }

    fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-10.0f32..10.0, dim)
            .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn cosine_scale_invariant(a in vec_strategy(8), b in vec_strategy(8), k in 0.01f32..100.0) {
            let ea = emb(&a);
            let eb = emb(&b);
            let scaled = emb(&a.iter().map(|x| x * k).collect::<Vec<_>>());
            let s1 = cosine_similarity(&ea, &eb).unwrap();
            let s2 = cosine_similarity(&scaled, &eb).unwrap();
            prop_assert!((s1 - s2).abs() < 1e-5);
            prop_assert!((s1 - cosine_similarity(&eb, &ea).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn distance_bounds(a in vec_strategy(6), b in vec_strategy(6)) {
            let ea = emb(&a);
            let d = cosine_distance(&ea, &emb(&b)).unwrap();
            prop_assert!((0.0..=2.0).contains(&d));
            prop_assert!(cosine_distance(&ea, &ea).unwrap().abs() < 1e-12);
        }

        #[test]
        fn zscore_argmax_affine_invariant(
            pool in prop::collection::vec(-1.0f64..1.0, 1..40),
            a in 0.1f64..10.0,
            b in -5.0f64..5.0,
        ) {
            let z1 = zscore_normalize(&pool, DEFAULT_EPSILON).unwrap();
            let moved: Vec<f64> = pool.iter().map(|x| a * x + b).collect();
            let z2 = zscore_normalize(&moved, DEFAULT_EPSILON).unwrap();
            prop_assert_eq!(argmax(&z1), argmax(&pool));
            prop_assert_eq!(argmax(&z1), argmax(&z2));
        }

        #[test]
        fn zscore_mean_zero(pool in prop::collection::vec(-100.0f64..100.0, 2..60)) {
            let spread = pool.iter().cloned().fold(f64::MIN, f64::max)
                - pool.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-6);
            let z = zscore_normalize(&pool, DEFAULT_EPSILON).unwrap();
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
    }
}
