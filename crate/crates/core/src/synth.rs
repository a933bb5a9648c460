//! Synthetic inputs: block-Gaussian matrices with per-level variances, and
//! sparse Gaussian matrices matching the statistics of neural-network
//! gradients, weights and (rectified) activations.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::tensor::{BlockPartition, RealMatrix, Scheme};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("variance must be nonnegative and finite, got {0}")]
    BadVariance(f64),
    #[error("sparsity must lie in [0, 1], got {0}")]
    BadSparsity(f64),
    #[error("threshold must be nonnegative, got {0}")]
    BadThreshold(f64),
    #[error("rectified normal needs mean + 5 sd > 0")]
    NoPositiveMass,
    #[error("{side} layout has {found} blocks, partition has {expected}")]
    Layout { side: &'static str, expected: usize, found: usize },
    #[error("{side}-block {block} uses level {level}, but only {levels} variances are given")]
    UnknownLevel { side: &'static str, block: usize, level: usize, levels: usize },
}

/// Per-level variances and the level of every factor block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Real + Serialize"))]
pub struct GaussianClassSpec<T> {
    pub a_variances: Vec<T>,
    pub b_variances: Vec<T>,
    pub a_levels: Vec<usize>,
    pub b_levels: Vec<usize>,
}

impl<T: Real> GaussianClassSpec<T> {
    /// Variances `(10, 1, 0.1)` on both sides, blocks split into three
    /// consecutive runs of (near) equal length.
    pub fn three_tier(part: &BlockPartition) -> Self {
        let var = vec![T::of(10.0), T::one(), T::of(0.1)];
        let layout = |n: usize| (0..n).map(|i| (i * 3 / n).min(2)).collect::<Vec<_>>();
        GaussianClassSpec {
            a_variances: var.clone(),
            b_variances: var,
            a_levels: layout(part.a_block_count()),
            b_levels: layout(part.b_block_count()),
        }
    }

    fn check(&self, part: &BlockPartition) -> Result<(), SynthError> {
        for (side, vars, levels, expected) in [
            ("A", &self.a_variances, &self.a_levels, part.a_block_count()),
            ("B", &self.b_variances, &self.b_levels, part.b_block_count()),
        ] {
            if let Some(&v) = vars.iter().find(|v| !(**v >= T::zero() && v.is_finite())) {
                return Err(SynthError::BadVariance(v.to_f64_lossy()));
            }
            if levels.len() != expected {
                return Err(SynthError::Layout { side, expected, found: levels.len() });
            }
            if let Some((block, &level)) = levels.iter().enumerate().find(|(_, &l)| l >= vars.len()) {
                return Err(SynthError::UnknownLevel { side, block, level, levels: vars.len() });
            }
        }
        Ok(())
    }
}

fn gaussian_block<T: Real, R: Rng + ?Sized>(rows: usize, cols: usize, var: T, rng: &mut R) -> RealMatrix<T> {
    if var == T::zero() {
        return RealMatrix::zeros(rows, cols);
    }
    let sd = var.sqrt().to_f64_lossy();
    RealMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        T::of(sd * z)
    })
}

/// A and B with every factor block i.i.d. `N(0, σ²_level)`. Blocks are drawn
/// in order: all A-blocks, then all B-blocks.
pub fn gen_class_matrices<T: Real, R: Rng + ?Sized>(
    spec: &GaussianClassSpec<T>,
    part: &BlockPartition,
    rng: &mut R,
) -> Result<(RealMatrix<T>, RealMatrix<T>), SynthError> {
    spec.check(part)?;
    let (u, h) = part.a_block_shape();
    let q = part.b_block_shape().1;
    let (ar, ac) = part.a_shape();
    let (br, bc) = part.b_shape();
    let mut a = RealMatrix::zeros(ar, ac);
    let mut b = RealMatrix::zeros(br, bc);
    let rxc = part.scheme() == Scheme::RowsTimesCols;
    for (i, &lv) in spec.a_levels.iter().enumerate() {
        let blk = gaussian_block(u, h, spec.a_variances[lv], rng);
        if rxc {
            a.set_block(i * u, 0, &blk);
        } else {
            a.set_block(0, i * h, &blk);
        }
    }
    for (i, &lv) in spec.b_levels.iter().enumerate() {
        let blk = gaussian_block(h, q, spec.b_variances[lv], rng);
        if rxc {
            b.set_block(0, i * q, &blk);
        } else {
            b.set_block(i * h, 0, &blk);
        }
    }
    Ok((a, b))
}

/// Zero every entry with `|x| ≤ tau`.
pub fn threshold_sparsify<T: Real>(m: &RealMatrix<T>, tau: T) -> Result<RealMatrix<T>, SynthError> {
    if !(tau >= T::zero()) {
        return Err(SynthError::BadThreshold(tau.to_f64_lossy()));
    }
    Ok(m.map(|x| if x.abs() > tau { x } else { T::zero() }))
}

/// Fraction of exact zeros.
pub fn sparsity<T: Real>(m: &RealMatrix<T>) -> f64 {
    let n = m.data().len();
    if n == 0 {
        return 0.0;
    }
    m.data().iter().filter(|&&x| x == T::zero()).count() as f64 / n as f64
}

/// Spike-and-slab entries: zero with probability `sparsity`, otherwise
/// `N(mean, variance)`, optionally thresholded. With `rectify` the nonzero
/// entries follow the positive part of the normal, so `sparsity` stays the
/// fraction of zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Real + Serialize"))]
pub struct SparseGaussianSpec<T> {
    pub mean: T,
    pub variance: T,
    pub sparsity: T,
    #[serde(default)]
    pub rectify: bool,
    #[serde(default)]
    pub threshold: Option<T>,
}

impl<T: Real> SparseGaussianSpec<T> {
    fn preset(mean: f64, variance: f64, sparsity: f64, rectify: bool) -> Self {
        SparseGaussianSpec { mean: T::of(mean), variance: T::of(variance), sparsity: T::of(sparsity), rectify, threshold: None }
    }

    /// Back-propagated gradient of dense layer 1..=3.
    pub fn gradient_layer(layer: usize) -> Option<Self> {
        match layer {
            1 => Some(Self::preset(-7.09e-5, 7.24e-1, 0.5009, false)),
            2 => Some(Self::preset(-3.90e-5, 6.31e-1, 0.5909, false)),
            3 => Some(Self::preset(-1.02e-4, 2.56e-4, 0.5797, false)),
            _ => None,
        }
    }

    /// Weight matrix of dense layer 1..=3.
    pub fn weight_layer(layer: usize) -> Option<Self> {
        match layer {
            1 => Some(Self::preset(-1.07e-3, 9.99e-1, 0.0015, false)),
            2 => Some(Self::preset(-4.40e-3, 1.00, 0.0011, false)),
            3 => Some(Self::preset(-2.71e-2, 9.98e-1, 0.0010, false)),
            _ => None,
        }
    }

    /// Rectified input of dense layer 2 or 3.
    pub fn input_layer(layer: usize) -> Option<Self> {
        match layer {
            2 => Some(Self::preset(-2.40e-1, 2.28, 0.3311, true)),
            3 => Some(Self::preset(1.69e-1, 1.66, 0.3863, true)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.variance >= T::zero() && self.variance.is_finite()) {
            return Err(SynthError::BadVariance(self.variance.to_f64_lossy()));
        }
        if !(self.sparsity >= T::zero() && self.sparsity <= T::one()) {
            return Err(SynthError::BadSparsity(self.sparsity.to_f64_lossy()));
        }
        if let Some(t) = self.threshold {
            if !(t >= T::zero()) {
                return Err(SynthError::BadThreshold(t.to_f64_lossy()));
            }
        }
        if self.rectify && !(self.mean + T::of(5.0) * self.variance.sqrt() > T::zero()) {
            return Err(SynthError::NoPositiveMass);
        }
        Ok(())
    }
}

pub fn gen_gradient_like<T: Real, R: Rng + ?Sized>(
    spec: &SparseGaussianSpec<T>,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<RealMatrix<T>, SynthError> {
    spec.validate()?;
    let normal = Normal::new(spec.mean.to_f64_lossy(), spec.variance.sqrt().to_f64_lossy())
        .map_err(|_| SynthError::BadVariance(spec.variance.to_f64_lossy()))?;
    let p_zero = spec.sparsity.to_f64_lossy();
    let m = RealMatrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < p_zero {
            return T::zero();
        }
        loop {
            let x = normal.sample(rng);
            if !spec.rectify || x > 0.0 {
                return T::of(x);
            }
        }
    });
    match spec.threshold {
        Some(tau) => threshold_sparsify(&m, tau),
        None => Ok(m),
    }
}
