use serde::{Deserialize, Serialize};

use super::probability::DecodeProbTable;
use super::AnalyticsError;
use crate::importance::{ClassMap, LevelAssignment};
use crate::latency::LatencyModel;
use crate::tensor::BlockPartition;
use crate::Real;

/// Per-class second-moment bookkeeping. `energy[l]` is the sum over the
/// class members of `σ²_A · σ²_B`, so `E‖C_l‖² = UHQ · energy[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Real + Serialize"))]
pub struct ClassVariances<T> {
    pub energy: Vec<T>,
    pub k: Vec<usize>,
    pub u: usize,
    pub h: usize,
    pub q: usize,
    /// Number of cxr summands; 1 for rxc.
    pub m: usize,
}

impl<T: Real> ClassVariances<T> {
    pub fn new(energy: Vec<T>, k: Vec<usize>, part: &BlockPartition) -> Result<Self, AnalyticsError> {
        let (_, m, _, u, h, q) = part.dims();
        let cv = ClassVariances { energy, k, u, h, q, m };
        cv.validate()?;
        Ok(cv)
    }

    /// Every member of class `l` has variance product `σ²_{l,A} σ²_{l,B}`.
    pub fn homogeneous(
        sigma2_a: &[T],
        sigma2_b: &[T],
        k: &[usize],
        part: &BlockPartition,
    ) -> Result<Self, AnalyticsError> {
        if sigma2_a.len() != k.len() || sigma2_b.len() != k.len() {
            return Err(AnalyticsError::Length {
                what: "class variances",
                expected: k.len(),
                found: sigma2_a.len().min(sigma2_b.len()),
            });
        }
        let energy = (0..k.len()).map(|l| T::of_usize(k[l]) * sigma2_a[l] * sigma2_b[l]).collect();
        Self::new(energy, k.to_vec(), part)
    }

    /// Sum member variance products from per-level factor variances.
    pub fn from_levels(
        la: &LevelAssignment,
        classes: &ClassMap,
        part: &BlockPartition,
        a_var: &[T],
        b_var: &[T],
    ) -> Result<Self, AnalyticsError> {
        if a_var.len() < la.levels || b_var.len() < la.levels {
            return Err(AnalyticsError::Length {
                what: "level variances",
                expected: la.levels,
                found: a_var.len().min(b_var.len()),
            });
        }
        let mut energy = vec![T::zero(); classes.class_count()];
        for j in 0..classes.block_count() {
            let (a, b) = part.factors(j);
            energy[classes.class_of(j)] += a_var[la.a_levels[a]] * b_var[la.b_levels[b]];
        }
        Self::new(energy, classes.sizes().to_vec(), part)
    }

    pub fn validate(&self) -> Result<(), AnalyticsError> {
        if self.energy.len() != self.k.len() {
            return Err(AnalyticsError::Length { what: "class energies", expected: self.k.len(), found: self.energy.len() });
        }
        if self.energy.iter().any(|&e| !(e > T::zero() && e.is_finite())) {
            return Err(AnalyticsError::InvalidVariances("energies must be positive and finite".into()));
        }
        if self.k.contains(&0) {
            return Err(AnalyticsError::InvalidVariances("every class needs at least one member".into()));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.k.len()
    }

    pub fn uhq(&self) -> T {
        T::of_usize(self.u * self.h * self.q)
    }

    /// `E‖C‖²`, the loss normalizer.
    pub fn normalizer(&self) -> T {
        self.uhq() * self.energy.iter().copied().sum()
    }
}

fn check_table<T: Real>(cv: &ClassVariances<T>, table: &DecodeProbTable<T>, workers: usize) -> Result<(), AnalyticsError> {
    if table.classes() != cv.classes() {
        return Err(AnalyticsError::Length { what: "decode-probability classes", expected: cv.classes(), found: table.classes() });
    }
    if table.max_received() < workers {
        return Err(AnalyticsError::Length {
            what: "decode-probability columns",
            expected: workers + 1,
            found: table.max_received() + 1,
        });
    }
    Ok(())
}

/// `E‖C − Ĉ‖²` at time `t`: Σ_w P(N = w) · UHQ · Σ_l (1 − P_{d,l}(w)) · energy_l.
/// Exact for rxc; also the expected cxr loss, since distinct cxr terms are
/// uncorrelated.
pub fn expected_loss<T: Real>(
    cv: &ClassVariances<T>,
    table: &DecodeProbTable<T>,
    model: &LatencyModel<T>,
    workers: usize,
    t: T,
) -> Result<T, AnalyticsError> {
    check_table(cv, table, workers)?;
    let pmf = model.arrival_pmf(workers, t)?;
    let mut sum = T::zero();
    for (w, &pw) in pmf.iter().enumerate() {
        if pw == T::zero() {
            continue;
        }
        let missing: T = (0..cv.classes()).map(|l| (T::one() - table.get(l, w)) * cv.energy[l]).sum();
        sum += pw * missing;
    }
    Ok(cv.uhq() * sum)
}

pub fn expected_loss_rxc<T: Real>(
    cv: &ClassVariances<T>,
    table: &DecodeProbTable<T>,
    model: &LatencyModel<T>,
    workers: usize,
    t: T,
) -> Result<T, AnalyticsError> {
    expected_loss(cv, table, model, workers, t)
}

pub fn normalized_expected_loss<T: Real>(
    cv: &ClassVariances<T>,
    table: &DecodeProbTable<T>,
    model: &LatencyModel<T>,
    workers: usize,
    t: T,
) -> Result<T, AnalyticsError> {
    Ok(expected_loss(cv, table, model, workers, t)? / cv.normalizer())
}

/// cxr upper bound: M times the per-term expected loss.
pub fn loss_bound_cxr<T: Real>(
    cv: &ClassVariances<T>,
    table: &DecodeProbTable<T>,
    model: &LatencyModel<T>,
    workers: usize,
    t: T,
) -> Result<T, AnalyticsError> {
    Ok(T::of_usize(cv.m) * expected_loss(cv, table, model, workers, t)?)
}

/// Same normalizer as [`normalized_expected_loss`]; may exceed 1.
pub fn normalized_loss_bound_cxr<T: Real>(
    cv: &ClassVariances<T>,
    table: &DecodeProbTable<T>,
    model: &LatencyModel<T>,
    workers: usize,
    t: T,
) -> Result<T, AnalyticsError> {
    Ok(loss_bound_cxr(cv, table, model, workers, t)? / cv.normalizer())
}

/// Normalized MDS loss: the probability that fewer than `blocks` packets
/// arrived.
pub fn mds_loss<T: Real>(blocks: usize, model: &LatencyModel<T>, workers: usize, t: T) -> Result<T, AnalyticsError> {
    if blocks > workers {
        return Err(AnalyticsError::TooFewWorkers { blocks, workers });
    }
    let pmf = model.arrival_pmf(workers, t)?;
    Ok(pmf[..blocks].iter().copied().sum::<T>().min(T::one()))
}

/// Normalized loss with every sub-product on `k` workers: each block is lost
/// iff all replicas miss the deadline. `k = 1` is the uncoded scheme.
pub fn repetition_loss<T: Real>(k: usize, model: &LatencyModel<T>, t: T) -> T {
    (T::one() - model.cdf(t)).powi(k as i32)
}

/// `P(class l decoded by t) = Σ_w P(N = w) P_{d,l}(w)`.
pub fn class_decode_at<T: Real>(
    table: &DecodeProbTable<T>,
    model: &LatencyModel<T>,
    workers: usize,
    t: T,
) -> Result<Vec<T>, AnalyticsError> {
    if table.max_received() < workers {
        return Err(AnalyticsError::Length {
            what: "decode-probability columns",
            expected: workers + 1,
            found: table.max_received() + 1,
        });
    }
    let pmf = model.arrival_pmf(workers, t)?;
    Ok((0..table.classes()).map(|l| pmf.iter().enumerate().map(|(w, &p)| p * table.get(l, w)).sum()).collect())
}

/// Loss and per-class decoding probability over a time grid. `stderr` is
/// empty for analytic curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Real + Serialize"))]
pub struct LossCurve<T> {
    pub times: Vec<T>,
    pub normalized_loss: Vec<T>,
    #[serde(default)]
    pub stderr: Vec<T>,
    /// `class_decode[i][l]` at `times[i]`.
    #[serde(default)]
    pub class_decode: Vec<Vec<T>>,
}

impl<T: Real> LossCurve<T> {
    /// Evaluate `f` at every grid point.
    pub fn tabulate<E>(times: &[T], mut f: impl FnMut(T) -> Result<T, E>) -> Result<Self, E> {
        let normalized_loss = times.iter().map(|&t| f(t)).collect::<Result<_, _>>()?;
        Ok(LossCurve { times: times.to_vec(), normalized_loss, stderr: Vec::new(), class_decode: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
