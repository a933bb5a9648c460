use std::collections::HashMap;

use num_traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::combinatorics::{multinomial_weight, multinomial_weight_exact, Compositions};
use super::{AnalyticsError, MAX_ENUMERATED};
use crate::coding::{Family, WindowDistribution};
use crate::galois::{Field, FieldElem, FieldMatrix, FieldSpec};
use crate::{ExactProb, Real};

/// `P(Binomial(n, p) ≥ k)`.
pub fn binomial_tail<T: Real>(n: usize, p: T, k: usize) -> T {
    if k == 0 {
        return T::one();
    }
    if k > n {
        return T::zero();
    }
    let q = T::one() - p;
    let mut choose = T::one();
    let mut sum = T::zero();
    for m in 0..=n {
        if m > 0 {
            choose = choose * T::of_usize(n - m + 1) / T::of_usize(m);
        }
        if m >= k {
            sum += choose * p.powi(m as i32) * q.powi((n - m) as i32);
        }
    }
    sum.min(T::one())
}

fn check_class(l: usize, classes: usize) -> Result<(), AnalyticsError> {
    if l >= classes {
        return Err(AnalyticsError::ClassOutOfRange { class: l, classes });
    }
    Ok(())
}

/// NOW class-`l` decoding probability with `n` packets: at least `k_l` of
/// them came from window `l`.
pub fn now_decode_prob<T: Real>(
    l: usize,
    n: usize,
    gamma: &WindowDistribution<T>,
    k: &[usize],
) -> Result<T, AnalyticsError> {
    check_class(l, k.len())?;
    if gamma.len() != k.len() {
        return Err(AnalyticsError::Length { what: "window distribution", expected: k.len(), found: gamma.len() });
    }
    Ok(binomial_tail(n, gamma.get(l), k[l]))
}

/// Same quantity as [`now_decode_prob`], summed over window compositions.
pub fn now_decode_prob_enumerated<T: Real>(
    l: usize,
    n: usize,
    gamma: &WindowDistribution<T>,
    k: &[usize],
) -> Result<T, AnalyticsError> {
    check_class(l, k.len())?;
    if n > MAX_ENUMERATED {
        return Err(AnalyticsError::TooLarge(n));
    }
    let mut sum = T::zero();
    for c in Compositions::new(n, k.len()).filter(|c| c[l] >= k[l]) {
        sum += multinomial_weight(&c, gamma.as_slice())?;
    }
    Ok(sum)
}

/// Exact rational NOW decoding probability.
pub fn now_decode_prob_exact(l: usize, n: usize, gamma: &[ExactProb], k: &[usize]) -> Result<ExactProb, AnalyticsError> {
    check_class(l, k.len())?;
    let mut sum = ExactProb::zero();
    for c in Compositions::new(n, k.len()).filter(|c| c[l] >= k[l]) {
        sum += multinomial_weight_exact(&c, gamma)?;
    }
    Ok(sum)
}

/// Decodability of every class given per-window packet counts, by
/// instantiating the window zero pattern with random coefficients over a
/// large prime field and taking a majority over independent draws.
#[derive(Debug, Clone)]
pub struct GenericRankOracle {
    k: Vec<usize>,
    /// Column ranges covered by each window.
    windows: Vec<Vec<usize>>,
    field: Field,
    reps: usize,
    seed: u64,
    cache: HashMap<Vec<usize>, Vec<bool>>,
}

impl GenericRankOracle {
    pub const DEFAULT_REPS: usize = 3;

    /// Classes occupy consecutive columns; `family` picks the window shape.
    pub fn new(family: Family, k: &[usize]) -> Result<Self, AnalyticsError> {
        let offsets: Vec<usize> = k.iter().scan(0, |s, &x| { let o = *s; *s += x; Some(o) }).collect();
        let class_cols = |l: usize| offsets[l]..offsets[l] + k[l];
        let total: usize = k.iter().sum();
        let windows = match family {
            Family::Now => (0..k.len()).map(|l| class_cols(l).collect()).collect(),
            Family::Ew => (0..k.len()).map(|l| (0..offsets[l] + k[l]).collect()).collect(),
            Family::Mds => vec![(0..total).collect()],
            _ => return Err(AnalyticsError::UnsupportedFamily),
        };
        Ok(GenericRankOracle {
            k: k.to_vec(),
            windows,
            field: Field::new(FieldSpec::mersenne31()).expect("2^31 - 1 is prime"),
            reps: Self::DEFAULT_REPS,
            seed: 0x5eed,
            cache: HashMap::new(),
        })
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps.max(1);
        self.cache.clear();
        self
    }

    pub fn window_count(&self) -> usize {
        self.windows.len()
    }

    /// Per-class decodability for `counts[i]` packets from window `i`.
    pub fn decodable_classes(&mut self, counts: &[usize]) -> &[bool] {
        if !self.cache.contains_key(counts) {
            let v = self.evaluate(counts);
            self.cache.insert(counts.to_vec(), v);
        }
        &self.cache[counts]
    }

    fn evaluate(&self, counts: &[usize]) -> Vec<bool> {
        let cols: usize = self.k.iter().sum();
        // Seed from the counts so results do not depend on query order.
        let key = counts.iter().fold(self.seed, |h, &c| h.wrapping_mul(0x100_0000_01b3).wrapping_add(c as u64 + 1));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut votes = vec![0usize; self.k.len()];
        for _ in 0..self.reps {
            let mut m = FieldMatrix::with_cols(cols);
            for (w, &c) in counts.iter().enumerate() {
                for _ in 0..c {
                    let mut row = vec![FieldElem::ZERO; cols];
                    for &j in &self.windows[w] {
                        row[j] = self.field.random(&mut rng);
                    }
                    m.push_row(&row).expect("row length matches");
                }
            }
            let ech = self.field.echelon(&m);
            let mut start = 0;
            for (l, &kl) in self.k.iter().enumerate() {
                if (start..start + kl).all(|j| ech.contains_unit(j)) {
                    votes[l] += 1;
                }
                start += kl;
            }
        }
        votes.into_iter().map(|v| 2 * v > self.reps).collect()
    }

    /// `P_{d,l}(n)` for every class: multinomial-weighted oracle verdicts.
    pub fn decode_probs<T: Real>(&mut self, n: usize, gamma: &[T]) -> Result<Vec<T>, AnalyticsError> {
        if gamma.len() != self.windows.len() {
            return Err(AnalyticsError::Length {
                what: "window distribution",
                expected: self.windows.len(),
                found: gamma.len(),
            });
        }
        if n > MAX_ENUMERATED {
            return Err(AnalyticsError::TooLarge(n));
        }
        let mut out = vec![T::zero(); self.k.len()];
        for c in Compositions::new(n, gamma.len()) {
            let w = multinomial_weight(&c, gamma)?;
            if w == T::zero() {
                continue;
            }
            let dec = self.decodable_classes(&c).to_vec();
            for (o, d) in out.iter_mut().zip(dec) {
                if d {
                    *o += w;
                }
            }
        }
        Ok(out.into_iter().map(|p| p.min(T::one())).collect())
    }
}

/// `P_{d,l}(N)` for every class `l` and `N = 0..=W`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeProbTable<T> {
    /// `probs[l][n]`
    probs: Vec<Vec<T>>,
}

impl<T: Real> DecodeProbTable<T> {
    pub fn from_rows(probs: Vec<Vec<T>>) -> Self {
        DecodeProbTable { probs }
    }

    /// Binomial-tail form.
    pub fn now(gamma: &WindowDistribution<T>, k: &[usize], workers: usize) -> Result<Self, AnalyticsError> {
        let probs = (0..k.len())
            .map(|l| (0..=workers).map(|n| now_decode_prob(l, n, gamma, k)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        Ok(DecodeProbTable { probs })
    }

    pub fn ew(gamma: &WindowDistribution<T>, k: &[usize], workers: usize) -> Result<Self, AnalyticsError> {
        Self::oracle(&mut GenericRankOracle::new(Family::Ew, k)?, gamma.as_slice(), k.len(), workers)
    }

    pub fn oracle(
        oracle: &mut GenericRankOracle,
        gamma: &[T],
        classes: usize,
        workers: usize,
    ) -> Result<Self, AnalyticsError> {
        let mut probs = vec![Vec::with_capacity(workers + 1); classes];
        for n in 0..=workers {
            for (row, p) in probs.iter_mut().zip(oracle.decode_probs(n, gamma)?) {
                row.push(p);
            }
        }
        Ok(DecodeProbTable { probs })
    }

    /// Every class decodes once `total` packets have arrived.
    pub fn threshold(classes: usize, total: usize, workers: usize) -> Self {
        let row: Vec<T> = (0..=workers).map(|n| if n >= total { T::one() } else { T::zero() }).collect();
        DecodeProbTable { probs: vec![row; classes] }
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    pub fn max_received(&self) -> usize {
        self.probs.first().map_or(0, |r| r.len().saturating_sub(1))
    }

    pub fn get(&self, l: usize, n: usize) -> T {
        self.probs[l][n]
    }

    pub fn row(&self, l: usize) -> &[T] {
        &self.probs[l]
    }
}

impl<T: Real> Default for DecodeProbTable<T> {
    fn default() -> Self {
        DecodeProbTable { probs: Vec::new() }
    }
}
