//! Worker response times and the law of the number of arrivals by time t.
//!
//! Response times are i.i.d. with CDF `F(Ω·t)`, where Ω = sub-products /
//! workers stretches the time axis so that schemes with different per-worker
//! load compare at equal total compute.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::{Rational, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatencyError {
    #[error("rate must be positive and finite, got {0}")]
    BadRate(f64),
    #[error("deterministic response time must be nonnegative and finite, got {0}")]
    BadTime(f64),
    #[error("load scaling must be positive")]
    ZeroOmega,
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatencyFamily<T> {
    Exponential { rate: T },
    Deterministic { time: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel<T> {
    pub family: LatencyFamily<T>,
    /// Written as `"p/q"` in JSON.
    #[serde(with = "ratio_str", default = "unit_ratio")]
    pub omega: Rational,
    #[serde(default)]
    pub t_max: Option<T>,
}

fn unit_ratio() -> Rational {
    Rational::from_integer(1)
}

mod ratio_str {
    use super::Rational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) => Ok(Rational::from_integer(n)),
            Raw::Str(s) => {
                let r: Rational = s.trim().parse().map_err(|e| D::Error::custom(format!("bad ratio {s:?}: {e}")))?;
                if *r.denom() == 0 {
                    return Err(D::Error::custom("zero denominator"));
                }
                Ok(r)
            }
        }
    }
}

impl<T: Real> LatencyModel<T> {
    pub fn exponential(rate: T, omega: Rational) -> Result<Self, LatencyError> {
        let m = LatencyModel { family: LatencyFamily::Exponential { rate }, omega, t_max: None };
        m.validate()?;
        Ok(m)
    }

    pub fn deterministic(time: T, omega: Rational) -> Result<Self, LatencyError> {
        let m = LatencyModel { family: LatencyFamily::Deterministic { time }, omega, t_max: None };
        m.validate()?;
        Ok(m)
    }

    pub fn with_deadline(mut self, t_max: T) -> Self {
        self.t_max = Some(t_max);
        self
    }

    pub fn validate(&self) -> Result<(), LatencyError> {
        if *self.omega.numer() == 0 {
            return Err(LatencyError::ZeroOmega);
        }
        match self.family {
            LatencyFamily::Exponential { rate } if !(rate > T::zero() && rate.is_finite()) => {
                Err(LatencyError::BadRate(rate.to_f64_lossy()))
            }
            LatencyFamily::Deterministic { time } if !(time >= T::zero() && time.is_finite()) => {
                Err(LatencyError::BadTime(time.to_f64_lossy()))
            }
            _ => Ok(()),
        }
    }

    pub fn omega_real(&self) -> T {
        T::of(*self.omega.numer() as f64) / T::of(*self.omega.denom() as f64)
    }

    /// Scaled response-time CDF `F(Ω·t)`.
    pub fn cdf(&self, t: T) -> T {
        if t < T::zero() {
            return T::zero();
        }
        let s = self.omega_real() * t;
        match self.family {
            LatencyFamily::Exponential { rate } => -(-(rate * s)).exp_m1(),
            LatencyFamily::Deterministic { time } => {
                if s >= time {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `workers` i.i.d. response times with CDF `F(Ω·t)`.
    pub fn sample_arrivals<R: Rng + ?Sized>(&self, workers: usize, rng: &mut R) -> Vec<T> {
        let omega = self.omega_real();
        match self.family {
            LatencyFamily::Exponential { rate } => {
                let eff = (rate * omega).to_f64_lossy();
                let exp = Exp::new(eff).expect("validated rate");
                (0..workers).map(|_| T::of(exp.sample(rng))).collect()
            }
            LatencyFamily::Deterministic { time } => vec![time / omega; workers],
        }
    }

    /// Binomial(W, F(Ω·t)) pmf over `w = 0..=W`.
    pub fn arrival_pmf(&self, workers: usize, t: T) -> Result<Vec<T>, LatencyError> {
        if t < T::zero() {
            return Err(LatencyError::NegativeTime(t.to_f64_lossy()));
        }
        Ok(binomial_pmf(workers, self.cdf(t)))
    }
}

/// Indices with `arrival ≤ t_max`, ascending.
pub fn received_at<T: Real>(arrivals: &[T], t_max: T) -> Vec<usize> {
    arrivals.iter().enumerate().filter(|(_, &a)| a <= t_max).map(|(i, _)| i).collect()
}

/// Binomial(n, p) pmf, computed in log space; exact point masses at p ∈ {0, 1}.
pub fn binomial_pmf<T: Real>(n: usize, p: T) -> Vec<T> {
    let mut out = vec![T::zero(); n + 1];
    if p <= T::zero() {
        out[0] = T::one();
        return out;
    }
    if p >= T::one() {
        out[n] = T::one();
        return out;
    }
    let pf = p.to_f64_lossy();
    let (lp, lq) = (pf.ln(), (-pf).ln_1p());
    let mut log_choose = 0.0f64;
    for (w, slot) in out.iter_mut().enumerate() {
        if w > 0 {
            log_choose += ((n - w + 1) as f64).ln() - (w as f64).ln();
        }
        *slot = T::of((log_choose + w as f64 * lp + (n - w) as f64 * lq).exp());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{Binomial, Discrete};

    type Model = LatencyModel<f64>;

    fn one() -> Rational {
        Rational::from_integer(1)
    }

    #[test]
    fn deterministic_arrivals() {
        let m = Model::deterministic(0.5, one()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(m.sample_arrivals(4, &mut rng), vec![0.5; 4]);
    }

    #[test]
    fn exponential_mean() {
        let m = Model::exponential(1.0, one()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let xs = m.sample_arrivals(n, &mut rng);
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn omega_scales_rate() {
        let m = Model::exponential(2.0, Rational::new(9, 15)).unwrap();
        assert_eq!(m.omega, Rational::new(3, 5));
        let t = 0.8;
        assert!((m.cdf(t) - (1.0 - (-2.0 * 0.6 * t).exp())).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let mean = m.sample_arrivals(n, &mut rng).iter().sum::<f64>() / n as f64;
        let expect = 1.0 / 1.2;
        assert!((mean - expect).abs() < 3.0 * expect / (n as f64).sqrt());
    }

    #[test]
    fn received_examples() {
        assert_eq!(received_at(&[0.1, 0.9, 0.4], 0.5), vec![0, 2]);
        assert_eq!(received_at(&[0.1, 0.9, 0.4], f64::INFINITY), vec![0, 1, 2]);
        let m = Model::exponential(1.0, one()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert!(received_at(&m.sample_arrivals(30, &mut rng), 0.0).is_empty());
    }

    #[test]
    fn pmf_examples() {
        let m = Model::exponential(1.0, one()).unwrap();
        let p0 = m.arrival_pmf(30, 0.0).unwrap();
        assert_eq!(p0[0], 1.0);
        let half = m.arrival_pmf(30, std::f64::consts::LN_2).unwrap();
        let oracle = Binomial::new(0.5, 30).unwrap();
        for (w, &p) in half.iter().enumerate() {
            assert!((p - oracle.pmf(w as u64)).abs() < 1e-13);
        }
        assert!(m.arrival_pmf(3, -1.0).is_err());
    }

    #[test]
    fn model_json() {
        let m: Model = serde_json::from_str(r#"{"family":{"kind":"exponential","rate":1.0},"omega":"9/15"}"#).unwrap();
        assert_eq!(m.omega, Rational::new(3, 5));
        let back: Model = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<Model>(r#"{"family":{"kind":"exponential","rate":1.0},"omega":"1/0"}"#).is_err());
        assert!(Model::exponential(-1.0, one()).is_err());
        assert!(Model::exponential(1.0, Rational::from_integer(0)).is_err());
    }

    #[test]
    fn empirical_counts_match_pmf() {
        let m = Model::exponential(1.0, Rational::new(9, 30)).unwrap();
        let (w, t, n) = (30, 1.2, 100_000);
        let pmf = m.arrival_pmf(w, t).unwrap();
        let mut hist = vec![0usize; w + 1];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..n {
            hist[received_at(&m.sample_arrivals(w, &mut rng), t).len()] += 1;
        }
        for (k, &c) in hist.iter().enumerate() {
            let p = pmf[k];
            let sd = (n as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sd + 1.0, "bin {k}: {c} vs {}", n as f64 * p);
        }
    }

    proptest::proptest! {
        #[test]
        fn pmf_normalized_and_increasing_in_t(w in 1usize..60, rate in 0.05f64..5.0, t in 0.0f64..4.0, dt in 0.0f64..2.0) {
            let m = Model::exponential(rate, one()).unwrap();
            let p = m.arrival_pmf(w, t).unwrap();
            proptest::prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let q = m.arrival_pmf(w, t + dt).unwrap();
            let (mut cp, mut cq) = (0.0, 0.0);
            for k in 0..=w {
                cp += p[k];
                cq += q[k];
                proptest::prop_assert!(cq <= cp + 1e-12);
            }
        }
    }
}
