use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use super::{AnalyticsError, MAX_ENUMERATED};
use crate::{ExactProb, Real};

/// All vectors of `parts` nonnegative integers summing to `total`, in
/// lexicographically decreasing order of the first coordinate.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Option<Vec<usize>>,
}

impl Compositions {
    pub fn new(total: usize, parts: usize) -> Self {
        let current = match parts {
            0 if total > 0 => None,
            0 => Some(Vec::new()),
            _ => {
                let mut v = vec![0; parts];
                v[0] = total;
                Some(v)
            }
        };
        Compositions { current }
    }
}

impl Iterator for Compositions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let v = self.current.as_mut().expect("checked above");
        let len = v.len();
        // Move one unit from the rightmost nonzero non-final slot to its
        // right neighbour and sweep the tail into that neighbour.
        match (0..len.saturating_sub(1)).rev().find(|&i| v[i] > 0) {
            Some(i) => {
                v[i] -= 1;
                let tail: usize = v[i + 1..].iter().sum();
                v[i + 1..].iter_mut().for_each(|x| *x = 0);
                v[i + 1] = tail + 1;
            }
            None => self.current = None,
        }
        Some(out)
    }
}

/// `(Σn)! / ∏ n_i!`, exact.
pub fn multinomial_coefficient(n: &[usize]) -> BigUint {
    let mut acc = BigUint::one();
    let mut seen = 0u64;
    for &ni in n {
        for j in 1..=ni as u64 {
            seen += 1;
            acc = acc * seen / j;
        }
    }
    acc
}

/// Multinomial pmf `N!/(∏ n_i!) ∏ Γ_i^{n_i}`.
pub fn multinomial_weight<T: Real>(n: &[usize], gamma: &[T]) -> Result<T, AnalyticsError> {
    check(n, gamma.len())?;
    let coef = T::of(multinomial_coefficient(n).to_f64().unwrap_or(f64::INFINITY));
    Ok(n.iter().zip(gamma).fold(coef, |acc, (&ni, &g)| acc * g.powi(ni as i32)))
}

/// Exact multinomial pmf over rational Γ.
pub fn multinomial_weight_exact(n: &[usize], gamma: &[ExactProb]) -> Result<ExactProb, AnalyticsError> {
    check(n, gamma.len())?;
    let coef = ExactProb::from_integer(multinomial_coefficient(n).into());
    Ok(n.iter().zip(gamma).fold(coef, |acc, (&ni, g)| acc * num_traits::pow(g.clone(), ni)))
}

fn check(n: &[usize], classes: usize) -> Result<(), AnalyticsError> {
    if n.len() != classes {
        return Err(AnalyticsError::Length { what: "composition", expected: classes, found: n.len() });
    }
    let total: usize = n.iter().sum();
    if total > MAX_ENUMERATED {
        return Err(AnalyticsError::TooLarge(total));
    }
    Ok(())
}
