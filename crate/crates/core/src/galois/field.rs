use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GaloisError;

/// An element of a finite field, stored as its canonical integer.
///
/// For GF(2^m) the integer is the coefficient bit-vector of the polynomial
/// representative; for GF(p) it is the residue in `[0, p)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElem(pub u32);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    #[inline]
    pub fn value(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for FieldElem {
    fn from(v: u32) -> Self {
        FieldElem(v)
    }
}

/// Field descriptor as it appears in configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    /// GF(2^m), 1 ≤ m ≤ 16. `poly` is the full modulus including the x^m
    /// term; when absent a standard primitive polynomial is used.
    Binary {
        m: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        poly: Option<u32>,
    },
    /// GF(p) for a prime p < 2^31.
    Prime { p: u32 },
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::gf256()
    }
}

impl FieldSpec {
    /// GF(2^8) with x^8 + x^4 + x^3 + x^2 + 1.
    pub const fn gf256() -> Self {
        FieldSpec::Binary { m: 8, poly: Some(0x11D) }
    }

    /// GF(2^16) with x^16 + x^12 + x^3 + x + 1.
    pub const fn gf65536() -> Self {
        FieldSpec::Binary { m: 16, poly: Some(0x1100B) }
    }

    pub const fn prime(p: u32) -> Self {
        FieldSpec::Prime { p }
    }

    /// The Mersenne prime 2^31 − 1, used by the generic-rank oracle.
    pub const fn mersenne31() -> Self {
        FieldSpec::Prime { p: 0x7FFF_FFFF }
    }

    /// Number of field elements.
    pub fn order(&self) -> u64 {
        match *self {
            FieldSpec::Binary { m, .. } => 1u64 << m,
            FieldSpec::Prime { p } => p as u64,
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Binary { m, .. } => write!(f, "GF(2^{m})"),
            FieldSpec::Prime { p } => write!(f, "GF({p})"),
        }
    }
}

// Primitive polynomials for m = 1..=16.
const DEFAULT_POLYS: [u32; 17] = [
    0, 0x3, 0x7, 0xB, 0x13, 0x25, 0x43, 0x89, 0x11D, 0x211, 0x409, 0x805, 0x1053, 0x201B, 0x4443,
    0x8003, 0x1100B,
];

#[derive(Clone)]
enum Arith {
    Binary { exp: Vec<u32>, log: Vec<u32> },
    Prime { p: u64 },
}

/// A concrete finite field with its arithmetic tables.
///
/// Binary fields use log/antilog tables (at most 2^16 entries each), prime
/// fields use 64-bit modular arithmetic. Construct once and share by
/// reference; the value is immutable.
#[derive(Clone)]
pub struct Field {
    spec: FieldSpec,
    order: u32,
    arith: Arith,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field").field("spec", &self.spec).finish()
    }
}

impl Field {
    pub fn new(spec: FieldSpec) -> Result<Self, GaloisError> {
        match spec {
            FieldSpec::Binary { m, poly } => {
                if !(1..=16).contains(&m) {
                    return Err(GaloisError::InvalidField(format!(
                        "binary extension degree must be in 1..=16, got {m}"
                    )));
                }
                let poly = poly.unwrap_or(DEFAULT_POLYS[m as usize]);
                if poly >> m != 1 {
                    return Err(GaloisError::InvalidField(format!(
                        "modulus {poly:#x} does not have degree {m}"
                    )));
                }
                if !gf2_poly_irreducible(poly) {
                    return Err(GaloisError::InvalidField(format!(
                        "modulus {poly:#x} is reducible over GF(2)"
                    )));
                }
                let (exp, log) = binary_tables(m, poly);
                Ok(Field {
                    spec: FieldSpec::Binary { m, poly: Some(poly) },
                    order: 1 << m,
                    arith: Arith::Binary { exp, log },
                })
            }
            FieldSpec::Prime { p } => {
                if p >= 1 << 31 || !is_prime(p) {
                    return Err(GaloisError::InvalidField(format!(
                        "{p} is not a prime below 2^31"
                    )));
                }
                Ok(Field { spec, order: p, arith: Arith::Prime { p: p as u64 } })
            }
        }
    }

    pub fn gf256() -> Self {
        Field::new(FieldSpec::gf256()).expect("built-in polynomial")
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Checked constructor: `value` must be below the field order.
    pub fn elem(&self, value: u32) -> Result<FieldElem, GaloisError> {
        if value < self.order {
            Ok(FieldElem(value))
        } else {
            Err(GaloisError::OutOfRange { value, order: self.order })
        }
    }

    #[inline]
    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        match &self.arith {
            Arith::Binary { .. } => FieldElem(a.0 ^ b.0),
            Arith::Prime { p } => FieldElem(((a.0 as u64 + b.0 as u64) % p) as u32),
        }
    }

    #[inline]
    pub fn sub(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        match &self.arith {
            Arith::Binary { .. } => FieldElem(a.0 ^ b.0),
            Arith::Prime { p } => FieldElem(((a.0 as u64 + p - b.0 as u64) % p) as u32),
        }
    }

    #[inline]
    pub fn neg(&self, a: FieldElem) -> FieldElem {
        self.sub(FieldElem::ZERO, a)
    }

    #[inline]
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        if a.is_zero() || b.is_zero() {
            return FieldElem::ZERO;
        }
        match &self.arith {
            Arith::Binary { exp, log } => {
                FieldElem(exp[(log[a.0 as usize] + log[b.0 as usize]) as usize])
            }
            Arith::Prime { p } => FieldElem((a.0 as u64 * b.0 as u64 % p) as u32),
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: FieldElem) -> Option<FieldElem> {
        if a.is_zero() {
            return None;
        }
        Some(match &self.arith {
            Arith::Binary { exp, log } => {
                let n = self.order - 1;
                FieldElem(exp[((n - log[a.0 as usize]) % n) as usize])
            }
            Arith::Prime { p } => FieldElem(mod_pow(a.0 as u64, p - 2, *p) as u32),
        })
    }

    pub fn div(&self, a: FieldElem, b: FieldElem) -> Option<FieldElem> {
        self.inv(b).map(|bi| self.mul(a, bi))
    }

    pub fn pow(&self, a: FieldElem, mut e: u64) -> FieldElem {
        let mut base = a;
        let mut acc = FieldElem::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Uniform over all field elements.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElem {
        FieldElem(rng.random_range(0..self.order))
    }

    /// Uniform over the nonzero field elements.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElem {
        FieldElem(rng.random_range(1..self.order))
    }

    /// `len` i.i.d. uniform field elements.
    pub fn random_vector<R: Rng + ?Sized>(
        &self,
        len: usize,
        rng: &mut R,
    ) -> Result<Vec<FieldElem>, GaloisError> {
        if len == 0 {
            return Err(GaloisError::EmptyVector);
        }
        Ok((0..len).map(|_| self.random(rng)).collect())
    }
}

fn mod_pow(mut base: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64;
    base %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    acc
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let p = p as u64;
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn gf2_poly_degree(p: u32) -> u32 {
    31 - p.leading_zeros()
}

fn gf2_poly_mod(mut a: u32, b: u32) -> u32 {
    let db = gf2_poly_degree(b);
    while a != 0 && gf2_poly_degree(a) >= db {
        a ^= b << (gf2_poly_degree(a) - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=deg/2.
fn gf2_poly_irreducible(poly: u32) -> bool {
    let deg = gf2_poly_degree(poly);
    for d in 1..=deg / 2 {
        for divisor in (1u32 << d)..(1u32 << (d + 1)) {
            if gf2_poly_mod(poly, divisor) == 0 {
                return false;
            }
        }
    }
    true
}

/// Carry-less multiply modulo `poly`; only used while building tables.
fn gf2m_mul_slow(mut a: u32, mut b: u32, m: u32, poly: u32) -> u32 {
    let mut acc = 0u32;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a >> m & 1 == 1 {
            a ^= poly;
        }
    }
    acc
}

/// exp/log tables built from a generator of the multiplicative group. The
/// exp table is doubled so `exp[log a + log b]` never needs a reduction.
fn binary_tables(m: u32, poly: u32) -> (Vec<u32>, Vec<u32>) {
    let q = 1u32 << m;
    let n = q - 1;
    let generator = (2..q.max(3))
        .find(|&g| multiplicative_order(g, m, poly) == n)
        .unwrap_or(1);
    let mut exp = vec![0u32; 2 * n as usize];
    let mut log = vec![0u32; q as usize];
    let mut x = 1u32;
    for i in 0..n {
        exp[i as usize] = x;
        exp[(i + n) as usize] = x;
        log[x as usize] = i;
        x = gf2m_mul_slow(x, generator, m, poly);
    }
    (exp, log)
}

fn multiplicative_order(g: u32, m: u32, poly: u32) -> u32 {
    let q = 1u32 << m;
    if g >= q {
        return 0;
    }
    let mut x = g;
    let mut k = 1u32;
    while x != 1 {
        x = gf2m_mul_slow(x, g, m, poly);
        k += 1;
        if k > q {
            return 0;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_fields() -> Vec<Field> {
        vec![
            Field::gf256(),
            Field::new(FieldSpec::Binary { m: 1, poly: None }).unwrap(),
            Field::new(FieldSpec::Binary { m: 4, poly: None }).unwrap(),
            Field::new(FieldSpec::gf65536()).unwrap(),
            Field::new(FieldSpec::prime(7)).unwrap(),
            Field::new(FieldSpec::mersenne31()).unwrap(),
        ]
    }

    #[test]
    fn every_nonzero_element_has_an_inverse() {
        for f in [Field::gf256(), Field::new(FieldSpec::prime(7)).unwrap()] {
            for a in 1..f.order() {
                let a = FieldElem(a);
                let ai = f.inv(a).unwrap();
                assert_eq!(f.mul(a, ai), FieldElem::ONE, "{:?} a={a}", f.spec());
            }
            assert_eq!(f.inv(FieldElem::ZERO), None);
        }
    }

    #[test]
    fn gf256_known_products() {
        let f = Field::gf256();
        // 0x11D reduction: x^8 = x^4 + x^3 + x^2 + 1.
        assert_eq!(f.mul(FieldElem(0x80), FieldElem(2)), FieldElem(0x1D));
        assert_eq!(f.mul(FieldElem(2), FieldElem(3)), FieldElem(6));
        assert_eq!(f.add(FieldElem(0x53), FieldElem(0xCA)), FieldElem(0x53 ^ 0xCA));
    }

    #[test]
    fn table_multiplication_matches_carryless_reference() {
        for m in [3u32, 8, 16] {
            let f = Field::new(FieldSpec::Binary { m, poly: None }).unwrap();
            let poly = DEFAULT_POLYS[m as usize];
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            for _ in 0..2000 {
                let a = f.random(&mut rng);
                let b = f.random(&mut rng);
                assert_eq!(f.mul(a, b).0, gf2m_mul_slow(a.0, b.0, m, poly));
            }
        }
    }

    #[test]
    fn field_axioms_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for f in all_fields() {
            for _ in 0..500 {
                let (a, b, c) = (f.random(&mut rng), f.random(&mut rng), f.random(&mut rng));
                assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                assert_eq!(f.add(f.sub(a, b), b), a);
                assert_eq!(f.add(a, f.neg(a)), FieldElem::ZERO);
            }
        }
    }

    #[test]
    fn irreducible_but_not_primitive_modulus_is_accepted() {
        // x^8 + x^4 + x^3 + x + 1 is irreducible, x is not a generator.
        let f = Field::new(FieldSpec::Binary { m: 8, poly: Some(0x11B) }).unwrap();
        assert_eq!(f.mul(FieldElem(0x57), FieldElem(0x83)), FieldElem(0xC1));
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(Field::new(FieldSpec::prime(9)).is_err());
        assert!(Field::new(FieldSpec::prime(1)).is_err());
        assert!(Field::new(FieldSpec::Binary { m: 17, poly: None }).is_err());
        // x^8 + 1 = (x + 1)^8
        assert!(Field::new(FieldSpec::Binary { m: 8, poly: Some(0x101) }).is_err());
        assert!(Field::new(FieldSpec::Binary { m: 8, poly: Some(0x1D) }).is_err());
    }

    #[test]
    fn random_vector_is_reproducible_and_rejects_empty() {
        let f = Field::gf256();
        let a = f.random_vector(4, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = f.random_vector(4, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            f.random_vector(0, &mut ChaCha8Rng::seed_from_u64(42)),
            Err(GaloisError::EmptyVector)
        ));
    }

    #[test]
    fn random_symbols_in_gf7_are_uniform() {
        // Each count is Binomial(n, 1/7); allow 5 standard deviations.
        let f = Field::new(FieldSpec::prime(7)).unwrap();
        let n = 100_000usize;
        let v = f.random_vector(n, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let mut counts = [0usize; 7];
        for x in v {
            counts[x.0 as usize] += 1;
        }
        let p = 1.0 / 7.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 5.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn elem_checks_range() {
        let f = Field::new(FieldSpec::prime(7)).unwrap();
        assert!(f.elem(6).is_ok());
        assert!(f.elem(7).is_err());
    }
}
