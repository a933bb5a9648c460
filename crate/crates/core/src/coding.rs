//! Encoders: NOW / EW unequal-error-protection codes, MDS, k-block
//! repetition and uncoded assignment.
//!
//! Each worker receives one job. For NOW and EW a window is drawn from Γ;
//! NOW window `i` holds exactly the class-`i` sub-products, EW window `i`
//! holds every class `≤ i`. Coefficients are i.i.d. uniform over the nonzero
//! field elements on the window support.
//!
//! Two combining models are supported (see [`Combining`]). In the default
//! model a worker returns `Σ_j γ_j A_{a(j)} B_{b(j)}` over its window, which
//! is still one matrix product: `W_A = [γ_1 A_{a(1)}, γ_2 A_{a(2)}, …]` and
//! `W_B = [B_{b(1)}; B_{b(2)}; …]`.

use serde::{Deserialize, Serialize};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::galois::{Field, FieldElem, FieldMatrix, FieldSpec, GaloisError};
use crate::importance::ClassMap;
use crate::tensor::{BlockPartition, RealMatrix, TensorError};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodingError {
    #[error("{family} needs {expected} workers, got {found}")]
    WorkerCount { family: String, expected: usize, found: usize },
    #[error("window distribution: {0}")]
    InvalidGamma(String),
    #[error("{0} needs a window distribution")]
    MissingGamma(String),
    #[error("window distribution has {found} entries for {expected} classes")]
    GammaLength { expected: usize, found: usize },
    #[error("class map covers {found} sub-products, partition has {expected}")]
    ClassMismatch { expected: usize, found: usize },
    #[error("expected {expected} {side}-blocks, got {found}")]
    BlockCount { side: &'static str, expected: usize, found: usize },
    #[error("repetition factor must be at least 1")]
    ZeroRepetition,
    #[error("code field {code} differs from the supplied field {given}")]
    FieldMismatch { code: FieldSpec, given: FieldSpec },
    #[error(transparent)]
    Galois(#[from] GaloisError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Window-selection probabilities `(Γ_1, …, Γ_L)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Real + Serialize"))]
pub struct WindowDistribution<T> {
    gammas: Vec<T>,
}

impl<T: Real> TryFrom<Vec<T>> for WindowDistribution<T> {
    type Error = CodingError;

    fn try_from(gammas: Vec<T>) -> Result<Self, Self::Error> {
        WindowDistribution::new(gammas)
    }
}

impl<T: Real> From<WindowDistribution<T>> for Vec<T> {
    fn from(w: WindowDistribution<T>) -> Self {
        w.gammas
    }
}

impl<T: Real> WindowDistribution<T> {
    /// Entries must be nonnegative and sum to 1 within `1e-9`.
    pub fn new(gammas: Vec<T>) -> Result<Self, CodingError> {
        if gammas.is_empty() {
            return Err(CodingError::InvalidGamma("empty".into()));
        }
        if gammas.iter().any(|&g| !(g >= T::zero()) || !g.is_finite()) {
            return Err(CodingError::InvalidGamma("entries must be finite and nonnegative".into()));
        }
        let sum: T = gammas.iter().copied().sum();
        if (sum - T::one()).abs().to_f64_lossy() > 1e-9 {
            return Err(CodingError::InvalidGamma(format!("entries sum to {sum}")));
        }
        Ok(WindowDistribution { gammas })
    }

    /// All mass on the last window.
    pub fn degenerate(windows: usize) -> Self {
        let mut gammas = vec![T::zero(); windows];
        gammas[windows - 1] = T::one();
        WindowDistribution { gammas }
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    pub fn get(&self, i: usize) -> T {
        self.gammas[i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.gammas
    }

    pub fn sampler(&self) -> WeightedIndex<f64> {
        WeightedIndex::new(self.gammas.iter().map(|g| g.to_f64_lossy())).expect("validated distribution")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    Now,
    Ew,
    Mds,
    Repetition { k: usize },
    Uncoded,
}

impl Family {
    pub fn label(&self) -> String {
        match self {
            Family::Now => "now".into(),
            Family::Ew => "ew".into(),
            Family::Mds => "mds".into(),
            Family::Repetition { k } => format!("rep{k}"),
            Family::Uncoded => "uncoded".into(),
        }
    }

    pub fn uses_windows(&self) -> bool {
        matches!(self, Family::Now | Family::Ew)
    }
}

/// How a worker's job combines the sub-products of its window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combining {
    /// One coefficient per sub-product: the worker returns
    /// `Σ_j γ_j A_{a(j)} B_{b(j)}`. Unknowns are the sub-products.
    #[default]
    SubProduct,
    /// Separate coefficients per factor block: the worker returns
    /// `(Σ_i α_i A_i)(Σ_j β_j B_j)`. Unknowns are all `(A-block, B-block)`
    /// pairs, including products that are not sub-products of C.
    Factored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Real + Serialize"))]
pub struct UepCode<T> {
    pub family: Family,
    pub partition: BlockPartition,
    pub classes: ClassMap,
    pub gamma: Option<WindowDistribution<T>>,
    pub workers: usize,
    pub field: FieldSpec,
    pub combining: Combining,
}

impl<T: Real> UepCode<T> {
    /// Validated code over the default field with sub-product combining.
    pub fn new(
        family: Family,
        partition: BlockPartition,
        classes: ClassMap,
        gamma: Option<WindowDistribution<T>>,
        workers: usize,
    ) -> Result<Self, CodingError> {
        let code = UepCode {
            family,
            partition,
            classes,
            gamma,
            workers,
            field: FieldSpec::default(),
            combining: Combining::default(),
        };
        code.validate()?;
        Ok(code)
    }

    pub fn with_field(mut self, field: FieldSpec) -> Self {
        self.field = field;
        self
    }

    pub fn with_combining(mut self, combining: Combining) -> Self {
        self.combining = combining;
        self
    }

    pub fn validate(&self) -> Result<(), CodingError> {
        let k = self.partition.sub_product_count();
        if self.classes.block_count() != k {
            return Err(CodingError::ClassMismatch { expected: k, found: self.classes.block_count() });
        }
        let need = |expected: usize| {
            if self.workers == expected {
                Ok(())
            } else {
                Err(CodingError::WorkerCount { family: self.family.label(), expected, found: self.workers })
            }
        };
        match self.family {
            Family::Now | Family::Ew => {
                let g = self.gamma.as_ref().ok_or_else(|| CodingError::MissingGamma(self.family.label()))?;
                if g.len() != self.classes.class_count() {
                    return Err(CodingError::GammaLength { expected: self.classes.class_count(), found: g.len() });
                }
                if self.workers == 0 {
                    return Err(CodingError::WorkerCount { family: self.family.label(), expected: 1, found: 0 });
                }
                Ok(())
            }
            Family::Mds if self.workers == 0 => {
                Err(CodingError::WorkerCount { family: self.family.label(), expected: 1, found: 0 })
            }
            Family::Mds => Ok(()),
            Family::Repetition { k: 0 } => Err(CodingError::ZeroRepetition),
            Family::Repetition { k: r } => need(r * k),
            Family::Uncoded => need(k),
        }
    }

    /// Number of selectable windows (0 for the uncoded baselines).
    pub fn window_count(&self) -> usize {
        match self.family {
            Family::Now | Family::Ew => self.classes.class_count(),
            Family::Mds => 1,
            _ => 0,
        }
    }

    /// Sub-products covered by window `i`, ascending.
    pub fn window_support(&self, i: usize) -> Vec<usize> {
        let cm = &self.classes;
        match self.family {
            Family::Now => cm.members(i),
            Family::Ew => (0..cm.block_count()).filter(|&j| cm.class_of(j) <= i).collect(),
            _ => (0..cm.block_count()).collect(),
        }
    }

    /// Columns of the product coefficient matrix.
    pub fn unknown_count(&self) -> usize {
        match self.combining {
            Combining::SubProduct => self.partition.sub_product_count(),
            Combining::Factored => self.partition.a_block_count() * self.partition.b_block_count(),
        }
    }

    /// Column of sub-product `j` among the unknowns.
    pub fn unknown_of(&self, j: usize) -> usize {
        match self.combining {
            Combining::SubProduct => j,
            Combining::Factored => {
                let (a, b) = self.partition.factors(j);
                a * self.partition.b_block_count() + b
            }
        }
    }

    fn check_field(&self, field: &Field) -> Result<(), CodingError> {
        if field.spec() != self.field {
            return Err(CodingError::FieldMismatch { code: self.field, given: field.spec() });
        }
        Ok(())
    }
}

/// One worker's coefficients. `coeffs` is indexed by the code's unknowns
/// ([`UepCode::unknown_of`]); `alpha` / `beta` by A- and B-blocks. Under
/// sub-product combining `alpha` and `beta` are 0/1 support indicators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedPacket {
    pub worker: usize,
    pub window: Option<usize>,
    pub alpha: Vec<FieldElem>,
    pub beta: Vec<FieldElem>,
    pub coeffs: Vec<FieldElem>,
}

impl CodedPacket {
    /// Sub-products with a nonzero coefficient, as unknown indices.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(j, _)| j)
    }
}

/// Draw one packet per worker.
pub fn encode<T: Real, R: Rng + ?Sized>(
    code: &UepCode<T>,
    field: &Field,
    rng: &mut R,
) -> Result<Vec<CodedPacket>, CodingError> {
    code.validate()?;
    code.check_field(field)?;
    let part = &code.partition;
    let (na, nb) = (part.a_block_count(), part.b_block_count());
    let sampler = code.gamma.as_ref().filter(|_| code.family.uses_windows()).map(|g| g.sampler());
    let supports: Vec<Vec<usize>> = (0..code.window_count()).map(|i| code.window_support(i)).collect();

    let mut packets = Vec::with_capacity(code.workers);
    for worker in 0..code.workers {
        let (window, support) = match code.family {
            Family::Now | Family::Ew => {
                let i = sampler.as_ref().expect("validated gamma").sample(rng);
                (Some(i), supports[i].as_slice())
            }
            Family::Mds => (None, supports[0].as_slice()),
            Family::Repetition { .. } | Family::Uncoded => {
                let j = worker % part.sub_product_count();
                packets.push(single(code, worker, j));
                continue;
            }
        };

        let mut alpha = vec![FieldElem::ZERO; na];
        let mut beta = vec![FieldElem::ZERO; nb];
        let mut coeffs = vec![FieldElem::ZERO; code.unknown_count()];
        match code.combining {
            Combining::SubProduct => {
                for &j in support {
                    let (a, b) = part.factors(j);
                    alpha[a] = FieldElem::ONE;
                    beta[b] = FieldElem::ONE;
                    coeffs[j] = field.random_nonzero(rng);
                }
            }
            Combining::Factored => {
                let mut a_on = vec![false; na];
                let mut b_on = vec![false; nb];
                for &j in support {
                    let (a, b) = part.factors(j);
                    a_on[a] = true;
                    b_on[b] = true;
                }
                for (x, _) in alpha.iter_mut().zip(&a_on).filter(|(_, &on)| on) {
                    *x = field.random_nonzero(rng);
                }
                for (x, _) in beta.iter_mut().zip(&b_on).filter(|(_, &on)| on) {
                    *x = field.random_nonzero(rng);
                }
                for a in 0..na {
                    for b in 0..nb {
                        coeffs[a * nb + b] = field.mul(alpha[a], beta[b]);
                    }
                }
            }
        }
        packets.push(CodedPacket { worker, window, alpha, beta, coeffs });
    }
    Ok(packets)
}

fn single<T: Real>(code: &UepCode<T>, worker: usize, j: usize) -> CodedPacket {
    let part = &code.partition;
    let (a, b) = part.factors(j);
    let mut alpha = vec![FieldElem::ZERO; part.a_block_count()];
    let mut beta = vec![FieldElem::ZERO; part.b_block_count()];
    let mut coeffs = vec![FieldElem::ZERO; code.unknown_count()];
    alpha[a] = FieldElem::ONE;
    beta[b] = FieldElem::ONE;
    coeffs[code.unknown_of(j)] = FieldElem::ONE;
    CodedPacket { worker, window: None, alpha, beta, coeffs }
}

/// Field element to real payload coefficient: its canonical integer.
pub fn embed<T: Real>(e: FieldElem) -> T {
    T::of(e.value() as f64)
}

/// A packet with its real coded factors.
#[derive(Debug, Clone)]
pub struct WorkerJob<T> {
    pub packet: CodedPacket,
    pub payload_a: RealMatrix<T>,
    pub payload_b: RealMatrix<T>,
}

impl<T: Real> WorkerJob<T> {
    /// What the worker sends back: `W_A · W_B`.
    pub fn compute(&self) -> Result<RealMatrix<T>, TensorError> {
        self.payload_a.matmul(&self.payload_b)
    }
}

/// Real coded factors of one packet.
pub fn payloads<T: Real>(
    code: &UepCode<T>,
    packet: &CodedPacket,
    a_blocks: &[RealMatrix<T>],
    b_blocks: &[RealMatrix<T>],
) -> Result<(RealMatrix<T>, RealMatrix<T>), CodingError> {
    let part = &code.partition;
    if a_blocks.len() != part.a_block_count() {
        return Err(CodingError::BlockCount { side: "A", expected: part.a_block_count(), found: a_blocks.len() });
    }
    if b_blocks.len() != part.b_block_count() {
        return Err(CodingError::BlockCount { side: "B", expected: part.b_block_count(), found: b_blocks.len() });
    }
    match code.combining {
        Combining::SubProduct => {
            let support: Vec<usize> = packet.support().collect();
            let scaled: Vec<RealMatrix<T>> = support
                .iter()
                .map(|&j| a_blocks[part.factors(j).0].scaled(embed(packet.coeffs[j])))
                .collect();
            let wa = RealMatrix::hcat(&scaled.iter().collect::<Vec<_>>())?;
            let wb = RealMatrix::vcat(&support.iter().map(|&j| &b_blocks[part.factors(j).1]).collect::<Vec<_>>())?;
            Ok((wa, wb))
        }
        Combining::Factored => Ok((combine(&packet.alpha, a_blocks)?, combine(&packet.beta, b_blocks)?)),
    }
}

fn combine<T: Real>(coeffs: &[FieldElem], blocks: &[RealMatrix<T>]) -> Result<RealMatrix<T>, TensorError> {
    let (r, c) = blocks[0].shape();
    let mut out = RealMatrix::zeros(r, c);
    for (&x, b) in coeffs.iter().zip(blocks) {
        if !x.is_zero() {
            out.axpy(embed(x), b)?;
        }
    }
    Ok(out)
}

/// [`encode`] followed by payload construction, same RNG stream.
pub fn encode_jobs<T: Real, R: Rng + ?Sized>(
    code: &UepCode<T>,
    field: &Field,
    a_blocks: &[RealMatrix<T>],
    b_blocks: &[RealMatrix<T>],
    rng: &mut R,
) -> Result<Vec<WorkerJob<T>>, CodingError> {
    encode(code, field, rng)?
        .into_iter()
        .map(|packet| {
            let (payload_a, payload_b) = payloads(code, &packet, a_blocks, b_blocks)?;
            Ok(WorkerJob { packet, payload_a, payload_b })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
    Product,
}

/// Stack the chosen coefficient vectors of `packets`, one row per packet.
pub fn coefficient_matrix<'a, T: Real>(
    code: &UepCode<T>,
    packets: impl IntoIterator<Item = &'a CodedPacket>,
    side: Side,
) -> FieldMatrix {
    let cols = match side {
        Side::A => code.partition.a_block_count(),
        Side::B => code.partition.b_block_count(),
        Side::Product => code.unknown_count(),
    };
    let mut m = FieldMatrix::with_cols(cols);
    for p in packets {
        let row = match side {
            Side::A => &p.alpha,
            Side::B => &p.beta,
            Side::Product => &p.coeffs,
        };
        m.push_row(row).expect("packet built for this code");
    }
    m
}
