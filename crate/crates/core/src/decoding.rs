//! Decide which sub-products the received packets determine, and rebuild Ĉ.
//!
//! Rank-oracle mode works over the code's field: sub-product `j` is
//! recoverable iff its unit vector lies in the row space of the received
//! product-coefficient matrix. Numeric mode solves the real system formed by
//! the returned payload products.

use serde::{Deserialize, Serialize};

use crate::coding::{coefficient_matrix, embed, CodedPacket, Combining, Side, UepCode};
use crate::galois::Field;
use crate::tensor::{assemble, BlockPartition, RealMatrix, TensorError};
use crate::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("numeric decoding needs one returned product per received packet ({packets} packets, {products} products)")]
    MissingProducts { packets: usize, products: usize },
    #[error("expected {expected} true sub-products, got {found}")]
    TrueBlockCount { expected: usize, found: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    #[default]
    RankOracle,
    Numeric,
}

#[derive(Debug, Clone)]
pub struct DecodeOutcome<T> {
    /// Indexed by sub-product.
    pub decodable: Vec<bool>,
    /// Recovered sub-products; `None` when undecodable or when rank-oracle
    /// decoding ran without true blocks.
    pub blocks: Vec<Option<RealMatrix<T>>>,
    pub mode: DecodeMode,
}

impl<T: Real> DecodeOutcome<T> {
    pub fn decoded_count(&self) -> usize {
        self.decodable.iter().filter(|&&d| d).count()
    }
}

/// Decodable flags from the field rank test alone.
pub fn decodable_set<'a, T: Real>(
    code: &UepCode<T>,
    field: &Field,
    received: impl IntoIterator<Item = &'a CodedPacket>,
) -> Vec<bool> {
    let k = code.partition.sub_product_count();
    let m = coefficient_matrix(code, received, Side::Product);
    if m.rows() == 0 {
        return vec![false; k];
    }
    let ech = field.echelon(&m);
    (0..k).map(|j| ech.contains_unit(code.unknown_of(j))).collect()
}

/// Decode `received`. Rank-oracle mode copies decodable blocks from
/// `true_blocks` when given; numeric mode needs `products[i]`, the payload
/// product returned with `received[i]`.
pub fn decode<T: Real>(
    code: &UepCode<T>,
    field: &Field,
    mode: DecodeMode,
    received: &[&CodedPacket],
    products: Option<&[RealMatrix<T>]>,
    true_blocks: Option<&[RealMatrix<T>]>,
) -> Result<DecodeOutcome<T>, DecodeError> {
    let k = code.partition.sub_product_count();
    if let Some(t) = true_blocks {
        if t.len() != k {
            return Err(DecodeError::TrueBlockCount { expected: k, found: t.len() });
        }
    }
    match mode {
        DecodeMode::RankOracle => {
            let decodable = decodable_set(code, field, received.iter().copied());
            let blocks = decodable
                .iter()
                .enumerate()
                .map(|(j, &d)| if d { true_blocks.map(|t| t[j].clone()) } else { None })
                .collect();
            Ok(DecodeOutcome { decodable, blocks, mode })
        }
        DecodeMode::Numeric => {
            let products = products.unwrap_or(&[]);
            if products.len() != received.len() {
                return Err(DecodeError::MissingProducts { packets: received.len(), products: products.len() });
            }
            let mut out = solve_real(code, received, products)?;
            if let Some(t) = true_blocks {
                let tol = residual_tol::<T>();
                for ((d, blk), truth) in out.decodable.iter_mut().zip(out.blocks.iter_mut()).zip(t) {
                    let ok = blk.as_ref().is_some_and(|b| b.relative_error(truth).is_ok_and(|e| e < tol));
                    if !ok {
                        *d = false;
                        *blk = None;
                    }
                }
            }
            Ok(out)
        }
    }
}

fn residual_tol<T: Real>() -> T {
    T::of(1e-6).max(T::epsilon() * T::of(1e3))
}

/// Real weight of every unknown in one packet's returned product.
fn real_row<T: Real>(code: &UepCode<T>, p: &CodedPacket) -> Vec<T> {
    match code.combining {
        Combining::SubProduct => p.coeffs.iter().map(|&c| embed(c)).collect(),
        Combining::Factored => {
            let nb = p.beta.len();
            (0..p.coeffs.len()).map(|u| embed::<T>(p.alpha[u / nb]) * embed::<T>(p.beta[u % nb])).collect()
        }
    }
}

/// Gauss-Jordan with partial pivoting on `[G | Y]`. An unknown is recovered
/// when its reduced row is a unit vector; every reduced row whose support
/// lies inside the recovered set must then fit its payload.
fn solve_real<T: Real>(
    code: &UepCode<T>,
    received: &[&CodedPacket],
    products: &[RealMatrix<T>],
) -> Result<DecodeOutcome<T>, DecodeError> {
    let k = code.partition.sub_product_count();
    let n = code.unknown_count();
    let shape = code.partition.sub_product_shape();
    let mut g: Vec<Vec<T>> = Vec::with_capacity(received.len());
    let mut y: Vec<RealMatrix<T>> = Vec::with_capacity(received.len());
    for (p, prod) in received.iter().zip(products) {
        if prod.shape() != shape {
            return Err(TensorError::ShapeMismatch { expected: shape, found: prod.shape() }.into());
        }
        let row = real_row(code, p);
        let scale = row.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if scale == T::zero() {
            continue;
        }
        g.push(row.into_iter().map(|x| x / scale).collect());
        y.push(prod.scaled(T::one() / scale));
    }

    let eps = T::epsilon().sqrt();
    let mut pivots: Vec<usize> = Vec::new();
    let mut rank = 0;
    for c in 0..n {
        if rank == g.len() {
            break;
        }
        let (best, mag) = (rank..g.len())
            .map(|r| (r, g[r][c].abs()))
            .fold((rank, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= eps {
            continue;
        }
        g.swap(rank, best);
        y.swap(rank, best);
        let inv = T::one() / g[rank][c];
        g[rank].iter_mut().for_each(|x| *x *= inv);
        y[rank] = y[rank].scaled(inv);
        let (prow, py) = (g[rank].clone(), y[rank].clone());
        for r in 0..g.len() {
            if r == rank {
                continue;
            }
            let f = g[r][c];
            if f == T::zero() {
                continue;
            }
            for (x, &p) in g[r].iter_mut().zip(&prow) {
                *x -= f * p;
            }
            y[r].axpy(-f, &py)?;
        }
        pivots.push(c);
        rank += 1;
    }

    let mut solved: Vec<Option<RealMatrix<T>>> = vec![None; n];
    for (r, &c) in pivots.iter().enumerate() {
        if g[r].iter().enumerate().all(|(cc, x)| cc == c || x.abs() <= eps) {
            solved[c] = Some(y[r].clone());
        }
    }
    // Reduced rows supported on solved unknowns only (including the zero
    // rows below the rank) must be consistent with the solution.
    let tol = residual_tol::<T>();
    for r in 0..g.len() {
        let supp: Vec<usize> = (0..n).filter(|&c| g[r][c].abs() > eps).collect();
        if supp.iter().any(|&c| solved[c].is_none()) {
            continue;
        }
        let mut fit = RealMatrix::zeros(shape.0, shape.1);
        for &c in &supp {
            fit.axpy(g[r][c], solved[c].as_ref().expect("solved"))?;
        }
        let norm = y[r].frobenius();
        let resid = fit.sub(&y[r])?.frobenius();
        let scale = supp.iter().map(|&c| solved[c].as_ref().expect("solved").frobenius()).fold(norm, T::max);
        if resid > tol * scale.max(T::min_positive_value()) {
            for &c in &supp {
                solved[c] = None;
            }
        }
    }

    let blocks: Vec<Option<RealMatrix<T>>> = (0..k).map(|j| solved[code.unknown_of(j)].clone()).collect();
    let decodable = blocks.iter().map(Option::is_some).collect();
    Ok(DecodeOutcome { decodable, blocks, mode: DecodeMode::Numeric })
}

/// Ĉ from the decoded sub-products; everything else is zero.
pub fn reconstruct<T: Real>(outcome: &DecodeOutcome<T>, part: &BlockPartition) -> Result<RealMatrix<T>, TensorError> {
    assemble(
        outcome
            .blocks
            .iter()
            .enumerate()
            .zip(&outcome.decodable)
            .filter_map(|((j, b), &d)| if d { b.as_ref().map(|b| (part.position(j), b)) } else { None }),
        part,
    )
}

/// `‖C − Ĉ‖²` for any decodable pattern without forming Ĉ, from the Gram
/// matrix of the sub-products. Only cxr terms overlap, so rxc keeps the
/// diagonal.
#[derive(Debug, Clone)]
pub struct GramLoss<T> {
    gram: Vec<Vec<T>>,
    total: T,
}

impl<T: Real> GramLoss<T> {
    pub fn new(sub_products: &[RealMatrix<T>], part: &BlockPartition) -> Result<Self, TensorError> {
        let k = sub_products.len();
        let mut gram = vec![vec![T::zero(); k]; k];
        for i in 0..k {
            gram[i][i] = sub_products[i].frobenius_sq();
            if part.overlapping() {
                for j in 0..i {
                    let v = sub_products[i].inner(&sub_products[j])?;
                    gram[i][j] = v;
                    gram[j][i] = v;
                }
            }
        }
        let total = gram.iter().flatten().copied().sum();
        Ok(GramLoss { gram, total })
    }

    /// `‖C‖²`
    pub fn total(&self) -> T {
        self.total
    }

    /// Energy of each sub-product, `‖C_j‖²`.
    pub fn energies(&self) -> Vec<T> {
        (0..self.gram.len()).map(|j| self.gram[j][j]).collect()
    }

    pub fn loss(&self, decodable: &[bool]) -> T {
        let missing: Vec<usize> = (0..decodable.len()).filter(|&j| !decodable[j]).collect();
        missing.iter().map(|&i| missing.iter().map(|&j| self.gram[i][j]).sum::<T>()).sum()
    }
}
