//! Dense real matrices and the two block partitions of `C = A·B`.
//!
//! Row-times-column (`rxc`, M = 1): A is cut into N row blocks (U×H), B into
//! P column blocks (H×Q), and sub-product `C_np = A_n B_p` is one tile of C.
//!
//! Column-times-row (`cxr`, N = P = 1): A is cut into M column blocks (U×H),
//! B into M row blocks (H×Q), and `C = Σ_m A_m B_m` is a sum of full-size
//! terms.
//!
//! Sub-products are indexed `j = n·P + p` for rxc and `j = m` for cxr.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Real;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("buffer of length {len} cannot hold a {rows}x{cols} matrix")]
    BadBuffer { rows: usize, cols: usize, len: usize },
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("duplicate block position {0}")]
    DuplicatePosition(Position),
    #[error("block position {0} does not exist in this partition")]
    PositionOutOfRange(Position),
}

/// Dense row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct RealMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for RealMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealMatrix {}x{}", self.rows, self.cols)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

impl<T: Real> RealMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, TensorError> {
        if data.len() != rows * cols {
            return Err(TensorError::BadBuffer { rows, cols, len: data.len() });
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[T]]) -> Result<Self, TensorError> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(TensorError::ShapeMismatch { expected: (1, cols), found: (1, r.len()) });
            }
            data.extend_from_slice(r);
        }
        Ok(RealMatrix { rows: rows.len(), cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        RealMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn ensure_shape(&self, other: &Self) -> Result<(), TensorError> {
        if self.shape() != other.shape() {
            return Err(TensorError::ShapeMismatch { expected: self.shape(), found: other.shape() });
        }
        Ok(())
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, TensorError> {
        if self.cols != rhs.rows {
            return Err(TensorError::ShapeMismatch {
                expected: (self.cols, rhs.cols),
                found: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn add_assign(&mut self, rhs: &Self) -> Result<(), TensorError> {
        self.ensure_shape(rhs)?;
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    /// `self += s · rhs`
    pub fn axpy(&mut self, s: T, rhs: &Self) -> Result<(), TensorError> {
        self.ensure_shape(rhs)?;
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self, TensorError> {
        self.ensure_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect();
        Ok(RealMatrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scaled(&self, s: T) -> Self {
        RealMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        RealMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|&x| x * x).sum()
    }

    pub fn frobenius(&self) -> T {
        self.frobenius_sq().sqrt()
    }

    /// Frobenius inner product `⟨self, rhs⟩`.
    pub fn inner(&self, rhs: &Self) -> Result<T, TensorError> {
        self.ensure_shape(rhs)?;
        Ok(self.data.iter().zip(&rhs.data).map(|(&a, &b)| a * b).sum())
    }

    /// `‖self − rhs‖_F / ‖rhs‖_F`, or the absolute error when `rhs` is zero.
    pub fn relative_error(&self, rhs: &Self) -> Result<T, TensorError> {
        let diff = self.sub(rhs)?.frobenius();
        let scale = rhs.frobenius();
        Ok(if scale > T::zero() { diff / scale } else { diff })
    }

    /// Copy of rows `r0..r0+rows`, columns `c0..c0+cols`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c))
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Self) {
        for r in 0..src.rows {
            let dst = &mut self.data[(r0 + r) * self.cols + c0..(r0 + r) * self.cols + c0 + src.cols];
            dst.copy_from_slice(src.row(r));
        }
    }

    /// `[m_1, m_2, …]`: side-by-side concatenation.
    pub fn hcat(parts: &[&Self]) -> Result<Self, TensorError> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let cols = parts.iter().map(|m| m.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut c0 = 0;
        for m in parts {
            if m.rows != rows {
                return Err(TensorError::ShapeMismatch { expected: (rows, m.cols), found: m.shape() });
            }
            out.set_block(0, c0, m);
            c0 += m.cols;
        }
        Ok(out)
    }

    /// `[m_1; m_2; …]`: stacked concatenation.
    pub fn vcat(parts: &[&Self]) -> Result<Self, TensorError> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.cols != cols {
                return Err(TensorError::ShapeMismatch { expected: (m.rows, cols), found: m.shape() });
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(RealMatrix { rows, cols, data })
    }

    pub fn cast<S: Real>(&self) -> RealMatrix<S> {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| S::of(x.to_f64_lossy())).collect(),
        }
    }
}

/// Squared Frobenius loss `‖C − Ĉ‖_F²`.
pub fn loss<T: Real>(c: &RealMatrix<T>, c_hat: &RealMatrix<T>) -> Result<T, TensorError> {
    Ok(c.sub(c_hat)?.frobenius_sq())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "rxc")]
    RowsTimesCols,
    #[serde(rename = "cxr")]
    ColsTimesRows,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::RowsTimesCols => "rxc",
            Scheme::ColsTimesRows => "cxr",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Where a sub-product lands in C: a tile of the rxc grid, or one of the cxr
/// summands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Position {
    Grid { row: usize, col: usize },
    Term(usize),
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Grid { row, col } => write!(f, "({row},{col})"),
            Position::Term(m) => write!(f, "term {m}"),
        }
    }
}

/// Block layout of `A (NU×MH) · B (MH×PQ)`. Field names follow the usual
/// block-count / block-size convention: N, M, P counts and U, H, Q sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct BlockPartition {
    scheme: Scheme,
    n: usize,
    m: usize,
    p: usize,
    u: usize,
    h: usize,
    q: usize,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<usize>,
    u: usize,
    h: usize,
    q: usize,
}

impl TryFrom<PartitionRepr> for BlockPartition {
    type Error = TensorError;

    fn try_from(r: PartitionRepr) -> Result<Self, Self::Error> {
        match r.scheme {
            Scheme::RowsTimesCols => {
                if r.m.is_some_and(|m| m != 1) {
                    return Err(TensorError::InvalidPartition("rxc requires m = 1".into()));
                }
                let n = r.n.ok_or_else(|| TensorError::InvalidPartition("rxc needs n".into()))?;
                let p = r.p.ok_or_else(|| TensorError::InvalidPartition("rxc needs p".into()))?;
                BlockPartition::rxc(n, p, r.u, r.h, r.q)
            }
            Scheme::ColsTimesRows => {
                if r.n.is_some_and(|n| n != 1) || r.p.is_some_and(|p| p != 1) {
                    return Err(TensorError::InvalidPartition("cxr requires n = p = 1".into()));
                }
                let m = r.m.ok_or_else(|| TensorError::InvalidPartition("cxr needs m".into()))?;
                BlockPartition::cxr(m, r.u, r.h, r.q)
            }
        }
    }
}

impl From<BlockPartition> for PartitionRepr {
    fn from(b: BlockPartition) -> Self {
        let (n, m, p) = match b.scheme {
            Scheme::RowsTimesCols => (Some(b.n), None, Some(b.p)),
            Scheme::ColsTimesRows => (None, Some(b.m), None),
        };
        PartitionRepr { scheme: b.scheme, n, m, p, u: b.u, h: b.h, q: b.q }
    }
}

impl BlockPartition {
    /// Row-times-column: N row blocks of A, P column blocks of B.
    pub fn rxc(n: usize, p: usize, u: usize, h: usize, q: usize) -> Result<Self, TensorError> {
        Self::checked(Scheme::RowsTimesCols, n, 1, p, u, h, q)
    }

    /// Column-times-row: M column blocks of A paired with M row blocks of B.
    pub fn cxr(m: usize, u: usize, h: usize, q: usize) -> Result<Self, TensorError> {
        Self::checked(Scheme::ColsTimesRows, 1, m, 1, u, h, q)
    }

    fn checked(
        scheme: Scheme,
        n: usize,
        m: usize,
        p: usize,
        u: usize,
        h: usize,
        q: usize,
    ) -> Result<Self, TensorError> {
        if [n, m, p, u, h, q].contains(&0) {
            return Err(TensorError::InvalidPartition("all counts and sizes must be positive".into()));
        }
        Ok(BlockPartition { scheme, n, m, p, u, h, q })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// `(N, M, P, U, H, Q)`
    pub fn dims(&self) -> (usize, usize, usize, usize, usize, usize) {
        (self.n, self.m, self.p, self.u, self.h, self.q)
    }

    /// `U·H·Q`, the scale of `E‖C_j‖²` per unit variance product.
    pub fn uhq(&self) -> usize {
        self.u * self.h * self.q
    }

    pub fn a_block_count(&self) -> usize {
        match self.scheme {
            Scheme::RowsTimesCols => self.n,
            Scheme::ColsTimesRows => self.m,
        }
    }

    pub fn b_block_count(&self) -> usize {
        match self.scheme {
            Scheme::RowsTimesCols => self.p,
            Scheme::ColsTimesRows => self.m,
        }
    }

    /// N·P for rxc, M for cxr.
    pub fn sub_product_count(&self) -> usize {
        match self.scheme {
            Scheme::RowsTimesCols => self.n * self.p,
            Scheme::ColsTimesRows => self.m,
        }
    }

    /// Number of cxr summands (1 for rxc); the factor in the cxr loss bound.
    pub fn terms(&self) -> usize {
        self.m
    }

    pub fn a_shape(&self) -> (usize, usize) {
        (self.n * self.u, self.m * self.h)
    }

    pub fn b_shape(&self) -> (usize, usize) {
        (self.m * self.h, self.p * self.q)
    }

    pub fn c_shape(&self) -> (usize, usize) {
        (self.n * self.u, self.p * self.q)
    }

    pub fn a_block_shape(&self) -> (usize, usize) {
        (self.u, self.h)
    }

    pub fn b_block_shape(&self) -> (usize, usize) {
        (self.h, self.q)
    }

    pub fn sub_product_shape(&self) -> (usize, usize) {
        (self.u, self.q)
    }

    /// The A-block and B-block whose product is sub-product `j`.
    pub fn factors(&self, j: usize) -> (usize, usize) {
        match self.scheme {
            Scheme::RowsTimesCols => (j / self.p, j % self.p),
            Scheme::ColsTimesRows => (j, j),
        }
    }

    pub fn position(&self, j: usize) -> Position {
        match self.scheme {
            Scheme::RowsTimesCols => Position::Grid { row: j / self.p, col: j % self.p },
            Scheme::ColsTimesRows => Position::Term(j),
        }
    }

    pub fn index_of(&self, pos: Position) -> Option<usize> {
        match (self.scheme, pos) {
            (Scheme::RowsTimesCols, Position::Grid { row, col }) if row < self.n && col < self.p => {
                Some(row * self.p + col)
            }
            (Scheme::ColsTimesRows, Position::Term(m)) if m < self.m => Some(m),
            _ => None,
        }
    }

    /// Whether two distinct sub-products overlap in C (only cxr terms do).
    pub fn overlapping(&self) -> bool {
        self.scheme == Scheme::ColsTimesRows
    }
}

/// Factor blocks of A and of B.
pub type FactorBlocks<T> = (Vec<RealMatrix<T>>, Vec<RealMatrix<T>>);

/// Cut A and B into the partition's factor blocks.
pub fn split<T: Real>(a: &RealMatrix<T>, b: &RealMatrix<T>, part: &BlockPartition) -> Result<FactorBlocks<T>, TensorError> {
    if a.shape() != part.a_shape() {
        return Err(TensorError::ShapeMismatch { expected: part.a_shape(), found: a.shape() });
    }
    if b.shape() != part.b_shape() {
        return Err(TensorError::ShapeMismatch { expected: part.b_shape(), found: b.shape() });
    }
    let (u, h, q) = (part.u, part.h, part.q);
    Ok(match part.scheme {
        Scheme::RowsTimesCols => (
            (0..part.n).map(|n| a.block(n * u, 0, u, h)).collect(),
            (0..part.p).map(|p| b.block(0, p * q, h, q)).collect(),
        ),
        Scheme::ColsTimesRows => (
            (0..part.m).map(|m| a.block(0, m * h, u, h)).collect(),
            (0..part.m).map(|m| b.block(m * h, 0, h, q)).collect(),
        ),
    })
}

/// All sub-products `A_{a(j)} · B_{b(j)}` in index order.
pub fn multiply_all<T: Real>(
    a_blocks: &[RealMatrix<T>],
    b_blocks: &[RealMatrix<T>],
    part: &BlockPartition,
) -> Result<Vec<RealMatrix<T>>, TensorError> {
    if a_blocks.len() != part.a_block_count() || b_blocks.len() != part.b_block_count() {
        return Err(TensorError::InvalidPartition(format!(
            "expected {} A-blocks and {} B-blocks, got {} and {}",
            part.a_block_count(),
            part.b_block_count(),
            a_blocks.len(),
            b_blocks.len()
        )));
    }
    (0..part.sub_product_count())
        .map(|j| {
            let (ia, ib) = part.factors(j);
            a_blocks[ia].matmul(&b_blocks[ib])
        })
        .collect()
}

/// Build Ĉ from whichever sub-products are available. rxc tiles go to their
/// grid slot; cxr terms are summed. Anything missing contributes zero.
pub fn assemble<'a, T: Real>(
    blocks: impl IntoIterator<Item = (Position, &'a RealMatrix<T>)>,
    part: &BlockPartition,
) -> Result<RealMatrix<T>, TensorError> {
    let (rows, cols) = part.c_shape();
    let mut out = RealMatrix::zeros(rows, cols);
    let mut seen = vec![false; part.sub_product_count()];
    for (pos, block) in blocks {
        let j = part.index_of(pos).ok_or(TensorError::PositionOutOfRange(pos))?;
        if std::mem::replace(&mut seen[j], true) {
            return Err(TensorError::DuplicatePosition(pos));
        }
        if block.shape() != part.sub_product_shape() {
            return Err(TensorError::ShapeMismatch {
                expected: part.sub_product_shape(),
                found: block.shape(),
            });
        }
        match pos {
            Position::Grid { row, col } => out.set_block(row * part.u, col * part.q, block),
            Position::Term(_) => out.add_assign(block)?,
        }
    }
    Ok(out)
}
