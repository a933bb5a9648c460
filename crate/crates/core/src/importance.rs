//! Importance levels of factor blocks and the product classes they induce.
//!
//! Levels and classes are 0-based here (level 0 is the most important).
//! Output metric names shift to 1-based (`decode_prob_class_1`, ...).

use serde::{Deserialize, Serialize};

use crate::tensor::{BlockPartition, RealMatrix};
use crate::Real;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImportanceError {
    #[error("level sizes sum to {found}, expected {expected} blocks")]
    SizeMismatch { expected: usize, found: usize },
    #[error("block {block} has level {level}, but only {levels} levels exist")]
    LevelOutOfRange { block: usize, level: usize, levels: usize },
    #[error("class table has no entry for level pair ({a}, {b})")]
    MissingEntry { a: usize, b: usize },
    #[error("class {0} has no members")]
    EmptyClass(usize),
    #[error("class table must be square with {levels} rows, found a {rows}x{cols} table")]
    TableShape { levels: usize, rows: usize, cols: usize },
    #[error("partition has {expected} {side}-blocks, level assignment has {found}")]
    BlockCount { side: &'static str, expected: usize, found: usize },
}

/// Per-block importance levels on both factor sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAssignment {
    pub a_levels: Vec<usize>,
    pub b_levels: Vec<usize>,
    pub levels: usize,
}

impl LevelAssignment {
    pub fn new(a_levels: Vec<usize>, b_levels: Vec<usize>, levels: usize) -> Result<Self, ImportanceError> {
        for (block, &level) in a_levels.iter().chain(&b_levels).enumerate() {
            if level >= levels {
                return Err(ImportanceError::LevelOutOfRange { block, level, levels });
            }
        }
        Ok(LevelAssignment { a_levels, b_levels, levels })
    }

    /// Rank both sides by block norm.
    pub fn classify<T: Real>(
        a_blocks: &[RealMatrix<T>],
        b_blocks: &[RealMatrix<T>],
        a_sizes: &[usize],
        b_sizes: &[usize],
    ) -> Result<Self, ImportanceError> {
        let levels = a_sizes.len().max(b_sizes.len());
        Ok(LevelAssignment {
            a_levels: classify_by_norm(a_blocks, a_sizes)?,
            b_levels: classify_by_norm(b_blocks, b_sizes)?,
            levels,
        })
    }

    /// Blocks per level on the A side.
    pub fn a_counts(&self) -> Vec<usize> {
        counts(&self.a_levels, self.levels)
    }

    pub fn b_counts(&self) -> Vec<usize> {
        counts(&self.b_levels, self.levels)
    }
}

fn counts(levels: &[usize], s: usize) -> Vec<usize> {
    let mut out = vec![0; s];
    for &l in levels {
        out[l] += 1;
    }
    out
}

/// Sort blocks by descending Frobenius norm (ties: lower index first) and
/// hand out levels in runs of `sizes[0]`, `sizes[1]`, ... Returns the level
/// of each block in input order.
pub fn classify_by_norm<T: Real>(blocks: &[RealMatrix<T>], sizes: &[usize]) -> Result<Vec<usize>, ImportanceError> {
    let total: usize = sizes.iter().sum();
    if total != blocks.len() {
        return Err(ImportanceError::SizeMismatch { expected: blocks.len(), found: total });
    }
    let norms: Vec<T> = blocks.iter().map(RealMatrix::frobenius_sq).collect();
    let order = descending_order(&norms);
    let mut levels = vec![0; blocks.len()];
    let mut rank = order.into_iter();
    for (level, &size) in sizes.iter().enumerate() {
        for idx in rank.by_ref().take(size) {
            levels[idx] = level;
        }
    }
    Ok(levels)
}

/// Indices sorted by descending key, stable.
fn descending_order<T: Real>(keys: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&i, &j| keys[j].partial_cmp(&keys[i]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Explicit `(level_A, level_B) → class` map. `None` marks pairs that must
/// not occur.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassTable {
    entries: Vec<Vec<Option<usize>>>,
}

impl ClassTable {
    pub fn new(entries: Vec<Vec<Option<usize>>>) -> Result<Self, ImportanceError> {
        let levels = entries.len();
        for row in &entries {
            if row.len() != levels {
                return Err(ImportanceError::TableShape { levels, rows: levels, cols: row.len() });
            }
        }
        Ok(ClassTable { entries })
    }

    /// Three-tier r×c grouping: (hi,hi), (hi,med), (med,hi) form class 0;
    /// (med,med), (hi,lo), (lo,hi) class 1; the rest class 2.
    pub fn three_tier_rxc() -> Self {
        let e = |r: [usize; 3]| r.iter().map(|&c| Some(c)).collect();
        ClassTable { entries: vec![e([0, 0, 1]), e([0, 1, 2]), e([1, 2, 2])] }
    }

    /// Class `s` for the aligned pair `(s, s)`; off-diagonal pairs are absent.
    pub fn diagonal(levels: usize) -> Self {
        ClassTable {
            entries: (0..levels)
                .map(|r| (0..levels).map(|c| (r == c).then_some(r)).collect())
                .collect(),
        }
    }

    /// Everything in one class.
    pub fn single(levels: usize) -> Self {
        ClassTable { entries: vec![vec![Some(0); levels]; levels] }
    }

    pub fn levels(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, a: usize, b: usize) -> Option<usize> {
        self.entries.get(a).and_then(|r| r.get(b)).copied().flatten()
    }
}

/// Class of every sub-product (indexed as in [`BlockPartition`]) and the
/// class sizes `k_l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ClassMap {
    class_of: Vec<usize>,
    sizes: Vec<usize>,
}

impl TryFrom<Vec<usize>> for ClassMap {
    type Error = ImportanceError;

    fn try_from(class_of: Vec<usize>) -> Result<Self, Self::Error> {
        ClassMap::from_classes(class_of)
    }
}

impl From<ClassMap> for Vec<usize> {
    fn from(c: ClassMap) -> Self {
        c.class_of
    }
}

impl ClassMap {
    /// Classes must be numbered `0..L` with none empty.
    pub fn from_classes(class_of: Vec<usize>) -> Result<Self, ImportanceError> {
        let n = class_of.iter().max().map_or(0, |&m| m + 1);
        let sizes = counts(&class_of, n);
        if let Some(empty) = sizes.iter().position(|&k| k == 0) {
            return Err(ImportanceError::EmptyClass(empty));
        }
        Ok(ClassMap { class_of, sizes })
    }

    /// Consecutive runs: the first `k[0]` sub-products form class 0, etc.
    pub fn contiguous(k: &[usize]) -> Result<Self, ImportanceError> {
        Self::from_classes(k.iter().enumerate().flat_map(|(l, &n)| std::iter::repeat_n(l, n)).collect())
    }

    pub fn class_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_count(&self) -> usize {
        self.class_of.len()
    }

    pub fn class_of(&self, j: usize) -> usize {
        self.class_of[j]
    }

    pub fn classes(&self) -> &[usize] {
        &self.class_of
    }

    /// `k_l` for every class.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Sub-product indices in class `l`, ascending.
    pub fn members(&self, l: usize) -> Vec<usize> {
        (0..self.class_of.len()).filter(|&j| self.class_of[j] == l).collect()
    }
}

/// Class of every sub-product: `table(level_A(a(j)), level_B(b(j)))`.
pub fn product_classes(
    la: &LevelAssignment,
    part: &BlockPartition,
    table: &ClassTable,
) -> Result<ClassMap, ImportanceError> {
    if la.a_levels.len() != part.a_block_count() {
        return Err(ImportanceError::BlockCount {
            side: "A",
            expected: part.a_block_count(),
            found: la.a_levels.len(),
        });
    }
    if la.b_levels.len() != part.b_block_count() {
        return Err(ImportanceError::BlockCount {
            side: "B",
            expected: part.b_block_count(),
            found: la.b_levels.len(),
        });
    }
    let class_of = (0..part.sub_product_count())
        .map(|j| {
            let (ia, ib) = part.factors(j);
            let (a, b) = (la.a_levels[ia], la.b_levels[ib]);
            table.get(a, b).ok_or(ImportanceError::MissingEntry { a, b })
        })
        .collect::<Result<Vec<_>, _>>()?;
    ClassMap::from_classes(class_of)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Rows,
    Cols,
}

/// `order[i]` is the original index now sitting at position `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    pub order: Vec<usize>,
    pub axis: Axis,
}

impl Permutation {
    pub fn is_identity(&self) -> bool {
        self.order.iter().enumerate().all(|(i, &o)| i == o)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.order.len()];
        for (i, &o) in self.order.iter().enumerate() {
            inv[o] = i;
        }
        Permutation { order: inv, axis: self.axis }
    }

    /// Reorder `m` along this permutation's axis.
    pub fn apply<T: Real>(&self, m: &RealMatrix<T>) -> RealMatrix<T> {
        match self.axis {
            Axis::Rows => RealMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(self.order[r], c)),
            Axis::Cols => RealMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, self.order[c])),
        }
    }

    /// Undo [`Permutation::apply`].
    pub fn unapply<T: Real>(&self, m: &RealMatrix<T>) -> RealMatrix<T> {
        self.inverse().apply(m)
    }
}

/// Reorder rows (or columns) by descending Euclidean norm, stable on ties.
pub fn permute_descending<T: Real>(m: &RealMatrix<T>, axis: Axis) -> (RealMatrix<T>, Permutation) {
    let norms: Vec<T> = match axis {
        Axis::Rows => (0..m.rows()).map(|r| m.row(r).iter().map(|&x| x * x).sum()).collect(),
        Axis::Cols => (0..m.cols()).map(|c| (0..m.rows()).map(|r| m.get(r, c).powi(2)).sum()).collect(),
    };
    let perm = Permutation { order: descending_order(&norms), axis };
    (perm.apply(m), perm)
}
