use super::{Field, FieldElem, GaloisError};

/// Dense row-major matrix over a finite field.
///
/// The matrix does not own its field; every algebraic operation goes through
/// a [`Field`] passed by reference.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<FieldElem>,
}

impl FieldMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        FieldMatrix { rows, cols, data: vec![FieldElem::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, FieldElem::ONE);
        }
        m
    }

    /// Empty matrix with a fixed column count, to be filled with [`push_row`].
    ///
    /// [`push_row`]: FieldMatrix::push_row
    pub fn with_cols(cols: usize) -> Self {
        Self::zeros(0, cols)
    }

    pub fn from_rows<I, R>(cols: usize, rows: I) -> Result<Self, GaloisError>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[FieldElem]>,
    {
        let mut m = Self::with_cols(cols);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    /// Convenience for tests and literals: rows of raw integers.
    pub fn from_u32_rows(rows: &[&[u32]]) -> Result<Self, GaloisError> {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_rows(
            cols,
            rows.iter().map(|r| r.iter().copied().map(FieldElem).collect::<Vec<_>>()),
        )
    }

    pub fn push_row(&mut self, row: &[FieldElem]) -> Result<(), GaloisError> {
        if row.len() != self.cols {
            return Err(GaloisError::DimensionMismatch { expected: self.cols, found: row.len() });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> FieldElem {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: FieldElem) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[FieldElem] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Indices of nonzero entries in row `r`.
    pub fn row_support(&self, r: usize) -> Vec<usize> {
        self.row(r).iter().enumerate().filter(|(_, v)| !v.is_zero()).map(|(c, _)| c).collect()
    }
}

/// Reduced row echelon form of a matrix: nonzero rows only, each with a
/// leading one whose column is zero in every other row.
#[derive(Clone, Debug)]
pub struct Echelon {
    cols: usize,
    rows: Vec<Vec<FieldElem>>,
    pivots: Vec<usize>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn rows(&self) -> &[Vec<FieldElem>] {
        &self.rows
    }

    /// `e_j` lies in the row space iff column `j` is a pivot and its pivot
    /// row has no other nonzero entry.
    pub fn contains_unit(&self, j: usize) -> bool {
        self.pivots
            .iter()
            .position(|&c| c == j)
            .is_some_and(|r| self.rows[r].iter().enumerate().all(|(c, v)| c == j || v.is_zero()))
    }

    /// Reduce `v` against the basis; the vector is in the row space iff the
    /// remainder is zero.
    pub fn contains(&self, field: &Field, v: &[FieldElem]) -> Result<bool, GaloisError> {
        if v.len() != self.cols {
            return Err(GaloisError::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        let mut rem = v.to_vec();
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            let f = rem[pc];
            if f.is_zero() {
                continue;
            }
            for (x, &y) in rem.iter_mut().zip(row) {
                *x = field.sub(*x, field.mul(f, y));
            }
        }
        Ok(rem.iter().all(|x| x.is_zero()))
    }
}

impl Field {
    /// Gauss-Jordan elimination to reduced row echelon form.
    pub fn echelon(&self, m: &FieldMatrix) -> Echelon {
        let cols = m.cols();
        let mut rows: Vec<Vec<FieldElem>> = (0..m.rows()).map(|r| m.row(r).to_vec()).collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for c in 0..cols {
            if rank == rows.len() {
                break;
            }
            let Some(p) = (rank..rows.len()).find(|&r| !rows[r][c].is_zero()) else {
                continue;
            };
            rows.swap(rank, p);
            let inv = self.inv(rows[rank][c]).expect("pivot is nonzero");
            for x in rows[rank].iter_mut() {
                *x = self.mul(*x, inv);
            }
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r == rank {
                    continue;
                }
                let f = row[c];
                if f.is_zero() {
                    continue;
                }
                for (x, &y) in row.iter_mut().zip(&pivot_row).skip(c) {
                    *x = self.sub(*x, self.mul(f, y));
                }
            }
            pivots.push(c);
            rank += 1;
        }
        rows.truncate(rank);
        Echelon { cols, rows, pivots }
    }

    /// Row rank by exact elimination.
    pub fn rank(&self, m: &FieldMatrix) -> usize {
        self.echelon(m).rank()
    }

    /// Whether `v` is a linear combination of the rows of `m`.
    pub fn in_rowspace(&self, m: &FieldMatrix, v: &[FieldElem]) -> Result<bool, GaloisError> {
        if v.len() != m.cols() {
            return Err(GaloisError::DimensionMismatch { expected: m.cols(), found: v.len() });
        }
        self.echelon(m).contains(self, v)
    }
}
