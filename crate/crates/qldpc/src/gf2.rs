//! Dense bit-packed linear algebra over GF(2).
//!
//! Parity-check matrices, logical operators and error vectors are all small
//! enough at the scales we target (up to ~10^4 columns) that a dense
//! 64-bit-packed representation beats sparse bookkeeping for everything
//! except the BP message loop, which keeps its own adjacency lists.

use std::fmt;
use thiserror::Error;

const WORD_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Gf2Error {
    #[error("{op}: incompatible shapes {lhs_rows}x{lhs_cols} and {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("shift matrix size must be at least 1")]
    ZeroShiftSize,
}

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

/// Bit-packed vector over GF(2). Bits beyond `len` in the last word are zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinVector {
    len: usize,
    words: Vec<u64>,
}

impl BinVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Unit vector with a single one at `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(index, true);
        v
    }

    pub fn from_support(len: usize, support: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in support {
            v.set(i, true);
        }
        v
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut v = Self::zeros(bits.len());
        for (i, b) in bits.iter().enumerate() {
            if *b {
                v.set(i, true);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, index: usize) -> bool {
        assert!(
            index < self.len,
            "bit index {index} out of range {}",
            self.len
        );
        self.words[index / WORD_BITS] >> (index % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, index: usize, value: bool) {
        assert!(
            index < self.len,
            "bit index {index} out of range {}",
            self.len
        );
        let word = &mut self.words[index / WORD_BITS];
        let mask = 1u64 << (index % WORD_BITS);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    #[inline]
    pub fn toggle(&mut self, index: usize) {
        assert!(
            index < self.len,
            "bit index {index} out of range {}",
            self.len
        );
        self.words[index / WORD_BITS] ^= 1u64 << (index % WORD_BITS);
    }

    pub fn xor_assign(&mut self, other: &BinVector) {
        assert_eq!(self.len, other.len, "xor of vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BinVector) -> BinVector {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of the set bits, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.ones().collect()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + bit)
                }
            })
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }
}

impl fmt::Display for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            write!(f, "{}", u8::from(self.get(i)))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinVector[{}]({self})", self.len)
    }
}

impl std::ops::BitXorAssign<&BinVector> for BinVector {
    fn bitxor_assign(&mut self, rhs: &BinVector) {
        self.xor_assign(rhs);
    }
}

impl std::ops::BitXor for &BinVector {
    type Output = BinVector;

    fn bitxor(self, rhs: Self) -> BinVector {
        self.xor(rhs)
    }
}

/// Bit-packed row-major matrix over GF(2).
///
/// Rows are stored in `stride` words each; padding bits past `cols` are kept
/// zero so whole-word row operations need no masking. 0xN and Nx0 matrices
/// are legal and follow the usual conventions (rank 0, full kernel).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BinMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            words: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Cyclic shift permutation: one at (i, (i+1) mod l) for each row i.
    pub fn shift_matrix(l: usize) -> Result<Self, Gf2Error> {
        if l == 0 {
            return Err(Gf2Error::ZeroShiftSize);
        }
        let mut m = Self::zeros(l, l);
        for i in 0..l {
            m.set(i, (i + 1) % l, true);
        }
        Ok(m)
    }

    pub fn from_fn<F: FnMut(usize, usize) -> bool>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                if f(i, j) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    pub fn from_rows(cols: usize, rows: &[BinVector]) -> Self {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "row {i} has wrong length");
            m.words[i * m.stride..(i + 1) * m.stride].copy_from_slice(&r.words);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        assert!(
            row < self.rows && col < self.cols,
            "index ({row},{col}) out of range"
        );
        self.words[row * self.stride + col / WORD_BITS] >> (col % WORD_BITS) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        assert!(
            row < self.rows && col < self.cols,
            "index ({row},{col}) out of range"
        );
        let word = &mut self.words[row * self.stride + col / WORD_BITS];
        let mask = 1u64 << (col % WORD_BITS);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.stride..(row + 1) * self.stride]
    }

    pub fn row(&self, row: usize) -> BinVector {
        BinVector {
            len: self.cols,
            words: self.row_words(row).to_vec(),
        }
    }

    pub fn set_row(&mut self, row: usize, v: &BinVector) {
        assert_eq!(v.len(), self.cols);
        self.words[row * self.stride..(row + 1) * self.stride].copy_from_slice(&v.words);
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        let (a, b) = (src * self.stride, dst * self.stride);
        for k in 0..self.stride {
            let w = self.words[a + k];
            self.words[b + k] ^= w;
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for k in 0..self.stride {
            self.words.swap(a * self.stride + k, b * self.stride + k);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn transpose(&self) -> BinMatrix {
        let mut t = BinMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in self.row_ones(i) {
                t.set(j, i, true);
            }
        }
        t
    }

    /// Set-bit column indices of a row, ascending.
    pub fn row_ones(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        let words = self.row_words(row);
        words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + bit)
                }
            })
        })
    }

    /// Horizontal concatenation [self | other].
    pub fn hstack(&self, other: &BinMatrix) -> Result<BinMatrix, Gf2Error> {
        if self.rows != other.rows {
            return Err(self.shape_err("hstack", other));
        }
        let mut m = BinMatrix::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in self.row_ones(i) {
                m.set(i, j, true);
            }
            for j in other.row_ones(i) {
                m.set(i, self.cols + j, true);
            }
        }
        Ok(m)
    }

    /// Vertical concatenation [self; other].
    pub fn vstack(&self, other: &BinMatrix) -> Result<BinMatrix, Gf2Error> {
        if self.cols != other.cols {
            return Err(self.shape_err("vstack", other));
        }
        let mut m = BinMatrix::zeros(self.rows + other.rows, self.cols);
        m.words[..self.words.len()].copy_from_slice(&self.words);
        m.words[self.words.len()..].copy_from_slice(&other.words);
        Ok(m)
    }

    /// New matrix whose column j is `self` column `perm[j]`.
    pub fn permute_cols(&self, perm: &[usize]) -> BinMatrix {
        assert_eq!(perm.len(), self.cols, "permutation length mismatch");
        let mut m = BinMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, &p) in perm.iter().enumerate() {
                if self.get(i, p) {
                    m.set(i, j, true);
                }
            }
        }
        m
    }

    fn shape_err(&self, op: &'static str, other: &BinMatrix) -> Gf2Error {
        Gf2Error::ShapeMismatch {
            op,
            lhs_rows: self.rows,
            lhs_cols: self.cols,
            rhs_rows: other.rows,
            rhs_cols: other.cols,
        }
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, other: &BinMatrix) -> Result<BinMatrix, Gf2Error> {
        if self.cols != other.rows {
            return Err(self.shape_err("mul", other));
        }
        let mut m = BinMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = i * m.stride;
            for k in self.row_ones(i) {
                let src = k * other.stride;
                for w in 0..other.stride {
                    m.words[dst + w] ^= other.words[src + w];
                }
            }
        }
        Ok(m)
    }

    /// Matrix-vector product over GF(2).
    pub fn mul_vec(&self, v: &BinVector) -> Result<BinVector, Gf2Error> {
        if self.cols != v.len {
            return Err(Gf2Error::ShapeMismatch {
                op: "mul_vec",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: v.len,
                rhs_cols: 1,
            });
        }
        let mut out = BinVector::zeros(self.rows);
        for i in 0..self.rows {
            let mut acc = 0u64;
            for (w, vw) in self.row_words(i).iter().zip(&v.words) {
                acc ^= w & vw;
            }
            if acc.count_ones() & 1 == 1 {
                out.set(i, true);
            }
        }
        Ok(out)
    }

    /// Kronecker product; shape (self.rows * other.rows) x (self.cols * other.cols).
    pub fn kron(&self, other: &BinMatrix) -> BinMatrix {
        let mut m = BinMatrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i1 in 0..self.rows {
            for j1 in self.row_ones(i1) {
                for i2 in 0..other.rows {
                    for j2 in other.row_ones(i2) {
                        m.set(i1 * other.rows + i2, j1 * other.cols + j2, true);
                    }
                }
            }
        }
        m
    }

    /// Reduced row echelon form with the ordered pivot-column record.
    ///
    /// Pivoting picks the first nonzero column left to right; the pivot order
    /// is what OSD uses to map column reliabilities back to solved bits.
    pub fn echelon(&self) -> Echelon {
        let mut m = self.clone();
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for col in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pivot) = (r..m.rows).find(|&i| m.get(i, col)) else {
                continue;
            };
            m.swap_rows(r, pivot);
            for i in 0..m.rows {
                if i != r && m.get(i, col) {
                    m.xor_row_into(r, i);
                }
            }
            pivot_cols.push(col);
            r += 1;
        }
        Echelon {
            reduced: m,
            pivot_cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.echelon().rank()
    }

    /// Solve A x = s. The solution sets all free variables to zero; the
    /// ordered pivot columns of the elimination are reported either way.
    /// Inconsistency is a value (`solution: None`), not an error.
    pub fn solve(&self, s: &BinVector) -> Result<SolveOutcome, Gf2Error> {
        if self.rows != s.len {
            return Err(Gf2Error::ShapeMismatch {
                op: "solve",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: s.len,
                rhs_cols: 1,
            });
        }
        let mut m = self.clone();
        let mut rhs = s.clone();
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for col in 0..m.cols {
            if r == m.rows {
                break;
            }
            let Some(pivot) = (r..m.rows).find(|&i| m.get(i, col)) else {
                continue;
            };
            m.swap_rows(r, pivot);
            let (br, bp) = (rhs.get(r), rhs.get(pivot));
            rhs.set(r, bp);
            rhs.set(pivot, br);
            for i in 0..m.rows {
                if i != r && m.get(i, col) {
                    m.xor_row_into(r, i);
                    if rhs.get(r) {
                        rhs.toggle(i);
                    }
                }
            }
            pivot_cols.push(col);
            r += 1;
        }
        // Rows with an empty coefficient part but a set right-hand side
        // witness inconsistency.
        for i in r..m.rows {
            if rhs.get(i) {
                return Ok(SolveOutcome {
                    solution: None,
                    pivot_cols,
                });
            }
        }
        let mut x = BinVector::zeros(self.cols);
        for (row, &col) in pivot_cols.iter().enumerate() {
            if rhs.get(row) {
                x.set(col, true);
            }
        }
        Ok(SolveOutcome {
            solution: Some(x),
            pivot_cols,
        })
    }

    /// Basis of the right kernel {v : Av = 0}, one row per free column.
    /// Row count is always cols - rank.
    pub fn kernel_basis(&self) -> BinMatrix {
        let ech = self.echelon();
        let pivot_set: std::collections::HashSet<usize> = ech.pivot_cols.iter().copied().collect();
        let free_cols: Vec<usize> = (0..self.cols).filter(|c| !pivot_set.contains(c)).collect();
        let mut basis = BinMatrix::zeros(free_cols.len(), self.cols);
        for (bi, &f) in free_cols.iter().enumerate() {
            basis.set(bi, f, true);
            for (row, &col) in ech.pivot_cols.iter().enumerate() {
                if ech.reduced.get(row, f) {
                    basis.set(bi, col, true);
                }
            }
        }
        basis
    }

    /// Entrywise XOR (GF(2) matrix sum).
    pub fn xor_assign(&mut self, other: &BinMatrix) {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "xor of matrices with different shapes"
        );
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Whether v is a GF(2) combination of the rows of self.
    pub fn in_rowspace(&self, v: &BinVector) -> Result<bool, Gf2Error> {
        if self.cols != v.len {
            return Err(Gf2Error::ShapeMismatch {
                op: "in_rowspace",
                lhs_rows: self.rows,
                lhs_cols: self.cols,
                rhs_rows: 1,
                rhs_cols: v.len,
            });
        }
        Ok(self.echelon().reduce_vector(v).is_zero())
    }
}

impl fmt::Display for BinMatrix {
    /// 0/1 grid, one row per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                write!(f, "{}", u8::from(self.get(i, j)))?;
            }
            if i + 1 < self.rows {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinMatrix({}x{})", self.rows, self.cols)
    }
}

/// Result of [`BinMatrix::solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolveOutcome {
    pub solution: Option<BinVector>,
    pub pivot_cols: Vec<usize>,
}

/// Reduced row echelon form of a matrix, reusable for repeated
/// rowspace-membership reductions.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub reduced: BinMatrix,
    pub pivot_cols: Vec<usize>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    /// Reduce v modulo the row space; the result is zero iff v is in it.
    pub fn reduce_vector(&self, v: &BinVector) -> BinVector {
        assert_eq!(v.len(), self.reduced.cols);
        let mut out = v.clone();
        for (row, &col) in self.pivot_cols.iter().enumerate() {
            if out.get(col) {
                for (w, rw) in out.words.iter_mut().zip(self.reduced.row_words(row)) {
                    *w ^= rw;
                }
            }
        }
        out
    }
}
