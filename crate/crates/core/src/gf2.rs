//! Dense linear algebra over the binary field.
//!
//! Matrices are small (at most 64 columns) and stored one machine word per
//! row. Column `c` of a row lives at bit `cols - 1 - c`, so the row word read
//! as an integer is the row's bit string with column 0 as the most significant
//! bit. The same convention is used for [`BinVector`], which makes a joint
//! message index and its bit vector the same integer.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest supported column count (one `u64` per row).
pub const MAX_COLS: usize = 64;

/// Default cap on `rows * cols` for exhaustive enumeration.
pub const DEFAULT_ENUM_BUDGET: u32 = 32;

#[inline]
fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[inline]
fn parity(x: u64) -> u64 {
    (x.count_ones() & 1) as u64
}

/// A bit vector of length 1..=64, most significant bit first.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinVector {
    len: usize,
    bits: u64,
}

impl BinVector {
    pub fn zeros(len: usize) -> Result<Self> {
        Self::from_word(len, 0)
    }

    /// Builds a vector from the low `len` bits of `word`; entry 0 is bit `len - 1`.
    pub fn from_word(len: usize, word: u64) -> Result<Self> {
        if len == 0 || len > MAX_COLS {
            return Err(Error::Shape {
                rows: len,
                cols: 1,
                reason: "vector length must be in 1..=64",
            });
        }
        Ok(Self {
            len,
            bits: word & low_mask(len),
        })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut word = 0u64;
        for &b in bits {
            if b > 1 {
                return Err(Error::InvalidArgument(format!("bit value {b} is not 0 or 1")));
            }
            word = (word << 1) | b as u64;
        }
        Self::from_word(bits.len(), word)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn word(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, i: usize) -> u8 {
        assert!(i < self.len, "index {i} out of range for length {}", self.len);
        ((self.bits >> (self.len - 1 - i)) & 1) as u8
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Bitwise sum (XOR) of two equal-length vectors.
    pub fn xor(&self, other: &BinVector) -> Result<BinVector> {
        if self.len != other.len {
            return Err(Error::DimensionMismatch {
                left_rows: self.len,
                left_cols: 1,
                right_rows: other.len,
                right_cols: 1,
            });
        }
        Ok(BinVector {
            len: self.len,
            bits: self.bits ^ other.bits,
        })
    }
}

impl fmt::Debug for BinVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.len {
            write!(f, "{}", self.get(i))?;
        }
        write!(f, "]")
    }
}

/// Dense binary matrix with `rows >= 1` and `1 <= cols <= 64`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl BinMatrix {
    fn check_shape(rows: usize, cols: usize) -> Result<()> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape {
                rows,
                cols,
                reason: "rows and cols must be at least 1",
            });
        }
        if cols > MAX_COLS {
            return Err(Error::Shape {
                rows,
                cols,
                reason: "at most 64 columns are supported",
            });
        }
        Ok(())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::check_shape(rows, cols)?;
        Ok(Self {
            rows,
            cols,
            data: vec![0; rows],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::check_shape(n, n)?;
        let data = (0..n).map(|i| 1u64 << (n - 1 - i)).collect();
        Ok(Self {
            rows: n,
            cols: n,
            data,
        })
    }

    /// Builds a matrix from row words; bits above `cols` are rejected.
    pub fn from_row_words(rows: usize, cols: usize, data: Vec<u64>) -> Result<Self> {
        Self::check_shape(rows, cols)?;
        if data.len() != rows {
            return Err(Error::Shape {
                rows: data.len(),
                cols,
                reason: "row word count does not match the row count",
            });
        }
        if data.iter().any(|w| w & !low_mask(cols) != 0) {
            return Err(Error::InvalidArgument(format!(
                "row word has bits beyond column {cols}"
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        Self::check_shape(rows.len(), cols)?;
        let mut data = Vec::with_capacity(rows.len());
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Shape {
                    rows: rows.len(),
                    cols: row.len(),
                    reason: "ragged rows",
                });
            }
            data.push(BinVector::from_bits(row)?.word());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// Decodes the row-major integer form used by [`enumerate_matrices`].
    pub fn from_integer(rows: usize, cols: usize, value: u64) -> Result<Self> {
        Self::check_shape(rows, cols)?;
        if rows * cols > 64 {
            return Err(Error::Shape {
                rows,
                cols,
                reason: "integer form limited to 64 bits",
            });
        }
        let mask = low_mask(cols);
        let data = (0..rows)
            .map(|i| (value >> (cols * (rows - 1 - i))) & mask)
            .collect();
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row_word(&self, i: usize) -> u64 {
        self.data[i]
    }

    pub fn row_words(&self) -> &[u64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of range");
        ((self.data[i] >> (self.cols - 1 - j)) & 1) as u8
    }

    pub fn set(&mut self, i: usize, j: usize, bit: u8) {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of range");
        let pos = self.cols - 1 - j;
        self.data[i] = (self.data[i] & !(1 << pos)) | (((bit & 1) as u64) << pos);
    }

    /// Row-major bit string as an integer (entry (0,0) most significant).
    pub fn to_integer(&self) -> Option<u64> {
        if self.rows * self.cols > 64 {
            return None;
        }
        Some(
            self.data
                .iter()
                .fold(0u64, |acc, &w| if self.cols == 64 { w } else { (acc << self.cols) | w }),
        )
    }

    /// Applies the matrix to a vector given as a word; the result packs row 0
    /// into the most significant of `rows` bits. No shape checks.
    #[inline]
    pub fn apply(&self, x: u64) -> u64 {
        self.data
            .iter()
            .fold(0u64, |acc, &row| (acc << 1) | parity(row & x))
    }

    pub fn mul_vec(&self, v: &BinVector) -> Result<BinVector> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: v.len(),
                right_cols: 1,
            });
        }
        if self.rows > MAX_COLS {
            return Err(Error::Shape {
                rows: self.rows,
                cols: 1,
                reason: "product vector longer than 64 bits",
            });
        }
        BinVector::from_word(self.rows, self.apply(v.word()))
    }

    pub fn mul(&self, other: &BinMatrix) -> Result<BinMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                left_rows: self.rows,
                left_cols: self.cols,
                right_rows: other.rows,
                right_cols: other.cols,
            });
        }
        // Row i of the product is the XOR of the rows of `other` selected by row i of self.
        let data = self
            .data
            .iter()
            .map(|&row| {
                (0..self.cols)
                    .filter(|&k| (row >> (self.cols - 1 - k)) & 1 == 1)
                    .fold(0u64, |acc, k| acc ^ other.data[k])
            })
            .collect();
        Ok(BinMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn transpose(&self) -> Result<BinMatrix> {
        let mut t = BinMatrix::zeros(self.cols, self.rows)?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        Ok(t)
    }

    /// Row rank by elimination on packed words.
    pub fn rank(&self) -> usize {
        // Keep a basis indexed by leading bit.
        let mut basis = [0u64; 64];
        let mut rank = 0;
        for &row in &self.data {
            let mut x = row;
            while x != 0 {
                let lead = 63 - x.leading_zeros() as usize;
                if basis[lead] == 0 {
                    basis[lead] = x;
                    rank += 1;
                    break;
                }
                x ^= basis[lead];
            }
        }
        rank
    }

    pub fn is_full_row_rank(&self) -> bool {
        self.rank() == self.rows
    }

    /// Inverse over GF(2). `Ok(None)` flags a singular matrix.
    pub fn try_invert(&self) -> Result<Option<BinMatrix>> {
        if self.rows != self.cols {
            return Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut inv = BinMatrix::identity(n)?.data;
        for col in 0..n {
            let bit = 1u64 << (n - 1 - col);
            let Some(pivot) = (col..n).find(|&r| a[r] & bit != 0) else {
                return Ok(None);
            };
            a.swap(col, pivot);
            inv.swap(col, pivot);
            for r in 0..n {
                if r != col && a[r] & bit != 0 {
                    a[r] ^= a[col];
                    inv[r] ^= inv[col];
                }
            }
        }
        Ok(Some(BinMatrix {
            rows: n,
            cols: n,
            data: inv,
        }))
    }

    /// Reduced row echelon form with zero rows dropped: the canonical
    /// representative of the row space. `None` for the zero matrix.
    pub fn row_space_basis(&self) -> Option<BinMatrix> {
        let mut rows: Vec<u64> = Vec::new();
        for &row in &self.data {
            let mut x = row;
            for &b in &rows {
                let lead = 63 - b.leading_zeros();
                if x >> lead & 1 == 1 {
                    x ^= b;
                }
            }
            if x == 0 {
                continue;
            }
            let lead = 63 - x.leading_zeros();
            for b in rows.iter_mut() {
                if *b >> lead & 1 == 1 {
                    *b ^= x;
                }
            }
            rows.push(x);
        }
        if rows.is_empty() {
            return None;
        }
        rows.sort_unstable_by(|a, b| b.cmp(a));
        Some(BinMatrix {
            rows: rows.len(),
            cols: self.cols,
            data: rows,
        })
    }

    /// Basis of the null space `{x : A x = 0}` as words of `cols` bits.
    pub fn kernel_basis(&self) -> Vec<u64> {
        let Some(rref) = self.row_space_basis() else {
            return (0..self.cols).map(|j| 1u64 << (self.cols - 1 - j)).collect();
        };
        let pivots: Vec<usize> = rref
            .data
            .iter()
            .map(|&w| self.cols - 1 - (63 - w.leading_zeros() as usize))
            .collect();
        let mut basis = Vec::new();
        for free in (0..self.cols).filter(|c| !pivots.contains(c)) {
            let mut x = 1u64 << (self.cols - 1 - free);
            for (i, &p) in pivots.iter().enumerate() {
                if rref.get(i, free) == 1 {
                    x |= 1u64 << (self.cols - 1 - p);
                }
            }
            basis.push(x);
        }
        basis
    }

    /// Keeps only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<BinMatrix> {
        let mut out = BinMatrix::zeros(self.rows, cols.len())?;
        for i in 0..self.rows {
            for (k, &c) in cols.iter().enumerate() {
                out.set(i, k, self.get(i, c));
            }
        }
        Ok(out)
    }

    /// Compact text form `rows cols hex`, the hex being the row-major integer
    /// zero-padded to `ceil(rows*cols/4)` digits.
    pub fn to_text(&self) -> String {
        let nbits = self.rows * self.cols;
        let pad = nbits.div_ceil(4) * 4 - nbits;
        let bits: Vec<u8> = std::iter::repeat_n(0, pad)
            .chain((0..nbits).map(|k| self.get(k / self.cols, k % self.cols)))
            .collect();
        let hex: String = bits
            .chunks(4)
            .map(|nib| {
                let v = nib.iter().fold(0u32, |acc, &b| (acc << 1) | b as u32);
                char::from_digit(v, 16).expect("nibble")
            })
            .collect();
        format!("{} {} {}", self.rows, self.cols, hex)
    }
}

impl FromStr for BinMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let (Some(r), Some(c), Some(hex), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(Error::Parse(format!("expected `rows cols hex`, got `{s}`")));
        };
        let rows: usize = r.parse().map_err(|_| Error::Parse(format!("bad row count `{r}`")))?;
        let cols: usize = c.parse().map_err(|_| Error::Parse(format!("bad column count `{c}`")))?;
        let mut m = BinMatrix::zeros(rows, cols)?;
        let nbits = rows * cols;
        if hex.len() != nbits.div_ceil(4) {
            return Err(Error::Parse(format!(
                "expected {} hex digits for a {rows}x{cols} matrix, got {}",
                nbits.div_ceil(4),
                hex.len()
            )));
        }
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for ch in hex.chars() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit `{ch}`")))?;
            bits.extend((0..4).rev().map(|k| ((v >> k) & 1) as u8));
        }
        let pad = bits.len() - nbits;
        if bits[..pad].iter().any(|&b| b != 0) {
            return Err(Error::Parse("nonzero padding bits".into()));
        }
        for (k, &b) in bits[pad..].iter().enumerate() {
            m.set(k / cols, k % cols, b);
        }
        Ok(m)
    }
}

impl fmt::Debug for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinMatrix({}x{}; ", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "|")?;
            }
            for j in 0..self.cols {
                write!(f, "{}", self.get(i, j))?;
            }
        }
        write!(f, ")")
    }
}

impl fmt::Display for BinMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            for j in 0..self.cols {
                write!(f, "{}", self.get(i, j))?;
            }
            if i + 1 < self.rows {
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

/// Vertical concatenation preserving part order.
pub fn stack_rows(parts: &[BinMatrix]) -> Result<BinMatrix> {
    let first = parts.first().ok_or(Error::Shape {
        rows: 0,
        cols: 0,
        reason: "nothing to stack",
    })?;
    let mut data = Vec::new();
    for p in parts {
        if p.cols != first.cols {
            return Err(Error::DimensionMismatch {
                left_rows: first.rows,
                left_cols: first.cols,
                right_rows: p.rows,
                right_cols: p.cols,
            });
        }
        data.extend_from_slice(&p.data);
    }
    Ok(BinMatrix {
        rows: data.len(),
        cols: first.cols,
        data,
    })
}

/// Every `rows x cols` matrix in row-major integer order, over a sub-range
/// of that order.
#[derive(Clone, Debug)]
pub struct MatrixRange {
    rows: usize,
    cols: usize,
    range: Range<u64>,
}

impl MatrixRange {
    pub fn len(&self) -> u64 {
        self.range.end - self.range.start
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    /// Splits into `parts` contiguous ranges whose concatenation is `self`.
    pub fn split(&self, parts: usize) -> Vec<MatrixRange> {
        let parts = parts.max(1) as u64;
        let len = self.len();
        (0..parts)
            .map(|k| {
                let lo = self.range.start + len * k / parts;
                let hi = self.range.start + len * (k + 1) / parts;
                MatrixRange {
                    rows: self.rows,
                    cols: self.cols,
                    range: lo..hi,
                }
            })
            .filter(|r| !r.is_empty())
            .collect()
    }
}

impl Iterator for MatrixRange {
    type Item = BinMatrix;

    fn next(&mut self) -> Option<BinMatrix> {
        let v = self.range.next()?;
        Some(BinMatrix::from_integer(self.rows, self.cols, v).expect("shape validated"))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = usize::try_from(self.len()).unwrap_or(usize::MAX);
        (n, usize::try_from(self.len()).ok())
    }
}

/// Enumerates all `rows x cols` binary matrices, refusing shapes whose
/// `rows * cols` exceeds `budget_bits` (at most 63).
pub fn enumerate_matrices(rows: usize, cols: usize, budget_bits: u32) -> Result<MatrixRange> {
    BinMatrix::check_shape(rows, cols)?;
    let bits = (rows * cols) as u32;
    if bits > budget_bits.min(63) {
        return Err(Error::BudgetExceeded {
            bits,
            budget: budget_bits,
        });
    }
    Ok(MatrixRange {
        rows,
        cols,
        range: 0..(1u64 << bits),
    })
}

/// One canonical representative (reduced row echelon form) of every
/// `rows`-dimensional row space in `GF(2)^cols`, i.e. every full-row-rank
/// matrix up to left multiplication by an invertible matrix.
///
/// Order: pivot column sets lexicographically, then free entries counting up.
pub fn enumerate_row_spaces(rows: usize, cols: usize) -> Result<Vec<BinMatrix>> {
    BinMatrix::check_shape(rows, cols)?;
    if rows > cols {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut pivots: Vec<usize> = (0..rows).collect();
    loop {
        // Free positions: (row, col) with col > pivot[row] and col not a pivot.
        let free: Vec<(usize, usize)> = (0..rows)
            .flat_map(|i| {
                let pv = &pivots;
                ((pv[i] + 1)..cols)
                    .filter(move |c| !pv.contains(c))
                    .map(move |c| (i, c))
            })
            .collect();
        let base: Vec<u64> = pivots.iter().map(|&p| 1u64 << (cols - 1 - p)).collect();
        for assign in 0u64..(1u64 << free.len()) {
            let mut data = base.clone();
            for (k, &(i, c)) in free.iter().enumerate() {
                if (assign >> (free.len() - 1 - k)) & 1 == 1 {
                    data[i] |= 1u64 << (cols - 1 - c);
                }
            }
            out.push(BinMatrix { rows, cols, data });
        }
        // Next combination of pivot columns.
        let mut i = rows;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if pivots[i] < cols - rows + i {
                pivots[i] += 1;
                for k in i + 1..rows {
                    pivots[k] = pivots[k - 1] + 1;
                }
                break;
            }
        }
    }
}
