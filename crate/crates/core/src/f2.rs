//! Linear algebra over the two-element field.
//!
//! Vectors and matrix rows are bit-packed into `u64` words. Elimination always
//! pivots on the lowest available column index, so echelon forms and kernel
//! bases are reproducible.

use std::fmt;
use std::str::FromStr;

use crate::error::F2Error;

/// A dense vector over F2.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn word_count(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; word_count(len)],
            len,
        }
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in indices {
            v.flip(i);
        }
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_indices(
            bits.len(),
            bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i),
        )
    }

    /// Builds a vector from raw words; bits beyond `len` are cleared.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(word_count(len), 0);
        let mut v = Self { words, len };
        v.clear_tail();
        v
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// In-place addition (XOR).
    #[inline]
    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Inner product mod 2.
    #[inline]
    pub fn dot(&self, other: &BitVec) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum::<u32>()
            % 2
            == 1
    }

    /// Size of the common support.
    pub fn overlap(&self, other: &BitVec) -> usize {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    /// Indices of the set bits in ascending order.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + t)
                }
            })
        })
    }

    pub fn support(&self) -> Vec<usize> {
        self.ones().collect()
    }

    /// Concatenation `self ++ other`.
    pub fn concat(&self, other: &BitVec) -> BitVec {
        BitVec::from_indices(
            self.len + other.len,
            self.ones().chain(other.ones().map(|i| i + self.len)),
        )
    }

    pub fn slice(&self, start: usize, end: usize) -> BitVec {
        BitVec::from_indices(
            end - start,
            self.ones().filter(|&i| i >= start && i < end).map(|i| i - start),
        )
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitVec {
    type Err = F2Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut v = BitVec::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => v.set(i, true),
                other => return Err(F2Error::Parse(format!("unexpected character {other:?}"))),
            }
        }
        Ok(v)
    }
}

/// Dense bit-packed matrix over F2, stored by rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct F2Matrix {
    rows: usize,
    cols: usize,
    data: Vec<BitVec>,
}

impl F2Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BitVec::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Builds a matrix from row vectors of equal length `cols`.
    pub fn from_rows(cols: usize, rows: Vec<BitVec>) -> Self {
        for r in &rows {
            assert_eq!(r.len(), cols, "row length mismatch");
        }
        Self {
            rows: rows.len(),
            cols,
            data: rows,
        }
    }

    pub fn from_row_supports(rows: usize, cols: usize, supports: &[Vec<usize>]) -> Self {
        assert_eq!(supports.len(), rows);
        Self::from_rows(
            cols,
            supports
                .iter()
                .map(|s| BitVec::from_indices(cols, s.iter().copied()))
                .collect(),
        )
    }

    /// Convenience for small literals: each inner slice is a row of 0/1 values.
    pub fn from_dense(rows: &[&[u8]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        Self::from_rows(
            cols,
            rows.iter()
                .map(|r| {
                    assert_eq!(r.len(), cols);
                    BitVec::from_indices(
                        cols,
                        r.iter().enumerate().filter(|(_, &b)| b & 1 == 1).map(|(i, _)| i),
                    )
                })
                .collect(),
        )
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &BitVec {
        &self.data[i]
    }

    pub fn row_vectors(&self) -> &[BitVec] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r].get(c)
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.data[r].set(c, value);
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(BitVec::is_zero)
    }

    /// Number of nonzero entries.
    pub fn nnz(&self) -> usize {
        self.data.iter().map(BitVec::weight).sum()
    }

    /// Sparse view: sorted column indices of each row.
    pub fn row_supports(&self) -> Vec<Vec<usize>> {
        self.data.iter().map(BitVec::support).collect()
    }

    /// Sparse view: sorted row indices of each column.
    pub fn col_supports(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.cols];
        for (r, row) in self.data.iter().enumerate() {
            for c in row.ones() {
                cols[c].push(r);
            }
        }
        cols
    }

    /// Columns as bit vectors of length `rows`.
    pub fn col_vectors(&self) -> Vec<BitVec> {
        self.transpose().data
    }

    pub fn transpose(&self) -> F2Matrix {
        let mut t = F2Matrix::zeros(self.cols, self.rows);
        for (r, row) in self.data.iter().enumerate() {
            for c in row.ones() {
                t.data[c].set(r, true);
            }
        }
        t
    }

    /// Matrix product `self · other`.
    pub fn mul(&self, other: &F2Matrix) -> F2Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let data = self
            .data
            .iter()
            .map(|row| {
                let mut acc = BitVec::zeros(other.cols);
                for k in row.ones() {
                    acc.xor_assign(&other.data[k]);
                }
                acc
            })
            .collect();
        F2Matrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    /// Matrix-vector product `self · v`.
    pub fn mul_vec(&self, v: &BitVec) -> BitVec {
        assert_eq!(self.cols, v.len(), "vector length differs from column count");
        BitVec::from_indices(
            self.rows,
            self.data
                .iter()
                .enumerate()
                .filter(|(_, r)| r.dot(v))
                .map(|(i, _)| i),
        )
    }

    /// Kronecker product; the first factor's index varies slowest.
    pub fn kron(&self, other: &F2Matrix) -> F2Matrix {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = F2Matrix::zeros(rows, cols);
        for (i, a_row) in self.data.iter().enumerate() {
            for j in a_row.ones() {
                for (k, b_row) in other.data.iter().enumerate() {
                    let r = i * other.rows + k;
                    for l in b_row.ones() {
                        out.data[r].set(j * other.cols + l, true);
                    }
                }
            }
        }
        out
    }

    pub fn hstack(&self, other: &F2Matrix) -> F2Matrix {
        assert_eq!(self.rows, other.rows);
        F2Matrix::from_rows(
            self.cols + other.cols,
            self.data.iter().zip(&other.data).map(|(a, b)| a.concat(b)).collect(),
        )
    }

    pub fn vstack(&self, other: &F2Matrix) -> F2Matrix {
        assert_eq!(self.cols, other.cols);
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        F2Matrix::from_rows(self.cols, data)
    }

    /// Writes `block` with its top-left corner at `(row, col)`, XOR-ing into existing entries.
    pub fn add_block(&mut self, row: usize, col: usize, block: &F2Matrix) {
        assert!(row + block.rows <= self.rows && col + block.cols <= self.cols);
        for (i, brow) in block.data.iter().enumerate() {
            for j in brow.ones() {
                self.data[row + i].flip(col + j);
            }
        }
    }

    pub fn rank(&self) -> usize {
        Echelon::new(self).rank()
    }

    /// Basis of the null space, one vector per free column.
    pub fn kernel_basis(&self) -> Vec<BitVec> {
        Echelon::new(self).kernel_basis()
    }

    /// Some `x` with `self · x = y`, if one exists.
    pub fn solve(&self, y: &BitVec) -> Result<Option<BitVec>, F2Error> {
        if y.len() != self.rows {
            return Err(F2Error::Dimension {
                expected: self.rows,
                found: y.len(),
            });
        }
        // Row-reduce the augmented matrix [self | y].
        let aug = F2Matrix::from_rows(
            self.cols + 1,
            self.data
                .iter()
                .enumerate()
                .map(|(i, r)| r.concat(&BitVec::from_indices(1, y.get(i).then_some(0))))
                .collect(),
        );
        let ech = Echelon::new(&aug);
        let mut x = BitVec::zeros(self.cols);
        for (row, &pivot) in ech.pivots.iter().enumerate() {
            if pivot == self.cols {
                return Ok(None);
            }
            if ech.reduced[row].get(self.cols) {
                x.set(pivot, true);
            }
        }
        Ok(Some(x))
    }

    /// Whether `v` is an F2 combination of rows.
    pub fn in_row_space(&self, v: &BitVec) -> Result<bool, F2Error> {
        if v.len() != self.cols {
            return Err(F2Error::Dimension {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok(Echelon::new(self).reduce(v).is_zero())
    }

    /// Plain-text form: a `rows cols` header then one line of `0`/`1` per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.rows, self.cols);
        for row in &self.data {
            s.push_str(&row.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, F2Error> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| F2Error::Parse("missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| F2Error::Parse(format!("bad header {header:?}"))))
            .collect::<Result<_, _>>()?;
        let [rows, cols] = dims[..] else {
            return Err(F2Error::Parse(format!("bad header {header:?}")));
        };
        let mut data = Vec::with_capacity(rows);
        for _ in 0..rows {
            let line = lines.next().ok_or_else(|| F2Error::Parse("missing row".into()))?;
            let row: BitVec = line.parse()?;
            if row.len() != cols {
                return Err(F2Error::Parse(format!(
                    "row has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.push(row);
        }
        Ok(F2Matrix { rows, cols, data })
    }
}

impl fmt::Debug for F2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "F2Matrix {}x{}", self.rows, self.cols)?;
        for row in &self.data {
            writeln!(f, "  {row}")?;
        }
        Ok(())
    }
}

/// Reduced row echelon form with pivots chosen at the lowest column index.
#[derive(Clone, Debug)]
pub struct Echelon {
    cols: usize,
    /// Nonzero reduced rows, one per pivot.
    reduced: Vec<BitVec>,
    /// Pivot column of each reduced row, strictly increasing.
    pivots: Vec<usize>,
}

impl Echelon {
    pub fn new(m: &F2Matrix) -> Self {
        let mut rows: Vec<BitVec> = m.data.clone();
        let mut pivots = Vec::new();
        let mut next = 0;
        for col in 0..m.cols {
            let Some(found) = (next..rows.len()).find(|&r| rows[r].get(col)) else {
                continue;
            };
            rows.swap(next, found);
            let pivot_row = rows[next].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != next && row.get(col) {
                    row.xor_assign(&pivot_row);
                }
            }
            pivots.push(col);
            next += 1;
            if next == rows.len() {
                break;
            }
        }
        rows.truncate(next);
        Self {
            cols: m.cols,
            reduced: rows,
            pivots,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Residue of `v` after eliminating every pivot coordinate.
    pub fn reduce(&self, v: &BitVec) -> BitVec {
        let mut r = v.clone();
        for (row, &p) in self.reduced.iter().zip(&self.pivots) {
            if r.get(p) {
                r.xor_assign(row);
            }
        }
        r
    }

    pub fn kernel_basis(&self) -> Vec<BitVec> {
        let mut is_pivot = vec![false; self.cols];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        (0..self.cols)
            .filter(|&c| !is_pivot[c])
            .map(|free| {
                let mut v = BitVec::zeros(self.cols);
                v.set(free, true);
                for (row, &p) in self.reduced.iter().zip(&self.pivots) {
                    if row.get(free) {
                        v.set(p, true);
                    }
                }
                v
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn repetition(l: usize) -> F2Matrix {
        let mut h = F2Matrix::zeros(l - 1, l);
        for i in 0..l - 1 {
            h.set(i, i, true);
            h.set(i, i + 1, true);
        }
        h
    }

    /// Rank by brute force: size of the row span, as a power of two.
    fn brute_rank(m: &F2Matrix) -> usize {
        let mut span = std::collections::HashSet::new();
        for mask in 0u32..(1 << m.rows()) {
            let mut acc = BitVec::zeros(m.cols());
            for r in 0..m.rows() {
                if mask >> r & 1 == 1 {
                    acc.xor_assign(m.row(r));
                }
            }
            span.insert(acc);
        }
        span.len().trailing_zeros() as usize
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> F2Matrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = F2Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.set(r, c, rng.gen_bool(0.4));
            }
        }
        m
    }

    #[test]
    fn rank_examples() {
        assert_eq!(F2Matrix::identity(3).rank(), 3);
        assert_eq!(F2Matrix::zeros(4, 7).rank(), 0);
        let h = repetition(4);
        assert_eq!(brute_rank(&h), 3);
        assert_eq!(h.rank(), 3);
        assert_eq!(h.transpose().rank(), 3);
    }

    #[test]
    fn kernel_examples() {
        let k = repetition(3).kernel_basis();
        assert_eq!(k, vec!["111".parse().unwrap()]);
        assert!(F2Matrix::identity(2).kernel_basis().is_empty());
    }

    #[test]
    fn kron_examples() {
        assert_eq!(
            F2Matrix::identity(2).kron(&F2Matrix::identity(3)),
            F2Matrix::identity(6)
        );
        let h = repetition(2);
        assert_eq!(h.kron(&h), F2Matrix::from_dense(&[&[1, 1, 1, 1]]));
    }

    #[test]
    fn kron_rank_multiplies() {
        for seed in 0..120 {
            let a = random_matrix(4, 6, seed);
            let b = random_matrix(3, 5, seed + 1000);
            assert_eq!(
                brute_rank(&a.kron(&b)),
                brute_rank(&a) * brute_rank(&b),
                "seed {seed}"
            );
            assert_eq!(a.kron(&b).rank(), a.rank() * b.rank());
        }
    }

    #[test]
    fn solve_examples() {
        let y: BitVec = "1011".parse().unwrap();
        assert_eq!(F2Matrix::identity(4).solve(&y).unwrap(), Some(y.clone()));
        let h = repetition(4);
        assert_eq!(
            h.solve(&BitVec::zeros(3)).unwrap(),
            Some(BitVec::zeros(4))
        );
        let target: BitVec = "100".parse().unwrap();
        let expected: Vec<BitVec> = (0u32..16)
            .map(|m| BitVec::from_indices(4, (0..4).filter(|i| m >> i & 1 == 1)))
            .filter(|x| h.mul_vec(x) == target)
            .collect();
        assert_eq!(expected.len(), 2);
        let x = h.solve(&target).unwrap().unwrap();
        assert!(expected.contains(&x));
        assert!(expected.contains(&"1000".parse().unwrap()));
    }

    #[test]
    fn solve_rejects_bad_length() {
        assert!(matches!(
            F2Matrix::identity(3).solve(&BitVec::zeros(2)),
            Err(F2Error::Dimension { .. })
        ));
        assert!(F2Matrix::identity(3).in_row_space(&BitVec::zeros(4)).is_err());
    }

    #[test]
    fn solve_reports_inconsistency() {
        let m = F2Matrix::from_dense(&[&[1, 1], &[1, 1]]);
        assert_eq!(m.solve(&"10".parse().unwrap()).unwrap(), None);
    }

    #[test]
    fn row_space_membership() {
        let h = repetition(5);
        assert!(h.in_row_space(&BitVec::zeros(5)).unwrap());
        for r in 0..h.rows() {
            assert!(h.in_row_space(h.row(r)).unwrap());
        }
        assert!(!h.in_row_space(&"10000".parse().unwrap()).unwrap());
    }

    #[test]
    fn text_round_trip() {
        let m = random_matrix(5, 9, 3);
        assert_eq!(F2Matrix::from_text(&m.to_text()).unwrap(), m);
        assert!(F2Matrix::from_text("2 3\n101\n").is_err());
        assert!(F2Matrix::from_text("1 3\n1a1\n").is_err());
    }

    fn arb_matrix() -> impl Strategy<Value = F2Matrix> {
        (1usize..9, 1usize..12, any::<u64>()).prop_map(|(r, c, s)| random_matrix(r, c, s))
    }

    proptest! {
        #[test]
        fn rank_nullity(m in arb_matrix()) {
            let k = m.kernel_basis();
            prop_assert_eq!(m.rank() + k.len(), m.cols());
            prop_assert_eq!(m.rank(), m.transpose().rank());
            prop_assert!(m.rank() <= m.rows().min(m.cols()));
            for v in &k {
                prop_assert!(m.mul_vec(v).is_zero());
            }
            let km = F2Matrix::from_rows(m.cols(), k);
            prop_assert_eq!(km.rank(), km.rows());
        }

        #[test]
        fn solve_is_exact(m in arb_matrix(), seed in any::<u64>()) {
            let x0 = random_matrix(1, m.cols(), seed).row(0).clone();
            let y = m.mul_vec(&x0);
            let x = m.solve(&y).unwrap().expect("consistent system");
            prop_assert_eq!(m.mul_vec(&x), y);
        }

        #[test]
        fn kron_associative(a in arb_matrix(), b in arb_matrix(), c in arb_matrix()) {
            prop_assert_eq!(a.kron(&b).kron(&c), a.kron(&b.kron(&c)));
        }
    }
}
