//! Chain complexes over F2: total complexes of tensor products, homology
//! dimensions and exhaustive systolic/cosystolic distances.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ChainError;
use crate::f2::{BitVec, F2Matrix};

/// Default number of candidate vectors a distance search may visit.
pub const DEFAULT_SEARCH_BUDGET: u128 = 50_000_000;

/// Default weight cap for exhaustive distance searches.
pub const DEFAULT_WEIGHT_CAP: usize = 6;

/// A chain complex `C_n -> ... -> C_1 -> C_0`.
///
/// Boundaries are stored highest grade first: `boundaries[0] = ∂_n`, and
/// `∂_i` has `dim C_i` columns and `dim C_{i-1}` rows.
#[derive(Clone, PartialEq, Eq)]
pub struct ChainComplex {
    boundaries: Vec<F2Matrix>,
    /// Dimension of the single space when there are no boundaries.
    base_dim: usize,
}

impl ChainComplex {
    /// Builds a complex from `[∂_n, ..., ∂_1]`. Nothing is checked here; see [`ChainComplex::validate`].
    pub fn from_boundaries(boundaries: Vec<F2Matrix>) -> Self {
        Self {
            boundaries,
            base_dim: 0,
        }
    }

    /// The one-term complex consisting of a single space of dimension `dim`.
    pub fn single(dim: usize) -> Self {
        Self {
            boundaries: Vec::new(),
            base_dim: dim,
        }
    }

    /// Highest grade `n`.
    pub fn top(&self) -> usize {
        self.boundaries.len()
    }

    /// Number of spaces, `n + 1`.
    pub fn length(&self) -> usize {
        self.top() + 1
    }

    pub fn dim(&self, grade: usize) -> usize {
        let n = self.top();
        if grade > n {
            0
        } else if n == 0 {
            self.base_dim
        } else if grade == 0 {
            self.boundaries[n - 1].rows()
        } else {
            self.boundaries[n - grade].cols()
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        (0..=self.top()).map(|i| self.dim(i)).collect()
    }

    /// `∂_grade`; outside `1..=n` this is the zero map of the appropriate shape.
    pub fn boundary(&self, grade: usize) -> F2Matrix {
        let n = self.top();
        if grade >= 1 && grade <= n {
            self.boundaries[n - grade].clone()
        } else if grade == 0 {
            F2Matrix::zeros(0, self.dim(0))
        } else {
            F2Matrix::zeros(self.dim(grade - 1), 0)
        }
    }

    pub fn boundary_ref(&self, grade: usize) -> Option<&F2Matrix> {
        let n = self.top();
        (grade >= 1 && grade <= n).then(|| &self.boundaries[n - grade])
    }

    /// True iff consecutive dimensions agree and every `∂_i · ∂_{i+1}` vanishes.
    pub fn validate(&self) -> bool {
        let n = self.top();
        for i in 1..n {
            let lower = &self.boundaries[n - i];
            let upper = &self.boundaries[n - i - 1];
            if upper.rows() != lower.cols() || !lower.mul(upper).is_zero() {
                return false;
            }
        }
        true
    }

    /// Dual complex: all maps transposed, grading reversed.
    pub fn transpose(&self) -> ChainComplex {
        if self.top() == 0 {
            return self.clone();
        }
        ChainComplex::from_boundaries(self.boundaries.iter().rev().map(F2Matrix::transpose).collect())
    }

    fn check_grade(&self, grade: usize) -> Result<(), ChainError> {
        if grade > self.top() {
            Err(ChainError::GradeOutOfRange {
                grade,
                top: self.top(),
            })
        } else {
            Ok(())
        }
    }

    /// `dim ker ∂_i - rank ∂_{i+1}`.
    pub fn homology_dim(&self, grade: usize) -> Result<usize, ChainError> {
        self.check_grade(grade)?;
        let rank_out = self.boundary_ref(grade).map_or(0, F2Matrix::rank);
        let rank_in = self.boundary_ref(grade + 1).map_or(0, F2Matrix::rank);
        Ok(self.dim(grade) - rank_out - rank_in)
    }

    pub fn betti_numbers(&self) -> Vec<usize> {
        (0..=self.top())
            .map(|i| self.homology_dim(i).expect("grade in range"))
            .collect()
    }

    /// Ordered blocks `(j, k)` with `j + k = grade` making up the total space.
    fn tot_blocks(c: &ChainComplex, d: &ChainComplex, grade: usize) -> Vec<(usize, usize)> {
        (0..=c.top())
            .filter_map(|j| {
                let k = grade.checked_sub(j)?;
                (k <= d.top()).then_some((j, k))
            })
            .collect()
    }

    /// Total complex of the double complex `self ⊠ other`.
    ///
    /// `Tot_i = ⊕_{j+k=i} C_j ⊗ D_k` with summands in ascending `j`. The block
    /// from `C_j ⊗ D_k` to `C_{j-1} ⊗ D_k` is `∂^C_j ⊗ I`, the block to
    /// `C_j ⊗ D_{k-1}` is `I ⊗ ∂^D_k`, and every other block is zero.
    pub fn tensor_product(&self, other: &ChainComplex) -> Result<ChainComplex, ChainError> {
        if !self.validate() {
            return Err(ChainError::Invalid("left factor".into()));
        }
        if !other.validate() {
            return Err(ChainError::Invalid("right factor".into()));
        }
        let n = self.top() + other.top();
        if n == 0 {
            return Ok(ChainComplex::single(self.dim(0) * other.dim(0)));
        }
        let offsets = |grade: usize| -> Vec<((usize, usize), usize)> {
            let mut acc = 0;
            Self::tot_blocks(self, other, grade)
                .into_iter()
                .map(|b| {
                    let off = acc;
                    acc += self.dim(b.0) * other.dim(b.1);
                    (b, off)
                })
                .collect()
        };
        let tot_dim = |grade: usize| -> usize {
            Self::tot_blocks(self, other, grade)
                .iter()
                .map(|&(j, k)| self.dim(j) * other.dim(k))
                .sum()
        };
        let mut boundaries = Vec::with_capacity(n);
        for grade in (1..=n).rev() {
            let cols = offsets(grade);
            let rows = offsets(grade - 1);
            let row_offset = |b: (usize, usize)| rows.iter().find(|(rb, _)| *rb == b).map(|(_, o)| *o);
            let mut m = F2Matrix::zeros(tot_dim(grade - 1), tot_dim(grade));
            for &((j, k), col_off) in &cols {
                if j >= 1 {
                    if let Some(row_off) = row_offset((j - 1, k)) {
                        let block = self.boundary(j).kron(&F2Matrix::identity(other.dim(k)));
                        m.add_block(row_off, col_off, &block);
                    }
                }
                if k >= 1 {
                    if let Some(row_off) = row_offset((j, k - 1)) {
                        let block = F2Matrix::identity(self.dim(j)).kron(&other.boundary(k));
                        m.add_block(row_off, col_off, &block);
                    }
                }
            }
            boundaries.push(m);
        }
        Ok(ChainComplex::from_boundaries(boundaries))
    }

    /// Least-weight nontrivial element of `H_grade`, searching weights up to `cap`.
    pub fn systolic_distance(&self, grade: usize, cap: usize) -> Result<Distance, ChainError> {
        self.systolic_distance_with_budget(grade, cap, DEFAULT_SEARCH_BUDGET)
    }

    pub fn systolic_distance_with_budget(
        &self,
        grade: usize,
        cap: usize,
        budget: u128,
    ) -> Result<Distance, ChainError> {
        self.check_grade(grade)?;
        if self.homology_dim(grade)? == 0 {
            return Ok(Distance::Infinite);
        }
        let search = WeightSearch::homology(self, grade);
        let needed = search.candidates_up_to(cap);
        if needed > budget {
            return Err(ChainError::Resource { needed, budget });
        }
        Ok(match search.min_weight(cap) {
            Some(v) => Distance::Finite(v.len()),
            None => Distance::AtLeast(cap + 1),
        })
    }

    /// Distance of the cohomology at `grade`, via the transposed complex.
    pub fn cosystolic_distance(&self, grade: usize, cap: usize) -> Result<Distance, ChainError> {
        self.check_grade(grade)?;
        self.transpose().systolic_distance(self.top() - grade, cap)
    }

    pub fn cosystolic_distance_with_budget(
        &self,
        grade: usize,
        cap: usize,
        budget: u128,
    ) -> Result<Distance, ChainError> {
        self.check_grade(grade)?;
        self.transpose()
            .systolic_distance_with_budget(self.top() - grade, cap, budget)
    }
}

impl fmt::Debug for ChainComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChainComplex(dims {:?})", self.dims())
    }
}

/// `Σ_{j+k=i} dim H_j(C) · dim H_k(D)`.
pub fn kunneth_dim(c: &ChainComplex, d: &ChainComplex, grade: usize) -> Result<usize, ChainError> {
    let hc = c.betti_numbers();
    let hd = d.betti_numbers();
    Ok((0..=grade)
        .map(|j| {
            let k = grade - j;
            hc.get(j).copied().unwrap_or(0) * hd.get(k).copied().unwrap_or(0)
        })
        .sum())
}

/// A code distance: exact, a lower bound from an unsuccessful bounded
/// search, or infinite when the relevant homology is trivial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    Finite(usize),
    AtLeast(usize),
    Infinite,
}

impl Distance {
    pub fn exact(self) -> Option<usize> {
        match self {
            Distance::Finite(d) => Some(d),
            _ => None,
        }
    }

    pub fn is_exact(self) -> bool {
        !matches!(self, Distance::AtLeast(_))
    }

    /// Product with infinity absorbing; distances are never zero.
    pub fn times(self, other: Distance) -> Distance {
        use Distance::*;
        match (self, other) {
            (Infinite, _) | (_, Infinite) => Infinite,
            (Finite(a), Finite(b)) => Finite(a * b),
            (Finite(a), AtLeast(b)) | (AtLeast(a), Finite(b)) | (AtLeast(a), AtLeast(b)) => {
                AtLeast(a * b)
            }
        }
    }

    pub fn min(self, other: Distance) -> Distance {
        use Distance::*;
        match (self, other) {
            (Infinite, x) | (x, Infinite) => x,
            (Finite(a), Finite(b)) => Finite(a.min(b)),
            (Finite(a), AtLeast(b)) | (AtLeast(b), Finite(a)) => {
                if a <= b {
                    Finite(a)
                } else {
                    AtLeast(b)
                }
            }
            (AtLeast(a), AtLeast(b)) => AtLeast(a.min(b)),
        }
    }
}

impl PartialOrd for Distance {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use Distance::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(a.cmp(b)),
            (Infinite, Infinite) => Some(Ordering::Equal),
            (Infinite, _) => Some(Ordering::Greater),
            (_, Infinite) => Some(Ordering::Less),
            (Finite(a), AtLeast(b)) if a < b => Some(Ordering::Less),
            (AtLeast(a), Finite(b)) if b < a => Some(Ordering::Greater),
            _ => None,
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(d) => write!(f, "{d}"),
            Distance::AtLeast(d) => write!(f, ">={d}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

/// Systolic and cosystolic distances of every grade of a complex.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub systolic: Vec<Distance>,
    pub cosystolic: Vec<Distance>,
}

impl DistanceProfile {
    /// Searches each grade up to `cap`; grades whose search would exceed the
    /// budget are recorded as lower bounds.
    pub fn compute(c: &ChainComplex, cap: usize, budget: u128) -> DistanceProfile {
        let grade_distance = |res: Result<Distance, ChainError>, lower: usize| match res {
            Ok(d) => d,
            Err(_) => Distance::AtLeast(lower),
        };
        let systolic = (0..=c.top())
            .map(|i| grade_distance(bounded_search(c, i, cap, budget, false), 1))
            .collect();
        let cosystolic = (0..=c.top())
            .map(|i| grade_distance(bounded_search(c, i, cap, budget, true), 1))
            .collect();
        DistanceProfile {
            systolic,
            cosystolic,
        }
    }

    pub fn get(&self, grade: isize) -> Distance {
        if grade < 0 {
            Distance::Infinite
        } else {
            self.systolic
                .get(grade as usize)
                .copied()
                .unwrap_or(Distance::Infinite)
        }
    }
}

/// Distance search that lowers the cap to whatever the budget allows.
pub(crate) fn bounded_search(
    c: &ChainComplex,
    grade: usize,
    cap: usize,
    budget: u128,
    cohomology: bool,
) -> Result<Distance, ChainError> {
    let (complex, g) = if cohomology {
        (c.transpose(), c.top() - grade)
    } else {
        (c.clone(), grade)
    };
    if complex.homology_dim(g)? == 0 {
        return Ok(Distance::Infinite);
    }
    let search = WeightSearch::homology(&complex, g);
    let mut reachable = 0;
    while reachable < cap && search.candidates_up_to(reachable + 1) <= budget {
        reachable += 1;
    }
    Ok(match search.min_weight(reachable) {
        Some(v) => Distance::Finite(v.len()),
        None => Distance::AtLeast(reachable + 1),
    })
}

/// Distance of `C ⊗ D` at `grade` from factor profiles, `D` a two-term complex:
/// `min(d_i(C) d_0(D), d_{i-1}(C) d_1(D))`.
pub fn product_distance(dc: &DistanceProfile, dd: &DistanceProfile, grade: usize) -> Distance {
    let i = grade as isize;
    dc.get(i)
        .times(dd.get(0))
        .min(dc.get(i - 1).times(dd.get(1)))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Exhaustive enumeration of low-weight vectors `v` with `A v = 0` and,
/// optionally, `B v ≠ 0`.
///
/// For homology at grade `i`, `A = ∂_i` and the rows of `B` span
/// `ker ∂_{i+1}^T`, so `B v ≠ 0` exactly when `v` is not a boundary.
pub(crate) struct WeightSearch {
    /// Per coordinate: constraint column followed by marker column, as words.
    columns: Vec<Vec<u64>>,
    words: usize,
    constraint_mask: Vec<u64>,
    marker_mask: Vec<u64>,
    require_marker: bool,
}

impl WeightSearch {
    pub(crate) fn homology(c: &ChainComplex, grade: usize) -> Self {
        let constraint = c.boundary(grade);
        let markers = c.boundary(grade + 1).transpose().kernel_basis();
        let marker_matrix = F2Matrix::from_rows(c.dim(grade), markers);
        Self::new(&constraint, Some(&marker_matrix))
    }

    /// `markers = None` accepts every nonzero vector in the kernel.
    pub(crate) fn new(constraint: &F2Matrix, markers: Option<&F2Matrix>) -> Self {
        let n = constraint.cols();
        let a = constraint.col_vectors();
        let b = markers.map(F2Matrix::col_vectors);
        let marker_len = markers.map_or(0, F2Matrix::rows);
        let width = constraint.rows() + marker_len;
        let columns: Vec<Vec<u64>> = (0..n)
            .map(|q| match &b {
                Some(b) => a[q].concat(&b[q]).words().to_vec(),
                None => a[q].words().to_vec(),
            })
            .collect();
        let constraint_mask = BitVec::from_indices(width, 0..constraint.rows()).words().to_vec();
        let marker_mask = BitVec::from_indices(width, constraint.rows()..width)
            .words()
            .to_vec();
        Self {
            columns,
            words: width.div_ceil(64),
            constraint_mask,
            marker_mask,
            require_marker: markers.is_some(),
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.columns.len()
    }

    pub(crate) fn candidates_up_to(&self, cap: usize) -> u128 {
        (1..=cap).map(|w| binomial(self.len(), w)).sum()
    }

    #[inline]
    fn accepts(&self, v: &[u64]) -> bool {
        let constraint_zero = v
            .iter()
            .zip(&self.constraint_mask)
            .all(|(x, m)| x & m == 0);
        constraint_zero
            && (!self.require_marker || v.iter().zip(&self.marker_mask).any(|(x, m)| x & m != 0))
    }

    /// First accepted vector (lexicographic support order) of least weight ≤ cap.
    pub(crate) fn min_weight(&self, cap: usize) -> Option<Vec<usize>> {
        for w in 1..=cap.min(self.len()) {
            let mut found = None;
            self.visit(w, &mut |support| {
                found = Some(support.to_vec());
                true
            });
            if found.is_some() {
                return found;
            }
        }
        None
    }

    /// All accepted supports of exactly weight `w`.
    pub(crate) fn all_of_weight(&self, w: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.visit(w, &mut |support| {
            out.push(support.to_vec());
            false
        });
        out
    }

    /// Depth-first walk over `w`-subsets; `f` returns true to stop.
    fn visit(&self, w: usize, f: &mut dyn FnMut(&[usize]) -> bool) {
        let n = self.len();
        if w == 0 || w > n {
            return;
        }
        let mut partial = vec![0u64; (w + 1) * self.words];
        let mut support = Vec::with_capacity(w);
        self.descend(0, w, &mut partial, &mut support, f);
    }

    fn descend(
        &self,
        start: usize,
        w: usize,
        partial: &mut [u64],
        support: &mut Vec<usize>,
        f: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        let depth = support.len();
        let n = self.len();
        let nw = self.words;
        for q in start..=n - (w - depth) {
            let (lo, hi) = partial.split_at_mut((depth + 1) * nw);
            let cur = &lo[depth * nw..];
            let next = &mut hi[..nw];
            for ((x, a), b) in next.iter_mut().zip(cur).zip(&self.columns[q]) {
                *x = a ^ b;
            }
            support.push(q);
            if depth + 1 == w {
                if self.accepts(next) && f(support) {
                    return true;
                }
            } else if self.descend(q + 1, w, partial, support, f) {
                return true;
            }
            support.pop();
        }
        false
    }
}
