//! Ordered-statistics post-processing with a combination sweep.
//!
//! Columns are ranked by posterior flip probability and an information set is
//! grown greedily in that order. On top of the order-0 solution the sweep tries
//! every single flip and every pair of flips among the first `order` non-pivot
//! columns, plus (optionally) all nonzero patterns on the first `exhaustive`
//! of them. Candidates are scored by the sum of prior LLRs over their support;
//! equal scores go to the lexicographically smallest support.

use crate::error::DecodeError;
use crate::f2::BitVec;

use super::bp::SparsePcm;

#[derive(Clone, Debug)]
pub struct OsdDecoder {
    rows: usize,
    columns: Vec<BitVec>,
    weights: Vec<f64>,
}

struct Basis {
    pivot_rows: Vec<usize>,
    vectors: Vec<BitVec>,
    /// Each basis vector as a combination of pivot columns, by pivot position.
    combos: Vec<BitVec>,
}

impl Basis {
    fn reduce(&self, v: &mut BitVec, combo: &mut BitVec) {
        for i in 0..self.vectors.len() {
            if v.get(self.pivot_rows[i]) {
                v.xor_assign(&self.vectors[i]);
                combo.xor_assign(&self.combos[i]);
            }
        }
    }
}

impl OsdDecoder {
    /// `weights` are the per-column costs (prior LLRs).
    pub fn new(pcm: &SparsePcm, weights: Vec<f64>) -> OsdDecoder {
        let columns = pcm
            .col_checks
            .iter()
            .map(|checks| BitVec::from_indices(pcm.rows, checks.iter().copied()))
            .collect();
        OsdDecoder {
            rows: pcm.rows,
            columns,
            weights,
        }
    }

    /// Returns a column set whose syndrome is exactly `syndrome`.
    pub fn decode(
        &self,
        syndrome: &BitVec,
        posterior_llr: &[f64],
        order: usize,
        exhaustive: usize,
    ) -> Result<BitVec, DecodeError> {
        if syndrome.len() != self.rows {
            return Err(DecodeError::Dimension {
                expected: self.rows,
                found: syndrome.len(),
            });
        }
        let n = self.columns.len();
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| posterior_llr[a].total_cmp(&posterior_llr[b]).then(a.cmp(&b)));

        let span = self.rows.max(1);
        let mut basis = Basis {
            pivot_rows: Vec::new(),
            vectors: Vec::new(),
            combos: Vec::new(),
        };
        let mut pivot_cols: Vec<usize> = Vec::new();
        let mut residual = syndrome.clone();
        let mut solution = BitVec::zeros(span);
        // (column, its expansion over pivot positions) for leading non-pivots
        let mut free: Vec<(usize, BitVec)> = Vec::new();
        for &col in &ranked {
            if residual.is_zero() && free.len() >= order {
                break;
            }
            let mut v = self.columns[col].clone();
            let mut combo = BitVec::zeros(span);
            basis.reduce(&mut v, &mut combo);
            match v.first_one() {
                Some(pivot) => {
                    combo.set(pivot_cols.len(), true);
                    pivot_cols.push(col);
                    if residual.get(pivot) {
                        residual.xor_assign(&v);
                        solution.xor_assign(&combo);
                    }
                    basis.pivot_rows.push(pivot);
                    basis.vectors.push(v);
                    basis.combos.push(combo);
                }
                None => {
                    if free.len() < order {
                        free.push((col, combo));
                    }
                }
            }
        }
        if !residual.is_zero() {
            return Err(DecodeError::Inconsistent);
        }

        let pivot_weights: Vec<f64> = pivot_cols.iter().map(|&c| self.weights[c]).collect();
        let mut best = Candidate::new(&solution, &[], &pivot_weights, &pivot_cols, &self.weights);
        let mut consider = |flips: &[usize], expansion: &BitVec| {
            let mut x = solution.clone();
            x.xor_assign(expansion);
            let cols: Vec<usize> = flips.iter().map(|&i| free[i].0).collect();
            let cand = Candidate::new(&x, &cols, &pivot_weights, &pivot_cols, &self.weights);
            if cand.better_than(&best) {
                best = cand;
            }
        };
        for i in 0..free.len() {
            consider(&[i], &free[i].1);
        }
        for i in 0..free.len() {
            for j in i + 1..free.len() {
                let mut e = free[i].1.clone();
                e.xor_assign(&free[j].1);
                consider(&[i, j], &e);
            }
        }
        let bits = exhaustive.min(free.len());
        for pattern in 1u32..(1 << bits) {
            if pattern.count_ones() <= 2 {
                continue;
            }
            let flips: Vec<usize> = (0..bits).filter(|&i| pattern >> i & 1 == 1).collect();
            let mut e = BitVec::zeros(span);
            for &i in &flips {
                e.xor_assign(&free[i].1);
            }
            consider(&flips, &e);
        }
        Ok(BitVec::from_indices(n, best.support))
    }
}

struct Candidate {
    cost: f64,
    support: Vec<usize>,
}

impl Candidate {
    fn new(on_pivots: &BitVec, flips: &[usize], pivot_weights: &[f64], pivot_cols: &[usize], weights: &[f64]) -> Candidate {
        let mut support: Vec<usize> = on_pivots.ones().map(|p| pivot_cols[p]).collect();
        support.extend_from_slice(flips);
        support.sort_unstable();
        let cost = on_pivots.ones().map(|p| pivot_weights[p]).sum::<f64>() + flips.iter().map(|&c| weights[c]).sum::<f64>();
        Candidate { cost, support }
    }

    fn better_than(&self, other: &Candidate) -> bool {
        let tol = 1e-9 * self.cost.abs().max(other.cost.abs()).max(1.0);
        if (self.cost - other.cost).abs() <= tol {
            self.support < other.support
        } else {
            self.cost < other.cost
        }
    }
}
