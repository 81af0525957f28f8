//! Product-sum belief propagation in the log-likelihood domain.

use serde::{Deserialize, Serialize};

use crate::dem::DetectorErrorModel;
use crate::error::DecodeError;
use crate::f2::{BitVec, F2Matrix};

/// Messages are kept within the LLR of probabilities in `[1e-12, 1 - 1e-12]`.
const LLR_CLAMP: f64 = 27.631021115928547;

/// Largest per-iteration belief change treated as a fixed point.
const FIXED_POINT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BpSchedule {
    #[default]
    Flooding,
    /// Checks updated one at a time, each seeing the latest variable beliefs.
    Serial,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpConfig {
    pub max_iter: usize,
    pub schedule: BpSchedule,
    /// Combination-sweep depth: weight-1 and weight-2 flips among this many
    /// leading non-pivot columns. 0 gives plain OSD-0.
    pub osd_order: usize,
    /// Additionally try every nonzero pattern on this many leading non-pivot
    /// columns (at most `osd_order`).
    pub osd_exhaustive: usize,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            max_iter: 1000,
            schedule: BpSchedule::Flooding,
            osd_order: 10,
            osd_exhaustive: 0,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.max_iter == 0 {
            return Err(DecodeError::Config("max_iter must be at least 1".into()));
        }
        if self.osd_exhaustive > self.osd_order || self.osd_exhaustive > 20 {
            return Err(DecodeError::Config(
                "osd_exhaustive must not exceed osd_order (or 20)".into(),
            ));
        }
        Ok(())
    }
}

/// Column-sparse parity-check matrix (checks × variables).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsePcm {
    pub rows: usize,
    pub cols: usize,
    /// Check rows of each variable, ascending.
    pub col_checks: Vec<Vec<usize>>,
}

impl SparsePcm {
    pub fn from_columns(rows: usize, col_checks: Vec<Vec<usize>>) -> SparsePcm {
        SparsePcm {
            rows,
            cols: col_checks.len(),
            col_checks,
        }
    }

    pub fn from_dense(m: &F2Matrix) -> SparsePcm {
        SparsePcm::from_columns(m.rows(), m.col_supports())
    }

    pub fn from_dem(dem: &DetectorErrorModel) -> SparsePcm {
        SparsePcm::from_columns(
            dem.detector_count,
            dem.mechanisms.iter().map(|m| m.detectors.clone()).collect(),
        )
    }

    pub fn syndrome(&self, error: &BitVec) -> BitVec {
        let mut s = BitVec::zeros(self.rows);
        for v in error.ones() {
            for &c in &self.col_checks[v] {
                s.flip(c);
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BpResult {
    /// Posterior log-likelihood ratios `ln(P(0)/P(1))` per variable.
    pub posterior_llr: Vec<f64>,
    pub decision: BitVec,
    pub converged: bool,
    pub iterations: usize,
}

impl BpResult {
    /// Posterior flip probability of variable `v`.
    pub fn marginal(&self, v: usize) -> f64 {
        1.0 / (1.0 + self.posterior_llr[v].exp())
    }
}

/// Tanner graph with edges grouped by check.
#[derive(Clone, Debug)]
pub struct BpDecoder {
    rows: usize,
    cols: usize,
    prior_llr: Vec<f64>,
    check_start: Vec<usize>,
    edge_var: Vec<usize>,
    /// Edges of each variable.
    var_edges: Vec<Vec<usize>>,
}

impl BpDecoder {
    pub fn new(pcm: &SparsePcm, priors: &[f64]) -> Result<BpDecoder, DecodeError> {
        if priors.len() != pcm.cols {
            return Err(DecodeError::Dimension {
                expected: pcm.cols,
                found: priors.len(),
            });
        }
        let mut by_check: Vec<Vec<usize>> = vec![Vec::new(); pcm.rows];
        for (v, checks) in pcm.col_checks.iter().enumerate() {
            for &c in checks {
                by_check[c].push(v);
            }
        }
        let mut check_start = vec![0];
        let mut edge_var = Vec::new();
        let mut var_edges = vec![Vec::new(); pcm.cols];
        for vars in &by_check {
            for &v in vars {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
            check_start.push(edge_var.len());
        }
        let prior_llr = priors
            .iter()
            .map(|&p| ((1.0 - p) / p).ln().clamp(-LLR_CLAMP, LLR_CLAMP))
            .collect();
        Ok(BpDecoder {
            rows: pcm.rows,
            cols: pcm.cols,
            prior_llr,
            check_start,
            edge_var,
            var_edges,
        })
    }

    pub fn prior_llr(&self) -> &[f64] {
        &self.prior_llr
    }

    pub fn decode(&self, syndrome: &BitVec, max_iter: usize, schedule: BpSchedule) -> Result<BpResult, DecodeError> {
        if syndrome.len() != self.rows {
            return Err(DecodeError::Dimension {
                expected: self.rows,
                found: syndrome.len(),
            });
        }
        let edges = self.edge_var.len();
        let mut v2c: Vec<f64> = self.edge_var.iter().map(|&v| self.prior_llr[v]).collect();
        let mut c2v = vec![0.0f64; edges];
        let mut posterior = self.prior_llr.clone();
        let mut decision = BitVec::zeros(self.cols);
        let mut tanh_buf = Vec::new();
        for iter in 1..=max_iter.max(1) {
            let mut change = 0.0f64;
            match schedule {
                BpSchedule::Flooding => {
                    for c in 0..self.rows {
                        self.check_update(c, syndrome.get(c), &v2c, &mut c2v, &mut tanh_buf);
                    }
                    for v in 0..self.cols {
                        let updated = self.prior_llr[v] + self.var_edges[v].iter().map(|&e| c2v[e]).sum::<f64>();
                        change = change.max((updated - posterior[v]).abs());
                        posterior[v] = updated;
                        for &e in &self.var_edges[v] {
                            v2c[e] = posterior[v] - c2v[e];
                        }
                    }
                }
                BpSchedule::Serial => {
                    for c in 0..self.rows {
                        let range = self.check_start[c]..self.check_start[c + 1];
                        for e in range.clone() {
                            v2c[e] = posterior[self.edge_var[e]] - c2v[e];
                        }
                        self.check_update(c, syndrome.get(c), &v2c, &mut c2v, &mut tanh_buf);
                        for e in range {
                            let v = self.edge_var[e];
                            let updated = v2c[e] + c2v[e];
                            change = change.max((updated - posterior[v]).abs());
                            posterior[v] = updated;
                        }
                    }
                }
            }
            for (v, &llr) in posterior.iter().enumerate() {
                decision.set(v, llr < 0.0);
            }
            if self.satisfies(&decision, syndrome) {
                return Ok(BpResult {
                    posterior_llr: posterior,
                    decision,
                    converged: true,
                    iterations: iter,
                });
            }
            if change < FIXED_POINT_TOL {
                // further iterations would reproduce the same beliefs
                return Ok(BpResult {
                    posterior_llr: posterior,
                    decision,
                    converged: false,
                    iterations: iter,
                });
            }
        }
        Ok(BpResult {
            posterior_llr: posterior,
            decision,
            converged: false,
            iterations: max_iter.max(1),
        })
    }

    fn check_update(&self, c: usize, flipped: bool, v2c: &[f64], c2v: &mut [f64], buf: &mut Vec<f64>) {
        let (a, b) = (self.check_start[c], self.check_start[c + 1]);
        if a == b {
            return;
        }
        buf.clear();
        buf.extend(v2c[a..b].iter().map(|&m| (m / 2.0).tanh()));
        // exclusive products by prefix and suffix passes
        let sign = if flipped { -1.0 } else { 1.0 };
        let mut prefix = sign;
        for (k, e) in (a..b).enumerate() {
            c2v[e] = prefix;
            prefix *= buf[k];
        }
        let mut suffix = 1.0;
        for (k, e) in (a..b).enumerate().rev() {
            let prod = (c2v[e] * suffix).clamp(-1.0, 1.0);
            c2v[e] = (2.0 * prod.atanh()).clamp(-LLR_CLAMP, LLR_CLAMP);
            suffix *= buf[k];
        }
    }

    fn satisfies(&self, decision: &BitVec, syndrome: &BitVec) -> bool {
        (0..self.rows).all(|c| {
            let parity = self.edge_var[self.check_start[c]..self.check_start[c + 1]]
                .iter()
                .filter(|&&v| decision.get(v))
                .count()
                % 2
                == 1;
            parity == syndrome.get(c)
        })
    }
}
