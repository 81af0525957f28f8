//! Metasyndrome checks on reconstructed per-round syndromes.
//!
//! Same-basis syndromes are rebuilt as running sums of detector layers.
//! Opposite-basis syndromes are random after the first round, so only their
//! change since round 0 is checked.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::codes::{metacheck_code_distance, Basis, CssCode};
use crate::error::{CodeError, DecodeError, Error};
use crate::f2::{BitVec, F2Matrix};

use super::{BpConfig, BpOsdDecoder, SparsePcm};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostselectPolicy {
    #[default]
    Off,
    Discard,
    Repair,
}

impl std::str::FromStr for PostselectPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(PostselectPolicy::Off),
            "discard" => Ok(PostselectPolicy::Discard),
            "repair" => Ok(PostselectPolicy::Repair),
            _ => Err(format!("unknown postselect policy {s:?}")),
        }
    }
}

pub fn metasyndrome(m: &F2Matrix, s: &BitVec) -> Result<BitVec, DecodeError> {
    if m.cols() != s.len() {
        return Err(DecodeError::Dimension {
            expected: m.cols(),
            found: s.len(),
        });
    }
    Ok(m.mul_vec(s))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostselectOutcome {
    pub keep: bool,
    /// Detectors after repair (unchanged otherwise).
    pub detectors: BitVec,
    /// Syndrome bits flipped by repair, as `(round, basis, check)`.
    pub repaired: Vec<(usize, Basis, usize)>,
}

struct Side {
    basis: Basis,
    same_basis: bool,
    meta: F2Matrix,
    repair: Option<BpOsdDecoder>,
}

pub struct Postselector {
    policy: PostselectPolicy,
    rounds: usize,
    sides: Vec<Side>,
    index: HashMap<(usize, Basis, usize), usize>,
    warning: Option<String>,
}

/// Prior flip probability for syndrome bits when repairing.
const REPAIR_PRIOR: f64 = 0.01;

impl Postselector {
    pub fn new(code: &CssCode, circuit: &Circuit, policy: PostselectPolicy, cfg: BpConfig) -> Result<Postselector, Error> {
        let layout = circuit
            .layout
            .ok_or_else(|| Error::Config("postselection needs a memory circuit".into()))?;
        let mut sides = Vec::new();
        let mut warning = None;
        if policy != PostselectPolicy::Off {
            for basis in [layout.basis, layout.basis.opposite()] {
                let Some(meta) = code.metachecks(basis) else {
                    continue;
                };
                let repair = if policy == PostselectPolicy::Repair {
                    let d = metacheck_code_distance(code, basis)?;
                    if d.exact().unwrap_or(usize::MAX) < 3 {
                        let msg = format!(
                            "{basis} metacheck code has distance {d}: syndrome errors are only detected, repair is ambiguous"
                        );
                        log::warn!("{msg}");
                        warning = Some(msg);
                    }
                    let pcm = SparsePcm::from_dense(meta);
                    let priors = vec![REPAIR_PRIOR; pcm.cols];
                    Some(BpOsdDecoder::new(pcm, &priors, cfg)?)
                } else {
                    None
                };
                sides.push(Side {
                    basis,
                    same_basis: basis == layout.basis,
                    meta: meta.clone(),
                    repair,
                });
            }
            if sides.is_empty() {
                return Err(CodeError::NoMetachecks("either").into());
            }
        }
        let index = circuit
            .detectors
            .iter()
            .enumerate()
            .map(|(i, d)| ((d.round, d.basis, d.check), i))
            .collect();
        Ok(Postselector {
            policy,
            rounds: layout.rounds,
            sides,
            index,
            warning,
        })
    }

    pub fn policy(&self) -> PostselectPolicy {
        self.policy
    }

    /// Set when repair was requested on a metacheck code of distance < 3.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Rounds whose (reconstructed) syndrome is checked, per side.
    fn checked_rounds(&self, side: &Side) -> std::ops::Range<usize> {
        if side.same_basis {
            0..self.rounds
        } else {
            1..self.rounds
        }
    }

    /// Syndrome for `side` at `round`: running sum of detector layers.
    fn syndrome(&self, side: &Side, detectors: &BitVec, round: usize) -> BitVec {
        let checks = side.meta.cols();
        let first = if side.same_basis { 0 } else { 1 };
        let mut s = BitVec::zeros(checks);
        for t in first..=round {
            for j in 0..checks {
                if let Some(&d) = self.index.get(&(t, side.basis, j)) {
                    if detectors.get(d) {
                        s.flip(j);
                    }
                }
            }
        }
        s
    }

    pub fn apply(&self, detectors: &BitVec) -> Result<PostselectOutcome, DecodeError> {
        let mut out = PostselectOutcome {
            keep: true,
            detectors: detectors.clone(),
            repaired: Vec::new(),
        };
        for side in &self.sides {
            for t in self.checked_rounds(side) {
                let s = self.syndrome(side, &out.detectors, t);
                let ms = metasyndrome(&side.meta, &s)?;
                if ms.is_zero() {
                    continue;
                }
                match &side.repair {
                    None => {
                        out.keep = false;
                        return Ok(out);
                    }
                    Some(dec) => {
                        let flips = dec.decode(&ms)?.correction;
                        for j in flips.ones() {
                            // changes the syndrome of round t only
                            for round in [t, t + 1] {
                                if let Some(&d) = self.index.get(&(round, side.basis, j)) {
                                    out.detectors.flip(d);
                                }
                            }
                            out.repaired.push((t, side.basis, j));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{memory_circuit, Schedule};
    use crate::codes::{surface_code, SurfaceCodeSpec};
    use rand::{Rng, SeedableRng};

    #[test]
    fn valid_syndromes_have_zero_metasyndrome() {
        let code = surface_code(SurfaceCodeSpec::new(4, 2)).unwrap();
        let mx = code.mx.as_ref().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let e = BitVec::from_bools(&(0..code.n).map(|_| rng.gen_bool(0.3)).collect::<Vec<_>>());
            let s = code.hx.mul_vec(&e);
            assert!(metasyndrome(mx, &s).unwrap().is_zero());
        }
        let one = BitVec::from_indices(code.hx.rows(), [5]);
        let col = mx.col_vectors()[5].clone();
        assert_eq!(metasyndrome(mx, &one).unwrap(), col);
        assert!(metasyndrome(mx, &BitVec::zeros(3)).is_err());
    }

    #[test]
    fn invalid_fraction_is_fifteen_sixteenths() {
        let code = surface_code(SurfaceCodeSpec::new(4, 2)).unwrap();
        let mx = code.mx.as_ref().unwrap();
        assert_eq!(mx.rank(), 4);
        let m = mx.cols();
        let zero = (0u32..1 << m)
            .filter(|&bits| {
                let s = BitVec::from_indices(m, (0..m).filter(|i| bits >> i & 1 == 1));
                metasyndrome(mx, &s).unwrap().is_zero()
            })
            .count();
        assert_eq!(zero * 16, 1 << m);
    }

    #[test]
    fn single_flip_is_discarded() {
        let code = surface_code(SurfaceCodeSpec::new(4, 2)).unwrap();
        let circ = memory_circuit(&code, Basis::Z, 2, &Schedule::standard(&code)).unwrap();
        let ps = Postselector::new(&code, &circ, PostselectPolicy::Discard, BpConfig::default()).unwrap();
        let clean = BitVec::zeros(circ.detectors.len());
        assert!(ps.apply(&clean).unwrap().keep);
        for (i, d) in circ.detectors.iter().enumerate() {
            if d.final_layer {
                continue;
            }
            let flipped = BitVec::from_indices(clean.len(), [i]);
            assert!(!ps.apply(&flipped).unwrap().keep, "detector {i} {d:?}");
        }
    }

    #[test]
    fn repair_restores_uniquely_explained_flips() {
        let code = surface_code(SurfaceCodeSpec::new(3, 3)).unwrap();
        let circ = memory_circuit(&code, Basis::Z, 1, &Schedule::standard(&code)).unwrap();
        let ps = Postselector::new(&code, &circ, PostselectPolicy::Repair, BpConfig::default()).unwrap();
        // open boundaries leave repeated metacheck columns
        assert!(ps.warning().is_some());
        let mz = code.mz.as_ref().unwrap();
        let cols = mz.col_vectors();
        let clean = BitVec::zeros(circ.detectors.len());
        let mut unique = 0;
        for j in 0..code.hz.rows() {
            let dets: Vec<usize> = circ
                .detectors
                .iter()
                .enumerate()
                .filter(|(_, d)| d.basis == Basis::Z && d.check == j)
                .map(|(i, _)| i)
                .collect();
            assert_eq!(dets.len(), 2);
            let out = ps.apply(&BitVec::from_indices(clean.len(), dets)).unwrap();
            assert!(out.keep);
            assert!(metasyndrome(mz, &ps.syndrome(&ps.sides[0], &out.detectors, 0)).unwrap().is_zero());
            if cols.iter().filter(|c| **c == cols[j]).count() == 1 {
                assert_eq!(out.detectors, clean, "check {j}");
                unique += 1;
            }
        }
        assert!(unique > 0);
    }
}
