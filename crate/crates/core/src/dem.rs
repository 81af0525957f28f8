//! Detector error models: independent fault mechanisms and their symptoms.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::DemError;
use crate::noise::{NoisyCircuit, Pauli, Timing};
use crate::sim::{measurement_offsets, Frame, Symptom};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mechanism {
    pub p: f64,
    /// `ln((1 - p) / p)`.
    pub llr: f64,
    pub detectors: Vec<usize>,
    pub observables: Vec<usize>,
}

impl Mechanism {
    pub fn new(p: f64, detectors: Vec<usize>, observables: Vec<usize>) -> Mechanism {
        Mechanism {
            p,
            llr: ((1.0 - p) / p).ln(),
            detectors,
            observables,
        }
    }

    pub fn symptom(&self) -> Symptom {
        Symptom {
            detectors: self.detectors.clone(),
            observables: self.observables.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorErrorModel {
    pub detector_count: usize,
    pub observable_count: usize,
    /// Sorted by `(detectors, observables)`.
    pub mechanisms: Vec<Mechanism>,
    pub detector_rounds: Vec<usize>,
}

/// One Pauli component of one fault site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultRef {
    pub site: usize,
    pub component: usize,
}

/// A model together with the elementary faults merged into each mechanism.
#[derive(Clone, Debug, PartialEq)]
pub struct DemBuild {
    pub dem: DetectorErrorModel,
    pub sources: Vec<Vec<FaultRef>>,
}

/// Independent combination: probability that exactly one of the two fires.
pub fn combine(pa: f64, pb: f64) -> f64 {
    pa * (1.0 - pb) + pb * (1.0 - pa)
}

pub fn build_dem(noisy: &NoisyCircuit) -> Result<DetectorErrorModel, DemError> {
    build_dem_with_sources(noisy).map(|b| b.dem)
}

/// Propagates every elementary fault (64 per frame pass) and merges equal symptoms.
pub fn build_dem_with_sources(noisy: &NoisyCircuit) -> Result<DemBuild, DemError> {
    struct Elementary {
        fault: FaultRef,
        op: usize,
        timing: Timing,
        p: f64,
        paulis: Vec<Pauli>,
    }
    let mut faults = Vec::new();
    for (i, site) in noisy.sites.iter().enumerate() {
        let p = site.channel.probability();
        if p >= 0.5 {
            return Err(DemError::Probability(p));
        }
        for (c, (paulis, q)) in site.channel.components().into_iter().enumerate() {
            faults.push(Elementary {
                fault: FaultRef { site: i, component: c },
                op: site.op,
                timing: site.timing,
                p: q,
                paulis,
            });
        }
    }
    faults.sort_by_key(|e| (e.op, e.timing));
    let circuit = &noisy.circuit;
    let offsets = measurement_offsets(circuit);
    let dets: Vec<Vec<usize>> = circuit.detectors.iter().map(|d| d.measurements.clone()).collect();
    let mut merged: BTreeMap<Symptom, (f64, Vec<FaultRef>)> = BTreeMap::new();
    for batch in faults.chunks(64) {
        let start = batch[0].op;
        let mut frame = Frame::new(circuit);
        let mut next = 0;
        frame.run(circuit, start, offsets[start], |op, timing, f| {
            while next < batch.len() && batch[next].op == op && batch[next].timing == timing {
                let e = &batch[next];
                for (&q, &pauli) in noisy.sites[e.fault.site].qubits.iter().zip(&e.paulis) {
                    f.apply_pauli(q, pauli, 1 << next);
                }
                next += 1;
            }
        });
        let dw = frame.parity_words(&dets);
        let ow = frame.parity_words(&circuit.observables);
        let mut symptoms = vec![Symptom::default(); batch.len()];
        for (words, is_det) in [(&dw, true), (&ow, false)] {
            for (idx, &w) in words.iter().enumerate() {
                let mut bits = w;
                while bits != 0 {
                    let lane = bits.trailing_zeros() as usize;
                    let s = &mut symptoms[lane];
                    if is_det {
                        s.detectors.push(idx);
                    } else {
                        s.observables.push(idx);
                    }
                    bits &= bits - 1;
                }
            }
        }
        for (e, s) in batch.iter().zip(symptoms) {
            if s.is_empty() {
                continue;
            }
            let entry = merged.entry(s).or_insert((0.0, Vec::new()));
            entry.0 = combine(entry.0, e.p);
            entry.1.push(e.fault);
        }
    }
    let (mechanisms, sources) = merged
        .into_iter()
        .map(|(s, (p, src))| (Mechanism::new(p, s.detectors, s.observables), src))
        .unzip();
    Ok(DemBuild {
        dem: DetectorErrorModel {
            detector_count: circuit.detectors.len(),
            observable_count: circuit.observables.len(),
            mechanisms,
            detector_rounds: circuit.detectors.iter().map(|d| d.round).collect(),
        },
        sources,
    })
}

/// A contiguous range of detector layers cut out of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct DemWindow {
    pub offset: usize,
    pub w: usize,
    /// Global indices of the window's detectors, ascending.
    pub detectors: Vec<usize>,
    /// Global indices of the mechanisms assigned to the window.
    pub mechanisms: Vec<usize>,
    /// Local model; detector `i` is global `detectors[i]`.
    pub model: DetectorErrorModel,
}

impl DetectorErrorModel {
    /// Number of detector layers (highest round + 1).
    pub fn layer_count(&self) -> usize {
        self.detector_rounds.iter().max().map_or(0, |r| r + 1)
    }

    /// Earliest layer touched by a mechanism; `None` for undetectable ones.
    pub fn first_round(&self, mechanism: usize) -> Option<usize> {
        self.mechanisms[mechanism]
            .detectors
            .iter()
            .map(|&d| self.detector_rounds[d])
            .min()
    }

    /// Probability that each detector fires under the model.
    pub fn detector_marginals(&self) -> Vec<f64> {
        let mut prod = vec![1.0f64; self.detector_count];
        for m in &self.mechanisms {
            for &d in &m.detectors {
                prod[d] *= 1.0 - 2.0 * m.p;
            }
        }
        prod.into_iter().map(|x| (1.0 - x) / 2.0).collect()
    }

    /// Sub-model on the detectors `keep` (ascending, renumbered from 0).
    /// Mechanisms that become identical are merged; ones left without any
    /// detector or observable are dropped.
    pub fn restrict(&self, keep: &[usize]) -> DetectorErrorModel {
        let mut local = vec![usize::MAX; self.detector_count];
        for (i, &d) in keep.iter().enumerate() {
            local[d] = i;
        }
        let mut merged: BTreeMap<Symptom, f64> = BTreeMap::new();
        for m in &self.mechanisms {
            let s = Symptom {
                detectors: m.detectors.iter().filter(|&&d| local[d] != usize::MAX).map(|&d| local[d]).collect(),
                observables: m.observables.clone(),
            };
            if !s.is_empty() {
                let p = merged.entry(s).or_insert(0.0);
                *p = combine(*p, m.p);
            }
        }
        DetectorErrorModel {
            detector_count: keep.len(),
            observable_count: self.observable_count,
            mechanisms: merged
                .into_iter()
                .map(|(s, p)| Mechanism::new(p, s.detectors, s.observables))
                .collect(),
            detector_rounds: keep.iter().map(|&d| self.detector_rounds[d]).collect(),
        }
    }

    /// Mechanisms whose first layer lies in `[offset, offset + w)`, with
    /// detectors past the window masked out.
    pub fn window(&self, w: usize, offset: usize) -> Result<DemWindow, DemError> {
        if w == 0 {
            return Err(DemError::EmptyWindow);
        }
        let layers = self.layer_count();
        let end = offset + w;
        if end > layers {
            return Err(DemError::WindowRange { offset, end, layers });
        }
        let inside = |d: usize| (offset..end).contains(&self.detector_rounds[d]);
        let detectors: Vec<usize> = (0..self.detector_count).filter(|&d| inside(d)).collect();
        let mut local = vec![usize::MAX; self.detector_count];
        for (i, &d) in detectors.iter().enumerate() {
            local[d] = i;
        }
        let mut mechanisms = Vec::new();
        let mut local_mechs = Vec::new();
        for (i, m) in self.mechanisms.iter().enumerate() {
            if self.first_round(i).is_some_and(|r| (offset..end).contains(&r)) {
                mechanisms.push(i);
                local_mechs.push(Mechanism {
                    p: m.p,
                    llr: m.llr,
                    detectors: m.detectors.iter().filter(|&&d| inside(d)).map(|&d| local[d]).collect(),
                    observables: m.observables.clone(),
                });
            }
        }
        Ok(DemWindow {
            offset,
            w,
            model: DetectorErrorModel {
                detector_count: detectors.len(),
                observable_count: self.observable_count,
                mechanisms: local_mechs,
                detector_rounds: detectors.iter().map(|&d| self.detector_rounds[d]).collect(),
            },
            detectors,
            mechanisms,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dem {} {}", self.detector_count, self.observable_count);
        for (d, r) in self.detector_rounds.iter().enumerate() {
            let _ = writeln!(s, "round D{d} {r}");
        }
        for m in &self.mechanisms {
            let _ = write!(s, "error {:e}", m.p);
            for d in &m.detectors {
                let _ = write!(s, " D{d}");
            }
            for o in &m.observables {
                let _ = write!(s, " L{o}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<DetectorErrorModel, DemError> {
        let err = |line: usize, msg: &str| DemError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let index = |tok: &str, prefix: char, bound: usize, line: usize| -> Result<usize, DemError> {
            let i: usize = tok
                .strip_prefix(prefix)
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(line, &format!("bad token {tok:?}")))?;
            if i >= bound {
                return Err(err(line, &format!("{tok} out of range")));
            }
            Ok(i)
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let (dc, oc) = match h[..] {
            ["dem", d, o] => (
                d.parse().map_err(|_| err(0, "bad detector count"))?,
                o.parse().map_err(|_| err(0, "bad observable count"))?,
            ),
            _ => return Err(err(0, "expected `dem <detectors> <observables>`")),
        };
        let mut rounds = vec![None; dc];
        let mut mechanisms = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "round" if toks.len() == 3 => {
                    let d = index(toks[1], 'D', dc, i)?;
                    rounds[d] = Some(toks[2].parse().map_err(|_| err(i, "bad round"))?);
                }
                "error" if toks.len() >= 2 => {
                    let p: f64 = toks[1].parse().map_err(|_| err(i, "bad probability"))?;
                    if !(p > 0.0 && p < 1.0) {
                        return Err(err(i, "probability outside (0, 1)"));
                    }
                    let mut dets = Vec::new();
                    let mut obs = Vec::new();
                    for t in &toks[2..] {
                        if t.starts_with('D') {
                            dets.push(index(t, 'D', dc, i)?);
                        } else {
                            obs.push(index(t, 'L', oc, i)?);
                        }
                    }
                    for v in [&mut dets, &mut obs] {
                        let n = v.len();
                        v.sort_unstable();
                        v.dedup();
                        if v.len() != n {
                            return Err(err(i, "repeated index"));
                        }
                    }
                    if !seen.insert((dets.clone(), obs.clone())) {
                        return Err(err(i, "duplicate mechanism"));
                    }
                    mechanisms.push(Mechanism::new(p, dets, obs));
                }
                _ => return Err(err(i, "unrecognized line")),
            }
        }
        let detector_rounds = rounds
            .into_iter()
            .enumerate()
            .map(|(d, r)| r.ok_or_else(|| err(0, &format!("no round for D{d}"))))
            .collect::<Result<_, _>>()?;
        Ok(DetectorErrorModel {
            detector_count: dc,
            observable_count: oc,
            mechanisms,
            detector_rounds,
        })
    }
}
