//! (w, c) overlapping-window decoding over detector layers.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dem::{DemWindow, DetectorErrorModel};
use crate::error::{DecodeError, Error};
use crate::f2::BitVec;

use super::{BpConfig, BpOsdDecoder};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub w: usize,
    pub c: usize,
    /// Decode the final data-measurement layer together with the last window
    /// instead of as a window of its own.
    #[serde(default = "default_true")]
    pub append_final_layer: bool,
}

fn default_true() -> bool {
    true
}

impl WindowConfig {
    pub fn new(w: usize, c: usize) -> WindowConfig {
        WindowConfig {
            w,
            c,
            append_final_layer: true,
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.c == 0 || self.c > self.w {
            return Err(DecodeError::Config(format!(
                "window ({}, {}) needs 1 <= c <= w",
                self.w, self.c
            )));
        }
        Ok(())
    }

    /// `(start, end, commit_end)` layer ranges for a model with `layers` layers.
    pub fn plan(&self, layers: usize) -> Vec<(usize, usize, usize)> {
        if layers == 0 {
            return Vec::new();
        }
        let rounds = if self.append_final_layer { layers - 1 } else { layers };
        let mut out = Vec::new();
        let mut t = 0;
        loop {
            let end = t + self.w;
            if end >= rounds {
                out.push((t, layers, layers));
                return out;
            }
            out.push((t, end, t + self.c));
            t += self.c;
        }
    }
}

impl std::str::FromStr for WindowConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (w, c) = s.split_once(',').ok_or("expected `w,c`")?;
        let cfg = WindowConfig::new(
            w.trim().parse().map_err(|_| "bad window size")?,
            c.trim().parse().map_err(|_| "bad commit size")?,
        );
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub predicted: BitVec,
    /// Committed mechanism indices (global), ascending.
    pub committed: Vec<usize>,
    /// Every window's BP run converged without OSD.
    pub converged: bool,
    /// Some window's syndrome had no solution.
    pub failed: bool,
    pub postselected_out: bool,
}

struct Plan {
    window: DemWindow,
    commit_end: usize,
    decoder: BpOsdDecoder,
}

#[derive(Clone, Debug)]
struct WindowResult {
    committed: Vec<usize>,
    converged: bool,
    failed: bool,
}

/// Per-window memo of decoded syndromes. Decoding is deterministic, so a
/// cache hit returns exactly what a fresh decode would.
#[derive(Debug, Default)]
pub struct DecodeCache {
    maps: Vec<HashMap<Vec<u64>, Arc<WindowResult>>>,
    limit: usize,
}

impl DecodeCache {
    pub fn new(limit: usize) -> DecodeCache {
        DecodeCache {
            maps: Vec::new(),
            limit,
        }
    }
}

pub struct WindowDecoder {
    dem: DetectorErrorModel,
    plans: Vec<Plan>,
}

impl WindowDecoder {
    pub fn new(dem: &DetectorErrorModel, wcfg: WindowConfig, cfg: BpConfig) -> Result<WindowDecoder, Error> {
        wcfg.validate()?;
        let mut plans = Vec::new();
        for (start, end, commit_end) in wcfg.plan(dem.layer_count()) {
            let window = dem.window(end - start, start)?;
            let decoder = BpOsdDecoder::from_dem(&window.model, cfg)?;
            plans.push(Plan {
                window,
                commit_end,
                decoder,
            });
        }
        Ok(WindowDecoder {
            dem: dem.clone(),
            plans,
        })
    }

    pub fn dem(&self) -> &DetectorErrorModel {
        &self.dem
    }

    pub fn window_count(&self) -> usize {
        self.plans.len()
    }

    pub fn decode(&self, detectors: &BitVec, mut cache: Option<&mut DecodeCache>) -> Result<DecodeOutcome, DecodeError> {
        if detectors.len() != self.dem.detector_count {
            return Err(DecodeError::Dimension {
                expected: self.dem.detector_count,
                found: detectors.len(),
            });
        }
        let mut stream = detectors.clone();
        let mut predicted = BitVec::zeros(self.dem.observable_count);
        let mut committed = Vec::new();
        let mut converged = true;
        let mut failed = false;
        for (i, plan) in self.plans.iter().enumerate() {
            let local = BitVec::from_indices(
                plan.window.detectors.len(),
                plan.window.detectors.iter().enumerate().filter(|(_, &d)| stream.get(d)).map(|(k, _)| k),
            );
            if local.is_zero() {
                continue;
            }
            let result = match cache.as_deref_mut() {
                Some(c) => {
                    if c.maps.len() < self.plans.len() {
                        c.maps.resize_with(self.plans.len(), HashMap::new);
                    }
                    if let Some(hit) = c.maps[i].get(local.words()) {
                        hit.clone()
                    } else {
                        let r = Arc::new(self.decode_window(plan, &local)?);
                        if c.maps[i].len() >= c.limit {
                            c.maps[i].clear();
                        }
                        c.maps[i].insert(local.words().to_vec(), r.clone());
                        r
                    }
                }
                None => Arc::new(self.decode_window(plan, &local)?),
            };
            converged &= result.converged;
            failed |= result.failed;
            for &g in &result.committed {
                let m = &self.dem.mechanisms[g];
                for &d in &m.detectors {
                    stream.flip(d);
                }
                for &o in &m.observables {
                    predicted.flip(o);
                }
            }
            committed.extend_from_slice(&result.committed);
        }
        committed.sort_unstable();
        Ok(DecodeOutcome {
            predicted,
            committed,
            converged,
            failed,
            postselected_out: false,
        })
    }

    fn decode_window(&self, plan: &Plan, local: &BitVec) -> Result<WindowResult, DecodeError> {
        match plan.decoder.decode(local) {
            Ok(d) => Ok(WindowResult {
                committed: d
                    .correction
                    .ones()
                    .map(|k| plan.window.mechanisms[k])
                    .filter(|&g| self.dem.first_round(g).is_some_and(|r| r < plan.commit_end))
                    .collect(),
                converged: d.converged,
                failed: false,
            }),
            Err(DecodeError::Inconsistent) => Ok(WindowResult {
                committed: Vec::new(),
                converged: false,
                failed: true,
            }),
            Err(e) => Err(e),
        }
    }
}
