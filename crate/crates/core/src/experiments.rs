//! Memory experiments end to end: sample, decode, count, fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{memory_circuit, Schedule};
use crate::codes::{surface_code, Basis, CssCode, SurfaceCodeSpec};
use crate::decoder::{BpConfig, DecodeCache, PostselectPolicy, Postselector, WindowConfig, WindowDecoder};
use crate::dem::{build_dem, DetectorErrorModel};
use crate::error::{Error, Result};
use crate::f2::BitVec;
use crate::noise::{attach_noise, NoiseModel, NoisyCircuit};
use crate::sim::sample;

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub code: SurfaceCodeSpec,
    pub basis: Basis,
    /// Cycle counts to run.
    pub rounds: Vec<usize>,
    /// Extraction rounds per cycle (a cycle of the fault-tolerant 2D protocol is several rounds).
    #[serde(default = "one")]
    pub rounds_per_cycle: usize,
    pub shots: usize,
    #[serde(default)]
    pub noise: NoiseModel,
    pub window: WindowConfig,
    #[serde(default)]
    pub decoder: BpConfig,
    #[serde(default)]
    pub postselect: PostselectPolicy,
    /// Decode only the memory-basis detectors; the other basis only feeds postselection.
    #[serde(default = "yes")]
    pub memory_basis_only: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(code: SurfaceCodeSpec, rounds: Vec<usize>, shots: usize, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            code,
            basis: Basis::Z,
            rounds,
            rounds_per_cycle: 1,
            shots,
            noise: NoiseModel::default(),
            window: WindowConfig::new(1, 1),
            decoder: BpConfig::default(),
            postselect: PostselectPolicy::Off,
            memory_basis_only: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.rounds_per_cycle == 0 {
            return Err(Error::Config("rounds_per_cycle must be at least 1".into()));
        }
        self.noise.validate()?;
        self.window.validate()?;
        self.decoder.validate()?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryPoint {
    /// Cycles.
    pub r: usize,
    pub shots: usize,
    pub kept: usize,
    pub failures: usize,
    pub p_log: Option<f64>,
    pub sigma: Option<f64>,
    /// Failures over all shots decoded without postselection or repair.
    pub raw_failures: usize,
    pub raw_p_log: f64,
    pub raw_sigma: f64,
    /// Shots whose decode needed OSD in some window.
    pub osd_shots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub n: usize,
    pub k: usize,
    pub cnots_per_cycle: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub points: Vec<MemoryPoint>,
    pub fit: Option<DecayFit>,
    pub raw_fit: Option<DecayFit>,
    pub metadata: ReportMetadata,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,shots,kept,failures,p_log,sigma\n");
        for p in &self.points {
            let f = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.r,
                p.shots,
                p.kept,
                p.failures,
                f(p.p_log),
                f(p.sigma)
            ));
        }
        s
    }
}

/// Binomial estimate `(failures / kept, sqrt(p (1 - p) / kept))`.
pub fn logical_error_stats(failures: usize, kept: usize) -> Result<(f64, f64)> {
    if kept == 0 || failures > kept {
        return Err(Error::Config(format!("need 0 <= failures ({failures}) <= kept ({kept}), kept >= 1")));
    }
    let p = failures as f64 / kept as f64;
    Ok((p, (p * (1.0 - p) / kept as f64).sqrt()))
}

/// `0.5 - (0.5 - p_spam) (1 - 2 p_cycle)^r`.
pub fn decay_model(p_spam: f64, p_cycle: f64, r: f64) -> f64 {
    0.5 - (0.5 - p_spam) * (1.0 - 2.0 * p_cycle).powf(r)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub r: f64,
    pub p_log: f64,
    pub sigma: f64,
}

impl DecayPoint {
    /// Point from counts. A zero-failure point gets the uncertainty of
    /// `(f + 1) / (N + 2)` so that it still carries weight in the fit.
    pub fn from_counts(r: usize, failures: usize, kept: usize) -> Result<DecayPoint> {
        let (p_log, sigma) = logical_error_stats(failures, kept)?;
        let sigma = if failures == 0 {
            let q = 1.0 / (kept as f64 + 2.0);
            (q * (1.0 - q) / kept as f64).sqrt()
        } else {
            sigma
        };
        Ok(DecayPoint {
            r: r as f64,
            p_log,
            sigma,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub p_spam: f64,
    pub p_cycle: f64,
    pub sigma_p_spam: f64,
    pub sigma_p_cycle: f64,
    /// Covariance of `(p_spam, p_cycle)`.
    pub covariance: [[f64; 2]; 2],
    pub chi2: f64,
    pub used: usize,
    /// Indices of input points left out, with the reason.
    pub excluded: Vec<(usize, String)>,
}

/// Weighted least squares of `ln(0.5 - p_log)` against `r`.
pub fn fit_decay(points: &[DecayPoint]) -> Result<DecayFit> {
    let mut excluded = Vec::new();
    let mut rows = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !(p.p_log < 0.5) {
            log::warn!("fit: point {i} excluded, p_log = {} >= 0.5", p.p_log);
            excluded.push((i, "p_log >= 0.5".to_string()));
        } else if !(p.sigma > 0.0) {
            log::warn!("fit: point {i} excluded, zero uncertainty");
            excluded.push((i, "zero sigma".to_string()));
        } else {
            let gap = 0.5 - p.p_log;
            let sy = p.sigma / gap;
            rows.push((p.r, gap.ln(), 1.0 / (sy * sy)));
        }
    }
    let distinct = {
        let mut rs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        rs.sort_by(f64::total_cmp);
        rs.dedup();
        rs.len()
    };
    if distinct < 2 {
        return Err(Error::Fit(format!("{} usable points at {distinct} distinct r", rows.len())));
    }
    let (mut s, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in &rows {
        s += w;
        sx += w * x;
        sxx += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    let a = (sxx * sy - sx * sxy) / det;
    let b = (s * sxy - sx * sy) / det;
    // covariance of (a, b) = inverse normal matrix
    let (vaa, vbb, vab) = (sxx / det, s / det, -sx / det);
    let chi2 = rows.iter().map(|&(x, y, w)| w * (y - a - b * x).powi(2)).sum();
    let (ja, jb) = (-a.exp(), -b.exp() / 2.0);
    let covariance = [[ja * ja * vaa, ja * jb * vab], [ja * jb * vab, jb * jb * vbb]];
    Ok(DecayFit {
        p_spam: 0.5 - a.exp(),
        p_cycle: (1.0 - b.exp()) / 2.0,
        sigma_p_spam: covariance[0][0].sqrt(),
        sigma_p_cycle: covariance[1][1].sqrt(),
        covariance,
        chi2,
        used: rows.len(),
        excluded,
    })
}

/// Everything needed to run and decode one memory circuit.
pub struct MemoryPipeline {
    pub noisy: NoisyCircuit,
    pub dem: DetectorErrorModel,
    /// Detectors fed to the decoder (into the circuit's detector list).
    pub decoded_detectors: Vec<usize>,
    pub decoder: WindowDecoder,
    pub postselector: Postselector,
}

impl MemoryPipeline {
    pub fn new(code: &CssCode, cfg: &ExperimentConfig, cycles: usize) -> Result<MemoryPipeline> {
        let rounds = cycles * cfg.rounds_per_cycle;
        let circuit = memory_circuit(code, cfg.basis, rounds, &Schedule::standard(code))?;
        let noisy = attach_noise(&circuit, &cfg.noise)?;
        let full = build_dem(&noisy)?;
        let decoded_detectors: Vec<usize> = (0..circuit.detectors.len())
            .filter(|&i| !cfg.memory_basis_only || circuit.detectors[i].basis == cfg.basis)
            .collect();
        let dem = if cfg.memory_basis_only {
            full.restrict(&decoded_detectors)
        } else {
            full
        };
        let decoder = WindowDecoder::new(&dem, cfg.window, cfg.decoder)?;
        let postselector = Postselector::new(code, &circuit, cfg.postselect, cfg.decoder)?;
        Ok(MemoryPipeline {
            noisy,
            dem,
            decoded_detectors,
            decoder,
            postselector,
        })
    }

    fn select(&self, detectors: &BitVec) -> BitVec {
        BitVec::from_indices(
            self.decoded_detectors.len(),
            self.decoded_detectors
                .iter()
                .enumerate()
                .filter(|(_, &d)| detectors.get(d))
                .map(|(i, _)| i),
        )
    }

    /// Decodes one shot: `(kept, failed_after_policy, failed_raw, used_osd)`.
    pub fn decode_shot(
        &self,
        detectors: &BitVec,
        observables: &BitVec,
        cache: &mut DecodeCache,
    ) -> Result<(bool, bool, bool, bool)> {
        let raw = self.decoder.decode(&self.select(detectors), Some(cache))?;
        let raw_fail = raw.failed || raw.predicted != *observables;
        let mut osd = !raw.converged;
        let (kept, fail) = match self.postselector.policy() {
            PostselectPolicy::Off => (true, raw_fail),
            PostselectPolicy::Discard => {
                let keep = self.postselector.apply(detectors)?.keep;
                (keep, raw_fail)
            }
            PostselectPolicy::Repair => {
                let rep = self.postselector.apply(detectors)?;
                if rep.repaired.is_empty() {
                    (true, raw_fail)
                } else {
                    let out = self.decoder.decode(&self.select(&rep.detectors), Some(cache))?;
                    osd |= !out.converged;
                    (true, out.failed || out.predicted != *observables)
                }
            }
        };
        Ok((kept, fail, raw_fail, osd))
    }
}

/// Derives independent per-point seeds.
fn point_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const CHUNK: usize = 1024;

pub fn run_memory(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let code = surface_code(cfg.code)?;
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    let mut cnots_per_cycle = 0;
    for &r in &cfg.rounds {
        let pipe = MemoryPipeline::new(&code, cfg, r)?;
        if let Some(w) = pipe.postselector.warning() {
            if !warnings.iter().any(|x| x == w) {
                warnings.push(w.to_string());
            }
        }
        if r > 0 {
            cnots_per_cycle = pipe.noisy.circuit.cnot_count() / r;
        }
        let samples = sample(&pipe.noisy, cfg.shots, point_seed(cfg.seed, r as u64))?;
        let chunks: Vec<usize> = (0..cfg.shots.div_ceil(CHUNK)).collect();
        let tallies: Vec<[usize; 5]> = chunks
            .par_iter()
            .map_init(
                || DecodeCache::new(1 << 15),
                |cache, &c| -> Result<[usize; 5]> {
                    let mut t = [0usize; 5];
                    for shot in c * CHUNK..((c + 1) * CHUNK).min(cfg.shots) {
                        let (kept, fail, raw_fail, osd) =
                            pipe.decode_shot(&samples.detectors.row(shot), &samples.observables.row(shot), cache)?;
                        t[0] += kept as usize;
                        t[1] += (kept && fail) as usize;
                        t[2] += raw_fail as usize;
                        t[3] += osd as usize;
                        t[4] += 1;
                    }
                    Ok(t)
                },
            )
            .collect::<Result<_>>()?;
        let sum = tallies.iter().fold([0usize; 5], |mut acc, t| {
            for i in 0..5 {
                acc[i] += t[i];
            }
            acc
        });
        let [kept, failures, raw_failures, osd_shots, shots] = sum;
        let (p_log, sigma) = match logical_error_stats(failures, kept) {
            Ok((p, s)) => (Some(p), Some(s)),
            Err(_) => (None, None),
        };
        let (raw_p_log, raw_sigma) = logical_error_stats(raw_failures, shots)?;
        points.push(MemoryPoint {
            r,
            shots,
            kept,
            failures,
            p_log,
            sigma,
            raw_failures,
            raw_p_log,
            raw_sigma,
            osd_shots,
        });
    }
    let fit_of = |counts: &dyn Fn(&MemoryPoint) -> (usize, usize)| -> Option<DecayFit> {
        let pts: Vec<DecayPoint> = points
            .iter()
            .filter_map(|p| {
                let (f, k) = counts(p);
                DecayPoint::from_counts(p.r, f, k).ok()
            })
            .collect();
        fit_decay(&pts).ok()
    };
    let fit = fit_of(&|p| (p.failures, p.kept));
    let raw_fit = fit_of(&|p| (p.raw_failures, p.shots));
    Ok(ExperimentReport {
        metadata: ReportMetadata {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            n: code.n,
            k: code.k,
            cnots_per_cycle,
        },
        config: cfg.clone(),
        points,
        fit,
        raw_fit,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonConfig {
    pub cycles: Vec<usize>,
    pub shots: usize,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub decoder: BpConfig,
    pub seed: u64,
    /// Extraction rounds per cycle of the fault-tolerant 2D protocol.
    #[serde(default = "four")]
    pub ft_rounds_per_cycle: usize,
    #[serde(default = "two")]
    pub l_4d: usize,
    #[serde(default = "four")]
    pub l_2d: usize,
}

fn two() -> usize {
    2
}

fn four() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub protocol: String,
    pub window: WindowConfig,
    pub cnots_per_cycle: usize,
    pub points: Vec<MemoryPoint>,
    pub fit: Option<DecayFit>,
    /// Published hardware p_cycle and its uncertainty, for context only.
    pub hardware_p_cycle: (f64, f64),
}

impl ComparisonConfig {
    pub fn experiments(&self) -> Vec<(String, ExperimentConfig, (f64, f64))> {
        let base = |spec: SurfaceCodeSpec, w: usize, rpc: usize, salt: u64| ExperimentConfig {
            rounds_per_cycle: rpc,
            noise: self.noise,
            window: WindowConfig::new(w, w),
            decoder: self.decoder,
            ..ExperimentConfig::new(spec, self.cycles.clone(), self.shots, point_seed(self.seed, salt))
        };
        let ft = self.ft_rounds_per_cycle;
        vec![
            ("4D (1,1)".to_string(), base(SurfaceCodeSpec::new(4, self.l_4d), 1, 1, 101), (2.5e-3, 7.6e-4)),
            ("2D non-FT (1,1)".to_string(), base(SurfaceCodeSpec::new(2, self.l_2d), 1, 1, 102), (2.8e-3, 9.6e-4)),
            (format!("2D FT ({ft},{ft})"), base(SurfaceCodeSpec::new(2, self.l_2d), ft, ft, 103), (1.5e-2, 4.8e-3)),
        ]
    }
}

pub fn compare_2d_4d(cfg: &ComparisonConfig) -> Result<Vec<ComparisonRow>> {
    cfg.experiments()
        .into_iter()
        .map(|(protocol, exp, hardware_p_cycle)| {
            let report = run_memory(&exp)?;
            let code = surface_code(exp.code)?;
            let one_cycle = memory_circuit(&code, exp.basis, exp.rounds_per_cycle, &Schedule::standard(&code))?;
            Ok(ComparisonRow {
                protocol,
                window: exp.window,
                cnots_per_cycle: one_cycle.cnot_count(),
                points: report.points,
                fit: report.fit,
                hardware_p_cycle,
            })
        })
        .collect()
}
