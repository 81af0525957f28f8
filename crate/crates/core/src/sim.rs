//! Pauli-frame simulation, 64 lanes per machine word.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::circuit::{Circuit, OpKind};
use crate::error::SimError;
use crate::f2::BitVec;
use crate::noise::{NoisyCircuit, Pauli, Timing};

/// Detectors and observables flipped by a fault configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symptom {
    pub detectors: Vec<usize>,
    pub observables: Vec<usize>,
}

impl Symptom {
    pub fn is_empty(&self) -> bool {
        self.detectors.is_empty() && self.observables.is_empty()
    }

    pub fn xor(&self, other: &Symptom) -> Symptom {
        fn sym_diff(a: &[usize], b: &[usize]) -> Vec<usize> {
            let (mut i, mut j, mut out) = (0, 0, Vec::new());
            while i < a.len() || j < b.len() {
                match (a.get(i), b.get(j)) {
                    (Some(x), Some(y)) if x == y => {
                        i += 1;
                        j += 1;
                    }
                    (Some(x), Some(y)) if x < y => {
                        out.push(*x);
                        i += 1;
                    }
                    (Some(x), None) => {
                        out.push(*x);
                        i += 1;
                    }
                    (_, Some(y)) => {
                        out.push(*y);
                        j += 1;
                    }
                    (None, None) => unreachable!(),
                }
            }
            out
        }
        Symptom {
            detectors: sym_diff(&self.detectors, &other.detectors),
            observables: sym_diff(&self.observables, &other.observables),
        }
    }
}

/// A Pauli placed on one qubit just before or after an op.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Insertion {
    pub op: usize,
    pub timing: Timing,
    pub qubit: usize,
    pub pauli: Pauli,
}

/// 64-lane Pauli frame: bit `l` of `x[q]` is the X component on qubit `q` in lane `l`.
pub(crate) struct Frame {
    pub x: Vec<u64>,
    pub z: Vec<u64>,
    pub meas: Vec<u64>,
}

impl Frame {
    pub fn new(circuit: &Circuit) -> Frame {
        Frame {
            x: vec![0; circuit.num_qubits],
            z: vec![0; circuit.num_qubits],
            meas: vec![0; circuit.measurement_count],
        }
    }

    pub fn apply_pauli(&mut self, qubit: usize, pauli: Pauli, lanes: u64) {
        if pauli.x_bit() {
            self.x[qubit] ^= lanes;
        }
        if pauli.z_bit() {
            self.z[qubit] ^= lanes;
        }
    }

    /// Runs ops `start..`, calling `noise(op, timing, frame)` around each op.
    /// `meas_offset` is the number of measurements before op `start`.
    pub fn run(
        &mut self,
        circuit: &Circuit,
        start: usize,
        meas_offset: usize,
        mut noise: impl FnMut(usize, Timing, &mut Frame),
    ) {
        let mut m = meas_offset;
        for (i, op) in circuit.ops.iter().enumerate().skip(start) {
            noise(i, Timing::Before, self);
            let t = &op.targets;
            match op.kind {
                OpKind::PrepZ | OpKind::PrepX | OpKind::Reset => {
                    self.x[t[0]] = 0;
                    self.z[t[0]] = 0;
                }
                OpKind::Hadamard => {
                    std::mem::swap(&mut self.x[t[0]], &mut self.z[t[0]]);
                }
                OpKind::Cnot => {
                    let (c, tg) = (t[0], t[1]);
                    self.x[tg] ^= self.x[c];
                    self.z[c] ^= self.z[tg];
                }
                OpKind::MeasureZ => {
                    self.meas[m] = self.x[t[0]];
                    m += 1;
                }
            }
            noise(i, Timing::After, self);
        }
    }

    pub fn parity_words(&self, sets: &[Vec<usize>]) -> Vec<u64> {
        sets.iter()
            .map(|s| s.iter().fold(0u64, |acc, &m| acc ^ self.meas[m]))
            .collect()
    }
}

/// Number of measurements strictly before each op.
pub(crate) fn measurement_offsets(circuit: &Circuit) -> Vec<usize> {
    let mut out = Vec::with_capacity(circuit.ops.len() + 1);
    let mut m = 0;
    for op in &circuit.ops {
        out.push(m);
        if op.kind == OpKind::MeasureZ {
            m += 1;
        }
    }
    out.push(m);
    out
}

fn detector_sets(circuit: &Circuit) -> Vec<Vec<usize>> {
    circuit.detectors.iter().map(|d| d.measurements.clone()).collect()
}

/// Noiseless run with the given Paulis inserted; the reference symptom oracle.
pub fn propagate(circuit: &Circuit, insertions: &[Insertion]) -> Result<Symptom, SimError> {
    for ins in insertions {
        if ins.op >= circuit.ops.len() {
            return Err(SimError::InvalidSite(ins.op));
        }
        if ins.qubit >= circuit.num_qubits {
            return Err(SimError::PauliSupport(ins.qubit));
        }
    }
    let mut frame = Frame::new(circuit);
    frame.run(circuit, 0, 0, |op, timing, f| {
        for ins in insertions.iter().filter(|i| i.op == op && i.timing == timing) {
            f.apply_pauli(ins.qubit, ins.pauli, 1);
        }
    });
    let bit = |w: u64| w & 1 == 1;
    Ok(Symptom {
        detectors: frame
            .parity_words(&detector_sets(circuit))
            .into_iter()
            .enumerate()
            .filter(|(_, w)| bit(*w))
            .map(|(i, _)| i)
            .collect(),
        observables: frame
            .parity_words(&circuit.observables)
            .into_iter()
            .enumerate()
            .filter(|(_, w)| bit(*w))
            .map(|(i, _)| i)
            .collect(),
    })
}

/// Symptom of applying `paulis` (one per site qubit) at fault site `site`.
pub fn inject_fault(noisy: &NoisyCircuit, site: usize, paulis: &[Pauli]) -> Result<Symptom, SimError> {
    let s = noisy.sites.get(site).ok_or(SimError::InvalidSite(site))?;
    if paulis.len() != s.qubits.len() {
        return Err(SimError::PauliSupport(paulis.len()));
    }
    let insertions: Vec<Insertion> = s
        .qubits
        .iter()
        .zip(paulis)
        .map(|(&qubit, &pauli)| Insertion {
            op: s.op,
            timing: s.timing,
            qubit,
            pauli,
        })
        .collect();
    propagate(&noisy.circuit, &insertions)
}

/// Bit table with one row per shot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotTable {
    rows: usize,
    cols: usize,
    words_per_row: usize,
    data: Vec<u64>,
}

impl ShotTable {
    pub fn zeros(rows: usize, cols: usize) -> ShotTable {
        let words_per_row = cols.div_ceil(64);
        ShotTable {
            rows,
            cols,
            words_per_row,
            data: vec![0; rows * words_per_row],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.words_per_row + col / 64] >> (col % 64) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let w = &mut self.data[row * self.words_per_row + col / 64];
        let mask = 1u64 << (col % 64);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn row(&self, row: usize) -> BitVec {
        let start = row * self.words_per_row;
        BitVec::from_words(self.cols, self.data[start..start + self.words_per_row].to_vec())
    }

    /// Number of shots in which each column fired.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cols];
        for r in 0..self.rows {
            for (w, &word) in self.data[r * self.words_per_row..(r + 1) * self.words_per_row].iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    counts[w * 64 + bits.trailing_zeros() as usize] += 1;
                    bits &= bits - 1;
                }
            }
        }
        counts
    }

    fn fill_block(&mut self, block: usize, column_words: &[u64]) {
        for (col, &word) in column_words.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let lane = bits.trailing_zeros() as usize;
                let row = block * 64 + lane;
                if row < self.rows {
                    self.data[row * self.words_per_row + col / 64] |= 1 << (col % 64);
                }
                bits &= bits - 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Samples {
    pub detectors: ShotTable,
    pub observables: ShotTable,
}

const PACKED_MAGIC: &[u8; 4] = b"SSQS";

impl Samples {
    pub fn shots(&self) -> usize {
        self.detectors.rows()
    }

    /// One line per shot: detector bits then observable bits, as `0`/`1`.
    pub fn write_text(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut line = String::new();
        for s in 0..self.shots() {
            line.clear();
            for d in 0..self.detectors.cols() {
                line.push(if self.detectors.get(s, d) { '1' } else { '0' });
            }
            for o in 0..self.observables.cols() {
                line.push(if self.observables.get(s, o) { '1' } else { '0' });
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_text(text: &str, detector_count: usize, observable_count: usize) -> Result<Samples, SimError> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let mut detectors = ShotTable::zeros(lines.len(), detector_count);
        let mut observables = ShotTable::zeros(lines.len(), observable_count);
        for (s, line) in lines.iter().enumerate() {
            let line = line.trim();
            if line.len() != detector_count + observable_count {
                return Err(SimError::Config(format!(
                    "shot {s} has {} bits, expected {}",
                    line.len(),
                    detector_count + observable_count
                )));
            }
            for (i, ch) in line.bytes().enumerate() {
                let bit = match ch {
                    b'0' => false,
                    b'1' => true,
                    _ => return Err(SimError::Config(format!("shot {s}: bad character"))),
                };
                if i < detector_count {
                    detectors.set(s, i, bit);
                } else {
                    observables.set(s, i - detector_count, bit);
                }
            }
        }
        Ok(Samples { detectors, observables })
    }

    /// 16-byte header (magic, shots, detector count, observable count as
    /// little-endian u32), then each shot's bits packed little-endian per byte.
    pub fn write_packed(&self, mut out: impl Write) -> std::io::Result<()> {
        let (d, o) = (self.detectors.cols(), self.observables.cols());
        out.write_all(PACKED_MAGIC)?;
        for v in [self.shots(), d, o] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        let mut buf = vec![0u8; (d + o).div_ceil(8)];
        for s in 0..self.shots() {
            buf.iter_mut().for_each(|b| *b = 0);
            for i in 0..d + o {
                let bit = if i < d {
                    self.detectors.get(s, i)
                } else {
                    self.observables.get(s, i - d)
                };
                if bit {
                    buf[i / 8] |= 1 << (i % 8);
                }
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_packed(mut input: impl Read) -> Result<Samples, SimError> {
        let io = |e: std::io::Error| SimError::Config(e.to_string());
        let mut header = [0u8; 16];
        input.read_exact(&mut header).map_err(io)?;
        if &header[..4] != PACKED_MAGIC {
            return Err(SimError::Config("bad magic in packed samples".into()));
        }
        let field = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (shots, d, o) = (field(4), field(8), field(12));
        let mut detectors = ShotTable::zeros(shots, d);
        let mut observables = ShotTable::zeros(shots, o);
        let mut buf = vec![0u8; (d + o).div_ceil(8)];
        for s in 0..shots {
            input.read_exact(&mut buf).map_err(io)?;
            for i in 0..d + o {
                if buf[i / 8] >> (i % 8) & 1 == 1 {
                    if i < d {
                        detectors.set(s, i, true);
                    } else {
                        observables.set(s, i - d, true);
                    }
                }
            }
        }
        Ok(Samples { detectors, observables })
    }
}

struct SiteSampler {
    op: usize,
    timing: Timing,
    qubits: Vec<usize>,
    p: f64,
    ln_miss: f64,
    cumulative: Vec<f64>,
    components: Vec<Vec<Pauli>>,
}

impl SiteSampler {
    /// Lanes hit by this site in one 64-shot block, by geometric skipping.
    fn hit_mask(&self, rng: &mut ChaCha8Rng) -> u64 {
        if self.p >= 1.0 {
            return u64::MAX;
        }
        let mut mask = 0u64;
        let mut lane = 0usize;
        loop {
            let u: f64 = rng.gen();
            let gap = ((1.0 - u).ln() / self.ln_miss).floor();
            if gap >= (64 - lane) as f64 {
                return mask;
            }
            lane += gap as usize;
            mask |= 1 << lane;
            lane += 1;
            if lane >= 64 {
                return mask;
            }
        }
    }

    fn component(&self, rng: &mut ChaCha8Rng) -> &[Pauli] {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.components.len() - 1);
        &self.components[i]
    }
}

/// Samples `shots` noisy runs. Each 64-shot block draws from its own ChaCha8
/// stream keyed by `(seed, block)`, so output is independent of thread count.
pub fn sample(noisy: &NoisyCircuit, shots: usize, seed: u64) -> Result<Samples, SimError> {
    if shots == 0 {
        return Err(SimError::NoShots);
    }
    let circuit = &noisy.circuit;
    let mut samplers: Vec<SiteSampler> = noisy
        .sites
        .iter()
        .map(|s| {
            let comps = s.channel.components();
            let p = s.channel.probability();
            let mut acc = 0.0;
            let cumulative = comps
                .iter()
                .map(|c| {
                    acc += c.1;
                    acc
                })
                .collect();
            SiteSampler {
                op: s.op,
                timing: s.timing,
                qubits: s.qubits.clone(),
                p,
                ln_miss: (1.0 - p).ln(),
                cumulative,
                components: comps.into_iter().map(|c| c.0).collect(),
            }
        })
        .collect();
    samplers.sort_by_key(|s| (s.op, s.timing));
    // site range for each (op, timing) slot
    let mut ranges = vec![(0usize, 0usize); 2 * circuit.ops.len()];
    let mut i = 0;
    for (slot, range) in ranges.iter_mut().enumerate() {
        let start = i;
        while i < samplers.len() && 2 * samplers[i].op + samplers[i].timing as usize == slot {
            i += 1;
        }
        *range = (start, i);
    }
    let dets = detector_sets(circuit);
    let blocks = shots.div_ceil(64);
    let words: Vec<(Vec<u64>, Vec<u64>)> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(block as u64);
            let mut frame = Frame::new(circuit);
            frame.run(circuit, 0, 0, |op, timing, f| {
                let (a, b) = ranges[2 * op + timing as usize];
                for s in &samplers[a..b] {
                    let mut hits = s.hit_mask(&mut rng);
                    while hits != 0 {
                        let lane = hits.trailing_zeros();
                        for (&q, &pauli) in s.qubits.iter().zip(s.component(&mut rng)) {
                            f.apply_pauli(q, pauli, 1 << lane);
                        }
                        hits &= hits - 1;
                    }
                }
            });
            (frame.parity_words(&dets), frame.parity_words(&circuit.observables))
        })
        .collect();
    let mut detectors = ShotTable::zeros(shots, dets.len());
    let mut observables = ShotTable::zeros(shots, circuit.observables.len());
    for (block, (d, o)) in words.iter().enumerate() {
        detectors.fill_block(block, d);
        observables.fill_block(block, o);
    }
    Ok(Samples { detectors, observables })
}
