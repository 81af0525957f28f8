//! Memory-experiment circuits with bare, reused ancillas.
//!
//! One extraction round measures every Z check (CNOTs data → ancilla), then
//! every X check (H, CNOTs ancilla → data, H). Each ancilla is measured and
//! reset at the end of every phase it serves in.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::codes::{logicals_of_weight, Basis, CssCode, SurfaceCodeSpec};
use crate::error::{CircuitError, CodeError};
use crate::f2::BitVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    PrepZ,
    PrepX,
    Cnot,
    Hadamard,
    MeasureZ,
    Reset,
}

impl OpKind {
    fn mnemonic(self) -> &'static str {
        match self {
            OpKind::PrepZ => "PZ",
            OpKind::PrepX => "PX",
            OpKind::Cnot => "CNOT",
            OpKind::Hadamard => "H",
            OpKind::MeasureZ => "MZ",
            OpKind::Reset => "R",
        }
    }

    fn from_mnemonic(s: &str) -> Option<OpKind> {
        Some(match s {
            "PZ" => OpKind::PrepZ,
            "PX" => OpKind::PrepX,
            "CNOT" => OpKind::Cnot,
            "H" => OpKind::Hadamard,
            "MZ" => OpKind::MeasureZ,
            "R" => OpKind::Reset,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        if self == OpKind::Cnot {
            2
        } else {
            1
        }
    }
}

/// A single gate, preparation or measurement. CNOT targets are `[control, target]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Op {
    pub kind: OpKind,
    pub targets: Vec<usize>,
    /// Time step; no qubit appears in two ops sharing a time step.
    pub time: usize,
}

/// A parity of measurement outcomes that is deterministic without faults.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detector {
    pub measurements: Vec<usize>,
    /// Detector layer; the final data-measurement layer has index `rounds`.
    pub round: usize,
    pub basis: Basis,
    pub check: usize,
    pub final_layer: bool,
}

/// Static description of a memory experiment circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryLayout {
    pub basis: Basis,
    pub rounds: usize,
    pub data_qubits: usize,
    pub ancillas: usize,
    pub z_checks: usize,
    pub x_checks: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Circuit {
    pub num_qubits: usize,
    /// Ops sorted by time step.
    pub ops: Vec<Op>,
    pub measurement_count: usize,
    pub detectors: Vec<Detector>,
    pub observables: Vec<Vec<usize>>,
    pub layout: Option<MemoryLayout>,
}

/// CNOT order for each check of each type.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub z_checks: Vec<Vec<usize>>,
    pub x_checks: Vec<Vec<usize>>,
    pub z_first: bool,
}

impl Schedule {
    /// Checks in index order, data qubits ascending within each check, Z phase first.
    pub fn standard(code: &CssCode) -> Schedule {
        Schedule {
            z_checks: code.hz.row_supports(),
            x_checks: code.hx.row_supports(),
            z_first: true,
        }
    }

    fn targets(&self, basis: Basis) -> &[Vec<usize>] {
        match basis {
            Basis::X => &self.x_checks,
            Basis::Z => &self.z_checks,
        }
    }

    fn check_against(&self, code: &CssCode) -> Result<(), CircuitError> {
        for basis in [Basis::Z, Basis::X] {
            let supports = code.checks(basis).row_supports();
            let targets = self.targets(basis);
            if supports.len() != targets.len() {
                return Err(CircuitError::Schedule(format!(
                    "{} {basis} checks scheduled, code has {}",
                    targets.len(),
                    supports.len()
                )));
            }
            for (j, (s, t)) in supports.iter().zip(targets).enumerate() {
                let mut sorted = t.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted != *s || sorted.len() != t.len() {
                    return Err(CircuitError::Schedule(format!(
                        "{basis} check {j} targets {t:?}, support is {s:?}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum MeasKey {
    Check { round: usize, basis: Basis, check: usize },
    Data(usize),
}

struct Builder {
    ops: Vec<(OpKind, Vec<usize>, Option<MeasKey>)>,
}

impl Builder {
    fn push(&mut self, kind: OpKind, targets: Vec<usize>) {
        self.ops.push((kind, targets, None));
    }

    fn measure(&mut self, qubit: usize, key: MeasKey) {
        self.ops.push((OpKind::MeasureZ, vec![qubit], Some(key)));
    }
}

/// Builds an `r`-round memory experiment in `basis`.
///
/// Detectors: round-0 same-basis checks against the prepared value, opposite
/// checks from round 1 on as differences with the previous round, then one
/// final layer of same-basis checks rebuilt from the data measurement.
pub fn memory_circuit(
    code: &CssCode,
    basis: Basis,
    rounds: usize,
    schedule: &Schedule,
) -> Result<Circuit, CircuitError> {
    if code.k == 0 {
        return Err(CircuitError::Code(CodeError::NoLogicals));
    }
    schedule.check_against(code)?;
    let n = code.n;
    let z_checks = code.hz.rows();
    let x_checks = code.hx.rows();
    let ancillas = if rounds > 0 { z_checks.max(x_checks) } else { 0 };
    let mut b = Builder { ops: Vec::new() };

    let prep = match basis {
        Basis::Z => OpKind::PrepZ,
        Basis::X => OpKind::PrepX,
    };
    for q in 0..n {
        b.push(prep, vec![q]);
    }
    for a in 0..ancillas {
        b.push(OpKind::PrepZ, vec![n + a]);
    }
    let phases = if schedule.z_first {
        [Basis::Z, Basis::X]
    } else {
        [Basis::X, Basis::Z]
    };
    for round in 0..rounds {
        for phase in phases {
            for (check, targets) in schedule.targets(phase).iter().enumerate() {
                let anc = n + check;
                match phase {
                    Basis::Z => {
                        for &q in targets {
                            b.push(OpKind::Cnot, vec![q, anc]);
                        }
                    }
                    Basis::X => {
                        b.push(OpKind::Hadamard, vec![anc]);
                        for &q in targets {
                            b.push(OpKind::Cnot, vec![anc, q]);
                        }
                        b.push(OpKind::Hadamard, vec![anc]);
                    }
                }
                b.measure(
                    anc,
                    MeasKey::Check {
                        round,
                        basis: phase,
                        check,
                    },
                );
                b.push(OpKind::Reset, vec![anc]);
            }
        }
    }
    for q in 0..n {
        if basis == Basis::X {
            b.push(OpKind::Hadamard, vec![q]);
        }
    }
    for q in 0..n {
        b.measure(q, MeasKey::Data(q));
    }

    let num_qubits = n + ancillas;
    let (ops, keys) = schedule_asap(num_qubits, b.ops);
    let index: HashMap<MeasKey, usize> = keys.into_iter().enumerate().map(|(i, k)| (k, i)).collect();
    let m = |k: MeasKey| index[&k];
    let check_key = |round, basis, check| MeasKey::Check { round, basis, check };

    let mut detectors = Vec::new();
    for round in 0..rounds {
        for phase in phases {
            for check in 0..code.checks(phase).rows() {
                let current = m(check_key(round, phase, check));
                let measurements = if round == 0 {
                    if phase != basis {
                        continue;
                    }
                    vec![current]
                } else {
                    vec![m(check_key(round - 1, phase, check)), current]
                };
                detectors.push(Detector {
                    measurements,
                    round,
                    basis: phase,
                    check,
                    final_layer: false,
                });
            }
        }
    }
    for (check, support) in code.checks(basis).row_supports().into_iter().enumerate() {
        let mut measurements: Vec<usize> = Vec::new();
        if rounds > 0 {
            measurements.push(m(check_key(rounds - 1, basis, check)));
        }
        measurements.extend(support.iter().map(|&q| m(MeasKey::Data(q))));
        measurements.sort_unstable();
        detectors.push(Detector {
            measurements,
            round: rounds,
            basis,
            check,
            final_layer: true,
        });
    }
    let observables = code
        .logicals(basis)
        .iter()
        .map(|l| {
            let mut ms: Vec<usize> = l.ones().map(|q| m(MeasKey::Data(q))).collect();
            ms.sort_unstable();
            ms
        })
        .collect();

    Ok(Circuit {
        num_qubits,
        measurement_count: index.len(),
        ops,
        detectors,
        observables,
        layout: Some(MemoryLayout {
            basis,
            rounds,
            data_qubits: n,
            ancillas,
            z_checks,
            x_checks,
        }),
    })
}

/// Assigns each op the earliest time step after its qubits' previous ops,
/// then sorts stably by time step. Returns measurement keys in final order.
fn schedule_asap(
    num_qubits: usize,
    raw: Vec<(OpKind, Vec<usize>, Option<MeasKey>)>,
) -> (Vec<Op>, Vec<MeasKey>) {
    let mut next_free = vec![0usize; num_qubits];
    let mut timed: Vec<(Op, Option<MeasKey>)> = raw
        .into_iter()
        .map(|(kind, targets, key)| {
            let time = targets.iter().map(|&q| next_free[q]).max().unwrap_or(0);
            for &q in &targets {
                next_free[q] = time + 1;
            }
            (Op { kind, targets, time }, key)
        })
        .collect();
    timed.sort_by_key(|(op, _)| op.time);
    let keys = timed.iter().filter_map(|(_, k)| *k).collect();
    (timed.into_iter().map(|(op, _)| op).collect(), keys)
}

impl Circuit {
    pub fn cnot_count(&self) -> usize {
        self.ops.iter().filter(|op| op.kind == OpKind::Cnot).count()
    }

    pub fn depth(&self) -> usize {
        self.ops.last().map_or(0, |op| op.time + 1)
    }

    pub fn count(&self, kind: OpKind) -> usize {
        self.ops.iter().filter(|op| op.kind == kind).count()
    }

    /// Line-oriented text form. One op per line (`CNOT 3 17`, `MZ 40`), `TICK`
    /// between time steps, then `DETECTOR m.. # <layer> <round> <basis> <check>`
    /// and `OBSERVABLE m..` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "QUBITS {}", self.num_qubits);
        if let Some(l) = &self.layout {
            let _ = writeln!(
                s,
                "# memory basis={} rounds={} data={} ancillas={} z_checks={} x_checks={}",
                l.basis, l.rounds, l.data_qubits, l.ancillas, l.z_checks, l.x_checks
            );
        }
        let mut time = 0;
        for op in &self.ops {
            while time < op.time {
                s.push_str("TICK\n");
                time += 1;
            }
            s.push_str(op.kind.mnemonic());
            for t in &op.targets {
                let _ = write!(s, " {t}");
            }
            s.push('\n');
        }
        for d in &self.detectors {
            s.push_str("DETECTOR");
            for m in &d.measurements {
                let _ = write!(s, " m{m}");
            }
            let layer = if d.final_layer { "final" } else { "round" };
            let _ = writeln!(s, " # {layer} {} {} {}", d.round, d.basis, d.check);
        }
        for o in &self.observables {
            s.push_str("OBSERVABLE");
            for m in o {
                let _ = write!(s, " m{m}");
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Circuit, CircuitError> {
        let err = |line: usize, msg: String| CircuitError::Parse { line: line + 1, msg };
        let parse_meas = |line: usize, tok: &str| -> Result<usize, CircuitError> {
            tok.strip_prefix('m')
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err(line, format!("bad measurement reference {tok:?}")))
        };
        let mut num_qubits = None;
        let mut layout = None;
        let mut ops = Vec::new();
        let mut detectors = Vec::new();
        let mut observables = Vec::new();
        let mut time = 0;
        let mut measurement_count = 0;
        for (i, raw) in text.lines().enumerate() {
            let (body, comment) = match raw.split_once('#') {
                Some((b, c)) => (b.trim(), Some(c.trim())),
                None => (raw.trim(), None),
            };
            if body.is_empty() {
                if let Some(c) = comment.and_then(|c| c.strip_prefix("memory ")) {
                    layout = Some(parse_layout(c).ok_or_else(|| err(i, "bad memory header".into()))?);
                }
                continue;
            }
            let mut toks = body.split_whitespace();
            let head = toks.next().expect("nonempty line");
            match head {
                "QUBITS" => {
                    num_qubits = Some(
                        toks.next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| err(i, "bad QUBITS line".into()))?,
                    );
                }
                "TICK" => time += 1,
                "DETECTOR" => {
                    let measurements = toks.map(|t| parse_meas(i, t)).collect::<Result<_, _>>()?;
                    let meta: Vec<&str> = comment.unwrap_or("").split_whitespace().collect();
                    let (final_layer, round, basis, check) = match meta[..] {
                        [layer, round, basis, check] => (
                            layer == "final",
                            round.parse().map_err(|_| err(i, "bad detector round".into()))?,
                            basis.parse().map_err(|e: String| err(i, e))?,
                            check.parse().map_err(|_| err(i, "bad detector check".into()))?,
                        ),
                        _ => (false, 0, Basis::Z, 0),
                    };
                    detectors.push(Detector {
                        measurements,
                        round,
                        basis,
                        check,
                        final_layer,
                    });
                }
                "OBSERVABLE" => {
                    observables.push(toks.map(|t| parse_meas(i, t)).collect::<Result<_, _>>()?);
                }
                other => {
                    let kind = OpKind::from_mnemonic(other)
                        .ok_or_else(|| err(i, format!("unknown op {other:?}")))?;
                    let targets: Vec<usize> = toks
                        .map(|t| t.parse().map_err(|_| err(i, format!("bad qubit {t:?}"))))
                        .collect::<Result<_, _>>()?;
                    if targets.len() != kind.arity() {
                        return Err(err(i, format!("{other} takes {} targets", kind.arity())));
                    }
                    if kind == OpKind::MeasureZ {
                        measurement_count += 1;
                    }
                    ops.push(Op { kind, targets, time });
                }
            }
        }
        let num_qubits = num_qubits.ok_or_else(|| err(0, "missing QUBITS header".into()))?;
        Ok(Circuit {
            num_qubits,
            ops,
            measurement_count,
            detectors,
            observables,
            layout,
        })
    }
}

fn parse_layout(s: &str) -> Option<MemoryLayout> {
    let fields: BTreeMap<&str, &str> = s.split_whitespace().filter_map(|kv| kv.split_once('=')).collect();
    Some(MemoryLayout {
        basis: fields.get("basis")?.parse().ok()?,
        rounds: fields.get("rounds")?.parse().ok()?,
        data_qubits: fields.get("data")?.parse().ok()?,
        ancillas: fields.get("ancillas")?.parse().ok()?,
        z_checks: fields.get("z_checks")?.parse().ok()?,
        x_checks: fields.get("x_checks")?.parse().ok()?,
    })
}

/// Support overlaps between stabilizer generators and minimum-weight logicals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HookReport {
    pub generators: usize,
    pub logicals_x: usize,
    pub logicals_z: usize,
    /// Overlap size → number of (generator, logical) pairs with that overlap.
    pub histogram: BTreeMap<usize, usize>,
    pub max_overlap: usize,
    pub pass: bool,
}

/// Audits every generator against every minimum-weight logical of either type.
pub fn hook_audit(code: &CssCode) -> HookReport {
    let gather = |basis: Basis| -> Vec<BitVec> {
        let d = match basis {
            Basis::Z => code.distance.dz,
            Basis::X => code.distance.dx,
        };
        match d.exact() {
            Some(w) if code.logicals_minimal => logicals_of_weight(code, basis, w),
            _ => code.logicals(basis).to_vec(),
        }
    };
    let lx = gather(Basis::X);
    let lz = gather(Basis::Z);
    let generators: Vec<BitVec> = code
        .hx
        .row_vectors()
        .iter()
        .chain(code.hz.row_vectors())
        .cloned()
        .collect();
    let logicals: Vec<BitVec> = lx.iter().chain(&lz).cloned().collect();
    let mut report = hook_audit_parts(&generators, &logicals);
    report.logicals_x = lx.len();
    report.logicals_z = lz.len();
    report
}

/// Overlap audit on explicit supports; passes iff every overlap is at most 2.
pub fn hook_audit_parts(generators: &[BitVec], logicals: &[BitVec]) -> HookReport {
    let mut histogram = BTreeMap::new();
    for g in generators {
        for l in logicals {
            *histogram.entry(g.overlap(l)).or_insert(0) += 1;
        }
    }
    let max_overlap = histogram.keys().next_back().copied().unwrap_or(0);
    HookReport {
        generators: generators.len(),
        logicals_x: 0,
        logicals_z: logicals.len(),
        histogram,
        max_overlap,
        pass: max_overlap <= 2,
    }
}

/// CNOTs per fault-tolerant decoding cycle: one round for the single-shot 4D
/// code, `d` rounds for the 2D code.
pub fn count_gate_scaling(dimension: usize, l: usize) -> Result<usize, CodeError> {
    let code = crate::codes::surface_code(SurfaceCodeSpec::new(dimension, l))?;
    let per_round = code.hx.nnz() + code.hz.nnz();
    match dimension {
        4 => Ok(per_round),
        2 => Ok(per_round * code.d().exact().unwrap_or(l)),
        other => Err(CodeError::Dimension(other)),
    }
}
