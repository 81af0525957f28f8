//! Circuit-level stochastic Pauli noise.

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, OpKind};
use crate::error::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const NONTRIVIAL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn x_bit(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn z_bit(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }
}

/// How the two-qubit depolarizing probability is distributed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoQubitChannel {
    /// p2 split evenly over the 15 nontrivial two-qubit Paulis.
    #[default]
    Uniform,
    /// Independent single-qubit depolarizing on each qubit at 12·p2/15, matching
    /// the single-qubit marginals of the uniform channel.
    Marginal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub p2: f64,
    pub p1: f64,
    pub p_spam: f64,
    pub p_idle: f64,
    /// Fraction of idle errors that are Z; X and Y share the rest.
    pub bias: f64,
    pub two_qubit: TwoQubitChannel,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            p2: 1.3e-3,
            p1: 3e-5,
            p_spam: 1.5e-3,
            p_idle: 0.0,
            bias: 1.0,
            two_qubit: TwoQubitChannel::Uniform,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            p2: 0.0,
            p1: 0.0,
            p_spam: 0.0,
            p_idle: 0.0,
            ..NoiseModel::default()
        }
    }

    /// Only two-qubit gate noise at `p2`.
    pub fn two_qubit_only(p2: f64) -> Self {
        NoiseModel {
            p2,
            ..NoiseModel::noiseless()
        }
    }

    /// Multiplies every error probability (not the bias) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        NoiseModel {
            p2: self.p2 * factor,
            p1: self.p1 * factor,
            p_spam: self.p_spam * factor,
            p_idle: self.p_idle * factor,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for p in [self.p2, self.p1, self.p_spam, self.p_idle, self.bias] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Probability(p));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let model: NoiseModel = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Channel {
    Depolarize1(f64),
    Depolarize2(f64),
    FlipX(f64),
    FlipZ(f64),
    Idle { p: f64, bias: f64 },
}

impl Channel {
    pub fn arity(&self) -> usize {
        match self {
            Channel::Depolarize2(_) => 2,
            _ => 1,
        }
    }

    /// Total probability that some nontrivial Pauli is applied.
    pub fn probability(&self) -> f64 {
        match *self {
            Channel::Depolarize1(p) | Channel::Depolarize2(p) | Channel::FlipX(p) | Channel::FlipZ(p) => p,
            Channel::Idle { p, .. } => p,
        }
    }

    /// Nontrivial Pauli components with their probabilities; zero-probability
    /// components omitted.
    pub fn components(&self) -> Vec<(Vec<Pauli>, f64)> {
        let all = match *self {
            Channel::Depolarize1(p) => Pauli::NONTRIVIAL.iter().map(|&a| (vec![a], p / 3.0)).collect(),
            Channel::Depolarize2(p) => {
                let mut v = Vec::with_capacity(15);
                for a in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
                    for b in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
                        if (a, b) != (Pauli::I, Pauli::I) {
                            v.push((vec![a, b], p / 15.0));
                        }
                    }
                }
                v
            }
            Channel::FlipX(p) => vec![(vec![Pauli::X], p)],
            Channel::FlipZ(p) => vec![(vec![Pauli::Z], p)],
            Channel::Idle { p, bias } => vec![
                (vec![Pauli::X], p * (1.0 - bias) / 2.0),
                (vec![Pauli::Y], p * (1.0 - bias) / 2.0),
                (vec![Pauli::Z], p * bias),
            ],
        };
        all.into_iter().filter(|(_, q)| *q > 0.0).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Timing {
    Before,
    After,
}

/// A noise channel attached to the qubits of one op.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultSite {
    pub op: usize,
    pub timing: Timing,
    pub qubits: Vec<usize>,
    pub channel: Channel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoisyCircuit {
    pub circuit: Circuit,
    /// Sorted by `(op, timing)`, insertion order otherwise.
    pub sites: Vec<FaultSite>,
    pub model: NoiseModel,
}

/// Attaches the model's channels to every op; zero-probability sites are skipped.
///
/// Idle noise is charged once per time step in which a qubit has no op,
/// between its first and last op.
pub fn attach_noise(circuit: &Circuit, model: &NoiseModel) -> Result<NoisyCircuit, SimError> {
    model.validate()?;
    let mut sites = Vec::new();
    let mut push = |op: usize, timing: Timing, qubits: Vec<usize>, channel: Channel| {
        if channel.probability() > 0.0 {
            sites.push(FaultSite {
                op,
                timing,
                qubits,
                channel,
            });
        }
    };
    let mut last_time: Vec<Option<usize>> = vec![None; circuit.num_qubits];
    for (i, op) in circuit.ops.iter().enumerate() {
        for &q in &op.targets {
            if let Some(prev) = last_time[q] {
                for _ in prev + 1..op.time {
                    push(
                        i,
                        Timing::Before,
                        vec![q],
                        Channel::Idle {
                            p: model.p_idle,
                            bias: model.bias,
                        },
                    );
                }
            }
            last_time[q] = Some(op.time);
        }
        match op.kind {
            OpKind::Cnot => match model.two_qubit {
                TwoQubitChannel::Uniform => push(i, Timing::After, op.targets.clone(), Channel::Depolarize2(model.p2)),
                TwoQubitChannel::Marginal => {
                    for &q in &op.targets {
                        push(i, Timing::After, vec![q], Channel::Depolarize1(model.p2 * 12.0 / 15.0));
                    }
                }
            },
            OpKind::Hadamard => push(i, Timing::After, op.targets.clone(), Channel::Depolarize1(model.p1)),
            OpKind::PrepZ | OpKind::Reset => push(i, Timing::After, op.targets.clone(), Channel::FlipX(model.p_spam)),
            OpKind::PrepX => push(i, Timing::After, op.targets.clone(), Channel::FlipZ(model.p_spam)),
            OpKind::MeasureZ => push(i, Timing::Before, op.targets.clone(), Channel::FlipX(model.p_spam)),
        }
    }
    sites.sort_by_key(|s| (s.op, s.timing));
    Ok(NoisyCircuit {
        circuit: circuit.clone(),
        sites,
        model: *model,
    })
}
