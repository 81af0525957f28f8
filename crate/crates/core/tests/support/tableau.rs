//! Stabilizer tableau simulator (Aaronson–Gottesman) for up to 64 qubits,
//! used only as a reference for the frame simulator.

use rand::Rng;
use ssqec::circuit::{Circuit, OpKind};
use ssqec::noise::{Pauli, Timing};
use ssqec::sim::Insertion;

pub struct Tableau {
    n: usize,
    // rows 0..n destabilizers, n..2n stabilizers, 2n scratch
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<bool>,
}

fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 as i32 - x2 as i32,
        (true, false) => z2 as i32 * (2 * x2 as i32 - 1),
        (false, true) => x2 as i32 * (1 - 2 * z2 as i32),
    }
}

impl Tableau {
    pub fn new(n: usize) -> Tableau {
        assert!(n <= 64);
        let mut t = Tableau {
            n,
            x: vec![0; 2 * n + 1],
            z: vec![0; 2 * n + 1],
            r: vec![false; 2 * n + 1],
        };
        for i in 0..n {
            t.x[i] = 1 << i;
            t.z[n + i] = 1 << i;
        }
        t
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let mut sum = 2 * self.r[h] as i32 + 2 * self.r[i] as i32;
        for j in 0..self.n {
            let b = |w: u64| w >> j & 1 == 1;
            sum += g(b(self.x[i]), b(self.z[i]), b(self.x[h]), b(self.z[h]));
        }
        self.r[h] = sum.rem_euclid(4) == 2;
        self.x[h] ^= self.x[i];
        self.z[h] ^= self.z[i];
    }

    pub fn h(&mut self, q: usize) {
        let m = 1u64 << q;
        for i in 0..2 * self.n {
            let (xb, zb) = (self.x[i] & m != 0, self.z[i] & m != 0);
            if xb && zb {
                self.r[i] = !self.r[i];
            }
            if xb != zb {
                self.x[i] ^= m;
                self.z[i] ^= m;
            }
        }
    }

    pub fn cnot(&mut self, a: usize, b: usize) {
        let (ma, mb) = (1u64 << a, 1u64 << b);
        for i in 0..2 * self.n {
            let (xa, za, xb, zb) = (self.x[i] & ma != 0, self.z[i] & ma != 0, self.x[i] & mb != 0, self.z[i] & mb != 0);
            if xa && zb && (xb == za) {
                self.r[i] = !self.r[i];
            }
            if xa {
                self.x[i] ^= mb;
            }
            if zb {
                self.z[i] ^= ma;
            }
        }
    }

    pub fn pauli(&mut self, q: usize, p: Pauli) {
        let m = 1u64 << q;
        for i in 0..2 * self.n {
            // an X error anticommutes with rows carrying Z on q, and so on
            let flip = (p.x_bit() && self.z[i] & m != 0) != (p.z_bit() && self.x[i] & m != 0);
            if flip {
                self.r[i] = !self.r[i];
            }
        }
    }

    pub fn measure(&mut self, q: usize, rng: &mut impl Rng) -> bool {
        let n = self.n;
        let m = 1u64 << q;
        if let Some(p) = (n..2 * n).find(|&i| self.x[i] & m != 0) {
            for i in 0..2 * n {
                if i != p && self.x[i] & m != 0 {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p];
            self.z[p - n] = self.z[p];
            self.r[p - n] = self.r[p];
            self.x[p] = 0;
            self.z[p] = m;
            self.r[p] = rng.gen();
            self.r[p]
        } else {
            let s = 2 * n;
            self.x[s] = 0;
            self.z[s] = 0;
            self.r[s] = false;
            for i in 0..n {
                if self.x[i] & m != 0 {
                    self.rowsum(s, i + n);
                }
            }
            self.r[s]
        }
    }

    pub fn reset(&mut self, q: usize, rng: &mut impl Rng) {
        if self.measure(q, rng) {
            self.pauli(q, Pauli::X);
        }
    }
}

/// Runs `circuit` with `insertions`, returning raw measurement outcomes.
pub fn run(circuit: &Circuit, insertions: &[Insertion], rng: &mut impl Rng) -> Vec<bool> {
    let mut t = Tableau::new(circuit.num_qubits);
    let mut out = Vec::new();
    let apply = |t: &mut Tableau, op: usize, timing: Timing| {
        for ins in insertions.iter().filter(|i| i.op == op && i.timing == timing) {
            t.pauli(ins.qubit, ins.pauli);
        }
    };
    for (i, op) in circuit.ops.iter().enumerate() {
        apply(&mut t, i, Timing::Before);
        let q = op.targets[0];
        match op.kind {
            OpKind::PrepZ | OpKind::Reset => t.reset(q, rng),
            OpKind::PrepX => {
                t.reset(q, rng);
                t.h(q);
            }
            OpKind::Hadamard => t.h(q),
            OpKind::Cnot => t.cnot(q, op.targets[1]),
            OpKind::MeasureZ => out.push(t.measure(q, rng)),
        }
        apply(&mut t, i, Timing::After);
    }
    out
}

/// Detector and observable values (not flips) for one run.
pub fn parities(circuit: &Circuit, meas: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let par = |set: &[usize]| set.iter().fold(false, |acc, &m| acc ^ meas[m]);
    (
        circuit.detectors.iter().map(|d| par(&d.measurements)).collect(),
        circuit.observables.iter().map(|o| par(o)).collect(),
    )
}
