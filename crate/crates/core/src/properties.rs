//! Cross-module invariants.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::{ChainComplex, DEFAULT_SEARCH_BUDGET};
use crate::circuit::{memory_circuit, Circuit, Schedule};
use crate::codes::{formula_parameters, repetition_complex, surface_code, Basis, CssCode, SurfaceCodeSpec};
use crate::decoder::{BpConfig, BpOsdDecoder, WindowConfig, WindowDecoder};
use crate::dem::{build_dem, DetectorErrorModel};
use crate::experiments::{run_memory, ExperimentConfig};
use crate::f2::BitVec;
use crate::noise::{attach_noise, NoiseModel, NoisyCircuit};
use crate::sim::{propagate, sample, Insertion};

fn code(dim: usize, l: usize) -> CssCode {
    surface_code(SurfaceCodeSpec::new(dim, l)).unwrap()
}

fn small_codes() -> Vec<CssCode> {
    vec![code(2, 2), code(2, 3), code(3, 2), code(4, 2)]
}

fn noisy_2d(rounds: usize) -> NoisyCircuit {
    let c = code(2, 3);
    let circ = memory_circuit(&c, Basis::Z, rounds, &Schedule::standard(&c)).unwrap();
    attach_noise(&circ, &NoiseModel { p_idle: 1e-3, ..NoiseModel::default() }).unwrap()
}

fn site_insertions(noisy: &NoisyCircuit, site: usize, component: usize) -> Vec<Insertion> {
    let s = &noisy.sites[site];
    let components = s.channel.components();
    let (paulis, _) = &components[component % components.len()];
    s.qubits
        .iter()
        .zip(paulis)
        .map(|(&qubit, &pauli)| Insertion {
            op: s.op,
            timing: s.timing,
            qubit,
            pauli,
        })
        .collect()
}

#[test]
fn noiseless_memory_circuits_are_deterministic() {
    for c in small_codes() {
        for basis in [Basis::Z, Basis::X] {
            for rounds in 0..=4 {
                let circ = memory_circuit(&c, basis, rounds, &Schedule::standard(&c)).unwrap();
                assert!(propagate(&circ, &[]).unwrap().is_empty());
                let s = sample(&attach_noise(&circ, &NoiseModel::noiseless()).unwrap(), 64, 5).unwrap();
                assert!(s.detectors.column_counts().iter().all(|&x| x == 0));
                assert!(s.observables.column_counts().iter().all(|&x| x == 0));
            }
        }
    }
}

#[test]
fn cnots_per_round_are_total_generator_weight() {
    for c in small_codes() {
        let circ: Circuit = memory_circuit(&c, Basis::Z, 2, &Schedule::standard(&c)).unwrap();
        assert_eq!(circ.cnot_count(), 2 * (c.hx.nnz() + c.hz.nnz()));
    }
}

#[test]
fn parameter_formulas_and_row_weights() {
    let cases = [(2, 2), (2, 3), (2, 4), (2, 5), (3, 2), (3, 3), (4, 2), (4, 3)];
    for (dim, l) in cases {
        let c = code(dim, l);
        let (n, k, d) = formula_parameters(dim, l).unwrap();
        assert_eq!((c.n, c.k), (n, k), "{dim}D L={l}");
        if let Some(found) = c.d().exact() {
            assert_eq!(found, d, "{dim}D L={l}");
        }
        let bound = if dim == 4 { 6 } else { 4 };
        if dim != 3 {
            for h in [&c.hx, &c.hz] {
                assert!((0..h.rows()).all(|i| h.row(i).weight() <= bound), "{dim}D L={l}");
            }
        }
        assert!(c.check_relations().is_ok());
    }
}

#[test]
fn tensor_products_are_complexes() {
    for l in [2, 3] {
        let c = repetition_complex(l, false).unwrap();
        let d = repetition_complex(l, true).unwrap();
        let e = c.tensor_product(&d).unwrap();
        let f = e.tensor_product(&d).unwrap();
        let g = f.tensor_product(&c).unwrap();
        let all: [&ChainComplex; 5] = [&c, &d, &e, &f, &g];
        for a in all {
            for b in all {
                let size = a.dims().iter().sum::<usize>() * b.dims().iter().sum::<usize>();
                if size > 20_000 {
                    continue;
                }
                let t = a.tensor_product(b).unwrap();
                assert!(t.validate());
                assert_eq!(t.top(), a.top() + b.top());
            }
        }
    }
}

#[test]
fn cosystolic_is_systolic_of_transpose() {
    for l in [2, 3] {
        let c = repetition_complex(l, false).unwrap();
        let d = repetition_complex(l, true).unwrap();
        let e = c.tensor_product(&d).unwrap();
        for x in [&c, &d, &e, &e.tensor_product(&d).unwrap()] {
            for i in 0..=x.top() {
                let co = x.cosystolic_distance_with_budget(i, 4, DEFAULT_SEARCH_BUDGET).unwrap();
                let sys = x.transpose().systolic_distance_with_budget(x.top() - i, 4, DEFAULT_SEARCH_BUDGET).unwrap();
                assert_eq!(co, sys);
            }
        }
    }
}

#[test]
fn windows_with_c_equal_w_partition_mechanisms() {
    let dem = build_dem(&noisy_2d(3)).unwrap();
    let layers = dem.layer_count();
    for w in 1..=layers {
        let mut owner = vec![None; dem.mechanisms.len()];
        let mut start = 0;
        while start < layers {
            let win = dem.window(w.min(layers - start), start).unwrap();
            for &m in &win.mechanisms {
                assert!(owner[m].is_none(), "mechanism {m} in two windows");
                owner[m] = Some(start);
            }
            start += w;
        }
        for (m, mech) in dem.mechanisms.iter().enumerate() {
            let rounds: Vec<usize> = mech.detectors.iter().map(|&d| dem.detector_rounds[d]).collect();
            if let (Some(&lo), Some(&hi)) = (rounds.iter().min(), rounds.iter().max()) {
                if lo / w == hi / w {
                    assert_eq!(owner[m], Some(lo / w * w));
                }
            } else {
                assert_eq!(owner[m], None);
            }
        }
    }
}

#[test]
fn reports_are_reproducible() {
    let cfg = ExperimentConfig::new(SurfaceCodeSpec::new(2, 2), vec![1, 2], 3000, 17);
    assert_eq!(run_memory(&cfg).unwrap().to_json(), run_memory(&cfg).unwrap().to_json());
}

fn random_syndrome(dem: &DetectorErrorModel, seed: u64, weight: usize) -> BitVec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = BitVec::zeros(dem.detector_count);
    for _ in 0..weight {
        let m = &dem.mechanisms[rng.gen_range(0..dem.mechanisms.len())];
        for &d in &m.detectors {
            s.flip(d);
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symptoms_are_linear(a in any::<(usize, usize)>(), b in any::<(usize, usize)>()) {
        let noisy = noisy_2d(2);
        let n = noisy.sites.len();
        let fa = site_insertions(&noisy, a.0 % n, a.1);
        let fb = site_insertions(&noisy, b.0 % n, b.1);
        let both: Vec<Insertion> = fa.iter().chain(&fb).copied().collect();
        let sa = propagate(&noisy.circuit, &fa).unwrap();
        let sb = propagate(&noisy.circuit, &fb).unwrap();
        prop_assert_eq!(propagate(&noisy.circuit, &both).unwrap(), sa.xor(&sb));
    }

    #[test]
    fn corrections_reproduce_the_syndrome(seed in any::<u64>(), weight in 1usize..5) {
        let dem = build_dem(&noisy_2d(1)).unwrap();
        let dec = BpOsdDecoder::from_dem(&dem, BpConfig::default()).unwrap();
        let s = random_syndrome(&dem, seed, weight);
        let out = dec.decode(&s).unwrap();
        prop_assert_eq!(dec.pcm().syndrome(&out.correction), s.clone());
        prop_assert_eq!(dec.decode(&s).unwrap(), out);
    }

    #[test]
    fn window_decoding_is_deterministic(seed in any::<u64>(), weight in 1usize..6) {
        let dem = build_dem(&noisy_2d(3)).unwrap();
        let dec = WindowDecoder::new(&dem, WindowConfig::new(2, 1), BpConfig::default()).unwrap();
        let s = random_syndrome(&dem, seed, weight);
        let a = dec.decode(&s, None).unwrap();
        prop_assert_eq!(dec.decode(&s, None).unwrap(), a.clone());
        if !a.failed {
            // committed mechanisms explain every detector
            let mut residual = s.clone();
            for &m in &a.committed {
                for &d in &dem.mechanisms[m].detectors {
                    residual.flip(d);
                }
            }
            prop_assert!(residual.is_zero());
        }
    }

    #[test]
    fn valid_syndromes_pass_metachecks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in [code(3, 2), code(3, 3), code(4, 2)] {
            let e = BitVec::from_bools(&(0..c.n).map(|_| rng.gen_bool(0.2)).collect::<Vec<_>>());
            for basis in [Basis::X, Basis::Z] {
                if let Some(m) = c.metachecks(basis) {
                    prop_assert!(m.mul_vec(&c.checks(basis).mul_vec(&e)).is_zero());
                }
            }
        }
    }
}
