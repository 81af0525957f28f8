//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! reports a PASS/FAIL line even when an earlier one fails.

mod support;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use ssqec::chain::{kunneth_dim, product_distance, ChainComplex, Distance, DistanceProfile};
use ssqec::circuit::{count_gate_scaling, hook_audit, memory_circuit, Circuit, Schedule};
use ssqec::codes::{repetition_complex, surface_code, Basis, CssCode, SearchLimits, SurfaceCodeSpec};
use ssqec::decoder::{DecodeCache, PostselectPolicy, WindowConfig};
use ssqec::dem::build_dem_with_sources;
use ssqec::experiments::{
    decay_model, fit_decay, run_memory, DecayFit, DecayPoint, ExperimentConfig, ExperimentReport, MemoryPipeline,
};
use ssqec::f2::{BitVec, F2Matrix};
use ssqec::noise::{attach_noise, NoiseModel, NoisyCircuit};
use ssqec::sim::{inject_fault, sample, Symptom};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn code(dim: usize, l: usize) -> CssCode {
    surface_code(SurfaceCodeSpec::new(dim, l)).expect("code builds")
}

/// Every elementary fault of a noisy circuit with its symptom.
fn all_faults(noisy: &NoisyCircuit) -> Vec<((usize, usize), Symptom)> {
    let mut out = Vec::new();
    for (s, site) in noisy.sites.iter().enumerate() {
        for (c, (paulis, _)) in site.channel.components().iter().enumerate() {
            out.push(((s, c), inject_fault(noisy, s, paulis).expect("injectable")));
        }
    }
    out
}

fn construction() -> Check {
    let start = Instant::now();
    let cases = [
        ((4, 2), (33, 1, 4)),
        ((2, 4), (25, 1, 4)),
        ((2, 2), (5, 1, 2)),
        ((2, 3), (13, 1, 3)),
        ((3, 2), (12, 1, 2)),
    ];
    let mut seen = Vec::new();
    for ((dim, l), (n, k, d)) in cases {
        let c = code(dim, l);
        ensure(c.n == n && c.k == k && c.d() == Distance::Finite(d), || {
            format!("{dim}D L={l}: got n={} k={} d={}", c.n, c.k, c.d())
        })?;
        c.check_relations().map_err(|e| format!("{dim}D L={l}: {e}"))?;
        ensure(c.hx.mul(&c.hz.transpose()).is_zero(), || format!("{dim}D L={l}: H_X H_Z^T != 0"))?;
        if let Some(m) = &c.mz {
            ensure(m.mul(&c.hz).is_zero(), || format!("{dim}D L={l}: M_Z H_Z != 0"))?;
        }
        if let Some(m) = &c.mx {
            ensure(m.mul(&c.hx).is_zero(), || format!("{dim}D L={l}: M_X H_X != 0"))?;
        }
        if (dim, l) == (4, 2) {
            let mx = c.mx.as_ref().ok_or("4D code lacks M_X")?;
            let mz = c.mz.as_ref().ok_or("4D code lacks M_Z")?;
            ensure(
                c.hx.rows() == 20 && c.hz.rows() == 20 && mx.rows() == 4 && mz.rows() == 4,
                || {
                    format!(
                        "4D check counts {}+{}, metachecks {}+{}",
                        c.hx.rows(),
                        c.hz.rows(),
                        mx.rows(),
                        mz.rows()
                    )
                },
            )?;
        }
        seen.push(format!("[[{n},{k},{d}]]"));
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(10), || format!("took {t:?}"))?;
    Ok(format!("{} in {t:.2?}", seen.join(" ")))
}

fn kunneth_and_distance() -> Check {
    let mut grades = 0;
    let mut exact = 0;
    let (cap, budget) = (6, 20_000_000);
    for l in [2, 3] {
        let c = repetition_complex(l, false).unwrap();
        let d = repetition_complex(l, true).unwrap();
        let e = c.tensor_product(&d).unwrap();
        let g = e.tensor_product(&d).unwrap();
        let products: [(&str, &ChainComplex, &ChainComplex); 3] = [("C⊗D", &c, &d), ("E⊗D", &e, &d), ("(E⊗D)⊗C", &g, &c)];
        for (name, a, b) in products {
            let t = a.tensor_product(b).unwrap();
            ensure(t.validate(), || format!("{name} L={l} is not a complex"))?;
            let pa = DistanceProfile::compute(a, cap, budget);
            let pb = DistanceProfile::compute(b, cap, budget);
            for grade in 0..=t.top() {
                let h = t.homology_dim(grade).unwrap();
                let kd = kunneth_dim(a, b, grade).unwrap();
                ensure(h == kd, || format!("{name} L={l} grade {grade}: homology {h}, Künneth {kd}"))?;
                grades += 1;
                let predicted = product_distance(&pa, &pb, grade);
                // largest cap the budget allows
                let searched = (1..=cap).rev().find_map(|k| t.systolic_distance_with_budget(grade, k, budget).ok());
                let Some(searched) = searched else { continue };
                match (predicted, searched) {
                    (_, Distance::AtLeast(lo)) => {
                        if let Some(p) = predicted.exact() {
                            ensure(p >= lo, || format!("{name} L={l} grade {grade}: formula {p} below search bound {lo}"))?;
                        }
                    }
                    (p, s) if p.is_exact() => {
                        ensure(p == s, || format!("{name} L={l} grade {grade}: formula {p}, search {s}"))?;
                        exact += 1;
                    }
                    _ => {}
                }
            }
        }
    }
    Ok(format!("{grades} grades match Künneth, {exact} distances confirmed by search"))
}

fn gate_counts() -> Check {
    let per_round = |dim: usize, l: usize| {
        let c = code(dim, l);
        memory_circuit(&c, Basis::Z, 3, &Schedule::standard(&c)).unwrap().cnot_count() / 3
    };
    let (four, two) = (per_round(4, 2), per_round(2, 4));
    let c2 = code(2, 4);
    let ft_circuit = memory_circuit(&c2, Basis::Z, 4, &Schedule::standard(&c2)).unwrap().cnot_count();
    let ft_cycle = count_gate_scaling(2, 4).map_err(|e| e.to_string())?;
    let single_shot = count_gate_scaling(4, 2).map_err(|e| e.to_string())?;
    ensure(four == 168 && single_shot == 168, || format!("4D per round {four} / {single_shot}"))?;
    ensure(two == 84, || format!("2D per round {two}"))?;
    ensure(ft_cycle == 336 && ft_circuit == 336, || format!("FT 2D cycle {ft_cycle} / {ft_circuit}"))?;
    Ok(format!("4D {four}, 2D {two}, FT 2D cycle {ft_cycle}"))
}

fn hooks() -> Check {
    let c = code(4, 2);
    ensure(c.logicals_minimal, || "logicals not minimal".into())?;
    let r = hook_audit(&c);
    ensure(r.pass && r.max_overlap <= 2, || format!("max overlap {} ({:?})", r.max_overlap, r.histogram))?;
    Ok(format!(
        "{} generators × {}+{} minimum-weight logicals, max overlap {}, histogram {:?}",
        r.generators, r.logicals_x, r.logicals_z, r.max_overlap, r.histogram
    ))
}

fn four_d_noisy(rounds: usize) -> (CssCode, Circuit, NoisyCircuit) {
    let c = code(4, 2);
    let circ = memory_circuit(&c, Basis::Z, rounds, &Schedule::standard(&c)).unwrap();
    let noisy = attach_noise(&circ, &NoiseModel::default()).unwrap();
    (c, circ, noisy)
}

fn dem_fidelity() -> Check {
    let (_, _, noisy) = four_d_noisy(2);
    let build = build_dem_with_sources(&noisy).map_err(|e| e.to_string())?;
    let faults: HashMap<(usize, usize), Symptom> = all_faults(&noisy).into_iter().collect();
    let mut covered = 0;
    for (m, sources) in build.dem.mechanisms.iter().zip(&build.sources) {
        for f in sources {
            let s = &faults[&(f.site, f.component)];
            ensure(*s == m.symptom(), || format!("fault {f:?}: injected {s:?}, model {:?}", m.symptom()))?;
            covered += 1;
        }
    }
    let detectable = faults.values().filter(|s| !s.is_empty()).count();
    ensure(covered == detectable, || format!("{covered} faults in the model, {detectable} with symptoms"))?;

    let shots = 1_000_000;
    let samples = sample(&noisy, shots, 2024).map_err(|e| e.to_string())?;
    let counts = samples.detectors.column_counts();
    let mut worst = 0.0f64;
    for (d, (&count, p)) in counts.iter().zip(build.dem.detector_marginals()).enumerate() {
        let sigma = (p * (1.0 - p) / shots as f64).sqrt();
        let z = (count as f64 / shots as f64 - p).abs() / sigma;
        worst = worst.max(z);
        ensure(z <= 4.0, || format!("detector {d}: {count}/{shots} vs {p:.3e} ({z:.1}σ)"))?;
    }
    Ok(format!(
        "{} mechanisms from {covered} faults; {} detector marginals within {worst:.2}σ",
        build.dem.mechanisms.len(),
        counts.len()
    ))
}

fn decoder_soundness() -> Check {
    let start = Instant::now();
    let (c, _, noisy) = four_d_noisy(2);
    let mut cfg = ExperimentConfig::new(SurfaceCodeSpec::new(4, 2), vec![2], 1, 0);
    cfg.window = WindowConfig::new(1, 1);
    cfg.postselect = PostselectPolicy::Discard;
    let pipe = MemoryPipeline::new(&c, &cfg, 2).map_err(|e| e.to_string())?;
    let faults = all_faults(&noisy);
    let dets = noisy.circuit.detectors.len();
    let obs = noisy.circuit.observables.len();
    let mut cache = DecodeCache::new(1 << 16);
    let (mut corrected, mut rejected) = (0, 0);
    for (f, s) in &faults {
        let d = BitVec::from_indices(dets, s.detectors.iter().copied());
        let o = BitVec::from_indices(obs, s.observables.iter().copied());
        let (kept, fail, _, _) = pipe.decode_shot(&d, &o, &mut cache).map_err(|e| e.to_string())?;
        ensure(!(kept && fail), || format!("silent logical failure from fault {f:?}: {s:?}"))?;
        if kept {
            corrected += 1;
        } else {
            rejected += 1;
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(600), || format!("took {t:?}"))?;
    Ok(format!(
        "{} single faults: {corrected} corrected, {rejected} rejected, 0 silent ({t:.1?})",
        faults.len()
    ))
}

fn fit_of(report: &ExperimentReport) -> Result<DecayFit, String> {
    report.fit.clone().ok_or_else(|| "no fit".to_string())
}

/// Largest deviation of any point from the fitted curve, in point σ.
fn fit_residual(report: &ExperimentReport, fit: &DecayFit) -> f64 {
    report
        .points
        .iter()
        .map(|p| {
            let pt = DecayPoint::from_counts(p.r, p.failures, p.kept).unwrap();
            (pt.p_log - decay_model(fit.p_spam, fit.p_cycle, pt.r)).abs() / pt.sigma
        })
        .fold(0.0, f64::max)
}

fn suppression() -> Check {
    let mut lines = Vec::new();
    let scales = [1.0, 0.5, 0.25];
    let mut fits = Vec::new();
    for (i, &scale) in scales.iter().enumerate() {
        let mut cfg = ExperimentConfig::new(SurfaceCodeSpec::new(4, 2), vec![1, 2, 3, 4], 200_000, 700 + i as u64);
        cfg.noise = NoiseModel::default().scaled(scale);
        let report = run_memory(&cfg).map_err(|e| e.to_string())?;
        let fit = fit_of(&report)?;
        let resid = fit_residual(&report, &fit);
        lines.push(format!(
            "4D p2={:.3e}: p_cycle {:.3e} ± {:.1e} (max residual {resid:.1}σ)",
            cfg.noise.p2, fit.p_cycle, fit.sigma_p_cycle
        ));
        ensure(resid <= 3.0, || format!("{}: points off the decay curve by {resid:.1}σ", lines.join("; ")))?;
        fits.push(fit);
    }
    for w in fits.windows(2) {
        let gap = w[0].p_cycle - w[1].p_cycle;
        let sigma = w[0].sigma_p_cycle.hypot(w[1].sigma_p_cycle);
        ensure(gap > 3.0 * sigma, || format!("{}: p_cycle not decreasing at 3σ", lines.join("; ")))?;
    }
    let mut non_ft = ExperimentConfig::new(SurfaceCodeSpec::new(2, 4), vec![1, 2, 3, 4], 100_000, 710);
    non_ft.window = WindowConfig::new(1, 1);
    let mut ft = ExperimentConfig::new(SurfaceCodeSpec::new(2, 4), vec![1, 2, 3, 4], 100_000, 711);
    ft.rounds_per_cycle = 4;
    ft.window = WindowConfig::new(4, 4);
    let f_non = fit_of(&run_memory(&non_ft).map_err(|e| e.to_string())?)?;
    let f_ft = fit_of(&run_memory(&ft).map_err(|e| e.to_string())?)?;
    let f_4d = &fits[0];
    lines.push(format!(
        "2D non-FT {:.3e} ± {:.1e}, 2D FT {:.3e} ± {:.1e}",
        f_non.p_cycle, f_non.sigma_p_cycle, f_ft.p_cycle, f_ft.sigma_p_cycle
    ));
    let ft_gap = f_ft.p_cycle - f_non.p_cycle;
    ensure(ft_gap > 3.0 * f_ft.sigma_p_cycle.hypot(f_non.sigma_p_cycle), || {
        format!("{}: FT 2D not above non-FT 2D at 3σ", lines.join("; "))
    })?;
    let near = (f_non.p_cycle - f_4d.p_cycle).abs();
    ensure(near < 3.0 * f_non.sigma_p_cycle.hypot(f_4d.sigma_p_cycle), || {
        format!("{}: non-FT 2D and 4D differ by more than 3σ", lines.join("; "))
    })?;
    Ok(lines.join("; "))
}

fn fit_recovery() -> Check {
    let (p_spam, p_cycle) = (1.5e-3, 2.5e-3);
    let shots = 100_000u64;
    let rs = [0usize, 1, 2, 3, 4];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trials = 1000;
    let mut good = 0;
    for _ in 0..trials {
        let pts: Vec<DecayPoint> = rs
            .iter()
            .map(|&r| {
                let p = decay_model(p_spam, p_cycle, r as f64);
                let f = Binomial::new(shots, p).unwrap().sample(&mut rng) as usize;
                DecayPoint::from_counts(r, f, shots as usize).unwrap()
            })
            .collect();
        if let Ok(fit) = fit_decay(&pts) {
            let rel = |x: f64, t: f64| (x - t).abs() / t;
            if rel(fit.p_spam, p_spam) < 0.1 && rel(fit.p_cycle, p_cycle) < 0.1 {
                good += 1;
            }
        }
    }
    let msg = format!("{good}/{trials} trials within 10% on both parameters (need >= 950)");
    ensure(good * 100 >= trials * 95, || msg.clone())?;
    Ok(msg)
}

fn postselection() -> Check {
    let mut cfg = ExperimentConfig::new(SurfaceCodeSpec::new(4, 2), vec![0, 1, 2, 3, 4], 50_000, 900);
    cfg.postselect = PostselectPolicy::Discard;
    let report = run_memory(&cfg).map_err(|e| e.to_string())?;
    let summary: Vec<String> = report
        .points
        .iter()
        .map(|p| {
            format!(
                "r={} kept {:.3} p_log {:.2e} raw {:.2e}",
                p.r,
                p.kept as f64 / p.shots as f64,
                p.p_log.unwrap_or(f64::NAN),
                p.raw_p_log
            )
        })
        .collect();
    let summary = summary.join("; ");
    let frac = |p: &ssqec::experiments::MemoryPoint| {
        let f = p.kept as f64 / p.shots as f64;
        (f, (f * (1.0 - f) / p.shots as f64).sqrt())
    };
    for w in report.points.windows(2) {
        let ((a, sa), (b, sb)) = (frac(&w[0]), frac(&w[1]));
        ensure(a - b > 3.0 * sa.hypot(sb), || format!("{summary}: kept fraction not decreasing at r={}", w[1].r))?;
    }
    for p in &report.points {
        let pt = DecayPoint::from_counts(p.r, p.failures, p.kept).map_err(|e| e.to_string())?;
        ensure(pt.p_log <= p.raw_p_log + 3.0 * pt.sigma.hypot(p.raw_sigma), || {
            format!("{summary}: postselected p_log above raw at r={}", p.r)
        })?;
    }
    Ok(summary)
}

fn steane() -> CssCode {
    let h = F2Matrix::from_dense(&[
        &[1, 0, 1, 0, 1, 0, 1],
        &[0, 1, 1, 0, 0, 1, 1],
        &[0, 0, 0, 1, 1, 1, 1],
    ]);
    CssCode::from_matrices(h.clone(), h, None, None, SearchLimits::default()).unwrap()
}

fn four_two_two() -> CssCode {
    let h = F2Matrix::from_dense(&[&[1, 1, 1, 1]]);
    CssCode::from_matrices(h.clone(), h, None, None, SearchLimits::default()).unwrap()
}

fn tableau_cross_check() -> Check {
    let noise = NoiseModel {
        p_idle: 1e-3,
        ..NoiseModel::default()
    };
    let codes = [("[[5,1,2]]", code(2, 2), 3), ("[[4,2,2]]", four_two_two(), 3), ("[[7,1,3]]", steane(), 2)];
    let mut circuits = 0;
    let mut insertions = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for (name, c, max_rounds) in &codes {
        for basis in [Basis::Z, Basis::X] {
            for rounds in 0..=*max_rounds {
                let circ = memory_circuit(c, basis, rounds, &Schedule::standard(c)).unwrap();
                if circ.num_qubits > 12 {
                    continue;
                }
                let noisy = attach_noise(&circ, &noise).unwrap();
                let tag = format!("{name} {basis} r={rounds}");
                for _ in 0..4 {
                    let (d, o) = support::tableau::parities(&circ, &support::tableau::run(&circ, &[], &mut rng));
                    ensure(!d.contains(&true) && !o.contains(&true), || format!("{tag}: noiseless reference not quiet"))?;
                }
                for (f, symptom) in all_faults(&noisy) {
                    let s = &noisy.sites[f.0];
                    let (paulis, _) = &s.channel.components()[f.1];
                    let ins: Vec<_> = s
                        .qubits
                        .iter()
                        .zip(paulis)
                        .map(|(&qubit, &pauli)| ssqec::sim::Insertion {
                            op: s.op,
                            timing: s.timing,
                            qubit,
                            pauli,
                        })
                        .collect();
                    for _ in 0..2 {
                        let (d, o) = support::tableau::parities(&circ, &support::tableau::run(&circ, &ins, &mut rng));
                        let ones = |v: &[bool]| v.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect::<Vec<_>>();
                        let reference = Symptom {
                            detectors: ones(&d),
                            observables: ones(&o),
                        };
                        ensure(reference == symptom, || {
                            format!("{tag} fault {f:?}: tableau {reference:?}, frame {symptom:?}")
                        })?;
                    }
                    insertions += 1;
                }
                // the sampler itself is quiet without noise
                let quiet = sample(&attach_noise(&circ, &NoiseModel::noiseless()).unwrap(), 256, 1).unwrap();
                ensure(quiet.detectors.column_counts().iter().all(|&x| x == 0), || format!("{tag}: noiseless samples fire"))?;
                circuits += 1;
            }
        }
    }
    Ok(format!("{circuits} circuits, {insertions} single-fault insertions agree"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("construction exactness", construction),
        ("homology and Künneth", kunneth_and_distance),
        ("gate counts", gate_counts),
        ("hook audit", hooks),
        ("DEM fidelity", dem_fidelity),
        ("decoder soundness", decoder_soundness),
        ("single-shot suppression", suppression),
        ("fit self-consistency", fit_recovery),
        ("postselection behavior", postselection),
        ("tableau cross-validation", tableau_cross_check),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("{:>2} {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let t = start.elapsed();
        match result {
            Ok(detail) => println!("PASS {label} [{t:.1?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label} [{t:.1?}]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
