use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use ssqec::circuit::{count_gate_scaling, hook_audit, memory_circuit, Circuit, Schedule};
use ssqec::codes::{formula_parameters, surface_code, surface_complex, Basis, CssCode, SurfaceCodeSpec};
use ssqec::decoder::{BpConfig, DecodeCache, PostselectPolicy, Postselector, WindowConfig, WindowDecoder};
use ssqec::dem::{build_dem, DetectorErrorModel};
use ssqec::experiments::{
    compare_2d_4d, fit_decay, run_memory, ComparisonConfig, DecayPoint, ExperimentConfig, ExperimentReport,
};
use ssqec::f2::{BitVec, F2Matrix};
use ssqec::noise::{attach_noise, NoiseModel, NoisyCircuit};
use ssqec::sim::{sample, Samples};

#[derive(Parser)]
#[command(name = "ssqec", version, about = "Single-shot surface code memory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surface code and print or write its matrices.
    BuildCode(BuildCode),
    /// Gate counts and the hook-error overlap report.
    Audit {
        #[arg(long, default_value = "4d:2", value_parser = SurfaceCodeSpec::parse)]
        code: SurfaceCodeSpec,
    },
    /// Write a memory circuit in text form.
    Circuit {
        #[command(flatten)]
        memory: MemoryArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the detector error model of a noisy circuit.
    Dem {
        #[command(flatten)]
        source: CircuitSource,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample detector and observable bits.
    Sample {
        #[command(flatten)]
        source: CircuitSource,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `text` (one 0/1 line per shot) or `packed` (binary).
        #[arg(long, default_value = "text")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode sampled shots against a detector error model.
    Decode(Decode),
    /// Run a memory experiment and write a JSON report plus CSV.
    Simulate(Simulate),
    /// Fit the decay model to a report.
    Fit {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// 4D single-shot against 2D with and without repeated rounds.
    Compare {
        #[arg(long, default_value = "1..4", value_parser = parse_rounds)]
        cycles: Rounds,
        #[arg(long, default_value_t = 20_000)]
        shots: usize,
        #[arg(long)]
        noise: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct BuildCode {
    #[arg(long)]
    dim: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    grade: Option<usize>,
    /// Directory for the matrix files and `params.json`.
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Args)]
struct MemoryArgs {
    #[arg(long, value_parser = SurfaceCodeSpec::parse)]
    code: SurfaceCodeSpec,
    #[arg(long, default_value = "z")]
    basis: Basis,
    #[arg(long)]
    rounds: usize,
}

#[derive(Args)]
struct CircuitSource {
    /// Circuit text file; otherwise built from `--code/--basis/--rounds`.
    #[arg(long, conflicts_with = "code")]
    circuit: Option<PathBuf>,
    #[arg(long, value_parser = SurfaceCodeSpec::parse, requires = "rounds")]
    code: Option<SurfaceCodeSpec>,
    #[arg(long, default_value = "z")]
    basis: Basis,
    #[arg(long)]
    rounds: Option<usize>,
}

impl CircuitSource {
    fn load(&self) -> Result<Circuit> {
        match (&self.circuit, self.code) {
            (Some(path), _) => Ok(Circuit::from_text(&read(path)?)?),
            (None, Some(spec)) => {
                let code = surface_code(spec)?;
                let rounds = self.rounds.context("--rounds is required with --code")?;
                Ok(memory_circuit(&code, self.basis, rounds, &Schedule::standard(&code))?)
            }
            (None, None) => bail!("give --circuit or --code"),
        }
    }
}

#[derive(Args)]
struct DecoderArgs {
    #[arg(long, default_value = "1,1")]
    window: WindowConfig,
    #[arg(long, default_value_t = 1000)]
    bp_iters: usize,
    #[arg(long, default_value_t = 10)]
    osd_order: usize,
    #[arg(long, default_value = "off")]
    postselect: PostselectPolicy,
}

impl DecoderArgs {
    fn bp(&self) -> BpConfig {
        BpConfig {
            max_iter: self.bp_iters,
            osd_order: self.osd_order,
            ..BpConfig::default()
        }
    }
}

#[derive(Args)]
struct Decode {
    #[arg(long)]
    dem: PathBuf,
    /// Samples in text or packed form.
    #[arg(long)]
    shots: PathBuf,
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Circuit the shots came from; needed for postselection and for
    /// decoding only the memory-basis detectors.
    #[arg(long)]
    circuit: Option<PathBuf>,
    #[arg(long, value_parser = SurfaceCodeSpec::parse)]
    code: Option<SurfaceCodeSpec>,
    /// Decode on every detector even when a circuit is given.
    #[arg(long)]
    all_detectors: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Simulate {
    #[arg(long, default_value = "4d:2", value_parser = SurfaceCodeSpec::parse)]
    code: SurfaceCodeSpec,
    #[arg(long, default_value = "z")]
    basis: Basis,
    /// `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "0..4", value_parser = parse_rounds)]
    rounds: Rounds,
    #[arg(long, default_value_t = 1)]
    rounds_per_cycle: usize,
    #[arg(long, default_value_t = 20_000)]
    shots: usize,
    #[arg(long)]
    noise: Option<PathBuf>,
    #[command(flatten)]
    decoder: DecoderArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON; the CSV goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Rounds(Vec<usize>);

fn parse_rounds(s: &str) -> Result<Rounds, String> {
    let bad = || format!("bad round list {s:?}");
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok(Rounds((a..=b).collect()));
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>().map(Rounds)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn noise_model(path: Option<&Path>) -> Result<NoiseModel> {
    match path {
        Some(p) => Ok(NoiseModel::from_json(&read(p)?)?),
        None => Ok(NoiseModel::default()),
    }
}

fn build_code(args: &BuildCode) -> Result<()> {
    let spec = SurfaceCodeSpec {
        dimension: args.dim,
        l: args.l,
        grade: args.grade,
    };
    let code = surface_code(spec)?;
    code.check_relations().map_err(anyhow::Error::msg)?;
    let params = json!({
        "code": spec.to_string(),
        "n": code.n,
        "k": code.k,
        "d": code.d().to_string(),
        "dz": code.distance.dz.to_string(),
        "dx": code.distance.dx.to_string(),
        "qubit_grade": code.qubit_grade,
        "counts": {
            "x_checks": code.hx.rows(),
            "z_checks": code.hz.rows(),
            "x_metachecks": code.mx.as_ref().map(F2Matrix::rows),
            "z_metachecks": code.mz.as_ref().map(F2Matrix::rows),
        },
        "formula": formula_parameters(args.dim, args.l),
    });
    let text = serde_json::to_string_pretty(&params)? + "\n";
    let Some(dir) = &args.emit else {
        print!("{text}");
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let put = |name: &str, m: &F2Matrix| fs::write(dir.join(name), m.to_text());
    put("hx.txt", &code.hx)?;
    put("hz.txt", &code.hz)?;
    if let Some(m) = &code.mx {
        put("mx.txt", m)?;
    }
    if let Some(m) = &code.mz {
        put("mz.txt", m)?;
    }
    put("logicals_x.txt", &F2Matrix::from_rows(code.n, code.logicals_x.clone()))?;
    put("logicals_z.txt", &F2Matrix::from_rows(code.n, code.logicals_z.clone()))?;
    let complex = surface_complex(args.dim, args.l)?;
    for i in 1..=complex.top() {
        put(&format!("boundary_{i}.txt"), &complex.boundary(i))?;
    }
    fs::write(dir.join("params.json"), text)?;
    Ok(())
}

fn audit(spec: SurfaceCodeSpec) -> Result<()> {
    let code = surface_code(spec)?;
    let circ = memory_circuit(&code, Basis::Z, 1, &Schedule::standard(&code))?;
    println!("code {spec}: [[{}, {}, {}]]", code.n, code.k, code.d());
    println!("cnots per round: {}", circ.cnot_count());
    println!("hadamards per round: {}", circ.count(ssqec::circuit::OpKind::Hadamard));
    println!("depth per round: {}", circ.depth());
    if matches!(spec.dimension, 2 | 4) {
        println!("cnots per decoding cycle: {}", count_gate_scaling(spec.dimension, spec.l)?);
    }
    let report = hook_audit(&code);
    println!(
        "hook audit: {} generators against {} X and {} Z logicals",
        report.generators, report.logicals_x, report.logicals_z
    );
    for (overlap, count) in &report.histogram {
        println!("  overlap {overlap}: {count} pairs");
    }
    println!("max overlap {}: {}", report.max_overlap, if report.pass { "pass" } else { "FAIL" });
    if !report.pass {
        bail!("a generator overlaps a minimum-weight logical on more than 2 qubits");
    }
    Ok(())
}

fn noisy(source: &CircuitSource, noise: Option<&Path>) -> Result<NoisyCircuit> {
    Ok(attach_noise(&source.load()?, &noise_model(noise)?)?)
}

fn load_samples(path: &Path, dem: &DetectorErrorModel) -> Result<Samples> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"SSQS") {
        return Ok(Samples::read_packed(&bytes[..])?);
    }
    let text = String::from_utf8(bytes).context("shots file is neither packed nor text")?;
    Ok(Samples::read_text(&text, dem.detector_count, dem.observable_count)?)
}

fn decode(args: &Decode) -> Result<()> {
    let full = DetectorErrorModel::from_text(&read(&args.dem)?)?;
    let samples = load_samples(&args.shots, &full)?;
    if samples.detectors.cols() != full.detector_count {
        bail!(
            "shots have {} detectors, model has {}",
            samples.detectors.cols(),
            full.detector_count
        );
    }
    let circuit = args.circuit.as_deref().map(|p| Ok::<_, anyhow::Error>(Circuit::from_text(&read(p)?)?)).transpose()?;
    let keep: Vec<usize> = match (&circuit, args.all_detectors) {
        (Some(c), false) => {
            let basis = c.layout.context("circuit has no memory layout")?.basis;
            (0..full.detector_count).filter(|&d| c.detectors[d].basis == basis).collect()
        }
        _ => (0..full.detector_count).collect(),
    };
    let dem = full.restrict(&keep);
    let cfg = args.decoder.bp();
    let decoder = WindowDecoder::new(&dem, args.decoder.window, cfg)?;
    let postselector = match args.decoder.postselect {
        PostselectPolicy::Off => None,
        policy => {
            let circuit = circuit.as_ref().context("--postselect needs --circuit")?;
            let spec = args.code.context("--postselect needs --code")?;
            let ps = Postselector::new(&surface_code(spec)?, circuit, policy, cfg)?;
            if let Some(w) = ps.warning() {
                log::warn!("{w}");
            }
            Some(ps)
        }
    };
    let select = |d: &BitVec| BitVec::from_indices(keep.len(), keep.iter().enumerate().filter(|(_, &g)| d.get(g)).map(|(i, _)| i));
    let mut cache = DecodeCache::new(1 << 16);
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    writeln!(out, "shot,predicted,actual,kept,converged")?;
    let bits = |v: &BitVec| (0..v.len()).map(|i| if v.get(i) { '1' } else { '0' }).collect::<String>();
    let (mut kept_total, mut failures) = (0usize, 0usize);
    for shot in 0..samples.shots() {
        let mut detectors = samples.detectors.row(shot);
        let actual = samples.observables.row(shot);
        let mut kept = true;
        if let Some(ps) = &postselector {
            let o = ps.apply(&detectors)?;
            kept = o.keep;
            detectors = o.detectors;
        }
        let outcome = decoder.decode(&select(&detectors), Some(&mut cache))?;
        if kept {
            kept_total += 1;
            failures += (outcome.failed || outcome.predicted != actual) as usize;
        }
        writeln!(
            out,
            "{shot},{},{},{},{}",
            bits(&outcome.predicted),
            bits(&actual),
            kept as u8,
            outcome.converged as u8
        )?;
    }
    out.flush()?;
    eprintln!("{} shots, {kept_total} kept, {failures} logical failures", samples.shots());
    Ok(())
}

fn simulate(args: &Simulate) -> Result<()> {
    let cfg = ExperimentConfig {
        basis: args.basis,
        rounds_per_cycle: args.rounds_per_cycle,
        noise: noise_model(args.noise.as_deref())?,
        window: args.decoder.window,
        decoder: args.decoder.bp(),
        postselect: args.decoder.postselect,
        ..ExperimentConfig::new(args.code, args.rounds.0.clone(), args.shots, args.seed)
    };
    let report = run_memory(&cfg)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    match &args.out {
        Some(path) => {
            fs::write(path, report.to_json() + "\n")?;
            fs::write(path.with_extension("csv"), report.to_csv())?;
        }
        None => println!("{}", report.to_json()),
    }
    print_fit(&report);
    Ok(())
}

fn print_fit(report: &ExperimentReport) {
    for (label, fit) in [("postselected", &report.fit), ("raw", &report.raw_fit)] {
        match fit {
            Some(f) => eprintln!(
                "{label}: p_spam = {:.4e} ± {:.2e}, p_cycle = {:.4e} ± {:.2e} (chi2 {:.2}, {} points)",
                f.p_spam, f.sigma_p_spam, f.p_cycle, f.sigma_p_cycle, f.chi2, f.used
            ),
            None => eprintln!("{label}: not enough points to fit"),
        }
    }
}

fn fit(input: &Path) -> Result<()> {
    let report: ExperimentReport = serde_json::from_str(&read(input)?).context("parsing report")?;
    let points: Vec<DecayPoint> = report
        .points
        .iter()
        .filter_map(|p| DecayPoint::from_counts(p.r, p.failures, p.kept).ok())
        .collect();
    let f = fit_decay(&points)?;
    for (i, why) in &f.excluded {
        eprintln!("point {i} excluded: {why}");
    }
    println!("p_spam = {:.6e} ± {:.3e}", f.p_spam, f.sigma_p_spam);
    println!("p_cycle = {:.6e} ± {:.3e}", f.p_cycle, f.sigma_p_cycle);
    println!("chi2 = {:.4} over {} points", f.chi2, f.used);
    Ok(())
}

fn compare(cycles: Rounds, shots: usize, noise: Option<&Path>, seed: u64, out: Option<&Path>) -> Result<()> {
    let cfg = ComparisonConfig {
        cycles: cycles.0,
        shots,
        noise: noise_model(noise)?,
        decoder: BpConfig::default(),
        seed,
        ft_rounds_per_cycle: 4,
        l_4d: 2,
        l_2d: 4,
    };
    let rows = compare_2d_4d(&cfg)?;
    let mut table = String::from("protocol,window,cnots_per_cycle,p_cycle,sigma_p_cycle,hardware_p_cycle,hardware_sigma\n");
    for r in &rows {
        let (p, s) = r.fit.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.p_cycle, f.sigma_p_cycle));
        table.push_str(&format!(
            "{},\"{},{}\",{},{:.4e},{:.2e},{},{}\n",
            r.protocol, r.window.w, r.window.c, r.cnots_per_cycle, p, s, r.hardware_p_cycle.0, r.hardware_p_cycle.1
        ));
    }
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&rows)? + "\n")?;
    }
    print!("{table}");
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::BuildCode(args) => build_code(&args),
        Command::Audit { code } => audit(code),
        Command::Circuit { memory, out } => {
            let code: CssCode = surface_code(memory.code)?;
            let circ = memory_circuit(&code, memory.basis, memory.rounds, &Schedule::standard(&code))?;
            write_out(out.as_deref(), &circ.to_text())
        }
        Command::Dem { source, noise, out } => {
            let dem = build_dem(&noisy(&source, noise.as_deref())?)?;
            write_out(out.as_deref(), &dem.to_text())
        }
        Command::Sample {
            source,
            noise,
            shots,
            seed,
            format,
            out,
        } => {
            let samples = sample(&noisy(&source, noise.as_deref())?, shots, seed)?;
            let mut w: Box<dyn Write> = match &out {
                Some(p) => Box::new(BufWriter::new(fs::File::create(p)?)),
                None => Box::new(BufWriter::new(std::io::stdout().lock())),
            };
            match format.as_str() {
                "text" => samples.write_text(&mut w)?,
                "packed" => samples.write_packed(&mut w)?,
                other => bail!("unknown sample format {other:?}"),
            }
            w.flush()?;
            Ok(())
        }
        Command::Decode(args) => decode(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Fit { input } => fit(&input),
        Command::Compare {
            cycles,
            shots,
            noise,
            seed,
            out,
        } => compare(cycles, shots, noise.as_deref(), seed, out.as_deref()),
    }
}
