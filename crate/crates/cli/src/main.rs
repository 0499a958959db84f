//! Command-line front end.
//!
//! Exit codes: 0 ok, 1 structurally invalid instance, 2 unreadable or
//! malformed input, 3 usage or formula/algebra mismatch, 4 flow blowup or
//! invariant drift, 5 generation failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind, Parser, Subcommand, ValueEnum};

use pluriclosed::bismut::{
    rho_11, rho_general_with_frame, rho_two_step_with_frame, seminegativity_gap, static_residual,
    RicciForm,
};
use pluriclosed::flow::{check_equivalence, integrate, FlowControls, FlowKind, FlowStatus, Trajectory};
use pluriclosed::generate::{generate_instance, seed_stream, GenControls};
use pluriclosed::liealg::DEFAULT_TOL;
use pluriclosed::{catalog, read_instance, to_instance_string, write_instance, ComplexStructure};
use pluriclosed::{Error, HermitianStructure, InstanceSpec, Metric};

#[derive(Parser, Debug)]
#[command(name = "pluriclosed", version, about = "Invariant Hermitian geometry on Lie algebras")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural, Hermitian and SKT checks.
    Validate {
        /// Instance file, or `catalog:NAME`.
        path: String,
    },
    /// Bismut–Ricci form, its (1,1)-part, seminegativity and static residual.
    Rho {
        path: String,
        #[arg(long, value_enum, default_value_t = Formula::General)]
        formula: Formula,
        /// Rotate the unitary frame by a seeded random unitary matrix.
        #[arg(long = "frame-seed")]
        frame_seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Output::Text)]
        output: Output,
    },
    /// Integrate the pluriclosed flow, the bracket flow, or both.
    Flow {
        path: String,
        #[arg(long, value_enum, default_value_t = Kind::Pcf)]
        kind: Kind,
        #[arg(long = "t-end", default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-8)]
        rtol: f64,
        /// Trajectory CSV; with `--kind both`, `.pcf` / `.bracket` are inserted
        /// before the extension.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Generate SKT instances on 2-step nilpotent algebras.
    Search {
        /// Non-central and central dimensions.
        #[arg(long, num_args = 2, value_names = ["P", "Q"], required = true)]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a built-in instance in file format.
    Catalog {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Formula {
    TwoStep,
    General,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Output {
    Text,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Kind {
    Pcf,
    Bracket,
    Both,
}

struct Failure {
    code: u8,
    msg: String,
}

fn fail(code: u8, msg: impl Into<String>) -> Failure {
    Failure {
        code,
        msg: msg.into(),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } | Error::Io(_) | Error::UnknownInstance(_) => 2,
            Error::NotTwoStep(_) | Error::InvalidArgument(_) | Error::SamplingMismatch(_) => 3,
            Error::InvariantDrift { .. } | Error::Conditioning(_) => 4,
            _ => 1,
        };
        fail(code, e.to_string())
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let result = match cli.command {
        Command::Validate { path } => cmd_validate(&path),
        Command::Rho {
            path,
            formula,
            frame_seed,
            output,
        } => cmd_rho(&path, formula, frame_seed, output),
        Command::Flow {
            path,
            kind,
            t_end,
            rtol,
            csv,
        } => cmd_flow(&path, kind, t_end, rtol, csv.as_deref()),
        Command::Search {
            dims,
            count,
            seed,
            out,
        } => cmd_search(dims[0], dims[1], count, seed, &out),
        Command::Catalog { name, out } => cmd_catalog(&name, out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &str) -> Result<InstanceSpec, Failure> {
    if let Some(name) = path.strip_prefix("catalog:") {
        return Ok(catalog(name)?);
    }
    read_instance(path).map_err(|e| match e {
        Error::Io(io) => fail(2, format!("{path}: {io}")),
        Error::Parse { line, msg } => fail(2, format!("{path}:{line}: {msg}")),
        other => other.into(),
    })
}

fn structure(spec: &InstanceSpec) -> Result<HermitianStructure, Failure> {
    spec.hermitian()
        .map_err(|e| fail(1, format!("invalid instance: {e}")))
}

/// 12 significant digits, trailing zeros trimmed.
fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if (1e-4..1e12).contains(&a) {
        let digits = (11 - a.log10().floor() as i32).max(0) as usize;
        let s = format!("{x:.digits$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "true"
    } else {
        "false"
    }
}

fn cmd_validate(path: &str) -> CmdResult {
    let spec = load(path)?;
    let a = &spec.algebra;
    let n = spec.dim();
    println!("instance: {} (dim {n})", spec.name);
    let r = a.check_structure(DEFAULT_TOL);
    println!("antisymmetry: {} (residual {:.3e})", verdict(r.antisymmetry_ok), r.antisymmetry_residual);
    println!("jacobi: {} (residual {:.3e})", verdict(r.jacobi_ok), r.jacobi_residual);
    println!("two_step: {} (residual {:.3e})", verdict(r.two_step), a.two_step_residual());
    println!("center_dim: {}", r.center_dim);

    let jsq = (&spec.j * &spec.j + nalgebra_identity(n)).amax();
    let j = ComplexStructure::new(spec.j.clone());
    println!("J_squared_minus_identity: {} (residual {jsq:.3e})", verdict(j.is_ok()));
    let integrable = match &j {
        Ok(j) => {
            let ok = j.is_integrable(a, DEFAULT_TOL);
            println!("J_integrable: {} (Nijenhuis residual {:.3e})", verdict(ok), j.nijenhuis_residual(a));
            ok
        }
        Err(_) => {
            println!("J_integrable: false (J is not a complex structure)");
            false
        }
    };
    let metric = Metric::new(spec.g.clone());
    println!(
        "metric_positive_definite: {}{}",
        verdict(metric.is_ok()),
        metric.as_ref().err().map(|e| format!(" ({e})")).unwrap_or_default()
    );
    let herm = (spec.j.transpose() * &spec.g * &spec.j - &spec.g).amax();
    let herm_ok = herm <= 1e-10 * spec.g.amax();
    println!("hermitian: {} (residual {herm:.3e})", verdict(herm_ok));

    let structural = r.antisymmetry_ok && r.jacobi_ok && j.is_ok() && integrable && metric.is_ok() && herm_ok;
    if !structural {
        println!("SKT: not evaluated");
        println!("valid: false");
        return Ok(1);
    }
    let h = structure(&spec)?;
    let skt = h.skt_check(DEFAULT_TOL)?;
    println!(
        "SKT: {} (residual {:.3e}, threshold {:.3e})",
        verdict(skt.is_skt),
        skt.residual_norm,
        skt.threshold
    );
    println!("valid: true");
    Ok(0)
}

fn nalgebra_identity(n: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::identity(n, n)
}

fn combination(form: &RicciForm) -> String {
    let m = form.matrix();
    let cut = 1e-12 * m.amax().max(1.0);
    let mut s = String::new();
    for (i, j, v) in form.terms(cut) {
        let mag = fmt12(v.abs());
        if s.is_empty() {
            if v < 0.0 {
                s.push('-');
            }
        } else {
            s.push_str(if v < 0.0 { " - " } else { " + " });
        }
        s.push_str(&format!("{mag} e{}{}", i + 1, j + 1));
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

fn cmd_rho(path: &str, formula: Formula, frame_seed: Option<u64>, output: Output) -> CmdResult {
    let spec = load(path)?;
    let h = structure(&spec)?;
    let frame = match frame_seed {
        Some(seed) => h.unitary_frame_seeded(seed)?,
        None => h.unitary_frame()?,
    };
    let rho = match formula {
        Formula::General => rho_general_with_frame(&h, &frame)?,
        Formula::TwoStep => rho_two_step_with_frame(&h, &frame).map_err(|e| match e {
            Error::NotTwoStep(r) => fail(
                3,
                format!("the two-step formula needs a 2-step nilpotent algebra (residual {r:.3e}); use --formula general"),
            ),
            other => other.into(),
        })?,
    };
    let r11 = rho_11(&h, &rho);
    let semi = seminegativity_gap(&h)?;
    let stat = static_residual(&h)?;
    let n = spec.dim();
    match output {
        Output::Csv => {
            println!("i,j,rho,rho11");
            for i in 0..n {
                for j in (i + 1)..n {
                    println!(
                        "{},{},{:.16e},{:.16e}",
                        i + 1,
                        j + 1,
                        rho.coefficient(i, j),
                        r11.coefficient(i, j)
                    );
                }
            }
        }
        Output::Text => {
            println!("instance: {} (dim {n})", spec.name);
            println!(
                "formula: {}",
                if formula == Formula::General { "general" } else { "two-step" }
            );
            match frame_seed {
                Some(s) => println!("frame: rotated, seed {s}"),
                None => println!("frame: default"),
            }
            println!("rho = {}", combination(&rho));
            println!("rho11 = {}", combination(&r11));
            let ev: Vec<String> = semi.eigenvalues.iter().map(|&x| fmt12(x)).collect();
            println!("seminegativity eigenvalues: {}", ev.join(" "));
            println!("seminegativity max: {}", fmt12(semi.max_eigenvalue));
            println!("static lambda*: {}", fmt12(stat.lambda_star));
            println!("static residual: {}", fmt12(stat.residual));
            println!("imaginary residue: {:.3e}", rho.imag_residue());
        }
    }
    Ok(0)
}

fn csv_paths(base: &Path) -> (PathBuf, PathBuf) {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    (
        base.with_file_name(format!("{stem}.pcf.{ext}")),
        base.with_file_name(format!("{stem}.bracket.{ext}")),
    )
}

fn write_csv(tr: &Trajectory, path: &Path) -> Result<(), Failure> {
    let file = std::fs::File::create(path).map_err(|e| fail(2, format!("{}: {e}", path.display())))?;
    tr.write_csv(std::io::BufWriter::new(file))?;
    Ok(())
}

fn summarize(tr: &Trajectory) -> bool {
    let label = match tr.kind {
        FlowKind::Pcf => "pcf",
        FlowKind::Bracket => "bracket",
    };
    let last = tr.last();
    let status = match tr.status {
        FlowStatus::Completed => "completed".to_string(),
        FlowStatus::Blowup { t, step } => format!("blowup at t = {} (step {step:.3e})", fmt12(t)),
        FlowStatus::StepLimit { t } => format!("step limit at t = {}", fmt12(t)),
    };
    println!("[{label}] status: {status}");
    println!(
        "[{label}] steps: {} accepted, {} rejected; samples: {}",
        tr.stats.accepted,
        tr.stats.rejected,
        tr.samples.len()
    );
    println!("[{label}] final t: {}", fmt12(last.state.t));
    println!("[{label}] final g:");
    let g = &last.state.g;
    for r in 0..g.nrows() {
        let row: Vec<String> = (0..g.ncols()).map(|c| fmt12(g[(r, c)])).collect();
        println!("  {}", row.join(" "));
    }
    println!("[{label}] norm_mu_sq: {}", fmt12(last.diagnostics.norm_mu_sq));
    println!("[{label}] skt_residual: {:.3e}", last.diagnostics.skt_residual);
    println!("[{label}] max_P_eig: {}", fmt12(last.diagnostics.max_p_eigenvalue));
    println!("[{label}] max drift: {:.3e}", tr.max_drift);
    match tr.steady_at {
        Some(t) => println!("[{label}] steady state from t = {}", fmt12(t)),
        None => println!("[{label}] steady state: not reached"),
    }
    let inc = tr.max_norm_increase();
    if inc.is_finite() {
        println!(
            "[{label}] norm_mu_sq monotone: {} (largest relative step change {inc:.3e})",
            verdict(inc <= 1e-12)
        );
    }
    tr.status == FlowStatus::Completed
}

fn cmd_flow(path: &str, kind: Kind, t_end: f64, rtol: f64, csv: Option<&Path>) -> CmdResult {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(fail(3, format!("--t-end must be finite and non-negative, got {t_end}")));
    }
    if !(rtol.is_finite() && rtol > 0.0) {
        return Err(fail(3, format!("--rtol must be positive, got {rtol}")));
    }
    let spec = load(path)?;
    let h = structure(&spec)?;
    let skt = h.skt_check(DEFAULT_TOL)?;
    if !skt.is_skt {
        eprintln!(
            "warning: initial metric is not SKT (residual {:.3e}); no guarantees apply",
            skt.residual_norm
        );
    }
    let controls = FlowControls {
        rtol,
        atol: rtol * 1e-2,
        ..FlowControls::default()
    };
    let run = |k: FlowKind, c: &FlowControls| -> Result<Trajectory, Failure> {
        integrate(&h, k, t_end, c).map_err(|e| match e {
            Error::NotTwoStep(r) => fail(
                3,
                format!("the bracket flow needs a 2-step nilpotent algebra (residual {r:.3e})"),
            ),
            other => other.into(),
        })
    };
    match kind {
        Kind::Pcf | Kind::Bracket => {
            let k = if kind == Kind::Pcf { FlowKind::Pcf } else { FlowKind::Bracket };
            let tr = run(k, &controls)?;
            if let Some(p) = csv {
                write_csv(&tr, p)?;
            }
            Ok(if summarize(&tr) { 0 } else { 4 })
        }
        Kind::Both => {
            let c = controls.uniform_samples(t_end, 200);
            let a = run(FlowKind::Pcf, &c)?;
            let b = run(FlowKind::Bracket, &c)?;
            if let Some(p) = csv {
                let (pa, pb) = csv_paths(p);
                write_csv(&a, &pa)?;
                write_csv(&b, &pb)?;
            }
            let ok = summarize(&a) & summarize(&b);
            if !ok {
                return Ok(4);
            }
            let eq = check_equivalence(&a, &b, 1e-5)?;
            println!(
                "equivalence: {} (max deviation {:.3e} at t = {}; metric {:.3e}, bracket {:.3e}, transporter {:.3e})",
                if eq.passed { "pass" } else { "FAIL" },
                eq.max_deviation,
                fmt12(eq.worst_time),
                eq.metric_deviation,
                eq.bracket_deviation,
                eq.transporter_deviation
            );
            println!(
                "center rigidity: pcf {:.3e}, bracket {:.3e}",
                a.center_rigidity(),
                b.center_rigidity()
            );
            Ok(0)
        }
    }
}

fn cmd_search(p: usize, q: usize, count: usize, seed: u64, out: &Path) -> CmdResult {
    if p < 2 || q == 0 || (p + q) % 2 != 0 {
        return Err(fail(3, format!("--dims needs P ≥ 2, Q ≥ 1 and P + Q even (got {p} {q})")));
    }
    if count == 0 {
        return Err(fail(3, "--count must be positive"));
    }
    std::fs::create_dir_all(out).map_err(|e| fail(2, format!("{}: {e}", out.display())))?;
    let controls = GenControls::default();
    let budget = count * 10;
    let seeds = seed_stream(seed, budget);
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut found: Vec<InstanceSpec> = Vec::new();
    let mut tried = 0;
    for batch in seeds.chunks(count) {
        let results: Vec<Result<Option<InstanceSpec>, Error>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..threads.min(batch.len()))
                .map(|t| {
                    let controls = &controls;
                    s.spawn(move || {
                        (t..batch.len())
                            .step_by(threads)
                            .map(|i| (i, generate_instance(p, q, batch[i], controls)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            let mut all: Vec<_> = handles
                .into_iter()
                .flat_map(|h| h.join().expect("generator thread panicked"))
                .collect();
            all.sort_by_key(|(i, _)| *i);
            all.into_iter().map(|(_, r)| r).collect()
        });
        for r in results {
            if found.len() == count {
                break;
            }
            tried += 1;
            if let Some(spec) = r? {
                found.push(spec);
            }
        }
        if found.len() == count {
            break;
        }
    }
    let failures = tried - found.len();
    println!("generated: {} of {count} requested ({failures} failed draws of {tried})", found.len());
    if found.len() < count {
        return Err(fail(
            5,
            format!(
                "generation failure rate {:.1}% over {tried} draws for dims {p} {q}",
                100.0 * failures as f64 / tried.max(1) as f64
            ),
        ));
    }
    let mut max_gap = f64::NEG_INFINITY;
    let mut min_static = f64::INFINITY;
    let mut max_static: f64 = 0.0;
    for (i, spec) in found.iter().enumerate() {
        let path = out.join(format!("instance_{:03}.txt", i + 1));
        write_instance(&path, spec)?;
        let h = structure(spec)?;
        let skt = h.skt_check(DEFAULT_TOL)?;
        if !skt.is_skt {
            return Err(fail(5, format!("{}: generated instance is not SKT", path.display())));
        }
        let semi = seminegativity_gap(&h)?;
        let st = static_residual(&h)?;
        max_gap = max_gap.max(semi.max_eigenvalue);
        min_static = min_static.min(st.residual);
        max_static = max_static.max(st.residual);
        println!(
            "{}: scale {} seminegativity max {:.3e} static residual {} lambda* {}",
            path.display(),
            fmt12(h.scale()),
            semi.max_eigenvalue,
            fmt12(st.residual),
            fmt12(st.lambda_star)
        );
    }
    println!("max seminegativity gap: {max_gap:.3e}");
    println!("static residual range: {} .. {}", fmt12(min_static), fmt12(max_static));
    Ok(0)
}

fn cmd_catalog(name: &str, out: Option<&Path>) -> CmdResult {
    let spec = catalog(name)?;
    match out {
        Some(p) => write_instance(p, &spec)?,
        None => print!("{}", to_instance_string(&spec)),
    }
    Ok(0)
}
