//! `folcomp`: tensor reports, geodesics, comparison audits and Monte Carlo
//! runs on foliated model files.
//!
//! Exit codes: 0 pass, 2 fail, 3 inapplicable, 1 usage or validation error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use folcomp::comparison::{bonnet_myers_audit, coupled_audit, ComparisonConfig};
use folcomp::connection::frak_r_decomposed;
use folcomp::geodesy::{Geometry, EXP_MAP_MAX_STEP};
use folcomp::model::{validate_model, validate_model_relaxed, ModelSpec};
use folcomp::report::{fmt_f64, sha256_hex, AuditReport, RunManifest, Verdict};
use folcomp::stochastic::{
    clamped_distance, exit_tail, gradient_bound_audit, heat_diag_lower, lipschitz_audit, mixed_gradient_audit,
    parallel_coupling_run, radial_comparison_run, HorizontalBm, SimConfig, TestFunction,
};
use folcomp::suite::{self, SuiteConfig, CRITERIA};
use folcomp::{bundled, Error, FoliatedModel, GroupPoint};

#[derive(Parser, Debug)]
#[command(name = "folcomp", version, about = "Comparison geometry of homogeneous Riemannian foliations")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 1, env = "FOLCOMP_THREADS")]
    threads: usize,

    /// Accept models that fail the geometric certificates (flat controls).
    #[arg(long, global = true)]
    relaxed: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tensor report of a model as JSON.
    Describe {
        model: PathBuf,
        #[arg(long, default_value = "describe.json")]
        out: PathBuf,
    },
    /// Sample the geodesic exp(t·dir) from a point.
    Geodesic {
        model: PathBuf,
        /// Start point coordinates (comma separated); identity by default.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        from: Vec<f64>,
        /// Initial velocity in the model basis.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        dir: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        #[arg(long, default_value = "geodesic.csv")]
        out: PathBuf,
    },
    /// Finite-difference Laplacian comparison audit from the identity.
    Compare {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1,1.5,2")]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        dirs: usize,
        /// Audit the coupled Laplacian instead.
        #[arg(long)]
        coupled: bool,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Absolute slack added to every bound.
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
        #[arg(long, default_value = "audit.csv")]
        out: PathBuf,
    },
    /// Largest certified distance over Haar-sampled pairs against π√(n/K).
    BonnetMyers {
        model: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "bm.csv")]
        out: PathBuf,
    },
    /// Horizontal Brownian motion runs.
    Simulate(SimulateArgs),
    /// Run the numbered acceptance checks on the bundled models.
    Selftest {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "selftest")]
        out: PathBuf,
        /// Reduced sample sizes.
        #[arg(long)]
        quick: bool,
        /// Subset of criteria to run.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Kind {
    Paths,
    Radial,
    Exit,
    Coupling,
    Lipschitz,
    Gradient,
    Heatdiag,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    model: PathBuf,
    #[arg(long, value_enum)]
    kind: Kind,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Start point (identity by default).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    from: Vec<f64>,
    /// Second point for coupling and Lipschitz runs.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    to: Vec<f64>,
    /// Radii for exit tails; the first one is used by heatdiag.
    #[arg(long, value_delimiter = ',', default_value = "1,1.5,2,2.5,3")]
    radii: Vec<f64>,
    /// Steps between coupling transport refreshes.
    #[arg(long, default_value_t = 10)]
    refresh: usize,
    /// Gradient runs: mixed horizontal/vertical mode over this time grid.
    #[arg(long, value_delimiter = ',')]
    mixed: Vec<f64>,
    /// Grid points recorded per path by `--kind paths`.
    #[arg(long, default_value_t = 100)]
    record: usize,
    #[arg(long, default_value = "run.csv")]
    out: PathBuf,
}

/// Error carrying the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonPositiveK(_) | Error::InapplicableK(_) | Error::NotTotallyGeodesic => 3,
            Error::UncertifiedDistance | Error::NoConvergence { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: cannot configure {} threads: {e}", cli.threads);
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

/// Model text from a file, or a bundled model when no such file exists.
fn read_model(path: &Path, relaxed: bool) -> CliResult<(FoliatedModel, String)> {
    let text = if path.exists() {
        std::fs::read_to_string(path)?
    } else if let Some(s) = bundled::source(&path.to_string_lossy()) {
        s.to_string()
    } else {
        return Err(Failure {
            code: 1,
            message: format!("model file {} not found", path.display()),
        });
    };
    let spec = ModelSpec::from_json_str(&text)?;
    let model = if relaxed {
        validate_model_relaxed(spec)?
    } else {
        validate_model(spec)?
    };
    Ok((model, text))
}

fn point(geo: &Geometry, coords: &[f64]) -> CliResult<GroupPoint> {
    if coords.is_empty() {
        Ok(geo.group().identity())
    } else {
        Ok(geo.group().point_from_coords(coords)?)
    }
}

/// Collects outputs and writes the manifest next to the primary output.
struct Run {
    started: chrono::DateTime<chrono::Utc>,
    clock: Instant,
    model_text: Option<String>,
    seed: Option<u64>,
    config: serde_json::Value,
    outputs: Vec<PathBuf>,
    verdicts: BTreeMap<String, Verdict>,
}

impl Run {
    fn new(model_text: Option<String>, seed: Option<u64>, config: serde_json::Value) -> Self {
        Self {
            started: chrono::Utc::now(),
            clock: Instant::now(),
            model_text,
            seed,
            config,
            outputs: Vec::new(),
            verdicts: BTreeMap::new(),
        }
    }

    fn write(&mut self, path: &Path, content: &str) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, content)?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }

    fn finish(self, manifest: &Path) -> CliResult<()> {
        let mut hashed = self.model_text.clone().unwrap_or_default();
        hashed.push_str(&self.config.to_string());
        let m = RunManifest {
            command_line: std::env::args().collect::<Vec<_>>().join(" "),
            model_hash: self.model_text.as_deref().map(|t| sha256_hex(t.as_bytes())),
            input_hash: sha256_hex(hashed.as_bytes()),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            config: self.config,
            started: self.started.to_rfc3339(),
            finished: chrono::Utc::now().to_rfc3339(),
            wall_seconds: self.clock.elapsed().as_secs_f64(),
            outputs: self.outputs,
            verdicts: self.verdicts,
        };
        m.write(manifest)?;
        Ok(())
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Writes an audit table plus manifest and returns the verdict's exit code.
fn finish_audit(mut run: Run, rep: &AuditReport, out: &Path) -> CliResult<u8> {
    run.write(out, &rep.to_csv())?;
    run.verdicts.insert(rep.name.clone(), rep.verdict);
    run.finish(&manifest_path(out))?;
    println!("{}: {:?}", rep.name, rep.verdict);
    for (k, v) in &rep.summary {
        println!("  {k} = {v}");
    }
    for note in &rep.notes {
        println!("  note: {note}");
    }
    Ok(rep.verdict.exit_code() as u8)
}

/// Records an inapplicable run (exit 3) with its manifest.
fn inapplicable(mut run: Run, name: &str, e: Error, out: &Path) -> CliResult<u8> {
    eprintln!("inapplicable: {e}");
    run.verdicts.insert(name.to_string(), Verdict::Inapplicable);
    run.finish(&manifest_path(out))?;
    Ok(3)
}

fn run(cli: &Cli) -> CliResult<u8> {
    match &cli.command {
        Command::Describe { model, out } => {
            let (m, text) = read_model(model, cli.relaxed)?;
            let rep = frak_r_decomposed(&m);
            let value = json!({
                "model": m.name(),
                "n": m.n(),
                "dim": m.dim(),
                "K": rep.k,
                "yang_mills": rep.symmetric,
                "report": rep,
            });
            let body = serde_json::to_string_pretty(&value).map_err(Error::from)?;
            println!("{body}");
            let mut run = Run::new(Some(text), None, json!({"command": "describe"}));
            run.write(out, &body)?;
            run.finish(&manifest_path(out))?;
            Ok(0)
        }
        Command::Geodesic {
            model,
            from,
            dir,
            time,
            out,
        } => {
            let (m, text) = read_model(model, cli.relaxed)?;
            if dir.len() != m.dim() {
                return Err(Error::Dimension {
                    expected: m.dim(),
                    actual: dir.len(),
                }
                .into());
            }
            let geo = Geometry::new(&m)?;
            let p = point(&geo, from)?;
            let v = folcomp::AlgebraVector::new(dir.clone());
            let speed = m.norm(&v);
            if !(speed > 0.0) || !(*time >= 0.0) {
                return Err(Error::InvalidConfig("need a nonzero direction and time >= 0".into()).into());
            }
            let length = time * speed;
            let steps = ((length / EXP_MAP_MAX_STEP).ceil() as usize).max(8);
            let rec = geo.record(&p, &m.to_ortho(&v), length, steps)?;
            let mut csv = String::from("t");
            for i in 1..=m.dim() {
                let _ = write!(csv, ",v_{i}");
            }
            for i in 1..=p.coords().len() {
                let _ = write!(csv, ",x_{i}");
            }
            csv.push('\n');
            for s in &rec.samples {
                let mut cells = vec![fmt_f64(s.t)];
                cells.extend(s.velocity.coefficients().iter().map(|&c| fmt_f64(c)));
                cells.extend(s.point.coords().into_iter().map(fmt_f64));
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
            let cfg = json!({"command": "geodesic", "from": from, "dir": dir, "time": time, "steps": steps});
            let mut run = Run::new(Some(text), None, cfg);
            run.write(out, &csv)?;
            run.finish(&manifest_path(out))?;
            println!("length {length}, energy drift {:.2e}, {} samples", rec.energy_drift(), rec.samples.len());
            Ok(0)
        }
        Command::Compare {
            model,
            radii,
            dirs,
            coupled,
            h,
            tol,
            out,
        } => {
            let (m, text) = read_model(model, cli.relaxed)?;
            let cfg = ComparisonConfig { h: *h, tol: *tol };
            let run = Run::new(
                Some(text),
                None,
                json!({"command": "compare", "radii": radii, "dirs": dirs, "coupled": coupled, "h": h, "tol": tol}),
            );
            let rep = if *coupled {
                coupled_audit(&m, radii, *dirs, cfg)?
            } else {
                folcomp::comparison::comparison_audit_with(&m, radii, *dirs, cfg)?
            };
            finish_audit(run, &rep, out)
        }
        Command::BonnetMyers {
            model,
            samples,
            seed,
            out,
        } => {
            let (m, text) = read_model(model, cli.relaxed)?;
            let run = Run::new(Some(text), Some(*seed), json!({"command": "bonnet-myers", "samples": samples}));
            match bonnet_myers_audit(&m, *samples, *seed) {
                Ok(rep) => finish_audit(run, &rep, out),
                Err(e @ Error::NonPositiveK(_)) => inapplicable(run, "bonnet_myers", e, out),
                Err(e) => Err(e.into()),
            }
        }
        Command::Simulate(args) => simulate(cli, args),
        Command::Selftest {
            seed,
            out,
            quick,
            only,
        } => selftest(*seed, out, *quick, only),
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<u8> {
    let (m, text) = read_model(&a.model, cli.relaxed)?;
    let mut sim = SimConfig::new(a.dt, a.t, a.paths, a.seed)?;
    sim.coupling_refresh = a.refresh.max(1);
    let geo = Geometry::new(&m)?;
    let p = point(&geo, &a.from)?;
    let cfg = json!({
        "command": "simulate",
        "kind": format!("{:?}", a.kind).to_lowercase(),
        "sim": sim,
        "from": a.from,
        "to": a.to,
        "radii": a.radii,
        "mixed": a.mixed,
        "record": a.record,
    });
    let mut run = Run::new(Some(text), Some(a.seed), cfg);
    let out = &a.out;
    let result = match a.kind {
        Kind::Paths => {
            let bm = HorizontalBm::new(&m)?;
            let stride = (sim.steps() / a.record.max(1)).max(1);
            let mut csv = String::from("path,t");
            for i in 1..=p.coords().len() {
                let _ = write!(csv, ",x_{i}");
            }
            csv.push('\n');
            for i in 0..sim.n_paths as u64 {
                let rec = bm.path(&p, &sim, i);
                for (k, (t, x)) in rec.times.iter().zip(&rec.points).enumerate() {
                    if k % stride == 0 || k + 1 == rec.times.len() {
                        let cells: Vec<String> = x.coords().into_iter().map(fmt_f64).collect();
                        let _ = writeln!(csv, "{i},{},{}", fmt_f64(*t), cells.join(","));
                    }
                }
            }
            run.write(out, &csv)?;
            run.finish(&manifest_path(out))?;
            return Ok(0);
        }
        Kind::Radial => radial_comparison_run(&m, &p, &sim),
        Kind::Exit => exit_tail(&m, &p, &a.radii, a.t, &sim),
        Kind::Coupling => {
            let q = if a.to.is_empty() {
                default_partner(&geo)
            } else {
                point(&geo, &a.to)?
            };
            parallel_coupling_run(&m, &p, &q, &sim)
        }
        Kind::Lipschitz => {
            let q = if a.to.is_empty() {
                default_partner(&geo)
            } else {
                point(&geo, &a.to)?
            };
            let f = clamped_distance(&m, 2.0)?;
            lipschitz_audit(&m, &f, 1.0, &[(p.clone(), q)], a.t, &sim)
        }
        Kind::Gradient => {
            let last = m.dim() - 1;
            let f = TestFunction::with_fd_gradient(&m, "sin_x1_plus_xlast", move |x: &GroupPoint| {
                let c = x.coords();
                (c[0] + c[last]).sin()
            })?;
            if a.mixed.is_empty() {
                gradient_bound_audit(&m, &f, &p, a.t, &sim)
            } else {
                mixed_gradient_audit(&m, &f, &p, &a.mixed, &sim)
            }
        }
        Kind::Heatdiag => {
            let r = a.radii.first().copied().unwrap_or(1.0);
            match heat_diag_lower(&m, &p, a.t, r, &sim) {
                Ok(hd) => {
                    let mut csv = String::from("quantity,value,std_error\n");
                    for (k, v, s) in [
                        ("lower_bound_p_2t", hd.value, hd.std_error),
                        ("exit_probability", hd.exit_probability, hd.exit_std_error),
                        ("ball_volume", hd.ball_volume, hd.ball_volume_std_error),
                    ] {
                        let _ = writeln!(csv, "{k},{},{}", fmt_f64(v), fmt_f64(s));
                    }
                    print!("{csv}");
                    run.write(out, &csv)?;
                    run.finish(&manifest_path(out))?;
                    return Ok(0);
                }
                Err(e) => Err(e),
            }
        }
    };
    match result {
        Ok(rep) => finish_audit(run, &rep, out),
        Err(e @ (Error::InapplicableK(_) | Error::NotTotallyGeodesic)) => inapplicable(run, "simulate", e, out),
        Err(e) => Err(e.into()),
    }
}

/// Point at distance 0.5 along a mixed horizontal/vertical geodesic.
fn default_partner(geo: &Geometry) -> GroupPoint {
    let m = geo.model();
    let g = m.ortho();
    let mut w = vec![0.0; m.dim()];
    w[g.horizontal_indices()[0]] = 0.4;
    match g.vertical_indices().first() {
        Some(&v) => w[v] = 0.3,
        None => w[g.horizontal_indices()[0]] = 0.5,
    }
    geo.flow(&geo.group().identity(), &w, geo.shooting.steps)
}

fn selftest(seed: u64, out: &Path, quick: bool, only: &[usize]) -> CliResult<u8> {
    let cfg = if quick {
        SuiteConfig::quick(seed)
    } else {
        SuiteConfig::full(seed)
    };
    std::fs::create_dir_all(out)?;
    let mut run = Run::new(None, Some(seed), json!({"command": "selftest", "suite": cfg, "only": only}));
    let mut outcomes = Vec::new();
    for &(id, _) in CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.0)) {
        let outcome = suite::run_criterion(id, &cfg)?;
        println!(
            "criterion {:>2} {:<40} {}  ({:.1}s)",
            id,
            outcome.name,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.seconds
        );
        for line in &outcome.details {
            println!("    {line}");
        }
        for table in &outcome.tables {
            run.write(&out.join(&table.file), &table.content)?;
        }
        let verdict = if outcome.pass { Verdict::Pass } else { Verdict::Fail };
        run.verdicts.insert(format!("criterion_{id:02}"), verdict);
        outcomes.push(outcome);
    }
    let summary = serde_json::to_string_pretty(&json!({ "seed": seed, "quick": quick, "criteria": outcomes }))
        .map_err(Error::from)?;
    run.write(&out.join("summary.json"), &summary)?;
    let all = outcomes.iter().all(|o| o.pass);
    run.finish(&out.join("manifest.json"))?;
    Ok(if all { 0 } else { 2 })
}
