use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use sympos::io::{
    eigen_structure_to_json, matrix_to_json, path_from_json, path_to_json, stratum_to_json, symp_from_json, system_from_json,
    trajectory_csv, trajectory_svg,
};
use sympos::spectral::eigen_structure_with;
use sympos::stability::{critical_mu, excursion_index_check, is_stable_with, is_strongly_stable_with, monodromy, stability_report};
use sympos::strata::classify_with;
use sympos::{diagnose, eigen_trajectory, selftest, steering, ErrorKind, SympMatrix, Tolerances};

#[derive(Parser)]
#[command(name = "sympos", version, about = "Positive paths, strata and stability in Sp(2n, R)")]
struct Cli {
    #[command(flatten)]
    opts: Common,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args)]
struct Common {
    /// Eigenvalues within this of the unit circle count as on it.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol_circle: f64,
    /// Relative symplecticity tolerance for input matrices.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol_symp: f64,
    /// Base samples per path for tracing and diagnostics.
    #[arg(long, global = true, default_value_t = 512)]
    samples: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Verb {
    /// Stratum of a matrix (JSON to stdout).
    Classify {
        #[arg(short, long)]
        input: PathBuf,
    },
    /// Eigenvalue trajectory of a path as CSV, optionally with an SVG plot.
    Trace {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Positive path from A (default Id) to B; with --short, a short path from Id.
    Connect {
        #[arg(short = 'a', long)]
        from: Option<PathBuf>,
        #[arg(short = 'b', long)]
        to: PathBuf,
        #[arg(long)]
        short: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Extends a short path until its endpoint has all eigenvalues on the circle.
    Extend {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Positivity, shortness, index, excursions and itinerary of a path.
    Index {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Stability report of a matrix or of a periodic system's monodromy at μ;
    /// for paths, one excursion/index record per line.
    Stability {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        mu: f64,
    },
    /// μ₀ of a periodic system and a stability table over (0, μ_max].
    Sweep {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        mu_max: f64,
        #[arg(long, default_value_t = 100)]
        grid: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Runs the acceptance checks.
    Selftest {
        /// Comma-separated check numbers (default: all).
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<sympos::Error> for Failure {
    fn from(e: sympos::Error) -> Self {
        let code = match e.kind() {
            ErrorKind::InvalidInput => 2,
            ErrorKind::Infeasible => 3,
            ErrorKind::Numerical => 4,
        };
        Failure { code, message: e.to_string() }
    }
}

fn invalid(message: String) -> Failure {
    Failure { code: 2, message }
}

type Outcome = Result<(), Failure>;

fn read_json(path: &Path) -> Result<Value, Failure> {
    let text = fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

/// Temp file in the target directory, then rename.
fn write_atomic(path: &Path, contents: &str) -> Outcome {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| invalid(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let io = |e: std::io::Error| Failure { code: 2, message: format!("{}: {e}", path.display()) };
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).and_then(|_| f.sync_all()).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

fn emit_json(v: &Value, output: Option<&Path>) -> Outcome {
    let text = format!("{}\n", serde_json::to_string(v).expect("serializable"));
    match output {
        Some(p) => write_atomic(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn tolerances(c: &Common) -> Tolerances {
    Tolerances { circle: c.tol_circle, symp: c.tol_symp, ..Default::default() }
}

fn run(cli: Cli) -> Outcome {
    let c = &cli.opts;
    let tol = tolerances(c);
    match cli.verb {
        Verb::Classify { input } => {
            let a = symp_from_json(&read_json(&input)?, c.tol_symp)?;
            let label = classify_with(&a, &tol)?;
            let mut v = stratum_to_json(&label);
            v["groups"] = eigen_structure_to_json(&eigen_structure_with(&a, &tol)?)["groups"].clone();
            emit_json(&v, None)
        }
        Verb::Trace { input, output, svg } => {
            let p = path_from_json(&read_json(&input)?, c.tol_symp)?;
            let tr = eigen_trajectory(&p, c.samples)?;
            write_atomic(&output, &trajectory_csv(&tr))?;
            if let Some(s) = svg {
                write_atomic(&s, &trajectory_svg(&tr))?;
            }
            Ok(())
        }
        Verb::Connect { from, to, short, output } => {
            let b = symp_from_json(&read_json(&to)?, c.tol_symp)?;
            let path = if short {
                if from.is_some() {
                    return Err(invalid("--short paths start at the identity; drop -a".into()));
                }
                steering::short_path_to(&b)?
            } else {
                let a = match from {
                    Some(f) => symp_from_json(&read_json(&f)?, c.tol_symp)?,
                    None => SympMatrix::identity(b.half_dim()),
                };
                steering::connect(&a, &b)?
            };
            emit_json(&path_to_json(&path), output.as_deref())
        }
        Verb::Extend { input, output } => {
            let p = path_from_json(&read_json(&input)?, c.tol_symp)?;
            emit_json(&path_to_json(&steering::extend_to_u(&p)?), output.as_deref())
        }
        Verb::Index { input, output } => {
            let p = path_from_json(&read_json(&input)?, c.tol_symp)?;
            let d = diagnose(&p, c.samples)?;
            let v = json!({
                "cz_index": d.cz_index,
                "short": d.short,
                "positive": d.positive,
                "margin": d.margin,
                "excursions": d.excursions,
                "crossing_times": d.crossing_times,
                "tangencies": d.tangencies,
                "max_residual": d.max_residual,
                "itinerary": d.itinerary.iter().map(|e| json!({
                    "start": e.start,
                    "end": e.end,
                    "region": e.label.region.as_str(),
                    "nilpotent_sign": e.label.nilpotent_sign.map(|s| s.as_str()),
                })).collect::<Vec<_>>(),
            });
            emit_json(&v, output.as_deref())
        }
        Verb::Stability { input, mu } => {
            let v = read_json(&input)?;
            // Paths (one, or an array) get one excursion record per line.
            let paths = match &v {
                Value::Array(items) => Some(items.iter().map(|p| path_from_json(p, c.tol_symp)).collect::<Result<Vec<_>, _>>()?),
                Value::Object(o) if o.contains_key("segments") && !o.contains_key("periodic") => {
                    Some(vec![path_from_json(&v, c.tol_symp)?])
                }
                _ => None,
            };
            if let Some(paths) = paths {
                for r in excursion_index_check(&paths, c.samples)? {
                    emit_json(&serde_json::to_value(&r).expect("serializable"), None)?;
                }
                return Ok(());
            }
            let (a, system) = if v.get("periodic").is_some() {
                (monodromy(&system_from_json(&v)?, mu), true)
            } else {
                (symp_from_json(&v, c.tol_symp)?, false)
            };
            let r = stability_report(&a, &tol)?;
            let mut out = serde_json::to_value(&r).expect("serializable");
            if system {
                out["mu"] = json!(mu);
                out["monodromy"] = matrix_to_json(a.matrix());
            }
            emit_json(&out, None)
        }
        Verb::Sweep { input, mu_max, grid, output } => {
            let sys = system_from_json(&read_json(&input)?)?;
            if grid == 0 {
                return Err(invalid("--grid must be positive".into()));
            }
            let mu0 = critical_mu(&sys, mu_max)?;
            let mut csv = String::from("mu,stable,strongly_stable\n");
            for k in 1..=grid {
                let mu = mu_max * k as f64 / grid as f64;
                let a = monodromy(&sys, mu);
                csv.push_str(&format!("{mu},{},{}\n", is_stable_with(&a, &tol), is_strongly_stable_with(&a, &tol)));
            }
            write_atomic(&output, &csv)?;
            emit_json(&json!({ "mu0": mu0, "mu_max": mu_max, "grid": grid }), None)
        }
        Verb::Selftest { only } => {
            let ids: Vec<usize> = if only.is_empty() { (1..=selftest::COUNT).collect() } else { only };
            if let Some(bad) = ids.iter().find(|&&k| k == 0 || k > selftest::COUNT) {
                return Err(invalid(format!("no check {bad}; checks are 1..={}", selftest::COUNT)));
            }
            let mut done = Vec::new();
            for id in ids {
                let o = selftest::run(id, c.seed, &done);
                println!("{}", o.line());
                done.push(o);
            }
            if done.iter().all(|o| o.passed) {
                Ok(())
            } else {
                Err(Failure { code: 4, message: "some checks failed".into() })
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
