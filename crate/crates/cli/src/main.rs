use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use num_rational::BigRational;
use serde::Serialize;
use serde_json::json;

use cubiclines::certificate::{self, CertError, CertParams, Outcome};
use cubiclines::finite_field::{find_lines_on_cubic, line_count, nontrivial_zeros, point_count};
use cubiclines::forms::{form_from_json_str, RatForm};
use cubiclines::line_search::{self, find_cubic_zero_local, LineError, LineOptions};
use cubiclines::padic::QpField;
use cubiclines::real_geometry::{self, LoopSpec, RealError};
use cubiclines::ring::{is_prime, PrimeField};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "cubiclines", version, about = "Lines on cubic hypersurfaces: finite-field scans, p-adic line search, real geometry and certificates")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write JSON here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed (falls back to CUBICLINES_SEED, then 0).
    #[arg(long, global = true, env = "CUBICLINES_SEED", default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify that F_p (p = 2, 3, 5) contains no line over Q_p.
    VerifyCounterexample {
        #[arg(long)]
        p: u64,
    },
    /// Enumerate F_p-lines on a cubic form.
    LinesFp {
        #[arg(long)]
        form: PathBuf,
        #[arg(long)]
        p: u64,
    },
    /// Enumerate nontrivial projective F_p-zeros of a form.
    ZerosFp {
        #[arg(long)]
        form: PathBuf,
        #[arg(long)]
        p: u64,
    },
    /// A zero of a cubic form over Q_p lifted from a smooth residue zero.
    FindPointQp {
        #[arg(long)]
        form: PathBuf,
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 30)]
        prec: u32,
    },
    /// A line over Q_p on a cubic form in at least 22 (or 16) variables.
    FindLineQp {
        #[arg(long)]
        form: PathBuf,
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 30)]
        prec: u32,
        #[arg(long, default_value = "22", value_parser = ["22", "16"])]
        min_vars: String,
        #[arg(long, default_value_t = 5)]
        slack: u32,
    },
    /// A real base point whose Hessian has rank ≥ n−1 and is far from definite.
    BasePoint {
        #[arg(long)]
        form: PathBuf,
        #[arg(long, default_value_t = real_geometry::EIGEN_TOLERANCE)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Track the real roots of F(ℓ(t), z) along an antipodally symmetric loop.
    TrackLoop {
        #[arg(long)]
        form: PathBuf,
        #[arg(long = "loop")]
        loop_spec: PathBuf,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Reduce to a cubic and a quadric on {Φ(x0,x0,y) = 0, Z = 0}.
    ReduceSystem {
        #[arg(long)]
        form: PathBuf,
        #[arg(long)]
        point: PathBuf,
    },
    /// The forms F(x), Φ(x,x,z), Φ(x,y,y) and a smooth real common zero.
    MwSystem {
        #[arg(long)]
        form: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        z: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
}

/// Errors that map to the usage exit code.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn read_form(path: &Path) -> Result<RatForm> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    form_from_json_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// A vector given as JSON numbers or rational strings.
fn read_rational_vector(path: &Path) -> Result<Vec<BigRational>> {
    let values: Vec<serde_json::Value> = read_json(path)?;
    values
        .iter()
        .map(|v| match v {
            serde_json::Value::String(s) => s.parse().map_err(|_| usage(format!("bad rational {s:?}"))),
            serde_json::Value::Number(n) if n.is_i64() => Ok(BigRational::from_integer(n.as_i64().unwrap().into())),
            other => Err(usage(format!("expected an integer or rational string, got {other}"))),
        })
        .collect()
}

fn require_prime(p: u64) -> Result<()> {
    if p < 2 || !is_prime(p) {
        return Err(usage(format!("{p} is not a prime")));
    }
    Ok(())
}

struct Emit<'a> {
    out: Option<&'a Path>,
}

impl Emit<'_> {
    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        match self.out {
            Some(path) => std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display())),
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }
}

fn run(cli: &Cli) -> Result<u8> {
    let emit = Emit { out: cli.out.as_deref() };
    let seed = cli.seed;
    match &cli.command {
        Command::VerifyCounterexample { p } => {
            let params = CertParams { seed, ..CertParams::default() };
            let cert = match certificate::verify_counterexample(*p, &params) {
                Err(CertError::UnsupportedPrime(p)) => return Err(usage(format!("unsupported prime {p}: expected 2, 3 or 5"))),
                other => other?,
            };
            emit.json(&cert)?;
            Ok(match cert.verdict {
                Outcome::Pass => EXIT_PASS,
                Outcome::Fail => EXIT_FAIL,
                Outcome::Inconclusive => EXIT_INCONCLUSIVE,
            })
        }
        Command::LinesFp { form, p } => {
            require_prime(*p)?;
            let f = read_form(form)?;
            if f.degree() != 3 {
                return Err(usage("lines-fp expects a cubic form"));
            }
            let field = PrimeField::new(*p);
            let lines = find_lines_on_cubic(&f.reduce_mod(&field)?, &field);
            emit.json(&json!({
                "p": p,
                "n": f.n_vars(),
                "lines_scanned": line_count(*p, f.n_vars()),
                "lines_found": lines.len(),
                "lines": lines.iter().map(|l| &l.gens).collect::<Vec<_>>(),
            }))?;
            Ok(EXIT_PASS)
        }
        Command::ZerosFp { form, p } => {
            require_prime(*p)?;
            let f = read_form(form)?;
            let field = PrimeField::new(*p);
            let zeros = nontrivial_zeros(&f.reduce_mod(&field)?, &field);
            emit.json(&json!({
                "p": p,
                "n": f.n_vars(),
                "points_scanned": point_count(*p, f.n_vars()),
                "zeros_found": zeros.len(),
                "zeros": zeros.iter().map(|z| &z.coords).collect::<Vec<_>>(),
            }))?;
            Ok(EXIT_PASS)
        }
        Command::FindPointQp { form, p, prec } => {
            require_prime(*p)?;
            let f = read_form(form)?;
            if f.degree() != 3 {
                return Err(usage("find-point-qp expects a cubic form"));
            }
            if !f.is_integral() {
                return Err(usage("find-point-qp expects integer coefficients"));
            }
            let k = QpField::new(*p, *prec);
            let fk = f.map_coeffs(&k, |c| k.from_rational(c));
            let opts = LineOptions { precision: *prec, seed, ..LineOptions::default() };
            match find_cubic_zero_local(&k, &fk, &opts) {
                Ok((x, stats)) => {
                    let value = fk.evaluate(&k, &x)?;
                    emit.json(&json!({
                        "status": "found",
                        "p": p,
                        "precision": prec,
                        "x": x.iter().map(|c| k.to_json(c)).collect::<Vec<_>>(),
                        "x_integer": x.iter().map(|c| k.balanced_integer(c).map(|b| b.to_string())).collect::<Vec<_>>(),
                        "value_valuation": value.valuation_or_precision(),
                        "stats": stats,
                        "seed": seed,
                    }))?;
                    Ok(EXIT_PASS)
                }
                Err(e) => {
                    emit.json(&json!({"status": "not_found", "error": e.to_string(), "seed": seed}))?;
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
        Command::FindLineQp { form, p, prec, min_vars, slack } => {
            require_prime(*p)?;
            let f = read_form(form)?;
            let opts = LineOptions { precision: *prec, slack: *slack, seed, ..LineOptions::default() };
            let result = if min_vars == "16" {
                line_search::find_line_qp_16(&f, *p, &opts)
            } else {
                line_search::find_line_qp(&f, *p, &opts)
            };
            match result {
                Ok(line) => {
                    // independent re-verification from the emitted generators
                    let verified = line_search::verify_line(&f, &line, *prec as i64)?;
                    let ok = verified >= *prec as i64 - *slack as i64;
                    emit.json(&json!({"status": if ok { "verified" } else { "unverified" }, "line": line, "seed": seed}))?;
                    Ok(if ok { EXIT_PASS } else { EXIT_INCONCLUSIVE })
                }
                Err(LineError::Precondition(msg)) | Err(LineError::Form(cubiclines::forms::FormError::Parse(msg))) => {
                    Err(usage(msg))
                }
                Err(e) => {
                    let stage = match &e {
                        LineError::Stage { stage, .. } => stage.clone(),
                        LineError::Verification { .. } => "verification".into(),
                        LineError::PullBack(_) => "pull-back".into(),
                        LineError::NoSmoothZero { .. } => "zero".into(),
                        _ => "search".into(),
                    };
                    emit.json(&json!({
                        "status": "failed",
                        "stage_log": [{"stage": stage, "detail": e.to_string()}],
                        "seed": seed,
                        "options": opts,
                    }))?;
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
        Command::BasePoint { form, tol, trials } => {
            let f = read_form(form)?.to_f64();
            match real_geometry::find_base_point(&f, *trials, *tol, seed) {
                Ok(report) => {
                    emit.json(&json!({"status": "found", "report": report}))?;
                    Ok(EXIT_PASS)
                }
                Err(RealError::Budget(msg)) => {
                    emit.json(&json!({"status": "not_found", "error": msg, "seed": seed}))?;
                    Ok(EXIT_INCONCLUSIVE)
                }
                Err(e) => Err(usage(e.to_string())),
            }
        }
        Command::TrackLoop { form, loop_spec, steps, tol } => {
            let f = read_form(form)?.to_f64();
            let spec: LoopSpec = read_json(loop_spec)?;
            match real_geometry::track_roots_along_loop(&f, &spec, *steps, *tol) {
                Ok(trace) => {
                    emit.json(&trace)?;
                    Ok(if trace.max_residual < *tol { EXIT_PASS } else { EXIT_INCONCLUSIVE })
                }
                Err(RealError::Ambiguous(t)) => {
                    emit.json(&json!({"status": "ambiguous", "t": t}))?;
                    Ok(EXIT_INCONCLUSIVE)
                }
                Err(e) => Err(usage(e.to_string())),
            }
        }
        Command::ReduceSystem { form, point } => {
            let f = read_form(form)?;
            let x0 = read_rational_vector(point)?;
            if x0.len() != f.n_vars() {
                return Err(usage(format!("point has {} coordinates, form has {} variables", x0.len(), f.n_vars())));
            }
            let sys = real_geometry::reduce_to_quadric_cubic_system(&f, &x0, seed).map_err(|e| match e {
                RealError::Budget(m) => anyhow!(m),
                other => usage(other.to_string()),
            })?;
            emit.json(&sys)?;
            let audit_ok = sys.audit.rank >= sys.audit.rank_target && sys.audit.sigma_at_least_2;
            Ok(if audit_ok { EXIT_PASS } else { EXIT_FAIL })
        }
        Command::MwSystem { form, y, z, samples } => {
            let f = read_form(form)?;
            let y = read_rational_vector(y)?;
            let z = read_rational_vector(z)?;
            let sys = real_geometry::mordell_weil_system(&f, &y, &z, *samples, seed).map_err(|e| usage(e.to_string()))?;
            emit.json(&sys)?;
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_INCONCLUSIVE)
            }
        }
    }
}
