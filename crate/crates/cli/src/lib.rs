//! `sylvobs` command implementations: matrix-file I/O, argument parsing and
//! the `check`, `solve`, `observe` and `simulate` workflows.
//!
//! Every command returns a process exit code: 0 success, 1 input error,
//! 2 undetectable pair, 3 diagnostic failure.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::json;

use sylvobs_core::numkernel::{format_complex, matrix};
use sylvobs_core::observer::{synthesize_observer, Plant, RealVector, ReducedObserver};
use sylvobs_core::sim::{error_metrics, simulate, write_trace_csv, InputSignal, SimulationConfig};
use sylvobs_core::stabilize::PoleSet;
use sylvobs_core::structure::check_detectability;
use sylvobs_core::sylvsolve::{solve_constrained_sylvester, verify_solution};
use sylvobs_core::{Complex64, Error, RealMatrix, Tolerances};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNDETECTABLE: i32 = 2;
pub const EXIT_DIAGNOSTIC: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(Error),
    /// The computation ran but its result failed a post-check.
    Diagnostic(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) | CliError::Diagnostic(msg) => f.write_str(msg),
            CliError::Core(Error::Undetectable { offending }) => write!(
                f,
                "no observer of this form exists: the pair (A, C) is not detectable \
                 (unstable modes invisible in the output: {})",
                offending
                    .iter()
                    .map(|l| format_complex(*l))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(Error::Undetectable { .. }) => EXIT_UNDETECTABLE,
            CliError::Diagnostic(_) => EXIT_DIAGNOSTIC,
            _ => EXIT_INPUT,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub data: Vec<f64>,
}

impl From<&RealMatrix> for MatrixEntry {
    fn from(m: &RealMatrix) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

/// Named matrices stored as one JSON object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixFile {
    pub entries: BTreeMap<String, MatrixEntry>,
}

impl MatrixFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Input(format!("malformed matrix file: {e}")))
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        // serde_json prints the shortest decimal that round-trips each f64.
        let text = serde_json::to_string_pretty(self).expect("matrix files always serialize");
        fs::write(path, text + "\n")
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
    }

    pub fn insert(&mut self, key: &str, m: &RealMatrix) {
        self.entries.insert(key.to_string(), m.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn matrix(&self, key: &str) -> CliResult<RealMatrix> {
        let entry = self
            .entries
            .get(key)
            .ok_or_else(|| CliError::Input(format!("missing matrix \"{key}\"")))?;
        matrix(entry.rows, entry.cols, &entry.data)
            .map_err(|e| CliError::Input(format!("matrix \"{key}\": {e}")))
    }

    /// A vector stored as either a column or a row.
    pub fn vector(&self, key: &str) -> CliResult<Option<RealVector>> {
        if !self.contains(key) {
            return Ok(None);
        }
        let m = self.matrix(key)?;
        if m.ncols() != 1 && m.nrows() != 1 && !m.is_empty() {
            return Err(CliError::Input(format!(
                "\"{key}\" must be a vector, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Some(RealVector::from_iterator(
            m.len(),
            m.transpose().iter().copied(),
        )))
    }
}

/// Comma-separated poles; complex values as `a+bi` / `a-bi`.
pub fn parse_poles(text: &str) -> CliResult<PoleSet> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let normalized = s.replace('j', "i");
            Complex64::from_str(&normalized)
                .map_err(|_| CliError::Input(format!("cannot parse pole \"{s}\"")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if values.is_empty() {
        return Err(CliError::Input("empty pole list".into()));
    }
    PoleSet::new(values).map_err(|e| CliError::Input(e.to_string()))
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Input(format!("cannot parse {what} value \"{s}\"")))
        })
        .collect()
}

/// `zero`, `const:u1,u2,...` or `sin:a1,a2,...[:frequency[:phase]]`.
pub fn parse_input(text: &str) -> CliResult<InputSignal> {
    let mut parts = text.split(':');
    let kind = parts.next().unwrap_or_default().trim();
    let rest: Vec<&str> = parts.collect();
    match (kind, rest.as_slice()) {
        ("zero", []) => Ok(InputSignal::Zero),
        ("const", [values]) => Ok(InputSignal::Constant(RealVector::from_vec(parse_list(values, "input")?))),
        ("sin", [amp, more @ ..]) if more.len() <= 2 => {
            let scalar = |i: usize, default: f64| -> CliResult<f64> {
                more.get(i).map_or(Ok(default), |s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::Input(format!("cannot parse sinusoid parameter \"{s}\"")))
                })
            };
            Ok(InputSignal::Sinusoid {
                amplitude: RealVector::from_vec(parse_list(amp, "amplitude")?),
                frequency: scalar(0, 1.0)?,
                phase: scalar(1, 0.0)?,
            })
        }
        _ => Err(CliError::Input(format!(
            "unrecognized input signal \"{text}\" (expected zero, const:u1,..., or sin:a1,...[:freq[:phase]])"
        ))),
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// System file (JSON object of named matrices).
    pub system: PathBuf,
    /// PBH / staircase rank tolerance.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Emit a machine-readable JSON report.
    #[arg(long)]
    pub json: bool,
}

impl CommonArgs {
    fn tolerances(&self) -> CliResult<Tolerances> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(CliError::Input(format!(
                "--tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(Tolerances::with_structural(self.tol))
    }
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Target eigenvalues for F, e.g. "-1,-2+1i,-2-1i".
    #[arg(long, allow_hyphen_values = true)]
    pub poles: Option<String>,
    /// Where to write the solution matrices.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Observer file from `sylvobs observe`; synthesized from the system when absent.
    #[arg(long)]
    pub observer: Option<PathBuf>,
    /// Target eigenvalues when the observer is synthesized.
    #[arg(long, allow_hyphen_values = true)]
    pub poles: Option<String>,
    #[arg(long, default_value_t = 10.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    /// zero | const:u1,... | sin:a1,...[:freq[:phase]]
    #[arg(long, default_value = "zero", allow_hyphen_values = true)]
    pub input: String,
    /// Write the full trace as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Runs a command body, reporting errors on `err` and mapping them to exit codes.
fn run(err: &mut dyn Write, body: impl FnOnce() -> CliResult<i32>) -> i32 {
    match body() {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(e: io::Error) -> CliError {
    CliError::Input(format!("output error: {e}"))
}

fn complex_json(l: Complex64) -> serde_json::Value {
    json!({ "re": l.re, "im": l.im })
}

fn matrix_json(m: &RealMatrix) -> serde_json::Value {
    serde_json::to_value(MatrixEntry::from(m)).expect("matrices serialize")
}

fn format_matrix(name: &str, m: &RealMatrix) -> String {
    if m.is_empty() {
        return format!("{name} ({}x{}): empty\n", m.nrows(), m.ncols());
    }
    let mut s = format!("{name} ({}x{}):\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{:>14.6e}", m[(i, j)]))
            .collect();
        s.push_str("  ");
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

fn load_pair(args: &CommonArgs) -> CliResult<(MatrixFile, RealMatrix, RealMatrix)> {
    let file = MatrixFile::read(&args.system)?;
    let a = file.matrix("A")?;
    let c = file.matrix("C")?;
    Ok((file, a, c))
}

fn load_plant(file: &MatrixFile, tols: &Tolerances) -> CliResult<Plant> {
    let a = file.matrix("A")?;
    let b = file.matrix("B")?;
    let c = file.matrix("C")?;
    Plant::new(a, b, c, tols).map_err(|e| CliError::Input(format!("invalid plant: {e}")))
}

fn poles_arg(poles: &Option<String>) -> CliResult<Option<PoleSet>> {
    poles.as_deref().map(parse_poles).transpose()
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    run(err, || {
        let tols = args.common.tolerances()?;
        let (_, a, c) = load_pair(&args.common)?;
        let verdict =
            check_detectability(&a, &c, &tols).map_err(|e| CliError::Input(e.to_string()))?;
        if args.common.json {
            let report = json!({
                "detectable": verdict.detectable,
                "eigenvalues": verdict.per_eigenvalue.iter().map(|e| json!({
                    "eigenvalue": complex_json(e.eigenvalue),
                    "multiplicity": e.multiplicity,
                    "stable": e.stable,
                    "observable": e.observable,
                })).collect::<Vec<_>>(),
                "offending": verdict.offending.iter().map(|l| complex_json(*l)).collect::<Vec<_>>(),
            });
            writeln!(out, "{report:#}").map_err(io_err)?;
        } else {
            writeln!(
                out,
                "{:<28} {:>4} {:>8} {:>11}",
                "eigenvalue", "mult", "stable", "observable"
            )
            .map_err(io_err)?;
            for e in &verdict.per_eigenvalue {
                writeln!(
                    out,
                    "{:<28} {:>4} {:>8} {:>11}",
                    format_complex(e.eigenvalue),
                    e.multiplicity,
                    if e.stable { "yes" } else { "no" },
                    if e.observable { "yes" } else { "no" }
                )
                .map_err(io_err)?;
            }
            if verdict.detectable {
                writeln!(out, "detectable").map_err(io_err)?;
            } else {
                let list: Vec<String> = verdict
                    .offending
                    .iter()
                    .map(|l| format_complex(*l))
                    .collect();
                writeln!(
                    out,
                    "not detectable; offending eigenvalues: {}",
                    list.join(", ")
                )
                .map_err(io_err)?;
            }
        }
        Ok(if verdict.detectable {
            EXIT_OK
        } else {
            EXIT_UNDETECTABLE
        })
    })
}

pub fn cmd_solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    run(err, || {
        let tols = args.common.tolerances()?;
        let poles = poles_arg(&args.poles)?;
        let (_, a, c) = load_pair(&args.common)?;
        let sol =
            solve_constrained_sylvester(&a, &c, poles.as_ref(), &tols).map_err(|e| match e {
                Error::Undetectable { .. } => CliError::Core(e),
                other => CliError::Input(other.to_string()),
            })?;
        let report = verify_solution(&a, &c, &sol.t, &sol.f, &sol.g, &tols)?;
        let valid = report.is_valid(&a, &c, &tols);

        if let Some(path) = &args.out {
            let mut file = MatrixFile::default();
            for (key, m) in [
                ("T", &sol.t),
                ("F", &sol.f),
                ("G", &sol.g),
                ("L", &sol.l),
                ("K", &sol.k),
            ] {
                file.insert(key, m);
            }
            file.write(path)?;
        }

        if args.common.json {
            let doc = json!({
                "valid": valid,
                "residual_norm": report.residual_norm,
                "stacked_min_singular_value": report.stacked_min_singular_value,
                "f_spectral_abscissa": report.f_spectral_abscissa,
                "t_rank": report.t_rank,
                "T": matrix_json(&sol.t),
                "F": matrix_json(&sol.f),
                "G": matrix_json(&sol.g),
                "L": matrix_json(&sol.l),
                "K": matrix_json(&sol.k),
            });
            writeln!(out, "{doc:#}").map_err(io_err)?;
        } else {
            for (key, m) in [("T", &sol.t), ("F", &sol.f), ("G", &sol.g)] {
                write!(out, "{}", format_matrix(key, m)).map_err(io_err)?;
            }
            writeln!(
                out,
                "{:<28} {:.3e}",
                "residual ||TA - FT - GC||", report.residual_norm
            )
            .map_err(io_err)?;
            writeln!(
                out,
                "{:<28} {:.3e}",
                "min singular value [C; T]", report.stacked_min_singular_value
            )
            .map_err(io_err)?;
            writeln!(
                out,
                "{:<28} {:.6}",
                "spectral abscissa of F", report.f_spectral_abscissa
            )
            .map_err(io_err)?;
            writeln!(out, "{:<28} {}", "rank of T", report.t_rank).map_err(io_err)?;
        }
        if !valid {
            return Err(CliError::Diagnostic(
                "the computed solution failed re-verification".into(),
            ));
        }
        Ok(EXIT_OK)
    })
}

fn observer_file(obs: &ReducedObserver) -> MatrixFile {
    let mut file = MatrixFile::default();
    for (key, m) in [
        ("F", &obs.f),
        ("G", &obs.g),
        ("P", &obs.p),
        ("T", &obs.t),
        ("W", &obs.w),
    ] {
        file.insert(key, m);
    }
    file
}

pub fn cmd_observe(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    run(err, || {
        let tols = args.common.tolerances()?;
        let poles = poles_arg(&args.poles)?;
        let file = MatrixFile::read(&args.common.system)?;
        let plant = load_plant(&file, &tols)?;
        let obs = synthesize_observer(&plant, poles.as_ref(), &tols).map_err(|e| match e {
            Error::Undetectable { .. } => CliError::Core(e),
            other => CliError::Input(other.to_string()),
        })?;
        let result = observer_file(&obs);
        if let Some(path) = &args.out {
            result.write(path)?;
        }
        if args.common.json {
            let doc = json!({
                "order": obs.order(),
                "F": matrix_json(&obs.f),
                "G": matrix_json(&obs.g),
                "P": matrix_json(&obs.p),
                "T": matrix_json(&obs.t),
                "W": matrix_json(&obs.w),
            });
            writeln!(out, "{doc:#}").map_err(io_err)?;
        } else {
            writeln!(out, "observer order {}", obs.order()).map_err(io_err)?;
            for (key, m) in [
                ("F", &obs.f),
                ("G", &obs.g),
                ("P", &obs.p),
                ("T", &obs.t),
                ("W", &obs.w),
            ] {
                write!(out, "{}", format_matrix(key, m)).map_err(io_err)?;
            }
        }
        Ok(EXIT_OK)
    })
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    run(err, || {
        let tols = args.common.tolerances()?;
        let file = MatrixFile::read(&args.common.system)?;
        let plant = load_plant(&file, &tols)?;
        let obs = match &args.observer {
            Some(path) => {
                let of = MatrixFile::read(path)?;
                let obs = ReducedObserver::from_parts(
                    of.matrix("F")?,
                    of.matrix("G")?,
                    of.matrix("P")?,
                    of.matrix("T")?,
                    of.matrix("W")?,
                )
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                obs.check_compatible(&plant)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                obs
            }
            None => synthesize_observer(&plant, poles_arg(&args.poles)?.as_ref(), &tols).map_err(
                |e| match e {
                    Error::Undetectable { .. } => CliError::Core(e),
                    other => CliError::Input(other.to_string()),
                },
            )?,
        };
        let x0 = file
            .vector("x0")?
            .unwrap_or_else(|| RealVector::from_element(plant.states(), 1.0));
        let z0 = file
            .vector("z0")?
            .unwrap_or_else(|| RealVector::zeros(obs.order()));
        let cfg = SimulationConfig {
            t_final: args.t_final,
            dt: args.dt,
            input: parse_input(&args.input)?,
        };
        let trace =
            simulate(&plant, &obs, &x0, &z0, &cfg).map_err(|e| CliError::Input(e.to_string()))?;
        let metrics = error_metrics(&trace)?;
        if let Some(path) = &args.csv {
            let f = fs::File::create(path)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
            write_trace_csv(&trace, io::BufWriter::new(f)).map_err(io_err)?;
        }

        let noise_floor = 1e-9 * (1.0 + x0.norm());
        let converged = metrics.decay_ratio < 1.0 || metrics.final_error_norm <= noise_floor;
        if args.common.json {
            let doc = json!({
                "samples": trace.len(),
                "final_error_norm": metrics.final_error_norm,
                "decay_ratio": metrics.decay_ratio,
                "estimate_final_error": metrics.estimate_final_error,
                "converged": converged,
            });
            writeln!(out, "{doc:#}").map_err(io_err)?;
        } else {
            writeln!(out, "{:<24} {}", "samples", trace.len()).map_err(io_err)?;
            writeln!(
                out,
                "{:<24} {:.6e}",
                "final error norm", metrics.final_error_norm
            )
            .map_err(io_err)?;
            writeln!(out, "{:<24} {:.6e}", "decay ratio", metrics.decay_ratio).map_err(io_err)?;
            writeln!(
                out,
                "{:<24} {:.6e}",
                "estimate final error", metrics.estimate_final_error
            )
            .map_err(io_err)?;
        }
        if !converged {
            return Err(CliError::Diagnostic("observer error did not decay".into()));
        }
        Ok(EXIT_OK)
    })
}
