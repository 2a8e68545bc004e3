//! Command-line front end: argument parsing, metric sources, report
//! assembly and canonical JSON / text emission.

use std::fmt::Write as _;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use go_metric_lab::go::{check_go, reproduce_theorem, ParameterGrid, ProbeSet, Theorem};
use go_metric_lab::metric::{
    gmu_metric, normal_metric, validate_metric, EigMap, MetricOperator, MetricTolerances, RawOperator,
};
use go_metric_lab::space::{decompose, parse_spec, Decomposition};
use go_metric_lab::structure::derive_constraints;
use go_metric_lab::{Error, Family};

pub const SEED_ENV: &str = "GO_METRIC_LAB_SEED";
pub const TOOL: &str = "go-metric-lab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum SubcommandKind {
    Decompose,
    ValidateMetric,
    CheckGo,
    DeriveConstraints,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "go-metric-lab", version, about = "Geodesic orbit metrics on SO(n) and U(n) quotients")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the reductive decomposition and submodule catalogs
    Decompose(CommonArgs),
    /// Check symmetry, positivity and equivariance of a metric
    ValidateMetric(CommonArgs),
    /// Test the geodesic orbit property of a metric
    CheckGo(CommonArgs),
    /// Derive the eigenvalue classes forced on any g.o. metric
    DeriveConstraints(CommonArgs),
    /// Reproduce a classification theorem on a grid of metrics
    Verify(CommonArgs),
}

#[derive(Debug, Args, Clone)]
struct CommonArgs {
    /// Quotient, e.g. "SO(7)/SO(2)xSO(3)"
    #[arg(long)]
    spec: String,
    /// normal:LAMBDA, gmu:MU, or inline JSON (eigenvalue map or raw operator)
    #[arg(long, conflicts_with = "metric_file")]
    metric: Option<String>,
    /// JSON file holding an eigenvalue map or raw operator
    #[arg(long)]
    metric_file: Option<String>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Number of random probes
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Seed for random probes (overridden by GO_METRIC_LAB_SEED)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of standard output
    #[arg(long)]
    output: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// so-normal or u-gmu (verify only; defaults to the spec's family)
    #[arg(long)]
    theorem: Option<String>,
    /// Comma-separated scales for verify (lambda for SO, mu for U)
    #[arg(long, value_delimiter = ',')]
    scales: Option<Vec<f64>>,
    /// Comma-separated perturbation ratios for verify
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
}

/// Fully resolved invocation; echoed in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandConfig {
    pub subcommand: SubcommandKind,
    pub spec: String,
    pub metric: Option<String>,
    pub metric_file: Option<String>,
    pub tol: f64,
    pub samples: usize,
    pub seed: u64,
    pub output: Option<String>,
    pub format: Format,
    pub theorem: Option<String>,
    pub scales: Option<Vec<f64>>,
    pub ratios: Option<Vec<f64>>,
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
}

impl CommandConfig {
    /// Parses an argument vector (program name first). `env_seed` replaces
    /// `--seed` when set.
    pub fn parse(argv: &[String], env_seed: Option<&str>) -> Result<Self, String> {
        let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
        let (subcommand, a) = match cli.command {
            Command::Decompose(a) => (SubcommandKind::Decompose, a),
            Command::ValidateMetric(a) => (SubcommandKind::ValidateMetric, a),
            Command::CheckGo(a) => (SubcommandKind::CheckGo, a),
            Command::DeriveConstraints(a) => (SubcommandKind::DeriveConstraints, a),
            Command::Verify(a) => (SubcommandKind::Verify, a),
        };
        let seed = match env_seed {
            Some(s) => s.trim().parse().map_err(|_| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?,
            None => a.seed,
        };
        if !(a.tol.is_finite() && a.tol > 0.0) {
            return Err(format!("--tol must be positive, got {}", a.tol));
        }
        Ok(CommandConfig {
            subcommand,
            spec: a.spec,
            metric: a.metric,
            metric_file: a.metric_file,
            tol: a.tol,
            samples: a.samples,
            seed,
            output: a.output,
            format: a.format,
            theorem: a.theorem,
            scales: a.scales,
            ratios: a.ratios,
        })
    }

    /// Argument vector that parses back to this config.
    pub fn to_argv(&self) -> Vec<String> {
        let sub = self.subcommand.to_possible_value().expect("no skipped variants").get_name().to_string();
        let mut v = vec![TOOL.to_string(), sub, "--spec".into(), self.spec.clone()];
        let mut push = |k: &str, val: String| {
            v.push(k.to_string());
            v.push(val);
        };
        if let Some(m) = &self.metric {
            push("--metric", m.clone());
        }
        if let Some(m) = &self.metric_file {
            push("--metric-file", m.clone());
        }
        push("--tol", format!("{:?}", self.tol));
        push("--samples", self.samples.to_string());
        push("--seed", self.seed.to_string());
        if let Some(o) = &self.output {
            push("--output", o.clone());
        }
        push("--format", self.format.to_possible_value().expect("named").get_name().to_string());
        if let Some(t) = &self.theorem {
            push("--theorem", t.clone());
        }
        if let Some(s) = &self.scales {
            push("--scales", join(s));
        }
        if let Some(r) = &self.ratios {
            push("--ratios", join(r));
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub config: CommandConfig,
    pub decomposition: go_metric_lab::space::DecompositionSummary,
    pub status: String,
    pub results: Value,
}

/// Failure of a run: exit code 2 with a message.
#[derive(Debug)]
struct UsageError(String);

impl From<Error> for UsageError {
    fn from(e: Error) -> Self {
        UsageError(e.to_string())
    }
}

/// Resolves the `--metric` / `--metric-file` source into an operator and a
/// short description for the report.
pub fn load_metric(dec: &Decomposition, cfg: &CommandConfig) -> Result<(MetricOperator, Value), String> {
    let text = match (&cfg.metric, &cfg.metric_file) {
        (Some(m), _) => m.clone(),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?,
        (None, None) => return Err("this subcommand needs --metric or --metric-file".into()),
    };
    let text = text.trim();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| format!("bad number {s:?} in --metric"));
    if let Some(l) = text.strip_prefix("normal:") {
        let lam = num(l)?;
        let op = normal_metric(dec, lam).map_err(|e| e.to_string())?;
        return Ok((op, json!({"family": "normal", "lambda": lam})));
    }
    if let Some(m) = text.strip_prefix("gmu:") {
        let mu = num(m)?;
        let op = gmu_metric(dec, mu).map_err(|e| e.to_string())?;
        return Ok((op, json!({"family": "gmu", "mu": mu})));
    }
    let value: Value = serde_json::from_str(text).map_err(|e| format!("metric is not normal:, gmu: or JSON: {e}"))?;
    if value.get("basis").is_some() && value.get("matrix").is_some() {
        let raw: RawOperator = serde_json::from_value(value).map_err(|e| format!("raw operator: {e}"))?;
        let op = raw.into_operator(dec).map_err(|e| e.to_string())?;
        let desc = json!({"family": "raw", "basis": raw.basis, "matrix": raw.matrix});
        return Ok((op, desc));
    }
    let eig: EigMap = serde_json::from_value(value).map_err(|e| format!("eigenvalue map: {e}"))?;
    // Validation happens separately so an invalid diagonal metric reports its residuals.
    let values = eig.resolve(dec).map_err(|e| e.to_string())?;
    let d = dec.dim_m();
    let mut a = nalgebra::DMatrix::zeros(d, d);
    for (s, v) in dec.fine_catalog().iter().zip(values) {
        a += s.projector_m() * v;
    }
    let op = MetricOperator::from_matrix(dec, a).map_err(|e| e.to_string())?;
    Ok((op, json!({"family": "diagonal", "eigenvalues": eig})))
}

fn theorem_for(cfg: &CommandConfig, dec: &Decomposition) -> Result<Theorem, String> {
    match &cfg.theorem {
        Some(t) => t.parse().map_err(|e: Error| e.to_string()),
        None => Ok(match dec.spec().family() {
            Family::SO => Theorem::SoNormal,
            Family::U => Theorem::UGmu,
        }),
    }
}

fn run_inner(cfg: &CommandConfig) -> Result<(ReportDocument, i32), UsageError> {
    let spec = parse_spec(&cfg.spec)?;
    let dec = decompose(&spec)?;
    let (status, code, results) = match cfg.subcommand {
        SubcommandKind::Decompose => {
            let normalizer = dec.normalizer();
            let results = json!({
                "h_basis": dec.h_basis().iter().map(|x| dec.algebra().basis()[x.coeffs().iamax()].to_string()).collect::<Vec<_>>(),
                "m_basis": dec.m_labels().iter().map(ToString::to_string).collect::<Vec<_>>(),
                "coarse_catalog": catalog_json(dec.coarse_catalog()),
                "fine_catalog": catalog_json(dec.fine_catalog()),
                "normalizer_dim": normalizer.len(),
                "isotropy_fixed_dim": dec.isotropy_fixed_dim(),
            });
            ("ok", EXIT_OK, results)
        }
        SubcommandKind::ValidateMetric => {
            let (op, desc) = load_metric(&dec, cfg).map_err(UsageError)?;
            let report = validate_metric(&dec, &op, &MetricTolerances::default())?;
            let code = if report.pass { EXIT_OK } else { EXIT_FAIL };
            (if report.pass { "pass" } else { "fail" }, code, json!({"metric": desc, "validation": report}))
        }
        SubcommandKind::CheckGo => {
            let (op, desc) = load_metric(&dec, cfg).map_err(UsageError)?;
            let report = validate_metric(&dec, &op, &MetricTolerances::default())?;
            if !report.pass {
                return Err(UsageError(format!("metric is not a valid invariant metric: {}", report.summary())));
            }
            let probes = ProbeSet::new(&dec, cfg.samples, cfg.seed);
            let verdict = check_go(&dec, &op, &probes, cfg.tol)?;
            let code = if verdict.pass { EXIT_OK } else { EXIT_FAIL };
            let status = if verdict.pass { "pass" } else { "fail" };
            (status, code, json!({"metric": desc, "verdict": verdict}))
        }
        SubcommandKind::DeriveConstraints => {
            let classes = derive_constraints(&dec)?;
            ("ok", EXIT_OK, json!({"classes": classes.classes, "merges": classes.merges}))
        }
        SubcommandKind::Verify => {
            let theorem = theorem_for(cfg, &dec).map_err(UsageError)?;
            let mut grid = ParameterGrid::default_for(theorem);
            if let Some(s) = &cfg.scales {
                grid.scales = s.clone();
            }
            if let Some(r) = &cfg.ratios {
                grid.ratios = r.clone();
            }
            grid.samples = cfg.samples;
            grid.seed = cfg.seed;
            grid.tol = cfg.tol;
            let report = reproduce_theorem(&spec, theorem, &grid)?;
            let code = if report.pass { EXIT_OK } else { EXIT_FAIL };
            (if report.pass { "pass" } else { "fail" }, code, serde_json::to_value(&report).expect("serializable"))
        }
    };
    let doc = ReportDocument {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: cfg.clone(),
        decomposition: dec.summary(),
        status: status.into(),
        results,
    };
    Ok((doc, code))
}

fn catalog_json(cat: &[go_metric_lab::Submodule]) -> Value {
    Value::Array(
        cat.iter()
            .map(|s| json!({"id": s.id, "kind": s.kind, "dim": s.dim(), "basis": s.basis_labels}))
            .collect(),
    )
}

fn write_float(out: &mut String, x: f64) {
    if x.is_finite() {
        if x == x.trunc() && x.abs() < 1e15 {
            // Integral floats keep a fractional part so they stay floats.
            write!(out, "{:.1}", x).expect("string write");
        } else {
            write!(out, "{:.16e}", x).expect("string write");
        }
    } else {
        out.push_str("null");
    }
}

fn write_canonical(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                write_float(out, n.as_f64().expect("f64"));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string")),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                pad(out, indent + 2);
                write_canonical(out, x, indent + 2);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&serde_json::to_string(k).expect("string"));
                out.push_str(": ");
                write_canonical(out, &m[*k], indent + 2);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Canonical JSON: sorted keys, two-space indent, floats with 17
/// significant digits, non-finite floats as `null`.
pub fn canonical_json(v: &Value) -> String {
    let mut s = String::new();
    write_canonical(&mut s, v, 0);
    s.push('\n');
    s
}

fn text_report(doc: &ReportDocument) -> String {
    let mut s = String::new();
    let d = &doc.decomposition;
    let _ = writeln!(s, "{} {} -- {}", doc.tool, doc.version, doc.config.spec);
    let _ = writeln!(s, "dim g = {}, dim h = {}, dim m = {}, n0 = {}", d.dim_g, d.dim_h, d.dim_m, d.n0);
    let r = &doc.results;
    match doc.config.subcommand {
        SubcommandKind::Decompose => {
            for (name, key) in [("coarse", "coarse_catalog"), ("fine", "fine_catalog")] {
                let _ = writeln!(s, "{name} catalog:");
                for e in r[key].as_array().into_iter().flatten() {
                    let basis: Vec<&str> = e["basis"].as_array().into_iter().flatten().filter_map(Value::as_str).collect();
                    let _ = writeln!(s, "  {} (dim {}): {}", e["id"].as_str().unwrap_or(""), e["dim"], basis.join(", "));
                }
            }
            let _ = writeln!(s, "normalizer dimension: {}", r["normalizer_dim"]);
        }
        SubcommandKind::ValidateMetric => {
            let v = &r["validation"];
            let _ = writeln!(
                s,
                "symmetric: {} ({:.3e})\npositive: {} (min eigenvalue {:.6e})\nequivariant: {} ({:.3e})",
                v["symmetric"], v["symmetry_residual"].as_f64().unwrap_or(f64::NAN),
                v["positive"], v["min_eigenvalue"].as_f64().unwrap_or(f64::NAN),
                v["equivariant"], v["equivariance_residual"].as_f64().unwrap_or(f64::NAN),
            );
        }
        SubcommandKind::CheckGo => {
            let v = &r["verdict"];
            let _ = writeln!(
                s,
                "probes: {} deterministic + {} random (seed {})\nmax relative residual: {:.6e} (tol {:.1e})",
                v["deterministic_probes"], v["random_probes"], v["seed"],
                v["max_relative_residual"].as_f64().unwrap_or(f64::NAN), v["tol"].as_f64().unwrap_or(f64::NAN),
            );
            if let Some(c) = v["counterexample"].as_object() {
                let _ = writeln!(s, "counterexample ({}):", c["probe"].as_str().unwrap_or(""));
                let labels = c["labels"].as_array().into_iter().flatten();
                let coeffs = c["coeffs"].as_array().into_iter().flatten();
                for (l, x) in labels.zip(coeffs) {
                    let _ = writeln!(s, "  {:+.6} {}", x.as_f64().unwrap_or(f64::NAN), l.as_str().unwrap_or(""));
                }
            }
            let _ = writeln!(s, "verdict: {} ({})", doc.status.to_uppercase(), v["kind"].as_str().unwrap_or(""));
        }
        SubcommandKind::DeriveConstraints => {
            for (i, c) in r["classes"].as_array().into_iter().flatten().enumerate() {
                let ids: Vec<&str> = c.as_array().into_iter().flatten().filter_map(Value::as_str).collect();
                let _ = writeln!(s, "class {}: {}", i + 1, ids.join(", "));
            }
        }
        SubcommandKind::Verify => {
            let _ = writeln!(s, "theorem: {}", r["theorem"].as_str().unwrap_or(""));
            for e in r["entries"].as_array().into_iter().flatten() {
                let _ = writeln!(
                    s,
                    "  {:<28} expected {:<5} observed {:<5} residual {:.3e}",
                    e["label"].as_str().unwrap_or(""),
                    pass_word(&e["expected_pass"]),
                    pass_word(&e["observed_pass"]),
                    e["max_relative_residual"].as_f64().unwrap_or(f64::NAN),
                );
            }
        }
    }
    if doc.config.subcommand != SubcommandKind::CheckGo {
        let _ = writeln!(s, "status: {}", doc.status);
    }
    s
}

fn pass_word(v: &Value) -> &'static str {
    if v.as_bool() == Some(true) {
        "pass"
    } else {
        "fail"
    }
}

/// Serializes a report in the requested format.
pub fn emit_report(doc: &ReportDocument, format: Format) -> String {
    match format {
        Format::Json => canonical_json(&serde_json::to_value(doc).expect("serializable")),
        Format::Text => text_report(doc),
    }
}

/// Runs one invocation with explicit environment and streams.
pub fn run_with(argv: &[String], env_seed: Option<&str>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cfg = match CommandConfig::parse(argv, env_seed) {
        Ok(c) => c,
        Err(msg) => {
            // --help and --version are successful parses as far as users are concerned.
            let informational = msg.starts_with("Usage") || msg.starts_with(TOOL) || msg.contains("Print help");
            if informational && (argv.iter().any(|a| a == "--help" || a == "-h" || a == "--version" || a == "-V")) {
                let _ = write!(stdout, "{msg}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{msg}");
            return EXIT_USAGE;
        }
    };
    let (doc, code) = match run_inner(&cfg) {
        Ok(x) => x,
        Err(UsageError(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let bytes = emit_report(&doc, cfg.format);
    match &cfg.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, bytes) {
                let _ = writeln!(stderr, "error: cannot write {path}: {e}");
                return EXIT_USAGE;
            }
        }
        None => {
            if stdout.write_all(bytes.as_bytes()).is_err() {
                return EXIT_USAGE;
            }
        }
    }
    code
}

/// Runs with the process environment, stdout and stderr.
pub fn run_command(argv: &[String]) -> i32 {
    let env_seed = std::env::var(SEED_ENV).ok();
    run_with(argv, env_seed.as_deref(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
