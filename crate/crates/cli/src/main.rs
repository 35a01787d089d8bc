//! Command-line driver: parse one JSON run configuration, execute the
//! requested pipeline, and emit deterministic CSV/JSON reports.
//!
//! Exit codes: 0 success, 1 domain or I/O failure (with a machine-readable
//! error JSON on stderr), 2 configuration error (listing every offending
//! key). Outputs are byte-identical across reruns of the same configuration:
//! fixed float formatting, fixed candidate seeds, order-preserving parallel
//! collection.

mod config;
mod emit;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{ConfigIssue, FiberConfig, OutputFormat, PerturbationConfig, RunConfig};
use emit::{fmt_f64, to_json_bytes, Csv, OutFile};
use warped_spectra::{
    assemble_spectrum, derivative_report, spectrum_of_family, split_search, trace_curves,
    BaseMesh, CandidateDirections, Error as CoreError, FiberSpectrum, SpectrumClassification,
    WarpField,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "warped-spectra",
    about = "Spectra of Laplacians on warped products: assembly, classification, perturbation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the weighted base operator for every retained fiber eigenvalue
    Spectrum(CommonArgs),
    /// Assemble the product spectrum with multiplicities
    Assemble(CommonArgs),
    /// Assemble and classify levels (warped-simple, G-simple)
    Classify(CommonArgs),
    /// Derivative report (formula, identity route, Hellmann-Feynman, FD)
    Derivative(CommonArgs),
    /// Try candidate directions that split a clustered level
    Split(CommonArgs),
    /// Trace eigenvalue curves along f + t r over a t grid
    Trace(CommonArgs),
    /// Cross-check the assembled spectrum against the full 2-D operator
    Validate(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Assemble(_) => "assemble",
            Command::Classify(_) => "classify",
            Command::Derivative(_) => "derivative",
            Command::Split(_) => "split",
            Command::Trace(_) => "trace",
            Command::Validate(_) => "validate",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Spectrum(a)
            | Command::Assemble(a)
            | Command::Classify(a)
            | Command::Derivative(a)
            | Command::Split(a)
            | Command::Trace(a)
            | Command::Validate(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Print progress details to stderr
    #[arg(short, long)]
    verbose: bool,
}

enum CliError {
    Config(Vec<ConfigIssue>),
    Domain(CoreError),
    Io(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Domain(e)
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    exit_code: i32,
    kind: &'a str,
    message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    issues: Vec<ConfigIssue>,
}

#[derive(Serialize)]
struct ErrorEnvelope<'a> {
    error: ErrorBody<'a>,
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(&cli.command));
}

fn run(command: &Command) -> i32 {
    let args = command.args();
    let raw = match std::fs::read_to_string(&args.config) {
        Ok(s) => s,
        Err(e) => {
            return fail(CliError::Config(vec![ConfigIssue {
                key: "config".into(),
                problem: format!("cannot read {}: {e}", args.config.display()),
            }]))
        }
    };
    let value: serde_json::Value = match serde_json::from_str(&raw) {
        Ok(v) => v,
        Err(e) => {
            return fail(CliError::Config(vec![ConfigIssue {
                key: "config".into(),
                problem: format!("invalid JSON: {e}"),
            }]))
        }
    };
    let mut cfg = match RunConfig::from_value(&value) {
        Ok(c) => c,
        Err(issues) => return fail(CliError::Config(issues)),
    };
    if let Some(dir) = &args.output_dir {
        cfg.output.dir = dir.clone();
    }

    let t0 = std::time::Instant::now();
    let files = match dispatch(command, &cfg) {
        Ok(files) => files,
        Err(e) => return fail(e),
    };
    let written = match emit::write_all(&cfg.output.dir, &files) {
        Ok(paths) => paths,
        Err(e) => {
            return fail(CliError::Io(format!(
                "cannot write reports under {}: {e}",
                cfg.output.dir.display()
            )))
        }
    };
    for path in &written {
        println!("wrote {}", path.display());
    }
    if args.verbose {
        eprintln!("{} finished in {:?}", command.name(), t0.elapsed());
    }
    0
}

fn fail(e: CliError) -> i32 {
    let (code, kind, message, issues) = match e {
        CliError::Config(issues) => {
            let message = format!(
                "configuration invalid: {}",
                issues
                    .iter()
                    .map(|i| format!("{} ({})", i.key, i.problem))
                    .collect::<Vec<_>>()
                    .join("; ")
            );
            (2, "config", message, issues)
        }
        CliError::Domain(err) => (1, "domain", err.to_string(), vec![]),
        CliError::Io(msg) => (1, "io", msg, vec![]),
    };
    let envelope = ErrorEnvelope {
        error: ErrorBody {
            exit_code: code,
            kind,
            message,
            issues,
        },
    };
    eprintln!(
        "{}",
        serde_json::to_string(&envelope).unwrap_or_else(|_| "{\"error\":{}}".into())
    );
    code
}

/// Common pipeline ingredients built from the configuration.
struct Setup {
    warp: WarpField,
    fiber: FiberSpectrum,
}

fn setup(cfg: &RunConfig) -> Result<Setup, CliError> {
    let mesh = BaseMesh::new(cfg.base.kind, cfg.base.length, cfg.base.n, cfg.base.bc)?;
    let warp = cfg.warp.sample(&mesh, cfg.m_fiber)?;
    let fiber = cfg.fiber.build()?;
    Ok(Setup { warp, fiber })
}

fn dispatch(command: &Command, cfg: &RunConfig) -> Result<Vec<OutFile>, CliError> {
    match command {
        Command::Spectrum(_) => cmd_spectrum(cfg),
        Command::Assemble(_) => cmd_assemble(cfg, false),
        Command::Classify(_) => cmd_assemble(cfg, true),
        Command::Derivative(_) => cmd_derivative(cfg),
        Command::Split(_) => cmd_split(cfg),
        Command::Trace(_) => cmd_trace(cfg),
        Command::Validate(_) => cmd_validate(cfg),
    }
}

fn wants(cfg: &RunConfig, f: OutputFormat) -> bool {
    cfg.output.formats.contains(&f)
}

/// Requires the perturbation block and a set of keys inside it; missing
/// pieces are configuration errors naming each absent key.
fn need_perturbation<'a>(
    cfg: &'a RunConfig,
    needed: &[&str],
) -> Result<&'a PerturbationConfig, CliError> {
    let p = match &cfg.perturbation {
        Some(p) => p,
        None => {
            return Err(CliError::Config(vec![ConfigIssue {
                key: "perturbation".into(),
                problem: "missing (required by this command)".into(),
            }]))
        }
    };
    let mut issues = vec![];
    for &key in needed {
        let present = match key {
            "r" => p.r.is_some(),
            "mu" => p.mu.is_some(),
            "index" => p.index.is_some(),
            "t" => p.t.is_some(),
            "target_lambda" => p.target_lambda.is_some(),
            "t_grid" => p.t_grid.is_some(),
            "k" => p.k.is_some(),
            "r_or_seed" => p.r.is_some() || p.seed.is_some(),
            _ => unreachable!("unknown requirement {key}"),
        };
        if !present {
            let (key, problem) = if key == "r_or_seed" {
                (
                    "perturbation.r".to_string(),
                    "missing (provide an explicit direction r or a seed)".to_string(),
                )
            } else {
                (format!("perturbation.{key}"), "missing".to_string())
            };
            issues.push(ConfigIssue { key, problem });
        }
    }
    if issues.is_empty() {
        Ok(p)
    } else {
        Err(CliError::Config(issues))
    }
}

#[derive(Serialize)]
struct BranchOut {
    fiber_index: usize,
    mu: f64,
    eigenvalues: Vec<f64>,
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    schema_version: u32,
    command: &'static str,
    lambda_max: f64,
    branches: Vec<BranchOut>,
    skipped: &'a [warped_spectra::SkippedMu],
}

fn cmd_spectrum(cfg: &RunConfig) -> Result<Vec<OutFile>, CliError> {
    let s = setup(cfg)?;
    let family = spectrum_of_family(&s.warp, &s.fiber, cfg.lambda_max)?;
    let mut files = vec![];
    if wants(cfg, OutputFormat::Csv) {
        let mut csv = Csv::new("mu,j,lambda");
        for b in &family.branches {
            for (j, lam) in b.decomposition.eigenvalues.iter().enumerate() {
                csv.row(&[fmt_f64(b.mu), j.to_string(), fmt_f64(*lam)]);
            }
        }
        files.push(OutFile {
            name: "branches.csv".into(),
            bytes: csv.into_bytes(),
        });
    }
    if wants(cfg, OutputFormat::Json) {
        let report = SpectrumReport {
            schema_version: SCHEMA_VERSION,
            command: "spectrum",
            lambda_max: cfg.lambda_max,
            branches: family
                .branches
                .iter()
                .map(|b| BranchOut {
                    fiber_index: b.fiber_index,
                    mu: b.mu,
                    eigenvalues: b.decomposition.eigenvalues.clone(),
                })
                .collect(),
            skipped: &family.skipped,
        };
        files.push(OutFile {
            name: "branches.json".into(),
            bytes: to_json_bytes(&report),
        });
    }
    Ok(files)
}

fn sources_cell(level: &warped_spectra::AssembledLevel) -> String {
    level
        .sources
        .iter()
        .map(|s| {
            let js = s
                .base_indices
                .iter()
                .map(|j| j.to_string())
                .collect::<Vec<_>>()
                .join("|");
            let label = s
                .label
                .as_ref()
                .map(|l| l.name.clone())
                .unwrap_or_default();
            format!(
                "mu={};js={js};m_l={};m_f={};label={label}",
                fmt_f64(s.mu),
                s.m_l,
                s.m_f
            )
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

#[derive(Serialize)]
struct ClassificationReport<'a> {
    schema_version: u32,
    command: &'static str,
    /// Representation multiplicities count real dimensions.
    multiplicity_convention: &'static str,
    classification: &'a SpectrumClassification,
}

fn cmd_assemble(cfg: &RunConfig, classify: bool) -> Result<Vec<OutFile>, CliError> {
    let s = setup(cfg)?;
    let family = spectrum_of_family(&s.warp, &s.fiber, cfg.lambda_max)?;
    let classification = assemble_spectrum(&family, &s.fiber, cfg.lambda_max, cfg.cluster_tol)?;
    let (csv_name, json_name) = if classify {
        ("levels.csv", "levels.json")
    } else {
        ("spectrum.csv", "spectrum.json")
    };
    let mut files = vec![];
    if wants(cfg, OutputFormat::Csv) {
        let mut csv = if classify {
            Csv::new("lambda,total_mult,warped_simple,g_simple,sources")
        } else {
            Csv::new("lambda,total_mult,sources")
        };
        for level in &classification.levels {
            if classify {
                csv.row(&[
                    fmt_f64(level.lambda),
                    level.total_mult.to_string(),
                    level.warped_simple.to_string(),
                    level
                        .g_simple
                        .map(|g| g.to_string())
                        .unwrap_or_default(),
                    sources_cell(level),
                ]);
            } else {
                csv.row(&[
                    fmt_f64(level.lambda),
                    level.total_mult.to_string(),
                    sources_cell(level),
                ]);
            }
        }
        files.push(OutFile {
            name: csv_name.into(),
            bytes: csv.into_bytes(),
        });
    }
    if wants(cfg, OutputFormat::Json) {
        let report = ClassificationReport {
            schema_version: SCHEMA_VERSION,
            command: if classify { "classify" } else { "assemble" },
            multiplicity_convention: "real_dimension",
            classification: &classification,
        };
        files.push(OutFile {
            name: json_name.into(),
            bytes: to_json_bytes(&report),
        });
    }
    Ok(files)
}

#[derive(Serialize)]
struct DerivativeEnvelope<'a> {
    schema_version: u32,
    command: &'static str,
    report: &'a warped_spectra::DerivativeReport,
}

fn cmd_derivative(cfg: &RunConfig) -> Result<Vec<OutFile>, CliError> {
    let p = need_perturbation(cfg, &["r", "mu", "index"])?.clone();
    let s = setup(cfg)?;
    let r = p
        .r
        .as_ref()
        .expect("checked")
        .sample_direction(&s.warp.mesh)?;
    let report = derivative_report(
        &s.warp,
        &r,
        p.mu.expect("checked"),
        p.index.expect("checked"),
        &p.steps,
        p.exponent,
    )?;
    let mut files = vec![];
    if wants(cfg, OutputFormat::Csv) {
        let mut csv = Csv::new(
            "mu,index,lambda0,slope_formula,slope_via_l,slope_hf,slope_fd,fd_step,split_slopes",
        );
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        csv.row(&[
            fmt_f64(report.mu),
            report.index.to_string(),
            fmt_f64(report.lambda0),
            opt(report.slope_formula),
            opt(report.slope_via_l),
            opt(report.slope_hf),
            opt(report.slope_fd.map(|f| f.value)),
            opt(report.slope_fd.map(|f| f.step_used)),
            report
                .degenerate
                .as_ref()
                .map(|d| {
                    d.split_slopes
                        .iter()
                        .map(|s| fmt_f64(*s))
                        .collect::<Vec<_>>()
                        .join("|")
                })
                .unwrap_or_default(),
        ]);
        files.push(OutFile {
            name: "derivative.csv".into(),
            bytes: csv.into_bytes(),
        });
    }
    if wants(cfg, OutputFormat::Json) {
        files.push(OutFile {
            name: "derivative.json".into(),
            bytes: to_json_bytes(&DerivativeEnvelope {
                schema_version: SCHEMA_VERSION,
                command: "derivative",
                report: &report,
            }),
        });
    }
    Ok(files)
}

#[derive(Serialize)]
struct SplitEnvelope<'a> {
    schema_version: u32,
    command: &'static str,
    seed: Option<u64>,
    degree: usize,
    report: &'a warped_spectra::PerturbationReport,
}

fn cmd_split(cfg: &RunConfig) -> Result<Vec<OutFile>, CliError> {
    let p = need_perturbation(cfg, &["t", "target_lambda", "r_or_seed"])?.clone();
    let s = setup(cfg)?;
    let family = spectrum_of_family(&s.warp, &s.fiber, cfg.lambda_max)?;
    let classification = assemble_spectrum(&family, &s.fiber, cfg.lambda_max, cfg.cluster_tol)?;
    let target = classification
        .level_nearest(p.target_lambda.expect("checked"))
        .ok_or_else(|| {
            CliError::Domain(CoreError::SizeMismatch {
                detail: "assembled spectrum has no levels below lambda_max".into(),
            })
        })?
        .clone();
    let candidates = match (&p.r, p.seed) {
        (Some(spec), _) => CandidateDirections::Explicit(vec![spec.clone()]),
        (None, Some(seed)) => CandidateDirections::SeededFourier {
            seed,
            degree: p.degree,
            count: p.candidates,
        },
        (None, None) => unreachable!("checked by need_perturbation"),
    };
    let report = split_search(
        &s.warp,
        &s.fiber,
        &target,
        &candidates,
        p.t.expect("checked"),
        p.gap_tol,
        cfg.lambda_max,
        cfg.cluster_tol,
    )?;
    let mut files = vec![];
    if wants(cfg, OutputFormat::Csv) {
        let mut csv =
            Csv::new("candidate,positivity_ok,min_gap,achieved_split,all_levels_warped_simple");
        for c in &report.candidates {
            csv.row(&[
                c.index.to_string(),
                c.positivity_ok.to_string(),
                c.min_gap.map(fmt_f64).unwrap_or_default(),
                c.achieved_split.to_string(),
                c.all_levels_warped_simple
                    .map(|b| b.to_string())
                    .unwrap_or_default(),
            ]);
        }
        files.push(OutFile {
            name: "split.csv".into(),
            bytes: csv.into_bytes(),
        });
    }
    if wants(cfg, OutputFormat::Json) {
        files.push(OutFile {
            name: "split.json".into(),
            bytes: to_json_bytes(&SplitEnvelope {
                schema_version: SCHEMA_VERSION,
                command: "split",
                seed: p.seed,
                degree: p.degree,
                report: &report,
            }),
        });
    }
    Ok(files)
}

#[derive(Serialize)]
struct TraceEnvelope<'a> {
    schema_version: u32,
    command: &'static str,
    curves: &'a warped_spectra::EigenCurves,
}

fn cmd_trace(cfg: &RunConfig) -> Result<Vec<OutFile>, CliError> {
    let p = need_perturbation(cfg, &["r", "t_grid", "k"])?.clone();
    let s = setup(cfg)?;
    let r = p
        .r
        .as_ref()
        .expect("checked")
        .sample_direction(&s.warp.mesh)?;
    let curves = trace_curves(
        &s.warp,
        &r,
        p.t_grid.as_ref().expect("checked"),
        &s.fiber,
        p.k.expect("checked"),
        cfg.lambda_max,
    )?;
    let mut files = vec![];
    if wants(cfg, OutputFormat::Csv) {
        let mut csv = Csv::new("t,branch,mu,lambda");
        for branch in &curves.branches {
            for (ti, t) in curves.t_grid.iter().enumerate() {
                csv.row(&[
                    fmt_f64(*t),
                    branch.branch_id.to_string(),
                    fmt_f64(branch.mu),
                    fmt_f64(branch.lambdas[ti]),
                ]);
            }
        }
        files.push(OutFile {
            name: "curves.csv".into(),
            bytes: csv.into_bytes(),
        });
    }
    if wants(cfg, OutputFormat::Json) {
        files.push(OutFile {
            name: "curves.json".into(),
            bytes: to_json_bytes(&TraceEnvelope {
                schema_version: SCHEMA_VERSION,
                command: "trace",
                curves: &curves,
            }),
        });
    }
    Ok(files)
}

#[derive(Serialize)]
struct ValidateEnvelope<'a> {
    schema_version: u32,
    command: &'static str,
    n_b: usize,
    n_f: usize,
    report: &'a warped_spectra::ValidationReport,
}

fn cmd_validate(cfg: &RunConfig) -> Result<Vec<OutFile>, CliError> {
    let (n_f, circumference) = match &cfg.fiber {
        FiberConfig::DiscreteCircle { n_f, circumference } => (*n_f, *circumference),
        other => {
            return Err(CliError::Config(vec![ConfigIssue {
                key: "fiber.kind".into(),
                problem: format!(
                    "validate needs a discrete_circle fiber, got {}",
                    other.kind_name()
                ),
            }]))
        }
    };
    let s = setup(cfg)?;
    let k = cfg.validate.as_ref().map(|v| v.k).unwrap_or(40);
    let product = warped_spectra::assemble_full_product(&s.warp, n_f, circumference)?;
    let assembled = warped_spectra::assembled_discrete_multiset(&s.warp, n_f, circumference)?;
    let report = warped_spectra::validate_separation(&product, &assembled, k)?;
    Ok(vec![OutFile {
        name: "validation.json".into(),
        bytes: to_json_bytes(&ValidateEnvelope {
            schema_version: SCHEMA_VERSION,
            command: "validate",
            n_b: s.warp.mesh.n,
            n_f,
            report: &report,
        }),
    }])
}
