//! Run configuration: a single JSON file describing the base, warp, fiber,
//! cutoffs, and command-specific blocks.
//!
//! Parsing walks the raw JSON value and collects *every* violation (missing
//! keys, wrong types, bad enum values, cross-field inconsistencies) instead
//! of bailing at the first, so one failed run reports the full repair list.

use serde_json::Value;

use warped_spectra::{BaseKind, BoundaryCondition, FiberEntry, FiberSpectrum, WarpingSpec};

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConfigIssue {
    pub key: String,
    pub problem: String,
}

#[derive(Debug, Clone)]
pub struct BaseConfig {
    pub kind: BaseKind,
    pub length: f64,
    pub n: usize,
    pub bc: BoundaryCondition,
}

#[derive(Debug, Clone)]
pub enum FiberConfig {
    Circle { circumference: f64, mu_max: f64 },
    Sphere { l_max: i64 },
    DiscreteCircle { n_f: usize, circumference: f64 },
    Custom { entries: Vec<FiberEntry>, dim: usize },
}

impl FiberConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            FiberConfig::Circle { .. } => "circle",
            FiberConfig::Sphere { .. } => "sphere",
            FiberConfig::DiscreteCircle { .. } => "discrete_circle",
            FiberConfig::Custom { .. } => "custom",
        }
    }

    /// The fiber dimension this kind implies.
    pub fn implied_dim(&self) -> usize {
        match self {
            FiberConfig::Circle { .. } | FiberConfig::DiscreteCircle { .. } => 1,
            FiberConfig::Sphere { .. } => 2,
            FiberConfig::Custom { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> warped_spectra::Result<FiberSpectrum> {
        match self {
            FiberConfig::Circle {
                circumference,
                mu_max,
            } => warped_spectra::circle_fiber(*circumference, *mu_max),
            FiberConfig::Sphere { l_max } => warped_spectra::sphere_fiber(*l_max),
            FiberConfig::DiscreteCircle { n_f, circumference } => {
                warped_spectra::discrete_circle_fiber(*n_f, *circumference)
            }
            FiberConfig::Custom { entries, dim } => {
                warped_spectra::custom_fiber(entries.clone(), *dim)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerturbationConfig {
    pub r: Option<WarpingSpec>,
    pub mu: Option<f64>,
    pub index: Option<usize>,
    pub steps: Vec<f64>,
    pub exponent: warped_spectra::WeightExponent,
    pub t: Option<f64>,
    pub seed: Option<u64>,
    pub degree: usize,
    pub candidates: usize,
    pub gap_tol: f64,
    pub target_lambda: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct ValidateConfig {
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: std::path::PathBuf,
    pub formats: Vec<OutputFormat>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub base: BaseConfig,
    pub warp: WarpingSpec,
    pub m_fiber: usize,
    pub fiber: FiberConfig,
    pub lambda_max: f64,
    pub cluster_tol: f64,
    pub perturbation: Option<PerturbationConfig>,
    pub validate: Option<ValidateConfig>,
    pub output: OutputConfig,
}

struct Ctx {
    issues: Vec<ConfigIssue>,
}

impl Ctx {
    fn push(&mut self, key: &str, problem: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.to_string(),
            problem: problem.into(),
        });
    }

    fn object<'a>(&mut self, v: &'a Value, key: &str, required: bool) -> Option<&'a Value> {
        match v.get(key) {
            Some(o @ Value::Object(_)) => Some(o),
            Some(_) => {
                self.push(key, "expected an object");
                None
            }
            None => {
                if required {
                    self.push(key, "missing");
                }
                None
            }
        }
    }

    fn f64(&mut self, v: &Value, key: &str, leaf: &str, required: bool) -> Option<f64> {
        match v.get(leaf) {
            Some(x) => match x.as_f64() {
                Some(f) if f.is_finite() => Some(f),
                _ => {
                    self.push(key, "expected a finite number");
                    None
                }
            },
            None => {
                if required {
                    self.push(key, "missing");
                }
                None
            }
        }
    }

    fn usize_(&mut self, v: &Value, key: &str, leaf: &str, required: bool) -> Option<usize> {
        match v.get(leaf) {
            Some(x) => match x.as_u64() {
                Some(u) => Some(u as usize),
                None => {
                    self.push(key, "expected a nonnegative integer");
                    None
                }
            },
            None => {
                if required {
                    self.push(key, "missing");
                }
                None
            }
        }
    }

    fn i64_(&mut self, v: &Value, key: &str, leaf: &str, required: bool) -> Option<i64> {
        match v.get(leaf) {
            Some(x) => match x.as_i64() {
                Some(u) => Some(u),
                None => {
                    self.push(key, "expected an integer");
                    None
                }
            },
            None => {
                if required {
                    self.push(key, "missing");
                }
                None
            }
        }
    }

    fn u64_(&mut self, v: &Value, key: &str, leaf: &str, required: bool) -> Option<u64> {
        match v.get(leaf) {
            Some(x) => match x.as_u64() {
                Some(u) => Some(u),
                None => {
                    self.push(key, "expected a nonnegative integer");
                    None
                }
            },
            None => {
                if required {
                    self.push(key, "missing");
                }
                None
            }
        }
    }

    fn string<'a>(&mut self, v: &'a Value, key: &str, leaf: &str, required: bool) -> Option<&'a str> {
        match v.get(leaf) {
            Some(Value::String(s)) => Some(s.as_str()),
            Some(_) => {
                self.push(key, "expected a string");
                None
            }
            None => {
                if required {
                    self.push(key, "missing");
                }
                None
            }
        }
    }

    fn f64_array(&mut self, v: &Value, key: &str, leaf: &str, required: bool) -> Option<Vec<f64>> {
        match v.get(leaf) {
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item.as_f64() {
                        Some(f) if f.is_finite() => out.push(f),
                        _ => {
                            self.push(
                                &format!("{key}[{i}]"),
                                "expected a finite number",
                            );
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(Value::Null) | None => {
                if required {
                    self.push(key, "missing");
                }
                None
            }
            Some(_) => {
                self.push(key, "expected an array of numbers");
                None
            }
        }
    }
}

fn parse_warping_spec(ctx: &mut Ctx, v: &Value, path: &str) -> Option<WarpingSpec> {
    let raw = match v.get("raw") {
        Some(Value::Array(_)) => ctx.f64_array(v, &format!("{path}.raw"), "raw", false),
        Some(Value::Null) | None => None,
        Some(_) => {
            ctx.push(&format!("{path}.raw"), "expected an array of numbers");
            return None;
        }
    };
    if raw.is_some() {
        return Some(WarpingSpec {
            a0: ctx.f64(v, &format!("{path}.a0"), "a0", false).unwrap_or(0.0),
            cos_coeffs: vec![],
            sin_coeffs: vec![],
            raw,
        });
    }
    let a0 = ctx.f64(v, &format!("{path}.a0"), "a0", true);
    let cos_coeffs = ctx
        .f64_array(v, &format!("{path}.cos"), "cos", false)
        .unwrap_or_default();
    let sin_coeffs = ctx
        .f64_array(v, &format!("{path}.sin"), "sin", false)
        .unwrap_or_default();
    Some(WarpingSpec {
        a0: a0?,
        cos_coeffs,
        sin_coeffs,
        raw: None,
    })
}

fn parse_fiber(ctx: &mut Ctx, v: &Value) -> Option<FiberConfig> {
    let kind = ctx.string(v, "fiber.kind", "kind", true)?;
    match kind {
        "circle" => {
            let circumference = ctx.f64(v, "fiber.circumference", "circumference", true);
            let mu_max = ctx.f64(v, "fiber.mu_max", "mu_max", true);
            Some(FiberConfig::Circle {
                circumference: circumference?,
                mu_max: mu_max?,
            })
        }
        "sphere" => Some(FiberConfig::Sphere {
            l_max: ctx.i64_(v, "fiber.l_max", "l_max", true)?,
        }),
        "discrete_circle" => {
            let n_f = ctx.usize_(v, "fiber.n_f", "n_f", true);
            let circumference = ctx.f64(v, "fiber.circumference", "circumference", true);
            Some(FiberConfig::DiscreteCircle {
                n_f: n_f?,
                circumference: circumference?,
            })
        }
        "custom" => {
            let dim = ctx.usize_(v, "fiber.dim", "dim", true);
            let entries = match v.get("entries") {
                Some(Value::Array(items)) => {
                    let mut out = Vec::with_capacity(items.len());
                    for (i, item) in items.iter().enumerate() {
                        let key = format!("fiber.entries[{i}]");
                        match item {
                            Value::Array(cols) if cols.len() == 2 || cols.len() == 3 => {
                                let mu = cols[0].as_f64();
                                let mult = cols[1].as_u64();
                                let label = cols.get(2).and_then(|c| c.as_str());
                                match (mu, mult) {
                                    (Some(mu), Some(mult)) => {
                                        let mut entry = FiberEntry::new(mu, mult as usize);
                                        if let Some(name) = label {
                                            entry = FiberEntry::labeled(mu, mult as usize, name);
                                        }
                                        out.push(entry);
                                    }
                                    _ => ctx.push(&key, "expected [mu, mult] or [mu, mult, label]"),
                                }
                            }
                            _ => ctx.push(&key, "expected [mu, mult] or [mu, mult, label]"),
                        }
                    }
                    Some(out)
                }
                Some(_) => {
                    ctx.push("fiber.entries", "expected an array");
                    None
                }
                None => {
                    ctx.push("fiber.entries", "missing");
                    None
                }
            };
            Some(FiberConfig::Custom {
                entries: entries?,
                dim: dim?,
            })
        }
        other => {
            ctx.push(
                "fiber.kind",
                format!("unknown kind {other:?}; expected circle | sphere | discrete_circle | custom"),
            );
            None
        }
    }
}

fn parse_perturbation(ctx: &mut Ctx, v: &Value) -> PerturbationConfig {
    let r = match v.get("r") {
        Some(Value::Null) | None => None,
        Some(rv) => parse_warping_spec(ctx, rv, "perturbation.r"),
    };
    let exponent = match ctx.string(v, "perturbation.exponent", "exponent", false) {
        Some("m_minus_one") | None => warped_spectra::WeightExponent::MMinusOne,
        Some("m_plus_one") => warped_spectra::WeightExponent::MPlusOne,
        Some(other) => {
            ctx.push(
                "perturbation.exponent",
                format!("unknown exponent {other:?}; expected m_minus_one | m_plus_one"),
            );
            warped_spectra::WeightExponent::MMinusOne
        }
    };
    PerturbationConfig {
        r,
        mu: ctx.f64(v, "perturbation.mu", "mu", false),
        index: ctx.usize_(v, "perturbation.index", "index", false),
        steps: ctx
            .f64_array(v, "perturbation.steps", "steps", false)
            .unwrap_or_else(|| vec![1e-3, 5e-4, 2.5e-4, 1.25e-4]),
        exponent,
        t: ctx.f64(v, "perturbation.t", "t", false),
        seed: ctx.u64_(v, "perturbation.seed", "seed", false),
        degree: ctx
            .usize_(v, "perturbation.degree", "degree", false)
            .unwrap_or(3),
        candidates: ctx
            .usize_(v, "perturbation.candidates", "candidates", false)
            .unwrap_or(8),
        gap_tol: ctx
            .f64(v, "perturbation.gap_tol", "gap_tol", false)
            .unwrap_or(1e-6),
        target_lambda: ctx.f64(v, "perturbation.target_lambda", "target_lambda", false),
        t_grid: ctx.f64_array(v, "perturbation.t_grid", "t_grid", false),
        k: ctx.usize_(v, "perturbation.k", "k", false),
    }
}

impl RunConfig {
    /// Parses and cross-validates a configuration, reporting every violation.
    pub fn from_value(root: &Value) -> Result<RunConfig, Vec<ConfigIssue>> {
        let mut ctx = Ctx { issues: vec![] };
        if !root.is_object() {
            ctx.push("", "top level must be a JSON object");
            return Err(ctx.issues);
        }

        let base = ctx.object(root, "base", true).and_then(|b| {
            let kind = match ctx.string(b, "base.kind", "kind", true) {
                Some("circle") => Some(BaseKind::Circle),
                Some("interval") => Some(BaseKind::Interval),
                Some(other) => {
                    ctx.push(
                        "base.kind",
                        format!("unknown kind {other:?}; expected circle | interval"),
                    );
                    None
                }
                None => None,
            };
            let bc = match ctx.string(b, "base.bc", "bc", true) {
                Some("periodic") => Some(BoundaryCondition::Periodic),
                Some("dirichlet") => Some(BoundaryCondition::Dirichlet),
                Some("neumann") => Some(BoundaryCondition::Neumann),
                Some(other) => {
                    ctx.push(
                        "base.bc",
                        format!("unknown bc {other:?}; expected periodic | dirichlet | neumann"),
                    );
                    None
                }
                None => None,
            };
            let length = ctx.f64(b, "base.length", "length", true);
            let n = ctx.usize_(b, "base.n", "n", true);
            if let (Some(kind), Some(bc)) = (kind, bc) {
                let compatible = matches!(
                    (kind, bc),
                    (BaseKind::Circle, BoundaryCondition::Periodic)
                        | (BaseKind::Interval, BoundaryCondition::Dirichlet)
                        | (BaseKind::Interval, BoundaryCondition::Neumann)
                );
                if !compatible {
                    ctx.push("base.bc", format!("{kind} base cannot use {bc} boundary"));
                }
            }
            Some(BaseConfig {
                kind: kind?,
                length: length?,
                n: n?,
                bc: bc?,
            })
        });

        let warp = ctx
            .object(root, "warp", true)
            .and_then(|w| parse_warping_spec(&mut ctx, w, "warp"));

        let m_fiber = ctx.usize_(root, "m_fiber", "m_fiber", true);
        let fiber = ctx
            .object(root, "fiber", true)
            .and_then(|f| parse_fiber(&mut ctx, f));
        let lambda_max = ctx.f64(root, "lambda_max", "lambda_max", true);
        let cluster_tol = ctx
            .f64(root, "cluster_tol", "cluster_tol", false)
            .unwrap_or(1e-7);

        let perturbation = ctx
            .object(root, "perturbation", false)
            .map(|p| parse_perturbation(&mut ctx, p));

        let validate = ctx.object(root, "validate", false).map(|v| ValidateConfig {
            k: ctx.usize_(v, "validate.k", "k", false).unwrap_or(40),
        });

        let output = match ctx.object(root, "output", true) {
            Some(o) => {
                let dir = ctx
                    .string(o, "output.dir", "dir", true)
                    .map(std::path::PathBuf::from);
                let formats = match o.get("formats") {
                    Some(Value::Array(items)) => {
                        let mut fs = Vec::new();
                        for (i, item) in items.iter().enumerate() {
                            match item.as_str() {
                                Some("csv") => fs.push(OutputFormat::Csv),
                                Some("json") => fs.push(OutputFormat::Json),
                                _ => ctx.push(
                                    &format!("output.formats[{i}]"),
                                    "expected \"csv\" or \"json\"",
                                ),
                            }
                        }
                        fs
                    }
                    None => vec![OutputFormat::Csv, OutputFormat::Json],
                    Some(_) => {
                        ctx.push("output.formats", "expected an array");
                        vec![]
                    }
                };
                dir.map(|dir| OutputConfig { dir, formats })
            }
            None => None,
        };

        // cross-field consistency
        if let (Some(m), Some(f)) = (m_fiber, fiber.as_ref()) {
            if m != f.implied_dim() {
                ctx.push(
                    "m_fiber",
                    format!(
                        "m_fiber = {m} does not match fiber kind {} (implies dimension {})",
                        f.kind_name(),
                        f.implied_dim()
                    ),
                );
            }
        }
        match (base, warp, m_fiber, fiber, lambda_max, output) {
            (Some(base), Some(warp), Some(m_fiber), Some(fiber), Some(lambda_max), Some(output))
                if ctx.issues.is_empty() =>
            {
                Ok(RunConfig {
                    base,
                    warp,
                    m_fiber,
                    fiber,
                    lambda_max,
                    cluster_tol,
                    perturbation,
                    validate,
                    output,
                })
            }
            _ => Err(ctx.issues),
        }
    }
}
