//! Run configuration: a single JSON document (file or stdin) merged with
//! command-line flag overrides.

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use toric_bernstein::bernstein::BernsteinError;
use toric_bernstein::expr::ParseError;
use toric_bernstein::metric::MetricError;
use toric_bernstein::polytope::{polytope_from_json, PolytopeError};
use toric_bernstein::quad::QuadError;
use toric_bernstein::{DelzantPolytope, Expr, QuadratureSpec, ToricMetric};

/// CLI failure with its process exit code: 1 for validation or identity
/// failures, 2 for configuration errors, 3 for numerical non-convergence.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Config(String),
    NonConvergence(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "{m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::NonConvergence(m) => write!(f, "no numerical convergence: {m}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl From<PolytopeError> for CliError {
    fn from(e: PolytopeError) -> Self {
        match e {
            PolytopeError::InvalidJson(_) => CliError::Config(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::NoConvergence { .. } => CliError::NonConvergence(e.to_string()),
            MetricError::PerturbationArity { .. } | MetricError::NonFinitePerturbation { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<QuadError> for CliError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::NoConvergence { .. } => CliError::NonConvergence(e.to_string()),
            QuadError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BernsteinError> for CliError {
    fn from(e: BernsteinError) -> Self {
        match e {
            BernsteinError::Quad(q) => q.into(),
            BernsteinError::Metric(m) => m.into(),
            BernsteinError::Polytope(p) => p.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<toric_bernstein::asymptotics::AsymptoticsError> for CliError {
    fn from(e: toric_bernstein::asymptotics::AsymptoticsError) -> Self {
        use toric_bernstein::asymptotics::AsymptoticsError as A;
        match e {
            A::Quad(q) => q.into(),
            A::Metric(m) => m.into(),
            A::Bernstein(b) => b.into(),
            A::Polytope(p) => p.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Flag values that override config-file fields.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub n: Option<String>,
    pub f: Option<String>,
    pub grid: Option<String>,
    pub margin: Option<f64>,
    pub quad_order: Option<usize>,
    pub quad_tol: Option<f64>,
    pub quad_levels: Option<usize>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

/// Fully resolved run parameters.
pub struct RunConfig {
    pub metric: ToricMetric,
    pub f: Option<Expr>,
    pub ns: Vec<u32>,
    pub grid: Vec<usize>,
    pub margin: f64,
    pub quad: QuadratureSpec,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// The configured test function, required by most commands.
    pub fn require_f(&self) -> Result<&Expr, CliError> {
        self.f
            .as_ref()
            .ok_or_else(|| CliError::Config("no test function: set \"f\" or pass --f".into()))
    }
}

const KNOWN_KEYS: &[&str] = &[
    "polytope",
    "perturbation",
    "f",
    "N",
    "grid",
    "margin",
    "quad",
    "out",
    "summary",
    "cache",
];

pub fn load(ov: &Overrides) -> Result<RunConfig, CliError> {
    let doc = read_document(ov.config.as_deref())?;
    let obj = match &doc {
        serde_json::Value::Object(map) => map.clone(),
        serde_json::Value::Null => serde_json::Map::new(),
        _ => return Err(CliError::Config("config document must be a JSON object".into())),
    };
    for key in obj.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown config key {key:?}")));
        }
    }

    let polytope = resolve_polytope(obj.get("polytope"))?;
    let dim = polytope.dim();

    let metric = match obj.get("perturbation") {
        None | Some(serde_json::Value::Null) => ToricMetric::canonical(polytope),
        Some(serde_json::Value::String(s)) => {
            let g = Expr::parse(s, dim)?;
            ToricMetric::with_perturbation(polytope, g)?
        }
        Some(other) => {
            return Err(CliError::Config(format!(
                "\"perturbation\" must be an expression string, got {other}"
            )))
        }
    };

    let f_text: Option<String> = match (&ov.f, obj.get("f")) {
        (Some(s), _) => Some(s.clone()),
        (None, Some(serde_json::Value::String(s))) => Some(s.clone()),
        (None, None | Some(serde_json::Value::Null)) => None,
        (None, Some(other)) => {
            return Err(CliError::Config(format!(
                "\"f\" must be an expression string, got {other}"
            )))
        }
    };
    let f = f_text.map(|s| Expr::parse(&s, dim)).transpose()?;

    let ns = resolve_ns(ov.n.as_deref(), obj.get("N"))?;
    let grid = resolve_grid(ov.grid.as_deref(), obj.get("grid"), dim)?;

    let margin = match (ov.margin, obj.get("margin")) {
        (Some(v), _) => v,
        (None, Some(v)) => v
            .as_f64()
            .ok_or_else(|| CliError::Config("\"margin\" must be a number".into()))?,
        (None, None) => 0.02,
    };
    if !(margin > 0.0 && margin < 0.5) {
        return Err(CliError::Config(format!(
            "margin {margin} outside the open interval (0, 0.5)"
        )));
    }

    let quad = resolve_quad(ov, obj.get("quad"), dim)?;

    let out = ov.out.clone().or_else(|| path_field(&obj, "out"));
    let summary = path_field(&obj, "summary");
    let cache = ov.cache.clone().or_else(|| path_field(&obj, "cache"));

    Ok(RunConfig {
        metric,
        f,
        ns,
        grid,
        margin,
        quad,
        out,
        summary,
        cache,
    })
}

fn path_field(obj: &serde_json::Map<String, serde_json::Value>, key: &str) -> Option<PathBuf> {
    obj.get(key).and_then(|v| v.as_str()).map(PathBuf::from)
}

fn read_document(path: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let Some(path) = path else {
        return Ok(serde_json::Value::Null);
    };
    let text = if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| CliError::Config(format!("reading stdin: {e}")))?;
        buf
    } else {
        fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("parsing config: {e}")))
}

/// `"polytope"` may be an inline facet-presentation object, a path to a
/// JSON file holding one, or a builtin name: `interval`, `simplex:<m>`,
/// `cube:<m>`.
fn resolve_polytope(value: Option<&serde_json::Value>) -> Result<DelzantPolytope, CliError> {
    match value {
        None | Some(serde_json::Value::Null) => Err(CliError::Config(
            "config must specify a polytope (inline object, file path, or builtin name)".into(),
        )),
        Some(v @ serde_json::Value::Object(_)) => Ok(polytope_from_json(v)?),
        Some(serde_json::Value::String(s)) => {
            if s == "interval" {
                return Ok(DelzantPolytope::standard_simplex(1));
            }
            for (prefix, build) in [
                ("simplex:", DelzantPolytope::standard_simplex as fn(usize) -> _),
                ("cube:", DelzantPolytope::unit_cube as fn(usize) -> _),
            ] {
                if let Some(rest) = s.strip_prefix(prefix) {
                    let m: usize = rest.parse().map_err(|_| {
                        CliError::Config(format!("bad dimension in builtin polytope {s:?}"))
                    })?;
                    if !(1..=3).contains(&m) {
                        return Err(CliError::Config(format!(
                            "builtin polytope dimension {m} outside 1..=3"
                        )));
                    }
                    return Ok(build(m));
                }
            }
            let text = fs::read_to_string(s)
                .map_err(|e| CliError::Config(format!("reading polytope file {s:?}: {e}")))?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("parsing polytope file {s:?}: {e}")))?;
            Ok(polytope_from_json(&v)?)
        }
        Some(other) => Err(CliError::Config(format!(
            "\"polytope\" must be an object or string, got {other}"
        ))),
    }
}

fn resolve_ns(
    flag: Option<&str>,
    field: Option<&serde_json::Value>,
) -> Result<Vec<u32>, CliError> {
    let ns: Vec<u32> = if let Some(text) = flag {
        text.split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|_| CliError::Config(format!("bad dilation {t:?} in --N")))
            })
            .collect::<Result<_, _>>()?
    } else if let Some(v) = field {
        let arr = v
            .as_array()
            .ok_or_else(|| CliError::Config("\"N\" must be an array of integers".into()))?;
        arr.iter()
            .map(|e| {
                e.as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .ok_or_else(|| CliError::Config(format!("bad dilation {e} in \"N\"")))
            })
            .collect::<Result<_, _>>()?
    } else {
        vec![4, 8, 16, 32]
    };
    if ns.is_empty() {
        return Err(CliError::Config("dilation list is empty".into()));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Config(format!(
            "dilations must be positive and strictly increasing, got {ns:?}"
        )));
    }
    Ok(ns)
}

fn resolve_grid(
    flag: Option<&str>,
    field: Option<&serde_json::Value>,
    dim: usize,
) -> Result<Vec<usize>, CliError> {
    let counts: Vec<usize> = if let Some(text) = flag {
        text.split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("bad grid count {t:?} in --grid")))
            })
            .collect::<Result<_, _>>()?
    } else if let Some(v) = field {
        match v {
            serde_json::Value::Number(_) => vec![v
                .as_u64()
                .ok_or_else(|| CliError::Config("\"grid\" must be a positive integer".into()))?
                as usize],
            serde_json::Value::Array(arr) => arr
                .iter()
                .map(|e| {
                    e.as_u64().map(|n| n as usize).ok_or_else(|| {
                        CliError::Config(format!("bad grid count {e} in \"grid\""))
                    })
                })
                .collect::<Result<_, _>>()?,
            _ => {
                return Err(CliError::Config(
                    "\"grid\" must be an integer or array of integers".into(),
                ))
            }
        }
    } else {
        vec![5]
    };
    let counts = if counts.len() == 1 {
        vec![counts[0]; dim]
    } else {
        counts
    };
    if counts.len() != dim {
        return Err(CliError::Config(format!(
            "grid has {} axis counts for a {dim}-dimensional polytope",
            counts.len()
        )));
    }
    if counts.iter().any(|&c| c == 0 || c > 4096) {
        return Err(CliError::Config(format!(
            "grid counts must be in 1..=4096, got {counts:?}"
        )));
    }
    Ok(counts)
}

fn resolve_quad(
    ov: &Overrides,
    field: Option<&serde_json::Value>,
    dim: usize,
) -> Result<QuadratureSpec, CliError> {
    let mut quad = QuadratureSpec::default_for_dim(dim);
    if let Some(v) = field {
        let obj = v
            .as_object()
            .ok_or_else(|| CliError::Config("\"quad\" must be an object".into()))?;
        for key in obj.keys() {
            if !["order", "rel_tol", "max_levels"].contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown quad key {key:?}")));
            }
        }
        if let Some(o) = obj.get("order") {
            quad.order = o
                .as_u64()
                .ok_or_else(|| CliError::Config("quad order must be an integer".into()))?
                as usize;
        }
        if let Some(t) = obj.get("rel_tol") {
            quad.rel_tol = t
                .as_f64()
                .ok_or_else(|| CliError::Config("quad rel_tol must be a number".into()))?;
        }
        if let Some(l) = obj.get("max_levels") {
            quad.max_levels = l
                .as_u64()
                .ok_or_else(|| CliError::Config("quad max_levels must be an integer".into()))?
                as usize;
        }
    }
    if let Some(o) = ov.quad_order {
        quad.order = o;
    }
    if let Some(t) = ov.quad_tol {
        quad.rel_tol = t;
    }
    if let Some(l) = ov.quad_levels {
        quad.max_levels = l;
    }
    if !(2..=64).contains(&quad.order) {
        return Err(CliError::Config(format!(
            "quadrature order {} outside 2..=64",
            quad.order
        )));
    }
    if !(2..=12).contains(&quad.max_levels) {
        return Err(CliError::Config(format!(
            "quadrature max_levels {} outside 2..=12",
            quad.max_levels
        )));
    }
    if !(quad.rel_tol > 0.0 && quad.rel_tol.is_finite()) {
        return Err(CliError::Config(format!(
            "quadrature rel_tol {} must be positive and finite",
            quad.rel_tol
        )));
    }
    Ok(quad)
}
