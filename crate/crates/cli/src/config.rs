//! Sectioned `key = value` run configuration.
//!
//! ```text
//! schema_version = 1
//!
//! [family]
//! kind = polynomial
//! d = 1
//! theta = [[1, 0.5], [0.5, 1]]
//! ```
//!
//! Values are numbers, words, comma-separated word lists, or bracketed
//! numeric arrays. `#` and `;` start comments.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kernelbound::bounds::{default_c_hat, Window, WindowMode};
use kernelbound::coefficients::{Family, FamilyKind, FamilyParams, Variant};
use kernelbound::lyapunov::SynthOverrides;
use kernelbound::presets;
use kernelbound::solver::{GridSpec, DEFAULT_NODE_BUDGET};
use kernelbound::verify::CHECK_IDS;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Checks that draw random data and therefore need a seed.
pub const RANDOMIZED_CHECKS: [&str; 3] = ["domination", "mass", "chapman_kolmogorov"];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

/// Parsed but untyped document with line numbers for diagnostics.
#[derive(Debug, Clone)]
pub struct Document {
    path: PathBuf,
    sections: BTreeMap<String, Section>,
}

const ROOT: &str = "";

const KEYS: &[(&str, &[&str])] = &[
    (ROOT, &["schema_version"]),
    ("family", &["kind", "preset", "d", "m", "zeta", "alpha", "eta", "beta", "theta", "gamma"]),
    ("grid", &["radius", "radii", "mesh", "dt", "theta", "mollifier", "max_unknowns"]),
    ("lyapunov", &["horizon", "rho", "eps_hat", "sigma", "delta", "certificate_radius"]),
    ("bounds", &["s", "window", "window_fixed", "c_hat", "ledger_scale", "c_cal", "two_sided", "training", "holdout"]),
    ("solve", &["variants", "sources", "times"]),
    ("verify", &["checks", "seed", "times", "points", "decay_times", "chapman_kolmogorov", "tol"]),
    ("output", &["dir", "formats"]),
    ("run", &["jobs"]),
];

impl Document {
    pub fn parse(path: &Path, text: &str) -> CliResult<Self> {
        let mut doc = Self { path: path.to_path_buf(), sections: BTreeMap::new() };
        doc.sections.insert(ROOT.to_string(), Section::default());
        let mut current = ROOT.to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = strip_comment(raw).trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| doc.err(Some(line), "", "", "section header must end with ']'"))?
                    .trim()
                    .to_string();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(doc.err(Some(line), &name, "", "unknown section"));
                }
                if doc.sections.contains_key(&name) {
                    return Err(doc.err(Some(line), &name, "", "duplicate section"));
                }
                doc.sections.insert(name.clone(), Section { line, ..Section::default() });
                current = name;
                continue;
            }
            let (key, value) =
                body.split_once('=').ok_or_else(|| doc.err(Some(line), &current, "", "expected `key = value`"))?;
            let key = key.trim().to_string();
            let allowed = KEYS.iter().find(|(s, _)| *s == current).map(|(_, k)| *k).unwrap_or(&[]);
            let base = key.split('.').next().unwrap_or("");
            if !allowed.contains(&key.as_str()) && !(base == "tol" && allowed.contains(&"tol") && key.contains('.')) {
                return Err(doc.err(Some(line), &current, &key, "unknown key"));
            }
            let section = doc.sections.get_mut(&current).expect("section exists");
            if section.entries.contains_key(&key) {
                return Err(doc.err(Some(line), &current, &key, "duplicate key"));
            }
            section.entries.insert(key, Entry { value: value.trim().to_string(), line });
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            line: None,
            section: String::new(),
            field: String::new(),
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(path, &text)
    }

    fn err(&self, line: Option<usize>, section: &str, field: &str, message: impl Into<String>) -> CliError {
        CliError::Config {
            path: self.path.clone(),
            line,
            section: section.to_string(),
            field: field.to_string(),
            message: message.into(),
        }
    }

    fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.entries.get(key))
    }

    fn keys_with_prefix(&self, section: &str, prefix: &str) -> Vec<(String, Entry)> {
        self.sections
            .get(section)
            .map(|s| {
                s.entries.iter().filter(|(k, _)| k.starts_with(prefix)).map(|(k, e)| (k.clone(), e.clone())).collect()
            })
            .unwrap_or_default()
    }

    /// Error for a missing required key, located at the section header.
    fn missing(&self, section: &str, key: &str) -> CliError {
        let line = self.sections.get(section).map(|s| s.line).filter(|l| *l > 0);
        self.err(line, section, key, "required key is missing")
    }

    fn typed<T>(&self, section: &str, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> CliResult<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|m| self.err(Some(e.line), section, key, m)),
        }
    }

    fn required<T>(&self, section: &str, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> CliResult<T> {
        self.typed(section, key, parse)?.ok_or_else(|| self.missing(section, key))
    }

    /// Error located at a key (or its section when absent).
    fn at(&self, section: &str, key: &str, message: impl Into<String>) -> CliError {
        let line = self
            .entry(section, key)
            .map(|e| e.line)
            .or_else(|| self.sections.get(section).map(|s| s.line).filter(|l| *l > 0));
        self.err(line, section, key, message)
    }
}

fn strip_comment(line: &str) -> &str {
    let cut = line.find(['#', ';']).unwrap_or(line.len());
    &line[..cut]
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got `{s}`"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a positive number, got {v}"))
    }
}

fn integer(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("expected a nonnegative integer, got `{s}`"))
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

fn words(s: &str) -> Result<Vec<String>, String> {
    let w: Vec<String> = s.split(',').map(|w| w.trim().to_string()).filter(|w| !w.is_empty()).collect();
    if w.iter().any(|w| w.contains(char::is_whitespace)) {
        return Err(format!("expected a comma-separated list of words, got `{s}`"));
    }
    Ok(w)
}

fn json(s: &str) -> Result<serde_json::Value, String> {
    serde_json::from_str(s).map_err(|e| format!("malformed array: {e}"))
}

fn to_f64(v: &serde_json::Value) -> Result<f64, String> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| format!("expected a finite number, got `{v}`"))
}

fn list(s: &str) -> Result<Vec<f64>, String> {
    match json(s)? {
        serde_json::Value::Array(a) => a.iter().map(to_f64).collect(),
        v => to_f64(&v).map(|x| vec![x]),
    }
}

fn matrix(s: &str) -> Result<Vec<Vec<f64>>, String> {
    match json(s)? {
        serde_json::Value::Array(rows) => rows
            .iter()
            .map(|r| match r {
                serde_json::Value::Array(a) => a.iter().map(to_f64).collect(),
                v => to_f64(v).map(|x| vec![x]),
            })
            .collect(),
        v => Err(format!("expected a bracketed matrix, got `{v}`")),
    }
}

fn tensor3(s: &str) -> Result<Vec<Vec<Vec<f64>>>, String> {
    match json(s)? {
        serde_json::Value::Array(a) => a.iter().map(|m| matrix(&m.to_string())).collect(),
        v => Err(format!("expected a bracketed m×d×d array, got `{v}`")),
    }
}

/// A scalar or a full array.
enum Param<T> {
    Scalar(f64),
    Full(T),
}

fn param<T>(s: &str, full: impl Fn(&str) -> Result<T, String>) -> Result<Param<T>, String> {
    if s.trim_start().starts_with('[') {
        full(s).map(Param::Full)
    } else {
        number(s).map(Param::Scalar)
    }
}

fn window_fixed(v: &[f64]) -> Result<Window, String> {
    if v.len() != 4 {
        return Err(format!("expected [a0, a, b, b0], got {} values", v.len()));
    }
    Window::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn variant(s: &str) -> Result<Variant, String> {
    match s {
        "plain" => Ok(Variant::Plain),
        "P" | "p" => Ok(Variant::P),
        "P_adjoint" | "adjoint" => Ok(Variant::PAdjoint),
        _ => Err(format!("unknown variant `{s}` (plain, P, P_adjoint)")),
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub d: usize,
    pub radius: f64,
    pub radii: Vec<f64>,
    pub mesh: f64,
    pub dt: Option<f64>,
    pub theta: f64,
    pub mollifier: f64,
    pub max_unknowns: usize,
}

impl GridConfig {
    pub fn grid(&self, radius: f64, mesh: f64) -> kernelbound::Result<GridSpec> {
        GridSpec::with_budget(self.d, radius, mesh, self.max_unknowns)
    }

    pub fn main_grid(&self) -> kernelbound::Result<GridSpec> {
        self.grid(self.radius, self.mesh)
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovConfig {
    pub horizon: f64,
    pub overrides: SynthOverrides,
    pub certificate_radius: f64,
}

#[derive(Debug, Clone)]
pub struct BoundsConfig {
    pub s: f64,
    pub mode: WindowMode,
    pub c_hat: f64,
    pub ledger_scale: f64,
    pub c_cal: Option<(f64, Option<f64>)>,
    pub two_sided: bool,
    /// `(R, h)` of the calibration grid
    pub training: (f64, f64),
    /// `(R, h)` of the held-out grid
    pub holdout: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub variants: Vec<Variant>,
    /// `(y, k)` with `k` 0-based
    pub sources: Vec<(Vec<f64>, usize)>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub checks: Vec<String>,
    pub seed: Option<u64>,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub decay_times: Vec<f64>,
    pub chapman_kolmogorov: (f64, f64),
    pub tolerances: BTreeMap<String, f64>,
}

impl VerifyConfig {
    pub fn tol(&self, id: &str, default: f64) -> f64 {
        self.tolerances.get(id).copied().unwrap_or(default)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Svg,
}

#[derive(Debug, Clone)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

/// Typed configuration; sections a subcommand needs are checked with the
/// `require_*` accessors.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub path: PathBuf,
    pub family: Option<Family>,
    pub grid: Option<GridConfig>,
    pub lyapunov: LyapunovConfig,
    pub bounds: BoundsConfig,
    pub solve: Option<SolveConfig>,
    pub verify: Option<VerifyConfig>,
    pub output: OutputConfig,
    pub jobs: Option<usize>,
    doc: Document,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_document(Document::load(path)?)
    }

    #[cfg(test)]
    pub fn parse(path: &Path, text: &str) -> CliResult<Self> {
        Self::from_document(Document::parse(path, text)?)
    }

    fn from_document(doc: Document) -> CliResult<Self> {
        let version = doc.required(ROOT, "schema_version", integer)?;
        if version != SCHEMA_VERSION as u64 {
            return Err(doc.at(
                ROOT,
                "schema_version",
                format!("unsupported schema version {version}, expected {SCHEMA_VERSION}"),
            ));
        }
        let family = if doc.has_section("family") { Some(parse_family(&doc)?) } else { None };
        let d = family.as_ref().map(|f| f.dims().d);
        let grid = if doc.has_section("grid") {
            Some(parse_grid(&doc, d.ok_or_else(|| doc.missing("family", "kind"))?)?)
        } else {
            None
        };
        let lyapunov = parse_lyapunov(&doc)?;
        let bounds = parse_bounds(&doc, d.unwrap_or(1), grid.as_ref())?;
        let solve = if doc.has_section("solve") {
            Some(parse_solve(&doc, d.unwrap_or(1), family.as_ref().map_or(1, |f| f.dims().m))?)
        } else {
            None
        };
        let verify =
            if doc.has_section("verify") { Some(parse_verify(&doc, d.unwrap_or(1), lyapunov.horizon)?) } else { None };
        let output = parse_output(&doc)?;
        let jobs = doc
            .typed("run", "jobs", integer)?
            .map(|j| if j == 0 { Err(doc.at("run", "jobs", "jobs must be at least 1")) } else { Ok(j as usize) })
            .transpose()?;
        Ok(Self { path: doc.path.clone(), family, grid, lyapunov, bounds, solve, verify, output, jobs, doc })
    }

    fn require<'a, T>(&'a self, v: &'a Option<T>, section: &str, command: &str) -> CliResult<&'a T> {
        v.as_ref()
            .ok_or_else(|| self.doc.err(None, section, "", format!("section [{section}] is required by `{command}`")))
    }

    pub fn require_family(&self, command: &str) -> CliResult<&Family> {
        self.require(&self.family, "family", command)
    }

    pub fn require_grid(&self, command: &str) -> CliResult<&GridConfig> {
        self.require(&self.grid, "grid", command)
    }

    pub fn require_solve(&self, command: &str) -> CliResult<&SolveConfig> {
        self.require(&self.solve, "solve", command)
    }

    pub fn require_verify(&self, command: &str) -> CliResult<&VerifyConfig> {
        self.require(&self.verify, "verify", command)
    }

    /// Configuration error located at a key.
    pub fn error_at(&self, section: &str, key: &str, message: impl Into<String>) -> CliError {
        self.doc.at(section, key, message)
    }
}

fn parse_family(doc: &Document) -> CliResult<Family> {
    const S: &str = "family";
    if let Some(name) = doc.typed(S, "preset", |s| Ok(s.to_string()))? {
        let others: Vec<&String> = doc.sections[S].entries.keys().filter(|k| *k != "preset").collect();
        if let Some(k) = others.first() {
            return Err(doc.at(S, k, "a preset cannot be combined with explicit parameters"));
        }
        return presets::by_name(&name).ok_or_else(|| {
            doc.at(S, "preset", format!("unknown preset `{name}` (one of {})", presets::FAMILY_PRESETS.join(", ")))
        });
    }
    let kind = doc.required(S, "kind", |s| match s {
        "polynomial" => Ok(FamilyKind::Polynomial),
        "exponential" => Ok(FamilyKind::Exponential),
        _ => Err(format!("unknown family `{s}` (polynomial, exponential)")),
    })?;
    let d = doc.typed(S, "d", integer)?.unwrap_or(1) as usize;
    if !(1..=2).contains(&d) {
        return Err(doc.at(S, "d", format!("d must be 1 or 2, got {d}")));
    }
    let theta = doc.required(S, "theta", matrix)?;
    let gamma = doc.required(S, "gamma", matrix)?;
    let m = theta.len();
    if let Some(mm) = doc.typed(S, "m", integer)? {
        if mm as usize != m {
            return Err(doc.at(S, "m", format!("m = {mm} but theta has {m} rows")));
        }
    }
    let square = |key: &str, v: &[Vec<f64>]| {
        if m == 0 || v.len() != m || v.iter().any(|r| r.len() != m) {
            Err(doc.at(S, key, format!("expected an {m}×{m} matrix")))
        } else {
            Ok(())
        }
    };
    square("theta", &theta)?;
    square("gamma", &gamma)?;
    let t3 = |key: &str, default: f64| -> CliResult<Vec<Vec<Vec<f64>>>> {
        let diag = |c: f64, off: f64| -> Vec<Vec<Vec<f64>>> {
            (0..m).map(|_| (0..d).map(|i| (0..d).map(|j| if i == j { c } else { off }).collect()).collect()).collect()
        };
        match doc.typed(S, key, |s| param(s, tensor3))? {
            None => Ok(diag(default, if key == "alpha" { default } else { 0.0 })),
            Some(Param::Scalar(c)) => Ok(diag(c, if key == "alpha" { c } else { 0.0 })),
            Some(Param::Full(v)) => Ok(v),
        }
    };
    let t2 = |key: &str, default: f64| -> CliResult<Vec<Vec<f64>>> {
        match doc.typed(S, key, |s| param(s, matrix))? {
            None => Ok(vec![vec![default; d]; m]),
            Some(Param::Scalar(c)) => Ok(vec![vec![c; d]; m]),
            Some(Param::Full(v)) => Ok(v),
        }
    };
    let zeta = t3("zeta", 1.0)?;
    let alpha = t3("alpha", 0.0)?;
    let eta = t2("eta", 0.0)?;
    let beta = t2("beta", 0.0)?;
    let params = FamilyParams::new(d, m, &zeta, &alpha, &eta, &beta, &theta, &gamma)
        .map_err(|e| doc.err(Some(doc.sections[S].line), S, "", e.to_string()))?;
    Ok(match kind {
        FamilyKind::Polynomial => Family::polynomial(params),
        FamilyKind::Exponential => Family::exponential(params),
    })
}

fn parse_grid(doc: &Document, d: usize) -> CliResult<GridConfig> {
    const S: &str = "grid";
    let radius = doc.required(S, "radius", positive)?;
    let mesh = doc.required(S, "mesh", positive)?;
    let radii = doc.typed(S, "radii", list)?.unwrap_or_else(|| vec![radius / 4.0, radius / 2.0, radius]);
    let theta = doc.typed(S, "theta", number)?.unwrap_or(1.0);
    if !(0.5..=1.0).contains(&theta) {
        return Err(doc.at(S, "theta", format!("time-stepping θ must lie in [1/2, 1], got {theta}")));
    }
    let cfg = GridConfig {
        d,
        radius,
        radii,
        mesh,
        dt: doc.typed(S, "dt", positive)?,
        theta,
        mollifier: doc.typed(S, "mollifier", positive)?.unwrap_or(2.0),
        max_unknowns: doc.typed(S, "max_unknowns", integer)?.map_or(DEFAULT_NODE_BUDGET, |v| v as usize),
    };
    let shape_ok = |r: f64| {
        let cells = 2.0 * r / mesh;
        (cells - cells.round()).abs() <= 1e-9 * cells.max(1.0)
            && cells.round() >= 2.0
            && (cells.round() as u64).is_multiple_of(2)
    };
    if !shape_ok(radius) {
        return Err(doc.at(S, "mesh", format!("2R/h must be an even integer, got {}", 2.0 * radius / mesh)));
    }
    if let Some(r) = cfg.radii.iter().find(|r| !shape_ok(**r)) {
        return Err(doc.at(S, "radii", format!("radius {r} is incompatible with the mesh {mesh}")));
    }
    if cfg.radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(doc.at(S, "radii", "radii must increase"));
    }
    Ok(cfg)
}

fn parse_lyapunov(doc: &Document) -> CliResult<LyapunovConfig> {
    const S: &str = "lyapunov";
    Ok(LyapunovConfig {
        horizon: doc.typed(S, "horizon", positive)?.unwrap_or(1.0),
        overrides: SynthOverrides {
            rho: doc.typed(S, "rho", positive)?,
            eps_hat: doc.typed(S, "eps_hat", positive)?,
            sigma: doc.typed(S, "sigma", positive)?,
            delta: doc.typed(S, "delta", positive)?,
        },
        certificate_radius: doc.typed(S, "certificate_radius", positive)?.unwrap_or(8.0),
    })
}

fn parse_bounds(doc: &Document, d: usize, grid: Option<&GridConfig>) -> CliResult<BoundsConfig> {
    const S: &str = "bounds";
    let s = doc.typed(S, "s", number)?.unwrap_or(d as f64 + 3.0);
    if !(s > d as f64 + 2.0) {
        return Err(doc.at(S, "s", format!("s = {s} must exceed d + 2 = {}", d + 2)));
    }
    let fixed = doc.typed(S, "window_fixed", |v| list(v).and_then(|l| window_fixed(&l)))?;
    let mode = match doc.typed(S, "window", |v| Ok(v.to_string()))?.as_deref() {
        None | Some("proportional") | Some("t-proportional") => {
            if fixed.is_some() {
                return Err(doc.at(S, "window_fixed", "window_fixed needs `window = fixed`"));
            }
            WindowMode::Proportional
        }
        Some("fixed") => WindowMode::Fixed(fixed.ok_or_else(|| doc.missing(S, "window_fixed"))?),
        Some(other) => return Err(doc.at(S, "window", format!("unknown window mode `{other}` (proportional, fixed)"))),
    };
    let c_cal = doc.typed(S, "c_cal", |v| {
        let l = list(v)?;
        match l.as_slice() {
            [a] if *a > 0.0 => Ok((*a, None)),
            [a, b] if *a > 0.0 && *b > 0.0 => Ok((*a, Some(*b))),
            _ => Err("expected one or two positive constants".to_string()),
        }
    })?;
    let pair = |key: &str, default: (f64, f64)| -> CliResult<(f64, f64)> {
        match doc.typed(S, key, list)? {
            None => Ok(default),
            Some(v) if v.len() == 2 && v[0] > 0.0 && v[1] > 0.0 => Ok((v[0], v[1])),
            Some(_) => Err(doc.at(S, key, "expected [R, h] with positive entries")),
        }
    };
    let (r, h) = grid.map_or((8.0, 1.0 / 32.0), |g| (g.radius, g.mesh));
    Ok(BoundsConfig {
        s,
        mode,
        c_hat: doc.typed(S, "c_hat", positive)?.unwrap_or_else(|| default_c_hat(d)),
        ledger_scale: doc.typed(S, "ledger_scale", positive)?.unwrap_or(1.0),
        c_cal,
        two_sided: doc.typed(S, "two_sided", boolean)?.unwrap_or(true),
        training: pair("training", (r, h))?,
        holdout: pair("holdout", (2.0 * r, h / 2.0))?,
    })
}

fn times(doc: &Document, section: &str, key: &str, default: Vec<f64>) -> CliResult<Vec<f64>> {
    let t = doc.typed(section, key, list)?.unwrap_or(default);
    if t.iter().any(|t| !(*t > 0.0)) {
        return Err(doc.at(section, key, "times must be positive"));
    }
    Ok(t)
}

fn points(v: &str, d: usize) -> Result<Vec<Vec<f64>>, String> {
    let rows = matrix(v)?;
    if rows.iter().any(|r| r.len() != d) {
        return Err(format!("every point needs {d} coordinates"));
    }
    Ok(rows)
}

fn parse_solve(doc: &Document, d: usize, m: usize) -> CliResult<SolveConfig> {
    const S: &str = "solve";
    let variants = doc
        .typed(S, "variants", |s| words(s)?.iter().map(|w| variant(w)).collect())?
        .unwrap_or_else(|| vec![Variant::P]);
    let sources = doc.typed(S, "sources", matrix)?.unwrap_or_default();
    let sources = sources
        .into_iter()
        .map(|row| {
            if row.len() != d + 1 {
                return Err(doc.at(S, "sources", format!("each source is [y_1..y_{d}, k], got {} values", row.len())));
            }
            let k = row[d];
            if !(k.fract() == 0.0 && k >= 1.0 && k <= m as f64) {
                return Err(doc.at(S, "sources", format!("component k = {k} must be an integer in 1..={m}")));
            }
            Ok((row[..d].to_vec(), k as usize - 1))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SolveConfig { variants, sources, times: times(doc, S, "times", vec![0.5])? })
}

fn parse_verify(doc: &Document, d: usize, horizon: f64) -> CliResult<VerifyConfig> {
    const S: &str = "verify";
    let checks = doc.typed(S, "checks", words)?.unwrap_or_else(|| vec!["all".to_string()]);
    let checks: Vec<String> =
        if checks.iter().any(|c| c == "all") { CHECK_IDS.iter().map(|s| s.to_string()).collect() } else { checks };
    if let Some(bad) = checks.iter().find(|c| !CHECK_IDS.contains(&c.as_str())) {
        return Err(doc.at(S, "checks", format!("unknown check `{bad}` (one of {})", CHECK_IDS.join(", "))));
    }
    let mut tolerances = BTreeMap::new();
    for (key, e) in doc.keys_with_prefix(S, "tol.") {
        let id = key.trim_start_matches("tol.").to_string();
        let known = CHECK_IDS.contains(&id.as_str()) || id == "positivity";
        if !known {
            return Err(doc.err(Some(e.line), S, &key, format!("no check named `{id}`")));
        }
        let v = number(&e.value).map_err(|m| doc.err(Some(e.line), S, &key, m))?;
        if v < 0.0 {
            return Err(doc.err(Some(e.line), S, &key, "tolerances must be nonnegative"));
        }
        tolerances.insert(id, v);
    }
    let default_points: Vec<Vec<f64>> = [0.0, 1.0, -1.0, 2.0, -2.0].iter().map(|&c| vec![c; d]).collect();
    let ck = doc.typed(S, "chapman_kolmogorov", list)?.unwrap_or_else(|| vec![0.25, 0.25]);
    if ck.len() != 2 || !(ck[0] > 0.0 && ck[1] > 0.0) {
        return Err(doc.at(S, "chapman_kolmogorov", "expected [t, s] with t, s > 0"));
    }
    let cfg = VerifyConfig {
        seed: doc.typed(S, "seed", integer)?,
        times: times(doc, S, "times", vec![0.1, 0.5, 1.0])?,
        points: doc.typed(S, "points", |v| points(v, d))?.unwrap_or(default_points),
        decay_times: times(doc, S, "decay_times", vec![0.25 * horizon, 0.5 * horizon])?,
        chapman_kolmogorov: (ck[0], ck[1]),
        checks,
        tolerances,
    };
    Ok(cfg)
}

fn parse_output(doc: &Document) -> CliResult<OutputConfig> {
    const S: &str = "output";
    let formats = doc
        .typed(S, "formats", |s| {
            words(s)?
                .iter()
                .map(|w| match w.as_str() {
                    "text" => Ok(Format::Text),
                    "csv" => Ok(Format::Csv),
                    "svg" => Ok(Format::Svg),
                    _ => Err(format!("unknown format `{w}` (text, csv, svg)")),
                })
                .collect()
        })?
        .unwrap_or_else(|| vec![Format::Text, Format::Csv]);
    Ok(OutputConfig { dir: doc.typed(S, "dir", |s| Ok(PathBuf::from(s)))?, formats })
}

/// Randomized checks among the selected ones.
pub fn needs_seed(checks: &[String]) -> bool {
    checks.iter().any(|c| RANDOMIZED_CHECKS.contains(&c.as_str()))
}
