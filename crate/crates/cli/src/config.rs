//! Problem configuration files.
//!
//! A line format with `[section]` headers and `key = value` entries; `#`
//! starts a comment. Expressions are stored as text until a section is
//! bound to library types, so the whole file is checked for shape before
//! any numeric work starts.

use std::fmt::Write as _;

use gendev::{
    AmbientSpec, BundleSpec, ExprFamily, Method, MetricField, PointSeed, Problem, ScalarField, SecondFundamentalField,
    Seed, SeedKind, SubmanifoldSeed,
};
use indexmap::IndexMap;
use nalgebra::DMatrix;
use thiserror::Error;

pub const SECTIONS: [&str; 8] = ["base", "ambient", "bundle", "h", "seed", "submanifold", "options", "family"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: malformed section header `{text}`")]
    MalformedHeader { line: usize, text: String },

    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },

    #[error("line {line}: section [{name}] already started on line {first}")]
    DuplicateSection { line: usize, first: usize, name: String },

    #[error("line {line}: expected `key = value`, got `{text}`")]
    MalformedEntry { line: usize, text: String },

    #[error("line {line}: entry outside of any section")]
    Orphan { line: usize },

    #[error("line {line}: duplicate key `{key}` in [{section}] (first set on line {first})")]
    DuplicateKey {
        line: usize,
        first: usize,
        section: String,
        key: String,
    },

    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },

    #[error("missing section [{0}]")]
    MissingSection(String),

    #[error("missing keys in [{section}]: {}", keys.join(", "))]
    MissingKeys { section: String, keys: Vec<String> },

    #[error("line {line}: `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("line {line}: `{key}`: {source}")]
    Expr {
        line: usize,
        key: String,
        source: gendev::Error,
    },

    #[error("[seed] and [submanifold] are mutually exclusive")]
    SeedConflict,
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub line: usize,
    pub entries: IndexMap<String, Entry>,
}

/// Parsed configuration: sections and entries in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProblemConfig {
    pub sections: IndexMap<String, Section>,
}

pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let mut cfg = ProblemConfig::default();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            let name = body
                .strip_prefix('[')
                .and_then(|b| b.strip_suffix(']'))
                .map(str::trim)
                .filter(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
                .ok_or_else(|| ConfigError::MalformedHeader { line, text: body.to_string() })?;
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection { line, name: name.to_string() });
            }
            if let Some(prev) = cfg.sections.get(name) {
                return Err(ConfigError::DuplicateSection { line, first: prev.line, name: name.to_string() });
            }
            cfg.sections.insert(name.to_string(), Section { line, entries: IndexMap::new() });
            current = Some(name.to_string());
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .filter(|(k, v)| {
                !k.is_empty() && !v.is_empty() && k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
            })
            .ok_or_else(|| ConfigError::MalformedEntry { line, text: body.to_string() })?;
        let section = current.as_ref().ok_or(ConfigError::Orphan { line })?;
        let sec = cfg.sections.get_mut(section).expect("current section exists");
        if let Some(prev) = sec.entries.get(key) {
            return Err(ConfigError::DuplicateKey {
                line,
                first: prev.line,
                section: section.clone(),
                key: key.to_string(),
            });
        }
        sec.entries.insert(key.to_string(), Entry { value: value.to_string(), line });
    }
    Ok(cfg)
}

fn dimension(e: gendev::Error) -> ConfigError {
    match e {
        gendev::Error::Dimension(m) => ConfigError::Dimension(m),
        other => ConfigError::Dimension(other.to_string()),
    }
}

/// Splits a list of numbers separated by commas and/or whitespace.
fn floats(key: &str, e: &Entry) -> Result<Vec<f64>> {
    e.value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>().map_err(|err| ConfigError::BadValue {
                line: e.line,
                key: key.to_string(),
                message: format!("`{s}`: {err}"),
            })
        })
        .collect()
}

fn exprs(key: &str, e: &Entry, dim: usize) -> Result<Vec<ScalarField>> {
    e.value
        .split(',')
        .map(|s| expr_text(key, e.line, s.trim(), dim))
        .collect()
}

fn expr_text(key: &str, line: usize, text: &str, dim: usize) -> Result<ScalarField> {
    ScalarField::parse(text, dim).map_err(|source| ConfigError::Expr { line, key: key.to_string(), source })
}

/// Parses `prefix_i_j_...` into 0-based indices, each below its bound.
fn indices(key: &str, prefix: &str, bounds: &[usize]) -> Option<Vec<usize>> {
    let rest = key.strip_prefix(prefix)?.strip_prefix('_')?;
    let parts: Vec<&str> = rest.split('_').collect();
    if parts.len() != bounds.len() {
        return None;
    }
    parts
        .iter()
        .zip(bounds)
        .map(|(p, &b)| p.parse::<usize>().ok().filter(|&i| i >= 1 && i <= b).map(|i| i - 1))
        .collect()
}

impl Section {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn require<'a>(&'a self, name: &str, keys: &[&str]) -> Result<Vec<&'a Entry>> {
        let missing: Vec<String> = keys.iter().filter(|k| !self.entries.contains_key(**k)).map(|k| k.to_string()).collect();
        if !missing.is_empty() {
            return Err(ConfigError::MissingKeys { section: name.to_string(), keys: missing });
        }
        Ok(keys.iter().map(|k| &self.entries[*k]).collect())
    }

    fn unknown(&self, name: &str, known: impl Fn(&str) -> bool) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !known(k)) {
            Some((k, e)) => Err(ConfigError::UnknownKey { line: e.line, section: name.to_string(), key: k.clone() }),
            None => Ok(()),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|e| {
                e.value.parse::<usize>().map_err(|err| ConfigError::BadValue {
                    line: e.line,
                    key: key.to_string(),
                    message: err.to_string(),
                })
            })
            .transpose()
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|e| {
                e.value.parse::<f64>().map_err(|err| ConfigError::BadValue {
                    line: e.line,
                    key: key.to_string(),
                    message: err.to_string(),
                })
            })
            .transpose()
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key).map(|e| floats(key, e)).transpose()
    }

    /// `lo hi, lo hi, ...` with exactly `dim` pairs.
    fn domain(&self, dim: usize) -> Result<Option<Vec<(f64, f64)>>> {
        let Some(v) = self.floats("domain")? else { return Ok(None) };
        if v.len() != 2 * dim {
            return Err(ConfigError::Dimension(format!(
                "domain needs {} numbers for a {dim}-dimensional chart, got {}",
                2 * dim,
                v.len()
            )));
        }
        Ok(Some(v.chunks(2).map(|c| (c[0], c[1])).collect()))
    }
}

/// Metric from `g_a_b` entries; off-diagonal entries default to 0 and may be
/// given in either order, but not both.
fn metric(sec: &Section, name: &str, dim: usize) -> Result<MetricField> {
    let mut comps: IndexMap<(usize, usize), (&str, &Entry)> = IndexMap::new();
    for (k, e) in &sec.entries {
        if let Some(ix) = indices(k, "g", &[dim, dim]) {
            let key = (ix[0].min(ix[1]), ix[0].max(ix[1]));
            if let Some((first, prev)) = comps.get(&key) {
                return Err(ConfigError::DuplicateKey {
                    line: e.line,
                    first: prev.line,
                    section: name.to_string(),
                    key: format!("{k} (same component as {first})"),
                });
            }
            comps.insert(key, (k.as_str(), e));
        }
    }
    let missing: Vec<String> = (0..dim).filter(|a| !comps.contains_key(&(*a, *a))).map(|a| format!("g_{0}_{0}", a + 1)).collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys { section: name.to_string(), keys: missing });
    }
    let mut fields = Vec::with_capacity(dim * (dim + 1) / 2);
    for a in 0..dim {
        for b in a..dim {
            let key = (a, b);
            fields.push(match comps.get(&key) {
                Some((k, e)) => expr_text(k, e.line, &e.value, dim)?,
                None => ScalarField::constant(0.0, dim),
            });
        }
    }
    let mut m = MetricField::new(dim, fields).map_err(dimension)?;
    if let Some(dom) = sec.domain(dim)? {
        m = m.with_domain(dom).map_err(dimension)?;
    }
    Ok(m)
}

/// Integration and reporting settings from `[options]`; flags override them.
#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    pub method: Method,
    pub tol: Option<f64>,
    pub drift_bound: f64,
    pub grid: Option<String>,
    pub ranges: [Option<(f64, f64)>; 2],
    pub counts: Option<[usize; 2]>,
    pub policy: Option<String>,
    pub target: Option<Vec<f64>>,
    pub k: usize,
    pub rng_seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            method: Method::default(),
            tol: None,
            drift_bound: 1e-8,
            grid: None,
            ranges: [None, None],
            counts: None,
            policy: None,
            target: None,
            k: 10,
            rng_seed: 0,
        }
    }
}

pub const OPTION_KEYS: [&str; 14] = [
    "method", "step", "abs_tol", "rel_tol", "tol", "drift_bound", "grid", "range_1", "range_2", "counts", "policy",
    "target", "k", "seed",
];

/// Parses `AxB` grid counts.
pub fn parse_counts(s: &str) -> std::result::Result<[usize; 2], String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid must look like AxB, got `{s}`"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("grid `{s}`: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("grid `{s}`: {e}"))?;
    if a < 2 || b < 2 {
        return Err(format!("grid needs at least 2 nodes per axis, got `{s}`"));
    }
    Ok([a, b])
}

/// Curve family for the `variation` subcommand.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub v: Vec<String>,
    pub s: usize,
    pub h: Vec<String>,
    pub params: Vec<f64>,
    pub seed: SeedKind,
}

impl FamilySpec {
    pub fn family(&self) -> gendev::Result<ExprFamily> {
        let v: Vec<&str> = self.v.iter().map(String::as_str).collect();
        let h: Vec<&str> = self.h.iter().map(String::as_str).collect();
        ExprFamily::new(&v, self.s, &h)
    }
}

impl ProblemConfig {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }

    fn required(&self, name: &str) -> Result<&Section> {
        self.section(name).ok_or_else(|| ConfigError::MissingSection(name.to_string()))
    }

    /// Canonical text form; parsing it gives back the same sections and entries.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, (name, sec)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{name}]");
            for (k, e) in &sec.entries {
                let _ = writeln!(out, "{k} = {}", e.value);
            }
        }
        out
    }

    /// Dimensions `(n, s)` read from `[base]`, `[bundle]` and `[ambient]`,
    /// checked for consistency.
    pub fn dims(&self) -> Result<(usize, usize)> {
        let base = self.required("base")?;
        let ambient = self.required("ambient")?;
        base.require("base", &["dim"])?;
        ambient.require("ambient", &["dim"])?;
        let n = base.usize("dim")?.unwrap_or(0);
        let d = ambient.usize("dim")?.unwrap_or(0);
        if n == 0 || d <= n {
            return Err(ConfigError::Dimension(format!(
                "ambient dimension {d} must exceed base dimension {n} (and both must be positive)"
            )));
        }
        if let Some(b) = self.section("bundle") {
            if let Some(s) = b.usize("rank")? {
                if n + s != d {
                    return Err(ConfigError::Dimension(format!(
                        "base {n} + bundle rank {s} does not match ambient dimension {d}"
                    )));
                }
            }
        }
        Ok((n, d - n))
    }

    pub fn problem(&self) -> std::result::Result<Problem, crate::CliError> {
        let (n, s) = self.dims()?;
        let d = n + s;
        let base_sec = self.required("base")?;
        base_sec.unknown("base", |k| k == "dim" || k == "domain" || indices(k, "g", &[n, n]).is_some())?;
        let base = metric(base_sec, "base", n)?;

        let amb_sec = self.required("ambient")?;
        amb_sec.unknown("ambient", |k| {
            k == "dim" || k == "domain" || k == "metric" || indices(k, "g", &[d, d]).is_some()
        })?;
        let ambient = match amb_sec.get("metric") {
            Some(e) if e.value == "euclidean" => {
                if let Some((k, e)) = amb_sec.entries.iter().find(|(k, _)| k.starts_with("g_")) {
                    return Err(ConfigError::BadValue {
                        line: e.line,
                        key: k.clone(),
                        message: "components conflict with `metric = euclidean`".into(),
                    }
                    .into());
                }
                let mut m = MetricField::euclidean(d);
                if let Some(dom) = amb_sec.domain(d)? {
                    m = m.with_domain(dom)?;
                }
                AmbientSpec::new(m)
            }
            Some(e) => {
                return Err(ConfigError::BadValue {
                    line: e.line,
                    key: "metric".into(),
                    message: format!("only `euclidean` is a named metric, got `{}`", e.value),
                }
                .into())
            }
            None => AmbientSpec::new(metric(amb_sec, "ambient", d)?),
        };

        let bundle = match self.section("bundle") {
            None => BundleSpec::trivial(n, s),
            Some(sec) => {
                sec.unknown("bundle", |k| {
                    k == "rank" || indices(k, "frak", &[s, s]).is_some() || indices(k, "omega", &[n, s, s]).is_some()
                })?;
                let mut frak = Vec::new();
                for a in 0..s {
                    for b in a..s {
                        let keys = [format!("frak_{}_{}", a + 1, b + 1), format!("frak_{}_{}", b + 1, a + 1)];
                        let found: Vec<&String> = keys.iter().filter(|k| sec.entries.contains_key(*k)).collect();
                        if a != b && found.len() == 2 {
                            let e = &sec.entries[&keys[1]];
                            return Err(ConfigError::DuplicateKey {
                                line: e.line,
                                first: sec.entries[&keys[0]].line,
                                section: "bundle".into(),
                                key: keys[1].clone(),
                            }
                            .into());
                        }
                        frak.push(match found.first() {
                            Some(k) => expr_text(k, sec.entries[*k].line, &sec.entries[*k].value, n)?,
                            None => ScalarField::constant(if a == b { 1.0 } else { 0.0 }, n),
                        });
                    }
                }
                let mut omega = Vec::with_capacity(n * s * s);
                for a in 0..n {
                    for alpha in 0..s {
                        for beta in 0..s {
                            let k = format!("omega_{}_{}_{}", a + 1, alpha + 1, beta + 1);
                            omega.push(match sec.get(&k) {
                                Some(e) => expr_text(&k, e.line, &e.value, n)?,
                                None => ScalarField::constant(0.0, n),
                            });
                        }
                    }
                }
                BundleSpec::new(n, s, frak, |a, alpha, beta| omega[(a * s + alpha) * s + beta].clone())?
            }
        };

        let h = match self.section("h") {
            None => SecondFundamentalField::zero(n, s),
            Some(sec) => {
                sec.unknown("h", |k| indices(k, "h", &[s, n, n]).is_some())?;
                let mut comps: IndexMap<(usize, usize, usize), (String, usize)> = IndexMap::new();
                for (k, e) in &sec.entries {
                    let ix = indices(k, "h", &[s, n, n]).expect("checked above");
                    let key = (ix[0], ix[1].min(ix[2]), ix[1].max(ix[2]));
                    if let Some((_, first)) = comps.get(&key) {
                        return Err(ConfigError::DuplicateKey {
                            line: e.line,
                            first: *first,
                            section: "h".into(),
                            key: k.clone(),
                        }
                        .into());
                    }
                    comps.insert(key, (k.clone(), e.line));
                }
                let mut err = None;
                let field = SecondFundamentalField::new(n, s, |alpha, a, b| match comps.get(&(alpha, a, b)) {
                    Some((k, line)) => expr_text(k, *line, &sec.entries[k].value, n).unwrap_or_else(|e| {
                        err.get_or_insert(e);
                        ScalarField::constant(0.0, n)
                    }),
                    None => ScalarField::constant(0.0, n),
                })?;
                if let Some(e) = err {
                    return Err(e.into());
                }
                field
            }
        };

        let seed = match (self.section("seed"), self.section("submanifold")) {
            (Some(_), Some(_)) => return Err(ConfigError::SeedConflict.into()),
            (None, None) => return Err(ConfigError::MissingSection("seed".into()).into()),
            (Some(sec), None) => Seed::Point(point_seed(sec, n, d)?),
            (None, Some(sec)) => Seed::Submanifold(submanifold_seed(sec, n, d)?),
        };
        Ok(Problem::new(base, bundle, h, ambient, seed)?)
    }

    pub fn options(&self) -> Result<Options> {
        let mut o = Options::default();
        let Some(sec) = self.section("options") else { return Ok(o) };
        sec.unknown("options", |k| OPTION_KEYS.contains(&k))?;
        let method = sec.get("method").map_or("rk4", |e| e.value.as_str());
        o.method = match method {
            "rk4" => Method::Rk4 { step: sec.f64("step")?.unwrap_or(1e-3) },
            "dopri5" => Method::Dopri5 {
                abs_tol: sec.f64("abs_tol")?.unwrap_or(1e-10),
                rel_tol: sec.f64("rel_tol")?.unwrap_or(1e-10),
            },
            other => {
                return Err(ConfigError::BadValue {
                    line: sec.entries["method"].line,
                    key: "method".into(),
                    message: format!("expected rk4 or dopri5, got `{other}`"),
                })
            }
        };
        o.tol = sec.f64("tol")?;
        if let Some(b) = sec.f64("drift_bound")? {
            o.drift_bound = b;
        }
        o.grid = sec.get("grid").map(|e| e.value.clone());
        for (i, key) in ["range_1", "range_2"].iter().enumerate() {
            if let Some(v) = sec.floats(key)? {
                if v.len() != 2 {
                    return Err(ConfigError::Dimension(format!("{key} needs two numbers, got {}", v.len())));
                }
                o.ranges[i] = Some((v[0], v[1]));
            }
        }
        if let Some(e) = sec.get("counts") {
            o.counts = Some(parse_counts(&e.value).map_err(|message| ConfigError::BadValue {
                line: e.line,
                key: "counts".into(),
                message,
            })?);
        }
        o.policy = sec.get("policy").map(|e| e.value.clone());
        o.target = sec.floats("target")?;
        if let Some(k) = sec.usize("k")? {
            o.k = k;
        }
        if let Some(e) = sec.get("seed") {
            o.rng_seed = e.value.parse().map_err(|err: std::num::ParseIntError| ConfigError::BadValue {
                line: e.line,
                key: "seed".into(),
                message: err.to_string(),
            })?;
        }
        Ok(o)
    }

    pub fn family(&self) -> Result<FamilySpec> {
        let (n, s) = self.dims()?;
        let sec = self.required("family")?;
        sec.unknown("family", |k| ["v", "h", "u", "w0", "direction"].contains(&k))?;
        let [v] = sec.require("family", &["v"])?[..] else { unreachable!() };
        let v: Vec<String> = v.value.split(',').map(|x| x.trim().to_string()).collect();
        if v.len() != n {
            return Err(ConfigError::Dimension(format!("family v has {} components, base has {n}", v.len())));
        }
        let h: Vec<String> = sec
            .get("h")
            .map(|e| e.value.split(',').map(|x| x.trim().to_string()).collect())
            .unwrap_or_default();
        let params = sec.floats("u")?.unwrap_or_else(|| vec![0.0]);
        let seed = if self.section("submanifold").is_some() {
            let e = sec.require("family", &["w0", "direction"])?;
            SeedKind::Submanifold { w0: floats("w0", e[0])?, direction: floats("direction", e[1])? }
        } else {
            SeedKind::Point
        };
        Ok(FamilySpec { v, s, h, params, seed })
    }
}

fn point_seed(sec: &Section, n: usize, d: usize) -> Result<PointSeed> {
    sec.unknown("seed", |k| ["p", "ptilde", "phi"].contains(&k))?;
    let e = sec.require("seed", &["p", "ptilde", "phi"])?;
    let p = floats("p", e[0])?;
    let ptilde = floats("ptilde", e[1])?;
    let phi = floats("phi", e[2])?;
    if p.len() != n {
        return Err(ConfigError::Dimension(format!("p has {} components, base has dimension {n}", p.len())));
    }
    if ptilde.len() != d {
        return Err(ConfigError::Dimension(format!("ptilde has {} components, ambient has dimension {d}", ptilde.len())));
    }
    if phi.len() != d * d {
        return Err(ConfigError::Dimension(format!(
            "phi has {} elements, expected {} ({d}×{d} row-major)",
            phi.len(),
            d * d
        )));
    }
    Ok(PointSeed { p, ptilde, phi: DMatrix::from_row_slice(d, d, &phi) })
}

fn submanifold_seed(sec: &Section, n: usize, d: usize) -> Result<SubmanifoldSeed> {
    sec.unknown("submanifold", |k| ["r", "range", "s", "stilde", "psi", "sigma", "sigma_tilde"].contains(&k))?;
    let e = sec.require("submanifold", &["r", "range", "s", "stilde", "psi"])?;
    let r = sec.usize("r")?.unwrap_or(0);
    if r == 0 || r >= n {
        return Err(ConfigError::Dimension(format!("submanifold dimension r = {r} must satisfy 0 < r < {n}")));
    }
    let range = floats("range", e[1])?;
    if range.len() != 2 * r {
        return Err(ConfigError::Dimension(format!("range needs {} numbers, got {}", 2 * r, range.len())));
    }
    let s_fields = exprs("s", e[2], r)?;
    let st = exprs("stilde", e[3], r)?;
    let psi = exprs("psi", e[4], r)?;
    if s_fields.len() != n || st.len() != d || psi.len() != d * d {
        return Err(ConfigError::Dimension(format!(
            "submanifold needs {n} s components, {d} stilde components and {} psi entries, got {}, {}, {}",
            d * d,
            s_fields.len(),
            st.len(),
            psi.len()
        )));
    }
    let ranges = range.chunks(2).map(|c| (c[0], c[1])).collect();
    let sigma = sec.get("sigma").map(|e| exprs("sigma", e, r)).transpose()?;
    let sigma_tilde = sec.get("sigma_tilde").map(|e| exprs("sigma_tilde", e, r)).transpose()?;
    let seed = SubmanifoldSeed::new(r, ranges, s_fields, st, psi).map_err(dimension)?;
    seed.with_sigma(sigma, sigma_tilde).map_err(dimension)
}
