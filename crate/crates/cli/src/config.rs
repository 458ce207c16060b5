//! Flat `section.key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Unknown and duplicate keys are errors so typos do not silently fall back
//! to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use plap_core::energy::schedule_alpha;
use plap_core::{
    build_disk, build_interval, build_rectangle, Domain, ProblemParams, SolverOptions,
};

use crate::error::CliError;

const KNOWN_KEYS: &[&str] = &[
    "domain.shape",
    "domain.a",
    "domain.b",
    "domain.ax",
    "domain.ay",
    "domain.bx",
    "domain.by",
    "domain.cx",
    "domain.cy",
    "domain.radius",
    "grid.n",
    "params.p",
    "params.r",
    "params.s",
    "params.gamma",
    "params.alpha",
    "params.beta",
    "solver.max_iters",
    "solver.tol",
    "solver.step0",
    "solver.armijo_shrink",
    "solver.seed",
    "solver.deterministic",
    "solver.threads",
    "sweep.p_values",
    "verify.tolerance",
    "verify.analytic",
    "residuals.pair",
    "residuals.nodes",
    "check.samples",
    "check.seed",
    "output.dir",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw key/value pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(CliError::syntax(
                    line,
                    format!("expected `section.key = value`, found `{body}`"),
                ));
            };
            let (key, value) = (key.trim(), value.trim());
            if !key.contains('.') {
                return Err(CliError::syntax(
                    line,
                    format!("key `{key}` has no section prefix"),
                ));
            }
            if !KNOWN_KEYS.contains(&key) {
                return Err(CliError::syntax(line, format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(CliError::syntax(
                    line,
                    format!("key `{key}` has an empty value"),
                ));
            }
            let entry = Entry {
                value: value.to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(CliError::syntax(
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.entries.keys().any(|k| k.starts_with(&prefix))
    }

    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| {
                CliError::key(
                    key,
                    Some(e.line),
                    format!("cannot parse `{}`: {err}", e.value),
                )
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::key(key, None, "required key is missing".to_string()))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse::<T>().map_err(|err| {
                    CliError::key(
                        key,
                        Some(e.line),
                        format!("bad list item `{}`: {err}", s.trim()),
                    )
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(default);
        };
        match e.value.as_str() {
            "true" | "yes" | "1" | "on" => Ok(true),
            "false" | "no" | "0" | "off" => Ok(false),
            other => Err(CliError::key(
                key,
                Some(e.line),
                format!("expected a boolean, got `{other}`"),
            )),
        }
    }

    /// Wraps a core validation error so the message points at `key`.
    fn at(&self, key: &str, err: impl std::fmt::Display) -> CliError {
        CliError::key(key, self.line_of(key), err.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Rectangle { ax: f64, ay: f64, bx: f64, by: f64 },
    Disk { cx: f64, cy: f64, radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    pub spec: DomainSpec,
    pub n: usize,
}

impl DomainConfig {
    pub fn build(&self) -> Result<Arc<Domain>, CliError> {
        let d = match self.spec {
            DomainSpec::Interval { a, b } => build_interval(a, b, self.n),
            DomainSpec::Rectangle { ax, ay, bx, by } => {
                build_rectangle(ax, ay, bx, by, self.n, self.n)
            }
            DomainSpec::Disk { cx, cy, radius } => build_disk([cx, cy], radius, self.n),
        };
        d.map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Exponents of the problem; `alpha`/`beta` may be left to the gamma schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsConfig {
    pub p: Option<f64>,
    pub r: f64,
    pub s: f64,
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl ParamsConfig {
    /// Problem parameters at exponent `p`.
    pub fn at(&self, p: f64) -> Result<ProblemParams, CliError> {
        let alpha = match (self.alpha, self.beta) {
            (Some(a), _) => a,
            (None, Some(b)) => p - b,
            (None, None) => schedule_alpha(self.gamma, p),
        };
        ProblemParams::new(p, self.r, self.s, alpha, p - alpha, self.gamma)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub options: SolverOptions,
    pub deterministic: bool,
    /// 0 lets the thread pool decide.
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualPair {
    TestPair,
    Cone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Option<DomainConfig>,
    pub params: Option<ParamsConfig>,
    pub solver: SolverConfig,
    pub p_values: Option<Vec<f64>>,
    pub verify_tolerance: f64,
    pub verify_analytic: bool,
    pub residual_pair: ResidualPair,
    pub residual_nodes: Option<Vec<usize>>,
    pub check_samples: usize,
    pub check_seed: u64,
    pub out_dir: PathBuf,
}

pub const DEFAULT_CHECK_SAMPLES: usize = 100_000;
pub const DEFAULT_CHECK_SEED: u64 = 20_240_601;

impl RunConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let domain = if raw.has_section("domain") || raw.has_section("grid") {
            Some(domain_section(raw)?)
        } else {
            None
        };
        let params = if raw.has_section("params") {
            Some(params_section(raw)?)
        } else {
            None
        };
        let defaults = SolverOptions::default();
        let options = SolverOptions {
            max_iters: raw.get_or("solver.max_iters", defaults.max_iters)?,
            tol: raw.get_or("solver.tol", defaults.tol)?,
            step0: raw.get_or("solver.step0", defaults.step0)?,
            armijo_shrink: raw.get_or("solver.armijo_shrink", defaults.armijo_shrink)?,
            seed: raw.get_or("solver.seed", defaults.seed)?,
            ..defaults
        };
        if let Err(e) = options.validate() {
            let key = match &e {
                plap_core::Error::InvalidParameter { name, .. } => format!("solver.{name}"),
                _ => "solver".to_string(),
            };
            return Err(raw.at(&key, e));
        }
        let solver = SolverConfig {
            options,
            deterministic: raw.bool("solver.deterministic", false)?,
            threads: raw.get_or("solver.threads", 0)?,
        };
        let p_values = raw.list::<f64>("sweep.p_values")?;
        if let Some(ps) = &p_values {
            if ps.is_empty()
                || ps.windows(2).any(|w| !(w[0] < w[1]))
                || ps.iter().any(|&p| !(p >= 2.0))
            {
                return Err(raw.at(
                    "sweep.p_values",
                    "must be a strictly increasing list of exponents >= 2",
                ));
            }
        }
        let verify_tolerance = raw.get_or("verify.tolerance", 0.1)?;
        if !(verify_tolerance > 0.0) {
            return Err(raw.at("verify.tolerance", "must be positive"));
        }
        let residual_pair = match raw.get::<String>("residuals.pair")?.as_deref() {
            None | Some("test_pair") => ResidualPair::TestPair,
            Some("cone") => ResidualPair::Cone,
            Some(other) => {
                return Err(raw.at(
                    "residuals.pair",
                    format!("expected `test_pair` or `cone`, got `{other}`"),
                ));
            }
        };
        let check_samples = raw.get_or("check.samples", DEFAULT_CHECK_SAMPLES)?;
        if check_samples == 0 {
            return Err(raw.at("check.samples", "must be at least 1"));
        }
        Ok(Self {
            domain,
            params,
            solver,
            p_values,
            verify_tolerance,
            verify_analytic: raw.bool("verify.analytic", false)?,
            residual_pair,
            residual_nodes: raw.list("residuals.nodes")?,
            check_samples,
            check_seed: raw.get_or("check.seed", DEFAULT_CHECK_SEED)?,
            out_dir: raw.get_or("output.dir", PathBuf::from("."))?,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_raw(&RawConfig::parse(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    /// Defaults used when a subcommand runs without a config file.
    pub fn empty() -> Self {
        Self::from_raw(&RawConfig::default()).expect("defaults are valid")
    }

    pub fn domain(&self) -> Result<&DomainConfig, CliError> {
        self.domain.as_ref().ok_or_else(|| {
            CliError::key(
                "domain.shape",
                None,
                "the domain section is required".into(),
            )
        })
    }

    pub fn params(&self) -> Result<&ParamsConfig, CliError> {
        self.params
            .as_ref()
            .ok_or_else(|| CliError::key("params", None, "the params section is required".into()))
    }

    pub fn p_values(&self) -> Result<&[f64], CliError> {
        self.p_values
            .as_deref()
            .ok_or_else(|| CliError::key("sweep.p_values", None, "required key is missing".into()))
    }
}

fn domain_section(raw: &RawConfig) -> Result<DomainConfig, CliError> {
    let shape: String = raw.require("domain.shape")?;
    let spec = match shape.as_str() {
        "interval" => DomainSpec::Interval {
            a: raw.require("domain.a")?,
            b: raw.require("domain.b")?,
        },
        "rectangle" => DomainSpec::Rectangle {
            ax: raw.require("domain.ax")?,
            ay: raw.require("domain.ay")?,
            bx: raw.require("domain.bx")?,
            by: raw.require("domain.by")?,
        },
        "disk" => DomainSpec::Disk {
            cx: raw.get_or("domain.cx", 0.0)?,
            cy: raw.get_or("domain.cy", 0.0)?,
            radius: raw.require("domain.radius")?,
        },
        other => {
            return Err(raw.at(
                "domain.shape",
                format!("expected interval, rectangle or disk, got `{other}`"),
            ))
        }
    };
    let n = raw.require("grid.n")?;
    let cfg = DomainConfig { spec, n };
    cfg.build().map_err(|e| raw.at("domain.shape", e))?;
    Ok(cfg)
}

fn params_section(raw: &RawConfig) -> Result<ParamsConfig, CliError> {
    let cfg = ParamsConfig {
        p: raw.get("params.p")?,
        r: raw.require("params.r")?,
        s: raw.require("params.s")?,
        gamma: raw.require("params.gamma")?,
        alpha: raw.get("params.alpha")?,
        beta: raw.get("params.beta")?,
    };
    if let (Some(p), Some(a), Some(b)) = (cfg.p, cfg.alpha, cfg.beta) {
        if (a + b - p).abs() > 1e-12 * p {
            let line = raw.line_of("params.beta").max(raw.line_of("params.alpha"));
            return Err(CliError::key(
                "params.alpha",
                line,
                format!("params.alpha + params.beta must equal params.p ({a} + {b} != {p})"),
            ));
        }
    }
    for (key, x) in [
        ("params.r", cfg.r),
        ("params.s", cfg.s),
        ("params.gamma", cfg.gamma),
    ] {
        if !(x > 0.0 && x < 1.0) {
            return Err(raw.at(key, format!("must lie in (0, 1), got {x}")));
        }
    }
    if let Some(p) = cfg.p {
        cfg.at(p).map_err(|e| raw.at("params.p", e))?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
# interval of length two
domain.shape = interval
domain.a = 0
domain.b = 2
grid.n = 50
params.p = 4
params.r = 0.25
params.s = 0.75
params.gamma = 0.5
";

    #[test]
    fn parses_minimal() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let d = c.domain().unwrap();
        assert_eq!(d.n, 50);
        assert_eq!(d.spec, DomainSpec::Interval { a: 0.0, b: 2.0 });
        let prm = c.params().unwrap().at(4.0).unwrap();
        assert_eq!((prm.alpha(), prm.beta()), (2.0, 2.0));
        assert!(!c.solver.deterministic);
        assert_eq!(c.out_dir, PathBuf::from("."));
    }

    #[test]
    fn reports_line_of_syntax_errors() {
        let e = RawConfig::parse("domain.shape = interval\n\nthis is wrong\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = RawConfig::parse("domain.shape = disk\ndomain.shape = interval\n").unwrap_err();
        assert!(
            e.to_string().contains("duplicate") && e.to_string().contains("line 2"),
            "{e}"
        );
        let e = RawConfig::parse("domain.colour = red\n").unwrap_err();
        assert!(e.to_string().contains("domain.colour"), "{e}");
    }

    #[test]
    fn coupling_mismatch_names_both_keys() {
        let text = format!("{MINIMAL}params.alpha = 1\nparams.beta = 2\n");
        let e = RunConfig::parse(&text).unwrap_err();
        let msg = e.to_string();
        assert!(
            msg.contains("params.alpha") && msg.contains("params.beta"),
            "{msg}"
        );
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn invalid_tolerance() {
        let e = RunConfig::parse(&format!("{MINIMAL}solver.tol = 0\n")).unwrap_err();
        assert!(e.to_string().contains("solver.tol"), "{e}");
        let e = RunConfig::parse(&format!("{MINIMAL}solver.tol = abc\n")).unwrap_err();
        assert!(e.to_string().contains("line 11"), "{e}");
    }

    #[test]
    fn lists_and_shapes() {
        let c = RunConfig::parse(&format!("{MINIMAL}sweep.p_values = 4, 8,16\n")).unwrap();
        assert_eq!(c.p_values().unwrap(), &[4.0, 8.0, 16.0]);
        assert!(RunConfig::parse(&format!("{MINIMAL}sweep.p_values = 8, 4\n")).is_err());
        let disk = "domain.shape = disk\ndomain.radius = 1\ngrid.n = 20\n";
        let c = RunConfig::parse(disk).unwrap();
        assert_eq!(c.domain().unwrap().build().unwrap().inradius(), 1.0);
        assert!(RunConfig::parse("domain.shape = blob\ngrid.n = 5\n").is_err());
        assert!(
            RunConfig::parse("domain.shape = interval\ndomain.a = 0\ngrid.n = 5\n")
                .unwrap_err()
                .to_string()
                .contains("domain.b")
        );
    }

    #[test]
    fn empty_config_has_defaults() {
        let c = RunConfig::empty();
        assert!(c.domain.is_none() && c.params.is_none());
        assert_eq!(c.check_samples, DEFAULT_CHECK_SAMPLES);
    }
}
