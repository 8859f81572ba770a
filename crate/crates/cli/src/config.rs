//! Experiment configuration: flat `key = value` lines grouped under
//! `[section]` headers. `#` starts a comment anywhere on a line. Every key
//! must belong to the section it appears in; unknown sections, unknown
//! keys, repeated keys and unparsable values are errors that carry the
//! line number.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use retrace_core::generators::GarnetParams;
use retrace_core::online::Sequence;
use retrace_core::{TraceFamily, TraceSpec};

use crate::error::ConfigError;

/// The lambda sweep used when `[trace] lambdas` is absent.
pub const DEFAULT_LAMBDAS: [f64; 7] = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0];

const SCHEMA: &[(&str, &[&str])] = &[
    ("experiment", &["mode", "name", "seeds", "episodes", "iterations", "log_every", "max_len"]),
    (
        "mdp",
        &[
            "source", "path", "length", "n_states", "n_actions", "branching", "termination", "sparsity", "gamma",
            "seed",
        ],
    ),
    ("trace", &["families", "lambdas"]),
    ("target", &["policy", "decay", "value", "rate", "eps_mix", "base", "seed", "rows"]),
    ("behavior", &["policy", "decay", "value", "rate", "eps_mix", "base", "seed", "rows"]),
    ("step_size", &["alpha0", "exponent"]),
    ("variance", &["samples", "horizon"]),
    ("verify", &["samples"]),
    ("scores", &["input"]),
    ("output", &["dir"]),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Evaluate,
    Control,
    Verify,
    Variance,
    Scores,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Evaluate => "evaluate",
            Mode::Control => "control",
            Mode::Verify => "verify",
            Mode::Variance => "variance",
            Mode::Scores => "scores",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MdpSource {
    Chain { length: usize, gamma: f64 },
    Garnet(GarnetParams),
    /// MDP text file, resolved against the config's directory.
    File(PathBuf),
    /// The two-state `Q^pi(lambda)` divergence instance.
    Divergence { termination: f64 },
}

/// Base distribution of a mixture behaviour.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePolicy {
    Uniform,
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Uniform,
    /// Flat Dirichlet rows drawn from `seed`.
    Random { seed: u64 },
    /// Explicit rows, one per state.
    Rows(Vec<Vec<f64>>),
    /// The target or behaviour shipped with the divergence instance.
    Instance,
    Greedy,
    EpsilonGreedy(Sequence),
    Softmax(Sequence),
    Mixture { base: BasePolicy, eps_mix: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub name: String,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub iterations: usize,
    pub log_every: u64,
    pub max_len: usize,
    pub mdp: MdpSource,
    pub families: Vec<TraceFamily>,
    pub lambdas: Vec<f64>,
    pub target: PolicySpec,
    pub behavior: PolicySpec,
    pub alpha0: f64,
    pub exponent: f64,
    pub variance_samples: usize,
    pub variance_horizon: usize,
    pub verify_samples: usize,
    pub scores_input: Option<PathBuf>,
    pub output_dir: PathBuf,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Parsed but untyped config, keyed by `(section, key)`.
struct Raw {
    entries: BTreeMap<(String, String), Entry>,
}

fn parse_raw(text: &str) -> Result<Raw, ConfigError> {
    let mut entries = BTreeMap::new();
    let mut section: Option<&'static str> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, None, "unterminated section header"))?
                .trim();
            let known = SCHEMA
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| ConfigError::at(line, None, format!("unknown section [{name}]")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, None, format!("expected `key = value`, found {content:?}")))?;
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::at(line, Some(key), "malformed key"));
        }
        let sec = section.ok_or_else(|| ConfigError::at(line, Some(key), "key outside any section"))?;
        let keys = SCHEMA.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(ConfigError::at(line, Some(key), format!("unknown key in [{sec}]")));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, Some(key), "missing value"));
        }
        let slot = (sec.to_string(), key.to_string());
        if let Some(prev) = entries.get(&slot) {
            let prev: &Entry = prev;
            return Err(ConfigError::at(
                line,
                Some(key),
                format!("duplicate key (first set on line {})", prev.line),
            ));
        }
        entries.insert(
            slot,
            Entry {
                value: value.to_string(),
                line,
                used: false,
            },
        );
    }
    Ok(Raw { entries })
}

impl Raw {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(&(section.to_string(), key.to_string())).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn parsed<T: std::str::FromStr>(&mut self, section: &str, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::at(line, Some(key), format!("expected {what}, found {v:?}"))),
        }
    }

    fn real(&mut self, section: &str, key: &str) -> Result<Option<f64>, ConfigError> {
        let line = self.line(section, key);
        let v: Option<f64> = self.parsed(section, key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(ConfigError::at(line, Some(key), "value must be finite")),
            other => Ok(other),
        }
    }

    fn line(&self, section: &str, key: &str) -> usize {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|e| e.line)
            .unwrap_or(0)
    }

    /// Keys that were valid for their section but meaningless for the
    /// chosen options (e.g. `path` with a generated MDP).
    fn unused(&self) -> Option<(&str, &str, usize)> {
        self.entries
            .iter()
            .filter(|(_, e)| !e.used)
            .min_by_key(|(_, e)| e.line)
            .map(|((s, k), e)| (s.as_str(), k.as_str(), e.line))
    }
}

fn domain(raw: &Raw, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
    let line = raw.line(section, key);
    if line == 0 {
        ConfigError::missing(section, key, message)
    } else {
        ConfigError::at(line, Some(key), message)
    }
}

fn parse_seeds(value: &str, line: usize) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::at(line, Some("seeds"), format!("expected a comma list or `a..b` range, found {value:?}"));
    let mut seeds = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b <= a {
                return Err(ConfigError::at(line, Some("seeds"), format!("empty range {part}")));
            }
            seeds.extend(a..b);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(ConfigError::at(line, Some("seeds"), "repeated seed"));
    }
    Ok(seeds)
}

fn parse_list<T: std::str::FromStr>(value: &str, line: usize, key: &str, what: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<T>()
                .map_err(|_| ConfigError::at(line, Some(key), format!("expected {what}, found {p:?}")))
        })
        .collect()
}

fn parse_rows(value: &str, line: usize) -> Result<Vec<Vec<f64>>, ConfigError> {
    value
        .split(';')
        .map(|row| {
            let row: Result<Vec<f64>, _> = row.split_whitespace().map(str::parse::<f64>).collect();
            match row {
                Ok(r) if !r.is_empty() => Ok(r),
                _ => Err(ConfigError::at(
                    line,
                    Some("rows"),
                    "expected rows of numbers separated by `;`",
                )),
            }
        })
        .collect()
}

fn parse_sequence(raw: &mut Raw, section: &str) -> Result<Sequence, ConfigError> {
    let decay = raw.take(section, "decay");
    let value = raw.real(section, "value")?;
    let rate_line = raw.line(section, "rate");
    let rate = raw.real(section, "rate")?;
    let (decay, line) = decay.unwrap_or_else(|| ("constant".into(), 0));
    let need = |v: Option<f64>, key: &str| v.ok_or_else(|| domain(raw, section, key, format!("required by decay = {decay}")));
    let seq = match decay.as_str() {
        "constant" => Sequence::Constant(need(value, "value")?),
        "harmonic" => Sequence::Harmonic { scale: value.unwrap_or(1.0) },
        "geometric" => Sequence::Geometric {
            initial: need(value, "value")?,
            ratio: need(rate, "rate")?,
        },
        "linear" => Sequence::Linear {
            initial: need(value, "value")?,
            slope: need(rate, "rate")?,
        },
        other => {
            return Err(ConfigError::at(
                line,
                Some("decay"),
                format!("unknown decay law {other:?} (constant, harmonic, geometric, linear)"),
            ))
        }
    };
    if rate.is_some() && matches!(seq, Sequence::Constant(_) | Sequence::Harmonic { .. }) {
        return Err(ConfigError::at(rate_line, Some("rate"), format!("not used by decay = {decay}")));
    }
    Ok(seq)
}

fn parse_policy(raw: &mut Raw, section: &str, default: PolicySpec) -> Result<PolicySpec, ConfigError> {
    let Some((kind, line)) = raw.take(section, "policy") else {
        return Ok(default);
    };
    let spec = match kind.as_str() {
        "uniform" => PolicySpec::Uniform,
        "random" => PolicySpec::Random {
            seed: raw.parsed(section, "seed", "an unsigned integer")?.unwrap_or(0),
        },
        "rows" => {
            let (v, l) = raw
                .take(section, "rows")
                .ok_or_else(|| ConfigError::missing(section, "rows", "required by policy = rows"))?;
            PolicySpec::Rows(parse_rows(&v, l)?)
        }
        "instance" => PolicySpec::Instance,
        "greedy" => PolicySpec::Greedy,
        "epsilon_greedy" => PolicySpec::EpsilonGreedy(parse_sequence(raw, section)?),
        "softmax" => PolicySpec::Softmax(parse_sequence(raw, section)?),
        "mixture" => {
            let eps_mix = raw
                .real(section, "eps_mix")?
                .ok_or_else(|| ConfigError::missing(section, "eps_mix", "required by policy = mixture"))?;
            let base = match raw.take(section, "base") {
                None => BasePolicy::Uniform,
                Some((b, l)) => match b.as_str() {
                    "uniform" => BasePolicy::Uniform,
                    "random" => BasePolicy::Random {
                        seed: raw.parsed(section, "seed", "an unsigned integer")?.unwrap_or(0),
                    },
                    other => {
                        return Err(ConfigError::at(l, Some("base"), format!("unknown base policy {other:?}")));
                    }
                },
            };
            PolicySpec::Mixture { base, eps_mix }
        }
        other => {
            return Err(ConfigError::at(line, Some("policy"), format!("unknown policy kind {other:?}")));
        }
    };
    Ok(spec)
}

fn parse_mdp(raw: &mut Raw, base_dir: &Path) -> Result<MdpSource, ConfigError> {
    let (source, line) = raw
        .take("mdp", "source")
        .ok_or_else(|| ConfigError::missing("mdp", "source", "an MDP source is required"))?;
    let gamma_line = raw.line("mdp", "gamma");
    let gamma = raw.real("mdp", "gamma")?;
    let check_gamma = |g: f64| {
        if (0.0..1.0).contains(&g) {
            Ok(g)
        } else {
            Err(ConfigError::at(gamma_line, Some("gamma"), format!("gamma {g} outside [0, 1)")))
        }
    };
    match source.as_str() {
        "chain" => {
            let length = raw.parsed("mdp", "length", "an integer")?.unwrap_or(5);
            if length < 2 {
                return Err(domain(raw, "mdp", "length", "chain length must be at least 2"));
            }
            Ok(MdpSource::Chain {
                length,
                gamma: check_gamma(gamma.unwrap_or(0.9))?,
            })
        }
        "garnet" => {
            let mut p = GarnetParams::new(
                raw.parsed("mdp", "n_states", "an integer")?.unwrap_or(5),
                raw.parsed("mdp", "n_actions", "an integer")?.unwrap_or(2),
                raw.parsed("mdp", "branching", "an integer")?.unwrap_or(2),
                check_gamma(gamma.unwrap_or(0.9))?,
                raw.parsed("mdp", "seed", "an unsigned integer")?.unwrap_or(0),
            );
            if let Some(t) = raw.real("mdp", "termination")? {
                p.termination_prob = t;
            }
            if let Some(s) = raw.real("mdp", "sparsity")? {
                p.reward_sparsity = s;
            }
            p.validate().map_err(|e| ConfigError::at(line, Some("source"), e.to_string()))?;
            Ok(MdpSource::Garnet(p))
        }
        "file" => {
            let (path, _) = raw
                .take("mdp", "path")
                .ok_or_else(|| ConfigError::missing("mdp", "path", "required by source = file"))?;
            if gamma.is_some() {
                return Err(ConfigError::at(gamma_line, Some("gamma"), "the MDP file sets gamma"));
            }
            Ok(MdpSource::File(base_dir.join(path)))
        }
        "divergence" => {
            let t = raw.real("mdp", "termination")?.unwrap_or(0.0);
            if !(0.0..1.0).contains(&t) {
                return Err(domain(raw, "mdp", "termination", format!("termination {t} outside [0, 1)")));
            }
            if gamma.is_some() {
                return Err(ConfigError::at(gamma_line, Some("gamma"), "the divergence instance fixes gamma"));
            }
            Ok(MdpSource::Divergence { termination: t })
        }
        other => Err(ConfigError::at(
            line,
            Some("source"),
            format!("unknown MDP source {other:?} (chain, garnet, file, divergence)"),
        )),
    }
}

fn positive<T: PartialOrd + Default + Copy>(raw: &mut Raw, section: &str, key: &str, value: Option<T>, default: T) -> Result<T, ConfigError> {
    let v = value.unwrap_or(default);
    if v <= T::default() {
        return Err(domain(raw, section, key, "must be positive"));
    }
    Ok(v)
}

impl ExperimentConfig {
    /// Parses config text. Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut raw = parse_raw(text)?;

        let (mode_text, mode_line) = raw
            .take("experiment", "mode")
            .ok_or_else(|| ConfigError::missing("experiment", "mode", "a mode is required"))?;
        let mode = match mode_text.as_str() {
            "evaluate" => Mode::Evaluate,
            "control" => Mode::Control,
            "verify" => Mode::Verify,
            "variance" => Mode::Variance,
            "scores" => Mode::Scores,
            other => {
                return Err(ConfigError::at(
                    mode_line,
                    Some("mode"),
                    format!("unknown mode {other:?} (evaluate, control, verify, variance, scores)"),
                ))
            }
        };
        let name = raw.take("experiment", "name").map(|(v, _)| v).unwrap_or_else(|| "experiment".into());
        let output_dir = base_dir.join(raw.take("output", "dir").map(|(v, _)| v).unwrap_or_else(|| "out".into()));

        if mode == Mode::Scores {
            let (input, _) = raw
                .take("scores", "input")
                .ok_or_else(|| ConfigError::missing("scores", "input", "required by mode = scores"))?;
            let cfg = Self {
                mode,
                name,
                seeds: Vec::new(),
                episodes: 0,
                iterations: 0,
                log_every: 1,
                max_len: 1,
                mdp: MdpSource::Chain { length: 2, gamma: 0.0 },
                families: Vec::new(),
                lambdas: Vec::new(),
                target: PolicySpec::Uniform,
                behavior: PolicySpec::Uniform,
                alpha0: 0.0,
                exponent: 0.0,
                variance_samples: 0,
                variance_horizon: 0,
                verify_samples: 0,
                scores_input: Some(base_dir.join(input)),
                output_dir,
            };
            return finish(raw, cfg);
        }

        let seeds = match raw.take("experiment", "seeds") {
            Some((v, line)) => parse_seeds(&v, line)?,
            None => return Err(ConfigError::missing("experiment", "seeds", "the seed list must not be empty")),
        };
        let episodes = raw.parsed("experiment", "episodes", "an unsigned integer")?;
        let episodes = positive(&mut raw, "experiment", "episodes", episodes, 1000u64)?;
        let iterations = raw.parsed("experiment", "iterations", "an unsigned integer")?;
        let iterations = positive(&mut raw, "experiment", "iterations", iterations, 20usize)?;
        let log_every = raw.parsed("experiment", "log_every", "an unsigned integer")?;
        let log_every = positive(&mut raw, "experiment", "log_every", log_every, 100u64)?;
        let max_len = raw.parsed("experiment", "max_len", "an unsigned integer")?;
        let max_len = positive(&mut raw, "experiment", "max_len", max_len, 1000usize)?;

        let mdp = parse_mdp(&mut raw, base_dir)?;

        let families = match raw.take("trace", "families") {
            Some((v, line)) => parse_list::<String>(&v, line, "families", "a trace family")?
                .iter()
                .map(|f| {
                    f.parse::<TraceFamily>()
                        .map_err(|e| ConfigError::at(line, Some("families"), e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?,
            None => vec![TraceFamily::Retrace],
        };
        let lambdas = match raw.take("trace", "lambdas") {
            Some((v, line)) => {
                let l = parse_list::<f64>(&v, line, "lambdas", "a number")?;
                for &x in &l {
                    TraceSpec::new(TraceFamily::Retrace, x)
                        .map_err(|e| ConfigError::at(line, Some("lambdas"), e.to_string()))?;
                }
                l
            }
            None => DEFAULT_LAMBDAS.to_vec(),
        };
        for (key, list_len) in [("families", families.len()), ("lambdas", lambdas.len())] {
            if list_len == 0 {
                return Err(domain(&raw, "trace", key, "list must not be empty"));
            }
        }

        let default_policy = if matches!(mdp, MdpSource::Divergence { .. }) {
            PolicySpec::Instance
        } else {
            PolicySpec::Uniform
        };
        let target = parse_policy(&mut raw, "target", default_policy.clone())?;
        let behavior = parse_policy(&mut raw, "behavior", default_policy)?;
        for (section, p) in [("target", &target), ("behavior", &behavior)] {
            if *p == PolicySpec::Instance && !matches!(mdp, MdpSource::Divergence { .. }) {
                return Err(domain(&raw, section, "policy", "only the divergence instance ships policies"));
            }
            if let PolicySpec::Mixture { eps_mix, .. } = p {
                if !(0.0..1.0).contains(eps_mix) {
                    return Err(domain(&raw, section, "eps_mix", format!("{eps_mix} outside [0, 1)")));
                }
            }
        }

        let alpha0 = raw.real("step_size", "alpha0")?.unwrap_or(0.5);
        let exponent = raw.real("step_size", "exponent")?.unwrap_or(0.75);
        if !(alpha0 > 0.0) {
            return Err(domain(&raw, "step_size", "alpha0", "must be positive"));
        }
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(domain(&raw, "step_size", "exponent", format!("{exponent} outside (0.5, 1]")));
        }

        let variance_samples = raw.parsed("variance", "samples", "an unsigned integer")?.unwrap_or(100_000usize);
        if variance_samples < 2 {
            return Err(domain(&raw, "variance", "samples", "need at least 2 samples"));
        }
        let variance_horizon = raw.parsed("variance", "horizon", "an unsigned integer")?;
        let variance_horizon = positive(&mut raw, "variance", "horizon", variance_horizon, 30usize)?;
        let verify_samples = raw.parsed("verify", "samples", "an unsigned integer")?;
        let verify_samples = positive(&mut raw, "verify", "samples", verify_samples, 100usize)?;

        let cfg = Self {
            mode,
            name,
            seeds,
            episodes,
            iterations,
            log_every,
            max_len,
            mdp,
            families,
            lambdas,
            target,
            behavior,
            alpha0,
            exponent,
            variance_samples,
            variance_horizon,
            verify_samples,
            scores_input: None,
            output_dir,
        };
        finish(raw, cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::io(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir)
    }
}

fn finish(raw: Raw, cfg: ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
    if let Some((section, key, line)) = raw.unused() {
        return Err(ConfigError::at(
            line,
            Some(key),
            format!("[{section}] {key} has no effect with this configuration"),
        ));
    }
    Ok(cfg)
}
