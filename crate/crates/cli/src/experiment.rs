//! Grid execution: one cell per `(trace family, lambda, seed)`, run on a
//! worker pool and written in declaration order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use retrace_core::analysis::{
    commutation_defect, inter_algorithm_scores, offpolicyness, qpi_lambda_safety, spectral_radius_qpi,
    trace_product_variance, verify_contraction, ScoreTable,
};
use retrace_core::enumeration::{apply_expected_operator_nonmarkov, default_horizon};
use retrace_core::generators::{generate_chain, generate_garnet, qpi_divergence_instance, random_policy};
use retrace_core::online::{mixture_behavior, run_control, ControlConfig, PolicySchedule, DIVERGENCE_CUTOFF};
use retrace_core::traces::{satisfies_ratio_bound, ExpectedOperator};
use retrace_core::{
    contraction_diagnostics, exact_q_pi, exact_q_star, Mdp, Policy, QFunction, SplitMix64, TraceFamily, TraceSpec,
};
use sha2::{Digest, Sha256};

use crate::config::{BasePolicy, ExperimentConfig, MdpSource, Mode, PolicySpec};
use crate::error::{CliError, ConfigError};

/// Header of every learning-curve file.
pub const RESULTS_HEADER: &str = "trace,lambda,seed,step,metric,value";
pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SCORES_F_FILE: &str = "scores_f.csv";
pub const SCORES_Z_FILE: &str = "scores_z.csv";

/// Token written instead of values whose magnitude exceeds the cutoff.
pub const DIVERGED: &str = "diverged";

/// Random initial estimates in evaluate mode are uniform in `[-Q0_RANGE, Q0_RANGE]`.
const Q0_RANGE: f64 = 10.0;
const Q_STAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed_offset: u64,
    /// Worker threads; `None` uses the available parallelism.
    pub jobs: Option<usize>,
    /// Overrides `[output] dir`.
    pub out_dir: Option<PathBuf>,
    /// Forces a mode regardless of `[experiment] mode`.
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub family: TraceFamily,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub cell: Cell,
    /// `None` on success.
    pub error: Option<String>,
    pub rows: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub outcomes: Vec<CellOutcome>,
    /// Set when the run itself (not a cell) failed, e.g. a malformed score table.
    pub run_error: Option<String>,
}

impl RunSummary {
    pub fn failed_cells(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }

    /// 0 when every cell succeeded, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        u8::from(self.failed_cells() > 0 || self.run_error.is_some())
    }
}

/// Formats a metric, replacing non-finite values and magnitudes above the
/// divergence cutoff by [`DIVERGED`].
pub fn format_value(v: f64) -> String {
    if !v.is_finite() || v.abs() > DIVERGENCE_CUTOFF {
        DIVERGED.to_string()
    } else {
        format!("{v:?}")
    }
}

struct Row {
    step: u64,
    metric: &'static str,
    value: f64,
}

/// Everything a cell needs besides its own coordinates.
struct Prepared {
    mdp: Mdp,
    /// Fixed policies for the evaluate, verify and variance modes.
    pi: Option<Policy>,
    mu: Option<Policy>,
    target: Option<PolicySchedule>,
    behavior: Option<PolicySchedule>,
}

fn setup_error(what: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError::io(format!("{what}: {e}"))
}

pub fn build_mdp(source: &MdpSource) -> Result<(Mdp, Option<(Policy, Policy)>), ConfigError> {
    match source {
        MdpSource::Chain { length, gamma } => Ok((generate_chain(*length, *gamma).map_err(|e| setup_error("chain", e))?, None)),
        MdpSource::Garnet(p) => Ok((generate_garnet(p).map_err(|e| setup_error("garnet", e))?, None)),
        MdpSource::File(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::io(format!("cannot read MDP file {}: {e}", path.display())))?;
            let mdp = Mdp::parse(&text).map_err(|e| setup_error(&format!("MDP file {}", path.display()), e))?;
            Ok((mdp, None))
        }
        MdpSource::Divergence { termination } => {
            let d = qpi_divergence_instance(*termination).map_err(|e| setup_error("divergence instance", e))?;
            Ok((d.mdp, Some((d.pi, d.mu))))
        }
    }
}

fn base_policy(base: &BasePolicy, mdp: &Mdp) -> Policy {
    match base {
        BasePolicy::Uniform => Policy::uniform(mdp.n_states(), mdp.n_actions()),
        BasePolicy::Random { seed } => random_policy(mdp.n_states(), mdp.n_actions(), &mut SplitMix64::new(*seed)),
    }
}

/// A fixed policy; schedule kinds are evaluated at `k = 1` against `Q*`.
fn fixed_policy(
    spec: &PolicySpec,
    mdp: &Mdp,
    instance: Option<&Policy>,
    q_star: &mut Option<QFunction>,
) -> retrace_core::Result<Policy> {
    let mut star = || -> retrace_core::Result<QFunction> {
        if q_star.is_none() {
            *q_star = Some(exact_q_star(mdp, Q_STAR_TOL)?);
        }
        Ok(q_star.clone().expect("just computed"))
    };
    let policy = match spec {
        PolicySpec::Uniform => Policy::uniform(mdp.n_states(), mdp.n_actions()),
        PolicySpec::Random { seed } => random_policy(mdp.n_states(), mdp.n_actions(), &mut SplitMix64::new(*seed)),
        PolicySpec::Rows(rows) => Policy::from_rows(rows)?,
        PolicySpec::Instance => instance.cloned().expect("validated at parse time"),
        PolicySpec::Greedy => PolicySchedule::greedy().policy(&star()?, 1)?,
        PolicySpec::EpsilonGreedy(seq) => PolicySchedule::epsilon_greedy(*seq)?.policy(&star()?, 1)?,
        PolicySpec::Softmax(seq) => PolicySchedule::softmax(*seq)?.policy(&star()?, 1)?,
        PolicySpec::Mixture { base, eps_mix } => mixture_behavior(&star()?, &base_policy(base, mdp), *eps_mix)?,
    };
    policy.check_dims(mdp)?;
    Ok(policy)
}

fn schedule(spec: &PolicySpec, mdp: &Mdp, instance: Option<&Policy>) -> retrace_core::Result<PolicySchedule> {
    Ok(match spec {
        PolicySpec::Greedy => PolicySchedule::greedy(),
        PolicySpec::EpsilonGreedy(seq) => PolicySchedule::epsilon_greedy(*seq)?,
        PolicySpec::Softmax(seq) => PolicySchedule::softmax(*seq)?,
        PolicySpec::Mixture { base, eps_mix } => PolicySchedule::mixture(base_policy(base, mdp), *eps_mix)?,
        fixed => PolicySchedule::Fixed(fixed_policy(fixed, mdp, instance, &mut None)?),
    })
}

fn prepare(config: &ExperimentConfig, mode: Mode) -> Result<Prepared, ConfigError> {
    let (mdp, instance) = build_mdp(&config.mdp)?;
    let (inst_pi, inst_mu) = match &instance {
        Some((p, m)) => (Some(p), Some(m)),
        None => (None, None),
    };
    if mode == Mode::Control {
        let target = schedule(&config.target, &mdp, inst_pi).map_err(|e| setup_error("[target]", e))?;
        let behavior = schedule(&config.behavior, &mdp, inst_mu).map_err(|e| setup_error("[behavior]", e))?;
        return Ok(Prepared {
            mdp,
            pi: None,
            mu: None,
            target: Some(target),
            behavior: Some(behavior),
        });
    }
    let mut q_star = None;
    let pi = fixed_policy(&config.target, &mdp, inst_pi, &mut q_star).map_err(|e| setup_error("[target]", e))?;
    let mu = fixed_policy(&config.behavior, &mdp, inst_mu, &mut q_star).map_err(|e| setup_error("[behavior]", e))?;
    Ok(Prepared {
        mdp,
        pi: Some(pi),
        mu: Some(mu),
        target: None,
        behavior: None,
    })
}

/// Cells in declaration order: families, then lambdas, then seeds.
pub fn cells(config: &ExperimentConfig, seed_offset: u64) -> Vec<Cell> {
    let mut out = Vec::new();
    for &family in &config.families {
        for &lambda in &config.lambdas {
            for &seed in &config.seeds {
                out.push(Cell {
                    family,
                    lambda,
                    seed: seed.wrapping_add(seed_offset),
                });
            }
        }
    }
    out
}

fn random_q(mdp: &Mdp, seed: u64) -> retrace_core::Result<QFunction> {
    let mut rng = SplitMix64::new(seed);
    let values = (0..mdp.n_pairs()).map(|_| rng.uniform_in(-Q0_RANGE, Q0_RANGE)).collect();
    QFunction::new(mdp.n_states(), mdp.n_actions(), values)
}

fn evaluate_cell(config: &ExperimentConfig, prep: &Prepared, spec: &TraceSpec, seed: u64) -> retrace_core::Result<Vec<Row>> {
    let (mdp, pi, mu) = (&prep.mdp, prep.pi.as_ref().unwrap(), prep.mu.as_ref().unwrap());
    let q_pi = exact_q_pi(mdp, pi)?;
    let mut q = random_q(mdp, seed)?;
    let markov = if spec.is_markovian() {
        Some(ExpectedOperator::new(mdp, spec, pi, mu)?)
    } else {
        None
    };
    let horizon = default_horizon(mdp.gamma());
    let mut rows = Vec::with_capacity(config.iterations + 1);
    for k in 0..=config.iterations {
        let err = q.sup_distance(&q_pi);
        rows.push(Row {
            step: k as u64,
            metric: "err_q_pi",
            value: err,
        });
        if k == config.iterations || !(err <= DIVERGENCE_CUTOFF) {
            break;
        }
        q = match &markov {
            Some(op) => op.apply(&q)?,
            None => apply_expected_operator_nonmarkov(mdp, spec, pi, mu, &q, horizon)?.q,
        };
    }
    Ok(rows)
}

fn control_cell(config: &ExperimentConfig, prep: &Prepared, spec: &TraceSpec, seed: u64) -> retrace_core::Result<Vec<Row>> {
    let mut cc = ControlConfig::new(
        *spec,
        prep.target.clone().unwrap(),
        prep.behavior.clone().unwrap(),
        config.episodes,
        seed,
    );
    cc.alpha0 = config.alpha0;
    cc.exponent = config.exponent;
    cc.max_len = config.max_len;
    cc.log_every = config.log_every;
    let record = run_control(&prep.mdp, &cc)?;
    let mut rows = Vec::with_capacity(3 * record.entries.len() + 1);
    for e in &record.entries {
        rows.push(Row { step: e.episode, metric: "err_q_star", value: e.err_q_star });
        rows.push(Row { step: e.episode, metric: "err_q_pi", value: e.err_q_pi });
        rows.push(Row { step: e.episode, metric: "q_norm", value: e.q_norm });
    }
    let last = record.final_entry();
    let rel = if record.diverged { f64::INFINITY } else { record.final_relative_error() };
    rows.push(Row { step: last.episode, metric: "rel_err_q_star", value: rel });
    Ok(rows)
}

fn verify_cell(config: &ExperimentConfig, prep: &Prepared, spec: &TraceSpec, seed: u64) -> retrace_core::Result<Vec<Row>> {
    let (mdp, pi, mu) = (&prep.mdp, prep.pi.as_ref().unwrap(), prep.mu.as_ref().unwrap());
    let mut rows = Vec::new();
    let mut push = |metric, value| rows.push(Row { step: 0, metric, value });
    let diag = contraction_diagnostics(mdp, spec, pi, mu, default_horizon(mdp.gamma()))?;
    push("max_eta", diag.max_eta);
    if spec.is_markovian() && satisfies_ratio_bound(spec, pi, mu) {
        let check = verify_contraction(mdp, spec, pi, mu, config.verify_samples, seed)?;
        push("contraction_ratio", check.max_ratio);
    }
    if spec.family() == TraceFamily::QPiLambda {
        push("spectral_radius", spectral_radius_qpi(mdp, spec.lambda(), pi, mu)?.radius);
    }
    push("offpolicyness", offpolicyness(pi, mu)?);
    push("commutation_defect", commutation_defect(mdp, pi, mu)?);
    if mdp.gamma() > 0.0 {
        let safety = qpi_lambda_safety(pi, mu, mdp.gamma())?;
        if safety.is_finite() {
            push("qpi_safe_lambda", safety);
        }
    }
    Ok(rows)
}

fn variance_cell(config: &ExperimentConfig, prep: &Prepared, spec: &TraceSpec, seed: u64) -> retrace_core::Result<Vec<Row>> {
    let (mdp, pi, mu) = (&prep.mdp, prep.pi.as_ref().unwrap(), prep.mu.as_ref().unwrap());
    let r = trace_product_variance(mdp, spec, pi, mu, config.variance_samples, config.variance_horizon, seed)?;
    let mut rows = vec![
        Row { step: 0, metric: "mean", value: r.mean },
        Row { step: 0, metric: "variance", value: r.variance },
        Row { step: 0, metric: "mean_se", value: r.mean_se },
        Row { step: 0, metric: "variance_se", value: r.variance_se },
    ];
    if let Some(v) = r.per_step_variance {
        rows.push(Row { step: 0, metric: "per_step_variance", value: v });
    }
    Ok(rows)
}

fn run_cell(config: &ExperimentConfig, mode: Mode, prep: &Prepared, cell: &Cell) -> Result<Vec<Row>, String> {
    let spec = TraceSpec::new(cell.family, cell.lambda).map_err(|e| e.to_string())?;
    let result = match mode {
        Mode::Evaluate => evaluate_cell(config, prep, &spec, cell.seed),
        Mode::Control => control_cell(config, prep, &spec, cell.seed),
        Mode::Verify => verify_cell(config, prep, &spec, cell.seed),
        Mode::Variance => variance_cell(config, prep, &spec, cell.seed),
        Mode::Scores => unreachable!("scores mode has no cells"),
    };
    result.map_err(|e| e.to_string())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn manifest(
    config: &ExperimentConfig,
    mode: Mode,
    source_text: &str,
    opts: &RunOptions,
    outcomes: &[CellOutcome],
    run_error: Option<&str>,
) -> String {
    let seeds: Vec<String> = config.seeds.iter().map(|s| s.wrapping_add(opts.seed_offset).to_string()).collect();
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut m = String::new();
    let _ = writeln!(m, "name = {}", config.name);
    let _ = writeln!(m, "mode = {mode}");
    let _ = writeln!(m, "config_sha256 = {}", hex(&Sha256::digest(source_text.as_bytes())));
    let _ = writeln!(m, "version = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(m, "seeds = {}", seeds.join(","));
    let _ = writeln!(m, "seed_offset = {}", opts.seed_offset);
    let _ = writeln!(m, "timestamp = {timestamp}");
    let _ = writeln!(m, "cells = {}", outcomes.len());
    for o in outcomes {
        let status = match &o.error {
            None => format!("ok rows={}", o.rows),
            Some(e) => format!("failed: {e}"),
        };
        let _ = writeln!(m, "cell = {},{},{} {status}", o.cell.family, o.cell.lambda, o.cell.seed);
    }
    if let Some(e) = run_error {
        let _ = writeln!(m, "error = {e}");
    }
    m
}

/// Computes `f` and `z` from a score CSV.
pub fn score_files(input: &Path) -> Result<(String, String), String> {
    let text = std::fs::read_to_string(input).map_err(|e| format!("cannot read {}: {e}", input.display()))?;
    let table = ScoreTable::parse_csv(&text).map_err(|e| format!("{}: {e}", input.display()))?;
    let report = inter_algorithm_scores(&table);
    Ok((report.f_csv(), report.z_csv()))
}

/// Runs every cell of `config` and writes `results.csv` (or the score
/// files) plus `manifest.txt`. `source_text` is hashed into the manifest.
pub fn run_experiment(config: &ExperimentConfig, source_text: &str, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let mode = opts.mode.unwrap_or(config.mode);
    if mode != config.mode && config.mode == Mode::Scores {
        return Err(ConfigError::io(format!("a scores config cannot run in {mode} mode")).into());
    }
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| config.output_dir.clone());

    if mode == Mode::Scores {
        let input = config.scores_input.as_ref().expect("scores mode has an input");
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
        let run_error = match score_files(input) {
            Ok((f, z)) => {
                write_file(&out_dir.join(SCORES_F_FILE), &f)?;
                write_file(&out_dir.join(SCORES_Z_FILE), &z)?;
                None
            }
            Err(e) => {
                eprintln!("error: {e}");
                Some(e)
            }
        };
        write_file(
            &out_dir.join(MANIFEST_FILE),
            &manifest(config, mode, source_text, opts, &[], run_error.as_deref()),
        )?;
        return Ok(RunSummary {
            out_dir,
            outcomes: Vec::new(),
            run_error,
        });
    }

    let prep = prepare(config, mode)?;
    let grid = cells(config, opts.seed_offset);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Vec<Row>, String>> =
        pool.install(|| grid.par_iter().map(|c| run_cell(config, mode, &prep, c)).collect());

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let mut csv = String::from(RESULTS_HEADER);
    csv.push('\n');
    let mut outcomes = Vec::with_capacity(grid.len());
    for (cell, result) in grid.into_iter().zip(results) {
        match result {
            Ok(rows) => {
                for r in &rows {
                    let _ = writeln!(
                        csv,
                        "{},{},{},{},{},{}",
                        cell.family,
                        cell.lambda,
                        cell.seed,
                        r.step,
                        r.metric,
                        format_value(r.value)
                    );
                }
                outcomes.push(CellOutcome { cell, error: None, rows: rows.len() });
            }
            Err(e) => {
                eprintln!("cell {} lambda={} seed={} failed: {e}", cell.family, cell.lambda, cell.seed);
                outcomes.push(CellOutcome { cell, error: Some(e), rows: 0 });
            }
        }
    }
    write_file(&out_dir.join(RESULTS_FILE), &csv)?;
    write_file(&out_dir.join(MANIFEST_FILE), &manifest(config, mode, source_text, opts, &outcomes, None))?;
    Ok(RunSummary {
        out_dir,
        outcomes,
        run_error: None,
    })
}

/// Loads and runs a config file.
pub fn run_config_file(path: &Path, opts: &RunOptions) -> Result<RunSummary, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::io(format!("cannot read {}: {e}", path.display())))?;
    let config = ExperimentConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))?;
    run_experiment(&config, &text, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diverged_token() {
        assert_eq!(format_value(0.25), "0.25");
        assert_eq!(format_value(1e6), "1000000.0");
        assert_eq!(format_value(8e-15), "8e-15");
        assert_eq!(format_value(1.5e6), DIVERGED);
        assert_eq!(format_value(f64::NAN), DIVERGED);
        assert_eq!(format_value(f64::INFINITY), DIVERGED);
    }

    #[test]
    fn cell_order_is_declaration_order() {
        let text = "[experiment]\nmode = evaluate\nseeds = 1,0\n[mdp]\nsource = chain\n[trace]\nfamilies = tb, retrace\nlambdas = 1, 0.5\n";
        let c = ExperimentConfig::parse(text, Path::new(".")).unwrap();
        let cells = cells(&c, 10);
        let coords: Vec<(TraceFamily, f64, u64)> = cells.iter().map(|c| (c.family, c.lambda, c.seed)).collect();
        assert_eq!(coords[0], (TraceFamily::TreeBackup, 1.0, 11));
        assert_eq!(coords[1], (TraceFamily::TreeBackup, 1.0, 10));
        assert_eq!(coords[2], (TraceFamily::TreeBackup, 0.5, 11));
        assert_eq!(coords[7], (TraceFamily::Retrace, 0.5, 10));
    }

    #[test]
    fn hex_digest() {
        assert_eq!(
            hex(&Sha256::digest(b"abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
