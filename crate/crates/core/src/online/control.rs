use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::qfunction::QFunction;
use crate::rng::SplitMix64;
use crate::solve::{exact_q_pi, exact_q_star};
use crate::traces::TraceSpec;

use super::schedule::{PolicySchedule, StepSizeSchedule};
use super::trajectory::{sample_trajectory, StartState, DEFAULT_MAX_LEN};
use super::update::every_visit_update;

/// Runs stop once `||Q||` exceeds this.
pub const DIVERGENCE_CUTOFF: f64 = 1e6;

const Q_STAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ControlConfig {
    pub spec: TraceSpec,
    pub target: PolicySchedule,
    pub behavior: PolicySchedule,
    pub alpha0: f64,
    pub exponent: f64,
    /// Initial estimate; zeros when absent.
    pub q0: Option<QFunction>,
    pub episodes: u64,
    pub seed: u64,
    pub max_len: usize,
    /// Log after every `log_every` episodes; the initial and final
    /// estimates are always logged.
    pub log_every: u64,
    pub start: StartState,
}

impl ControlConfig {
    pub fn new(spec: TraceSpec, target: PolicySchedule, behavior: PolicySchedule, episodes: u64, seed: u64) -> Self {
        Self {
            spec,
            target,
            behavior,
            alpha0: StepSizeSchedule::DEFAULT_ALPHA0,
            exponent: StepSizeSchedule::DEFAULT_EXPONENT,
            q0: None,
            episodes,
            seed,
            max_len: DEFAULT_MAX_LEN,
            log_every: 100,
            start: StartState::UniformNonAbsorbing,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogEntry {
    /// Episodes completed when the entry was taken.
    pub episode: u64,
    pub err_q_star: f64,
    /// Distance to `Q^pi` for the target policy of the next episode.
    pub err_q_pi: f64,
    pub q_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningRecord {
    pub entries: Vec<LogEntry>,
    pub diverged: bool,
    pub final_q: QFunction,
    pub q_star: QFunction,
}

impl LearningRecord {
    pub fn final_entry(&self) -> &LogEntry {
        self.entries.last().expect("record holds the initial entry")
    }

    /// Final `||Q - Q*|| / ||Q*||`, or the absolute error when `Q* = 0`.
    pub fn final_relative_error(&self) -> f64 {
        let norm = self.q_star.sup_norm();
        let err = self.final_entry().err_q_star;
        if norm > 0.0 {
            err / norm
        } else {
            err
        }
    }
}

/// Episodic control: for `k = 1..=episodes` derive `pi_k` and `mu_k` from the
/// schedules and the current estimate, sample one trajectory from `mu_k`
/// and apply [`every_visit_update`]. A single SplitMix64 stream seeded with
/// `config.seed` drives every trajectory of the run.
pub fn run_control(mdp: &Mdp, config: &ControlConfig) -> Result<LearningRecord> {
    config.spec.require_markovian()?;
    if config.log_every == 0 {
        return Err(Error::Domain("log_every must be at least 1".into()));
    }
    let mut q = match &config.q0 {
        Some(q0) => {
            q0.check_dims(mdp)?;
            pin_absorbing(mdp, q0.clone())
        }
        None => QFunction::zeros_for(mdp),
    };
    let q_star = exact_q_star(mdp, Q_STAR_TOL)?;
    let mut steps = StepSizeSchedule::new(config.alpha0, config.exponent, mdp.n_pairs())?;
    let mut rng = SplitMix64::new(config.seed);

    let mut entries = vec![log_entry(mdp, &config.target, &q, &q_star, 0)?];
    let mut diverged = false;
    for k in 1..=config.episodes {
        let pi = config.target.policy(&q, k)?;
        let mu = config.behavior.policy(&q, k)?;
        let traj = sample_trajectory(mdp, &mu, &mut rng, config.start, config.max_len)?;
        q = every_visit_update(mdp, &q, &traj, &config.spec, &pi, &mut steps)?;
        let blew_up = q.sup_norm() > DIVERGENCE_CUTOFF;
        if blew_up || k % config.log_every == 0 || k == config.episodes {
            entries.push(log_entry(mdp, &config.target, &q, &q_star, k)?);
        }
        if blew_up {
            diverged = true;
            break;
        }
    }
    Ok(LearningRecord {
        entries,
        diverged,
        final_q: q,
        q_star,
    })
}

fn pin_absorbing(mdp: &Mdp, mut q: QFunction) -> QFunction {
    for x in mdp.absorbing_states() {
        for a in 0..mdp.n_actions() {
            q.set(x, a, 0.0);
        }
    }
    q
}

fn log_entry(mdp: &Mdp, target: &PolicySchedule, q: &QFunction, q_star: &QFunction, episode: u64) -> Result<LogEntry> {
    let pi = target.policy(q, episode + 1)?;
    let q_pi = exact_q_pi(mdp, &pi)?;
    Ok(LogEntry {
        episode,
        err_q_star: q.sup_distance(q_star),
        err_q_pi: q.sup_distance(&q_pi),
        q_norm: q.sup_norm(),
    })
}
