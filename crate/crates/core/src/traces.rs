//! Trace-coefficient families and the expected return-based operator
//!
//! ```text
//! R Q(x,a) = Q(x,a) + E_mu[ sum_t gamma^t (c_1 ... c_t) (r_t + gamma E_pi Q(x_{t+1}, .) - Q(x_t, a_t)) ]
//! ```
//!
//! For Markovian traces `c_s = c(a_s, x_s)` this is
//! `R Q = Q + (I - gamma P^{c mu})^-1 (T^pi Q - Q)`, solved densely here.
//! The history-dependent capped family lives in [`crate::enumeration`].

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::operators::{
    bellman_operator, transition_operator, weighted_transition_matrix, LinearOperatorMatrix,
    OperatorKind, ShiftedSolver,
};
use crate::policy::Policy;
use crate::qfunction::QFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceFamily {
    /// `c = pi / mu`
    ImportanceSampling,
    /// `c = lambda`
    QPiLambda,
    /// `c = lambda * pi`
    TreeBackup,
    /// `c = lambda * min(1, pi / mu)`
    Retrace,
    /// `c_s = lambda * min(1 / (c_1 ... c_{s-1}), pi / mu)`, history dependent.
    CappedNonMarkov,
}

impl TraceFamily {
    pub const ALL: [TraceFamily; 5] = [
        TraceFamily::ImportanceSampling,
        TraceFamily::QPiLambda,
        TraceFamily::TreeBackup,
        TraceFamily::Retrace,
        TraceFamily::CappedNonMarkov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TraceFamily::ImportanceSampling => "importance_sampling",
            TraceFamily::QPiLambda => "qpi_lambda",
            TraceFamily::TreeBackup => "tree_backup",
            TraceFamily::Retrace => "retrace",
            TraceFamily::CappedNonMarkov => "capped_non_markov",
        }
    }
}

impl fmt::Display for TraceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TraceFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "importance_sampling" | "is" => Ok(TraceFamily::ImportanceSampling),
            "qpi_lambda" | "qpi" => Ok(TraceFamily::QPiLambda),
            "tree_backup" | "tb" => Ok(TraceFamily::TreeBackup),
            "retrace" => Ok(TraceFamily::Retrace),
            "capped_non_markov" | "capped" => Ok(TraceFamily::CappedNonMarkov),
            other => Err(Error::Domain(format!("unknown trace family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSpec {
    family: TraceFamily,
    lambda: f64,
}

impl TraceSpec {
    pub fn new(family: TraceFamily, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self { family, lambda })
    }

    pub fn importance_sampling() -> Self {
        Self {
            family: TraceFamily::ImportanceSampling,
            lambda: 1.0,
        }
    }

    pub fn retrace(lambda: f64) -> Result<Self> {
        Self::new(TraceFamily::Retrace, lambda)
    }

    pub fn tree_backup(lambda: f64) -> Result<Self> {
        Self::new(TraceFamily::TreeBackup, lambda)
    }

    pub fn qpi(lambda: f64) -> Result<Self> {
        Self::new(TraceFamily::QPiLambda, lambda)
    }

    pub fn capped(lambda: f64) -> Result<Self> {
        Self::new(TraceFamily::CappedNonMarkov, lambda)
    }

    pub fn family(&self) -> TraceFamily {
        self.family
    }

    /// Ignored by importance sampling.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_markovian(&self) -> bool {
        self.family != TraceFamily::CappedNonMarkov
    }

    pub(crate) fn require_markovian(&self) -> Result<()> {
        if self.is_markovian() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "{} traces depend on history; use the enumeration path",
                self.family
            )))
        }
    }

    /// `mu * c` for a Markovian family, computed without dividing by `mu`
    /// so that e.g. importance sampling returns `pi` exactly.
    pub(crate) fn weighted(&self, pi: f64, mu: f64) -> f64 {
        let l = self.lambda;
        match self.family {
            TraceFamily::ImportanceSampling => pi,
            TraceFamily::QPiLambda => l * mu,
            TraceFamily::TreeBackup => l * pi * mu,
            TraceFamily::Retrace | TraceFamily::CappedNonMarkov => l * pi.min(mu),
        }
    }
}

/// The trace `c_s` for one step. `running_product` is `c_1 ... c_{s-1}`
/// (1 for the first step) and only matters for the capped family.
pub fn trace_coefficient(spec: &TraceSpec, pi_prob: f64, mu_prob: f64, running_product: f64) -> Result<f64> {
    if !(mu_prob > 0.0) {
        return Err(Error::Domain(format!(
            "behaviour probability {mu_prob} of a taken action must be positive"
        )));
    }
    let l = spec.lambda;
    let ratio = pi_prob / mu_prob;
    Ok(match spec.family {
        TraceFamily::ImportanceSampling => ratio,
        TraceFamily::QPiLambda => l,
        TraceFamily::TreeBackup => l * pi_prob,
        TraceFamily::Retrace => l * ratio.min(1.0),
        TraceFamily::CappedNonMarkov => {
            if running_product < 0.0 {
                return Err(Error::Domain("running trace product must be non-negative".into()));
            }
            // 1/0 = inf leaves the ratio as the binding term.
            l * (1.0 / running_product).min(ratio)
        }
    })
}

/// Whether `0 <= c(a, x) <= pi(a|x) / mu(a|x)` holds for every pair with
/// `mu(a|x) > 0`, the validity condition for the gamma-contraction.
pub fn satisfies_ratio_bound(spec: &TraceSpec, pi: &Policy, mu: &Policy) -> bool {
    match spec.family {
        TraceFamily::ImportanceSampling | TraceFamily::TreeBackup | TraceFamily::Retrace => true,
        TraceFamily::CappedNonMarkov => true,
        TraceFamily::QPiLambda => pi
            .probs()
            .iter()
            .zip(mu.probs())
            .all(|(&p, &m)| m == 0.0 || spec.lambda * m <= p),
    }
}

fn check_support(spec: &TraceSpec, pi: &Policy, mu: &Policy) -> Result<()> {
    if spec.family != TraceFamily::ImportanceSampling {
        return Ok(());
    }
    let na = pi.n_actions();
    for (i, (&p, &m)) in pi.probs().iter().zip(mu.probs()).enumerate() {
        if p > 0.0 && m == 0.0 {
            return Err(Error::Domain(format!(
                "importance sampling needs mu(a|x) > 0 where pi(a|x) > 0; violated at ({}, {})",
                i / na,
                i % na
            )));
        }
    }
    Ok(())
}

/// `P^{c mu}`: `M[(x,a),(x',a')] = P(x'|x,a) mu(a'|x') c(a', x')`.
pub fn trace_matrix(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy) -> Result<LinearOperatorMatrix> {
    spec.require_markovian()?;
    pi.check_dims(mdp)?;
    mu.check_dims(mdp)?;
    check_support(spec, pi, mu)?;
    Ok(LinearOperatorMatrix {
        entries: weighted_transition_matrix(mdp, |y, b| spec.weighted(pi.prob(y, b), mu.prob(y, b))),
        kind: OperatorKind::PCMu,
    })
}

/// Reusable pieces of `R` for one `(mdp, spec, pi, mu)`: the factorised
/// `I - gamma P^{c mu}` and `P^pi`.
pub struct ExpectedOperator<'a> {
    mdp: &'a Mdp,
    pi: &'a Policy,
    solver: ShiftedSolver,
    trace: LinearOperatorMatrix,
}

impl<'a> ExpectedOperator<'a> {
    pub fn new(mdp: &'a Mdp, spec: &TraceSpec, pi: &'a Policy, mu: &Policy) -> Result<Self> {
        let trace = trace_matrix(mdp, spec, pi, mu)?;
        let solver = ShiftedSolver::new(&trace.entries, mdp.gamma())?;
        Ok(Self {
            mdp,
            pi,
            solver,
            trace,
        })
    }

    pub fn apply(&self, q: &QFunction) -> Result<QFunction> {
        let residual = bellman_operator(self.mdp, self.pi, q)?.to_vector() - q.to_vector();
        let step = self.solver.solve(&residual)?;
        QFunction::from_vector(q.n_states(), q.n_actions(), &(q.to_vector() + step))
    }

    /// `C(x,a) = E_mu[sum_t gamma^t c_1 ... c_t] = ((I - gamma P^{c mu})^-1 e)(x,a)`.
    pub fn discounted_trace_mass(&self) -> Result<DVector<f64>> {
        self.solver.solve(&DVector::from_element(self.trace.dim(), 1.0))
    }

    pub fn trace_matrix(&self) -> &LinearOperatorMatrix {
        &self.trace
    }

    pub(crate) fn solver(&self) -> &ShiftedSolver {
        &self.solver
    }
}

/// Exact `R Q` for a Markovian trace family.
pub fn apply_expected_operator(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    q: &QFunction,
) -> Result<QFunction> {
    q.check_dims(mdp)?;
    ExpectedOperator::new(mdp, spec, pi, mu)?.apply(q)
}

/// Per-pair contraction coefficients `eta(x,a)` of `R` around `Q^pi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub eta: QFunction,
    pub max_eta: f64,
    /// Enumeration horizon; 0 when `eta` is exact.
    pub truncation_horizon: usize,
    /// Upper bound on how much the reported `eta` can exceed the exact one.
    pub truncation_bound: f64,
}

/// `eta(x,a) = 1 - (1 - gamma) E_mu[sum_t gamma^t c_1 ... c_t]`.
///
/// Markovian families are solved in closed form and `horizon` is ignored.
/// The capped family is enumerated to `horizon`; the omitted tail is at
/// most `gamma^horizon`, reported as `truncation_bound`.
pub fn contraction_diagnostics(
    mdp: &Mdp,
    spec: &TraceSpec,
    pi: &Policy,
    mu: &Policy,
    horizon: usize,
) -> Result<ContractionReport> {
    let g = mdp.gamma();
    let (mass, truncation_horizon, truncation_bound) = if spec.is_markovian() {
        let op = ExpectedOperator::new(mdp, spec, pi, mu)?;
        (op.discounted_trace_mass()?.as_slice().to_vec(), 0, 0.0)
    } else {
        let mass = crate::enumeration::discounted_trace_mass(mdp, spec, pi, mu, horizon)?;
        (mass, horizon, g.powi(horizon as i32))
    };
    let eta: Vec<f64> = mass.iter().map(|c| 1.0 - (1.0 - g) * c).collect();
    let max_eta = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ContractionReport {
        eta: QFunction::new(mdp.n_states(), mdp.n_actions(), eta)?,
        max_eta,
        truncation_horizon,
        truncation_bound,
    })
}

/// `A = gamma (I - gamma P^{c mu})^-1 (P^pi - P^{c mu})`.
///
/// For traces within the ratio bound `A` is non-negative with row sums at
/// most `gamma`. For `Q^pi(lambda)` it is the iteration matrix of the
/// expected operator around `Q^pi`, which may have spectral radius above 1.
pub fn control_matrix_a(mdp: &Mdp, spec: &TraceSpec, pi: &Policy, mu: &Policy) -> Result<LinearOperatorMatrix> {
    let op = ExpectedOperator::new(mdp, spec, pi, mu)?;
    let p_pi = transition_operator(mdp, pi)?;
    let diff: DMatrix<f64> = &p_pi.entries - &op.trace_matrix().entries;
    let inv = op.solver().inverse()?;
    Ok(LinearOperatorMatrix {
        entries: inv * diff * mdp.gamma(),
        kind: OperatorKind::Derived,
    })
}
