//! Transition matrices over flattened state-action pairs and the Bellman
//! family of operators built on them.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::policy::Policy;
use crate::qfunction::QFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `P^pi`, row-stochastic.
    PPi,
    /// `P^{c mu}`, sub-stochastic.
    PCMu,
    /// `P^{pi ∧ mu}`, sub-stochastic.
    PPiAndMu,
    /// Anything assembled from the above (e.g. the control matrix `A`).
    Derived,
}

/// A square matrix acting on Q-functions, indexed by `x * n_actions + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperatorMatrix {
    pub entries: DMatrix<f64>,
    pub kind: OperatorKind,
}

impl LinearOperatorMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Operator norm induced by the sup norm: the largest absolute row sum.
    pub fn sup_norm(&self) -> f64 {
        matrix_sup_norm(&self.entries)
    }

    pub fn apply(&self, q: &QFunction) -> Result<QFunction> {
        if q.values().len() != self.dim() {
            return Err(Error::Dimension(format!(
                "operator of size {} applied to Q with {} entries",
                self.dim(),
                q.values().len()
            )));
        }
        QFunction::from_vector(q.n_states(), q.n_actions(), &(&self.entries * q.to_vector()))
    }

    /// Checks the structural invariant of this matrix kind.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let bound = match self.kind {
            OperatorKind::Derived => return Ok(()),
            _ => 1.0 + tol,
        };
        if self.min_entry() < 0.0 {
            return Err(Error::Numerical(format!(
                "{:?} matrix has negative entry {}",
                self.kind,
                self.min_entry()
            )));
        }
        for (i, s) in self.row_sums().into_iter().enumerate() {
            let bad = match self.kind {
                OperatorKind::PPi => (s - 1.0).abs() > tol,
                _ => s > bound,
            };
            if bad {
                return Err(Error::Numerical(format!(
                    "{:?} matrix row {i} sums to {s}",
                    self.kind
                )));
            }
        }
        Ok(())
    }
}

pub fn matrix_sup_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Builds `M[(x,a),(x',a')] = P(x'|x,a) * w(x', a')` for a per-pair weight.
pub(crate) fn weighted_transition_matrix(mdp: &Mdp, weight: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    let n = mdp.n_pairs();
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let w: Vec<f64> = (0..ns)
        .flat_map(|y| (0..na).map(move |b| (y, b)))
        .map(|(y, b)| weight(y, b))
        .collect();
    let mut m = DMatrix::zeros(n, n);
    for x in 0..ns {
        for a in 0..na {
            let row = mdp.pair(x, a);
            for (y, &p) in mdp.next_state_probs(x, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for b in 0..na {
                    m[(row, y * na + b)] = p * w[y * na + b];
                }
            }
        }
    }
    m
}

/// `P^pi`: `M[(x,a),(x',a')] = P(x'|x,a) * pi(a'|x')`.
pub fn transition_operator(mdp: &Mdp, pi: &Policy) -> Result<LinearOperatorMatrix> {
    pi.check_dims(mdp)?;
    Ok(LinearOperatorMatrix {
        entries: weighted_transition_matrix(mdp, |y, b| pi.prob(y, b)),
        kind: OperatorKind::PPi,
    })
}

/// `P^{pi ∧ mu}` with the pointwise minimum of the two action distributions.
pub fn min_transition_operator(mdp: &Mdp, pi: &Policy, mu: &Policy) -> Result<LinearOperatorMatrix> {
    pi.check_dims(mdp)?;
    mu.check_dims(mdp)?;
    Ok(LinearOperatorMatrix {
        entries: weighted_transition_matrix(mdp, |y, b| pi.prob(y, b).min(mu.prob(y, b))),
        kind: OperatorKind::PPiAndMu,
    })
}

/// `E_pi Q(x', .)` for every next state `x'`.
fn state_values(q: &QFunction, pi: &Policy) -> Vec<f64> {
    (0..q.n_states()).map(|x| q.expectation(x, pi)).collect()
}

fn backup(mdp: &Mdp, next_values: &[f64]) -> Vec<f64> {
    let g = mdp.gamma();
    (0..mdp.n_states())
        .flat_map(|x| (0..mdp.n_actions()).map(move |a| (x, a)))
        .map(|(x, a)| {
            let future: f64 = mdp
                .next_state_probs(x, a)
                .iter()
                .zip(next_values)
                .map(|(p, v)| p * v)
                .sum();
            mdp.reward(x, a) + g * future
        })
        .collect()
}

/// `T^pi Q = r + gamma P^pi Q`.
pub fn bellman_operator(mdp: &Mdp, pi: &Policy, q: &QFunction) -> Result<QFunction> {
    pi.check_dims(mdp)?;
    q.check_dims(mdp)?;
    let v = state_values(q, pi);
    QFunction::new(mdp.n_states(), mdp.n_actions(), backup(mdp, &v))
}

/// `T Q = r + gamma * sum_x' P(x'|x,a) max_a' Q(x', a')`.
pub fn bellman_optimality_operator(mdp: &Mdp, q: &QFunction) -> Result<QFunction> {
    q.check_dims(mdp)?;
    let v: Vec<f64> = (0..mdp.n_states()).map(|x| q.max_at(x)).collect();
    QFunction::new(mdp.n_states(), mdp.n_actions(), backup(mdp, &v))
}

/// Factorised `I - scale * P`, reused across right-hand sides.
pub struct ShiftedSolver {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    system: DMatrix<f64>,
}

impl ShiftedSolver {
    pub fn new(p: &DMatrix<f64>, scale: f64) -> Result<Self> {
        let n = p.nrows();
        let system = DMatrix::identity(n, n) - p * scale;
        let lu = system.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::Numerical(format!(
                "I - {scale} P is singular (dimension {n})"
            )));
        }
        Ok(Self { lu, system })
    }

    /// Solves `(I - scale P) y = rhs`, guarding the residual.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let y = self
            .lu
            .solve(rhs)
            .ok_or_else(|| Error::Numerical("LU solve failed".into()))?;
        let residual = (&self.system * &y - rhs).amax();
        let scale = 1.0 + rhs.amax();
        if !residual.is_finite() || residual > 1e-10 * scale {
            return Err(Error::Numerical(format!(
                "linear solve residual {residual:e} too large (condition estimate {:e})",
                self.condition_estimate()
            )));
        }
        Ok(y)
    }

    /// `||M||_inf * ||M^-1||_inf`.
    pub fn condition_estimate(&self) -> f64 {
        match self.lu.try_inverse() {
            Some(inv) => matrix_sup_norm(&self.system) * matrix_sup_norm(&inv),
            None => f64::INFINITY,
        }
    }

    /// `(I - scale P)^-1` as a dense matrix.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        self.lu
            .try_inverse()
            .ok_or_else(|| Error::Numerical("matrix inverse failed".into()))
    }
}

/// `T^pi_lambda Q = Q + (I - lambda gamma P^pi)^-1 (T^pi Q - Q)`.
pub fn lambda_return_operator(mdp: &Mdp, pi: &Policy, q: &QFunction, lambda: f64) -> Result<QFunction> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda {lambda} outside [0, 1]")));
    }
    let p = transition_operator(mdp, pi)?;
    let residual = bellman_operator(mdp, pi, q)?.to_vector() - q.to_vector();
    let solver = ShiftedSolver::new(&p.entries, lambda * mdp.gamma())?;
    let step = solver.solve(&residual)?;
    QFunction::from_vector(mdp.n_states(), mdp.n_actions(), &(q.to_vector() + step))
}
