use nalgebra::{DMatrix, DVector, Schur};

use crate::error::Result;
use crate::mdp::Mdp;
use crate::policy::Policy;
use crate::rng::SplitMix64;
use crate::traces::{control_matrix_a, TraceSpec};

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERATIONS: usize = 10_000;
/// Largest dimension handed to the Schur fallback.
pub const SCHUR_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    PowerIteration,
    Schur,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub radius: f64,
    /// False when neither method settled; `radius` is then the last
    /// power-iteration estimate.
    pub converged: bool,
    pub method: SpectralMethod,
    pub iterations: usize,
}

/// Dominant eigenvalue modulus of a square matrix.
///
/// Power iteration in the sup norm runs first. Its estimate is the geometric
/// mean of two successive growth factors, which also settles when the
/// dominant eigenvalues are a `+r, -r` pair. Complex or nearly tied
/// dominant eigenvalues stall it; matrices up to 64x64 then fall back to
/// the moduli of the real Schur form's eigenvalues.
pub fn spectral_radius(m: &DMatrix<f64>, tol: f64, max_iterations: usize) -> SpectralEstimate {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    let n = m.nrows();
    if n == 0 {
        return SpectralEstimate {
            radius: 0.0,
            converged: true,
            method: SpectralMethod::PowerIteration,
            iterations: 0,
        };
    }
    let mut rng = SplitMix64::new(0x5eed);
    let mut x = DVector::from_fn(n, |_, _| 1.0 + rng.uniform());
    x /= x.amax();
    let mut prev_growth = f64::NAN;
    let mut prev_estimate = f64::NAN;
    let mut stable = 0;
    let mut estimate = f64::NAN;
    for it in 1..=max_iterations {
        let y = m * &x;
        let growth = y.amax();
        if growth == 0.0 || !growth.is_finite() {
            return SpectralEstimate {
                radius: if growth == 0.0 { 0.0 } else { f64::INFINITY },
                converged: growth == 0.0,
                method: SpectralMethod::PowerIteration,
                iterations: it,
            };
        }
        x = y / growth;
        if prev_growth.is_finite() {
            estimate = (growth * prev_growth).sqrt();
            if (estimate - prev_estimate).abs() <= tol * estimate {
                stable += 1;
                if stable >= 3 {
                    return SpectralEstimate {
                        radius: estimate,
                        converged: true,
                        method: SpectralMethod::PowerIteration,
                        iterations: it,
                    };
                }
            } else {
                stable = 0;
            }
            prev_estimate = estimate;
        }
        prev_growth = growth;
    }
    if n <= SCHUR_MAX_DIM {
        if let Some(schur) = Schur::try_new(m.clone(), f64::EPSILON, max_iterations) {
            let radius = schur.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
            return SpectralEstimate {
                radius,
                converged: true,
                method: SpectralMethod::Schur,
                iterations: max_iterations,
            };
        }
    }
    SpectralEstimate {
        radius: estimate,
        converged: false,
        method: SpectralMethod::PowerIteration,
        iterations: max_iterations,
    }
}

/// Spectral radius of `gamma (I - lambda gamma P^mu)^-1 (P^pi - lambda P^mu)`,
/// the iteration matrix of the expected `Q^pi(lambda)` operator around
/// `Q^pi`. A value above 1 means the exact iteration diverges from almost
/// every start.
pub fn spectral_radius_qpi(mdp: &Mdp, lambda: f64, pi: &Policy, mu: &Policy) -> Result<SpectralEstimate> {
    let spec = TraceSpec::qpi(lambda)?;
    let a = control_matrix_a(mdp, &spec, pi, mu)?;
    Ok(spectral_radius(&a.entries, POWER_TOL, POWER_MAX_ITERATIONS))
}
