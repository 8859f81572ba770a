//! Diagnostics built on the exact operators: contraction checks, spectral
//! radii, commutation defects, trace-product variance and inter-algorithm
//! score distributions.

mod contraction;
mod metrics;
mod scores;
mod spectral;
mod variance;

pub use contraction::{verify_contraction, ContractionCheck};
pub use metrics::{commutation_defect, offpolicyness, qpi_lambda_safety};
pub use scores::{inter_algorithm_scores, ScoreReport, ScoreTable, SCORE_GRID_POINTS};
pub use spectral::{spectral_radius, spectral_radius_qpi, SpectralEstimate, SpectralMethod};
pub use variance::{trace_product_variance, VarianceReport, VARIANCE_BLOCK};
