//! SplitMix64, the only source of randomness in the crate.
//!
//! The stream is fully specified so that other implementations can
//! reproduce trajectories bit for bit:
//!
//! ```text
//! state  <- state + 0x9E3779B97F4A7C15            (wrapping)
//! z      <- state
//! z      <- (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (wrapping)
//! z      <- (z ^ (z >> 27)) * 0x94D049BB133111EB  (wrapping)
//! output <- z ^ (z >> 31)
//! ```
//!
//! Derived values:
//! - `uniform()` is `(next_u64() >> 11) * 2^-53`, in `[0, 1)`.
//! - `below(n)` is `floor(uniform() * n)`, clamped to `n - 1`.
//! - `categorical(p)` draws one `uniform()` and returns the first index
//!   whose running sum (in index order) exceeds it; if rounding leaves the
//!   draw above the total, the last index with positive mass is returned.
//! - `derive(master, i)` seeds an independent stream for block `i` with
//!   the first output of `SplitMix64::new(master ^ (i + 1) * 0xD1B54A32D192ED03)`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const BLOCK_MIX: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Seed for the `index`-th sub-stream of `master`.
    pub fn derive(master: u64, index: u64) -> Self {
        let mut mixer = Self::new(master ^ index.wrapping_add(1).wrapping_mul(BLOCK_MIX));
        Self::new(mixer.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Exponential(1) variate by inversion, `-ln(1 - u)`.
    pub fn exponential(&mut self) -> f64 {
        -(1.0 - self.uniform()).ln()
    }

    /// Inverse-CDF draw from a non-negative weight vector. Returns `None`
    /// when the weights carry no mass.
    pub fn categorical(&mut self, probs: &[f64]) -> Option<usize> {
        let last_positive = probs.iter().rposition(|&p| p > 0.0)?;
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            if u < acc {
                return Some(i);
            }
        }
        Some(last_positive)
    }
}
