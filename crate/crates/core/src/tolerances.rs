//! Numerical tolerances shared across the crate.

/// Every tolerance constant used when validating models and kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Slack allowed on DP constraints and LP feasibility residuals.
    pub feasibility: f64,
    /// Column sums of a likelihood matrix must be within this of 1.
    pub stochasticity: f64,
    /// Column sums of an estimator kernel must be within this of 1.
    pub kernel_column_sum: f64,
    /// The prior must sum to 1 within this.
    pub prior_sum: f64,
    /// Kernel entries below `-kernel_negative` are rejected rather than clamped.
    pub kernel_negative: f64,
    /// Largest negative round-off in raw solver output that extraction will clamp.
    pub max_clamp: f64,
    /// Relative tolerance on equal spacing of uniform grids.
    pub grid_spacing: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        feasibility: 1e-8,
        stochasticity: 1e-9,
        kernel_column_sum: 1e-8,
        prior_sum: 1e-12,
        kernel_negative: 1e-10,
        max_clamp: 1e-8,
        grid_spacing: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
