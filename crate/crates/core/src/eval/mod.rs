//! Monte-Carlo evaluation, parameter sweeps and kernel export.

pub mod heatmap;
pub mod montecarlo;
pub mod sweep;

pub use heatmap::{export_heatmap, sidecar_path, write_heatmap_files, HeatmapMetadata};
pub use montecarlo::{mc_mse_kernel, mc_mse_lbapp, mc_mse_ubapp, McEstimate};
pub use sweep::{run_sweep, Method, Preset, SweepConfig, SweepResult, SweepRow};
