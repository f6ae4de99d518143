//! Kernel export for heat-map plots.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bernoulli::{build_model, BernoulliModelSpec};
use crate::error::{Error, Result};
use crate::lp::SolveOptions;
use crate::ubapp::{solve_ubapp, write_kernel_csv_file, UbappSolveReport};

/// Contents of the JSON file written next to an exported kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapMetadata {
    pub epsilon: f64,
    pub trials: usize,
    pub grid_size: usize,
    pub solver_status: String,
    pub iterations: usize,
    pub mse: f64,
    pub dp_residual: f64,
}

/// `kernel.csv` → `kernel.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Writes the kernel CSV of a solved Bernoulli instance to `path` and its
/// metadata to [`sidecar_path`]`(path)`.
pub fn write_heatmap_files(
    spec: &BernoulliModelSpec,
    epsilon: f64,
    report: &UbappSolveReport,
    path: impl AsRef<Path>,
) -> Result<HeatmapMetadata> {
    let path = path.as_ref();
    let model = build_model(spec)?;
    write_kernel_csv_file(&model, &report.kernel, path)?;
    let meta = HeatmapMetadata {
        epsilon,
        trials: spec.trials(),
        grid_size: spec.grid_size(),
        solver_status: report.solver_status.as_str().to_string(),
        iterations: report.iterations,
        mse: report.mse,
        dp_residual: report.dp_residual,
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&side, text + "\n").map_err(|e| Error::io(&side, e))?;
    Ok(meta)
}

/// Solves the Bernoulli instance and writes it out with
/// [`write_heatmap_files`].
pub fn export_heatmap(
    spec: &BernoulliModelSpec,
    epsilon: f64,
    options: &SolveOptions,
    path: impl AsRef<Path>,
) -> Result<(UbappSolveReport, HeatmapMetadata)> {
    let report = solve_ubapp(&build_model(spec)?, epsilon, options)?;
    let meta = write_heatmap_files(spec, epsilon, &report, path)?;
    Ok((report, meta))
}
