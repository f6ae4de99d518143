//! Grid sweeps over ε and the number of trials.
//!
//! A sweep evaluates every `(K, ε, method)` cell independently. Cells run on
//! the rayon pool; each Monte-Carlo cell draws from its own ChaCha stream
//! derived from the root seed and the cell's indices, so the output does not
//! depend on how cells are scheduled. A failing cell becomes a row with an
//! error status and no MSE; the rest of the sweep carries on.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::montecarlo::mc_mse_lbapp_with;
use crate::bernoulli::{build_model, BernoulliModelSpec};
use crate::error::{Error, Result};
use crate::lp::{write_lp_file, SolveOptions};
use crate::rng::stream;
use crate::ubapp::{analytic_mse, build_program, nonprivate_kernel, solve_program};

pub const CSV_HEADER: &str = "epsilon,trials,method,mse,stderr,status,iters,wall_ms";
pub const DEFAULT_RUNS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ubapp,
    Lbapp,
    Nonprivate,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ubapp, Method::Lbapp, Method::Nonprivate];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ubapp => "ubapp",
            Method::Lbapp => "lbapp",
            Method::Nonprivate => "nonprivate",
        }
    }

    /// Fixed per-method index used to derive random streams; it does not
    /// depend on which methods a sweep selects.
    fn stream_index(self) -> u64 {
        match self {
            Method::Ubapp => 0,
            Method::Lbapp => 1,
            Method::Nonprivate => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?}")))
    }
}

/// Named ε grids for the two privacy regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `0.001, 0.002, …, 0.010`
    HighPrivacy,
    /// `1, 1.5, …, 5`
    ModerateLow,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::HighPrivacy => "high-privacy",
            Preset::ModerateLow => "moderate-low",
        }
    }

    pub fn epsilons(self) -> Vec<f64> {
        // built from integer steps so the values are the nearest doubles to
        // the decimal ones
        match self {
            Preset::HighPrivacy => (1..=10).map(|i| i as f64 / 1000.0).collect(),
            Preset::ModerateLow => (2..=10).map(|i| i as f64 / 2.0).collect(),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "high-privacy" => Ok(Preset::HighPrivacy),
            "moderate-low" => Ok(Preset::ModerateLow),
            other => Err(Error::InvalidArgument(format!(
                "unknown preset {other:?}; expected high-privacy or moderate-low"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    /// Points in the uniform parameter grid on `[0, 1]`.
    pub grid_size: usize,
    pub trials: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub methods: Vec<Method>,
    pub runs: usize,
    pub seed: u64,
    pub solve_options: SolveOptions,
    /// Fill the `wall_ms` column. Off by default so that output is
    /// reproducible byte for byte.
    pub record_timing: bool,
    /// Write each UBaPP program here before solving (see [`lp_dump_path`]).
    pub dump_lp: Option<PathBuf>,
}

impl SweepConfig {
    pub fn new(grid_size: usize, trials: Vec<usize>, epsilons: Vec<f64>, methods: Vec<Method>) -> Self {
        SweepConfig {
            grid_size,
            trials,
            epsilons,
            methods,
            runs: DEFAULT_RUNS,
            seed: 0,
            solve_options: SolveOptions::default(),
            record_timing: false,
            dump_lp: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.grid_size < 2 {
            return bad(format!("grid size must be at least 2, got {}", self.grid_size));
        }
        if self.trials.is_empty() || self.trials.contains(&0) {
            return bad("trials must be a non-empty list of positive counts".into());
        }
        if self.epsilons.is_empty() {
            return bad("no epsilon values given".into());
        }
        if let Some(e) = self.epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return bad(format!("epsilon must be positive and finite, got {e}"));
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        if self.runs == 0 {
            return bad("number of Monte-Carlo runs must be at least 1".into());
        }
        Ok(())
    }

    fn num_cells(&self) -> usize {
        self.trials.len() * self.epsilons.len() * self.methods.len()
    }
}

/// Where the program for cell `(trials, epsilon index)` is written: `base`
/// itself when the sweep solves a single program, otherwise `base` with
/// `.k<K>.e<index>` inserted before the extension.
pub fn lp_dump_path(base: &Path, trials: usize, eps_index: usize, single: bool) -> PathBuf {
    if single {
        return base.to_path_buf();
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.k{trials}.e{eps_index}.{}", ext.to_string_lossy()),
        None => format!("{stem}.k{trials}.e{eps_index}"),
    };
    base.with_file_name(name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub trials: usize,
    pub method: Method,
    /// `None` when the cell failed.
    pub mse: Option<f64>,
    /// Present only for Monte-Carlo cells.
    pub stderr: Option<f64>,
    /// `optimal` for solved programs, `ok` for the other methods, otherwise
    /// the failure kind.
    pub status: String,
    pub iterations: Option<usize>,
    pub wall_ms: Option<f64>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        self.mse.is_none()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

fn opt_float(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl SweepResult {
    pub fn num_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.failed()).count()
    }

    /// Rows for one method, in sweep order.
    pub fn method_rows(&self, method: Method) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:.16e},{},{},{},{},{},{},{}",
                r.epsilon,
                r.trials,
                r.method,
                opt_float(r.mse),
                opt_float(r.stderr),
                r.status,
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
                r.wall_ms.map(|t| format!("{t:.3}")).unwrap_or_default(),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

fn failure_status(err: &Error) -> &'static str {
    match err {
        Error::Infeasible => "infeasible",
        Error::Unbounded => "unbounded",
        Error::IterationLimit(_) => "iteration_limit",
        Error::KernelExtraction(_) => "extraction_failed",
        _ => "error",
    }
}

struct Cell {
    trials_index: usize,
    eps_index: usize,
    method: Method,
}

struct CellOutcome {
    mse: f64,
    stderr: Option<f64>,
    status: &'static str,
    iterations: Option<usize>,
}

fn run_cell(config: &SweepConfig, cell: &Cell, single_program: bool) -> Result<CellOutcome> {
    let trials = config.trials[cell.trials_index];
    let epsilon = config.epsilons[cell.eps_index];
    let spec = BernoulliModelSpec::new(trials, config.grid_size)?;
    match cell.method {
        Method::Ubapp => {
            let model = build_model(&spec)?;
            let program = build_program(&model, epsilon)?;
            if let Some(base) = &config.dump_lp {
                let path = lp_dump_path(base, trials, cell.eps_index, single_program);
                let comment = format!(
                    "ubapp program: trials={trials} grid={} epsilon={epsilon}",
                    config.grid_size
                );
                write_lp_file(&program, &comment, path)?;
            }
            let report = solve_program(&model, epsilon, &program, &config.solve_options)?;
            Ok(CellOutcome {
                mse: report.mse,
                stderr: None,
                status: report.solver_status.as_str(),
                iterations: Some(report.iterations),
            })
        }
        Method::Lbapp => {
            let id = ((cell.eps_index as u64) << 40) | ((cell.trials_index as u64) << 20) | cell.method.stream_index();
            let mut rng = stream(config.seed, id);
            let est = mc_mse_lbapp_with(&spec, epsilon, config.runs, &mut rng)?;
            Ok(CellOutcome {
                mse: est.mse,
                stderr: Some(est.stderr),
                status: "ok",
                iterations: None,
            })
        }
        Method::Nonprivate => {
            let model = build_model(&spec)?;
            Ok(CellOutcome {
                mse: analytic_mse(&model, &nonprivate_kernel(&model))?,
                stderr: None,
                status: "ok",
                iterations: None,
            })
        }
    }
}

/// Runs every cell of the sweep. Rows come out ordered by trials, then ε,
/// then method, each in the order given in the config.
///
/// UBaPP cells report the analytic risk of the solved kernel, LBaPP cells a
/// Monte-Carlo estimate with `runs` draws, and non-private cells the risk of
/// the Bayes estimator restricted to the grid.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let mut cells = Vec::with_capacity(config.num_cells());
    for trials_index in 0..config.trials.len() {
        for eps_index in 0..config.epsilons.len() {
            for &method in &config.methods {
                cells.push(Cell {
                    trials_index,
                    eps_index,
                    method,
                });
            }
        }
    }
    let programs = cells.iter().filter(|c| c.method == Method::Ubapp).count();
    let single_program = programs == 1;

    let outcomes: Vec<(Result<CellOutcome>, f64)> = cells
        .par_iter()
        .map(|cell| {
            let start = Instant::now();
            let outcome = run_cell(config, cell, single_program);
            (outcome, start.elapsed().as_secs_f64() * 1e3)
        })
        .collect();

    let mut rows = Vec::with_capacity(cells.len());
    for (cell, (outcome, ms)) in cells.iter().zip(outcomes) {
        let epsilon = config.epsilons[cell.eps_index];
        let trials = config.trials[cell.trials_index];
        let wall_ms = config.record_timing.then_some(ms);
        let row = match outcome {
            Ok(o) => SweepRow {
                epsilon,
                trials,
                method: cell.method,
                mse: Some(o.mse),
                stderr: o.stderr,
                status: o.status.to_string(),
                iterations: o.iterations,
                wall_ms,
            },
            Err(Error::Io { path, source }) => return Err(Error::Io { path, source }),
            Err(err) => {
                log::warn!("cell {} K={trials} eps={epsilon} failed: {err}", cell.method);
                SweepRow {
                    epsilon,
                    trials,
                    method: cell.method,
                    mse: None,
                    stderr: None,
                    status: failure_status(&err).to_string(),
                    iterations: None,
                    wall_ms,
                }
            }
        };
        rows.push(row);
    }
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let hp = Preset::HighPrivacy.epsilons();
        assert_eq!(hp.len(), 10);
        assert_eq!(hp[0], 0.001);
        assert_eq!(hp[9], 0.01);
        assert_eq!(hp[6], 0.007);
        assert_eq!(
            Preset::ModerateLow.epsilons(),
            vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]
        );
        assert_eq!("moderate-low".parse::<Preset>().unwrap(), Preset::ModerateLow);
        assert!("low".parse::<Preset>().is_err());
    }

    #[test]
    fn method_names() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("UBaPP".parse::<Method>().unwrap(), Method::Ubapp);
        assert!("gauss".parse::<Method>().is_err());
    }

    #[test]
    fn invalid_configs() {
        let ok = SweepConfig::new(5, vec![2], vec![1.0], vec![Method::Ubapp]);
        assert!(ok.validate().is_ok());
        let mut c = ok.clone();
        c.epsilons = vec![1.0, -1.0];
        assert!(run_sweep(&c).is_err());
        let mut c = ok.clone();
        c.methods.clear();
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.runs = 0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.trials = vec![0];
        assert!(c.validate().is_err());
        let mut c = ok;
        c.grid_size = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn row_order_and_columns() {
        let mut c = SweepConfig::new(11, vec![2, 3], vec![0.5, 2.0], Method::ALL.to_vec());
        c.runs = 200;
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.rows.len(), 12);
        let keys: Vec<(usize, f64, Method)> = r.rows.iter().map(|r| (r.trials, r.epsilon, r.method)).collect();
        assert_eq!(keys[0], (2, 0.5, Method::Ubapp));
        assert_eq!(keys[1], (2, 0.5, Method::Lbapp));
        assert_eq!(keys[3], (2, 2.0, Method::Ubapp));
        assert_eq!(keys[6], (3, 0.5, Method::Ubapp));
        for row in &r.rows {
            assert!(!row.failed());
            assert!(row.mse.unwrap() >= 0.0);
            assert_eq!(row.stderr.is_some(), row.method == Method::Lbapp);
            assert!(row.wall_ms.is_none());
        }
        let csv = r.to_csv_string();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 8);
        assert_eq!(first[0], "5.0000000000000000e-1");
        assert_eq!(first[2], "ubapp");
        assert_eq!(first[4], "");
        assert_eq!(first[5], "optimal");
    }

    #[test]
    fn nonprivate_is_a_lower_bound() {
        let c = SweepConfig::new(
            21,
            vec![4],
            vec![0.01, 1.0, 5.0],
            vec![Method::Ubapp, Method::Nonprivate],
        );
        let r = run_sweep(&c).unwrap();
        for pair in r.rows.chunks(2) {
            assert!(pair[1].mse.unwrap() <= pair[0].mse.unwrap() + 1e-12);
        }
    }

    #[test]
    fn failures_are_recorded_per_row() {
        let mut c = SweepConfig::new(11, vec![3], vec![1.0], vec![Method::Ubapp, Method::Nonprivate]);
        c.solve_options.max_iters = Some(1);
        let r = run_sweep(&c).unwrap();
        assert_eq!(r.num_failed(), 1);
        assert_eq!(r.rows[0].status, "iteration_limit");
        assert!(r.rows[0].mse.is_none());
        assert!(!r.rows[1].failed());
        let csv = r.to_csv_string();
        assert!(csv.lines().nth(1).unwrap().contains(",,,iteration_limit,,"));
    }

    #[test]
    fn dump_paths() {
        let base = Path::new("/tmp/x/prog.lp");
        assert_eq!(lp_dump_path(base, 4, 2, true), base);
        assert_eq!(lp_dump_path(base, 4, 2, false), Path::new("/tmp/x/prog.k4.e2.lp"));
        assert_eq!(lp_dump_path(Path::new("p"), 1, 0, false), Path::new("p.k1.e0"));
    }
}
