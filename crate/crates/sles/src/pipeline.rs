//! Pipeline configuration, the run manifest, persisted artifacts, and the
//! command implementations behind the `sles` binary.
//!
//! Artifact layout under the output directory:
//!
//! ```text
//! manifest.json                      parameters + artifact paths
//! benchmark/fine_trajectories.csv    t,x,value,member   (fine grid)
//! benchmark/filtered_coarse.csv      t,x,value,member   (coarse grid)
//! benchmark/raw_coarse.csv           t,x,value,member   (coarse grid)
//! benchmark/sgs.csv                  t,x,value,member   (coarse grid)
//! calibration/drift.json             a0..a3, condition_number
//! calibration/sigma.csv              x,sigma
//! les/les_trajectories.csv           t,x,value,member   (coarse grid)
//! compare/error.csv                  t,x,error_vs_filtered,error_vs_raw
//! compare/baseline_error.csv         same schema (with --baseline)
//! compare/summary.json               scalar diagnostics
//! fbm/path.csv                       t,value
//! ```
//!
//! Every command records the effective configuration in `manifest.json`
//! and refuses to mix artifacts produced under different configurations.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calibration::{
    estimate_sigma, fit_drift, generate_ensemble, mean_filtered_coarse, mean_sgs, DriftFit,
    Ensemble, PerturbationSpec, SgsModel, SigmaProfile,
};
use crate::error::{Error, Result};
use crate::fbm::{uniform_times, wm_fbm};
use crate::filtering::{FilterNormalization, GaussianFilter, SgsField};
use crate::les::{
    derive_seed, rmse_paired, run_les_ensemble, summarize, ErrorField, ErrorSummary, NoiseMode,
    SlesConfig,
};
use crate::solver::{benchmark_initial_condition, solve, MemoryKernel, SolverConfig};
use crate::spectral::{interpolate, ChebyshevGrid, Field, Trajectory};

/// Flat pipeline configuration; the TOML config file holds exactly these
/// keys and unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Fine-grid polynomial order.
    pub n_fine: usize,
    /// Coarse-grid polynomial order (the benchmark ratio is 4x).
    pub n_coarse: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Memory-kernel exponent.
    pub beta: f64,
    /// Filter width.
    pub delta: f64,
    /// Hurst parameter of the colored noise.
    pub hurst: f64,
    /// Weierstrass–Mandelbrot lacunary base.
    pub wm_r: f64,
    pub wm_j_min: i32,
    pub wm_j_max: i32,
    /// Fine benchmark ensemble size.
    pub members: usize,
    /// Stochastic model ensemble size.
    pub les_members: usize,
    /// Initial-condition perturbation amplitude.
    pub epsilon: f64,
    /// Master seed; all stage seeds derive from it.
    pub seed: u64,
    /// Dirichlet value at x = -1.
    pub bc_left: f64,
    /// Dirichlet value at x = +1.
    pub bc_right: f64,
    pub filter_normalization: FilterNormalization,
    pub noise_mode: NoiseMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            n_fine: 64,
            n_coarse: 16,
            dt: 1e-3,
            t_end: 1.0,
            beta: 2.0,
            delta: 0.01,
            hurst: 0.75,
            wm_r: 0.9,
            wm_j_min: -48,
            wm_j_max: 48,
            members: 64,
            les_members: 64,
            epsilon: 0.01,
            seed: 42,
            bc_left: -1.0,
            bc_right: 1.0,
            filter_normalization: FilterNormalization::UnitMass,
            noise_mode: NoiseMode::PerRealizationPath,
        }
    }
}

impl PipelineConfig {
    pub fn fine_grid(&self) -> Result<ChebyshevGrid> {
        ChebyshevGrid::new(self.n_fine)
    }

    pub fn coarse_grid(&self) -> Result<ChebyshevGrid> {
        ChebyshevGrid::new(self.n_coarse)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        SolverConfig::new(self.dt, self.t_end, self.bc_left, self.bc_right)
    }

    pub fn kernel(&self) -> Result<MemoryKernel> {
        MemoryKernel::new(self.beta)
    }

    pub fn validate(&self) -> Result<()> {
        let reword = |e: Error| Error::Config(e.to_string());
        self.fine_grid().map_err(reword)?;
        self.coarse_grid().map_err(reword)?;
        self.solver_config().map_err(reword)?;
        self.kernel().map_err(reword)?;
        crate::fbm::FbmConfig::new(self.hurst, self.wm_r, self.wm_j_min, self.wm_j_max, 0)
            .map_err(reword)?;
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!(
                "delta: filter width must be positive, got {}",
                self.delta
            )));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!(
                "epsilon: perturbation amplitude must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.members < 2 {
            return Err(Error::Config(format!(
                "members: benchmark ensemble needs at least 2 members, got {}",
                self.members
            )));
        }
        if self.les_members == 0 {
            return Err(Error::Config(
                "les_members: need at least one model realization".into(),
            ));
        }
        Ok(())
    }
}

/// Load the TOML config, or the defaults when no path is given.
pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

/// CLI overrides applied on top of the loaded config.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub members: Option<usize>,
    pub les_members: Option<usize>,
}

pub fn effective_config(path: Option<&Path>, overrides: Overrides) -> Result<PipelineConfig> {
    let mut cfg = load_config(path)?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(members) = overrides.members {
        cfg.members = members;
    }
    if let Some(les_members) = overrides.les_members {
        cfg.les_members = les_members;
    }
    cfg.validate()?;
    Ok(cfg)
}

const MANIFEST_FILE: &str = "manifest.json";
const BENCH_FINE: &str = "benchmark/fine_trajectories.csv";
const BENCH_FILTERED: &str = "benchmark/filtered_coarse.csv";
const BENCH_RAW: &str = "benchmark/raw_coarse.csv";
const BENCH_SGS: &str = "benchmark/sgs.csv";
const DRIFT_JSON: &str = "calibration/drift.json";
const SIGMA_CSV: &str = "calibration/sigma.csv";
const LES_CSV: &str = "les/les_trajectories.csv";
const ERROR_CSV: &str = "compare/error.csv";
const BASELINE_ERROR_CSV: &str = "compare/baseline_error.csv";
const SUMMARY_JSON: &str = "compare/summary.json";
const FBM_CSV: &str = "fbm/path.csv";

/// Stage tags hashed into the master seed, so the benchmark ensemble,
/// the model noise, and standalone path dumps draw independent streams.
const BENCH_SEED_TAG: u64 = 1;
const LES_SEED_TAG: u64 = 2;
const FBM_SAMPLE_SEED_TAG: u64 = 3;

/// Everything needed to reproduce a run: the full parameter set, the
/// fixed modeling conventions, and the artifact paths produced so far.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: PipelineConfig,
    /// Weierstrass–Mandelbrot paths are shifted to start at zero.
    pub wm_zero_adjust: bool,
    /// Initial-condition perturbation shape.
    pub perturbation_mode: String,
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    fn fresh(config: &PipelineConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            wm_zero_adjust: true,
            perturbation_mode: "sine-uniform".to_string(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn load(out: &Path) -> Result<Option<Self>> {
        let path = out.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        let manifest = serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Some(manifest))
    }

    fn write(&self, out: &Path) -> Result<()> {
        let path = out.join(MANIFEST_FILE);
        create_parent(&path)?;
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Refuse to touch an output directory whose manifest records a
/// different configuration. Commands call this before writing anything.
fn ensure_manifest_consistent(out: &Path, config: &PipelineConfig) -> Result<()> {
    if let Some(m) = RunManifest::load(out)? {
        if m.config != *config {
            return Err(Error::ProvenanceMismatch {
                message: format!(
                    "{} was produced under a different configuration; \
                     use a fresh --out directory or matching parameters",
                    out.join(MANIFEST_FILE).display()
                ),
            });
        }
    }
    Ok(())
}

/// Load (or create) the manifest, record the newly produced artifacts,
/// and write it back.
fn update_manifest(out: &Path, config: &PipelineConfig, produced: &[&str]) -> Result<()> {
    ensure_manifest_consistent(out, config)?;
    let mut manifest = match RunManifest::load(out)? {
        Some(m) => m,
        None => RunManifest::fresh(config),
    };
    for rel in produced {
        let key = rel
            .trim_end_matches(".csv")
            .trim_end_matches(".json")
            .replace('/', "_");
        manifest.artifacts.insert(key, rel.to_string());
    }
    manifest.write(out)
}

fn require_artifact(out: &Path, rel: &str, produced_by: &'static str) -> Result<PathBuf> {
    let path = out.join(rel);
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path: path.display().to_string(),
            produced_by,
        });
    }
    Ok(path)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// CSV artifacts
// ---------------------------------------------------------------------

fn write_member_series_csv<F>(
    path: &Path,
    members: usize,
    steps: usize,
    grid: &ChebyshevGrid,
    dt: f64,
    value: F,
) -> Result<()>
where
    F: Fn(usize, usize, usize) -> f64,
{
    create_parent(path)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,x,value,member")?;
    for m in 0..members {
        for k in 0..steps {
            let t = k as f64 * dt;
            for (j, &x) in grid.nodes().iter().enumerate() {
                writeln!(w, "{t},{x},{},{m}", value(m, k, j))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_trajectories_csv(path: &Path, members: &[Trajectory]) -> Result<()> {
    let grid = members[0].grid().clone();
    write_member_series_csv(
        path,
        members.len(),
        members[0].len(),
        &grid,
        members[0].dt(),
        |m, k, j| members[m].field(k).value(j),
    )
}

fn write_sgs_csv(path: &Path, members: &[SgsField]) -> Result<()> {
    let grid = members[0].grid().clone();
    write_member_series_csv(
        path,
        members.len(),
        members[0].len(),
        &grid,
        members[0].dt(),
        |m, k, j| members[m].value(k, j),
    )
}

/// Parse a member-major `t,x,value,member` file back into per-member
/// (steps x nodes) matrices, validating the grid and time layout of the
/// first member block against the configuration.
fn read_member_series_csv(path: &Path, grid: &ChebyshevGrid, dt: f64) -> Result<Vec<DMatrix<f64>>> {
    let malformed = |message: String| Error::MalformedArtifact {
        path: path.display().to_string(),
        message,
    };
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == "t,x,value,member" => {}
        _ => return Err(malformed("missing t,x,value,member header".into())),
    }

    let nodes = grid.len();
    let mut members: Vec<Vec<f64>> = Vec::new();
    let mut current_member = 0usize;
    let mut block: Vec<f64> = Vec::new();
    let mut row = 0usize;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (t_s, x_s, v_s, m_s) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(t), Some(x), Some(v), Some(m)) => (t, x, v, m),
            _ => return Err(malformed(format!("short row {row}"))),
        };
        let t: f64 = t_s
            .parse()
            .map_err(|e| malformed(format!("row {row}: bad t {t_s:?}: {e}")))?;
        let x: f64 = x_s
            .parse()
            .map_err(|e| malformed(format!("row {row}: bad x {x_s:?}: {e}")))?;
        let v: f64 = v_s
            .parse()
            .map_err(|e| malformed(format!("row {row}: bad value {v_s:?}: {e}")))?;
        let m: usize = m_s
            .parse()
            .map_err(|e| malformed(format!("row {row}: bad member {m_s:?}: {e}")))?;

        if m != current_member {
            if m != current_member + 1 {
                return Err(malformed(format!(
                    "row {row}: member jumped from {current_member} to {m}"
                )));
            }
            members.push(std::mem::take(&mut block));
            current_member = m;
        }
        if current_member == 0 {
            let j = block.len() % nodes;
            let k = block.len() / nodes;
            if x != grid.nodes()[j] {
                return Err(malformed(format!(
                    "row {row}: x = {x} does not match node {j} of the configured grid"
                )));
            }
            if t != k as f64 * dt {
                return Err(malformed(format!(
                    "row {row}: t = {t} does not match step {k} at dt = {dt}"
                )));
            }
        }
        block.push(v);
        row += 1;
    }
    members.push(block);

    let len = members[0].len();
    if len == 0 || len % nodes != 0 {
        return Err(malformed(format!(
            "member block of {len} values is not a whole number of {nodes}-node fields"
        )));
    }
    if members.iter().any(|b| b.len() != len) {
        return Err(malformed("member blocks differ in length".into()));
    }
    let steps = len / nodes;
    Ok(members
        .into_iter()
        .map(|b| DMatrix::from_row_iterator(steps, nodes, b))
        .collect())
}

fn read_trajectories_csv(path: &Path, grid: &ChebyshevGrid, dt: f64) -> Result<Vec<Trajectory>> {
    read_member_series_csv(path, grid, dt)?
        .into_iter()
        .map(|mat| {
            let fields = (0..mat.nrows())
                .map(|k| {
                    Field::new(
                        grid.clone(),
                        DVector::from_iterator(grid.len(), mat.row(k).iter().copied()),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Trajectory::new(grid.clone(), dt, fields)
        })
        .collect()
}

fn read_sgs_csv(path: &Path, grid: &ChebyshevGrid, dt: f64) -> Result<Vec<SgsField>> {
    read_member_series_csv(path, grid, dt)?
        .into_iter()
        .map(|mat| SgsField::new(grid.clone(), dt, mat))
        .collect()
}

fn write_sigma_csv(path: &Path, sigma: &SigmaProfile) -> Result<()> {
    create_parent(path)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "x,sigma")?;
    for (j, &x) in sigma.grid().nodes().iter().enumerate() {
        writeln!(w, "{x},{}", sigma.value(j))?;
    }
    w.flush()?;
    Ok(())
}

fn read_sigma_csv(path: &Path, grid: &ChebyshevGrid) -> Result<SigmaProfile> {
    let malformed = |message: String| Error::MalformedArtifact {
        path: path.display().to_string(),
        message,
    };
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        Some(Ok(h)) if h == "x,sigma" => {}
        _ => return Err(malformed("missing x,sigma header".into())),
    }
    let mut values = Vec::with_capacity(grid.len());
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let (x_s, s_s) = match (parts.next(), parts.next()) {
            (Some(x), Some(s)) => (x, s),
            _ => return Err(malformed(format!("short row {i}"))),
        };
        let x: f64 = x_s
            .parse()
            .map_err(|e| malformed(format!("row {i}: bad x {x_s:?}: {e}")))?;
        if i >= grid.len() || x != grid.nodes()[i] {
            return Err(malformed(format!(
                "row {i}: x = {x} does not match the configured coarse grid"
            )));
        }
        let s: f64 = s_s
            .parse()
            .map_err(|e| malformed(format!("row {i}: bad sigma {s_s:?}: {e}")))?;
        values.push(s);
    }
    if values.len() != grid.len() {
        return Err(malformed(format!(
            "{} sigma rows vs {} grid nodes",
            values.len(),
            grid.len()
        )));
    }
    SigmaProfile::new(grid.clone(), DVector::from_vec(values))
}

fn write_error_csv(path: &Path, vs_filtered: &ErrorField, vs_raw: &ErrorField) -> Result<()> {
    create_parent(path)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t,x,error_vs_filtered,error_vs_raw")?;
    let grid = vs_filtered.grid();
    for k in 0..vs_filtered.len() {
        let t = k as f64 * vs_filtered.dt();
        for (j, &x) in grid.nodes().iter().enumerate() {
            writeln!(w, "{t},{x},{},{}", vs_filtered.value(k, j), vs_raw.value(k, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

// ---------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------

/// The benchmark initial data: the fine-grid profile and its filtered
/// restriction to the coarse grid with the Dirichlet values re-pinned.
pub fn base_initial_conditions(cfg: &PipelineConfig) -> Result<(Field, Field)> {
    let fine = cfg.fine_grid()?;
    let coarse = cfg.coarse_grid()?;
    let fine_ic = benchmark_initial_condition(&fine);
    let filter = GaussianFilter::new(&fine, cfg.delta, cfg.filter_normalization)?;
    let filtered = filter.apply(&fine_ic)?;
    let mut coarse_ic = interpolate(&filtered, &coarse);
    coarse_ic.values_mut()[0] = cfg.bc_right;
    coarse_ic.values_mut()[cfg.n_coarse] = cfg.bc_left;
    Ok((fine_ic, coarse_ic))
}

fn build_benchmark_ensemble(cfg: &PipelineConfig) -> Result<Ensemble> {
    let (fine_ic, _) = base_initial_conditions(cfg)?;
    let coarse = cfg.coarse_grid()?;
    let spec = PerturbationSpec::new(cfg.epsilon, derive_seed(cfg.seed, BENCH_SEED_TAG))?;
    generate_ensemble(
        &fine_ic,
        &spec,
        cfg.members,
        &cfg.solver_config()?,
        &cfg.kernel()?,
        cfg.delta,
        &coarse,
        cfg.filter_normalization,
    )
}

/// Generate the fine benchmark ensemble and persist the trajectories and
/// subgrid fields.
pub fn run_benchmark(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_manifest_consistent(out, cfg)?;
    let ensemble = build_benchmark_ensemble(cfg)?;
    let fine: Vec<Trajectory> = ensemble.members().iter().map(|m| m.fine.clone()).collect();
    let filtered: Vec<Trajectory> = ensemble
        .members()
        .iter()
        .map(|m| m.filtered_coarse.clone())
        .collect();
    let raw: Vec<Trajectory> = ensemble
        .members()
        .iter()
        .map(|m| m.raw_coarse.clone())
        .collect();
    let sgs = ensemble.sgs_fields();

    write_trajectories_csv(&out.join(BENCH_FINE), &fine)?;
    write_trajectories_csv(&out.join(BENCH_FILTERED), &filtered)?;
    write_trajectories_csv(&out.join(BENCH_RAW), &raw)?;
    write_sgs_csv(&out.join(BENCH_SGS), &sgs)?;
    update_manifest(out, cfg, &[BENCH_FINE, BENCH_FILTERED, BENCH_RAW, BENCH_SGS])
}

/// Fit the drift and the noise profile from persisted benchmark data.
pub fn calibrate(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_manifest_consistent(out, cfg)?;
    let coarse = cfg.coarse_grid()?;
    let filtered_path = require_artifact(out, BENCH_FILTERED, "run-benchmark")?;
    let sgs_path = require_artifact(out, BENCH_SGS, "run-benchmark")?;
    let filtered = read_trajectories_csv(&filtered_path, &coarse, cfg.dt)?;
    let sgs = read_sgs_csv(&sgs_path, &coarse, cfg.dt)?;
    if filtered.len() != sgs.len() || filtered.len() != cfg.members {
        return Err(Error::Alignment {
            message: format!(
                "benchmark artifacts hold {} filtered / {} sgs members, config expects {}",
                filtered.len(),
                sgs.len(),
                cfg.members
            ),
        });
    }

    let mean_r = crate::calibration::mean_sgs_fields(&sgs)?;
    let steps = filtered[0].len();
    let mut mean_fields = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut acc = DVector::zeros(coarse.len());
        for member in &filtered {
            acc += member.field(k).values();
        }
        acc /= filtered.len() as f64;
        mean_fields.push(Field::new(coarse.clone(), acc)?);
    }
    let ubar = Trajectory::new(coarse.clone(), cfg.dt, mean_fields)?;

    let drift = fit_drift(&mean_r, &ubar)?;
    let sigma = estimate_sigma(&sgs, &mean_r, cfg.t_end, cfg.hurst)?;

    write_json(&out.join(DRIFT_JSON), &drift)?;
    write_sigma_csv(&out.join(SIGMA_CSV), &sigma)?;
    update_manifest(out, cfg, &[DRIFT_JSON, SIGMA_CSV])
}

fn load_model(cfg: &PipelineConfig, out: &Path) -> Result<SgsModel> {
    let coarse = cfg.coarse_grid()?;
    let drift_path = require_artifact(out, DRIFT_JSON, "calibrate")?;
    let sigma_path = require_artifact(out, SIGMA_CSV, "calibrate")?;
    let drift: DriftFit = read_json(&drift_path)?;
    let sigma = read_sigma_csv(&sigma_path, &coarse)?;
    Ok(SgsModel {
        drift,
        sigma,
        hurst: cfg.hurst,
        t_window: cfg.t_end,
        delta: cfg.delta,
        beta: cfg.beta,
    })
}

fn sles_config(cfg: &PipelineConfig, model: SgsModel) -> Result<SlesConfig> {
    Ok(SlesConfig {
        solver: cfg.solver_config()?,
        beta: cfg.beta,
        delta: cfg.delta,
        hurst: cfg.hurst,
        wm_r: cfg.wm_r,
        wm_j_min: cfg.wm_j_min,
        wm_j_max: cfg.wm_j_max,
        noise_mode: cfg.noise_mode,
        les_members: cfg.les_members,
        seed: derive_seed(cfg.seed, LES_SEED_TAG),
        model,
    })
}

/// Integrate the stochastic coarse ensemble from the calibrated closure.
pub fn run_sles(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_manifest_consistent(out, cfg)?;
    let model = load_model(cfg, out)?;
    let (_, coarse_ic) = base_initial_conditions(cfg)?;
    let config = sles_config(cfg, model)?;
    let members = run_les_ensemble(&coarse_ic, &config)?;
    write_trajectories_csv(&out.join(LES_CSV), &members)?;
    update_manifest(out, cfg, &[LES_CSV])
}

/// Scalar comparison summary; the `baseline_*` entries appear when the
/// unparameterized coarse run was requested.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CompareSummary {
    /// Model ensemble vs filtered fine solution.
    pub l2_time_avg: f64,
    pub max_error: f64,
    /// Model ensemble vs raw fine solution at the coarse nodes.
    pub raw_l2_time_avg: f64,
    pub raw_max_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_l2_time_avg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_max_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_raw_l2_time_avg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_raw_max_error: Option<f64>,
}

/// Compare the persisted model ensemble against the persisted benchmark;
/// with `baseline`, also run the unparameterized coarse solve and report
/// its errors.
pub fn compare(cfg: &PipelineConfig, out: &Path, baseline: bool) -> Result<CompareSummary> {
    ensure_manifest_consistent(out, cfg)?;
    let coarse = cfg.coarse_grid()?;
    let filtered_path = require_artifact(out, BENCH_FILTERED, "run-benchmark")?;
    let raw_path = require_artifact(out, BENCH_RAW, "run-benchmark")?;
    let les_path = require_artifact(out, LES_CSV, "run-sles")?;
    let filtered = read_trajectories_csv(&filtered_path, &coarse, cfg.dt)?;
    let raw = read_trajectories_csv(&raw_path, &coarse, cfg.dt)?;
    let les = read_trajectories_csv(&les_path, &coarse, cfg.dt)?;

    let err_filtered = rmse_paired(&filtered, &les)?;
    let err_raw = rmse_paired(&raw, &les)?;
    write_error_csv(&out.join(ERROR_CSV), &err_filtered, &err_raw)?;
    let s_filtered = summarize(&err_filtered);
    let s_raw = summarize(&err_raw);

    let mut summary = CompareSummary {
        l2_time_avg: s_filtered.l2_time_avg,
        max_error: s_filtered.max_error,
        raw_l2_time_avg: s_raw.l2_time_avg,
        raw_max_error: s_raw.max_error,
        baseline_l2_time_avg: None,
        baseline_max_error: None,
        baseline_raw_l2_time_avg: None,
        baseline_raw_max_error: None,
    };

    let mut produced = vec![ERROR_CSV, SUMMARY_JSON];
    if baseline {
        let (_, coarse_ic) = base_initial_conditions(cfg)?;
        let base = solve(&coarse_ic, &cfg.solver_config()?, &cfg.kernel()?)?;
        let replicated: Vec<Trajectory> = vec![base; filtered.len()];
        let base_filtered = rmse_paired(&filtered, &replicated)?;
        let base_raw = rmse_paired(&raw, &replicated)?;
        write_error_csv(&out.join(BASELINE_ERROR_CSV), &base_filtered, &base_raw)?;
        let bs_filtered = summarize(&base_filtered);
        let bs_raw = summarize(&base_raw);
        summary.baseline_l2_time_avg = Some(bs_filtered.l2_time_avg);
        summary.baseline_max_error = Some(bs_filtered.max_error);
        summary.baseline_raw_l2_time_avg = Some(bs_raw.l2_time_avg);
        summary.baseline_raw_max_error = Some(bs_raw.max_error);
        produced.push(BASELINE_ERROR_CSV);
    }

    write_json(&out.join(SUMMARY_JSON), &summary)?;
    update_manifest(out, cfg, &produced)?;
    Ok(summary)
}

/// Dump one Weierstrass–Mandelbrot path at the run's time grid.
pub fn fbm_sample(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    ensure_manifest_consistent(out, cfg)?;
    let times = uniform_times(cfg.dt, cfg.solver_config()?.steps());
    let fbm_cfg = crate::fbm::FbmConfig::new(
        cfg.hurst,
        cfg.wm_r,
        cfg.wm_j_min,
        cfg.wm_j_max,
        derive_seed(cfg.seed, FBM_SAMPLE_SEED_TAG),
    )?;
    let path = wm_fbm(&times, &fbm_cfg)?;
    let csv_path = out.join(FBM_CSV);
    create_parent(&csv_path)?;
    let file = fs::File::create(&csv_path)?;
    path.write_csv(BufWriter::new(file))?;
    update_manifest(out, cfg, &[FBM_CSV])
}

// ---------------------------------------------------------------------
// In-memory end-to-end run (no artifacts)
// ---------------------------------------------------------------------

/// Error summaries of one full pipeline execution held in memory.
#[derive(Clone, Debug)]
pub struct EndToEndReport {
    /// Stochastic model vs filtered fine truth.
    pub les: ErrorSummary,
    /// Stochastic model vs raw fine truth.
    pub les_raw: ErrorSummary,
    /// Unparameterized coarse baseline vs filtered fine truth.
    pub baseline: ErrorSummary,
    /// Unparameterized coarse baseline vs raw fine truth.
    pub baseline_raw: ErrorSummary,
    pub model: SgsModel,
}

/// Benchmark ensemble, calibration, stochastic run, baseline run, and
/// error summaries, without touching the filesystem.
pub fn run_end_to_end(cfg: &PipelineConfig) -> Result<EndToEndReport> {
    let ensemble = build_benchmark_ensemble(cfg)?;
    let mean_r = mean_sgs(&ensemble)?;
    let ubar = mean_filtered_coarse(&ensemble)?;
    let drift = fit_drift(&mean_r, &ubar)?;
    let sgs_members = ensemble.sgs_fields();
    let sigma = estimate_sigma(&sgs_members, &mean_r, cfg.t_end, cfg.hurst)?;
    let model = SgsModel {
        drift,
        sigma,
        hurst: cfg.hurst,
        t_window: cfg.t_end,
        delta: cfg.delta,
        beta: cfg.beta,
    };

    let (_, coarse_ic) = base_initial_conditions(cfg)?;
    let config = sles_config(cfg, model.clone())?;
    let les_members = run_les_ensemble(&coarse_ic, &config)?;

    let filtered: Vec<Trajectory> = ensemble
        .members()
        .iter()
        .map(|m| m.filtered_coarse.clone())
        .collect();
    let raw: Vec<Trajectory> = ensemble
        .members()
        .iter()
        .map(|m| m.raw_coarse.clone())
        .collect();

    let les = summarize(&rmse_paired(&filtered, &les_members)?);
    let les_raw = summarize(&rmse_paired(&raw, &les_members)?);

    let base = solve(&coarse_ic, &cfg.solver_config()?, &cfg.kernel()?)?;
    let replicated: Vec<Trajectory> = vec![base; filtered.len()];
    let baseline = summarize(&rmse_paired(&filtered, &replicated)?);
    let baseline_raw = summarize(&rmse_paired(&raw, &replicated)?);

    Ok(EndToEndReport {
        les,
        les_raw,
        baseline,
        baseline_raw,
        model,
    })
}
