//! The stochastic coarse-grid model: the filtered equation closed with a
//! calibrated drift `f(U)` and colored noise `sigma(x) dB^H`, integrated
//! by the same semi-implicit stepper as the deterministic solver, plus
//! fine-vs-model error diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calibration::{Ensemble, SgsModel};
use crate::error::{Error, Result};
use crate::fbm::{increments, uniform_times, wm_fbm, FbmConfig};
use crate::solver::{solve_driven, Forcing, MemoryKernel, SolverConfig};
use crate::spectral::{quad_weights, ChebyshevGrid, Field, Trajectory};

/// Abort threshold for the coarse state; the cubic drift is untrusted
/// outside the fitted range.
pub const BLOWUP_LIMIT: f64 = 10.0;

/// How noise paths are assigned across model realizations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Each realization draws an independent path (default).
    #[default]
    PerRealizationPath,
    /// All realizations share one path (variance-reduction experiments).
    SharedPath,
}

/// Full configuration of a stochastic coarse-grid run.
#[derive(Clone, Debug)]
pub struct SlesConfig {
    pub solver: SolverConfig,
    pub beta: f64,
    pub delta: f64,
    pub hurst: f64,
    pub wm_r: f64,
    pub wm_j_min: i32,
    pub wm_j_max: i32,
    pub noise_mode: NoiseMode,
    pub les_members: usize,
    pub seed: u64,
    pub model: SgsModel,
}

impl SlesConfig {
    /// The calibrated model must match the run parameters it is applied
    /// under; refuse to run otherwise.
    pub fn check_provenance(&self) -> Result<()> {
        let mismatch = |what: &str, model: f64, run: f64| {
            Err(Error::ProvenanceMismatch {
                message: format!("model {what} = {model} but the run uses {run}"),
            })
        };
        if self.model.hurst != self.hurst {
            return mismatch("hurst", self.model.hurst, self.hurst);
        }
        if self.model.delta != self.delta {
            return mismatch("delta", self.model.delta, self.delta);
        }
        if self.model.beta != self.beta {
            return mismatch("beta", self.model.beta, self.beta);
        }
        if self.model.t_window != self.solver.t_end {
            return mismatch("t_window", self.model.t_window, self.solver.t_end);
        }
        Ok(())
    }
}

/// Splitmix64 step, used to derive independent per-realization seeds.
pub(crate) fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-step closure forcing: drift `f(U_k)` and additive noise
/// `sigma(x) * dB_k`, with the state watched for blow-up.
struct ModelForcing<'a> {
    model: &'a SgsModel,
    sigma: DVector<f64>,
    noise_steps: Vec<f64>,
}

impl Forcing for ModelForcing<'_> {
    fn at_step(&mut self, k: usize, current: &Field) -> Result<(Field, Field)> {
        let max_abs = current.max_abs();
        if max_abs > BLOWUP_LIMIT {
            return Err(Error::BlowUp {
                step: k,
                max_abs,
                limit: BLOWUP_LIMIT,
            });
        }
        let grid = current.grid();
        let drift = DVector::from_iterator(
            grid.len(),
            current.values().iter().map(|&u| self.model.drift.eval(u)),
        );
        let db = self.noise_steps[k];
        let noise = DVector::from_iterator(grid.len(), self.sigma.iter().map(|&s| s * db));
        Ok((
            Field::new(grid.clone(), drift)?,
            Field::new(grid.clone(), noise)?,
        ))
    }
}

/// Integrate the stochastic coarse model from the filtered initial
/// condition; one realization, driven by a Weierstrass–Mandelbrot path
/// seeded with `config.seed`.
///
/// The noise profile is forced to zero at the boundary nodes so the
/// Dirichlet data stays exact for every realization.
pub fn solve_sles(ic: &Field, config: &SlesConfig) -> Result<Trajectory> {
    config.check_provenance()?;
    let grid = ic.grid();
    if !config.model.sigma.grid().same_grid(grid) {
        return Err(Error::ProvenanceMismatch {
            message: format!(
                "model sigma lives on an order-{} grid but the run grid has order {}",
                config.model.sigma.grid().order(),
                grid.order()
            ),
        });
    }

    let steps = config.solver.steps();
    let times = uniform_times(config.solver.dt, steps);
    let fbm_cfg = FbmConfig::new(
        config.hurst,
        config.wm_r,
        config.wm_j_min,
        config.wm_j_max,
        config.seed,
    )?;
    let path = wm_fbm(&times, &fbm_cfg)?;
    let noise_steps = increments(&path)?;

    let mut sigma = config.model.sigma.values().clone();
    sigma[0] = 0.0;
    sigma[grid.order()] = 0.0;

    let kernel = MemoryKernel::new(config.beta)?;
    let mut forcing = ModelForcing {
        model: &config.model,
        sigma,
        noise_steps,
    };
    let traj = solve_driven(ic, &config.solver, &kernel, &mut forcing)?;
    let final_max = traj.last().max_abs();
    if final_max > BLOWUP_LIMIT {
        return Err(Error::BlowUp {
            step: steps,
            max_abs: final_max,
            limit: BLOWUP_LIMIT,
        });
    }
    Ok(traj)
}

/// Run the configured number of realizations. Per-realization mode gives
/// each member an independent derived seed; shared mode reuses the same
/// path for every member.
pub fn run_les_ensemble(ic: &Field, config: &SlesConfig) -> Result<Vec<Trajectory>> {
    if config.les_members == 0 {
        return Err(Error::InsufficientEnsemble {
            required: 1,
            actual: 0,
        });
    }
    (0..config.les_members)
        .map(|m| {
            let seed = match config.noise_mode {
                NoiseMode::PerRealizationPath => derive_seed(config.seed, m as u64),
                NoiseMode::SharedPath => derive_seed(config.seed, 0),
            };
            let realization = SlesConfig {
                seed,
                model: config.model.clone(),
                ..*config
            };
            solve_sles(ic, &realization)
        })
        .collect()
}

/// Root-mean-square error `error(x,t) = sqrt(mean_m |ref_m - test_m|^2)`
/// over index-paired trajectories.
#[derive(Clone, Debug)]
pub struct ErrorField {
    grid: ChebyshevGrid,
    dt: f64,
    values: DMatrix<f64>,
}

impl ErrorField {
    pub fn new(grid: ChebyshevGrid, dt: f64, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::Alignment {
                message: format!("{} columns vs {} nodes", values.ncols(), grid.len()),
            });
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "error",
                message: "error values must be nonnegative and finite".into(),
            });
        }
        Ok(Self { grid, dt, values })
    }

    pub fn grid(&self) -> &ChebyshevGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.values[(k, j)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// RMSE between two equally sized trajectory collections, paired by
/// index.
pub fn rmse_paired(refs: &[Trajectory], tests: &[Trajectory]) -> Result<ErrorField> {
    if refs.is_empty() || refs.len() != tests.len() {
        return Err(Error::Alignment {
            message: format!(
                "need equally many reference and test members, got {} and {}",
                refs.len(),
                tests.len()
            ),
        });
    }
    let grid = refs[0].grid().clone();
    let steps = refs[0].len();
    let dt = refs[0].dt();
    for (a, b) in refs.iter().zip(tests) {
        if !a.grid().same_grid(&grid) || !b.grid().same_grid(&grid) {
            return Err(Error::Alignment {
                message: "members live on different grids".into(),
            });
        }
        if a.len() != steps || b.len() != steps {
            return Err(Error::Alignment {
                message: format!(
                    "step counts differ: expected {steps}, got {} vs {}",
                    a.len(),
                    b.len()
                ),
            });
        }
    }
    let m = refs.len() as f64;
    let mut values = DMatrix::zeros(steps, grid.len());
    for k in 0..steps {
        for j in 0..grid.len() {
            let mut acc = 0.0;
            for (a, b) in refs.iter().zip(tests) {
                let d = a.field(k).value(j) - b.field(k).value(j);
                acc += d * d;
            }
            values[(k, j)] = (acc / m).sqrt();
        }
    }
    ErrorField::new(grid, dt, values)
}

/// RMSE of a model ensemble against the filtered fine ensemble (the
/// field the closed equation governs), members paired by index.
pub fn rmse(fine: &Ensemble, les: &[Trajectory]) -> Result<ErrorField> {
    let refs: Vec<Trajectory> = fine
        .members()
        .iter()
        .map(|m| m.filtered_coarse.clone())
        .collect();
    rmse_paired(&refs, les)
}

/// Scalar diagnostics of an error field.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// `sqrt( (1/T) integral_0^T sum_j w_j error(x_j, t)^2 dt )`.
    pub l2_time_avg: f64,
    /// Max over nodes and steps.
    pub max_error: f64,
}

/// Time-averaged spatial L2 norm (Clenshaw–Curtis in x, trapezoid in t)
/// and the max error.
pub fn summarize(error: &ErrorField) -> ErrorSummary {
    let wx = quad_weights(error.grid());
    let steps = error.len();
    let dt = error.dt();
    let mut acc = 0.0;
    for k in 0..steps {
        let wt = if steps == 1 {
            1.0
        } else if k == 0 || k == steps - 1 {
            0.5 * dt
        } else {
            dt
        };
        let mut spatial = 0.0;
        for j in 0..error.grid().len() {
            spatial += wx[j] * error.value(k, j) * error.value(k, j);
        }
        acc += wt * spatial;
    }
    let horizon = if steps == 1 { 1.0 } else { (steps - 1) as f64 * dt };
    ErrorSummary {
        l2_time_avg: (acc / horizon).sqrt(),
        max_error: error.values().amax(),
    }
}
