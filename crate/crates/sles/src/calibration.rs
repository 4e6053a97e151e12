//! Closure calibration from fine-mesh ensembles: perturbed-IC ensemble
//! generation, the cubic mean-drift fit, and the noise-intensity profile
//! `sigma(x)` estimated from the fluctuating subgrid residual.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtering::{coarse_view, FilterNormalization, GaussianFilter, SgsField};
use crate::solver::{solve, MemoryKernel, SolverConfig};
use crate::spectral::{quad_weights, ChebyshevGrid, Field, Trajectory};

/// Gram matrices with condition numbers beyond this are treated as rank
/// deficient.
const MAX_GRAM_CONDITION: f64 = 1e12;

/// Initial-condition perturbation: member `m` starts from
/// `base + epsilon * xi_m * sin(pi x)` with `xi_m ~ U(-1, 1)` drawn from
/// stream `m` of a seeded generator, and the perturbation forced to zero
/// at the boundary nodes so the Dirichlet data is preserved exactly.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub epsilon: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                message: format!("perturbation amplitude must be nonnegative, got {epsilon}"),
            });
        }
        Ok(Self { epsilon, seed })
    }

    /// The uniform factor `xi_m` for member `m`; reproducible from
    /// `(seed, m)` alone.
    pub fn member_factor(&self, member: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(member as u64);
        2.0 * rng.random::<f64>() - 1.0
    }

    /// Perturbed initial condition for member `m`.
    pub fn perturb(&self, base: &Field, member: usize) -> Field {
        let xi = self.member_factor(member);
        let n = base.grid().order();
        let mut out = base.clone();
        for (j, &x) in base.grid().nodes().iter().enumerate() {
            if j == 0 || j == n {
                continue;
            }
            out.values_mut()[j] += self.epsilon * xi * (std::f64::consts::PI * x).sin();
        }
        out
    }
}

/// One fine-mesh realization together with its coarse-grid views.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    /// Fine-grid trajectory.
    pub fine: Trajectory,
    /// Filtered solution restricted to the coarse grid.
    pub filtered_coarse: Trajectory,
    /// Raw solution restricted to the coarse grid.
    pub raw_coarse: Trajectory,
    /// Subgrid residual on the coarse grid.
    pub sgs: SgsField,
}

/// A perturbed-IC ensemble of fine solves with shared configuration.
#[derive(Clone, Debug)]
pub struct Ensemble {
    members: Vec<EnsembleMember>,
    fine_grid: ChebyshevGrid,
    coarse_grid: ChebyshevGrid,
    solver: SolverConfig,
    beta: f64,
    delta: f64,
}

impl Ensemble {
    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn fine_grid(&self) -> &ChebyshevGrid {
        &self.fine_grid
    }

    pub fn coarse_grid(&self) -> &ChebyshevGrid {
        &self.coarse_grid
    }

    pub fn solver_config(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The members' subgrid residuals.
    pub fn sgs_fields(&self) -> Vec<SgsField> {
        self.members.iter().map(|m| m.sgs.clone()).collect()
    }
}

/// Run `member_count` fine solves from perturbed initial conditions and
/// extract each member's coarse-grid views. Members are independent and
/// solved in parallel; member `m` is reproducible from `(spec.seed, m)`.
#[allow(clippy::too_many_arguments)]
pub fn generate_ensemble(
    base_ic: &Field,
    spec: &PerturbationSpec,
    member_count: usize,
    config: &SolverConfig,
    kernel: &MemoryKernel,
    delta: f64,
    coarse: &ChebyshevGrid,
    normalization: FilterNormalization,
) -> Result<Ensemble> {
    if member_count < 2 {
        return Err(Error::InsufficientEnsemble {
            required: 2,
            actual: member_count,
        });
    }
    let filter = GaussianFilter::new(base_ic.grid(), delta, normalization)?;
    let members: Vec<EnsembleMember> = (0..member_count)
        .into_par_iter()
        .map(|m| {
            let ic = spec.perturb(base_ic, m);
            let fine = solve(&ic, config, kernel)?;
            let view = coarse_view(&fine, &filter, coarse)?;
            Ok(EnsembleMember {
                fine,
                filtered_coarse: view.filtered,
                raw_coarse: view.raw,
                sgs: view.sgs,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        members,
        fine_grid: base_ic.grid().clone(),
        coarse_grid: coarse.clone(),
        solver: *config,
        beta: kernel.beta(),
        delta,
    })
}

/// Pointwise ensemble mean of subgrid residual fields.
pub fn mean_sgs_fields(fields: &[SgsField]) -> Result<SgsField> {
    let m = fields.len();
    if m == 0 {
        return Err(Error::InsufficientEnsemble {
            required: 1,
            actual: 0,
        });
    }
    let first = &fields[0];
    if fields.iter().any(|f| !f.same_shape(first)) {
        return Err(Error::Alignment {
            message: "subgrid fields have mismatched shapes".into(),
        });
    }
    let mut acc = DMatrix::zeros(first.len(), first.grid().len());
    for f in fields {
        acc += f.values();
    }
    acc /= m as f64;
    SgsField::new(first.grid().clone(), first.dt(), acc)
}

/// Ensemble mean of the subgrid residual, `E R(x, t)`.
pub fn mean_sgs(ensemble: &Ensemble) -> Result<SgsField> {
    let fields: Vec<SgsField> = ensemble.sgs_fields();
    mean_sgs_fields(&fields)
}

/// Ensemble mean of the filtered solution on the coarse grid (the field
/// the drift fit is expressed in).
pub fn mean_filtered_coarse(ensemble: &Ensemble) -> Result<Trajectory> {
    if ensemble.is_empty() {
        return Err(Error::InsufficientEnsemble {
            required: 1,
            actual: 0,
        });
    }
    let steps = ensemble.members[0].filtered_coarse.len();
    let grid = ensemble.coarse_grid.clone();
    let mut fields = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut acc = DVector::zeros(grid.len());
        for member in &ensemble.members {
            acc += member.filtered_coarse.field(k).values();
        }
        acc /= ensemble.len() as f64;
        fields.push(Field::new(grid.clone(), acc)?);
    }
    Trajectory::new(grid, ensemble.members[0].filtered_coarse.dt(), fields)
}

/// Cubic drift coefficients `f(u) = a0 + a1 u + a2 u^2 + a3 u^3`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DriftFit {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    /// Condition number of the 4x4 weighted Gram matrix.
    pub condition_number: f64,
}

impl DriftFit {
    pub fn zero() -> Self {
        Self {
            a0: 0.0,
            a1: 0.0,
            a2: 0.0,
            a3: 0.0,
            condition_number: 1.0,
        }
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a0, self.a1, self.a2, self.a3]
    }

    /// Evaluate the cubic at `u`.
    pub fn eval(&self, u: f64) -> f64 {
        self.a0 + u * (self.a1 + u * (self.a2 + u * self.a3))
    }
}

/// Weights of the space-time inner product behind the drift fit:
/// Clenshaw–Curtis in x, trapezoid in t.
fn fit_weights(grid: &ChebyshevGrid, steps: usize, dt: f64) -> (DVector<f64>, Vec<f64>) {
    let wx = quad_weights(grid);
    let wt: Vec<f64> = (0..steps)
        .map(|k| {
            if steps == 1 {
                1.0
            } else if k == 0 || k == steps - 1 {
                0.5 * dt
            } else {
                dt
            }
        })
        .collect();
    (wx, wt)
}

/// Weighted least-squares fit of the cubic drift to the mean residual:
/// minimizes `integral_0^T integral_D [f(ubar) - mean_r]^2 dx dt` over
/// the coefficients, with the quadrature weights of [`fit_weights`].
pub fn fit_drift(mean_r: &SgsField, ubar: &Trajectory) -> Result<DriftFit> {
    if !mean_r.grid().same_grid(ubar.grid())
        || mean_r.len() != ubar.len()
        || mean_r.dt() != ubar.dt()
    {
        return Err(Error::Alignment {
            message: "mean residual and filtered solution are not on matching grids/steps".into(),
        });
    }
    let steps = mean_r.len();
    let grid = mean_r.grid();
    let (wx, wt) = fit_weights(grid, steps, mean_r.dt());

    let mut gram = Matrix4::<f64>::zeros();
    let mut rhs = Vector4::<f64>::zeros();
    for k in 0..steps {
        for j in 0..grid.len() {
            let w = wt[k] * wx[j];
            let u = ubar.field(k).value(j);
            let phi = [1.0, u, u * u, u * u * u];
            for a in 0..4 {
                rhs[a] += w * phi[a] * mean_r.value(k, j);
                for b in 0..4 {
                    gram[(a, b)] += w * phi[a] * phi[b];
                }
            }
        }
    }

    let svd = gram.svd(false, false);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let condition_number = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !condition_number.is_finite() || condition_number > MAX_GRAM_CONDITION {
        return Err(Error::DegenerateFit {
            condition: condition_number,
        });
    }
    let coeffs = gram
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateFit {
            condition: condition_number,
        })?;
    Ok(DriftFit {
        a0: coeffs[0],
        a1: coeffs[1],
        a2: coeffs[2],
        a3: coeffs[3],
        condition_number,
    })
}

/// Weighted residual norm of a candidate drift against the mean residual
/// (the objective the fit minimizes); used by diagnostics and tests.
pub fn drift_residual_norm(fit: &DriftFit, mean_r: &SgsField, ubar: &Trajectory) -> f64 {
    let steps = mean_r.len();
    let grid = mean_r.grid();
    let (wx, wt) = fit_weights(grid, steps, mean_r.dt());
    let mut acc = 0.0;
    for k in 0..steps {
        for j in 0..grid.len() {
            let r = fit.eval(ubar.field(k).value(j)) - mean_r.value(k, j);
            acc += wt[k] * wx[j] * r * r;
        }
    }
    acc.sqrt()
}

/// Nonnegative noise-intensity profile on the coarse grid.
#[derive(Clone, Debug)]
pub struct SigmaProfile {
    grid: ChebyshevGrid,
    values: DVector<f64>,
}

impl SigmaProfile {
    pub fn new(grid: ChebyshevGrid, values: DVector<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Alignment {
                message: format!("{} sigma values vs {} nodes", values.len(), grid.len()),
            });
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                message: "noise intensity must be nonnegative and finite".into(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &ChebyshevGrid) -> Self {
        Self {
            grid: grid.clone(),
            values: DVector::zeros(grid.len()),
        }
    }

    pub fn grid(&self) -> &ChebyshevGrid {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn value(&self, j: usize) -> f64 {
        self.values[j]
    }
}

/// Estimate `sigma(x)` from the fluctuating residual:
/// `sigma(x) = sqrt(E [integral_0^T (R - E R) dt]^2) / T^H`, with the
/// time integral a trapezoid and the expectation the unbiased (M-1)
/// ensemble mean square.
pub fn estimate_sigma(
    members: &[SgsField],
    mean_r: &SgsField,
    t_window: f64,
    hurst: f64,
) -> Result<SigmaProfile> {
    let m = members.len();
    if m < 2 {
        return Err(Error::InsufficientEnsemble {
            required: 2,
            actual: m,
        });
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::InvalidHurst { h: hurst });
    }
    if members.iter().any(|f| !f.same_shape(mean_r)) {
        return Err(Error::Alignment {
            message: "members and mean residual have mismatched shapes".into(),
        });
    }
    let steps = mean_r.len();
    if steps < 2 {
        return Err(Error::Alignment {
            message: "need at least two time levels to integrate".into(),
        });
    }
    let dt = mean_r.dt();
    let expected_t = (steps - 1) as f64 * dt;
    if (t_window - expected_t).abs() > 1e-9 * expected_t.max(dt) {
        return Err(Error::InvalidParameter {
            name: "t_window",
            message: format!(
                "window {t_window} does not match the ensemble horizon {expected_t}"
            ),
        });
    }

    let grid = mean_r.grid().clone();
    let wt: Vec<f64> = (0..steps)
        .map(|k| if k == 0 || k == steps - 1 { 0.5 * dt } else { dt })
        .collect();
    let mut sigma = DVector::zeros(grid.len());
    for j in 0..grid.len() {
        let mut mean_square = 0.0;
        for member in members {
            let mut integral = 0.0;
            for k in 0..steps {
                integral += wt[k] * (member.value(k, j) - mean_r.value(k, j));
            }
            mean_square += integral * integral;
        }
        mean_square /= (m - 1) as f64;
        sigma[j] = mean_square.sqrt() / t_window.powf(hurst);
    }
    SigmaProfile::new(grid, sigma)
}

/// A calibrated subgrid closure: cubic drift, noise profile, and the
/// parameters it was produced under.
#[derive(Clone, Debug)]
pub struct SgsModel {
    pub drift: DriftFit,
    pub sigma: SigmaProfile,
    pub hurst: f64,
    pub t_window: f64,
    pub delta: f64,
    pub beta: f64,
}

impl SgsModel {
    /// The inert closure (zero drift, zero noise) with the given
    /// provenance; the stochastic model reduces to the plain coarse solve.
    pub fn zero(grid: &ChebyshevGrid, hurst: f64, t_window: f64, delta: f64, beta: f64) -> Self {
        Self {
            drift: DriftFit::zero(),
            sigma: SigmaProfile::zeros(grid),
            hurst,
            t_window,
            delta,
            beta,
        }
    }
}

/// Calibrate the full closure from an ensemble: mean residual, cubic
/// drift in the ensemble-mean filtered solution, and noise profile.
pub fn calibrate_model(ensemble: &Ensemble, hurst: f64) -> Result<SgsModel> {
    let mean_r = mean_sgs(ensemble)?;
    let ubar = mean_filtered_coarse(ensemble)?;
    let drift = fit_drift(&mean_r, &ubar)?;
    let t_window = ensemble.solver_config().t_end;
    let sgs_members = ensemble.sgs_fields();
    let sigma = estimate_sigma(&sgs_members, &mean_r, t_window, hurst)?;
    Ok(SgsModel {
        drift,
        sigma,
        hurst,
        t_window,
        delta: ensemble.delta(),
        beta: ensemble.beta(),
    })
}
