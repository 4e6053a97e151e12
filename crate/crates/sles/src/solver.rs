//! Semi-implicit time integration of the nonlinear reaction-diffusion
//! equation with a polynomially decaying memory term,
//!
//! ```text
//! u_t = u_xx + u - u^3 + integral_0^t u(x,s) / (1 + (t-s)^beta) ds,
//! ```
//!
//! with Dirichlet data `u(-1,t) = a`, `u(+1,t) = b`. Diffusion is treated
//! implicitly (one LU factorization per run, Dirichlet rows pinned to
//! identity); reaction, memory, extra drift, and noise enter explicitly.
//! The memory integral is a composite trapezoid over the full stored
//! history, so a K-step run costs O(K^2) kernel applications.

use nalgebra::linalg::LU;
use nalgebra::DVector;
use nalgebra::{Dyn, OMatrix};

use crate::error::{Error, Result};
use crate::spectral::{diff_matrix, ChebyshevGrid, Field, Trajectory};

type DenseLu = LU<f64, Dyn, Dyn>;

/// Memory kernel `k(tau) = 1 / (1 + tau^beta)`, `beta > 0`.
#[derive(Clone, Copy, Debug)]
pub struct MemoryKernel {
    beta: f64,
}

impl MemoryKernel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                message: format!("kernel exponent must be positive and finite, got {beta}"),
            });
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Evaluate `k(tau)` for `tau >= 0`.
    pub fn eval(&self, tau: f64) -> Result<f64> {
        if tau < 0.0 {
            return Err(Error::NegativeLag { tau });
        }
        Ok(1.0 / (1.0 + tau.powf(self.beta)))
    }
}

/// Time-stepping configuration with Dirichlet boundary values
/// `u(-1,t) = bc_left`, `u(+1,t) = bc_right`.
#[derive(Clone, Copy, Debug)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub bc_left: f64,
    pub bc_right: f64,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, bc_left: f64, bc_right: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            bc_left,
            bc_right,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                message: format!("time step must be positive, got {}", self.dt),
            });
        }
        if self.t_end < self.dt {
            return Err(Error::InvalidParameter {
                name: "t_end",
                message: format!(
                    "final time {} is shorter than one step {}",
                    self.t_end, self.dt
                ),
            });
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(self.dt) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                message: format!(
                    "t_end {} is not an integer multiple of dt {}",
                    self.t_end, self.dt
                ),
            });
        }
        Ok(())
    }

    /// Number of time steps `K = t_end / dt`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Stored past states `u(., t_k)` feeding the memory quadrature.
#[derive(Clone, Debug, Default)]
pub struct HistoryBuffer {
    fields: Vec<Field>,
}

impl HistoryBuffer {
    pub fn new() -> Self {
        Self { fields: Vec::new() }
    }

    pub fn with_initial(ic: Field) -> Self {
        Self { fields: vec![ic] }
    }

    pub fn push(&mut self, field: Field) -> Result<()> {
        if let Some(first) = self.fields.first() {
            if !first.grid().same_grid(field.grid()) {
                return Err(Error::InconsistentHistory {
                    message: "pushed field lives on a different grid".into(),
                });
            }
        }
        self.fields.push(field);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, k: usize) -> &Field {
        &self.fields[k]
    }

    pub fn last(&self) -> Option<&Field> {
        self.fields.last()
    }

    pub fn into_fields(self) -> Vec<Field> {
        self.fields
    }
}

/// Composite trapezoid approximation of
/// `integral_0^t k(t - s) u(x, s) ds`, nodewise.
///
/// The history must hold the states at `0, dt, ..., t` in order.
pub fn memory_integral(
    history: &HistoryBuffer,
    kernel: &MemoryKernel,
    t: f64,
    dt: f64,
) -> Result<Field> {
    if history.is_empty() {
        return Err(Error::InconsistentHistory {
            message: format!("history is empty but the integral up to t = {t} was requested"),
        });
    }
    let m = (t / dt).round() as usize;
    if (m as f64 * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(Error::InconsistentHistory {
            message: format!("t = {t} is not a multiple of dt = {dt}"),
        });
    }
    if history.len() < m + 1 {
        return Err(Error::InconsistentHistory {
            message: format!(
                "history holds {} states but {} are needed to reach t = {t}",
                history.len(),
                m + 1
            ),
        });
    }
    let grid = history.field(0).grid().clone();
    let mut acc = DVector::zeros(grid.len());
    if m == 0 {
        return Field::new(grid, acc);
    }
    for j in 0..=m {
        let tau = (m - j) as f64 * dt;
        let weight = if j == 0 || j == m { 0.5 } else { 1.0 };
        let coeff = weight * kernel.eval(tau)? * dt;
        acc.axpy(coeff, history.field(j).values(), 1.0);
    }
    Field::new(grid, acc)
}

/// LU factorization of the implicit operator `I - dt * D2` with the
/// Dirichlet rows (0 and n) replaced by identity rows.
pub(crate) fn implicit_lu(grid: &ChebyshevGrid, dt: f64) -> Result<DenseLu> {
    let n = grid.order();
    let d2 = diff_matrix(grid, 2)?;
    let mut a: OMatrix<f64, Dyn, Dyn> = -dt * d2.entries();
    for i in 0..=n {
        a[(i, i)] += 1.0;
    }
    for j in 0..=n {
        a[(0, j)] = if j == 0 { 1.0 } else { 0.0 };
        a[(n, j)] = if j == n { 1.0 } else { 0.0 };
    }
    Ok(a.lu())
}

/// Explicit right-hand side plus implicit solve for one step; shared by the
/// deterministic and the stochastic integrators so that a zero forcing is
/// bit-identical to the deterministic path.
fn semi_implicit_step(
    lu: &DenseLu,
    current: &Field,
    memory: &Field,
    config: &SolverConfig,
    extra_drift: &Field,
    noise_increment: &Field,
) -> Result<Field> {
    let n = current.grid().order();
    let u = current.values();
    let mut rhs = DVector::zeros(u.len());
    for j in 0..u.len() {
        let uj = u[j];
        let reaction = uj - uj * uj * uj;
        rhs[j] = uj
            + config.dt * (reaction + memory.values()[j] + extra_drift.values()[j])
            + noise_increment.values()[j];
    }
    rhs[0] = config.bc_right;
    rhs[n] = config.bc_left;
    let mut next = lu.solve(&rhs).ok_or(Error::SingularOperator)?;
    // LU pivoting perturbs the identity rows at roundoff level; re-pin so
    // the boundary data is bit-exact.
    next[0] = config.bc_right;
    next[n] = config.bc_left;
    Field::new(current.grid().clone(), next)
}

/// One semi-implicit step from the state at the history tail.
///
/// `extra_drift` enters the right-hand side multiplied by `dt`;
/// `noise_increment` is added as-is (Euler–Maruyama form, i.e. pass
/// `sigma(x) * dB`, not `sigma(x) * dB / dt`). Both are zero for the
/// deterministic equation. The returned field satisfies the boundary
/// values exactly.
pub fn step(
    current: &Field,
    history: &HistoryBuffer,
    config: &SolverConfig,
    kernel: &MemoryKernel,
    extra_drift: &Field,
    noise_increment: &Field,
) -> Result<Field> {
    config.validate()?;
    let tail = history.last().ok_or_else(|| Error::InconsistentHistory {
        message: "history must contain the current state".into(),
    })?;
    if tail.values() != current.values() {
        return Err(Error::InconsistentHistory {
            message: "current state differs from the history tail".into(),
        });
    }
    let t_now = (history.len() - 1) as f64 * config.dt;
    let memory = memory_integral(history, kernel, t_now, config.dt)?;
    let lu = implicit_lu(current.grid(), config.dt)?;
    semi_implicit_step(&lu, current, &memory, config, extra_drift, noise_increment)
}

/// Per-step forcing supplied to [`solve_driven`]: returns the extra drift
/// field and the additive noise increment for the step leaving `t_k`.
pub(crate) trait Forcing {
    fn at_step(&mut self, k: usize, current: &Field) -> Result<(Field, Field)>;
}

pub(crate) struct ZeroForcing;

impl Forcing for ZeroForcing {
    fn at_step(&mut self, _k: usize, current: &Field) -> Result<(Field, Field)> {
        Ok((Field::zeros(current.grid()), Field::zeros(current.grid())))
    }
}

/// Shared integration loop behind [`solve`] and the stochastic model.
pub(crate) fn solve_driven(
    ic: &Field,
    config: &SolverConfig,
    kernel: &MemoryKernel,
    forcing: &mut dyn Forcing,
) -> Result<Trajectory> {
    config.validate()?;
    let grid = ic.grid().clone();
    let n = grid.order();
    let dev = (ic.value(0) - config.bc_right)
        .abs()
        .max((ic.value(n) - config.bc_left).abs());
    if dev > 1e-12 {
        return Err(Error::BoundaryMismatch { deviation: dev });
    }

    let lu = implicit_lu(&grid, config.dt)?;
    let steps = config.steps();
    let mut history = HistoryBuffer::with_initial(ic.clone());
    let mut current = ic.clone();
    for k in 0..steps {
        let (drift, noise) = forcing.at_step(k, &current)?;
        let t_now = k as f64 * config.dt;
        let memory = memory_integral(&history, kernel, t_now, config.dt)?;
        let next = semi_implicit_step(&lu, &current, &memory, config, &drift, &noise)?;
        history.push(next.clone())?;
        current = next;
    }
    Trajectory::new(grid, config.dt, history.into_fields())
}

/// Integrate the deterministic memory PDE from `ic` up to `t_end`.
///
/// The initial condition must satisfy the boundary values to within
/// 1e-12; boundary rows are pinned exactly at every step.
pub fn solve(ic: &Field, config: &SolverConfig, kernel: &MemoryKernel) -> Result<Trajectory> {
    solve_driven(ic, config, kernel, &mut ZeroForcing)
}

/// The benchmark initial profile `0.53 x - 0.47 sin(1.5 pi x)`.
pub fn benchmark_initial_condition(grid: &ChebyshevGrid) -> Field {
    Field::from_fn(grid, |x| {
        0.53 * x - 0.47 * (1.5 * std::f64::consts::PI * x).sin()
    })
}
