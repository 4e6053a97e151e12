//! Fractional Brownian motion: exact Cholesky sampling (the validation
//! oracle), the randomized Weierstrass–Mandelbrot approximation used by
//! the stochastic model, and covariance / Hurst diagnostics.
//!
//! All generators take an explicit seed and are bit-reproducible; there
//! is no global RNG state.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Configuration of the Weierstrass–Mandelbrot generator.
///
/// The series `w(t) = sum_j C_j r^{jH} sin(2 pi r^{-j} t + d_j)` is
/// truncated to `j in [j_min, j_max]`; `C_j ~ N(0,1)`,
/// `d_j ~ U[0, 2 pi)`. The default bounds `[-48, 48]` with `r = 0.9`
/// cover frequencies `r^{-j}` from ~6.4e-3 to ~157.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FbmConfig {
    pub hurst: f64,
    /// Lacunary base, `0 < r < 1`.
    pub r: f64,
    pub j_min: i32,
    pub j_max: i32,
    pub seed: u64,
}

impl FbmConfig {
    pub fn new(hurst: f64, r: f64, j_min: i32, j_max: i32, seed: u64) -> Result<Self> {
        let cfg = Self {
            hurst,
            r,
            j_min,
            j_max,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_hurst(self.hurst)?;
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::InvalidParameter {
                name: "r",
                message: format!("lacunary base must lie in (0, 1), got {}", self.r),
            });
        }
        if self.j_min > 0 || self.j_max < 0 {
            return Err(Error::InvalidParameter {
                name: "j_min/j_max",
                message: format!(
                    "truncation must bracket 0: j_min = {}, j_max = {}",
                    self.j_min, self.j_max
                ),
            });
        }
        Ok(())
    }
}

fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidHurst { h });
    }
    Ok(())
}

/// A sampled fractional Brownian motion path; always starts at
/// `(t, value) = (0, 0)`.
#[derive(Clone, Debug)]
pub struct FbmPath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl FbmPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::InvalidParameter {
                name: "times",
                message: "times and values must be equally long and nonempty".into(),
            });
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidParameter {
                name: "times",
                message: format!("paths start at t = 0, got t0 = {}", times[0]),
            });
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter {
                name: "times",
                message: "times must be strictly increasing".into(),
            });
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidParameter {
                name: "values",
                message: format!("paths start at zero, got {}", values[0]),
            });
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Dump as CSV with header `t,value`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}

/// Uniform sample times `0, dt, ..., steps * dt`.
pub fn uniform_times(dt: f64, steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * dt).collect()
}

/// fBM covariance `E[B(t) B(s)] = (|t|^{2H} + |s|^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_covariance(h: f64, s: f64, t: f64) -> Result<f64> {
    check_hurst(h)?;
    let e = 2.0 * h;
    Ok(0.5 * (t.abs().powf(e) + s.abs().powf(e) - (t - s).abs().powf(e)))
}

/// Exact fBM sampling through a Cholesky factorization of the covariance
/// matrix (`O(n^3)`; the matrix is ill-conditioned for dense grids, in
/// which case the factorization error suggests remedies).
///
/// `times` must be strictly increasing and start at 0; the zero row and
/// column are excluded from the factorization and the path is pinned to
/// `B(0) = 0`.
pub fn cholesky_fbm(times: &[f64], h: f64, seed: u64) -> Result<FbmPath> {
    check_hurst(h)?;
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::InvalidParameter {
            name: "times",
            message: "times must start at 0".into(),
        });
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            name: "times",
            message: "times must be strictly increasing".into(),
        });
    }
    let m = times.len() - 1;
    let mut values = vec![0.0_f64; times.len()];
    if m > 0 {
        let cov = DMatrix::from_fn(m, m, |i, j| {
            fbm_covariance(h, times[i + 1], times[j + 1]).expect("hurst validated")
        });
        let chol = cov.cholesky().ok_or(Error::CovarianceFactorization)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sample = chol.l() * z;
        values[1..].copy_from_slice(sample.as_slice());
    }
    FbmPath::new(times.to_vec(), values)
}

/// Random coefficients of one Weierstrass–Mandelbrot realization:
/// `(C_j, d_j)` for `j = j_min ..= j_max` in order.
pub fn wm_coefficients(config: &FbmConfig) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (config.j_min..=config.j_max)
        .map(|_| {
            let c: f64 = rng.sample(StandardNormal);
            let d: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            (c, d)
        })
        .collect()
}

/// The raw truncated series
/// `w(t) = sum_j C_j r^{jH} sin(2 pi r^{-j} t + d_j)` evaluated at each
/// time; no zero adjustment, no amplitude normalization.
pub fn wm_raw(times: &[f64], hurst: f64, r: f64, j_min: i32, j_max: i32, coeffs: &[(f64, f64)]) -> Vec<f64> {
    let terms: Vec<(f64, f64, f64, f64)> = (j_min..=j_max)
        .zip(coeffs)
        .map(|(j, &(c, d))| {
            let amp = r.powf(j as f64 * hurst);
            let freq = std::f64::consts::TAU * r.powf(-j as f64);
            (c, d, amp, freq)
        })
        .collect();
    times
        .iter()
        .map(|&t| {
            terms
                .iter()
                .map(|&(c, d, amp, freq)| c * amp * (freq * t + d).sin())
                .sum()
        })
        .collect()
}

/// Expected squared displacement of the raw truncated series:
/// `E[(w(t) - w(0))^2] = sum_j r^{2jH} * 2 sin^2(pi r^{-j} t)`.
fn wm_raw_msd(t: f64, hurst: f64, r: f64, j_min: i32, j_max: i32) -> f64 {
    (j_min..=j_max)
        .map(|j| {
            let s = (std::f64::consts::PI * r.powf(-j as f64) * t).sin();
            r.powf(2.0 * j as f64 * hurst) * 2.0 * s * s
        })
        .sum()
}

/// Sample one fBM approximation by the randomized Weierstrass–Mandelbrot
/// series.
///
/// The raw series does not vanish at `t = 0`, so `w(0)` is subtracted;
/// the truncated series also carries an unstated amplitude constant, so
/// the path is rescaled by `T^H / sqrt(E[(w(T) - w(0))^2])` (analytic,
/// from the coefficient distribution), making `E[B(T)^2] = T^{2H}` exact
/// for the horizon `T = times.last()`.
pub fn wm_fbm(times: &[f64], config: &FbmConfig) -> Result<FbmPath> {
    config.validate()?;
    if times.is_empty() || times[0] != 0.0 {
        return Err(Error::InvalidParameter {
            name: "times",
            message: "times must start at 0".into(),
        });
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            name: "times",
            message: "times must be strictly increasing".into(),
        });
    }
    if times.len() == 1 {
        return FbmPath::new(times.to_vec(), vec![0.0]);
    }
    let coeffs = wm_coefficients(config);
    let raw = wm_raw(times, config.hurst, config.r, config.j_min, config.j_max, &coeffs);
    let horizon = *times.last().expect("nonempty");
    let msd = wm_raw_msd(horizon, config.hurst, config.r, config.j_min, config.j_max);
    if !(msd > 0.0) {
        return Err(Error::InvalidParameter {
            name: "times",
            message: format!(
                "truncated series has zero expected displacement at T = {horizon}; \
                 widen the j range"
            ),
        });
    }
    let scale = horizon.powf(config.hurst) / msd.sqrt();
    let w0 = raw[0];
    let mut values: Vec<f64> = raw.iter().map(|&w| scale * (w - w0)).collect();
    values[0] = 0.0;
    FbmPath::new(times.to_vec(), values)
}

/// First differences of the path values.
pub fn increments(path: &FbmPath) -> Result<Vec<f64>> {
    if path.len() < 2 {
        return Err(Error::PathTooShort);
    }
    Ok(path.values().windows(2).map(|w| w[1] - w[0]).collect())
}

/// Variance-scaling Hurst estimate: regress
/// `ln E|B(t + L dt) - B(t)|^2` on `ln (L dt)` over the given lag counts
/// and return `slope / 2`. The expectation pools all paths and all valid
/// start times; the paths must share one uniform time grid.
pub fn estimate_hurst(paths: &[FbmPath], lag_steps: &[usize]) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::InvalidParameter {
            name: "paths",
            message: "need at least one path".into(),
        });
    }
    if lag_steps.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "lag_steps",
            message: "need at least two lags to regress".into(),
        });
    }
    let times = paths[0].times();
    let len = times.len();
    let dt = times[1] - times[0];
    let uniform = times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-12 * dt.abs());
    if !uniform || paths.iter().any(|p| p.times() != times) {
        return Err(Error::InvalidParameter {
            name: "paths",
            message: "paths must share one uniform time grid".into(),
        });
    }
    let max_lag = *lag_steps.iter().max().expect("nonempty");
    if max_lag == 0 || max_lag >= len {
        return Err(Error::InvalidParameter {
            name: "lag_steps",
            message: format!("lags must lie in 1..{len}"),
        });
    }

    let mut xs = Vec::with_capacity(lag_steps.len());
    let mut ys = Vec::with_capacity(lag_steps.len());
    for &lag in lag_steps {
        let mut acc = 0.0;
        let mut count = 0usize;
        for p in paths {
            let v = p.values();
            for k in 0..len - lag {
                let d = v[k + lag] - v[k];
                acc += d * d;
                count += 1;
            }
        }
        xs.push((lag as f64 * dt).ln());
        ys.push((acc / count as f64).ln());
    }

    // OLS slope.
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok(slope / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn covariance_basics() {
        for &h in &[0.25, 0.5, 0.75] {
            assert_eq!(fbm_covariance(h, 1.0, 1.0).unwrap(), 1.0);
        }
        // Brownian case reduces to min(s, t).
        assert_eq!(fbm_covariance(0.5, 1.0, 2.0).unwrap(), 1.0);
        // H = 3/4, s = 1, t = 2: (1 + 2^1.5 - 1)/2 = sqrt(2).
        assert_abs_diff_eq!(
            fbm_covariance(0.75, 1.0, 2.0).unwrap(),
            std::f64::consts::SQRT_2,
            epsilon = 1e-15
        );
        assert!(matches!(
            fbm_covariance(0.0, 1.0, 1.0),
            Err(Error::InvalidHurst { .. })
        ));
        assert!(matches!(
            fbm_covariance(1.0, 1.0, 1.0),
            Err(Error::InvalidHurst { .. })
        ));
    }

    #[test]
    fn cholesky_zero_grid_is_zero_path() {
        let path = cholesky_fbm(&[0.0], 0.75, 1).unwrap();
        assert_eq!(path.values(), &[0.0]);
    }

    #[test]
    fn cholesky_requires_increasing_times_from_zero() {
        assert!(cholesky_fbm(&[0.5, 1.0], 0.75, 1).is_err());
        assert!(cholesky_fbm(&[0.0, 0.5, 0.5], 0.75, 1).is_err());
    }

    #[test]
    fn cholesky_near_duplicate_times_fail_factorization() {
        let times = [0.0, 0.5, 0.5 + 2e-16, 1.0];
        assert!(matches!(
            cholesky_fbm(&times, 0.75, 3),
            Err(Error::CovarianceFactorization)
        ));
    }

    #[test]
    fn cholesky_variance_and_increment_autocorrelation() {
        // Monte Carlo against the exact law: Var B(1) = 1 and lag-1
        // increment autocorrelation 2^{2H-1} - 1 for H = 3/4.
        let h = 0.75;
        let times = uniform_times(1.0 / 32.0, 32);
        let n_paths = 5000;
        let mut sum_sq = 0.0;
        let mut lag_num = 0.0;
        let mut lag_den = 0.0;
        for seed in 0..n_paths {
            let path = cholesky_fbm(&times, h, seed).unwrap();
            let last = *path.values().last().unwrap();
            sum_sq += last * last;
            let inc = increments(&path).unwrap();
            for w in inc.windows(2) {
                lag_num += w[0] * w[1];
            }
            for &d in &inc {
                lag_den += d * d;
            }
        }
        let var = sum_sq / n_paths as f64;
        assert!((var - 1.0).abs() < 0.05, "Var B(1) = {var}");
        // Pooled lag-1 autocorrelation: mean products over mean squares,
        // correcting for the 31-vs-32 term counts per path.
        let rho = (lag_num / 31.0) / (lag_den / 32.0);
        let expected = (2.0_f64).powf(2.0 * h - 1.0) - 1.0;
        assert!(
            (rho - expected).abs() < 0.05,
            "lag-1 autocorr {rho} vs {expected}"
        );
    }

    #[test]
    fn cholesky_brownian_increments_uncorrelated() {
        // H = 1/2: disjoint increments are independent.
        let times = [0.0, 0.5, 1.0];
        let n_paths = 5000;
        let (mut sa, mut sb, mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in 0..n_paths {
            let p = cholesky_fbm(&times, 0.5, seed).unwrap();
            let a = p.values()[1] - p.values()[0];
            let b = p.values()[2] - p.values()[1];
            sa += a;
            sb += b;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        let n = n_paths as f64;
        let cov = sab / n - (sa / n) * (sb / n);
        let corr = cov / ((saa / n - (sa / n).powi(2)) * (sbb / n - (sb / n).powi(2))).sqrt();
        assert!(corr.abs() < 0.05, "increment correlation {corr}");
    }

    #[test]
    fn cholesky_empirical_covariance_matches_formula() {
        // Spot-check the empirical covariance on a 24-point grid over
        // 1e4 paths at 5 seeded random entries, three-sigma MC band.
        let h = 0.7;
        let steps = 24;
        let times = uniform_times(1.0 / steps as f64, steps);
        let n_paths = 10_000;
        let mut sums = DMatrix::<f64>::zeros(steps, steps);
        for seed in 0..n_paths {
            let p = cholesky_fbm(&times, h, 77_000 + seed).unwrap();
            for i in 0..steps {
                for j in 0..steps {
                    sums[(i, j)] += p.values()[i + 1] * p.values()[j + 1];
                }
            }
        }
        let max_entry = fbm_covariance(h, 1.0, 1.0).unwrap();
        let band = 5.0 * max_entry / (n_paths as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let i = (rng.random::<f64>() * steps as f64) as usize;
            let j = (rng.random::<f64>() * steps as f64) as usize;
            let emp = sums[(i, j)] / n_paths as f64;
            let exact = fbm_covariance(h, times[i + 1], times[j + 1]).unwrap();
            assert!(
                (emp - exact).abs() < band,
                "cov({i},{j}): {emp} vs {exact} (band {band})"
            );
        }
    }

    #[test]
    fn cholesky_increment_variance_is_stationary() {
        // Var(B(t + d) - B(t)) = d^{2H} regardless of t.
        let h = 0.75;
        let steps = 16;
        let times = uniform_times(1.0 / steps as f64, steps);
        let n_paths = 8000;
        let mut var_at = vec![0.0_f64; steps];
        for seed in 0..n_paths {
            let p = cholesky_fbm(&times, h, 31_000 + seed).unwrap();
            let inc = increments(&p).unwrap();
            for (k, &d) in inc.iter().enumerate() {
                var_at[k] += d * d;
            }
        }
        let expected = (1.0 / steps as f64).powf(2.0 * h);
        for (k, &s) in var_at.iter().enumerate() {
            let v = s / n_paths as f64;
            assert!(
                (v / expected - 1.0).abs() < 0.1,
                "step {k}: var {v} vs {expected}"
            );
        }
    }

    #[test]
    fn wm_single_term_is_plain_sine() {
        let times: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let raw = wm_raw(&times, 0.75, 0.9, 0, 0, &[(1.0, 0.0)]);
        for (&t, &v) in times.iter().zip(&raw) {
            assert_abs_diff_eq!(v, (std::f64::consts::TAU * t).sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn wm_is_deterministic_per_seed() {
        let cfg = FbmConfig::new(0.75, 0.9, -48, 48, 12345).unwrap();
        let times = uniform_times(0.01, 100);
        let a = wm_fbm(&times, &cfg).unwrap();
        let b = wm_fbm(&times, &cfg).unwrap();
        assert_eq!(a.values(), b.values());
        let other = wm_fbm(&times, &FbmConfig::new(0.75, 0.9, -48, 48, 54321).unwrap()).unwrap();
        assert_ne!(a.values(), other.values());
    }

    #[test]
    fn wm_paths_start_at_zero_and_stay_finite() {
        let times = uniform_times(1.0 / 256.0, 256);
        for seed in 0..100 {
            let cfg = FbmConfig::new(0.75, 0.9, -48, 48, seed).unwrap();
            let path = wm_fbm(&times, &cfg).unwrap();
            assert_eq!(path.values()[0], 0.0);
            assert!(path.values().iter().all(|v| v.is_finite()));
            let inc = increments(&path).unwrap();
            let max_step = inc.iter().fold(0.0_f64, |m, &d| m.max(d.abs()));
            assert!(max_step < 1.0, "seed {seed}: max increment {max_step}");
        }
    }

    #[test]
    fn wm_normalization_gives_unit_variance_at_horizon() {
        let times = uniform_times(0.01, 100);
        let n_paths = 500;
        let mut sum_sq = 0.0;
        for seed in 0..n_paths {
            let cfg = FbmConfig::new(0.75, 0.9, -48, 48, 900 + seed).unwrap();
            let path = wm_fbm(&times, &cfg).unwrap();
            let last = *path.values().last().unwrap();
            sum_sq += last * last;
        }
        let var = sum_sq / n_paths as f64;
        assert!((var - 1.0).abs() < 0.2, "Var w(1) = {var}");
    }

    #[test]
    fn wm_hurst_recovered_by_variance_scaling() {
        let times = uniform_times(1.0 / 256.0, 256);
        let paths: Vec<FbmPath> = (0..200)
            .map(|seed| {
                let cfg = FbmConfig::new(0.75, 0.9, -48, 48, 400 + seed).unwrap();
                wm_fbm(&times, &cfg).unwrap()
            })
            .collect();
        let h = estimate_hurst(&paths, &[1, 2, 4, 8, 16]).unwrap();
        assert!((h - 0.75).abs() < 0.12, "estimated H = {h}");
    }

    #[test]
    fn hurst_estimator_on_exact_brownian_paths() {
        let times = uniform_times(1.0 / 128.0, 128);
        let paths: Vec<FbmPath> = (0..200)
            .map(|seed| cholesky_fbm(&times, 0.5, 60_000 + seed).unwrap())
            .collect();
        let h = estimate_hurst(&paths, &[1, 2, 4, 8]).unwrap();
        assert!((h - 0.5).abs() < 0.05, "estimated H = {h}");
    }

    #[test]
    fn increment_basics() {
        let path = FbmPath::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(increments(&path).unwrap(), vec![1.0, 2.0]);
        let short = FbmPath::new(vec![0.0], vec![0.0]).unwrap();
        assert!(matches!(increments(&short), Err(Error::PathTooShort)));
    }

    #[test]
    fn config_validation() {
        assert!(FbmConfig::new(0.75, 0.9, -8, 8, 0).is_ok());
        assert!(FbmConfig::new(1.2, 0.9, -8, 8, 0).is_err());
        assert!(FbmConfig::new(0.75, 1.0, -8, 8, 0).is_err());
        assert!(FbmConfig::new(0.75, 0.9, 1, 8, 0).is_err());
        assert!(FbmConfig::new(0.75, 0.9, -8, -1, 0).is_err());
    }

    #[test]
    fn csv_dump_shape() {
        let path = FbmPath::new(vec![0.0, 0.5], vec![0.0, -1.25]).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,value\n0,0\n0.5,-1.25\n");
    }
}
