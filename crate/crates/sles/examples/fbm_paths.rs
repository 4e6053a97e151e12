//! Fractional Brownian motion two ways: the exact (Cholesky) sampler and
//! the randomized Weierstrass–Mandelbrot series, with Hurst-exponent
//! recovery by variance scaling. Dumps one path of each kind as CSV.
//!
//! ```bash
//! cargo run --release --example fbm_paths [H]
//! ```

use std::fs::File;
use std::io::BufWriter;

use sles::fbm::{cholesky_fbm, estimate_hurst, uniform_times, wm_fbm, FbmConfig};

fn main() -> sles::Result<()> {
    let hurst: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.75);
    let times = uniform_times(1.0 / 256.0, 256);

    let exact: Vec<_> = (0..200)
        .map(|seed| cholesky_fbm(&times, hurst, seed))
        .collect::<sles::Result<_>>()?;
    let approx: Vec<_> = (0..200)
        .map(|seed| {
            let cfg = FbmConfig::new(hurst, 0.9, -48, 48, seed)?;
            wm_fbm(&times, &cfg)
        })
        .collect::<sles::Result<_>>()?;

    let lags = [1, 2, 4, 8, 16];
    println!("target H = {hurst}");
    println!(
        "variance-scaling estimate, Cholesky sampler:      {:.4}",
        estimate_hurst(&exact, &lags)?
    );
    println!(
        "variance-scaling estimate, Weierstrass-Mandelbrot: {:.4}",
        estimate_hurst(&approx, &lags)?
    );

    let var_at_one = |paths: &[sles::fbm::FbmPath]| {
        paths
            .iter()
            .map(|p| p.values().last().unwrap().powi(2))
            .sum::<f64>()
            / paths.len() as f64
    };
    println!(
        "sample Var B(1): exact {:.4}, approximate {:.4} (theory 1.0)",
        var_at_one(&exact),
        var_at_one(&approx)
    );

    exact[0].write_csv(BufWriter::new(File::create("fbm_cholesky.csv")?))?;
    approx[0].write_csv(BufWriter::new(File::create("fbm_wm.csv")?))?;
    println!("wrote fbm_cholesky.csv and fbm_wm.csv");

    Ok(())
}
