//! The whole pipeline in memory at reduced scale: fine benchmark
//! ensemble, closure calibration, stochastic coarse-grid ensemble, and
//! the error comparison against the unparameterized coarse baseline.
//!
//! ```bash
//! cargo run --release --example stochastic_les [master_seed]
//! ```
//!
//! The same flow, with artifacts persisted to disk, is available through
//! the `sles` binary: run-benchmark, calibrate, run-sles, compare.

use sles::pipeline::{run_end_to_end, PipelineConfig};

fn main() -> sles::Result<()> {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(42);

    let cfg = PipelineConfig {
        n_fine: 32,
        n_coarse: 8,
        dt: 2e-3,
        t_end: 0.5,
        members: 16,
        les_members: 16,
        seed,
        ..PipelineConfig::default()
    };
    println!(
        "pipeline: {} fine members (n = {}), {} model members (n = {}), seed {seed}",
        cfg.members, cfg.n_fine, cfg.les_members, cfg.n_coarse
    );

    let start = std::time::Instant::now();
    let report = run_end_to_end(&cfg)?;
    println!("finished in {:.2} s", start.elapsed().as_secs_f64());

    println!(
        "calibrated drift: f(u) = {:+.3e} {:+.3e} u {:+.3e} u^2 {:+.3e} u^3",
        report.model.drift.a0, report.model.drift.a1, report.model.drift.a2, report.model.drift.a3
    );
    println!(
        "sigma(x) peak: {:.3e}",
        report.model.sigma.values().amax()
    );

    println!("time-averaged L2 RMSE vs filtered fine truth:");
    println!("  stochastic model: {:.6e}", report.les.l2_time_avg);
    println!("  coarse baseline:  {:.6e}", report.baseline.l2_time_avg);
    println!("vs raw fine truth:");
    println!("  stochastic model: {:.6e}", report.les_raw.l2_time_avg);
    println!("  coarse baseline:  {:.6e}", report.baseline_raw.l2_time_avg);
    println!(
        "max pointwise error (filtered): model {:.3e}, baseline {:.3e}",
        report.les.max_error, report.baseline.max_error
    );

    Ok(())
}
