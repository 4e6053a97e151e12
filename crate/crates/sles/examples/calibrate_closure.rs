//! Calibrate the subgrid closure from a perturbed-IC ensemble: the cubic
//! mean drift `f(u) = a0 + a1 u + a2 u^2 + a3 u^3` and the noise
//! intensity `sigma(x)`.
//!
//! ```bash
//! cargo run --release --example calibrate_closure
//! ```

use sles::calibration::{calibrate_model, generate_ensemble, PerturbationSpec};
use sles::filtering::FilterNormalization;
use sles::solver::{benchmark_initial_condition, MemoryKernel, SolverConfig};
use sles::spectral::ChebyshevGrid;

fn main() -> sles::Result<()> {
    let fine = ChebyshevGrid::new(32)?;
    let coarse = ChebyshevGrid::new(8)?;
    let config = SolverConfig::new(2e-3, 0.5, -1.0, 1.0)?;
    let kernel = MemoryKernel::new(2.0)?;
    let delta = 0.05;
    let hurst = 0.75;
    let members = 24;

    println!("running a {members}-member fine ensemble (n = {}) ...", fine.order());
    let start = std::time::Instant::now();
    let ensemble = generate_ensemble(
        &benchmark_initial_condition(&fine),
        &PerturbationSpec::new(0.01, 2024)?,
        members,
        &config,
        &kernel,
        delta,
        &coarse,
        FilterNormalization::UnitMass,
    )?;
    println!("ensemble done in {:.2} s", start.elapsed().as_secs_f64());

    let model = calibrate_model(&ensemble, hurst)?;
    println!(
        "drift fit: f(u) = {:+.4e} {:+.4e} u {:+.4e} u^2 {:+.4e} u^3",
        model.drift.a0, model.drift.a1, model.drift.a2, model.drift.a3
    );
    println!(
        "Gram condition number: {:.3e}",
        model.drift.condition_number
    );
    println!("noise intensity profile:");
    for (j, &x) in coarse.nodes().iter().enumerate() {
        println!("  sigma({x:+.4}) = {:.4e}", model.sigma.value(j));
    }
    Ok(())
}
