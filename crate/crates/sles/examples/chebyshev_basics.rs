//! Chebyshev collocation building blocks: nodes, differentiation
//! matrices, Clenshaw–Curtis quadrature, and barycentric interpolation.
//!
//! ```bash
//! cargo run --release --example chebyshev_basics
//! ```

use std::f64::consts::PI;

use sles::spectral::{diff_matrix, interpolate, quad_weights, ChebyshevGrid, Field};

fn main() -> sles::Result<()> {
    let grid = ChebyshevGrid::new(16)?;
    println!("order-16 Chebyshev–Gauss–Lobatto grid, {} nodes", grid.len());
    println!("  first/last nodes: {}, {}", grid.nodes()[0], grid.nodes()[16]);

    // Differentiate sin(pi x): spectral accuracy at the nodes.
    let d1 = diff_matrix(&grid, 1)?;
    let f = Field::from_fn(&grid, |x| (PI * x).sin());
    let df = d1.apply(&f);
    let mut err = 0.0_f64;
    for (j, &x) in grid.nodes().iter().enumerate() {
        err = err.max((df.value(j) - PI * (PI * x).cos()).abs());
    }
    println!("max |D sin(pi x) - pi cos(pi x)| = {err:.3e}");

    let d2 = diff_matrix(&grid, 2)?;
    let d2f = d2.apply(&f);
    let mut err2 = 0.0_f64;
    for (j, &x) in grid.nodes().iter().enumerate() {
        err2 = err2.max((d2f.value(j) + PI * PI * (PI * x).sin()).abs());
    }
    println!("max |D2 sin(pi x) + pi^2 sin(pi x)| = {err2:.3e}");

    // Clenshaw–Curtis quadrature: integral of exp(x) over [-1, 1].
    let w = quad_weights(&grid);
    let integral: f64 = w
        .iter()
        .zip(grid.nodes())
        .map(|(&wi, &xi)| wi * xi.exp())
        .sum();
    let exact = 1.0_f64.exp() - (-1.0_f64).exp();
    println!(
        "integral of exp(x): {integral:.15} (exact {exact:.15}, error {:.3e})",
        (integral - exact).abs()
    );

    // Interpolate from a coarse grid to a finer one.
    let fine = ChebyshevGrid::new(40)?;
    let upsampled = interpolate(&f, &fine);
    let mut interp_err = 0.0_f64;
    for (j, &x) in fine.nodes().iter().enumerate() {
        interp_err = interp_err.max((upsampled.value(j) - (PI * x).sin()).abs());
    }
    println!("barycentric upsampling 16 -> 40 nodes: max error {interp_err:.3e}");

    Ok(())
}
