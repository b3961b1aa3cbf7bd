//! Continuation along `delta -> 0` for a background that degenerates on the
//! line `x1 = 0`, with trace and Cauchy diagnostics.

use std::f64::consts::PI;

use jflow::elliptic::{solve_degenerate_family, DegeneracySurrogate, FamilyOptions};
use jflow::geometry::{FourierMode, Grid, Hermitian2, HermitianFormField, fourier_field};

fn main() -> jflow::Result<()> {
    let res: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let grid = Grid::reduced(res)?;
    let u = fourier_field(&grid, &[FourierMode::cos(&[1, 0], 1.0 / (PI * PI))])?;
    let alpha = HermitianFormField::with_potential(Hermitian2::IDENTITY, &u)?;
    let omega = HermitianFormField::identity(&grid);
    println!("min eig alpha = {:.2e}", alpha.min_eigenvalue().1);

    let options = FamilyOptions {
        surrogate: Some(DegeneracySurrogate::from_background(&alpha, 0.1)?),
        ..FamilyOptions::default()
    };
    let (last, diag) = solve_degenerate_family(&alpha, &omega, &options)?;
    println!("{:>10} {:>10} {:>10} {:>10} {:>10} {:>6}", "delta", "c_delta", "sup psi", "cauchy", "compact tr", "iters");
    for r in &diag.records {
        println!(
            "{:>10.3e} {:>10.6} {:>10.6} {:>10.2e} {:>10.6} {:>6}",
            r.delta,
            r.c_delta,
            r.sup_psi,
            r.cauchy_increment.unwrap_or(f64::NAN),
            r.compact_trace.unwrap_or(f64::NAN),
            r.newton_iters
        );
    }
    println!("final delta {:e}, residual {:.2e}", last.delta, last.residual_sup);
    Ok(())
}
