//! Spectral `dd^c` of a trigonometric potential and the pointwise wedge
//! algebra on the reduced torus.

use jflow::geometry::{ddc, integrate, wedge11, wedge2, FourierMode, Grid, HermitianFormField, fourier_field};

fn main() -> jflow::Result<()> {
    let grid = Grid::reduced(32)?;
    let u = fourier_field(&grid, &[FourierMode::cos(&[1, 0], 0.02), FourierMode::sin(&[1, 1], 0.01)])?;
    let d = ddc(&u)?;
    println!("sup |dd^c u| entry: {:.6}", d.sup_entry());
    println!("int tr dd^c u = {:.2e}", integrate(&d.map_scalar(|m| m.trace())));

    let omega = HermitianFormField::identity(&grid);
    let chi = omega.scale(2.0).plus_ddc(&u)?;
    let (node, m) = chi.min_eigenvalue();
    println!("min eig chi = {m:.6} at {:?}", grid.coords(node));
    println!("int chi^2 = {:.12} (class value 8)", integrate(&wedge2(&chi)));
    println!("int chi.omega = {:.12} (class value 4)", integrate(&wedge11(&chi, &omega)?));
    Ok(())
}
