//! I and J in closed form against their path-integral definitions, and a
//! finite-difference check of the gradient of J.

use jflow::functionals::{
    functional_i, functional_i_path, functional_j, functional_j_path_along, gradient_check, PathShape,
};
use jflow::geometry::{random_band_limited, Grid, HermitianFormField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> jflow::Result<()> {
    let grid = Grid::reduced(32)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let omega = HermitianFormField::identity(&grid);
    let chi = omega.scale(2.0);
    let phi = random_band_limited(&grid, 4, 0.02, &mut rng)?;

    let i = functional_i(&phi, &chi)?;
    let j = functional_j(&phi, &chi, &omega)?;
    println!("I = {i:.15e}, path {:.15e}", functional_i_path(&phi, &chi, 4, PathShape::Linear)?);
    println!("J = {j:.15e}");
    for n in [4, 8, 16, 32] {
        let e = (functional_j_path_along(&phi, &chi, &omega, n, PathShape::Sine)? - j).abs();
        println!("  sine path, {n:>2} Simpson steps: error {e:.3e}");
    }
    let eta = random_band_limited(&grid, 6, 1.0, &mut rng)?;
    println!("gradient check: {:.2e}", gradient_check(&phi, &eta, &chi, &omega, 1e-5)?);
    Ok(())
}
