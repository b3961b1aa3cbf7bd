//! Tracks `M(t) = max(phi_t - psi) - eps t` and its mirror along a flow and
//! checks that both extremes are attained at `t = 0`.

use jflow::elliptic::comparison_h_epsilon;
use jflow::flow::{run_flow, FlowConfig};
use jflow::geometry::{random_band_limited, Grid, HermitianFormField, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> jflow::Result<()> {
    let grid = Grid::reduced(32)?;
    let omega = HermitianFormField::identity(&grid);
    let chi = omega.scale(2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phi0 = random_band_limited(&grid, 3, 0.02, &mut rng)?;
    // chi - omega = omega, so psi = 0 solves the critical equation
    let psi = ScalarField::zeros(&grid);

    let mut config = FlowConfig::new(chi, omega, phi0);
    config.keep_snapshots = true;
    config.params.t_max = 1.0;
    let traj = run_flow(&config)?;
    let samples = traj.snapshots.iter().map(|(t, phi)| (*t, phi));
    for eps in [1e-2, 1e-3] {
        let r = comparison_h_epsilon(samples.clone(), &psi, eps, 1e-7)?;
        println!(
            "eps {eps:e}: M(0) = {:.4e}, max M = {:.4e} at t = {:.3}; m(0) = {:.4e}, min m = {:.4e}; {}",
            r.upper_initial,
            r.upper_max,
            r.upper_max_time,
            r.lower_initial,
            r.lower_min,
            if r.passed() { "holds" } else { "violated" }
        );
    }
    Ok(())
}
