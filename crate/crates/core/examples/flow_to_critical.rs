//! Runs the J-flow from a cosine perturbation of `chi = 2 omega` and compares
//! the limit with the Newton solution of the critical equation.
//!
//! ```text
//! cargo run --release --example flow_to_critical -- 64
//! ```

use std::f64::consts::PI;
use std::time::Instant;

use jflow::elliptic::{solve_ma_newton, EllipticProblem, NewtonOptions};
use jflow::flow::{run_flow, FlowConfig};
use jflow::geometry::{Grid, HermitianFormField, ScalarField};

fn main() -> jflow::Result<()> {
    let res: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let grid = Grid::reduced(res)?;
    let omega = HermitianFormField::identity(&grid);
    let chi = omega.scale(2.0);
    let phi0 = ScalarField::from_fn(&grid, |x| 0.05 * (2.0 * PI * x[0]).cos())?;

    let alpha = chi.sub(&omega)?;
    let problem = EllipticProblem::new(alpha, omega.clone(), 0.0, None)?;
    let psi = solve_ma_newton(&problem, &ScalarField::zeros(&grid), &NewtonOptions::default())?;
    println!("newton: {} iterations, residual {:.2e}", psi.newton_iterations, psi.residual_sup);

    let mut config = FlowConfig::new(chi, omega, phi0);
    config.reference = Some(psi.psi.clone());
    config.h_epsilons = vec![1e-2, 1e-3];
    let start = Instant::now();
    let traj = run_flow(&config)?;
    println!(
        "flow: {:?} after {} steps, t = {:.3}, {:.1}s",
        traj.status,
        traj.steps,
        traj.final_state.time,
        start.elapsed().as_secs_f64()
    );
    let last = traj.samples.last().unwrap();
    println!("I drift {:.2e}, J {:.6e} -> {:.6e}", traj.max_i_drift, traj.initial_j(), last.j);
    println!("sup |phi_end - psi| after alignment: {:.2e}", last.ref_distance.unwrap());
    for c in &traj.comparisons {
        println!("H_eps eps={:e}: {}", c.epsilon, if c.passed() { "max at t=0" } else { "violated" });
    }
    Ok(())
}
