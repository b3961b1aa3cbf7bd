//! Damped Newton for `(alpha + dd^c psi)^2 = c f omega^2` with a cosine
//! density; the exact solution is `-(a / pi^2) cos(2 pi x1)`.

use std::f64::consts::PI;

use jflow::elliptic::{solve_ma_newton, EllipticProblem, NewtonOptions};
use jflow::geometry::{Grid, HermitianFormField, ScalarField};

fn main() -> jflow::Result<()> {
    let a = 0.1;
    for res in [16, 32, 64] {
        let grid = Grid::reduced(res)?;
        let id = HermitianFormField::identity(&grid);
        let f = ScalarField::from_fn(&grid, |x| 1.0 + a * (2.0 * PI * x[0]).cos())?;
        let exact = ScalarField::from_fn(&grid, |x| -(a / (PI * PI)) * (2.0 * PI * x[0]).cos())?;
        let problem = EllipticProblem::new(id.clone(), id, 0.0, Some(f))?;
        let s = solve_ma_newton(&problem, &ScalarField::zeros(&grid), &NewtonOptions::default())?;
        println!(
            "res {res:>3}: {} iterations, {} CG iterations, residual {:.2e}, error {:.2e}",
            s.newton_iterations,
            s.cg_iterations,
            s.residual_sup,
            s.psi.sup_distance(&exact)?
        );
        let history: Vec<String> = s.residual_series.iter().map(|r| format!("{r:.1e}")).collect();
        println!("         residual history {}", history.join(" "));
    }
    Ok(())
}
