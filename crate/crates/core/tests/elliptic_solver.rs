mod common;

use jflow::elliptic::{residual_ma, solve_ma_newton, EllipticProblem, NewtonOptions};
use jflow::geometry::{FourierMode, Hermitian2, HermitianFormField, ScalarField};
use jflow::Error;

use common::{field, form, reduced, sup_diff};

#[test]
fn solution_is_independent_of_the_guess() {
    let g = reduced(32);
    let alpha = form(&g, Hermitian2::IDENTITY, &[FourierMode::cos(&[1, 1], 0.01)]);
    let omega = form(&g, Hermitian2::IDENTITY, &[FourierMode::sin(&[0, 1], 0.012)]);
    let p = EllipticProblem::new(alpha, omega, 0.0, None).unwrap();
    let opts = NewtonOptions::default();
    let from_zero = solve_ma_newton(&p, &ScalarField::zeros(&g), &opts).unwrap();
    let guess = field(&g, &[FourierMode::cos(&[2, 0], 0.01), FourierMode::sin(&[1, -1], 0.008)]).shift(3.0);
    let from_guess = solve_ma_newton(&p, &guess, &opts).unwrap();
    assert!(sup_diff(&from_zero.psi, &from_guess.psi) <= 1e-9);
    assert!(from_zero.psi.mean().abs() <= 1e-12 && from_guess.psi.mean().abs() <= 1e-12);
}

#[test]
fn newton_converges_quadratically_once_close() {
    let g = reduced(32);
    let alpha = form(&g, Hermitian2::IDENTITY, &[FourierMode::cos(&[1, 2], 0.012)]);
    let omega = HermitianFormField::identity(&g);
    let f = field(&g, &[FourierMode::cos(&[1, 0], 0.3)]).shift(1.0);
    let p = EllipticProblem::new(alpha, omega, 0.0, Some(f)).unwrap();
    let s = solve_ma_newton(&p, &ScalarField::zeros(&g), &NewtonOptions::default()).unwrap();
    let close = s.residual_series.iter().position(|&r| r < 1e-3).unwrap();
    assert!(s.residual_series.len() - 1 - close <= 6, "{:?}", s.residual_series);
    assert!(s.residual_sup <= 1e-11);
}

#[test]
fn sharpened_density_matches_its_residual() {
    let g = reduced(64);
    let id = HermitianFormField::identity(&g);
    // (1 + 0.5 cos)^2 concentrates the density near x1 = 0
    let f = field(&g, &[FourierMode::cos(&[1, 0], 0.5)]).shift(1.0).map(|v| v * v);
    let p = EllipticProblem::new(id.clone(), id.clone(), 0.0, Some(f.clone())).unwrap();
    let s = solve_ma_newton(&p, &ScalarField::zeros(&g), &NewtonOptions::default()).unwrap();
    let c = s.c_delta;
    assert!((c - f.mean().recip()).abs() <= 1e-12);
    assert!(residual_ma(&s.psi, &id, &id, c, &f).unwrap() <= 1e-9);
    assert!(s.min_eig_series.iter().all(|&m| m > 0.0));
}

#[test]
fn degenerate_background_without_regularization_is_rejected() {
    let g = reduced(16);
    let alpha = HermitianFormField::constant(&g, Hermitian2::diag(1.0, 0.0));
    let omega = HermitianFormField::identity(&g);
    let solved = EllipticProblem::new(alpha.clone(), omega.clone(), 0.0, None)
        .and_then(|p| solve_ma_newton(&p, &ScalarField::zeros(&g), &NewtonOptions::default()));
    assert!(solved.is_err());
    assert!(matches!(
        EllipticProblem::new(alpha.scale(-1.0), omega, 0.0, None),
        Err(Error::Precondition(_))
    ));
}
