//! The I and J energy functionals, their path-integral definitions, and the
//! variational derivative of J.
//!
//! For `phi_t` a path from 0 to `phi`,
//!
//! ```text
//! I(phi) = int_0^1 int dphi_t/dt  chi_t^2                dt
//! J(phi) = int_0^1 int dphi_t/dt (2 chi_t ^ omega - chi_t^2) dt
//! ```
//!
//! and both have closed forms that are cubic in `phi`. The J-flow is the
//! gradient flow of J when the background satisfies `c = 1`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ddc, integrate, topological_constant, wedge11, wedge2, HermitianFormField, ScalarField};

/// Allowed deviation of the topological constant from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Fails with [`Error::Normalization`] unless `c(chi, omega) = 1`.
pub fn check_normalized(chi: &HermitianFormField, omega: &HermitianFormField) -> Result<f64> {
    let c = topological_constant(chi, omega)?;
    if (c - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Normalization(c));
    }
    Ok(c)
}

/// `1/3 int phi (chi_phi^2 + chi_phi ^ chi + chi^2)`.
pub fn functional_i(phi: &ScalarField, chi: &HermitianFormField) -> Result<f64> {
    let chi_phi = chi.plus_ddc(phi)?;
    functional_i_with(phi, chi, &chi_phi)
}

/// [`functional_i`] with `chi_phi = chi + dd^c phi` supplied by the caller.
pub fn functional_i_with(phi: &ScalarField, chi: &HermitianFormField, chi_phi: &HermitianFormField) -> Result<f64> {
    phi.grid().check_same(chi.grid())?;
    let density = (0..phi.grid().len()).map(|i| {
        let (a, b) = (chi_phi.at(i), chi.at(i));
        phi.values()[i] * (a.wedge2() + a.wedge11(b) + b.wedge2())
    });
    Ok(density.sum::<f64>() / phi.grid().len() as f64 / 3.0)
}

/// `int phi (chi_phi ^ omega + chi ^ omega) - I(phi)`.
///
/// This closed form is valid for any background; it is the energy whose
/// gradient flow is the J-flow only when `c(chi, omega) = 1` (see
/// [`check_normalized`]).
pub fn functional_j(phi: &ScalarField, chi: &HermitianFormField, omega: &HermitianFormField) -> Result<f64> {
    let chi_phi = chi.plus_ddc(phi)?;
    functional_j_with(phi, chi, omega, &chi_phi)
}

pub fn functional_j_with(
    phi: &ScalarField,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    chi_phi: &HermitianFormField,
) -> Result<f64> {
    phi.grid().check_same(omega.grid())?;
    let linear = (0..phi.grid().len())
        .map(|i| {
            let w = omega.at(i);
            phi.values()[i] * (chi_phi.at(i).wedge11(w) + chi.at(i).wedge11(w))
        })
        .sum::<f64>()
        / phi.grid().len() as f64;
    Ok(linear - functional_i_with(phi, chi, chi_phi)?)
}

/// Parametrization `t -> g(t) phi` of the path used by the quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathShape {
    /// `g(t) = t`; the integrands are quadratic in `t`.
    #[default]
    Linear,
    /// `g(t) = sin(pi t / 2)`; a non-polynomial path with the same endpoints.
    Sine,
}

impl PathShape {
    fn eval(self, t: f64) -> (f64, f64) {
        use std::f64::consts::FRAC_PI_2;
        match self {
            PathShape::Linear => (t, 1.0),
            PathShape::Sine => ((FRAC_PI_2 * t).sin(), FRAC_PI_2 * (FRAC_PI_2 * t).cos()),
        }
    }
}

/// Composite Simpson rule on `[0, 1]` with `steps` subintervals (odd counts
/// are rounded up).
fn simpson(steps: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    if steps < 2 {
        return Err(Error::Precondition(format!("path quadrature needs at least 2 steps, got {steps}")));
    }
    let n = steps + steps % 2;
    let h = 1.0 / n as f64;
    let mut sum = f(0.0)? + f(1.0)?;
    for j in 1..n {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(j as f64 * h)?;
    }
    Ok(sum * h / 3.0)
}

/// Simpson quadrature of the defining path integral of I.
pub fn functional_i_path(phi: &ScalarField, chi: &HermitianFormField, steps: usize, shape: PathShape) -> Result<f64> {
    let d = ddc(phi)?;
    simpson(steps, |t| {
        let (g, dg) = shape.eval(t);
        let chi_t = chi.axpy(g, &d)?;
        Ok(dg * integrate(&phi.mul(&wedge2(&chi_t))?))
    })
}

/// Simpson quadrature of the defining path integral of J along the linear
/// path `t phi`.
pub fn functional_j_path(
    phi: &ScalarField,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    steps: usize,
) -> Result<f64> {
    functional_j_path_along(phi, chi, omega, steps, PathShape::Linear)
}

pub fn functional_j_path_along(
    phi: &ScalarField,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    steps: usize,
    shape: PathShape,
) -> Result<f64> {
    let d = ddc(phi)?;
    simpson(steps, |t| {
        let (g, dg) = shape.eval(t);
        let chi_t = chi.axpy(g, &d)?;
        Ok(dg * integrate(&phi.mul(&j_density(&chi_t, omega)?)?))
    })
}

/// `2 chi_phi ^ omega - chi_phi^2`.
fn j_density(chi_phi: &HermitianFormField, omega: &HermitianFormField) -> Result<ScalarField> {
    Ok(wedge11(chi_phi, omega)?.scale(2.0).axpy(-1.0, &wedge2(chi_phi))?)
}

/// L2 gradient of J: `2 chi_phi ^ omega - chi_phi^2`.
pub fn variational_derivative_j(
    phi: &ScalarField,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
) -> Result<ScalarField> {
    j_density(&chi.plus_ddc(phi)?, omega)
}

/// Central-difference check of [`variational_derivative_j`] along `direction`.
/// Returns the relative error between the two directional derivatives.
pub fn gradient_check(
    phi: &ScalarField,
    direction: &ScalarField,
    chi: &HermitianFormField,
    omega: &HermitianFormField,
    h: f64,
) -> Result<f64> {
    let plus = functional_j(&phi.axpy(h, direction)?, chi, omega)?;
    let minus = functional_j(&phi.axpy(-h, direction)?, chi, omega)?;
    let fd = (plus - minus) / (2.0 * h);
    let exact = integrate(&direction.mul(&variational_derivative_j(phi, chi, omega)?)?);
    Ok((fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionalReport {
    #[serde(rename = "I")]
    pub i_value: f64,
    #[serde(rename = "J")]
    pub j_value: f64,
    #[serde(rename = "J_path", skip_serializing_if = "Option::is_none")]
    pub path_j_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_check_error: Option<f64>,
}

impl FunctionalReport {
    /// Closed-form values, plus a path-quadrature cross-check when
    /// `path_steps` is given. Requires a `c = 1` background.
    pub fn evaluate(
        phi: &ScalarField,
        chi: &HermitianFormField,
        omega: &HermitianFormField,
        path_steps: Option<usize>,
    ) -> Result<Self> {
        check_normalized(chi, omega)?;
        let chi_phi = chi.plus_ddc(phi)?;
        let i_value = functional_i_with(phi, chi, &chi_phi)?;
        let j_value = functional_j_with(phi, chi, omega, &chi_phi)?;
        let path_j_value = path_steps.map(|s| functional_j_path(phi, chi, omega, s)).transpose()?;
        Ok(Self {
            i_value,
            j_value,
            path_j_value,
            path_tolerance: path_j_value.map(|_| 1e-8 * (1.0 + j_value.abs())),
            gradient_check_error: None,
        })
    }

    /// Whether the closed form and the path quadrature agree.
    pub fn consistent(&self) -> bool {
        match (self.path_j_value, self.path_tolerance) {
            (Some(p), Some(tol)) => (p - self.j_value).abs() <= tol,
            _ => true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{random_band_limited, Grid, Hermitian2};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::reduced(32).unwrap()
    }

    #[test]
    fn zero_potential_has_zero_energy() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let zero = ScalarField::zeros(&g);
        assert_eq!(functional_i(&zero, &id).unwrap(), 0.0);
        assert_eq!(functional_j(&zero, &id, &id).unwrap(), 0.0);
        assert_eq!(functional_j_path(&zero, &id, &id, 4).unwrap(), 0.0);
    }

    #[test]
    fn constants() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let k = ScalarField::constant(&g, 0.75);
        assert_relative_eq!(functional_i(&k, &id).unwrap(), 1.5, max_relative = 1e-15);
        assert_relative_eq!(functional_j(&k, &id, &id).unwrap(), 1.5, max_relative = 1e-15);
        for steps in [2, 3, 8] {
            assert_relative_eq!(functional_j_path(&k, &id, &id, steps).unwrap(), 1.5, max_relative = 1e-14);
        }
    }

    #[test]
    fn i_matches_path_integral_for_cosine() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let phi = ScalarField::from_fn(&g, |x| 0.01 * (2.0 * PI * x[0]).cos()).unwrap();
        let closed = functional_i(&phi, &id).unwrap();
        let path = functional_i_path(&phi, &id, 64, PathShape::Linear).unwrap();
        assert!((closed - path).abs() <= 1e-9, "{closed} vs {path}");
    }

    #[test]
    fn derivative_examples() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let zero = ScalarField::zeros(&g);
        let d = variational_derivative_j(&zero, &id.scale(2.0), &id).unwrap();
        assert!(d.sup_abs() < 1e-15);
        let d = variational_derivative_j(&zero, &id, &id).unwrap();
        assert!(d.values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn shift_rule() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chi = HermitianFormField::constant(&g, Hermitian2::real(2.0, 1.5, 0.3));
        let phi = random_band_limited(&g, 5, 0.05, &mut rng).unwrap();
        let k = 0.37;
        let lhs = functional_i(&phi.shift(k), &chi).unwrap();
        let rhs = functional_i(&phi, &chi).unwrap() + k * integrate(&wedge2(&chi));
        assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
    }

    #[test]
    fn report_requires_normalization() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        let zero = ScalarField::zeros(&g);
        assert!(matches!(
            FunctionalReport::evaluate(&zero, &id, &id, None),
            Err(Error::Normalization(c)) if (c - 2.0).abs() < 1e-15
        ));
        let r = FunctionalReport::evaluate(&zero, &id.scale(2.0), &id, Some(8)).unwrap();
        assert!(r.consistent());
    }

    #[test]
    fn path_needs_two_steps() {
        let g = grid();
        let id = HermitianFormField::identity(&g);
        assert!(matches!(
            functional_j_path(&ScalarField::zeros(&g), &id, &id, 1),
            Err(Error::Precondition(_))
        ));
    }
}
