//! Preconditioned conjugate gradients for the linearized Monge-Ampere
//! operator `v -> -A ^ dd^c v` on mean-zero periodic functions.

use num_complex::Complex64;

use crate::geometry::{ddc, Hermitian2, HermitianFormField, ScalarField};

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub solution: ScalarField,
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_mean_zero(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// `-A ^ dd^c v`, which is positive semidefinite for positive `A` and
/// annihilates constants.
pub(crate) fn apply_operator(a: &HermitianFormField, v: &ScalarField) -> Vec<f64> {
    let d = ddc(v).expect("finite iterate");
    (0..a.len()).map(|i| -a.at(i).wedge11(d.at(i))).collect()
}

/// Inverse of the constant-coefficient operator `v -> -abar ^ dd^c v` on
/// mean-zero functions, applied spectrally.
struct SpectralPreconditioner {
    inverse_symbol: Vec<f64>,
}

impl SpectralPreconditioner {
    fn new(a: &HermitianFormField) -> Self {
        let grid = a.grid();
        let n = a.len() as f64;
        let mut mean = Hermitian2::ZERO;
        for m in a.iter() {
            mean = mean.add(m);
        }
        let mean = mean.scale(1.0 / n);
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let inverse_symbol = (0..grid.len())
            .map(|node| {
                let [z1, z2] = grid.zeta(node);
                let sym = pi2
                    * (mean.a11 * z2.norm_sqr() + mean.a22 * z1.norm_sqr()
                        - 2.0 * (mean.a12 * z1 * z2.conj()).re);
                if sym > 0.0 {
                    1.0 / sym
                } else {
                    0.0
                }
            })
            .collect();
        Self { inverse_symbol }
    }

    fn apply(&self, grid: &crate::geometry::Grid, r: &[f64]) -> Vec<f64> {
        let mut hat: Vec<Complex64> = r.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        grid.fft_forward(&mut hat);
        for (h, s) in hat.iter_mut().zip(&self.inverse_symbol) {
            *h *= *s;
        }
        grid.fft_inverse(&mut hat);
        hat.iter().map(|c| c.re).collect()
    }
}

/// Solves `-A ^ dd^c v = b` for mean-zero `v`; `b` is projected onto mean-zero
/// functions first.
pub fn solve(a: &HermitianFormField, b: &ScalarField, rtol: f64, max_iter: usize) -> CgOutcome {
    let grid = a.grid().clone();
    let pre = SpectralPreconditioner::new(a);
    let mut rhs = b.values().to_vec();
    project_mean_zero(&mut rhs);
    let b_norm = dot(&rhs, &rhs).sqrt();
    let n = rhs.len();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return CgOutcome {
            solution: ScalarField::zeros(&grid),
            iterations: 0,
            relative_residual: 0.0,
        };
    }
    let mut r = rhs;
    let mut z = pre.apply(&grid, &r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut best = (x.clone(), 1.0);
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let p_field = ScalarField::from_vec_unchecked(&grid, p.clone());
        let mut ap = apply_operator(a, &p_field);
        project_mean_zero(&mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rel = dot(&r, &r).sqrt() / b_norm;
        if rel < best.1 {
            best = (x.clone(), rel);
        }
        if rel < rtol {
            break;
        }
        z = pre.apply(&grid, &r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let (mut sol, rel) = best;
    project_mean_zero(&mut sol);
    CgOutcome {
        solution: ScalarField::from_vec_unchecked(&grid, sol),
        iterations,
        relative_residual: rel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fourier_field, FourierMode, Grid};
    use std::f64::consts::PI;

    #[test]
    fn constant_coefficients_solve_in_one_iteration() {
        let g = Grid::reduced(32).unwrap();
        let a = HermitianFormField::constant(&g, Hermitian2::real(2.0, 1.0, 0.3));
        let v = fourier_field(&g, &[FourierMode::cos(&[1, 2], 0.1), FourierMode::sin(&[3, -1], 0.05)]).unwrap();
        let b = ScalarField::new(&g, apply_operator(&a, &v)).unwrap();
        let out = solve(&a, &b, 1e-13, 50);
        assert!(out.iterations <= 2, "{}", out.iterations);
        assert!(out.solution.sup_distance(&v).unwrap() < 1e-12);
    }

    #[test]
    fn variable_coefficients_converge() {
        let g = Grid::reduced(32).unwrap();
        let u = ScalarField::from_fn(&g, |x| 0.02 * (2.0 * PI * (x[0] + x[1])).sin()).unwrap();
        let a = HermitianFormField::with_potential(Hermitian2::IDENTITY, &u).unwrap();
        let v = fourier_field(&g, &[FourierMode::cos(&[2, 1], 0.3)]).unwrap();
        let b = ScalarField::new(&g, apply_operator(&a, &v)).unwrap();
        let out = solve(&a, &b, 1e-13, 200);
        assert!(out.relative_residual < 1e-12, "{}", out.relative_residual);
        assert!(out.solution.sup_distance(&v).unwrap() < 1e-10);
    }
}
