#![allow(dead_code)]

use std::f64::consts::PI;
use std::io::Write;

use jflow::geometry::{fourier_field, FourierMode, Grid, Hermitian2, HermitianFormField, ScalarField};

pub fn reduced(res: usize) -> Grid {
    Grid::reduced(res).unwrap()
}

pub fn field(grid: &Grid, modes: &[FourierMode]) -> ScalarField {
    fourier_field(grid, modes).unwrap()
}

pub fn form(grid: &Grid, m: Hermitian2, potential: &[FourierMode]) -> HermitianFormField {
    if potential.is_empty() {
        HermitianFormField::constant(grid, m)
    } else {
        HermitianFormField::with_potential(m, &field(grid, potential)).unwrap()
    }
}

/// `-(a / pi^2) cos(2 pi x1)`, whose `dd^c` is `diag(a cos(2 pi x1), 0)`.
pub fn cosine_potential(a: f64) -> Vec<FourierMode> {
    vec![FourierMode::cos(&[1, 0], -a / (PI * PI))]
}

/// Unbuffered line on stderr; bypasses the test harness capture so the
/// lines land in the log of a normal `cargo test` run.
pub fn report(line: &str) {
    let mut e = std::io::stderr();
    let _ = writeln!(e, "{line}");
}

pub fn sup_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.sup_distance(b).unwrap()
}
