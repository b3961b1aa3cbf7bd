//! Real closed (1,1)-forms on the complex 2-torus and their pointwise
//! wedge algebra.
//!
//! A form is stored as its per-node Hermitian coefficient matrix together
//! with the data it was built from: a constant class matrix plus, optionally,
//! a potential whose `dd^c` was added. There is no way to build a form that is
//! not of this shape, so every form here is closed.
//!
//! Densities follow the normalization `wedge2(identity) = 2`: the top-degree
//! product `A ^ A` has density `2 det A` against the coordinate volume and
//! integrals are plain grid averages.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::ScalarField;
use super::grid::Grid;
use crate::error::{Error, Result};

/// Pointwise Hermitian 2x2 matrix `[[a11, a12], [conj(a12), a22]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hermitian2 {
    pub a11: f64,
    pub a22: f64,
    pub a12: Complex64,
}

impl Hermitian2 {
    pub const ZERO: Hermitian2 = Hermitian2 {
        a11: 0.0,
        a22: 0.0,
        a12: Complex64::new(0.0, 0.0),
    };

    pub const IDENTITY: Hermitian2 = Hermitian2 {
        a11: 1.0,
        a22: 1.0,
        a12: Complex64::new(0.0, 0.0),
    };

    pub fn new(a11: f64, a22: f64, a12: Complex64) -> Self {
        Self { a11, a22, a12 }
    }

    pub fn diag(a11: f64, a22: f64) -> Self {
        Self::new(a11, a22, Complex64::new(0.0, 0.0))
    }

    pub fn real(a11: f64, a22: f64, a12: f64) -> Self {
        Self::new(a11, a22, Complex64::new(a12, 0.0))
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.a11 * s, self.a22 * s, self.a12 * s)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.a11 + o.a11, self.a22 + o.a22, self.a12 + o.a12)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.a11 - o.a11, self.a22 - o.a22, self.a12 - o.a12)
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12.norm_sqr()
    }

    pub fn trace(self) -> f64 {
        self.a11 + self.a22
    }

    /// `2 det`.
    pub fn wedge2(self) -> f64 {
        2.0 * self.det()
    }

    /// Polarization of [`Hermitian2::wedge2`].
    pub fn wedge11(self, b: Self) -> f64 {
        self.a11 * b.a22 + self.a22 * b.a11 - 2.0 * (self.a12 * b.a12.conj()).re
    }

    pub fn min_eigenvalue(self) -> f64 {
        let half_tr = 0.5 * self.trace();
        let gap = (0.25 * (self.a11 - self.a22).powi(2) + self.a12.norm_sqr()).sqrt();
        half_tr - gap
    }

    pub fn max_eigenvalue(self) -> f64 {
        let half_tr = 0.5 * self.trace();
        let gap = (0.25 * (self.a11 - self.a22).powi(2) + self.a12.norm_sqr()).sqrt();
        half_tr + gap
    }

    /// `tr_self(b) = self^{j k} b_{j k}`; `self` must be invertible.
    pub fn trace_of(self, b: Self) -> f64 {
        self.wedge11(b) / self.det()
    }

    /// Largest entry modulus.
    pub fn max_abs_entry(self) -> f64 {
        self.a11.abs().max(self.a22.abs()).max(self.a12.norm())
    }
}

/// Cohomology class of a closed (1,1)-form on the torus: its constant part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassVector(pub Hermitian2);

impl ClassVector {
    pub fn matrix(self) -> Hermitian2 {
        self.0
    }

    /// Intersection number `[A] . [B]` in the `wedge2(identity) = 2`
    /// normalization.
    pub fn pairing(self, other: ClassVector) -> f64 {
        self.0.wedge11(other.0)
    }

    pub fn square(self) -> f64 {
        self.0.wedge2()
    }
}

/// Closed real (1,1)-form `class + dd^c(potential)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct HermitianFormField {
    grid: Grid,
    a11: Vec<f64>,
    a22: Vec<f64>,
    a12: Vec<Complex64>,
    class: ClassVector,
    potential: Option<ScalarField>,
}

impl HermitianFormField {
    /// Spatially constant form.
    pub fn constant(grid: &Grid, m: Hermitian2) -> Self {
        let n = grid.len();
        Self {
            grid: grid.clone(),
            a11: vec![m.a11; n],
            a22: vec![m.a22; n],
            a12: vec![m.a12; n],
            class: ClassVector(m),
            potential: None,
        }
    }

    pub fn identity(grid: &Grid) -> Self {
        Self::constant(grid, Hermitian2::IDENTITY)
    }

    /// `m + dd^c(potential)`.
    pub fn with_potential(m: Hermitian2, potential: &ScalarField) -> Result<Self> {
        let mut f = ddc(potential)?;
        for i in 0..f.a11.len() {
            f.a11[i] += m.a11;
            f.a22[i] += m.a22;
            f.a12[i] += m.a12;
        }
        f.class = ClassVector(m);
        Ok(f)
    }

    /// Builds from a class and optional potential.
    pub fn from_parts(grid: &Grid, m: Hermitian2, potential: Option<&ScalarField>) -> Result<Self> {
        match potential {
            Some(p) => {
                grid.check_same(p.grid())?;
                Self::with_potential(m, p)
            }
            None => Ok(Self::constant(grid, m)),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn class(&self) -> ClassVector {
        self.class
    }

    pub fn potential(&self) -> Option<&ScalarField> {
        self.potential.as_ref()
    }

    pub fn is_constant(&self) -> bool {
        self.potential.is_none()
    }

    pub fn at(&self, node: usize) -> Hermitian2 {
        Hermitian2::new(self.a11[node], self.a22[node], self.a12[node])
    }

    pub fn len(&self) -> usize {
        self.a11.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a11.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Hermitian2> + '_ {
        (0..self.len()).map(move |i| self.at(i))
    }

    /// `self + s * other`, with provenance combined.
    pub fn axpy(&self, s: f64, other: &HermitianFormField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let potential = match (&self.potential, &other.potential) {
            (None, None) => None,
            (Some(p), None) => Some(p.clone()),
            (None, Some(q)) => Some(q.scale(s)),
            (Some(p), Some(q)) => Some(p.axpy(s, q)?),
        };
        Ok(Self {
            grid: self.grid.clone(),
            a11: zip_axpy(&self.a11, s, &other.a11),
            a22: zip_axpy(&self.a22, s, &other.a22),
            a12: self
                .a12
                .iter()
                .zip(&other.a12)
                .map(|(a, b)| a + b * s)
                .collect(),
            class: ClassVector(self.class.0.add(other.class.0.scale(s))),
            potential,
        })
    }

    pub fn add(&self, other: &HermitianFormField) -> Result<Self> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &HermitianFormField) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            a11: self.a11.iter().map(|v| v * s).collect(),
            a22: self.a22.iter().map(|v| v * s).collect(),
            a12: self.a12.iter().map(|v| v * s).collect(),
            class: ClassVector(self.class.0.scale(s)),
            potential: self.potential.as_ref().map(|p| p.scale(s)),
        }
    }

    /// `self + dd^c(u)`.
    pub fn plus_ddc(&self, u: &ScalarField) -> Result<Self> {
        self.add(&ddc(u)?)
    }

    /// Pointwise map to a scalar field.
    pub fn map_scalar(&self, f: impl Fn(Hermitian2) -> f64) -> ScalarField {
        ScalarField::from_vec_unchecked(&self.grid, self.iter().map(f).collect())
    }

    /// Largest modulus of any coefficient over the grid.
    pub fn sup_entry(&self) -> f64 {
        self.iter().fold(0.0, |m, a| m.max(a.max_abs_entry()))
    }

    /// Node with the smallest minimum eigenvalue.
    pub fn min_eigenvalue(&self) -> (usize, f64) {
        min_eigenvalue_field(self).argmin()
    }
}

fn zip_axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// `dd^c u` computed spectrally.
///
/// The `(j, k)` entry is `1/4 (u_{x_j x_k} + u_{y_j y_k}) + i/4 (u_{y_j x_k} -
/// u_{x_j y_k})`; in REDUCED mode this is a quarter of the real Hessian in
/// `(x1, x2)`. For a Fourier mode with wavevector `(xi, eta)` the symbol is
/// `-pi^2 conj(zeta_j) zeta_k` with `zeta_j = xi_j - i eta_j`. Nyquist modes
/// are discarded.
pub fn ddc(u: &ScalarField) -> Result<HermitianFormField> {
    let grid = u.grid();
    if let Some(i) = u.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidField(format!("non-finite potential at node {i}")));
    }
    let mut diag: Vec<Complex64> = u.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.fft_forward(&mut diag);

    let scale = -std::f64::consts::PI * std::f64::consts::PI / grid.len() as f64;
    // a11 and a22 are real, so they share one inverse transform.
    let mut off = Vec::with_capacity(diag.len());
    for (node, h) in diag.iter_mut().enumerate() {
        let [z1, z2] = grid.zeta(node);
        let hs = *h * scale;
        off.push(hs * (z1.conj() * z2));
        *h = hs * Complex64::new(z1.norm_sqr(), z2.norm_sqr());
    }
    grid.fft_inverse_unscaled(&mut diag);
    grid.fft_inverse_unscaled(&mut off);

    Ok(HermitianFormField {
        grid: grid.clone(),
        a11: diag.iter().map(|c| c.re).collect(),
        a22: diag.iter().map(|c| c.im).collect(),
        a12: match grid.mode() {
            // Reduced potentials have real mixed derivatives.
            super::grid::Mode::Reduced => off.iter().map(|c| Complex64::new(c.re, 0.0)).collect(),
            super::grid::Mode::Full => off,
        },
        class: ClassVector(Hermitian2::ZERO),
        potential: Some(u.clone()),
    })
}

/// Density of `A ^ A`: `2 det A` pointwise.
pub fn wedge2(a: &HermitianFormField) -> ScalarField {
    a.map_scalar(Hermitian2::wedge2)
}

/// Density of `A ^ B`, the polarization of [`wedge2`].
pub fn wedge11(a: &HermitianFormField, b: &HermitianFormField) -> Result<ScalarField> {
    a.grid.check_same(&b.grid)?;
    Ok(ScalarField::from_vec_unchecked(
        &a.grid,
        (0..a.len()).map(|i| a.at(i).wedge11(b.at(i))).collect(),
    ))
}

/// Integral over the unit-volume torus.
pub fn integrate(s: &ScalarField) -> f64 {
    s.mean()
}

/// `c = 2 [chi].[omega] / [chi]^2`.
pub fn topological_constant(chi: &HermitianFormField, omega: &HermitianFormField) -> Result<f64> {
    let square = integrate(&wedge2(chi));
    if square <= 0.0 {
        return Err(Error::DegenerateClass(square));
    }
    Ok(2.0 * integrate(&wedge11(chi, omega)?) / square)
}

pub fn min_eigenvalue_field(a: &HermitianFormField) -> ScalarField {
    a.map_scalar(Hermitian2::min_eigenvalue)
}

/// `tr_metric(A)` pointwise; `metric` must be positive definite everywhere.
pub fn trace_with(metric: &HermitianFormField, a: &HermitianFormField) -> Result<ScalarField> {
    metric.grid.check_same(&a.grid)?;
    let (node, min_eig) = metric.min_eigenvalue();
    if min_eig <= 0.0 {
        return Err(Error::SingularMetric { node, min_eig });
    }
    Ok(ScalarField::from_vec_unchecked(
        &a.grid,
        (0..a.len()).map(|i| metric.at(i).trace_of(a.at(i))).collect(),
    ))
}
