use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::Grid;
use crate::error::{Error, Result};

/// Real periodic function sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidField(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "non-finite value {} at node {i}",
                values[i]
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Constructor for values produced by finite arithmetic on finite fields.
    pub(crate) fn from_vec_unchecked(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self::from_vec_unchecked(grid, vec![value; grid.len()])
    }

    /// Samples `f` at every node; `f` receives the node coordinates.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Grid average; exact integral for trigonometric polynomials below the
    /// Nyquist band, and the torus has unit volume.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index and value of the smallest entry.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc })
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let var = self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64;
        var.sqrt()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_vec_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self::from_vec_unchecked(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn shift(&self, k: f64) -> Self {
        self.map(|v| v + k)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + s * b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// The same field with its mean removed.
    pub fn mean_zero(&self) -> Self {
        self.shift(-self.mean())
    }

    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| a - b)?.sup_abs())
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a + b).expect("grid mismatch in field addition")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a - b).expect("grid mismatch in field subtraction")
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scale(rhs)
    }
}

/// One real Fourier mode `cos * cos(2 pi k.x) + sin * sin(2 pi k.x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

impl FourierMode {
    pub fn cos(k: &[i64], coefficient: f64) -> Self {
        Self {
            k: k.to_vec(),
            cos: coefficient,
            sin: 0.0,
        }
    }

    pub fn sin(k: &[i64], coefficient: f64) -> Self {
        Self {
            k: k.to_vec(),
            cos: 0.0,
            sin: coefficient,
        }
    }
}

/// Trigonometric polynomial sampled on `grid`.
pub fn fourier_field(grid: &Grid, modes: &[FourierMode]) -> Result<ScalarField> {
    for m in modes {
        if m.k.len() != grid.ndims() {
            return Err(Error::InvalidField(format!(
                "mode {:?} has {} components, grid has {} axes",
                m.k,
                m.k.len(),
                grid.ndims()
            )));
        }
    }
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|m| {
                let phase = 2.0 * PI * m.k.iter().zip(x).map(|(&k, &xi)| k as f64 * xi).sum::<f64>();
                m.cos * phase.cos() + m.sin * phase.sin()
            })
            .sum()
    })
}

/// Random trigonometric polynomial with every `|k_i| < band`, zero mean and
/// sup norm `amplitude`.
pub fn random_band_limited<R: Rng + ?Sized>(
    grid: &Grid,
    band: usize,
    amplitude: f64,
    rng: &mut R,
) -> Result<ScalarField> {
    let band = band.max(2) as i64;
    if band as usize > grid.resolution() / 2 {
        return Err(Error::InvalidField(format!(
            "band {band} exceeds half the resolution {}",
            grid.resolution()
        )));
    }
    let ndims = grid.ndims();
    let width = 2 * band - 1;
    let mut modes = Vec::new();
    for code in 0..width.pow(ndims as u32) {
        let mut rest = code;
        let k: Vec<i64> = (0..ndims)
            .map(|_| {
                let c = rest % width - (band - 1);
                rest /= width;
                c
            })
            .collect();
        // One representative of each +-k pair, skipping k = 0.
        if !matches!(k.iter().find(|&&c| c != 0), Some(&c) if c > 0) {
            continue;
        }
        let k2: i64 = k.iter().map(|c| c * c).sum();
        let decay = 1.0 / (1.0 + k2 as f64);
        modes.push(FourierMode {
            k,
            cos: rng.random_range(-1.0..1.0) * decay,
            sin: rng.random_range(-1.0..1.0) * decay,
        });
    }
    let raw = fourier_field(grid, &modes)?;
    let sup = raw.sup_abs();
    if sup == 0.0 {
        return Ok(raw);
    }
    Ok(raw.scale(amplitude / sup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_non_finite() {
        let g = Grid::reduced(8).unwrap();
        let mut v = vec![0.0; g.len()];
        v[5] = f64::NAN;
        assert!(matches!(ScalarField::new(&g, v), Err(Error::InvalidField(_))));
    }

    #[test]
    fn integrals_of_simple_fields() {
        let g = Grid::reduced(16).unwrap();
        assert_eq!(ScalarField::constant(&g, 3.0).mean(), 3.0);
        let c = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos()).unwrap();
        assert!(c.mean().abs() < 1e-15);
        let c2 = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos().powi(2)).unwrap();
        assert!((c2.mean() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn random_fields_are_band_limited() {
        let g = Grid::reduced(32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = random_band_limited(&g, 4, 0.3, &mut rng).unwrap();
        assert!((u.sup_abs() - 0.3).abs() < 1e-12);
        assert!(u.mean().abs() < 1e-14);
        let mut spec: Vec<_> = u
            .values()
            .iter()
            .map(|&v| num_complex::Complex64::new(v, 0.0))
            .collect();
        g.fft_forward(&mut spec);
        for (i, c) in spec.iter().enumerate() {
            let k = g.wavenumber(i);
            if k.iter().any(|c| c.abs() >= 4) {
                assert!(c.norm() < 1e-10);
            }
        }
    }
}
