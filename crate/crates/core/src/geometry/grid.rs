//! Periodic sampling grid on the unit-period torus and its Fourier machinery.
//!
//! Node layout is row-major. In REDUCED mode the axes are `(x1, x2)`; in FULL
//! mode they are `(x1, y1, x2, y2)` with `z_j = x_j + i y_j`.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Potentials depend on `(x1, x2)` only.
    Reduced,
    /// Potentials depend on all four real coordinates.
    Full,
}

impl Mode {
    pub fn ndims(self) -> usize {
        match self {
            Mode::Reduced => 2,
            Mode::Full => 4,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Mode::Reduced => 0,
            Mode::Full => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Mode::Reduced),
            1 => Some(Mode::Full),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Reduced => f.write_str("reduced"),
            Mode::Full => f.write_str("full"),
        }
    }
}

/// Shared handle to a periodic grid. Cloning is cheap; equality compares
/// mode and resolution.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    mode: Mode,
    resolution: usize,
    dims: Vec<usize>,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Per Fourier node: `(zeta_1, zeta_2)` with `zeta_j = xi_j - i eta_j`,
    /// zeroed on Nyquist modes.
    zeta: Vec<[Complex64; 2]>,
    wavenumbers: Vec<Vec<i64>>,
}

impl Grid {
    pub fn new(mode: Mode, resolution: usize) -> Result<Self> {
        if resolution < 8 || !resolution.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "resolution {resolution} must be a power of two and at least 8"
            )));
        }
        let ndims = mode.ndims();
        let dims = vec![resolution; ndims];
        let len = resolution.pow(ndims as u32);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(resolution);
        let inverse = planner.plan_fft_inverse(resolution);

        let n = resolution as i64;
        let half = n / 2;
        let mut zeta = Vec::with_capacity(len);
        let mut wavenumbers = Vec::with_capacity(len);
        let mut idx = vec![0usize; ndims];
        for _ in 0..len {
            let k: Vec<i64> = idx
                .iter()
                .map(|&m| {
                    let m = m as i64;
                    if m < half {
                        m
                    } else {
                        m - n
                    }
                })
                .collect();
            let nyquist = idx.iter().any(|&m| m as i64 == half);
            let z = if nyquist {
                [Complex64::new(0.0, 0.0); 2]
            } else {
                match mode {
                    Mode::Reduced => [
                        Complex64::new(k[0] as f64, 0.0),
                        Complex64::new(k[1] as f64, 0.0),
                    ],
                    Mode::Full => [
                        Complex64::new(k[0] as f64, -(k[1] as f64)),
                        Complex64::new(k[2] as f64, -(k[3] as f64)),
                    ],
                }
            };
            zeta.push(z);
            wavenumbers.push(k);
            increment(&mut idx, &dims);
        }

        Ok(Grid {
            inner: Arc::new(GridInner {
                mode,
                resolution,
                dims,
                len,
                forward,
                inverse,
                zeta,
                wavenumbers,
            }),
        })
    }

    pub fn reduced(resolution: usize) -> Result<Self> {
        Self::new(Mode::Reduced, resolution)
    }

    pub fn mode(&self) -> Mode {
        self.inner.mode
    }

    pub fn resolution(&self) -> usize {
        self.inner.resolution
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.inner.resolution as f64
    }

    pub fn dims(&self) -> &[usize] {
        &self.inner.dims
    }

    pub fn ndims(&self) -> usize {
        self.inner.dims.len()
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    /// Real coordinates of node `node`, in the axis order of the mode.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(node).into_iter().map(|m| m as f64 * h).collect()
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rest = node;
        let mut idx = vec![0; self.ndims()];
        for a in (0..self.ndims()).rev() {
            let d = self.inner.dims[a];
            idx[a] = rest % d;
            rest /= d;
        }
        idx
    }

    /// Integer wavenumber vector attached to Fourier node `node`.
    pub fn wavenumber(&self, node: usize) -> &[i64] {
        &self.inner.wavenumbers[node]
    }

    pub(crate) fn zeta(&self, node: usize) -> [Complex64; 2] {
        self.inner.zeta[node]
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.mode() == other.mode() && self.resolution() == other.resolution())
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }

    /// Unnormalized forward transform, in place.
    pub(crate) fn fft_forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.forward);
    }

    /// Inverse transform including the `1/len` factor, in place.
    pub(crate) fn fft_inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
        let scale = 1.0 / self.inner.len as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    /// Inverse transform without the `1/len` factor.
    pub(crate) fn fft_inverse_unscaled(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inner.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        thread_local! {
            static BUFFERS: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
        }
        debug_assert_eq!(data.len(), self.inner.len);
        let n = self.inner.resolution;
        let ndims = self.ndims();
        let zero = Complex64::new(0.0, 0.0);
        BUFFERS.with(|cell| {
            let (scratch, lines) = &mut *cell.borrow_mut();
            scratch.resize(plan.get_inplace_scratch_len(), zero);
            // Last axis is contiguous.
            plan.process_with_scratch(data, scratch);
            if ndims == 1 {
                return;
            }
            lines.resize(self.inner.len, zero);
            for axis in 0..ndims - 1 {
                let stride = n.pow((ndims - 1 - axis) as u32);
                let block = stride * n;
                // Gather every line along `axis` into contiguous storage.
                let mut line = 0;
                for outer in (0..self.inner.len).step_by(block) {
                    for inner in 0..stride {
                        let base = outer + inner;
                        let dst = &mut lines[line * n..(line + 1) * n];
                        for (m, d) in dst.iter_mut().enumerate() {
                            *d = data[base + m * stride];
                        }
                        line += 1;
                    }
                }
                plan.process_with_scratch(lines, scratch);
                let mut line = 0;
                for outer in (0..self.inner.len).step_by(block) {
                    for inner in 0..stride {
                        let base = outer + inner;
                        let src = &lines[line * n..(line + 1) * n];
                        for (m, s) in src.iter().enumerate() {
                            data[base + m * stride] = *s;
                        }
                        line += 1;
                    }
                }
            }
        });
    }
}

fn increment(idx: &mut [usize], dims: &[usize]) {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return;
        }
        idx[a] = 0;
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("mode", &self.mode())
            .field("resolution", &self.resolution())
            .finish()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}^{}", self.mode(), self.resolution(), self.ndims())
    }
}
