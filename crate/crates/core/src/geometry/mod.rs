//! Periodic grid, spectral `dd^c`, and pointwise wedge algebra of
//! (1,1)-forms on the flat complex 2-torus.

pub mod dump;
mod field;
mod forms;
mod grid;

pub use field::{fourier_field, random_band_limited, FourierMode, ScalarField};
pub use forms::{
    ddc, integrate, min_eigenvalue_field, topological_constant, trace_with, wedge11, wedge2,
    ClassVector, Hermitian2, HermitianFormField,
};
pub use grid::{Grid, Mode};
