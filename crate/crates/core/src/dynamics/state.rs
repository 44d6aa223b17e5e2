use std::fmt;

use nalgebra::{Matrix4, SVector, SymmetricEigen};
use num_complex::Complex64;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Levels of the model, in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Level {
    G = 0,
    E = 1,
    R = 2,
    /// Auxiliary sink collecting population lost from |e⟩.
    S = 3,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::G, Level::E, Level::R, Level::S];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Column-major vectorization of a 4×4 operator.
pub type Vectorized = SVector<Complex64, 16>;

/// Index of `ρ[row, col]` in the column-major vectorization.
pub const fn vec_index(row: usize, col: usize) -> usize {
    row + 4 * col
}

/// Density matrix over the ordered basis (g, e, r, s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix4<Complex64>);

impl DensityMatrix {
    /// `|level⟩⟨level|`.
    pub fn pure(level: Level) -> Self {
        let mut m = Matrix4::zeros();
        m[(level.index(), level.index())] = Complex64::new(1.0, 0.0);
        DensityMatrix(m)
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalized) amplitude vector; the
    /// result is normalized.
    pub fn from_amplitudes(psi: [Complex64; 4]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Degenerate("zero or non-finite state vector".into()));
        }
        let m = Matrix4::from_fn(|i, j| psi[i] * psi[j].conj() / norm);
        Ok(DensityMatrix(m))
    }

    /// Wraps a matrix after checking the density-matrix invariants.
    pub fn from_matrix(m: Matrix4<Complex64>) -> Result<Self> {
        let rho = DensityMatrix(m);
        rho.validate(1e-9)?;
        Ok(rho)
    }

    /// Wraps a matrix without any checks.
    pub fn from_matrix_unchecked(m: Matrix4<Complex64>) -> Self {
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn get(&self, row: Level, col: Level) -> Complex64 {
        self.0[(row.index(), col.index())]
    }

    pub fn population(&self, level: Level) -> f64 {
        self.get(level, level).re
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    /// Tr ρ².
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let diff = self.0 - self.0.adjoint();
        diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Checks Hermiticity, unit trace and positivity with a common tolerance.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::NonFinite("density matrix"));
        }
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::Corruption(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::Corruption(format!("trace {tr} differs from 1")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -tol {
            return Err(Error::Corruption(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vectorized {
        Vectorized::from_iterator(self.0.iter().copied())
    }

    pub fn from_vec(v: &Vectorized) -> Self {
        DensityMatrix(Matrix4::from_iterator(v.iter().copied()))
    }

    pub fn populations(&self) -> [f64; 4] {
        Level::ALL.map(|l| self.population(l))
    }
}

impl fmt::Display for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

// JSON form: 4×4 nested arrays of [re, im] pairs, row-major.
impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..4)
            .map(|i| (0..4).map(|j| [self.0[(i, j)].re, self.0[(i, j)].im]).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(deserializer)?;
        if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
            return Err(de::Error::custom("density matrix must be 4x4"));
        }
        let m = Matrix4::from_fn(|i, j| Complex64::new(rows[i][j][0], rows[i][j][1]));
        Ok(DensityMatrix(m))
    }
}
