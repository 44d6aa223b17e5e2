use nalgebra::{Matrix4, SMatrix};
use num_complex::Complex64;

use super::params::SystemParams;
use super::state::{DensityMatrix, Level};
use crate::error::{Error, Result};

/// Linear map on column-major vectorized 4×4 operators.
pub type Superoperator = SMatrix<Complex64, 16, 16>;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `a ⊗ b` with `(a ⊗ b)[4i + k, 4j + l] = a[i, j] · b[k, l]`.
fn kron(a: &Matrix4<Complex64>, b: &Matrix4<Complex64>) -> Superoperator {
    Superoperator::from_fn(|r, c| a[(r / 4, c / 4)] * b[(r % 4, c % 4)])
}

fn ketbra(row: Level, col: Level) -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    m[(row.index(), col.index())] = Complex64::new(1.0, 0.0);
    m
}

/// Rotating-frame Hamiltonian (ħ = 1); the sink row and column are zero.
pub fn build_hamiltonian(params: &SystemParams, omega_p: f64, omega_s: f64) -> Matrix4<Complex64> {
    let (g, e, r) = (Level::G.index(), Level::E.index(), Level::R.index());
    let mut h = Matrix4::zeros();
    h[(e, e)] = Complex64::new(params.delta_p, 0.0);
    h[(r, r)] = Complex64::new(params.delta_3, 0.0);
    h[(g, e)] = Complex64::new(0.5 * omega_p, 0.0);
    h[(e, g)] = h[(g, e)];
    h[(e, r)] = Complex64::new(0.5 * omega_s, 0.0);
    h[(r, e)] = h[(e, r)];
    h
}

/// Superoperator of the decay `|e⟩ → |s⟩` at rate `gamma`, jump operator
/// `√γ |s⟩⟨e|`.
pub fn build_dissipator(gamma: f64) -> Result<Superoperator> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("gamma", format!("must be >= 0, got {gamma}")));
    }
    let id = Matrix4::<Complex64>::identity();
    let jump = ketbra(Level::S, Level::E) * Complex64::new(gamma.sqrt(), 0.0);
    let jdj = jump.adjoint() * jump;
    let gain = kron(&jump.conjugate(), &jump);
    let loss = kron(&id, &jdj) + kron(&jdj.transpose(), &id);
    Ok(gain - loss * Complex64::new(0.5, 0.0))
}

/// Generator `L` of `dρ/dt = -i[H, ρ] + L_γ ρ` for one constant-control
/// segment, acting on column-major `vec(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian(Box<Superoperator>);

impl Liouvillian {
    pub fn matrix(&self) -> &Superoperator {
        &self.0
    }

    /// `unvec(L · vec(ρ))`.
    pub fn apply(&self, rho: &DensityMatrix) -> Matrix4<Complex64> {
        let v = *self.0 * rho.to_vec();
        Matrix4::from_iterator(v.iter().copied())
    }
}

pub fn assemble_liouvillian(params: &SystemParams, omega_p: f64, omega_s: f64) -> Result<Liouvillian> {
    let h = build_hamiltonian(params, omega_p, omega_s);
    let id = Matrix4::<Complex64>::identity();
    let coherent = (kron(&id, &h) - kron(&h.transpose(), &id)) * (-I);
    let generator = coherent + build_dissipator(params.gamma)?;
    Ok(Liouvillian(Box::new(generator)))
}
