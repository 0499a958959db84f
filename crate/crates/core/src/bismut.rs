//! The Bismut–Ricci form of an invariant Hermitian structure.
//!
//! Two closed formulas are provided. On a 2-step nilpotent algebra,
//! `ρ(X, Y) = i Σ_r g([X, Y], [Z_r, Z̄_r])`. On any Lie algebra,
//! `ρ(X, Y) = −i Σ_r { g([[X,Y]^{1,0}, Z_r], Z̄_r) − g([[X,Y]^{0,1}, Z̄_r], Z_r) − g([X,Y], [Z_r, Z̄_r]) }`.
//! Here `{Z_r}` is any `g`-unitary frame and `g` is extended complex-bilinearly.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::forms::{InvariantForm, C64, I, ZERO};
use crate::hermitian::{complexify, complexify_vec, HermitianStructure, UnitaryFrame};
use crate::liealg::{LieAlgebra, DEFAULT_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoSource {
    TwoStep,
    General,
    /// Output of [`rho_11`].
    Projected,
}

/// A real invariant 2-form stored as the antisymmetric matrix `ρ(e_i, e_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RicciForm {
    matrix: DMatrix<f64>,
    source: RhoSource,
    imag_residue: f64,
}

impl RicciForm {
    pub fn from_matrix(matrix: DMatrix<f64>, source: RhoSource) -> Self {
        Self {
            matrix,
            source,
            imag_residue: 0.0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source(&self) -> RhoSource {
        self.source
    }

    /// Largest imaginary part discarded when the form was computed.
    pub fn imag_residue(&self) -> f64 {
        self.imag_residue
    }

    /// Coefficient of `e^{ij}` (0-based).
    pub fn coefficient(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn to_form(&self) -> InvariantForm {
        InvariantForm::from_real_matrix(&self.matrix)
    }

    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * y))
    }

    pub fn eval_complex(&self, u: &DVector<C64>, v: &DVector<C64>) -> C64 {
        let mv = complexify(&self.matrix) * v;
        u.iter().zip(mv.iter()).map(|(a, b)| a * b).sum()
    }

    /// Nonzero `(i, j, ρ_ij)` with `i < j`, 0-based.
    pub fn terms(&self, threshold: f64) -> Vec<(usize, usize, f64)> {
        let n = self.matrix.nrows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.matrix[(i, j)];
                if v.abs() > threshold {
                    out.push((i, j, v));
                }
            }
        }
        out
    }
}

fn finish(h: &HermitianStructure, m: DMatrix<C64>, source: RhoSource) -> Result<RicciForm> {
    let imag_residue = m.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    let scale = h.scale().powi(2).max(f64::MIN_POSITIVE);
    if imag_residue > 1e-10 * scale.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "Ricci form has imaginary residue {imag_residue:.3e}"
        )));
    }
    let re = m.map(|c| c.re);
    let matrix = (&re - re.transpose()) * 0.5;
    Ok(RicciForm {
        matrix,
        source,
        imag_residue,
    })
}

/// Bismut–Ricci form on a 2-step nilpotent algebra.
pub fn rho_two_step(h: &HermitianStructure) -> Result<RicciForm> {
    rho_two_step_with_frame(h, &h.unitary_frame()?)
}

pub fn rho_two_step_with_frame(h: &HermitianStructure, frame: &UnitaryFrame) -> Result<RicciForm> {
    let a = h.algebra();
    if !a.is_two_step(DEFAULT_TOL) {
        return Err(Error::NotTwoStep(a.two_step_residual()));
    }
    let t = frame.trace_bracket(a);
    Ok(rho_two_step_raw(a, h.g(), &t))
}

/// `i g([e_i, e_j], T)` with `T = Σ_r [Z_r, Z̄_r]`, no validation.
pub(crate) fn rho_two_step_raw(a: &LieAlgebra, g: &DMatrix<f64>, t: &DVector<C64>) -> RicciForm {
    let n = a.dim();
    let gt = complexify(g) * t;
    let mut m = DMatrix::zeros(n, n);
    let mut imag: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let b = a.basis_bracket(i, j);
            let v: C64 = I * b.iter().zip(gt.iter()).map(|(x, y)| y * *x).sum::<C64>();
            imag = imag.max(v.im.abs());
            m[(i, j)] = v.re;
            m[(j, i)] = -v.re;
        }
    }
    RicciForm {
        matrix: m,
        source: RhoSource::TwoStep,
        imag_residue: imag,
    }
}

/// Bismut–Ricci form on an arbitrary Lie algebra.
pub fn rho_general(h: &HermitianStructure) -> Result<RicciForm> {
    rho_general_with_frame(h, &h.unitary_frame()?)
}

pub fn rho_general_with_frame(h: &HermitianStructure, frame: &UnitaryFrame) -> Result<RicciForm> {
    let a = h.algebra();
    let n = a.dim();
    let jc = complexify(h.j());
    let zs: Vec<DVector<C64>> = (0..frame.len()).map(|r| frame.z(r)).collect();
    let zbs: Vec<DVector<C64>> = zs.iter().map(|z| z.map(|x| x.conj())).collect();
    let t = frame.trace_bracket(a);
    let mut m = DMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = complexify_vec(&a.basis_bracket(i, j));
            if v.iter().all(|x| *x == ZERO) {
                continue;
            }
            let jv = &jc * &v;
            let v10 = (&v - &jv * I) * C64::new(0.5, 0.0);
            let v01 = (&v + &jv * I) * C64::new(0.5, 0.0);
            let mut acc = ZERO;
            for (z, zb) in zs.iter().zip(&zbs) {
                acc += h.g_bilinear(&h.bracket(&v10, z), zb);
                acc -= h.g_bilinear(&h.bracket(&v01, zb), z);
            }
            acc -= h.g_bilinear(&v, &t);
            let val = -I * acc;
            m[(i, j)] = val;
            m[(j, i)] = -val;
        }
    }
    finish(h, m, RhoSource::General)
}

/// `ρ^{1,1}(X, Y) = ½(ρ(X, Y) + ρ(JX, JY))`.
pub fn rho_11(h: &HermitianStructure, rho: &RicciForm) -> RicciForm {
    let j = h.j();
    let m = (rho.matrix() + j.transpose() * rho.matrix() * j) * 0.5;
    RicciForm {
        matrix: (&m - m.transpose()) * 0.5,
        source: RhoSource::Projected,
        imag_residue: rho.imag_residue,
    }
}

/// `−i Σ_r ‖[Z, Z̄_r]‖²` with `‖U‖² = g(U, Ū)`; asserted for SKT structures on
/// 2-step nilpotent algebras, where it equals `ρ(Z, Z̄)`.
pub fn prop_diagonal(h: &HermitianStructure, z: &DVector<C64>) -> Result<C64> {
    let a = h.algebra();
    if !a.is_two_step(DEFAULT_TOL) {
        return Err(Error::NotTwoStep(a.two_step_residual()));
    }
    let skt = h.skt_check(DEFAULT_TOL)?;
    if !skt.is_skt {
        return Err(Error::NotSkt(skt.residual_norm));
    }
    if !h.is_10(z) {
        return Err(Error::InvalidArgument("argument must be of type (1,0)".into()));
    }
    Ok(prop_diagonal_with_frame(h, z, &h.unitary_frame()?))
}

/// `−i Σ_r (‖[Z, Z̄_r]‖² + ‖[Z, Z_r]‖²)`, the diagonal `ρ(Z, Z̄)` on SKT
/// structures over 2-step nilpotent algebras. Agrees with [`prop_diagonal`]
/// exactly when `[Z, 𝔤^{1,0}] = 0`; the extra terms come from the
/// `g([Z,W],[Z̄,W̄])` part of `∂∂̄ω` (see `HermitianStructure::ddbar_pairing`).
pub fn bracket_diagonal(h: &HermitianStructure, z: &DVector<C64>) -> Result<C64> {
    prop_diagonal(h, z)?;
    let frame = h.unitary_frame()?;
    let mut s = 0.0;
    for r in 0..frame.len() {
        let zr = frame.z(r);
        let u = h.bracket(z, &zr.map(|x| x.conj()));
        let v = h.bracket(z, &zr);
        s += h.h_pairing(&u, &u).re + h.h_pairing(&v, &v).re;
    }
    Ok(-I * s)
}

pub(crate) fn prop_diagonal_with_frame(
    h: &HermitianStructure,
    z: &DVector<C64>,
    frame: &UnitaryFrame,
) -> C64 {
    let mut s = 0.0;
    for r in 0..frame.len() {
        let zbr = frame.z(r).map(|x| x.conj());
        let u = h.bracket(z, &zbr);
        s += h.h_pairing(&u, &u).re;
    }
    -I * s
}

#[derive(Clone, Debug, PartialEq)]
pub struct Seminegativity {
    pub max_eigenvalue: f64,
    pub eigenvalues: Vec<f64>,
}

/// Eigenvalues of `b(X, Y) = ρ^{1,1}(X, JY)` relative to `g`.
pub fn seminegativity_gap(h: &HermitianStructure) -> Result<Seminegativity> {
    let rho = rho_general(h)?;
    Ok(seminegativity_of(h, &rho_11(h, &rho)))
}

pub(crate) fn seminegativity_of(h: &HermitianStructure, rho11: &RicciForm) -> Seminegativity {
    let b = rho11.matrix() * h.j();
    let b = (&b + b.transpose()) * 0.5;
    let eigenvalues = generalized_symmetric_eigenvalues(&b, h.g());
    let max_eigenvalue = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Seminegativity {
        max_eigenvalue,
        eigenvalues,
    }
}

/// Eigenvalues of `B v = λ G v` for symmetric `B` and positive definite `G`,
/// by Cholesky reduction `L⁻¹ B L⁻ᵀ`. Sorted ascending.
pub fn generalized_symmetric_eigenvalues(b: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let l = Cholesky::new(g.clone()).expect("positive definite metric").l();
    let linv = l.try_inverse().expect("invertible Cholesky factor");
    let c = &linv * b * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `g`-inner product of real 2-forms, `Σ_{i<j} α(f_i, f_j) β(f_i, f_j)` over a
/// `g`-orthonormal basis `{f_i}`.
pub fn two_form_inner(g_orthonormal: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let f = g_orthonormal;
    let fa = f.transpose() * a * f;
    let fb = f.transpose() * b * f;
    0.5 * fa.component_mul(&fb).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StaticResidual {
    pub lambda_star: f64,
    pub residual: f64,
}

/// Best constant `λ` in `(ρ)^{1,1} ≈ λω` and the remaining `g`-norm.
pub fn static_residual(h: &HermitianStructure) -> Result<StaticResidual> {
    let rho = rho_general(h)?;
    let r11 = rho_11(h, &rho);
    let f = h.metric().orthonormal_basis();
    let w = h.omega_matrix();
    let rw = two_form_inner(&f, r11.matrix(), w);
    let ww = two_form_inner(&f, w, w);
    let lambda_star = rw / ww;
    let diff = r11.matrix() - w * lambda_star;
    let residual = two_form_inner(&f, &diff, &diff).max(0.0).sqrt();
    Ok(StaticResidual {
        lambda_star,
        residual,
    })
}
