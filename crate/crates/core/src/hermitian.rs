//! Complex structures, Hermitian metrics, unitary frames and the `∂`, `∂̄`
//! operators on invariant forms.
//!
//! Two pairings on the complexified algebra are in play. The complex-bilinear
//! extension `g(U, V) = Uᵀ g V` is the one appearing in the curvature formulas
//! (so a unitary frame has `g(Z_r, Z̄_s) = δ_rs`). The positive Hermitian
//! pairing `h(U, V) = g(U, V̄)` is only used for orthonormalisation and norms.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::forms::{FormBasis, InvariantForm, C64, I, ZERO};
use crate::liealg::{FrameAlgebra, LieAlgebra, DEFAULT_TOL};

/// Tolerance on `J² = −I` and `Jᵀ g J = g`.
pub const STRUCTURE_TOL: f64 = 1e-10;
/// Relative tolerance for form identities.
pub const FORM_TOL: f64 = 1e-10;

pub(crate) fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

pub(crate) fn complexify_vec(v: &DVector<f64>) -> DVector<C64> {
    v.map(|x| C64::new(x, 0.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexStructure {
    j: DMatrix<f64>,
}

impl ComplexStructure {
    pub fn new(j: DMatrix<f64>) -> Result<Self> {
        let n = j.nrows();
        if n != j.ncols() || n % 2 != 0 || n == 0 {
            return Err(Error::InvalidComplexStructure(format!(
                "J must be square of even size, got {}x{}",
                j.nrows(),
                j.ncols()
            )));
        }
        let scale = j.amax().max(1.0);
        let r = (&j * &j + DMatrix::identity(n, n)).amax();
        if r > STRUCTURE_TOL * scale * scale {
            return Err(Error::InvalidComplexStructure(format!(
                "J² + I has residual {r:.3e}"
            )));
        }
        Ok(Self { j })
    }

    /// `J e_a = e_b`, `J e_b = −e_a` for each 0-based pair `(a, b)`.
    pub fn from_pairs(dim: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut j = DMatrix::zeros(dim, dim);
        for &(a, b) in pairs {
            j[(b, a)] = 1.0;
            j[(a, b)] = -1.0;
        }
        Self::new(j)
    }

    /// The standard structure `J e_{2r} = e_{2r+1}`.
    pub fn standard(dim: usize) -> Result<Self> {
        let pairs: Vec<_> = (0..dim / 2).map(|r| (2 * r, 2 * r + 1)).collect();
        Self::from_pairs(dim, &pairs)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// Largest entry of `N(e_i, e_j) = [Je_i,Je_j] − J[Je_i,e_j] − J[e_i,Je_j] − [e_i,e_j]`.
    pub fn nijenhuis_residual(&self, algebra: &LieAlgebra) -> f64 {
        nijenhuis_tensor(algebra, &self.j)
            .iter()
            .fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_integrable(&self, algebra: &LieAlgebra, tol: f64) -> bool {
        let scale = algebra.max_abs_constant() * self.j.amax().max(1.0).powi(2);
        self.nijenhuis_residual(algebra) <= tol * scale
    }

    /// `(1,0)`-part `½(X − iJX)` of a real vector.
    pub fn to_10(&self, x: &DVector<f64>) -> DVector<C64> {
        let jx = &self.j * x;
        DVector::from_fn(x.len(), |k, _| C64::new(0.5 * x[k], -0.5 * jx[k]))
    }
}

/// Nijenhuis tensor entries `N(e_i, e_j)_k`, flattened as `(i * n + j) * n + k`.
pub fn nijenhuis_tensor(algebra: &LieAlgebra, j: &DMatrix<f64>) -> Vec<f64> {
    let n = algebra.dim();
    let je: Vec<DVector<f64>> = (0..n).map(|i| j.column(i).into_owned()).collect();
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            let ea = unit(n, a);
            let eb = unit(n, b);
            let t1 = algebra.bracket_unchecked(&je[a], &je[b]);
            let t2 = j * algebra.bracket_unchecked(&je[a], &eb);
            let t3 = j * algebra.bracket_unchecked(&ea, &je[b]);
            let t4 = algebra.basis_bracket(a, b);
            let v = t1 - t2 - t3 - t4;
            out[(a * n + b) * n..(a * n + b + 1) * n].copy_from_slice(v.as_slice());
        }
    }
    out
}

pub(crate) fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metric {
    g: DMatrix<f64>,
}

impl Metric {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if g.nrows() != g.ncols() {
            return Err(Error::InvalidMetric("matrix is not square".into()));
        }
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-12 * g.amax().max(1.0) {
            return Err(Error::InvalidMetric(format!(
                "not symmetric (residual {asym:.3e})"
            )));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMetric("non-finite entry".into()));
        }
        let sym = (&g + g.transpose()) * 0.5;
        if sym.clone().cholesky().is_none() {
            return Err(Error::InvalidMetric("not positive definite".into()));
        }
        Ok(Self { g: sym })
    }

    /// Symmetrizes without checking positivity.
    pub(crate) fn unchecked(g: &DMatrix<f64>) -> Self {
        Self {
            g: (g + g.transpose()) * 0.5,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            g: DMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.g.clone()).eigenvalues
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().max()
    }

    /// Columns form a `g`-orthonormal basis.
    pub fn orthonormal_basis(&self) -> DMatrix<f64> {
        let l = self.g.clone().cholesky().expect("validated").l();
        l.transpose()
            .try_inverse()
            .expect("Cholesky factor is invertible")
    }
}

#[derive(Clone, Debug)]
pub struct HermitianStructure {
    algebra: LieAlgebra,
    j: ComplexStructure,
    g: Metric,
    omega_matrix: DMatrix<f64>,
    omega: InvariantForm,
}

impl HermitianStructure {
    pub fn new(algebra: LieAlgebra, j: ComplexStructure, g: Metric) -> Result<Self> {
        let n = algebra.dim();
        if j.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: j.dim(),
            });
        }
        if g.matrix().nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: g.matrix().nrows(),
            });
        }
        let report = algebra.check_structure(DEFAULT_TOL);
        if !report.antisymmetry_ok {
            return Err(Error::InvalidAlgebra(format!(
                "antisymmetry residual {:.3e}",
                report.antisymmetry_residual
            )));
        }
        if !report.jacobi_ok {
            return Err(Error::InvalidAlgebra(format!(
                "Jacobi residual {:.3e}",
                report.jacobi_residual
            )));
        }
        if !j.is_integrable(&algebra, DEFAULT_TOL) {
            return Err(Error::InvalidComplexStructure(format!(
                "not integrable (Nijenhuis residual {:.3e})",
                j.nijenhuis_residual(&algebra)
            )));
        }
        let jm = j.matrix();
        let herm = (jm.transpose() * g.matrix() * jm - g.matrix()).amax();
        if herm > STRUCTURE_TOL * g.matrix().amax() {
            return Err(Error::InvalidMetric(format!(
                "g is not J-Hermitian (residual {herm:.3e})"
            )));
        }
        Ok(Self::assemble(algebra, j, g))
    }

    /// Skips validation; for states whose invariants are maintained elsewhere.
    pub(crate) fn assemble(algebra: LieAlgebra, j: ComplexStructure, g: Metric) -> Self {
        let omega_matrix = j.matrix().transpose() * g.matrix();
        let omega = InvariantForm::from_real_matrix(&omega_matrix);
        Self {
            algebra,
            j,
            g,
            omega_matrix,
            omega,
        }
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn complex_structure(&self) -> &ComplexStructure {
        &self.j
    }

    pub fn j(&self) -> &DMatrix<f64> {
        self.j.matrix()
    }

    pub fn metric(&self) -> &Metric {
        &self.g
    }

    pub fn g(&self) -> &DMatrix<f64> {
        self.g.matrix()
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn n(&self) -> usize {
        self.algebra.n()
    }

    /// The fundamental form `ω(X, Y) = g(JX, Y)`.
    pub fn omega(&self) -> &InvariantForm {
        &self.omega
    }

    /// `ω(e_i, e_j)` as a matrix, equal to `Jᵀ g`.
    pub fn omega_matrix(&self) -> &DMatrix<f64> {
        &self.omega_matrix
    }

    /// `max|c| · λ_max(g)`, the unit against which tolerances are scaled.
    pub fn scale(&self) -> f64 {
        self.algebra.max_abs_constant() * self.g.max_eigenvalue()
    }

    /// Complex-bilinear extension of `g`.
    pub fn g_bilinear(&self, u: &DVector<C64>, v: &DVector<C64>) -> C64 {
        let gv = complexify(self.g()) * v;
        u.iter().zip(gv.iter()).map(|(a, b)| a * b).sum()
    }

    /// Positive Hermitian pairing `h(U, V) = g(U, V̄)`.
    pub fn h_pairing(&self, u: &DVector<C64>, v: &DVector<C64>) -> C64 {
        self.g_bilinear(u, &v.map(|x| x.conj()))
    }

    pub fn bracket(&self, x: &DVector<C64>, y: &DVector<C64>) -> DVector<C64> {
        self.algebra.bracket_complex_unchecked(x, y)
    }

    pub fn is_10(&self, z: &DVector<C64>) -> bool {
        let jz = complexify(self.j()) * z;
        (jz - z * I).camax() <= 1e-10 * z.camax().max(1.0)
    }

    /// A `g`-unitary frame of the `(1,0)`-space, obtained from
    /// `(e_k − iJe_k)/2` by twice-repeated Gram–Schmidt in the pairing `h`.
    pub fn unitary_frame(&self) -> Result<UnitaryFrame> {
        let order: Vec<usize> = (0..self.dim()).collect();
        self.unitary_frame_with_order(&order)
    }

    /// Same construction, visiting the seed vectors `e_k` in the given order.
    pub fn unitary_frame_with_order(&self, order: &[usize]) -> Result<UnitaryFrame> {
        let dim = self.dim();
        let n = self.n();
        let jc = complexify(self.j());
        let mut cols: Vec<DVector<C64>> = Vec::with_capacity(n);
        for &k in order {
            if cols.len() == n {
                break;
            }
            let e = complexify_vec(&unit(dim, k));
            let mut z = (&e - &jc * &e * I) * C64::new(0.5, 0.0);
            let before = self.h_pairing(&z, &z).re.sqrt();
            for _ in 0..2 {
                for q in &cols {
                    let p = self.h_pairing(&z, q);
                    z -= q * p;
                }
            }
            let norm = self.h_pairing(&z, &z).re.sqrt();
            if norm > 1e-8 * before.max(f64::MIN_POSITIVE) && norm > 0.0 {
                cols.push(z / C64::new(norm, 0.0));
            }
        }
        if cols.len() != n {
            return Err(Error::InvalidMetric(
                "degenerate Gram matrix while building a unitary frame".into(),
            ));
        }
        Ok(UnitaryFrame {
            z: DMatrix::from_columns(&cols),
        })
    }

    /// Unitary frame rotated by a seeded random unitary `n×n` matrix.
    pub fn unitary_frame_seeded(&self, seed: u64) -> Result<UnitaryFrame> {
        let f = self.unitary_frame()?;
        Ok(f.rotate(&random_unitary(self.n(), seed)))
    }

    /// Largest violation of `JZ_r = iZ_r`, `g(Z_r, Z̄_s) = δ_rs`, `g(Z_r, Z_s) = 0`.
    pub fn frame_residual(&self, frame: &UnitaryFrame) -> f64 {
        let n = self.n();
        let jc = complexify(self.j());
        let mut r: f64 = 0.0;
        for a in 0..n {
            let za = frame.z(a);
            r = r.max((&jc * &za - &za * I).camax());
            for b in 0..n {
                let zb = frame.z(b);
                let d = if a == b { 1.0 } else { 0.0 };
                r = r.max((self.g_bilinear(&za, &zb.map(|x| x.conj())) - d).norm());
                r = r.max(self.g_bilinear(&za, &zb).norm());
            }
        }
        r
    }

    /// `(p,q)`-components of a real-basis form, from `(k,0)` down to `(0,k)`.
    pub fn bigrade(&self, phi: &InvariantForm) -> Result<Vec<((usize, usize), InvariantForm)>> {
        let split = self.unitary_frame()?.split_basis();
        split.bigrade(phi)
    }

    /// `(∂φ, ∂̄φ)` for a real-basis form of pure bidegree.
    pub fn del_and_delbar(&self, phi: &InvariantForm) -> Result<(InvariantForm, InvariantForm)> {
        let split = self.unitary_frame()?.split_basis();
        let k = phi.degree();
        let fphi = split.to_frame(phi)?;
        let size = fphi.max_abs();
        let mut bideg = None;
        for p in 0..=k {
            let comp = fphi.filter_bidegree(split.n, p, k - p);
            if comp.max_abs() > FORM_TOL * size {
                if bideg.is_some() {
                    return Err(Error::NotPure);
                }
                bideg = Some((p, k - p));
            }
        }
        let (p, q) = bideg.unwrap_or((k, 0));
        let fa = split.frame_algebra(&self.algebra);
        let d = fa.differential(&fphi)?;
        let del = d.filter_bidegree(split.n, p + 1, q);
        let delbar = d.filter_bidegree(split.n, p, q + 1);
        let leak = d.sub(&del)?.sub(&delbar)?.max_abs();
        let scale = self.algebra.max_abs_constant().max(f64::MIN_POSITIVE);
        if leak > FORM_TOL * scale * size.max(1.0) {
            return Err(Error::IntegrabilityLeakage(leak));
        }
        Ok((split.to_real(&del)?, split.to_real(&delbar)?))
    }

    /// `∂∂̄ω` in the split basis of this structure's unitary frame.
    pub fn ddbar_omega(&self, frame: &UnitaryFrame) -> Result<InvariantForm> {
        ddbar_omega_in(&self.algebra, &frame.split_basis(), &self.omega)
    }

    pub fn skt_check(&self, tol: f64) -> Result<SktReport> {
        let frame = self.unitary_frame()?;
        let r = self.ddbar_omega(&frame)?;
        // in a unitary split basis the coefficient norm is the g-norm
        let residual_norm = r.norm();
        let threshold = tol * self.scale().powi(3);
        Ok(SktReport {
            is_skt: residual_norm <= threshold,
            residual_norm,
            threshold,
        })
    }

    /// `∂∂̄ω(Z, Z̄, W, W̄)` through the full Chevalley–Eilenberg route.
    pub fn ddbar_eval(&self, z: &DVector<C64>, w: &DVector<C64>) -> Result<C64> {
        let frame = self.unitary_frame()?;
        let split = frame.split_basis();
        let form = ddbar_omega_in(&self.algebra, &split, &self.omega)?;
        let conj = |v: &DVector<C64>| v.map(|x| x.conj());
        let args = [z.clone(), conj(z), w.clone(), conj(w)].map(|v| split.vector_to_frame(&v));
        form.eval(&args)
    }

    /// Closed form of `∂∂̄ω(Z,Z̄,W,W̄)` on 2-step nilpotent algebras:
    /// `i g([Z,Z̄],[W,W̄]) + i g([Z,W̄],[Z̄,W]) + i g([Z,W],[Z̄,W̄])`.
    ///
    /// The last term is often dropped, but `∂̄ω([Z̄,W̄], Z, W)` vanishes by type
    /// while `∂̄ω([Z,W], Z̄, W̄)` does not, so it survives whenever `𝔤^{1,0}` is
    /// not abelian.
    pub fn ddbar_pairing(&self, z: &DVector<C64>, w: &DVector<C64>) -> Result<C64> {
        if !self.algebra.is_two_step(DEFAULT_TOL) {
            return Err(Error::NotTwoStep(self.algebra.two_step_residual()));
        }
        if !self.is_10(z) || !self.is_10(w) {
            return Err(Error::InvalidArgument("arguments must be of type (1,0)".into()));
        }
        let zb = z.map(|x| x.conj());
        let wb = w.map(|x| x.conj());
        let a = self.g_bilinear(&self.bracket(z, &zb), &self.bracket(w, &wb));
        let b = self.g_bilinear(&self.bracket(z, &wb), &self.bracket(&zb, w));
        let c = self.g_bilinear(&self.bracket(z, w), &self.bracket(&zb, &wb));
        Ok(I * (a + b + c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SktReport {
    pub is_skt: bool,
    pub residual_norm: f64,
    pub threshold: f64,
}

/// `∂∂̄ω` as a split-basis 4-form; linear in `ω`.
pub(crate) fn ddbar_omega_in(
    algebra: &LieAlgebra,
    split: &SplitBasis,
    omega: &InvariantForm,
) -> Result<InvariantForm> {
    let fa = split.frame_algebra(algebra);
    let w = split.to_frame(omega)?;
    let delbar = fa.differential(&w)?.filter_bidegree(split.n, 1, 2);
    Ok(fa.differential(&delbar)?.filter_bidegree(split.n, 2, 2))
}

/// `n` column vectors spanning the `(1,0)`-space.
#[derive(Clone, Debug)]
pub struct UnitaryFrame {
    z: DMatrix<C64>,
}

impl UnitaryFrame {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.z
    }

    pub fn z(&self, r: usize) -> DVector<C64> {
        self.z.column(r).into_owned()
    }

    pub fn len(&self) -> usize {
        self.z.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.z.ncols() == 0
    }

    /// `Z'_s = Σ_r Z_r u_{rs}`; unitary `u` keeps the frame unitary.
    pub fn rotate(&self, u: &DMatrix<C64>) -> Self {
        Self { z: &self.z * u }
    }

    pub fn split_basis(&self) -> SplitBasis {
        SplitBasis::from_columns(&self.z)
    }

    /// `Σ_r [Z_r, Z̄_r]`, independent of the unitary frame.
    pub fn trace_bracket(&self, algebra: &LieAlgebra) -> DVector<C64> {
        let mut t = DVector::from_element(algebra.dim(), ZERO);
        for r in 0..self.len() {
            let z = self.z(r);
            t += algebra.bracket_complex_unchecked(&z, &z.map(|x| x.conj()));
        }
        t
    }
}

/// A basis `Z_1..Z_n, Z̄_1..Z̄_n` of the complexified algebra.
#[derive(Clone, Debug)]
pub struct SplitBasis {
    pub(crate) n: usize,
    b: DMatrix<C64>,
    b_inv: DMatrix<C64>,
}

impl SplitBasis {
    fn from_columns(z: &DMatrix<C64>) -> Self {
        let n = z.ncols();
        let dim = z.nrows();
        let b = DMatrix::from_fn(dim, 2 * n, |r, c| {
            if c < n {
                z[(r, c)]
            } else {
                z[(r, c - n)].conj()
            }
        });
        let b_inv = b.clone().try_inverse().expect("split basis is invertible");
        Self { n, b, b_inv }
    }

    /// A split basis depending on `J` only (Euclidean-orthonormal `(1,0)` vectors).
    pub fn from_complex_structure(j: &ComplexStructure) -> Self {
        let dim = j.dim();
        let n = dim / 2;
        let jc = complexify(j.matrix());
        let mut cols: Vec<DVector<C64>> = Vec::with_capacity(n);
        for k in 0..dim {
            if cols.len() == n {
                break;
            }
            let e = complexify_vec(&unit(dim, k));
            let mut z = (&e - &jc * &e * I) * C64::new(0.5, 0.0);
            let before = z.norm();
            for _ in 0..2 {
                for q in &cols {
                    let p = q.dotc(&z);
                    z -= q * p;
                }
            }
            let norm = z.norm();
            if norm > 1e-8 * before && norm > 0.0 {
                cols.push(z / C64::new(norm, 0.0));
            }
        }
        Self::from_columns(&DMatrix::from_columns(&cols))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.b
    }

    pub fn to_frame(&self, phi: &InvariantForm) -> Result<InvariantForm> {
        if phi.basis() != FormBasis::Real {
            return Err(Error::BasisMismatch);
        }
        phi.pullback(&self.b, FormBasis::Frame)
    }

    pub fn to_real(&self, phi: &InvariantForm) -> Result<InvariantForm> {
        if phi.basis() != FormBasis::Frame {
            return Err(Error::BasisMismatch);
        }
        phi.pullback(&self.b_inv, FormBasis::Real)
    }

    pub fn vector_to_frame(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.b_inv * v
    }

    pub fn frame_algebra(&self, algebra: &LieAlgebra) -> FrameAlgebra {
        FrameAlgebra::new(algebra, &self.b, &self.b_inv)
    }

    pub fn bigrade(&self, phi: &InvariantForm) -> Result<Vec<((usize, usize), InvariantForm)>> {
        let k = phi.degree();
        let f = self.to_frame(phi)?;
        (0..=k)
            .rev()
            .map(|p| {
                let comp = f.filter_bidegree(self.n, p, k - p);
                Ok(((p, k - p), self.to_real(&comp)?))
            })
            .collect()
    }
}

/// Seeded Haar-like random unitary matrix (QR of a complex Gaussian matrix).
pub fn random_unitary(n: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    let qr = m.qr();
    let q = qr.q();
    let r = qr.r();
    let phases = DMatrix::from_fn(n, n, |a, b| {
        if a == b && r[(a, a)].norm() > 0.0 {
            r[(a, a)] / r[(a, a)].norm()
        } else {
            ZERO
        }
    });
    q * phases
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn hs(name: &str) -> HermitianStructure {
        catalog::catalog(name).unwrap().hermitian().unwrap()
    }

    #[test]
    fn kt4_frame_is_the_split_frame() {
        let h = hs("kt4");
        let f = h.unitary_frame().unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z1 = DVector::from_vec(vec![
            C64::new(s, 0.0),
            C64::new(0.0, -s),
            ZERO,
            ZERO,
        ]);
        let z2 = DVector::from_vec(vec![
            ZERO,
            ZERO,
            C64::new(s, 0.0),
            C64::new(0.0, -s),
        ]);
        assert!((f.z(0) - z1).camax() < 1e-15);
        assert!((f.z(1) - z2).camax() < 1e-15);
        assert!(h.frame_residual(&f) < 1e-12);
    }

    #[test]
    fn example1_frame_is_unitary_despite_off_diagonal_metric() {
        let h = hs("example1");
        let f = h.unitary_frame().unwrap();
        assert!(h.frame_residual(&f) <= 1e-10);
        let rotated = h.unitary_frame_seeded(11).unwrap();
        assert!(h.frame_residual(&rotated) <= 1e-10);
        let reversed = h.unitary_frame_with_order(&[3, 2, 1, 0]).unwrap();
        assert!(h.frame_residual(&reversed) <= 1e-10);
    }

    #[test]
    fn omega_is_j_invariant_and_of_type_11() {
        for name in ["example1", "example2", "kt4"] {
            let h = hs(name);
            let w = h.omega_matrix();
            let jw = h.j().transpose() * w * h.j();
            assert!((jw - w).amax() <= 1e-12 * w.amax());
            let comps = h.bigrade(h.omega()).unwrap();
            for ((p, q), c) in comps {
                if (p, q) == (1, 1) {
                    assert!(c.sub(h.omega()).unwrap().max_abs() < 1e-12);
                } else {
                    assert!(c.max_abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kt4_e13_splits_into_three_types() {
        let h = hs("kt4");
        let phi = InvariantForm::monomial(4, &[0, 2], FormBasis::Real).unwrap();
        let comps = h.bigrade(&phi).unwrap();
        let mut sum = InvariantForm::zero(4, 2, FormBasis::Real).unwrap();
        for (_, c) in &comps {
            assert!(c.max_abs() > 0.1);
            sum = sum.add(c).unwrap();
        }
        assert!(sum.sub(&phi).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn one_form_dual_to_z_is_pure() {
        let h = hs("kt4");
        // ζ^1 = e^1 + i e^2 annihilates Z̄1
        let zeta = InvariantForm::from_terms(
            4,
            1,
            FormBasis::Real,
            &[(&[0], C64::new(1.0, 0.0)), (&[1], C64::new(0.0, 1.0))],
        )
        .unwrap();
        let comps = h.bigrade(&zeta).unwrap();
        assert_eq!(comps[0].0, (1, 0));
        assert!(comps[0].1.sub(&zeta).unwrap().max_abs() < 1e-14);
        assert!(comps[1].1.max_abs() < 1e-14);
    }

    #[test]
    fn kt4_zeta2_has_only_a_delbar() {
        // [Z1, Z̄1] = −i e4 ≠ 0, so dζ² = i e^{12} is of type (1,1)
        let h = hs("kt4");
        let zeta2 = InvariantForm::from_terms(
            4,
            1,
            FormBasis::Real,
            &[(&[2], C64::new(1.0, 0.0)), (&[3], C64::new(0.0, 1.0))],
        )
        .unwrap();
        let (del, delbar) = h.del_and_delbar(&zeta2).unwrap();
        assert!(del.max_abs() < 1e-14);
        let d = h.algebra().differential(&zeta2).unwrap();
        assert!(delbar.sub(&d).unwrap().max_abs() < 1e-14);
        let f = h.unitary_frame().unwrap();
        let z1 = f.z(0);
        let v = delbar.eval(&[z1.clone(), z1.map(|x| x.conj())]).unwrap();
        assert!((v - C64::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn abelian_differentials_vanish() {
        let h = hs("abelian4");
        let (a, b) = h.del_and_delbar(h.omega()).unwrap();
        assert_eq!(a.max_abs(), 0.0);
        assert_eq!(b.max_abs(), 0.0);
    }

    #[test]
    fn example2_del_omega_mirrors_delbar_omega() {
        let h = hs("example2");
        let (del, delbar) = h.del_and_delbar(h.omega()).unwrap();
        assert!(del.max_abs() > 1e-3);
        assert!(del.conj().sub(&delbar).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn mixed_form_is_rejected() {
        let h = hs("kt4");
        let phi = InvariantForm::monomial(4, &[0, 2], FormBasis::Real).unwrap();
        assert!(matches!(h.del_and_delbar(&phi), Err(Error::NotPure)));
    }

    #[test]
    fn skt_verdicts_on_catalog() {
        assert!(hs("example1").skt_check(DEFAULT_TOL).unwrap().is_skt);
        assert!(!hs("example2").skt_check(DEFAULT_TOL).unwrap().is_skt);
        assert!(hs("kt4").skt_check(DEFAULT_TOL).unwrap().is_skt);
        let ab = hs("abelian6").skt_check(DEFAULT_TOL).unwrap();
        assert!(ab.is_skt);
        assert_eq!(ab.residual_norm, 0.0);
    }

    #[test]
    fn kt4_ddbar_pairing_matches_ce_route() {
        let h = hs("kt4");
        let z1 = h.unitary_frame().unwrap().z(0);
        let closed = h.ddbar_pairing(&z1, &z1).unwrap();
        let ce = h.ddbar_eval(&z1, &z1).unwrap();
        assert!((closed - ce).norm() < 1e-14);
        // kt4 is SKT: the two bracket terms cancel
        assert!(closed.norm() < 1e-14);
        let zb = z1.map(|x| x.conj());
        let a = h.g_bilinear(&h.bracket(&z1, &zb), &h.bracket(&z1, &zb));
        assert!((a - C64::new(-1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ddbar_pairing_keeps_the_holomorphic_bracket_term() {
        // example2 has [Z,W] ≠ 0 for (1,0) vectors; without the
        // g([Z,W],[Z̄,W̄]) term the closed form is off by exactly half here
        let h = hs("example2");
        let f = h.unitary_frame().unwrap();
        for (r, s) in [(0, 1), (0, 2), (1, 2), (0, 0)] {
            let (z, w) = (f.z(r), f.z(s));
            let closed = h.ddbar_pairing(&z, &w).unwrap();
            let ce = h.ddbar_eval(&z, &w).unwrap();
            assert!((closed - ce).norm() < 1e-12, "{r}{s}: {closed} vs {ce}");
        }
    }

    #[test]
    fn ddbar_pairing_refuses_non_two_step() {
        let h = hs("example1");
        let z = h.unitary_frame().unwrap().z(0);
        assert!(matches!(h.ddbar_pairing(&z, &z), Err(Error::NotTwoStep(_))));
    }

    #[test]
    fn invalid_structures_are_rejected() {
        let a = LieAlgebra::abelian(4).unwrap();
        assert!(ComplexStructure::new(DMatrix::identity(4, 4)).is_err());
        let j = ComplexStructure::standard(4).unwrap();
        let mut g = DMatrix::identity(4, 4);
        g[(0, 0)] = 2.0;
        let g = Metric::new(g).unwrap();
        assert!(HermitianStructure::new(a, j, g).is_err());
        assert!(Metric::new(-DMatrix::<f64>::identity(4, 4)).is_err());
    }

    #[test]
    fn random_unitary_is_unitary() {
        let u = random_unitary(3, 5);
        let p = u.adjoint() * &u;
        assert!((p - DMatrix::<C64>::identity(3, 3)).camax() < 1e-13);
    }
}
