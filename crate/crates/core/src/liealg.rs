//! Real Lie algebras given by structure constants, and the Chevalley–Eilenberg
//! differential on invariant forms.
//!
//! Sign convention: an invariant 1-form satisfies `dα(X, Y) = −α([X, Y])`, so
//! `de^k = −Σ_{i<j} c_{ij}^k e^{ij}`. In higher degree,
//! `dφ(X_0, …, X_k) = Σ_{i<j} (−1)^{i+j} φ([X_i, X_j], X_0, …, X̂_i, …, X̂_j, …, X_k)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forms::{sort_with_sign, tuples, FormBasis, InvariantForm, C64, ZERO};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Anything that can serve as a bracket table for the CE differential.
pub trait StructureConstants {
    fn dim(&self) -> usize;
    fn form_basis(&self) -> FormBasis;
    /// Coefficient of basis vector `k` in `[b_i, b_j]`.
    fn constant(&self, i: usize, j: usize, k: usize) -> C64;
}

/// Chevalley–Eilenberg differential of an invariant form.
pub fn ce_differential<S: StructureConstants + ?Sized>(
    s: &S,
    phi: &InvariantForm,
) -> Result<InvariantForm> {
    let n = s.dim();
    if phi.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: phi.dim(),
        });
    }
    if phi.basis() != s.form_basis() {
        return Err(Error::BasisMismatch);
    }
    let k = phi.degree();
    if k >= n {
        return Err(Error::DegreeOverflow { degree: k + 1, dim: n });
    }
    let mut out = InvariantForm::zero(n, k + 1, phi.basis())?;
    if k == 0 {
        return Ok(out);
    }
    let targets = tuples(n, k + 1);
    let mut rest = Vec::with_capacity(k);
    let mut slot = Vec::with_capacity(k);
    for (r, t) in targets.iter().enumerate() {
        let mut acc = ZERO;
        for a in 0..=k {
            for b in (a + 1)..=k {
                rest.clear();
                rest.extend(
                    t.iter()
                        .enumerate()
                        .filter(|&(p, _)| p != a && p != b)
                        .map(|(_, &v)| v),
                );
                let sign = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                for m in 0..n {
                    let c = s.constant(t[a], t[b], m);
                    if c == ZERO {
                        continue;
                    }
                    slot.clear();
                    slot.push(m);
                    slot.extend_from_slice(&rest);
                    if let Some(s2) = sort_with_sign(&mut slot) {
                        let v = phi.get(&slot);
                        if v != ZERO {
                            acc += c * v * (sign * s2);
                        }
                    }
                }
            }
        }
        out.coeffs_mut()[r] = acc;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LieAlgebra {
    dim: usize,
    c: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub antisymmetry_ok: bool,
    pub antisymmetry_residual: f64,
    pub jacobi_ok: bool,
    pub jacobi_residual: f64,
    pub two_step: bool,
    pub two_step_residual: f64,
    pub center_dim: usize,
}

impl LieAlgebra {
    /// Dense table with `c[(i * dim + j) * dim + k]` the coefficient of `e_k`
    /// in `[e_i, e_j]`. Only shape and finiteness are checked here; use
    /// [`LieAlgebra::check_structure`] for the algebraic axioms.
    pub fn new(dim: usize, c: Vec<f64>) -> Result<Self> {
        if dim < 2 || dim % 2 != 0 {
            return Err(Error::InvalidAlgebra(format!(
                "dimension must be even and >= 2, got {dim}"
            )));
        }
        if c.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                got: c.len(),
            });
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidAlgebra("non-finite structure constant".into()));
        }
        Ok(Self { dim, c })
    }

    pub fn abelian(dim: usize) -> Result<Self> {
        Self::new(dim, vec![0.0; dim * dim * dim])
    }

    /// Builds the table from `[e_i, e_j] ∋ value·e_k` entries (0-based), filling
    /// in `[e_j, e_i]` by antisymmetry. Repeated entries accumulate.
    pub fn from_brackets(dim: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut a = Self::abelian(dim)?;
        for &(i, j, k, v) in entries {
            if i >= dim || j >= dim || k >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: i.max(j).max(k) + 1,
                });
            }
            if i == j {
                if v != 0.0 {
                    return Err(Error::InvalidAlgebra(format!(
                        "bracket of e{} with itself must vanish",
                        i + 1
                    )));
                }
                continue;
            }
            let ijk = a.idx(i, j, k);
            let jik = a.idx(j, i, k);
            a.c[ijk] += v;
            a.c[jik] -= v;
        }
        Ok(a)
    }

    /// Builds the table from structure equations `de^k = Σ coef · e^{ij}`,
    /// given as `(k, [(i, j, coef)])` with 0-based indices.
    pub fn from_structure_equations(
        dim: usize,
        equations: &[(usize, &[(usize, usize, f64)])],
    ) -> Result<Self> {
        let mut entries = Vec::new();
        for &(k, terms) in equations {
            for &(i, j, coef) in terms {
                // de^k(e_i, e_j) = coef = −c_{ij}^k
                entries.push((i, j, k, -coef));
            }
        }
        Self::from_brackets(dim, &entries)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Half the real dimension.
    pub fn n(&self) -> usize {
        self.dim / 2
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[self.idx(i, j, k)]
    }

    pub fn constants(&self) -> &[f64] {
        &self.c
    }

    pub fn max_abs_constant(&self) -> f64 {
        self.c.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }

    pub fn bracket(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(self.bracket_unchecked(x, y))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    pub(crate) fn bracket_unchecked(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                let base = self.idx(i, j, 0);
                for k in 0..n {
                    out[k] += w * self.c[base + k];
                }
            }
        }
        out
    }

    /// Complex-bilinear extension of the bracket.
    pub fn bracket_complex(&self, x: &DVector<C64>, y: &DVector<C64>) -> Result<DVector<C64>> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        Ok(self.bracket_complex_unchecked(x, y))
    }

    pub(crate) fn bracket_complex_unchecked(
        &self,
        x: &DVector<C64>,
        y: &DVector<C64>,
    ) -> DVector<C64> {
        let n = self.dim;
        let mut out = DVector::from_element(n, ZERO);
        for i in 0..n {
            if x[i] == ZERO {
                continue;
            }
            for j in 0..n {
                let w = x[i] * y[j];
                if w == ZERO {
                    continue;
                }
                let base = self.idx(i, j, 0);
                for k in 0..n {
                    out[k] += w * self.c[base + k];
                }
            }
        }
        out
    }

    /// `[e_i, e_j]` as a vector.
    pub fn basis_bracket(&self, i: usize, j: usize) -> DVector<f64> {
        let base = self.idx(i, j, 0);
        DVector::from_column_slice(&self.c[base..base + self.dim])
    }

    /// Matrix of `ad_X`; column `j` is `[X, e_j]`.
    pub fn ad(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += x[i] * self.c(i, j, k);
                }
            }
        }
        m
    }

    /// Conjugated bracket `h μ(h⁻¹·, h⁻¹·)`.
    pub fn conjugate(&self, h: &DMatrix<f64>) -> Result<Self> {
        let n = self.dim;
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: h.nrows(),
            });
        }
        let hinv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Conditioning(h.determinant().abs()))?;
        let mut c = vec![0.0; n * n * n];
        for a in 0..n {
            let x = hinv.column(a).into_owned();
            for b in 0..n {
                let y = hinv.column(b).into_owned();
                let v = h * self.bracket_unchecked(&x, &y);
                for k in 0..n {
                    c[(a * n + b) * n + k] = v[k];
                }
            }
        }
        Self::new(n, c)
    }

    pub fn antisymmetry_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    r = r.max((self.c(i, j, k) + self.c(j, i, k)).abs());
                }
            }
        }
        r
    }

    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.c(i, j, m) * self.c(m, l, k)
                                + self.c(j, l, m) * self.c(m, i, k)
                                + self.c(l, i, m) * self.c(m, j, k);
                        }
                        r = r.max(s.abs());
                    }
                }
            }
        }
        r
    }

    /// Largest entry of `[[e_i, e_j], e_l]` over all basis triples.
    pub fn two_step_residual(&self) -> f64 {
        let n = self.dim;
        let mut r: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    for k in 0..n {
                        let s: f64 = (0..n).map(|m| self.c(i, j, m) * self.c(m, l, k)).sum();
                        r = r.max(s.abs());
                    }
                }
            }
        }
        r
    }

    fn scale(&self) -> f64 {
        self.max_abs_constant()
    }

    pub fn is_two_step(&self, tol: f64) -> bool {
        self.two_step_residual() <= tol * self.scale()
    }

    /// Euclidean-orthonormal basis of the center, as matrix columns.
    pub fn center_basis(&self, tol: f64) -> DMatrix<f64> {
        let n = self.dim;
        let stacked = DMatrix::from_fn(n * n, n, |row, i| {
            let j = row / n;
            let k = row % n;
            self.c(i, j, k)
        });
        let svd = stacked.svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            return DMatrix::identity(n, n);
        }
        let kernel: Vec<_> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= tol * smax)
            .map(|(r, _)| vt.row(r).transpose())
            .collect();
        if kernel.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&kernel)
        }
    }

    pub fn check_structure(&self, tol: f64) -> StructureReport {
        let scale = self.scale();
        let antisymmetry_residual = self.antisymmetry_residual();
        let jacobi_residual = self.jacobi_residual();
        let two_step_residual = self.two_step_residual();
        StructureReport {
            antisymmetry_ok: antisymmetry_residual <= tol * scale,
            antisymmetry_residual,
            jacobi_ok: jacobi_residual <= tol * scale,
            jacobi_residual,
            two_step: two_step_residual <= tol * scale,
            two_step_residual,
            center_dim: self.center_basis(tol).ncols(),
        }
    }

    /// Differential of a form written in the real basis.
    pub fn differential(&self, phi: &InvariantForm) -> Result<InvariantForm> {
        ce_differential(self, phi)
    }
}

impl StructureConstants for LieAlgebra {
    fn dim(&self) -> usize {
        self.dim
    }
    fn form_basis(&self) -> FormBasis {
        FormBasis::Real
    }
    fn constant(&self, i: usize, j: usize, k: usize) -> C64 {
        C64::new(self.c(i, j, k), 0.0)
    }
}

/// Structure constants of the complexified algebra in a complex basis `B`
/// (columns are coefficient vectors over the real basis).
#[derive(Clone, Debug)]
pub struct FrameAlgebra {
    dim: usize,
    c: Vec<C64>,
}

impl FrameAlgebra {
    pub fn new(algebra: &LieAlgebra, basis: &DMatrix<C64>, basis_inv: &DMatrix<C64>) -> Self {
        let n = algebra.dim();
        let mut c = vec![ZERO; n * n * n];
        let cols: Vec<DVector<C64>> = (0..n).map(|a| basis.column(a).into_owned()).collect();
        for a in 0..n {
            for b in (a + 1)..n {
                let v = basis_inv * algebra.bracket_complex_unchecked(&cols[a], &cols[b]);
                for k in 0..n {
                    c[(a * n + b) * n + k] = v[k];
                    c[(b * n + a) * n + k] = -v[k];
                }
            }
        }
        Self { dim: n, c }
    }

    pub fn differential(&self, phi: &InvariantForm) -> Result<InvariantForm> {
        ce_differential(self, phi)
    }
}

impl StructureConstants for FrameAlgebra {
    fn dim(&self) -> usize {
        self.dim
    }
    fn form_basis(&self) -> FormBasis {
        FormBasis::Frame
    }
    fn constant(&self, i: usize, j: usize, k: usize) -> C64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn e(dim: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v
    }

    #[test]
    fn example1_bracket_e1_e2_is_minus_e3() {
        // de^3 = e^{12} and dα(X,Y) = −α([X,Y]) give [e1,e2] = −e3
        let a = catalog::catalog("example1").unwrap().algebra;
        let b = a.bracket(&e(4, 0), &e(4, 1)).unwrap();
        assert_eq!(b, -e(4, 2));
    }

    #[test]
    fn example2_bracket_e1_e2_is_minus_e4() {
        let a = catalog::catalog("example2").unwrap().algebra;
        let b = a.bracket(&e(6, 0), &e(6, 1)).unwrap();
        assert_eq!(b, -e(6, 3));
    }

    #[test]
    fn bracket_with_self_vanishes() {
        let a = catalog::catalog("example1").unwrap().algebra;
        let x = DVector::from_vec(vec![0.3, -1.2, 2.0, 0.7]);
        assert_eq!(a.bracket(&x, &x).unwrap().amax(), 0.0);
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let a = LieAlgebra::abelian(4).unwrap();
        assert!(matches!(
            a.bracket(&e(4, 0), &DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(LieAlgebra::abelian(3).is_err());
        assert!(LieAlgebra::new(2, vec![f64::NAN; 8]).is_err());
    }

    #[test]
    fn example2_is_two_step_with_three_dim_center() {
        let a = catalog::catalog("example2").unwrap().algebra;
        let r = a.check_structure(DEFAULT_TOL);
        assert!(r.two_step && r.jacobi_ok && r.antisymmetry_ok);
        assert_eq!(r.center_dim, 3);
        // brute force: every double bracket vanishes
        for i in 0..6 {
            for j in 0..6 {
                for l in 0..6 {
                    let inner = a.bracket(&e(6, i), &e(6, j)).unwrap();
                    assert_eq!(a.bracket(&inner, &e(6, l)).unwrap().amax(), 0.0);
                }
            }
        }
    }

    #[test]
    fn abelian_center_is_everything() {
        let r = LieAlgebra::abelian(6).unwrap().check_structure(DEFAULT_TOL);
        assert!(r.two_step);
        assert_eq!(r.center_dim, 6);
    }

    #[test]
    fn example1_is_not_two_step_but_jacobi() {
        let a = catalog::catalog("example1").unwrap().algebra;
        let r = a.check_structure(DEFAULT_TOL);
        assert!(r.jacobi_ok);
        assert!(!r.two_step);
        let inner = a.bracket(&e(4, 0), &e(4, 1)).unwrap();
        assert!(a.bracket(&e(4, 0), &inner).unwrap().amax() > 0.5);
    }

    #[test]
    fn structure_equations_are_reproduced() {
        let a = catalog::catalog("example1").unwrap().algebra;
        let de2 = a
            .differential(&InvariantForm::monomial(4, &[1], FormBasis::Real).unwrap())
            .unwrap();
        let expected = InvariantForm::monomial(4, &[0, 2], FormBasis::Real)
            .unwrap()
            .scale(C64::new(-1.0, 0.0));
        assert_eq!(de2, expected);

        let b = catalog::catalog("example2").unwrap().algebra;
        let de5 = b
            .differential(&InvariantForm::monomial(6, &[4], FormBasis::Real).unwrap())
            .unwrap();
        let expected = InvariantForm::monomial(6, &[1, 2], FormBasis::Real)
            .unwrap()
            .scale(C64::new(-1.0, 0.0));
        assert_eq!(de5, expected);
    }

    #[test]
    fn constants_are_closed() {
        let a = catalog::catalog("example1").unwrap().algebra;
        let f = InvariantForm::constant(4, C64::new(3.5, -1.0), FormBasis::Real);
        assert_eq!(a.differential(&f).unwrap().norm(), 0.0);
    }

    #[test]
    fn top_degree_differential_overflows() {
        let a = LieAlgebra::abelian(2).unwrap();
        let top = InvariantForm::monomial(2, &[0, 1], FormBasis::Real).unwrap();
        assert!(matches!(
            a.differential(&top),
            Err(Error::DegreeOverflow { .. })
        ));
    }

    #[test]
    fn d_squared_vanishes_on_catalog_monomials() {
        for name in ["example1", "example2", "kt4"] {
            let a = catalog::catalog(name).unwrap().algebra;
            let n = a.dim();
            for k in 1..n - 1 {
                for t in tuples(n, k) {
                    let phi = InvariantForm::monomial(n, &t, FormBasis::Real).unwrap();
                    let dd = a.differential(&a.differential(&phi).unwrap()).unwrap();
                    assert!(dd.max_abs() <= 1e-12, "{name} {t:?}");
                }
            }
        }
    }

    #[test]
    fn conjugation_by_identity_is_identity() {
        let a = catalog::catalog("example2").unwrap().algebra;
        let b = a.conjugate(&DMatrix::identity(6, 6)).unwrap();
        assert_eq!(a, b);
    }
}
