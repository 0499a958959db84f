//! Alternating forms on a finite-dimensional (complexified) Lie algebra.
//!
//! A k-form is stored by its coefficients on the increasing k-tuples of basis
//! indices, ordered colexicographically. Monomials follow the determinant
//! convention, `(e^i ∧ e^j)(e_k, e_l) = δ^i_k δ^j_l − δ^i_l δ^j_k`, so a form
//! evaluated on basis vectors `(e_I)` returns its coefficient at `I`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// Which basis of the complexified algebra a form's coefficients refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FormBasis {
    /// The real basis `e_1..e_2n`.
    Real,
    /// A split frame `Z_1..Z_n, Z̄_1..Z̄_n`.
    Frame,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Colex rank of a strictly increasing tuple.
pub(crate) fn rank(tuple: &[usize]) -> usize {
    tuple
        .iter()
        .enumerate()
        .map(|(a, &t)| binomial(t, a + 1))
        .sum()
}

/// All increasing `k`-tuples over `0..n`, indexed by colex rank.
pub fn tuples(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); binomial(n, k)];
    let mut cur = Vec::with_capacity(k);
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            let r = rank(cur);
            out[r] = cur.clone();
            return;
        }
        for v in start..n {
            cur.push(v);
            rec(n, k, v + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut cur, &mut out);
    out
}

/// Sorts `idx` in place and returns the permutation sign, or `None` on a repeat.
pub(crate) fn sort_with_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for a in 1..idx.len() {
        let mut b = a;
        while b > 0 && idx[b - 1] > idx[b] {
            idx.swap(b - 1, b);
            sign = -sign;
            b -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantForm {
    dim: usize,
    degree: usize,
    basis: FormBasis,
    coeffs: Vec<C64>,
}

impl InvariantForm {
    pub fn zero(dim: usize, degree: usize, basis: FormBasis) -> Result<Self> {
        if degree > dim {
            return Err(Error::DegreeOverflow { degree, dim });
        }
        Ok(Self {
            dim,
            degree,
            basis,
            coeffs: vec![ZERO; binomial(dim, degree)],
        })
    }

    /// The constant function `value` (a 0-form).
    pub fn constant(dim: usize, value: C64, basis: FormBasis) -> Self {
        Self {
            dim,
            degree: 0,
            basis,
            coeffs: vec![value],
        }
    }

    /// `e^{i_1} ∧ … ∧ e^{i_k}` with 0-based indices in any order.
    pub fn monomial(dim: usize, indices: &[usize], basis: FormBasis) -> Result<Self> {
        let mut f = Self::zero(dim, indices.len(), basis)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad + 1,
            });
        }
        f.add_term(indices, C64::new(1.0, 0.0));
        Ok(f)
    }

    /// Builds a form from `(indices, coefficient)` terms; indices are 0-based.
    pub fn from_terms(
        dim: usize,
        degree: usize,
        basis: FormBasis,
        terms: &[(&[usize], C64)],
    ) -> Result<Self> {
        let mut f = Self::zero(dim, degree, basis)?;
        for (idx, v) in terms {
            if idx.len() != degree {
                return Err(Error::DegreeOverflow {
                    degree: idx.len(),
                    dim,
                });
            }
            f.add_term(idx, *v);
        }
        Ok(f)
    }

    /// The 2-form with `φ(e_i, e_j) = m[(i, j)]`; `m` should be antisymmetric,
    /// only the strict upper triangle is read.
    pub fn from_matrix(m: &DMatrix<C64>, basis: FormBasis) -> Self {
        let dim = m.nrows();
        let mut f = Self::zero(dim, 2, basis).expect("square matrix of size >= 2");
        for (r, t) in tuples(dim, 2).iter().enumerate() {
            f.coeffs[r] = m[(t[0], t[1])];
        }
        f
    }

    pub fn from_real_matrix(m: &DMatrix<f64>) -> Self {
        Self::from_matrix(&m.map(|x| C64::new(x, 0.0)), FormBasis::Real)
    }

    /// Antisymmetric matrix `φ(e_i, e_j)` of a 2-form.
    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        if self.degree != 2 {
            return Err(Error::InvalidArgument(format!(
                "to_matrix needs a 2-form, got degree {}",
                self.degree
            )));
        }
        let mut m = DMatrix::from_element(self.dim, self.dim, ZERO);
        for (t, v) in self.terms() {
            m[(t[0], t[1])] = v;
            m[(t[1], t[0])] = -v;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn basis(&self) -> FormBasis {
        self.basis
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// `(tuple, coefficient)` pairs in storage order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, C64)> + '_ {
        tuples(self.dim, self.degree)
            .into_iter()
            .zip(self.coeffs.iter().copied())
    }

    /// Coefficient at an arbitrary index tuple (sign-adjusted; 0 on repeats).
    pub fn get(&self, indices: &[usize]) -> C64 {
        let mut idx = indices.to_vec();
        match sort_with_sign(&mut idx) {
            Some(s) => self.coeffs[rank(&idx)] * s,
            None => ZERO,
        }
    }

    pub(crate) fn add_term(&mut self, indices: &[usize], value: C64) {
        let mut idx = indices.to_vec();
        if let Some(s) = sort_with_sign(&mut idx) {
            self.coeffs[rank(&idx)] += value * s;
        }
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.basis != other.basis {
            return Err(Error::BasisMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.degree != other.degree {
            return Err(Error::InvalidArgument("degrees differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Coefficient-wise complex conjugate (meaningful in the real basis).
    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c = c.conj());
        out
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Largest imaginary part among the coefficients.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// `φ(v_1, …, v_k)` for coefficient vectors in this form's basis.
    pub fn eval(&self, vectors: &[DVector<C64>]) -> Result<C64> {
        if vectors.len() != self.degree {
            return Err(Error::InvalidArgument(format!(
                "a {}-form takes {} arguments, got {}",
                self.degree,
                self.degree,
                vectors.len()
            )));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != self.dim) {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        if self.degree == 0 {
            return Ok(self.coeffs[0]);
        }
        let k = self.degree;
        let mut total = ZERO;
        for (t, c) in self.terms() {
            if c == ZERO {
                continue;
            }
            let m = DMatrix::from_fn(k, k, |a, b| vectors[b][t[a]]);
            total += c * m.determinant();
        }
        Ok(total)
    }

    /// Exterior product `φ ∧ ψ`.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let p = self.degree;
        let q = other.degree;
        let mut out = Self::zero(self.dim, p + q, self.basis)?;
        let left = tuples(self.dim, p);
        for (li, lt) in left.iter().enumerate() {
            let a = self.coeffs[li];
            if a == ZERO {
                continue;
            }
            for (rt, b) in other.terms() {
                if b == ZERO {
                    continue;
                }
                let mut idx: Vec<usize> = lt.iter().chain(rt.iter()).copied().collect();
                if let Some(s) = sort_with_sign(&mut idx) {
                    out.coeffs[rank(&idx)] += a * b * s;
                }
            }
        }
        Ok(out)
    }

    /// Pullback along the linear map whose columns are the images of the new
    /// basis vectors: the result's coefficient at `J` is `φ(m_{j_1}, …, m_{j_k})`.
    pub fn pullback(&self, m: &DMatrix<C64>, basis: FormBasis) -> Result<Self> {
        if m.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: m.nrows(),
            });
        }
        let new_dim = m.ncols();
        let k = self.degree;
        let mut out = Self::zero(new_dim, k, basis)?;
        if k == 0 {
            out.coeffs[0] = self.coeffs[0];
            return Ok(out);
        }
        let src: Vec<(Vec<usize>, C64)> = self.terms().filter(|(_, c)| *c != ZERO).collect();
        for (r, jt) in tuples(new_dim, k).iter().enumerate() {
            let mut acc = ZERO;
            for (it, c) in &src {
                acc += *c * minor_det(m, it, jt);
            }
            out.coeffs[r] = acc;
        }
        Ok(out)
    }

    /// Keeps only the monomials of frame bidegree `(p, q)`: `p` indices below
    /// `n` (the `Z` slots) and `q` at or above it (the `Z̄` slots).
    pub(crate) fn filter_bidegree(&self, n: usize, p: usize, q: usize) -> Self {
        let mut out = self.clone();
        if p + q != self.degree {
            out.coeffs.iter_mut().for_each(|c| *c = ZERO);
            return out;
        }
        for (r, t) in tuples(self.dim, self.degree).iter().enumerate() {
            if t.iter().filter(|&&i| i < n).count() != p {
                out.coeffs[r] = ZERO;
            }
        }
        out
    }

}

fn minor_det(m: &DMatrix<C64>, rows: &[usize], cols: &[usize]) -> C64 {
    match rows.len() {
        1 => m[(rows[0], cols[0])],
        2 => {
            m[(rows[0], cols[0])] * m[(rows[1], cols[1])]
                - m[(rows[0], cols[1])] * m[(rows[1], cols[0])]
        }
        k => DMatrix::from_fn(k, k, |a, b| m[(rows[a], cols[b])]).determinant(),
    }
}
