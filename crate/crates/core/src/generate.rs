//! Seeded generation of 2-step nilpotent SKT instances: random brackets into a
//! central block, an integrable `J` by least squares, and an SKT metric from
//! the null space of the (linear) map `g ↦ ∂∂̄ω`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::catalog::{InstanceSpec, Provenance};
use crate::error::{Error, Result};
use crate::forms::InvariantForm;
use crate::hermitian::{ddbar_omega_in, nijenhuis_tensor, ComplexStructure, HermitianStructure, Metric, SplitBasis};
use crate::liealg::{LieAlgebra, DEFAULT_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct GenControls {
    /// Random restarts of the `J` search.
    pub max_restarts: usize,
    pub max_iterations: usize,
    /// Positive-definiteness draws per metric search.
    pub metric_attempts: usize,
    pub max_condition: f64,
    /// Full (algebra, `J`, `g`) attempts per instance.
    pub instance_attempts: usize,
    /// Penalize complex structures that do not preserve the center.
    pub preserve_center: bool,
}

impl Default for GenControls {
    fn default() -> Self {
        Self {
            max_restarts: 20,
            max_iterations: 400,
            metric_attempts: 1000,
            max_condition: 100.0,
            instance_attempts: 20,
            preserve_center: true,
        }
    }
}

/// Brackets `span(e_1..e_p)² → span(e_{p+1}..e_{p+q})` with constants uniform
/// in `[−1, 1]`.
pub fn gen_two_step(p: usize, q: usize, seed: u64) -> Result<LieAlgebra> {
    if (p + q) % 2 != 0 || q == 0 || p < 2 {
        return Err(Error::InvalidArgument(format!(
            "need p ≥ 2, q ≥ 1 and p + q even (got p = {p}, q = {q})"
        )));
    }
    let n = p + q;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid range");
    loop {
        let mut entries = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                for k in p..n {
                    entries.push((i, j, k, u.sample(&mut rng)));
                }
            }
        }
        if entries.iter().any(|e| e.3 != 0.0) {
            return LieAlgebra::from_brackets(n, &entries);
        }
    }
}

fn two_step_support(p: usize, q: usize) -> Vec<(usize, usize, usize)> {
    let mut s = Vec::new();
    for i in 0..p {
        for j in (i + 1)..p {
            for k in p..p + q {
                s.push((i, j, k));
            }
        }
    }
    s
}

/// `[vec(J² + I); N_J(e_a, e_b) for a < b]`.
///
/// With `M_k = c[·][·][k]`: `[Je_a, Je_b]_k = (JᵀM_kJ)_{ab}`,
/// `[Je_a, e_b]_k = (JᵀM_k)_{ab}`, `[e_a, Je_b]_k = (M_kJ)_{ab}`.
fn residual(ms: &[DMatrix<f64>], j: &DMatrix<f64>, center: Option<&DMatrix<f64>>) -> DVector<f64> {
    let n = j.nrows();
    let jt = j.transpose();
    let sq = j * j + DMatrix::identity(n, n);
    let jj: Vec<DMatrix<f64>> = ms.iter().map(|m| &jt * m * j).collect();
    let mixed: Vec<DMatrix<f64>> = ms.iter().map(|m| &jt * m + m * j).collect();
    let pairs = n * (n - 1) / 2;
    let extra = center.map_or(0, |_| n * n);
    let mut r = DVector::zeros(n * n + pairs * n + extra);
    r.rows_mut(0, n * n).copy_from(&DVector::from_column_slice(sq.as_slice()));
    let mut row = n * n;
    for a in 0..n {
        for b in (a + 1)..n {
            for k in 0..n {
                let mut v = jj[k][(a, b)] - ms[k][(a, b)];
                for m in 0..n {
                    v -= j[(k, m)] * mixed[m][(a, b)];
                }
                r[row + k] = v;
            }
            row += n;
        }
    }
    if let Some(pc) = center {
        // J must preserve the center: (I − Π) J Π = 0
        let leak = (DMatrix::identity(n, n) - pc) * j * pc;
        r.rows_mut(row, n * n).copy_from(&DVector::from_column_slice(leak.as_slice()));
    }
    r
}

fn slices(a: &LieAlgebra) -> Vec<DMatrix<f64>> {
    let n = a.dim();
    (0..n)
        .map(|k| DMatrix::from_fn(n, n, |i, j| a.c(i, j, k)))
        .collect()
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = m.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

#[derive(Clone, Debug)]
pub enum ComplexSearch {
    Found {
        j: ComplexStructure,
        objective: f64,
        restarts: usize,
    },
    NotFound {
        best_objective: f64,
        restarts: usize,
    },
}

/// Minimizes `F(J) = ‖J² + I‖² + ‖N_J‖²` by Levenberg–Marquardt from seeded
/// random orthogonal conjugates of the standard structure; success iff
/// `F < 1e-18` and the result validates.
pub fn find_complex_structure(
    algebra: &LieAlgebra,
    seed: u64,
    controls: &GenControls,
) -> Result<ComplexSearch> {
    let n = algebra.dim();
    if n % 2 != 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("dimension {n} is not even")));
    }
    let ms = slices(algebra);
    // an SKT structure on a 2-step algebra has J-invariant center
    let cb = algebra.center_basis(DEFAULT_TOL);
    let center = (controls.preserve_center && cb.ncols() % 2 == 0 && cb.ncols() > 0)
        .then(|| &cb * cb.transpose());
    let std = ComplexStructure::standard(n)?.matrix().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for restart in 0..controls.max_restarts.max(1) {
        let q = random_orthogonal(n, &mut rng);
        let j0 = &q * &std * q.transpose();
        let mut x = DVector::from_column_slice(j0.as_slice());
        let f = levenberg_marquardt(
            &mut x,
            |x| Ok(residual(&ms, &DMatrix::from_column_slice(n, n, x.as_slice()), center.as_ref())),
            controls.max_iterations,
        )?;
        let j = DMatrix::from_column_slice(n, n, x.as_slice());
        best = best.min(f);
        if f < 1e-18 {
            if let Ok(cs) = ComplexStructure::new(j) {
                if cs.is_integrable(algebra, DEFAULT_TOL) {
                    return Ok(ComplexSearch::Found {
                        j: cs,
                        objective: f,
                        restarts: restart,
                    });
                }
            }
        }
    }
    Ok(ComplexSearch::NotFound {
        best_objective: best,
        restarts: controls.max_restarts.max(1),
    })
}

/// Levenberg–Marquardt on `‖r(x)‖²` for residuals at most quadratic in `x`,
/// where the unit symmetric difference is the exact Jacobian.
fn levenberg_marquardt<F>(x: &mut DVector<f64>, res: F, iterations: usize) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let nv = x.len();
    let mut r = res(x)?;
    let mut f = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..iterations {
        if f < 1e-28 {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), nv);
        for v in 0..nv {
            let mut up = x.clone();
            let mut down = x.clone();
            up[v] += 1.0;
            down[v] -= 1.0;
            jac.set_column(v, &((res(&up)? - res(&down)?) * 0.5));
        }
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for d in 0..nv {
                a[(d, d)] += lambda * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = &*x - step;
            let rc = res(&cand)?;
            let fc = rc.norm_squared();
            if fc < f {
                *x = cand;
                r = rc;
                let rel = (f - fc) / f;
                f = fc;
                lambda = (lambda * 0.3).max(1e-15);
                improved = true;
                if rel < 1e-14 && f > 1e-18 {
                    return Ok(f);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok(f)
}

/// Orthonormal (Frobenius) basis of the `J`-Hermitian symmetric matrices.
fn hermitian_basis(j: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let n = j.nrows();
    let mut basis: Vec<DMatrix<f64>> = Vec::new();
    for a in 0..n {
        for b in a..n {
            let mut s = DMatrix::zeros(n, n);
            s[(a, b)] = 1.0;
            s[(b, a)] = 1.0;
            let mut p = (&s + j.transpose() * &s * j) * 0.5;
            let before = p.norm();
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&p);
                    p -= q * c;
                }
            }
            let norm = p.norm();
            if norm > 1e-8 * before.max(f64::MIN_POSITIVE) {
                basis.push(p / norm);
            }
        }
    }
    basis
}

/// Orthonormal null-space basis (as matrices) of `g ↦ ∂∂̄ω` restricted to the
/// `J`-Hermitian symmetric matrices.
pub fn skt_null_space(algebra: &LieAlgebra, j: &ComplexStructure) -> Result<Vec<DMatrix<f64>>> {
    let n = algebra.dim();
    let split = SplitBasis::from_complex_structure(j);
    let basis = hermitian_basis(j.matrix());
    let cols: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| {
            let omega = InvariantForm::from_real_matrix(&(j.matrix().transpose() * b));
            let r = ddbar_omega_in(algebra, &split, &omega)?;
            Ok(r.coeffs()
                .iter()
                .flat_map(|c| [c.re, c.im])
                .collect::<Vec<f64>>())
        })
        .collect::<Result<_>>()?;
    let m = basis.len();
    // pad to a tall matrix so the SVD returns a full right basis
    let rows = cols[0].len().max(m);
    let a = DMatrix::from_fn(rows, m, |r, c| cols[c].get(r).copied().unwrap_or(0.0));
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    // rounding floor: entries of ∂∂̄ω scale like |c|²·|J|²
    let floor = (algebra.max_abs_constant() * j.matrix().amax()).powi(2);
    let cut = 1e-9 * svd.singular_values.max().max(floor);
    let null: Vec<DMatrix<f64>> = (0..m)
        .filter(|&r| svd.singular_values[r] <= cut)
        .map(|r| {
            let mut g = DMatrix::zeros(n, n);
            for (c, b) in basis.iter().enumerate() {
                g += b * vt[(r, c)];
            }
            g
        })
        .collect();
    Ok(null)
}

/// Samples a positive-definite SKT metric with condition number at most
/// `controls.max_condition`, normalized so `λ_min·λ_max = 1`.
pub fn solve_skt_metrics(
    algebra: &LieAlgebra,
    j: &ComplexStructure,
    seed: u64,
    controls: &GenControls,
) -> Result<Option<Metric>> {
    let n = algebra.dim();
    let null = skt_null_space(algebra, j)?;
    if null.is_empty() {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jm = j.matrix();
    for attempt in 0..controls.metric_attempts {
        let g = if attempt == 0 {
            let r = reference_metric(jm);
            null.iter().fold(DMatrix::zeros(n, n), |acc, b| acc + b * b.dot(&r))
        } else if attempt % 2 == 0 {
            // project a random positive-definite Hermitian matrix
            let x = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
            let r = x.transpose() * &x + DMatrix::identity(n, n) * (n as f64);
            let r = (&r + jm.transpose() * &r * jm) * 0.5;
            null.iter().fold(DMatrix::zeros(n, n), |acc, b| acc + b * b.dot(&r))
        } else {
            let mut g = DMatrix::zeros(n, n);
            for b in &null {
                let c: f64 = StandardNormal.sample(&mut rng);
                g += b * c;
            }
            if g.trace() < 0.0 {
                -g
            } else {
                g
            }
        };
        let g = (&g + g.transpose()) * 0.5;
        if g.clone().cholesky().is_none() {
            continue;
        }
        let ev = g.symmetric_eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        if lo <= 0.0 || hi / lo > controls.max_condition {
            continue;
        }
        let g = g / (lo * hi).sqrt();
        let Ok(metric) = Metric::new(g) else { continue };
        let Ok(h) = HermitianStructure::new(algebra.clone(), j.clone(), metric.clone()) else {
            continue;
        };
        if h.skt_check(DEFAULT_TOL)?.is_skt {
            return Ok(Some(metric));
        }
    }
    Ok(None)
}

/// `½(I + JᵀJ)`, a `J`-Hermitian metric.
fn reference_metric(j: &DMatrix<f64>) -> DMatrix<f64> {
    let n = j.nrows();
    let r = (DMatrix::identity(n, n) + j.transpose() * j) * 0.5;
    (&r + r.transpose()) * 0.5
}

/// Deforms the constants on `support` (pairs `i < j` into `k`) as little as
/// Levenberg–Marquardt finds, keeping `‖c‖` fixed, until `J` is integrable and
/// `g` is SKT. `None` if the residual does not reach zero.
pub fn project_to_skt_variety(
    algebra: &LieAlgebra,
    j: &ComplexStructure,
    g: &Metric,
    support: &[(usize, usize, usize)],
    controls: &GenControls,
) -> Result<Option<LieAlgebra>> {
    let n = algebra.dim();
    let split = SplitBasis::from_complex_structure(j);
    let omega = InvariantForm::from_real_matrix(&(j.matrix().transpose() * g.matrix()));
    let build = |x: &DVector<f64>| -> Result<LieAlgebra> {
        let entries: Vec<_> = support
            .iter()
            .zip(x.iter())
            .map(|(&(a, b, k), &v)| (a, b, k, v))
            .collect();
        LieAlgebra::from_brackets(n, &entries)
    };
    let x0 = DVector::from_iterator(
        support.len(),
        support.iter().map(|&(a, b, k)| algebra.c(a, b, k)),
    );
    let norm0 = x0.norm_squared();
    let res = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let mu = build(x)?;
        let nij = nijenhuis_tensor(&mu, j.matrix());
        let dd = ddbar_omega_in(&mu, &split, &omega)?;
        let mut out: Vec<f64> = nij;
        out.extend(dd.coeffs().iter().flat_map(|c| [c.re, c.im]));
        out.push(x.norm_squared() - norm0);
        Ok(DVector::from_vec(out))
    };
    let mut x = x0.clone();
    let f = levenberg_marquardt(&mut x, res, controls.max_iterations)?;
    if f >= 1e-24 * norm0.max(1.0).powi(2) {
        return Ok(None);
    }
    let mu = build(&x)?;
    if mu.is_abelian() || !j.is_integrable(&mu, DEFAULT_TOL) {
        return Ok(None);
    }
    Ok(Some(mu))
}

/// One full SKT instance on `span(e_1..e_p) ⊕ center(q)`; `None` if every
/// attempt failed. Deterministic in `seed`.
pub fn generate_instance(
    p: usize,
    q: usize,
    seed: u64,
    controls: &GenControls,
) -> Result<Option<InstanceSpec>> {
    // SKT on a 2-step algebra forces a J-invariant center; with q odd the
    // search can only approach a degenerate algebra with a larger center.
    if q % 2 == 1 {
        return Ok(None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..controls.instance_attempts.max(1) {
        let (s1, s2, s3) = (rng.next_u64(), rng.next_u64(), rng.next_u64());
        let algebra = gen_two_step(p, q, s1)?;
        let ComplexSearch::Found { j, .. } = find_complex_structure(&algebra, s2, controls)? else {
            continue;
        };
        let (algebra, g) = match solve_skt_metrics(&algebra, &j, s3, controls)? {
            Some(g) => (algebra, g),
            None => {
                // SKT is a condition on (μ, J) here: move μ onto the variety
                let g_ref = Metric::new(reference_metric(j.matrix()))?;
                let support = two_step_support(p, q);
                let Some(mu) = project_to_skt_variety(&algebra, &j, &g_ref, &support, controls)? else {
                    continue;
                };
                let Some(g) = solve_skt_metrics(&mu, &j, s3, controls)? else {
                    continue;
                };
                (mu, g)
            }
        };
        let spec = InstanceSpec {
            name: format!("gen_{p}_{q}_{seed}"),
            algebra,
            j: j.matrix().clone(),
            g: g.matrix().clone(),
            provenance: Provenance::Generated(seed),
        };
        if spec.hermitian()?.skt_check(DEFAULT_TOL)?.is_skt {
            return Ok(Some(spec));
        }
    }
    Ok(None)
}

/// Draws a random seed stream; used for batch generation.
pub fn seed_stream(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog;

    #[test]
    fn two_step_generator_shape() {
        let a = gen_two_step(4, 2, 11).unwrap();
        let r = a.check_structure(DEFAULT_TOL);
        assert!(r.two_step && r.jacobi_ok);
        assert_eq!(a.jacobi_residual(), 0.0);
        assert!(a.constants().iter().all(|c| c.abs() <= 1.0));
        for k in 0..4 {
            assert_eq!(a.basis_bracket(0, 1)[k], 0.0);
        }
        assert!(gen_two_step(3, 2, 0).is_err());
        assert!(gen_two_step(2, 0, 0).is_err());
    }

    #[test]
    fn residual_vanishes_on_known_structures() {
        let s = catalog("example2").unwrap();
        assert!(residual(&slices(&s.algebra), &s.j, None).amax() < 1e-14);
    }

    #[test]
    fn abelian_search_succeeds_first_try() {
        let a = LieAlgebra::abelian(4).unwrap();
        match find_complex_structure(&a, 3, &GenControls::default()).unwrap() {
            ComplexSearch::Found { restarts, .. } => assert_eq!(restarts, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn recovers_a_structure_on_example2() {
        let a = catalog("example2").unwrap().algebra;
        match find_complex_structure(&a, 5, &GenControls::default()).unwrap() {
            ComplexSearch::Found { j, objective, .. } => {
                assert!(objective < 1e-18);
                assert!(j.is_integrable(&a, DEFAULT_TOL));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kt4_null_space_contains_identity() {
        let s = catalog("kt4").unwrap();
        let j = ComplexStructure::new(s.j.clone()).unwrap();
        let null = skt_null_space(&s.algebra, &j).unwrap();
        let id = DMatrix::<f64>::identity(4, 4);
        let proj = null.iter().fold(DMatrix::zeros(4, 4), |acc, b| acc + b * b.dot(&id));
        assert!((proj - id).amax() < 1e-10);
    }

    #[test]
    fn example2_metric_is_not_in_the_null_space() {
        let s = catalog("example2").unwrap();
        let j = ComplexStructure::new(s.j.clone()).unwrap();
        let null = skt_null_space(&s.algebra, &j).unwrap();
        let proj = null.iter().fold(DMatrix::zeros(6, 6), |acc, b| acc + b * b.dot(&s.g));
        assert!((proj - &s.g).amax() > 1e-3);
        let g = solve_skt_metrics(&s.algebra, &j, 1, &GenControls::default()).unwrap();
        if let Some(g) = g {
            let h = HermitianStructure::new(s.algebra.clone(), j, g).unwrap();
            assert!(h.skt_check(DEFAULT_TOL).unwrap().is_skt);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let c = GenControls::default();
        let a = generate_instance(2, 2, 42, &c).unwrap().unwrap();
        let b = generate_instance(2, 2, 42, &c).unwrap().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.provenance, Provenance::Generated(42));
    }
}
