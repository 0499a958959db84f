//! Python bindings. Matrices cross the boundary as nested lists; bracket
//! entries as 0-based `(i, j, k, value)` tuples with `i < j`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use pluriclosed::bismut::{
    rho_11, rho_general_with_frame, rho_two_step_with_frame, seminegativity_gap, static_residual,
};
use pluriclosed::flow::{self, FlowControls, FlowKind, FlowStatus};
use pluriclosed::generate::{generate_instance, seed_stream, GenControls};
use pluriclosed::liealg::DEFAULT_TOL;
use pluriclosed::{catalog, parse_instance, read_instance, to_instance_string, write_instance};
use pluriclosed::{Error, HermitianStructure, InstanceSpec, LieAlgebra, Provenance};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

fn from_rows(rows: &[Vec<f64>], n: usize, what: &str) -> PyResult<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err(format!("{what} must be {n}×{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn brackets(a: &LieAlgebra) -> Vec<(usize, usize, usize, f64)> {
    let n = a.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..n {
                let v = a.c(i, j, k);
                if v != 0.0 {
                    out.push((i, j, k, v));
                }
            }
        }
    }
    out
}

/// Lie algebra with complex structure and metric.
#[pyclass(name = "Instance", module = "pluriclosed", skip_from_py_object)]
#[derive(Clone)]
pub struct PyInstance {
    spec: InstanceSpec,
}

impl PyInstance {
    fn structure(&self) -> PyResult<HermitianStructure> {
        self.spec.hermitian().map_err(py_err)
    }
}

#[pymethods]
impl PyInstance {
    #[new]
    #[pyo3(signature = (dim, brackets, j, g, name = "unnamed".to_string()))]
    fn new(
        dim: usize,
        brackets: Vec<(usize, usize, usize, f64)>,
        j: Vec<Vec<f64>>,
        g: Vec<Vec<f64>>,
        name: String,
    ) -> PyResult<Self> {
        let algebra = LieAlgebra::from_brackets(dim, &brackets).map_err(py_err)?;
        Ok(Self {
            spec: InstanceSpec {
                name,
                algebra,
                j: from_rows(&j, dim, "J")?,
                g: from_rows(&g, dim, "g")?,
                provenance: Provenance::File,
            },
        })
    }

    /// Built-in instance: `example1`, `example2`, `kt4` or `abelian<dim>`.
    #[staticmethod]
    fn catalog(name: &str) -> PyResult<Self> {
        Ok(Self {
            spec: catalog(name).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            spec: read_instance(path).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            spec: parse_instance(text).map_err(py_err)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        write_instance(path, &self.spec).map_err(py_err)
    }

    fn to_text(&self) -> String {
        to_instance_string(&self.spec)
    }

    #[getter]
    fn name(&self) -> String {
        self.spec.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[getter]
    fn brackets(&self) -> Vec<(usize, usize, usize, f64)> {
        brackets(&self.spec.algebra)
    }

    #[getter]
    fn j(&self) -> Vec<Vec<f64>> {
        to_rows(&self.spec.j)
    }

    #[getter]
    fn g(&self) -> Vec<Vec<f64>> {
        to_rows(&self.spec.g)
    }

    /// Structural checks; SKT is only evaluated for a valid Hermitian structure.
    fn validate(&self) -> HashMap<String, f64> {
        let a = &self.spec.algebra;
        let r = a.check_structure(DEFAULT_TOL);
        let mut out = HashMap::new();
        out.insert("antisymmetry_residual".into(), r.antisymmetry_residual);
        out.insert("jacobi_residual".into(), r.jacobi_residual);
        out.insert("two_step_residual".into(), a.two_step_residual());
        out.insert("center_dim".into(), r.center_dim as f64);
        let flag = |b: bool| if b { 1.0 } else { 0.0 };
        out.insert("two_step".into(), flag(r.two_step));
        match self.spec.hermitian() {
            Ok(h) => {
                out.insert("valid".into(), 1.0);
                if let Ok(s) = h.skt_check(DEFAULT_TOL) {
                    out.insert("skt".into(), flag(s.is_skt));
                    out.insert("skt_residual".into(), s.residual_norm);
                }
            }
            Err(_) => {
                out.insert("valid".into(), 0.0);
            }
        }
        out
    }

    fn is_skt(&self) -> PyResult<bool> {
        Ok(self.structure()?.skt_check(DEFAULT_TOL).map_err(py_err)?.is_skt)
    }

    /// Bismut–Ricci form as an antisymmetric matrix, `rho[i][j] = ρ(e_i, e_j)`.
    #[pyo3(signature = (formula = "general", frame_seed = None))]
    fn rho(&self, formula: &str, frame_seed: Option<u64>) -> PyResult<Vec<Vec<f64>>> {
        let h = self.structure()?;
        let frame = match frame_seed {
            Some(s) => h.unitary_frame_seeded(s),
            None => h.unitary_frame(),
        }
        .map_err(py_err)?;
        let rho = match formula {
            "general" => rho_general_with_frame(&h, &frame),
            "two-step" | "two_step" => rho_two_step_with_frame(&h, &frame),
            other => return Err(PyValueError::new_err(format!("unknown formula `{other}`"))),
        }
        .map_err(py_err)?;
        Ok(to_rows(rho.matrix()))
    }

    fn rho11(&self) -> PyResult<Vec<Vec<f64>>> {
        let h = self.structure()?;
        let rho = pluriclosed::bismut::rho_general(&h).map_err(py_err)?;
        Ok(to_rows(rho_11(&h, &rho).matrix()))
    }

    /// Eigenvalues of `ρ^{1,1}(·, J·)` relative to `g`, ascending.
    fn seminegativity(&self) -> PyResult<Vec<f64>> {
        Ok(seminegativity_gap(&self.structure()?).map_err(py_err)?.eigenvalues)
    }

    /// `(λ*, residual)` of the best fit `ρ^{1,1} ≈ λω`.
    fn static_residual(&self) -> PyResult<(f64, f64)> {
        let s = static_residual(&self.structure()?).map_err(py_err)?;
        Ok((s.lambda_star, s.residual))
    }

    #[pyo3(signature = (kind = "pcf", t_end = 1.0, rtol = 1e-8, samples = None))]
    fn flow(&self, kind: &str, t_end: f64, rtol: f64, samples: Option<usize>) -> PyResult<PyTrajectory> {
        let kind = match kind {
            "pcf" => FlowKind::Pcf,
            "bracket" => FlowKind::Bracket,
            other => return Err(PyValueError::new_err(format!("unknown flow kind `{other}`"))),
        };
        let mut c = FlowControls {
            rtol,
            atol: rtol * 1e-2,
            ..FlowControls::default()
        };
        if let Some(m) = samples {
            c = c.uniform_samples(t_end, m);
        }
        let h = self.structure()?;
        Ok(PyTrajectory {
            inner: flow::integrate(&h, kind, t_end, &c).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Instance(name={:?}, dim={})", self.spec.name, self.spec.dim())
    }
}

#[pyclass(name = "Trajectory", module = "pluriclosed")]
pub struct PyTrajectory {
    inner: flow::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times()
    }

    #[getter]
    fn status(&self) -> String {
        match self.inner.status {
            FlowStatus::Completed => "completed".into(),
            FlowStatus::Blowup { t, .. } => format!("blowup at t={t}"),
            FlowStatus::StepLimit { t } => format!("step limit at t={t}"),
        }
    }

    #[getter]
    fn metrics(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.samples.iter().map(|s| to_rows(&s.state.g)).collect()
    }

    #[getter]
    fn transporters(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner.samples.iter().map(|s| to_rows(&s.state.h)).collect()
    }

    #[getter]
    fn brackets(&self) -> Vec<Vec<(usize, usize, usize, f64)>> {
        self.inner.samples.iter().map(|s| brackets(&s.state.mu)).collect()
    }

    #[getter]
    fn norm_mu_sq(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.diagnostics.norm_mu_sq).collect()
    }

    #[getter]
    fn max_p_eigenvalue(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.diagnostics.max_p_eigenvalue).collect()
    }

    #[getter]
    fn max_drift(&self) -> f64 {
        self.inner.max_drift
    }

    #[getter]
    fn steady_at(&self) -> Option<f64> {
        self.inner.steady_at
    }

    fn center_rigidity(&self) -> f64 {
        self.inner.center_rigidity()
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        let f = std::fs::File::create(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
        self.inner.write_csv(std::io::BufWriter::new(f)).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }
}

/// Largest deviation between a metric run and a bracket run sampled on the
/// same grid, after transport to a common frame.
#[pyfunction]
#[pyo3(signature = (pcf, bracket, tol = 1e-5))]
fn check_equivalence(pcf: &PyTrajectory, bracket: &PyTrajectory, tol: f64) -> PyResult<(bool, f64)> {
    let r = flow::check_equivalence(&pcf.inner, &bracket.inner, tol).map_err(py_err)?;
    Ok((r.passed, r.max_deviation))
}

/// One SKT instance on a random 2-step algebra, or `None` on failure.
#[pyfunction]
fn generate(p: usize, q: usize, seed: u64) -> PyResult<Option<PyInstance>> {
    Ok(generate_instance(p, q, seed, &GenControls::default())
        .map_err(py_err)?
        .map(|spec| PyInstance { spec }))
}

/// `count` instances from the seed stream of `seed`, skipping failed draws.
#[pyfunction]
#[pyo3(signature = (p, q, count, seed = 0))]
fn search(py: Python<'_>, p: usize, q: usize, count: usize, seed: u64) -> PyResult<Vec<PyInstance>> {
    py.detach(|| {
        let c = GenControls::default();
        let mut out = Vec::with_capacity(count);
        for s in seed_stream(seed, count * 10) {
            if out.len() == count {
                break;
            }
            if let Some(spec) = generate_instance(p, q, s, &c)? {
                out.push(PyInstance { spec });
            }
        }
        Ok(out)
    })
    .map_err(py_err)
}

#[pymodule]
#[pyo3(name = "pluriclosed")]
fn init(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(check_equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_listing_matches_algebra() {
        let spec = catalog("kt4").unwrap();
        assert_eq!(brackets(&spec.algebra), vec![(0, 1, 3, -1.0)]);
        let back = LieAlgebra::from_brackets(4, &brackets(&spec.algebra)).unwrap();
        assert_eq!(back, spec.algebra);
    }

    #[test]
    fn rows_round_trip() {
        let m = DMatrix::from_fn(3, 3, |r, c| (r * 3 + c) as f64);
        assert_eq!(from_rows(&to_rows(&m), 3, "m").unwrap(), m);
    }
}
