//! Built-in instances and seeded generation of 2-step nilpotent SKT instances.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hermitian::{ComplexStructure, HermitianStructure, Metric};
use crate::liealg::{LieAlgebra, DEFAULT_TOL};

pub use crate::generate::{
    find_complex_structure, gen_two_step, generate_instance, solve_skt_metrics, GenControls,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// Worked example from the literature.
    Published,
    /// Standard model built by hand (kt4, abelian).
    Constructed,
    Generated(u64),
    File,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSpec {
    pub name: String,
    pub algebra: LieAlgebra,
    pub j: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub provenance: Provenance,
}

impl InstanceSpec {
    /// Validates and assembles the Hermitian structure.
    pub fn hermitian(&self) -> Result<HermitianStructure> {
        HermitianStructure::new(
            self.algebra.clone(),
            ComplexStructure::new(self.j.clone())?,
            Metric::new(self.g.clone())?,
        )
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }
}

/// Names accepted by [`catalog`], `abelian<dim>` aside.
pub const CATALOG_NAMES: [&str; 3] = ["example1", "example2", "kt4"];

pub fn catalog(name: &str) -> Result<InstanceSpec> {
    let spec = match name {
        "example1" => example1()?,
        "example2" => example2()?,
        "kt4" => kt4()?,
        _ => match name.strip_prefix("abelian").map(str::parse::<usize>) {
            Some(Ok(dim)) if dim >= 2 && dim % 2 == 0 => abelian(dim)?,
            _ => return Err(Error::UnknownInstance(name.to_string())),
        },
    };
    debug_assert!(spec.algebra.check_structure(DEFAULT_TOL).jacobi_ok);
    Ok(spec)
}

fn sym(dim: usize, diag: f64, off: &[(usize, usize, f64)]) -> DMatrix<f64> {
    let mut g = DMatrix::identity(dim, dim) * diag;
    for &(a, b, v) in off {
        g[(a, b)] = v;
        g[(b, a)] = v;
    }
    g
}

/// Solvable unimodular: de^2 = −e^{13}, de^3 = e^{12}, de^4 = −e^{23};
/// Je1 = e4, Je2 = e3; an SKT metric with off-diagonal terms.
fn example1() -> Result<InstanceSpec> {
    let algebra = LieAlgebra::from_structure_equations(
        4,
        &[
            (1, &[(0, 2, -1.0)]),
            (2, &[(0, 1, 1.0)]),
            (3, &[(1, 2, -1.0)]),
        ],
    )?;
    let j = ComplexStructure::from_pairs(4, &[(0, 3), (1, 2)])?;
    let g = sym(4, 1.0, &[(0, 2, 0.5), (1, 3, -0.5)]);
    Ok(InstanceSpec {
        name: "example1".into(),
        algebra,
        j: j.matrix().clone(),
        g,
        provenance: Provenance::Published,
    })
}

/// 2-step nilpotent: de^4 = e^{12}, de^5 = −e^{23}, de^6 = e^{13};
/// Je1 = e2, Je3 = e4, Je5 = e6; a non-SKT metric.
fn example2() -> Result<InstanceSpec> {
    let algebra = LieAlgebra::from_structure_equations(
        6,
        &[
            (3, &[(0, 1, 1.0)]),
            (4, &[(1, 2, -1.0)]),
            (5, &[(0, 2, 1.0)]),
        ],
    )?;
    let j = ComplexStructure::standard(6)?;
    let g = sym(6, 1.0, &[(2, 5, 0.5), (3, 4, -0.5)]);
    Ok(InstanceSpec {
        name: "example2".into(),
        algebra,
        j: j.matrix().clone(),
        g,
        provenance: Provenance::Published,
    })
}

/// Kodaira–Thurston: de^4 = e^{12}, Je1 = e2, Je3 = e4, g = identity.
fn kt4() -> Result<InstanceSpec> {
    let algebra = LieAlgebra::from_structure_equations(4, &[(3, &[(0, 1, 1.0)])])?;
    let j = ComplexStructure::standard(4)?;
    Ok(InstanceSpec {
        name: "kt4".into(),
        algebra,
        j: j.matrix().clone(),
        g: DMatrix::identity(4, 4),
        provenance: Provenance::Constructed,
    })
}

fn abelian(dim: usize) -> Result<InstanceSpec> {
    Ok(InstanceSpec {
        name: format!("abelian{dim}"),
        algebra: LieAlgebra::abelian(dim)?,
        j: ComplexStructure::standard(dim)?.matrix().clone(),
        g: DMatrix::identity(dim, dim),
        provenance: Provenance::Constructed,
    })
}
