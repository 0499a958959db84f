//! Pluriclosed flow on metrics, the bracket flow on structure constants, and
//! the transporter `h_t` relating them.
//!
//! With `ω(X, Y) = g(JX, Y)` the flow `∂_t ω = −(ρ^B)^{1,1}` becomes
//! `dg/dt = −ρ^{1,1}(·, J·)` on the metric; `P` is defined by
//! `ω(PX, Y) = ρ^{1,1}(X, Y)` and `dh/dt = −½ h P`.

use std::io::Write;

use nalgebra::DMatrix;

use crate::bismut::{generalized_symmetric_eigenvalues, rho_11, rho_general, rho_two_step_raw};
use crate::error::{Error, Result};
use crate::hermitian::{nijenhuis_tensor, ComplexStructure, HermitianStructure, Metric, UnitaryFrame};
use crate::liealg::{LieAlgebra, DEFAULT_TOL};
use crate::ode::{self, OdeControls, OdeStats, OdeStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowKind {
    Pcf,
    Bracket,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowControls {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// Relative invariant drift that aborts a run.
    pub drift_tol: f64,
    /// Record only at these times (and at both ends); `None` records every
    /// accepted step.
    pub sample_times: Option<Vec<f64>>,
}

impl Default for FlowControls {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            min_step: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
            drift_tol: 1e-6,
            sample_times: None,
        }
    }
}

impl FlowControls {
    /// Uniform grid of `intervals + 1` points on `[0, t_end]`.
    pub fn uniform_samples(mut self, t_end: f64, intervals: usize) -> Self {
        let m = intervals.max(1);
        self.sample_times = Some((0..=m).map(|i| t_end * i as f64 / m as f64).collect());
        self
    }

    fn ode(&self) -> OdeControls {
        OdeControls {
            rtol: self.rtol,
            atol: self.atol,
            min_step: self.min_step,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub kind: FlowKind,
    /// `g_t` for the metric flow, the fixed metric otherwise.
    pub g: DMatrix<f64>,
    /// `μ_t` for the bracket flow, the fixed algebra otherwise.
    pub mu: LieAlgebra,
    pub h: DMatrix<f64>,
    /// Size of the re-projection applied at this step.
    pub drift: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    /// `‖μ_t‖²` in the initial metric; on metric runs `μ_t = h μ(h⁻¹·, h⁻¹·)`.
    pub norm_mu_sq: f64,
    pub skt_residual: f64,
    /// Eigenvalues of `P`, ascending; `P` is self-adjoint for the state metric.
    pub p_eigenvalues: Vec<f64>,
    pub max_p_eigenvalue: f64,
    pub rhs_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub state: FlowState,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlowStatus {
    Completed,
    Blowup { t: f64, step: f64 },
    StepLimit { t: f64 },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: FlowKind,
    pub algebra: LieAlgebra,
    pub j: ComplexStructure,
    pub g0: Metric,
    pub samples: Vec<Sample>,
    pub status: FlowStatus,
    pub stats: OdeStats,
    pub max_drift: f64,
    /// First sample where `‖RHS‖ ≤ 1e-12·scale`.
    pub steady_at: Option<f64>,
}

fn mat(n: usize, y: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, n, y)
}

fn solve_omega(omega: &DMatrix<f64>, r11: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    omega
        .clone()
        .lu()
        .solve(r11)
        .ok_or_else(|| Error::InvalidMetric("singular fundamental form".into()))
}

fn p_eigen(g: &DMatrix<f64>, p: &DMatrix<f64>) -> Vec<f64> {
    let gp = g * p;
    generalized_symmetric_eigenvalues(&((&gp + gp.transpose()) * 0.5), g)
}

/// `P` with `ω(PX, Y) = ½(ρ(X, Y) + ρ(JX, JY))`.
pub fn p_omega(h: &HermitianStructure) -> Result<DMatrix<f64>> {
    let rho = rho_general(h)?;
    solve_omega(h.omega_matrix(), rho_11(h, &rho).matrix())
}

/// `dg/dt = −ρ^{1,1}(·, J·)`, symmetric and `J`-Hermitian.
pub fn pcf_rhs(h: &HermitianStructure) -> Result<DMatrix<f64>> {
    let rho = rho_general(h)?;
    let r11 = rho_11(h, &rho);
    let d = -(r11.matrix() * h.j());
    Ok((&d + d.transpose()) * 0.5)
}

/// `dh/dt = −½ h P`.
pub fn transporter_rhs(h: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    h * p * -0.5
}

/// Fixed `(J, g)` data for the bracket flow.
#[derive(Clone, Debug)]
struct Background {
    j: ComplexStructure,
    g: Metric,
    omega: DMatrix<f64>,
    frame: UnitaryFrame,
}

impl Background {
    fn new(j: &ComplexStructure, g: &Metric) -> Result<Self> {
        let n = j.dim();
        let h = HermitianStructure::assemble(LieAlgebra::abelian(n)?, j.clone(), g.clone());
        Ok(Self {
            frame: h.unitary_frame()?,
            omega: h.omega_matrix().clone(),
            j: j.clone(),
            g: g.clone(),
        })
    }

    fn p(&self, mu: &LieAlgebra) -> Result<DMatrix<f64>> {
        let t = self.frame.trace_bracket(mu);
        let r = rho_two_step_raw(mu, self.g.matrix(), &t);
        let j = self.j.matrix();
        let r11 = (r.matrix() + j.transpose() * r.matrix() * j) * 0.5;
        solve_omega(&self.omega, &((&r11 - r11.transpose()) * 0.5))
    }
}

/// `P_λ` for brackets `λ` with `(J, g)` frozen:
/// `ω(P_λX, Y) = (i/2) Σ_r g(λ(X,Y) + λ(JX,JY), λ(Z_r, Z̄_r))`.
pub fn p_lambda(lambda: &LieAlgebra, j: &ComplexStructure, g: &Metric) -> Result<DMatrix<f64>> {
    check_variety(lambda, j, g, 1e-6)?;
    Background::new(j, g)?.p(lambda)
}

fn check_variety(lambda: &LieAlgebra, j: &ComplexStructure, g: &Metric, tol: f64) -> Result<()> {
    let n = lambda.dim();
    if j.dim() != n || g.matrix().nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: j.dim(),
        });
    }
    let s = lambda.max_abs_constant();
    if lambda.two_step_residual() > tol * s * s {
        return Err(Error::OutsideVariety(format!(
            "two-step residual {:.3e}",
            lambda.two_step_residual()
        )));
    }
    if j.nijenhuis_residual(lambda) > tol * s * j.matrix().amax().powi(2) {
        return Err(Error::OutsideVariety(format!(
            "Nijenhuis residual {:.3e}",
            j.nijenhuis_residual(lambda)
        )));
    }
    let skt = HermitianStructure::assemble(lambda.clone(), j.clone(), g.clone()).skt_check(tol)?;
    if !skt.is_skt {
        return Err(Error::OutsideVariety(format!(
            "SKT residual {:.3e}",
            skt.residual_norm
        )));
    }
    Ok(())
}

fn bracket_velocity(n: usize, c: &[f64], p: &DMatrix<f64>) -> Vec<f64> {
    // μ(Pe_i, e_j) = Σ_a P_ai μ(e_a, e_j)
    let mut d = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for a in 0..n {
                let pai = p[(a, i)];
                let paj = p[(a, j)];
                if pai == 0.0 && paj == 0.0 {
                    continue;
                }
                for k in 0..n {
                    d[(i * n + j) * n + k] +=
                        0.5 * (pai * c[(a * n + j) * n + k] + paj * c[(i * n + a) * n + k]);
                }
            }
        }
    }
    d
}

/// `dμ/dt(X, Y) = ½ μ(PX, Y) + ½ μ(X, PY)` with `P = P_μ`, as a table indexed
/// like [`LieAlgebra::constants`].
pub fn bracket_rhs(mu: &LieAlgebra, j: &ComplexStructure, g: &Metric) -> Result<Vec<f64>> {
    let p = Background::new(j, g)?.p(mu)?;
    Ok(bracket_velocity(mu.dim(), mu.constants(), &p))
}

/// `Σ_{i<j} g(μ(f_i, f_j), μ(f_i, f_j))` over a `g`-orthonormal basis.
pub fn bracket_norm_sq(mu: &LieAlgebra, g: &Metric) -> f64 {
    let f = g.orthonormal_basis();
    let n = mu.dim();
    let mut s = 0.0;
    for a in 0..n {
        for b in (a + 1)..n {
            let v = mu.bracket_unchecked(&f.column(a).into_owned(), &f.column(b).into_owned());
            s += (v.transpose() * g.matrix() * &v)[(0, 0)];
        }
    }
    s
}

/// `Σ_{r,s} g(μ(P f_r, f_s), μ(f_r, f_s))` over a `g`-orthonormal basis; the
/// time derivative of [`bracket_norm_sq`] along the bracket flow.
pub fn monotonicity_derivative(mu: &LieAlgebra, j: &ComplexStructure, g: &Metric) -> Result<f64> {
    let p = Background::new(j, g)?.p(mu)?;
    let f = g.orthonormal_basis();
    let n = mu.dim();
    let mut s = 0.0;
    for r in 0..n {
        let fr = f.column(r).into_owned();
        let pfr = &p * &fr;
        for q in 0..n {
            let fs = f.column(q).into_owned();
            let a = mu.bracket_unchecked(&pfr, &fs);
            let b = mu.bracket_unchecked(&fr, &fs);
            s += (a.transpose() * g.matrix() * b)[(0, 0)];
        }
    }
    Ok(s)
}

fn drift_error(t: f64, what: &str, value: f64) -> Error {
    Error::InvariantDrift {
        t,
        what: what.into(),
        value,
    }
}

fn check_transporter(h: &DMatrix<f64>) -> Result<()> {
    let det = h.determinant();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(Error::Conditioning(det.abs()));
    }
    Ok(())
}

/// Integrates the metric flow or the bracket flow from `initial` to `t_end`.
///
/// Non-SKT data is accepted; the bracket flow additionally needs a 2-step
/// algebra. Step-size underflow is reported as [`FlowStatus::Blowup`], while
/// invariant drift beyond `controls.drift_tol` aborts with an error.
pub fn integrate(
    initial: &HermitianStructure,
    kind: FlowKind,
    t_end: f64,
    controls: &FlowControls,
) -> Result<Trajectory> {
    if !t_end.is_finite() || t_end < 0.0 {
        return Err(Error::InvalidArgument(format!("t_end must be finite and ≥ 0, got {t_end}")));
    }
    let n = initial.dim();
    let mu0 = initial.algebra().clone();
    if kind == FlowKind::Bracket && !mu0.is_two_step(DEFAULT_TOL) {
        return Err(Error::NotTwoStep(mu0.two_step_residual()));
    }
    let jcs = initial.complex_structure().clone();
    let j = jcs.matrix().clone();
    let g0 = initial.metric().clone();
    let bg = Background::new(&jcs, &g0)?;
    let scale = initial.scale();
    let c_scale = mu0.max_abs_constant();
    let skt0 = initial.skt_check(DEFAULT_TOL)?.residual_norm;
    let ident = DMatrix::<f64>::identity(n, n);

    let mut stops: Vec<f64> = controls
        .sample_times
        .as_deref()
        .unwrap_or(&[])
        .iter()
        .copied()
        .filter(|&s| s > 0.0 && s < t_end)
        .collect();
    stops.sort_by(|a, b| a.total_cmp(b));
    stops.dedup();
    let record_all = controls.sample_times.is_none();

    // state → (structure at this state, P, rhs-norm)
    let diagnose = |state: &FlowState| -> Result<Diagnostics> {
        let (hs, p, rhs_norm, norm_mu_sq) = match kind {
            FlowKind::Pcf => {
                let hs = HermitianStructure::assemble(mu0.clone(), jcs.clone(), Metric::unchecked(&state.g));
                let p = p_omega(&hs)?;
                let rhs = pcf_rhs(&hs)?;
                let norm = bracket_norm_sq(&mu0.conjugate(&state.h)?, &g0);
                (hs, p, rhs.amax(), norm)
            }
            FlowKind::Bracket => {
                let hs = HermitianStructure::assemble(state.mu.clone(), jcs.clone(), g0.clone());
                let p = bg.p(&state.mu)?;
                let v = bracket_velocity(n, state.mu.constants(), &p);
                let rhs = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let norm = bracket_norm_sq(&state.mu, &g0);
                (hs, p, rhs, norm)
            }
        };
        let skt_residual = hs.skt_check(DEFAULT_TOL)?.residual_norm;
        let p_eigenvalues = p_eigen(hs.g(), &p);
        let max_p_eigenvalue = p_eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Diagnostics {
            norm_mu_sq,
            skt_residual,
            max_p_eigenvalue: if p_eigenvalues.is_empty() { 0.0 } else { max_p_eigenvalue },
            p_eigenvalues,
            rhs_norm,
        })
    };

    let mut samples: Vec<Sample> = Vec::new();
    let mut max_drift: f64 = 0.0;
    let mut steady_at: Option<f64> = None;
    let record = |state: FlowState, samples: &mut Vec<Sample>, steady_at: &mut Option<f64>| -> Result<()> {
        let diagnostics = diagnose(&state)?;
        if steady_at.is_none() && diagnostics.rhs_norm <= 1e-12 * scale {
            *steady_at = Some(state.t);
        }
        samples.push(Sample { state, diagnostics });
        Ok(())
    };

    let (status, stats) = match kind {
        FlowKind::Pcf => {
            let m = n * n;
            let mut y: Vec<f64> = g0.matrix().iter().copied().collect();
            y.extend(ident.iter().copied());
            record(
                FlowState {
                    t: 0.0,
                    kind,
                    g: g0.matrix().clone(),
                    mu: mu0.clone(),
                    h: ident.clone(),
                    drift: 0.0,
                },
                &mut samples,
                &mut steady_at,
            )?;
            let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
                let g = mat(n, &y[..m]);
                let h = mat(n, &y[m..]);
                let hs = HermitianStructure::assemble(mu0.clone(), jcs.clone(), Metric::unchecked(&g));
                let rho = rho_general(&hs)?;
                let r11 = rho_11(&hs, &rho);
                let dg = -(r11.matrix() * &j);
                let dg = (&dg + dg.transpose()) * 0.5;
                let p = solve_omega(hs.omega_matrix(), r11.matrix())?;
                let dh = transporter_rhs(&h, &p);
                let mut out: Vec<f64> = dg.iter().copied().collect();
                out.extend(dh.iter().copied());
                Ok(out)
            };
            let on_accept = |t: f64, y: &mut Vec<f64>, hit: bool| -> Result<()> {
                let g = mat(n, &y[..m]);
                let gs = (&g + g.transpose()) * 0.5;
                let gp = (&gs + j.transpose() * &gs * &j) * 0.5;
                let drift = (&gp - &g).amax() / g.amax().max(f64::MIN_POSITIVE);
                max_drift = max_drift.max(drift);
                if drift > controls.drift_tol {
                    return Err(drift_error(t, "metric re-projection", drift));
                }
                if gp.clone().cholesky().is_none() {
                    return Err(drift_error(t, "metric positivity", gp.symmetric_eigenvalues().min()));
                }
                let h = mat(n, &y[m..]);
                check_transporter(&h)?;
                y[..m].copy_from_slice(gp.as_slice());
                if record_all || hit {
                    record(
                        FlowState {
                            t,
                            kind,
                            g: gp,
                            mu: mu0.clone(),
                            h,
                            drift,
                        },
                        &mut samples,
                        &mut steady_at,
                    )?;
                }
                Ok(())
            };
            ode::integrate(y, 0.0, t_end, &stops, &controls.ode(), rhs, on_accept)?
        }
        FlowKind::Bracket => {
            let m = n * n * n;
            let mut y: Vec<f64> = mu0.constants().to_vec();
            y.extend(ident.iter().copied());
            record(
                FlowState {
                    t: 0.0,
                    kind,
                    g: g0.matrix().clone(),
                    mu: mu0.clone(),
                    h: ident.clone(),
                    drift: 0.0,
                },
                &mut samples,
                &mut steady_at,
            )?;
            let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
                let mu = LieAlgebra::new(n, y[..m].to_vec())?;
                let h = mat(n, &y[m..]);
                let p = bg.p(&mu)?;
                let mut out = bracket_velocity(n, &y[..m], &p);
                out.extend((&p * &h * -0.5).iter().copied());
                Ok(out)
            };
            let jnorm = j.amax().powi(2);
            let on_accept = |t: f64, y: &mut Vec<f64>, hit: bool| -> Result<()> {
                let mu = LieAlgebra::new(n, y[..m].to_vec())?;
                let s = c_scale.max(f64::MIN_POSITIVE);
                let checks = [
                    ("antisymmetry", mu.antisymmetry_residual() / s),
                    ("two-step", mu.two_step_residual() / (s * s)),
                    (
                        "integrability",
                        nijenhuis_tensor(&mu, &j).iter().fold(0.0f64, |a, x| a.max(x.abs())) / (s * jnorm),
                    ),
                ];
                let mut drift: f64 = 0.0;
                for (what, value) in checks {
                    if value > controls.drift_tol {
                        return Err(drift_error(t, what, value));
                    }
                    drift = drift.max(value);
                }
                let hs = HermitianStructure::assemble(mu.clone(), jcs.clone(), g0.clone());
                let skt = hs.skt_check(DEFAULT_TOL)?.residual_norm;
                if skt > skt0 + controls.drift_tol * scale.powi(3) {
                    return Err(drift_error(t, "SKT residual", skt));
                }
                max_drift = max_drift.max(drift);
                let h = mat(n, &y[m..]);
                check_transporter(&h)?;
                if record_all || hit {
                    record(
                        FlowState {
                            t,
                            kind,
                            g: g0.matrix().clone(),
                            mu,
                            h,
                            drift,
                        },
                        &mut samples,
                        &mut steady_at,
                    )?;
                }
                Ok(())
            };
            ode::integrate(y, 0.0, t_end, &stops, &controls.ode(), rhs, on_accept)?
        }
    };

    let status = match status {
        OdeStatus::Completed => FlowStatus::Completed,
        OdeStatus::StepUnderflow { t, h } => FlowStatus::Blowup { t, step: h },
        OdeStatus::StepLimit { t } => FlowStatus::StepLimit { t },
    };
    Ok(Trajectory {
        kind,
        algebra: mu0,
        j: jcs,
        g0,
        samples,
        status,
        stats,
        max_drift,
        steady_at,
    })
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("the initial sample is always recorded")
    }

    /// The Hermitian structure at sample `i`.
    pub fn structure_at(&self, i: usize) -> HermitianStructure {
        let s = &self.samples[i].state;
        match self.kind {
            FlowKind::Pcf => HermitianStructure::assemble(
                self.algebra.clone(),
                self.j.clone(),
                Metric::unchecked(&s.g),
            ),
            FlowKind::Bracket => {
                HermitianStructure::assemble(s.mu.clone(), self.j.clone(), self.g0.clone())
            }
        }
    }

    /// Largest relative increase of `‖μ_t‖²` between consecutive samples
    /// (≤ 0 for a monotone run).
    pub fn max_norm_increase(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| {
                let a = w[0].diagnostics.norm_mu_sq;
                let b = w[1].diagnostics.norm_mu_sq;
                (b - a) / a.max(f64::MIN_POSITIVE)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest deviation of `g_t` and `h_t` from their initial values on
    /// the center, relative to `max|g₀|`.
    pub fn center_rigidity(&self) -> f64 {
        let c = self.algebra.center_basis(DEFAULT_TOL);
        if c.ncols() == 0 {
            return 0.0;
        }
        let g0 = self.g0.matrix();
        let n = g0.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        self.samples
            .iter()
            .map(|s| {
                let dg = ((&s.state.g - g0) * &c).amax() / g0.amax();
                let dh = ((&s.state.h - &id) * &c).amax();
                dg.max(dh)
            })
            .fold(0.0, f64::max)
    }

    pub fn csv_header(&self) -> String {
        let n = self.algebra.dim();
        let mut cols = vec!["t".to_string()];
        for i in 0..n {
            for j in i..n {
                cols.push(format!("g_{}_{}", i + 1, j + 1));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..n {
                    cols.push(format!("mu_{}_{}_{}", i + 1, j + 1, k + 1));
                }
            }
        }
        cols.extend(["norm_mu_sq", "skt_residual", "max_P_eig"].map(String::from));
        cols.join(",")
    }

    /// One row per sample, 17 significant digits, `\n` line ends.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.algebra.dim();
        writeln!(w, "{}", self.csv_header())?;
        let fmt = |x: f64| format!("{x:.16e}");
        for s in &self.samples {
            let mut row = vec![fmt(s.state.t)];
            for i in 0..n {
                for j in i..n {
                    row.push(fmt(s.state.g[(i, j)]));
                }
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in 0..n {
                        row.push(fmt(s.state.mu.c(i, j, k)));
                    }
                }
            }
            row.push(fmt(s.diagnostics.norm_mu_sq));
            row.push(fmt(s.diagnostics.skt_residual));
            row.push(fmt(s.diagnostics.max_p_eigenvalue));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    /// `max|ω_t − h_tᵀ ω₀ h_t| / max|ω₀|` along the metric run.
    pub metric_deviation: f64,
    /// `max|μ_t − h_t μ₀(h_t⁻¹·, h_t⁻¹·)| / max|μ₀|`, bracket state against the
    /// metric run's transporter.
    pub bracket_deviation: f64,
    /// `max|h_t^{pcf} − h_t^{bracket}|`.
    pub transporter_deviation: f64,
    pub max_deviation: f64,
    pub worst_time: f64,
    pub samples: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Compares a metric run and a bracket run started from the same datum and
/// sampled on the same grid.
pub fn check_equivalence(pcf: &Trajectory, bracket: &Trajectory, tol: f64) -> Result<EquivalenceReport> {
    if pcf.kind != FlowKind::Pcf || bracket.kind != FlowKind::Bracket {
        return Err(Error::InvalidArgument("expected a metric run and a bracket run".into()));
    }
    if pcf.samples.len() != bracket.samples.len() {
        return Err(Error::SamplingMismatch(format!(
            "{} vs {} samples",
            pcf.samples.len(),
            bracket.samples.len()
        )));
    }
    if pcf.algebra != bracket.algebra || pcf.g0 != bracket.g0 || pcf.j != bracket.j {
        return Err(Error::InvalidArgument("runs start from different data".into()));
    }
    let j = pcf.j.matrix();
    let omega0 = j.transpose() * pcf.g0.matrix();
    let c0 = pcf.algebra.max_abs_constant();
    let mut report = EquivalenceReport {
        metric_deviation: 0.0,
        bracket_deviation: 0.0,
        transporter_deviation: 0.0,
        max_deviation: 0.0,
        worst_time: 0.0,
        samples: pcf.samples.len(),
        tol,
        passed: false,
    };
    for (a, b) in pcf.samples.iter().zip(&bracket.samples) {
        let (ta, tb) = (a.state.t, b.state.t);
        if (ta - tb).abs() > 1e-12 * ta.abs().max(1.0) {
            return Err(Error::SamplingMismatch(format!("t = {ta} vs t = {tb}")));
        }
        let h = &a.state.h;
        let omega_t = j.transpose() * &a.state.g;
        let dm = (&omega_t - h.transpose() * &omega0 * h).amax() / omega0.amax();
        let recon = pcf.algebra.conjugate(h)?;
        let db = recon
            .constants()
            .iter()
            .zip(b.state.mu.constants())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
            / if c0 > 0.0 { c0 } else { 1.0 };
        let dh = (h - &b.state.h).amax();
        report.metric_deviation = report.metric_deviation.max(dm);
        report.bracket_deviation = report.bracket_deviation.max(db);
        report.transporter_deviation = report.transporter_deviation.max(dh);
        let worst = dm.max(db).max(dh);
        if worst > report.max_deviation {
            report.max_deviation = worst;
            report.worst_time = ta;
        }
    }
    report.passed = report.max_deviation <= tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::catalog;

    fn hs(name: &str) -> HermitianStructure {
        catalog(name).unwrap().hermitian().unwrap()
    }

    #[test]
    fn abelian_is_stationary() {
        let h = hs("abelian4");
        assert_eq!(p_omega(&h).unwrap().amax(), 0.0);
        assert_eq!(pcf_rhs(&h).unwrap().amax(), 0.0);
        for kind in [FlowKind::Pcf, FlowKind::Bracket] {
            let tr = integrate(&h, kind, 3.0, &FlowControls::default()).unwrap();
            assert_eq!(tr.status, FlowStatus::Completed);
            assert_eq!(tr.steady_at, Some(0.0));
            for s in &tr.samples {
                assert_eq!(s.state.g, DMatrix::identity(4, 4));
                assert_eq!(s.state.h, DMatrix::identity(4, 4));
            }
        }
    }

    #[test]
    fn kt4_p_kills_the_center() {
        let h = hs("kt4");
        let p = p_omega(&h).unwrap();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -1.0, 0.0, 0.0]));
        assert!((&p - want).amax() < 1e-12, "{p}");
        let pl = p_lambda(h.algebra(), h.complex_structure(), h.metric()).unwrap();
        assert!((&p - pl).amax() < 1e-12);
    }

    #[test]
    fn kt4_bracket_velocity() {
        let h = hs("kt4");
        let d = bracket_rhs(h.algebra(), h.complex_structure(), h.metric()).unwrap();
        // μ(e1,e2) = −e4 decays: velocity +e4
        assert!((d[(0 * 4 + 1) * 4 + 3] - 1.0).abs() < 1e-12);
        assert!((d[(1 * 4) * 4 + 3] + 1.0).abs() < 1e-12);
        assert_eq!(d.iter().filter(|x| x.abs() > 1e-14).count(), 2);
    }

    #[test]
    fn kt4_monotonicity_derivative_is_minus_two() {
        let h = hs("kt4");
        let v = monotonicity_derivative(h.algebra(), h.complex_structure(), h.metric()).unwrap();
        assert!((v + 2.0).abs() < 1e-12, "{v}");
        assert_eq!(bracket_norm_sq(h.algebra(), h.metric()), 1.0);
    }

    #[test]
    fn p_lambda_rejects_non_skt() {
        let h = hs("example2");
        assert!(matches!(
            p_lambda(h.algebra(), h.complex_structure(), h.metric()),
            Err(Error::OutsideVariety(_))
        ));
    }

    #[test]
    fn csv_header_layout() {
        let tr = integrate(&hs("kt4"), FlowKind::Pcf, 0.1, &FlowControls::default()).unwrap();
        let header = tr.csv_header();
        let cols: Vec<&str> = header.split(',').collect();
        assert_eq!(cols.len(), 1 + 10 + 6 * 4 + 3);
        assert_eq!(cols[1], "g_1_1");
        assert_eq!(cols[11], "mu_1_2_1");
        assert_eq!(*cols.last().unwrap(), "max_P_eig");
    }

    #[test]
    fn negative_horizon_is_rejected() {
        assert!(integrate(&hs("kt4"), FlowKind::Pcf, -1.0, &FlowControls::default()).is_err());
    }

    #[test]
    fn bracket_flow_refuses_non_nilpotent() {
        assert!(matches!(
            integrate(&hs("example1"), FlowKind::Bracket, 1.0, &FlowControls::default()),
            Err(Error::NotTwoStep(_))
        ));
    }
}
