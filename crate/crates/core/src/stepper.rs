//! Energy-conserving Crank–Nicolson time stepping with a mixed
//! (multiplier) treatment of the Coulomb gauge.
//!
//! Each step first advances the vector potential through a saddle-point
//! system that depends only on level `k−1` data, then solves the coupled
//! Schrödinger–Poisson subsystem by Picard iteration.

use crate::assembly::{
    assemble_current, assemble_density_load, assemble_form_with, assemble_load, assemble_real, assemble_vector_load,
    AssemblyError, DofSet, FormKind, ScalarWeight, Spaces,
};
use crate::diagnostics::{self, CsvSink, DiagnosticsRecord, ErrorRecord};
use crate::fespace::{
    d_form_matrix, interpolate_scalar, ComplexFunction, FeError, FeFunction, QuadratureRule, RitzProjector, RitzSource,
    ScalarFunction, VectorFunction,
};
use crate::manufactured::{CustomProblem, FreeEvolution, ManufacturedSolution, Problem};
use crate::mesh::{write_vtk, Mesh, MeshError, NodalField};
use crate::scalar::{Field, Real};
use crate::sparse::{
    CsrMatrix, DirectSolver, PrimalPreconditioner, SchurPreconditioner, SchurSolver, SolverError, SolverMethod,
    SolverOptions, SolverReport,
};
use num_complex::Complex;
use std::fmt;
use std::io;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("linear solver failure: {0}")]
    Solver(#[from] SolverError),
    #[error("Picard iteration does not contract at step {step} (tau = {tau}); update history {history:?}")]
    NonContraction { step: usize, tau: f64, history: Vec<f64> },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Which data drive the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExampleKind {
    /// Unforced evolution from the two-mode initial state.
    #[default]
    Free,
    /// Forced run with a known exact solution.
    Manufactured,
    /// Data supplied by the caller through [`Simulation::with_problem`].
    Custom,
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleKind::Free => "free",
            ExampleKind::Manufactured => "manufactured",
            ExampleKind::Custom => "custom",
        })
    }
}

impl FromStr for ExampleKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "free" => Ok(ExampleKind::Free),
            "manufactured" => Ok(ExampleKind::Manufactured),
            "custom" => Ok(ExampleKind::Custom),
            other => Err(format!(
                "unknown example '{other}' (expected free, manufactured or custom)"
            )),
        }
    }
}

/// Scalar potential `V(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PotentialSpec {
    /// Whatever the example prescribes.
    #[default]
    Example,
    Zero,
    Constant(f64),
    /// `|x|²/2`
    Harmonic,
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Example => f.write_str("example"),
            PotentialSpec::Zero => f.write_str("zero"),
            PotentialSpec::Constant(c) => write!(f, "constant:{c:?}"),
            PotentialSpec::Harmonic => f.write_str("harmonic"),
        }
    }
}

impl FromStr for PotentialSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "example" => Ok(PotentialSpec::Example),
            "zero" => Ok(PotentialSpec::Zero),
            "harmonic" => Ok(PotentialSpec::Harmonic),
            other => match other.strip_prefix("constant:") {
                Some(v) => v
                    .parse::<f64>()
                    .map(PotentialSpec::Constant)
                    .map_err(|e| format!("bad constant potential '{v}': {e}")),
                None => Err(format!("unknown potential '{other}'")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    /// Subdivisions per cube edge.
    pub n: usize,
    /// Order of the Ψ and φ elements (1 or 2).
    pub order: usize,
    pub tau: f64,
    pub t_final: f64,
    pub picard_tol: f64,
    pub picard_max_iters: usize,
    pub linear_tol: f64,
    pub example: ExampleKind,
    pub potential: PotentialSpec,
    /// Use the divergence-free sign of the printed vector potentials.
    pub div_fix: bool,
    /// Solve the Poisson equation and couple φ into the Schrödinger step.
    pub poisson_coupling: bool,
    pub solver: SolverMethod,
    pub output_dir: Option<PathBuf>,
    /// VTK snapshot every this many steps; 0 disables.
    pub vtk_every: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            n: 8,
            order: 2,
            tau: 0.02,
            t_final: 1.0,
            picard_tol: 1e-11,
            picard_max_iters: 50,
            linear_tol: 1e-12,
            example: ExampleKind::Free,
            potential: PotentialSpec::Example,
            div_fix: true,
            poisson_coupling: true,
            solver: SolverMethod::Direct,
            output_dir: None,
            vtk_every: 0,
        }
    }
}

impl SchemeConfig {
    /// Validates and returns the number of steps `M = T/τ`.
    pub fn num_steps(&self) -> Result<usize, StepError> {
        let bad = |m: String| Err(StepError::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.order != 1 && self.order != 2 {
            return bad(format!("order must be 1 or 2, got {}", self.order));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.t_final >= self.tau) || !self.t_final.is_finite() {
            return bad(format!(
                "t_final ({}) must be at least tau ({})",
                self.t_final, self.tau
            ));
        }
        if !(self.picard_tol > 0.0) || !(self.linear_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.picard_max_iters == 0 {
            return bad("picard_max_iters must be positive".into());
        }
        let m = (self.t_final / self.tau).round();
        if (m * self.tau - self.t_final).abs() > 1e-12 * self.t_final.max(1.0) {
            return bad(format!("t_final / tau = {} is not an integer", self.t_final / self.tau));
        }
        Ok(m as usize)
    }

    /// Mesh size used for the time-step coupling, `1/N`.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }
}

/// Time step for the convergence study: `τ = h` for quadratic elements and
/// `τ ≈ √h` for linear ones, rounded down so that `T/τ` is an integer.
pub fn coupled_time_step(order: usize, n: usize, t_final: f64) -> f64 {
    let h = 1.0 / n as f64;
    let target = if order == 1 { h.sqrt() } else { h };
    let m = (t_final / target - 1e-9).ceil().max(1.0);
    t_final / m
}

/// Unknowns at level `k` (plus `A^{k−1}`).
#[derive(Debug, Clone)]
pub struct State<T: Real> {
    pub k: usize,
    pub t: T,
    pub psi: ComplexFunction<T>,
    pub a: VectorFunction<T>,
    pub a_prev: VectorFunction<T>,
    pub phi: ScalarFunction<T>,
    pub p: ScalarFunction<T>,
}

/// Spaces and time-independent matrices on the free dofs.
#[derive(Debug)]
pub struct Discretization<T: Real> {
    pub spaces: Spaces<T>,
    pub tau: T,
    /// Ψ-space mass `W`.
    pub mass_psi: CsrMatrix<T>,
    /// Ψ-space `V`-weighted mass.
    pub potential_psi: CsrMatrix<T>,
    /// φ-space stiffness.
    pub stiffness_phi: CsrMatrix<T>,
    poisson: PoissonSolver<T>,
    /// Vector mass.
    pub mass_vec: CsrMatrix<T>,
    /// `D = curl-curl + div-div`.
    pub d_form: CsrMatrix<T>,
    /// Divergence pairing, multipliers × vector dofs.
    pub pairing: CsrMatrix<T>,
    /// Diagonal of the multiplier mass, `‖q_i‖²`.
    pub mult_mass_diag: Vec<T>,
    /// `K₀ = M/τ² + D/2`, the density-independent part of the Maxwell block.
    pub maxwell_base: CsrMatrix<T>,
    /// Schur-complement solver preconditioned by a factorization of `K₀`.
    maxwell: SchurSolver<T>,
    method: SolverMethod,
}

#[derive(Debug)]
enum PoissonSolver<T: Real> {
    Direct(DirectSolver<T>),
    Iterative,
}

impl<T: Real> Discretization<T> {
    pub fn new(
        n: usize,
        order: usize,
        tau: T,
        potential: &(dyn Fn([T; 3]) -> T + Sync),
        method: SolverMethod,
    ) -> Result<Self, StepError> {
        let mesh = Arc::new(Mesh::unit_cube(n)?);
        let spaces = Spaces::new(mesh, order)?;
        let rule = QuadratureRule::degree6();
        let free = DofSet::Free;
        let (psi, phi, vec, mult) = (&*spaces.psi, &*spaces.phi, &*spaces.vector, &*spaces.mult);
        let mass_psi = assemble_real(FormKind::ScalarMass, psi, psi, free)?;
        let potential_psi = assemble_form_with(
            FormKind::WeightedScalarMass(ScalarWeight::pointwise(potential)),
            psi,
            psi,
            free,
            &rule,
        )?
        .into_real()
        .expect("real form");
        let stiffness_phi = assemble_real(FormKind::ScalarStiffness, phi, phi, free)?;
        let poisson = match method {
            SolverMethod::Direct => PoissonSolver::Direct(DirectSolver::new(stiffness_phi.clone())?),
            SolverMethod::Iterative => PoissonSolver::Iterative,
        };
        let mass_vec = assemble_real(FormKind::VectorMass, vec, vec, free)?;
        let d_form = d_form_matrix(vec)?;
        let pairing = assemble_real(FormKind::DivPairing, vec, mult, free)?;
        let mult_mass = assemble_real(FormKind::ScalarMass, mult, mult, free)?;
        let mult_mass_diag = mult_mass.diagonal();
        let mult_stiffness = assemble_real(FormKind::ScalarStiffness, mult, mult, free)?;
        let alpha = T::one() / (tau * tau);
        let maxwell_base = CsrMatrix::linear_combination(&[(alpha, &mass_vec), (T::lit(0.5), &d_form)])?;
        let primal = match method {
            SolverMethod::Direct => PrimalPreconditioner::factor(maxwell_base.clone())?,
            SolverMethod::Iterative => PrimalPreconditioner::jacobi(&maxwell_base),
        };
        let schur = SchurPreconditioner::new(alpha, T::lit(0.5), Some(mult_stiffness), mult_mass)?;
        let maxwell = SchurSolver::new(pairing.clone(), primal, schur)?;
        Ok(Discretization {
            spaces,
            tau,
            mass_psi,
            potential_psi,
            stiffness_phi,
            poisson,
            mass_vec,
            d_form,
            pairing,
            mult_mass_diag,
            maxwell_base,
            maxwell,
            method,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        self.spaces.psi.mesh()
    }

    pub fn method(&self) -> SolverMethod {
        self.method
    }

    /// `K φ = ∫(|Ψ|² + h) N_i`; returns φ and the solve report.
    pub fn solve_poisson(
        &self,
        psi: &ComplexFunction<T>,
        h: Option<&dyn Fn([T; 3]) -> T>,
        tol: f64,
    ) -> Result<(ScalarFunction<T>, SolverReport), StepError> {
        let load = assemble_density_load(psi, &self.spaces.phi, h)?;
        let rhs = self.spaces.phi.restrict(&load);
        let (x, rep) = match &self.poisson {
            PoissonSolver::Direct(s) => s.solve(&rhs, tol)?,
            PoissonSolver::Iterative => {
                crate::sparse::solve_spd(&self.stiffness_phi, &rhs, SolverOptions::iterative(tol))?
            }
        };
        Ok((FeFunction::from_free(self.spaces.phi.clone(), &x)?, rep))
    }

    /// `S(A)` on the free Ψ dofs.
    pub fn magnetic_matrix(&self, a: &VectorFunction<T>) -> Result<CsrMatrix<Complex<T>>, StepError> {
        let psi = &*self.spaces.psi;
        Ok(assemble_form_with(
            FormKind::MagneticSchrodinger(a),
            psi,
            psi,
            DofSet::Free,
            &QuadratureRule::degree6(),
        )?
        .into_complex())
    }

    /// `max_i |(∇·A, q_i)| / ‖q_i‖`
    pub fn divergence_residual(&self, a: &VectorFunction<T>) -> T {
        let ba = self.pairing.mul_vec(&a.free_values());
        ba.iter()
            .zip(&self.mult_mass_diag)
            .fold(T::zero(), |m, (&r, &d)| m.max(r.abs() / d.sqrt()))
    }
}

/// Convergence history of one Picard solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    pub iterations: usize,
    /// Relative L² change of Ψ̄ per iteration.
    pub updates: Vec<f64>,
    pub linear_iterations: usize,
}

impl PicardReport {
    /// Largest ratio of successive updates (0 with fewer than two updates).
    pub fn max_ratio(&self) -> f64 {
        self.updates
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .fold(0.0, f64::max)
    }
}

fn w_norm<T: Real>(w: &CsrMatrix<T>, x: &[Complex<T>]) -> T {
    let re: Vec<T> = x.iter().map(|c| c.re).collect();
    let im: Vec<T> = x.iter().map(|c| c.im).collect();
    let dot = |v: &[T]| -> T { v.iter().zip(w.mul_vec(v)).map(|(&a, b)| a * b).sum() };
    (dot(&re) + dot(&im)).max(T::zero()).sqrt()
}

fn to_f64<T: Real>(v: T) -> f64 {
    v.to_f64_lossy()
}

/// A configured run: discretization, data, current state.
pub struct Simulation<T: Real> {
    cfg: SchemeConfig,
    steps: usize,
    problem: Box<dyn Problem<T>>,
    disc: Discretization<T>,
    state: State<T>,
    psi_factor: Option<DirectSolver<Complex<T>>>,
    initial_report: SolverReport,
}

impl<T: Real> fmt::Debug for Simulation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulation")
            .field("cfg", &self.cfg)
            .field("k", &self.state.k)
            .finish()
    }
}

struct WithPotential<T: Real> {
    inner: Box<dyn Problem<T>>,
    spec: PotentialSpec,
}

impl<T: Real> Problem<T> for WithPotential<T> {
    fn psi0(&self, x: [T; 3]) -> Complex<T> {
        self.inner.psi0(x)
    }
    fn a0(&self, x: [T; 3]) -> [T; 3] {
        self.inner.a0(x)
    }
    fn a0_jacobian(&self, x: [T; 3]) -> [[T; 3]; 3] {
        self.inner.a0_jacobian(x)
    }
    fn a1(&self, x: [T; 3]) -> [T; 3] {
        self.inner.a1(x)
    }
    fn a1_jacobian(&self, x: [T; 3]) -> [[T; 3]; 3] {
        self.inner.a1_jacobian(x)
    }
    fn potential(&self, x: [T; 3]) -> T {
        match self.spec {
            PotentialSpec::Example => self.inner.potential(x),
            PotentialSpec::Zero => T::zero(),
            PotentialSpec::Constant(c) => T::lit(c),
            PotentialSpec::Harmonic => T::lit(0.5) * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]),
        }
    }
    fn has_forcing(&self) -> bool {
        self.inner.has_forcing()
    }
    fn g(&self, x: [T; 3], t: T) -> Complex<T> {
        self.inner.g(x, t)
    }
    fn f(&self, x: [T; 3], t: T) -> [T; 3] {
        self.inner.f(x, t)
    }
    fn h(&self, x: [T; 3], t: T) -> T {
        self.inner.h(x, t)
    }
}

/// Problem data selected by the configuration.
pub fn problem_for<T: Real>(cfg: &SchemeConfig) -> Result<Box<dyn Problem<T>>, StepError> {
    Ok(match cfg.example {
        ExampleKind::Free => Box::new(FreeEvolution::new(cfg.div_fix)),
        ExampleKind::Manufactured => Box::new(ManufacturedSolution::new(cfg.div_fix)),
        ExampleKind::Custom => {
            return Err(StepError::Config(
                "the custom example needs problem data supplied through the library".into(),
            ))
        }
    })
}

impl<T: Real> Simulation<T> {
    pub fn new(cfg: SchemeConfig) -> Result<Self, StepError> {
        let problem = problem_for(&cfg)?;
        Self::with_problem(cfg, problem)
    }

    /// Runs with caller-supplied data; `cfg.potential` still applies.
    pub fn with_problem(cfg: SchemeConfig, problem: Box<dyn Problem<T>>) -> Result<Self, StepError> {
        let steps = cfg.num_steps()?;
        let problem: Box<dyn Problem<T>> = Box::new(WithPotential {
            inner: problem,
            spec: cfg.potential,
        });
        let tau = T::lit(cfg.tau);
        let disc = Discretization::new(cfg.n, cfg.order, tau, &|x| problem.potential(x), cfg.solver)?;
        let (state, initial_report) = initialize(&disc, &cfg, &*problem)?;
        Ok(Simulation {
            cfg,
            steps,
            problem,
            disc,
            state,
            psi_factor: None,
            initial_report,
        })
    }

    /// Zero data everywhere.
    pub fn zero(cfg: SchemeConfig) -> Result<Self, StepError> {
        Self::with_problem(cfg, Box::new(CustomProblem::<T>::zero()))
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn num_steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self) -> &State<T> {
        &self.state
    }

    /// Mutable access for restarts and perturbation studies.
    pub fn state_mut(&mut self) -> &mut State<T> {
        &mut self.state
    }

    pub fn discretization(&self) -> &Discretization<T> {
        &self.disc
    }

    pub fn problem(&self) -> &dyn Problem<T> {
        &*self.problem
    }

    /// Report of the Ritz projections used at initialization.
    pub fn initial_report(&self) -> SolverReport {
        self.initial_report
    }

    /// Diagnostics of the current state.
    pub fn diagnostics(&self, picard_iters: usize) -> Result<DiagnosticsRecord, StepError> {
        Ok(DiagnosticsRecord {
            step: self.state.k,
            time: self.state.k as f64 * self.cfg.tau,
            charge: to_f64(diagnostics::total_charge(&self.state.psi)),
            energy: to_f64(diagnostics::discrete_energy(&self.disc, &self.state)?),
            div_residual: to_f64(self.disc.divergence_residual(&self.state.a)),
            picard_iters,
        })
    }

    fn time(&self, k: f64) -> T {
        T::lit(k * self.cfg.tau)
    }

    /// Advances from `k−1` to `k`.
    pub fn step(&mut self) -> Result<(DiagnosticsRecord, PicardReport), StepError> {
        let k = self.state.k + 1;
        let t_prev = self.time((k - 1) as f64);
        let (a_new, p_new, _) = maxwell_step(&self.disc, &self.state, &*self.problem, t_prev, self.cfg.linear_tol)?;
        let (psi, phi, report) = self.schrodinger_poisson(&a_new, k)?;
        let old_a = std::mem::replace(&mut self.state.a, a_new);
        self.state.a_prev = old_a;
        self.state.psi = psi;
        self.state.phi = phi;
        self.state.p = p_new;
        self.state.k = k;
        self.state.t = self.time(k as f64);
        let rec = self.diagnostics(report.iterations)?;
        Ok((rec, report))
    }

    fn schrodinger_poisson(
        &mut self,
        a_new: &VectorFunction<T>,
        k: usize,
    ) -> Result<(ComplexFunction<T>, ScalarFunction<T>, PicardReport), StepError> {
        let disc = &self.disc;
        let cfg = &self.cfg;
        let tau = disc.tau;
        let half = T::lit(0.5);
        let a_bar = a_new.combine(half, &self.state.a, half);
        let s = disc.magnetic_matrix(&a_bar)?;
        let i = Complex::new(T::zero(), T::one());
        let c = |v: T| Complex::new(v, T::zero());
        let w_c = disc.mass_psi.to_complex();
        let qv_c = disc.potential_psi.to_complex();
        let base = CsrMatrix::linear_combination(&[
            (c(T::one()), &w_c),
            (i * c(tau / T::lit(4.0)), &s),
            (i * c(tau / T::lit(2.0)), &qv_c),
        ])?;
        let psi_prev = self.state.psi.free_values();
        let mut rhs = w_c.mul_vec(&psi_prev);
        let problem = &*self.problem;
        if problem.has_forcing() {
            let t_mid = T::lit((k as f64 - 0.5) * cfg.tau);
            let g = assemble_load(&disc.spaces.psi, |x| problem.g(x, t_mid))?;
            let scale = i * c(tau / T::lit(2.0));
            for (r, gv) in rhs.iter_mut().zip(disc.spaces.psi.restrict(&g)) {
                *r += scale * gv;
            }
        }
        let t_k = T::lit(k as f64 * cfg.tau);
        let h_fn = |x: [T; 3]| problem.h(x, t_k);
        let h_load: Option<&dyn Fn([T; 3]) -> T> = if problem.has_forcing() { Some(&h_fn) } else { None };

        let phi_prev = self.state.phi.clone();
        let mut phi_k = phi_prev.clone();
        let mut psi_bar = psi_prev.clone();
        let mut report = PicardReport {
            iterations: 0,
            updates: Vec::new(),
            linear_iterations: 0,
        };
        let tol = cfg.linear_tol;
        loop {
            report.iterations += 1;
            let m = if cfg.poisson_coupling {
                let phi_bar = phi_k.combine(half, &phi_prev, half);
                let q = assemble_form_with(
                    FormKind::WeightedScalarMass(ScalarWeight::field(&phi_bar)),
                    &disc.spaces.psi,
                    &disc.spaces.psi,
                    DofSet::Free,
                    &QuadratureRule::degree6(),
                )?
                .into_complex();
                CsrMatrix::linear_combination(&[(c(T::one()), &base), (i * c(tau / T::lit(2.0)), &q)])?
            } else {
                base.clone()
            };
            let (x, rep) = solve_psi(&mut self.psi_factor, disc.method(), m, &rhs, &psi_bar, tol)?;
            report.linear_iterations += rep.iterations;
            let diff: Vec<Complex<T>> = x.iter().zip(&psi_bar).map(|(&a, &b)| a - b).collect();
            let denom = w_norm(&disc.mass_psi, &x);
            let update = if denom > T::zero() {
                to_f64(w_norm(&disc.mass_psi, &diff) / denom)
            } else {
                to_f64(w_norm(&disc.mass_psi, &diff))
            };
            psi_bar = x;
            let psi_k_free: Vec<Complex<T>> = psi_bar
                .iter()
                .zip(&psi_prev)
                .map(|(&b, &p)| b.scale(T::lit(2.0)) - p)
                .collect();
            let psi_k = FeFunction::from_free(disc.spaces.psi.clone(), &psi_k_free)?;
            if cfg.poisson_coupling {
                phi_k = disc.solve_poisson(&psi_k, h_load, tol)?.0;
            }
            let prev_update = report.updates.last().copied();
            report.updates.push(update);
            if update <= cfg.picard_tol || !cfg.poisson_coupling {
                return Ok((psi_k, phi_k, report));
            }
            let growing = prev_update.map_or(false, |p| update >= p);
            if growing || report.iterations >= cfg.picard_max_iters || !update.is_finite() {
                return Err(StepError::NonContraction {
                    step: k,
                    tau: cfg.tau,
                    history: report.updates,
                });
            }
        }
    }

    /// Runs all steps. Rows are appended to `conservation.csv` (if an output
    /// directory is configured) as they are produced, so a failure leaves the
    /// partial series on disk.
    pub fn run(&mut self) -> Result<RunSummary, StepError> {
        let mut sink = match &self.cfg.output_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                Some(CsvSink::create(dir.join("conservation.csv"))?)
            }
            None => None,
        };
        let initial = self.diagnostics(0)?;
        self.maybe_vtk()?;
        let mut records = Vec::with_capacity(self.steps);
        let mut picard = Vec::with_capacity(self.steps);
        for _ in 0..self.steps {
            let (rec, rep) = match self.step() {
                Ok(v) => v,
                Err(e) => {
                    if let Some(s) = sink.as_mut() {
                        s.flush()?;
                    }
                    return Err(e);
                }
            };
            if let Some(s) = sink.as_mut() {
                s.write(&rec)?;
            }
            self.maybe_vtk()?;
            records.push(rec);
            picard.push(rep);
        }
        if let Some(s) = sink.as_mut() {
            s.flush()?;
        }
        Ok(RunSummary {
            initial,
            records,
            picard,
        })
    }

    fn maybe_vtk(&self) -> Result<(), StepError> {
        let (Some(dir), every) = (&self.cfg.output_dir, self.cfg.vtk_every) else {
            return Ok(());
        };
        if every == 0 || self.state.k % every != 0 {
            return Ok(());
        }
        let path = dir.join(format!("snapshot_{:05}.vtk", self.state.k));
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        let psi = self.state.psi.vertex_values();
        let fields = vec![
            NodalField::Scalar {
                name: "psi_re".into(),
                values: psi.iter().map(|z| z.re).collect(),
            },
            NodalField::Scalar {
                name: "psi_im".into(),
                values: psi.iter().map(|z| z.im).collect(),
            },
            NodalField::Scalar {
                name: "density".into(),
                values: psi.iter().map(|z| z.norm_sqr()).collect(),
            },
            NodalField::Scalar {
                name: "phi".into(),
                values: self.state.phi.vertex_values(),
            },
            NodalField::Vector {
                name: "A".into(),
                values: self.state.a.vertex_vectors(),
            },
        ];
        write_vtk(self.disc.mesh(), &fields, file)?;
        Ok(())
    }
}

/// Solves the Ψ̄ system, reusing a cached factorization as a GMRES
/// preconditioner while it stays effective.
fn solve_psi<T: Real>(
    cache: &mut Option<DirectSolver<Complex<T>>>,
    method: SolverMethod,
    m: CsrMatrix<Complex<T>>,
    rhs: &[Complex<T>],
    guess: &[Complex<T>],
    tol: f64,
) -> Result<(Vec<Complex<T>>, SolverReport), StepError> {
    if method == SolverMethod::Iterative {
        return Ok(crate::sparse::solve_hermitian(&m, rhs, SolverOptions::iterative(tol))?);
    }
    if let Some(f) = cache {
        if let Ok((x, rep)) = f.solve_nearby(&m, rhs, Some(guess), tol, 20) {
            return Ok((x, rep));
        }
    }
    let solver = DirectSolver::new(m)?;
    let out = solver.solve(rhs, tol)?;
    *cache = Some(solver);
    Ok(out)
}

/// Output of [`Simulation::run`].
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Diagnostics at `k = 0`.
    pub initial: DiagnosticsRecord,
    /// One record per step `k = 1..M`.
    pub records: Vec<DiagnosticsRecord>,
    pub picard: Vec<PicardReport>,
}

/// Level-0 state: interpolated Ψ₀, Ritz-projected `A₀`, `A^{-1} = A^0 − τ π_h A₁`,
/// φ⁰ from the Poisson equation, zero multiplier.
pub fn initialize<T: Real>(
    disc: &Discretization<T>,
    cfg: &SchemeConfig,
    problem: &dyn Problem<T>,
) -> Result<(State<T>, SolverReport), StepError> {
    let sp = &disc.spaces;
    let psi = interpolate_scalar(&sp.psi, |x| problem.psi0(x))?;
    let tol = cfg.linear_tol;
    let ritz = RitzProjector::new(&sp.vector, &sp.mult, disc.method())?;
    let project = |jac: &dyn Fn([T; 3]) -> [[T; 3]; 3]| -> Result<(VectorFunction<T>, SolverReport), StepError> {
        if is_zero_field(sp, jac) {
            return Ok((FeFunction::zeros(sp.vector.clone()), SolverReport::new(0, 0.0, false)));
        }
        Ok(ritz.project(RitzSource::Pointwise(jac), tol)?)
    };
    let (a0, rep0) = project(&|x| problem.a0_jacobian(x))?;
    let (a1, rep1) = project(&|x| problem.a1_jacobian(x))?;
    let a_prev = a0.combine(T::one(), &a1, -disc.tau);
    let phi = if cfg.poisson_coupling {
        let t0 = T::zero();
        let h_fn = |x: [T; 3]| problem.h(x, t0);
        let h: Option<&dyn Fn([T; 3]) -> T> = if problem.has_forcing() { Some(&h_fn) } else { None };
        disc.solve_poisson(&psi, h, tol)?.0
    } else {
        FeFunction::zeros(sp.phi.clone())
    };
    let report = if rep0.residual >= rep1.residual { rep0 } else { rep1 };
    Ok((
        State {
            k: 0,
            t: T::zero(),
            psi,
            a: a0,
            a_prev,
            phi,
            p: FeFunction::zeros(sp.mult.clone()),
        },
        report,
    ))
}

fn is_zero_field<T: Real>(sp: &Spaces<T>, jac: &dyn Fn([T; 3]) -> [[T; 3]; 3]) -> bool {
    (0..sp.vector.num_nodes()).all(|node| {
        jac(sp.vector.node_coordinates(node))
            .iter()
            .flatten()
            .all(|v| *v == T::zero())
    })
}

/// Saddle-point step for `(A^k, p^k)`:
/// `(M/τ² + D/2 + M_w/4) A^k + Bᵀp = M(2A^{k−1} − A^{k−2})/τ² − D A^{k−2}/2
///  − M_w(2A^{k−1} + A^{k−2})/4 − F(Ψ^{k−1}) + f(t^{k−1})`, `B A^k = 0`,
/// with `M_w` the `|Ψ^{k−1}|²`-weighted vector mass and `F` the current load.
pub fn maxwell_step<T: Real>(
    disc: &Discretization<T>,
    state: &State<T>,
    problem: &dyn Problem<T>,
    t_prev: T,
    tol: f64,
) -> Result<(VectorFunction<T>, ScalarFunction<T>, SolverReport), StepError> {
    let sp = &disc.spaces;
    let vec = &*sp.vector;
    let mw = assemble_form_with(
        FormKind::WeightedVectorMass(&state.psi),
        vec,
        vec,
        DofSet::Free,
        &QuadratureRule::degree6(),
    )?
    .into_real()
    .expect("real form");
    let tau = disc.tau;
    let inv_tau2 = T::one() / (tau * tau);
    let (half, quarter) = (T::lit(0.5), T::lit(0.25));
    let a1 = state.a.free_values();
    let a2 = state.a_prev.free_values();
    let two = T::lit(2.0);
    let lin = |s1: T, s2: T| -> Vec<T> { a1.iter().zip(&a2).map(|(&x, &y)| s1 * x + s2 * y).collect() };
    let m_part = disc.mass_vec.mul_vec(&lin(two, -T::one()));
    let d_part = disc.d_form.mul_vec(&a2);
    let w_part = mw.mul_vec(&lin(two, T::one()));
    let current = vec_restrict(vec, &assemble_current(&state.psi, vec)?);
    let mut rhs: Vec<T> = (0..a1.len())
        .map(|i| m_part[i] * inv_tau2 - half * d_part[i] - quarter * w_part[i] - current[i])
        .collect();
    if problem.has_forcing() {
        let f = assemble_vector_load(vec, |x| problem.f(x, t_prev))?;
        for (r, fv) in rhs.iter_mut().zip(vec.restrict(&f)) {
            *r += fv;
        }
    }
    let g = vec![T::zero(); disc.pairing.nrows()];
    let k = CsrMatrix::linear_combination(&[(T::one(), &disc.maxwell_base), (quarter, &mw)])?;
    let (a, p, report) = disc.maxwell.solve(&k, &rhs, &g, tol)?;
    Ok((
        FeFunction::from_free(sp.vector.clone(), &a)?,
        FeFunction::from_free(sp.mult.clone(), &p)?,
        report,
    ))
}

fn vec_restrict<T: Real>(space: &crate::fespace::FeSpace<T>, full: &[T]) -> Vec<T> {
    space.restrict(full)
}

/// `H¹` errors of the final state against the manufactured solution.
pub fn manufactured_errors<T: Real>(sim: &Simulation<T>, exact: &ManufacturedSolution) -> ErrorRecord {
    let st = sim.state();
    let t = st.t;
    let e_psi = diagnostics::h1_error_scalar(&st.psi, |x| exact.psi(x, t), |x| exact.grad_psi(x, t));
    let e_a = diagnostics::h1_error_vector(&st.a, |x| exact.a(x, t), |x| exact.a_jacobian(x, t));
    let e_phi = diagnostics::h1_error_scalar(&st.phi, |x| exact.phi(x, t), |x| exact.grad_phi(x, t));
    let cfg = sim.config();
    ErrorRecord {
        n: cfg.n,
        h: cfg.h(),
        tau: cfg.tau,
        err_psi: e_psi.h1(),
        err_a: e_a.h1(),
        err_phi: e_phi.h1(),
    }
}

/// Manufactured-solution run on each mesh with the coupled time step.
/// `on_row` sees each row as soon as it is computed.
pub fn mms_sweep<T: Real>(
    base: &SchemeConfig,
    meshes: &[usize],
    mut on_row: impl FnMut(&ErrorRecord),
) -> Result<Vec<ErrorRecord>, StepError> {
    let exact = ManufacturedSolution::new(base.div_fix);
    let mut rows = Vec::with_capacity(meshes.len());
    for &n in meshes {
        let cfg = SchemeConfig {
            n,
            tau: coupled_time_step(base.order, n, base.t_final),
            example: ExampleKind::Manufactured,
            ..base.clone()
        };
        let mut sim = Simulation::<T>::new(cfg)?;
        for _ in 0..sim.num_steps() {
            sim.step()?;
        }
        let row = manufactured_errors(&sim, &exact);
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}
