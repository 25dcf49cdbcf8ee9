//! Sparse matrices, direct and Krylov solvers, and the monolithic
//! saddle-point solve.

mod csr;
mod factor;
pub mod krylov;
pub mod ordering;
mod schur;

pub use csr::{CsrMatrix, Symmetry};
pub use factor::LduFactor;
pub use schur::{PrimalPreconditioner, SchurPreconditioner, SchurSolver};

use crate::scalar::{norm2, Field, Real};
use ordering::{nested_dissection, postpone_multipliers, Graph};
use thiserror::Error;

/// Alias used by the rest of the crate.
pub type SparseMatrix<E> = CsrMatrix<E>;

/// Direct-solve refinement target.
pub const DIRECT_TOL: f64 = 1e-12;
/// Default iterative tolerance.
pub const ITERATIVE_TOL: f64 = 1e-10;

const MAX_REFINEMENT: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not symmetric (deviation {deviation:e})")]
    NotSymmetric { deviation: f64 },
    #[error("zero pivot at unknown {index}")]
    ZeroPivot { index: usize },
    #[error("solver did not converge: residual {:e} after {} iterations", .report.residual, .report.iterations)]
    NotConverged { report: SolverReport },
    #[error("inf-sup failure: {0}")]
    InfSupFailure(String),
}

/// Outcome of a linear solve. `residual` is `‖b − Mx‖₂/‖b‖₂` (or `‖b − Mx‖₂`
/// when `b = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub residual: f64,
    pub breakdown: bool,
}

impl SolverReport {
    pub fn new(iterations: usize, residual: f64, breakdown: bool) -> Self {
        SolverReport {
            iterations,
            residual,
            breakdown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMethod {
    /// Fill-reducing sparse factorization with iterative refinement.
    #[default]
    Direct,
    /// Jacobi-preconditioned CG (SPD) or GMRES (other systems).
    Iterative,
}

impl std::fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverMethod::Direct => "direct",
            SolverMethod::Iterative => "iterative",
        })
    }
}

impl std::str::FromStr for SolverMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "direct" => Ok(SolverMethod::Direct),
            "iterative" => Ok(SolverMethod::Iterative),
            other => Err(format!("unknown solver '{other}' (expected direct or iterative)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: SolverMethod::Direct,
            tol: DIRECT_TOL,
            max_iter: 5000,
        }
    }
}

impl SolverOptions {
    pub fn direct(tol: f64) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn iterative(tol: f64) -> Self {
        SolverOptions {
            method: SolverMethod::Iterative,
            tol,
            max_iter: 5000,
        }
    }
}

/// Relative residual `‖b − Mx‖₂/‖b‖₂`.
pub fn relative_residual<E: Field>(m: &CsrMatrix<E>, x: &[E], b: &[E]) -> f64 {
    let r: Vec<E> = b.iter().zip(m.mul_vec(x)).map(|(&bi, ai)| bi - ai).collect();
    let rn = norm2(&r).to_f64_lossy();
    let bn = norm2(b).to_f64_lossy();
    if bn > 0.0 {
        rn / bn
    } else {
        rn
    }
}

fn check_square<E: Field>(m: &CsrMatrix<E>, b: &[E]) -> Result<(), SolverError> {
    if m.nrows() != m.ncols() || b.len() != m.nrows() {
        return Err(SolverError::Shape(format!(
            "{}x{} matrix with right-hand side of length {}",
            m.nrows(),
            m.ncols(),
            b.len()
        )));
    }
    Ok(())
}

/// A factored matrix that solves with iterative refinement and can serve as a
/// preconditioner for nearby matrices.
#[derive(Debug, Clone)]
pub struct DirectSolver<E: Field> {
    matrix: CsrMatrix<E>,
    factor: LduFactor<E>,
}

impl<E: Field> DirectSolver<E> {
    /// Uses `L D Lᵀ` when the matrix is flagged symmetric, `L D U` otherwise.
    pub fn new(matrix: CsrMatrix<E>) -> Result<Self, SolverError> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SolverError::Shape("factorization of a non-square matrix".into()));
        }
        let symmetric =
            matrix.symmetry() == Symmetry::Symmetric || (!E::IS_COMPLEX && matrix.symmetry() == Symmetry::Hermitian);
        let perm = nested_dissection(&Graph::from_matrix(&matrix));
        let factor = LduFactor::new(&matrix, perm, symmetric)?;
        Ok(DirectSolver { matrix, factor })
    }

    fn with_factor(matrix: CsrMatrix<E>, factor: LduFactor<E>) -> Self {
        DirectSolver { matrix, factor }
    }

    pub fn matrix(&self) -> &CsrMatrix<E> {
        &self.matrix
    }

    pub fn factor(&self) -> &LduFactor<E> {
        &self.factor
    }

    /// Solves `M x = b` to relative residual `tol`.
    pub fn solve(&self, b: &[E], tol: f64) -> Result<(Vec<E>, SolverReport), SolverError> {
        check_square(&self.matrix, b)?;
        if b.iter().all(|v| v.is_zero()) {
            return Ok((b.to_vec(), SolverReport::new(0, 0.0, false)));
        }
        let mut x = self.factor.solve(b);
        let mut rel = relative_residual(&self.matrix, &x, b);
        let mut it = 0;
        while rel > tol && it < MAX_REFINEMENT && rel.is_finite() {
            it += 1;
            let r: Vec<E> = b.iter().zip(self.matrix.mul_vec(&x)).map(|(&bi, ai)| bi - ai).collect();
            let dx = self.factor.solve(&r);
            let trial: Vec<E> = x.iter().zip(&dx).map(|(&a, &d)| a + d).collect();
            let trial_rel = relative_residual(&self.matrix, &trial, b);
            if !(trial_rel < rel) {
                break;
            }
            x = trial;
            rel = trial_rel;
        }
        if rel > tol {
            let pc = |r: &[E]| self.factor.solve(r);
            let rep = krylov::gmres(&|v| self.matrix.mul_vec(v), b, &mut x, &pc, tol, 30, 300);
            it += rep.iterations;
            rel = relative_residual(&self.matrix, &x, b);
        }
        let report = SolverReport::new(it, rel, rel > tol || !rel.is_finite());
        if report.breakdown {
            return Err(SolverError::NotConverged { report });
        }
        Ok((x, report))
    }

    /// Solves a different matrix `m` by GMRES preconditioned with this
    /// factorization, starting from `x0`.
    pub fn solve_nearby(
        &self,
        m: &CsrMatrix<E>,
        b: &[E],
        x0: Option<&[E]>,
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<E>, SolverReport), SolverError> {
        check_square(m, b)?;
        if m.nrows() != self.matrix.nrows() {
            return Err(SolverError::Shape("preconditioner dimension mismatch".into()));
        }
        let mut x = match x0 {
            Some(x0) => x0.to_vec(),
            None => self.factor.solve(b),
        };
        let pc = |r: &[E]| self.factor.solve(r);
        let rep = krylov::gmres(&|v| m.mul_vec(v), b, &mut x, &pc, tol, 30, max_iter);
        let rel = relative_residual(m, &x, b);
        let report = SolverReport::new(rep.iterations, rel, rel > tol || !rel.is_finite());
        if report.breakdown {
            return Err(SolverError::NotConverged { report });
        }
        Ok((x, report))
    }
}

/// Solves a real symmetric positive definite system.
pub fn solve_spd<T: Real>(
    m: &CsrMatrix<T>,
    b: &[T],
    opts: SolverOptions,
) -> Result<(Vec<T>, SolverReport), SolverError> {
    check_square(m, b)?;
    if m.symmetry() == Symmetry::General {
        m.clone().with_symmetry(Symmetry::Symmetric)?;
    }
    match opts.method {
        SolverMethod::Direct => {
            let mut sym = m.clone();
            if sym.symmetry() == Symmetry::General {
                sym = sym.assume_symmetry(Symmetry::Symmetric);
            }
            DirectSolver::new(sym)?.solve(b, opts.tol)
        }
        SolverMethod::Iterative => {
            let d = krylov::jacobi(m);
            let pc = |r: &[T]| r.iter().zip(&d).map(|(&a, &b)| a * b).collect();
            let mut x = vec![T::zero(); b.len()];
            let rep = krylov::conjugate_gradient(m, b, &mut x, &pc, opts.tol, opts.max_iter);
            finish_iterative(m, x, b, rep, opts.tol)
        }
    }
}

/// Solves a general (complex shifted) system, e.g. `W + i(τ/4)S + i(τ/2)Q`.
pub fn solve_hermitian<E: Field>(
    m: &CsrMatrix<E>,
    b: &[E],
    opts: SolverOptions,
) -> Result<(Vec<E>, SolverReport), SolverError> {
    check_square(m, b)?;
    match opts.method {
        SolverMethod::Direct => DirectSolver::new(m.clone())?.solve(b, opts.tol),
        SolverMethod::Iterative => {
            let d = krylov::jacobi(m);
            let pc = |r: &[E]| r.iter().zip(&d).map(|(&a, &b)| a * b).collect();
            let mut x = vec![E::zero(); b.len()];
            let rep = krylov::gmres(&|v| m.mul_vec(v), b, &mut x, &pc, opts.tol, 50, opts.max_iter);
            finish_iterative(m, x, b, rep, opts.tol)
        }
    }
}

fn finish_iterative<E: Field>(
    m: &CsrMatrix<E>,
    x: Vec<E>,
    b: &[E],
    rep: SolverReport,
    tol: f64,
) -> Result<(Vec<E>, SolverReport), SolverError> {
    let rel = relative_residual(m, &x, b);
    let report = SolverReport::new(rep.iterations, rel, rep.breakdown || rel > tol || !rel.is_finite());
    if report.breakdown {
        Err(SolverError::NotConverged { report })
    } else {
        Ok((x, report))
    }
}

/// The symmetric indefinite system `[[K, Bᵀ], [B, 0]]`, factored once.
#[derive(Debug, Clone)]
pub struct SaddleSolver<T: Real> {
    n_primal: usize,
    n_mult: usize,
    inner: SaddleInner<T>,
}

#[derive(Debug, Clone)]
enum SaddleInner<T: Real> {
    Direct(DirectSolver<T>),
    Iterative { matrix: CsrMatrix<T>, max_iter: usize },
}

impl<T: Real> SaddleSolver<T> {
    pub fn new(k: &CsrMatrix<T>, b: &CsrMatrix<T>, method: SolverMethod) -> Result<Self, SolverError> {
        let (n, m) = (k.nrows(), b.nrows());
        if k.ncols() != n || b.ncols() != n {
            return Err(SolverError::Shape(format!(
                "saddle blocks K {}x{} and B {}x{}",
                k.nrows(),
                k.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        for q in 0..m {
            if b.row(q).all(|(_, v)| v.is_zero()) {
                return Err(SolverError::InfSupFailure(format!(
                    "multiplier {q} has an empty constraint row"
                )));
            }
        }
        let mut t = Vec::with_capacity(k.nnz() + 2 * b.nnz());
        for r in 0..n {
            t.extend(k.row(r).map(|(c, v)| (r, c, v)));
        }
        for q in 0..m {
            for (c, v) in b.row(q) {
                t.push((n + q, c, v));
                t.push((c, n + q, v));
            }
        }
        let full = CsrMatrix::from_triplets(n + m, n + m, &t)?.assume_symmetry(Symmetry::Symmetric);
        let inner = match method {
            SolverMethod::Direct => {
                let g = Graph::from_matrix(&full);
                let mult: Vec<bool> = (0..n + m).map(|i| i >= n).collect();
                let perm = postpone_multipliers(&g, &nested_dissection(&g), &mult)
                    .ok_or_else(|| SolverError::InfSupFailure("multiplier without primal coupling".into()))?;
                let factor = LduFactor::new(&full, perm, true).map_err(|e| match e {
                    SolverError::ZeroPivot { index } => SolverError::InfSupFailure(format!(
                        "zero pivot at {} {}",
                        if index >= n { "multiplier" } else { "primal unknown" },
                        if index >= n { index - n } else { index }
                    )),
                    other => other,
                })?;
                SaddleInner::Direct(DirectSolver::with_factor(full, factor))
            }
            SolverMethod::Iterative => SaddleInner::Iterative {
                matrix: full,
                max_iter: 20000,
            },
        };
        Ok(SaddleSolver {
            n_primal: n,
            n_mult: m,
            inner,
        })
    }

    pub fn num_primal(&self) -> usize {
        self.n_primal
    }

    pub fn num_multipliers(&self) -> usize {
        self.n_mult
    }

    /// Solves `K u + Bᵀ p = f`, `B u = g`.
    pub fn solve(&self, f: &[T], g: &[T], tol: f64) -> Result<(Vec<T>, Vec<T>, SolverReport), SolverError> {
        if f.len() != self.n_primal || g.len() != self.n_mult {
            return Err(SolverError::Shape("saddle right-hand side lengths".into()));
        }
        let rhs: Vec<T> = f.iter().chain(g).copied().collect();
        let (x, report) = match &self.inner {
            SaddleInner::Direct(d) => d.solve(&rhs, tol)?,
            SaddleInner::Iterative { matrix, max_iter } => {
                let d = krylov::jacobi(matrix);
                let pc = |r: &[T]| r.iter().zip(&d).map(|(&a, &b)| a * b.abs()).collect();
                let mut x = vec![T::zero(); rhs.len()];
                let rep = krylov::gmres(&|v| matrix.mul_vec(v), &rhs, &mut x, &pc, tol, 100, *max_iter);
                finish_iterative(matrix, x, &rhs, rep, tol)?
            }
        };
        let (u, p) = x.split_at(self.n_primal);
        Ok((u.to_vec(), p.to_vec(), report))
    }
}

/// One-shot saddle solve.
pub fn solve_saddle<T: Real>(
    k: &CsrMatrix<T>,
    b: &CsrMatrix<T>,
    f: &[T],
    g: &[T],
    opts: SolverOptions,
) -> Result<(Vec<T>, Vec<T>, SolverReport), SolverError> {
    SaddleSolver::new(k, b, opts.method)?.solve(f, g, opts.tol)
}

/// Smallest eigenvalue of a symmetric positive definite matrix by inverse
/// power iteration with a Rayleigh quotient.
pub fn smallest_eigenvalue<T: Real>(m: &CsrMatrix<T>, iterations: usize) -> Result<T, SolverError> {
    let solver = DirectSolver::new(m.clone().assume_symmetry(Symmetry::Symmetric))?;
    let n = m.nrows();
    let mut x: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(((i * 7919) % 97) as f64 / 97.0))
        .collect();
    let mut lambda = T::zero();
    for _ in 0..iterations {
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let y = solver.factor().solve(&x);
        let ny = norm2(&y);
        x = y.into_iter().map(|v| v / ny).collect();
        let mx = m.mul_vec(&x);
        lambda = x.iter().zip(&mx).map(|(&a, &b)| a * b).sum();
    }
    Ok(lambda)
}
