//! Saddle-point systems `[[K, Bᵀ], [B, 0]]` with SPD `K`, solved by CG on the
//! multiplier Schur complement `S = B K⁻¹ Bᵀ`.
//!
//! `K` solves run PCG preconditioned by a fixed approximation of `K` (a
//! factorization of a nearby matrix, or its diagonal), so the same object
//! serves a sequence of slowly varying primal blocks. The Schur complement
//! is preconditioned by `α L_p⁻¹ + ν M_p⁻¹` for `K ≈ α M + ν L`.

use super::krylov::{conjugate_gradient, conjugate_gradient_op, jacobi};
use super::{CsrMatrix, DirectSolver, SolverError, SolverReport, Symmetry};
use crate::scalar::{norm2, Real};

/// Approximate inverse of the primal block.
#[derive(Debug, Clone)]
pub enum PrimalPreconditioner<T: Real> {
    Factor(DirectSolver<T>),
    Jacobi(Vec<T>),
}

impl<T: Real> PrimalPreconditioner<T> {
    /// Factors `k` (flagged symmetric).
    pub fn factor(k: CsrMatrix<T>) -> Result<Self, SolverError> {
        let k = if k.symmetry() == Symmetry::General {
            k.with_symmetry(Symmetry::Symmetric)?
        } else {
            k
        };
        Ok(PrimalPreconditioner::Factor(DirectSolver::new(k)?))
    }

    pub fn jacobi(k: &CsrMatrix<T>) -> Self {
        PrimalPreconditioner::Jacobi(jacobi(k))
    }

    fn apply(&self, r: &[T]) -> Vec<T> {
        match self {
            PrimalPreconditioner::Factor(f) => f.factor().solve(r),
            PrimalPreconditioner::Jacobi(d) => r.iter().zip(d).map(|(&a, &b)| a * b).collect(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            PrimalPreconditioner::Factor(f) => f.matrix().nrows(),
            PrimalPreconditioner::Jacobi(d) => d.len(),
        }
    }
}

/// `z = α L_p⁻¹ r + ν M_p⁻¹ r`.
#[derive(Debug, Clone)]
pub struct SchurPreconditioner<T: Real> {
    alpha: T,
    nu: T,
    laplacian: Option<DirectSolver<T>>,
    mass: DirectSolver<T>,
}

impl<T: Real> SchurPreconditioner<T> {
    /// `laplacian` may be omitted when `alpha = 0`.
    pub fn new(alpha: T, nu: T, laplacian: Option<CsrMatrix<T>>, mass: CsrMatrix<T>) -> Result<Self, SolverError> {
        if !alpha.is_zero() && laplacian.is_none() {
            return Err(SolverError::Shape(
                "Schur preconditioner needs a Laplacian when alpha ≠ 0".into(),
            ));
        }
        let laplacian = match laplacian {
            Some(l) if !alpha.is_zero() => Some(DirectSolver::new(l)?),
            _ => None,
        };
        Ok(SchurPreconditioner {
            alpha,
            nu,
            laplacian,
            mass: DirectSolver::new(mass)?,
        })
    }

    fn apply(&self, r: &[T]) -> Vec<T> {
        let mut z: Vec<T> = self.mass.factor().solve(r).into_iter().map(|v| v * self.nu).collect();
        if let Some(l) = &self.laplacian {
            for (zi, li) in z.iter_mut().zip(l.factor().solve(r)) {
                *zi += self.alpha * li;
            }
        }
        z
    }
}

#[derive(Debug, Clone)]
pub struct SchurSolver<T: Real> {
    b: CsrMatrix<T>,
    bt: CsrMatrix<T>,
    primal: PrimalPreconditioner<T>,
    schur: SchurPreconditioner<T>,
    max_iter: usize,
}

/// Ratio between the outer tolerance and the inner `K` solves.
const INNER_FACTOR: f64 = 1e-3;
const INNER_FLOOR: f64 = 1e-15;

impl<T: Real> SchurSolver<T> {
    pub fn new(
        b: CsrMatrix<T>,
        primal: PrimalPreconditioner<T>,
        schur: SchurPreconditioner<T>,
    ) -> Result<Self, SolverError> {
        if b.ncols() != primal.dim() {
            return Err(SolverError::Shape(format!(
                "constraint has {} columns, primal block has {} rows",
                b.ncols(),
                primal.dim()
            )));
        }
        for q in 0..b.nrows() {
            if b.row(q).all(|(_, v)| v.is_zero()) {
                return Err(SolverError::InfSupFailure(format!(
                    "multiplier {q} has an empty constraint row"
                )));
            }
        }
        let bt = b.transpose();
        Ok(SchurSolver {
            b,
            bt,
            primal,
            schur,
            max_iter: 2000,
        })
    }

    pub fn num_primal(&self) -> usize {
        self.b.ncols()
    }

    pub fn num_multipliers(&self) -> usize {
        self.b.nrows()
    }

    pub fn constraint(&self) -> &CsrMatrix<T> {
        &self.b
    }

    fn solve_primal(&self, k: &CsrMatrix<T>, r: &[T], tol: f64) -> Result<Vec<T>, SolverError> {
        let mut x = self.primal.apply(r);
        let pc = |v: &[T]| self.primal.apply(v);
        let rep = conjugate_gradient(k, r, &mut x, &pc, tol, self.max_iter);
        if rep.breakdown {
            return Err(SolverError::NotConverged { report: rep });
        }
        Ok(x)
    }

    /// Solves `K u + Bᵀ p = f`, `B u = g` for the primal block `k`; the
    /// reported residual is that of the full system.
    pub fn solve(
        &self,
        k: &CsrMatrix<T>,
        f: &[T],
        g: &[T],
        tol: f64,
    ) -> Result<(Vec<T>, Vec<T>, SolverReport), SolverError> {
        let (n, m) = (self.num_primal(), self.num_multipliers());
        if k.nrows() != n || k.ncols() != n || f.len() != n || g.len() != m {
            return Err(SolverError::Shape("Schur solve dimensions".into()));
        }
        let inner = (tol * INNER_FACTOR).max(INNER_FLOOR);
        let failure = std::cell::RefCell::new(None);
        let k_inv = |r: &[T]| -> Vec<T> {
            match self.solve_primal(k, r, inner) {
                Ok(x) => x,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    vec![T::zero(); r.len()]
                }
            }
        };
        let u0 = k_inv(f);
        // S p = B K⁻¹ f − g
        let rhs: Vec<T> = self.b.mul_vec(&u0).iter().zip(g).map(|(&a, &b)| a - b).collect();
        let mut p = vec![T::zero(); m];
        let apply_s = |q: &[T]| self.b.mul_vec(&k_inv(&self.bt.mul_vec(q)));
        let pc = |r: &[T]| self.schur.apply(r);
        let outer = conjugate_gradient_op(&apply_s, &rhs, &mut p, &pc, tol * 0.1, self.max_iter);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let bp = self.bt.mul_vec(&p);
        let r: Vec<T> = f.iter().zip(&bp).map(|(&a, &b)| a - b).collect();
        let u = k_inv(&r);
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        let rel = self.residual(k, &u, &p, f, g);
        let report = SolverReport::new(outer.iterations, rel, !(rel <= tol));
        if report.breakdown {
            return Err(SolverError::NotConverged { report });
        }
        Ok((u, p, report))
    }

    /// `‖[f − K u − Bᵀp; g − B u]‖ / ‖[f; g]‖`
    pub fn residual(&self, k: &CsrMatrix<T>, u: &[T], p: &[T], f: &[T], g: &[T]) -> f64 {
        let ku = k.mul_vec(u);
        let btp = self.bt.mul_vec(p);
        let bu = self.b.mul_vec(u);
        let r1: Vec<T> = (0..u.len()).map(|i| f[i] - ku[i] - btp[i]).collect();
        let r2: Vec<T> = (0..p.len()).map(|i| g[i] - bu[i]).collect();
        let num = (norm2(&r1).powi(2) + norm2(&r2).powi(2)).sqrt();
        let den = (norm2(f).powi(2) + norm2(g).powi(2)).sqrt();
        let num = num.to_f64_lossy();
        let den = den.to_f64_lossy();
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SaddleSolver;
    use crate::sparse::SolverMethod;

    fn laplacian_1d(n: usize, shift: f64) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
            .unwrap()
            .with_symmetry(Symmetry::Symmetric)
            .unwrap()
    }

    fn difference_constraint(m: usize, n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for q in 0..m {
            t.push((q, 2 * q, 1.0));
            t.push((q, 2 * q + 1, -1.0));
        }
        CsrMatrix::from_triplets(m, n, &t).unwrap()
    }

    #[test]
    fn agrees_with_monolithic_factorization() {
        let (n, m) = (20, 8);
        let k = laplacian_1d(n, 0.5);
        let b = difference_constraint(m, n);
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let g: Vec<f64> = (0..m).map(|i| 0.1 * i as f64).collect();
        let mass = CsrMatrix::identity(m).with_symmetry(Symmetry::Symmetric).unwrap();
        let schur = SchurSolver::new(
            b.clone(),
            PrimalPreconditioner::factor(k.clone()).unwrap(),
            SchurPreconditioner::new(0.0, 1.0, None, mass).unwrap(),
        )
        .unwrap();
        let (u, p, rep) = schur.solve(&k, &f, &g, 1e-12).unwrap();
        assert!(rep.residual <= 1e-12);
        let (u2, p2, _) = SaddleSolver::new(&k, &b, SolverMethod::Direct)
            .unwrap()
            .solve(&f, &g, 1e-13)
            .unwrap();
        for (a, b) in u.iter().zip(&u2).chain(p.iter().zip(&p2)) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn perturbed_primal_block_uses_old_factor() {
        let (n, m) = (30, 10);
        let k0 = laplacian_1d(n, 1.0);
        let k1 = laplacian_1d(n, 1.3);
        let b = difference_constraint(m, n);
        let mass = CsrMatrix::identity(m).with_symmetry(Symmetry::Symmetric).unwrap();
        let schur = SchurSolver::new(
            b.clone(),
            PrimalPreconditioner::factor(k0).unwrap(),
            SchurPreconditioner::new(0.0, 1.0, None, mass).unwrap(),
        )
        .unwrap();
        let f = vec![1.0; n];
        let g = vec![0.0; m];
        let (u, p, rep) = schur.solve(&k1, &f, &g, 1e-12).unwrap();
        assert!(schur.residual(&k1, &u, &p, &f, &g) <= 1e-12);
        assert!(!rep.breakdown);
        assert!(b.mul_vec(&u).iter().all(|v| v.abs() < 1e-11));
    }

    #[test]
    fn empty_constraint_row_is_an_inf_sup_failure() {
        let k = laplacian_1d(4, 0.0);
        let b = CsrMatrix::from_triplets(2, 4, &[(0, 0, 1.0)]).unwrap();
        let mass = CsrMatrix::identity(2).with_symmetry(Symmetry::Symmetric).unwrap();
        let err = SchurSolver::new(
            b,
            PrimalPreconditioner::jacobi(&k),
            SchurPreconditioner::new(0.0, 1.0, None, mass).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::InfSupFailure(_)));
    }
}
