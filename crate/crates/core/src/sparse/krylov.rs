//! Preconditioned Krylov solvers.

use super::{CsrMatrix, SolverReport};
use crate::scalar::{axpy, dot, norm2, Field, Real};
use num_traits::{Float, Zero};

/// Preconditioner application `z = P⁻¹ r`.
pub type Preconditioner<'a, E> = &'a dyn Fn(&[E]) -> Vec<E>;

/// Inverse diagonal; zero diagonal entries are treated as one.
pub fn jacobi<E: Field>(a: &CsrMatrix<E>) -> Vec<E> {
    a.diagonal()
        .into_iter()
        .map(|d| if d.is_zero() { E::one() } else { E::one() / d })
        .collect()
}

fn relative(r: f64, b: f64) -> f64 {
    if b > 0.0 {
        r / b
    } else {
        r
    }
}

/// Preconditioned conjugate gradients for Hermitian positive definite systems.
/// Updates `x` in place; stops when `‖b - Ax‖ ≤ tol ‖b‖`.
pub fn conjugate_gradient<E: Field>(
    a: &CsrMatrix<E>,
    b: &[E],
    x: &mut [E],
    precond: Preconditioner<'_, E>,
    tol: f64,
    max_iter: usize,
) -> SolverReport {
    conjugate_gradient_op(&|v| a.mul_vec(v), b, x, precond, tol, max_iter)
}

/// Preconditioned CG on an operator. Uses the flexible (Polak–Ribière)
/// update so that slightly inexact operators or preconditioners, such as
/// nested inner solves, do not stall convergence.
pub fn conjugate_gradient_op<E: Field>(
    apply: &dyn Fn(&[E]) -> Vec<E>,
    b: &[E],
    x: &mut [E],
    precond: Preconditioner<'_, E>,
    tol: f64,
    max_iter: usize,
) -> SolverReport {
    let bnorm = norm2(b).to_f64_lossy();
    let mut r: Vec<E> = b.iter().zip(apply(x)).map(|(&bi, ai)| bi - ai).collect();
    let mut rel = relative(norm2(&r).to_f64_lossy(), bnorm);
    if rel <= tol {
        return SolverReport::new(0, rel, false);
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap.modulus().is_zero() || !pap.is_finite_value() {
            return SolverReport::new(it, rel, true);
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        let r_old = r.clone();
        axpy(-alpha, &ap, &mut r);
        rel = relative(norm2(&r).to_f64_lossy(), bnorm);
        if rel <= tol {
            break;
        }
        z = precond(&r);
        let diff: Vec<E> = r.iter().zip(&r_old).map(|(&a, &b)| a - b).collect();
        let beta = dot(&z, &diff) / rz;
        rz = dot(&r, &z);
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    SolverReport::new(it, rel, rel > tol)
}

/// Restarted GMRES with right preconditioning. Updates `x` in place.
pub fn gmres<E: Field>(
    apply: &dyn Fn(&[E]) -> Vec<E>,
    b: &[E],
    x: &mut [E],
    precond: Preconditioner<'_, E>,
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> SolverReport {
    let n = b.len();
    let bnorm = norm2(b).to_f64_lossy();
    let mut total = 0;
    let m = restart.max(1);
    loop {
        let ax = apply(x);
        let r: Vec<E> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let beta = norm2(&r);
        let rel = relative(beta.to_f64_lossy(), bnorm);
        if rel <= tol || total >= max_iter {
            return SolverReport::new(total, rel, false);
        }
        let mut v: Vec<Vec<E>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|&ri| ri.scale(beta.recip())).collect());
        let mut h = vec![vec![E::zero(); m]; m + 1];
        let mut cs = vec![E::zero(); m];
        let mut sn = vec![E::zero(); m];
        let mut g = vec![E::zero(); m + 1];
        g[0] = E::from_real(beta);
        let mut k_used = 0;
        let mut breakdown = false;
        for k in 0..m {
            total += 1;
            let z = precond(&v[k]);
            let mut w = apply(&z);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(vi, &w);
                h[i][k] = hik;
                axpy(-hik, vi, &mut w);
            }
            let wn = norm2(&w);
            h[k + 1][k] = E::from_real(wn);
            for i in 0..k {
                let t = cs[i].conj() * h[i][k] + sn[i].conj() * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let (a, bb) = (h[k][k], h[k + 1][k]);
            let denom = (a.modulus_sqr() + bb.modulus_sqr()).sqrt();
            if denom.is_zero() {
                breakdown = true;
                k_used = k;
                break;
            }
            cs[k] = a.scale(denom.recip());
            sn[k] = bb.scale(denom.recip());
            h[k][k] = E::from_real(denom);
            h[k + 1][k] = E::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k].conj() * g[k];
            k_used = k + 1;
            let res = relative(g[k + 1].modulus().to_f64_lossy(), bnorm);
            if res <= tol || wn.is_zero() || total >= max_iter {
                break;
            }
            v.push(w.iter().map(|&wi| wi.scale(wn.recip())).collect());
        }
        // Back substitution for y, then x += P⁻¹ V y.
        let mut y = vec![E::zero(); k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![E::zero(); n];
        for (j, &yj) in y.iter().enumerate() {
            axpy(yj, &v[j], &mut u);
        }
        let du = precond(&u);
        for (xi, di) in x.iter_mut().zip(du) {
            *xi += di;
        }
        if breakdown {
            let ax = apply(x);
            let r: Vec<E> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
            let rel = relative(norm2(&r).to_f64_lossy(), bnorm);
            return SolverReport::new(total, rel, rel > tol);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn cg_solves_laplacian() {
        let a = laplacian_1d(50);
        let b = vec![1.0; 50];
        let mut x = vec![0.0; 50];
        let d = jacobi(&a);
        let pc = |r: &[f64]| r.iter().zip(&d).map(|(a, b)| a * b).collect();
        let rep = conjugate_gradient(&a, &b, &mut x, &pc, 1e-12, 500);
        assert!(rep.residual <= 1e-12, "{rep:?}");
        // exact solution x_i = (i+1)(n-i)/2
        for (i, xi) in x.iter().enumerate() {
            let exact = ((i + 1) * (50 - i)) as f64 / 2.0;
            assert!((xi - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn gmres_solves_complex_nonsymmetric() {
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, Complex64::new(3.0, 1.0)));
            if i + 1 < n {
                t.push((i, i + 1, Complex64::new(-1.0, 0.5)));
                t.push((i + 1, i, Complex64::new(-0.5, 0.0)));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t).unwrap();
        let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let id = |r: &[Complex64]| r.to_vec();
        let rep = gmres(&|v| a.mul_vec(v), &b, &mut x, &id, 1e-12, 10, 1000);
        assert!(rep.residual <= 1e-12, "{rep:?}");
        let ax = a.mul_vec(&x);
        let err: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        assert!(err < 1e-9);
    }
}
