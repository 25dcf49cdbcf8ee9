//! Up-looking sparse `L D U` factorization without pivoting.
//!
//! The pattern of `A + Aᵀ` is used for both triangles, so `U` shares the row
//! indices of `L`. For symmetric input only `L` and `D` are stored.

use super::ordering::{inverse_permutation, Graph};
use super::{CsrMatrix, SolverError};
use crate::scalar::{Field, Real};
use num_traits::{Float, Zero};

#[derive(Debug, Clone)]
pub struct LduFactor<E: Field> {
    n: usize,
    perm: Vec<usize>,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    lower: Vec<E>,
    /// Empty for symmetric factorizations.
    upper: Vec<E>,
    diag: Vec<E>,
}

impl<E: Field> LduFactor<E> {
    /// Factors `P A Pᵀ` where `perm[new] = old`. `symmetric` selects `L D Lᵀ`.
    pub fn new(a: &CsrMatrix<E>, perm: Vec<usize>, symmetric: bool) -> Result<Self, SolverError> {
        let n = a.nrows();
        if a.ncols() != n || perm.len() != n {
            return Err(SolverError::Shape(format!(
                "cannot factor a {}x{} matrix with a permutation of length {}",
                n,
                a.ncols(),
                perm.len()
            )));
        }
        let inv = inverse_permutation(&perm);
        let at = if symmetric { None } else { Some(a.transpose()) };
        // Permuted strictly-lower row k (cols < k) and strictly-upper column k.
        let mut lrow_ptr = vec![0usize; n + 1];
        let mut lrow: Vec<(u32, E)> = Vec::new();
        let mut ucol_ptr = vec![0usize; n + 1];
        let mut ucol: Vec<(u32, E)> = Vec::new();
        let mut diag_a = vec![E::zero(); n];
        let mut scale = vec![E::Real::zero(); n];
        for k in 0..n {
            let old = perm[k];
            let start = lrow.len();
            for (c, v) in a.row(old) {
                let j = inv[c];
                scale[k] = scale[k].max(v.modulus());
                if j < k {
                    lrow.push((j as u32, v));
                } else if j == k {
                    diag_a[k] = v;
                }
            }
            lrow[start..].sort_unstable_by_key(|e| e.0);
            lrow_ptr[k + 1] = lrow.len();
            if let Some(at) = &at {
                let start = ucol.len();
                for (c, v) in at.row(old) {
                    let i = inv[c];
                    if i < k {
                        ucol.push((i as u32, v));
                    }
                }
                ucol[start..].sort_unstable_by_key(|e| e.0);
                ucol_ptr[k + 1] = ucol.len();
            }
        }
        // Symmetrized pattern of row k (cols < k).
        let pattern_of = |k: usize, buf: &mut Vec<usize>| {
            buf.clear();
            buf.extend(lrow[lrow_ptr[k]..lrow_ptr[k + 1]].iter().map(|e| e.0 as usize));
            if !symmetric {
                buf.extend(ucol[ucol_ptr[k]..ucol_ptr[k + 1]].iter().map(|e| e.0 as usize));
            }
        };

        // Elimination tree.
        let mut parent = vec![usize::MAX; n];
        let mut ancestor = vec![usize::MAX; n];
        let mut buf = Vec::new();
        for k in 0..n {
            pattern_of(k, &mut buf);
            for &j in &buf {
                let mut i = j;
                while ancestor[i] != usize::MAX && ancestor[i] != k {
                    let next = ancestor[i];
                    ancestor[i] = k;
                    i = next;
                }
                if ancestor[i] == usize::MAX {
                    ancestor[i] = k;
                    parent[i] = k;
                }
            }
        }
        drop(ancestor);

        // Column counts via row subtrees.
        let mut mark = vec![usize::MAX; n];
        let mut counts = vec![0usize; n];
        let mut reach = Vec::new();
        for k in 0..n {
            pattern_of(k, &mut buf);
            ereach(&buf, k, &parent, &mut mark, &mut reach);
            for &j in &reach {
                counts[j] += 1;
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        let nnz = col_ptr[n];
        let mut rows = vec![0u32; nnz];
        let mut lower = vec![E::zero(); nnz];
        let mut upper = if symmetric { Vec::new() } else { vec![E::zero(); nnz] };
        let mut len = vec![0usize; n];
        let mut diag = vec![E::zero(); n];

        mark.iter_mut().for_each(|m| *m = usize::MAX);
        let mut x = vec![E::zero(); n];
        let mut y = vec![E::zero(); n];
        let tiny = E::Real::lit(E::Real::EPS * 64.0);
        for k in 0..n {
            pattern_of(k, &mut buf);
            ereach(&buf, k, &parent, &mut mark, &mut reach);
            reach.sort_unstable();
            for &(j, v) in &lrow[lrow_ptr[k]..lrow_ptr[k + 1]] {
                y[j as usize] = v;
            }
            if !symmetric {
                for &(i, v) in &ucol[ucol_ptr[k]..ucol_ptr[k + 1]] {
                    x[i as usize] = v;
                }
            }
            let mut dk = diag_a[k];
            if symmetric {
                for &j in &reach {
                    let u = y[j];
                    y[j] = E::zero();
                    let s = col_ptr[j];
                    for p in s..s + len[j] {
                        y[rows[p] as usize] -= lower[p] * u;
                    }
                    let l = u / diag[j];
                    dk -= l * u;
                    rows[s + len[j]] = k as u32;
                    lower[s + len[j]] = l;
                    len[j] += 1;
                }
            } else {
                for &j in &reach {
                    let u = x[j];
                    let w = y[j];
                    x[j] = E::zero();
                    y[j] = E::zero();
                    let l = w / diag[j];
                    let s = col_ptr[j];
                    for p in s..s + len[j] {
                        let i = rows[p] as usize;
                        x[i] -= lower[p] * u;
                        y[i] -= l * upper[p];
                    }
                    dk -= l * u;
                    rows[s + len[j]] = k as u32;
                    lower[s + len[j]] = l;
                    upper[s + len[j]] = u;
                    len[j] += 1;
                }
            }
            let ref_scale = scale[k].max(diag_a[k].modulus());
            if !dk.is_finite_value() || dk.modulus() <= tiny * ref_scale || ref_scale.is_zero() {
                return Err(SolverError::ZeroPivot { index: perm[k] });
            }
            diag[k] = dk;
        }
        Ok(LduFactor {
            n,
            perm,
            col_ptr,
            rows,
            lower,
            upper,
            diag,
        })
    }

    /// Orders by nested dissection and factors.
    pub fn with_nested_dissection(a: &CsrMatrix<E>, symmetric: bool) -> Result<Self, SolverError> {
        let perm = super::ordering::nested_dissection(&Graph::from_matrix(a));
        Self::new(a, perm, symmetric)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored off-diagonal entries of `L`.
    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.upper.len() != self.lower.len() || self.lower.is_empty()
    }

    /// Number of negative pivots (real part), the inertia count for
    /// symmetric indefinite systems.
    pub fn negative_pivots(&self) -> usize {
        self.diag.iter().filter(|d| d.re() < E::Real::zero()).count()
    }

    pub fn solve(&self, b: &[E]) -> Vec<E> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [E]) {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut z: Vec<E> = self.perm.iter().map(|&old| b[old]).collect();
        for j in 0..self.n {
            let zj = z[j];
            if zj.is_zero() {
                continue;
            }
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                z[self.rows[p] as usize] -= self.lower[p] * zj;
            }
        }
        let symmetric = self.upper.is_empty();
        for j in (0..self.n).rev() {
            let range = self.col_ptr[j]..self.col_ptr[j + 1];
            if symmetric {
                let mut s = z[j] / self.diag[j];
                for p in range {
                    s -= self.lower[p] * z[self.rows[p] as usize];
                }
                z[j] = s;
            } else {
                let mut s = z[j];
                for p in range {
                    s -= self.upper[p] * z[self.rows[p] as usize];
                }
                z[j] = s / self.diag[j];
            }
        }
        for (new, v) in z.into_iter().enumerate() {
            b[self.perm[new]] = v;
        }
    }
}

/// Nonzero pattern of row `k` of `L`: union of etree paths from the entries of
/// `A`'s row `k` up to `k`. Unsorted.
fn ereach(pattern: &[usize], k: usize, parent: &[usize], mark: &mut [usize], out: &mut Vec<usize>) {
    out.clear();
    mark[k] = k;
    for &j in pattern {
        let mut i = j;
        while mark[i] != k {
            mark[i] = k;
            out.push(i);
            i = parent[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, density: f64, seed: u64, symmetric: bool) -> CsrMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::new();
        for i in 0..n {
            let mut rowsum = 0.0;
            for j in 0..n {
                if i != j && rng.gen::<f64>() < density {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    rowsum += v.abs() * 2.0;
                    t.push((i, j, v));
                    if symmetric {
                        t.push((j, i, v));
                    }
                }
            }
            t.push((i, i, rowsum + 1.0 + n as f64 * density * 2.0));
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    fn residual<E: Field>(a: &CsrMatrix<E>, x: &[E], b: &[E]) -> f64 {
        let ax = a.mul_vec(x);
        ax.iter()
            .zip(b)
            .map(|(p, q)| (*p - *q).modulus().to_f64_lossy())
            .fold(0.0, f64::max)
    }

    #[test]
    fn dense_small_symmetric() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 4.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
                (1, 1, 3.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
        )
        .unwrap();
        let f = LduFactor::new(&a, vec![2, 0, 1], true).unwrap();
        let b = [1.0, 2.0, 3.0];
        assert!(residual(&a, &f.solve(&b), &b) < 1e-14);
    }

    #[test]
    fn indefinite_needs_no_pivoting_with_good_order() {
        // [[1, 1], [1, 0]]: fine when the zero diagonal is last.
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let f = LduFactor::new(&a, vec![0, 1], true).unwrap();
        assert_eq!(f.negative_pivots(), 1);
        assert!(matches!(
            LduFactor::new(&a, vec![1, 0], true),
            Err(SolverError::ZeroPivot { index: 1 })
        ));
    }

    #[test]
    fn complex_nonsymmetric() {
        let a = CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, Complex64::new(2.0, 1.0)),
                (0, 2, Complex64::new(0.0, 1.0)),
                (1, 1, Complex64::new(1.0, -3.0)),
                (2, 0, Complex64::new(0.5, 0.0)),
                (2, 1, Complex64::new(1.0, 1.0)),
                (2, 2, Complex64::new(3.0, 0.0)),
            ],
        )
        .unwrap();
        let f = LduFactor::with_nested_dissection(&a, false).unwrap();
        let b = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(-1.0, 1.0),
        ];
        assert!(residual(&a, &f.solve(&b), &b) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn random_systems_are_solved(n in 5usize..120, seed in 0u64..1000, sym in any::<bool>()) {
            let a = random_sparse(n, 0.08, seed, sym);
            let f = LduFactor::with_nested_dissection(&a, sym).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prop_assert!(residual(&a, &f.solve(&b), &b) < 1e-11);
        }
    }
}
