use super::SolverError;
use crate::scalar::{Field, Real};
use num_complex::Complex;
use num_traits::{Float, One, Zero};
use std::io::{self, Write};

/// Structural/value symmetry recorded on a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    /// `M = Mᵀ`
    Symmetric,
    /// `M = Mᴴ`
    Hermitian,
}

/// Compressed sparse row matrix. Column indices are sorted and unique within
/// each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<E> {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<E>,
    symmetry: Symmetry,
}

impl<E: Field> CsrMatrix<E> {
    /// Consolidates `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, E)]) -> Result<Self, SolverError> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(SolverError::Shape(format!(
                    "entry ({r}, {c}) outside a {nrows}x{ncols} matrix"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![E::zero(); triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            order.clear();
            order.extend(counts[r]..counts[r + 1]);
            order.sort_by_key(|&p| cols[p]);
            for &p in &order {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == cols[p] {
                    *values.last_mut().unwrap() += vals[p];
                } else {
                    col_idx.push(cols[p]);
                    values.push(vals[p]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetry: Symmetry::General,
        })
    }

    /// Zero matrix with a given (sorted, unique) pattern.
    pub fn from_pattern(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        debug_assert_eq!(row_ptr.len(), nrows + 1);
        let nnz = col_idx.len();
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values: vec![E::zero(); nnz],
            symmetry: Symmetry::General,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![E::one(); n],
            symmetry: Symmetry::Symmetric,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[E] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [E] {
        &mut self.values
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// `(column, value)` pairs of one row.
    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, E)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    #[inline]
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .binary_search(&c)
            .ok()
            .map(|p| p + range.start)
    }

    pub fn get(&self, r: usize, c: usize) -> E {
        self.position(r, c).map(|p| self.values[p]).unwrap_or_else(E::zero)
    }

    /// Adds to an entry that must already be in the pattern.
    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: E) {
        let p = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) is not in the sparsity pattern"));
        self.values[p] += v;
    }

    /// Declares a symmetry and verifies it: the largest deviation must not
    /// exceed `max(1e-12, 100 ε) · max(1, ‖M‖_max)`.
    pub fn with_symmetry(mut self, symmetry: Symmetry) -> Result<Self, SolverError> {
        if symmetry != Symmetry::General {
            let dev = self.symmetry_deviation(symmetry)?;
            let scale = self.max_abs().max(E::Real::one());
            let rel = E::Real::lit(1e-12f64.max(100.0 * E::Real::EPS));
            if dev > rel * scale {
                return Err(SolverError::NotSymmetric {
                    deviation: dev.to_f64_lossy(),
                });
            }
        }
        self.symmetry = symmetry;
        Ok(self)
    }

    /// Sets the flag without checking. Used where symmetry holds by construction.
    pub(crate) fn assume_symmetry(mut self, symmetry: Symmetry) -> Self {
        self.symmetry = symmetry;
        self
    }

    /// `max |M_ij - M_ji|` (or against `conj(M_ji)` for `Hermitian`).
    pub fn symmetry_deviation(&self, symmetry: Symmetry) -> Result<E::Real, SolverError> {
        if self.nrows != self.ncols {
            return Err(SolverError::Shape("symmetry of a non-square matrix".into()));
        }
        let t = self.transpose();
        let mut dev = E::Real::zero();
        for r in 0..self.nrows {
            let mut a = self.row(r).peekable();
            let mut b = t.row(r).peekable();
            loop {
                let (ca, cb) = (a.peek().map(|x| x.0), b.peek().map(|x| x.0));
                let (x, y) = match (ca, cb) {
                    (None, None) => break,
                    (Some(i), Some(j)) if i == j => (a.next().unwrap().1, b.next().unwrap().1),
                    (Some(i), Some(j)) if i < j => (a.next().unwrap().1, E::zero()),
                    (Some(_), None) => (a.next().unwrap().1, E::zero()),
                    _ => (E::zero(), b.next().unwrap().1),
                };
                let y = if symmetry == Symmetry::Hermitian { y.conj() } else { y };
                dev = dev.max((x - y).modulus());
            }
        }
        Ok(dev)
    }

    pub fn max_abs(&self) -> E::Real {
        self.values.iter().fold(E::Real::zero(), |m, v| m.max(v.modulus()))
    }

    pub fn diagonal(&self) -> Vec<E> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[E]) -> Vec<E> {
        let mut y = vec![E::zero(); self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[E], y: &mut [E]) {
        assert_eq!(x.len(), self.ncols, "operand length");
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = E::zero();
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[p] * x[self.col_idx[p]];
            }
            *yr = s;
        }
    }

    /// `Mᵀ x`
    pub fn mul_transpose_vec(&self, x: &[E]) -> Vec<E> {
        assert_eq!(x.len(), self.nrows, "operand length");
        let mut y = vec![E::zero(); self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.col_idx[p]] += self.values[p] * xr;
            }
        }
        y
    }

    /// `xᴴ M y`
    pub fn form(&self, x: &[E], y: &[E]) -> E {
        let my = self.mul_vec(y);
        x.iter().zip(&my).map(|(&a, &b)| a.conj() * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![E::zero(); self.nnz()];
        for r in 0..self.nrows {
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[p];
                col_idx[next[c]] = r;
                values[next[c]] = self.values[p];
                next[c] += 1;
            }
        }
        CsrMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            values,
            symmetry: self.symmetry,
        }
    }

    pub fn conj_transpose(&self) -> Self {
        let mut t = self.transpose();
        for v in t.values.iter_mut() {
            *v = v.conj();
        }
        t
    }

    /// Extracts the rows/columns selected by index maps (`None` drops the
    /// index; `Some(i)` places it at position `i`).
    pub fn select(
        &self,
        row_map: &dyn Fn(usize) -> Option<usize>,
        nrows: usize,
        col_map: &dyn Fn(usize) -> Option<usize>,
        ncols: usize,
    ) -> Self {
        let mut rows: Vec<Option<usize>> = vec![None; nrows];
        for r in 0..self.nrows {
            if let Some(i) = row_map(r) {
                rows[i] = Some(r);
            }
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut buf: Vec<(usize, E)> = Vec::new();
        for src in rows {
            if let Some(r) = src {
                buf.clear();
                for (c, v) in self.row(r) {
                    if let Some(j) = col_map(c) {
                        buf.push((j, v));
                    }
                }
                buf.sort_by_key(|e| e.0);
                for &(j, v) in &buf {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetry: Symmetry::General,
        }
    }

    /// `Σ α_i M_i` over matrices of equal shape; patterns are merged.
    pub fn linear_combination(terms: &[(E, &CsrMatrix<E>)]) -> Result<Self, SolverError> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| SolverError::Shape("empty linear combination".into()))?;
        let (nrows, ncols) = (first.nrows, first.ncols);
        if terms.iter().any(|(_, m)| m.nrows != nrows || m.ncols != ncols) {
            return Err(SolverError::Shape(
                "linear combination of differently shaped matrices".into(),
            ));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut acc = vec![E::zero(); ncols];
        let mut mark = vec![false; ncols];
        let mut cols: Vec<usize> = Vec::new();
        for r in 0..nrows {
            cols.clear();
            for (alpha, m) in terms {
                for (c, v) in m.row(r) {
                    if !mark[c] {
                        mark[c] = true;
                        cols.push(c);
                    }
                    acc[c] += *alpha * v;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                col_idx.push(c);
                values.push(acc[c]);
                acc[c] = E::zero();
                mark[c] = false;
            }
            row_ptr.push(col_idx.len());
        }
        let symmetry = if terms.iter().all(|(_, m)| m.symmetry == Symmetry::Symmetric) {
            Symmetry::Symmetric
        } else if terms
            .iter()
            .all(|(a, m)| m.symmetry == Symmetry::Hermitian && a.im().is_zero())
        {
            Symmetry::Hermitian
        } else {
            Symmetry::General
        };
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetry,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<E>> {
        let mut d = vec![vec![E::zero(); self.ncols]; self.nrows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// Writes the matrix in MatrixMarket coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> io::Result<()> {
        let field = if E::IS_COMPLEX { "complex" } else { "real" };
        writeln!(out, "%%MatrixMarket matrix coordinate {field} general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                if E::IS_COMPLEX {
                    writeln!(out, "{} {} {:e} {:e}", r + 1, c + 1, v.re(), v.im())?;
                } else {
                    writeln!(out, "{} {} {:e}", r + 1, c + 1, v.re())?;
                }
            }
        }
        Ok(())
    }
}

impl<T: Real> CsrMatrix<T> {
    /// Promotes a real matrix to complex entries.
    pub fn to_complex(&self) -> CsrMatrix<Complex<T>> {
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| Complex::new(v, T::zero())).collect(),
            symmetry: self.symmetry,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix<f64> {
        CsrMatrix::from_triplets(
            3,
            3,
            &[
                (0, 0, 2.0),
                (0, 2, 1.0),
                (2, 0, 1.0),
                (1, 1, 3.0),
                (0, 0, 1.0),
                (2, 2, 4.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn duplicates_are_summed() {
        let m = sample();
        assert_eq!(m.nnz(), 5);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 2), 0.0);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::<f64>::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn symmetry_is_verified() {
        assert!(sample().with_symmetry(Symmetry::Symmetric).is_ok());
        let bad = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 0, 1.0 + 1e-9)]).unwrap();
        assert!(matches!(
            bad.with_symmetry(Symmetry::Symmetric),
            Err(SolverError::NotSymmetric { .. })
        ));
        let h =
            CsrMatrix::from_triplets(2, 2, &[(0, 1, Complex::new(1.0, 2.0)), (1, 0, Complex::new(1.0, -2.0))]).unwrap();
        assert!(h.clone().with_symmetry(Symmetry::Hermitian).is_ok());
        assert!(h.with_symmetry(Symmetry::Symmetric).is_err());
    }

    #[test]
    fn products_and_transpose() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, -1.0)]).unwrap();
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![7.0, -2.0]);
        assert_eq!(m.mul_transpose_vec(&[1.0, 1.0]), vec![1.0, -1.0, 2.0]);
        assert_eq!(m.transpose().mul_vec(&[1.0, 1.0]), vec![1.0, -1.0, 2.0]);
    }

    #[test]
    fn linear_combination_merges_patterns() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        let b = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (1, 1, 2.0)]).unwrap();
        let c = CsrMatrix::linear_combination(&[(2.0, &a), (0.5, &b)]).unwrap();
        assert_eq!(c.to_dense(), vec![vec![2.0, 0.5], vec![0.0, 1.0]]);
    }

    #[test]
    fn select_extracts_submatrix() {
        let m = sample();
        let keep = |i: usize| if i == 1 { None } else { Some(i / 2) };
        let s = m.select(&keep, 2, &keep, 2);
        assert_eq!(s.to_dense(), vec![vec![3.0, 1.0], vec![1.0, 4.0]]);
    }

    #[test]
    fn matrix_market_header() {
        let mut buf = Vec::new();
        sample().write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n3 3 5\n"));
    }
}
