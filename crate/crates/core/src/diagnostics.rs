//! Conserved quantities, error norms, convergence rates and CSV output.

use crate::assembly::{assemble_real, AssemblyError, DofSet, FormKind, Spaces};
use crate::fespace::{ComplexFunction, ElementGeometry, FeFunction, QuadratureRule, VectorFunction};
use crate::manufactured::Jacobian;
use crate::mesh::Mesh;
use crate::scalar::{Field, Real};
use crate::sparse::{CsrMatrix, DirectSolver, SolverError};
use crate::stepper::{Discretization, State, StepError};
use num_complex::Complex;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("error on the fine mesh is zero; the order is undefined")]
    ZeroError,
    #[error("need at least two finite, positive samples")]
    TooFewSamples,
}

/// `∫ |Ψ|²` by quadrature.
pub fn total_charge<T: Real>(psi: &ComplexFunction<T>) -> T {
    let space = psi.space();
    let rule = QuadratureRule::degree6();
    let tab = space.element().tabulate(&rule);
    let mesh = space.mesh();
    let mut c = vec![Complex::new(T::zero(), T::zero()); space.nodes_per_element()];
    let mut total = T::zero();
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        psi.gather(t, &mut c);
        let mut local = T::zero();
        for q in 0..rule.len() {
            let v: Complex<T> = c.iter().zip(&tab.values[q]).map(|(&a, &n)| a.scale(n)).sum();
            local += rule.weights()[q] * v.norm_sqr();
        }
        total += local * geo.weight_scale();
    }
    total
}

fn complex_form<T: Real>(m: &CsrMatrix<T>, x: &[Complex<T>]) -> T {
    let re: Vec<T> = x.iter().map(|c| c.re).collect();
    let im: Vec<T> = x.iter().map(|c| c.im).collect();
    m.form(&re, &re) + m.form(&im, &im)
}

/// Discrete energy at level `k`:
/// `½ S(Ā^k)[Ψ^k] + (VΨ^k, Ψ^k) + ½‖∇φ^k‖² + ½‖(A^k − A^{k−1})/τ‖² + ¼D(A^k) + ¼D(A^{k−1})`
/// with `Ā^k = (A^k + A^{k−1})/2` and `D(A) = ‖∇×A‖² + ‖∇·A‖²`.
pub fn discrete_energy<T: Real>(disc: &Discretization<T>, state: &State<T>) -> Result<T, StepError> {
    let half = T::lit(0.5);
    let quarter = T::lit(0.25);
    let a_bar = state.a.combine(half, &state.a_prev, half);
    let s = disc.magnetic_matrix(&a_bar)?;
    let psi = state.psi.free_values();
    let kinetic = s.form(&psi, &psi).re;
    let potential = complex_form(&disc.potential_psi, &psi);
    let phi = state.phi.free_values();
    let coulomb = disc.stiffness_phi.form(&phi, &phi);
    let a = state.a.free_values();
    let ap = state.a_prev.free_values();
    let dt: Vec<T> = a.iter().zip(&ap).map(|(&x, &y)| (x - y) / disc.tau).collect();
    let electric = disc.mass_vec.form(&dt, &dt);
    let magnetic = disc.d_form.form(&a, &a) + disc.d_form.form(&ap, &ap);
    Ok(half * kinetic + potential + half * coulomb + half * electric + quarter * magnetic)
}

/// `L²` and `H¹`-seminorm parts of an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct H1Error {
    pub l2: f64,
    pub semi: f64,
}

impl H1Error {
    /// Full `H¹` norm.
    pub fn h1(&self) -> f64 {
        self.l2.hypot(self.semi)
    }
}

/// Error of a scalar (real or complex) FE field against an exact function
/// and its gradient.
pub fn h1_error_scalar<T, E, F, G>(u: &FeFunction<T, E>, exact: F, grad: G) -> H1Error
where
    T: Real,
    E: Field<Real = T>,
    F: Fn([T; 3]) -> E,
    G: Fn([T; 3]) -> [E; 3],
{
    let space = u.space();
    let rule = QuadratureRule::degree6();
    let tab = space.element().tabulate(&rule);
    let mesh = space.mesh();
    let n = space.nodes_per_element();
    let mut c = vec![E::zero(); n];
    let mut g = vec![[T::zero(); 3]; n];
    let (mut l2, mut semi) = (0.0, 0.0);
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        u.gather(t, &mut c);
        let scale = geo.weight_scale();
        for q in 0..rule.len() {
            tab.gradients(q, &geo, &mut g);
            let x = geo.point(&rule.points()[q]);
            let mut v = E::zero();
            let mut dv = [E::zero(); 3];
            for a in 0..n {
                v += c[a].scale(tab.values[q][a]);
                for k in 0..3 {
                    dv[k] += c[a].scale(g[a][k]);
                }
            }
            let w = (rule.weights()[q] * scale).to_f64_lossy();
            l2 += w * (v - exact(x)).modulus_sqr().to_f64_lossy();
            let ge = grad(x);
            semi += w
                * (0..3)
                    .map(|k| (dv[k] - ge[k]).modulus_sqr().to_f64_lossy())
                    .sum::<f64>();
        }
    }
    H1Error {
        l2: l2.sqrt(),
        semi: semi.sqrt(),
    }
}

/// Error of a vector FE field; `jac[i][k] = ∂u_i/∂x_k`.
pub fn h1_error_vector<T, F, J>(u: &VectorFunction<T>, exact: F, jac: J) -> H1Error
where
    T: Real,
    F: Fn([T; 3]) -> [T; 3],
    J: Fn([T; 3]) -> Jacobian<T>,
{
    let space = u.space();
    assert_eq!(space.components(), 3, "vector error on a scalar field");
    let rule = QuadratureRule::degree6();
    let tab = space.element().tabulate(&rule);
    let mesh = space.mesh();
    let n = space.nodes_per_element();
    let mut c = vec![T::zero(); 3 * n];
    let mut g = vec![[T::zero(); 3]; n];
    let (mut l2, mut semi) = (0.0, 0.0);
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        u.gather(t, &mut c);
        let scale = geo.weight_scale();
        for q in 0..rule.len() {
            tab.gradients(q, &geo, &mut g);
            let x = geo.point(&rule.points()[q]);
            let mut v = [T::zero(); 3];
            let mut dv = [[T::zero(); 3]; 3];
            for a in 0..n {
                for i in 0..3 {
                    let ca = c[3 * a + i];
                    v[i] += ca * tab.values[q][a];
                    for k in 0..3 {
                        dv[i][k] += ca * g[a][k];
                    }
                }
            }
            let w = (rule.weights()[q] * scale).to_f64_lossy();
            let ve = exact(x);
            let je = jac(x);
            for i in 0..3 {
                l2 += w * (v[i] - ve[i]).to_f64_lossy().powi(2);
                for k in 0..3 {
                    semi += w * (dv[i][k] - je[i][k]).to_f64_lossy().powi(2);
                }
            }
        }
    }
    H1Error {
        l2: l2.sqrt(),
        semi: semi.sqrt(),
    }
}

/// Observed order between two meshes: `log(e_c/e_f) / log(h_c/h_f)`.
pub fn convergence_order(h_coarse: f64, e_coarse: f64, h_fine: f64, e_fine: f64) -> Result<f64, RateError> {
    if e_fine == 0.0 {
        return Err(RateError::ZeroError);
    }
    if !(e_coarse > 0.0 && e_fine > 0.0 && h_coarse > 0.0 && h_fine > 0.0) || h_coarse == h_fine {
        return Err(RateError::TooFewSamples);
    }
    Ok((e_coarse / e_fine).ln() / (h_coarse / h_fine).ln())
}

/// Least-squares slope of `log e` against `log h`.
pub fn regression_slope(h: &[f64], e: &[f64]) -> Result<f64, RateError> {
    let pts: Vec<(f64, f64)> = h
        .iter()
        .zip(e)
        .filter(|(h, e)| **h > 0.0 && **e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(RateError::TooFewSamples);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(RateError::TooFewSamples);
    }
    Ok(sxy / sxx)
}

/// One row of `conservation.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub charge: f64,
    pub energy: f64,
    pub div_residual: f64,
    pub picard_iters: usize,
}

pub const CONSERVATION_HEADER: &str = "step,time,charge,energy,div_residual,picard_iters";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            self.step, self.time, self.charge, self.energy, self.div_residual, self.picard_iters
        )
    }
}

/// Largest `|q_k − q_0| / |q_0|` over a series (absolute if `q_0 = 0`).
pub fn max_relative_drift(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(q0) = it.next() else { return 0.0 };
    let scale = if q0 == 0.0 { 1.0 } else { q0.abs() };
    it.map(|q| (q - q0).abs() / scale).fold(0.0, f64::max)
}

/// Appends records to a CSV file, flushing after every row.
#[derive(Debug)]
pub struct CsvSink {
    out: BufWriter<File>,
}

impl CsvSink {
    pub fn create(path: impl AsRef<Path>) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CONSERVATION_HEADER}")?;
        out.flush()?;
        Ok(CsvSink { out })
    }

    pub fn write(&mut self, rec: &DiagnosticsRecord) -> io::Result<()> {
        writeln!(self.out, "{}", rec.csv_row())?;
        self.out.flush()
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// One row of `errors.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRecord {
    pub n: usize,
    pub h: f64,
    pub tau: f64,
    pub err_psi: f64,
    pub err_a: f64,
    pub err_phi: f64,
}

pub const ERRORS_HEADER: &str = "N,h,tau,err_psi_h1,err_A_h1,err_phi_h1,order_psi,order_A,order_phi";

/// Pairwise orders of each row against the previous one.
pub fn pairwise_orders(rows: &[ErrorRecord]) -> Vec<[Option<f64>; 3]> {
    let mut out = vec![[None; 3]];
    for w in rows.windows(2) {
        let (c, f) = (&w[0], &w[1]);
        let o = |ec: f64, ef: f64| convergence_order(c.h, ec, f.h, ef).ok();
        out.push([o(c.err_psi, f.err_psi), o(c.err_a, f.err_a), o(c.err_phi, f.err_phi)]);
    }
    out.truncate(rows.len());
    out
}

/// Regression slopes over all rows.
pub fn regression_orders(rows: &[ErrorRecord]) -> [Option<f64>; 3] {
    let h: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let col = |f: fn(&ErrorRecord) -> f64| regression_slope(&h, &rows.iter().map(f).collect::<Vec<_>>()).ok();
    [col(|r| r.err_psi), col(|r| r.err_a), col(|r| r.err_phi)]
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.16e}"))
}

/// Writes the error table: one row per mesh with the order against the
/// previous row, then a `regression` row holding the least-squares slopes.
pub fn write_error_table<W: Write>(rows: &[ErrorRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{ERRORS_HEADER}")?;
    for (r, o) in rows.iter().zip(pairwise_orders(rows)) {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.n,
            r.h,
            r.tau,
            r.err_psi,
            r.err_a,
            r.err_phi,
            fmt_opt(o[0]),
            fmt_opt(o[1]),
            fmt_opt(o[2])
        )?;
    }
    let reg = regression_orders(rows);
    writeln!(
        out,
        "regression,,,,,,{},{},{}",
        fmt_opt(reg[0]),
        fmt_opt(reg[1]),
        fmt_opt(reg[2])
    )?;
    out.flush()
}

/// Discrete inf-sup constant of the divergence pairing between the
/// tangential quadratic vector space (`H¹` norm) and the linear multiplier
/// space (`L²` norm): `β² = λ_min(B K⁻¹ Bᵀ, M_p)`.
pub fn inf_sup_constant<T: Real>(n: usize) -> Result<f64, StepError> {
    let mesh = Arc::new(Mesh::<T>::unit_cube(n)?);
    let sp = Spaces::new(mesh, 1)?;
    let (v, p) = (&*sp.vector, &*sp.mult);
    let mass = assemble_real(FormKind::VectorMass, v, v, DofSet::Free)?;
    let stiff = assemble_real(FormKind::VectorStiffness, v, v, DofSet::Free)?;
    let k = CsrMatrix::linear_combination(&[(T::one(), &mass), (T::one(), &stiff)]).map_err(AssemblyError::from)?;
    let b = assemble_real(FormKind::DivPairing, v, p, DofSet::Free)?;
    let mp = assemble_real(FormKind::ScalarMass, p, p, DofSet::Free)?;
    let m = b.nrows();
    if m == 0 {
        return Err(StepError::Config(format!("no interior multiplier nodes for n = {n}")));
    }
    let solver = DirectSolver::new(k)?;
    let bt = b.transpose();
    let mut s = vec![vec![0.0; m]; m];
    let mut e = vec![T::zero(); m];
    for j in 0..m {
        e.iter_mut().for_each(|x| *x = T::zero());
        e[j] = T::one();
        let (y, _) = solver.solve(&bt.mul_vec(&e), crate::sparse::DIRECT_TOL)?;
        for (i, v) in b.mul_vec(&y).into_iter().enumerate() {
            s[i][j] = v.to_f64_lossy();
        }
    }
    let mp: Vec<Vec<f64>> = mp
        .to_dense()
        .into_iter()
        .map(|r| r.into_iter().map(|x| x.to_f64_lossy()).collect())
        .collect();
    let lambda = generalized_min_eigenvalue(&s, &mp).ok_or(StepError::Solver(SolverError::InfSupFailure(
        "multiplier mass matrix is not positive definite".into(),
    )))?;
    Ok(lambda.max(0.0).sqrt())
}

/// Smallest eigenvalue of the symmetric pencil `(A, M)`, `M` SPD, by
/// Cholesky reduction and cyclic Jacobi rotations.
pub fn generalized_min_eigenvalue(a: &[Vec<f64>], m: &[Vec<f64>]) -> Option<f64> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // C = L⁻¹ A L⁻ᵀ
    let lower_solve = |b: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = (b[i] - (0..i).map(|k| l[i][k] * x[k]).sum::<f64>()) / l[i][i];
        }
        x
    };
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| lower_solve(&a.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect();
    // cols[j] = column j of L⁻¹A; rows of L⁻¹A as columns of its transpose
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| cols[j][i]).collect();
        let x = lower_solve(&row);
        for j in 0..n {
            c[i][j] = x[j];
        }
    }
    Some(symmetric_eigenvalues(c).into_iter().fold(f64::INFINITY, f64::min))
}

fn symmetric_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}
