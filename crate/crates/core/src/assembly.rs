//! Assembly of the bilinear forms and load vectors of the scheme.
//!
//! Conventions: `(u, v) = ∫ u v̄`; matrix rows are test functions, columns are
//! trial functions, so `(M u)_i = a(u, N_i)`. Vector spaces number their
//! local dofs `3a + c` (component `c` of node `a`).

use crate::fespace::{
    ComplexFunction, ElementGeometry, FeSpace, FieldKind, QuadratureRule, ScalarFunction, Tabulation, VectorFunction,
};
use crate::scalar::{Field, Real};
use crate::sparse::{CsrMatrix, SolverError, Symmetry};
use num_complex::Complex;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("incompatible spaces: {0}")]
    Shape(String),
    #[error(transparent)]
    Matrix(#[from] SolverError),
}

/// Coefficient of a weighted scalar mass: pointwise part plus FE part, either
/// optional.
#[derive(Clone, Copy)]
pub struct ScalarWeight<'a, T: Real> {
    pub pointwise: Option<&'a (dyn Fn([T; 3]) -> T + Sync)>,
    pub field: Option<&'a ScalarFunction<T>>,
}

impl<'a, T: Real> ScalarWeight<'a, T> {
    pub fn pointwise(f: &'a (dyn Fn([T; 3]) -> T + Sync)) -> Self {
        ScalarWeight {
            pointwise: Some(f),
            field: None,
        }
    }

    pub fn field(f: &'a ScalarFunction<T>) -> Self {
        ScalarWeight {
            pointwise: None,
            field: Some(f),
        }
    }
}

impl<T: Real> std::fmt::Debug for ScalarWeight<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarWeight")
            .field("pointwise", &self.pointwise.is_some())
            .field("field", &self.field.is_some())
            .finish()
    }
}

/// The bilinear forms. Integrand degrees are for trial/test order `r`.
#[derive(Debug, Clone, Copy)]
pub enum FormKind<'a, T: Real> {
    /// `(u, v)`, degree `2r`
    ScalarMass,
    /// `(∇u, ∇v)`, degree `2r − 2`
    ScalarStiffness,
    /// `(u, v)` on vector fields, degree 4
    VectorMass,
    /// `Σ_c (∇u_c, ∇v_c)` on vector fields, degree 2
    VectorStiffness,
    /// `(∇×u, ∇×v)`, degree 2
    CurlCurl,
    /// `(∇·u, ∇·v)`, degree 2
    DivDiv,
    /// `(∇·u, q)` with `u` vector (trial) and `q` scalar (test), degree
    /// `r_u − 1 + r_q`
    DivPairing,
    /// `(c u, v)`
    WeightedScalarMass(ScalarWeight<'a, T>),
    /// `(|Ψ|² u, v)` on vector fields, degree `4 + 2 r_Ψ`
    WeightedVectorMass(&'a ComplexFunction<T>),
    /// `((i∇ + A)u, (i∇ + A)v)`, degree `2r + 4` with quadratic `A`
    MagneticSchrodinger(&'a VectorFunction<T>),
}

impl<T: Real> FormKind<'_, T> {
    /// Polynomial degree of the integrand, `None` for pointwise weights.
    pub fn integrand_degree(&self, trial_order: usize, test_order: usize) -> Option<usize> {
        let r = trial_order;
        Some(match self {
            FormKind::ScalarMass | FormKind::VectorMass => r + test_order,
            FormKind::ScalarStiffness | FormKind::VectorStiffness | FormKind::CurlCurl | FormKind::DivDiv => {
                r + test_order - 2
            }
            FormKind::DivPairing => r - 1 + test_order,
            FormKind::WeightedScalarMass(w) => {
                if w.pointwise.is_some() {
                    return None;
                }
                r + test_order + w.field.map_or(0, |f| f.space().order())
            }
            FormKind::WeightedVectorMass(psi) => r + test_order + 2 * psi.space().order(),
            FormKind::MagneticSchrodinger(a) => r + test_order + 2 * a.space().order(),
        })
    }

    /// True when the degree-6 rule cannot integrate the form exactly.
    pub fn is_under_integrated(&self, trial_order: usize, test_order: usize) -> bool {
        self.integrand_degree(trial_order, test_order).map_or(true, |d| d > 6)
    }

    fn name(&self) -> &'static str {
        match self {
            FormKind::ScalarMass => "ScalarMass",
            FormKind::ScalarStiffness => "ScalarStiffness",
            FormKind::VectorMass => "VectorMass",
            FormKind::VectorStiffness => "VectorStiffness",
            FormKind::CurlCurl => "CurlCurl",
            FormKind::DivDiv => "DivDiv",
            FormKind::DivPairing => "DivPairing",
            FormKind::WeightedScalarMass(_) => "WeightedScalarMass",
            FormKind::WeightedVectorMass(_) => "WeightedVectorMass",
            FormKind::MagneticSchrodinger(_) => "MagneticSchrodinger",
        }
    }
}

/// An assembled matrix; only `MagneticSchrodinger` is complex.
#[derive(Debug, Clone)]
pub enum FormMatrix<T: Real> {
    Real(CsrMatrix<T>),
    Complex(CsrMatrix<Complex<T>>),
}

impl<T: Real> FormMatrix<T> {
    pub fn into_real(self) -> Option<CsrMatrix<T>> {
        match self {
            FormMatrix::Real(m) => Some(m),
            FormMatrix::Complex(_) => None,
        }
    }

    pub fn into_complex(self) -> CsrMatrix<Complex<T>> {
        match self {
            FormMatrix::Real(m) => m.to_complex(),
            FormMatrix::Complex(m) => m,
        }
    }
}

/// Which dofs become rows/columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofSet {
    /// Every dof, constrained or not.
    All,
    /// Free dofs only: elimination of the homogeneous constraints.
    Free,
}

/// Assembles on all dofs with the degree-6 rule.
pub fn assemble_form<T: Real>(
    kind: FormKind<'_, T>,
    trial: &FeSpace<T>,
    test: &FeSpace<T>,
) -> Result<FormMatrix<T>, AssemblyError> {
    assemble_form_with(kind, trial, test, DofSet::All, &QuadratureRule::degree6())
}

/// Assembles on the free dofs with the degree-6 rule.
pub fn assemble_form_free<T: Real>(
    kind: FormKind<'_, T>,
    trial: &FeSpace<T>,
    test: &FeSpace<T>,
) -> Result<FormMatrix<T>, AssemblyError> {
    assemble_form_with(kind, trial, test, DofSet::Free, &QuadratureRule::degree6())
}

fn check_compatible<T: Real>(
    kind: &FormKind<'_, T>,
    trial: &FeSpace<T>,
    test: &FeSpace<T>,
) -> Result<(), AssemblyError> {
    if !trial.same_mesh(test) {
        return Err(AssemblyError::Shape(
            "trial and test spaces live on different meshes".into(),
        ));
    }
    let scalar = |s: &FeSpace<T>| s.components() == 1;
    let ok = match kind {
        FormKind::ScalarMass | FormKind::ScalarStiffness | FormKind::WeightedScalarMass(_) => {
            scalar(trial) && scalar(test)
        }
        FormKind::MagneticSchrodinger(_) => scalar(trial) && scalar(test),
        FormKind::VectorMass
        | FormKind::VectorStiffness
        | FormKind::CurlCurl
        | FormKind::DivDiv
        | FormKind::WeightedVectorMass(_) => trial.kind() == FieldKind::Vector3 && test.kind() == FieldKind::Vector3,
        FormKind::DivPairing => trial.kind() == FieldKind::Vector3 && scalar(test),
    };
    if !ok {
        return Err(AssemblyError::Shape(format!(
            "{} cannot pair a {:?} trial space with a {:?} test space",
            kind.name(),
            trial.kind(),
            test.kind()
        )));
    }
    let field_ok = match kind {
        FormKind::WeightedScalarMass(w) => w
            .field
            .map_or(true, |f| f.space().same_mesh(trial) && f.space().components() == 1),
        FormKind::WeightedVectorMass(psi) => psi.space().same_mesh(trial) && psi.space().components() == 1,
        FormKind::MagneticSchrodinger(a) => a.space().same_mesh(trial) && a.space().kind() == FieldKind::Vector3,
        _ => true,
    };
    if !field_ok {
        return Err(AssemblyError::Shape(format!(
            "{} coefficient field on an incompatible space",
            kind.name()
        )));
    }
    Ok(())
}

/// Row/column pattern of the coupling between two spaces on one mesh.
fn build_pattern<T: Real>(
    trial: &FeSpace<T>,
    test: &FeSpace<T>,
    dofs: DofSet,
    all_components: bool,
) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let ntets = test.mesh().num_tets();
    let ntr = trial.nodes_per_element();
    // node -> elements of the test space
    let mut start = vec![0usize; test.num_nodes() + 1];
    for t in 0..ntets {
        for &a in test.element_nodes(t) {
            start[a + 1] += 1;
        }
    }
    for i in 0..test.num_nodes() {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut elems = vec![0usize; start[test.num_nodes()]];
    for t in 0..ntets {
        for &a in test.element_nodes(t) {
            elems[fill[a]] = t;
            fill[a] += 1;
        }
    }
    let (ct, cu) = (test.components(), trial.components());
    let col_map = |dof: usize| -> Option<usize> {
        match dofs {
            DofSet::All => Some(dof),
            DofSet::Free => trial.free_index(dof),
        }
    };
    let nrows = match dofs {
        DofSet::All => test.num_dofs(),
        DofSet::Free => test.num_free(),
    };
    let ncols = match dofs {
        DofSet::All => trial.num_dofs(),
        DofSet::Free => trial.num_free(),
    };
    let mut row_ptr = Vec::with_capacity(nrows + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    let mut mark = vec![usize::MAX; trial.num_nodes()];
    let mut nbrs: Vec<usize> = Vec::with_capacity(64 * ntr);
    for a in 0..test.num_nodes() {
        nbrs.clear();
        for &t in &elems[start[a]..start[a + 1]] {
            for &b in trial.element_nodes(t) {
                if mark[b] != a {
                    mark[b] = a;
                    nbrs.push(b);
                }
            }
        }
        nbrs.sort_unstable();
        for c in 0..ct {
            let row = a * ct + c;
            if dofs == DofSet::Free && test.free_index(row).is_none() {
                continue;
            }
            for &b in &nbrs {
                for d in 0..cu {
                    if !all_components && ct == cu && c != d {
                        continue;
                    }
                    if let Some(col) = col_map(b * cu + d) {
                        col_idx.push(col);
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
    }
    debug_assert_eq!(row_ptr.len(), nrows + 1);
    (row_ptr, col_idx, nrows, ncols)
}

/// Per-element basis data of one space at the quadrature points.
struct ElementBasis<'a, T: Real> {
    tab: &'a Tabulation<T>,
    /// `grads[q * n + a]`
    grads: Vec<[T; 3]>,
    n: usize,
}

impl<'a, T: Real> ElementBasis<'a, T> {
    fn new(tab: &'a Tabulation<T>) -> Self {
        let n = tab.values[0].len();
        ElementBasis {
            tab,
            grads: vec![[T::zero(); 3]; n * tab.num_points()],
            n,
        }
    }

    fn update(&mut self, geo: &ElementGeometry<T>) {
        for q in 0..self.tab.num_points() {
            let n = self.n;
            self.tab.gradients(q, geo, &mut self.grads[q * n..(q + 1) * n]);
        }
    }

    #[inline]
    fn val(&self, q: usize, a: usize) -> T {
        self.tab.values[q][a]
    }

    #[inline]
    fn grad(&self, q: usize, a: usize) -> [T; 3] {
        self.grads[q * self.n + a]
    }
}

#[inline]
fn dot3<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Value and gradient of a scalar FE field at point `q` from element
/// coefficients.
#[inline]
fn field_at<T: Real, E: Field<Real = T>>(basis: &ElementBasis<'_, T>, coeffs: &[E], q: usize) -> (E, [E; 3]) {
    let mut v = E::zero();
    let mut g = [E::zero(); 3];
    for (a, &c) in coeffs.iter().enumerate() {
        v += c.scale(basis.val(q, a));
        let ga = basis.grad(q, a);
        for k in 0..3 {
            g[k] += c.scale(ga[k]);
        }
    }
    (v, g)
}

#[inline]
fn vector_at<T: Real>(basis: &ElementBasis<'_, T>, coeffs: &[T], q: usize) -> [T; 3] {
    let mut v = [T::zero(); 3];
    for a in 0..basis.n {
        let n = basis.val(q, a);
        for c in 0..3 {
            v[c] += coeffs[3 * a + c] * n;
        }
    }
    v
}

/// Assembles with an explicit rule and dof set.
pub fn assemble_form_with<T: Real>(
    kind: FormKind<'_, T>,
    trial: &FeSpace<T>,
    test: &FeSpace<T>,
    dofs: DofSet,
    rule: &QuadratureRule<T>,
) -> Result<FormMatrix<T>, AssemblyError> {
    check_compatible(&kind, trial, test)?;
    let all_components = matches!(kind, FormKind::CurlCurl | FormKind::DivDiv | FormKind::DivPairing);
    let (row_ptr, col_idx, nrows, ncols) = build_pattern(trial, test, dofs, all_components);
    let complex = matches!(kind, FormKind::MagneticSchrodinger(_));
    let mut real = CsrMatrix::<T>::from_pattern(nrows, ncols, row_ptr.clone(), col_idx.clone());
    let mut cplx = if complex {
        Some(CsrMatrix::<Complex<T>>::from_pattern(nrows, ncols, row_ptr, col_idx))
    } else {
        None
    };

    let mesh = trial.mesh().clone();
    let tab_u = trial.element().tabulate(rule);
    let tab_v = test.element().tabulate(rule);
    let mut bu = ElementBasis::new(&tab_u);
    let mut bv = ElementBasis::new(&tab_v);
    // Coefficient-field bases.
    let tab_c = match &kind {
        FormKind::WeightedScalarMass(ScalarWeight { field: Some(f), .. }) => Some(f.space().element().tabulate(rule)),
        FormKind::WeightedVectorMass(psi) => Some(psi.space().element().tabulate(rule)),
        FormKind::MagneticSchrodinger(a) => Some(a.space().element().tabulate(rule)),
        _ => None,
    };
    let mut bc = tab_c.as_ref().map(ElementBasis::new);

    let (ndu, ndv) = (trial.dofs_per_element(), test.dofs_per_element());
    let mut ke = vec![T::zero(); ndv * ndu];
    let mut ke_im = vec![T::zero(); if complex { ndv * ndu } else { 0 }];
    let mut dofs_u = Vec::with_capacity(ndu);
    let mut dofs_v = Vec::with_capacity(ndv);
    let mut cbuf_r = vec![T::zero(); 30];
    let mut cbuf_c = vec![Complex::new(T::zero(), T::zero()); 10];
    let nq = rule.len();
    let mut weight = vec![T::zero(); nq];
    let mut avec = vec![[T::zero(); 3]; nq];

    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(&mesh, t);
        bu.update(&geo);
        bv.update(&geo);
        let scale = geo.weight_scale();
        for q in 0..nq {
            weight[q] = rule.weights()[q] * scale;
        }
        // Pointwise coefficients at quadrature points.
        match &kind {
            FormKind::WeightedScalarMass(w) => {
                if let (Some(f), Some(b)) = (w.field, bc.as_mut()) {
                    b.update(&geo);
                    let n = f.space().dofs_per_element();
                    f.gather(t, &mut cbuf_r[..n]);
                }
                for q in 0..nq {
                    let mut c = T::zero();
                    if let Some(p) = w.pointwise {
                        c += p(geo.point(&rule.points()[q]));
                    }
                    if let (Some(_), Some(b)) = (w.field, bc.as_ref()) {
                        c += field_at(b, &cbuf_r[..b.n], q).0;
                    }
                    weight[q] *= c;
                }
            }
            FormKind::WeightedVectorMass(psi) => {
                let b = bc.as_mut().unwrap();
                b.update(&geo);
                psi.gather(t, &mut cbuf_c[..b.n]);
                for q in 0..nq {
                    weight[q] *= field_at(b, &cbuf_c[..b.n], q).0.modulus_sqr();
                }
            }
            FormKind::MagneticSchrodinger(a) => {
                let b = bc.as_mut().unwrap();
                b.update(&geo);
                a.gather(t, &mut cbuf_r[..3 * b.n]);
                for q in 0..nq {
                    avec[q] = vector_at(b, &cbuf_r[..3 * b.n], q);
                }
            }
            _ => {}
        }

        ke.iter_mut().for_each(|v| *v = T::zero());
        ke_im.iter_mut().for_each(|v| *v = T::zero());
        let (nu, nv) = (bu.n, bv.n);
        match &kind {
            FormKind::ScalarMass | FormKind::WeightedScalarMass(_) => {
                for q in 0..nq {
                    let w = weight[q];
                    for i in 0..nv {
                        let wi = w * bv.val(q, i);
                        for j in 0..nu {
                            ke[i * ndu + j] += wi * bu.val(q, j);
                        }
                    }
                }
            }
            FormKind::ScalarStiffness => {
                for q in 0..nq {
                    let w = weight[q];
                    for i in 0..nv {
                        let gi = bv.grad(q, i);
                        for j in 0..nu {
                            ke[i * ndu + j] += w * dot3(gi, bu.grad(q, j));
                        }
                    }
                }
            }
            FormKind::MagneticSchrodinger(_) => {
                for q in 0..nq {
                    let w = weight[q];
                    let a = avec[q];
                    let a2 = dot3(a, a);
                    for i in 0..nv {
                        let (ni, gi) = (bv.val(q, i), bv.grad(q, i));
                        let agi = dot3(a, gi);
                        for j in 0..nu {
                            let (nj, gj) = (bu.val(q, j), bu.grad(q, j));
                            ke[i * ndu + j] += w * (dot3(gi, gj) + a2 * ni * nj);
                            ke_im[i * ndu + j] += w * (ni * dot3(a, gj) - nj * agi);
                        }
                    }
                }
            }
            FormKind::VectorMass | FormKind::WeightedVectorMass(_) => {
                for q in 0..nq {
                    let w = weight[q];
                    for i in 0..nv {
                        let wi = w * bv.val(q, i);
                        for j in 0..nu {
                            let m = wi * bu.val(q, j);
                            for c in 0..3 {
                                ke[(3 * i + c) * ndu + 3 * j + c] += m;
                            }
                        }
                    }
                }
            }
            FormKind::VectorStiffness => {
                for q in 0..nq {
                    let w = weight[q];
                    for i in 0..nv {
                        let gi = bv.grad(q, i);
                        for j in 0..nu {
                            let m = w * dot3(gi, bu.grad(q, j));
                            for c in 0..3 {
                                ke[(3 * i + c) * ndu + 3 * j + c] += m;
                            }
                        }
                    }
                }
            }
            FormKind::DivDiv => {
                for q in 0..nq {
                    let w = weight[q];
                    for i in 0..nv {
                        let gi = bv.grad(q, i);
                        for j in 0..nu {
                            let gj = bu.grad(q, j);
                            for c in 0..3 {
                                for d in 0..3 {
                                    ke[(3 * i + c) * ndu + 3 * j + d] += w * gi[c] * gj[d];
                                }
                            }
                        }
                    }
                }
            }
            FormKind::CurlCurl => {
                for q in 0..nq {
                    let w = weight[q];
                    for i in 0..nv {
                        let gi = bv.grad(q, i);
                        for j in 0..nu {
                            let gj = bu.grad(q, j);
                            let g = dot3(gi, gj);
                            for c in 0..3 {
                                for d in 0..3 {
                                    let diag = if c == d { g } else { T::zero() };
                                    ke[(3 * i + c) * ndu + 3 * j + d] += w * (diag - gi[d] * gj[c]);
                                }
                            }
                        }
                    }
                }
            }
            FormKind::DivPairing => {
                for q in 0..nq {
                    let w = weight[q];
                    for i in 0..nv {
                        let wi = w * bv.val(q, i);
                        for j in 0..nu {
                            let gj = bu.grad(q, j);
                            for d in 0..3 {
                                ke[i * ndu + 3 * j + d] += wi * gj[d];
                            }
                        }
                    }
                }
            }
        }

        trial.element_dofs(t, &mut dofs_u);
        test.element_dofs(t, &mut dofs_v);
        let map = |s: &FeSpace<T>, d: usize| match dofs {
            DofSet::All => Some(d),
            DofSet::Free => s.free_index(d),
        };
        for (i, &dv) in dofs_v.iter().enumerate() {
            let Some(r) = map(test, dv) else { continue };
            for (j, &du) in dofs_u.iter().enumerate() {
                let Some(c) = map(trial, du) else { continue };
                let v = ke[i * ndu + j];
                if let Some(m) = cplx.as_mut() {
                    let vi = ke_im[i * ndu + j];
                    if v != T::zero() || vi != T::zero() {
                        m.add_at(r, c, Complex::new(v, vi));
                    }
                } else if v != T::zero() {
                    real.add_at(r, c, v);
                }
            }
        }
    }

    let square_same = std::ptr::eq(trial, test)
        || (trial.num_dofs() == test.num_dofs()
            && trial.order() == test.order()
            && trial.boundary_condition() == test.boundary_condition());
    if let Some(m) = cplx {
        let m = if square_same {
            m.with_symmetry(Symmetry::Hermitian)?
        } else {
            m
        };
        return Ok(FormMatrix::Complex(m));
    }
    let symmetric = square_same && !matches!(kind, FormKind::DivPairing);
    let real = if symmetric {
        real.with_symmetry(Symmetry::Symmetric)?
    } else {
        real
    };
    Ok(FormMatrix::Real(real))
}

/// Real matrix of a real form; errors for `MagneticSchrodinger`.
pub fn assemble_real<T: Real>(
    kind: FormKind<'_, T>,
    trial: &FeSpace<T>,
    test: &FeSpace<T>,
    dofs: DofSet,
) -> Result<CsrMatrix<T>, AssemblyError> {
    assemble_form_with(kind, trial, test, dofs, &QuadratureRule::degree6())?
        .into_real()
        .ok_or_else(|| AssemblyError::Shape(format!("{} is complex-valued", kind.name())))
}

/// Load vector `∫ f N_i` on a scalar space (all dofs).
pub fn assemble_load<T, E, F>(space: &FeSpace<T>, f: F) -> Result<Vec<E>, AssemblyError>
where
    T: Real,
    E: Field<Real = T>,
    F: Fn([T; 3]) -> E,
{
    if space.components() != 1 {
        return Err(AssemblyError::Shape("scalar load on a vector space".into()));
    }
    let rule = QuadratureRule::degree6();
    let tab = space.element().tabulate(&rule);
    let mesh = space.mesh();
    let mut out = vec![E::zero(); space.num_dofs()];
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        let scale = geo.weight_scale();
        let nodes = space.element_nodes(t);
        for (q, p) in rule.points().iter().enumerate() {
            let v = f(geo.point(p)).scale(rule.weights()[q] * scale);
            for (a, &node) in nodes.iter().enumerate() {
                out[node] += v.scale(tab.values[q][a]);
            }
        }
    }
    Ok(out)
}

/// Load vector `∫ f · N_i e_c` on a vector space (all dofs).
pub fn assemble_vector_load<T, F>(space: &FeSpace<T>, f: F) -> Result<Vec<T>, AssemblyError>
where
    T: Real,
    F: Fn([T; 3]) -> [T; 3],
{
    if space.kind() != FieldKind::Vector3 {
        return Err(AssemblyError::Shape("vector load on a scalar space".into()));
    }
    let rule = QuadratureRule::degree6();
    let tab = space.element().tabulate(&rule);
    let mesh = space.mesh();
    let mut out = vec![T::zero(); space.num_dofs()];
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        let scale = geo.weight_scale();
        let nodes = space.element_nodes(t);
        for (q, p) in rule.points().iter().enumerate() {
            let v = f(geo.point(p));
            let w = rule.weights()[q] * scale;
            for (a, &node) in nodes.iter().enumerate() {
                let wn = w * tab.values[q][a];
                for c in 0..3 {
                    out[3 * node + c] += v[c] * wn;
                }
            }
        }
    }
    Ok(out)
}

/// `∫ (|Ψ|² + h) N_i` on a real scalar space: the Poisson right-hand side.
pub fn assemble_density_load<T: Real>(
    psi: &ComplexFunction<T>,
    space: &FeSpace<T>,
    h: Option<&dyn Fn([T; 3]) -> T>,
) -> Result<Vec<T>, AssemblyError> {
    if space.components() != 1 || !psi.space().same_mesh(space) {
        return Err(AssemblyError::Shape(
            "density load needs a scalar space on the same mesh".into(),
        ));
    }
    let rule = QuadratureRule::degree6();
    let tab = space.element().tabulate(&rule);
    let tab_psi = psi.space().element().tabulate(&rule);
    let mesh = space.mesh();
    let mut out = vec![T::zero(); space.num_dofs()];
    let mut c = vec![Complex::new(T::zero(), T::zero()); psi.space().nodes_per_element()];
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        let scale = geo.weight_scale();
        psi.gather(t, &mut c);
        let nodes = space.element_nodes(t);
        for (q, p) in rule.points().iter().enumerate() {
            let mut rho = T::zero();
            let v: Complex<T> = c
                .iter()
                .enumerate()
                .map(|(a, &ca)| ca.scale(tab_psi.values[q][a]))
                .sum();
            rho += v.modulus_sqr();
            if let Some(h) = h {
                rho += h(geo.point(p));
            }
            let w = rho * rule.weights()[q] * scale;
            for (a, &node) in nodes.iter().enumerate() {
                out[node] += w * tab.values[q][a];
            }
        }
    }
    Ok(out)
}

/// Current density `f(Ψ,Ψ) = (i/2)(Ψ̄∇Ψ − Ψ∇Ψ̄) = −Im(Ψ̄∇Ψ)` at a point.
#[inline]
pub fn current_density<T: Real>(psi: Complex<T>, grad: [Complex<T>; 3]) -> [T; 3] {
    grad.map(|g| -(psi.conj() * g).im)
}

/// Load vector `∫ f(Ψ,Ψ) · N_i e_c` on a vector space (all dofs).
pub fn assemble_current<T: Real>(psi: &ComplexFunction<T>, test: &FeSpace<T>) -> Result<Vec<T>, AssemblyError> {
    if test.kind() != FieldKind::Vector3 || !psi.space().same_mesh(test) || psi.space().components() != 1 {
        return Err(AssemblyError::Shape(
            "current load needs a complex scalar field and a vector space".into(),
        ));
    }
    let rule = QuadratureRule::degree6();
    let tab = test.element().tabulate(&rule);
    let tab_psi = psi.space().element().tabulate(&rule);
    let mut bpsi = ElementBasis::new(&tab_psi);
    let mesh = test.mesh();
    let mut out = vec![T::zero(); test.num_dofs()];
    let mut c = vec![Complex::new(T::zero(), T::zero()); bpsi.n];
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        bpsi.update(&geo);
        let scale = geo.weight_scale();
        psi.gather(t, &mut c);
        let nodes = test.element_nodes(t);
        for q in 0..rule.len() {
            let (v, g) = field_at(&bpsi, &c, q);
            let j = current_density(v, g);
            let w = rule.weights()[q] * scale;
            for (a, &node) in nodes.iter().enumerate() {
                let wn = w * tab.values[q][a];
                for k in 0..3 {
                    out[3 * node + k] += j[k] * wn;
                }
            }
        }
    }
    Ok(out)
}

/// The spaces of the scheme on one mesh.
#[derive(Debug, Clone)]
pub struct Spaces<T: Real> {
    /// Complex order-`r` space for Ψ.
    pub psi: Arc<FeSpace<T>>,
    /// Real order-`r` space for φ.
    pub phi: Arc<FeSpace<T>>,
    /// Quadratic vector space for A.
    pub vector: Arc<FeSpace<T>>,
    /// Linear multiplier space.
    pub mult: Arc<FeSpace<T>>,
}

impl<T: Real> Spaces<T> {
    pub fn new(mesh: Arc<crate::mesh::Mesh<T>>, order: usize) -> Result<Self, crate::fespace::FeError> {
        Ok(Spaces {
            psi: Arc::new(FeSpace::scalar_dirichlet(mesh.clone(), order, true)?),
            phi: Arc::new(FeSpace::scalar_dirichlet(mesh.clone(), order, false)?),
            vector: Arc::new(FeSpace::vector_tangential(mesh.clone())?),
            mult: Arc::new(FeSpace::scalar_dirichlet(mesh, 1, false)?),
        })
    }
}
