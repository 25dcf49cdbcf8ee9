//! Lagrange finite element spaces on the cube mesh: dof maps, boundary
//! constraints, coefficient fields and nodal interpolation.
//!
//! Nodes of an order-`r` space coincide with the points of the uniform
//! `(rN+1)³` lattice, numbered lexicographically with `x` fastest. Vector
//! spaces interleave components, `dof = 3 * node + component`.

mod element;
mod function;
mod quadrature;
mod ritz;

pub use element::{ElementGeometry, ReferenceElement, Tabulation, EDGES};
pub use function::{ComplexFunction, FeFunction, ScalarFunction, VectorFunction};
pub use quadrature::QuadratureRule;
pub use ritz::{d_form_matrix, d_form_matrix_coupled, ritz_project_vector, RitzProjector, RitzSource};

use crate::mesh::Mesh;
use crate::scalar::{Field, Real};
use crate::sparse::SolverError;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeError {
    #[error("invalid space: {0}")]
    InvalidSpace(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value at x = {x:?}")]
    Evaluation { x: [f64; 3] },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FieldKind {
    ScalarReal,
    ScalarComplex,
    Vector3,
}

impl FieldKind {
    pub fn components(&self) -> usize {
        match self {
            FieldKind::Vector3 => 3,
            _ => 1,
        }
    }
}

/// How the boundary condition of the space is imposed on its nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    None,
    /// All components of all boundary nodes vanish.
    Dirichlet,
    /// `v × n = 0`: on a face `x_i ∈ {0,1}` the two components orthogonal to
    /// axis `i` vanish; on edges and corners all three do.
    Tangential,
}

#[derive(Debug)]
pub struct FeSpace<T> {
    mesh: Arc<Mesh<T>>,
    kind: FieldKind,
    element: ReferenceElement<T>,
    bc: BoundaryCondition,
    lattice: usize,
    /// `num_tets × nodes_per_element` node indices
    elem_nodes: Vec<usize>,
    constrained: Vec<bool>,
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
}

pub(crate) const NOT_FREE: usize = usize::MAX;

impl<T: Real> FeSpace<T> {
    pub fn new(mesh: Arc<Mesh<T>>, kind: FieldKind, order: usize, bc: BoundaryCondition) -> Result<Self, FeError> {
        if order != 1 && order != 2 {
            return Err(FeError::InvalidSpace(format!(
                "element order must be 1 or 2, got {order}"
            )));
        }
        if bc == BoundaryCondition::Tangential && kind != FieldKind::Vector3 {
            return Err(FeError::InvalidSpace(
                "tangential condition requires a vector space".into(),
            ));
        }
        let element = ReferenceElement::new(order);
        let n = mesh.n();
        let lattice = order * n + 1;
        let nloc = element.num_nodes();
        let mut elem_nodes = Vec::with_capacity(mesh.num_tets() * nloc);
        let node_of = |c: [usize; 3]| c[0] + lattice * (c[1] + lattice * c[2]);
        for tet in mesh.tets() {
            let lat: Vec<[usize; 3]> = tet.iter().map(|&v| mesh.vertex_lattice(v)).collect();
            if order == 1 {
                for c in &lat {
                    elem_nodes.push(node_of(*c));
                }
            } else {
                for c in &lat {
                    elem_nodes.push(node_of([2 * c[0], 2 * c[1], 2 * c[2]]));
                }
                for &(a, b) in EDGES.iter() {
                    let (p, q) = (lat[a], lat[b]);
                    elem_nodes.push(node_of([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                }
            }
        }

        let comps = kind.components();
        let num_nodes = lattice * lattice * lattice;
        let mut constrained = vec![false; num_nodes * comps];
        let last = lattice - 1;
        for node in 0..num_nodes {
            let c = [node % lattice, (node / lattice) % lattice, node / (lattice * lattice)];
            let axes: Vec<usize> = (0..3).filter(|&a| c[a] == 0 || c[a] == last).collect();
            if axes.is_empty() {
                continue;
            }
            match bc {
                BoundaryCondition::None => {}
                BoundaryCondition::Dirichlet => {
                    for k in 0..comps {
                        constrained[node * comps + k] = true;
                    }
                }
                BoundaryCondition::Tangential => {
                    for &axis in &axes {
                        for k in 0..3 {
                            if k != axis {
                                constrained[node * 3 + k] = true;
                            }
                        }
                    }
                }
            }
        }
        let mut free_index = vec![NOT_FREE; constrained.len()];
        let mut free_dofs = Vec::new();
        for (d, &c) in constrained.iter().enumerate() {
            if !c {
                free_index[d] = free_dofs.len();
                free_dofs.push(d);
            }
        }
        Ok(FeSpace {
            mesh,
            kind,
            element,
            bc,
            lattice,
            elem_nodes,
            constrained,
            free_index,
            free_dofs,
        })
    }

    /// Scalar order-`r` space vanishing on the boundary (`X_h^r`), real or
    /// complex.
    pub fn scalar_dirichlet(mesh: Arc<Mesh<T>>, order: usize, complex: bool) -> Result<Self, FeError> {
        let kind = if complex {
            FieldKind::ScalarComplex
        } else {
            FieldKind::ScalarReal
        };
        Self::new(mesh, kind, order, BoundaryCondition::Dirichlet)
    }

    /// Quadratic vector space with vanishing tangential trace.
    pub fn vector_tangential(mesh: Arc<Mesh<T>>) -> Result<Self, FeError> {
        Self::new(mesh, FieldKind::Vector3, 2, BoundaryCondition::Tangential)
    }

    pub fn mesh(&self) -> &Arc<Mesh<T>> {
        &self.mesh
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.element.order()
    }

    pub fn boundary_condition(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn element(&self) -> &ReferenceElement<T> {
        &self.element
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn num_nodes(&self) -> usize {
        self.lattice * self.lattice * self.lattice
    }

    pub fn num_dofs(&self) -> usize {
        self.num_nodes() * self.components()
    }

    pub fn num_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.element.num_nodes()
    }

    pub fn dofs_per_element(&self) -> usize {
        self.nodes_per_element() * self.components()
    }

    /// Global node indices of element `t`, in reference-element order.
    #[inline]
    pub fn element_nodes(&self, t: usize) -> &[usize] {
        let n = self.nodes_per_element();
        &self.elem_nodes[t * n..(t + 1) * n]
    }

    /// Global dofs of element `t`; for vector spaces local dof `3a + c` is
    /// component `c` of local node `a`.
    pub fn element_dofs(&self, t: usize, out: &mut Vec<usize>) {
        out.clear();
        let comps = self.components();
        for &node in self.element_nodes(t) {
            for c in 0..comps {
                out.push(node * comps + c);
            }
        }
    }

    pub fn node_coordinates(&self, node: usize) -> [T; 3] {
        let l = self.lattice;
        let scale = T::one() / T::from_usize(l - 1).unwrap();
        [
            T::from_usize(node % l).unwrap() * scale,
            T::from_usize((node / l) % l).unwrap() * scale,
            T::from_usize(node / (l * l)).unwrap() * scale,
        ]
    }

    /// Node index of a mesh vertex.
    pub fn vertex_node(&self, v: usize) -> usize {
        let c = self.mesh.vertex_lattice(v);
        let r = self.order();
        r * c[0] + self.lattice * (r * c[1] + self.lattice * r * c[2])
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn constrained_mask(&self) -> &[bool] {
        &self.constrained
    }

    /// Position of `dof` among the free dofs, if it is free.
    #[inline]
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        let i = self.free_index[dof];
        (i != NOT_FREE).then_some(i)
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Restricts a full coefficient vector to the free dofs.
    pub fn restrict<E: Copy>(&self, full: &[E]) -> Vec<E> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }

    /// Expands free-dof values to a full vector; constrained dofs take their
    /// prescribed value (zero for the homogeneous conditions used here).
    pub fn extend<E: Field>(&self, free: &[E]) -> Vec<E> {
        let mut full = vec![E::zero(); self.num_dofs()];
        for (&d, &v) in self.free_dofs.iter().zip(free) {
            full[d] = v;
        }
        full
    }

    pub fn same_mesh(&self, other: &FeSpace<T>) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

/// Nodal interpolant of a scalar function. Constrained dofs are overwritten
/// with their prescribed (zero) values.
pub fn interpolate_scalar<T, E, F>(space: &Arc<FeSpace<T>>, f: F) -> Result<FeFunction<T, E>, FeError>
where
    T: Real,
    E: Field<Real = T>,
    F: Fn([T; 3]) -> E,
{
    if space.components() != 1 {
        return Err(FeError::Shape("scalar interpolation on a vector space".into()));
    }
    if E::IS_COMPLEX != (space.kind() == FieldKind::ScalarComplex) {
        return Err(FeError::Shape("coefficient type does not match the space kind".into()));
    }
    let mut coeffs = Vec::with_capacity(space.num_dofs());
    for node in 0..space.num_nodes() {
        let x = space.node_coordinates(node);
        let v = f(x);
        if !v.is_finite_value() {
            return Err(FeError::Evaluation {
                x: x.map(|c| c.to_f64_lossy()),
            });
        }
        coeffs.push(v);
    }
    let mut u = FeFunction::from_coeffs(space.clone(), coeffs)?;
    u.apply_constraints();
    Ok(u)
}

/// Componentwise nodal interpolant of a vector field; tangential constraints
/// are applied afterwards.
pub fn interpolate_vector<T, F>(space: &Arc<FeSpace<T>>, f: F) -> Result<VectorFunction<T>, FeError>
where
    T: Real,
    F: Fn([T; 3]) -> [T; 3],
{
    if space.kind() != FieldKind::Vector3 {
        return Err(FeError::Shape("vector interpolation on a scalar space".into()));
    }
    let mut coeffs = Vec::with_capacity(space.num_dofs());
    for node in 0..space.num_nodes() {
        let x = space.node_coordinates(node);
        let v = f(x);
        if v.iter().any(|c| !c.is_finite()) {
            return Err(FeError::Evaluation {
                x: x.map(|c| c.to_f64_lossy()),
            });
        }
        coeffs.extend_from_slice(&v);
    }
    let mut u = FeFunction::from_coeffs(space.clone(), coeffs)?;
    u.apply_constraints();
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn mesh(n: usize) -> Arc<Mesh<f64>> {
        Arc::new(Mesh::unit_cube(n).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = mesh(4);
        let s = FeSpace::new(m.clone(), FieldKind::ScalarReal, 2, BoundaryCondition::None).unwrap();
        assert_eq!(s.num_dofs(), 729);
        let s = FeSpace::scalar_dirichlet(m.clone(), 1, false).unwrap();
        assert_eq!((s.num_dofs(), s.num_free()), (125, 27));
        let v = FeSpace::vector_tangential(m).unwrap();
        assert_eq!(v.num_dofs(), 3 * 729);
    }

    #[test]
    fn rejects_bad_order_and_bc() {
        let m = mesh(1);
        assert!(FeSpace::new(m.clone(), FieldKind::ScalarReal, 3, BoundaryCondition::None).is_err());
        assert!(FeSpace::new(m, FieldKind::ScalarReal, 1, BoundaryCondition::Tangential).is_err());
    }

    #[test]
    fn p2_nodes_sit_at_element_nodes() {
        let m = mesh(2);
        let s = FeSpace::new(m.clone(), FieldKind::ScalarReal, 2, BoundaryCondition::None).unwrap();
        for t in 0..m.num_tets() {
            let geo = ElementGeometry::new(&m, t);
            for (a, &node) in s.element_nodes(t).iter().enumerate() {
                let x = geo.point(&s.element().nodes()[a]);
                let y = s.node_coordinates(node);
                for c in 0..3 {
                    assert!((x[c] - y[c]).abs() < 1e-15);
                }
            }
        }
        for v in 0..m.num_vertices() {
            assert_eq!(s.node_coordinates(s.vertex_node(v)), m.vertices()[v]);
        }
    }

    #[test]
    fn tangential_constraint_pattern() {
        let m = mesh(2);
        let s = FeSpace::vector_tangential(m).unwrap();
        for node in 0..s.num_nodes() {
            let x = s.node_coordinates(node);
            let on: Vec<usize> = (0..3).filter(|&a| x[a] == 0.0 || x[a] == 1.0).collect();
            for c in 0..3 {
                let want = match on.len() {
                    0 => false,
                    1 => c != on[0],
                    _ => true,
                };
                assert_eq!(s.is_constrained(3 * node + c), want, "node {node} comp {c}");
            }
        }
    }

    #[test]
    fn constants_are_reproduced() {
        let m = mesh(3);
        for order in [1, 2] {
            let s = Arc::new(FeSpace::new(m.clone(), FieldKind::ScalarReal, order, BoundaryCondition::None).unwrap());
            let u = interpolate_scalar(&s, |_| 1.0).unwrap();
            assert!(u.coeffs().iter().all(|&c| c == 1.0));
        }
        let v = Arc::new(FeSpace::new(m.clone(), FieldKind::Vector3, 2, BoundaryCondition::None).unwrap());
        let u = interpolate_vector(&v, |_| [1.0, 0.0, 0.0]).unwrap();
        for node in 0..v.num_nodes() {
            assert_eq!(&u.coeffs()[3 * node..3 * node + 3], &[1.0, 0.0, 0.0]);
        }
        let t = Arc::new(FeSpace::vector_tangential(m).unwrap());
        let z = interpolate_vector(&t, |_| [0.0; 3]).unwrap();
        assert!(z.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn non_finite_values_report_the_node() {
        let s = Arc::new(FeSpace::new(mesh(1), FieldKind::ScalarReal, 1, BoundaryCondition::None).unwrap());
        let err = interpolate_scalar(&s, |x: [f64; 3]| if x == [1.0, 1.0, 1.0] { f64::NAN } else { 0.0 }).unwrap_err();
        match err {
            FeError::Evaluation { x } => assert_eq!(x, [1.0, 1.0, 1.0]),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn complex_interpolation_needs_complex_space() {
        let m = mesh(1);
        let real = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 1, false).unwrap());
        assert!(interpolate_scalar(&real, |_| Complex::new(1.0, 0.0)).is_err());
        let cplx = Arc::new(FeSpace::scalar_dirichlet(m, 1, true).unwrap());
        let u = interpolate_scalar(&cplx, |_| Complex::new(1.0, 2.0)).unwrap();
        // every node of N=1 lies on the boundary
        assert!(u.coeffs().iter().all(|c| *c == Complex::new(0.0, 0.0)));
    }
}
