use super::{FeError, FeSpace, FieldKind};
use crate::scalar::{Field, Real};
use num_complex::Complex;
use std::sync::Arc;

/// A coefficient field over the dofs of a space.
#[derive(Debug, Clone)]
pub struct FeFunction<T, E> {
    space: Arc<FeSpace<T>>,
    coeffs: Vec<E>,
}

pub type ScalarFunction<T> = FeFunction<T, T>;
pub type ComplexFunction<T> = FeFunction<T, Complex<T>>;
/// Coefficients of a `Vector3` space, interleaved by component.
pub type VectorFunction<T> = FeFunction<T, T>;

impl<T: Real, E: Field<Real = T>> FeFunction<T, E> {
    pub fn zeros(space: Arc<FeSpace<T>>) -> Self {
        let n = space.num_dofs();
        FeFunction {
            space,
            coeffs: vec![E::zero(); n],
        }
    }

    pub fn from_coeffs(space: Arc<FeSpace<T>>, coeffs: Vec<E>) -> Result<Self, FeError> {
        if coeffs.len() != space.num_dofs() {
            return Err(FeError::Shape(format!(
                "expected {} coefficients, got {}",
                space.num_dofs(),
                coeffs.len()
            )));
        }
        Ok(FeFunction { space, coeffs })
    }

    /// Builds a function from values on the free dofs.
    pub fn from_free(space: Arc<FeSpace<T>>, free: &[E]) -> Result<Self, FeError> {
        if free.len() != space.num_free() {
            return Err(FeError::Shape(format!(
                "expected {} free values, got {}",
                space.num_free(),
                free.len()
            )));
        }
        let coeffs = space.extend(free);
        Ok(FeFunction { space, coeffs })
    }

    pub fn space(&self) -> &Arc<FeSpace<T>> {
        &self.space
    }

    pub fn coeffs(&self) -> &[E] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [E] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<E> {
        self.coeffs
    }

    pub fn free_values(&self) -> Vec<E> {
        self.space.restrict(&self.coeffs)
    }

    /// Resets every constrained dof to its prescribed value.
    pub fn apply_constraints(&mut self) {
        for (c, &fixed) in self.coeffs.iter_mut().zip(self.space.constrained_mask()) {
            if fixed {
                *c = E::zero();
            }
        }
    }

    pub fn constraints_hold(&self) -> bool {
        self.coeffs
            .iter()
            .zip(self.space.constrained_mask())
            .all(|(c, &fixed)| !fixed || *c == E::zero())
    }

    /// Element-local coefficients in local dof order.
    #[inline]
    pub fn gather(&self, t: usize, out: &mut [E]) {
        let comps = self.space.components();
        for (a, &node) in self.space.element_nodes(t).iter().enumerate() {
            for c in 0..comps {
                out[a * comps + c] = self.coeffs[node * comps + c];
            }
        }
    }

    /// Linear combination `alpha * self + beta * other` on the same space.
    pub fn combine(&self, alpha: E, other: &Self, beta: E) -> Self {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        FeFunction {
            space: self.space.clone(),
            coeffs,
        }
    }

    /// Point evaluation of a scalar function; `None` outside the cube.
    pub fn evaluate_at(&self, x: [T; 3]) -> Option<E> {
        if self.space.components() != 1 {
            return None;
        }
        let (t, bary) = self.space.mesh().locate(x)?;
        let n = self.space.nodes_per_element();
        let mut phi = [T::zero(); 10];
        self.space.element().eval(&bary, &mut phi[..n]);
        let nodes = self.space.element_nodes(t);
        Some(
            nodes
                .iter()
                .zip(&phi[..n])
                .map(|(&node, &p)| self.coeffs[node].scale(p))
                .sum(),
        )
    }

    /// Samples a scalar field at the mesh vertices.
    pub fn vertex_values(&self) -> Vec<E> {
        let mesh = self.space.mesh();
        (0..mesh.num_vertices())
            .map(|v| self.coeffs[self.space.vertex_node(v)])
            .collect()
    }
}

impl<T: Real> FeFunction<T, T> {
    /// Point evaluation of a vector function.
    pub fn evaluate_vector_at(&self, x: [T; 3]) -> Option<[T; 3]> {
        if self.space.kind() != FieldKind::Vector3 {
            return None;
        }
        let (t, bary) = self.space.mesh().locate(x)?;
        let n = self.space.nodes_per_element();
        let mut phi = [T::zero(); 10];
        self.space.element().eval(&bary, &mut phi[..n]);
        let mut out = [T::zero(); 3];
        for (&node, &p) in self.space.element_nodes(t).iter().zip(&phi[..n]) {
            for c in 0..3 {
                out[c] += p * self.coeffs[3 * node + c];
            }
        }
        Some(out)
    }

    pub fn vertex_vectors(&self) -> Vec<[T; 3]> {
        let mesh = self.space.mesh();
        (0..mesh.num_vertices())
            .map(|v| {
                let node = self.space.vertex_node(v);
                [
                    self.coeffs[3 * node],
                    self.coeffs[3 * node + 1],
                    self.coeffs[3 * node + 2],
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::{interpolate_scalar, interpolate_vector, BoundaryCondition};
    use super::*;
    use crate::mesh::Mesh;
    use proptest::prelude::*;

    fn space(n: usize, kind: FieldKind, order: usize) -> Arc<FeSpace<f64>> {
        let m = Arc::new(Mesh::unit_cube(n).unwrap());
        Arc::new(FeSpace::new(m, kind, order, BoundaryCondition::None).unwrap())
    }

    #[test]
    fn length_is_checked() {
        let s = space(1, FieldKind::ScalarReal, 1);
        assert!(FeFunction::<f64, f64>::from_coeffs(s.clone(), vec![0.0; 3]).is_err());
        assert!(FeFunction::<f64, f64>::from_free(s, &[0.0; 2]).is_err());
    }

    #[test]
    fn quadratic_is_reproduced_by_p2() {
        let s = space(2, FieldKind::ScalarReal, 2);
        let f = |x: [f64; 3]| x[0] * x[0] + x[1] * x[2];
        let u = interpolate_scalar(&s, f).unwrap();
        for x in [[0.3, 0.2, 0.9], [0.77, 0.01, 0.5]] {
            assert!((u.evaluate_at(x).unwrap() - f(x)).abs() <= 1e-13);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn interpolant_of_reproducible_field_evaluates_exactly(
            x in 0.0f64..=1.0, y in 0.0f64..=1.0, z in 0.0f64..=1.0,
        ) {
            let p1 = space(3, FieldKind::ScalarReal, 1);
            let p2 = space(3, FieldKind::ScalarReal, 2);
            let vec2 = space(2, FieldKind::Vector3, 2);
            let lin = |p: [f64; 3]| 1.0 - 2.0 * p[0] + 0.5 * p[1] + 3.0 * p[2];
            let quad = |p: [f64; 3]| p[0] * p[1] - p[2] * p[2] + 0.25 * p[0];
            let field = |p: [f64; 3]| [p[1] * p[2], p[0] * p[0], 1.0 - p[1]];
            let u1 = interpolate_scalar(&p1, lin).unwrap();
            let u2 = interpolate_scalar(&p2, quad).unwrap();
            let w = interpolate_vector(&vec2, field).unwrap();
            let pt = [x, y, z];
            prop_assert!((u1.evaluate_at(pt).unwrap() - lin(pt)).abs() <= 1e-12);
            prop_assert!((u2.evaluate_at(pt).unwrap() - quad(pt)).abs() <= 1e-12);
            let got = w.evaluate_vector_at(pt).unwrap();
            let want = field(pt);
            for c in 0..3 {
                prop_assert!((got[c] - want[c]).abs() <= 1e-12);
            }
        }
    }
}
