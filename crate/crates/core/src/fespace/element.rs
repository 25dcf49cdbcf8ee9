//! Lagrange reference elements of order 1 and 2 on the tetrahedron, and the
//! affine element geometry.
//!
//! Basis functions are written in barycentric coordinates `λ0..λ3`. Local
//! node order: the four vertices, then the edge midpoints in [`EDGES`] order.

use super::quadrature::QuadratureRule;
use crate::mesh::Mesh;
use crate::scalar::Real;

/// Local vertex pairs of the six tet edges.
pub const EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

#[derive(Debug, Clone)]
pub struct ReferenceElement<T> {
    order: usize,
    nodes: Vec<[T; 4]>,
}

impl<T: Real> ReferenceElement<T> {
    /// Panics unless `order` is 1 or 2; callers validate first.
    pub fn new(order: usize) -> Self {
        assert!(order == 1 || order == 2, "unsupported element order {order}");
        let (o, l, h) = (T::zero(), T::one(), T::lit(0.5));
        let mut nodes = vec![[l, o, o, o], [o, l, o, o], [o, o, l, o], [o, o, o, l]];
        if order == 2 {
            for &(a, b) in EDGES.iter() {
                let mut p = [o; 4];
                p[a] = h;
                p[b] = h;
                nodes.push(p);
            }
        }
        ReferenceElement { order, nodes }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Barycentric coordinates of the Lagrange nodes.
    pub fn nodes(&self) -> &[[T; 4]] {
        &self.nodes
    }

    pub fn eval(&self, l: &[T; 4], out: &mut [T]) {
        match self.order {
            1 => out[..4].copy_from_slice(l),
            _ => {
                let two = T::lit(2.0);
                let four = T::lit(4.0);
                for i in 0..4 {
                    out[i] = l[i] * (two * l[i] - T::one());
                }
                for (e, &(a, b)) in EDGES.iter().enumerate() {
                    out[4 + e] = four * l[a] * l[b];
                }
            }
        }
    }

    /// Partial derivatives of every basis function with respect to the four
    /// barycentric coordinates.
    pub fn eval_dbary(&self, l: &[T; 4], out: &mut [[T; 4]]) {
        let z = T::zero();
        match self.order {
            1 => {
                for i in 0..4 {
                    out[i] = [z; 4];
                    out[i][i] = T::one();
                }
            }
            _ => {
                let four = T::lit(4.0);
                for i in 0..4 {
                    out[i] = [z; 4];
                    out[i][i] = four * l[i] - T::one();
                }
                for (e, &(a, b)) in EDGES.iter().enumerate() {
                    out[4 + e] = [z; 4];
                    out[4 + e][a] = four * l[b];
                    out[4 + e][b] = four * l[a];
                }
            }
        }
    }

    /// Basis values and barycentric derivatives at every point of a rule.
    pub fn tabulate(&self, rule: &QuadratureRule<T>) -> Tabulation<T> {
        let n = self.num_nodes();
        let mut values = Vec::with_capacity(rule.len());
        let mut dbary = Vec::with_capacity(rule.len());
        for p in rule.points() {
            let mut v = vec![T::zero(); n];
            let mut d = vec![[T::zero(); 4]; n];
            self.eval(p, &mut v);
            self.eval_dbary(p, &mut d);
            values.push(v);
            dbary.push(d);
        }
        Tabulation {
            values,
            dbary,
            weights: rule.weights().to_vec(),
            points: rule.points().to_vec(),
        }
    }
}

/// Basis data of one element type at the points of one quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulation<T> {
    /// `values[q][a]`
    pub values: Vec<Vec<T>>,
    /// `dbary[q][a][m] = ∂N_a/∂λ_m`
    pub dbary: Vec<Vec<[T; 4]>>,
    pub weights: Vec<T>,
    pub points: Vec<[T; 4]>,
}

impl<T: Real> Tabulation<T> {
    pub fn num_points(&self) -> usize {
        self.weights.len()
    }

    /// Physical gradients of all basis functions at point `q`.
    #[inline]
    pub fn gradients(&self, q: usize, geo: &ElementGeometry<T>, out: &mut [[T; 3]]) {
        for (g, d) in out.iter_mut().zip(&self.dbary[q]) {
            *g = geo.bary_to_gradient(d);
        }
    }
}

/// Affine map data of a single tetrahedron.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry<T> {
    pub vertices: [[T; 3]; 4],
    /// Physical gradients of the barycentric coordinates.
    pub grad_lambda: [[T; 3]; 4],
    pub volume: T,
}

impl<T: Real> ElementGeometry<T> {
    pub fn new(mesh: &Mesh<T>, t: usize) -> Self {
        Self::from_vertices(mesh.tet_vertices(t))
    }

    pub fn from_vertices(v: [[T; 3]; 4]) -> Self {
        // J has columns v_i - v_0; rows of J^{-1} are the gradients of λ_1..λ_3.
        let mut j = [[T::zero(); 3]; 3];
        for c in 0..3 {
            for r in 0..3 {
                j[r][c] = v[c + 1][r] - v[0][r];
            }
        }
        let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        let inv_det = T::one() / det;
        let cof = |r0: usize, c0: usize, r1: usize, c1: usize| j[r0][c0] * j[r1][c1] - j[r0][c1] * j[r1][c0];
        // inverse = adjugate / det
        let inv = [
            [cof(1, 1, 2, 2), -cof(0, 1, 2, 2), cof(0, 1, 1, 2)],
            [-cof(1, 0, 2, 2), cof(0, 0, 2, 2), -cof(0, 0, 1, 2)],
            [cof(1, 0, 2, 1), -cof(0, 0, 2, 1), cof(0, 0, 1, 1)],
        ];
        let mut grad_lambda = [[T::zero(); 3]; 4];
        for i in 0..3 {
            for c in 0..3 {
                grad_lambda[i + 1][c] = inv[i][c] * inv_det;
            }
        }
        for c in 0..3 {
            grad_lambda[0][c] = -(grad_lambda[1][c] + grad_lambda[2][c] + grad_lambda[3][c]);
        }
        ElementGeometry {
            vertices: v,
            grad_lambda,
            volume: det / T::lit(6.0),
        }
    }

    /// Jacobian scaling between reference weights (volume 1/6) and physical
    /// integrals.
    #[inline]
    pub fn weight_scale(&self) -> T {
        self.volume * T::lit(6.0)
    }

    #[inline]
    pub fn point(&self, l: &[T; 4]) -> [T; 3] {
        let mut x = [T::zero(); 3];
        for m in 0..4 {
            for c in 0..3 {
                x[c] += l[m] * self.vertices[m][c];
            }
        }
        x
    }

    #[inline]
    pub fn bary_to_gradient(&self, d: &[T; 4]) -> [T; 3] {
        let mut g = [T::zero(); 3];
        for m in 0..4 {
            for c in 0..3 {
                g[c] += d[m] * self.grad_lambda[m][c];
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_property() {
        for order in [1, 2] {
            let el = ReferenceElement::<f64>::new(order);
            let n = el.num_nodes();
            let mut v = vec![0.0; n];
            for (j, node) in el.nodes().iter().enumerate() {
                el.eval(node, &mut v);
                for (i, &vi) in v.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((vi - want).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_at_quadrature_points() {
        let rule = QuadratureRule::<f64>::degree6();
        for order in [1, 2] {
            let el = ReferenceElement::<f64>::new(order);
            let tab = el.tabulate(&rule);
            for q in 0..tab.num_points() {
                let s: f64 = tab.values[q].iter().sum();
                assert!((s - 1.0).abs() <= 1e-14);
                // the physical gradient of the sum vanishes
                let geo = ElementGeometry::from_vertices([
                    [0.0, 0.0, 0.0],
                    [1.0, 0.2, 0.0],
                    [0.1, 1.0, 0.3],
                    [0.0, 0.4, 1.0],
                ]);
                let mut g = vec![[0.0; 3]; el.num_nodes()];
                tab.gradients(q, &geo, &mut g);
                for c in 0..3 {
                    assert!(g.iter().map(|x| x[c]).sum::<f64>().abs() <= 1e-13);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let v = [[0.1, 0.0, 0.2], [0.6, 0.1, 0.1], [0.2, 0.7, 0.0], [0.3, 0.2, 0.9]];
        let geo = ElementGeometry::from_vertices(v);
        assert!(geo.volume > 0.0);
        let el = ReferenceElement::<f64>::new(2);
        let l = [0.1, 0.2, 0.3, 0.4];
        let mut d = vec![[0.0; 4]; 10];
        el.eval_dbary(&l, &mut d);
        // barycentric coordinates of a physical point
        let bary = |x: [f64; 3]| {
            let mut out = [0.0; 4];
            for m in 1..4 {
                out[m] = (0..3).map(|c| geo.grad_lambda[m][c] * (x[c] - v[0][c])).sum();
            }
            out[0] = 1.0 - out[1] - out[2] - out[3];
            out
        };
        let x = geo.point(&l);
        let eps = 1e-6;
        for a in 0..10 {
            let g = geo.bary_to_gradient(&d[a]);
            for c in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[c] += eps;
                xm[c] -= eps;
                let mut vp = vec![0.0; 10];
                let mut vm = vec![0.0; 10];
                el.eval(&bary(xp), &mut vp);
                el.eval(&bary(xm), &mut vm);
                let fd = (vp[a] - vm[a]) / (2.0 * eps);
                assert!((fd - g[c]).abs() < 1e-8);
            }
        }
    }
}
