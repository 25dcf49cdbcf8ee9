//! Uniform tetrahedral meshes of the unit cube.
//!
//! Every one of the `N³` sub-cubes is split into six tetrahedra sharing the
//! cube's main diagonal (Kuhn subdivision). The diagonal direction is the
//! same in every cube, so the mesh at `2N` refines the mesh at `N`.

mod vtk;

pub use vtk::{write_vtk, NodalField};

use crate::scalar::Real;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Axis permutations, one per Kuhn tetrahedron of a cube.
const KUHN_PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn is_odd_permutation(p: &[usize; 3]) -> bool {
    matches!(p, [0, 2, 1] | [1, 0, 2] | [2, 1, 0])
}

/// One of the six faces of the unit cube: `x[axis] = 0` or `x[axis] = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CubeFace {
    pub axis: usize,
    pub upper: bool,
}

impl CubeFace {
    pub fn all() -> [CubeFace; 6] {
        let mut out = [CubeFace { axis: 0, upper: false }; 6];
        for a in 0..3 {
            out[2 * a] = CubeFace { axis: a, upper: false };
            out[2 * a + 1] = CubeFace { axis: a, upper: true };
        }
        out
    }

    /// Outward normal as a signed axis label, e.g. `-x` or `+z`.
    pub fn label(&self) -> &'static str {
        match (self.axis, self.upper) {
            (0, false) => "-x",
            (0, true) => "+x",
            (1, false) => "-y",
            (1, true) => "+y",
            (2, false) => "-z",
            _ => "+z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFace {
    pub tet: usize,
    /// Index of the tet vertex opposite to this face.
    pub local_face: usize,
    pub side: CubeFace,
}

impl BoundaryFace {
    /// Global vertex indices of the face, in the tet's local order.
    pub fn vertices(&self, tet: &[usize; 4]) -> [usize; 3] {
        let mut out = [0; 3];
        let mut m = 0;
        for (i, &v) in tet.iter().enumerate() {
            if i != self.local_face {
                out[m] = v;
                m += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    n: usize,
    vertices: Vec<[T; 3]>,
    tets: Vec<[usize; 4]>,
    boundary_faces: Vec<BoundaryFace>,
}

impl<T: Real> Mesh<T> {
    /// Builds the Kuhn mesh of `(0,1)³` with `n` subdivisions per axis.
    pub fn unit_cube(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::InvalidArgument(
                "number of subdivisions must be at least 1".into(),
            ));
        }
        let np = n + 1;
        let hn = T::one() / T::from_usize(n).unwrap();
        let mut vertices = Vec::with_capacity(np * np * np);
        for k in 0..np {
            for j in 0..np {
                for i in 0..np {
                    vertices.push([
                        T::from_usize(i).unwrap() * hn,
                        T::from_usize(j).unwrap() * hn,
                        T::from_usize(k).unwrap() * hn,
                    ]);
                }
            }
        }
        let index = |i: usize, j: usize, k: usize| i + np * (j + np * k);

        let mut tets = Vec::with_capacity(6 * n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    for path in KUHN_PATHS.iter() {
                        let mut c = [i, j, k];
                        let v0 = index(c[0], c[1], c[2]);
                        c[path[0]] += 1;
                        let v1 = index(c[0], c[1], c[2]);
                        c[path[1]] += 1;
                        let v2 = index(c[0], c[1], c[2]);
                        let v3 = index(i + 1, j + 1, k + 1);
                        if is_odd_permutation(path) {
                            tets.push([v0, v1, v3, v2]);
                        } else {
                            tets.push([v0, v1, v2, v3]);
                        }
                    }
                }
            }
        }

        let mut mesh = Mesh {
            n,
            vertices,
            tets,
            boundary_faces: Vec::new(),
        };
        mesh.boundary_faces = mesh.classify_boundary();
        Ok(mesh)
    }

    fn classify_boundary(&self) -> Vec<BoundaryFace> {
        let mut faces = Vec::with_capacity(12 * self.n * self.n);
        for (t, tet) in self.tets.iter().enumerate() {
            for local_face in 0..4 {
                let verts: Vec<[usize; 3]> = (0..4)
                    .filter(|&i| i != local_face)
                    .map(|i| self.vertex_lattice(tet[i]))
                    .collect();
                for axis in 0..3 {
                    for (upper, value) in [(false, 0), (true, self.n)] {
                        if verts.iter().all(|v| v[axis] == value) {
                            faces.push(BoundaryFace {
                                tet: t,
                                local_face,
                                side: CubeFace { axis, upper },
                            });
                        }
                    }
                }
            }
        }
        faces
    }

    /// Subdivisions per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> &[[T; 3]] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn boundary_faces(&self) -> &[BoundaryFace] {
        &self.boundary_faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    /// Integer lattice coordinates `(i, j, k)` of a vertex.
    pub fn vertex_lattice(&self, v: usize) -> [usize; 3] {
        let np = self.n + 1;
        [v % np, (v / np) % np, v / (np * np)]
    }

    pub fn tet_vertices(&self, t: usize) -> [[T; 3]; 4] {
        let tet = &self.tets[t];
        [
            self.vertices[tet[0]],
            self.vertices[tet[1]],
            self.vertices[tet[2]],
            self.vertices[tet[3]],
        ]
    }

    pub fn signed_volume(&self, t: usize) -> T {
        let [p0, p1, p2, p3] = self.tet_vertices(t);
        let e = |p: [T; 3]| [p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]];
        let (a, b, c) = (e(p1), e(p2), e(p3));
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
            + a[2] * (b[0] * c[1] - b[1] * c[0]);
        det / T::lit(6.0)
    }

    /// Maximal edge length over all tetrahedra.
    pub fn diameter(&self) -> T {
        let mut h = T::zero();
        for t in 0..self.tets.len() {
            let p = self.tet_vertices(t);
            for a in 0..4 {
                for b in (a + 1)..4 {
                    let d = (0..3)
                        .map(|i| (p[a][i] - p[b][i]).powi(2))
                        .fold(T::zero(), |s, x| s + x)
                        .sqrt();
                    h = h.max(d);
                }
            }
        }
        h
    }

    /// Finds the tetrahedron containing `x` and the barycentric coordinates of
    /// `x` in it (ordered like the tet's vertices). Points outside the closed
    /// unit cube return `None`.
    pub fn locate(&self, x: [T; 3]) -> Option<(usize, [T; 4])> {
        let nf = T::from_usize(self.n).unwrap();
        let tol = T::lit(1e3 * T::EPS);
        let mut cell = [0usize; 3];
        let mut u = [T::zero(); 3];
        for a in 0..3 {
            if !(x[a] >= -tol && x[a] <= T::one() + tol) {
                return None;
            }
            let s = (x[a] * nf).max(T::zero());
            let c = s.floor().to_usize().unwrap_or(0).min(self.n - 1);
            cell[a] = c;
            u[a] = (s - T::from_usize(c).unwrap()).max(T::zero()).min(T::one());
        }
        // Inside a Kuhn cube, the tet is fixed by the ordering of the local
        // coordinates.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&p, &q| u[q].partial_cmp(&u[p]).unwrap().then(p.cmp(&q)));
        let path_index = KUHN_PATHS.iter().position(|p| *p == order).unwrap();
        let t = 6 * (cell[0] + self.n * (cell[1] + self.n * cell[2])) + path_index;
        let l1 = u[order[0]] - u[order[1]];
        let l2 = u[order[1]] - u[order[2]];
        let l3 = u[order[2]];
        let l0 = T::one() - u[order[0]];
        let bary = if is_odd_permutation(&order) {
            [l0, l1, l3, l2]
        } else {
            [l0, l1, l2, l3]
        };
        Some((t, bary))
    }

    /// Number of tets incident to every triangular face, keyed by sorted
    /// vertex triple.
    pub fn face_multiplicities(&self) -> HashMap<[usize; 3], usize> {
        let mut faces = HashMap::new();
        for tet in &self.tets {
            for skip in 0..4 {
                let mut f = [0; 3];
                let mut m = 0;
                for (i, &v) in tet.iter().enumerate() {
                    if i != skip {
                        f[m] = v;
                        m += 1;
                    }
                }
                f.sort_unstable();
                *faces.entry(f).or_insert(0) += 1;
            }
        }
        faces
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_subdivisions_is_rejected() {
        assert!(matches!(Mesh::<f64>::unit_cube(0), Err(MeshError::InvalidArgument(_))));
    }

    #[test]
    fn counts_match_formulas() {
        let m = Mesh::<f64>::unit_cube(1).unwrap();
        assert_eq!((m.num_vertices(), m.num_tets()), (8, 6));
        let m = Mesh::<f64>::unit_cube(4).unwrap();
        assert_eq!((m.num_vertices(), m.num_tets()), (125, 384));
    }

    #[test]
    fn fifty_cell_mesh_counts() {
        let m = Mesh::<f64>::unit_cube(50).unwrap();
        assert_eq!(m.num_vertices(), 132_651);
        assert_eq!(m.num_tets(), 750_000);
    }

    #[test]
    fn diameter_is_cell_diagonal() {
        let s3 = 3f64.sqrt();
        for (n, h) in [(1, s3), (4, s3 / 4.0)] {
            let m = Mesh::<f64>::unit_cube(n).unwrap();
            assert!((m.diameter() - h).abs() < 1e-15);
        }
    }

    #[test]
    fn volumes_positive_and_sum_to_one() {
        for n in 1..=16 {
            let m = Mesh::<f64>::unit_cube(n).unwrap();
            let mut total = 0.0;
            for t in 0..m.num_tets() {
                let v = m.signed_volume(t);
                assert!(v > 0.0);
                total += v;
            }
            // rounding of the summands accumulates linearly in the tet count
            let bound = 4.0 * f64::EPSILON * m.num_tets() as f64;
            assert!((total - 1.0).abs() <= bound, "n={n}: {total}");
        }
    }

    #[test]
    fn face_adjacency_counts() {
        for n in 1..=4 {
            let m = Mesh::<f64>::unit_cube(n).unwrap();
            let faces = m.face_multiplicities();
            let mut boundary = 0;
            for (f, count) in &faces {
                let on_boundary = (0..3).any(|a| {
                    let c: Vec<_> = f.iter().map(|&v| m.vertex_lattice(v)[a]).collect();
                    c.iter().all(|&x| x == 0) || c.iter().all(|&x| x == n)
                });
                if on_boundary {
                    assert_eq!(*count, 1);
                    boundary += 1;
                } else {
                    assert_eq!(*count, 2);
                }
            }
            assert_eq!(boundary, 12 * n * n);
            assert_eq!(m.boundary_faces().len(), boundary);
        }
    }

    #[test]
    fn each_cube_face_has_2n2_triangles() {
        let n = 3;
        let m = Mesh::<f64>::unit_cube(n).unwrap();
        for side in CubeFace::all() {
            let faces: Vec<_> = m.boundary_faces().iter().filter(|f| f.side == side).collect();
            assert_eq!(faces.len(), 2 * n * n, "{}", side.label());
            let value = if side.upper { 1.0 } else { 0.0 };
            for f in faces {
                for v in f.vertices(&m.tets()[f.tet]) {
                    assert_eq!(m.vertices()[v][side.axis], value);
                }
            }
        }
    }

    #[test]
    fn locate_recovers_points() {
        let m = Mesh::<f64>::unit_cube(3).unwrap();
        let pts = [[0.1, 0.7, 0.33], [0.5, 0.5, 0.5], [1.0, 0.0, 0.999], [0.0, 0.0, 0.0]];
        for x in pts {
            let (t, bary) = m.locate(x).unwrap();
            assert!(bary.iter().all(|&l| l >= -1e-14));
            let verts = m.tet_vertices(t);
            for a in 0..3 {
                let y: f64 = (0..4).map(|i| bary[i] * verts[i][a]).sum();
                assert!((y - x[a]).abs() < 1e-14);
            }
        }
        assert!(m.locate([1.5, 0.0, 0.0]).is_none());
    }
}
