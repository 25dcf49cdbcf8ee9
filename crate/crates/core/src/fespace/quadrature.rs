//! Quadrature on the reference tetrahedron.
//!
//! Points are stored in barycentric coordinates, weights are scaled to the
//! reference volume `1/6`.

use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    points: Vec<[T; 4]>,
    weights: Vec<T>,
    degree: usize,
}

// Symmetric 24-point rule (Keast), parameters refined to full double precision.
const ORBIT4: [(f64, f64); 3] = [
    (0.214_602_871_259_152_03, 0.039_922_750_258_167_492),
    (0.040_673_958_534_611_353, 0.010_077_211_055_320_643),
    (0.322_337_890_142_275_5, 0.055_357_181_543_654_722),
];
const ORBIT12_A: f64 = 0.063_661_001_875_017_525;
const ORBIT12_B: f64 = 0.269_672_331_458_315_8;
const ORBIT12_W: f64 = 27.0 / 560.0;

impl<T: Real> QuadratureRule<T> {
    /// The rule used for all assembly: 24 points, exact for total degree 6.
    pub fn degree6() -> Self {
        let mut points = Vec::with_capacity(24);
        let mut weights = Vec::with_capacity(24);
        for &(a, w) in ORBIT4.iter() {
            let b = 1.0 - 3.0 * a;
            for j in 0..4 {
                let mut p = [a; 4];
                p[j] = b;
                points.push(p);
                weights.push(w);
            }
        }
        let (a, b) = (ORBIT12_A, ORBIT12_B);
        let c = 1.0 - 2.0 * a - b;
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                // positions i, j get b and c; the other two get a
                let mut p = [a; 4];
                p[i] = b;
                p[j] = c;
                points.push(p);
                weights.push(ORBIT12_W);
            }
        }
        QuadratureRule {
            points: points.into_iter().map(|p| p.map(T::lit)).collect(),
            weights: weights.into_iter().map(|w| T::lit(w / 6.0)).collect(),
            degree: 6,
        }
    }

    /// Applies the rule on each of the 8 children of a regular (red)
    /// refinement of the reference tet. Same exactness degree, much smaller
    /// error on non-polynomial or high-degree integrands.
    pub fn subdivided(&self) -> Self {
        let o = T::zero();
        let l = T::one();
        let h = T::lit(0.5);
        let v = [[l, o, o, o], [o, l, o, o], [o, o, l, o], [o, o, o, l]];
        let mid = |a: usize, b: usize| {
            let mut m = [o; 4];
            m[a] = h;
            m[b] = h;
            m
        };
        let (m01, m02, m03, m12, m13, m23) = (mid(0, 1), mid(0, 2), mid(0, 3), mid(1, 2), mid(1, 3), mid(2, 3));
        let children = [
            [v[0], m01, m02, m03],
            [m01, v[1], m12, m13],
            [m02, m12, v[2], m23],
            [m03, m13, m23, v[3]],
            [m01, m02, m03, m13],
            [m01, m02, m12, m13],
            [m02, m03, m13, m23],
            [m02, m12, m13, m23],
        ];
        let eighth = T::lit(0.125);
        let mut points = Vec::with_capacity(8 * self.len());
        let mut weights = Vec::with_capacity(8 * self.len());
        for child in children.iter() {
            for (p, &w) in self.points.iter().zip(&self.weights) {
                let mut q = [o; 4];
                for (m, vert) in child.iter().enumerate() {
                    for c in 0..4 {
                        q[c] += p[m] * vert[c];
                    }
                }
                points.push(q);
                weights.push(w * eighth);
            }
        }
        QuadratureRule {
            points,
            weights,
            degree: self.degree,
        }
    }

    pub fn points(&self) -> &[[T; 4]] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
