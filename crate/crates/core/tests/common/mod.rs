//! Independent oracles shared by the integration tests: finite-difference
//! stencils, element-by-element quadrature of FE expressions, random fields.
#![allow(dead_code)]

use msc_core::fespace::{ElementGeometry, FeFunction, FeSpace, QuadratureRule, VectorFunction};
use msc_core::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.gen(), rng.gen(), rng.gen()]
}

/// Random point on a random face of the unit cube, with the face axis.
pub fn random_boundary_point(rng: &mut ChaCha8Rng) -> ([f64; 3], usize) {
    let mut x = random_point(rng);
    let axis = rng.gen_range(0..3);
    x[axis] = if rng.gen::<bool>() { 1.0 } else { 0.0 };
    (x, axis)
}

pub fn random_complex_field(space: &Arc<FeSpace<f64>>, rng: &mut ChaCha8Rng) -> FeFunction<f64, Complex64> {
    let c = (0..space.num_dofs())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut u = FeFunction::from_coeffs(space.clone(), c).unwrap();
    u.apply_constraints();
    u
}

pub fn random_real_field(space: &Arc<FeSpace<f64>>, rng: &mut ChaCha8Rng) -> FeFunction<f64, f64> {
    let c = (0..space.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut u = FeFunction::from_coeffs(space.clone(), c).unwrap();
    u.apply_constraints();
    u
}

/// Value and gradient of a complex scalar FE field at barycentric point `l`
/// of element `t`.
pub fn eval_complex(
    u: &FeFunction<f64, Complex64>,
    t: usize,
    geo: &ElementGeometry<f64>,
    l: &[f64; 4],
) -> (Complex64, [Complex64; 3]) {
    let space = u.space();
    let n = space.nodes_per_element();
    let mut val = vec![0.0; n];
    let mut db = vec![[0.0; 4]; n];
    space.element().eval(l, &mut val);
    space.element().eval_dbary(l, &mut db);
    let mut v = Complex64::new(0.0, 0.0);
    let mut g = [Complex64::new(0.0, 0.0); 3];
    for (a, &node) in space.element_nodes(t).iter().enumerate() {
        let c = u.coeffs()[node];
        v += c * val[a];
        let grad = geo.bary_to_gradient(&db[a]);
        for k in 0..3 {
            g[k] += c * grad[k];
        }
    }
    (v, g)
}

/// Value of a vector FE field at barycentric point `l` of element `t`.
pub fn eval_vector(u: &VectorFunction<f64>, t: usize, l: &[f64; 4]) -> [f64; 3] {
    let space = u.space();
    let n = space.nodes_per_element();
    let mut val = vec![0.0; n];
    space.element().eval(l, &mut val);
    let mut v = [0.0; 3];
    for (a, &node) in space.element_nodes(t).iter().enumerate() {
        for c in 0..3 {
            v[c] += val[a] * u.coeffs()[3 * node + c];
        }
    }
    v
}

/// `Σ_K Σ_q w_q f(t, l_q, x_q)` over the mesh of `space`.
pub fn integrate<F>(space: &FeSpace<f64>, rule: &QuadratureRule<f64>, mut f: F) -> Complex64
where
    F: FnMut(usize, &ElementGeometry<f64>, &[f64; 4], [f64; 3]) -> Complex64,
{
    let mesh = space.mesh();
    let mut sum = Complex64::new(0.0, 0.0);
    for t in 0..mesh.num_tets() {
        let geo = ElementGeometry::new(mesh, t);
        let scale = geo.weight_scale();
        for (q, l) in rule.points().iter().enumerate() {
            sum += f(t, &geo, l, geo.point(l)) * (rule.weights()[q] * scale);
        }
    }
    sum
}

/// Fourth-order central first derivative.
pub fn d1<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
pub fn d2<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

/// Partial derivative `∂f/∂x_k` at `x`.
pub fn partial<F: Fn([f64; 3]) -> f64>(f: F, x: [f64; 3], k: usize, h: f64) -> f64 {
    d1(
        |s| {
            let mut y = x;
            y[k] = s;
            f(y)
        },
        x[k],
        h,
    )
}

/// `Δf` at `x` from second differences.
pub fn laplacian<F: Fn([f64; 3]) -> f64>(f: F, x: [f64; 3], h: f64) -> f64 {
    (0..3)
        .map(|k| {
            d2(
                |s| {
                    let mut y = x;
                    y[k] = s;
                    f(y)
                },
                x[k],
                h,
            )
        })
        .sum()
}

/// `|a − b| ≤ tol · max(|b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
