mod common;

use common::{close, d1, d2, laplacian, partial, random_boundary_point, random_point, rng};
use msc_core::manufactured::{FreeEvolution, ManufacturedSolution, Problem};
use msc_core::Complex64;

const H1: f64 = 1e-5;
const H2: f64 = 1e-3;
const REL: f64 = 1e-8;

fn ms() -> ManufacturedSolution {
    ManufacturedSolution::new(true)
}

fn samples(seed: u64, n: usize) -> Vec<([f64; 3], f64)> {
    let mut g = rng(seed);
    (0..n)
        .map(|_| {
            let x = random_point(&mut g);
            let t = 2.0 * random_point(&mut g)[0];
            (x, t)
        })
        .collect()
}

#[test]
fn spatial_derivatives_match_finite_differences() {
    let m = ms();
    for (x, t) in samples(1, 50) {
        let grad = m.grad_psi(x, t);
        let jac = m.a_jacobian(x, t);
        let gphi = m.grad_phi(x, t);
        for k in 0..3 {
            let re = partial(|y| m.psi(y, t).re, x, k, H1);
            let im = partial(|y| m.psi(y, t).im, x, k, H1);
            assert!(close(re, grad[k].re, REL) && close(im, grad[k].im, REL), "∇Ψ at {x:?}");
            for i in 0..3 {
                assert!(
                    close(partial(|y| m.a(y, t)[i], x, k, H1), jac[i][k], REL),
                    "∂A{i}/∂x{k}"
                );
            }
            assert!(close(partial(|y| m.phi(y, t), x, k, H1), gphi[k], REL), "∇φ");
        }
        let lap = laplacian(|y| m.phi(y, t), x, H2);
        assert!(
            close(-lap, m.neg_laplacian_phi(x, t), REL),
            "−Δφ: {} vs {}",
            -lap,
            m.neg_laplacian_phi(x, t)
        );
    }
}

#[test]
fn time_derivatives_match_finite_differences() {
    let m = ms();
    for (x, t) in samples(2, 50) {
        let pt = m.psi_t(x, t);
        assert!(close(d1(|s| m.psi(x, s).re, t, H1), pt.re, REL));
        assert!(close(d1(|s| m.psi(x, s).im, t, H1), pt.im, REL));
        let (at, att, atj) = (m.a_t(x, t), m.a_tt(x, t), m.a_t_jacobian(x, t));
        for i in 0..3 {
            assert!(close(d1(|s| m.a(x, s)[i], t, H1), at[i], REL));
            assert!(close(d2(|s| m.a(x, s)[i], t, H2), att[i], REL));
            for k in 0..3 {
                assert!(close(d1(|s| m.a_jacobian(x, s)[i][k], t, H1), atj[i][k], REL));
            }
        }
        assert!(close(d1(|s| m.phi(x, s), t, H1), m.phi_t(x, t), REL));
        let gpt = m.grad_phi_t(x, t);
        for k in 0..3 {
            assert!(close(d1(|s| m.grad_phi(x, s)[k], t, H1), gpt[k], REL));
        }
    }
}

#[test]
fn curl_curl_matches_finite_differences() {
    for fix in [true, false] {
        let m = ManufacturedSolution::new(fix);
        for (x, t) in samples(3, 30) {
            // ∇×∇×A from differences of the analytic curl
            let c = |y: [f64; 3], i: usize| m.curl_a(y, t)[i];
            let fd = [
                partial(|y| c(y, 2), x, 1, H1) - partial(|y| c(y, 1), x, 2, H1),
                partial(|y| c(y, 0), x, 2, H1) - partial(|y| c(y, 2), x, 0, H1),
                partial(|y| c(y, 1), x, 0, H1) - partial(|y| c(y, 0), x, 1, H1),
            ];
            let cc = m.curl_curl_a(x, t);
            for i in 0..3 {
                assert!(close(fd[i], cc[i], REL), "fix {fix}: {fd:?} vs {cc:?}");
            }
        }
    }
}

/// Forcings rebuilt from finite differences of the exact fields.
#[test]
fn forcings_are_consistent_with_the_equations() {
    let m = ms();
    let i = Complex64::new(0.0, 1.0);
    for (x, t) in samples(4, 20) {
        let psi = m.psi(x, t);
        let a = m.a(x, t);
        let rho = psi.norm_sqr();
        let h = laplacian(|y| -m.phi(y, t), x, H2) - rho;
        assert!(
            close(h, Problem::<f64>::h(&m, x, t), REL),
            "h: {h} vs {}",
            Problem::<f64>::h(&m, x, t)
        );

        let lap_psi = Complex64::new(
            laplacian(|y| m.psi(y, t).re, x, H2),
            laplacian(|y| m.psi(y, t).im, x, H2),
        );
        let psi_t = Complex64::new(d1(|s| m.psi(x, s).re, t, H1), d1(|s| m.psi(x, s).im, t, H1));
        let grad: Vec<Complex64> = (0..3)
            .map(|k| {
                Complex64::new(
                    partial(|y| m.psi(y, t).re, x, k, H1),
                    partial(|y| m.psi(y, t).im, x, k, H1),
                )
            })
            .collect();
        let div_a: f64 = (0..3).map(|k| partial(|y| m.a(y, t)[k], x, k, H1)).sum();
        let a_grad: Complex64 = (0..3).map(|k| grad[k] * a[k]).sum();
        let a2: f64 = a.iter().map(|v| v * v).sum();
        let g = -i * psi_t
            + 0.5 * (-lap_psi + 2.0 * i * a_grad + i * div_a * psi + a2 * psi)
            + (Problem::<f64>::potential(&m, x) + m.phi(x, t)) * psi;
        let ga = Problem::<f64>::g(&m, x, t);
        assert!(close(g.re, ga.re, REL) && close(g.im, ga.im, REL), "g: {g} vs {ga}");

        // f = A_tt + ∇(∇·A) − ΔA + ∇φ_t + J + |Ψ|²A, with J = 0 checked separately
        let fa = Problem::<f64>::f(&m, x, t);
        for c in 0..3 {
            let att = d2(|s| m.a(x, s)[c], t, H2);
            let lap = laplacian(|y| m.a(y, t)[c], x, H2);
            let grad_div: f64 = (0..3)
                .map(|k| {
                    d1(
                        |s| {
                            let mut y = x;
                            y[c] = s;
                            m.a_jacobian(y, t)[k][k]
                        },
                        x[c],
                        H1,
                    )
                })
                .sum();
            let phi_t = partial(|y| d1(|s| m.phi(y, s), t, H2), x, c, H2);
            let f = att + grad_div - lap + phi_t + rho * a[c];
            assert!(close(f, fa[c], 1e-7), "f{c}: {f} vs {}", fa[c]);
        }
        assert!(m.current(x, t).iter().all(|j| j.abs() < 1e-12));
    }
}

#[test]
fn free_evolution_derivatives_match_finite_differences() {
    let d = FreeEvolution::new(true);
    let mut g = rng(5);
    for _ in 0..50 {
        let x = random_point(&mut g);
        let jac: [[f64; 3]; 3] = d.a0_jacobian(x);
        let gp = d.grad_psi0::<f64>(x);
        for k in 0..3 {
            assert!(close(
                partial(|y| Problem::<f64>::psi0(&d, y).re, x, k, H1),
                gp[k].re,
                REL
            ));
            for i in 0..3 {
                assert!(close(
                    partial(|y| Problem::<f64>::a0(&d, y)[i], x, k, H1),
                    jac[i][k],
                    REL
                ));
            }
        }
    }
}

#[test]
fn potentials_are_divergence_free_with_fix() {
    let m = ms();
    let d = FreeEvolution::new(true);
    let mut g = rng(6);
    for _ in 0..200 {
        let x = random_point(&mut g);
        let t = 2.0 * random_point(&mut g)[0];
        assert!(m.div_a(x, t).abs() <= 1e-12, "div A = {:e}", m.div_a(x, t));
        let j: [[f64; 3]; 3] = d.a0_jacobian(x);
        assert!((j[0][0] + j[1][1] + j[2][2]).abs() <= 1e-12);
    }
}

#[test]
fn boundary_conditions_hold_exactly() {
    let m = ms();
    let d = FreeEvolution::new(true);
    let mut g = rng(7);
    for _ in 0..200 {
        let (x, axis) = random_boundary_point(&mut g);
        let t = 2.0 * random_point(&mut g)[0];
        assert!(m.psi(x, t).norm() <= 1e-13);
        assert!(m.phi(x, t).abs() <= 1e-13);
        assert!(Problem::<f64>::psi0(&d, x).norm() <= 1e-13);
        // A × n = 0: both tangential components vanish
        let (a, a0): ([f64; 3], [f64; 3]) = (m.a(x, t), d.a0(x));
        for c in (0..3).filter(|&c| c != axis) {
            assert!(
                a[c].abs() <= 1e-13 && a0[c].abs() <= 1e-13,
                "A{c} on face {axis}: {x:?}"
            );
        }
    }
}
