mod common;

use common::{eval_complex, eval_vector, integrate, random_complex_field, random_real_field, rng};
use msc_core::assembly::{
    assemble_current, assemble_form, assemble_form_free, assemble_form_with, assemble_real, DofSet, FormKind,
    FormMatrix, ScalarWeight,
};
use msc_core::fespace::{
    d_form_matrix, d_form_matrix_coupled, interpolate_scalar, interpolate_vector, FeSpace, QuadratureRule,
};
use msc_core::manufactured::ManufacturedSolution;
use msc_core::mesh::Mesh;
use msc_core::{Complex64, ComplexMatrix64, SparseMatrix64};
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

fn mesh(n: usize) -> Arc<Mesh<f64>> {
    Arc::new(Mesh::unit_cube(n).unwrap())
}

fn cplx(a: &[f64]) -> Vec<Complex64> {
    a.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

fn magnetic(a: &msc_core::fespace::VectorFunction<f64>, psi: &FeSpace<f64>) -> ComplexMatrix64 {
    match assemble_form(FormKind::MagneticSchrodinger(a), psi, psi).unwrap() {
        FormMatrix::Complex(m) => m,
        FormMatrix::Real(_) => panic!("magnetic form must be complex"),
    }
}

#[test]
fn magnetic_form_without_potential_is_stiffness() {
    for order in [1, 2] {
        let m = mesh(2);
        let psi = FeSpace::scalar_dirichlet(m.clone(), order, true).unwrap();
        let vec = Arc::new(FeSpace::vector_tangential(m).unwrap());
        let zero = msc_core::fespace::FeFunction::zeros(vec);
        let s = magnetic(&zero, &psi);
        let k = assemble_real(FormKind::ScalarStiffness, &psi, &psi, DofSet::All).unwrap();
        for r in 0..k.nrows() {
            for (c, v) in k.row(r) {
                assert!((s.get(r, c) - Complex64::new(v, 0.0)).norm() <= 1e-13, "({r},{c})");
            }
            for (c, v) in s.row(r) {
                assert!((v - Complex64::new(k.get(r, c), 0.0)).norm() <= 1e-13);
            }
        }
    }
}

/// `B(A;ψ,φ) = (∇ψ,∇φ) + (|A|²ψ,φ) + 2(f(ψ,φ),A)` with `f(ψ,φ) = (i/2)(φ̄∇ψ − ψ∇φ̄)`.
#[test]
fn magnetic_form_splits_into_three_terms() {
    let m = mesh(2);
    let psi_space = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap());
    let vec_space = Arc::new(FeSpace::vector_tangential(m).unwrap());
    let stiff = assemble_real(FormKind::ScalarStiffness, &psi_space, &psi_space, DofSet::All)
        .unwrap()
        .to_complex();
    let rule = QuadratureRule::degree6();
    let mut g = rng(36);
    let i = Complex64::new(0.0, 1.0);
    for trial in 0..10 {
        let a = random_real_field(&vec_space, &mut g);
        let psi = random_complex_field(&psi_space, &mut g);
        let phi = random_complex_field(&psi_space, &mut g);
        let lhs = magnetic(&a, &psi_space).form(phi.coeffs(), psi.coeffs());

        let a_sq = |x: [f64; 3]| {
            let v = a.evaluate_vector_at(x).unwrap();
            v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
        };
        let wmass = assemble_real(
            FormKind::WeightedScalarMass(ScalarWeight::pointwise(&a_sq)),
            &psi_space,
            &psi_space,
            DofSet::All,
        )
        .unwrap()
        .to_complex();
        let gradient_term = stiff.form(phi.coeffs(), psi.coeffs());
        let potential_term = wmass.form(phi.coeffs(), psi.coeffs());
        let current_term = integrate(&psi_space, &rule, |t, geo, l, _| {
            let (u, du) = eval_complex(&psi, t, geo, l);
            let (v, dv) = eval_complex(&phi, t, geo, l);
            let av = eval_vector(&a, t, l);
            let f: Vec<Complex64> = (0..3)
                .map(|k| i * 0.5 * (v.conj() * du[k] - u * dv[k].conj()))
                .collect();
            (0..3).map(|k| f[k] * av[k]).sum::<Complex64>() * 2.0
        });
        let rhs = gradient_term + potential_term + current_term;
        let rel = (lhs - rhs).norm() / rhs.norm();
        assert!(rel <= 1e-11, "triple {trial}: relative gap {rel:e}");

        // the sesquilinear form itself, by direct quadrature
        let direct = integrate(&psi_space, &rule, |t, geo, l, _| {
            let (u, du) = eval_complex(&psi, t, geo, l);
            let (v, dv) = eval_complex(&phi, t, geo, l);
            let av = eval_vector(&a, t, l);
            (0..3)
                .map(|k| (i * du[k] + u * av[k]) * (i * dv[k] + v * av[k]).conj())
                .sum()
        });
        assert!((lhs - direct).norm() <= 1e-11 * direct.norm());
    }
}

#[test]
fn magnetic_matrix_is_hermitian() {
    let m = mesh(2);
    let psi = FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap();
    let vec = Arc::new(FeSpace::vector_tangential(m).unwrap());
    let a = random_real_field(&vec, &mut rng(7));
    let s = magnetic(&a, &psi);
    let sh = s.conj_transpose();
    for r in 0..s.nrows() {
        for (c, v) in s.row(r) {
            assert!((v - sh.get(r, c)).norm() <= 1e-12);
        }
    }
}

struct Forms {
    real: Vec<(&'static str, SparseMatrix64)>,
    magnetic: ComplexMatrix64,
}

fn forms() -> &'static Forms {
    static FORMS: OnceLock<Forms> = OnceLock::new();
    FORMS.get_or_init(|| {
        let m = mesh(2);
        let scalar = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, false).unwrap());
        let psi = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap());
        let vec = Arc::new(FeSpace::vector_tangential(m).unwrap());
        let mut g = rng(11);
        let a = random_real_field(&vec, &mut g);
        let wave = random_complex_field(&psi, &mut g);
        let r = |k| assemble_real(k, &vec, &vec, DofSet::All).unwrap();
        Forms {
            real: vec![
                ("CurlCurl", r(FormKind::CurlCurl)),
                ("DivDiv", r(FormKind::DivDiv)),
                ("VectorMass", r(FormKind::VectorMass)),
                ("VectorStiffness", r(FormKind::VectorStiffness)),
                ("WeightedVectorMass", r(FormKind::WeightedVectorMass(&wave))),
                (
                    "ScalarMass",
                    assemble_real(FormKind::ScalarMass, &scalar, &scalar, DofSet::All).unwrap(),
                ),
            ],
            magnetic: magnetic(&a, &psi),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn forms_are_positive_semidefinite(seed in any::<u64>()) {
        let f = forms();
        let mut g = rng(seed);
        for (name, m) in &f.real {
            let x: Vec<f64> = (0..m.nrows()).map(|_| g.gen_range(-1.0..1.0)).collect();
            let xx: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!(m.form(&x, &x) >= -1e-12 * xx, "{}", name);
        }
        let n = f.magnetic.nrows();
        let z: Vec<Complex64> = (0..n).map(|_| Complex64::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0))).collect();
        let zz: f64 = z.iter().map(|v| v.norm_sqr()).sum();
        let q = f.magnetic.form(&z, &z);
        prop_assert!(q.re >= -1e-12 * zz);
        prop_assert!(q.im.abs() <= 1e-12 * zz.max(q.re));
    }
}

#[test]
fn real_wave_function_carries_no_current() {
    let m = mesh(2);
    let psi_space = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap());
    let vec = FeSpace::vector_tangential(m).unwrap();
    let real = random_real_field(&psi_space, &mut rng(3));
    let phase = Complex64::from_polar(1.0, PI / 4.0);
    for scale in [Complex64::new(1.0, 0.0), phase] {
        let coeffs = cplx(real.coeffs()).into_iter().map(|c| c * scale).collect();
        let psi = msc_core::fespace::FeFunction::from_coeffs(psi_space.clone(), coeffs).unwrap();
        let load = assemble_current(&psi, &vec).unwrap();
        assert!(load.iter().all(|v| v.abs() <= 1e-13));
    }
}

#[test]
fn current_load_matches_quadrature_oracle() {
    let m = mesh(2);
    let psi_space = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap());
    let vec = Arc::new(FeSpace::vector_tangential(m).unwrap());
    let mut g = rng(5);
    let psi = random_complex_field(&psi_space, &mut g);
    let w = random_real_field(&vec, &mut g);
    let load = assemble_current(&psi, &vec).unwrap();
    let paired: f64 = load.iter().zip(w.coeffs()).map(|(a, b)| a * b).sum();
    // 2 f(ψ,ψ) = i(ψ̄∇ψ − ψ∇ψ̄)
    let i = Complex64::new(0.0, 1.0);
    let oracle = integrate(&vec, &QuadratureRule::degree6(), |t, geo, l, _| {
        let (u, du) = eval_complex(&psi, t, geo, l);
        let wv = eval_vector(&w, t, l);
        (0..3).map(|k| i * (u.conj() * du[k] - u * du[k].conj()) * wv[k]).sum()
    });
    assert!(oracle.im.abs() <= 1e-14);
    assert!((2.0 * paired - oracle.re).abs() <= 1e-12 * oracle.re.abs().max(1.0));
}

#[test]
fn manufactured_wave_function_current_vanishes() {
    let m = mesh(4);
    let psi_space = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap());
    let vec = FeSpace::vector_tangential(m).unwrap();
    let exact = ManufacturedSolution::new(true);
    let psi = interpolate_scalar(&psi_space, |x| exact.psi(x, 0.0)).unwrap();
    let load = assemble_current(&psi, &vec).unwrap();
    assert!(load.iter().all(|v| v.abs() <= 1e-11));
}

#[test]
fn curl_div_form_equals_vector_laplacian_on_tangential_fields() {
    for n in [2, 3] {
        let space = FeSpace::vector_tangential(mesh(n)).unwrap();
        let coupled = d_form_matrix_coupled(&space).unwrap();
        let lap = d_form_matrix(&space).unwrap();
        let scale = coupled.max_abs();
        let diff = SparseMatrix64::linear_combination(&[(1.0, &coupled), (-1.0, &lap)]).unwrap();
        assert!(diff.max_abs() <= 1e-13 * scale, "n = {n}: {:e}", diff.max_abs() / scale);
    }
}

/// The sin(πt)-part of the manufactured potential at `t = 1/2`:
/// `‖∇×v‖² = 9π² (∫s²c²c² + ∫c²s²c²) = 9π²/4`, `∇·v = 0`. The energy of
/// the P2 interpolant actually converges at order 4.
#[test]
fn dirichlet_energy_of_cell_field_converges_at_least_quadratically() {
    let exact = ManufacturedSolution::new(true);
    let energy = 9.0 * PI * PI / 4.0;
    let mut errs = Vec::new();
    for n in [2, 4, 8] {
        let space = Arc::new(FeSpace::vector_tangential(mesh(n)).unwrap());
        let v = interpolate_vector(&space, |x| exact.a(x, 0.5)).unwrap();
        let cc = assemble_real(FormKind::CurlCurl, &space, &space, DofSet::All).unwrap();
        let dd = assemble_real(FormKind::DivDiv, &space, &space, DofSet::All).unwrap();
        let d = cc.form(v.coeffs(), v.coeffs()) + dd.form(v.coeffs(), v.coeffs());
        errs.push((d - energy).abs());
    }
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "errors {errs:?}");
    }
}

#[test]
fn free_assembly_is_the_restriction_of_full_assembly() {
    let m = mesh(2);
    let vec = FeSpace::vector_tangential(m.clone()).unwrap();
    let mult = FeSpace::scalar_dirichlet(m, 1, false).unwrap();
    for (kind, test) in [
        (FormKind::VectorMass, &vec),
        (FormKind::CurlCurl, &vec),
        (FormKind::DivPairing, &mult),
    ] {
        let full = assemble_form(kind, &vec, test).unwrap().into_real().unwrap();
        let free = assemble_form_free(kind, &vec, test).unwrap().into_real().unwrap();
        let sel = full.select(
            &|r| test.free_index(r),
            test.num_free(),
            &|c| vec.free_index(c),
            vec.num_free(),
        );
        assert_eq!((free.nrows(), free.ncols()), (test.num_free(), vec.num_free()));
        for r in 0..free.nrows() {
            for c in 0..free.ncols() {
                assert!((free.get(r, c) - sel.get(r, c)).abs() <= 1e-14);
            }
        }
    }
}

#[test]
fn incompatible_spaces_are_rejected() {
    let m = mesh(1);
    let scalar = FeSpace::scalar_dirichlet(m.clone(), 1, false).unwrap();
    let vec = FeSpace::vector_tangential(m).unwrap();
    let other = FeSpace::scalar_dirichlet(mesh(1), 1, false).unwrap();
    assert!(assemble_form(FormKind::CurlCurl, &scalar, &scalar).is_err());
    assert!(assemble_form(FormKind::DivPairing, &scalar, &vec).is_err());
    assert!(assemble_form(FormKind::ScalarMass, &scalar, &other).is_err());
}

#[test]
fn under_integration_flags_follow_degree() {
    let m = mesh(1);
    let psi = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap());
    let vec = Arc::new(FeSpace::vector_tangential(m).unwrap());
    let a = msc_core::fespace::FeFunction::zeros(vec);
    let w = msc_core::fespace::FeFunction::zeros(psi);
    assert!(!FormKind::<f64>::VectorMass.is_under_integrated(2, 2));
    assert!(!FormKind::<f64>::CurlCurl.is_under_integrated(2, 2));
    assert!(FormKind::MagneticSchrodinger(&a).is_under_integrated(2, 2));
    assert!(FormKind::WeightedVectorMass(&w).is_under_integrated(2, 2));
    assert_eq!(FormKind::MagneticSchrodinger(&a).integrand_degree(1, 1), Some(6));
}

/// The degree-6 rule under-integrates the |Ψ|²-weighted vector mass; the
/// effect on the manufactured fields is far below the H¹ discretization error.
#[test]
fn under_integration_effect_is_small() {
    let m = mesh(4);
    let psi_space = Arc::new(FeSpace::scalar_dirichlet(m.clone(), 2, true).unwrap());
    let vec = Arc::new(FeSpace::vector_tangential(m).unwrap());
    let exact = ManufacturedSolution::new(true);
    let psi = interpolate_scalar(&psi_space, |x| exact.psi(x, 0.3)).unwrap();
    let a = interpolate_vector(&vec, |x| exact.a(x, 0.3)).unwrap();
    let coarse = QuadratureRule::degree6();
    let fine = coarse.subdivided();
    let quad = |rule: &QuadratureRule<f64>| {
        let wm = assemble_form_with(FormKind::WeightedVectorMass(&psi), &vec, &vec, DofSet::All, rule)
            .unwrap()
            .into_real()
            .unwrap();
        wm.form(a.coeffs(), a.coeffs())
    };
    let (q6, q_fine) = (quad(&coarse), quad(&fine));
    let rel = (q6 - q_fine).abs() / q_fine;
    assert!(rel < 1e-3, "relative quadrature effect {rel:e}");
}
