//! Analytic data: the free-evolution initial state and the manufactured
//! solution with its forcings.
//!
//! The printed vector potentials (the `cos(πt)` part of the manufactured `A`
//! and the free-run `A₀`) are not divergence-free as written. With
//! `div_fix = true` the third component is negated, which removes the
//! divergence and keeps `A × n = 0`.

use crate::scalar::Real;
use num_complex::Complex;

pub type Jacobian<T> = [[T; 3]; 3];

/// Pointwise problem data used by the time stepper.
pub trait Problem<T: Real>: Sync {
    fn psi0(&self, x: [T; 3]) -> Complex<T>;
    fn a0(&self, x: [T; 3]) -> [T; 3];
    /// `∂(A₀)_i/∂x_j`
    fn a0_jacobian(&self, x: [T; 3]) -> Jacobian<T>;
    fn a1(&self, x: [T; 3]) -> [T; 3];
    fn a1_jacobian(&self, x: [T; 3]) -> Jacobian<T>;
    fn potential(&self, x: [T; 3]) -> T;

    /// Whether `g`, `f`, `h` are nonzero.
    fn has_forcing(&self) -> bool {
        false
    }
    fn g(&self, _x: [T; 3], _t: T) -> Complex<T> {
        Complex::new(T::zero(), T::zero())
    }
    fn f(&self, _x: [T; 3], _t: T) -> [T; 3] {
        [T::zero(); 3]
    }
    fn h(&self, _x: [T; 3], _t: T) -> T {
        T::zero()
    }
}

#[inline]
fn pi<T: Real>() -> T {
    T::PI()
}

#[inline]
fn sin_k<T: Real>(k: f64, x: T) -> T {
    (T::lit(k) * pi::<T>() * x).sin()
}

#[inline]
fn cos_k<T: Real>(k: f64, x: T) -> T {
    (T::lit(k) * pi::<T>() * x).cos()
}

/// `Π sin(kπx_i)`
fn sine_mode<T: Real>(k: f64, x: [T; 3]) -> T {
    sin_k(k, x[0]) * sin_k(k, x[1]) * sin_k(k, x[2])
}

fn sine_mode_grad<T: Real>(k: f64, x: [T; 3]) -> [T; 3] {
    let s = x.map(|c| sin_k(k, c));
    let c = x.map(|c| cos_k(k, c));
    let kp = T::lit(k) * pi::<T>();
    [
        kp * c[0] * s[1] * s[2],
        kp * s[0] * c[1] * s[2],
        kp * s[0] * s[1] * c[2],
    ]
}

/// Stream-function-style field
/// `(sin2πz(1−cos2πx)sinπy, 0, σ sin2πx(1−cos2πz)sinπy)`, `σ = −1` with the
/// divergence fix, `+1` as printed.
fn swirl<T: Real>(x: [T; 3], sigma: T) -> [T; 3] {
    let (s2x, c2x) = (sin_k(2.0, x[0]), cos_k(2.0, x[0]));
    let (s2z, c2z) = (sin_k(2.0, x[2]), cos_k(2.0, x[2]));
    let sy = sin_k(1.0, x[1]);
    let one = T::one();
    [s2z * (one - c2x) * sy, T::zero(), sigma * s2x * (one - c2z) * sy]
}

fn swirl_jacobian<T: Real>(x: [T; 3], sigma: T) -> Jacobian<T> {
    let (s2x, c2x) = (sin_k(2.0, x[0]), cos_k(2.0, x[0]));
    let (s2z, c2z) = (sin_k(2.0, x[2]), cos_k(2.0, x[2]));
    let (sy, cy) = (sin_k(1.0, x[1]), cos_k(1.0, x[1]));
    let (p, tp) = (pi::<T>(), T::lit(2.0) * pi::<T>());
    let one = T::one();
    let z = T::zero();
    [
        [
            s2z * tp * s2x * sy,
            s2z * (one - c2x) * p * cy,
            tp * c2z * (one - c2x) * sy,
        ],
        [z, z, z],
        [
            sigma * tp * c2x * (one - c2z) * sy,
            sigma * s2x * (one - c2z) * p * cy,
            sigma * s2x * tp * s2z * sy,
        ],
    ]
}

/// `−Δ` of the swirl field.
fn swirl_neg_laplacian<T: Real>(x: [T; 3], sigma: T) -> [T; 3] {
    let (s2x, c2x) = (sin_k(2.0, x[0]), cos_k(2.0, x[0]));
    let (s2z, c2z) = (sin_k(2.0, x[2]), cos_k(2.0, x[2]));
    let sy = sin_k(1.0, x[1]);
    let p2 = pi::<T>() * pi::<T>();
    let (five, nine) = (T::lit(5.0) * p2, T::lit(9.0) * p2);
    [
        five * s2z * sy - nine * s2z * c2x * sy,
        T::zero(),
        sigma * (five * s2x * sy - nine * s2x * c2z * sy),
    ]
}

/// `(cosπx sinπy sinπz, sinπx cosπy sinπz, −2 sinπx sinπy cosπz)`,
/// divergence-free and an eigenfunction of `−Δ` with eigenvalue `3π²`.
fn cell<T: Real>(x: [T; 3]) -> [T; 3] {
    let s = x.map(|c| sin_k(1.0, c));
    let c = x.map(|c| cos_k(1.0, c));
    [
        c[0] * s[1] * s[2],
        s[0] * c[1] * s[2],
        T::lit(-2.0) * s[0] * s[1] * c[2],
    ]
}

fn cell_jacobian<T: Real>(x: [T; 3]) -> Jacobian<T> {
    let s = x.map(|c| sin_k(1.0, c));
    let c = x.map(|c| cos_k(1.0, c));
    let p = pi::<T>();
    let m2 = T::lit(-2.0) * p;
    [
        [-p * s[0] * s[1] * s[2], p * c[0] * c[1] * s[2], p * c[0] * s[1] * c[2]],
        [p * c[0] * c[1] * s[2], -p * s[0] * s[1] * s[2], p * s[0] * c[1] * c[2]],
        [
            m2 * c[0] * s[1] * c[2],
            m2 * s[0] * c[1] * c[2],
            -m2 * s[0] * s[1] * s[2],
        ],
    ]
}

fn scale3<T: Real>(a: [T; 3], s: T) -> [T; 3] {
    a.map(|v| v * s)
}

fn add3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale_jac<T: Real>(j: Jacobian<T>, s: T) -> Jacobian<T> {
    j.map(|r| r.map(|v| v * s))
}

fn add_jac<T: Real>(a: Jacobian<T>, b: Jacobian<T>) -> Jacobian<T> {
    let mut out = a;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += b[i][j];
        }
    }
    out
}

/// `∇×A` from the Jacobian.
pub fn curl_from_jacobian<T: Real>(j: &Jacobian<T>) -> [T; 3] {
    [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
}

/// `∇·A` from the Jacobian.
pub fn div_from_jacobian<T: Real>(j: &Jacobian<T>) -> T {
    j[0][0] + j[1][1] + j[2][2]
}

/// Free-evolution data: two-mode sine wave function, swirl potential of
/// amplitude 5, `A₁ = 0`, constant potential `V = 5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeEvolution {
    pub div_fix: bool,
}

impl FreeEvolution {
    pub const AMPLITUDE: f64 = 5.0;
    pub const POTENTIAL: f64 = 5.0;

    pub fn new(div_fix: bool) -> Self {
        FreeEvolution { div_fix }
    }

    fn sigma<T: Real>(&self) -> T {
        if self.div_fix {
            -T::one()
        } else {
            T::one()
        }
    }

    pub fn grad_psi0<T: Real>(&self, x: [T; 3]) -> [Complex<T>; 3] {
        let two = T::lit(2.0);
        let g = add3(scale3(sine_mode_grad(1.0, x), two), scale3(sine_mode_grad(2.0, x), two));
        g.map(|v| Complex::new(v, T::zero()))
    }
}

impl<T: Real> Problem<T> for FreeEvolution {
    fn psi0(&self, x: [T; 3]) -> Complex<T> {
        let two = T::lit(2.0);
        Complex::new(two * sine_mode(1.0, x) + two * sine_mode(2.0, x), T::zero())
    }

    fn a0(&self, x: [T; 3]) -> [T; 3] {
        scale3(swirl(x, self.sigma()), T::lit(Self::AMPLITUDE))
    }

    fn a0_jacobian(&self, x: [T; 3]) -> Jacobian<T> {
        scale_jac(swirl_jacobian(x, self.sigma()), T::lit(Self::AMPLITUDE))
    }

    fn a1(&self, _x: [T; 3]) -> [T; 3] {
        [T::zero(); 3]
    }

    fn a1_jacobian(&self, _x: [T; 3]) -> Jacobian<T> {
        [[T::zero(); 3]; 3]
    }

    fn potential(&self, _x: [T; 3]) -> T {
        T::lit(Self::POTENTIAL)
    }
}

/// Manufactured solution
/// `Ψ = 5 e^{iπt} Π sin2πx_i`,
/// `A = sin(πt) cell + cos(πt) swirl`,
/// `φ = 4 sin(πt) Π x_i(1−x_i) + cos(πt) Π sinπx_i`,
/// with `V = |x|²/2` and the forcings that make it exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub div_fix: bool,
}

impl ManufacturedSolution {
    pub const PSI_AMPLITUDE: f64 = 5.0;
    pub const FINAL_TIME: f64 = 2.0;

    pub fn new(div_fix: bool) -> Self {
        ManufacturedSolution { div_fix }
    }

    fn sigma<T: Real>(&self) -> T {
        if self.div_fix {
            -T::one()
        } else {
            T::one()
        }
    }

    fn phase<T: Real>(t: T) -> Complex<T> {
        let a = pi::<T>() * t;
        Complex::new(a.cos(), a.sin()).scale(T::lit(Self::PSI_AMPLITUDE))
    }

    pub fn psi<T: Real>(&self, x: [T; 3], t: T) -> Complex<T> {
        Self::phase(t).scale(sine_mode(2.0, x))
    }

    pub fn grad_psi<T: Real>(&self, x: [T; 3], t: T) -> [Complex<T>; 3] {
        let p = Self::phase(t);
        sine_mode_grad(2.0, x).map(|g| p.scale(g))
    }

    pub fn psi_t<T: Real>(&self, x: [T; 3], t: T) -> Complex<T> {
        self.psi(x, t) * Complex::new(T::zero(), pi::<T>())
    }

    pub fn a<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        let (s, c) = ((pi::<T>() * t).sin(), (pi::<T>() * t).cos());
        add3(scale3(cell(x), s), scale3(swirl(x, self.sigma()), c))
    }

    pub fn a_jacobian<T: Real>(&self, x: [T; 3], t: T) -> Jacobian<T> {
        let (s, c) = ((pi::<T>() * t).sin(), (pi::<T>() * t).cos());
        add_jac(
            scale_jac(cell_jacobian(x), s),
            scale_jac(swirl_jacobian(x, self.sigma()), c),
        )
    }

    pub fn curl_a<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        curl_from_jacobian(&self.a_jacobian(x, t))
    }

    pub fn div_a<T: Real>(&self, x: [T; 3], t: T) -> T {
        div_from_jacobian(&self.a_jacobian(x, t))
    }

    pub fn a_t<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        let p = pi::<T>();
        let (s, c) = ((p * t).sin(), (p * t).cos());
        add3(scale3(cell(x), p * c), scale3(swirl(x, self.sigma()), -p * s))
    }

    pub fn a_t_jacobian<T: Real>(&self, x: [T; 3], t: T) -> Jacobian<T> {
        let p = pi::<T>();
        let (s, c) = ((p * t).sin(), (p * t).cos());
        add_jac(
            scale_jac(cell_jacobian(x), p * c),
            scale_jac(swirl_jacobian(x, self.sigma()), -p * s),
        )
    }

    pub fn a_tt<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        let p = pi::<T>();
        scale3(self.a(x, t), -p * p)
    }

    /// `∇×∇×A = ∇(∇·A) − ΔA`; the gradient part vanishes only with the fix.
    pub fn curl_curl_a<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        let p = pi::<T>();
        let (s, c) = ((p * t).sin(), (p * t).cos());
        let lap = add3(
            scale3(cell(x), T::lit(3.0) * p * p * s),
            scale3(swirl_neg_laplacian(x, self.sigma()), c),
        );
        add3(lap, scale3(self.grad_div_swirl(x), c))
    }

    /// `∇(∇·swirl)`, zero with the fix.
    fn grad_div_swirl<T: Real>(&self, x: [T; 3]) -> [T; 3] {
        if self.div_fix {
            return [T::zero(); 3];
        }
        // ∇·swirl = 4π sin2πx sin2πz sinπy for σ = +1
        let k = T::lit(4.0) * pi::<T>();
        let (s2x, c2x) = (sin_k(2.0, x[0]), cos_k(2.0, x[0]));
        let (s2z, c2z) = (sin_k(2.0, x[2]), cos_k(2.0, x[2]));
        let (sy, cy) = (sin_k(1.0, x[1]), cos_k(1.0, x[1]));
        let tp = T::lit(2.0) * pi::<T>();
        [
            k * tp * c2x * s2z * sy,
            k * s2x * s2z * pi::<T>() * cy,
            k * s2x * tp * c2z * sy,
        ]
    }

    fn bubble<T: Real>(x: [T; 3]) -> T {
        let one = T::one();
        x[0] * (one - x[0]) * x[1] * (one - x[1]) * x[2] * (one - x[2])
    }

    fn bubble_grad<T: Real>(x: [T; 3]) -> [T; 3] {
        let one = T::one();
        let two = T::lit(2.0);
        let q = x.map(|c| c * (one - c));
        let dq = x.map(|c| one - two * c);
        [dq[0] * q[1] * q[2], q[0] * dq[1] * q[2], q[0] * q[1] * dq[2]]
    }

    fn bubble_neg_laplacian<T: Real>(x: [T; 3]) -> T {
        let one = T::one();
        let q = x.map(|c| c * (one - c));
        T::lit(2.0) * (q[1] * q[2] + q[0] * q[2] + q[0] * q[1])
    }

    pub fn phi<T: Real>(&self, x: [T; 3], t: T) -> T {
        let p = pi::<T>();
        T::lit(4.0) * (p * t).sin() * Self::bubble(x) + (p * t).cos() * sine_mode(1.0, x)
    }

    pub fn grad_phi<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        let p = pi::<T>();
        add3(
            scale3(Self::bubble_grad(x), T::lit(4.0) * (p * t).sin()),
            scale3(sine_mode_grad(1.0, x), (p * t).cos()),
        )
    }

    pub fn phi_t<T: Real>(&self, x: [T; 3], t: T) -> T {
        let p = pi::<T>();
        T::lit(4.0) * p * (p * t).cos() * Self::bubble(x) - p * (p * t).sin() * sine_mode(1.0, x)
    }

    pub fn grad_phi_t<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        let p = pi::<T>();
        add3(
            scale3(Self::bubble_grad(x), T::lit(4.0) * p * (p * t).cos()),
            scale3(sine_mode_grad(1.0, x), -p * (p * t).sin()),
        )
    }

    pub fn neg_laplacian_phi<T: Real>(&self, x: [T; 3], t: T) -> T {
        let p = pi::<T>();
        T::lit(4.0) * (p * t).sin() * Self::bubble_neg_laplacian(x)
            + (p * t).cos() * T::lit(3.0) * p * p * sine_mode(1.0, x)
    }

    /// Current density `(i/2)(Ψ̄∇Ψ − Ψ∇Ψ̄)`; identically zero for this Ψ
    /// but evaluated rather than assumed.
    pub fn current<T: Real>(&self, x: [T; 3], t: T) -> [T; 3] {
        let psi = self.psi(x, t);
        self.grad_psi(x, t).map(|g| -(psi.conj() * g).im)
    }
}

impl<T: Real> Problem<T> for ManufacturedSolution {
    fn psi0(&self, x: [T; 3]) -> Complex<T> {
        self.psi(x, T::zero())
    }

    fn a0(&self, x: [T; 3]) -> [T; 3] {
        self.a(x, T::zero())
    }

    fn a0_jacobian(&self, x: [T; 3]) -> Jacobian<T> {
        self.a_jacobian(x, T::zero())
    }

    fn a1(&self, x: [T; 3]) -> [T; 3] {
        self.a_t(x, T::zero())
    }

    fn a1_jacobian(&self, x: [T; 3]) -> Jacobian<T> {
        self.a_t_jacobian(x, T::zero())
    }

    fn potential(&self, x: [T; 3]) -> T {
        T::lit(0.5) * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    }

    fn has_forcing(&self) -> bool {
        true
    }

    /// `g = −iΨ_t + ½(−ΔΨ + 2iA·∇Ψ + i(∇·A)Ψ + |A|²Ψ) + VΨ + φΨ`
    fn g(&self, x: [T; 3], t: T) -> Complex<T> {
        let p = pi::<T>();
        let psi = self.psi(x, t);
        let grad = self.grad_psi(x, t);
        let a = self.a(x, t);
        let i = Complex::new(T::zero(), T::one());
        let neg_lap = psi.scale(T::lit(12.0) * p * p);
        let a_grad: Complex<T> = grad[0].scale(a[0]) + grad[1].scale(a[1]) + grad[2].scale(a[2]);
        let a2 = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
        let kinetic = neg_lap + i * a_grad.scale(T::lit(2.0)) + i * psi.scale(self.div_a(x, t)) + psi.scale(a2);
        -i * self.psi_t(x, t) + kinetic.scale(T::lit(0.5)) + psi.scale(self.potential(x) + self.phi(x, t))
    }

    /// `f = A_tt + ∇×∇×A + ∇φ_t + J + |Ψ|²A`
    fn f(&self, x: [T; 3], t: T) -> [T; 3] {
        let rho = self.psi(x, t).norm_sqr();
        let mut out = add3(self.a_tt(x, t), self.curl_curl_a(x, t));
        out = add3(out, self.grad_phi_t(x, t));
        out = add3(out, self.current(x, t));
        add3(out, scale3(self.a(x, t), rho))
    }

    /// `h = −Δφ − |Ψ|²`
    fn h(&self, x: [T; 3], t: T) -> T {
        self.neg_laplacian_phi(x, t) - self.psi(x, t).norm_sqr()
    }
}

/// Caller-supplied data without forcing.
pub struct CustomProblem<T> {
    pub psi0: Box<dyn Fn([T; 3]) -> Complex<T> + Sync>,
    pub a0: Box<dyn Fn([T; 3]) -> [T; 3] + Sync>,
    pub a0_jacobian: Box<dyn Fn([T; 3]) -> Jacobian<T> + Sync>,
    pub a1: Box<dyn Fn([T; 3]) -> [T; 3] + Sync>,
    pub a1_jacobian: Box<dyn Fn([T; 3]) -> Jacobian<T> + Sync>,
    pub potential: Box<dyn Fn([T; 3]) -> T + Sync>,
}

impl<T: Real> CustomProblem<T> {
    /// Everything zero.
    pub fn zero() -> Self {
        CustomProblem {
            psi0: Box::new(|_| Complex::new(T::zero(), T::zero())),
            a0: Box::new(|_| [T::zero(); 3]),
            a0_jacobian: Box::new(|_| [[T::zero(); 3]; 3]),
            a1: Box::new(|_| [T::zero(); 3]),
            a1_jacobian: Box::new(|_| [[T::zero(); 3]; 3]),
            potential: Box::new(|_| T::zero()),
        }
    }
}

impl<T: Real> Problem<T> for CustomProblem<T> {
    fn psi0(&self, x: [T; 3]) -> Complex<T> {
        (self.psi0)(x)
    }
    fn a0(&self, x: [T; 3]) -> [T; 3] {
        (self.a0)(x)
    }
    fn a0_jacobian(&self, x: [T; 3]) -> Jacobian<T> {
        (self.a0_jacobian)(x)
    }
    fn a1(&self, x: [T; 3]) -> [T; 3] {
        (self.a1)(x)
    }
    fn a1_jacobian(&self, x: [T; 3]) -> Jacobian<T> {
        (self.a1_jacobian)(x)
    }
    fn potential(&self, x: [T; 3]) -> T {
        (self.potential)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi0_at_center() {
        let d = FreeEvolution::new(true);
        let v: Complex<f64> = d.psi0([0.5, 0.5, 0.5]);
        assert!((v.re - 2.0).abs() < 1e-15 && v.im == 0.0);
        assert_eq!(Problem::<f64>::a1(&d, [0.3, 0.2, 0.9]), [0.0; 3]);
    }

    #[test]
    fn printed_swirl_has_divergence() {
        // ∇·(amplitude·swirl) = amplitude · 4π sin2πx sin2πz sinπy without the fix
        let x = [0.1, 0.4, 0.3];
        let lit = FreeEvolution::new(false);
        let div = div_from_jacobian(&lit.a0_jacobian(x));
        let expected = 5.0
            * 4.0
            * std::f64::consts::PI
            * (2.0 * std::f64::consts::PI * 0.1).sin()
            * (2.0 * std::f64::consts::PI * 0.3).sin()
            * (std::f64::consts::PI * 0.4).sin();
        assert!((div - expected).abs() < 1e-12);
        assert!(div_from_jacobian(&FreeEvolution::new(true).a0_jacobian(x)).abs() < 1e-13);
    }

    #[test]
    fn potential_values() {
        let m = ManufacturedSolution::new(true);
        assert_eq!(Problem::<f64>::potential(&m, [1.0, 1.0, 1.0]), 1.5);
        assert_eq!(
            Problem::<f64>::potential(&FreeEvolution::new(true), [0.2, 0.1, 0.0]),
            5.0
        );
    }

    #[test]
    fn current_vanishes_for_single_phase() {
        let m = ManufacturedSolution::new(true);
        for t in [0.0, 0.3, 1.7] {
            let j = m.current([0.2, 0.7, 0.45], t);
            assert!(j.iter().all(|v: &f64| v.abs() < 1e-12));
        }
    }

    #[test]
    fn f32_instantiation() {
        let m = ManufacturedSolution::new(true);
        let g: Complex<f32> = m.g([0.25f32, 0.5, 0.75], 0.5);
        assert!(g.re.is_finite() && g.im.is_finite());
    }
}
