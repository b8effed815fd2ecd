//! Problem definitions and analytic reference solutions.
//!
//! A model is a quadratic Hamiltonian
//! `H(z) = h0 + h1.z + (1/2) z.H'' z` together with one linear Lindblad
//! coupling `L(z) = L0 + grad_L.z` and a value of hbar. The effective
//! complex Hamiltonian `K = H - (i/2)|L|^2` drives both the SSE width flow
//! and the deterministic stretches of quantum-jump trajectories.
//!
//! Two preset models are provided: a harmonic oscillator under position
//! measurement (`L = sqrt(gamma) x`) and a damped harmonic oscillator
//! (`L = sqrt(gamma/2) (x + i p)`), together with their closed-form
//! solutions, which serve as test ground truth only and never feed the
//! simulation paths.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::phase::{Mat2, Vec2};
use crate::{CMat2, CVec2, RMat2, RVec2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ModelError {
    /// `chi` is undefined for a constant Lindbladian: the jump is a global
    /// phase and carries no dynamics.
    #[error("Lindbladian has zero gradient; ladder parametrisation undefined")]
    ZeroGradient,
    #[error("hbar must be positive, got {0}")]
    NonPositiveHbar(f64),
}

/// `H(z) = h0 + h1.z + (1/2) z.H'' z` with `H''` symmetric.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticHamiltonian {
    pub h2: RMat2,
    pub h1: RVec2,
    pub h0: f64,
}

impl QuadraticHamiltonian {
    pub fn new(h2: RMat2, h1: RVec2, h0: f64) -> Self {
        QuadraticHamiltonian { h2: h2.symmetrize(), h1, h0 }
    }

    /// Harmonic oscillator `H = (omega/2)(p^2 + x^2)`.
    pub fn harmonic(omega: f64) -> Self {
        QuadraticHamiltonian::new(Mat2::diag(omega, omega), Vec2::zero(), 0.0)
    }

    /// Gradient of `H` at `z`.
    pub fn grad(&self, z: &RVec2) -> RVec2 {
        self.h2.mul_vec(z) + self.h1
    }

    pub fn value(&self, z: &RVec2) -> f64 {
        self.h0 + self.h1.dot(z) + 0.5 * z.dot(&self.h2.mul_vec(z))
    }
}

/// `L(z) = L0 + grad.z` with complex constant gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearLindbladian {
    pub grad: CVec2,
    pub l0: C64,
}

impl LinearLindbladian {
    pub fn new(grad: CVec2, l0: C64) -> Self {
        LinearLindbladian { grad, l0 }
    }

    /// Position measurement, `L = sqrt(gamma) x`.
    pub fn position(gamma: f64) -> Self {
        LinearLindbladian::new(
            Vec2::new(C64::new(gamma.sqrt(), 0.0), C64::new(0.0, 0.0)),
            C64::new(0.0, 0.0),
        )
    }

    /// Radiative decay, `L = sqrt(gamma/2) (x + i p)`.
    pub fn lowering(gamma: f64) -> Self {
        let s = (gamma / 2.0).sqrt();
        LinearLindbladian::new(Vec2::new(C64::new(s, 0.0), C64::new(0.0, s)), C64::new(0.0, 0.0))
    }

    pub fn value(&self, z: &RVec2) -> C64 {
        self.l0 + self.grad.dot(&z.to_complex())
    }

    /// `grad_L grad_Lbar^T` (complex rank-one matrix).
    pub fn grad_outer(&self) -> CMat2 {
        Mat2::outer(&self.grad, &self.grad.conj())
    }

    /// `Re(grad_L grad_Lbar^T)`, symmetric positive semidefinite.
    pub fn gamma_re(&self) -> RMat2 {
        self.grad_outer().re()
    }

    /// `Im(grad_L grad_Lbar^T)`, antisymmetric.
    pub fn gamma_im(&self) -> RMat2 {
        self.grad_outer().im()
    }

    /// `grad_Lbar . Omega grad_L`, purely imaginary.
    pub fn grad_omega_grad(&self) -> C64 {
        self.grad.conj().dot(&self.grad.omega())
    }

    pub fn is_trivial(&self) -> bool {
        self.grad.max_abs() == 0.0 && self.l0.norm() == 0.0
    }
}

/// `K(z) = (1/2) z.K2 z + k1.Omega z + k0`, plus the constant Weyl-ordering
/// term split off the propagator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EffectiveHamiltonian {
    pub k2: CMat2,
    pub k1: CVec2,
    pub k0: C64,
    /// `-(i hbar / 4) grad_Lbar . Omega grad_L`; enters the propagated-state
    /// phase as `alpha += -i * trace_correction * t`.
    pub trace_correction: C64,
}

impl EffectiveHamiltonian {
    /// Additive rate on the complex action: `alpha(t) = action(t) + alpha_rate t`.
    pub fn alpha_rate(&self) -> C64 {
        C64::new(0.0, -1.0) * self.trace_correction
    }

    /// Generator of the complexified linearised flow, `Omega K2`.
    pub fn flow_generator(&self) -> CMat2 {
        Mat2::omega() * self.k2
    }

    /// `K(z)` for complex phase-space arguments.
    pub fn value(&self, z: &CVec2) -> C64 {
        let half = C64::new(0.5, 0.0);
        half * z.dot(&self.k2.mul_vec(z)) + self.k1.dot(&z.omega()) + self.k0
    }
}

/// A model instance: Hamiltonian, Lindbladian and hbar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub hamiltonian: QuadraticHamiltonian,
    pub lindbladian: LinearLindbladian,
    pub hbar: f64,
}

impl ModelConfig {
    pub fn new(
        hamiltonian: QuadraticHamiltonian,
        lindbladian: LinearLindbladian,
        hbar: f64,
    ) -> Result<Self, ModelError> {
        if hbar <= 0.0 {
            return Err(ModelError::NonPositiveHbar(hbar));
        }
        Ok(ModelConfig { hamiltonian, lindbladian, hbar })
    }

    /// Harmonic oscillator with position measurement, `L = sqrt(gamma) x`.
    pub fn position_measurement(omega: f64, gamma: f64, hbar: f64) -> Self {
        ModelConfig {
            hamiltonian: QuadraticHamiltonian::harmonic(omega),
            lindbladian: LinearLindbladian::position(gamma),
            hbar,
        }
    }

    /// Damped harmonic oscillator, `L = sqrt(gamma/2)(x + i p)`.
    pub fn damped_oscillator(omega: f64, gamma: f64, hbar: f64) -> Self {
        ModelConfig {
            hamiltonian: QuadraticHamiltonian::harmonic(omega),
            lindbladian: LinearLindbladian::lowering(gamma),
            hbar,
        }
    }
}

/// Assemble `K = H - (i/2)|L|^2` in the form
/// `(1/2) z.K2 z + k1.Omega z + k0`.
///
/// `|L(z)|^2 = |L0|^2 + 2 Re(L0bar grad_L).z + z.Re(grad_L grad_Lbar^T) z`,
/// so `K2 = H'' - i Re(grad_L grad_Lbar^T)` and the linear/constant parts
/// pick up `-i Re(L0bar grad_L)` and `-(i/2)|L0|^2`.
pub fn build_effective_k(model: &ModelConfig) -> EffectiveHamiltonian {
    let h = &model.hamiltonian;
    let lin = &model.lindbladian;
    let i = C64::new(0.0, 1.0);

    let k2 = h.h2.to_complex() - lin.gamma_re().to_complex().scale(i);

    // Gradient of K at the origin, then k1 = Omega grad (so k1.Omega z = grad.z).
    let re_l0bar_grad = Vec2::new(
        (lin.l0.conj() * lin.grad.q).re,
        (lin.l0.conj() * lin.grad.p).re,
    );
    let grad_k0 = h.h1.to_complex() - re_l0bar_grad.to_complex().scale(i);
    let k1 = grad_k0.omega();

    let k0 = C64::new(h.h0, 0.0) - i * 0.5 * lin.l0.norm_sqr();
    let trace_correction = -i * (model.hbar / 4.0) * lin.grad_omega_grad();

    EffectiveHamiltonian { k2, k1, k0, trace_correction }
}

/// Ladder parametrisation `L = A(l, chi) = (i/sqrt(2 hbar)) l.Omega(z - chi)`.
///
/// Returns `l = -i sqrt(2 hbar) Omega grad_L` and the minimum-norm complex
/// root `chi` of `L(chi) = 0`.
pub fn lindbladian_to_ladder_params(
    lin: &LinearLindbladian,
    hbar: f64,
) -> Result<(CVec2, CVec2), ModelError> {
    let gnorm2 = lin.grad.q.norm_sqr() + lin.grad.p.norm_sqr();
    if gnorm2 == 0.0 {
        return Err(ModelError::ZeroGradient);
    }
    let factor = C64::new(0.0, -1.0) * (2.0 * hbar).sqrt();
    let l = lin.grad.omega().scale(factor);
    // Minimum-norm solution of grad.chi = -L0.
    let chi = lin.grad.conj().scale(-lin.l0 / gnorm2);
    Ok((l, chi))
}

/// Reconstruct `(grad_L, L0)` from ladder parameters; inverse of
/// [`lindbladian_to_ladder_params`].
pub fn ladder_params_to_lindbladian(l: &CVec2, chi: &CVec2, hbar: f64) -> LinearLindbladian {
    let factor = C64::new(0.0, 1.0) / (2.0 * hbar).sqrt();
    let grad = l.omega().scale(-factor);
    let l0 = -factor * l.dot(&chi.omega());
    LinearLindbladian { grad, l0 }
}

/// Closed-form quantities of the position-measurement example.
#[derive(Clone, Copy, Debug)]
pub struct Example1Reference {
    /// `lambda = sqrt(gamma^2 + omega^2)`.
    pub lambda: f64,
    /// `Lambda = sqrt(lambda - omega) + i sqrt(lambda + omega)`.
    pub cap_lambda: C64,
    /// Lindblad covariance matrix at `t` for the squeezed start
    /// `G(0) = diag(zeta, 1/zeta)`. The off-diagonal entry is taken from the
    /// covariance ODE solution; the printed form does not vanish at `t = 0`
    /// and is excluded from golden values.
    pub sigma_lindblad: RMat2,
    /// Complexified linearised flow `S(t)`.
    pub s_flow: CMat2,
    /// SSE covariance fixed point.
    pub sigma_sse_fixed: RMat2,
    /// Prefactor of the large-time decay `N(t) -> N_inf exp(-rate t)`.
    pub n_infty: f64,
    /// `sqrt(omega (lambda - omega) / 2)`.
    pub n_decay_rate: f64,
    /// Fixed point of `M(t)`.
    pub m_infty: C64,
}

/// Closed forms for the harmonic oscillator under position measurement.
pub fn example1_reference(t: f64, omega: f64, gamma: f64, zeta: f64, hbar: f64) -> Example1Reference {
    let lambda = (gamma * gamma + omega * omega).sqrt();
    let cap_lambda = C64::new((lambda - omega).sqrt(), (lambda + omega).sqrt());

    let (s2, c2) = (2.0 * omega * t).sin_cos();
    let lin_growth = (zeta * zeta + 2.0 * gamma * zeta * t + 1.0) / zeta;
    let sq = (zeta * zeta - 1.0) / zeta;
    let dx2 = hbar / 4.0 * (lin_growth - gamma / omega * s2 - sq * c2);
    let dp2 = hbar / 4.0 * (lin_growth + gamma / omega * s2 + sq * c2);
    let dxp = hbar / 4.0 * (gamma / omega * (1.0 - c2) + sq * s2);
    let sigma_lindblad = Mat2::new(dx2, dxp, dxp, dp2);

    // S(t) = cosh(d t) I + sinh(d t)/d * Omega K'' with d = sqrt(omega/2) Lambda.
    let d = cap_lambda * (omega / 2.0).sqrt();
    let dt = d * t;
    let cosh = dt.cosh();
    let sinh = dt.sinh();
    let s_flow = Mat2::new(
        cosh,
        (omega / (2.0 * lambda * lambda)).sqrt() * cap_lambda.conj() * sinh,
        (1.0 / (2.0 * omega)).sqrt() * cap_lambda * sinh,
        cosh,
    );

    let root = (2.0 * omega * (lambda - omega)).sqrt();
    let sigma_sse_fixed = Mat2::new(
        root,
        lambda - omega,
        lambda - omega,
        lambda * (2.0 * (lambda - omega) / omega).sqrt(),
    )
    .scale(hbar / (2.0 * gamma));

    let n_infty = (8.0 * zeta * lambda * omega
        / (2.0 * zeta * omega * (lambda + omega)
            + (zeta * zeta * omega + lambda) * (2.0 * omega * (lambda + omega)).sqrt()))
    .sqrt();
    let n_decay_rate = (omega * (lambda - omega) / 2.0).sqrt();
    let m_infty = C64::new(
        lambda - zeta * zeta * omega,
        -zeta * (2.0 * omega * (lambda - omega)).sqrt(),
    ) / C64::new(
        lambda + zeta * zeta * omega + zeta * (2.0 * omega * (lambda + omega)).sqrt(),
        0.0,
    );

    Example1Reference {
        lambda,
        cap_lambda,
        sigma_lindblad,
        s_flow,
        sigma_sse_fixed,
        n_infty,
        n_decay_rate,
        m_infty,
    }
}

/// Closed-form quantities of the damped-oscillator example.
#[derive(Clone, Copy, Debug)]
pub struct Example2Reference {
    /// Central flow matrix `exp(-gamma t / 2) Rot(omega t)`.
    pub central_flow: RMat2,
    /// Lindblad covariance at `t` for `G(0) = diag(zeta, 1/zeta)`.
    pub sigma_lindblad: RMat2,
    /// SSE covariance at `t` for the same start.
    pub sigma_sse: RMat2,
    /// `f(t) = (zeta^2 + 1) sinh(gamma t) + 2 zeta cosh(gamma t)`.
    pub f: f64,
    /// Complexified linearised flow `S(t)`.
    pub s_flow: CMat2,
    pub n_t: f64,
    pub m_t: f64,
    /// `N(t) -> n_infty_prefactor exp(-gamma t / 2)`.
    pub n_infty_prefactor: f64,
    /// `M(t) -> -(zeta - 1)/(zeta + 1)` (limit of the closed form).
    pub m_infty: f64,
}

/// Closed forms for the damped harmonic oscillator.
pub fn example2_reference(t: f64, omega: f64, gamma: f64, zeta: f64, hbar: f64) -> Example2Reference {
    let (sw, cw) = (omega * t).sin_cos();
    let damp = (-gamma * t / 2.0).exp();
    let central_flow = Mat2::new(cw, sw, -sw, cw).scale(damp);

    let (s2, c2) = (2.0 * omega * t).sin_cos();
    let sq = zeta * zeta - 1.0;
    let e = (-gamma * t).exp();
    let base = hbar / 2.0;
    let amp = hbar * e / (4.0 * zeta);
    let sigma_lindblad = Mat2::new(
        base + amp * ((zeta - 1.0) * (zeta - 1.0) - sq * c2),
        amp * sq * s2,
        amp * sq * s2,
        base + amp * ((zeta - 1.0) * (zeta - 1.0) + sq * c2),
    );

    let (ch, sh) = ((gamma * t).cosh(), (gamma * t).sinh());
    let f = (zeta * zeta + 1.0) * sh + 2.0 * zeta * ch;
    let g = (zeta * zeta + 1.0) * ch + 2.0 * zeta * sh;
    let sigma_sse = Mat2::new(g - sq * c2, sq * s2, sq * s2, g + sq * c2).scale(hbar / (2.0 * f));

    // S(t) = cos(theta) I + sin(theta) Omega with theta = (omega - i gamma/2) t.
    let theta = C64::new(omega, -gamma / 2.0) * t;
    let (ct, st) = (theta.cos(), theta.sin());
    let s_flow = Mat2::new(ct, st, -st, ct);

    let n_t = (2.0 * zeta / f).sqrt();
    let m_t = -sq * sh / f;
    let n_infty_prefactor = 2.0 * zeta.sqrt() / (1.0 + zeta);
    let m_infty = -(zeta - 1.0) / (zeta + 1.0);

    Example2Reference {
        central_flow,
        sigma_lindblad,
        sigma_sse,
        f,
        s_flow,
        n_t,
        m_t,
        n_infty_prefactor,
        m_infty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::hermitian_form;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn effective_k_position_measurement() {
        // K2 = diag(omega - i gamma, omega).
        let (omega, gamma) = (1.0, 0.2);
        let model = ModelConfig::position_measurement(omega, gamma, 1.0);
        let k = build_effective_k(&model);
        assert!((k.k2.m[0][0] - c(omega, -gamma)).norm() < 1e-15);
        assert!((k.k2.m[1][1] - c(omega, 0.0)).norm() < 1e-15);
        assert!(k.k2.m[0][1].norm() < 1e-15 && k.k2.m[1][0].norm() < 1e-15);
        assert!(k.trace_correction.norm() < 1e-15); // real gradient
        assert!(k.k1.max_abs() < 1e-15 && k.k0.norm() < 1e-15);
    }

    #[test]
    fn effective_k_closed_system() {
        let model = ModelConfig::position_measurement(1.3, 0.0, 1.0);
        let k = build_effective_k(&model);
        assert!(k.k2.im().max_abs() == 0.0);
        assert!(k.trace_correction.norm() == 0.0);
    }

    #[test]
    fn effective_k_damped_oscillator() {
        // Re(grad_L grad_Lbar^T) = (gamma/2) I, so K2 = (omega - i gamma/2) I.
        let (omega, gamma) = (1.0, 0.2);
        let model = ModelConfig::damped_oscillator(omega, gamma, 1.0);
        let k = build_effective_k(&model);
        assert!((k.k2.m[0][0] - c(omega, -gamma / 2.0)).norm() < 1e-15);
        assert!((k.k2.m[1][1] - c(omega, -gamma / 2.0)).norm() < 1e-15);
        assert!(k.k2.m[0][1].norm() < 1e-15);
        // grad_Lbar . Omega grad_L = i gamma.
        assert!((model.lindbladian.grad_omega_grad() - c(0.0, gamma)).norm() < 1e-15);
        assert!((k.trace_correction - c(gamma / 4.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn im_k2_negative_semidefinite() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let grad = Vec2::new(
                c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            );
            let lin = LinearLindbladian::new(grad, c(rng.gen_range(-1.0..1.0), 0.3));
            let model = ModelConfig {
                hamiltonian: QuadraticHamiltonian::harmonic(1.0),
                lindbladian: lin,
                hbar: 1.0,
            };
            let k = build_effective_k(&model);
            let im = k.k2.im();
            // Negative semidefinite: trace <= 0 and det >= 0.
            assert!(im.trace() <= 1e-14);
            assert!(im.det() >= -1e-14);
        }
    }

    #[test]
    fn ladder_params_position() {
        let lin = LinearLindbladian::position(0.2);
        let (l, chi) = lindbladian_to_ladder_params(&lin, 1.0).unwrap();
        assert!((l.q).norm() < 1e-15);
        assert!((l.p - c(0.0, (2.0f64 * 0.2).sqrt())).norm() < 1e-15);
        assert!(chi.max_abs() < 1e-15);
    }

    #[test]
    fn ladder_params_lowering_matches_frame() {
        // l is proportional to the standard coherent frame vector (1, i).
        let gamma = 0.2;
        let lin = LinearLindbladian::lowering(gamma);
        let (l, chi) = lindbladian_to_ladder_params(&lin, 1.0).unwrap();
        let a = Vec2::new(c(1.0, 0.0), c(0.0, 1.0));
        let h_par = hermitian_form(&a, &l);
        let h_anti = hermitian_form(&a.conj(), &l);
        assert!((h_par - c(gamma.sqrt(), 0.0)).norm() < 1e-14);
        assert!(h_anti.norm() < 1e-14);
        assert!(chi.max_abs() < 1e-15);
    }

    #[test]
    fn ladder_params_shifted_root() {
        let mut lin = LinearLindbladian::position(0.5);
        lin.l0 = c(0.7, -0.3);
        let (_, chi) = lindbladian_to_ladder_params(&lin, 1.0).unwrap();
        let l_at_chi = lin.l0 + lin.grad.dot(&chi);
        assert!(l_at_chi.norm() < 1e-14);
    }

    #[test]
    fn ladder_params_round_trip() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..200 {
            let grad = Vec2::new(
                c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
            );
            if grad.max_abs() < 0.1 {
                continue;
            }
            let lin =
                LinearLindbladian::new(grad, c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let hbar = rng.gen_range(0.5..2.0);
            let (l, chi) = lindbladian_to_ladder_params(&lin, hbar).unwrap();
            let back = ladder_params_to_lindbladian(&l, &chi, hbar);
            assert!((back.grad - lin.grad).max_abs() < 1e-14);
            assert!((back.l0 - lin.l0).norm() < 1e-14);
        }
    }

    #[test]
    fn ladder_params_zero_gradient_rejected() {
        let lin = LinearLindbladian::new(Vec2::zero(), c(1.0, 0.0));
        assert!(matches!(
            lindbladian_to_ladder_params(&lin, 1.0),
            Err(ModelError::ZeroGradient)
        ));
    }

    #[test]
    fn example1_lambda_printed_value() {
        let r = example1_reference(0.0, 1.0, 0.2, 2.0, 1.0);
        assert!((r.lambda - 26.0f64.sqrt() / 5.0).abs() <= f64::EPSILON);
    }

    #[test]
    fn example1_fixed_point_printed_values() {
        let r = example1_reference(0.0, 1.0, 0.2, 2.0, 1.0);
        assert!((r.sigma_sse_fixed.m[0][0] - 0.4975).abs() < 1e-3);
        assert!((r.sigma_sse_fixed.m[1][1] - 0.5074).abs() < 1e-3);
        assert!((r.sigma_sse_fixed.m[0][1] - 0.0495).abs() < 1e-3);
    }

    #[test]
    fn example1_sigma_initial_condition() {
        let zeta = 2.0;
        let r = example1_reference(0.0, 1.0, 0.2, zeta, 1.0);
        assert!((r.sigma_lindblad.m[0][0] - 0.5 / zeta).abs() < 1e-14);
        assert!((r.sigma_lindblad.m[1][1] - 0.5 * zeta).abs() < 1e-14);
        assert!(r.sigma_lindblad.m[0][1].abs() < 1e-14);
    }

    #[test]
    fn example1_unitary_limit_oscillates() {
        // gamma = 0: S(t) is the rotation and the covariance oscillates at 2 omega.
        let omega = 1.0;
        let r = example1_reference(0.7, omega, 0.0, 2.0, 1.0);
        let rot = Mat2::new((0.7f64).cos(), (0.7f64).sin(), -(0.7f64).sin(), (0.7f64).cos());
        assert!((r.s_flow.re() - rot).max_abs() < 1e-14);
        assert!(r.s_flow.im().max_abs() < 1e-14);
        let period = std::f64::consts::PI / omega;
        let r2 = example1_reference(0.7 + period, omega, 0.0, 2.0, 1.0);
        assert!((r.sigma_lindblad - r2.sigma_lindblad).max_abs() < 1e-12);
    }

    #[test]
    fn example2_sigma_approaches_vacuum() {
        let r = example2_reference(60.0, 1.0, 0.2, 2.0, 1.0);
        let target = Mat2::diag(0.5, 0.5);
        assert!((r.sigma_lindblad - target).max_abs() < 1e-5);
        assert!((r.sigma_sse - target).max_abs() < 1e-5);
    }

    #[test]
    fn example2_initial_frame() {
        for zeta in [1.0, 2.0, 3.5] {
            let r = example2_reference(0.0, 1.0, 0.2, zeta, 1.0);
            assert!((r.n_t - 1.0).abs() < 1e-14);
            assert!(r.m_t.abs() < 1e-14);
            let sigma0 = Mat2::diag(0.5 / zeta, 0.5 * zeta);
            assert!((r.sigma_sse - sigma0).max_abs() < 1e-14);
            assert!((r.sigma_lindblad - sigma0).max_abs() < 1e-14);
        }
    }

    #[test]
    fn example2_m_limit() {
        let r = example2_reference(200.0, 1.0, 0.2, 2.0, 1.0);
        assert!((r.m_t - r.m_infty).abs() < 1e-10);
        assert!((r.m_infty + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn example2_central_solution_satisfies_damped_oscillator_ode() {
        // The central flow solves dz/dt = (omega Omega - gamma/2) z; checked by
        // central differences (equivalently x(t) obeys the second-order damped
        // oscillator equation with roots -gamma/2 +- i omega).
        let (omega, gamma) = (1.0, 0.2);
        let z0 = Vec2::new(2.0, 0.0);
        let dt = 1e-4;
        for &t in &[0.5, 1.0, 3.0, 7.0] {
            let zm = example2_reference(t - dt, omega, gamma, 2.0, 1.0).central_flow.mul_vec(&z0);
            let z = example2_reference(t, omega, gamma, 2.0, 1.0).central_flow.mul_vec(&z0);
            let zp = example2_reference(t + dt, omega, gamma, 2.0, 1.0).central_flow.mul_vec(&z0);
            let deriv = (zp - zm).scale(1.0 / (2.0 * dt));
            let expect = z.omega().scale(omega) - z.scale(gamma / 2.0);
            assert!((deriv - expect).norm() < 1e-6 * (1.0 + z.norm()));
        }
    }
}
