//! Parameter-level time evolution.
//!
//! For quadratic Hamiltonians and linear Lindbladians the centre and width
//! matrix close on themselves:
//!
//! * Lindblad: `dz/dt = Omega grad H + Omega Im(L grad_Lbar)` and a Riccati
//!   flow for `G` with closed-form solution through the inverse-width
//!   Lyapunov equation;
//! * SSE: the same deterministic centre drift plus width-dependent noise,
//!   while `G` follows the deterministic non-Hermitian flow solved exactly
//!   by the matrix Moebius action of `S(t) = exp(Omega K'' t)`;
//! * non-Hermitian: centre damped through `G^{-1} Re(Lbar grad_L)`, same `G`
//!   flow as the SSE.
//!
//! The Moebius solution is validated against direct RK4 integration in the
//! test suite, which pins the sign and ordering conventions.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::gaussian::GaussianState;
use crate::model::{build_effective_k, ModelConfig};
use crate::phase::{Mat2, Vec2};
use crate::{CMat2, RMat2, RVec2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("width matrix lost positivity at t = {t}")]
    NonSpdWidth { t: f64 },
    #[error("Moebius denominator singular at t = {t}")]
    SingularDenominator { t: f64 },
    #[error("quadrature failed to resolve the width integrand after {retries} retries")]
    QuadratureFailed { retries: u32 },
    #[error("step size {dt} does not divide the horizon {t_end}")]
    StepMismatch { dt: f64, t_end: f64 },
}

/// Which route produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MethodTag {
    Lindblad,
    Sse,
    NonHermitian,
    JumpA,
    JumpB,
    FockLindblad,
    FockSse,
    FockJump,
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MethodTag::Lindblad => "lindblad",
            MethodTag::Sse => "sse",
            MethodTag::NonHermitian => "non-hermitian",
            MethodTag::JumpA => "jump-a",
            MethodTag::JumpB => "jump-b",
            MethodTag::FockLindblad => "fock-lindblad",
            MethodTag::FockSse => "fock-sse",
            MethodTag::FockJump => "fock-jump",
        };
        f.write_str(s)
    }
}

/// Reproducible per-trajectory noise: ChaCha12 seeded by the master seed with
/// the trajectory index as the stream, so ensembles are order-independent.
#[derive(Clone, Debug)]
pub struct NoiseDriver {
    pub master_seed: u64,
    pub trajectory: u64,
    rng: ChaCha12Rng,
    pub draws: u64,
}

/// A uniform draw used for jump-time sampling, tagged with its position in
/// the substream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformSample {
    pub value: f64,
    pub draw_index: u64,
}

impl NoiseDriver {
    pub fn new(master_seed: u64, trajectory: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
        rng.set_stream(trajectory);
        NoiseDriver { master_seed, trajectory, rng, draws: 0 }
    }

    /// Independent zero-mean Gaussian increments with variance `dt`.
    pub fn gaussian_pair(&mut self, dt: f64) -> (f64, f64) {
        let s = dt.sqrt();
        let a: f64 = StandardNormal.sample(&mut self.rng);
        let b: f64 = StandardNormal.sample(&mut self.rng);
        self.draws += 2;
        (a * s, b * s)
    }

    pub fn uniform(&mut self) -> UniformSample {
        use rand::Rng;
        let value: f64 = self.rng.gen();
        self.draws += 1;
        UniformSample { value, draw_index: self.draws }
    }
}

/// Sampled parameter history of one run.
#[derive(Clone, Debug)]
pub struct ParamTrajectory {
    pub times: Vec<f64>,
    pub centres: Vec<RVec2>,
    pub widths: Vec<RMat2>,
    pub method: MethodTag,
}

impl ParamTrajectory {
    pub fn state(&self, k: usize) -> GaussianState {
        GaussianState { centre: self.centres[k], g: self.widths[k] }
    }
}

/// Deterministic Lindblad drift of the centre, shared with the SSE.
fn lindblad_centre_drift(z: &RVec2, model: &ModelConfig) -> RVec2 {
    let grad_h = model.hamiltonian.grad(z);
    let l_val = model.lindbladian.value(z);
    let lgradbar = model.lindbladian.grad.conj().scale(l_val);
    let im = Vec2::new(lgradbar.q.im, lgradbar.p.im);
    grad_h.omega() + im.omega()
}

/// Right-hand side of the Gaussian-parameter Lindblad equations.
pub fn lindblad_rhs(state: &GaussianState, model: &ModelConfig) -> (RVec2, RMat2) {
    let g = state.g;
    let h2 = model.hamiltonian.h2;
    let gre = model.lindbladian.gamma_re();
    let gim = model.lindbladian.gamma_im();
    let omega = Mat2::<f64>::omega();

    let dz = lindblad_centre_drift(&state.centre, model);
    let dg = (h2 + gim) * omega * g - g * omega * (h2 - gim)
        + (g * omega * gre * omega * g).scale(2.0);
    (dz, dg)
}

/// Shared deterministic width flow of the SSE and non-Hermitian dynamics.
pub fn sse_g_rhs(g: &RMat2, model: &ModelConfig) -> RMat2 {
    let h2 = model.hamiltonian.h2;
    let gre = model.lindbladian.gamma_re();
    let omega = Mat2::<f64>::omega();
    h2 * omega * *g - *g * omega * h2 + gre + *g * omega * gre * omega * *g
}

/// Right-hand side of the non-Hermitian parameter equations.
pub fn nonhermitian_rhs(state: &GaussianState, model: &ModelConfig) -> (RVec2, RMat2) {
    let grad_h = model.hamiltonian.grad(&state.centre);
    let l_val = model.lindbladian.value(&state.centre);
    let lbar_grad = model.lindbladian.grad.scale(l_val.conj());
    let re = Vec2::new(lbar_grad.q.re, lbar_grad.p.re);
    let g_inv = state.g.inverse().expect("SPD width");
    let dz = grad_h.omega() - g_inv.mul_vec(&re);
    (dz, sse_g_rhs(&state.g, model))
}

/// Advance a pure width matrix by the Moebius action of the complex
/// symplectic flow `S`:
/// `G -> -Omega X Y^{-1}` with `X = Re(S) Omega G - Im(S)` and
/// `Y = Im(S) Omega G + Re(S)`.
pub fn sse_g_advance(g: &RMat2, s: &CMat2) -> Result<RMat2, DynamicsError> {
    let omega = Mat2::<f64>::omega();
    let og = omega * *g;
    let x = s.re() * og - s.im();
    let y = s.im() * og + s.re();
    let det = y.det();
    if det.abs() < 1e-14 * (1.0 + y.max_abs() * y.max_abs()) {
        return Err(DynamicsError::SingularDenominator { t: f64::NAN });
    }
    let y_inv = y.inverse().expect("checked determinant");
    Ok((-(omega * x * y_inv)).symmetrize())
}

/// Closed-form SSE (equivalently non-Hermitian) width at time `t` via
/// `S(t) = exp(Omega K'' t)`; a singular denominator is continued by
/// perturbing `t` by 1e-9.
pub fn sse_g_closed_form(g0: &RMat2, model: &ModelConfig, t: f64) -> Result<RMat2, DynamicsError> {
    let k = build_effective_k(model);
    let gen = k.flow_generator();
    match sse_g_advance(g0, &gen.exp_scaled(t)) {
        Ok(g) => Ok(g),
        Err(_) => sse_g_advance(g0, &gen.exp_scaled(t + 1e-9))
            .map_err(|_| DynamicsError::SingularDenominator { t }),
    }
}

/// Adaptive Simpson quadrature of a matrix integrand.
#[allow(clippy::too_many_arguments)]
fn simpson_matrix(
    f: &impl Fn(f64) -> RMat2,
    a: f64,
    b: f64,
    fa: RMat2,
    fm: RMat2,
    fb: RMat2,
    tol: f64,
    depth: u32,
) -> RMat2 {
    let m = 0.5 * (a + b);
    let h = b - a;
    let whole = (fa + fm.scale(4.0) + fb).scale(h / 6.0);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (fa + flm.scale(4.0) + fm).scale(h / 12.0);
    let right = (fm + frm.scale(4.0) + fb).scale(h / 12.0);
    let refined = left + right;
    if depth == 0 || (refined - whole).max_abs() < 15.0 * tol {
        return refined + (refined - whole).scale(1.0 / 15.0);
    }
    simpson_matrix(f, a, m, fa, flm, fm, 0.5 * tol, depth - 1)
        + simpson_matrix(f, m, b, fm, frm, fb, 0.5 * tol, depth - 1)
}

fn integrate_matrix(f: impl Fn(f64) -> RMat2, a: f64, b: f64, tol: f64) -> RMat2 {
    if a == b {
        return Mat2::zero();
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    simpson_matrix(&f, a, b, fa, fm, fb, tol, 30)
}

/// Closed-form Lindblad width at time `t`.
///
/// With `A = Omega (H'' - Im(grad_L grad_Lbar^T))`, `E(t) = exp(A t)` and
/// `Q = 2 Omega^T Re(grad_L grad_Lbar^T) Omega`, the inverse width satisfies
/// a Lyapunov equation solved by
/// `G(t) = [E G0^{-1} E^T + int_0^t E(u) Q E(u)^T du]^{-1}`,
/// the quadrature done adaptively.
pub fn lindblad_g_closed_form(
    g0: &RMat2,
    model: &ModelConfig,
    t: f64,
) -> Result<RMat2, DynamicsError> {
    let h2 = model.hamiltonian.h2;
    let gim = model.lindbladian.gamma_im();
    let gre = model.lindbladian.gamma_re();
    let omega = Mat2::<f64>::omega();
    let a = omega * (h2 - gim);
    let q = (omega.transpose() * gre * omega).scale(2.0);

    let g0_inv = g0.inverse().ok_or(DynamicsError::NonSpdWidth { t: 0.0 })?;
    let mut tol = 1e-13 * (1.0 + q.max_abs()) * (1.0 + t.abs());
    for retry in 0..3 {
        let e_t = a.exp_real(t);
        let integrand = |u: f64| {
            let e = a.exp_real(u);
            e * q * e.transpose()
        };
        let f = integrate_matrix(integrand, 0.0, t, tol);
        let p = (e_t * g0_inv * e_t.transpose() + f).symmetrize();
        match p.inverse() {
            Some(g) if p.det() > 0.0 => return Ok(g.symmetrize()),
            _ => {
                tol *= 0.1;
                let _ = retry;
            }
        }
    }
    Err(DynamicsError::QuadratureFailed { retries: 3 })
}

/// One Euler-Maruyama centre increment for given noise increments; the width
/// input is the start-of-step `G` (Ito convention).
pub fn sse_centre_step(
    z: &RVec2,
    g: &RMat2,
    model: &ModelConfig,
    dt: f64,
    dxi: (f64, f64),
) -> RVec2 {
    let drift = lindblad_centre_drift(z, model);
    let (coef_r, coef_i) = sse_noise_coefficients(g, model);
    *z + drift.scale(dt) + coef_r.scale(dxi.0) + coef_i.scale(dxi.1)
}

/// Noise coefficient vectors of the SSE centre equation:
/// `sqrt(hbar/2) (G^{-1} grad_L^R - Omega grad_L^I)` on the real increment
/// and `-sqrt(hbar/2) (G^{-1} grad_L^I + Omega grad_L^R)` on the imaginary.
pub fn sse_noise_coefficients(g: &RMat2, model: &ModelConfig) -> (RVec2, RVec2) {
    let gr = model.lindbladian.grad.re();
    let gi = model.lindbladian.grad.im();
    let g_inv = g.inverse().expect("SPD width");
    let s = (model.hbar / 2.0).sqrt();
    let coef_r = (g_inv.mul_vec(&gr) - gi.omega()).scale(s);
    let coef_i = (g_inv.mul_vec(&gi) + gr.omega()).scale(-s);
    (coef_r, coef_i)
}

/// One SSE step: stochastic centre update plus exact width advance.
///
/// The width is advanced by the closed-form Moebius action over `dt`, which
/// keeps `det G = 1` exactly; a failed advance is retried on halved substeps
/// (up to 10 halvings) before reporting the step as rejected.
pub fn sse_step(
    state: &GaussianState,
    model: &ModelConfig,
    dt: f64,
    driver: &mut NoiseDriver,
) -> Result<GaussianState, DynamicsError> {
    let dxi = driver.gaussian_pair(dt);
    let centre = sse_centre_step(&state.centre, &state.g, model, dt, dxi);
    let k = build_effective_k(model);
    let gen = k.flow_generator();
    let g = advance_width_with_halving(&state.g, &gen, dt, 10)?;
    Ok(GaussianState { centre, g })
}

fn advance_width_with_halving(
    g: &RMat2,
    gen: &CMat2,
    dt: f64,
    budget: u32,
) -> Result<RMat2, DynamicsError> {
    match sse_g_advance(g, &gen.exp_scaled(dt)) {
        Ok(next) if next.is_spd(1e-9) => Ok(next),
        _ if budget > 0 => {
            let half = advance_width_with_halving(g, gen, dt / 2.0, budget - 1)?;
            advance_width_with_halving(&half, gen, dt / 2.0, budget - 1)
        }
        _ => Err(DynamicsError::NonSpdWidth { t: dt }),
    }
}

fn check_grid(t_end: f64, dt: f64) -> Result<usize, DynamicsError> {
    let n = (t_end / dt).round();
    if n < 1.0 || ((n * dt - t_end).abs() > 1e-9 * t_end.max(1.0)) {
        return Err(DynamicsError::StepMismatch { dt, t_end });
    }
    Ok(n as usize)
}

/// Classic RK4 on the joint `(z, G)` parameter state; records every step.
pub fn integrate_deterministic(
    rhs: impl Fn(&GaussianState, &ModelConfig) -> (RVec2, RMat2),
    initial: &GaussianState,
    model: &ModelConfig,
    t_end: f64,
    dt: f64,
    method: MethodTag,
) -> Result<ParamTrajectory, DynamicsError> {
    let n = check_grid(t_end, dt)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut centres = Vec::with_capacity(n + 1);
    let mut widths = Vec::with_capacity(n + 1);
    let mut state = *initial;
    times.push(0.0);
    centres.push(state.centre);
    widths.push(state.g);
    for k in 0..n {
        let t = k as f64 * dt;
        let (k1z, k1g) = rhs(&state, model);
        let mid1 = GaussianState {
            centre: state.centre + k1z.scale(dt / 2.0),
            g: state.g + k1g.scale(dt / 2.0),
        };
        let (k2z, k2g) = rhs(&mid1, model);
        let mid2 = GaussianState {
            centre: state.centre + k2z.scale(dt / 2.0),
            g: state.g + k2g.scale(dt / 2.0),
        };
        let (k3z, k3g) = rhs(&mid2, model);
        let end = GaussianState {
            centre: state.centre + k3z.scale(dt),
            g: state.g + k3g.scale(dt),
        };
        let (k4z, k4g) = rhs(&end, model);
        state = GaussianState {
            centre: state.centre
                + (k1z + (k2z + k3z).scale(2.0) + k4z).scale(dt / 6.0),
            g: (state.g + (k1g + (k2g + k3g).scale(2.0) + k4g).scale(dt / 6.0)).symmetrize(),
        };
        if !state.g.is_spd(1e-9) {
            return Err(DynamicsError::NonSpdWidth { t: t + dt });
        }
        times.push(t + dt);
        centres.push(state.centre);
        widths.push(state.g);
    }
    Ok(ParamTrajectory { times, centres, widths, method })
}

/// Euler-Maruyama SSE run: stochastic centre, exact deterministic width.
pub fn integrate_sse(
    initial: &GaussianState,
    model: &ModelConfig,
    t_end: f64,
    dt: f64,
    driver: &mut NoiseDriver,
) -> Result<ParamTrajectory, DynamicsError> {
    let n = check_grid(t_end, dt)?;
    let k = build_effective_k(model);
    let gen = k.flow_generator();
    let mut times = Vec::with_capacity(n + 1);
    let mut centres = Vec::with_capacity(n + 1);
    let mut widths = Vec::with_capacity(n + 1);
    let mut z = initial.centre;
    times.push(0.0);
    centres.push(z);
    widths.push(initial.g);
    for step in 0..n {
        // Width evaluated globally from t = 0: no accumulation of map error.
        let g_now = widths[step];
        let dxi = driver.gaussian_pair(dt);
        z = sse_centre_step(&z, &g_now, model, dt, dxi);
        let t_next = (step + 1) as f64 * dt;
        let g_next = sse_g_advance(&initial.g, &gen.exp_scaled(t_next))
            .or_else(|_| advance_width_with_halving(&g_now, &gen, dt, 10))?;
        times.push(t_next);
        centres.push(z);
        widths.push(g_next);
    }
    Ok(ParamTrajectory { times, centres, widths, method: MethodTag::Sse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::covariance_from_g;
    use crate::model::{example1_reference, example2_reference};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_pure_g(rng: &mut StdRng) -> RMat2 {
        loop {
            let r: RMat2 = Mat2::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            let g = (r * r.transpose()).symmetrize();
            if g.det() > 0.05 {
                return g.scale(1.0 / g.det().sqrt());
            }
        }
    }

    #[test]
    fn noise_driver_is_reproducible_and_stream_separated() {
        let mut a = NoiseDriver::new(42, 7);
        let mut b = NoiseDriver::new(42, 7);
        let mut c = NoiseDriver::new(42, 8);
        for _ in 0..100 {
            let (ar, ai) = a.gaussian_pair(1e-3);
            let (br, bi) = b.gaussian_pair(1e-3);
            let (cr, _) = c.gaussian_pair(1e-3);
            assert_eq!((ar, ai), (br, bi));
            assert_ne!(ar, cr);
        }
        assert_eq!(a.uniform(), b.uniform());
    }

    #[test]
    fn lindblad_centre_position_measurement_is_unitary() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let state = GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0);
        let (dz, _) = lindblad_rhs(&state, &model);
        let expect = state.centre.omega(); // omega = 1
        assert!((dz - expect).norm() < 1e-14);
    }

    #[test]
    fn lindblad_centre_damped_oscillator() {
        let (omega, gamma) = (1.0, 0.2);
        let model = ModelConfig::damped_oscillator(omega, gamma, 1.0);
        let state = GaussianState::squeezed(Vec2::new(1.3, -0.4), 2.0);
        let (dz, _) = lindblad_rhs(&state, &model);
        let expect = state.centre.omega().scale(omega) - state.centre.scale(gamma / 2.0);
        assert!((dz - expect).norm() < 1e-14);
    }

    #[test]
    fn lindblad_width_closed_system_commutator() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let g = Mat2::new(1.5, 0.2, 0.2, 0.7);
        let state = GaussianState { centre: Vec2::zero(), g };
        let (_, dg) = lindblad_rhs(&state, &model);
        let h2 = model.hamiltonian.h2;
        let omega = Mat2::<f64>::omega();
        let expect = h2 * omega * g - g * omega * h2;
        assert!((dg - expect).max_abs() < 1e-14);
    }

    #[test]
    fn lindblad_closed_form_identity_at_zero() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let g0 = Mat2::diag(2.0, 0.5);
        let g = lindblad_g_closed_form(&g0, &model, 0.0).unwrap();
        assert!((g - g0).max_abs() < 1e-12);
    }

    #[test]
    fn lindblad_closed_form_matches_printed_variances() {
        let (omega, gamma, zeta, hbar) = (1.0, 0.2, 2.0, 1.0);
        let model = ModelConfig::position_measurement(omega, gamma, hbar);
        let g0 = Mat2::diag(zeta, 1.0 / zeta);
        for &t in &[1.0, 5.0, 10.0] {
            let g = lindblad_g_closed_form(&g0, &model, t).unwrap();
            let sigma = covariance_from_g(&GaussianState { centre: Vec2::zero(), g }, hbar).unwrap();
            let reference = example1_reference(t, omega, gamma, zeta, hbar).sigma_lindblad;
            assert!(
                (sigma.m[0][0] - reference.m[0][0]).abs() < 1e-8,
                "dx2 mismatch at t = {t}"
            );
            assert!((sigma.m[1][1] - reference.m[1][1]).abs() < 1e-8);
        }
    }

    #[test]
    fn lindblad_closed_form_matches_example2_printed_sigma() {
        let (omega, gamma, zeta, hbar) = (1.0, 0.2, 2.0, 1.0);
        let model = ModelConfig::damped_oscillator(omega, gamma, hbar);
        let g0 = Mat2::diag(zeta, 1.0 / zeta);
        for &t in &[0.5, 2.0, 7.0] {
            let g = lindblad_g_closed_form(&g0, &model, t).unwrap();
            let sigma = covariance_from_g(&GaussianState { centre: Vec2::zero(), g }, hbar).unwrap();
            let reference = example2_reference(t, omega, gamma, zeta, hbar).sigma_lindblad;
            assert!((sigma - reference).max_abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn lindblad_closed_form_agrees_with_rk4() {
        for model in [
            ModelConfig::position_measurement(1.0, 0.2, 1.0),
            ModelConfig::damped_oscillator(1.0, 0.2, 1.0),
        ] {
            let initial = GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0);
            let traj =
                integrate_deterministic(lindblad_rhs, &initial, &model, 10.0, 1e-3, MethodTag::Lindblad)
                    .unwrap();
            for k in (0..traj.times.len()).step_by(500) {
                let g = lindblad_g_closed_form(&initial.g, &model, traj.times[k]).unwrap();
                assert!((g - traj.widths[k]).max_abs() < 1e-7, "t = {}", traj.times[k]);
            }
        }
    }

    #[test]
    fn sse_closed_form_identity_at_zero_and_purity() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let g0 = Mat2::diag(2.0, 0.5);
        let g = sse_g_closed_form(&g0, &model, 0.0).unwrap();
        assert!((g - g0).max_abs() < 1e-12);
        for &t in &[0.5, 1.0, 3.0, 10.0] {
            let g = sse_g_closed_form(&g0, &model, t).unwrap();
            assert!((g.det() - 1.0).abs() < 1e-10, "purity at t = {t}");
        }
    }

    #[test]
    fn sse_closed_form_matches_example2_printed_sigma() {
        let (omega, gamma, zeta, hbar) = (1.0, 0.2, 2.0, 1.0);
        let model = ModelConfig::damped_oscillator(omega, gamma, hbar);
        let g0 = Mat2::diag(zeta, 1.0 / zeta);
        for &t in &[0.3, 1.0, 4.0, 9.0] {
            let g = sse_g_closed_form(&g0, &model, t).unwrap();
            let sigma = covariance_from_g(&GaussianState { centre: Vec2::zero(), g }, hbar).unwrap();
            let reference = example2_reference(t, omega, gamma, zeta, hbar).sigma_sse;
            assert!((sigma - reference).max_abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn sse_closed_form_validated_against_rk4() {
        // Pins the sign/ordering of the Moebius formula for both examples.
        for model in [
            ModelConfig::position_measurement(1.0, 0.2, 1.0),
            ModelConfig::damped_oscillator(1.0, 0.35, 1.0),
        ] {
            let initial = GaussianState::squeezed(Vec2::zero(), 2.0);
            let rhs = |s: &GaussianState, m: &ModelConfig| {
                (Vec2::zero(), sse_g_rhs(&s.g, m))
            };
            let traj =
                integrate_deterministic(rhs, &initial, &model, 6.0, 1e-3, MethodTag::Sse).unwrap();
            for k in (0..traj.times.len()).step_by(300) {
                let g = sse_g_closed_form(&initial.g, &model, traj.times[k]).unwrap();
                assert!((g - traj.widths[k]).max_abs() < 1e-7, "t = {}", traj.times[k]);
            }
        }
    }

    #[test]
    fn sse_and_nonhermitian_width_flows_identical() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let model = ModelConfig::damped_oscillator(1.0, rng.gen_range(0.0..0.5), 1.0);
            let g = random_pure_g(&mut rng);
            let state = GaussianState { centre: Vec2::new(rng.gen_range(-2.0..2.0), 0.3), g };
            let a = sse_g_rhs(&g, &model);
            let (_, b) = nonhermitian_rhs(&state, &model);
            assert!((a - b).max_abs() < 1e-12);
        }
    }

    #[test]
    fn nonhermitian_centre_position_measurement_damping() {
        // dz = omega Omega z - (2 gamma x / hbar) (dx^2, dxp).
        let (omega, gamma, hbar) = (1.0, 0.2, 1.0);
        let model = ModelConfig::position_measurement(omega, gamma, hbar);
        let state = GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0);
        let (dz, _) = nonhermitian_rhs(&state, &model);
        let sigma = covariance_from_g(&state, hbar).unwrap();
        let expect = state.centre.omega().scale(omega)
            - Vec2::new(sigma.m[0][0], sigma.m[0][1])
                .scale(2.0 * gamma * state.centre.q / hbar);
        assert!((dz - expect).norm() < 1e-13);
    }

    #[test]
    fn nonhermitian_centre_damped_oscillator_sigma_modulated() {
        // dz = (omega Omega - (gamma/hbar) Sigma) z.
        let (omega, gamma, hbar) = (1.0, 0.2, 1.0);
        let model = ModelConfig::damped_oscillator(omega, gamma, hbar);
        let state = GaussianState::squeezed(Vec2::new(1.0, -0.5), 2.0);
        let (dz, _) = nonhermitian_rhs(&state, &model);
        let sigma = covariance_from_g(&state, hbar).unwrap();
        let expect = state.centre.omega().scale(omega)
            - sigma.mul_vec(&state.centre).scale(gamma / hbar);
        assert!((dz - expect).norm() < 1e-13);
    }

    #[test]
    fn nonhermitian_reduces_to_hamiltonian_flow_without_coupling() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let state = GaussianState::squeezed(Vec2::new(1.0, 1.0), 3.0);
        let (dz, _) = nonhermitian_rhs(&state, &model);
        assert!((dz - state.centre.omega()).norm() < 1e-14);
    }

    #[test]
    fn sse_noise_block_position_measurement() {
        let (gamma, hbar) = (0.2, 1.0);
        let model = ModelConfig::position_measurement(1.0, gamma, hbar);
        let g = Mat2::diag(2.0, 0.5);
        let (cr, ci) = sse_noise_coefficients(&g, &model);
        let s = (hbar * gamma / 2.0).sqrt();
        let expect_r = g.inverse().unwrap().mul_vec(&Vec2::new(1.0, 0.0)).scale(s);
        let expect_i = Vec2::new(0.0, 1.0).scale(s);
        assert!((cr - expect_r).norm() < 1e-14);
        assert!((ci - expect_i).norm() < 1e-14);
    }

    #[test]
    fn sse_noise_vanishes_for_coherent_state_in_damped_model() {
        let model = ModelConfig::damped_oscillator(1.0, 0.2, 1.0);
        let (cr, ci) = sse_noise_coefficients(&Mat2::identity(), &model);
        assert!(cr.norm() < 1e-14 && ci.norm() < 1e-14);
    }

    #[test]
    fn sse_zero_noise_step_matches_lindblad_drift() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let state = GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0);
        let dt = 1e-3;
        let z = sse_centre_step(&state.centre, &state.g, &model, dt, (0.0, 0.0));
        let drift = lindblad_centre_drift(&state.centre, &model);
        assert!((z - (state.centre + drift.scale(dt))).norm() < 1e-15);
    }

    #[test]
    fn sse_step_preserves_purity_and_reproduces() {
        let model = ModelConfig::damped_oscillator(1.0, 0.3, 1.0);
        let mut a = NoiseDriver::new(31, 2);
        let mut b = NoiseDriver::new(31, 2);
        let mut state_a = GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0);
        let mut state_b = state_a;
        for _ in 0..200 {
            state_a = sse_step(&state_a, &model, 1e-2, &mut a).unwrap();
            state_b = sse_step(&state_b, &model, 1e-2, &mut b).unwrap();
            assert!((state_a.g.det() - 1.0).abs() < 1e-10);
        }
        assert_eq!(state_a.centre.q.to_bits(), state_b.centre.q.to_bits());
        assert_eq!(state_a.centre.p.to_bits(), state_b.centre.p.to_bits());
    }

    #[test]
    fn example2_identity_width_is_fixed_point_of_all_flows() {
        let model = ModelConfig::damped_oscillator(1.0, 0.2, 1.0);
        let state = GaussianState::coherent(Vec2::new(1.0, 0.0));
        let (_, dg_lind) = lindblad_rhs(&state, &model);
        assert!(dg_lind.max_abs() < 1e-14);
        assert!(sse_g_rhs(&Mat2::identity(), &model).max_abs() < 1e-14);
        let g = sse_g_closed_form(&Mat2::identity(), &model, 3.0).unwrap();
        assert!((g - Mat2::identity()).max_abs() < 1e-11);
    }

    #[test]
    fn integrate_constant_rhs_is_linear() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let rhs = |_: &GaussianState, _: &ModelConfig| (Vec2::new(1.0, -2.0), Mat2::zero());
        let initial = GaussianState::coherent(Vec2::zero());
        let traj = integrate_deterministic(rhs, &initial, &model, 1.0, 0.01, MethodTag::Lindblad)
            .unwrap();
        let last = traj.centres.last().unwrap();
        assert!((last.q - 1.0).abs() < 1e-12 && (last.p + 2.0).abs() < 1e-12);
    }

    #[test]
    fn integrate_rejects_mismatched_grid() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let initial = GaussianState::coherent(Vec2::zero());
        assert!(matches!(
            integrate_deterministic(lindblad_rhs, &initial, &model, 1.0, 0.3, MethodTag::Lindblad),
            Err(DynamicsError::StepMismatch { .. })
        ));
    }

    #[test]
    fn purity_preserved_along_sse_flow_for_random_pure_starts() {
        let mut rng = StdRng::seed_from_u64(23);
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        for _ in 0..25 {
            let g0 = random_pure_g(&mut rng);
            for &t in &[1.0, 5.0, 10.0] {
                let g = sse_g_closed_form(&g0, &model, t).unwrap();
                assert!((g.det() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lindblad_flow_never_exceeds_unit_purity() {
        // det G stays at or below 1 (+ tolerance): the flow cannot purify.
        let mut rng = StdRng::seed_from_u64(29);
        for model in [
            ModelConfig::position_measurement(1.0, 0.2, 1.0),
            ModelConfig::damped_oscillator(1.0, 0.3, 1.0),
        ] {
            for _ in 0..10 {
                let g0 = random_pure_g(&mut rng);
                for &t in &[0.5, 2.0, 8.0] {
                    let g = lindblad_g_closed_form(&g0, &model, t).unwrap();
                    assert!(g.det() <= 1.0 + 1e-9, "det = {} at t = {t}", g.det());
                }
            }
        }
    }

    #[test]
    fn sse_strong_order_halving() {
        // Additive-in-centre noise: halving dt should roughly halve the
        // strong error against a shared-path fine reference.
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let initial = GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0);
        let t_end = 2.0;
        let dt_fine = 1e-4_f64;
        let n_fine = (t_end / dt_fine).round() as usize;
        let mut driver = NoiseDriver::new(7, 0);
        let incr: Vec<(f64, f64)> = (0..n_fine).map(|_| driver.gaussian_pair(dt_fine)).collect();

        let run = |sub: usize| -> RVec2 {
            // One coarse step aggregates `sub` fine increments.
            let mut z = initial.centre;
            let dt = dt_fine * sub as f64;
            let n = n_fine / sub;
            for k in 0..n {
                let g = sse_g_closed_form(&initial.g, &model, k as f64 * dt).unwrap();
                let mut dxi = (0.0, 0.0);
                for j in 0..sub {
                    let inc = incr[k * sub + j];
                    dxi.0 += inc.0;
                    dxi.1 += inc.1;
                }
                z = sse_centre_step(&z, &g, &model, dt, dxi);
            }
            z
        };

        let reference = run(1);
        let err_coarse = (run(16) - reference).norm();
        let err_half = (run(8) - reference).norm();
        let ratio = err_coarse / err_half;
        assert!(
            (ratio - 2.0).abs() < 0.4 * 2.0,
            "strong error ratio {ratio} not within 20% of halving"
        );
    }

    #[test]
    fn sse_trajectory_mean_tracks_lindblad_loosely() {
        // Small-ensemble smoke check; the statistical acceptance test uses
        // 2000 trajectories.
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let initial = GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0);
        let n_traj = 200;
        let t_end = 1.0;
        let dt = 1e-3;
        let mut mean = Vec2::zero();
        for idx in 0..n_traj {
            let mut driver = NoiseDriver::new(99, idx);
            let traj = integrate_sse(&initial, &model, t_end, dt, &mut driver).unwrap();
            mean = mean + *traj.centres.last().unwrap();
        }
        mean = mean.scale(1.0 / n_traj as f64);
        let lind = integrate_deterministic(lindblad_rhs, &initial, &model, t_end, dt, MethodTag::Lindblad)
            .unwrap();
        let expect = *lind.centres.last().unwrap();
        assert!((mean - expect).norm() < 0.2, "mean {mean:?} vs {expect:?}");
    }
}
