//! Complexified linearised flow and the moving Hagedorn frame.
//!
//! The effective Hamiltonian `K = H - (i/2)|L|^2` generates the complex
//! symplectic flow `Phi(t, z) = S(t) z + v(t)` with `S(t) = exp(t Omega K2)`.
//! A propagated coherent state stays coherent up to normalisation and phase:
//! the frame bundle collects
//!
//! * `N(t) = h_Omega(S a0, S a0)^{-1/2}` and `a_t = N S a0`,
//! * `M(t) = h_Omega(S a0, S conj(a0)) / h_Omega(S a0, S a0)`,
//! * the real centre `z_t = Re Phi + J_t Im Phi` with
//!   `J_t = -Re(a_t a_t^dag) Omega`,
//! * the displacement coefficient
//!   `h0 = sqrt(2/hbar) [h_Omega(a0, z0)(N^2 - 1) + h_Omega(conj(a0), z0) M]`,
//! * the complex action `alpha(t) = int (qdot p - K(Phi)) ds + alpha_rate t`
//!   along the complex trajectory, integrated by composite Simpson.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian::g_from_frame_unchecked;
use crate::model::EffectiveHamiltonian;
use crate::phase::{hermitian_form, Mat2, PhaseError, Vec2, DEFAULT_FRAME_TOL};
use crate::{CMat2, CVec2, RMat2, RVec2};

/// Default Simpson step for the action integral.
pub const DEFAULT_ALPHA_STEP: f64 = 1e-3;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum FlowError {
    #[error(transparent)]
    Frame(#[from] PhaseError),
    /// `h_Omega(S a, S a)` left the positive real axis: the propagated state
    /// is no longer normalisable in this gauge.
    #[error("propagated frame not normalisable at t = {t}: h = {re:.3e} + {im:.3e}i")]
    NotNormalisable { t: f64, re: f64, im: f64 },
}

/// `Phi(t, z) = S(t) z + v(t)` with complex symplectic `S`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearizedFlow {
    pub s: CMat2,
    pub v: CVec2,
    pub t: f64,
}

impl LinearizedFlow {
    pub fn apply(&self, z: &CVec2) -> CVec2 {
        self.s.mul_vec(z) + self.v
    }

    /// `max |S^T Omega S - Omega|`, zero for exact symplecticity.
    pub fn symplectic_defect(&self) -> f64 {
        let omega: CMat2 = Mat2::omega();
        (self.s.transpose() * omega * self.s - omega).max_abs()
    }
}

/// Flow of the effective Hamiltonian at time `t`; the offset `v` uses the
/// resolvent form `(Omega K2)^{-1} (S - I) k1` when the generator is
/// invertible and a stepwise phi-function series otherwise.
pub fn linearized_flow(k: &EffectiveHamiltonian, t: f64) -> LinearizedFlow {
    let gen = k.flow_generator();
    let s = gen.exp_scaled(t);
    let v = flow_offset(&gen, &s, &k.k1, t);
    LinearizedFlow { s, v, t }
}

fn flow_offset(gen: &CMat2, s: &CMat2, k1: &CVec2, t: f64) -> CVec2 {
    if k1.max_abs() == 0.0 || t == 0.0 {
        return Vec2::zero();
    }
    let det = gen.det();
    let scale = gen.max_abs().max(1e-300);
    if det.norm() > 1e-8 * scale * scale {
        let inv = gen.inverse().expect("checked determinant");
        let one: CMat2 = Mat2::identity();
        return inv.mul_vec(&(*s - one).mul_vec(k1));
    }
    // Near-singular generator: compose v over substeps with
    // v_step(tau) = tau * phi1(tau A) k1, phi1(X) = sum X^k / (k+1)!.
    let steps = ((t.abs() * scale / 0.5).ceil() as usize).max(1);
    let tau = t / steps as f64;
    let s_tau = gen.exp_scaled(tau);
    let a_tau = gen.scale(C64::new(tau, 0.0));
    let mut phi1: CMat2 = Mat2::identity();
    let mut term: CMat2 = Mat2::identity();
    for k in 1..24 {
        term = (term * a_tau).scale(C64::new(1.0 / k as f64, 0.0));
        phi1 = phi1 + term.scale(C64::new(1.0 / (k as f64 + 1.0), 0.0));
        if term.max_abs() < 1e-18 {
            break;
        }
    }
    let v_step = phi1.mul_vec(k1).scale(C64::new(tau, 0.0));
    let mut v: CVec2 = Vec2::zero();
    for _ in 0..steps {
        v = s_tau.mul_vec(&v) + v_step;
    }
    v
}

/// Frame bundle at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HagedornFrame {
    /// Normalised frame vector `a_t`.
    pub a: CVec2,
    /// Real moving centre `z_t`.
    pub z: RVec2,
    /// Complex centre `Phi(t, z0)`, kept alongside the real one.
    pub phi: CVec2,
    pub n: f64,
    pub m: C64,
    pub h0: C64,
    /// Complex action including the trace correction.
    pub alpha: C64,
    pub t: f64,
}

impl HagedornFrame {
    pub fn initial(a0: CVec2, z0: RVec2) -> Self {
        HagedornFrame {
            a: a0,
            z: z0,
            phi: z0.to_complex(),
            n: 1.0,
            m: C64::new(0.0, 0.0),
            h0: C64::new(0.0, 0.0),
            alpha: C64::new(0.0, 0.0),
            t: 0.0,
        }
    }

    /// Width matrix of the frame, `G = Omega^T Re(a a^dag) Omega`.
    pub fn g(&self) -> RMat2 {
        g_from_frame_unchecked(&self.a)
    }
}

/// Norm of the propagated normalised coherent state,
/// `sqrt(N) |exp(i alpha / hbar)|`.
pub fn frame_norm_factor(frame: &HagedornFrame, hbar: f64) -> f64 {
    frame.n.sqrt() * (-frame.alpha.im / hbar).exp()
}

/// Propagates the frame `(a0, z0)` for time `t`; caches the action integral
/// so that monotone time sweeps cost one Simpson panel per increment.
#[derive(Clone, Debug)]
pub struct FramePropagator {
    pub k: EffectiveHamiltonian,
    pub hbar: f64,
    pub a0: CVec2,
    pub z0: RVec2,
    gen: CMat2,
    alpha_step: f64,
    /// Sorted `(t, action integral up to t)` pairs, starting at `(0, 0)`.
    alpha_cache: std::cell::RefCell<Vec<(f64, C64)>>,
}

impl FramePropagator {
    pub fn new(k: EffectiveHamiltonian, hbar: f64, a0: CVec2, z0: RVec2) -> Result<Self, FlowError> {
        let dev = (hermitian_form(&a0, &a0).re - 1.0).abs();
        if dev > DEFAULT_FRAME_TOL {
            return Err(PhaseError::FrameNotNormalised { deviation: dev }.into());
        }
        Ok(FramePropagator {
            gen: k.flow_generator(),
            k,
            hbar,
            a0,
            z0,
            alpha_step: DEFAULT_ALPHA_STEP,
            alpha_cache: std::cell::RefCell::new(vec![(0.0, C64::new(0.0, 0.0))]),
        })
    }

    pub fn with_alpha_step(mut self, step: f64) -> Self {
        self.alpha_step = step.abs().max(1e-6);
        self
    }

    /// Real centre and width inverse data at `s`, without action bookkeeping.
    fn real_centre(&self, s_mat: &CMat2, t: f64) -> Result<(RVec2, RMat2), FlowError> {
        let sa = s_mat.mul_vec(&self.a0);
        let h = hermitian_form(&sa, &sa);
        if h.re <= 0.0 || h.re.is_nan() || h.im.abs() > 1e-8 * h.re.abs().max(1.0) {
            return Err(FlowError::NotNormalisable { t, re: h.re, im: h.im });
        }
        let a = sa.scale(C64::new(1.0 / h.re.sqrt(), 0.0));
        let phi = flow_offset(&self.gen, s_mat, &self.k.k1, t)
            + s_mat.mul_vec(&self.z0.to_complex());
        let re_aa: RMat2 = Mat2::new(
            a.q.norm_sqr(),
            (a.q * a.p.conj()).re,
            (a.p * a.q.conj()).re,
            a.p.norm_sqr(),
        );
        let j = -(re_aa * Mat2::omega());
        let z = phi.re() + j.mul_vec(&phi.im());
        // G = Omega J.
        let g = Mat2::omega() * j;
        Ok((z, g))
    }

    /// `(qdot p - q pdot)/2 - K(z_s)` along the real moving centre.
    ///
    /// The symmetrised Legendre term is the one consistent with the
    /// symmetric translation convention `T(z) = exp(-(i/hbar) z.Omega zhat)`
    /// (it differs from `qdot p` by the total derivative `d(qp)/2`, and the
    /// dense-oracle propagator phases single it out). At real `z` the
    /// gradient of `K` splits as `Re grad K = grad H` and
    /// `Im grad K = -Re(Lbar grad_L)`, so the centre velocity is
    /// `zdot = Omega Re(grad K) + G^{-1} Im(grad K)`.
    fn action_integrand(&self, s: f64) -> C64 {
        let s_mat = self.gen.exp_scaled(s);
        let (z, g) = match self.real_centre(&s_mat, s) {
            Ok(v) => v,
            Err(_) => return C64::new(f64::NAN, f64::NAN),
        };
        let grad_k = self.k.k2.mul_vec(&z.to_complex()) - self.k.k1.omega();
        let zdot = grad_k.re().omega()
            + g.inverse().map(|gi| gi.mul_vec(&grad_k.im())).unwrap_or_else(Vec2::zero);
        C64::new(0.5 * (zdot.q * z.p - z.q * zdot.p), 0.0) - self.k.value(&z.to_complex())
    }

    fn simpson_panel(&self, a: f64, b: f64) -> C64 {
        let span = b - a;
        if span == 0.0 {
            return C64::new(0.0, 0.0);
        }
        let n = ((span.abs() / self.alpha_step).ceil() as usize).max(2);
        let n = n + n % 2;
        let h = span / n as f64;
        let mut acc = self.action_integrand(a) + self.action_integrand(b);
        for j in 1..n {
            let w = if j % 2 == 1 { 4.0 } else { 2.0 };
            acc += self.action_integrand(a + j as f64 * h) * w;
        }
        acc * (h / 3.0)
    }

    /// Action integral from 0 to `t`, reusing the largest cached prefix.
    fn action_to(&self, t: f64) -> C64 {
        if t < 0.0 {
            return self.simpson_panel(0.0, t);
        }
        let cache = self.alpha_cache.borrow();
        let (t_base, base) = *cache
            .iter()
            .rev()
            .find(|(tc, _)| *tc <= t + 1e-15)
            .expect("cache holds t = 0");
        drop(cache);
        if (t - t_base).abs() < 1e-15 {
            return base;
        }
        base + self.simpson_panel(t_base, t)
    }

    /// Extend the cache to `t` in bounded panels; cheap monotone sweeps.
    pub fn cache_action_to(&self, t: f64) {
        if t <= 0.0 {
            return;
        }
        const PANEL: f64 = 0.25;
        loop {
            let (t_last, last) = *self.alpha_cache.borrow().last().unwrap();
            if t_last >= t {
                return;
            }
            let t_next = (t_last + PANEL).min(t);
            let val = last + self.simpson_panel(t_last, t_next);
            self.alpha_cache.borrow_mut().push((t_next, val));
        }
    }

    pub fn frame_at(&self, t: f64) -> Result<HagedornFrame, FlowError> {
        let s = self.gen.exp_scaled(t);
        let sa = s.mul_vec(&self.a0);
        let sabar = s.mul_vec(&self.a0.conj());
        let h = hermitian_form(&sa, &sa);
        if h.re <= 0.0 || h.re.is_nan() || h.im.abs() > 1e-8 * h.re.abs().max(1.0) {
            return Err(FlowError::NotNormalisable { t, re: h.re, im: h.im });
        }
        let n = 1.0 / h.re.sqrt();
        let a = sa.scale(C64::new(n, 0.0));
        let m = hermitian_form(&sa, &sabar) / h.re;

        let phi = flow_offset(&self.gen, &s, &self.k.k1, t) + s.mul_vec(&self.z0.to_complex());
        let (z, _) = self.real_centre(&s, t)?;

        let z0c = self.z0.to_complex();
        let h0 = (hermitian_form(&self.a0, &z0c) * (n * n - 1.0)
            + hermitian_form(&self.a0.conj(), &z0c) * m)
            * C64::new((2.0 / self.hbar).sqrt(), 0.0);

        if t > 0.0 {
            self.cache_action_to(t);
        }
        let alpha = self.action_to(t) + self.k.alpha_rate() * t;

        Ok(HagedornFrame { a, z, phi, n, m, h0, alpha, t })
    }
}

/// One-shot frame propagation; see [`FramePropagator`] for repeated queries.
pub fn propagate_frame(
    a0: &CVec2,
    z0: &RVec2,
    k: &EffectiveHamiltonian,
    hbar: f64,
    t: f64,
) -> Result<HagedornFrame, FlowError> {
    FramePropagator::new(*k, hbar, *a0, *z0)?.frame_at(t)
}

/// JSON sidecar for a precomputed frame table (complex entries as re/im
/// pairs); the inverse of [`frame_table_from_json`].
pub fn frame_table_to_json(frames: &[HagedornFrame]) -> String {
    serde_json::to_string(frames).expect("frame serialisation")
}

pub fn frame_table_from_json(text: &str) -> Result<Vec<HagedornFrame>, serde_json::Error> {
    serde_json::from_str(text)
}
