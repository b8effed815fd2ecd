//! Gaussian states: width matrix `G`, covariance `Sigma = (hbar/2) G^{-1}`,
//! the frame-vector parametrisation `G = Omega^T Re(a a^dag) Omega`, and
//! Wigner functions on phase-space grids.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::{hermitian_form, Mat2, PhaseError, Vec2, DEFAULT_FRAME_TOL};
use crate::{CVec2, RMat2, RVec2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GaussianError {
    #[error(transparent)]
    Frame(#[from] PhaseError),
    #[error("G is singular or not positive definite (det = {det:.3e})")]
    SingularG { det: f64 },
    #[error("G is not symmetric")]
    NotSymmetric,
    #[error("state is not pure: det G = {det:.8} deviates from 1")]
    NotPure { det: f64 },
    #[error("wavefunction gauge is singular: |a_q| = {aq_abs:.3e}")]
    SingularGauge { aq_abs: f64 },
}

/// Gaussian state with real centre and symmetric positive definite width
/// matrix `G`; pure if and only if `det G = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianState {
    pub centre: RVec2,
    pub g: RMat2,
}

impl GaussianState {
    pub fn new(centre: RVec2, g: RMat2) -> Result<Self, GaussianError> {
        if !g.is_symmetric(1e-12) {
            return Err(GaussianError::NotSymmetric);
        }
        if !(g.det() > 1e-12 && g.m[0][0] > 0.0) {
            return Err(GaussianError::SingularG { det: g.det() });
        }
        Ok(GaussianState { centre, g: g.symmetrize() })
    }

    /// Squeezed state `G = diag(zeta, 1/zeta)` at `centre`.
    pub fn squeezed(centre: RVec2, zeta: f64) -> Self {
        GaussianState { centre, g: Mat2::diag(zeta, 1.0 / zeta) }
    }

    pub fn coherent(centre: RVec2) -> Self {
        GaussianState { centre, g: Mat2::identity() }
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        (self.g.det() - 1.0).abs() <= tol
    }
}

/// `Sigma = (hbar/2) G^{-1}`.
pub fn covariance_from_g(state: &GaussianState, hbar: f64) -> Result<RMat2, GaussianError> {
    let det = state.g.det();
    if det.abs() < 1e-12 {
        return Err(GaussianError::SingularG { det });
    }
    Ok(state.g.inverse().expect("checked determinant").scale(hbar / 2.0))
}

/// Width matrix from a covariance matrix, `G = (hbar/2) Sigma^{-1}`.
pub fn g_from_covariance(sigma: &RMat2, hbar: f64) -> Result<RMat2, GaussianError> {
    let det = sigma.det();
    if det.abs() < 1e-300 {
        return Err(GaussianError::SingularG { det });
    }
    Ok(sigma.inverse().expect("checked determinant").scale(hbar / 2.0))
}

/// `G = Omega^T Re(a a^dag) Omega` for a normalised frame vector.
pub fn g_from_hagedorn(a: &CVec2) -> Result<RMat2, GaussianError> {
    let h = hermitian_form(a, a).re;
    let dev = (h - 1.0).abs();
    if dev > DEFAULT_FRAME_TOL {
        return Err(PhaseError::FrameNotNormalised { deviation: dev }.into());
    }
    Ok(g_from_frame_unchecked(a))
}

pub(crate) fn g_from_frame_unchecked(a: &CVec2) -> RMat2 {
    // Re(a a^dag) = [[|a_q|^2, Re(a_q conj(a_p))], [.., |a_p|^2]].
    let re_aa = Mat2::new(
        a.q.norm_sqr(),
        (a.q * a.p.conj()).re,
        (a.q * a.p.conj()).re,
        a.p.norm_sqr(),
    );
    let omega = Mat2::<f64>::omega();
    (omega.transpose() * re_aa * omega).symmetrize()
}

/// Inverse of [`g_from_hagedorn`] with the phase fixed so that `a_q` is real
/// and positive: `a = (sqrt(P_00), (P_01 + i)/sqrt(P_00))` with
/// `P = Omega G Omega^T`.
pub fn hagedorn_from_g(g: &RMat2) -> Result<CVec2, GaussianError> {
    let det = g.det();
    if (det - 1.0).abs() > 1e-8 {
        return Err(GaussianError::NotPure { det });
    }
    let omega = Mat2::<f64>::omega();
    let p = omega * *g * omega.transpose();
    let aq = p.m[0][0].sqrt();
    Ok(Vec2::new(
        C64::new(aq, 0.0),
        C64::new(p.m[0][1] / aq, 1.0 / aq),
    ))
}

/// Phase-space grid of real Wigner values, row-major over `q` then `p`:
/// `values[iq * np + ip] = W(q_iq, p_ip)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub q_min: f64,
    pub q_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub nq: usize,
    pub np: usize,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn dq(&self) -> f64 {
        (self.q_max - self.q_min) / (self.nq - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.np - 1) as f64
    }

    pub fn q(&self, iq: usize) -> f64 {
        self.q_min + iq as f64 * self.dq()
    }

    pub fn p(&self, ip: usize) -> f64 {
        self.p_min + ip as f64 * self.dp()
    }

    pub fn value(&self, iq: usize, ip: usize) -> f64 {
        self.values[iq * self.np + ip]
    }

    /// Trapezoidal integral over the grid.
    pub fn integrate(&self) -> f64 {
        let mut total = 0.0;
        for iq in 0..self.nq {
            let wq = if iq == 0 || iq == self.nq - 1 { 0.5 } else { 1.0 };
            for ip in 0..self.np {
                let wp = if ip == 0 || ip == self.np - 1 { 0.5 } else { 1.0 };
                total += wq * wp * self.value(iq, ip);
            }
        }
        total * self.dq() * self.dp()
    }

    /// Marginal over momentum at each `q` node (trapezoid in `p`).
    pub fn marginal_q(&self) -> Vec<f64> {
        (0..self.nq)
            .map(|iq| {
                let mut s = 0.0;
                for ip in 0..self.np {
                    let wp = if ip == 0 || ip == self.np - 1 { 0.5 } else { 1.0 };
                    s += wp * self.value(iq, ip);
                }
                s * self.dp()
            })
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Requested extent and resolution of a Wigner grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WignerGridSpec {
    pub nq: usize,
    pub np: usize,
    /// Explicit bounds `(q_min, q_max, p_min, p_max)`; when absent the grid
    /// covers `centre +- sigmas` standard deviations per axis.
    pub bounds: Option<(f64, f64, f64, f64)>,
    pub sigmas: f64,
}

impl Default for WignerGridSpec {
    fn default() -> Self {
        WignerGridSpec { nq: 257, np: 257, bounds: None, sigmas: 6.0 }
    }
}

impl WignerGridSpec {
    pub fn bounds_for(&self, state: &GaussianState, hbar: f64) -> (f64, f64, f64, f64) {
        match self.bounds {
            Some(b) => b,
            None => {
                let sigma = covariance_from_g(state, hbar)
                    .unwrap_or_else(|_| Mat2::diag(hbar / 2.0, hbar / 2.0));
                let sq = sigma.m[0][0].max(1e-12).sqrt() * self.sigmas;
                let sp = sigma.m[1][1].max(1e-12).sqrt() * self.sigmas;
                (
                    state.centre.q - sq,
                    state.centre.q + sq,
                    state.centre.p - sp,
                    state.centre.p + sp,
                )
            }
        }
    }
}

/// `W(z) = sqrt(det G)/(pi hbar) exp(-(1/hbar) dz.G dz)`.
///
/// The discrete integral should be 1; callers treat a miss above `1e-3` as a
/// too-coarse (or too-narrow) grid.
pub fn wigner_gaussian_on_grid(
    state: &GaussianState,
    hbar: f64,
    spec: &WignerGridSpec,
) -> Result<WignerGrid, GaussianError> {
    let det = state.g.det();
    if det <= 0.0 {
        return Err(GaussianError::SingularG { det });
    }
    let (q_min, q_max, p_min, p_max) = spec.bounds_for(state, hbar);
    let (nq, np) = (spec.nq, spec.np);
    let norm = det.sqrt() / (std::f64::consts::PI * hbar);
    let mut values = vec![0.0; nq * np];
    let dq = (q_max - q_min) / (nq - 1) as f64;
    let dp = (p_max - p_min) / (np - 1) as f64;
    for iq in 0..nq {
        let q = q_min + iq as f64 * dq;
        for ip in 0..np {
            let p = p_min + ip as f64 * dp;
            let dz = Vec2::new(q - state.centre.q, p - state.centre.p);
            let quad = dz.dot(&state.g.mul_vec(&dz));
            values[iq * np + ip] = norm * (-quad / hbar).exp();
        }
    }
    Ok(WignerGrid { q_min, q_max, p_min, p_max, nq, np, values })
}
