//! Basis-level machinery in the moving Hagedorn frame.
//!
//! The propagated states `U(t)|n, a0, z0>` expand over the moving orthonormal
//! family `|m, a_t, z_t>` with lower-triangular coefficients
//!
//! `B[n][m] = N^m sqrt(n!/m!) sum_k (-M)^k h0^(n-m-2k) / (2^k (n-m-2k)! k!)`,
//!
//! rows indexed by the source level `n` (zero for `m > n`). The dual family
//! is fixed by biorthogonality, which pins it to `(B^{-1})^dag`; the overlap
//! Gram matrix is `O = exp(-2 Im(alpha)/hbar) N conj(B) B^T`. A linear
//! Lindblad coupling acts tridiagonally in the orthonormal frame and as
//! `B^{-T} L B^T` in the non-orthogonal one, which grows the active
//! coefficient count by exactly one per application.
//!
//! Position-space evaluation uses the three-term recurrence
//! `psi_{n+1} = [sqrt(2/hbar)(x - q) psi_n - conj(a_q) sqrt(n) psi_{n-1}]
//! / (a_q sqrt(n+1))`, with the ground-state phase fixed by the principal
//! branch of `a_q^{-1/2}` and the translation convention
//! `(T(z) psi)(x) = exp((i/hbar) p (x - q/2)) psi(x - q)`.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::cmatrix::{vec_dot_conj, CMatrix};
use crate::flow::{FlowError, FramePropagator, HagedornFrame};
use crate::gaussian::WignerGrid;
use crate::model::EffectiveHamiltonian;
use crate::phase::{hermitian_form, Vec2};
use crate::{CVec2, RMat2, RVec2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum HagedornError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("wavefunction gauge singular: |a_q| = {aq_abs:.3e}; rotate the grid")]
    SingularGauge { aq_abs: f64 },
    #[error("wavefunction does not decay at the grid edges (residual {residual:.3e})")]
    EdgeDecay { residual: f64 },
    #[error("frames disagree: relative propagation misses the target by {defect:.3e}")]
    FrameMismatch { defect: f64 },
}

fn log_factorials(n_max: usize) -> Vec<f64> {
    let mut lf = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        lf[n] = lf[n - 1] + (n as f64).ln();
    }
    lf
}

/// One propagator-expansion entry; sqrt-factorial ratios are accumulated in
/// log space so truncations up to n ~ 64 stay finite.
fn b_entry(n_pow: f64, m_val: C64, h0: C64, lf: &[f64], n: usize, m: usize) -> C64 {
    if m > n {
        return C64::new(0.0, 0.0);
    }
    let neg_m = -m_val;
    let (m_mag, m_arg) = (neg_m.norm(), neg_m.arg());
    let (h_mag, h_arg) = (h0.norm(), h0.arg());
    let ln_n = n_pow.ln();
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..=((n - m) / 2) {
        let e = n - m - 2 * k;
        if (h_mag == 0.0 && e > 0) || (m_mag == 0.0 && k > 0) {
            continue;
        }
        let mut log_mag = 0.5 * (lf[n] - lf[m])
            - k as f64 * std::f64::consts::LN_2
            - lf[e]
            - lf[k]
            + m as f64 * ln_n;
        if e > 0 {
            log_mag += e as f64 * h_mag.ln();
        }
        if k > 0 {
            log_mag += k as f64 * m_mag.ln();
        }
        let phase = e as f64 * h_arg + k as f64 * m_arg;
        acc += C64::from_polar(log_mag.exp(), phase);
    }
    acc
}

/// Expansion matrix of the propagated states over the moving frame;
/// `B[n][m]` is the amplitude of target level `m` in the evolved source `n`.
pub fn b_matrix(frame: &HagedornFrame, n_max: usize) -> CMatrix {
    let lf = log_factorials(n_max);
    CMatrix::from_fn(n_max + 1, n_max + 1, |n, m| {
        b_entry(frame.n, frame.m, frame.h0, &lf, n, m)
    })
}

/// Dual-basis expansion matrix, fixed by enforcing biorthogonality:
/// `B~ = (B^{-1})^dag`, so that `conj(B~) B^T = I` exactly.
pub fn dual_b_matrix(frame: &HagedornFrame, n_max: usize) -> CMatrix {
    b_matrix(frame, n_max).lower_triangular_inverse().adjoint()
}

/// Gram matrix of the evolved states,
/// `O = exp(-2 Im(alpha)/hbar) N conj(B) B^T`; Hermitian positive definite.
pub fn overlap_matrix(frame: &HagedornFrame, hbar: f64, n_max: usize) -> CMatrix {
    let b = b_matrix(frame, n_max);
    let scale = C64::new(frame.n * (-2.0 * frame.alpha.im / hbar).exp(), 0.0);
    b.conj().mul(&b.transpose()).scale(scale)
}

/// Propagator matrix over a relative frame (initial data re-seated at the
/// segment start): `U[m][n] = exp(i alpha/hbar) sqrt(N) B[n][m]`, acting on
/// coefficient vectors in the orthonormal frame.
pub fn u_matrix_from_relative(rel: &HagedornFrame, hbar: f64, n_max: usize) -> CMatrix {
    let phase = (C64::new(0.0, 1.0) * rel.alpha / hbar).exp() * rel.n.sqrt();
    b_matrix(rel, n_max).transpose().scale(phase)
}

/// Propagator matrix block `<m, frame_to | U(t2 - t1) | n, frame_from>`.
///
/// The relative quantities are recomputed from the `from` frame; the `to`
/// frame is cross-checked to guard against mismatched bases.
pub fn u_matrix(
    k: &EffectiveHamiltonian,
    hbar: f64,
    from: &HagedornFrame,
    to: &HagedornFrame,
    n_max: usize,
) -> Result<CMatrix, HagedornError> {
    let prop = FramePropagator::new(*k, hbar, from.a, from.z)?;
    let rel = prop.frame_at(to.t - from.t)?;
    let defect = (rel.a - to.a).max_abs().max((rel.z - to.z).norm());
    if defect > 1e-6 {
        return Err(HagedornError::FrameMismatch { defect });
    }
    Ok(u_matrix_from_relative(&rel, hbar, n_max))
}

/// Matrix of the Lindblad coupling `L = A(l, chi)` in the orthonormal moving
/// basis: `<n|L|m> = h(a,l) sqrt(n+1) d_{m,n+1} + h(conj a, l) sqrt(n) d_{m,n-1}
/// + sqrt(2/hbar) h(z_t - conj(chi), l) d_{nm}`.
pub fn l_matrix_orthonormal(
    frame: &HagedornFrame,
    l: &CVec2,
    chi: &CVec2,
    hbar: f64,
    n_max: usize,
) -> CMatrix {
    let hp = hermitian_form(&frame.a, l);
    let hm = hermitian_form(&frame.a.conj(), l);
    let shift = frame.z.to_complex() - chi.conj();
    let diag = hermitian_form(&shift, l) * (2.0 / hbar).sqrt();
    let mut out = CMatrix::zeros(n_max + 1, n_max + 1);
    for n in 0..=n_max {
        out[(n, n)] = diag;
        if n < n_max {
            out[(n, n + 1)] = hp * ((n + 1) as f64).sqrt();
            out[(n + 1, n)] = hm * ((n + 1) as f64).sqrt();
        }
    }
    out
}

/// The same coupling in the non-orthogonal evolved basis,
/// `L_non = B^{-T} L_ortho B^T` (equivalently `conj(B~) L_ortho B^T`).
///
/// The product is assembled one level above the requested truncation and
/// clipped: the raising part of `L_ortho` reaches through level
/// `n_max + 1`, and dropping it would corrupt the last column.
pub fn l_matrix_nonorthogonal(
    frame: &HagedornFrame,
    l: &CVec2,
    chi: &CVec2,
    hbar: f64,
    n_max: usize,
) -> CMatrix {
    let b = b_matrix(frame, n_max + 1);
    let lo = l_matrix_orthonormal(frame, l, chi, hbar, n_max + 1);
    let binv_t = b.lower_triangular_inverse().transpose();
    let full = binv_t.mul(&lo).mul(&b.transpose());
    CMatrix::from_fn(n_max + 1, n_max + 1, |i, j| full[(i, j)])
}

/// Ladder representation of the quadratures in the moving frame:
/// `x - x_t = i sqrt(2 hbar) [h(a, e_p) A + h(conj a, e_p) A^dag]` and
/// `p - p_t = -i sqrt(2 hbar) [h(a, e_q) A + h(conj a, e_q) A^dag]`.
pub fn quadrature_matrices(frame: &HagedornFrame, hbar: f64, n_max: usize) -> (CMatrix, CMatrix) {
    let eq: CVec2 = Vec2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let ep: CVec2 = Vec2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let i_s = C64::new(0.0, (2.0 * hbar).sqrt());
    let x_plus = i_s * hermitian_form(&frame.a.conj(), &ep);
    let x_minus = i_s * hermitian_form(&frame.a, &ep);
    let p_plus = -i_s * hermitian_form(&frame.a.conj(), &eq);
    let p_minus = -i_s * hermitian_form(&frame.a, &eq);
    let mut x = CMatrix::zeros(n_max + 1, n_max + 1);
    let mut p = CMatrix::zeros(n_max + 1, n_max + 1);
    for n in 0..=n_max {
        x[(n, n)] = C64::new(frame.z.q, 0.0);
        p[(n, n)] = C64::new(frame.z.p, 0.0);
        if n < n_max {
            let root = ((n + 1) as f64).sqrt();
            // <n|A|n+1> = sqrt(n+1); A^dag transposed.
            x[(n, n + 1)] = x_minus * root;
            x[(n + 1, n)] = x_plus * root;
            p[(n, n + 1)] = p_minus * root;
            p[(n + 1, n)] = p_plus * root;
        }
    }
    (x, p)
}

/// First and second moments of `x, p` for a coefficient vector in the
/// orthonormal moving basis (need not be normalised).
pub fn moments_from_orthonormal(frame: &HagedornFrame, hbar: f64, d: &[C64]) -> (RVec2, RMat2) {
    let n_max = d.len() - 1;
    let (x, p) = quadrature_matrices(frame, hbar, n_max);
    let norm2 = d.iter().map(|c| c.norm_sqr()).sum::<f64>();
    let xd = x.mul_vec(d);
    let pd = p.mul_vec(d);
    let x_mean = vec_dot_conj(d, &xd).re / norm2;
    let p_mean = vec_dot_conj(d, &pd).re / norm2;
    let x2 = vec_dot_conj(&xd, &xd).re / norm2;
    let p2 = vec_dot_conj(&pd, &pd).re / norm2;
    let xp = vec_dot_conj(&xd, &pd).re / norm2;
    let sigma = crate::phase::Mat2::new(
        x2 - x_mean * x_mean,
        xp - x_mean * p_mean,
        xp - x_mean * p_mean,
        p2 - p_mean * p_mean,
    );
    (Vec2::new(x_mean, p_mean), sigma)
}

/// All basis states `psi_n(x)`, `n <= n_max`, on the grid.
pub fn eval_basis_wavefunctions(
    frame: &HagedornFrame,
    hbar: f64,
    n_max: usize,
    xs: &[f64],
) -> Result<Vec<Vec<C64>>, HagedornError> {
    let a = frame.a;
    let aq_abs = a.q.norm();
    if aq_abs < 1e-10 {
        return Err(HagedornError::SingularGauge { aq_abs });
    }
    let (q, p) = (frame.z.q, frame.z.p);
    let prefactor =
        C64::new(1.0 / (std::f64::consts::PI * hbar).powf(0.25), 0.0) * a.q.sqrt().inv();
    let b_over_a = a.p / a.q;
    let mut levels = Vec::with_capacity(n_max + 1);
    let ground: Vec<C64> = xs
        .iter()
        .map(|&x| {
            let u = x - q;
            let quad = C64::new(0.0, 0.5 / hbar) * b_over_a * u * u;
            let trans = C64::new(0.0, p * (x - q / 2.0) / hbar);
            prefactor * (quad + trans).exp()
        })
        .collect();
    levels.push(ground);
    let scale = (2.0 / hbar).sqrt();
    for n in 0..n_max {
        let inv = (a.q * ((n + 1) as f64).sqrt()).inv();
        let root_n = (n as f64).sqrt();
        let next: Vec<C64> = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let mut v = C64::new(scale * (x - q), 0.0) * levels[n][i];
                if n > 0 {
                    v -= a.q.conj() * root_n * levels[n - 1][i];
                }
                v * inv
            })
            .collect();
        levels.push(next);
    }
    Ok(levels)
}

/// Basis state `psi_n(x)` on the grid.
pub fn eval_basis_wavefunction(
    n: usize,
    frame: &HagedornFrame,
    hbar: f64,
    xs: &[f64],
) -> Result<Vec<C64>, HagedornError> {
    Ok(eval_basis_wavefunctions(frame, hbar, n, xs)?.pop().expect("n_max + 1 levels"))
}

/// Superposition `sum_n d_n psi_n(x)` for orthonormal coefficients.
pub fn wavefunction_from_orthonormal(
    frame: &HagedornFrame,
    hbar: f64,
    d: &[C64],
    xs: &[f64],
) -> Result<Vec<C64>, HagedornError> {
    let levels = eval_basis_wavefunctions(frame, hbar, d.len() - 1, xs)?;
    let mut out = vec![C64::new(0.0, 0.0); xs.len()];
    for (coeff, level) in d.iter().zip(&levels) {
        if coeff.norm_sqr() == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(level) {
            *o += coeff * v;
        }
    }
    Ok(out)
}

/// Wigner transform of a wavefunction sampled on a uniform grid:
/// `W(x, p) = (1/2 pi hbar) int psi(x - s/2) conj(psi)(x + s/2) e^{ips/hbar} ds`,
/// evaluated by a direct sum over the half-shift index (the `s` samples align
/// with the `x` samples on a uniform grid, `s = 2 j dx`). The output is real
/// by construction of the symmetrised sum.
pub fn wigner_from_wavefunction(
    xs: &[f64],
    psi: &[C64],
    hbar: f64,
    q_stride: usize,
    np: usize,
    p_min: f64,
    p_max: f64,
) -> Result<WignerGrid, HagedornError> {
    wigner_from_wavefunction_windowed(xs, psi, hbar, q_stride, np, p_min, p_max, None)
}

/// Same transform restricted to an output window in `q` (grid nodes within
/// the window, decimated by `q_stride`).
#[allow(clippy::too_many_arguments)]
pub fn wigner_from_wavefunction_windowed(
    xs: &[f64],
    psi: &[C64],
    hbar: f64,
    q_stride: usize,
    np: usize,
    p_min: f64,
    p_max: f64,
    q_window: Option<(f64, f64)>,
) -> Result<WignerGrid, HagedornError> {
    assert_eq!(xs.len(), psi.len());
    assert!(xs.len() >= 4 && q_stride >= 1 && np >= 2);
    let n = xs.len();
    let dx = xs[1] - xs[0];
    let max_amp = psi.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let edge = psi[0].norm().max(psi[n - 1].norm());
    if edge > 1e-10 * max_amp.max(1e-300) {
        return Err(HagedornError::EdgeDecay { residual: edge / max_amp });
    }

    // Effective support: indices where |psi| is non-negligible.
    let thresh = 1e-13 * max_amp;
    let i_lo = psi.iter().position(|z| z.norm() > thresh).unwrap_or(0);
    let i_hi = psi.iter().rposition(|z| z.norm() > thresh).unwrap_or(n - 1);

    let (q_lo, q_hi) = q_window.unwrap_or((xs[0], xs[n - 1]));
    let iq_list: Vec<usize> = (0..n)
        .step_by(q_stride)
        .filter(|&i| xs[i] >= q_lo - 1e-12 && xs[i] <= q_hi + 1e-12)
        .collect();
    assert!(iq_list.len() >= 2, "q window excludes the grid");
    let nq = iq_list.len();
    let dp = (p_max - p_min) / (np - 1) as f64;
    let mut values = vec![0.0; nq * np];
    for (row, &iq) in iq_list.iter().enumerate() {
        let j_max = iq.saturating_sub(i_lo).min(i_hi.saturating_sub(iq));
        // g_j = psi(x - j dx) conj(psi)(x + j dx); g_{-j} = conj(g_j).
        let g: Vec<C64> = (0..=j_max).map(|j| psi[iq - j] * psi[iq + j].conj()).collect();
        for ip in 0..np {
            let p = p_min + ip as f64 * dp;
            // W = (dx / pi hbar) [g_0 + 2 Re sum_j g_j e^{2 i p j dx / hbar}]
            let phase_step = C64::from_polar(1.0, 2.0 * p * dx / hbar);
            let mut phase = phase_step;
            let mut acc = 0.5 * g[0].re;
            for gj in g.iter().skip(1) {
                acc += (gj * phase).re;
                phase *= phase_step;
            }
            values[row * np + ip] = 2.0 * acc * dx / (std::f64::consts::PI * hbar);
        }
    }
    Ok(WignerGrid {
        q_min: xs[iq_list[0]],
        q_max: xs[*iq_list.last().unwrap()],
        p_min,
        p_max,
        nq,
        np,
        values,
    })
}

/// Precomputed per-time basis data for grid-based jump propagation.
#[derive(Clone, Debug)]
pub struct BasisMatrices {
    pub t: f64,
    pub frame: HagedornFrame,
    pub b: CMatrix,
    pub b_dual: CMatrix,
    pub overlap: CMatrix,
    pub l_ortho: CMatrix,
    pub l_nonortho: CMatrix,
}

impl BasisMatrices {
    pub fn at_frame(
        frame: &HagedornFrame,
        l: &CVec2,
        chi: &CVec2,
        hbar: f64,
        n_max: usize,
    ) -> Self {
        let b = b_matrix(frame, n_max);
        let binv = b.lower_triangular_inverse();
        let b_dual = binv.adjoint();
        let scale = C64::new(frame.n * (-2.0 * frame.alpha.im / hbar).exp(), 0.0);
        let overlap = b.conj().mul(&b.transpose()).scale(scale);
        let l_ortho = l_matrix_orthonormal(frame, l, chi, hbar, n_max);
        let l_nonortho = l_matrix_nonorthogonal(frame, l, chi, hbar, n_max);
        BasisMatrices { t: frame.t, frame: *frame, b, b_dual, overlap, l_ortho, l_nonortho }
    }

    /// Orthonormal coefficients of a non-orthogonal vector `c`:
    /// `d = exp(i alpha/hbar) sqrt(N) B^T c`.
    pub fn to_orthonormal(&self, c: &[C64], hbar: f64) -> Vec<C64> {
        let phase =
            (C64::new(0.0, 1.0) * self.frame.alpha / hbar).exp() * self.frame.n.sqrt();
        self.b.transpose().mul_vec(c).into_iter().map(|x| x * phase).collect()
    }
}

/// Debug dump of a basis matrix as JSON (row-major, re/im pairs).
pub fn matrix_to_json(m: &CMatrix) -> String {
    serde_json::to_string(m).expect("matrix serialisation")
}

pub fn matrix_from_json(text: &str) -> Result<CMatrix, serde_json::Error> {
    serde_json::from_str(text)
}

/// Survival norm squared of an orthonormal coefficient vector under the
/// relative propagator: `||U c||^2 = exp(-2 Im(alpha)/hbar) N ||B^T c||^2`.
pub fn survival_norm_sqr(rel: &HagedornFrame, hbar: f64, c: &[C64]) -> f64 {
    let n_max = c.len() - 1;
    let b = b_matrix(rel, n_max);
    let bc = b.transpose().mul_vec(c);
    rel.n * (-2.0 * rel.alpha.im / hbar).exp() * bc.iter().map(|z| z.norm_sqr()).sum::<f64>()
}
