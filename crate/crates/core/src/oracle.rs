//! Dense truncated-Fock brute force.
//!
//! Everything here exists to cross-check the parameter-level and basis-level
//! routes: direct master-equation integration, the naive grid jump algorithm,
//! direct state-vector SSE integration, and dense non-Hermitian propagators.
//! Operators are banded in the number basis (bandwidth 1 for linear, 2 for
//! quadratic), which keeps dense stepping affordable at D ~ 96.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::cmatrix::{vec_dot_conj, vec_norm, CMatrix};
use crate::dynamics::NoiseDriver;
use crate::flow::HagedornFrame;
use crate::hagedorn::{eval_basis_wavefunctions, wavefunction_from_orthonormal, HagedornError};
use crate::model::ModelConfig;
use crate::phase::{Mat2, Vec2};
use crate::{RMat2, RVec2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum OracleError {
    #[error("truncation leak: top-level population {population:.3e} exceeds 1e-6")]
    TruncationLeak { population: f64 },
    #[error("state normalisation lost: norm = {norm}")]
    NotNormalised { norm: f64 },
    #[error("dimension too small: {dim} < 8")]
    DimensionTooSmall { dim: usize },
    #[error(transparent)]
    Hagedorn(#[from] HagedornError),
}

/// Dense number-basis operators for one model.
#[derive(Clone, Debug)]
pub struct FockOperators {
    pub dim: usize,
    pub hbar: f64,
    pub x: CMatrix,
    pub p: CMatrix,
    pub h: CMatrix,
    pub l: CMatrix,
    pub l_dag: CMatrix,
    pub l_dag_l: CMatrix,
    /// `K = H - (i/2) L^dag L`, the non-Hermitian generator.
    pub k_eff: CMatrix,
}

/// `x = sqrt(hbar/2)(a + a^dag)`, `p = i sqrt(hbar/2)(a^dag - a)`, with `H`
/// and `L` assembled from the model coefficients (Weyl-symmetrised cross
/// term).
pub fn fock_operators(model: &ModelConfig, dim: usize) -> Result<FockOperators, OracleError> {
    if dim < 8 {
        return Err(OracleError::DimensionTooSmall { dim });
    }
    let hbar = model.hbar;
    let mut a = CMatrix::zeros(dim, dim);
    for n in 1..dim {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let adag = a.adjoint();
    let s = (hbar / 2.0).sqrt();
    let x = a.add(&adag).scale(C64::new(s, 0.0));
    let p = adag.sub(&a).scale(C64::new(0.0, s));

    let h2 = model.hamiltonian.h2;
    let h1 = model.hamiltonian.h1;
    let xx = x.mul_banded_left(1, &x);
    let pp = p.mul_banded_left(1, &p);
    let xp = x.mul_banded_left(1, &p);
    let px = p.mul_banded_left(1, &x);
    let mut h = CMatrix::identity(dim).scale(C64::new(model.hamiltonian.h0, 0.0));
    h.axpy(C64::new(h1.q, 0.0), &x);
    h.axpy(C64::new(h1.p, 0.0), &p);
    h.axpy(C64::new(0.5 * h2.m[0][0], 0.0), &xx);
    h.axpy(C64::new(0.5 * h2.m[1][1], 0.0), &pp);
    h.axpy(C64::new(0.5 * h2.m[0][1], 0.0), &xp);
    h.axpy(C64::new(0.5 * h2.m[0][1], 0.0), &px);

    let grad = model.lindbladian.grad;
    let mut l = CMatrix::identity(dim).scale(model.lindbladian.l0);
    l.axpy(grad.q, &x);
    l.axpy(grad.p, &p);
    let l_dag = l.adjoint();
    let l_dag_l = l_dag.mul_banded_left(1, &l);

    let mut k_eff = h.clone();
    k_eff.axpy(C64::new(0.0, -0.5), &l_dag_l);

    Ok(FockOperators { dim, hbar, x, p, h, l, l_dag, l_dag_l, k_eff })
}

impl FockOperators {
    pub fn expectation(&self, op: &CMatrix, psi: &[C64]) -> C64 {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        vec_dot_conj(psi, &op.mul_vec(psi)) / norm2
    }

    /// Mean and covariance of the quadratures in a pure state.
    pub fn moments_from_psi(&self, psi: &[C64]) -> (RVec2, RMat2) {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let xpsi = self.x.mul_banded_left(1, &column(psi)).into_column();
        let ppsi = self.p.mul_banded_left(1, &column(psi)).into_column();
        let x_mean = vec_dot_conj(psi, &xpsi).re / norm2;
        let p_mean = vec_dot_conj(psi, &ppsi).re / norm2;
        let x2 = vec_dot_conj(&xpsi, &xpsi).re / norm2;
        let p2 = vec_dot_conj(&ppsi, &ppsi).re / norm2;
        let xp = vec_dot_conj(&xpsi, &ppsi).re / norm2;
        let sigma = Mat2::new(
            x2 - x_mean * x_mean,
            xp - x_mean * p_mean,
            xp - x_mean * p_mean,
            p2 - p_mean * p_mean,
        );
        (Vec2::new(x_mean, p_mean), sigma)
    }

    /// Mean and covariance of the quadratures in a density matrix.
    pub fn moments_from_rho(&self, rho: &CMatrix) -> (RVec2, RMat2) {
        let tr = rho.trace().re;
        let mean_of = |op: &CMatrix| op.mul_banded_right(rho, 2).trace().re / tr;
        let x_mean = self.x.mul_banded_left(1, rho).trace().re / tr;
        let p_mean = self.p.mul_banded_left(1, rho).trace().re / tr;
        let xx = self.x.mul_banded_left(1, &self.x);
        let pp = self.p.mul_banded_left(1, &self.p);
        let xp = self.x.mul_banded_left(1, &self.p);
        let px = self.p.mul_banded_left(1, &self.x);
        let x2 = mean_of(&xx);
        let p2 = mean_of(&pp);
        let xp_sym = 0.5 * (mean_of(&xp) + mean_of(&px));
        let sigma = Mat2::new(
            x2 - x_mean * x_mean,
            xp_sym - x_mean * p_mean,
            xp_sym - x_mean * p_mean,
            p2 - p_mean * p_mean,
        );
        (Vec2::new(x_mean, p_mean), sigma)
    }

    /// Dense non-Hermitian propagator `exp(-(i/hbar) K t)`.
    pub fn nonhermitian_propagator(&self, t: f64) -> CMatrix {
        self.k_eff.scale(C64::new(0.0, -t / self.hbar)).expm()
    }
}

fn column(v: &[C64]) -> CMatrix {
    CMatrix { rows: v.len(), cols: 1, data: v.to_vec() }
}

trait IntoColumn {
    fn into_column(self) -> Vec<C64>;
}

impl IntoColumn for CMatrix {
    fn into_column(self) -> Vec<C64> {
        self.data
    }
}

/// Dense density matrix with its sanity checks.
#[derive(Clone, Debug)]
pub struct FockDensity {
    pub rho: CMatrix,
}

impl FockDensity {
    pub fn pure(psi: &[C64]) -> Self {
        let n = psi.len();
        let mut rho = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                rho[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        FockDensity { rho }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
        self.rho.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.rho.hermiticity_error()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.rho.hermitian_eigenvalues()[0]
    }

    pub fn population(&self, n: usize) -> f64 {
        self.rho[(n, n)].re
    }
}

/// Default projection grid for Fock-coefficient quadrature.
pub fn projection_grid() -> Vec<f64> {
    let n = 4096;
    let half = 12.0;
    (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
}

/// Project a Hagedorn-frame superposition onto Fock coefficients by
/// quadrature overlaps with the number-basis eigenfunctions.
pub fn hagedorn_to_fock(
    frame: &HagedornFrame,
    d: &[C64],
    hbar: f64,
    dim: usize,
) -> Result<Vec<C64>, OracleError> {
    let xs = projection_grid();
    let psi = wavefunction_from_orthonormal(frame, hbar, d, &xs)?;
    fock_from_position(&xs, &psi, hbar, dim)
}

/// Project a position-space wavefunction onto the first `dim` number states.
pub fn fock_from_position(
    xs: &[f64],
    psi: &[C64],
    hbar: f64,
    dim: usize,
) -> Result<Vec<C64>, OracleError> {
    let std_frame = HagedornFrame::initial(
        Vec2::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0)),
        Vec2::zero(),
    );
    let basis = eval_basis_wavefunctions(&std_frame, hbar, dim - 1, xs)?;
    let dx = xs[1] - xs[0];
    let coeffs: Vec<C64> = basis
        .iter()
        .map(|phi| {
            phi.iter().zip(psi).map(|(b, v)| b.conj() * v).sum::<C64>() * dx
        })
        .collect();
    Ok(coeffs)
}

/// Gaussian initial state as Fock coefficients.
pub fn gaussian_to_fock(
    frame: &HagedornFrame,
    hbar: f64,
    dim: usize,
) -> Result<Vec<C64>, OracleError> {
    let mut d = vec![C64::new(0.0, 0.0); 1];
    d[0] = C64::new(1.0, 0.0);
    hagedorn_to_fock(frame, &d, hbar, dim)
}

fn leak_check(top: f64) -> Result<(), OracleError> {
    if top > 1e-6 {
        return Err(OracleError::TruncationLeak { population: top });
    }
    Ok(())
}

/// Lindblad right-hand side
/// `(1/hbar)(-i[H, rho] + L rho L^dag - (1/2){L^dag L, rho})`.
fn lindblad_rhs_dense(ops: &FockOperators, rho: &CMatrix) -> CMatrix {
    let i = C64::new(0.0, 1.0);
    let inv = C64::new(1.0 / ops.hbar, 0.0);
    let h_rho = ops.h.mul_banded_left(2, rho);
    let rho_h = rho.mul_banded_right(&ops.h, 2);
    let l_rho = ops.l.mul_banded_left(1, rho);
    let l_rho_ldag = l_rho.mul_banded_right(&ops.l_dag, 1);
    let ldl_rho = ops.l_dag_l.mul_banded_left(2, rho);
    let rho_ldl = rho.mul_banded_right(&ops.l_dag_l, 2);
    let mut out = h_rho.sub(&rho_h).scale(-i);
    out.axpy(C64::new(1.0, 0.0), &l_rho_ldag);
    out.axpy(C64::new(-0.5, 0.0), &ldl_rho);
    out.axpy(C64::new(-0.5, 0.0), &rho_ldl);
    out.scale(inv)
}

/// RK4 integration of the master equation with per-step trace renormalisation
/// and truncation-leak monitoring.
pub fn fock_lindblad_evolve(
    rho0: &FockDensity,
    model: &ModelConfig,
    t_end: f64,
    dt: f64,
) -> Result<FockDensity, OracleError> {
    let ops = fock_operators(model, rho0.rho.rows)?;
    let n = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / n as f64;
    let mut rho = rho0.rho.clone();
    for _ in 0..n {
        let k1 = lindblad_rhs_dense(&ops, &rho);
        let mut r2 = rho.clone();
        r2.axpy(C64::new(dt / 2.0, 0.0), &k1);
        let k2 = lindblad_rhs_dense(&ops, &r2);
        let mut r3 = rho.clone();
        r3.axpy(C64::new(dt / 2.0, 0.0), &k2);
        let k3 = lindblad_rhs_dense(&ops, &r3);
        let mut r4 = rho.clone();
        r4.axpy(C64::new(dt, 0.0), &k3);
        let k4 = lindblad_rhs_dense(&ops, &r4);
        rho.axpy(C64::new(dt / 6.0, 0.0), &k1);
        rho.axpy(C64::new(dt / 3.0, 0.0), &k2);
        rho.axpy(C64::new(dt / 3.0, 0.0), &k3);
        rho.axpy(C64::new(dt / 6.0, 0.0), &k4);
        let tr = rho.trace().re;
        rho = rho.scale(C64::new(1.0 / tr, 0.0));
    }
    let dim = rho.rows;
    leak_check(rho[(dim - 1, dim - 1)].re.max(rho[(dim - 2, dim - 2)].re))?;
    Ok(FockDensity { rho })
}

/// Moments of the master-equation solution sampled along the grid.
pub fn fock_lindblad_moments(
    rho0: &FockDensity,
    model: &ModelConfig,
    t_end: f64,
    dt: f64,
    out_stride: usize,
) -> Result<Vec<(f64, RVec2, RMat2)>, OracleError> {
    let ops = fock_operators(model, rho0.rho.rows)?;
    let n = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / n as f64;
    let mut rho = rho0.rho.clone();
    let mut samples = Vec::new();
    let (m0, s0) = ops.moments_from_rho(&rho);
    samples.push((0.0, m0, s0));
    for k in 0..n {
        let k1 = lindblad_rhs_dense(&ops, &rho);
        let mut r2 = rho.clone();
        r2.axpy(C64::new(dt / 2.0, 0.0), &k1);
        let k2 = lindblad_rhs_dense(&ops, &r2);
        let mut r3 = rho.clone();
        r3.axpy(C64::new(dt / 2.0, 0.0), &k2);
        let k3 = lindblad_rhs_dense(&ops, &r3);
        let mut r4 = rho.clone();
        r4.axpy(C64::new(dt, 0.0), &k3);
        let k4 = lindblad_rhs_dense(&ops, &r4);
        rho.axpy(C64::new(dt / 6.0, 0.0), &k1);
        rho.axpy(C64::new(dt / 3.0, 0.0), &k2);
        rho.axpy(C64::new(dt / 3.0, 0.0), &k3);
        rho.axpy(C64::new(dt / 6.0, 0.0), &k4);
        let tr = rho.trace().re;
        rho = rho.scale(C64::new(1.0 / tr, 0.0));
        if (k + 1) % out_stride == 0 || k + 1 == n {
            let (mean, sigma) = ops.moments_from_rho(&rho);
            samples.push(((k + 1) as f64 * dt, mean, sigma));
        }
    }
    let dim = rho.rows;
    leak_check(rho[(dim - 1, dim - 1)].re.max(rho[(dim - 2, dim - 2)].re))?;
    Ok(samples)
}

/// Position-space synthesis of a Fock coefficient vector on the grid.
pub fn position_wavefunction(
    psi_fock: &[C64],
    hbar: f64,
    xs: &[f64],
) -> Result<Vec<C64>, OracleError> {
    let std_frame = HagedornFrame::initial(
        Vec2::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0)),
        Vec2::zero(),
    );
    let basis = eval_basis_wavefunctions(&std_frame, hbar, psi_fock.len() - 1, xs)?;
    let mut out = vec![C64::new(0.0, 0.0); xs.len()];
    for (coeff, level) in psi_fock.iter().zip(&basis) {
        if coeff.norm_sqr() == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(level) {
            *o += coeff * v;
        }
    }
    Ok(out)
}

/// Record of one dense trajectory.
#[derive(Clone, Debug)]
pub struct FockRecord {
    pub times: Vec<f64>,
    pub means: Vec<RVec2>,
    pub sigmas: Vec<RMat2>,
    /// Squared survival norm of the unnormalised state since the last jump.
    pub norms: Vec<f64>,
    pub jump_times: Vec<f64>,
    pub psi_final: Vec<C64>,
}

/// Deterministic stepper for the jump algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetStep {
    /// First-order Euler, exactly as the naive algorithm lists it.
    Euler,
    /// Classic RK4 on the same generator, for accuracy comparisons.
    Rk4,
}

fn nonherm_deriv(ops: &FockOperators, psi: &[C64]) -> Vec<C64> {
    // -(i/hbar) K psi
    let kpsi = ops.k_eff.mul_banded_left(2, &column(psi)).into_column();
    kpsi.into_iter().map(|z| z * C64::new(0.0, -1.0 / ops.hbar)).collect()
}

fn det_step(ops: &FockOperators, psi: &[C64], dt: f64, scheme: DetStep) -> Vec<C64> {
    match scheme {
        DetStep::Euler => {
            let d = nonherm_deriv(ops, psi);
            psi.iter().zip(&d).map(|(a, b)| a + b * dt).collect()
        }
        DetStep::Rk4 => {
            let k1 = nonherm_deriv(ops, psi);
            let y2: Vec<C64> = psi.iter().zip(&k1).map(|(a, b)| a + b * (dt / 2.0)).collect();
            let k2 = nonherm_deriv(ops, &y2);
            let y3: Vec<C64> = psi.iter().zip(&k2).map(|(a, b)| a + b * (dt / 2.0)).collect();
            let k3 = nonherm_deriv(ops, &y3);
            let y4: Vec<C64> = psi.iter().zip(&k3).map(|(a, b)| a + b * dt).collect();
            let k4 = nonherm_deriv(ops, &y4);
            psi.iter()
                .enumerate()
                .map(|(i, a)| a + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
                .collect()
        }
    }
}

/// The naive grid jump algorithm: survival test `R >= ||psi||^2` per step,
/// jump `psi -> L psi / ||L psi||` with a fresh uniform draw, deterministic
/// non-Hermitian step otherwise, moments recorded on the normalised states.
pub fn fock_jump_trajectory(
    psi0: &[C64],
    model: &ModelConfig,
    t_end: f64,
    dt: f64,
    driver: &mut NoiseDriver,
    scheme: DetStep,
) -> Result<FockRecord, OracleError> {
    let ops = fock_operators(model, psi0.len())?;
    let norm0 = vec_norm(psi0);
    if (norm0 - 1.0).abs() > 1e-6 {
        return Err(OracleError::NotNormalised { norm: norm0 });
    }
    let n = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / n as f64;
    let mut psi = psi0.to_vec();
    let mut r = driver.uniform().value;
    let mut record = FockRecord {
        times: Vec::with_capacity(n + 1),
        means: Vec::with_capacity(n + 1),
        sigmas: Vec::with_capacity(n + 1),
        norms: Vec::with_capacity(n + 1),
        jump_times: Vec::new(),
        psi_final: Vec::new(),
    };
    let push = |t: f64, psi: &[C64], rec: &mut FockRecord| {
        let (mean, sigma) = ops.moments_from_psi(psi);
        rec.times.push(t);
        rec.means.push(mean);
        rec.sigmas.push(sigma);
        rec.norms.push(vec_norm(psi).powi(2));
    };
    push(0.0, &psi, &mut record);
    for k in 0..n {
        let t = k as f64 * dt;
        let norm2 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if r >= norm2 {
            // Jump: apply L, reset the norm, redraw the threshold.
            let lpsi = ops.l.mul_banded_left(1, &column(&psi)).into_column();
            let lnorm = vec_norm(&lpsi);
            if lnorm == 0.0 {
                return Err(OracleError::NotNormalised { norm: 0.0 });
            }
            psi = lpsi.iter().map(|z| z / lnorm).collect();
            r = driver.uniform().value;
            record.jump_times.push(t);
        } else {
            psi = det_step(&ops, &psi, dt, scheme);
        }
        push(t + dt, &psi, &mut record);
    }
    let top = psi[psi.len() - 1].norm_sqr().max(psi[psi.len() - 2].norm_sqr());
    leak_check(top / psi.iter().map(|z| z.norm_sqr()).sum::<f64>())?;
    // Final pass: states are recorded normalised through the moments; keep
    // the normalised end state.
    let norm = vec_norm(&psi);
    record.psi_final = psi.iter().map(|z| z / norm).collect();
    Ok(record)
}

/// Jump trajectory with a prescribed jump record; deterministic stretches use
/// the dense matrix exponential, so the only error is the truncation.
pub fn fock_jump_forced(
    psi0: &[C64],
    model: &ModelConfig,
    jump_times: &[f64],
    t_end: f64,
) -> Result<Vec<C64>, OracleError> {
    let ops = fock_operators(model, psi0.len())?;
    let mut psi = psi0.to_vec();
    let mut t_prev = 0.0;
    for &tj in jump_times {
        let u = ops.nonhermitian_propagator(tj - t_prev);
        psi = u.mul_vec(&psi);
        let lpsi = ops.l.mul_banded_left(1, &column(&psi)).into_column();
        let lnorm = vec_norm(&lpsi);
        psi = lpsi.iter().map(|z| z / lnorm).collect();
        t_prev = tj;
    }
    let u = ops.nonhermitian_propagator(t_end - t_prev);
    psi = u.mul_vec(&psi);
    let norm = vec_norm(&psi);
    let psi: Vec<C64> = psi.iter().map(|z| z / norm).collect();
    let top = psi[psi.len() - 1].norm_sqr().max(psi[psi.len() - 2].norm_sqr());
    leak_check(top)?;
    Ok(psi)
}

/// Euler-Maruyama integration of the state-vector SSE with per-step
/// renormalisation; shares the `(dxi_R, dxi_I)` stream layout of the
/// parameter-level integrator.
pub fn fock_sse_trajectory(
    psi0: &[C64],
    model: &ModelConfig,
    t_end: f64,
    dt: f64,
    driver: &mut NoiseDriver,
) -> Result<FockRecord, OracleError> {
    let ops = fock_operators(model, psi0.len())?;
    let norm0 = vec_norm(psi0);
    if (norm0 - 1.0).abs() > 1e-6 {
        return Err(OracleError::NotNormalised { norm: norm0 });
    }
    let n = (t_end / dt).round().max(1.0) as usize;
    let dt = t_end / n as f64;
    let hbar = ops.hbar;
    let mut psi = psi0.to_vec();
    let mut record = FockRecord {
        times: Vec::with_capacity(n + 1),
        means: Vec::with_capacity(n + 1),
        sigmas: Vec::with_capacity(n + 1),
        norms: Vec::with_capacity(n + 1),
        jump_times: Vec::new(),
        psi_final: Vec::new(),
    };
    let push = |t: f64, psi: &[C64], rec: &mut FockRecord| {
        let (mean, sigma) = ops.moments_from_psi(psi);
        rec.times.push(t);
        rec.means.push(mean);
        rec.sigmas.push(sigma);
        rec.norms.push(vec_norm(psi).powi(2));
    };
    push(0.0, &psi, &mut record);
    for k in 0..n {
        let (dxi_r, dxi_i) = driver.gaussian_pair(dt);
        let dxi = C64::new(dxi_r, dxi_i);
        let l_mean = ops.expectation(&ops.l, &psi);
        let hpsi = ops.h.mul_banded_left(2, &column(&psi)).into_column();
        let ldlpsi = ops.l_dag_l.mul_banded_left(2, &column(&psi)).into_column();
        let lpsi = ops.l.mul_banded_left(1, &column(&psi)).into_column();
        let i = C64::new(0.0, 1.0);
        let drift_scale = C64::new(dt / hbar, 0.0);
        let noise_scale = C64::new(1.0 / (2.0 * hbar).sqrt(), 0.0) * dxi;
        let next: Vec<C64> = (0..psi.len())
            .map(|j| {
                let drift = -i * hpsi[j] - 0.5 * ldlpsi[j] + l_mean.conj() * lpsi[j]
                    - 0.5 * l_mean.conj() * l_mean * psi[j];
                let noise = lpsi[j] - l_mean * psi[j];
                psi[j] + drift * drift_scale + noise * noise_scale
            })
            .collect();
        let norm = vec_norm(&next);
        psi = next.iter().map(|z| z / norm).collect();
        push((k + 1) as f64 * dt, &psi, &mut record);
    }
    let top = psi[psi.len() - 1].norm_sqr().max(psi[psi.len() - 2].norm_sqr());
    leak_check(top)?;
    record.psi_final = psi.clone();
    Ok(record)
}

/// Overlap fidelity `|<a|b>|^2 / (|a|^2 |b|^2)`.
pub fn fidelity(a: &[C64], b: &[C64]) -> f64 {
    let ov = vec_dot_conj(a, b).norm_sqr();
    let na: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    ov / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::hagedorn_from_g;
    use crate::phase::Mat2 as M2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ground(dim: usize) -> Vec<C64> {
        let mut psi = vec![c(0.0, 0.0); dim];
        psi[0] = c(1.0, 0.0);
        psi
    }

    #[test]
    fn ground_state_position_variance() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let ops = fock_operators(&model, 32).unwrap();
        let psi = ground(32);
        let (mean, sigma) = ops.moments_from_psi(&psi);
        assert!(mean.norm() < 1e-14);
        assert!((sigma.m[0][0] - 0.5).abs() < 1e-13); // <0|x^2|0> = hbar/2
        assert!((sigma.m[1][1] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn harmonic_spectrum_interior() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let ops = fock_operators(&model, 64).unwrap();
        let eig = ops.h.hermitian_eigenvalues();
        for n in 0..32 {
            assert!(
                (eig[n] - (n as f64 + 0.5)).abs() < 1e-8,
                "eigenvalue {n}: {}",
                eig[n]
            );
        }
    }

    #[test]
    fn canonical_commutator_interior() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let ops = fock_operators(&model, 64).unwrap();
        let comm = ops.x.mul_banded_left(1, &ops.p).sub(&ops.p.mul_banded_left(1, &ops.x));
        for i in 0..62 {
            for j in 0..62 {
                let expect = if i == j { c(0.0, 1.0) } else { c(0.0, 0.0) };
                assert!((comm[(i, j)] - expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn gaussian_projection_round_trip_moments() {
        // Project the squeezed state at (2, 0) and check its dense moments.
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let ops = fock_operators(&model, 96).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(2.0, 0.0),
        );
        let psi = gaussian_to_fock(&frame, 1.0, 96).unwrap();
        let norm = vec_norm(&psi);
        assert!((norm - 1.0).abs() < 1e-9, "projection norm {norm}");
        let (mean, sigma) = ops.moments_from_psi(&psi);
        assert!((mean - Vec2::new(2.0, 0.0)).norm() < 1e-8);
        assert!((sigma - M2::diag(0.25, 1.0)).max_abs() < 1e-8);
    }

    #[test]
    fn lindblad_conserves_energy_without_coupling() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let ops = fock_operators(&model, 48).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(1.0, 0.0),
        );
        let psi = gaussian_to_fock(&frame, 1.0, 48).unwrap();
        let rho0 = FockDensity::pure(&psi);
        let e0 = ops.h.mul_banded_left(2, &rho0.rho).trace().re;
        let rho = fock_lindblad_evolve(&rho0, &model, 2.0, 1e-3).unwrap();
        let e1 = ops.h.mul_banded_left(2, &rho.rho).trace().re;
        assert!((e0 - e1).abs() < 1e-8, "energy drift {}", e1 - e0);
        assert!((rho.trace() - 1.0).abs() < 1e-10);
        assert!(rho.hermiticity_error() < 1e-12);
    }

    #[test]
    fn lindblad_purity_decreases_under_position_measurement() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(2.0, 0.0),
        );
        let psi = gaussian_to_fock(&frame, 1.0, 64).unwrap();
        let rho0 = FockDensity::pure(&psi);
        let rho1 = fock_lindblad_evolve(&rho0, &model, 0.5, 1e-3).unwrap();
        let rho2 = fock_lindblad_evolve(&rho0, &model, 1.5, 1e-3).unwrap();
        assert!(rho1.purity() < 1.0 - 1e-4);
        assert!(rho2.purity() < rho1.purity());
        assert!(rho2.min_eigenvalue() > -1e-9);
    }

    #[test]
    fn forced_record_with_no_jumps_is_nonhermitian_propagation() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let ops = fock_operators(&model, 64).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(1.0, 0.0),
        );
        let psi0 = gaussian_to_fock(&frame, 1.0, 64).unwrap();
        let end = fock_jump_forced(&psi0, &model, &[], 1.0).unwrap();
        let u = ops.nonhermitian_propagator(1.0);
        let direct = u.mul_vec(&psi0);
        assert!(fidelity(&end, &direct) > 1.0 - 1e-12);
    }

    #[test]
    fn jump_trajectory_rk4_matches_exact_segment_replay() {
        // Replay the realised jump record through the dense propagator. The
        // naive grid loop spends one step on each jump, so the replay skips
        // dt of deterministic evolution per jump.
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let ops = fock_operators(&model, 80).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(2.0, 0.0),
        );
        let psi0 = gaussian_to_fock(&frame, 1.0, 80).unwrap();
        let dt = 1e-3;
        let mut driver = NoiseDriver::new(11, 0);
        let rec =
            fock_jump_trajectory(&psi0, &model, 3.0, dt, &mut driver, DetStep::Rk4).unwrap();
        assert!(!rec.jump_times.is_empty());
        let mut psi = psi0.clone();
        let mut t_prev = 0.0;
        for &tj in &rec.jump_times {
            psi = ops.nonhermitian_propagator(tj - t_prev).mul_vec(&psi);
            let lpsi = ops.l.mul_banded_left(1, &column(&psi)).into_column();
            let lnorm = vec_norm(&lpsi);
            psi = lpsi.iter().map(|z| z / lnorm).collect();
            t_prev = tj + dt;
        }
        psi = ops.nonhermitian_propagator(3.0 - t_prev).mul_vec(&psi);
        let f = fidelity(&rec.psi_final, &psi);
        assert!(f > 1.0 - 1e-9, "fidelity {f}, jumps at {:?}", rec.jump_times);
    }

    #[test]
    fn jump_survival_norm_monotone_between_jumps() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(2.0, 0.0),
        );
        let psi0 = gaussian_to_fock(&frame, 1.0, 80).unwrap();
        let mut driver = NoiseDriver::new(3, 0);
        let rec = fock_jump_trajectory(&psi0, &model, 3.0, 1e-3, &mut driver, DetStep::Euler)
            .unwrap();
        for w in rec.norms.windows(2) {
            // Norm may only rise when a jump resets it to 1.
            assert!(w[1] <= w[0] + 1e-12 || (w[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sse_dark_state_is_stationary() {
        let model = ModelConfig::damped_oscillator(1.0, 0.2, 1.0);
        let psi0 = ground(32);
        let mut driver = NoiseDriver::new(5, 0);
        let rec = fock_sse_trajectory(&psi0, &model, 1.0, 1e-3, &mut driver).unwrap();
        let end = &rec.psi_final;
        assert!(fidelity(end, &psi0) > 1.0 - 1e-8);
    }

    #[test]
    fn sse_without_coupling_is_unitary() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let ops = fock_operators(&model, 48).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(1.0, 0.0),
        );
        let psi0 = gaussian_to_fock(&frame, 1.0, 48).unwrap();
        let mut driver = NoiseDriver::new(7, 0);
        let rec = fock_sse_trajectory(&psi0, &model, 1.0, 1e-4, &mut driver).unwrap();
        // Record keeps unit norm exactly (renormalised integrator)...
        for n in &rec.norms {
            assert!((n - 1.0).abs() < 1e-9);
        }
        // ...and the state follows the unitary propagator to O(dt).
        let u = ops.k_eff.scale(c(0.0, -1.0)).expm();
        let direct = u.mul_vec(&psi0);
        assert!(fidelity(&rec.psi_final, &direct) > 1.0 - 1e-5);
    }

    #[test]
    fn sse_preserves_gaussianity() {
        // Third central moment of position stays small along the trajectory.
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let ops = fock_operators(&model, 80).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&M2::diag(2.0, 0.5)).unwrap(),
            Vec2::new(1.0, 0.0),
        );
        let psi0 = gaussian_to_fock(&frame, 1.0, 80).unwrap();
        let mut driver = NoiseDriver::new(13, 0);
        let rec = fock_sse_trajectory(&psi0, &model, 1.0, 1e-4, &mut driver).unwrap();
        let psi = &rec.psi_final;
        let (mean, _) = ops.moments_from_psi(psi);
        // <(x - <x>)^3> via dense powers.
        let mut xc = ops.x.clone();
        for i in 0..xc.rows {
            xc[(i, i)] -= c(mean.q, 0.0);
        }
        let x2 = xc.mul_banded_left(1, &xc);
        let x3 = x2.mul_banded_left(2, &xc);
        let third = ops.expectation(&x3, psi).re;
        assert!(third.abs() < 1e-3, "third moment {third}");
    }
}
