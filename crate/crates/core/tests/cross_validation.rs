//! Cross-validation of the basis-level machinery against the dense
//! truncated-Fock brute force, plus statistical checks that tie the jump
//! engines to the master-equation solution.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use qunravel::cmatrix::{vec_dot_conj, vec_norm, CMatrix};
use qunravel::dynamics::{
    integrate_deterministic, integrate_sse, lindblad_g_closed_form, lindblad_rhs, MethodTag,
    NoiseDriver,
};
use qunravel::ensemble::{run_ensemble, EnsembleOpts};
use qunravel::flow::{frame_norm_factor, FramePropagator, HagedornFrame};
use qunravel::gaussian::{covariance_from_g, hagedorn_from_g, GaussianState};
use qunravel::hagedorn::{
    dual_b_matrix, l_matrix_nonorthogonal, l_matrix_orthonormal, overlap_matrix,
};
use qunravel::jump::{run_scheme_a_forced, sample_jump_time};
use qunravel::model::{build_effective_k, lindbladian_to_ladder_params, ModelConfig};
use qunravel::oracle::{
    fidelity, fock_jump_trajectory, fock_lindblad_moments, fock_operators, fock_sse_trajectory,
    gaussian_to_fock, hagedorn_to_fock, DetStep, FockDensity,
};
use qunravel::phase::{Mat2, Vec2};

const HBAR: f64 = 1.0;

fn fig_model() -> ModelConfig {
    ModelConfig::position_measurement(1.0, 0.2, HBAR)
}

fn fig_start() -> GaussianState {
    GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0)
}

fn fig_propagator(model: &ModelConfig) -> FramePropagator {
    let k = build_effective_k(model);
    let a0 = hagedorn_from_g(&fig_start().g).unwrap();
    FramePropagator::new(k, HBAR, a0, fig_start().centre).unwrap()
}

fn frame_basis_fock(frame: &HagedornFrame, n: usize, n_max: usize, dim: usize) -> Vec<C64> {
    let mut d = vec![C64::new(0.0, 0.0); n_max + 1];
    d[n] = C64::new(1.0, 0.0);
    hagedorn_to_fock(frame, &d, HBAR, dim).unwrap()
}

#[test]
fn norm_factor_matches_dense_oracle() {
    let dim = 64;
    for model in [fig_model(), ModelConfig::damped_oscillator(1.0, 0.2, HBAR)] {
        let prop = fig_propagator(&model);
        let ops = fock_operators(&model, dim).unwrap();
        let psi0 = gaussian_to_fock(&prop.frame_at(0.0).unwrap(), HBAR, dim).unwrap();
        for t in [0.5, 1.5, 3.0] {
            let frame = prop.frame_at(t).unwrap();
            let dense_norm = vec_norm(&ops.nonhermitian_propagator(t).mul_vec(&psi0));
            let factor = frame_norm_factor(&frame, HBAR);
            assert!(
                (factor - dense_norm).abs() < 1e-6,
                "norm factor {factor} vs dense {dense_norm} at t = {t}"
            );
        }
    }
}

#[test]
fn overlap_matrix_matches_dense_gram() {
    let dim = 96;
    let n_max = 10;
    let model = fig_model();
    let prop = fig_propagator(&model);
    let ops = fock_operators(&model, dim).unwrap();
    let frame0 = prop.frame_at(0.0).unwrap();
    let frame1 = prop.frame_at(1.0).unwrap();
    let o = overlap_matrix(&frame1, HBAR, n_max);
    let propagator = ops.nonhermitian_propagator(1.0);
    let evolved: Vec<Vec<C64>> = (0..=n_max)
        .map(|n| propagator.mul_vec(&frame_basis_fock(&frame0, n, n_max, dim)))
        .collect();
    for m in 0..=n_max {
        for n in 0..=n_max {
            let dense = vec_dot_conj(&evolved[m], &evolved[n]);
            assert!(
                (o[(m, n)] - dense).norm() < 1e-6,
                "Gram entry ({m},{n}): {} vs {}",
                o[(m, n)],
                dense
            );
        }
    }
}

#[test]
fn coupling_matrix_matches_dense_elements() {
    let dim = 96;
    let n_max = 10;
    let model = fig_model();
    let (l, chi) = lindbladian_to_ladder_params(&model.lindbladian, HBAR).unwrap();
    let prop = fig_propagator(&model);
    let ops = fock_operators(&model, dim).unwrap();
    let frame = prop.frame_at(1.0).unwrap();
    let lm = l_matrix_orthonormal(&frame, &l, &chi, HBAR, n_max);
    let states: Vec<Vec<C64>> =
        (0..=n_max).map(|n| frame_basis_fock(&frame, n, n_max, dim)).collect();
    for n in 0..=n_max {
        for m in 0..=n_max {
            let dense = vec_dot_conj(
                &states[n],
                &ops.l.mul_banded_left(1, &column(&states[m])).data,
            );
            assert!(
                (lm[(n, m)] - dense).norm() < 1e-8,
                "<{n}|L|{m}>: {} vs {}",
                lm[(n, m)],
                dense
            );
        }
    }
}

fn column(v: &[C64]) -> CMatrix {
    CMatrix { rows: v.len(), cols: 1, data: v.to_vec() }
}

#[test]
fn nonorthogonal_coupling_matches_dense_elements() {
    // L in the evolved non-orthogonal basis equals the dense
    // <m, 0 | U^{-1} L U | n, 0> block.
    let dim = 96;
    let n_max = 8;
    let model = fig_model();
    let (l, chi) = lindbladian_to_ladder_params(&model.lindbladian, HBAR).unwrap();
    let prop = fig_propagator(&model);
    let ops = fock_operators(&model, dim).unwrap();
    let t = 1.0;
    let frame0 = prop.frame_at(0.0).unwrap();
    let frame = prop.frame_at(t).unwrap();
    let ln = l_matrix_nonorthogonal(&frame, &l, &chi, HBAR, n_max);
    let u = ops.nonhermitian_propagator(t);
    let u_inv = ops.k_eff.scale(C64::new(0.0, t / HBAR)).expm();
    let conj_op = u_inv.mul(&ops.l.mul_banded_left(1, &u));
    let states: Vec<Vec<C64>> =
        (0..=n_max).map(|n| frame_basis_fock(&frame0, n, n_max, dim)).collect();
    for m in 0..=n_max {
        for n in 0..=n_max {
            let dense = vec_dot_conj(&states[m], &conj_op.mul_vec(&states[n]));
            assert!(
                (ln[(m, n)] - dense).norm() < 1e-6,
                "L_non ({m},{n}): {} vs {}",
                ln[(m, n)],
                dense
            );
        }
    }
}

#[test]
fn dual_basis_matches_inverse_adjoint_construction() {
    // The dual family is the inverse-adjoint propagation of the initial
    // basis: expansion coefficients of exp(-(i/hbar) K^dag t) |m, 0> over the
    // frame at t must equal exp(i conj(alpha)/hbar) B~[m][j] / sqrt(N).
    let dim = 96;
    let n_max = 8;
    let model = fig_model();
    let prop = fig_propagator(&model);
    let ops = fock_operators(&model, dim).unwrap();
    let t = 1.0;
    let frame0 = prop.frame_at(0.0).unwrap();
    let frame = prop.frame_at(t).unwrap();
    let dual = dual_b_matrix(&frame, n_max);
    let phase = (C64::new(0.0, 1.0) * frame.alpha.conj() / HBAR).exp() / frame.n.sqrt();
    let u_dual = ops.k_eff.adjoint().scale(C64::new(0.0, -t / HBAR)).expm();
    for m in 0..=n_max {
        let evolved = u_dual.mul_vec(&frame_basis_fock(&frame0, m, n_max, dim));
        for j in 0..=n_max {
            let bra = frame_basis_fock(&frame, j, n_max, dim);
            let dense = vec_dot_conj(&bra, &evolved);
            let expect = phase * dual[(m, j)];
            assert!(
                (expect - dense).norm() < 1e-8,
                "dual ({m},{j}): {expect} vs {dense}"
            );
        }
    }
}

#[test]
fn sampled_jump_time_matches_dense_waiting_time() {
    // Oscillator ground state under position measurement, R = 0.5.
    let dim = 64;
    let model = fig_model();
    let k = build_effective_k(&model);
    let a0 = hagedorn_from_g(&Mat2::identity()).unwrap();
    let seg = FramePropagator::new(k, HBAR, a0, Vec2::zero()).unwrap();
    let c = vec![C64::new(1.0, 0.0)];
    let r = qunravel::dynamics::UniformSample { value: 0.5, draw_index: 0 };
    let t_scheme = sample_jump_time(&c, &seg, r, 30.0).unwrap().expect("crossing");

    let ops = fock_operators(&model, dim).unwrap();
    let mut psi0 = vec![C64::new(0.0, 0.0); dim];
    psi0[0] = C64::new(1.0, 0.0);
    let survival = |t: f64| vec_norm(&ops.nonhermitian_propagator(t).mul_vec(&psi0)).powi(2);
    let (mut lo, mut hi) = (0.0, 30.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if survival(mid) > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_dense = 0.5 * (lo + hi);
    assert!(
        (t_scheme - t_dense).abs() < 1e-4,
        "jump time {t_scheme} vs dense {t_dense}"
    );
}

#[test]
fn post_jump_state_matches_dense_oracle() {
    // One forced jump at t = 1: scheme A post-jump state vs L U psi0 dense.
    let dim = 96;
    let model = fig_model();
    let initial = fig_start();
    let traj = run_scheme_a_forced(&model, &initial, &[1.0], 1.5, 0.5).unwrap();
    let (frame, d) = &traj.post_jump_states[0];
    let psi_scheme = hagedorn_to_fock(frame, d, HBAR, dim).unwrap();

    let ops = fock_operators(&model, dim).unwrap();
    let frame0 = HagedornFrame::initial(hagedorn_from_g(&initial.g).unwrap(), initial.centre);
    let psi0 = gaussian_to_fock(&frame0, HBAR, dim).unwrap();
    let evolved = ops.nonhermitian_propagator(1.0).mul_vec(&psi0);
    let jumped = ops.l.mul_banded_left(1, &column(&evolved)).data;
    let f = fidelity(&psi_scheme, &jumped);
    assert!(f > 1.0 - 1e-8, "post-jump fidelity {f}");
}

#[test]
fn dense_lindblad_moments_match_gaussian_solution() {
    // First/second moments of the D = 96 master equation against the
    // Gaussian-parameter solution at t = 5.
    let model = fig_model();
    let initial = fig_start();
    let frame0 = HagedornFrame::initial(hagedorn_from_g(&initial.g).unwrap(), initial.centre);
    let psi0 = gaussian_to_fock(&frame0, HBAR, 96).unwrap();
    let rho0 = FockDensity::pure(&psi0);
    let samples = fock_lindblad_moments(&rho0, &model, 5.0, 2e-3, 2500).unwrap();
    let (t_end, mean, sigma) = samples.last().unwrap();
    assert_eq!(*t_end, 5.0);

    let reference =
        integrate_deterministic(lindblad_rhs, &initial, &model, 5.0, 1e-3, MethodTag::Lindblad)
            .unwrap();
    let z_ref = reference.centres.last().unwrap();
    let g_ref = lindblad_g_closed_form(&initial.g, &model, 5.0).unwrap();
    let sigma_ref =
        covariance_from_g(&GaussianState { centre: *z_ref, g: g_ref }, HBAR).unwrap();
    assert!((*mean - *z_ref).norm() < 1e-5, "centre {mean:?} vs {z_ref:?}");
    assert!(
        (*sigma - sigma_ref).max_abs() < 1e-5,
        "sigma deviation {:.2e}",
        (*sigma - sigma_ref).max_abs()
    );
}

#[test]
fn dense_sse_follows_parameter_sse_with_shared_noise() {
    let model = fig_model();
    let initial = fig_start();
    let (t_end, dt) = (2.0, 1e-4);
    let mut driver_param = NoiseDriver::new(77, 0);
    let param = integrate_sse(&initial, &model, t_end, dt, &mut driver_param).unwrap();

    let frame0 = HagedornFrame::initial(hagedorn_from_g(&initial.g).unwrap(), initial.centre);
    let psi0 = gaussian_to_fock(&frame0, HBAR, 80).unwrap();
    let mut driver_dense = NoiseDriver::new(77, 0);
    let dense = fock_sse_trajectory(&psi0, &model, t_end, dt, &mut driver_dense).unwrap();

    let mut max_dev: f64 = 0.0;
    for k in (0..param.times.len()).step_by(1000) {
        let dev = (param.centres[k] - dense.means[k]).norm();
        max_dev = max_dev.max(dev);
    }
    assert!(max_dev < 5e-3, "shared-noise centre deviation {max_dev:.2e}");
}

#[test]
fn jump_counts_match_lindblad_rate_integral() {
    // Mean jump count over [0, 3] against (1/hbar) int Tr(rho L^dag L) dt,
    // within three standard errors over 2000 dense trajectories; the
    // grid-based scheme B ensemble must agree with the same integral.
    let model = fig_model();
    let initial = fig_start();
    let t_end = 3.0;

    // Reference: <L^dag L>(t) = |L(z)|^2 + tr(Gamma Sigma) + Weyl constant
    // along the Lindblad solution, integrated by Simpson on its grid.
    let dt_ref = 1e-3;
    let reference =
        integrate_deterministic(lindblad_rhs, &initial, &model, t_end, dt_ref, MethodTag::Lindblad)
            .unwrap();
    let rate = |k: usize| {
        let z = reference.centres[k];
        let sigma = covariance_from_g(&reference.state(k), HBAR).unwrap();
        let lv = model.lindbladian.value(&z);
        let weyl =
            (C64::new(0.0, 1.0) * model.lindbladian.grad_omega_grad()).re * HBAR / 2.0;
        (lv.norm_sqr() + (model.lindbladian.gamma_re() * sigma).trace() + weyl) / HBAR
    };
    let n_panels = reference.times.len() - 1;
    let mut integral = rate(0) + rate(n_panels);
    for j in 1..n_panels {
        integral += rate(j) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    integral *= dt_ref / 3.0;

    let n_runs = 2000u64;
    let dim = 64;
    let frame0 = HagedornFrame::initial(hagedorn_from_g(&initial.g).unwrap(), initial.centre);
    let psi0 = gaussian_to_fock(&frame0, HBAR, dim).unwrap();
    let counts: Vec<f64> = (0..n_runs)
        .into_par_iter()
        .map(|idx| {
            let mut driver = NoiseDriver::new(555, idx);
            let rec =
                fock_jump_trajectory(&psi0, &model, t_end, 2e-3, &mut driver, DetStep::Rk4)
                    .unwrap();
            rec.jump_times.len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / n_runs as f64;
    let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n_runs - 1) as f64;
    let se = (var / n_runs as f64).sqrt();
    assert!(
        (mean - integral).abs() <= 3.0 * se,
        "dense mean count {mean:.4} vs integral {integral:.4} (3 SE = {:.4})",
        3.0 * se
    );

    // Scheme B ensembles report the same mean count.
    let opts = EnsembleOpts { t_end, dt: 1e-2, out_stride: 30, n_max: 24 };
    let stats = run_ensemble(MethodTag::JumpB, &model, &initial, &opts, 2000, 556).unwrap();
    let mean_b = *stats.mean_jumps.last().unwrap();
    assert!(
        (mean_b - integral).abs() <= 3.0 * se.max(0.03),
        "scheme B mean count {mean_b:.4} vs integral {integral:.4}"
    );
}
