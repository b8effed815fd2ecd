//! The built-in verification suite: each check pins one quantitative
//! guarantee of the library, printed as a pass/fail line. The same checks
//! back the `validate` CLI subcommand and the acceptance test target.

use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::cmatrix::{vec_dot_conj, CMatrix};
use crate::dynamics::{
    integrate_deterministic, lindblad_g_closed_form, lindblad_rhs, sse_g_closed_form, sse_g_rhs,
    MethodTag, NoiseDriver,
};
use crate::ensemble::{compare_to_lindblad, run_ensemble, EnsembleOpts};
use crate::flow::{linearized_flow, FramePropagator, HagedornFrame};
use crate::gaussian::{covariance_from_g, hagedorn_from_g, GaussianState};
use crate::hagedorn::{u_matrix, wavefunction_from_orthonormal, wigner_from_wavefunction};
use crate::jump::{run_scheme_a, run_scheme_a_forced, run_scheme_b_forced, scheme_b_tables};
use crate::model::{build_effective_k, example1_reference, ModelConfig};
use crate::oracle::{fidelity, fock_jump_forced, fock_operators, gaussian_to_fock, hagedorn_to_fock};
use crate::phase::{Mat2, Vec2};
use crate::{CVec2, RMat2};

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: &'static str,
    pub name: &'static str,
    pub pass: bool,
    pub details: String,
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>3}: {} ({:.2?}) - {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed,
            self.details
        )
    }
}

fn result(
    id: &'static str,
    name: &'static str,
    start: Instant,
    pass: bool,
    details: String,
) -> CriterionResult {
    CriterionResult { id, name, pass, details, elapsed: start.elapsed() }
}

const FIG_OMEGA: f64 = 1.0;
const FIG_GAMMA: f64 = 0.2;
const FIG_ZETA: f64 = 2.0;
const HBAR: f64 = 1.0;

fn fig_start() -> GaussianState {
    GaussianState::squeezed(Vec2::new(2.0, 0.0), FIG_ZETA)
}

fn example_models() -> [ModelConfig; 2] {
    [
        ModelConfig::position_measurement(FIG_OMEGA, FIG_GAMMA, HBAR),
        ModelConfig::damped_oscillator(FIG_OMEGA, FIG_GAMMA, HBAR),
    ]
}

/// 1. Position-measurement Lindblad variances: RK4 vs closed form vs the
///    printed formulas, max abs error below 1e-6 over [0, 10] in under 1 s.
pub fn criterion_1() -> CriterionResult {
    let start = Instant::now();
    let model = ModelConfig::position_measurement(FIG_OMEGA, FIG_GAMMA, HBAR);
    let initial = fig_start();
    let traj = match integrate_deterministic(
        lindblad_rhs,
        &initial,
        &model,
        10.0,
        1e-3,
        MethodTag::Lindblad,
    ) {
        Ok(t) => t,
        Err(e) => return result("1", "lindblad variances", start, false, e.to_string()),
    };
    let mut max_err: f64 = 0.0;
    for k in (0..traj.times.len()).step_by(10) {
        let t = traj.times[k];
        let sigma_rk4 = covariance_from_g(&traj.state(k), HBAR).unwrap();
        let g_closed = lindblad_g_closed_form(&initial.g, &model, t).unwrap();
        let sigma_closed =
            covariance_from_g(&GaussianState { centre: initial.centre, g: g_closed }, HBAR)
                .unwrap();
        let printed = example1_reference(t, FIG_OMEGA, FIG_GAMMA, FIG_ZETA, HBAR).sigma_lindblad;
        for (a, b) in [
            (sigma_rk4.m[0][0], printed.m[0][0]),
            (sigma_rk4.m[1][1], printed.m[1][1]),
            (sigma_closed.m[0][0], printed.m[0][0]),
            (sigma_closed.m[1][1], printed.m[1][1]),
            (sigma_rk4.m[0][0], sigma_closed.m[0][0]),
            (sigma_rk4.m[1][1], sigma_closed.m[1][1]),
        ] {
            max_err = max_err.max((a - b).abs());
        }
    }
    let fast = start.elapsed() < Duration::from_secs(1);
    result(
        "1",
        "lindblad variances",
        start,
        max_err < 1e-6 && fast,
        format!("max |err| = {max_err:.2e}, within 1 s: {fast}"),
    )
}

/// 2. SSE covariance fixed point at t = 50 against the printed values.
pub fn criterion_2() -> CriterionResult {
    let start = Instant::now();
    let model = ModelConfig::position_measurement(FIG_OMEGA, FIG_GAMMA, HBAR);
    let initial = fig_start();
    let rhs = |s: &GaussianState, m: &ModelConfig| (Vec2::zero(), sse_g_rhs(&s.g, m));
    let traj = match integrate_deterministic(rhs, &initial, &model, 50.0, 1e-3, MethodTag::Sse) {
        Ok(t) => t,
        Err(e) => return result("2", "sse fixed point", start, false, e.to_string()),
    };
    let sigma = covariance_from_g(&traj.state(traj.times.len() - 1), HBAR).unwrap();
    let err_x = (sigma.m[0][0] - 0.4975).abs();
    let err_p = (sigma.m[1][1] - 0.5074).abs();
    let err_xp = (sigma.m[0][1] - 0.0495).abs();
    let fast = start.elapsed() < Duration::from_secs(1);
    result(
        "2",
        "sse fixed point",
        start,
        err_x < 1e-3 && err_p < 1e-3 && err_xp < 1e-3 && fast,
        format!(
            "dx2 = {:.4}, dp2 = {:.4}, dxp = {:.4}, within 1 s: {fast}",
            sigma.m[0][0], sigma.m[1][1], sigma.m[0][1]
        ),
    )
}

/// 3. `lambda = sqrt(26)/5` exactly for omega = 1, gamma = 0.2.
pub fn criterion_3() -> CriterionResult {
    let start = Instant::now();
    let lambda = example1_reference(0.0, 1.0, 0.2, 2.0, 1.0).lambda;
    let expect = 26.0f64.sqrt() / 5.0;
    let diff = (lambda - expect).abs();
    result(
        "3",
        "lambda printed value",
        start,
        diff <= f64::EPSILON,
        format!("lambda = {lambda:.16}, |diff| = {diff:.2e}"),
    )
}

/// 4. Complex symplecticity of `S(t)` along both models.
pub fn criterion_4() -> CriterionResult {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for model in example_models() {
        let k = build_effective_k(&model);
        for i in 0..1000 {
            let t = 10.0 * i as f64 / 999.0;
            worst = worst.max(linearized_flow(&k, t).symplectic_defect());
        }
    }
    result(
        "4",
        "symplecticity of the linearised flow",
        start,
        worst < 1e-10,
        format!("max |S^T Omega S - Omega| = {worst:.2e}"),
    )
}

/// 5. Purity `det G = 1` along the SSE / non-Hermitian width flow for random
///    pure starts.
pub fn criterion_5() -> CriterionResult {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    for model in example_models() {
        for _ in 0..50 {
            let g0 = random_pure_g(&mut rng);
            for i in 0..=100 {
                let t = 0.1 * i as f64;
                match sse_g_closed_form(&g0, &model, t) {
                    Ok(g) => worst = worst.max((g.det() - 1.0).abs()),
                    Err(e) => {
                        return result("5", "purity conservation", start, false, e.to_string())
                    }
                }
            }
        }
    }
    result(
        "5",
        "purity conservation",
        start,
        worst < 1e-8,
        format!("max |det G - 1| = {worst:.2e} over 100 random pure starts"),
    )
}

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

/// 6. Propagator matrix elements vs the dense Fock oracle at t = 1.
pub fn criterion_6() -> CriterionResult {
    let start = Instant::now();
    let dim = 96;
    let n_block = 8;
    let mut worst: f64 = 0.0;
    for model in example_models() {
        let k = build_effective_k(&model);
        let a0 = hagedorn_from_g(&Mat2::diag(FIG_ZETA, 1.0 / FIG_ZETA)).unwrap();
        let z0 = Vec2::new(2.0, 0.0);
        let prop = FramePropagator::new(k, HBAR, a0, z0).unwrap();
        let f0 = prop.frame_at(0.0).unwrap();
        let f1 = prop.frame_at(1.0).unwrap();
        let u = match u_matrix(&k, HBAR, &f0, &f1, n_block) {
            Ok(u) => u,
            Err(e) => return result("6", "propagator vs dense oracle", start, false, e.to_string()),
        };

        let ops = fock_operators(&model, dim).unwrap();
        let propagator = ops.nonhermitian_propagator(1.0);
        let kets: Vec<Vec<C64>> = (0..=n_block)
            .map(|n| basis_coeff_fock(&f0, n, n_block, dim))
            .collect();
        let bras: Vec<Vec<C64>> = (0..=n_block)
            .map(|m| basis_coeff_fock(&f1, m, n_block, dim))
            .collect();
        for (n, ket) in kets.iter().enumerate() {
            let evolved = propagator.mul_vec(ket);
            for (m, bra) in bras.iter().enumerate() {
                let dense = vec_dot_conj(bra, &evolved);
                worst = worst.max((u[(m, n)] - dense).norm());
            }
        }
    }
    let fast = start.elapsed() < Duration::from_secs(30);
    result(
        "6",
        "propagator vs dense oracle",
        start,
        worst < 1e-6 && fast,
        format!("max entry deviation = {worst:.2e}, within 30 s: {fast}"),
    )
}

fn basis_coeff_fock(frame: &HagedornFrame, n: usize, n_block: usize, dim: usize) -> Vec<C64> {
    let mut d = vec![C64::new(0.0, 0.0); n_block + 1];
    d[n] = C64::new(1.0, 0.0);
    hagedorn_to_fock(frame, &d, HBAR, dim).expect("projection")
}

/// 7. Non-commutative binomial expansion against operator powers.
pub fn criterion_7() -> CriterionResult {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(707);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n_pow = rng.gen_range(0.2..1.5);
        let m_val = C64::new(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
        let h0 = C64::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
        // Synthetic frame carrying (N, M, h0).
        let frame = HagedornFrame {
            n: n_pow,
            m: m_val,
            h0,
            ..HagedornFrame::initial(
                Vec2::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0)),
                Vec2::zero(),
            )
        };
        let b = crate::hagedorn::b_matrix(&frame, 10);
        let h_plus = C64::new(n_pow, 0.0);
        let h_minus = -m_val / n_pow;
        for n in 0..=10usize {
            let oracle = ladder_power_expansion(h_plus, h_minus, h0, n);
            for m in 0..=n {
                worst = worst.max((b[(n, m)] - oracle[m]).norm());
            }
        }
    }
    result(
        "7",
        "binomial expansion vs operator powers",
        start,
        worst < 1e-10,
        format!("max coefficient deviation = {worst:.2e} over 100 draws"),
    )
}

fn ladder_power_expansion(h_plus: C64, h_minus: C64, h0: C64, n: usize) -> Vec<C64> {
    let dim = n + 2;
    let mut state = vec![C64::new(0.0, 0.0); dim];
    state[0] = C64::new(1.0, 0.0);
    for _ in 0..n {
        let mut next = vec![C64::new(0.0, 0.0); dim];
        for (level, amp) in state.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            if level + 1 < dim {
                next[level + 1] += h_plus * ((level + 1) as f64).sqrt() * amp;
            }
            if level > 0 {
                next[level - 1] += h_minus * (level as f64).sqrt() * amp;
            }
            next[level] += h0 * amp;
        }
        state = next;
    }
    let mut fact = 1.0;
    for j in 1..=n {
        fact *= j as f64;
    }
    state.iter().map(|z| z / fact.sqrt()).collect()
}

/// 8. Transport identity `U(t) A(b, chi) U(-t) = A(S(t) b, Phi(t, chi))` on
///    the dense oracle's interior block.
pub fn criterion_8() -> CriterionResult {
    let start = Instant::now();
    let dim = 96;
    let interior = dim / 2;
    let t = 1.0;
    let mut worst: f64 = 0.0;
    for model in example_models() {
        let k = build_effective_k(&model);
        let ops = fock_operators(&model, dim).unwrap();
        let u = ops.nonhermitian_propagator(t);
        let u_inv = ops.k_eff.scale(C64::new(0.0, t / HBAR)).expm();
        let flow = linearized_flow(&k, t);
        for (b, chi) in [
            (
                Vec2::new(C64::new(1.0, 0.0), C64::new(0.0, 1.0)),
                Vec2::new(C64::new(0.3, 0.0), C64::new(-0.2, 0.0)),
            ),
            (
                Vec2::new(C64::new(0.7, -0.4), C64::new(0.2, 1.1)),
                Vec2::new(C64::new(-0.5, 0.2), C64::new(0.4, -0.1)),
            ),
        ] {
            let a_op = ladder_operator_dense(&ops, &b, &chi);
            let transported = u.mul(&a_op).mul(&u_inv);
            let expect = ladder_operator_dense(&ops, &flow.s.mul_vec(&b), &flow.apply(&chi));
            for i in 0..interior {
                for j in 0..interior {
                    worst = worst.max((transported[(i, j)] - expect[(i, j)]).norm());
                }
            }
        }
    }
    result(
        "8",
        "ladder transport identity on dense oracle",
        start,
        worst < 1e-6,
        format!("max interior deviation = {worst:.2e}"),
    )
}

fn ladder_operator_dense(
    ops: &crate::oracle::FockOperators,
    b: &CVec2,
    chi: &CVec2,
) -> CMatrix {
    // A(b, chi) = (i/sqrt(2 hbar)) [b_q (p - chi_p) - b_p (x - chi_q)].
    let s = C64::new(0.0, 1.0 / (2.0 * HBAR).sqrt());
    let mut out = ops.p.scale(s * b.q);
    out.axpy(-s * b.p, &ops.x);
    let shift = s * (b.p * chi.q - b.q * chi.p);
    for i in 0..out.rows {
        out[(i, i)] += shift;
    }
    out
}

/// 9. Scheme A, scheme B and the dense reference agree on a shared forced
///    jump record.
pub fn criterion_9() -> CriterionResult {
    let start = Instant::now();
    let model = ModelConfig::position_measurement(FIG_OMEGA, FIG_GAMMA, HBAR);
    let initial = fig_start();
    let jumps = [2.0, 4.5, 7.25];
    let t_end = 10.0;
    let dim = 96;

    let a = match run_scheme_a_forced(&model, &initial, &jumps, t_end, 0.5) {
        Ok(a) => a,
        Err(e) => return result("9", "forced-record equivalence", start, false, e.to_string()),
    };
    let tables = match scheme_b_tables(&model, &initial, t_end, 2.5e-3, 12, 400) {
        Ok(t) => t,
        Err(e) => return result("9", "forced-record equivalence", start, false, e.to_string()),
    };
    let b = match run_scheme_b_forced(&tables, &jumps) {
        Ok(b) => b,
        Err(e) => return result("9", "forced-record equivalence", start, false, e.to_string()),
    };

    let psi_a = hagedorn_to_fock(&a.final_state.0, &a.final_state.1, HBAR, dim).unwrap();
    let psi_b = hagedorn_to_fock(&b.final_state.0, &b.final_state.1, HBAR, dim).unwrap();
    let frame0 = HagedornFrame::initial(hagedorn_from_g(&initial.g).unwrap(), initial.centre);
    let psi0 = gaussian_to_fock(&frame0, HBAR, dim).unwrap();
    let psi_fock = fock_jump_forced(&psi0, &model, &jumps, t_end).unwrap();

    let f_ab = fidelity(&psi_a, &psi_b);
    let f_af = fidelity(&psi_a, &psi_fock);
    let f_bf = fidelity(&psi_b, &psi_fock);
    let min_f = f_ab.min(f_af).min(f_bf);
    result(
        "9",
        "forced-record equivalence",
        start,
        min_f >= 1.0 - 1e-6,
        format!("fidelities A-B = {f_ab:.9}, A-F = {f_af:.9}, B-F = {f_bf:.9}"),
    )
}

/// 10. Statistical recovery of the Lindblad dynamics by 2000-trajectory SSE
///     and jump ensembles for both examples.
pub fn criterion_10() -> CriterionResult {
    let start = Instant::now();
    let n_traj = 2000;
    let mut details = String::new();
    let mut pass = true;
    for (label, model) in [
        ("position", ModelConfig::position_measurement(FIG_OMEGA, FIG_GAMMA, HBAR)),
        ("damped", ModelConfig::damped_oscillator(FIG_OMEGA, FIG_GAMMA, HBAR)),
    ] {
        let initial = fig_start();
        for (method, opts) in [
            (MethodTag::Sse, EnsembleOpts { t_end: 5.0, dt: 1e-3, out_stride: 100, n_max: 32 }),
            (MethodTag::JumpB, EnsembleOpts { t_end: 5.0, dt: 1e-2, out_stride: 10, n_max: 32 }),
        ] {
            let stats = match run_ensemble(method, &model, &initial, &opts, n_traj, 2024) {
                Ok(s) => s,
                Err(e) => {
                    return result("10", "ensemble recovery", start, false, e.to_string())
                }
            };
            let report = match compare_to_lindblad(&stats, &model, &initial) {
                Ok(r) => r,
                Err(e) => {
                    return result("10", "ensemble recovery", start, false, e.to_string())
                }
            };
            for t in [1.0, 5.0] {
                let row = report.row_at(t);
                let ok = row.z_scores[0].abs() <= 3.0
                    && row.z_scores[1].abs() <= 3.0
                    && row.sigma_rel_frobenius <= 0.05;
                pass &= ok;
                details.push_str(&format!(
                    "{label}/{method} t={t}: z=({:+.2},{:+.2}) sigma={:.1}% | ",
                    row.z_scores[0],
                    row.z_scores[1],
                    100.0 * row.sigma_rel_frobenius
                ));
            }
        }
    }
    let fast = start.elapsed() < Duration::from_secs(300);
    result("10", "ensemble recovery", start, pass && fast, details)
}

/// 11. Damped-oscillator asymptotics: covariances near the vacuum at t = 10
///     under the stated envelope, and ground-state coefficient mass across
///     seeds.
pub fn criterion_11() -> CriterionResult {
    let start = Instant::now();
    let model = ModelConfig::damped_oscillator(FIG_OMEGA, FIG_GAMMA, HBAR);
    let initial = fig_start();
    let envelope = 0.2 * (-FIG_GAMMA * 10.0).exp();
    let vacuum = Mat2::diag(HBAR / 2.0, HBAR / 2.0);

    let g_lind = lindblad_g_closed_form(&initial.g, &model, 10.0).unwrap();
    let sigma_lind =
        covariance_from_g(&GaussianState { centre: initial.centre, g: g_lind }, HBAR).unwrap();
    let dev_lind = (sigma_lind - vacuum).max_abs();

    let g_sse = sse_g_closed_form(&initial.g, &model, 10.0).unwrap();
    let sigma_sse =
        covariance_from_g(&GaussianState { centre: initial.centre, g: g_sse }, HBAR).unwrap();
    let dev_sse = (sigma_sse - vacuum).max_abs();

    let opts = EnsembleOpts { t_end: 10.0, dt: 1e-2, out_stride: 100, n_max: 32 };
    let stats = match run_ensemble(MethodTag::JumpB, &model, &initial, &opts, 500, 1111) {
        Ok(s) => s,
        Err(e) => return result("11", "damped-oscillator asymptotics", start, false, e.to_string()),
    };
    let dev_jump = (stats.sigma_mix.last().unwrap().symmetrize() - vacuum).max_abs();

    // Ground-state coefficient mass across 200 seeded runs.
    let tables = scheme_b_tables(&model, &initial, 10.0, 1e-2, 32, 1000).unwrap();
    let mut reached = 0usize;
    let n_runs = 200;
    for idx in 0..n_runs {
        let mut driver = NoiseDriver::new(4242, idx as u64);
        match crate::jump::run_scheme_b_with_tables(&tables, &mut driver) {
            Ok(traj) => {
                let d = &traj.final_state.1;
                let total: f64 = d.iter().map(|z| z.norm_sqr()).sum();
                if d[0].norm_sqr() / total >= 0.99 {
                    reached += 1;
                }
            }
            Err(e) => {
                return result("11", "damped-oscillator asymptotics", start, false, e.to_string())
            }
        }
    }
    let mass_ok = reached * 10 >= n_runs * 9;
    let sigma_ok = dev_lind <= envelope && dev_sse <= envelope && dev_jump <= envelope;
    result(
        "11",
        "damped-oscillator asymptotics",
        start,
        sigma_ok && mass_ok,
        format!(
            "envelope = {envelope:.4}: dev lindblad = {dev_lind:.4}, sse = {dev_sse:.4}, \
             jump = {dev_jump:.4}; ground-state mass >= 0.99 in {reached}/{n_runs} runs"
        ),
    )
}

/// 12. Wigner negativity immediately after the first jump, across 50 seeds.
pub fn criterion_12() -> CriterionResult {
    let start = Instant::now();
    let model = ModelConfig::position_measurement(FIG_OMEGA, FIG_GAMMA, HBAR);
    let initial = fig_start();
    let mut checked = 0usize;
    let mut negative = 0usize;
    let mut seed = 0u64;
    let mut min_depths = f64::INFINITY;
    while checked < 50 {
        seed += 1;
        let mut driver = NoiseDriver::new(1200 + seed, 0);
        let traj = match run_scheme_a(&model, &initial, 10.0, 1.0, &mut driver) {
            Ok(t) => t,
            Err(e) => return result("12", "post-jump negativity", start, false, e.to_string()),
        };
        let Some((frame, d)) = traj.post_jump_states.first() else {
            continue; // no jump for this seed inside the horizon
        };
        checked += 1;
        let half = frame.z.norm() + 10.0;
        let n_grid = 2049;
        let xs: Vec<f64> =
            (0..n_grid).map(|i| -half + 2.0 * half * i as f64 / (n_grid - 1) as f64).collect();
        let psi = wavefunction_from_orthonormal(frame, HBAR, d, &xs).unwrap();
        let w = wigner_from_wavefunction(
            &xs,
            &psi,
            HBAR,
            16,
            129,
            frame.z.p - 5.0,
            frame.z.p + 5.0,
        )
        .unwrap();
        let min = w.min_value();
        let max = w.max_value();
        min_depths = min_depths.min(-min / max);
        if min < -1e-6 * max {
            negative += 1;
        }
    }
    result(
        "12",
        "post-jump negativity",
        start,
        negative == checked,
        format!("negative Wigner region in {negative}/{checked} first-jump states (min relative depth {min_depths:.2e})"),
    )
}

/// 13. Survival-norm monotonicity along no-jump stretches of 1000 random
///     trajectories.
pub fn criterion_13() -> CriterionResult {
    let start = Instant::now();
    let mut violations = 0usize;
    let mut total = 0usize;
    for (offset, model) in example_models().into_iter().enumerate() {
        for idx in 0..500u64 {
            let mut driver = NoiseDriver::new(9000 + offset as u64, idx);
            let traj = match run_scheme_a(&model, &fig_start(), 3.0, 0.05, &mut driver) {
                Ok(t) => t,
                Err(e) => {
                    return result("13", "survival monotonicity", start, false, e.to_string())
                }
            };
            total += 1;
            for i in 1..traj.times.len() {
                if traj.counts[i] == traj.counts[i - 1]
                    && traj.norms[i] > traj.norms[i - 1] + 1e-12
                {
                    violations += 1;
                }
            }
        }
    }
    result(
        "13",
        "survival monotonicity",
        start,
        violations == 0,
        format!("{violations} violations across {total} trajectories"),
    )
}

/// Run the full suite in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
        criterion_12(),
        criterion_13(),
    ]
}
