//! Quantum-jump trajectory engines in the moving Hagedorn basis.
//!
//! Scheme A is event-driven: between jumps the state is a fixed coefficient
//! vector over the orthonormal frame seated at the last jump, the next jump
//! time solves `survival(t) = R` by bracketing and bisection on the monotone
//! survival norm, and the frame is re-seated after every jump. Scheme B walks
//! a precomputed time grid of basis matrices, keeping the coefficient vector
//! constant between jumps in the non-orthogonal evolved basis.
//!
//! Both engines treat jumps as instantaneous applications of the coupling
//! matrix followed by renormalisation; both read their uniform thresholds
//! from the same reproducible per-trajectory substream.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::cmatrix::{vec_dot_conj, vec_norm, CMatrix};
use crate::dynamics::{MethodTag, NoiseDriver, UniformSample};
use crate::flow::{FlowError, FramePropagator, HagedornFrame};
use crate::gaussian::{hagedorn_from_g, GaussianError, GaussianState};
use crate::hagedorn::{
    l_matrix_orthonormal, moments_from_orthonormal, survival_norm_sqr, u_matrix_from_relative,
    BasisMatrices, HagedornError,
};
use crate::model::{build_effective_k, lindbladian_to_ladder_params, ModelConfig, ModelError};
use crate::{CVec2, RMat2, RVec2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum JumpError {
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Hagedorn(#[from] HagedornError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("jump from a dark state: coupling image vanished")]
    ZeroJumpImage,
    #[error("initial state must be pure: det G = {det}")]
    NotPure { det: f64 },
    #[error("basis truncation leaked: top-coefficient mass {mass:.3e} of the norm")]
    TruncationLeak { mass: f64 },
    #[error("step size {dt} does not divide the horizon {t_end}")]
    GridMismatch { dt: f64, t_end: f64 },
}

/// Sampled observable history of one jump trajectory.
#[derive(Clone, Debug)]
pub struct JumpTrajectory {
    pub times: Vec<f64>,
    pub means: Vec<RVec2>,
    pub sigmas: Vec<RMat2>,
    /// Survival norm squared of the unnormalised state since the last jump.
    pub norms: Vec<f64>,
    /// Cumulative jump count at each sample.
    pub counts: Vec<usize>,
    pub jump_times: Vec<f64>,
    /// Frame and normalised orthonormal coefficients right after each jump.
    pub post_jump_states: Vec<(HagedornFrame, Vec<C64>)>,
    /// Frame and normalised orthonormal coefficients at the end time.
    pub final_state: (HagedornFrame, Vec<C64>),
    pub method: MethodTag,
    pub master_seed: u64,
    pub trajectory_index: u64,
}

/// Next jump: threshold sampled from the stream, or prescribed times.
enum JumpSource<'a> {
    Sampled(&'a mut NoiseDriver),
    Forced(std::slice::Iter<'a, f64>),
}

/// Solve `survival(t) = R` for the next jump time on `[0, t_max]` relative to
/// the segment start. The survival norm `c^dag U^dag U c` is monotone
/// non-increasing, so a doubling bracket plus bisection (absolute tolerance
/// 1e-10 on the survival value) finds the unique root; `None` when the
/// survival at `t_max` still exceeds `R`.
pub fn sample_jump_time(
    c: &[C64],
    seg: &FramePropagator,
    r: UniformSample,
    t_max: f64,
) -> Result<Option<f64>, JumpError> {
    let r = r.value;
    let survival = |t: f64| -> Result<f64, JumpError> {
        let rel = seg.frame_at(t)?;
        Ok(survival_norm_sqr(&rel, seg.hbar, c))
    };
    if r >= survival(0.0)? {
        return Ok(Some(0.0));
    }
    // Bracket by doubling.
    let mut lo = 0.0;
    let mut hi = (t_max / 64.0).max(1e-6);
    loop {
        if hi >= t_max {
            if survival(t_max)? > r {
                return Ok(None);
            }
            hi = t_max;
            break;
        }
        if survival(hi)? <= r {
            break;
        }
        lo = hi;
        hi = (hi * 2.0).min(t_max);
    }
    // Bisection on the survival value.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = survival(mid)?;
        if (s - r).abs() <= 1e-10 || (hi - lo) < 1e-15 {
            return Ok(Some(mid));
        }
        if s > r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// `c' = L c / ||L c||` in the orthonormal moving basis.
pub fn apply_jump_orthonormal(c: &[C64], l_ortho: &CMatrix) -> Result<Vec<C64>, JumpError> {
    let image = l_ortho.mul_vec(c);
    let norm = vec_norm(&image);
    if norm <= 1e-14 * vec_norm(c).max(1e-300) {
        return Err(JumpError::ZeroJumpImage);
    }
    Ok(image.iter().map(|z| z / norm).collect())
}

/// `c' = L c / sqrt(c^dag L^dag O L c)` in the non-orthogonal evolved basis;
/// the active length grows by exactly one.
pub fn apply_jump_nonorthogonal(
    c: &[C64],
    l_non: &CMatrix,
    overlap: &CMatrix,
) -> Result<Vec<C64>, JumpError> {
    let image = l_non.mul_vec(c);
    let norm2 = vec_dot_conj(&image, &overlap.mul_vec(&image)).re;
    if norm2 <= 1e-28 {
        return Err(JumpError::ZeroJumpImage);
    }
    let inv = C64::new(1.0 / norm2.sqrt(), 0.0);
    Ok(image.iter().map(|z| z * inv).collect())
}

fn initial_frame(initial: &GaussianState) -> Result<(CVec2, RVec2), JumpError> {
    let det = initial.g.det();
    if (det - 1.0).abs() > 1e-6 {
        return Err(JumpError::NotPure { det });
    }
    Ok((hagedorn_from_g(&initial.g)?, initial.centre))
}

fn closed_system_run(
    model: &ModelConfig,
    initial: &GaussianState,
    t_end: f64,
    dt_out: f64,
    method: MethodTag,
    master_seed: u64,
    trajectory_index: u64,
) -> Result<JumpTrajectory, JumpError> {
    let (a0, z0) = initial_frame(initial)?;
    let k = build_effective_k(model);
    let prop = FramePropagator::new(k, model.hbar, a0, z0)?;
    let n = (t_end / dt_out).round() as usize;
    let mut traj = JumpTrajectory {
        times: Vec::new(),
        means: Vec::new(),
        sigmas: Vec::new(),
        norms: Vec::new(),
        counts: Vec::new(),
        jump_times: Vec::new(),
        post_jump_states: Vec::new(),
        final_state: (HagedornFrame::initial(a0, z0), vec![C64::new(1.0, 0.0)]),
        method,
        master_seed,
        trajectory_index,
    };
    for i in 0..=n {
        let t = (i as f64 * dt_out).min(t_end);
        let f = prop.frame_at(t)?;
        let d = vec![C64::new(1.0, 0.0)];
        let (mean, sigma) = moments_from_orthonormal(&f, model.hbar, &d);
        traj.times.push(t);
        traj.means.push(mean);
        traj.sigmas.push(sigma);
        traj.norms.push(1.0);
        traj.counts.push(0);
        if i == n {
            traj.final_state = (f, d);
        }
    }
    Ok(traj)
}

fn scheme_a_core(
    model: &ModelConfig,
    initial: &GaussianState,
    t_end: f64,
    dt_out: f64,
    mut source: JumpSource<'_>,
    master_seed: u64,
    trajectory_index: u64,
) -> Result<JumpTrajectory, JumpError> {
    if model.lindbladian.is_trivial() {
        return closed_system_run(
            model,
            initial,
            t_end,
            dt_out,
            MethodTag::JumpA,
            master_seed,
            trajectory_index,
        );
    }
    let (a0, z0) = initial_frame(initial)?;
    let k = build_effective_k(model);
    let (l, chi) = lindbladian_to_ladder_params(&model.lindbladian, model.hbar)?;

    let mut traj = JumpTrajectory {
        times: Vec::new(),
        means: Vec::new(),
        sigmas: Vec::new(),
        norms: Vec::new(),
        counts: Vec::new(),
        jump_times: Vec::new(),
        post_jump_states: Vec::new(),
        final_state: (HagedornFrame::initial(a0, z0), vec![C64::new(1.0, 0.0)]),
        method: MethodTag::JumpA,
        master_seed,
        trajectory_index,
    };

    let n_out = (t_end / dt_out).round() as usize;
    let mut next_out = 0usize;

    let mut seg_start = 0.0;
    let mut seg_prop = FramePropagator::new(k, model.hbar, a0, z0)?;
    let mut c: Vec<C64> = vec![C64::new(1.0, 0.0)];

    loop {
        // Next jump within this segment.
        let next_jump = match source {
            JumpSource::Sampled(ref mut driver) => {
                let r = driver.uniform();
                sample_jump_time(&c, &seg_prop, r, t_end - seg_start)?
            }
            JumpSource::Forced(ref mut iter) => iter.next().map(|tj| tj - seg_start),
        };
        let seg_span = next_jump.unwrap_or(t_end - seg_start);

        // Emit output samples inside [seg_start, seg_start + seg_span].
        while next_out <= n_out {
            let t = next_out as f64 * dt_out;
            if t > seg_start + seg_span + 1e-12 {
                break;
            }
            let rel = seg_prop.frame_at(t - seg_start)?;
            let u = u_matrix_from_relative(&rel, model.hbar, c.len() - 1);
            let d = u.mul_vec(&c);
            let survival = d.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let frame_abs = HagedornFrame { t, ..rel };
            let (mean, sigma) = moments_from_orthonormal(&frame_abs, model.hbar, &d);
            traj.times.push(t);
            traj.means.push(mean);
            traj.sigmas.push(sigma);
            traj.norms.push(survival);
            traj.counts.push(traj.jump_times.len());
            if next_out == n_out {
                let norm = vec_norm(&d);
                let d_norm: Vec<C64> = d.iter().map(|z| z / norm).collect();
                traj.final_state = (frame_abs, d_norm);
            }
            next_out += 1;
        }

        match next_jump {
            None => break,
            Some(tj_rel) => {
                let t_jump = seg_start + tj_rel;
                if t_jump >= t_end {
                    break;
                }
                // State at the jump time in the moving orthonormal basis.
                let rel = seg_prop.frame_at(tj_rel)?;
                let u = u_matrix_from_relative(&rel, model.hbar, c.len() - 1);
                let d = u.mul_vec(&c);
                let norm = vec_norm(&d);
                let mut d_norm: Vec<C64> = d.iter().map(|z| z / norm).collect();
                // Jump raises the active length by one.
                d_norm.push(C64::new(0.0, 0.0));
                let frame_abs = HagedornFrame { t: t_jump, ..rel };
                let lo = l_matrix_orthonormal(&frame_abs, &l, &chi, model.hbar, d_norm.len() - 1);
                let c_next = apply_jump_orthonormal(&d_norm, &lo)?;
                traj.jump_times.push(t_jump);
                traj.post_jump_states.push((frame_abs, c_next.clone()));
                // Re-seat the frame at the jump time.
                seg_start = t_jump;
                seg_prop = FramePropagator::new(k, model.hbar, frame_abs.a, frame_abs.z)?;
                c = c_next;
            }
        }
    }
    Ok(traj)
}

/// Event-driven jump trajectory: root-found jump times, frame re-seated at
/// each jump.
pub fn run_scheme_a(
    model: &ModelConfig,
    initial: &GaussianState,
    t_end: f64,
    dt_out: f64,
    driver: &mut NoiseDriver,
) -> Result<JumpTrajectory, JumpError> {
    let (seed, index) = (driver.master_seed, driver.trajectory);
    scheme_a_core(model, initial, t_end, dt_out, JumpSource::Sampled(driver), seed, index)
}

/// Scheme A with a prescribed jump record (used for cross-scheme validation).
pub fn run_scheme_a_forced(
    model: &ModelConfig,
    initial: &GaussianState,
    jump_times: &[f64],
    t_end: f64,
    dt_out: f64,
) -> Result<JumpTrajectory, JumpError> {
    scheme_a_core(model, initial, t_end, dt_out, JumpSource::Forced(jump_times.iter()), 0, 0)
}

/// Precomputed basis tables on a uniform grid for scheme B.
pub struct SchemeBTables {
    pub model: ModelConfig,
    pub times: Vec<f64>,
    pub bases: Vec<BasisMatrices>,
    pub n_max: usize,
    pub out_stride: usize,
}

/// Build `B, B~, O, L` tables on the grid `0, dt, ..., t_end` for the frame
/// seated at the (pure) initial state.
pub fn scheme_b_tables(
    model: &ModelConfig,
    initial: &GaussianState,
    t_end: f64,
    dt: f64,
    n_max: usize,
    out_stride: usize,
) -> Result<SchemeBTables, JumpError> {
    let (a0, z0) = initial_frame(initial)?;
    let k = build_effective_k(model);
    let (l, chi) = lindbladian_to_ladder_params(&model.lindbladian, model.hbar)?;
    let n = (t_end / dt).round() as usize;
    if n < 1 || ((n as f64 * dt) - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(JumpError::GridMismatch { dt, t_end });
    }
    let prop = FramePropagator::new(k, model.hbar, a0, z0)?;
    let mut times = Vec::with_capacity(n + 1);
    let mut bases = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 * dt;
        let frame = prop.frame_at(t)?;
        bases.push(BasisMatrices::at_frame(&frame, &l, &chi, model.hbar, n_max));
        times.push(t);
    }
    Ok(SchemeBTables { model: *model, times, bases, n_max, out_stride })
}

impl SchemeBTables {
    /// The frame table underlying the basis matrices; serialisable through
    /// the JSON sidecar helpers in the flow module.
    pub fn frames(&self) -> Vec<HagedornFrame> {
        self.bases.iter().map(|b| b.frame).collect()
    }
}

/// Grid-based jump trajectory over precomputed tables: per-step survival test
/// `R >= c^dag O c`, jumps through the non-orthogonal coupling matrix, and a
/// final normalisation pass folded into the observable records.
pub fn run_scheme_b_with_tables(
    tables: &SchemeBTables,
    driver: &mut NoiseDriver,
) -> Result<JumpTrajectory, JumpError> {
    run_scheme_b_core(tables, JumpSource::Sampled(driver))
}

/// Scheme B with a prescribed jump record; jumps fire at the first grid point
/// at or after each requested time.
pub fn run_scheme_b_forced(
    tables: &SchemeBTables,
    jump_times: &[f64],
) -> Result<JumpTrajectory, JumpError> {
    run_scheme_b_core(tables, JumpSource::Forced(jump_times.iter()))
}

fn run_scheme_b_core(
    tables: &SchemeBTables,
    mut source: JumpSource<'_>,
) -> Result<JumpTrajectory, JumpError> {
    let hbar = tables.model.hbar;
    let n_max = tables.n_max;
    let (seed, index) = match source {
        JumpSource::Sampled(ref driver) => (driver.master_seed, driver.trajectory),
        JumpSource::Forced(_) => (0, 0),
    };
    let mut c = vec![C64::new(0.0, 0.0); n_max + 1];
    c[0] = C64::new(1.0, 0.0);
    let mut traj = JumpTrajectory {
        times: Vec::new(),
        means: Vec::new(),
        sigmas: Vec::new(),
        norms: Vec::new(),
        counts: Vec::new(),
        jump_times: Vec::new(),
        post_jump_states: Vec::new(),
        final_state: (tables.bases[0].frame, vec![C64::new(1.0, 0.0)]),
        method: MethodTag::JumpB,
        master_seed: seed,
        trajectory_index: index,
    };
    // Survival reference: norm of c in the O metric at the last jump is 1.
    let mut r = match source {
        JumpSource::Sampled(ref mut driver) => Some(driver.uniform().value),
        JumpSource::Forced(_) => None,
    };
    let mut next_forced = match source {
        JumpSource::Forced(ref mut iter) => iter.next().copied(),
        _ => None,
    };
    let last = tables.times.len() - 1;
    for k in 0..=last {
        let basis = &tables.bases[k];
        let survival = vec_dot_conj(&c, &basis.overlap.mul_vec(&c)).re;
        // Record before any jump at this grid point.
        if k % tables.out_stride == 0 || k == last {
            let d = basis.to_orthonormal(&c, hbar);
            let (mean, sigma) = moments_from_orthonormal(&basis.frame, hbar, &d);
            traj.times.push(tables.times[k]);
            traj.means.push(mean);
            traj.sigmas.push(sigma);
            traj.norms.push(survival);
            traj.counts.push(traj.jump_times.len());
            if k == last {
                let norm = vec_norm(&d);
                traj.final_state = (basis.frame, d.iter().map(|z| z / norm).collect());
            }
        }
        if k == last {
            break;
        }
        let jump_now = match (&mut r, next_forced) {
            (Some(rv), _) => *rv >= survival,
            (None, Some(tj)) => tables.times[k] + 1e-12 >= tj,
            (None, None) => false,
        };
        if jump_now {
            c = apply_jump_nonorthogonal(&c, &basis.l_nonortho, &basis.overlap)?;
            let mass = c[n_max].norm_sqr();
            if mass > 1e-10 {
                return Err(JumpError::TruncationLeak { mass });
            }
            traj.jump_times.push(tables.times[k]);
            let d = basis.to_orthonormal(&c, hbar);
            let norm = vec_norm(&d);
            traj.post_jump_states
                .push((basis.frame, d.iter().map(|z| z / norm).collect()));
            match source {
                JumpSource::Sampled(ref mut driver) => r = Some(driver.uniform().value),
                JumpSource::Forced(ref mut iter) => next_forced = iter.next().copied(),
            }
        }
    }
    Ok(traj)
}

/// Convenience wrapper building the tables for a single run.
pub fn run_scheme_b(
    model: &ModelConfig,
    initial: &GaussianState,
    t_end: f64,
    dt: f64,
    n_max: usize,
    out_stride: usize,
    driver: &mut NoiseDriver,
) -> Result<JumpTrajectory, JumpError> {
    if model.lindbladian.is_trivial() {
        return closed_system_run(
            model,
            initial,
            t_end,
            dt * out_stride as f64,
            MethodTag::JumpB,
            driver.master_seed,
            driver.trajectory,
        );
    }
    let tables = scheme_b_tables(model, initial, t_end, dt, n_max, out_stride)?;
    run_scheme_b_with_tables(&tables, driver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::UniformSample;
    use crate::phase::{Mat2, Vec2};

    fn c64(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn squeezed_start() -> GaussianState {
        GaussianState::squeezed(Vec2::new(2.0, 0.0), 2.0)
    }

    #[test]
    fn closed_system_has_no_jumps_and_classical_centre() {
        let model = ModelConfig::position_measurement(1.0, 0.0, 1.0);
        let mut driver = NoiseDriver::new(1, 0);
        let traj = run_scheme_a(&model, &squeezed_start(), 5.0, 0.05, &mut driver).unwrap();
        assert!(traj.jump_times.is_empty());
        for (i, t) in traj.times.iter().enumerate() {
            let (s, c) = t.sin_cos();
            let orbit = Vec2::new(2.0 * c, -2.0 * s);
            assert!((traj.means[i] - orbit).norm() < 1e-8, "t = {t}");
            assert!((traj.norms[i] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dark_state_never_jumps() {
        let model = ModelConfig::damped_oscillator(1.0, 0.2, 1.0);
        let initial = GaussianState::coherent(Vec2::zero());
        let mut driver = NoiseDriver::new(2, 0);
        let traj = run_scheme_a(&model, &initial, 5.0, 0.05, &mut driver).unwrap();
        assert!(traj.jump_times.is_empty());
        for n in &traj.norms {
            assert!((n - 1.0).abs() < 1e-9);
        }
        // Scheme B agrees.
        let mut driver_b = NoiseDriver::new(2, 0);
        let traj_b =
            run_scheme_b(&model, &initial, 5.0, 1e-2, 8, 10, &mut driver_b).unwrap();
        assert!(traj_b.jump_times.is_empty());
    }

    #[test]
    fn unit_threshold_fires_immediately() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let k = build_effective_k(&model);
        let (a0, z0) = initial_frame(&squeezed_start()).unwrap();
        let seg = FramePropagator::new(k, 1.0, a0, z0).unwrap();
        let c = vec![c64(1.0, 0.0)];
        let tj = sample_jump_time(&c, &seg, UniformSample { value: 1.0, draw_index: 0 }, 10.0)
            .unwrap();
        assert_eq!(tj, Some(0.0));
    }

    #[test]
    fn sampled_jump_time_sits_on_survival_level() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let k = build_effective_k(&model);
        let (a0, z0) = initial_frame(&squeezed_start()).unwrap();
        let seg = FramePropagator::new(k, 1.0, a0, z0).unwrap();
        let c = vec![c64(1.0, 0.0)];
        let r = 0.5;
        let tj = sample_jump_time(&c, &seg, UniformSample { value: r, draw_index: 0 }, 20.0)
            .unwrap()
            .expect("survival decays below 0.5");
        let rel = seg.frame_at(tj).unwrap();
        let s = survival_norm_sqr(&rel, 1.0, &c);
        assert!((s - r).abs() < 1e-9, "survival at t_J: {s}");
    }

    #[test]
    fn dark_state_jump_time_is_none() {
        let model = ModelConfig::damped_oscillator(1.0, 0.2, 1.0);
        let k = build_effective_k(&model);
        let initial = GaussianState::coherent(Vec2::zero());
        let (a0, z0) = initial_frame(&initial).unwrap();
        let seg = FramePropagator::new(k, 1.0, a0, z0).unwrap();
        let c = vec![c64(1.0, 0.0)];
        let tj = sample_jump_time(&c, &seg, UniformSample { value: 0.3, draw_index: 0 }, 10.0)
            .unwrap();
        assert_eq!(tj, None);
    }

    #[test]
    fn orthonormal_jump_excites_ground_state() {
        // L = sqrt(gamma) x at the standard frame and origin: e0 -> e1.
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let (l, chi) = lindbladian_to_ladder_params(&model.lindbladian, 1.0).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&Mat2::identity()).unwrap(),
            Vec2::zero(),
        );
        let lo = l_matrix_orthonormal(&frame, &l, &chi, 1.0, 4);
        let c = vec![c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)];
        let jumped = apply_jump_orthonormal(&c, &lo).unwrap();
        assert!((jumped[1].norm() - 1.0).abs() < 1e-12);
        for (i, v) in jumped.iter().enumerate() {
            if i != 1 {
                assert!(v.norm() < 1e-13);
            }
        }
        // Normalisation is idempotent.
        let renorm = apply_jump_orthonormal(&jumped, &CMatrix::identity(5)).unwrap();
        for (a, b) in renorm.iter().zip(&jumped) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_jump_rejects_dark_state() {
        let model = ModelConfig::damped_oscillator(1.0, 0.2, 1.0);
        let (l, chi) = lindbladian_to_ladder_params(&model.lindbladian, 1.0).unwrap();
        let frame = HagedornFrame::initial(
            hagedorn_from_g(&Mat2::identity()).unwrap(),
            Vec2::zero(),
        );
        let lo = l_matrix_orthonormal(&frame, &l, &chi, 1.0, 4);
        let c = vec![c64(1.0, 0.0); 1].into_iter().chain(vec![c64(0.0, 0.0); 4]).collect::<Vec<_>>();
        assert!(matches!(
            apply_jump_orthonormal(&c, &lo),
            Err(JumpError::ZeroJumpImage)
        ));
    }

    #[test]
    fn nonorthogonal_jump_agrees_with_orthonormal_picture() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let (l, chi) = lindbladian_to_ladder_params(&model.lindbladian, 1.0).unwrap();
        let tables =
            scheme_b_tables(&model, &squeezed_start(), 2.0, 1e-2, 10, 10).unwrap();
        let basis = &tables.bases[120]; // t = 1.2
        let mut c = vec![c64(0.0, 0.0); 11];
        c[0] = c64(0.9, 0.1);
        c[1] = c64(-0.2, 0.3);
        let jumped = apply_jump_nonorthogonal(&c, &basis.l_nonortho, &basis.overlap).unwrap();
        // Active length grew by one.
        let active = jumped.iter().rposition(|z| z.norm() > 1e-12).unwrap() + 1;
        assert_eq!(active, 3);
        // Same state as the orthonormal-picture jump: compare orthonormal
        // coefficient vectors up to normalisation.
        let d = basis.to_orthonormal(&c, 1.0);
        let lo = l_matrix_orthonormal(&basis.frame, &l, &chi, 1.0, 10);
        let d_jumped = apply_jump_orthonormal(&d, &lo).unwrap();
        let d_from_non = basis.to_orthonormal(&jumped, 1.0);
        let norm = vec_norm(&d_from_non);
        let fidelity = vec_dot_conj(&d_jumped, &d_from_non).norm() / norm;
        assert!(fidelity > 1.0 - 1e-8, "fidelity {fidelity}");
    }

    #[test]
    fn scheme_a_and_b_jump_times_agree_within_grid_step() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let dt = 1e-3;
        let mut driver_a = NoiseDriver::new(21, 0);
        let a = run_scheme_a(&model, &squeezed_start(), 3.0, 0.05, &mut driver_a).unwrap();
        let mut driver_b = NoiseDriver::new(21, 0);
        let b = run_scheme_b(&model, &squeezed_start(), 3.0, dt, 12, 50, &mut driver_b).unwrap();
        assert_eq!(a.jump_times.len(), b.jump_times.len());
        for (ta, tb) in a.jump_times.iter().zip(&b.jump_times) {
            assert!(
                (ta - tb).abs() <= dt + 1e-12,
                "scheme A jump {ta} vs scheme B {tb}"
            );
        }
    }

    #[test]
    fn survival_norm_monotone_along_no_jump_stretches() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let mut driver = NoiseDriver::new(33, 0);
        let traj = run_scheme_a(&model, &squeezed_start(), 5.0, 0.01, &mut driver).unwrap();
        for i in 1..traj.times.len() {
            if traj.counts[i] == traj.counts[i - 1] {
                assert!(
                    traj.norms[i] <= traj.norms[i - 1] + 1e-12,
                    "survival rose at t = {}",
                    traj.times[i]
                );
            }
        }
    }

    #[test]
    fn forced_records_reproduce_on_both_schemes() {
        let model = ModelConfig::position_measurement(1.0, 0.2, 1.0);
        let jumps = [0.8, 1.9];
        let a = run_scheme_a_forced(&model, &squeezed_start(), &jumps, 3.0, 0.05).unwrap();
        assert_eq!(a.jump_times, vec![0.8, 1.9]);
        let tables = scheme_b_tables(&model, &squeezed_start(), 3.0, 1e-2, 10, 10).unwrap();
        let b = run_scheme_b_forced(&tables, &jumps).unwrap();
        assert_eq!(b.jump_times.len(), 2);
        for (ta, tb) in jumps.iter().zip(&b.jump_times) {
            assert!((ta - tb).abs() <= 1e-2 + 1e-12);
        }
    }
}
