//! Monte Carlo ensembles and their comparison against the Lindblad reference.
//!
//! Trajectories are embarrassingly parallel; every trajectory owns a
//! ChaCha substream keyed by its index, and batch results are merged in
//! fixed index order, so ensembles are bit-identical across thread counts.
//! The mixed-state second moments follow the law of total covariance:
//! mixture covariance = mean of pure-state covariances + covariance of
//! centres.

use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{
    lindblad_g_closed_form, lindblad_rhs, integrate_deterministic,
    sse_g_closed_form, sse_noise_coefficients, DynamicsError, MethodTag, NoiseDriver,
};
use crate::gaussian::{covariance_from_g, GaussianState};
use crate::jump::{run_scheme_b_with_tables, scheme_b_tables, JumpError, SchemeBTables};
use crate::model::ModelConfig;
use crate::phase::{Mat2, Vec2};
use crate::{RMat2, RVec2};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EnsembleError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error("ensemble needs at least 2 trajectories, got {0}")]
    TooFewTrajectories(usize),
    #[error("unsupported unravelling for ensembles: {0}")]
    UnsupportedMethod(MethodTag),
    #[error("trajectory {index} failed: {message}")]
    Trajectory { index: u64, message: String },
}

/// Streaming per-time ensemble statistics.
#[derive(Clone, Debug)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_centre: Vec<RVec2>,
    /// Standard error of the mean, per centre component.
    pub se_centre: Vec<RVec2>,
    /// Mixture covariance (law of total covariance).
    pub sigma_mix: Vec<RMat2>,
    pub mean_jumps: Vec<f64>,
    pub n_traj: usize,
    pub method: MethodTag,
    pub master_seed: u64,
}

/// Options shared by the ensemble drivers.
#[derive(Clone, Copy, Debug)]
pub struct EnsembleOpts {
    pub t_end: f64,
    /// Integrator step (SSE) or table grid step (jump).
    pub dt: f64,
    /// Record every `out_stride`-th step.
    pub out_stride: usize,
    /// Basis truncation for jump ensembles.
    pub n_max: usize,
}

impl Default for EnsembleOpts {
    fn default() -> Self {
        EnsembleOpts { t_end: 10.0, dt: 1e-3, out_stride: 10, n_max: 32 }
    }
}

/// Per-time Welford-style accumulator with centre comoments.
#[derive(Clone, Copy, Debug)]
struct Acc {
    n: f64,
    mean: RVec2,
    /// Sum of outer deviations of the centres.
    m2: RMat2,
    sum_sigma: RMat2,
    sum_jumps: f64,
}

impl Acc {
    fn empty() -> Self {
        Acc {
            n: 0.0,
            mean: Vec2::zero(),
            m2: Mat2::zero(),
            sum_sigma: Mat2::zero(),
            sum_jumps: 0.0,
        }
    }

    fn push(&mut self, z: RVec2, sigma: RMat2, jumps: f64) {
        let n1 = self.n + 1.0;
        let delta = z - self.mean;
        let mean = self.mean + delta.scale(1.0 / n1);
        let delta2 = z - mean;
        self.m2 = self.m2 + Mat2::outer(&delta, &delta2);
        self.mean = mean;
        self.n = n1;
        self.sum_sigma = self.sum_sigma + sigma;
        self.sum_jumps += jumps;
    }
}

/// One trajectory's contribution: `(centre, covariance, jump count)` per
/// output time.
type TrajSummary = Vec<(RVec2, RMat2, f64)>;

/// Mixed-state moments of a finite set of pure-state summaries.
pub fn mixture_moments(states: &[(RVec2, RMat2)]) -> (RVec2, RMat2) {
    assert!(!states.is_empty());
    let n = states.len() as f64;
    let mut mean = Vec2::zero();
    for (z, _) in states {
        mean = mean + *z;
    }
    mean = mean.scale(1.0 / n);
    let mut cov_centres = Mat2::zero();
    let mut mean_sigma = Mat2::zero();
    for (z, sigma) in states {
        let d = *z - mean;
        cov_centres = cov_centres + Mat2::outer(&d, &d);
        mean_sigma = mean_sigma + *sigma;
    }
    (mean, (mean_sigma + cov_centres).scale(1.0 / n))
}

fn sse_summaries(
    model: &ModelConfig,
    initial: &GaussianState,
    opts: &EnsembleOpts,
    master_seed: u64,
    indices: std::ops::Range<u64>,
    noise_coefficients: &[(RVec2, RVec2)],
    sigmas_out: &[RMat2],
) -> Result<Vec<TrajSummary>, EnsembleError> {
    let n_steps = noise_coefficients.len();
    indices
        .into_par_iter()
        .map(|idx| {
            let mut driver = NoiseDriver::new(master_seed, idx);
            let mut z = initial.centre;
            let mut summary = Vec::with_capacity(n_steps / opts.out_stride + 1);
            summary.push((z, sigmas_out[0], 0.0));
            for (step, (cr, ci)) in noise_coefficients.iter().enumerate() {
                let dxi = driver.gaussian_pair(opts.dt);
                // Affine drift: the Lindblad centre drift evaluated at z.
                let drift = drift_at(model, &z);
                z = z + drift.scale(opts.dt) + cr.scale(dxi.0) + ci.scale(dxi.1);
                if (step + 1) % opts.out_stride == 0 || step + 1 == n_steps {
                    summary.push((z, sigmas_out[summary.len()], 0.0));
                }
            }
            Ok(summary)
        })
        .collect()
}

fn drift_at(model: &ModelConfig, z: &RVec2) -> RVec2 {
    let grad_h = model.hamiltonian.grad(z);
    let l_val = model.lindbladian.value(z);
    let lgradbar = model.lindbladian.grad.conj().scale(l_val);
    grad_h.omega() + Vec2::new(lgradbar.q.im, lgradbar.p.im).omega()
}

/// Run `n_traj` independent trajectories of the chosen unravelling and
/// accumulate streaming moments at each output time.
pub fn run_ensemble(
    method: MethodTag,
    model: &ModelConfig,
    initial: &GaussianState,
    opts: &EnsembleOpts,
    n_traj: usize,
    master_seed: u64,
) -> Result<EnsembleStats, EnsembleError> {
    if n_traj < 2 {
        return Err(EnsembleError::TooFewTrajectories(n_traj));
    }
    let n_steps = (opts.t_end / opts.dt).round() as usize;
    let out_times: Vec<f64> = {
        let mut ts: Vec<f64> = (0..=n_steps)
            .filter(|k| k % opts.out_stride == 0 || *k == n_steps)
            .map(|k| k as f64 * opts.dt)
            .collect();
        ts.dedup();
        ts
    };

    let mut accs: Vec<Acc> = vec![Acc::empty(); out_times.len()];
    const BATCH: usize = 64;

    match method {
        MethodTag::Sse => {
            // Width flow and noise coefficients are deterministic and shared.
            let mut noise_coefficients = Vec::with_capacity(n_steps);
            for step in 0..n_steps {
                let g = sse_g_closed_form(&initial.g, model, step as f64 * opts.dt)?;
                noise_coefficients.push(sse_noise_coefficients(&g, model));
            }
            let sigmas_out: Vec<RMat2> = out_times
                .iter()
                .map(|&t| {
                    let g = sse_g_closed_form(&initial.g, model, t)?;
                    covariance_from_g(
                        &GaussianState { centre: initial.centre, g },
                        model.hbar,
                    )
                    .map_err(|_| DynamicsError::NonSpdWidth { t })
                })
                .collect::<Result<_, _>>()?;
            let mut start = 0u64;
            while (start as usize) < n_traj {
                let end = (start + BATCH as u64).min(n_traj as u64);
                let batch = sse_summaries(
                    model,
                    initial,
                    opts,
                    master_seed,
                    start..end,
                    &noise_coefficients,
                    &sigmas_out,
                )?;
                for summary in batch {
                    for (k, (z, sigma, jumps)) in summary.into_iter().enumerate() {
                        accs[k].push(z, sigma, jumps);
                    }
                }
                start = end;
            }
        }
        MethodTag::JumpB => {
            let tables: SchemeBTables =
                scheme_b_tables(model, initial, opts.t_end, opts.dt, opts.n_max, opts.out_stride)?;
            let mut start = 0u64;
            while (start as usize) < n_traj {
                let end = (start + BATCH as u64).min(n_traj as u64);
                let batch: Vec<TrajSummary> = (start..end)
                    .into_par_iter()
                    .map(|idx| {
                        let mut driver = NoiseDriver::new(master_seed, idx);
                        let traj = run_scheme_b_with_tables(&tables, &mut driver)
                            .map_err(|e| EnsembleError::Trajectory {
                                index: idx,
                                message: e.to_string(),
                            })?;
                        Ok::<TrajSummary, EnsembleError>(
                            traj.times
                                .iter()
                                .enumerate()
                                .map(|(k, _)| {
                                    (traj.means[k], traj.sigmas[k], traj.counts[k] as f64)
                                })
                                .collect(),
                        )
                    })
                    .collect::<Result<_, _>>()?;
                for summary in batch {
                    for (k, (z, sigma, jumps)) in summary.into_iter().enumerate() {
                        accs[k].push(z, sigma, jumps);
                    }
                }
                start = end;
            }
        }
        other => return Err(EnsembleError::UnsupportedMethod(other)),
    }

    let n = n_traj as f64;
    let mut stats = EnsembleStats {
        times: out_times,
        mean_centre: Vec::new(),
        se_centre: Vec::new(),
        sigma_mix: Vec::new(),
        mean_jumps: Vec::new(),
        n_traj,
        method,
        master_seed,
    };
    for acc in &accs {
        stats.mean_centre.push(acc.mean);
        let var = acc.m2.scale(1.0 / (n - 1.0));
        stats.se_centre.push(Vec2::new(
            (var.m[0][0].max(0.0) / n).sqrt(),
            (var.m[1][1].max(0.0) / n).sqrt(),
        ));
        stats
            .sigma_mix
            .push((acc.sum_sigma.scale(1.0 / n) + acc.m2.scale(1.0 / n)).symmetrize());
        stats.mean_jumps.push(acc.sum_jumps / n);
    }
    Ok(stats)
}

/// Per-time comparison of an ensemble against the Lindblad reference.
#[derive(Clone, Debug)]
pub struct ComparisonRow {
    pub t: f64,
    pub z_scores: [f64; 2],
    pub sigma_rel_frobenius: f64,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub z_threshold: f64,
    pub sigma_threshold: f64,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn row_at(&self, t: f64) -> &ComparisonRow {
        self.rows
            .iter()
            .min_by(|a, b| {
                (a.t - t).abs().partial_cmp(&(b.t - t).abs()).unwrap()
            })
            .expect("non-empty report")
    }
}

fn frobenius(m: &RMat2) -> f64 {
    m.m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Z-scores of the mean centre and relative Frobenius errors of the mixture
/// covariance against the Lindblad solution, with pass thresholds
/// (3 standard errors, 5 percent).
pub fn compare_to_lindblad(
    stats: &EnsembleStats,
    model: &ModelConfig,
    initial: &GaussianState,
) -> Result<ComparisonReport, EnsembleError> {
    // Reference centre on the stats grid by RK4 at the grid resolution.
    let dt = (stats.times[1] - stats.times[0]).min(1e-2);
    let t_end = *stats.times.last().unwrap();
    let reference =
        integrate_deterministic(lindblad_rhs, initial, model, t_end, dt, MethodTag::Lindblad)?;
    let z_threshold = 3.0;
    let sigma_threshold = 0.05;
    let mut rows = Vec::with_capacity(stats.times.len());
    let mut pass = true;
    for (k, &t) in stats.times.iter().enumerate() {
        let ref_idx = (t / dt).round() as usize;
        let z_ref = reference.centres[ref_idx.min(reference.centres.len() - 1)];
        let g_ref = lindblad_g_closed_form(&initial.g, model, t)?;
        let sigma_ref =
            covariance_from_g(&GaussianState { centre: z_ref, g: g_ref }, model.hbar)
                .map_err(|_| DynamicsError::NonSpdWidth { t })?;
        let d = stats.mean_centre[k] - z_ref;
        let z_q = if d.q == 0.0 { 0.0 } else { d.q / stats.se_centre[k].q.max(1e-300) };
        let z_p = if d.p == 0.0 { 0.0 } else { d.p / stats.se_centre[k].p.max(1e-300) };
        let rel = frobenius(&(stats.sigma_mix[k] - sigma_ref)) / frobenius(&sigma_ref);
        if t > 0.0 && (z_q.abs() > z_threshold || z_p.abs() > z_threshold || rel > sigma_threshold)
        {
            pass = false;
        }
        rows.push(ComparisonRow { t, z_scores: [z_q, z_p], sigma_rel_frobenius: rel });
    }
    Ok(ComparisonReport { rows, z_threshold, sigma_threshold, pass })
}
