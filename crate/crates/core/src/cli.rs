//! Configuration parsing, run orchestration and file emission.
//!
//! Configs are plain `key = value` text with `#` comments; every emitted
//! file embeds the fully resolved configuration and the code version as
//! header metadata, so a run can be reproduced from its output alone.

use std::fmt::Write as FmtWrite;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    integrate_deterministic, integrate_sse, lindblad_rhs, DynamicsError, MethodTag, NoiseDriver,
};
use crate::ensemble::{
    compare_to_lindblad, run_ensemble, ComparisonReport, EnsembleError, EnsembleOpts,
    EnsembleStats,
};
use crate::flow::FlowError;
use crate::gaussian::{
    covariance_from_g, wigner_gaussian_on_grid, GaussianError, GaussianState, WignerGrid,
    WignerGridSpec,
};
use crate::hagedorn::{
    wavefunction_from_orthonormal, wigner_from_wavefunction_windowed, HagedornError,
};
use crate::jump::{run_scheme_a, run_scheme_b, JumpError, JumpTrajectory};
use crate::model::{ModelConfig, ModelError};
use crate::oracle::{
    fock_jump_trajectory, fock_lindblad_moments, fock_sse_trajectory, gaussian_to_fock,
    position_wavefunction, DetStep, FockDensity, FockRecord, OracleError,
};
use crate::phase::Vec2;
use crate::RVec2;
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: malformed entry (expected key = value)")]
    Malformed { line: usize },
    #[error("line {line}: key '{key}': {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("missing required key '{0}'")]
    MissingKey(&'static str),
    #[error("malformed CSV at line {line}: {message}")]
    BadCsv { line: usize, message: String },
    #[error("malformed JSON: {0}")]
    BadJson(#[from] serde_json::Error),
}

#[derive(Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Jump(#[from] JumpError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Hagedorn(#[from] HagedornError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("method {0} cannot serve this subcommand")]
    UnsupportedMethod(MethodTag),
}

/// Preset model selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelName {
    PositionMeasurement,
    DampedOscillator,
}

impl ModelName {
    fn as_str(&self) -> &'static str {
        match self {
            ModelName::PositionMeasurement => "position-measurement",
            ModelName::DampedOscillator => "damped-oscillator",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelName,
    pub method: MethodTag,
    pub omega: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub hbar: f64,
    pub z0: RVec2,
    pub t_end: f64,
    pub dt: f64,
    pub seed: u64,
    pub n_traj: usize,
    pub n_max: usize,
    pub output_stride: usize,
    pub fock_dim: usize,
    pub wigner_n: usize,
    pub wigner_sigma: f64,
    pub wigner_bounds: Option<(f64, f64, f64, f64)>,
    pub out: Option<String>,
    pub wigner_out: Option<String>,
}

impl RunConfig {
    pub fn model_config(&self) -> ModelConfig {
        match self.model {
            ModelName::PositionMeasurement => {
                ModelConfig::position_measurement(self.omega, self.gamma, self.hbar)
            }
            ModelName::DampedOscillator => {
                ModelConfig::damped_oscillator(self.omega, self.gamma, self.hbar)
            }
        }
    }

    pub fn initial_state(&self) -> GaussianState {
        GaussianState::squeezed(self.z0, self.zeta)
    }

    pub fn wigner_spec(&self) -> WignerGridSpec {
        WignerGridSpec {
            nq: self.wigner_n,
            np: self.wigner_n,
            bounds: self.wigner_bounds,
            sigmas: self.wigner_sigma,
        }
    }

    /// Serialise back to `key = value` text; parsing the output reproduces
    /// the configuration exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model = {}", self.model.as_str());
        let _ = writeln!(s, "method = {}", self.method);
        let _ = writeln!(s, "omega = {}", self.omega);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "zeta = {}", self.zeta);
        let _ = writeln!(s, "hbar = {}", self.hbar);
        let _ = writeln!(s, "z0 = {},{}", self.z0.q, self.z0.p);
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(s, "dt = {}", self.dt);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_traj = {}", self.n_traj);
        let _ = writeln!(s, "n_max = {}", self.n_max);
        let _ = writeln!(s, "output_stride = {}", self.output_stride);
        let _ = writeln!(s, "fock_dim = {}", self.fock_dim);
        let _ = writeln!(s, "wigner_n = {}", self.wigner_n);
        let _ = writeln!(s, "wigner_sigma = {}", self.wigner_sigma);
        if let Some((a, b, c, d)) = self.wigner_bounds {
            let _ = writeln!(s, "wigner_bounds = {a},{b},{c},{d}");
        }
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {out}");
        }
        if let Some(wout) = &self.wigner_out {
            let _ = writeln!(s, "wigner_out = {wout}");
        }
        s
    }
}

fn parse_method(v: &str, line: usize) -> Result<MethodTag, ConfigError> {
    match v {
        "lindblad" => Ok(MethodTag::Lindblad),
        "sse" => Ok(MethodTag::Sse),
        "jump-a" => Ok(MethodTag::JumpA),
        "jump-b" => Ok(MethodTag::JumpB),
        "fock-lindblad" => Ok(MethodTag::FockLindblad),
        "fock-sse" => Ok(MethodTag::FockSse),
        "fock-jump" => Ok(MethodTag::FockJump),
        _ => Err(ConfigError::BadValue {
            line,
            key: "method".into(),
            message: format!(
                "'{v}' is not one of lindblad, sse, jump-a, jump-b, fock-lindblad, fock-sse, fock-jump"
            ),
        }),
    }
}

/// Parse `key = value` configuration text with `#` comments.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut model = None;
    let mut method = None;
    let mut t_end = None;
    let mut omega = 1.0;
    let mut gamma = 0.2;
    let mut zeta = 2.0;
    let mut hbar = 1.0;
    let mut z0 = Vec2::new(2.0, 0.0);
    let mut dt = 1e-3;
    let mut seed = 0u64;
    let mut n_traj = 2000usize;
    let mut n_max = 32usize;
    let mut output_stride = 10usize;
    let mut fock_dim = 96usize;
    let mut wigner_n = 257usize;
    let mut wigner_sigma = 6.0;
    let mut wigner_bounds = None;
    let mut out = None;
    let mut wigner_out = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let stripped = raw.split('#').next().unwrap_or("").trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or(ConfigError::Malformed { line })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |message: String| ConfigError::BadValue { line, key: key.to_string(), message };
        let parse_f64 = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
        let parse_usize = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
        match key {
            "model" => {
                model = Some(match value {
                    "position-measurement" => ModelName::PositionMeasurement,
                    "damped-oscillator" => ModelName::DampedOscillator,
                    _ => {
                        return Err(bad(format!(
                            "'{value}' is not one of position-measurement, damped-oscillator"
                        )))
                    }
                });
            }
            "method" => method = Some(parse_method(value, line)?),
            "omega" => {
                omega = parse_f64(value)?;
                if omega <= 0.0 {
                    return Err(bad("omega must be positive".into()));
                }
            }
            "gamma" => {
                gamma = parse_f64(value)?;
                if gamma < 0.0 {
                    return Err(bad("gamma must be non-negative".into()));
                }
            }
            "zeta" => {
                zeta = parse_f64(value)?;
                if zeta <= 0.0 {
                    return Err(bad("zeta must be positive".into()));
                }
            }
            "hbar" => {
                hbar = parse_f64(value)?;
                if hbar <= 0.0 {
                    return Err(bad("hbar must be positive".into()));
                }
            }
            "z0" => {
                let (q, p) = value
                    .split_once(',')
                    .ok_or_else(|| bad("expected 'q,p'".into()))?;
                z0 = Vec2::new(parse_f64(q.trim())?, parse_f64(p.trim())?);
            }
            "t_end" => {
                t_end = Some(parse_f64(value)?);
                if t_end.unwrap() <= 0.0 {
                    return Err(bad("t_end must be positive".into()));
                }
            }
            "dt" => {
                dt = parse_f64(value)?;
                if dt <= 0.0 {
                    return Err(bad("dt must be positive".into()));
                }
            }
            "seed" => seed = value.parse::<u64>().map_err(|e| bad(e.to_string()))?,
            "n_traj" => n_traj = parse_usize(value)?,
            "n_max" => n_max = parse_usize(value)?.max(1),
            "output_stride" => output_stride = parse_usize(value)?.max(1),
            "fock_dim" => {
                fock_dim = parse_usize(value)?;
                if fock_dim < 8 {
                    return Err(bad("fock_dim must be at least 8".into()));
                }
            }
            "wigner_n" => wigner_n = parse_usize(value)?.max(2),
            "wigner_sigma" => wigner_sigma = parse_f64(value)?,
            "wigner_bounds" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(bad("expected 'q_min,q_max,p_min,p_max'".into()));
                }
                wigner_bounds = Some((
                    parse_f64(parts[0])?,
                    parse_f64(parts[1])?,
                    parse_f64(parts[2])?,
                    parse_f64(parts[3])?,
                ));
            }
            "out" => out = Some(value.to_string()),
            "wigner_out" => wigner_out = Some(value.to_string()),
            _ => {
                return Err(ConfigError::UnknownKey { line, key: key.to_string() });
            }
        }
    }

    Ok(RunConfig {
        model: model.ok_or(ConfigError::MissingKey("model"))?,
        method: method.ok_or(ConfigError::MissingKey("method"))?,
        omega,
        gamma,
        zeta,
        hbar,
        z0,
        t_end: t_end.ok_or(ConfigError::MissingKey("t_end"))?,
        dt,
        seed,
        n_traj,
        n_max,
        output_stride,
        fock_dim,
        wigner_n,
        wigner_sigma,
        wigner_bounds,
        out,
        wigner_out,
    })
}

/// One output row of a trajectory record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub t: f64,
    pub x_mean: f64,
    pub p_mean: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
    pub norm: f64,
    pub n_jumps: usize,
}

#[derive(Clone, Debug)]
pub struct SimRecord {
    pub method: MethodTag,
    pub rows: Vec<Row>,
}

/// Jump bookkeeping of one trajectory, for the JSON sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub times: Vec<f64>,
    /// Cumulative count after each jump.
    pub counts: Vec<usize>,
    pub seed: (u64, u64),
}

/// A simulate run: the observable record plus the jump sidecar when the
/// method produces one.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub record: SimRecord,
    pub jumps: Option<JumpRecord>,
}

impl SimRecord {
    pub fn from_param_trajectory(
        traj: &crate::dynamics::ParamTrajectory,
        hbar: f64,
        stride: usize,
    ) -> Result<Self, GaussianError> {
        let mut rows = Vec::new();
        for k in (0..traj.times.len()).step_by(stride.max(1)) {
            let sigma = covariance_from_g(&traj.state(k), hbar)?;
            rows.push(Row {
                t: traj.times[k],
                x_mean: traj.centres[k].q,
                p_mean: traj.centres[k].p,
                var_x: sigma.m[0][0],
                var_p: sigma.m[1][1],
                cov_xp: sigma.m[0][1],
                norm: 1.0,
                n_jumps: 0,
            });
        }
        Ok(SimRecord { method: traj.method, rows })
    }

    pub fn from_jump_trajectory(traj: &JumpTrajectory) -> Self {
        let rows = traj
            .times
            .iter()
            .enumerate()
            .map(|(k, &t)| Row {
                t,
                x_mean: traj.means[k].q,
                p_mean: traj.means[k].p,
                var_x: traj.sigmas[k].m[0][0],
                var_p: traj.sigmas[k].m[1][1],
                cov_xp: traj.sigmas[k].m[0][1],
                norm: traj.norms[k],
                n_jumps: traj.counts[k],
            })
            .collect();
        SimRecord { method: traj.method, rows }
    }

    pub fn from_fock_record(rec: &FockRecord, method: MethodTag, stride: usize) -> Self {
        let rows = rec
            .times
            .iter()
            .enumerate()
            .step_by(stride.max(1))
            .map(|(k, &t)| Row {
                t,
                x_mean: rec.means[k].q,
                p_mean: rec.means[k].p,
                var_x: rec.sigmas[k].m[0][0],
                var_p: rec.sigmas[k].m[1][1],
                cov_xp: rec.sigmas[k].m[0][1],
                norm: rec.norms[k],
                n_jumps: rec.jump_times.iter().filter(|&&tj| tj <= t).count(),
            })
            .collect();
        SimRecord { method, rows }
    }
}

fn write_header(w: &mut impl Write, config_text: &str) -> std::io::Result<()> {
    writeln!(w, "# qunravel {VERSION}")?;
    for line in config_text.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}

/// Write a trajectory record as CSV with the pinned column layout.
pub fn emit_csv(
    record: &SimRecord,
    config_text: &str,
    w: &mut impl Write,
) -> std::io::Result<()> {
    write_header(w, config_text)?;
    writeln!(w, "t,x_mean,p_mean,var_x,var_p,cov_xp,norm,n_jumps")?;
    for r in &record.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.t, r.x_mean, r.p_mean, r.var_x, r.var_p, r.cov_xp, r.norm, r.n_jumps
        )?;
    }
    Ok(())
}

pub fn emit_csv_path(record: &SimRecord, config_text: &str, path: &Path) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    emit_csv(record, config_text, &mut file)
}

/// Re-parse an emitted CSV; comment lines are skipped, rows round-trip
/// exactly through the shortest-round-trip float formatting.
pub fn parse_csv(text: &str, method: MethodTag) -> Result<SimRecord, ConfigError> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.starts_with('#') || raw.trim().is_empty() {
            continue;
        }
        if !seen_header {
            seen_header = true;
            continue;
        }
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() != 8 {
            return Err(ConfigError::BadCsv {
                line,
                message: format!("expected 8 columns, found {}", parts.len()),
            });
        }
        let f = |idx: usize| -> Result<f64, ConfigError> {
            parts[idx].parse::<f64>().map_err(|e| ConfigError::BadCsv {
                line,
                message: e.to_string(),
            })
        };
        rows.push(Row {
            t: f(0)?,
            x_mean: f(1)?,
            p_mean: f(2)?,
            var_x: f(3)?,
            var_p: f(4)?,
            cov_xp: f(5)?,
            norm: f(6)?,
            n_jumps: parts[7].parse::<usize>().map_err(|e| ConfigError::BadCsv {
                line,
                message: e.to_string(),
            })?,
        });
    }
    Ok(SimRecord { method, rows })
}

/// Ensemble statistics CSV with mean and standard-error columns.
pub fn emit_ensemble_csv(
    stats: &EnsembleStats,
    config_text: &str,
    w: &mut impl Write,
) -> std::io::Result<()> {
    write_header(w, config_text)?;
    writeln!(w, "t,x_mean,x_se,p_mean,p_se,var_x,var_p,cov_xp,mean_jumps")?;
    for (k, &t) in stats.times.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            t,
            stats.mean_centre[k].q,
            stats.se_centre[k].q,
            stats.mean_centre[k].p,
            stats.se_centre[k].p,
            stats.sigma_mix[k].m[0][0],
            stats.sigma_mix[k].m[1][1],
            stats.sigma_mix[k].m[0][1],
            stats.mean_jumps[k],
        )?;
    }
    Ok(())
}

/// Jump-record sidecar: `{times, counts, seed}` plus run metadata.
pub fn emit_jump_record_json(
    record: &JumpRecord,
    config_text: &str,
    w: &mut impl Write,
) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Payload<'a> {
        #[serde(flatten)]
        record: &'a JumpRecord,
        meta: WignerMeta,
    }
    let payload = Payload {
        record,
        meta: WignerMeta {
            version: VERSION.to_string(),
            config: config_text.lines().map(str::to_string).collect(),
        },
    };
    w.write_all(serde_json::to_string(&payload)?.as_bytes())?;
    Ok(())
}

pub fn parse_jump_record_json(text: &str) -> Result<JumpRecord, ConfigError> {
    #[derive(Deserialize)]
    struct Payload {
        #[serde(flatten)]
        record: JumpRecord,
    }
    let payload: Payload = serde_json::from_str(text)?;
    Ok(payload.record)
}

#[derive(Serialize, Deserialize)]
struct WignerMeta {
    version: String,
    config: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct WignerJson {
    #[serde(flatten)]
    grid: WignerGrid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<WignerMeta>,
}

/// Serialise a Wigner grid as JSON
/// `{q_min, q_max, p_min, p_max, nq, np, values: [row-major], meta}`.
pub fn emit_wigner_json(
    grid: &WignerGrid,
    config_text: &str,
    w: &mut impl Write,
) -> std::io::Result<()> {
    let payload = WignerJson {
        grid: grid.clone(),
        meta: Some(WignerMeta {
            version: VERSION.to_string(),
            config: config_text.lines().map(str::to_string).collect(),
        }),
    };
    let text = serde_json::to_string(&payload)?;
    w.write_all(text.as_bytes())?;
    Ok(())
}

pub fn emit_wigner_json_path(
    grid: &WignerGrid,
    config_text: &str,
    path: &Path,
) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    emit_wigner_json(grid, config_text, &mut file)
}

pub fn parse_wigner_json(text: &str) -> Result<WignerGrid, ConfigError> {
    let payload: WignerJson = serde_json::from_str(text)?;
    Ok(payload.grid)
}

fn jump_record_of(traj: &JumpTrajectory) -> JumpRecord {
    JumpRecord {
        times: traj.jump_times.clone(),
        counts: (1..=traj.jump_times.len()).collect(),
        seed: (traj.master_seed, traj.trajectory_index),
    }
}

/// Run one trajectory (or the deterministic reference) per the config.
pub fn run_simulate(cfg: &RunConfig) -> Result<SimOutput, CliError> {
    let model = cfg.model_config();
    let initial = cfg.initial_state();
    let plain = |record: SimRecord| SimOutput { record, jumps: None };
    match cfg.method {
        MethodTag::Lindblad => {
            let traj = integrate_deterministic(
                lindblad_rhs,
                &initial,
                &model,
                cfg.t_end,
                cfg.dt,
                MethodTag::Lindblad,
            )?;
            Ok(plain(SimRecord::from_param_trajectory(&traj, model.hbar, cfg.output_stride)?))
        }
        MethodTag::Sse => {
            let mut driver = NoiseDriver::new(cfg.seed, 0);
            let traj = integrate_sse(&initial, &model, cfg.t_end, cfg.dt, &mut driver)?;
            Ok(plain(SimRecord::from_param_trajectory(&traj, model.hbar, cfg.output_stride)?))
        }
        MethodTag::JumpA => {
            let mut driver = NoiseDriver::new(cfg.seed, 0);
            let dt_out = cfg.dt * cfg.output_stride as f64;
            let traj = run_scheme_a(&model, &initial, cfg.t_end, dt_out, &mut driver)?;
            Ok(SimOutput {
                jumps: Some(jump_record_of(&traj)),
                record: SimRecord::from_jump_trajectory(&traj),
            })
        }
        MethodTag::JumpB => {
            let mut driver = NoiseDriver::new(cfg.seed, 0);
            let traj = run_scheme_b(
                &model,
                &initial,
                cfg.t_end,
                cfg.dt,
                cfg.n_max,
                cfg.output_stride,
                &mut driver,
            )?;
            Ok(SimOutput {
                jumps: Some(jump_record_of(&traj)),
                record: SimRecord::from_jump_trajectory(&traj),
            })
        }
        MethodTag::FockLindblad => {
            let frame = crate::flow::HagedornFrame::initial(
                crate::gaussian::hagedorn_from_g(&initial.g)?,
                initial.centre,
            );
            let psi0 = gaussian_to_fock(&frame, model.hbar, cfg.fock_dim)?;
            let rho0 = FockDensity::pure(&psi0);
            let samples = fock_lindblad_moments(
                &rho0,
                &model,
                cfg.t_end,
                cfg.dt,
                cfg.output_stride,
            )?;
            let rows = samples
                .iter()
                .map(|(t, mean, sigma)| Row {
                    t: *t,
                    x_mean: mean.q,
                    p_mean: mean.p,
                    var_x: sigma.m[0][0],
                    var_p: sigma.m[1][1],
                    cov_xp: sigma.m[0][1],
                    norm: 1.0,
                    n_jumps: 0,
                })
                .collect();
            Ok(plain(SimRecord { method: MethodTag::FockLindblad, rows }))
        }
        MethodTag::FockSse | MethodTag::FockJump => {
            let frame = crate::flow::HagedornFrame::initial(
                crate::gaussian::hagedorn_from_g(&initial.g)?,
                initial.centre,
            );
            let psi0 = gaussian_to_fock(&frame, model.hbar, cfg.fock_dim)?;
            let mut driver = NoiseDriver::new(cfg.seed, 0);
            let rec = if cfg.method == MethodTag::FockSse {
                fock_sse_trajectory(&psi0, &model, cfg.t_end, cfg.dt, &mut driver)?
            } else {
                fock_jump_trajectory(&psi0, &model, cfg.t_end, cfg.dt, &mut driver, DetStep::Rk4)?
            };
            let jumps = (cfg.method == MethodTag::FockJump).then(|| JumpRecord {
                times: rec.jump_times.clone(),
                counts: (1..=rec.jump_times.len()).collect(),
                seed: (cfg.seed, 0),
            });
            Ok(SimOutput {
                record: SimRecord::from_fock_record(&rec, cfg.method, cfg.output_stride),
                jumps,
            })
        }
        MethodTag::NonHermitian => Err(CliError::UnsupportedMethod(cfg.method)),
    }
}

fn projection_xs(cfg: &RunConfig) -> Vec<f64> {
    let half = (cfg.z0.norm() + 10.0).max(12.0);
    let n = 4097;
    (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
}

fn wigner_from_pure_basis_state(
    cfg: &RunConfig,
    frame: &crate::flow::HagedornFrame,
    d: &[C64],
    bounds: (f64, f64, f64, f64),
) -> Result<WignerGrid, CliError> {
    let model = cfg.model_config();
    let xs = projection_xs(cfg);
    let psi = wavefunction_from_orthonormal(frame, model.hbar, d, &xs)?;
    let dx = xs[1] - xs[0];
    let stride = (((bounds.1 - bounds.0) / (cfg.wigner_n as f64 - 1.0)) / dx)
        .round()
        .max(1.0) as usize;
    Ok(wigner_from_wavefunction_windowed(
        &xs,
        &psi,
        model.hbar,
        stride,
        cfg.wigner_n,
        bounds.2,
        bounds.3,
        Some((bounds.0, bounds.1)),
    )?)
}

/// Phase-space snapshot at `t_end` for the configured method.
pub fn run_wigner(cfg: &RunConfig) -> Result<WignerGrid, CliError> {
    let model = cfg.model_config();
    let initial = cfg.initial_state();
    let spec = cfg.wigner_spec();
    match cfg.method {
        MethodTag::Lindblad => {
            let traj = integrate_deterministic(
                lindblad_rhs,
                &initial,
                &model,
                cfg.t_end,
                cfg.dt,
                MethodTag::Lindblad,
            )?;
            let state = traj.state(traj.times.len() - 1);
            Ok(wigner_gaussian_on_grid(&state, model.hbar, &spec)?)
        }
        MethodTag::Sse => {
            let mut driver = NoiseDriver::new(cfg.seed, 0);
            let traj = integrate_sse(&initial, &model, cfg.t_end, cfg.dt, &mut driver)?;
            let state = traj.state(traj.times.len() - 1);
            Ok(wigner_gaussian_on_grid(&state, model.hbar, &spec)?)
        }
        MethodTag::JumpA | MethodTag::JumpB => {
            let mut driver = NoiseDriver::new(cfg.seed, 0);
            let traj = if cfg.method == MethodTag::JumpA {
                run_scheme_a(
                    &model,
                    &initial,
                    cfg.t_end,
                    cfg.dt * cfg.output_stride as f64,
                    &mut driver,
                )?
            } else {
                run_scheme_b(
                    &model,
                    &initial,
                    cfg.t_end,
                    cfg.dt,
                    cfg.n_max,
                    cfg.output_stride,
                    &mut driver,
                )?
            };
            let (frame, d) = &traj.final_state;
            let state = GaussianState { centre: frame.z, g: frame.g() };
            let bounds = spec.bounds_for(&state, model.hbar);
            wigner_from_pure_basis_state(cfg, frame, d, bounds)
        }
        MethodTag::FockSse | MethodTag::FockJump => {
            let frame = crate::flow::HagedornFrame::initial(
                crate::gaussian::hagedorn_from_g(&initial.g)?,
                initial.centre,
            );
            let psi0 = gaussian_to_fock(&frame, model.hbar, cfg.fock_dim)?;
            let mut driver = NoiseDriver::new(cfg.seed, 0);
            let rec = if cfg.method == MethodTag::FockSse {
                fock_sse_trajectory(&psi0, &model, cfg.t_end, cfg.dt, &mut driver)?
            } else {
                fock_jump_trajectory(&psi0, &model, cfg.t_end, cfg.dt, &mut driver, DetStep::Rk4)?
            };
            let xs = projection_xs(cfg);
            let psi = position_wavefunction(&rec.psi_final, model.hbar, &xs)?;
            let bounds = spec.bounds_for(&initial, model.hbar);
            let dx = xs[1] - xs[0];
            let stride = (((bounds.1 - bounds.0) / (cfg.wigner_n as f64 - 1.0)) / dx)
                .round()
                .max(1.0) as usize;
            Ok(wigner_from_wavefunction_windowed(
                &xs,
                &psi,
                model.hbar,
                stride,
                cfg.wigner_n,
                bounds.2,
                bounds.3,
                Some((bounds.0, bounds.1)),
            )?)
        }
        other => Err(CliError::UnsupportedMethod(other)),
    }
}

/// Data files behind the built-in figure set.
///
/// 1: position-measurement time series for all three methods;
/// 2: position-measurement jump-trajectory Wigner snapshots around the first
///    two jumps plus basis-coefficient histograms;
/// 3: position-measurement frame parameters N(t), M(t) with asymptotes;
/// 4: Wigner functions of the moving basis states n = 0..3 at t = 0, 5, 10;
/// 5: Wigner functions of the propagated initial states n = 0..3;
/// 6: end-time Wigner snapshots of the three methods;
/// 7: damped-oscillator time series;
/// 8: damped-oscillator jump-trajectory snapshots and histograms.
pub fn reproduce_fig(n: usize, out_dir: &Path) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let base = |model: &str, method: &str| -> RunConfig {
        parse_config(&format!(
            "model = {model}\nmethod = {method}\nt_end = 10\ndt = 0.001\nseed = 1\nn_max = 32"
        ))
        .expect("static config")
    };
    let emit_record = |name: &str, record: &SimRecord, cfg: &RunConfig,
                           written: &mut Vec<String>|
     -> Result<(), CliError> {
        let path = out_dir.join(name);
        emit_csv_path(record, &cfg.to_text(), &path)?;
        written.push(path.display().to_string());
        Ok(())
    };
    match n {
        1 | 7 => {
            let model = if n == 1 { "position-measurement" } else { "damped-oscillator" };
            for method in ["lindblad", "sse", "jump-b"] {
                let cfg = base(model, method);
                let record = run_simulate(&cfg)?.record;
                emit_record(&format!("fig{n}_{method}.csv"), &record, &cfg, &mut written)?;
            }
        }
        2 | 8 => {
            let model_name = if n == 2 { "position-measurement" } else { "damped-oscillator" };
            let cfg = base(model_name, "jump-a");
            let model = cfg.model_config();
            let initial = cfg.initial_state();
            // First seed whose trajectory has at least two jumps.
            let mut chosen = None;
            for seed in 1..64 {
                let mut driver = NoiseDriver::new(seed, 0);
                let traj = run_scheme_a(&model, &initial, cfg.t_end, 0.5, &mut driver)?;
                if traj.jump_times.len() >= 2 {
                    chosen = Some(traj);
                    break;
                }
            }
            let traj = chosen.expect("a seed below 64 produces two jumps");
            let k = crate::model::build_effective_k(&model);
            let a0 = crate::gaussian::hagedorn_from_g(&initial.g)?;
            let prop = crate::flow::FramePropagator::new(k, model.hbar, a0, initial.centre)?;
            let before = (
                prop.frame_at(traj.jump_times[0] - 0.01)?,
                vec![C64::new(1.0, 0.0)],
            );
            let snapshots = [
                ("before_first", &before),
                ("after_first", &traj.post_jump_states[0]),
                ("after_second", &traj.post_jump_states[1]),
            ];
            for (tag, (frame, d)) in snapshots {
                let state = GaussianState { centre: frame.z, g: frame.g() };
                let bounds = cfg.wigner_spec().bounds_for(&state, model.hbar);
                let grid = wigner_from_pure_basis_state(&cfg, frame, d, bounds)?;
                let path = out_dir.join(format!("fig{n}_wigner_{tag}.json"));
                emit_wigner_json_path(&grid, &cfg.to_text(), &path)?;
                written.push(path.display().to_string());
                let path = out_dir.join(format!("fig{n}_coeffs_{tag}.csv"));
                let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
                write_header(&mut w, &cfg.to_text())?;
                writeln!(w, "n,abs_coeff")?;
                for (i, coeff) in d.iter().enumerate() {
                    writeln!(w, "{},{}", i, coeff.norm())?;
                }
                written.push(path.display().to_string());
            }
        }
        3 => {
            let cfg = base("position-measurement", "jump-a");
            let model = cfg.model_config();
            let k = crate::model::build_effective_k(&model);
            let a0 = crate::gaussian::hagedorn_from_g(&cfg.initial_state().g)?;
            let prop = crate::flow::FramePropagator::new(k, model.hbar, a0, cfg.z0)?;
            let reference =
                crate::model::example1_reference(0.0, cfg.omega, cfg.gamma, cfg.zeta, cfg.hbar);
            let path = out_dir.join("fig3_frame_parameters.csv");
            let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
            write_header(&mut w, &cfg.to_text())?;
            writeln!(w, "# n_infty = {}", reference.n_infty)?;
            writeln!(w, "# n_decay_rate = {}", reference.n_decay_rate)?;
            writeln!(w, "# m_infty = {},{}", reference.m_infty.re, reference.m_infty.im)?;
            writeln!(w, "t,n,m_re,m_im")?;
            for i in 0..=400 {
                let t = i as f64 * 0.025;
                let f = prop.frame_at(t)?;
                writeln!(w, "{},{},{},{}", t, f.n, f.m.re, f.m.im)?;
            }
            written.push(path.display().to_string());
        }
        4 | 5 => {
            let cfg = base("position-measurement", "jump-a");
            let model = cfg.model_config();
            let k = crate::model::build_effective_k(&model);
            let a0 = crate::gaussian::hagedorn_from_g(&cfg.initial_state().g)?;
            let prop = crate::flow::FramePropagator::new(k, model.hbar, a0, cfg.z0)?;
            for t in [0.0, 5.0, 10.0] {
                let frame = prop.frame_at(t)?;
                let b = crate::hagedorn::b_matrix(&frame, 3);
                for level in 0..=3usize {
                    let d: Vec<C64> = if n == 4 {
                        let mut d = vec![C64::new(0.0, 0.0); level + 1];
                        d[level] = C64::new(1.0, 0.0);
                        d
                    } else {
                        // Propagated initial state: row `level` of B, normalised.
                        let row: Vec<C64> = (0..=level).map(|m| b[(level, m)]).collect();
                        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        row.iter().map(|z| z / norm).collect()
                    };
                    let state = GaussianState { centre: frame.z, g: frame.g() };
                    let bounds = cfg.wigner_spec().bounds_for(&state, model.hbar);
                    let grid = wigner_from_pure_basis_state(&cfg, &frame, &d, bounds)?;
                    let path = out_dir.join(format!("fig{n}_n{level}_t{t}.json"));
                    emit_wigner_json_path(&grid, &cfg.to_text(), &path)?;
                    written.push(path.display().to_string());
                }
            }
        }
        6 => {
            for method in ["lindblad", "sse", "jump-b"] {
                let cfg = base("position-measurement", method);
                let grid = run_wigner(&cfg)?;
                let path = out_dir.join(format!("fig6_{method}.json"));
                emit_wigner_json_path(&grid, &cfg.to_text(), &path)?;
                written.push(path.display().to_string());
            }
        }
        _ => {
            return Err(ConfigError::BadValue {
                line: 0,
                key: "figure".into(),
                message: format!("figure index {n} is out of range 1..=8"),
            }
            .into());
        }
    }
    Ok(written)
}

/// Ensemble run plus statistical comparison against the Lindblad reference.
///
/// Jump ensembles always run through the grid scheme (shared precomputed
/// tables), so `jump-a` is accepted and mapped to `jump-b` here.
pub fn run_ensemble_cmd(cfg: &RunConfig) -> Result<(EnsembleStats, ComparisonReport), CliError> {
    let method = match cfg.method {
        MethodTag::Sse => MethodTag::Sse,
        MethodTag::JumpB | MethodTag::JumpA => MethodTag::JumpB,
        other => return Err(CliError::UnsupportedMethod(other)),
    };
    let model = cfg.model_config();
    let initial = cfg.initial_state();
    let opts = EnsembleOpts {
        t_end: cfg.t_end,
        dt: cfg.dt,
        out_stride: cfg.output_stride,
        n_max: cfg.n_max,
    };
    let stats = run_ensemble(method, &model, &initial, &opts, cfg.n_traj, cfg.seed)?;
    let report = compare_to_lindblad(&stats, &model, &initial)?;
    Ok((stats, report))
}
