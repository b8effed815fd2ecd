use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use qunravel::cli::{
    emit_csv, emit_csv_path, emit_ensemble_csv, emit_wigner_json, emit_wigner_json_path,
    parse_config, reproduce_fig, run_ensemble_cmd, run_simulate, run_wigner, CliError, RunConfig,
};

const USAGE: &str = "usage:
  qunravel simulate <config>           run one trajectory, emit the CSV record
  qunravel ensemble <config>           run an ensemble, emit stats CSV and report
  qunravel wigner <config>             emit a phase-space snapshot at t_end
  qunravel validate                    run the verification suite
  qunravel reproduce-fig <1..8> [dir]  regenerate one figure's data files

configs are `key = value` lines; '#' starts a comment. required keys:
model, method, t_end.";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match dispatch(&args) {
        Ok(code) => code,
        Err(CliError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: Option<&String>) -> Result<RunConfig, CliError> {
    let path = path.ok_or(qunravel::cli::ConfigError::MissingKey("config path"))?;
    let text = std::fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

fn dispatch(args: &[String]) -> Result<ExitCode, CliError> {
    match args.first().map(String::as_str) {
        Some("simulate") => {
            let cfg = load_config(args.get(1))?;
            let output = run_simulate(&cfg)?;
            match &cfg.out {
                Some(path) => {
                    emit_csv_path(&output.record, &cfg.to_text(), Path::new(path))?;
                    if let Some(jumps) = &output.jumps {
                        let sidecar = format!("{path}.jumps.json");
                        let mut w =
                            std::io::BufWriter::new(std::fs::File::create(&sidecar)?);
                        qunravel::cli::emit_jump_record_json(jumps, &cfg.to_text(), &mut w)?;
                    }
                }
                None => {
                    emit_csv(&output.record, &cfg.to_text(), &mut std::io::stdout().lock())?
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Some("ensemble") => {
            let cfg = load_config(args.get(1))?;
            let (stats, report) = run_ensemble_cmd(&cfg)?;
            match &cfg.out {
                Some(path) => {
                    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
                    emit_ensemble_csv(&stats, &cfg.to_text(), &mut w)?;
                }
                None => emit_ensemble_csv(&stats, &cfg.to_text(), &mut std::io::stdout().lock())?,
            }
            let mut err = std::io::stderr().lock();
            for row in &report.rows {
                writeln!(
                    err,
                    "t = {:6.3}: z = ({:+.2}, {:+.2}), sigma rel err = {:.2}%",
                    row.t,
                    row.z_scores[0],
                    row.z_scores[1],
                    100.0 * row.sigma_rel_frobenius
                )?;
            }
            writeln!(err, "lindblad recovery: {}", if report.pass { "pass" } else { "FAIL" })?;
            Ok(ExitCode::SUCCESS)
        }
        Some("wigner") => {
            let cfg = load_config(args.get(1))?;
            let grid = run_wigner(&cfg)?;
            let integral = grid.integrate();
            if (integral - 1.0).abs() > 1e-3 {
                eprintln!(
                    "warning: grid too coarse or too narrow; discrete integral = {integral:.6}"
                );
            }
            match &cfg.wigner_out {
                Some(path) => emit_wigner_json_path(&grid, &cfg.to_text(), Path::new(path))?,
                None => emit_wigner_json(&grid, &cfg.to_text(), &mut std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Some("validate") => {
            let results = qunravel::validate::run_all();
            let mut all_pass = true;
            for r in &results {
                println!("{}", r.line());
                all_pass &= r.pass;
            }
            Ok(if all_pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Some("reproduce-fig") => {
            let n: usize = args
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or(qunravel::cli::ConfigError::MissingKey("figure index"))?;
            let default_dir = "figures".to_string();
            let dir = args.get(2).unwrap_or(&default_dir);
            let files = reproduce_fig(n, Path::new(dir))?;
            for f in files {
                println!("{f}");
            }
            Ok(ExitCode::SUCCESS)
        }
        _ => {
            eprintln!("{USAGE}");
            Ok(ExitCode::from(2))
        }
    }
}
