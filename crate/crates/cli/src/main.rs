mod args;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use sparsereg::error::Error;
use sparsereg::estimators::{
    fit_precision, fit_regression, PrecisionOptions, RegressionFit, RegressionOptions, SparsePrecision,
};
use sparsereg::io::{read_table_path, write_path, write_precision, write_table};
use sparsereg::simulate::{gen_precision, gen_regression, run_bench, Ar1Design, BenchSpec};

use args::{BenchArgs, Cli, Command, PrecisionArgs, RegressArgs, SimulateArgs, SimulateKind};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// A failure with the exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidQ(_)
            | Error::InvalidLambda(_)
            | Error::InvalidGrid(_)
            | Error::InvalidConfig(_) => EXIT_USAGE,
            Error::ExactInterpolation
            | Error::ToleranceNotReached(_)
            | Error::DegenerateResidual(_) => EXIT_SOLVER,
            Error::NonFinite(what) if what.contains("iterate") => EXIT_SOLVER,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Regress(a) => regress(&a),
        Command::Precision(a) => precision(&a),
        Command::Simulate(a) => simulate(&a),
        Command::Bench(a) => bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())).into())
}

fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".failures.csv");
    PathBuf::from(name)
}

fn meta(pairs: &[(&str, String)]) -> Vec<(String, String)> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn regress(a: &RegressArgs) -> Result<(), Failure> {
    let method = a.method().map_err(Failure::usage)?;
    let response = a.response().map_err(Failure::usage)?;
    let data = read_table_path(&a.input)?.into_regression(&response)?;
    let options = RegressionOptions {
        grid: a.grid.options(),
        solver: a.solver.config(),
        screen: a.screen.options(),
        path: a.solver.path_options(),
        center: !a.no_center,
        scale: a.scale,
    };
    let fit = fit_regression(&data, method, &options)?;
    let metadata = meta(&[
        ("method", method.name()),
        ("n", data.n().to_string()),
        ("d", data.d().to_string()),
        ("tol", a.solver.tol.to_string()),
        ("rho", a.solver.rho.to_string()),
        ("nlambda", fit.path.len().to_string()),
        ("centered", options.center.to_string()),
        ("scaled", options.scale.to_string()),
    ]);
    write_path(create(&a.output)?, &metadata, &fit.path)?;
    regression_manifest(&a.output, &fit, options.path.kkt_tol)
}

fn regression_manifest(output: &Path, fit: &RegressionFit, kkt_tol: f64) -> Result<(), Failure> {
    let failures = fit.path.failures(kkt_tol);
    let manifest = manifest_path(output);
    if failures.is_empty() {
        let _ = std::fs::remove_file(&manifest);
        return Ok(());
    }
    let mut w = create(&manifest)?;
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    writeln!(w, "lambda_index,lambda,kkt_residual,termination,reason").map_err(io)?;
    for &k in &failures {
        let status = &fit.path.status[k];
        let reason = status.error.as_ref().map_or_else(|| "check above tolerance".to_string(), |e| e.to_string());
        writeln!(
            w,
            "{},{:.16e},{:e},{:?},{}",
            k + 1,
            fit.path.grid.values()[k],
            fit.path.kkt_residuals[k],
            status.termination,
            reason.replace(',', ";")
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)?;
    Err(Failure {
        code: EXIT_SOLVER,
        message: format!(
            "{} of {} path points failed verification; see {}",
            failures.len(),
            fit.path.len(),
            manifest.display()
        ),
    })
}

fn precision(a: &PrecisionArgs) -> Result<(), Failure> {
    let data = read_table_path(&a.input)?.into_design()?;
    let options = PrecisionOptions {
        grid: a.grid.options(),
        solver: a.solver.config(),
        screen: a.screen.options(),
        path: a.solver.path_options(),
        correlation: a.correlation,
    };
    let method = a.method();
    let fit = fit_precision(&data, method, &options)?;
    let metadata = meta(&[
        ("method", method.name().to_string()),
        ("n", data.n().to_string()),
        ("d", data.d().to_string()),
        ("tol", a.solver.tol.to_string()),
        ("rho", a.solver.rho.to_string()),
    ]);
    write_precision(create(&a.output)?, &metadata, &fit.grid, &fit.matrices)?;
    precision_manifest(&a.output, &fit)
}

fn precision_manifest(output: &Path, fit: &SparsePrecision) -> Result<(), Failure> {
    let manifest = manifest_path(output);
    if fit.all_converged() {
        let _ = std::fs::remove_file(&manifest);
        return Ok(());
    }
    let mut w = create(&manifest)?;
    let io = |e: std::io::Error| Failure::from(Error::from(e));
    writeln!(w, "lambda_index,lambda,column,kkt_residual,reason").map_err(io)?;
    let mut count = 0;
    for c in &fit.column_diagnostics {
        for k in 0..fit.grid.len() {
            if c.converged[k] && c.errors[k].is_none() {
                continue;
            }
            count += 1;
            let reason = c.errors[k].as_ref().map_or_else(|| "check above tolerance".to_string(), |e| e.to_string());
            writeln!(
                w,
                "{},{:.16e},{},{:e},{}",
                k + 1,
                fit.grid.values()[k],
                c.column + 1,
                c.kkt_residuals[k],
                reason.replace(',', ";")
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)?;
    Err(Failure {
        code: EXIT_SOLVER,
        message: format!("{count} column solves failed verification; see {}", manifest.display()),
    })
}

fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let design = Ar1Design::new(a.n, a.d, a.rho_corr, a.seed);
    let mut names: Vec<String> = (1..=a.d).map(|j| format!("x{j}")).collect();
    match a.kind {
        SimulateKind::Regression => {
            if a.truth.is_some() {
                return Err(Failure::usage("--truth applies only to --kind precision"));
            }
            let data = gen_regression(&design)?;
            let y = data.y().expect("generated with a response");
            let mut values = data.x().clone().insert_column(a.d, 0.0);
            values.column_mut(a.d).copy_from_slice(y);
            names.push("y".into());
            write_table(create(&a.output)?, &names, &values)?;
        }
        SimulateKind::Precision => {
            let (data, truth) = gen_precision(&design)?;
            write_table(create(&a.output)?, &names, data.x())?;
            if let Some(path) = &a.truth {
                let mut w = create(path)?;
                let io = |e: std::io::Error| Failure::from(Error::from(e));
                writeln!(w, "row,col,value").map_err(io)?;
                for &(i, j, v) in truth.entries() {
                    writeln!(w, "{},{},{v:.16e}", i + 1, j + 1).map_err(io)?;
                }
                w.flush().map_err(io)?;
            }
        }
    }
    Ok(())
}

fn bench(a: &BenchArgs) -> Result<(), Failure> {
    let method = a.method().map_err(Failure::usage)?;
    let spec = BenchSpec {
        method,
        n: a.n,
        dims: a.dims.clone(),
        replications: a.replications,
        nlambda: a.nlambda,
        rho_corr: a.rho_corr,
        seed: a.seed,
        path: a.solver.path_options(),
    };
    let report = run_bench(&spec, &a.solver.config())?;
    let csv = report.to_csv();
    match &a.output {
        Some(path) => {
            let mut w = create(path)?;
            w.write_all(csv.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| Failure::from(Error::from(e)))?;
        }
        None => print!("{csv}"),
    }
    for row in &report.rows {
        if row.failures > 0 {
            eprintln!(
                "warning: d = {}: {} of {} replications had unverified points",
                row.d, row.failures, report.replications
            );
        }
    }
    Ok(())
}
