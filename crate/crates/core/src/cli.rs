//! Command-line front end. Exit codes: 0 success, 1 non-convergence,
//! 2 input error.

use std::ffi::OsString;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::bsee::{
    error_vs_reference, self_convergence_error, solve_picard, variational_residual, ErrorOptions,
    ErrorReport, SolutionPair,
};
use crate::chaos::{basis_size, io as chaos_io};
use crate::config::{self, KeyValues};
use crate::nullctrl::{minimize_j, verify_null};
use crate::rate::{RatePoint, RateReport};
use crate::slq::gradient_iterate;
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "transposer",
    version,
    about = "Backward stochastic heat equations on Wiener-chaos grids"
)]
struct Cli {
    /// Problem file of key=value lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for Monte Carlo estimates, in hexadecimal.
    #[arg(long, global = true, value_parser = parse_hex, default_value = "0x5EED")]
    seed: u64,
    /// Override a problem-file entry.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Chaos basis bookkeeping.
    Basis {
        #[command(subcommand)]
        action: BasisCmd,
    },
    /// Backward stochastic heat equation.
    Bsee {
        #[command(subcommand)]
        action: BseeCmd,
    },
    /// Stochastic linear-quadratic control.
    Slq {
        #[command(subcommand)]
        action: SlqCmd,
    },
    /// Minimum-energy null control.
    Nullctrl {
        #[command(subcommand)]
        action: NullCmd,
    },
}

#[derive(Subcommand, Debug)]
enum BasisCmd {
    /// Print dim H^M(k) for k = 0..N and their total.
    Info {
        #[arg(long = "N")]
        steps: usize,
        #[arg(long = "M")]
        degree: usize,
    },
}

#[derive(Subcommand, Debug)]
enum BseeCmd {
    Solve,
    /// Solve and report the variational residual.
    Verify,
    /// Temporal convergence sweep over `sweep.N`.
    ConvergeTime,
    /// Spatial convergence sweep over `sweep.n`.
    ConvergeSpace,
}

#[derive(Subcommand, Debug)]
enum SlqCmd {
    Solve,
}

#[derive(Subcommand, Debug)]
enum NullCmd {
    Solve,
    /// Apply a stored control and report the terminal energy.
    Verify,
}

fn parse_hex(s: &str) -> std::result::Result<u64, String> {
    let t = s.trim();
    let t = t
        .strip_prefix("0x")
        .or_else(|| t.strip_prefix("0X"))
        .unwrap_or(t);
    u64::from_str_radix(t, 16).map_err(|e| format!("bad hexadecimal seed {s:?}: {e}"))
}

enum Outcome {
    Done,
    NotConverged(String),
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    match dispatch(&cli) {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::NotConverged(msg)) => {
            eprintln!("not converged: {msg}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::PicardDivergence { .. } | Error::CgStagnation { .. } => 1,
                _ => 2,
            }
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("TRANSPOSER_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            // a pool may already exist when run() is called twice in one process
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
}

fn load(cli: &Cli) -> Result<KeyValues> {
    let mut kv = match &cli.config {
        Some(p) => KeyValues::from_file(p)?,
        None => KeyValues::default(),
    };
    for s in &cli.set {
        kv.set(s)?;
    }
    Ok(kv)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<std::fs::File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(std::fs::File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    let mut f = create(dir, name)?;
    writeln!(f, "{}", serde_json::to_string_pretty(value)?)?;
    f.flush()?;
    Ok(())
}

fn write_solution(dir: &Path, s: &SolutionPair) -> Result<()> {
    let mut f = create(dir, "a.csv")?;
    chaos_io::write_vector(&mut f, &s.a)?;
    f.flush()?;
    let mut f = create(dir, "b.csv")?;
    chaos_io::write_vector(&mut f, &s.b)?;
    f.flush()?;
    let mut f = create(dir, "a_terminal.csv")?;
    chaos_io::write_variable(&mut f, &s.terminal)?;
    f.flush()?;
    write_json(
        dir,
        "diagnostics.json",
        &json!({
            "schema": 1,
            "iterations": s.diagnostics.iterations,
            "max_inner_iterations": s.diagnostics.max_inner_iterations,
            "residual": s.diagnostics.residual,
            "scheme": s.diagnostics.scheme,
            "converged": s.diagnostics.converged,
        }),
    )
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Basis {
            action: BasisCmd::Info { steps, degree },
        } => basis_info(*steps, *degree),
        Command::Bsee { action } => {
            let mut kv = load(cli)?;
            match action {
                BseeCmd::Solve => bsee_solve(cli, &kv, false),
                BseeCmd::Verify => bsee_solve(cli, &kv, true),
                BseeCmd::ConvergeTime => converge_time(cli, &mut kv),
                BseeCmd::ConvergeSpace => converge_space(cli, &kv),
            }
        }
        Command::Slq {
            action: SlqCmd::Solve,
        } => slq_solve(cli, &load(cli)?),
        Command::Nullctrl { action } => {
            let kv = load(cli)?;
            match action {
                NullCmd::Solve => nullctrl_solve(cli, &kv),
                NullCmd::Verify => nullctrl_verify(cli, &kv),
            }
        }
    }
}

fn basis_info(steps: usize, degree: usize) -> Result<Outcome> {
    let mut total: u128 = 0;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "k,dim")?;
    for k in 0..=steps {
        let d = basis_size(k, degree)
            .ok_or_else(|| Error::CatalogCap(format!("dim H^{degree}({k}) overflows")))?;
        total += d as u128;
        writeln!(out, "{k},{d}")?;
    }
    writeln!(out, "total,{total}")?;
    Ok(Outcome::Done)
}

fn bsee_solve(cli: &Cli, kv: &KeyValues, verify: bool) -> Result<Outcome> {
    let problem = config::bsee_problem(kv, None, None)?;
    let options = config::solve_options(kv, cli.seed)?;
    let tol = if verify {
        kv.f64_or("verify.tol", 1e-8)?
    } else {
        0.0
    };
    kv.check_all_used()?;
    let solution = solve_picard(&problem, &options)?;
    write_solution(&cli.out, &solution)?;
    println!(
        "scheme={} iterations={} picard_residual={:.3e}",
        solution.diagnostics.scheme, solution.diagnostics.iterations, solution.diagnostics.residual
    );
    if !solution.diagnostics.converged {
        return Ok(Outcome::NotConverged(format!(
            "Picard update {:.3e}",
            solution.diagnostics.residual
        )));
    }
    if verify {
        let r = variational_residual(&solution, &problem, &options.projector)?;
        println!("variational_residual={r:.6e}");
        write_json(
            &cli.out,
            "verify.json",
            &json!({"schema": 1, "variational_residual": r, "tol": tol}),
        )?;
        if !(r < tol) {
            return Ok(Outcome::NotConverged(format!(
                "variational residual {r:.3e} exceeds {tol:.1e}"
            )));
        }
    }
    Ok(Outcome::Done)
}

fn error_options(kv: &KeyValues, seed: u64) -> Result<ErrorOptions> {
    let d = ErrorOptions::default();
    Ok(ErrorOptions {
        paths: kv.usize_or("error.paths", d.paths)?,
        substeps: kv.usize_or("error.substeps", d.substeps)?,
        seed,
    })
}

fn write_rate(dir: &Path, stem: &str, report: &RateReport, errors: &[ErrorReport]) -> Result<()> {
    let mut f = create(dir, &format!("{stem}.csv"))?;
    writeln!(f, "{}", chaos_io::SCHEMA)?;
    writeln!(f, "{},error_sq,sup_a,int_b", report.variable)?;
    for (p, e) in report.points.iter().zip(errors) {
        writeln!(
            f,
            "{:.16e},{:.16e},{:.16e},{:.16e}",
            p.x, p.error_sq, e.sup_a, e.int_b
        )?;
    }
    f.flush()?;
    write_json(dir, &format!("{stem}.json"), &serde_json::to_value(report)?)?;
    match (report.slope, report.half_width) {
        (Some(s), Some(h)) => println!("slope={s:.4} half_width={h:.4}"),
        (Some(s), None) => println!("slope={s:.4}"),
        _ => println!("{}", report.note.as_deref().unwrap_or("no fit")),
    }
    Ok(())
}

fn converge_time(cli: &Cli, kv: &mut KeyValues) -> Result<Outcome> {
    let sweep = kv
        .list_usize("sweep.N")?
        .ok_or_else(|| Error::Config("sweep.N is required".into()))?;
    if sweep.len() < 2 {
        return Err(Error::Config("sweep.N needs at least two values".into()));
    }
    let finest = *sweep.iter().max().expect("nonempty");
    if !kv.contains("catalog.max_slots") {
        kv.set(&format!("catalog.max_slots={}", finest.max(64)))?;
    }
    let kv = &*kv;
    if kv.contains("N") {
        let _ = kv.usize("N")?;
    }
    let options = config::solve_options(kv, cli.seed)?;
    let eopts = error_options(kv, cli.seed)?;
    let n = kv.require_usize("n")?;
    let reference = config::heat_reference(kv, n)?;
    let base = config::bsee_problem(kv, Some(finest), None)?;
    kv.check_all_used()?;
    let fine = if reference.is_none() {
        if sweep.iter().any(|&s| finest % s != 0) {
            return Err(Error::Config(
                "self-convergence needs every sweep.N to divide the largest".into(),
            ));
        }
        Some(solve_picard(&base, &options)?)
    } else {
        None
    };
    let errors = sweep
        .par_iter()
        .filter(|&&s| reference.is_some() || s != finest)
        .map(|&s| -> Result<(f64, ErrorReport)> {
            let p = config::bsee_problem(kv, Some(s), None)?;
            let sol = solve_picard(&p, &options)?;
            let e = match (&reference, &fine) {
                (Some(r), _) => error_vs_reference(&sol, &p.partition, r, &eopts)?,
                (None, Some(f)) => self_convergence_error(&sol, f, base.partition.horizon())?,
                _ => unreachable!(),
            };
            Ok((p.partition.tau(), e))
        })
        .collect::<Result<Vec<_>>>()?;
    let points = errors
        .iter()
        .map(|(x, e)| RatePoint {
            x: *x,
            error_sq: e.total(),
        })
        .collect();
    let report = RateReport::fit("tau", points)?;
    let reports: Vec<ErrorReport> = errors.into_iter().map(|p| p.1).collect();
    write_rate(&cli.out, "rate_time", &report, &reports)?;
    Ok(Outcome::Done)
}

fn converge_space(cli: &Cli, kv: &KeyValues) -> Result<Outcome> {
    let sweep = kv
        .list_usize("sweep.n")?
        .ok_or_else(|| Error::Config("sweep.n is required".into()))?;
    if sweep.len() < 2 {
        return Err(Error::Config("sweep.n needs at least two values".into()));
    }
    let largest = *sweep.iter().max().expect("nonempty");
    let n_ref = kv.usize_or("reference.modes", 64 * largest)?;
    if n_ref < largest {
        return Err(Error::Config(
            "reference.modes must be at least the largest sweep.n".into(),
        ));
    }
    let options = config::solve_options(kv, cli.seed)?;
    let eopts = error_options(kv, cli.seed)?;
    let reference = config::heat_reference(kv, n_ref)?.ok_or_else(|| {
        Error::Config("converge-space needs a zero driver and const/wt terminal data".into())
    })?;
    let _ = config::bsee_problem(kv, None, Some(largest))?;
    if kv.contains("n") {
        let _ = kv.usize("n")?;
    }
    kv.check_all_used()?;
    let errors = sweep
        .par_iter()
        .map(|&n| -> Result<(f64, ErrorReport)> {
            let p = config::bsee_problem(kv, None, Some(n))?;
            let sol = solve_picard(&p, &options)?;
            Ok((
                n as f64,
                error_vs_reference(&sol, &p.partition, &reference, &eopts)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let points = errors
        .iter()
        .map(|(x, e)| RatePoint {
            x: *x,
            error_sq: e.total(),
        })
        .collect();
    let report = RateReport::fit("n", points)?;
    let reports: Vec<ErrorReport> = errors.into_iter().map(|p| p.1).collect();
    write_rate(&cli.out, "rate_space", &report, &reports)?;
    Ok(Outcome::Done)
}

fn slq_solve(cli: &Cli, kv: &KeyValues) -> Result<Outcome> {
    let (problem, options) = config::slq_problem(kv)?;
    kv.check_all_used()?;
    let run = gradient_iterate(&problem, None, &options)?;
    let mut f = create(&cli.out, "history.csv")?;
    writeln!(f, "{}", chaos_io::SCHEMA)?;
    writeln!(f, "iter,cost,residual")?;
    for h in &run.history {
        writeln!(f, "{},{:.16e},{:.16e}", h.iter, h.cost, h.residual)?;
    }
    f.flush()?;
    let mut f = create(&cli.out, "control.csv")?;
    chaos_io::write_vector(&mut f, &run.last.control)?;
    f.flush()?;
    chaos_io::write_trajectory(
        &cli.out.join("state"),
        problem.partition.horizon(),
        &run.last.state.states,
    )?;
    write_json(
        &cli.out,
        "report.json",
        &json!({
            "schema": 1,
            "cost": run.last.cost,
            "residual": run.last.residual,
            "iterations": run.history.len() - 1,
            "converged": run.converged,
            "kappa": problem.kappa,
        }),
    )?;
    println!(
        "cost={:.10e} residual={:.3e} iterations={}",
        run.last.cost,
        run.last.residual,
        run.history.len() - 1
    );
    if run.converged {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::NotConverged(format!(
            "residual {:.3e} after {} iterations",
            run.last.residual, options.max_iter
        )))
    }
}

fn nullctrl_solve(cli: &Cli, kv: &KeyValues) -> Result<Outcome> {
    let (problem, options) = config::nullctrl_problem(kv)?;
    kv.check_all_used()?;
    let result = minimize_j(&problem, &options)?;
    let mut f = create(&cli.out, "zT.csv")?;
    chaos_io::write_variable(&mut f, &result.terminal)?;
    f.flush()?;
    let mut f = create(&cli.out, "control.csv")?;
    chaos_io::write_vector(&mut f, &result.control)?;
    f.flush()?;
    let mut report = serde_json::to_value(&result.report)?;
    report["schema"] = json!(1);
    write_json(&cli.out, "report.json", &report)?;
    println!(
        "J={:.10e} grad_norm={:.3e} terminal_energy={:.3e} uncontrolled_energy={:.3e}",
        result.report.j_value,
        result.report.grad_norm,
        result.report.terminal_energy,
        result.report.uncontrolled_energy
    );
    Ok(Outcome::Done)
}

fn nullctrl_verify(cli: &Cli, kv: &KeyValues) -> Result<Outcome> {
    let (problem, _) = config::nullctrl_problem(kv)?;
    let path = kv
        .path("nullctrl.control.file")
        .unwrap_or_else(|| cli.out.join("control.csv"));
    kv.check_all_used()?;
    let f = std::fs::File::open(&path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    let control = chaos_io::read_vector(
        BufReader::new(f),
        &problem.catalog,
        problem.catalog.max_degree(),
        &path.display().to_string(),
    )?;
    let energy = verify_null(&problem, &control)?;
    println!("terminal_energy={energy:.6e}");
    write_json(
        &cli.out,
        "verify.json",
        &json!({"schema": 1, "terminal_energy": energy}),
    )?;
    Ok(Outcome::Done)
}
