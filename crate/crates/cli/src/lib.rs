//! Command-line front end for the concave-QP solver.
//!
//! Subcommands: `solve-ref` (reference-value query), `solve-global`
//! (certified global maximization), `generate` (seeded corpus), `oracle`
//! (exhaustive optimum of tiny instances), and `bench` (batch solves with a
//! CSV report). Exit codes: 0 success, 1 usage error, 2 runtime failure.
//! Log verbosity comes from `QPCD_LOG_LEVEL` (`error`, `info`, or `debug`).

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qpcd_core::driver::{
    self, CutMode, OracleError, SolveReport, SolverParams,
};
use qpcd_core::gen::{self, Family, GenSpec};
use qpcd_core::model::{read_instance, write_instance, QpInstance};

/// Write one line to stdout. A reader that stops consuming (`qpcd … | head`)
/// closes the pipe mid-report; that must end the process quietly, not abort it.
macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            eprintln!("error: cannot write to stdout: {e}");
            std::process::exit(2);
        }
    }};
}

/// Entry point shared by `main` and the integration tests; returns the
/// process exit code (0 success, 1 usage error, 2 runtime failure).
pub fn run() -> i32 {
    run_command(std::env::args().skip(1).collect())
}

/// Run one CLI invocation from an argument vector (program name excluded).
pub fn run_command(args: Vec<String>) -> i32 {
    let _ = env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("QPCD_LOG_LEVEL", "error"),
    )
    .try_init();
    let cli = match Cli::try_parse_from(std::iter::once("qpcd".to_string()).chain(args)) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.exit_code() == 0 { 0 } else { 1 };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

#[derive(Parser)]
#[command(
    name = "qpcd",
    about = "Globally solve concave quadratic programs by certified cutting planes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the optimum reaches a reference value.
    SolveRef {
        /// Instance JSON file.
        #[arg(long)]
        instance: PathBuf,
        /// Reference value the query compares the optimum against.
        #[arg(long)]
        vr: f64,
        /// Level margin below the reference value (default 0.01·max(1,|vr|)).
        #[arg(long)]
        delta: Option<f64>,
        #[command(flatten)]
        tuning: Tuning,
        /// Append the solve's CSV row (with header) to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Maximize globally to a relative-gap certificate.
    SolveGlobal {
        /// Instance JSON file.
        #[arg(long)]
        instance: PathBuf,
        /// Relative gap at which the search closes.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[command(flatten)]
        tuning: Tuning,
        /// Append the solve's CSV row (with header) to this file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Generate a seeded corpus of instances into a directory.
    Generate {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Number of variables per instance.
        #[arg(long)]
        n: usize,
        /// Number of instances.
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: u64,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Enumerate the exact optimum of a tiny instance.
    Oracle {
        /// Instance JSON file.
        #[arg(long)]
        instance: PathBuf,
    },
    /// Solve every instance JSON in a directory and write a CSV report.
    Bench {
        /// Directory of instance JSON files.
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// CSV output file (stdout when omitted).
        #[arg(long)]
        log: Option<PathBuf>,
        /// Relative gap for global mode.
        #[arg(long, default_value_t = 1e-4)]
        eps: f64,
        #[command(flatten)]
        tuning: Tuning,
    },
}

/// Solver tuning shared by every solving subcommand.
#[derive(Args, Clone)]
struct Tuning {
    /// Deepening factor for relaxation-certified cuts.
    #[arg(long, default_value_t = 0.9)]
    eta: f64,
    /// Cut family to lift each iteration.
    #[arg(long, value_enum, default_value_t = CutModeArg::Dnn)]
    cut_mode: CutModeArg,
    /// Relaxation inexactness target.
    #[arg(long, default_value_t = 1e-6)]
    sdp_tol: f64,
    /// Relaxation iteration cap.
    #[arg(long, default_value_t = 20_000)]
    sdp_max_iters: usize,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Cap on lifted cuts.
    #[arg(long, default_value_t = 200)]
    max_cuts: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CutModeArg {
    Dnn,
    Konno,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Cqmax,
    Pcqmax,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ModeArg {
    Ref,
    Global,
}

impl ModeArg {
    fn as_str(self) -> &'static str {
        match self {
            ModeArg::Ref => "ref",
            ModeArg::Global => "global",
        }
    }
}

impl Tuning {
    fn params(&self, delta: Option<f64>, eps: Option<f64>) -> SolverParams {
        let sdp = qpcd_core::dnn::SdpParams {
            tol: self.sdp_tol,
            max_iters: self.sdp_max_iters,
            ..qpcd_core::dnn::SdpParams::default()
        };
        SolverParams {
            delta,
            eta: self.eta,
            cut_mode: match self.cut_mode {
                CutModeArg::Dnn => CutMode::Dnn,
                CutModeArg::Konno => CutMode::Konno,
            },
            sdp,
            max_cuts: self.max_cuts,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            eps_gap: eps.unwrap_or(1e-4),
            record_trace: false,
        }
    }
}

/// One CSV row of a solve; the column set is the file format.
#[derive(Debug, Clone, serde::Serialize)]
struct BenchRow {
    instance: String,
    mode: String,
    status: String,
    lower: f64,
    upper: f64,
    relgap: f64,
    iterations: usize,
    cuts_konno: usize,
    cuts_dnn: usize,
    lp_calls: u64,
    sdp_calls: u64,
    wall_seconds: f64,
}

impl BenchRow {
    fn from_report(instance: &str, mode: &str, report: &SolveReport) -> Self {
        BenchRow {
            instance: instance.to_string(),
            mode: mode.to_string(),
            status: report.status.as_str().to_string(),
            lower: report.lower,
            upper: report.upper,
            relgap: report.relgap,
            iterations: report.iterations,
            cuts_konno: report.cuts_konno,
            cuts_dnn: report.cuts_dnn,
            lp_calls: report.lp_calls,
            sdp_calls: report.sdp_calls,
            wall_seconds: report.wall.as_secs_f64(),
        }
    }

    fn failed(instance: &str, mode: &str, message: &str) -> Self {
        log::error!("{instance}: {message}");
        BenchRow {
            instance: instance.to_string(),
            mode: mode.to_string(),
            status: "error".to_string(),
            lower: f64::NAN,
            upper: f64::NAN,
            relgap: f64::NAN,
            iterations: 0,
            cuts_konno: 0,
            cuts_dnn: 0,
            lp_calls: 0,
            sdp_calls: 0,
            wall_seconds: 0.0,
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::SolveRef {
            instance,
            vr,
            delta,
            tuning,
            log,
        } => {
            let inst = load(&instance)?;
            let params = tuning.params(delta, None);
            let report = driver::solve_reference(&inst, vr, &params).map_err(|e| e.to_string())?;
            print_report(&inst.name, &report);
            if let Some(path) = log {
                write_rows(
                    Some(&path),
                    &[BenchRow::from_report(&stem(&instance), "ref", &report)],
                )?;
            }
            Ok(())
        }
        Command::SolveGlobal {
            instance,
            eps,
            tuning,
            log,
        } => {
            let inst = load(&instance)?;
            let params = tuning.params(None, Some(eps));
            let report = driver::solve_global(&inst, &params).map_err(|e| e.to_string())?;
            print_report(&inst.name, &report);
            if let Some(path) = log {
                write_rows(
                    Some(&path),
                    &[BenchRow::from_report(&stem(&instance), "global", &report)],
                )?;
            }
            Ok(())
        }
        Command::Generate {
            family,
            n,
            count,
            seed,
            out,
        } => {
            let spec = GenSpec {
                family: match family {
                    FamilyArg::Cqmax => Family::CqMax,
                    FamilyArg::Pcqmax => Family::PcqMax,
                },
                n,
                count,
                seed,
            };
            let instances = gen::generate(&spec).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            for inst in &instances {
                let path = out.join(format!("{}.json", inst.name));
                write_instance(&path, inst).map_err(|e| e.to_string())?;
            }
            outln!("wrote {} instances to {}", instances.len(), out.display());
            Ok(())
        }
        Command::Oracle { instance } => {
            let inst = load(&instance)?;
            let oracle = driver::oracle_optimum(&inst).map_err(|e| match e {
                OracleError::TooLarge { n, bases } => {
                    format!("instance too large for enumeration (n = {n}, bases ≈ {bases:.3e})")
                }
                other => other.to_string(),
            })?;
            outln!("optimum = {:.12e}", oracle.value);
            outln!("vertices enumerated = {}", oracle.vertices);
            outln!(
                "argmax = [{}]",
                oracle
                    .x
                    .iter()
                    .map(|v| format!("{v:.6e}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            Ok(())
        }
        Command::Bench {
            dir,
            mode,
            workers,
            log,
            eps,
            tuning,
        } => bench(&dir, mode, workers.max(1), log.as_deref(), eps, &tuning),
    }
}

fn load(path: &Path) -> Result<QpInstance, String> {
    read_instance(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn print_report(name: &str, report: &SolveReport) {
    outln!("instance {name}: {}", report.status);
    outln!(
        "lower = {:.12e}  upper = {:.12e}  relgap = {:.6e}",
        report.lower, report.upper, report.relgap
    );
    outln!(
        "iterations = {}  cuts = {} verified + {} relaxation-certified  lp = {}  sdp = {}  wall = {:.3} s",
        report.iterations,
        report.cuts_konno,
        report.cuts_dnn,
        report.lp_calls,
        report.sdp_calls,
        report.wall.as_secs_f64()
    );
    if let Some(x) = &report.best_x {
        outln!(
            "witness = [{}]",
            x.iter()
                .map(|v| format!("{v:.6e}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
}

/// Write rows to `path`, or to stdout when `None`.
fn write_rows(path: Option<&Path>, rows: &[BenchRow]) -> Result<(), String> {
    // Same contract as `outln!`: a hung-up stdout reader ends the run quietly.
    fn csv_err(e: csv::Error) -> String {
        if let csv::ErrorKind::Io(io) = e.kind() {
            if io.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
        e.to_string()
    }
    let emit = |mut wtr: csv::Writer<Box<dyn std::io::Write>>| -> Result<(), String> {
        for row in rows {
            wtr.serialize(row).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            e.to_string()
        })
    };
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| format!("{}: {e}", p.display()))?;
            emit(csv::Writer::from_writer(Box::new(file)))
        }
        None => emit(csv::Writer::from_writer(Box::new(std::io::stdout()))),
    }
}

fn bench(
    dir: &Path,
    mode: ModeArg,
    workers: usize,
    log: Option<&Path>,
    eps: f64,
    tuning: &Tuning,
) -> Result<(), String> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(format!("no instance files in {}", dir.display()));
    }
    let queue: Mutex<VecDeque<(usize, PathBuf)>> =
        Mutex::new(files.into_iter().enumerate().collect());
    let total = queue.lock().unwrap().len();
    let results: Mutex<Vec<Option<BenchRow>>> = Mutex::new(vec![None; total]);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(total) {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop_front();
                let Some((index, path)) = job else { break };
                let row = bench_one(&path, mode, eps, tuning);
                results.lock().unwrap()[index] = Some(row);
            });
        }
    });
    let rows: Vec<BenchRow> = results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every job writes its slot"))
        .collect();
    write_rows(log, &rows)
}

fn bench_one(path: &Path, mode: ModeArg, eps: f64, tuning: &Tuning) -> BenchRow {
    let name = stem(path);
    let inst = match read_instance(path) {
        Ok(inst) => inst,
        Err(e) => return BenchRow::failed(&name, mode.as_str(), &e.to_string()),
    };
    match mode {
        ModeArg::Ref => {
            let Some(vr) = inst.vr else {
                return BenchRow::failed(
                    &name,
                    "ref",
                    "instance carries no reference value (vR) for ref-mode benchmarking",
                );
            };
            match driver::solve_reference(&inst, vr, &tuning.params(None, None)) {
                Ok(report) => BenchRow::from_report(&name, "ref", &report),
                Err(e) => BenchRow::failed(&name, "ref", &e.to_string()),
            }
        }
        ModeArg::Global => {
            match driver::solve_global(&inst, &tuning.params(None, Some(eps))) {
                Ok(report) => BenchRow::from_report(&name, "global", &report),
                Err(e) => BenchRow::failed(&name, "global", &e.to_string()),
            }
        }
    }
}
