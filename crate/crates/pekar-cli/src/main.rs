use clap::{Parser, Subcommand};
use pekar_cli::commands::{cmd_correction, cmd_diagnostics, cmd_hessian, cmd_orbit, cmd_small_l, cmd_solve, Failure};
use pekar_cli::config::RunConfig;
use pekar_cli::exit;
use pekar_cli::output::OutputDir;
use pekar_cli::report::{csv_number, RunReport, Status};
use pekar_cli::sweep::run_sweep;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "pekar", version, about = "Pekar polaron toolkit on the 3-torus")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize E_L and persist the solution.
    Solve,
    /// Trace correction ½Tr(1-√(1-K_L)) with its tail and stability check.
    Correction {
        /// Directory written by `solve` (its `solution/` subdirectory).
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Closed-form correction at the constant minimizer.
    SmallL,
    /// Gross coordinates of a translated, perturbed minimizer.
    Orbit {
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Spectrum of K_L on the cutoff space.
    Hessian {
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Scaling fits of the ultraviolet lattice sums.
    Diagnostics,
    /// CSV over the `[sweep]` table of the config.
    Sweep,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Correction { .. } => "correction",
            Command::SmallL => "small-l",
            Command::Orbit { .. } => "orbit",
            Command::Hessian { .. } => "hessian",
            Command::Diagnostics => "diagnostics",
            Command::Sweep => "sweep",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(run(cli))
}

fn usage(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    exit::USAGE
}

fn run(cli: Cli) -> u8 {
    let Some(path) = cli.config.as_deref() else {
        return usage("--config PATH is required");
    };
    let mut cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return exit::INTERNAL;
        }
    }
    let root = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = match OutputDir::create(&root) {
        Ok(o) => o,
        Err(e) => return usage(format!("cannot create {}: {e}", root.display())),
    };
    let start = Instant::now();
    let name = cli.command.name();
    let outcome = dispatch(&cli.command, &cfg, &mut out);
    let (mut report, code) = match outcome {
        Ok(Done::Report(r)) => (r, exit::OK),
        Ok(Done::Usage(msg)) => {
            let _ = out.finish(name, Status::Failed);
            return usage(msg);
        }
        Err(Failure::Numerical(r)) => (*r, exit::NOT_CONVERGED),
        Err(Failure::Regime(r)) => (*r, exit::USAGE),
        Err(Failure::Internal(r)) => (*r, exit::INTERNAL),
    };
    report.elapsed_seconds = start.elapsed().as_secs_f64();
    if let Some(m) = &report.message {
        eprintln!("{name}: {m}");
    }
    let status = report.status;
    if let Err(e) = out.write_report(&report) {
        eprintln!("error: {e}");
        return exit::INTERNAL;
    }
    if let Err(e) = out.finish(name, status) {
        eprintln!("error: {e}");
        return exit::INTERNAL;
    }
    print_summary(&report, &root);
    code
}

enum Done {
    Report(RunReport),
    Usage(String),
}

fn internal(mut report: RunReport, msg: String) -> Failure {
    report.status = Status::Failed;
    report.message = Some(msg);
    Failure::Internal(Box::new(report))
}

fn dispatch(command: &Command, cfg: &RunConfig, out: &mut OutputDir) -> Result<Done, Failure> {
    let persisted = |p: &Option<PathBuf>| p.as_deref().map(Path::to_path_buf);
    let report = match command {
        Command::Solve => {
            let (report, sol) = cmd_solve(cfg)?;
            if let Err(e) = sol.save(&out.path("solution")) {
                return Err(internal(report, format!("cannot write solution: {e}")));
            }
            for (f, kind) in [("psi.pekr", "field"), ("phi.pekr", "field"), ("manifest.json", "solution_manifest")] {
                out.record(&format!("solution/{f}"), kind);
            }
            report
        }
        Command::Correction { solution } => cmd_correction(cfg, persisted(solution).as_deref())?,
        Command::SmallL => cmd_small_l(cfg)?,
        Command::Orbit { solution } => cmd_orbit(cfg, persisted(solution).as_deref())?,
        Command::Hessian { solution } => {
            let (report, spectrum) = cmd_hessian(cfg, persisted(solution).as_deref())?;
            let mut csv = Vec::new();
            if let Err(e) = spectrum.write_csv(&mut csv).map_err(|e| e.to_string()).and_then(|()| {
                out.write("spectrum.csv", "table", &csv).map_err(|e| e.to_string())
            }) {
                return Err(internal(report, format!("cannot write spectrum: {e}")));
            }
            report
        }
        Command::Diagnostics => {
            let report = cmd_diagnostics(cfg)?;
            let mut table = String::from("name,expected,slope,residual\n");
            for e in &report.diagnostics.as_ref().expect("filled on success").exponents {
                table += &format!("{},{},{},{}\n", e.name, e.expected, csv_number(e.slope), csv_number(e.residual));
            }
            if let Err(e) = out.write("exponents.csv", "table", table.as_bytes()) {
                return Err(internal(report, format!("cannot write exponents: {e}")));
            }
            report
        }
        Command::Sweep => {
            let Some(sweep) = &cfg.sweep else {
                return Ok(Done::Usage("invalid config: field `sweep` is required by the sweep command".into()));
            };
            let mut report = RunReport::new("sweep", cfg);
            match run_sweep(cfg, sweep, &out.path("sweep.csv")) {
                Ok(s) => {
                    out.record("sweep.csv", "table");
                    report.message = Some(format!(
                        "{} points: {} reused, {} computed, {} failed",
                        s.points, s.reused, s.computed, s.failed
                    ));
                    if s.failed > 0 {
                        report.status = Status::NotConverged;
                        return Err(Failure::Numerical(Box::new(report)));
                    }
                }
                Err(e) => return Ok(Done::Usage(e)),
            }
            report
        }
    };
    Ok(Done::Report(report))
}

fn print_summary(r: &RunReport, root: &Path) {
    let mut line = format!("{}: {:?}", r.command, r.status);
    if let (Some(e), Some(reg)) = (r.e_l, r.regime) {
        line += &format!(", e_L = {e:.12e} ({reg:?})");
    }
    if let Some(c) = &r.trace_correction {
        line += &format!(", correction = {:.10e} + tail {:.3e}", c.value, c.tail);
    }
    if let Some(l) = &r.small_l {
        line += &format!(", direct = {:.12e}", l.value);
    }
    if let Some(m) = &r.message {
        if r.status == Status::Ok {
            line += &format!(", {m}");
        }
    }
    println!("{line}; outputs in {}", root.display());
}
