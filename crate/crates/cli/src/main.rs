use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leech_core::crosscheck::{self, LadderRow};
use leech_core::generate::{self, GeneratorConfig, InstanceKind};
use leech_core::io::{self, CoefficientsFile, GeneratorInfo, OracleFile, OracleRow, ProblemFile, SolutionFile, Verification};
use leech_core::leech::{self, SolverOptions};
use leech_core::oracle::TruncatedLeech;
use leech_core::{build_redheffer, build_upsilon, central_solution, matrix, realization, verify, Error};

#[derive(Parser)]
#[command(name = "leech", version, about = "Solve and parametrize suboptimal rational Leech problems G X = K")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args)]
struct Global {
    /// Threshold for definiteness and stability tests
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Relative eigenvalue cutoff for the rank of the Gram defect
    #[arg(long, global = true)]
    rank_tol: Option<f64>,
    /// Number of unit-circle points for verification and norm estimates
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Truncation depth of the Toeplitz operators
    #[arg(long, global = true)]
    truncation: Option<usize>,
    /// Seed for generated problems
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a problem and decide solvability
    Check { problem: PathBuf },
    /// Compute and verify a solution for the given or the central parameter
    Solve {
        problem: PathBuf,
        /// Realization file of a contractive parameter Y; Y = 0 when absent
        #[arg(long)]
        parameter: Option<PathBuf>,
    },
    /// Export the coefficient realizations of the parametrization
    Coefficients { problem: PathBuf },
    /// Compare the coefficients with truncated operator formulas
    Oracle { problem: PathBuf },
    /// Write a random desk-scale problem
    Generate {
        /// feasible, infeasible, zero-k or corona
        #[arg(long, default_value = "feasible")]
        kind: String,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        m: usize,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 1)]
        q: usize,
    },
}

const DEFAULT_GRID: usize = 256;
const DEFAULT_TRUNCATION: usize = 200;

/// Exit codes: 0 ok, 1 input or numerical failure, 2 infeasible, 3 parameter violation.
fn exit_code(e: &Error) -> u8 {
    match e {
        e if e.is_infeasible() => 2,
        Error::ContractViolation(_) => 3,
        _ => 1,
    }
}

struct Settings {
    opts: SolverOptions,
    grid: usize,
    truncation: usize,
}

fn settings(global: &Global, file: &ProblemFile) -> Settings {
    let mut opts = SolverOptions::default();
    if let Some(tol) = global.tol.or(file.options.tol) {
        opts.tol = tol;
        opts.riccati.tol = tol;
    }
    if let Some(rank_tol) = global.rank_tol.or(file.options.rank_tol) {
        opts.rank_tol = rank_tol;
    }
    Settings {
        opts,
        grid: global.grid.or(file.options.grid).unwrap_or(DEFAULT_GRID).max(1),
        truncation: global.truncation.or(file.options.truncation).unwrap_or(DEFAULT_TRUNCATION).max(1),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => io::write_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn check(global: &Global, path: &Path) -> Result<u8, Error> {
    let file = ProblemFile::read(path)?;
    let s = settings(global, &file);
    let data = &file.data;
    let report = leech::validate(data, s.opts.tol);
    let d = report.dims;
    let mut out = String::new();
    writeln!(out, "problem: n = {}, m = {}, p = {}, q = {}", d.n, d.m, d.p, d.q).unwrap();
    writeln!(out, "stable: {} (spectral radius {:.6})", yes(report.stable), report.spectral_radius).unwrap();
    writeln!(out, "observable: {} (singular value ratio {:.3e})", yes(report.observable), report.observability_ratio)
        .unwrap();
    writeln!(out, "p >= m: {}", yes(report.wide)).unwrap();
    writeln!(out, "[B1; D1] one-to-one: {} (singular value ratio {:.3e})", yes(report.kernel_ok), report.kernel_ratio)
        .unwrap();
    if let Err(e) = (leech::ValidationReport { kernel_ok: true, ..report }).ensure() {
        print!("{out}");
        return Err(e);
    }

    let verdict = leech::solve(data, &s.opts);
    match &verdict {
        Ok(derived) => {
            for (name, r) in [("K = 0", &derived.riccati0), ("K", &derived.riccati)] {
                writeln!(out, "riccati ({name}): residual {:.3e}, iterations {}", r.residual, r.iterations).unwrap();
            }
            writeln!(out, "smallest eigenvalue of Q^-1 + P2 - P1: {:.6e}", derived.feasibility_margin).unwrap();
        }
        Err(e) => writeln!(out, "solver: {e}").unwrap(),
    }
    let margin = TruncatedLeech::new(data, s.truncation).and_then(|t| t.positivity_margin());
    match margin {
        Ok(v) => writeln!(out, "truncated positivity margin (N = {}): {v:.6e}", s.truncation).unwrap(),
        Err(e) => writeln!(out, "truncated positivity margin (N = {}): unavailable ({e})", s.truncation).unwrap(),
    }
    match verdict {
        Ok(_) => {
            writeln!(out, "verdict: FEASIBLE").unwrap();
            print!("{out}");
            Ok(0)
        }
        Err(e) if e.is_infeasible() => {
            writeln!(out, "verdict: INFEASIBLE").unwrap();
            print!("{out}");
            Ok(2)
        }
        Err(e) => {
            print!("{out}");
            Err(e)
        }
    }
}

fn solve(global: &Global, path: &Path, parameter: Option<&Path>) -> Result<u8, Error> {
    let file = ProblemFile::read(path)?;
    let s = settings(global, &file);
    let derived = leech::solve(&file.data, &s.opts)?;
    let coeffs = build_upsilon(&file.data, &derived)?;
    let (x, label) = match parameter {
        Some(p) => {
            let y = io::read_realization(p)?;
            (realization::apply_lft(&coeffs, &y, s.grid)?, p.display().to_string())
        }
        None => (central_solution(&coeffs)?, "central".to_string()),
    };
    let report = verify::report(&file.data, &coeffs, &x, s.grid)?;
    let verification = Verification::new(&report, verify::DEFAULT_VERIFY_TOL);
    eprintln!(
        "residual {:.3e}, norm estimate {:.12}, J-inner defect {:.3e}, kernel residual {:.3e}",
        report.residual, report.norm_estimate, report.j_inner_defect, report.kernel_residual
    );
    if !verification.verified {
        return Err(Error::TheoryViolation(format!(
            "solution failed verification at tolerance {:e}; nothing written",
            verify::DEFAULT_VERIFY_TOL
        )));
    }
    emit(global.out.as_deref(), &SolutionFile::new(&x, label, verification).to_json())?;
    Ok(0)
}

fn coefficients(global: &Global, path: &Path) -> Result<u8, Error> {
    let file = ProblemFile::read(path)?;
    let s = settings(global, &file);
    let derived = leech::solve(&file.data, &s.opts)?;
    let coeffs = build_upsilon(&file.data, &derived)?;
    let red = build_redheffer(&coeffs)?;
    emit(global.out.as_deref(), &CoefficientsFile::new(&coeffs, &red).to_json())?;
    Ok(0)
}

fn ladder_depths(n: usize) -> Vec<usize> {
    let mut depths: Vec<usize> = [n / 4, n / 2, n].into_iter().filter(|&d| d > 0).collect();
    depths.dedup();
    depths
}

fn oracle_row(row: &LadderRow) -> OracleRow {
    let c = row.comparison.as_ref();
    OracleRow {
        truncation: row.n_blocks,
        positivity_margin: row.positivity_margin,
        upsilon11: c.map(|c| c.upsilon.u11),
        upsilon12: c.map(|c| c.upsilon.u12),
        upsilon21: c.map(|c| c.upsilon.u21),
        upsilon22: c.map(|c| c.upsilon.u22),
        delta0: c.map(|c| c.delta0),
        delta1: c.map(|c| c.delta1),
        gram_defect: c.map(|c| c.gram_defect),
        theta_inner: c.map(|c| c.theta_inner),
    }
}

fn oracle(global: &Global, path: &Path) -> Result<u8, Error> {
    let file = ProblemFile::read(path)?;
    let s = settings(global, &file);
    let depths = ladder_depths(s.truncation);
    let points = verify::interior_points(16);
    let (feasible, rows) = match leech::solve(&file.data, &s.opts) {
        Ok(derived) => {
            let coeffs = build_upsilon(&file.data, &derived)?;
            let ladder = crosscheck::ladder(&file.data, &derived, &coeffs, &depths, &points)?;
            (true, ladder.iter().map(oracle_row).collect::<Vec<_>>())
        }
        Err(e) if e.is_infeasible() => {
            eprintln!("state-space verdict: infeasible ({e}); comparison skipped");
            let mut rows = Vec::new();
            for &n in &depths {
                let margin = TruncatedLeech::new(&file.data, n)?.positivity_margin()?;
                rows.push(OracleRow {
                    truncation: n,
                    positivity_margin: margin,
                    upsilon11: None,
                    upsilon12: None,
                    upsilon21: None,
                    upsilon22: None,
                    delta0: None,
                    delta1: None,
                    gram_defect: None,
                    theta_inner: None,
                });
            }
            (false, rows)
        }
        Err(e) => return Err(e),
    };
    print!("{}", oracle_table(&rows));
    let report = OracleFile { format: io::ORACLE_FORMAT.into(), feasible, samples: points.len(), rows };
    if let Some(out) = &global.out {
        io::write_text(out, &report.to_json())?;
    }
    Ok(if feasible { 0 } else { 2 })
}

fn oracle_table(rows: &[OracleRow]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| format!("{:>10}", "-"), |v| format!("{v:>10.2e}"));
    let mut out = format!(
        "{:>5} {:>11} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n",
        "N", "margin", "U11", "U12", "U21", "U22", "Delta0", "Delta1", "M", "Theta*Theta-I"
    );
    for r in rows {
        writeln!(
            out,
            "{:>5} {:>11.3e} {} {} {} {} {} {} {} {}",
            r.truncation,
            r.positivity_margin,
            cell(r.upsilon11),
            cell(r.upsilon12),
            cell(r.upsilon21),
            cell(r.upsilon22),
            cell(r.delta0),
            cell(r.delta1),
            cell(r.gram_defect),
            cell(r.theta_inner)
        )
        .unwrap();
    }
    out
}

fn generate_problem(global: &Global, kind: &str, n: usize, m: usize, p: usize, q: usize) -> Result<u8, Error> {
    let kind = InstanceKind::parse(kind).ok_or_else(|| {
        Error::Parse(format!("unknown kind \"{kind}\" (expected feasible, infeasible, zero-k or corona)"))
    })?;
    let mut cfg = GeneratorConfig::new(n, m, p, q, kind);
    if let Some(t) = global.truncation {
        cfg.critical_blocks = t;
    }
    let inst = generate::generate(&cfg, global.seed)?;
    let mut file = ProblemFile::new(inst.data);
    file.generator = Some(GeneratorInfo {
        seed: inst.seed,
        kind: kind.name().into(),
        critical_scale: inst.critical_scale.is_finite().then_some(inst.critical_scale),
        applied_scale: inst.applied_scale,
    });
    emit(global.out.as_deref(), &file.to_json())?;
    eprintln!(
        "generated {} instance, seed {}, spectral radius {:.4}",
        kind.name(),
        inst.seed,
        matrix::spectral_radius_estimate(&file.data.a)
    );
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("LEECH_LOG")).format_timestamp(None).init();
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Check { problem } => check(g, problem),
        Command::Solve { problem, parameter } => solve(g, problem, parameter.as_deref()),
        Command::Coefficients { problem } => coefficients(g, problem),
        Command::Oracle { problem } => oracle(g, problem),
        Command::Generate { kind, n, m, p, q } => generate_problem(g, kind, *n, *m, *p, *q),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
