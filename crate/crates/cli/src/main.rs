use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use latzeta::context::Context;
use latzeta::decompose::{decompose_auto, is_isomorphic_to_zn};
use latzeta::laplacian::{laplacian_s0, second_derivative_fd, SplitLattice, SymmetricPerturbation};
use latzeta::lattice::LatticeBasis;
use latzeta::special::{bessel_k, kbar, kbar_recurrence_gap};
use latzeta::stability::{is_stable, stabilize, StabilityVerdict};
use latzeta::summation::{theta, zeta_prime_auto, zeta_q, zeta_q_psf};
use latzeta::verify::verify_theorem;

#[derive(Parser)]
#[command(name = "latzeta", about = "Lattice zeta and theta computations", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate K, its normalized form, and the recurrence defect over an x grid
    BesselTable(BesselTableArgs),
    /// Evaluate theta or a shifted zeta on a lattice
    Eval(EvalArgs),
    /// Check stability and print the certificate
    CheckStable(LatticeArg),
    /// Contract a semi-stable lattice onto a stable one
    Stabilize(StabilizeArgs),
    /// Split a lattice into indecomposable orthogonal summands
    Decompose(LatticeArg),
    /// Trace-zero Laplacian of the interpolation energy at the split point
    Laplacian(LaplacianArgs),
    /// Sweep random stable lattices against the cubic reference
    Verify(VerifyArgs),
}

#[derive(Args)]
struct BesselTableArgs {
    /// Order of the kernel
    #[arg(long)]
    alpha: f64,
    /// Grid as start:end:step
    #[arg(long, value_name = "A:B:STEP")]
    x_grid: String,
}

#[derive(Copy, Clone, ValueEnum)]
enum EvalFn {
    /// Theta series at tau
    Theta,
    /// Shifted zeta without the origin
    Zeta,
    /// Shifted zeta with the origin, by direct summation
    Zetaq,
    /// Shifted zeta with the origin, by the dual-sum route
    ZetaqPsf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    lattice: PathBuf,
    #[arg(long = "fn", value_enum)]
    function: EvalFn,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    rel_tol: f64,
}

#[derive(Args)]
struct LatticeArg {
    #[arg(long)]
    lattice: PathBuf,
}

#[derive(Args)]
struct StabilizeArgs {
    #[arg(long)]
    lattice: PathBuf,
    /// Where to write the stabilized lattice
    #[arg(long)]
    out: PathBuf,
    /// Where to write the contraction matrix (array of rows)
    #[arg(long)]
    transform: PathBuf,
}

#[derive(Args)]
struct LaplacianArgs {
    /// Fixed factor of the split (may have rank 0)
    #[arg(long)]
    l1: PathBuf,
    /// Deformed factor of the split
    #[arg(long)]
    l2: PathBuf,
    #[arg(long)]
    s: f64,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    /// Re-derive the value from centered finite differences
    #[arg(long)]
    fd_check: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    s: f64,
    #[arg(long, default_value_t = 0.0)]
    q: f64,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Allow q beyond the proven bound; rows are labeled exploratory
    #[arg(long)]
    explore_q: bool,
    /// Emit one CSV row per lattice instead of the JSON report
    #[arg(long)]
    csv: bool,
    /// Write the report to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            e.exit()
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let ctx = Context::default();
    match cli.command {
        Command::BesselTable(a) => bessel_table(&a),
        Command::Eval(a) => eval(&a, &ctx),
        Command::CheckStable(a) => check_stable(&a.lattice, &ctx),
        Command::Stabilize(a) => run_stabilize(&a, &ctx),
        Command::Decompose(a) => run_decompose(&a.lattice, &ctx),
        Command::Laplacian(a) => run_laplacian(&a, &ctx),
        Command::Verify(a) => run_verify(&a, &ctx),
    }
}

fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:end:step, got {text:?}");
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>().with_context(|| format!("bad grid number {p:?}")))
        .collect::<Result<_>>()?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || end < start {
        bail!("grid needs end >= start and step > 0");
    }
    let mut xs = Vec::new();
    let mut k = 0u64;
    loop {
        let x = start + step * k as f64;
        if x > end + 1e-9 * step {
            break;
        }
        xs.push(x);
        k += 1;
    }
    Ok(xs)
}

fn bessel_table(a: &BesselTableArgs) -> Result<ExitCode> {
    let xs = parse_grid(&a.x_grid)?;
    println!("x,K_alpha,Kbar_alpha,recurrence_gap");
    for x in xs {
        let k = if x == 0.0 {
            f64::INFINITY
        } else {
            bessel_k(a.alpha, x)?
        };
        let kb = kbar(a.alpha, x)?;
        let gap = kbar_recurrence_gap(a.alpha, x)?;
        println!("{x},{k:.17e},{kb:.17e},{gap:.17e}");
    }
    Ok(ExitCode::SUCCESS)
}

fn load(path: &Path) -> Result<LatticeBasis> {
    LatticeBasis::read_file(path).with_context(|| format!("reading {}", path.display()))
}

fn print_result(r: &latzeta::summation::SummationResult) {
    let body = serde_json::json!({
        "value": r.value,
        "tail_bound": r.tail_bound,
        "terms_used": r.terms_used,
    });
    println!("{}", serde_json::to_string_pretty(&body).unwrap());
}

fn eval(a: &EvalArgs, ctx: &Context) -> Result<ExitCode> {
    let l = load(&a.lattice)?;
    let need_s = || a.s.context("--s is required for zeta evaluations");
    let result = match a.function {
        EvalFn::Theta => {
            let tau = a.tau.context("--tau is required for theta")?;
            theta(&l, tau, a.rel_tol, ctx)?
        }
        EvalFn::Zeta => zeta_prime_auto(&l, need_s()?, a.q, a.rel_tol, ctx)?,
        EvalFn::Zetaq => zeta_q(&l, need_s()?, a.q, a.rel_tol, ctx)?,
        EvalFn::ZetaqPsf => zeta_q_psf(&l, need_s()?, a.q, a.rel_tol, ctx)?,
    };
    print_result(&result);
    Ok(ExitCode::SUCCESS)
}

fn check_stable(path: &Path, ctx: &Context) -> Result<ExitCode> {
    let l = load(path)?;
    let cert = is_stable(&l, ctx)?;
    let verdict = match cert.verdict {
        StabilityVerdict::Stable => "stable",
        StabilityVerdict::Unstable => "unstable",
        StabilityVerdict::NotUnitDet => "not_unit_det",
    };
    let min_dets: Vec<serde_json::Value> = cert
        .min_dets
        .iter()
        .map(|e| serde_json::json!({ "rank": e.rank, "det": e.det }))
        .collect();
    let witness = cert
        .witness
        .as_ref()
        .map(|w| serde_json::from_str::<serde_json::Value>(&w.to_json()).unwrap());
    let body = serde_json::json!({
        "verdict": verdict,
        "determinant": l.determinant(),
        "search_radius": cert.search_radius,
        "min_dets": min_dets,
        "witness": witness,
    });
    println!("{}", serde_json::to_string_pretty(&body).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn run_stabilize(a: &StabilizeArgs, ctx: &Context) -> Result<ExitCode> {
    let l = load(&a.lattice)?;
    let (stable, transform) = stabilize(&l, ctx)?;
    stable
        .write_file(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let rows: Vec<Vec<f64>> = (0..transform.nrows())
        .map(|i| (0..transform.ncols()).map(|j| transform[(i, j)]).collect())
        .collect();
    let t = serde_json::to_string_pretty(&rows).unwrap();
    std::fs::write(&a.transform, t)
        .with_context(|| format!("writing {}", a.transform.display()))?;
    let body = serde_json::json!({
        "det_before": l.determinant(),
        "det_after": stable.determinant(),
    });
    println!("{}", serde_json::to_string_pretty(&body).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn run_decompose(path: &Path, ctx: &Context) -> Result<ExitCode> {
    let l = load(path)?;
    let dec = decompose_auto(&l, ctx)?;
    let is_zn = is_isomorphic_to_zn(&l, ctx)?;
    let summands: Vec<serde_json::Value> = dec
        .summands
        .iter()
        .map(|s| serde_json::from_str(&s.to_json()).unwrap())
        .collect();
    let ranks: Vec<usize> = dec.summands.iter().map(|s| s.rank()).collect();
    let dets: Vec<f64> = dec.summands.iter().map(|s| s.determinant()).collect();
    let body = serde_json::json!({
        "summands": summands,
        "ranks": ranks,
        "dets": dets,
        "is_Zn": is_zn,
    });
    println!("{}", serde_json::to_string_pretty(&body).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn run_laplacian(a: &LaplacianArgs, ctx: &Context) -> Result<ExitCode> {
    let l1 = load(&a.l1)?;
    let l2 = load(&a.l2)?;
    let split = SplitLattice::new(l1, l2)?;
    let closed = laplacian_s0(&split, a.s, a.q, ctx)?;
    let mut body = serde_json::json!({ "closed_form": closed.value });
    if a.fd_check {
        let mut fd = 0.0;
        for dir in SymmetricPerturbation::trace_zero_basis(split.d()) {
            fd += second_derivative_fd(&split, &dir, a.s, a.q, ctx)?;
        }
        let scale = closed.value.abs().max(1e-300);
        body["fd_value"] = serde_json::json!(fd);
        body["relative_gap"] = serde_json::json!((closed.value - fd).abs() / scale);
    }
    println!("{}", serde_json::to_string_pretty(&body).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn run_verify(a: &VerifyArgs, ctx: &Context) -> Result<ExitCode> {
    let report = verify_theorem(a.n, a.s, a.q, a.count, a.seed, a.explore_q, ctx)?;
    let text = if a.csv { report.to_csv() } else { report.to_json() };
    match &a.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    if report.violations > 0 {
        eprintln!("{} violation(s) found", report.violations);
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}
