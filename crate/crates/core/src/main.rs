use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use peri_spectra::eigensolver::{random_rayleigh_probes, solve_first_eigenpair, solve_p2_spectrum};
use peri_spectra::harness::studies::{describe, report_base};
use peri_spectra::harness::{
    run_all, run_study, StudyKind, SweepConfig, EXIT_CONFIG_ERROR, EXIT_PASS, EXIT_STUDY_FAILURE,
};
use peri_spectra::kernelmath::{gamma_constant, k_constant};
use peri_spectra::mesh::build_mesh;
use peri_spectra::{DomainSpec, Error, Horizon, KernelParams, NonlocalForm, SolverOptions};

#[derive(Parser)]
#[command(
    name = "peri-spectra",
    version,
    about = "Eigenvalues of the truncated-horizon fractional p-Laplacian in 1-D"
)]
struct Cli {
    /// Worker threads for assembly (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random Rayleigh probes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print gamma(N, p) and K(N, p) = gamma / p.
    Gamma { n: usize, p: f64 },
    /// Compute eigenpairs on a single mesh.
    Eigen(EigenArgs),
    /// Horizon sweep towards the local limit.
    SweepZero(StudyArgs),
    /// Horizon sweep towards the fractional limit.
    SweepInf(StudyArgs),
    /// Scaled energies of a fixed function for shrinking horizons.
    Bbm(StudyArgs),
    /// Run every config in a directory.
    All {
        /// Directory of JSON configs.
        #[arg(long)]
        config: PathBuf,
        /// Directory for reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct StudyArgs {
    /// JSON sweep config.
    #[arg(long)]
    config: PathBuf,
    /// Report path; `.json`, `.csv` and `.meta.json` files are written.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EigenArgs {
    #[arg(long)]
    p: f64,
    #[arg(long)]
    s: f64,
    /// Horizon, a positive number or `inf`.
    #[arg(long)]
    delta: Horizon,
    /// Number of cells in the domain.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Number of eigenpairs (more than one only for p = 2).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// JSON solver options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the eigenpairs as a JSON array here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let code = match threads {
        Some(t) => peri_spectra::exec::with_threads(t, move || dispatch(cli)),
        None => dispatch(cli),
    };
    ExitCode::from(code as u8)
}

fn dispatch(cli: Cli) -> i32 {
    let seed = cli.seed;
    let result = match cli.command {
        Command::Gamma { n, p } => gamma(n, p),
        Command::Eigen(args) => eigen(&args, seed),
        Command::SweepZero(args) => study(&args, StudyKind::DeltaZero, seed),
        Command::SweepInf(args) => study(&args, StudyKind::DeltaInfty, seed),
        Command::Bbm(args) => study(&args, StudyKind::Bbm, seed),
        Command::All { config, out } => Ok(run_all(&config, out.as_deref())),
    };
    match result {
        Ok(code) => code,
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            EXIT_CONFIG_ERROR
        }
        Err(
            e @ (Error::InvalidArgument(_)
            | Error::DimensionUnsupported(_)
            | Error::HorizonUnderresolved { .. }),
        ) => {
            eprintln!("error: {e}");
            EXIT_CONFIG_ERROR
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_STUDY_FAILURE
        }
    }
}

fn gamma(n: usize, p: f64) -> peri_spectra::Result<i32> {
    let g = gamma_constant(n, p)?;
    let k = k_constant(n, p)?;
    println!(
        "{}",
        serde_json::json!({ "n": n, "p": p, "gamma": g, "k": k })
    );
    Ok(EXIT_PASS)
}

fn eigen(args: &EigenArgs, seed: Option<u64>) -> peri_spectra::Result<i32> {
    let mut opts = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SolverOptions>(&text)
                .map_err(|e| Error::Config(e.to_string()))?
        }
        None => SolverOptions::default(),
    };
    if let Some(seed) = seed {
        opts.seed = seed;
    }
    opts.validate()?;
    let mesh = Arc::new(build_mesh(
        &DomainSpec::new(args.a, args.b, args.delta)?,
        args.n,
    )?);
    let params = KernelParams::new(args.s, args.p, mesh.delta_effective)?;
    if mesh.snapped() {
        eprintln!(
            "note: horizon {} snapped to {}",
            args.delta, mesh.delta_effective
        );
    }
    let pairs = if args.p == 2.0 {
        solve_p2_spectrum(&mesh, &params, args.k)?
    } else if args.k == 1 {
        vec![solve_first_eigenpair(&mesh, &params, &opts)?]
    } else {
        return Err(Error::InvalidArgument(
            "k > 1 is only available for p = 2".into(),
        ));
    };
    let form = NonlocalForm::for_mesh(&mesh, params)?;
    let probe = random_rayleigh_probes(&form, 100, opts.seed)?;
    if probe < pairs[0].lambda * (1.0 - 1e-8) {
        eprintln!(
            "warning: a random probe reached {probe:e}, below lambda_1 = {:e}",
            pairs[0].lambda
        );
    }
    for e in &pairs {
        eprintln!(
            "k={} lambda={:.12e} residual={:.2e} converged={}",
            e.index_k, e.lambda, e.residual, e.converged
        );
    }
    let records: Vec<_> = pairs.iter().map(|e| e.record()).collect();
    let text = serde_json::to_string_pretty(&records)? + "\n";
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(if pairs.iter().all(|e| e.converged) {
        EXIT_PASS
    } else {
        EXIT_STUDY_FAILURE
    })
}

fn study(args: &StudyArgs, kind: StudyKind, seed: Option<u64>) -> peri_spectra::Result<i32> {
    let mut cfg = SweepConfig::load(&args.config)?;
    if cfg.study != kind {
        return Err(Error::Config(format!(
            "{} describes a {} study",
            args.config.display(),
            cfg.study.name()
        )));
    }
    if let Some(seed) = seed {
        cfg.solver.seed = seed;
    }
    let name = args
        .config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let run = run_study(&cfg)?;
    for line in describe(&name, &run.report) {
        println!("{line}");
    }
    let base = args
        .out
        .clone()
        .or_else(|| report_base(&cfg, &name, None::<&Path>));
    if let Some(base) = base {
        let written = run.report.write(&base, &run.metadata)?;
        for path in written {
            eprintln!("wrote {}", path.display());
        }
    }
    if !run.report.verdict.passed() {
        for s in &run.report.summaries {
            for note in &s.notes {
                eprintln!("{note}");
            }
        }
        return Ok(EXIT_STUDY_FAILURE);
    }
    Ok(EXIT_PASS)
}
