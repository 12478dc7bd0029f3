use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use statrs::function::gamma::ln_gamma;

use super::config::{MeshRule, StudyKind, SweepConfig, TestFunction};
use super::extrapolate::richardson;
use super::report::{relative_error, Row, RowStatus, RunMetadata, Summary, SweepReport, Verdict};
use crate::eigensolver::{shooting_oracle_lambda1, solve_first_eigenpair_from, solve_p2_spectrum};
use crate::energy::nonlocal_energy;
use crate::error::{Error, Result};
use crate::exec::current_threads;
use crate::kernelmath::{
    embedding_constant, gamma_constant, scaling_factor, Horizon, KernelParams,
};
use crate::mesh::{build_mesh, interpolate, DomainSpec, Mesh};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_STUDY_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

/// Largest admissible share of rows whose solver hit its iteration cap.
pub const MAX_FLAGGED_FRACTION: f64 = 0.2;
/// Relative slack for the monotonicity and sandwich comparisons.
pub const ORDER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct StudyRun {
    pub report: SweepReport,
    pub metadata: RunMetadata,
}

struct Solved {
    lambda: f64,
    residual: Option<f64>,
    iterations: Option<usize>,
    converged: bool,
}

struct Timer {
    started: u64,
    clock: Instant,
    rows: Vec<f64>,
}

impl Timer {
    fn start() -> Self {
        let started = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Timer {
            started,
            clock: Instant::now(),
            rows: Vec::new(),
        }
    }

    fn time<T>(&mut self, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.rows.push(t.elapsed().as_secs_f64());
        out
    }

    fn finish(self) -> RunMetadata {
        RunMetadata {
            started_unix_seconds: self.started,
            total_seconds: self.clock.elapsed().as_secs_f64(),
            row_seconds: self.rows,
            threads: current_threads(),
        }
    }
}

fn version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

fn domain_length(cfg: &SweepConfig) -> f64 {
    cfg.domain.b - cfg.domain.a
}

fn coupled_mesh(cfg: &SweepConfig, delta: f64) -> Result<Arc<Mesh>> {
    let MeshRule::CellsPerHorizon { cells_per_horizon } = cfg.mesh_rule else {
        return Err(Error::Config("expected mesh_rule cells_per_horizon".into()));
    };
    let n = ((domain_length(cfg) * cells_per_horizon as f64 / delta).round() as usize).max(2);
    let domain = DomainSpec::new(cfg.domain.a, cfg.domain.b, Horizon::Finite(delta))?;
    Ok(Arc::new(build_mesh(&domain, n)?))
}

/// Eigenvalues for every `k` in the configuration plus `lambda_1`.
fn solve_at(
    cfg: &SweepConfig,
    mesh: &Arc<Mesh>,
    params: &KernelParams,
) -> Result<(Vec<Solved>, f64)> {
    if cfg.p == 2.0 {
        let pairs = solve_p2_spectrum(mesh, params, cfg.k_max())?;
        let lambda1 = pairs[0].lambda;
        let solved = cfg
            .k_list
            .iter()
            .map(|&k| {
                let e = &pairs[k - 1];
                Solved {
                    lambda: e.lambda,
                    residual: Some(e.residual),
                    iterations: None,
                    converged: e.converged,
                }
            })
            .collect();
        Ok((solved, lambda1))
    } else {
        let (a, len) = (mesh.a, mesh.b - mesh.a);
        let bump = interpolate(
            |x| (std::f64::consts::PI * (x - a) / len).sin(),
            mesh.clone(),
        )?;
        let e = solve_first_eigenpair_from(&bump.scaled(cfg.initial_scale), params, &cfg.solver)?;
        let lambda = e.lambda;
        let solved = Solved {
            lambda,
            residual: Some(e.residual),
            iterations: Some(e.iterations),
            converged: e.converged,
        };
        Ok((vec![solved], lambda))
    }
}

fn row(delta: Horizon, mesh: &Mesh, k: usize, solved: &Solved, scale: f64) -> Row {
    Row {
        delta_requested: delta,
        delta_effective: mesh.delta_effective,
        n_interior: mesh.n_cells,
        k,
        lambda_raw: solved.lambda,
        lambda_scaled: scale * solved.lambda,
        residual: solved.residual,
        iterations: solved.iterations,
        converged: solved.converged,
        status: if solved.converged {
            RowStatus::Ok
        } else {
            RowStatus::Flagged
        },
    }
}

fn flagged_fraction(rows: &[Row]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| !r.converged).count() as f64 / rows.len() as f64
}

fn finish(cfg: &SweepConfig, rows: Vec<Row>, summaries: Vec<Summary>, timer: Timer) -> StudyRun {
    let flagged = flagged_fraction(&rows);
    let verdict = Verdict::from_bool(summaries.iter().all(|s| s.verdict.passed()));
    let report = SweepReport {
        study: cfg.study.name().to_string(),
        version: version(),
        config: cfg.clone(),
        rows,
        summaries,
        flagged_fraction: flagged,
        verdict,
    };
    StudyRun {
        report,
        metadata: timer.finish(),
    }
}

/// Local limit `gamma(1, p) lambda_k^{0,1,p}` of the scaled eigenvalues. The
/// `k`-th one-dimensional eigenfunction is the first one on `k` equal pieces.
pub fn local_reference(p: f64, length: f64, k: usize) -> Result<f64> {
    Ok(gamma_constant(1, p)? * shooting_oracle_lambda1(p, length / k as f64)?)
}

/// Horizon sweep towards zero with `h = delta / m`, comparing extrapolated
/// scaled eigenvalues with the local limit.
pub fn run_delta_zero_study(cfg: &SweepConfig) -> Result<StudyRun> {
    expect_kind(cfg, StudyKind::DeltaZero)?;
    let mut timer = Timer::start();
    let mut rows = Vec::new();
    for &delta in &cfg.delta_list {
        let d = delta
            .finite()
            .ok_or_else(|| Error::Config("finite horizons only".into()))?;
        let mesh = coupled_mesh(cfg, d)?;
        let params = cfg.params(mesh.delta_effective)?;
        let (solved, _) = timer.time(|| solve_at(cfg, &mesh, &params))?;
        let scale = scaling_factor(&params)?;
        rows.extend(
            cfg.k_list
                .iter()
                .zip(&solved)
                .map(|(&k, s)| row(delta, &mesh, k, s, scale)),
        );
    }
    let flagged = flagged_fraction(&rows);
    let mut summaries = Vec::new();
    for (i, &k) in cfg.k_list.iter().enumerate() {
        let (deltas, values): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.k == k)
            .map(|r| {
                (
                    r.delta_effective.finite().unwrap_or(f64::NAN),
                    r.lambda_scaled,
                )
            })
            .unzip();
        let reference = local_reference(cfg.p, domain_length(cfg), k)?;
        summaries.push(limit_summary(
            k,
            &deltas,
            &values,
            reference,
            cfg.threshold(i),
            flagged,
        ));
    }
    Ok(finish(cfg, rows, summaries, timer))
}

fn limit_summary(
    k: usize,
    deltas: &[f64],
    values: &[f64],
    reference: f64,
    threshold: f64,
    flagged: f64,
) -> Summary {
    let fit = richardson(deltas, values);
    let rel = relative_error(fit.limit, reference);
    let mut notes = Vec::new();
    if !fit.is_sound() {
        notes.push("extrapolation found no positive convergence rate".to_string());
    }
    if flagged > MAX_FLAGGED_FRACTION {
        notes.push(format!("{:.0}% of rows did not converge", 100.0 * flagged));
    }
    if rel > threshold {
        notes.push(format!("relative error {rel:e} exceeds {threshold:e}"));
    }
    Summary {
        k,
        estimate: fit.limit,
        extrapolation: Some(fit),
        reference,
        relative_error: rel,
        threshold,
        verdict: Verdict::from_bool(notes.is_empty()),
        notes,
    }
}

/// Horizon sweep towards infinity on a fixed mesh of `Omega`, checking
/// monotonicity in the horizon, the norm-equivalence sandwich and the gap
/// to the fractional eigenvalue at the largest finite horizon.
pub fn run_delta_infty_study(cfg: &SweepConfig) -> Result<StudyRun> {
    expect_kind(cfg, StudyKind::DeltaInfty)?;
    let MeshRule::Fixed { n_interior } = cfg.mesh_rule else {
        return Err(Error::Config("expected mesh_rule n_interior".into()));
    };
    let length = domain_length(cfg);
    let mut timer = Timer::start();
    let mut rows = Vec::new();
    let mut first = Vec::new();
    for &delta in &cfg.delta_list {
        let domain = DomainSpec::new(cfg.domain.a, cfg.domain.b, delta)?;
        let mesh = Arc::new(build_mesh(&domain, n_interior)?);
        let params = cfg.params(mesh.delta_effective)?;
        let (solved, lambda1) = timer.time(|| solve_at(cfg, &mesh, &params))?;
        first.push((params, lambda1));
        rows.extend(
            cfg.k_list
                .iter()
                .zip(&solved)
                .map(|(&k, s)| row(delta, &mesh, k, s, 1.0)),
        );
    }
    let flagged = flagged_fraction(&rows);
    let nk = cfg.k_list.len();
    let mut summaries = Vec::new();
    for (i, &k) in cfg.k_list.iter().enumerate() {
        let idx: Vec<usize> = (0..cfg.delta_list.len()).map(|j| j * nk + i).collect();
        let lam: Vec<f64> = idx.iter().map(|&r| rows[r].lambda_raw).collect();
        let inf = *lam.last().expect("validated nonempty");
        let mut notes = Vec::new();
        for w in 0..lam.len() - 1 {
            if lam[w + 1] < lam[w] - ORDER_TOLERANCE * lam[w].abs() {
                rows[idx[w + 1]].status = RowStatus::Violation;
                let msg = format!(
                    "k={k}: monotonicity violated, lambda({}) = {:e} < lambda({}) = {:e}",
                    cfg.delta_list[w + 1],
                    lam[w + 1],
                    cfg.delta_list[w],
                    lam[w]
                );
                eprintln!("{msg}");
                notes.push(msg);
            }
        }
        for w in 0..lam.len() - 1 {
            let (params, lambda1) = &first[w];
            let c = embedding_constant(params, length, *lambda1)?;
            let upper = c.powf(cfg.p) * lam[w];
            let lower_ok = lam[w] <= inf * (1.0 + ORDER_TOLERANCE);
            let upper_ok = inf <= upper * (1.0 + ORDER_TOLERANCE);
            if !(lower_ok && upper_ok) {
                rows[idx[w]].status = RowStatus::Violation;
                notes.push(format!(
                    "k={k}: sandwich violated at delta={}: {:e} <= {inf:e} <= {upper:e}",
                    cfg.delta_list[w], lam[w]
                ));
            }
        }
        let estimate = lam[lam.len() - 2];
        let rel = relative_error(estimate, inf);
        let threshold = cfg.threshold(i);
        if flagged > MAX_FLAGGED_FRACTION {
            notes.push(format!("{:.0}% of rows did not converge", 100.0 * flagged));
        }
        if rel > threshold {
            notes.push(format!(
                "k={k}: gap {rel:e} at delta={} exceeds {threshold:e}",
                cfg.delta_list[cfg.delta_list.len() - 2]
            ));
        }
        summaries.push(Summary {
            k,
            estimate,
            extrapolation: None,
            reference: inf,
            relative_error: rel,
            threshold,
            verdict: Verdict::from_bool(notes.is_empty()),
            notes,
        });
    }
    Ok(finish(cfg, rows, summaries, timer))
}

/// `gamma(1, p) int_a^b |u'|^p` for `u = sin(pi (x - a) / L)`.
pub fn sine_local_energy(p: f64, length: f64) -> Result<f64> {
    // (1/pi) int_0^pi |cos t|^p dt = Gamma((p+1)/2) / (sqrt(pi) Gamma(p/2 + 1))
    let mean =
        (ln_gamma((p + 1.0) / 2.0) - ln_gamma(p / 2.0 + 1.0)).exp() / std::f64::consts::PI.sqrt();
    Ok(gamma_constant(1, p)? * (std::f64::consts::PI / length).powf(p) * length * mean)
}

/// Scaled energies of a fixed function for shrinking horizons, compared
/// with the local gradient energy.
pub fn run_bbm_check(cfg: &SweepConfig) -> Result<StudyRun> {
    expect_kind(cfg, StudyKind::Bbm)?;
    let (a, length) = (cfg.domain.a, domain_length(cfg));
    let mut timer = Timer::start();
    let mut rows = Vec::new();
    for &delta in &cfg.delta_list {
        let d = delta
            .finite()
            .ok_or_else(|| Error::Config("finite horizons only".into()))?;
        let mesh = coupled_mesh(cfg, d)?;
        let params = cfg.params(mesh.delta_effective)?;
        let test_function = cfg.test_function;
        let energy = timer.time(|| -> Result<f64> {
            let u = interpolate(
                |x| match test_function {
                    TestFunction::Sine => (std::f64::consts::PI * (x - a) / length).sin(),
                    TestFunction::Zero => 0.0,
                },
                mesh.clone(),
            )?;
            Ok(nonlocal_energy(&u, &params)?.total)
        })?;
        let solved = Solved {
            lambda: energy,
            residual: None,
            iterations: None,
            converged: true,
        };
        rows.push(row(delta, &mesh, 1, &solved, scaling_factor(&params)?));
    }
    let reference = match cfg.test_function {
        TestFunction::Sine => sine_local_energy(cfg.p, length)?,
        TestFunction::Zero => 0.0,
    };
    let (deltas, values): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| {
            (
                r.delta_effective.finite().unwrap_or(f64::NAN),
                r.lambda_scaled,
            )
        })
        .unzip();
    let summary = limit_summary(1, &deltas, &values, reference, cfg.threshold(0), 0.0);
    Ok(finish(cfg, rows, vec![summary], timer))
}

fn expect_kind(cfg: &SweepConfig, kind: StudyKind) -> Result<()> {
    cfg.validate()?;
    if cfg.study != kind {
        return Err(Error::Config(format!(
            "config describes a {} study, not {}",
            cfg.study.name(),
            kind.name()
        )));
    }
    Ok(())
}

pub fn run_study(cfg: &SweepConfig) -> Result<StudyRun> {
    match cfg.study {
        StudyKind::DeltaZero => run_delta_zero_study(cfg),
        StudyKind::DeltaInfty => run_delta_infty_study(cfg),
        StudyKind::Bbm => run_bbm_check(cfg),
    }
}

/// One line per summary, suitable for terminal output.
pub fn describe(name: &str, report: &SweepReport) -> Vec<String> {
    report
        .summaries
        .iter()
        .map(|s| {
            let rate = s
                .extrapolation
                .and_then(|e| e.rate)
                .map(|a| format!(" rate={a:.3}"))
                .unwrap_or_default();
            format!(
                "{} {name} k={}: estimate={:.10e} reference={:.10e} rel_err={:.3e} threshold={:.1e}{rate}",
                s.verdict.as_str().to_uppercase(),
                s.k,
                s.estimate,
                s.reference,
                s.relative_error,
                s.threshold
            )
        })
        .collect()
}

/// Where a study's report files go: `<out_dir>/<name>` when an output
/// directory is given, else the config's `output_path`.
pub fn report_base(cfg: &SweepConfig, name: &str, out_dir: Option<&Path>) -> Option<PathBuf> {
    match out_dir {
        Some(dir) => Some(dir.join(name)),
        None => cfg.output_path.clone(),
    }
}

/// Runs every `*.json` config in `config_dir` in file-name order. All
/// configs are validated before any study starts. Returns the exit code.
pub fn run_all(config_dir: &Path, out_dir: Option<&Path>) -> i32 {
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(config_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_dir.display());
            return EXIT_CONFIG_ERROR;
        }
    };
    paths.sort();
    if paths.is_empty() {
        eprintln!("warning: no configs found in {}", config_dir.display());
        return EXIT_PASS;
    }
    let mut configs = Vec::new();
    let mut malformed = false;
    for path in &paths {
        match SweepConfig::load(path) {
            Ok(cfg) => configs.push((path, cfg)),
            Err(e) => {
                eprintln!("config error: {e}");
                malformed = true;
            }
        }
    }
    if malformed {
        return EXIT_CONFIG_ERROR;
    }
    let mut code = EXIT_PASS;
    for (path, cfg) in configs {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match run_study(&cfg) {
            Ok(run) => {
                for line in describe(&name, &run.report) {
                    println!("{line}");
                }
                if let Some(base) = report_base(&cfg, &name, out_dir) {
                    if let Err(e) = run.report.write(&base, &run.metadata) {
                        eprintln!("error: writing report for {name}: {e}");
                        code = EXIT_STUDY_FAILURE;
                    }
                }
                if !run.report.verdict.passed() {
                    for s in &run.report.summaries {
                        for note in &s.notes {
                            eprintln!("{name}: {note}");
                        }
                    }
                    code = EXIT_STUDY_FAILURE;
                }
            }
            Err(e) => {
                eprintln!("FAIL {name}: {e}");
                code = EXIT_STUDY_FAILURE;
            }
        }
    }
    code
}
