use std::sync::Arc;

use peri_spectra::eigensolver::solve_p2_spectrum;
use peri_spectra::harness::{run_study, RowStatus, SweepConfig};
use peri_spectra::kernelmath::local_laplacian_lambda;
use peri_spectra::mesh::build_mesh;
use peri_spectra::{DomainSpec, Error, Horizon, KernelParams};

fn config(text: &str) -> SweepConfig {
    SweepConfig::from_json(text).unwrap()
}

const SMALL_INFTY_P3: &str = r#"{
    "schema_version": 1, "study": "delta_infty", "p": 3.0, "s": 0.5,
    "domain": {"a": 0.0, "b": 1.0}, "delta_list": [0.5, 1, 2, "INF"],
    "mesh_rule": {"n_interior": 24}, "thresholds": 0.05
}"#;

#[test]
fn flipping_the_initial_sign_gives_the_same_report() {
    let plus = config(SMALL_INFTY_P3);
    let mut minus = plus.clone();
    minus.initial_scale = -1.0;
    let a = run_study(&plus).unwrap().report;
    let b = run_study(&minus).unwrap().report;
    assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.summaries, b.summaries);
}

#[test]
fn third_p2_eigenvalue_grows_with_the_horizon_and_stays_below_the_fractional_one() {
    let cfg = config(
        r#"{
        "schema_version": 1, "study": "delta_infty", "p": 2.0, "s": 0.5,
        "domain": {"a": 0.0, "b": 1.0}, "delta_list": [0.25, 0.5, 1, 2, 4, 8, "INF"],
        "mesh_rule": {"n_interior": 64}, "k_list": [1, 2, 3], "thresholds": [0.05, 0.05, 0.05]
    }"#,
    );
    let report = run_study(&cfg).unwrap().report;
    let third: Vec<f64> = report
        .rows
        .iter()
        .filter(|r| r.k == 3)
        .map(|r| r.lambda_raw)
        .collect();
    assert_eq!(third.len(), 7);
    let inf = *third.last().unwrap();
    for w in third.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-10), "{third:?}");
    }
    assert!(third.iter().all(|&l| l <= inf * (1.0 + 1e-10)));
    assert!(report.rows.iter().all(|r| r.status == RowStatus::Ok));
}

#[test]
fn zero_function_has_zero_scaled_energies() {
    let cfg = config(
        r#"{
        "schema_version": 1, "study": "bbm", "p": 2.0, "s": 0.5,
        "domain": {"a": 0.0, "b": 1.0}, "delta_list": [0.2, 0.1, 0.05],
        "mesh_rule": {"cells_per_horizon": 4}, "thresholds": 0.02, "test_function": "zero"
    }"#,
    );
    let report = run_study(&cfg).unwrap().report;
    assert!(report
        .rows
        .iter()
        .all(|r| r.lambda_scaled == 0.0 && r.lambda_raw == 0.0));
    let s = &report.summaries[0];
    assert_eq!((s.estimate, s.reference, s.relative_error), (0.0, 0.0, 0.0));
    assert!(report.verdict.passed());
}

#[test]
fn p2_spectrum_is_monotone_in_the_horizon() {
    let spectrum = |delta: f64| {
        let mesh = Arc::new(
            build_mesh(
                &DomainSpec::new(0.0, 1.0, Horizon::Finite(delta)).unwrap(),
                32,
            )
            .unwrap(),
        );
        let params = KernelParams::new(0.5, 2.0, mesh.delta_effective).unwrap();
        solve_p2_spectrum(&mesh, &params, 31)
            .unwrap()
            .into_iter()
            .map(|e| e.lambda)
            .collect::<Vec<_>>()
    };
    let (short, long) = (spectrum(0.25), spectrum(0.5));
    for (k, (a, b)) in short.iter().zip(&long).enumerate() {
        assert!(a <= b, "k={}: {a} > {b}", k + 1);
    }
}

#[test]
fn small_local_sweep_reports_are_reproducible() {
    let cfg = config(
        r#"{
        "schema_version": 1, "study": "delta_zero", "p": 2.0, "s": 0.5,
        "domain": {"a": 0.0, "b": 1.0}, "delta_list": [0.2, 0.1, 0.05],
        "mesh_rule": {"cells_per_horizon": 4}, "k_list": [1, 2], "thresholds": [0.05, 0.1]
    }"#,
    );
    let a = run_study(&cfg).unwrap();
    let b = run_study(&cfg).unwrap();
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    assert_eq!(a.report.to_csv().unwrap(), b.report.to_csv().unwrap());
    assert_eq!(a.metadata.row_seconds.len(), 3);
    // approach from below, extrapolated past the last value
    let first: Vec<f64> = a
        .report
        .rows
        .iter()
        .filter(|r| r.k == 1)
        .map(|r| r.lambda_scaled)
        .collect();
    assert!(first.windows(2).all(|w| w[0] < w[1]));
    let s = a.report.summary(1).unwrap();
    assert!(s.estimate > first[2] && s.extrapolation.as_ref().unwrap().rate.unwrap() > 0.0);
    assert!((s.reference - 2.0 * local_laplacian_lambda(1, 1.0)).abs() < 1e-8);
    let csv = a.report.to_csv().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "delta_requested,delta_effective,k,lambda_raw,lambda_scaled,reference,rel_err,verdict"
    );
    assert_eq!(lines.len(), 1 + 6 + 2);
    assert!(lines[7].starts_with("limit,limit,1,"));
}

#[test]
fn invalid_configs_are_rejected_before_any_work() {
    let bad = [
        // wrong schema version
        r#"{"schema_version": 2, "study": "bbm", "p": 2, "s": 0.5, "domain": {"a": 0, "b": 1},
            "delta_list": [0.2, 0.1, 0.05], "mesh_rule": {"cells_per_horizon": 8}, "thresholds": 0.02}"#,
        // increasing horizons in a local sweep
        r#"{"schema_version": 1, "study": "delta_zero", "p": 2, "s": 0.5, "domain": {"a": 0, "b": 1},
            "delta_list": [0.05, 0.1, 0.2], "mesh_rule": {"cells_per_horizon": 8}, "thresholds": 0.02}"#,
        // too few cells per horizon
        r#"{"schema_version": 1, "study": "delta_zero", "p": 2, "s": 0.5, "domain": {"a": 0, "b": 1},
            "delta_list": [0.2, 0.1, 0.05], "mesh_rule": {"cells_per_horizon": 3}, "thresholds": 0.02}"#,
        // higher eigenvalues need p = 2
        r#"{"schema_version": 1, "study": "delta_zero", "p": 3, "s": 0.5, "domain": {"a": 0, "b": 1},
            "delta_list": [0.2, 0.1, 0.05], "mesh_rule": {"cells_per_horizon": 8}, "k_list": [1, 2],
            "thresholds": [0.02, 0.02]}"#,
        // nonpositive threshold
        r#"{"schema_version": 1, "study": "delta_infty", "p": 2, "s": 0.5, "domain": {"a": 0, "b": 1},
            "delta_list": [1, 2, "INF"], "mesh_rule": {"n_interior": 16}, "thresholds": 0}"#,
        // unknown field
        r#"{"schema_version": 1, "study": "delta_infty", "p": 2, "s": 0.5, "domain": {"a": 0, "b": 1},
            "delta_list": [1, 2, "INF"], "mesh_rule": {"n_interior": 16}, "thresholds": 0.1, "extra": 1}"#,
    ];
    for text in bad {
        let err = SweepConfig::from_json(text).and_then(|c| c.validate().map(|_| c));
        assert!(matches!(err, Err(Error::Config(_))), "{text}: {err:?}");
    }
}
