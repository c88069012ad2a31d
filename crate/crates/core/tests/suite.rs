use std::sync::Arc;

use esn2::{
    expected_info, run_validation_suite, CubatureControls, DpParams, InfoKind, InfoMatrix, SuiteConfig, SuiteLevel,
    ValidationReport,
};

fn failures(report: &ValidationReport) -> Vec<String> {
    report.checks.iter().filter(|c| !c.passed).map(|c| format!("{} {:?} {}", c.name, c.dp, c.note)).collect()
}

#[test]
fn fast_suite_passes_on_default_points() {
    let report = run_validation_suite(&SuiteConfig::new(SuiteLevel::Fast));
    assert!(!report.checks.is_empty());
    assert!(report.all_passed(), "{}", report.render());
    for name in ["score-vs-fd", "observed-info-vs-fd", "expected-info-vs-mc", "sn2-reduction-vs-mc", "singular-point"] {
        assert!(report.checks.iter().any(|c| c.name == name), "missing check {name}");
    }
}

#[test]
fn loose_cubature_still_passes_monte_carlo_check() {
    let mut config = SuiteConfig::new(SuiteLevel::Fast);
    config.cubature = CubatureControls { rel_tol: 1e-2, ..CubatureControls::default() };
    let report = run_validation_suite(&config);
    let mc: Vec<_> = report.checks.iter().filter(|c| c.name == "expected-info-vs-mc").collect();
    assert_eq!(mc.len(), config.dps.len());
    assert!(mc.iter().all(|c| c.passed), "{}", report.render());
}

#[test]
fn perturbed_cross_shape_entry_is_caught() {
    let mut config = SuiteConfig::new(SuiteLevel::Fast);
    config.expected_info = Arc::new(|dp: DpParams, tol| {
        let mut info = expected_info(dp, tol)?;
        let mut rows = info.matrix.data;
        rows[5][6] += 0.05;
        info.matrix = InfoMatrix::from_upper(InfoKind::Expected, rows);
        Ok(info)
    });
    let report = run_validation_suite(&config);
    assert!(!report.all_passed());
    let failed = failures(&report);
    assert!(failed.iter().any(|f| f.starts_with("expected-info-vs-mc")), "{failed:?}");
}

#[test]
fn identical_seeds_reproduce_the_report() {
    let mut config = SuiteConfig::new(SuiteLevel::Fast);
    config.dps.truncate(1);
    let a = run_validation_suite(&config);
    let b = run_validation_suite(&config);
    assert_eq!(a, b);
}

#[test]
fn empty_point_set_gives_empty_report() {
    let mut config = SuiteConfig::new(SuiteLevel::Fast);
    config.dps.clear();
    let report = run_validation_suite(&config);
    assert!(report.checks.is_empty());
    assert!(report.all_passed());
}
