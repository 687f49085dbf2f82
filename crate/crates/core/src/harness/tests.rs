use super::*;
use crate::characterize::ObservableMethod;
use crate::matcore::{random_density, sigma_x};
use crate::serial::SerializedOperator;
use std::f64::consts::FRAC_1_SQRT_2;

fn ok_metrics(report: &ExperimentReport) -> Vec<&RunMetrics> {
    report.runs.iter().filter_map(RunRecord::metrics).collect()
}

#[test]
fn density_exact_round_trip() {
    let cfg = ExperimentConfig::new(Kind::Density, 3, (0..20).collect());
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.runs.len(), 20);
    assert_eq!(report.summary.failures, 0);
    assert!(report.summary.max_frobenius_error.unwrap() <= 1e-9);
    assert!(report.summary.settings_consistent);
    assert!(report.sweep.is_none());
    for m in ok_metrics(&report) {
        assert!((m.fidelity.unwrap() - 1.0).abs() <= 1e-8);
        assert_eq!(m.elements.len(), 9);
        assert!(m.residuals.trace.unwrap() <= 1e-8);
    }
}

#[test]
fn report_embeds_resolved_config() {
    let cfg = ExperimentConfig::new(Kind::Kraus, 2, vec![1]);
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.config.environment_state.as_ref().unwrap().len(), 2);
    assert_eq!(report.config.input_lambda, 0.3);
    assert_eq!(report.version, env!("CARGO_PKG_VERSION"));
    let m = report.runs[0].metrics().unwrap();
    // two Kraus operators, four elements each, oracle values alongside
    assert_eq!(m.elements.len(), 8);
    assert!(m.elements.iter().all(|e| e.k.is_some() && e.abs_err <= 1e-9));
    assert!(m.residuals.completeness.unwrap() <= 1e-8);
}

#[test]
fn kraus_sampled_million_shots() {
    let mut cfg = ExperimentConfig::new(Kind::Kraus, 2, vec![0, 1, 2]);
    cfg.mode = ModeConfig::Sampled { shots: 1_000_000 };
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.summary.failures, 0);
    let mean = report.summary.mean_frobenius_error.unwrap();
    assert!(mean <= 0.01, "mean error {mean}");
    assert!(mean > 0.0);
}

#[test]
fn reports_are_reproducible() {
    let mut cfg = ExperimentConfig::new(Kind::Povm, 3, vec![4, 5]);
    cfg.mode = ModeConfig::Sampled { shots: 5_000 };
    let a = run_experiment(&cfg).unwrap().without_timing();
    let b = run_experiment(&cfg).unwrap().without_timing();
    assert_eq!(a, b);
}

#[test]
fn config_invariants() {
    let bad = |f: fn(&mut ExperimentConfig)| {
        let mut cfg = ExperimentConfig::new(Kind::Kraus, 2, vec![0]);
        f(&mut cfg);
        cfg.validate().unwrap_err()
    };
    bad(|c| c.seeds.clear());
    bad(|c| c.d_s = 1);
    bad(|c| c.d_s = 9);
    bad(|c| c.d_e = 9);
    bad(|c| c.mode = ModeConfig::Sampled { shots: 99 });
    bad(|c| c.theta = f64::NAN);
    bad(|c| c.input_lambda = 1.5);
    bad(|c| c.probe = [[1.0, 0.0], [1.0, 0.0]]);
    bad(|c| c.environment_state = Some(vec![[1.0, 0.0]]));
    // d_e only matters for channel targets
    let mut cfg = ExperimentConfig::new(Kind::Unitary, 2, vec![0]);
    cfg.d_e = 100;
    assert!(cfg.validate().is_ok());
}

#[test]
fn explicit_kraus_set_is_revalidated() {
    let mut cfg = ExperimentConfig::new(Kind::Kraus, 2, vec![0]);
    let a0 = CMatrix::identity(2).scale(C64::new(FRAC_1_SQRT_2, 0.0));
    cfg.instance = InstanceSource::Explicit {
        operators: vec![(&a0).into(), (&a0).into()],
    };
    assert!(cfg.validate().is_ok());
    let report = run_experiment(&cfg).unwrap();
    assert!(report.summary.max_frobenius_error.unwrap() <= 1e-9);

    cfg.instance = InstanceSource::Explicit {
        operators: vec![(&a0).into(), (&CMatrix::identity(2)).into()],
    };
    match cfg.validate() {
        Err(Error::Completeness { residual }) => assert!(residual > 0.5),
        other => panic!("expected completeness error, got {other:?}"),
    }
}

#[test]
fn explicit_operators_checked_by_kind() {
    let with = |kind, op: &CMatrix| {
        let mut cfg = ExperimentConfig::new(kind, 2, vec![0]);
        cfg.instance = InstanceSource::Explicit {
            operators: vec![op.into()],
        };
        cfg.validate()
    };
    let not_unitary = CMatrix::identity(2).scale(C64::new(1.1, 0.0));
    assert!(matches!(with(Kind::Unitary, &not_unitary), Err(Error::NotUnitary { .. })));
    assert!(with(Kind::Unitary, &sigma_x()).is_ok());
    let skew = CMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
    assert!(matches!(with(Kind::Observable, &skew), Err(Error::NotHermitian { .. })));
    assert!(matches!(with(Kind::Density, &sigma_x()), Err(Error::InvalidDensity(_))));
    let rho = random_density(2, 3);
    assert!(with(Kind::Density, &rho).is_ok());
    let wrong_dim = CMatrix::identity(3);
    assert!(matches!(with(Kind::Unitary, &wrong_dim), Err(Error::DimensionMismatch(_))));
    let mut cfg = ExperimentConfig::new(Kind::Density, 2, vec![0]);
    cfg.reference = Some(SerializedOperator::from(&not_unitary));
    assert!(matches!(cfg.validate(), Err(Error::NotUnitary { .. })));
}

#[test]
fn element_failures_are_recorded_per_seed() {
    // A diagonal reference unitary makes every off-diagonal density element
    // unreachable, which must fail the runs without aborting the batch.
    let mut cfg = ExperimentConfig::new(Kind::Density, 2, vec![0, 1]);
    cfg.reference = Some((&CMatrix::identity(2)).into());
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.summary.runs, 2);
    assert_eq!(report.summary.failures, 2);
    assert!(report.summary.max_frobenius_error.is_none());
    match &report.runs[0].outcome {
        RunOutcome::Failed { error } => assert!(error.contains("reference-unitary")),
        RunOutcome::Ok(_) => panic!("expected failure"),
    }
}

#[test]
fn theta_does_not_change_errors() {
    let at = |theta| {
        let mut cfg = ExperimentConfig::new(Kind::Unitary, 3, vec![0, 1, 2]);
        cfg.theta = theta;
        run_experiment(&cfg).unwrap()
    };
    let (a, b) = (at(std::f64::consts::FRAC_PI_4), at(std::f64::consts::PI));
    for (x, y) in ok_metrics(&a).iter().zip(ok_metrics(&b)) {
        assert!((x.frobenius_error - y.frobenius_error).abs() <= 1e-9);
    }
}

fn delta_cfg(values: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Kind::Observable, 3, vec![0, 1, 2]);
    cfg.sweep = Some(Sweep::DeltaTheta { values });
    cfg
}

#[test]
fn delta_theta_slopes() {
    let report = run_experiment(&delta_cfg(vec![0.1, 0.05, 0.025, 0.0125])).unwrap();
    assert_eq!(report.runs.len(), 3 * 4 * 2);
    let Some(SweepSummary::DeltaTheta {
        points,
        first_order_slope,
        refined_slope,
        per_seed_slopes,
    }) = &report.sweep
    else {
        panic!("missing summary")
    };
    assert_eq!(points.len(), 4);
    assert_eq!(per_seed_slopes.len(), 3);
    assert!((first_order_slope - 1.0).abs() < 0.2, "{first_order_slope}");
    assert!((refined_slope - 2.0).abs() < 0.2, "{refined_slope}");
    // halving δθ halves the first-order error
    for w in points.windows(2) {
        let ratio = w[0].first_order_error / w[1].first_order_error;
        assert!(ratio > 2.0 / 1.3 && ratio < 2.0 * 1.3, "{ratio}");
    }
}

#[test]
fn sigma_x_refined_sweep_is_exact_on_the_diagonal() {
    let mut cfg = delta_cfg(vec![0.2, 0.1, 0.05, 0.025]);
    cfg.d_s = 2;
    cfg.seeds = vec![0];
    cfg.instance = InstanceSource::Explicit {
        operators: vec![(&sigma_x()).into()],
    };
    let report = run_experiment(&cfg).unwrap();
    for run in report.runs.iter().filter(|r| r.estimator == Some(ObservableMethod::Refined)) {
        let dt = run.sweep_point.unwrap();
        let m = run.metrics().unwrap();
        for e in &m.elements {
            if e.i == e.j {
                assert!(e.abs_err < 1e-12);
            } else {
                // off-diagonal reads sin δθ / δθ
                let realized = (1.0 + dt) - 1.0;
                let expected = 1.0 - realized.sin() / realized;
                assert!((e.abs_err - expected).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn delta_theta_sweep_preconditions() {
    let err = |values: Vec<f64>| run_experiment(&delta_cfg(values)).unwrap_err();
    err(vec![0.1, 0.05, 0.025]);
    err(vec![0.1, 0.09, 0.08, 0.07]);
    err(vec![0.1, 0.05, 0.025, 0.0]);
    let mut cfg = delta_cfg(vec![0.1, 0.05, 0.025, 0.0125]);
    cfg.kind = Kind::Unitary;
    assert!(sweep_delta_theta(&cfg).is_err());
}

fn shots_cfg(levels: Vec<u64>, repetitions: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(Kind::Kraus, 2, vec![3]);
    cfg.mode = ModeConfig::Sampled { shots: 1_000 };
    cfg.sweep = Some(Sweep::Shots { levels, repetitions });
    cfg
}

#[test]
fn shot_sweep_scaling() {
    let report = run_experiment(&shots_cfg(vec![2_000, 8_000, 32_000], 50)).unwrap();
    let Some(SweepSummary::Shots { levels, slope, repetitions }) = &report.sweep else {
        panic!("missing summary")
    };
    assert_eq!(*repetitions, 50);
    assert!((slope + 0.5).abs() <= 0.15, "{slope}");
    for w in levels.windows(2) {
        let ratio = w[0].rmse / w[1].rmse;
        assert!(ratio > 2.0 / 1.5 && ratio < 2.0 * 1.5, "{ratio}");
    }
    assert_eq!(report.runs.len(), 3);
    assert!(report.runs.iter().all(|r| r.metrics().unwrap().rmse.is_some()));
}

#[test]
fn shot_sweep_preconditions() {
    assert!(run_experiment(&shots_cfg(vec![1_000, 4_000, 16_000], 49)).is_err());
    assert!(run_experiment(&shots_cfg(vec![1_000, 4_000], 50)).is_err());
    assert!(run_experiment(&shots_cfg(vec![1_000, 4_000, 8_000], 50)).is_err());
    assert!(run_experiment(&shots_cfg(vec![50, 200, 800], 50)).is_err());
    let mut exact = shots_cfg(vec![1_000, 4_000, 16_000], 50);
    exact.mode = ModeConfig::Exact;
    assert!(run_experiment(&exact).is_err());
}

#[test]
fn csv_has_one_row_per_element() {
    let cfg = ExperimentConfig::new(Kind::Kraus, 2, vec![0, 1]);
    let report = run_experiment(&cfg).unwrap();
    let mut buf = Vec::new();
    write_csv(&report, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "seed,sweep,estimator,i,j,k,re_est,im_est,re_true,im_true,abs_err");
    assert_eq!(lines.len(), 1 + 2 * 8);
    assert!(lines[1].starts_with("0,,,0,0,0,"));
}

#[test]
fn fidelity_values() {
    let plus = crate::quantum::uniform_state(2);
    let p = CMatrix::outer(&plus, &plus);
    let zero = CMatrix::basis_projector(0, 2);
    let one = CMatrix::basis_projector(1, 2);
    assert!((fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-12);
    assert!(fidelity(&zero, &one).unwrap().abs() < 1e-12);
    assert!((fidelity(&zero, &p).unwrap() - 0.5).abs() < 1e-12);
    let mixed = CMatrix::identity(2).scale(C64::new(0.5, 0.0));
    assert!((fidelity(&mixed, &zero).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn ols_fits_a_line() {
    let x = [0.0, 1.0, 2.0, 3.0];
    let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
    assert!((ols_slope(&x, &y).unwrap() - 2.5).abs() < 1e-12);
    assert!(ols_slope(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    assert!(ols_slope(&[1.0], &[0.0]).is_none());
}

#[test]
fn ambiguity_demo() {
    let demo = povm_ambiguity().unwrap();
    assert!(demo.povm_error <= 1e-9);
    assert!(demo.kraus_distance > 0.5);
}
