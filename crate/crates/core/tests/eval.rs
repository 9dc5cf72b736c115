use sbm_mpc::eval::{
    emit_plotdata, plot_data, read_report_csv, report_csv, run_experiment, Algorithm, ExperimentConfig, ReportRow,
    SChoice, PLOT_FILES,
};
use sbm_mpc::sbm::SbmParams;
use sbm_mpc::seq::DeltaRule;

fn config(algorithm: Algorithm, params: SbmParams) -> ExperimentConfig {
    let mut c = ExperimentConfig::single(algorithm, params);
    c.delta_rule = DeltaRule::Gap;
    c
}

#[test]
fn rounds_do_not_grow_with_s() {
    let mut c = config(Algorithm::MpcCommNbr, SbmParams::new(60, 2, 0.6, 0.05, 2));
    c.s = vec![SChoice::Words(16), SChoice::Words(64), SChoice::Words(256)];
    let mut csv = Vec::new();
    let report = run_experiment(&c, 0, &mut csv).unwrap();
    let rounds: Vec<usize> = report.cells.iter().map(|c| c.rounds.unwrap()).collect();
    assert_eq!(rounds.len(), 3);
    assert!(rounds.windows(2).all(|w| w[0] >= w[1]), "{rounds:?}");
    assert!(rounds[0] > rounds[2], "{rounds:?}");
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let mut c = config(Algorithm::MpcPower, SbmParams::new(20, 2, 0.7, 0.05, 0));
    c.seeds = vec![0, 1, 2];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    let first = run_experiment(&c, 0, &mut a).unwrap();
    run_experiment(&c, 0, &mut b).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a.clone()).unwrap(), report_csv(&first).unwrap());

    let rows = read_report_csv(&a[..]).unwrap();
    let expected: Vec<ReportRow> = first.cells.iter().map(ReportRow::from).collect();
    assert_eq!(rows, expected);
    for row in &rows {
        if row.recovered {
            assert_eq!(row.misclassified, Some(0));
        }
    }
}

#[test]
fn cell_failures_become_rows() {
    let mut c = config(Algorithm::MpcCommNbr, SbmParams::new(12, 3, 0.3, 0.25, 0));
    c.seeds = (0..4).collect();
    let mut csv = Vec::new();
    let report = run_experiment(&c, 0, &mut csv).unwrap();
    assert_eq!(report.cells.len(), 4);
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
    assert!(report.cells.iter().all(|c| !c.recovered));
}

#[test]
fn plot_files_for_empty_and_single_series() {
    let dir = tempfile::tempdir().unwrap();
    emit_plotdata(&[], dir.path()).unwrap();
    for name in PLOT_FILES {
        assert_eq!(std::fs::read_to_string(dir.path().join(name)).unwrap(), "x,y,series\n");
    }

    let mut c = config(Algorithm::MpcPower, SbmParams::new(20, 2, 0.7, 0.05, 0));
    c.seeds = vec![0, 1];
    let report = run_experiment(&c, 0, std::io::sink()).unwrap();
    let rows: Vec<ReportRow> = report.cells.iter().map(ReportRow::from).collect();
    let data = plot_data(&rows);
    assert_eq!(data.recovery.len(), 1, "one series, one gap value");
    assert_eq!(data.space.len(), 1);
    let series: std::collections::BTreeSet<_> = data.rounds.iter().map(|p| &p.series).collect();
    assert_eq!(series.len(), 1);

    // Only finished cells contribute round points.
    let finished = rows.iter().filter(|r| r.fail_stage.is_none()).count();
    assert_eq!(data.rounds.len(), finished);
    let mut failed = rows.clone();
    failed[0].fail_stage = Some("representative_k".into());
    assert_eq!(plot_data(&failed).rounds.len(), finished - 1);
}
