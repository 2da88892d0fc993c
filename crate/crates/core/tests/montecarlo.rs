use garch_omnibus::mc::{power_monotonicity_check, run_experiment, Experiment, McMode};
use garch_omnibus::stats::TestKind;
use garch_omnibus::{DgpId, GarchOrder};

fn small(dgp: DgpId, n: usize, reps: usize) -> Experiment {
    Experiment::new(dgp, GarchOrder::new(1, 1).unwrap(), n, reps, 99)
}

#[test]
fn experiments_are_reproducible() {
    let e = small(DgpId::Dgp4, 200, 40);
    let a = run_experiment(&e).unwrap().to_csv();
    let b = run_experiment(&e).unwrap().to_csv();
    assert_eq!(a, b);
    let mut other = e.clone();
    other.seed = 100;
    assert_ne!(a, run_experiment(&other).unwrap().to_csv());
}

#[test]
fn table_layout() {
    let e = small(DgpId::Dgp2, 150, 30);
    let t = run_experiment(&e).unwrap();
    assert_eq!(t.rows.len(), e.tests.len() * e.levels.len());
    for r in &t.rows {
        assert!((0.0..=1.0).contains(&r.rate()));
        assert_eq!(r.reps + t.failures, e.reps);
    }
    for test in &e.tests {
        let rates: Vec<f64> = e
            .levels
            .iter()
            .map(|&l| t.rate(*test, l).unwrap())
            .collect();
        assert!(
            rates.windows(2).all(|w| w[0] <= w[1]),
            "{test}: rates must grow with the level"
        );
    }
    let csv = t.to_csv();
    assert!(csv.contains("# dgp = DGP2"));
    assert!(csv.lines().any(|l| l == "test,level,rate,se,count"));
}

#[test]
fn full_bootstrap_mode_runs() {
    let mut e = small(DgpId::Dgp2, 150, 8);
    e.mode = McMode::FullBootstrap(19);
    let t = run_experiment(&e).unwrap();
    assert!(t.rate(TestKind::Ks, 0.05).is_some());
    assert_eq!(t.to_csv(), run_experiment(&e).unwrap().to_csv());
}

#[test]
fn dgp7_carries_identifiability_note() {
    let t = run_experiment(&small(DgpId::Dgp7, 150, 10)).unwrap();
    assert!(t.notes.iter().any(|n| n.contains("identifiability")));
}

#[test]
fn monotonicity_report_shape() {
    let rep = power_monotonicity_check(&small(DgpId::Dgp8, 0, 40), &[150, 300], 0.05).unwrap();
    assert_eq!(rep.tables.len(), 2);
    let ks = rep.entry(TestKind::Ks).unwrap();
    assert_eq!(
        ks.path.iter().map(|p| p.0).collect::<Vec<_>>(),
        vec![150, 300]
    );
}
