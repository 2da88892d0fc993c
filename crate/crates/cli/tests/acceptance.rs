//! Acceptance criteria, one PASS/FAIL line each. Run with
//! `cargo test -p garch-omnibus-cli --test acceptance`.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use garch_omnibus::mc::{power_monotonicity_check, run_experiment, Experiment, RejectionTable};
use garch_omnibus::model::{variance_gradient, variance_path, GarchOrder, InitPolicy, ParamVector};
use garch_omnibus::qmle::{
    qmle_fit, qmle_loss, qmle_loss_gradient, standardize_residuals, FitConfig,
};
use garch_omnibus::rng::{self, StreamRng};
use garch_omnibus::stats::{cvm_statistic, ks_statistic, marked_process_from_pairs, TestKind};
use garch_omnibus::{simulate_dgp, DgpId, InnovationSource};
use rand::Rng;
use rand_distr::StandardNormal;
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn o11() -> GarchOrder {
    GarchOrder::new(1, 1).unwrap()
}

fn brute_u(lags: &[f64], marks: &[f64], y: f64) -> f64 {
    lags.iter()
        .zip(marks)
        .filter(|(l, _)| **l <= y)
        .map(|(_, m)| m)
        .sum::<f64>()
        / (lags.len() as f64).sqrt()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut rng: StreamRng = rng::stream(1, 0, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let ties = rng.random_bool(0.5);
        let lags: Vec<f64> = (0..n)
            .map(|_| {
                if ties {
                    rng.random_range(-4..=4) as f64
                } else {
                    rng.random_range(-3.0..3.0)
                }
            })
            .collect();
        let marks: Vec<f64> = (0..n)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                e * e - 1.0
            })
            .collect();
        let mp = marked_process_from_pairs(&lags, &marks).unwrap();
        let (mut ks, mut cvm) = (0.0f64, 0.0);
        for &l in &lags {
            let u = brute_u(&lags, &marks, l);
            ks = ks.max(u.abs());
            cvm += u * u;
        }
        cvm /= n as f64;
        let err = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        worst = worst
            .max(err(ks_statistic(&mp).value, ks))
            .max(err(cvm_statistic(&mp).value, cvm));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && secs < 10.0,
        format!("1000 instances, max diff {worst:.2e} relative to max(1, |T|), {secs:.2} s"),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let mut rng: StreamRng = rng::stream(2, 0, 0, 0);
    let (mut worst_h, mut worst_l) = (0.0f64, 0.0f64);
    let inits = [
        InitPolicy::ZeroTail,
        InitPolicy::SampleVariance,
        InitPolicy::Unconditional,
    ];
    for k in 0..100 {
        let p1 = rng.random_range(1..=2);
        let p2 = rng.random_range(0..=2);
        let n = rng.random_range(50..=200);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let alpha: Vec<f64> = (0..p1).map(|_| rng.random_range(0.02..0.4)).collect();
        let beta: Vec<f64> = (0..p2).map(|_| rng.random_range(0.02..0.45)).collect();
        let phi = ParamVector::new(rng.random_range(0.05..2.0), alpha, beta).unwrap();
        let init = &inits[k % 3];
        let g = variance_gradient(&y, &phi, init).unwrap();
        let grad = qmle_loss_gradient(&y, &phi, init)
            .unwrap()
            .gradient
            .unwrap();
        let v = phi.to_vec();
        let mut fd_loss = Vec::new();
        for r in 0..v.len() {
            let e = 1e-5 * v[r].abs().max(1e-2);
            let at = |d: f64| {
                let mut w = v.clone();
                w[r] += d;
                ParamVector::from_slice(phi.order(), &w).unwrap()
            };
            let (pp, pm) = (at(e), at(-e));
            let hp = variance_path(&y, &pp, init).unwrap().h;
            let hm = variance_path(&y, &pm, init).unwrap().h;
            let fd: Vec<f64> = hp
                .iter()
                .zip(&hm)
                .map(|(a, b)| (a - b) / (2.0 * e))
                .collect();
            let col: Vec<f64> = (0..n).map(|i| g[(i, r)]).collect();
            worst_h = worst_h.max(rel_err(&col, &fd));
            fd_loss.push(
                (qmle_loss(&y, &pp, init).unwrap() - qmle_loss(&y, &pm, init).unwrap()) / (2.0 * e),
            );
        }
        worst_l = worst_l.max(rel_err(&grad, &fd_loss));
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst_h < 1e-5 && worst_l < 1e-5 && secs < 30.0,
        format!(
            "100 draws, max rel err h-dot {worst_h:.2e}, loss gradient {worst_l:.2e}, {secs:.2} s"
        ),
    )
}

fn consistency(init: InitPolicy) -> (usize, usize) {
    let truth = [0.10, 0.20, 0.70];
    let cfg = FitConfig {
        init_policy: init,
        ..FitConfig::default()
    };
    let mut within = 0;
    for r in 0..200 {
        let mut src =
            InnovationSource::standard_normal(rng::stream(3, 0, r, rng::purpose::SIMULATE));
        let y = simulate_dgp(DgpId::Dgp2, 5000, &mut src).unwrap().y;
        let f = qmle_fit(&y, o11(), &cfg).unwrap();
        if f.phi_hat
            .to_vec()
            .iter()
            .zip(truth)
            .all(|(a, b)| (a - b).abs() <= 0.05)
        {
            within += 1;
        }
    }
    (within, 200)
}

fn criterion_3() -> Outcome {
    let (w, n) = consistency(FitConfig::default().init_policy);
    let frac = w as f64 / n as f64;
    let (w0, _) = consistency(InitPolicy::ZeroTail);
    outcome(frac >= 0.95, format!("{w}/{n} = {frac:.3} within +-0.05 (default sample-variance presample); {w0}/{n} with a zero presample"))
}

fn null_tables() -> Vec<RejectionTable> {
    [DgpId::Dgp1, DgpId::Dgp2]
        .iter()
        .map(|&d| run_experiment(&Experiment::new(d, o11(), 500, 1000, 4)).unwrap())
        .collect()
}

fn criterion_4(tables: &[RejectionTable]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for t in tables {
        for test in [TestKind::Ks, TestKind::Cvm] {
            let r = t.rate(test, 0.05).unwrap();
            pass &= (0.03..=0.07).contains(&r);
            parts.push(format!("{} {} {r:.3}", t.experiment.dgp, test.label()));
        }
    }
    outcome(pass, parts.join(", "))
}

fn criterion_5(tables: &[RejectionTable]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for t in tables {
        for l in [5, 10, 15] {
            let r = t.rate(TestKind::Lbq(l), 0.05).unwrap();
            pass &= r < 0.05;
            parts.push(format!("{} LBQ({l}) {r:.3}", t.experiment.dgp));
        }
    }
    outcome(pass, parts.join(", "))
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for dgp in [DgpId::Dgp8, DgpId::Dgp9] {
        let template = Experiment::new(dgp, o11(), 1000, 1000, 6);
        let rep = power_monotonicity_check(&template, &[250, 500, 1000], 0.05).unwrap();
        let table = rep.tables.iter().find(|t| t.experiment.n == 1000).unwrap();
        let lbq_max = template
            .tests
            .iter()
            .filter(|t| matches!(t, TestKind::Lbq(_)))
            .map(|t| table.rate(*t, 0.05).unwrap())
            .fold(0.0, f64::max);
        for test in [TestKind::Ks, TestKind::Cvm] {
            let r = table.rate(test, 0.05).unwrap();
            let mono = rep.entry(test).unwrap().nondecreasing;
            pass &= r > 0.5 && r > lbq_max && mono;
            let path: Vec<String> = rep
                .entry(test)
                .unwrap()
                .path
                .iter()
                .map(|(_, r, _)| format!("{r:.3}"))
                .collect();
            parts.push(format!(
                "{dgp} {} {r:.3} (n path {}, nondecreasing {mono})",
                test.label(),
                path.join("/")
            ));
        }
        parts.push(format!("{dgp} max LBQ {lbq_max:.3}"));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let reps = 500;
    let run = |dgp| {
        let mut e = Experiment::new(dgp, o11(), 2000, reps, 7);
        e.tests = BTreeSet::from([TestKind::Lbq(5)]);
        run_experiment(&e).unwrap()
    };
    let boundary = run(DgpId::Dgp1);
    let interior = run(DgpId::Dgp2);
    let f1 = boundary.shrunk as f64 / reps as f64;
    let f2 = interior.shrunk as f64 / reps as f64;
    outcome(f1 > 0.9 && f2 < 0.01, format!("DGP1 fraction beta-dagger = 0: {f1:.3}; DGP2 fraction with a zeroed coefficient: {f2:.3}"))
}

fn cli(args: &[&str]) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_garch-omnibus"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o.stdout
}

fn criterion_8() -> Outcome {
    let dir = TempDir::new().unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    let data = p("data.csv");
    cli(&[
        "simulate", "--dgp", "4", "--n", "600", "--seed", "8", "--out", &data,
    ]);
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "simulate",
            vec![
                "simulate".into(),
                "--dgp".into(),
                "6".into(),
                "--n".into(),
                "300".into(),
                "--seed".into(),
                "8".into(),
            ],
        ),
        (
            "simulate-phi",
            vec![
                "simulate".into(),
                "--phi".into(),
                "0.1,0.1,0.2,0.5".into(),
                "--order".into(),
                "2,1".into(),
                "--n".into(),
                "300".into(),
                "--seed".into(),
                "8".into(),
            ],
        ),
        (
            "fit",
            vec![
                "fit".into(),
                data.clone(),
                "--column".into(),
                "y".into(),
                "--order".into(),
                "1,1".into(),
                "--order".into(),
                "2,2".into(),
            ],
        ),
        (
            "test",
            vec![
                "test".into(),
                data.clone(),
                "--column".into(),
                "y".into(),
                "--boot".into(),
                "99".into(),
                "--seed".into(),
                "8".into(),
            ],
        ),
        (
            "acf",
            vec!["acf".into(), data.clone(), "--column".into(), "y".into()],
        ),
        (
            "mc",
            vec![
                "mc".into(),
                "--dgp".into(),
                "8".into(),
                "--n".into(),
                "200".into(),
                "--reps".into(),
                "100".into(),
                "--seed".into(),
                "8".into(),
            ],
        ),
        (
            "mc-bootstrap",
            vec![
                "mc".into(),
                "--dgp".into(),
                "3".into(),
                "--order".into(),
                "1,2".into(),
                "--n".into(),
                "200".into(),
                "--reps".into(),
                "10".into(),
                "--mode".into(),
                "bootstrap:19".into(),
                "--seed".into(),
                "8".into(),
            ],
        ),
    ];
    let mut bad = Vec::new();
    for (name, args) in &runs {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = p(&format!("{name}-{k}.csv"));
            let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
            a.extend(["--out", &out]);
            cli(&a);
            outputs.push(std::fs::read(Path::new(&out)).unwrap());
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            bad.push(*name);
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "{} subcommand runs repeated, differing: {:?}",
            runs.len(),
            bad
        ),
    )
}

fn criterion_9() -> Outcome {
    let orders = [(1, 0), (1, 1), (1, 2), (2, 1), (2, 2)];
    let (mut fits, mut worst_m, mut worst_v, mut worst_i) = (0, 0.0f64, 0.0f64, 0.0f64);
    for dgp in DgpId::ALL {
        for (k, &(p1, p2)) in orders.iter().enumerate() {
            for seed in 0..4u64 {
                let mut src =
                    InnovationSource::standard_normal(rng::stream(9, dgp.number(), seed, k as u64));
                let y = simulate_dgp(dgp, 400, &mut src).unwrap().y;
                let f =
                    qmle_fit(&y, GarchOrder::new(p1, p2).unwrap(), &FitConfig::default()).unwrap();
                let e = &f.resid_std;
                let n = e.len() as f64;
                let m = e.iter().sum::<f64>() / n;
                let v = e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
                let again = standardize_residuals(e).unwrap();
                worst_m = worst_m.max(m.abs());
                worst_v = worst_v.max((v - 1.0).abs());
                worst_i = worst_i.max(
                    again
                        .iter()
                        .zip(e)
                        .fold(0.0f64, |w, (a, b)| w.max((a - b).abs())),
                );
                fits += 1;
            }
        }
    }
    outcome(worst_m <= 1e-10 && worst_v <= 1e-10 && worst_i <= 1e-12, format!("{fits} fits, max |mean| {worst_m:.1e}, max |var-1| {worst_v:.1e}, idempotence {worst_i:.1e}"))
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |k: usize, name: &'static str, o: Outcome| {
        println!(
            "{} criterion {k} ({name}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((k, name, o));
    };
    report(1, "KS/CvM brute-force equivalence", criterion_1());
    report(2, "gradient correctness", criterion_2());
    report(3, "QMLE consistency", criterion_3());
    let tables = null_tables();
    report(4, "warp-speed size", criterion_4(&tables));
    report(5, "LBQ undersizing", criterion_5(&tables));
    report(6, "power against nonlinearity", criterion_6());
    report(7, "shrinkage behaviour", criterion_7());
    report(8, "determinism", criterion_8());
    report(9, "standardization identities", criterion_9());
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "{} of {} criteria passed in {:.1} s; failed: {:?}",
        results.len() - failed.len(),
        results.len(),
        started.elapsed().as_secs_f64(),
        failed
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
