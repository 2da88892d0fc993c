//! Subcommand implementations. Each command returns a report value that can
//! be rendered as an aligned text table or as full-precision CSV.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use garch_omnibus::bootstrap::{BootstrapConfig, BootstrapOutcome, ShrinkageRule, StatKind};
use garch_omnibus::bootstrap_test;
use garch_omnibus::dgp::{
    simulate_dgp, simulate_garch, DgpId, InnovationSource, SimPath, DEFAULT_BURN_IN,
};
use garch_omnibus::mc::{default_tests, run_experiment, Experiment, McMode, RejectionTable};
use garch_omnibus::model::{stationarity_report, GarchOrder, InitPolicy, ParamVector};
use garch_omnibus::qmle::{qmle_fit, FitConfig, FittedModel};
use garch_omnibus::rng::{self, purpose};
use garch_omnibus::stats::{ljung_box, sample_acf, TestKind};

use crate::config::{Settings, Switch};
use crate::error::{CliError, Result};
use crate::io::{fmt_f64, load_series, Column, ReturnSeries, Transform};

pub const MIN_TEST_LEN: usize = 50;
pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_BOOT: usize = 499;
pub const DEFAULT_LBQ: [usize; 5] = [3, 5, 10, 15, 20];
pub const DEFAULT_MAX_LAG: usize = 30;

fn orders(s: &Settings, default: &[(usize, usize)]) -> Result<Vec<GarchOrder>> {
    let given: Option<Vec<String>> = s.list("order", &[';', ' ', '\t'])?;
    match given {
        Some(v) => v
            .iter()
            .map(|o| o.parse::<GarchOrder>().map_err(CliError::from))
            .collect(),
        None => default
            .iter()
            .map(|&(p, q)| GarchOrder::new(p, q).map_err(CliError::from))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputOptions {
    pub path: PathBuf,
    pub column: Column,
    pub transform: Transform,
}

impl InputOptions {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let path = s
            .get("input")
            .ok_or_else(|| CliError::Usage("no input file given".into()))?;
        Ok(InputOptions {
            path: PathBuf::from(path),
            column: s.parsed_or("column", Column::default())?,
            transform: s.parsed_or("transform", Transform::None)?,
        })
    }

    pub fn load(&self) -> Result<ReturnSeries> {
        load_series(&self.path, &self.column, self.transform)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub orders: Vec<GarchOrder>,
}

impl FitOptions {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        Ok(FitOptions {
            orders: orders(s, &[(1, 1)])?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub n: usize,
    pub fits: Vec<(GarchOrder, std::result::Result<FittedModel, String>)>,
}

pub fn cmd_fit(series: &ReturnSeries, opts: &FitOptions) -> Result<FitReport> {
    series.require_len(MIN_TEST_LEN)?;
    let fits = opts
        .orders
        .iter()
        .map(|&o| {
            (
                o,
                qmle_fit(&series.values, o, &FitConfig::default()).map_err(|e| e.to_string()),
            )
        })
        .collect();
    Ok(FitReport {
        n: series.len(),
        fits,
    })
}

fn param_names(order: GarchOrder) -> Vec<String> {
    let mut v = vec!["omega".to_string()];
    v.extend((1..=order.p1()).map(|j| format!("alpha{j}")));
    v.extend((1..=order.p2()).map(|k| format!("beta{k}")));
    v
}

impl FitReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("n = {}\n", self.n);
        for (order, fit) in &self.fits {
            let _ = writeln!(s, "\n{}", order.label());
            match fit {
                Err(e) => {
                    let _ = writeln!(s, "  fit failed: {e}");
                }
                Ok(f) => {
                    for (name, v) in param_names(*order).iter().zip(f.phi_hat.to_vec()) {
                        let _ = writeln!(s, "  {name:<8} {v:>12.6}");
                    }
                    let st = stationarity_report(&f.phi_hat, 0, 0);
                    let _ = writeln!(s, "  loss     {:>12.4}", f.loss);
                    let _ = writeln!(
                        s,
                        "  persistence {:.4}  converged {}  iterations {}",
                        st.coef_sum, f.converged, f.iterations
                    );
                    if f.weakly_identified() {
                        let _ = writeln!(s, "  note: all ARCH coefficients near zero, GARCH terms weakly identified");
                    }
                }
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,parameter,value\n");
        for (order, fit) in &self.fits {
            let Ok(f) = fit else { continue };
            let label = order.label();
            for (name, v) in param_names(*order).iter().zip(f.phi_hat.to_vec()) {
                let _ = writeln!(s, "\"{label}\",{name},{}", fmt_f64(v));
            }
            let _ = writeln!(s, "\"{label}\",loss,{}", fmt_f64(f.loss));
            let _ = writeln!(s, "\"{label}\",converged,{}", u8::from(f.converged));
            let _ = writeln!(s, "\"{label}\",iterations,{}", f.iterations);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestOptions {
    pub orders: Vec<GarchOrder>,
    pub boot: usize,
    pub seed: u64,
    pub shrink: bool,
    pub cn_scale: f64,
    pub lbq: Vec<usize>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            orders: vec![
                GarchOrder::new(1, 1).expect("valid"),
                GarchOrder::new(1, 2).expect("valid"),
            ],
            boot: DEFAULT_BOOT,
            seed: DEFAULT_SEED,
            shrink: true,
            cn_scale: ShrinkageRule::default().scale,
            lbq: DEFAULT_LBQ.to_vec(),
        }
    }
}

impl TestOptions {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let d = TestOptions::default();
        Ok(TestOptions {
            orders: orders(s, &[(1, 1), (1, 2)])?,
            boot: s.parsed_or("boot", d.boot)?,
            seed: s.parsed_or("seed", d.seed)?,
            shrink: s.parsed_or("shrink", Switch(true))?.0,
            cn_scale: s.parsed_or("cn-scale", d.cn_scale)?,
            lbq: s.list("lbq", &[','])?.unwrap_or(d.lbq),
        })
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig {
            replicates: self.boot,
            seed: self.seed,
            shrinkage: ShrinkageRule {
                enabled: self.shrink,
                scale: self.cn_scale,
                ..ShrinkageRule::default()
            },
            ..BootstrapConfig::default()
        }
    }

    pub fn columns(&self) -> Vec<TestKind> {
        let mut c = vec![TestKind::Ks, TestKind::Cvm];
        c.extend(self.lbq.iter().map(|&l| TestKind::Lbq(l)));
        c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub null_model: String,
    pub test: TestKind,
    pub p_value: f64,
}

#[derive(Debug)]
pub struct TestReport {
    pub n: usize,
    pub columns: Vec<TestKind>,
    pub rows: Vec<ReportRow>,
    pub outcomes: Vec<(GarchOrder, std::result::Result<BootstrapOutcome, CliError>)>,
}

pub fn cmd_test(series: &ReturnSeries, opts: &TestOptions) -> Result<TestReport> {
    series.require_len(MIN_TEST_LEN)?;
    if opts.lbq.iter().any(|&l| l == 0 || l >= series.len()) {
        return Err(CliError::Usage(format!(
            "LBQ lags must be in 1..{}",
            series.len()
        )));
    }
    let cfg = opts.bootstrap_config();
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for &order in &opts.orders {
        match test_one(series, order, &cfg, &opts.lbq) {
            Ok((r, out)) => {
                rows.extend(r);
                outcomes.push((order, Ok(out)));
            }
            Err(e) => outcomes.push((order, Err(e))),
        }
    }
    Ok(TestReport {
        n: series.len(),
        columns: opts.columns(),
        rows,
        outcomes,
    })
}

fn test_one(
    series: &ReturnSeries,
    order: GarchOrder,
    cfg: &BootstrapConfig,
    lbq: &[usize],
) -> Result<(Vec<ReportRow>, BootstrapOutcome)> {
    let out = bootstrap_test(&series.values, order, cfg)?;
    let label = order.label();
    let mut rows = vec![
        ReportRow {
            null_model: label.clone(),
            test: TestKind::Ks,
            p_value: out.p_value[&StatKind::Ks],
        },
        ReportRow {
            null_model: label.clone(),
            test: TestKind::Cvm,
            p_value: out.p_value[&StatKind::Cvm],
        },
    ];
    let sq: Vec<f64> = out.fit.resid_std.iter().map(|e| e * e).collect();
    for &l in lbq {
        let q = ljung_box(&sq, l)?;
        rows.push(ReportRow {
            null_model: label.clone(),
            test: TestKind::Lbq(l),
            p_value: q.p_value.expect("Ljung-Box p-value"),
        });
    }
    Ok((rows, out))
}

impl TestReport {
    pub fn p_value(&self, null_model: &str, test: TestKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.null_model == null_model && r.test == test)
            .map(|r| r.p_value)
    }

    pub fn first_error(&self) -> Option<&CliError> {
        self.outcomes.iter().find_map(|(_, o)| o.as_ref().err())
    }

    pub fn to_text(&self) -> String {
        let headers: Vec<String> = self.columns.iter().map(TestKind::label).collect();
        let widths: Vec<usize> = headers.iter().map(|h| h.len().max(7)).collect();
        let mut s = format!("{:<12}", "");
        for (h, w) in headers.iter().zip(&widths) {
            let _ = write!(s, " {h:>w$}");
        }
        s.push('\n');
        for (order, outcome) in &self.outcomes {
            let label = order.label();
            let _ = write!(s, "{label:<12}");
            match outcome {
                Ok(_) => {
                    for (test, w) in self.columns.iter().zip(&widths) {
                        let p = self.p_value(&label, *test).expect("row for every column");
                        let _ = write!(s, " {p:>w$.3}");
                    }
                }
                Err(e) => {
                    let _ = write!(s, " fit failed: {e}");
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("model");
        for c in &self.columns {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (order, outcome) in &self.outcomes {
            if outcome.is_err() {
                continue;
            }
            let label = order.label();
            let _ = write!(s, "\"{label}\"");
            for test in &self.columns {
                let _ = write!(
                    s,
                    ",{}",
                    fmt_f64(self.p_value(&label, *test).expect("row for every column"))
                );
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfOptions {
    pub order: GarchOrder,
    pub max_lag: usize,
}

impl AcfOptions {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let o = orders(s, &[(1, 1)])?;
        if o.len() != 1 {
            return Err(CliError::Usage("acf takes a single --order".into()));
        }
        Ok(AcfOptions {
            order: o[0],
            max_lag: s.parsed_or("max-lag", DEFAULT_MAX_LAG)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfReport {
    pub n: usize,
    pub order: GarchOrder,
    /// Half-width of the approximate 95% white-noise band, `1.96 / sqrt(n)`.
    pub band: f64,
    pub raw_sq: Vec<f64>,
    pub resid_sq: Vec<f64>,
}

pub fn acf_band(n: usize) -> f64 {
    1.96 / (n as f64).sqrt()
}

pub fn cmd_acf(series: &ReturnSeries, opts: &AcfOptions) -> Result<AcfReport> {
    series.require_len(MIN_TEST_LEN)?;
    let fit = qmle_fit(&series.values, opts.order, &FitConfig::default())?;
    let raw: Vec<f64> = series.values.iter().map(|y| y * y).collect();
    let res: Vec<f64> = fit.resid_std.iter().map(|e| e * e).collect();
    Ok(AcfReport {
        n: series.len(),
        order: opts.order,
        band: acf_band(series.len()),
        raw_sq: sample_acf(&raw, opts.max_lag)?,
        resid_sq: sample_acf(&res, opts.max_lag)?,
    })
}

impl AcfReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# n = {}\n# model = {}\n# band = {}\n",
            self.n,
            self.order.label(),
            fmt_f64(self.band)
        );
        s.push_str("lag,acf_raw_sq,acf_resid_sq\n");
        for (k, (a, b)) in self.raw_sq.iter().zip(&self.resid_sq).enumerate() {
            let _ = writeln!(s, "{},{},{}", k + 1, fmt_f64(*a), fmt_f64(*b));
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "squared-series autocorrelations, n = {}, band +-{:.5}, residuals from {}\n",
            self.n,
            self.band,
            self.order.label()
        );
        let _ = writeln!(s, "{:>4} {:>9} {:>9}", "lag", "y^2", "resid^2");
        for (k, (a, b)) in self.raw_sq.iter().zip(&self.resid_sq).enumerate() {
            let flag = |v: f64| if v.abs() > self.band { '*' } else { ' ' };
            let _ = writeln!(
                s,
                "{:>4} {:>8.3}{} {:>8.3}{}",
                k + 1,
                a,
                flag(*a),
                b,
                flag(*b)
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimSource {
    Dgp(DgpId),
    Params(ParamVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOptions {
    pub source: SimSource,
    pub n: usize,
    pub seed: u64,
}

impl SimulateOptions {
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let n = s
            .parsed::<usize>("n")?
            .ok_or_else(|| CliError::Usage("simulate needs --n".into()))?;
        let source = match (s.get("dgp"), s.get("phi")) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "give either --dgp or --phi, not both".into(),
                ))
            }
            (Some(d), None) => SimSource::Dgp(d.parse()?),
            (None, Some(_)) => {
                let o = orders(s, &[(1, 1)])?;
                if o.len() != 1 {
                    return Err(CliError::Usage("simulate takes a single --order".into()));
                }
                let phi: Vec<f64> = s.list("phi", &[','])?.unwrap_or_default();
                SimSource::Params(ParamVector::from_slice(o[0], &phi)?)
            }
            (None, None) => return Err(CliError::Usage("simulate needs --dgp or --phi".into())),
        };
        Ok(SimulateOptions {
            source,
            n,
            seed: s.parsed_or("seed", DEFAULT_SEED)?,
        })
    }
}

pub fn cmd_simulate(opts: &SimulateOptions) -> Result<SimPath> {
    if opts.n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    let mut innov =
        InnovationSource::standard_normal(rng::stream(opts.seed, 0, 0, purpose::SIMULATE));
    match &opts.source {
        SimSource::Dgp(id) => Ok(simulate_dgp(*id, opts.n, &mut innov)?),
        SimSource::Params(phi) => {
            let mut p = simulate_garch(
                phi,
                opts.n + DEFAULT_BURN_IN,
                &mut innov,
                &InitPolicy::ZeroTail,
            )?;
            p.y.drain(..DEFAULT_BURN_IN);
            p.h_true.drain(..DEFAULT_BURN_IN);
            p.eps.drain(..DEFAULT_BURN_IN);
            p.burn_in = DEFAULT_BURN_IN;
            Ok(p)
        }
    }
}

pub fn simulation_csv(path: &SimPath) -> String {
    let mut s = String::from("i,y,h_true\n");
    for (i, (y, h)) in path.y.iter().zip(&path.h_true).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, fmt_f64(*y), fmt_f64(*h));
    }
    s
}

pub fn experiment_from_settings(s: &Settings) -> Result<Experiment> {
    let dgp: DgpId = s
        .parsed("dgp")?
        .ok_or_else(|| CliError::Usage("mc needs --dgp".into()))?;
    let o = orders(s, &[(1, 1)])?;
    if o.len() != 1 {
        return Err(CliError::Usage("mc takes a single --order".into()));
    }
    let n = s
        .parsed::<usize>("n")?
        .ok_or_else(|| CliError::Usage("mc needs --n".into()))?;
    let reps = s.parsed_or("reps", 1000usize)?;
    let mut e = Experiment::new(dgp, o[0], n, reps, s.parsed_or("seed", DEFAULT_SEED)?);
    if let Some(levels) = s.list::<f64>("levels", &[','])? {
        e.levels = levels;
    }
    if let Some(lags) = s.list::<usize>("lbq", &[','])? {
        let mut tests: BTreeSet<TestKind> = BTreeSet::from([TestKind::Ks, TestKind::Cvm]);
        tests.extend(lags.into_iter().map(TestKind::Lbq));
        e.tests = tests;
    } else {
        e.tests = default_tests();
    }
    e.mode = match (s.parsed::<McMode>("mode")?, s.parsed::<usize>("boot")?) {
        (Some(McMode::FullBootstrap(_)), Some(b)) => McMode::FullBootstrap(b),
        (Some(m), _) => m,
        (None, _) => McMode::WarpSpeed,
    };
    e.shrinkage.enabled = s.parsed_or("shrink", Switch(true))?.0;
    e.shrinkage.scale = s.parsed_or("cn-scale", e.shrinkage.scale)?;
    e.validate()?;
    Ok(e)
}

pub fn cmd_mc(e: &Experiment) -> Result<RejectionTable> {
    Ok(run_experiment(e)?)
}

pub fn rejection_text(t: &RejectionTable) -> String {
    let e = &t.experiment;
    let mut s = format!(
        "{} [{}] vs {}, n = {}, reps = {}, {}\n",
        e.dgp,
        e.dgp.name(),
        e.null_model.label(),
        e.n,
        e.reps,
        e.mode
    );
    let _ = write!(s, "{:<9}", "test");
    for l in &e.levels {
        let _ = write!(s, " {l:>6}");
    }
    s.push('\n');
    for test in &e.tests {
        let _ = write!(s, "{:<9}", test.label());
        for &l in &e.levels {
            let _ = write!(s, " {:>6.3}", t.rate(*test, l).unwrap_or(f64::NAN));
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "failures {}  nonconverged {}  boundary {}",
        t.failures, t.nonconverged, t.shrunk
    );
    for n in &t.notes {
        let _ = writeln!(s, "note: {n}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn settings(text: &str) -> Settings {
        Settings::parse(text).unwrap()
    }

    #[test]
    fn band_for_2640() {
        assert_abs_diff_eq!(acf_band(2640), 0.03814, epsilon = 1e-5);
    }

    #[test]
    fn test_defaults() {
        let o = TestOptions::from_settings(&settings("")).unwrap();
        assert_eq!(o, TestOptions::default());
        assert_eq!(
            o.columns().iter().map(TestKind::label).collect::<Vec<_>>(),
            ["KS", "CvM", "LBQ(3)", "LBQ(5)", "LBQ(10)", "LBQ(15)", "LBQ(20)"]
        );
        assert_eq!(
            o.orders.iter().map(|o| o.label()).collect::<Vec<_>>(),
            ["GARCH(1,1)", "GARCH(1,2)"]
        );
    }

    #[test]
    fn simulate_dgp7_unit_variance() {
        let o = SimulateOptions::from_settings(&settings("dgp = 7\nn = 3\n")).unwrap();
        let p = cmd_simulate(&o).unwrap();
        assert_eq!(p.h_true, vec![1.0; 3]);
    }

    #[test]
    fn simulate_from_params() {
        let o =
            SimulateOptions::from_settings(&settings("phi = 0.1,0.2,0.7\nn = 10\norder = 1,1\n"))
                .unwrap();
        let p = cmd_simulate(&o).unwrap();
        assert_eq!(p.y.len(), 10);
        assert!(SimulateOptions::from_settings(&settings("phi = 0.1,0.2\nn = 10\n")).is_err());
        assert!(SimulateOptions::from_settings(&settings("n = 10\n")).is_err());
    }

    #[test]
    fn mc_mode_and_boot() {
        let e = experiment_from_settings(&settings(
            "dgp = 2\nn = 100\nreps = 10\nmode = bootstrap:9\nboot = 19\nlbq = 5\n",
        ))
        .unwrap();
        assert_eq!(e.mode, McMode::FullBootstrap(19));
        assert_eq!(e.tests.len(), 3);
        let e = experiment_from_settings(&settings("dgp = 1\nn = 100\n")).unwrap();
        assert_eq!(e.mode, McMode::WarpSpeed);
        assert!(experiment_from_settings(&settings("n = 100\n")).is_err());
    }
}
