//! Monte Carlo size/power study: simulate a design, fit a null model, run
//! the bootstrap tests and Ljung-Box tests, and tabulate rejection rates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::bootstrap::{
    self, converged_replicate, shrink, BootstrapConfig, ShrinkageRule, StatKind, WarpSample,
};
use crate::dgp::{simulate_dgp, DgpId, InnovationSource};
use crate::error::{Error, Result};
use crate::model::{GarchOrder, ParamVector};
use crate::qmle::{qmle_fit, FitConfig};
use crate::rng::{self, purpose};
use crate::stats::{ljung_box, FirstLag, TestKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    /// Full bootstrap with `B` replicates inside every replication.
    FullBootstrap(usize),
    /// One bootstrap replicate per replication, pooled across replications.
    WarpSpeed,
}

impl std::fmt::Display for McMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            McMode::FullBootstrap(b) => write!(f, "bootstrap:{b}"),
            McMode::WarpSpeed => f.write_str("warp"),
        }
    }
}

impl std::str::FromStr for McMode {
    type Err = Error;

    /// `warp` or `bootstrap:B`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "warp" || t == "warp-speed" {
            return Ok(McMode::WarpSpeed);
        }
        t.strip_prefix("bootstrap:")
            .or_else(|| t.strip_prefix("boot:"))
            .and_then(|b| b.parse().ok())
            .filter(|&b: &usize| b > 0)
            .map(McMode::FullBootstrap)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("mode must be `warp` or `bootstrap:B`, got {s:?}"))
            })
    }
}

/// Tests run by default: KS, CvM and LBQ at lags 3, 5, 10, 15, 20.
pub fn default_tests() -> BTreeSet<TestKind> {
    let mut t: BTreeSet<TestKind> = [TestKind::Ks, TestKind::Cvm].into();
    t.extend([3, 5, 10, 15, 20].map(TestKind::Lbq));
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub dgp: DgpId,
    pub null_model: GarchOrder,
    pub n: usize,
    pub reps: usize,
    /// Strictly increasing levels in (0, 1).
    pub levels: Vec<f64>,
    pub tests: BTreeSet<TestKind>,
    pub mode: McMode,
    pub seed: u64,
    pub shrinkage: ShrinkageRule,
    pub fit: FitConfig,
}

impl Experiment {
    pub fn new(dgp: DgpId, null_model: GarchOrder, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            dgp,
            null_model,
            n,
            reps,
            levels: vec![0.01, 0.05, 0.10],
            tests: default_tests(),
            mode: McMode::WarpSpeed,
            seed,
            shrinkage: ShrinkageRule::default(),
            fit: FitConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        if self.levels.is_empty() || self.levels.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidArgument("levels must lie in (0, 1)".into()));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "levels must be strictly increasing".into(),
            ));
        }
        if self.n >= 1 << 40 {
            return Err(Error::InvalidArgument("sample size too large".into()));
        }
        Ok(())
    }

    /// Stream coordinate identifying this design.
    pub fn stream_id(&self) -> u64 {
        (self.dgp.number() << 56)
            | ((self.null_model.p1() as u64) << 48)
            | ((self.null_model.p2() as u64) << 40)
            | self.n as u64
    }

    fn stat_kinds(&self) -> BTreeSet<StatKind> {
        self.tests
            .iter()
            .filter_map(|t| match t {
                TestKind::Ks => Some(StatKind::Ks),
                TestKind::Cvm => Some(StatKind::Cvm),
                TestKind::Lbq(_) => None,
            })
            .collect()
    }

    fn lbq_lags(&self) -> Vec<usize> {
        self.tests
            .iter()
            .filter_map(|t| {
                if let TestKind::Lbq(l) = t {
                    Some(*l)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Why the size theory does not cover this design, if it does not.
    pub fn annotation(&self) -> Option<String> {
        (self.dgp == DgpId::Dgp7 && self.null_model.p1() > 0).then(|| {
            "identifiability condition violated: the design has no ARCH or GARCH dynamics, so the null model's coefficients are not identified".to_string()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RejectionRow {
    pub test: TestKind,
    pub level: f64,
    pub count: usize,
    /// Replications that contributed (successful fits).
    pub reps: usize,
}

impl RejectionRow {
    pub fn rate(&self) -> f64 {
        self.count as f64 / self.reps as f64
    }

    /// Binomial Monte Carlo standard error.
    pub fn se(&self) -> f64 {
        let p = self.rate();
        (p * (1.0 - p) / self.reps as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionTable {
    pub experiment: Experiment,
    pub rows: Vec<RejectionRow>,
    /// Replications dropped because simulation, fitting or bootstrapping failed.
    pub failures: usize,
    /// Fits of the simulated data that stopped without meeting the
    /// convergence test (kept in the table).
    pub nonconverged: usize,
    /// Replications whose bootstrap-true parameter has a zero ARCH or GARCH
    /// coefficient, whether zeroed by the threshold or estimated at zero.
    pub shrunk: usize,
    pub notes: Vec<String>,
}

impl RejectionTable {
    pub fn row(&self, test: TestKind, level: f64) -> Option<&RejectionRow> {
        self.rows
            .iter()
            .find(|r| r.test == test && (r.level - level).abs() < 1e-12)
    }

    pub fn rate(&self, test: TestKind, level: f64) -> Option<f64> {
        self.row(test, level).map(RejectionRow::rate)
    }

    /// Metadata lines prefixed `#`, then `test,level,rate,se,count`.
    pub fn to_csv(&self) -> String {
        let e = &self.experiment;
        let mut s = String::new();
        let _ = writeln!(s, "# dgp = {} ({})", e.dgp, e.dgp.name());
        let _ = writeln!(s, "# null = {}", e.null_model.label());
        let _ = writeln!(s, "# n = {}", e.n);
        let _ = writeln!(s, "# reps = {}", e.reps);
        let _ = writeln!(s, "# mode = {}", e.mode);
        let _ = writeln!(s, "# seed = {}", e.seed);
        if e.shrinkage.enabled {
            let _ = writeln!(
                s,
                "# shrinkage = on (c_n = {} * n^-{})",
                e.shrinkage.scale, e.shrinkage.exponent
            );
        } else {
            let _ = writeln!(s, "# shrinkage = off");
        }
        let _ = writeln!(s, "# failures = {}", self.failures);
        let _ = writeln!(s, "# nonconverged = {}", self.nonconverged);
        let _ = writeln!(s, "# shrunk = {}", self.shrunk);
        for note in &self.notes {
            let _ = writeln!(s, "# note = {note}");
        }
        s.push_str("test,level,rate,se,count\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.test,
                r.level,
                r.rate(),
                r.se(),
                r.count
            );
        }
        s
    }
}

struct Replication {
    t_obs: BTreeMap<StatKind, f64>,
    t_star: Option<BTreeMap<StatKind, f64>>,
    boot_p: Option<BTreeMap<StatKind, f64>>,
    lbq_p: BTreeMap<usize, f64>,
    converged: bool,
    shrunk: bool,
}

fn on_boundary(phi: &ParamVector) -> bool {
    phi.alpha().iter().chain(phi.beta()).any(|&c| c == 0.0)
}

fn run_replication(
    e: &Experiment,
    r: u64,
    kinds: &BTreeSet<StatKind>,
    lags: &[usize],
) -> Result<Replication> {
    let sid = e.stream_id();
    let mut innov =
        InnovationSource::standard_normal(rng::stream(e.seed, sid, r, purpose::SIMULATE));
    let path = simulate_dgp(e.dgp, e.n, &mut innov)?;

    let (fit, t_obs, t_star, boot_p, shrunk) = match e.mode {
        McMode::WarpSpeed => {
            let fit = qmle_fit(&path.y, e.null_model, &e.fit)?;
            let t_obs = bootstrap::statistics(&path.y, &fit.h_path.h, FirstLag::DropFirst)?;
            let phi_star = shrink(&fit.phi_hat, e.n, &e.shrinkage)?;
            let shrunk = on_boundary(&phi_star);
            let t_star = if kinds.is_empty() {
                BTreeMap::new()
            } else {
                let (rep, _) =
                    converged_replicate(&phi_star, &fit.resid_std, &e.fit, 20, |attempt| {
                        rng::stream(e.seed, sid, r, (purpose::RESAMPLE << 32) | attempt)
                    })?;
                rep.stats
            };
            (fit, t_obs, Some(t_star), None, shrunk)
        }
        McMode::FullBootstrap(b) => {
            let cfg = BootstrapConfig {
                replicates: b,
                seed: rng::child_seed(e.seed, sid, r),
                shrinkage: e.shrinkage,
                refit: e.fit.clone(),
                kinds: if kinds.is_empty() {
                    StatKind::BOTH.into()
                } else {
                    kinds.clone()
                },
                ..BootstrapConfig::default()
            };
            let out = bootstrap::bootstrap_test(&path.y, e.null_model, &cfg)?;
            let t_obs = out.t_obs.clone();
            let shrunk = on_boundary(&out.phi_dagger);
            (out.fit, t_obs, None, Some(out.p_value), shrunk)
        }
    };

    let sq: Vec<f64> = fit.resid_std.iter().map(|v| v * v).collect();
    let lbq_p = lags
        .iter()
        .map(|&l| ljung_box(&sq, l).map(|t| (l, t.p_value.expect("Ljung-Box has a p-value"))))
        .collect::<Result<_>>()?;
    Ok(Replication {
        t_obs,
        t_star,
        boot_p,
        lbq_p,
        converged: fit.converged,
        shrunk,
    })
}

pub fn run_experiment(e: &Experiment) -> Result<RejectionTable> {
    e.validate()?;
    let kinds = e.stat_kinds();
    let lags = e.lbq_lags();
    let outcomes: Vec<Result<Replication>> = (0..e.reps as u64)
        .into_par_iter()
        .map(|r| run_replication(e, r, &kinds, &lags))
        .collect();

    let mut failures = 0;
    let reps: Vec<Replication> = outcomes
        .into_iter()
        .filter_map(|o| match o {
            Ok(rep) => Some(rep),
            Err(err) => {
                log::debug!("replication failed: {err}");
                failures += 1;
                None
            }
        })
        .collect();
    if reps.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "all {} replications failed",
            e.reps
        )));
    }
    let used = reps.len();

    let mut rows = Vec::new();
    for &test in &e.tests {
        for &level in &e.levels {
            let count = match test {
                TestKind::Lbq(l) => reps.iter().filter(|r| r.lbq_p[&l] < level).count(),
                TestKind::Ks | TestKind::Cvm => {
                    let kind = if test == TestKind::Ks {
                        StatKind::Ks
                    } else {
                        StatKind::Cvm
                    };
                    match e.mode {
                        McMode::FullBootstrap(_) => reps
                            .iter()
                            .filter(|r| r.boot_p.as_ref().expect("full mode")[&kind] < level)
                            .count(),
                        McMode::WarpSpeed => {
                            let samples: Vec<WarpSample> = reps
                                .iter()
                                .map(|r| WarpSample {
                                    t_obs: BTreeMap::from([(kind, r.t_obs[&kind])]),
                                    t_star: BTreeMap::from([(
                                        kind,
                                        r.t_star.as_ref().expect("warp mode")[&kind],
                                    )]),
                                })
                                .collect();
                            bootstrap::warp_speed_collect(&samples, &[level])?[0].rejections
                        }
                    }
                }
            };
            rows.push(RejectionRow {
                test,
                level,
                count,
                reps: used,
            });
        }
    }

    Ok(RejectionTable {
        experiment: e.clone(),
        rows,
        failures,
        nonconverged: reps.iter().filter(|r| !r.converged).count(),
        shrunk: reps.iter().filter(|r| r.shrunk).count(),
        notes: e.annotation().into_iter().collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityEntry {
    pub test: TestKind,
    /// `(n, rate, se)` along the grid.
    pub path: Vec<(usize, f64, f64)>,
    /// Every step satisfies `rate_next >= rate - 2 * sqrt(se^2 + se_next^2)`.
    pub nondecreasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub level: f64,
    pub entries: Vec<MonotonicityEntry>,
    pub tables: Vec<RejectionTable>,
}

impl MonotonicityReport {
    pub fn entry(&self, test: TestKind) -> Option<&MonotonicityEntry> {
        self.entries.iter().find(|e| e.test == test)
    }
}

/// Runs `template` at every `n` in `n_grid` and checks that rejection rates
/// at `level` do not decrease by more than two pooled standard errors.
pub fn power_monotonicity_check(
    template: &Experiment,
    n_grid: &[usize],
    level: f64,
) -> Result<MonotonicityReport> {
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("empty sample-size grid".into()));
    }
    let mut exp = template.clone();
    if !exp.levels.iter().any(|&a| (a - level).abs() < 1e-12) {
        exp.levels = vec![level];
    }
    let tables: Vec<RejectionTable> = n_grid
        .iter()
        .map(|&n| run_experiment(&Experiment { n, ..exp.clone() }))
        .collect::<Result<_>>()?;
    let entries = exp
        .tests
        .iter()
        .map(|&test| {
            let path: Vec<(usize, f64, f64)> = tables
                .iter()
                .map(|t| {
                    let row = t.row(test, level).expect("row present");
                    (t.experiment.n, row.rate(), row.se())
                })
                .collect();
            let nondecreasing = path
                .windows(2)
                .all(|w| w[1].1 >= w[0].1 - 2.0 * (w[0].2.powi(2) + w[1].2.powi(2)).sqrt());
            MonotonicityEntry {
                test,
                path,
                nondecreasing,
            }
        })
        .collect();
    Ok(MonotonicityReport {
        level,
        entries,
        tables,
    })
}
