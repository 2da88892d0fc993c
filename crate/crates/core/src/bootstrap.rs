//! Residual bootstrap for the KS and CvM statistics.
//!
//! The standard algorithm generates bootstrap samples from the fitted
//! parameter `phi_hat`; the shrinkage algorithm generates them from
//! `phi_dagger`, where every component of `phi_hat` not exceeding
//! `c_n = scale * n^(-exponent)` is set to zero. With `c_n -> 0` and
//! `sqrt(n) c_n -> inf`, coefficients whose true value is zero are zeroed
//! with probability tending to one, which keeps the bootstrap valid when the
//! true parameter sits on the boundary.
//!
//! Each replicate `b` draws from its own stream keyed by `(seed, b, attempt)`
//! and results are reduced in index order, so the outcome does not depend on
//! thread scheduling.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::dgp::{simulate_garch, InnovationSource};
use crate::error::{Error, Result};
use crate::model::{GarchOrder, InitPolicy, ParamVector};
use crate::qmle::{qmle_fit, FitConfig, FittedModel};
use crate::rng::{self, StreamRng};
use crate::stats::{cvm_statistic, ks_statistic, marked_process, FirstLag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatKind {
    Ks,
    Cvm,
}

impl StatKind {
    pub const BOTH: [StatKind; 2] = [StatKind::Ks, StatKind::Cvm];

    pub fn label(self) -> &'static str {
        match self {
            StatKind::Ks => "KS",
            StatKind::Cvm => "CvM",
        }
    }
}

/// `c_n = scale * n^(-exponent)`; the default is `n^(-1/3) / 50`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkageRule {
    pub enabled: bool,
    pub scale: f64,
    pub exponent: f64,
    /// Never zero omega, even if `omega_hat <= c_n`.
    pub protect_omega: bool,
}

impl Default for ShrinkageRule {
    fn default() -> Self {
        Self {
            enabled: true,
            scale: 1.0 / 50.0,
            exponent: 1.0 / 3.0,
            protect_omega: false,
        }
    }
}

impl ShrinkageRule {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn threshold(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(-self.exponent)
    }

    /// The threshold vanishes and does so more slowly than `n^(-1/2)`.
    pub fn rate_conditions_hold(&self) -> bool {
        self.scale > 0.0 && self.exponent > 0.0 && self.exponent < 0.5
    }
}

/// Zeroes each component of `phi_hat` that does not exceed `c_n`.
/// Returns the rule-disabled identity untouched.
pub fn shrink(phi_hat: &ParamVector, n: usize, rule: &ShrinkageRule) -> Result<ParamVector> {
    if !rule.enabled {
        return Ok(phi_hat.clone());
    }
    let c_n = rule.threshold(n);
    let keep = |v: f64| if v > c_n { v } else { 0.0 };
    let omega = if rule.protect_omega {
        phi_hat.omega()
    } else {
        keep(phi_hat.omega())
    };
    if omega == 0.0 {
        return Err(Error::OmegaShrunk {
            omega_hat: phi_hat.omega(),
            c_n,
        });
    }
    ParamVector::new(
        omega,
        phi_hat.alpha().iter().map(|&a| keep(a)).collect(),
        phi_hat.beta().iter().map(|&b| keep(b)).collect(),
    )
}

/// Number of components `shrink` set to zero.
pub fn count_shrunk(phi_hat: &ParamVector, phi_dagger: &ParamVector) -> usize {
    phi_hat
        .to_vec()
        .iter()
        .zip(phi_dagger.to_vec())
        .filter(|(a, b)| **a > 0.0 && *b == 0.0)
        .count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValueRule {
    /// `#{T* >= T} / B`.
    #[default]
    Fraction,
    /// `(1 + #{T* >= T}) / (1 + B)`.
    PlusOne,
}

/// Fraction of bootstrap statistics at least as large as `t_obs`.
pub fn pvalue(t_obs: f64, t_star: &[f64]) -> f64 {
    pvalue_with(PValueRule::Fraction, t_obs, t_star)
}

pub fn pvalue_with(rule: PValueRule, t_obs: f64, t_star: &[f64]) -> f64 {
    let exceed = t_star.iter().filter(|&&t| t >= t_obs).count() as f64;
    let b = t_star.len() as f64;
    match rule {
        PValueRule::Fraction => exceed / b,
        PValueRule::PlusOne => (1.0 + exceed) / (1.0 + b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Standard,
    Shrinkage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates `B`.
    pub replicates: usize,
    pub seed: u64,
    pub shrinkage: ShrinkageRule,
    /// Used for the fit on the data and for every replicate refit (which
    /// always uses the zero presample).
    pub refit: FitConfig,
    pub kinds: BTreeSet<StatKind>,
    pub pvalue_rule: PValueRule,
    /// First-lag convention for the observed data (bootstrap samples always
    /// use their zero presample).
    pub data_first_lag: FirstLag,
    /// Redraws allowed for a single replicate whose refit did not converge.
    pub max_redraws_per_replicate: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 499,
            seed: 0,
            shrinkage: ShrinkageRule::default(),
            refit: FitConfig::default(),
            kinds: StatKind::BOTH.into_iter().collect(),
            pvalue_rule: PValueRule::Fraction,
            data_first_lag: FirstLag::DropFirst,
            max_redraws_per_replicate: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapOutcome {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub t_obs: BTreeMap<StatKind, f64>,
    pub t_star: BTreeMap<StatKind, Vec<f64>>,
    pub p_value: BTreeMap<StatKind, f64>,
    pub phi_hat: ParamVector,
    pub phi_dagger: ParamVector,
    pub n_shrunk: usize,
    /// Replicates redrawn because their refit did not converge.
    pub redraws: usize,
    pub fit: FittedModel,
}

impl BootstrapOutcome {
    /// Decision rule: reject when the bootstrap p-value is below `level`.
    pub fn reject(&self, kind: StatKind, level: f64) -> Option<bool> {
        self.p_value.get(&kind).map(|&p| p < level)
    }
}

/// KS and CvM of `U_n` built from `y` and `h`.
pub fn statistics(y: &[f64], h: &[f64], first_lag: FirstLag) -> Result<BTreeMap<StatKind, f64>> {
    let mp = marked_process(y, h, first_lag)?;
    Ok(BTreeMap::from([
        (StatKind::Ks, ks_statistic(&mp).value),
        (StatKind::Cvm, cvm_statistic(&mp).value),
    ]))
}

/// One bootstrap draw: resample innovations, generate `Y*` from `phi_star`
/// with a zero presample, refit, and evaluate the statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicate {
    pub y: Vec<f64>,
    pub h_star: Vec<f64>,
    pub fit: FittedModel,
    pub stats: BTreeMap<StatKind, f64>,
}

pub fn draw_replicate(
    phi_star: &ParamVector,
    resid_std: &[f64],
    refit: &FitConfig,
    rng: StreamRng,
) -> Result<Replicate> {
    let n = resid_std.len();
    let mut innov = InnovationSource::empirical(resid_std.to_vec(), rng)?;
    let sim = simulate_garch(phi_star, n, &mut innov, &InitPolicy::ZeroTail)?;
    let cfg = FitConfig {
        warm_starts: vec![phi_star.clone()],
        starts: refit.starts.min(1),
        init_policy: InitPolicy::ZeroTail,
        ..refit.clone()
    };
    let fit = qmle_fit(&sim.y, phi_star.order(), &cfg)?;
    let stats = statistics(&sim.y, &fit.h_path.h, FirstLag::PresampleZero)?;
    Ok(Replicate {
        y: sim.y,
        h_star: sim.h_true,
        fit,
        stats,
    })
}

/// Redraws until the refit converges; returns the replicate and the number
/// of redraws spent.
pub(crate) fn converged_replicate(
    phi_star: &ParamVector,
    resid_std: &[f64],
    refit: &FitConfig,
    max_redraws: usize,
    stream_of: impl Fn(u64) -> StreamRng,
) -> Result<(Replicate, usize)> {
    let mut last_err = None;
    for attempt in 0..=max_redraws {
        match draw_replicate(phi_star, resid_std, refit, stream_of(attempt as u64)) {
            Ok(rep) if rep.fit.converged => return Ok((rep, attempt)),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::Bootstrap(format!(
        "no converged refit after {} attempts{}",
        max_redraws + 1,
        last_err
            .map(|e| format!(" (last error: {e})"))
            .unwrap_or_default()
    )))
}

pub fn bootstrap_test(
    y: &[f64],
    order: GarchOrder,
    cfg: &BootstrapConfig,
) -> Result<BootstrapOutcome> {
    if cfg.replicates == 0 {
        return Err(Error::InvalidArgument(
            "at least one bootstrap replicate is required".into(),
        ));
    }
    let fit = qmle_fit(y, order, &cfg.refit)?;
    let all_obs = statistics(y, &fit.h_path.h, cfg.data_first_lag)?;
    let phi_hat = fit.phi_hat.clone();
    let phi_dagger = shrink(&phi_hat, y.len(), &cfg.shrinkage)?;
    let n_shrunk = count_shrunk(&phi_hat, &phi_dagger);

    let results: Vec<Result<(Replicate, usize)>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|b| {
            converged_replicate(
                &phi_dagger,
                &fit.resid_std,
                &cfg.refit,
                cfg.max_redraws_per_replicate,
                |attempt| rng::stream(cfg.seed, b, attempt, rng::purpose::RESAMPLE),
            )
        })
        .collect();

    let mut t_star: BTreeMap<StatKind, Vec<f64>> = cfg
        .kinds
        .iter()
        .map(|&k| (k, Vec::with_capacity(cfg.replicates)))
        .collect();
    let mut redraws = 0;
    for res in results {
        let (rep, spent) = res?;
        redraws += spent;
        for (kind, values) in t_star.iter_mut() {
            values.push(rep.stats[kind]);
        }
    }
    if redraws > cfg.replicates {
        return Err(Error::Bootstrap(format!(
            "{redraws} redraws exceed the budget of {} for B = {}",
            cfg.replicates, cfg.replicates
        )));
    }

    let t_obs: BTreeMap<StatKind, f64> = cfg.kinds.iter().map(|&k| (k, all_obs[&k])).collect();
    let p_value = t_obs
        .iter()
        .map(|(&k, &t)| (k, pvalue_with(cfg.pvalue_rule, t, &t_star[&k])))
        .collect();
    Ok(BootstrapOutcome {
        algorithm: if cfg.shrinkage.enabled {
            Algorithm::Shrinkage
        } else {
            Algorithm::Standard
        },
        seed: cfg.seed,
        t_obs,
        t_star,
        p_value,
        phi_hat,
        phi_dagger,
        n_shrunk,
        redraws,
        fit,
    })
}

/// One Monte Carlo replication of the warp-speed design: the statistic on
/// the simulated data and a single bootstrap statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpSample {
    pub t_obs: BTreeMap<StatKind, f64>,
    pub t_star: BTreeMap<StatKind, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpRate {
    pub kind: StatKind,
    pub level: f64,
    pub rejections: usize,
    pub replications: usize,
}

impl WarpRate {
    pub fn rate(&self) -> f64 {
        self.rejections as f64 / self.replications as f64
    }
}

/// Pools the single bootstrap statistics of all replications into one
/// reference distribution and rejects replication `r` at level `a` when the
/// fraction of pooled statistics `>= t_obs_r` is below `a`.
pub fn warp_speed_collect(samples: &[WarpSample], levels: &[f64]) -> Result<Vec<WarpRate>> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "warp-speed pooling needs at least one replication".into(),
        ));
    }
    let kinds: BTreeSet<StatKind> = samples[0].t_obs.keys().copied().collect();
    let mut out = Vec::new();
    for kind in kinds {
        let mut pooled: Vec<f64> = samples
            .iter()
            .map(|s| {
                s.t_star.get(&kind).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!("missing {} bootstrap statistic", kind.label()))
                })
            })
            .collect::<Result<_>>()?;
        pooled.sort_by(f64::total_cmp);
        let r = pooled.len();
        let pvals: Vec<f64> = samples
            .iter()
            .map(|s| {
                let t = s.t_obs[&kind];
                let below = pooled.partition_point(|&p| p < t);
                (r - below) as f64 / r as f64
            })
            .collect();
        for &level in levels {
            let rejections = pvals.iter().filter(|&&p| p < level).count();
            out.push(WarpRate {
                kind,
                level,
                rejections,
                replications: samples.len(),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn phi(omega: f64, alpha: &[f64], beta: &[f64]) -> ParamVector {
        ParamVector::new(omega, alpha.to_vec(), beta.to_vec()).unwrap()
    }

    #[test]
    fn default_threshold_at_2000() {
        let c = ShrinkageRule::default().threshold(2000);
        assert_relative_eq!(c, 2000f64.powf(-1.0 / 3.0) / 50.0, epsilon = 1e-18);
        assert!((c - 0.001587).abs() < 1e-6);
        assert!(ShrinkageRule::default().rate_conditions_hold());
    }

    #[test]
    fn shrink_examples() {
        let rule = ShrinkageRule::default();
        let interior = phi(0.1, &[0.2], &[0.7]);
        assert_eq!(shrink(&interior, 2000, &rule).unwrap(), interior);

        let boundary = phi(0.2, &[0.69], &[0.0009]);
        let s = shrink(&boundary, 2000, &rule).unwrap();
        assert_eq!(s, phi(0.2, &[0.69], &[0.0]));
        assert_eq!(count_shrunk(&boundary, &s), 1);

        assert_eq!(
            shrink(&boundary, 2000, &ShrinkageRule::disabled()).unwrap(),
            boundary
        );
    }

    #[test]
    fn shrinking_omega_is_an_error_unless_protected() {
        let tiny = phi(1e-4, &[0.1], &[0.5]);
        assert!(matches!(
            shrink(&tiny, 2000, &ShrinkageRule::default()),
            Err(Error::OmegaShrunk { .. })
        ));
        let rule = ShrinkageRule {
            protect_omega: true,
            ..ShrinkageRule::default()
        };
        assert_eq!(shrink(&tiny, 2000, &rule).unwrap().omega(), 1e-4);
    }

    #[test]
    fn pvalue_examples() {
        let ts = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pvalue(10.0, &ts), 0.0);
        assert_eq!(pvalue(1.0, &ts), 1.0);
        assert_eq!(pvalue(2.5, &ts), 0.5);
        assert_eq!(pvalue_with(PValueRule::PlusOne, 10.0, &ts), 0.2);
    }

    #[test]
    fn warp_speed_infinite_statistics_always_reject() {
        let samples: Vec<WarpSample> = (0..20)
            .map(|i| WarpSample {
                t_obs: BTreeMap::from([(StatKind::Ks, f64::INFINITY)]),
                t_star: BTreeMap::from([(StatKind::Ks, i as f64)]),
            })
            .collect();
        let rates = warp_speed_collect(&samples, &[0.05]).unwrap();
        assert_eq!(rates[0].rate(), 1.0);
        assert!(warp_speed_collect(&[], &[0.05]).is_err());
    }

    #[test]
    fn warp_speed_exchangeable_statistics_hold_level() {
        // t_obs and t_star drawn from the same law: rejection rate near level.
        use rand::Rng;
        let mut rng = rng::stream(1, 2, 3, 4);
        let samples: Vec<WarpSample> = (0..4000)
            .map(|_| WarpSample {
                t_obs: BTreeMap::from([(StatKind::Cvm, rng.random::<f64>())]),
                t_star: BTreeMap::from([(StatKind::Cvm, rng.random::<f64>())]),
            })
            .collect();
        let rate = warp_speed_collect(&samples, &[0.1]).unwrap()[0].rate();
        assert!((rate - 0.1).abs() < 0.02, "{rate}");
    }
}
