//! Data-generating processes: the nine study designs and a generic GARCH
//! generator driven by an arbitrary innovation source.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_finite, Error, Result};
use crate::model::{InitPolicy, ParamVector, Presample};
use crate::rng::{self, StreamRng};

/// Observations discarded before a study DGP path is returned.
pub const DEFAULT_BURN_IN: usize = 500;

const STANDARDIZED_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum InnovationKind {
    StandardNormal,
    /// Resampling with replacement, uniform over the stored values.
    EmpiricalDraw(Vec<f64>),
}

pub struct InnovationSource {
    kind: InnovationKind,
    rng: StreamRng,
}

impl InnovationSource {
    pub fn standard_normal(rng: StreamRng) -> Self {
        Self {
            kind: InnovationKind::StandardNormal,
            rng,
        }
    }

    /// Standard normal stream keyed by `seed` alone.
    pub fn normal_from_seed(seed: u64) -> Self {
        Self::standard_normal(rng::stream(seed, 0, 0, rng::purpose::SIMULATE))
    }

    /// Resampling source over `samples`, which must already have mean 0 and
    /// (divisor-n) variance 1.
    pub fn empirical(samples: Vec<f64>, rng: StreamRng) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "empirical innovations need at least one sample".into(),
            ));
        }
        check_finite(&samples)?;
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
        if mean.abs() > STANDARDIZED_TOL || (var - 1.0).abs() > STANDARDIZED_TOL {
            return Err(Error::InvalidArgument(format!(
                "empirical innovations must be standardized (mean {mean:e}, variance {var})"
            )));
        }
        Ok(Self {
            kind: InnovationKind::EmpiricalDraw(samples),
            rng,
        })
    }

    pub fn kind(&self) -> &InnovationKind {
        &self.kind
    }

    pub fn draw(&mut self) -> f64 {
        match &self.kind {
            InnovationKind::StandardNormal => self.rng.sample(StandardNormal),
            InnovationKind::EmpiricalDraw(s) => s[self.rng.random_range(0..s.len())],
        }
    }

    /// `E|e|` under this source's law.
    pub fn mean_abs(&self) -> f64 {
        match &self.kind {
            InnovationKind::StandardNormal => (2.0 / std::f64::consts::PI).sqrt(),
            InnovationKind::EmpiricalDraw(s) => {
                s.iter().map(|e| e.abs()).sum::<f64>() / s.len() as f64
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DgpId {
    /// ARCH(1): `h = 0.20 + 0.7 y^2`
    Dgp1,
    /// GARCH(1,1): `h = 0.10 + 0.20 y^2 + 0.70 h`
    Dgp2,
    /// GARCH(1,2): `h = 0.10 + 0.10 y^2 + 0.15 h_1 + 0.70 h_2`
    Dgp3,
    /// GJR-GARCH(1,1): `h = 0.10 + 0.1 y^2 + 0.5 h + 0.3 y^2 1(y < 0)`
    Dgp4,
    /// GARCH(2,2): `h = 0.10 + 0.05 y_1^2 + 0.6 y_2^2 + 0.1 h_1 + 0.2 h_2`
    Dgp5,
    /// EGARCH(1,1): `ln h = 0.1 + 0.4 ln h + 0.2 (|e| - E|e|) - 0.2 e`
    Dgp6,
    /// i.i.d.: `h = 1`
    Dgp7,
    /// Threshold GARCH(1,1): `h = 0.10 + 0.1 y^2 + 0.5 h + 0.3 h 1(y < 0)`
    Dgp8,
    /// T-CHARM: `h = 1(y <= 0) + 1.2 1(y > 0)`
    Dgp9,
}

impl DgpId {
    pub const ALL: [DgpId; 9] = [
        DgpId::Dgp1,
        DgpId::Dgp2,
        DgpId::Dgp3,
        DgpId::Dgp4,
        DgpId::Dgp5,
        DgpId::Dgp6,
        DgpId::Dgp7,
        DgpId::Dgp8,
        DgpId::Dgp9,
    ];

    /// 1-based number.
    pub fn number(self) -> u64 {
        self as u64 + 1
    }

    pub fn from_number(k: u64) -> Result<Self> {
        (1..=9)
            .contains(&k)
            .then(|| Self::ALL[(k - 1) as usize])
            .ok_or_else(|| Error::UnknownDgp(k.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            DgpId::Dgp1 => "ARCH(1)",
            DgpId::Dgp2 => "GARCH(1,1)",
            DgpId::Dgp3 => "GARCH(1,2)",
            DgpId::Dgp4 => "GJR-GARCH(1,1)",
            DgpId::Dgp5 => "GARCH(2,2)",
            DgpId::Dgp6 => "EGARCH(1,1)",
            DgpId::Dgp7 => "i.i.d.",
            DgpId::Dgp8 => "TGARCH(1,1)",
            DgpId::Dgp9 => "T-CHARM",
        }
    }

    /// Parameters of the linear GARCH designs (DGP1, 2, 3, 5).
    pub fn garch_params(self) -> Option<ParamVector> {
        let p = |w: f64, a: &[f64], b: &[f64]| {
            ParamVector::new(w, a.to_vec(), b.to_vec()).expect("valid design")
        };
        match self {
            DgpId::Dgp1 => Some(p(0.20, &[0.7], &[])),
            DgpId::Dgp2 => Some(p(0.10, &[0.20], &[0.70])),
            DgpId::Dgp3 => Some(p(0.10, &[0.10], &[0.15, 0.70])),
            DgpId::Dgp5 => Some(p(0.10, &[0.05, 0.6], &[0.1, 0.2])),
            _ => None,
        }
    }
}

impl std::fmt::Display for DgpId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DGP{}", self.number())
    }
}

impl std::str::FromStr for DgpId {
    type Err = Error;

    /// Accepts `DGP4`, `dgp4` or `4`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t
            .strip_prefix("DGP")
            .or_else(|| t.strip_prefix("dgp"))
            .unwrap_or(t);
        digits
            .parse::<u64>()
            .ok()
            .and_then(|k| DgpId::from_number(k).ok())
            .ok_or_else(|| Error::UnknownDgp(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    pub y: Vec<f64>,
    pub h_true: Vec<f64>,
    /// Innovations that generated the retained observations.
    pub eps: Vec<f64>,
    pub burn_in: usize,
}

impl SimPath {
    fn drop_front(mut self, k: usize) -> Self {
        self.y.drain(..k);
        self.h_true.drain(..k);
        self.eps.drain(..k);
        self.burn_in = k;
        self
    }
}

/// Simulates `id` for `n` observations after a [`DEFAULT_BURN_IN`] burn-in.
pub fn simulate_dgp(id: DgpId, n: usize, innov: &mut InnovationSource) -> Result<SimPath> {
    simulate_dgp_with_burn_in(id, n, DEFAULT_BURN_IN, innov)
}

pub fn simulate_dgp_with_burn_in(
    id: DgpId,
    n: usize,
    burn_in: usize,
    innov: &mut InnovationSource,
) -> Result<SimPath> {
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let total = n + burn_in;
    if let Some(phi) = id.garch_params() {
        return Ok(simulate_garch(&phi, total, innov, &InitPolicy::ZeroTail)?.drop_front(burn_in));
    }

    let mut y = Vec::with_capacity(total);
    let mut h = Vec::with_capacity(total);
    let mut eps = Vec::with_capacity(total);
    // Presample: y_0 = 0, h_0 = 0 (ln h_0 = 0 and e_0 = 0 for the EGARCH design).
    let (mut y_prev, mut h_prev, mut e_prev) = (0.0f64, 0.0f64, 0.0f64);
    let mut log_h_prev = 0.0f64;
    let mean_abs = innov.mean_abs();
    for _ in 0..total {
        let e = innov.draw();
        let hi = match id {
            DgpId::Dgp4 => {
                let lev = if y_prev < 0.0 {
                    0.3 * y_prev * y_prev
                } else {
                    0.0
                };
                0.10 + 0.1 * y_prev * y_prev + 0.5 * h_prev + lev
            }
            DgpId::Dgp6 => {
                log_h_prev =
                    0.1 + 0.4 * log_h_prev + 0.2 * (e_prev.abs() - mean_abs) - 0.2 * e_prev;
                log_h_prev.exp()
            }
            DgpId::Dgp7 => 1.0,
            DgpId::Dgp8 => {
                let thr = if y_prev < 0.0 { 0.3 * h_prev } else { 0.0 };
                0.10 + 0.1 * y_prev * y_prev + 0.5 * h_prev + thr
            }
            DgpId::Dgp9 => {
                if y_prev <= 0.0 {
                    1.0
                } else {
                    1.2
                }
            }
            DgpId::Dgp1 | DgpId::Dgp2 | DgpId::Dgp3 | DgpId::Dgp5 => {
                unreachable!("linear designs handled above")
            }
        };
        let yi = hi.sqrt() * e;
        y.push(yi);
        h.push(hi);
        eps.push(e);
        y_prev = yi;
        h_prev = hi;
        e_prev = e;
    }
    Ok(SimPath {
        y,
        h_true: h,
        eps,
        burn_in: 0,
    }
    .drop_front(burn_in))
}

fn presample_for(phi: &ParamVector, init: &InitPolicy) -> Result<Presample> {
    let (p1, p2) = (phi.alpha().len(), phi.beta().len());
    match init {
        InitPolicy::ZeroTail => Ok(Presample {
            y: vec![0.0; p1],
            h: vec![0.0; p2],
        }),
        // No data exist yet, so the sample-variance policy falls back to the
        // model's own long-run variance.
        InitPolicy::SampleVariance | InitPolicy::Unconditional => {
            let u = phi.unconditional_variance().unwrap_or(phi.omega());
            Ok(Presample {
                y: vec![u.sqrt(); p1],
                h: vec![u; p2],
            })
        }
        InitPolicy::Explicit(pre) => {
            if pre.y.len() < p1
                || pre.h.len() < p2
                || pre.h.iter().any(|&v| v < 0.0 || !v.is_finite())
            {
                return Err(Error::InvalidArgument(
                    "explicit presample does not match the model order".into(),
                ));
            }
            check_finite(&pre.y)?;
            Ok(Presample {
                y: pre.y[..p1].to_vec(),
                h: pre.h[..p2].to_vec(),
            })
        }
    }
}

/// `y_i = sqrt(h_i(phi)) e_i` with the variance recursion started from
/// `init`. Nothing is discarded.
pub fn simulate_garch(
    phi: &ParamVector,
    n: usize,
    innov: &mut InnovationSource,
    init: &InitPolicy,
) -> Result<SimPath> {
    if phi.alpha_sum() + phi.beta_sum() >= 1.0 {
        log::warn!("simulating a GARCH process with sum(alpha) + sum(beta) >= 1: {phi}");
    }
    let (p1, p2) = (phi.alpha().len(), phi.beta().len());
    let pre = presample_for(phi, init)?;

    let mut y2 = Vec::with_capacity(p1 + n);
    y2.extend(pre.y.iter().rev().map(|v| v * v));
    let mut h = Vec::with_capacity(p2 + n);
    h.extend(pre.h.iter().rev());
    let mut y = Vec::with_capacity(n);
    let mut eps = Vec::with_capacity(n);
    let omega = phi.omega();
    for i in 0..n {
        // Same accumulation order as `model::recurse`.
        let mut hi = omega;
        for (j, a) in phi.alpha().iter().enumerate() {
            hi += a * y2[p1 + i - (j + 1)];
        }
        for (k, b) in phi.beta().iter().enumerate() {
            hi += b * h[p2 + i - (k + 1)];
        }
        let e = innov.draw();
        let yi = hi.sqrt() * e;
        y.push(yi);
        y2.push(yi * yi);
        h.push(hi);
        eps.push(e);
    }
    Ok(SimPath {
        y,
        h_true: h.split_off(p2),
        eps,
        burn_in: 0,
    })
}
