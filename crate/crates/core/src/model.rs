//! GARCH(p1, p2) parameterization and the conditional-variance recursion
//!
//! ```text
//! h_i = omega + sum_j alpha_j * y_{i-j}^2 + sum_k beta_k * h_{i-k},   i = 1..n
//! ```
//!
//! with presample values `y_t, h_t` for `t <= 0` supplied by an [`InitPolicy`].
//!
//! The ARCH(infinity) coefficients `b_j(phi)` of a fitted model are assumed
//! strictly positive by the asymptotic theory behind the tests; this is not
//! checked at run time.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_finite, Error, Result};
use crate::rng;

/// Smallest conditional variance the recursion will emit.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GarchOrder {
    p1: usize,
    p2: usize,
}

impl GarchOrder {
    pub fn new(p1: usize, p2: usize) -> Result<Self> {
        if p2 >= 1 && p1 == 0 {
            return Err(Error::InvalidOrder {
                p1,
                p2,
                reason: "a GARCH term needs at least one ARCH term",
            });
        }
        Ok(Self { p1, p2 })
    }

    /// ARCH order (number of lagged squared observations).
    pub fn p1(&self) -> usize {
        self.p1
    }

    /// GARCH order (number of lagged variances).
    pub fn p2(&self) -> usize {
        self.p2
    }

    pub fn n_params(&self) -> usize {
        1 + self.p1 + self.p2
    }

    pub fn label(&self) -> String {
        format!("GARCH({},{})", self.p1, self.p2)
    }
}

impl std::fmt::Display for GarchOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.p1, self.p2)
    }
}

impl std::str::FromStr for GarchOrder {
    type Err = Error;

    /// Parses `"p1,p2"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("order must look like `p1,p2`, got {s:?}"));
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let p1 = a.trim().parse().map_err(|_| bad())?;
        let p2 = b.trim().parse().map_err(|_| bad())?;
        GarchOrder::new(p1, p2)
    }
}

/// `phi = (omega, alpha_1..alpha_p1, beta_1..beta_p2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    omega: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl ParamVector {
    pub fn new(omega: f64, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let all = std::iter::once(omega)
            .chain(alpha.iter().copied())
            .chain(beta.iter().copied());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite component".into()));
        }
        if omega <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "omega must be positive, got {omega}"
            )));
        }
        if alpha.iter().chain(&beta).any(|&c| c < 0.0) {
            return Err(Error::InvalidParams(
                "ARCH/GARCH coefficients must be nonnegative".into(),
            ));
        }
        let beta_sum: f64 = beta.iter().sum();
        if beta_sum >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "sum of GARCH coefficients must be < 1, got {beta_sum}"
            )));
        }
        GarchOrder::new(alpha.len(), beta.len())?;
        Ok(Self { omega, alpha, beta })
    }

    /// Builds from the flat layout `(omega, alpha.., beta..)`.
    pub fn from_slice(order: GarchOrder, phi: &[f64]) -> Result<Self> {
        if phi.len() != order.n_params() {
            return Err(Error::LengthMismatch {
                left: phi.len(),
                right: order.n_params(),
            });
        }
        let (alpha, beta) = phi[1..].split_at(order.p1());
        Self::new(phi[0], alpha.to_vec(), beta.to_vec())
    }

    pub fn order(&self) -> GarchOrder {
        GarchOrder {
            p1: self.alpha.len(),
            p2: self.beta.len(),
        }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn beta_sum(&self) -> f64 {
        self.beta.iter().sum()
    }

    /// Flat layout `(omega, alpha.., beta..)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.alpha.len() + self.beta.len());
        v.push(self.omega);
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        v
    }

    /// Ratio `omega / (1 - sum alpha - sum beta)` when the process is
    /// covariance stationary under unit-variance innovations.
    pub fn unconditional_variance(&self) -> Option<f64> {
        let persistence = self.alpha_sum() + self.beta_sum();
        (persistence < 1.0).then(|| self.omega / (1.0 - persistence))
    }
}

impl std::fmt::Display for ParamVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "omega={}", self.omega)?;
        for (j, a) in self.alpha.iter().enumerate() {
            write!(f, " alpha{}={}", j + 1, a)?;
        }
        for (k, b) in self.beta.iter().enumerate() {
            write!(f, " beta{}={}", k + 1, b)?;
        }
        Ok(())
    }
}

/// Compact feasible region for estimation:
/// `omega in [omega_lo, omega_hi]`, every coefficient in `[0, coef_hi]`,
/// and `sum beta <= beta_sum_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub omega_lo: f64,
    pub omega_hi: f64,
    pub coef_hi: f64,
    pub beta_sum_hi: f64,
}

impl ParamBox {
    pub fn new(omega_lo: f64, omega_hi: f64, coef_hi: f64, beta_sum_hi: f64) -> Result<Self> {
        if !(omega_lo > 0.0 && omega_lo < omega_hi && omega_hi.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "need 0 < omega_lo < omega_hi, got [{omega_lo}, {omega_hi}]"
            )));
        }
        if !(coef_hi > 0.0 && coef_hi.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "coef_hi must be positive, got {coef_hi}"
            )));
        }
        if !(beta_sum_hi > 0.0 && beta_sum_hi < 1.0) {
            return Err(Error::InvalidBox(format!(
                "beta_sum_hi must lie in (0,1), got {beta_sum_hi}"
            )));
        }
        Ok(Self {
            omega_lo,
            omega_hi,
            coef_hi,
            beta_sum_hi,
        })
    }

    /// Default box for data whose mean square is `scale`:
    /// `omega in [1e-6 * scale, 10 * scale]`, coefficients in `[0, 0.999]`,
    /// `sum beta <= 0.999`.
    pub fn default_for(scale: f64) -> Self {
        Self {
            omega_lo: 1e-6 * scale,
            omega_hi: 10.0 * scale,
            coef_hi: 0.999,
            beta_sum_hi: 0.999,
        }
    }

    pub fn contains(&self, phi: &ParamVector) -> bool {
        let coef_ok = phi
            .alpha()
            .iter()
            .chain(phi.beta())
            .all(|&c| (0.0..=self.coef_hi).contains(&c));
        (self.omega_lo..=self.omega_hi).contains(&phi.omega())
            && coef_ok
            && phi.beta_sum() <= self.beta_sum_hi + 1e-12
    }
}

/// Presample values, most recent first: `y = (y_0, y_{-1}, ..)`,
/// `h = (h_0, h_{-1}, ..)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Presample {
    pub y: Vec<f64>,
    pub h: Vec<f64>,
}

/// How the presample `(y_t, h_t), t <= 0` is filled in.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitPolicy {
    /// `y_t = 0`, `h_t = 0`.
    #[default]
    ZeroTail,
    /// `y_t^2 = h_t = ` sample variance of `y` (divisor n).
    SampleVariance,
    /// `y_t^2 = h_t = omega / (1 - sum alpha - sum beta)`; falls back to the
    /// sample variance when that ratio is not defined.
    Unconditional,
    /// Caller-supplied presample.
    Explicit(Presample),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariancePath {
    pub h: Vec<f64>,
    pub init: InitPolicy,
    /// Presample that was actually used.
    pub presample: Presample,
    /// Set when some `h_i` hit [`VARIANCE_FLOOR`].
    pub clamped: bool,
}

/// Resolved presample with derivatives of the presample values w.r.t. phi
/// (nonzero only for [`InitPolicy::Unconditional`]).
struct Resolved {
    y2: Vec<f64>,
    h: Vec<f64>,
    dy2: Vec<Vec<f64>>,
    dh: Vec<Vec<f64>>,
}

fn sample_variance(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn resolve(init: &InitPolicy, y: &[f64], phi: &[f64], p1: usize, p2: usize) -> Result<Resolved> {
    let d = 1 + p1 + p2;
    let constant = |v: f64| Resolved {
        y2: vec![v; p1],
        h: vec![v; p2],
        dy2: vec![vec![0.0; d]; p1],
        dh: vec![vec![0.0; d]; p2],
    };
    match init {
        InitPolicy::ZeroTail => Ok(constant(0.0)),
        InitPolicy::SampleVariance => Ok(constant(sample_variance(y))),
        InitPolicy::Unconditional => {
            let persistence: f64 = phi[1..].iter().sum();
            if persistence >= 1.0 {
                return Ok(constant(sample_variance(y)));
            }
            let denom = 1.0 - persistence;
            let u = phi[0] / denom;
            let mut grad = vec![u / denom; d];
            grad[0] = 1.0 / denom;
            Ok(Resolved {
                y2: vec![u; p1],
                h: vec![u; p2],
                dy2: vec![grad.clone(); p1],
                dh: vec![grad; p2],
            })
        }
        InitPolicy::Explicit(pre) => {
            if pre.y.len() < p1 || pre.h.len() < p2 {
                return Err(Error::InvalidArgument(format!(
                    "explicit presample needs {p1} y and {p2} h values, got {} and {}",
                    pre.y.len(),
                    pre.h.len()
                )));
            }
            check_finite(&pre.y)?;
            check_finite(&pre.h)?;
            if pre.h.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidArgument(
                    "presample variances must be nonnegative".into(),
                ));
            }
            Ok(Resolved {
                y2: pre.y[..p1].iter().map(|v| v * v).collect(),
                h: pre.h[..p2].to_vec(),
                dy2: vec![vec![0.0; d]; p1],
                dh: vec![vec![0.0; d]; p2],
            })
        }
    }
}

/// Output of the raw recursion on flat parameters.
pub(crate) struct Recursion {
    pub h: Vec<f64>,
    /// Row-major `n x d` derivative matrix when requested.
    pub grad: Option<Vec<f64>>,
    pub clamped: bool,
    pub presample: Presample,
}

/// Variance recursion on a flat parameter slice. `phi` must already satisfy
/// the positivity constraints; no validation happens here.
pub(crate) fn recurse(
    y: &[f64],
    phi: &[f64],
    p1: usize,
    p2: usize,
    init: &InitPolicy,
    want_grad: bool,
) -> Result<Recursion> {
    let n = y.len();
    let d = 1 + p1 + p2;
    let pre = resolve(init, y, phi, p1, p2)?;
    let omega = phi[0];
    let alpha = &phi[1..1 + p1];
    let beta = &phi[1 + p1..];

    // Extended sequences: presample oldest-first, then the data.
    let mut y2 = Vec::with_capacity(p1 + n);
    y2.extend(pre.y2.iter().rev());
    y2.extend(y.iter().map(|v| v * v));
    let mut h = Vec::with_capacity(p2 + n);
    h.extend(pre.h.iter().rev());

    let mut dh: Vec<f64> = Vec::new();
    let mut dy2_pre: Vec<f64> = Vec::new();
    if want_grad {
        dh.reserve((p2 + n) * d);
        for row in pre.dh.iter().rev() {
            dh.extend_from_slice(row);
        }
        for row in pre.dy2.iter().rev() {
            dy2_pre.extend_from_slice(row);
        }
    }

    let mut clamped = false;
    let mut row = vec![0.0; d];
    for i in 0..n {
        // y_{i-j} sits at y2[p1 + i - j], h_{i-k} at h[p2 + i - k].
        let mut hi = omega;
        for (j, a) in alpha.iter().enumerate() {
            hi += a * y2[p1 + i - (j + 1)];
        }
        for (k, b) in beta.iter().enumerate() {
            hi += b * h[p2 + i - (k + 1)];
        }
        let floored = hi < VARIANCE_FLOOR;
        if floored {
            clamped = true;
            hi = VARIANCE_FLOOR;
        }
        h.push(hi);

        if want_grad {
            row.iter_mut().for_each(|v| *v = 0.0);
            if !floored {
                row[0] = 1.0;
                for j in 0..p1 {
                    let idx = p1 + i - (j + 1);
                    row[1 + j] += y2[idx];
                    if idx < p1 {
                        let a = alpha[j];
                        for (r, g) in row.iter_mut().zip(&dy2_pre[idx * d..(idx + 1) * d]) {
                            *r += a * g;
                        }
                    }
                }
                for k in 0..p2 {
                    let idx = p2 + i - (k + 1);
                    row[1 + p1 + k] += h[idx];
                    let b = beta[k];
                    for (r, g) in row.iter_mut().zip(&dh[idx * d..(idx + 1) * d]) {
                        *r += b * g;
                    }
                }
            }
            dh.extend_from_slice(&row);
        }
    }

    let presample = Presample {
        y: pre.y2.iter().map(|v| v.sqrt()).collect(),
        h: pre.h,
    };
    Ok(Recursion {
        h: h.split_off(p2),
        grad: want_grad.then(|| dh.split_off(p2 * d)),
        clamped,
        presample,
    })
}

/// Conditional variances `h_1(phi)..h_n(phi)`.
pub fn variance_path(y: &[f64], phi: &ParamVector, init: &InitPolicy) -> Result<VariancePath> {
    if y.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    check_finite(y)?;
    let order = phi.order();
    let rec = recurse(y, &phi.to_vec(), order.p1(), order.p2(), init, false)?;
    Ok(VariancePath {
        h: rec.h,
        init: init.clone(),
        presample: rec.presample,
        clamped: rec.clamped,
    })
}

/// `n x (1 + p1 + p2)` matrix of `dh_i / dphi`, computed by differentiating
/// the recursion; presample derivatives are zero except under
/// [`InitPolicy::Unconditional`], where the presample depends on phi.
pub fn variance_gradient(y: &[f64], phi: &ParamVector, init: &InitPolicy) -> Result<DMatrix<f64>> {
    if y.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    check_finite(y)?;
    let order = phi.order();
    let d = order.n_params();
    let rec = recurse(y, &phi.to_vec(), order.p1(), order.p2(), init, true)?;
    let grad = rec.grad.expect("gradient requested");
    Ok(DMatrix::from_row_slice(y.len(), d, &grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityReport {
    pub beta_sum: f64,
    pub coef_sum: f64,
    /// Monte Carlo estimate of the top Lyapunov exponent of the companion
    /// matrix products; `None` when the model has no dynamics (p1 = p2 = 0).
    pub lyapunov_estimate: Option<f64>,
}

impl StationarityReport {
    pub fn strictly_stationary(&self) -> Option<bool> {
        self.lyapunov_estimate.map(|g| g < 0.0)
    }
}

/// Companion matrix `A_i` for one squared innovation `e2`.
fn companion(phi: &ParamVector, e2: f64) -> DMatrix<f64> {
    let (p1, p2) = (phi.alpha().len(), phi.beta().len());
    let dim = p1 + p2;
    let coefs: Vec<f64> = phi.alpha().iter().chain(phi.beta()).copied().collect();
    let mut a = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        a[(0, c)] = coefs[c] * e2;
    }
    for r in 1..p1 {
        a[(r, r - 1)] = 1.0;
    }
    if p2 > 0 {
        for c in 0..dim {
            a[(p1, c)] = coefs[c];
        }
        for r in p1 + 1..dim {
            a[(r, r - 1)] = 1.0;
        }
    }
    a
}

const LYAPUNOV_RENORM_EVERY: usize = 50;

pub fn stationarity_report(phi: &ParamVector, n_lyap: usize, seed: u64) -> StationarityReport {
    let beta_sum = phi.beta_sum();
    let coef_sum = phi.alpha_sum() + beta_sum;
    let order = phi.order();
    if order.p1() + order.p2() == 0 || n_lyap == 0 {
        return StationarityReport {
            beta_sum,
            coef_sum,
            lyapunov_estimate: None,
        };
    }

    let mut rng = rng::stream(seed, 0, 0, rng::purpose::LYAPUNOV);
    let dim = order.p1() + order.p2();
    let mut prod = DMatrix::<f64>::identity(dim, dim);
    let mut log_scale = 0.0;
    for step in 1..=n_lyap {
        let e: f64 = StandardNormal.sample(&mut rng);
        prod = companion(phi, e * e) * prod;
        if step % LYAPUNOV_RENORM_EVERY == 0 || step == n_lyap {
            let norm = prod.norm();
            if norm == 0.0 {
                return StationarityReport {
                    beta_sum,
                    coef_sum,
                    lyapunov_estimate: Some(f64::NEG_INFINITY),
                };
            }
            log_scale += norm.ln();
            prod /= norm;
        }
    }
    StationarityReport {
        beta_sum,
        coef_sum,
        lyapunov_estimate: Some(log_scale / n_lyap as f64),
    }
}
