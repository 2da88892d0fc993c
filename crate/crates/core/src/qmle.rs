//! Gaussian quasi maximum likelihood estimation over the restricted
//! parameter space, plus residual extraction and standardization.
//!
//! The loss is `sum_i [ln h_i(phi) + y_i^2 / h_i(phi)]`. Internally the data
//! are divided by their root mean square before optimizing, which makes the
//! problem scale free: fitting `c * y` returns `c^2 * omega` and the same
//! ARCH/GARCH coefficients.

use crate::error::{check_finite, Error, Result};
use crate::model::{self, GarchOrder, InitPolicy, ParamBox, ParamVector, Presample, VariancePath};
use crate::optim::{self, Bounds};

/// Sum of ARCH coefficients below which a fit is flagged as (nearly)
/// unidentified.
pub const ALPHA_SUM_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Feasible region in the units of the data; `None` uses
    /// [`ParamBox::default_for`] with the data's mean square.
    pub param_box: Option<ParamBox>,
    /// Presample for the variance recursion, the sample variance by default.
    /// Bootstrap refits always use the zero presample their data were
    /// generated from.
    pub init_policy: InitPolicy,
    /// Number of default starting points tried (1 to 3).
    pub starts: usize,
    /// Extra starting points tried before the defaults. Their ranks come
    /// first when losses tie.
    pub warm_starts: Vec<ParamVector>,
    pub tol_grad: f64,
    pub tol_step: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            param_box: None,
            init_policy: InitPolicy::SampleVariance,
            starts: 3,
            warm_starts: Vec::new(),
            tol_grad: 1e-7,
            tol_step: 1e-13,
            max_iter: 500,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.starts == 0 && self.warm_starts.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one starting point is required".into(),
            ));
        }
        if !(self.tol_grad > 0.0 && self.tol_step > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub phi_hat: ParamVector,
    pub h_path: VariancePath,
    /// `y_i / sqrt(h_i(phi_hat))`.
    pub resid_raw: Vec<f64>,
    /// Centered and rescaled to unit (divisor-n) variance.
    pub resid_std: Vec<f64>,
    /// `sum_i l_i(phi_hat)` on the original scale.
    pub loss: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Projected-gradient sup norm of the mean loss on the rescaled data.
    pub grad_norm: f64,
    /// Multi-start candidate that won, counting warm starts first.
    pub start_index: usize,
}

impl FittedModel {
    pub fn order(&self) -> GarchOrder {
        self.phi_hat.order()
    }

    /// True when the ARCH coefficients essentially vanish, so the fitted
    /// GARCH terms are not identified.
    pub fn weakly_identified(&self) -> bool {
        self.order().p1() > 0 && self.phi_hat.alpha_sum() < ALPHA_SUM_FLOOR
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    /// Some `h_i` hit the variance floor.
    pub clamped: bool,
}

fn objective(
    y: &[f64],
    phi: &[f64],
    p1: usize,
    p2: usize,
    init: &InitPolicy,
    want_grad: bool,
) -> Result<LossEval> {
    let rec = model::recurse(y, phi, p1, p2, init, want_grad)?;
    let d = 1 + p1 + p2;
    let mut value = 0.0;
    let mut gradient = want_grad.then(|| vec![0.0; d]);
    for (i, (&yi, &hi)) in y.iter().zip(&rec.h).enumerate() {
        let ratio = yi * yi / hi;
        value += hi.ln() + ratio;
        if let (Some(gr), Some(dh)) = (gradient.as_mut(), rec.grad.as_ref()) {
            let w = (1.0 - ratio) / hi;
            for (gk, dk) in gr.iter_mut().zip(&dh[i * d..(i + 1) * d]) {
                *gk += w * dk;
            }
        }
    }
    Ok(LossEval {
        value,
        gradient,
        clamped: rec.clamped,
    })
}

fn check_loss(eval: LossEval) -> Result<LossEval> {
    if !eval.value.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite loss (variance floor hit: {})",
            eval.clamped
        )));
    }
    Ok(eval)
}

/// `sum_i [ln h_i + y_i^2 / h_i]`.
pub fn qmle_loss(y: &[f64], phi: &ParamVector, init: &InitPolicy) -> Result<f64> {
    check_finite(y)?;
    let o = phi.order();
    Ok(check_loss(objective(y, &phi.to_vec(), o.p1(), o.p2(), init, false)?)?.value)
}

/// Loss with its analytic gradient
/// `sum_i (1 - y_i^2/h_i) * (dh_i/dphi) / h_i`.
pub fn qmle_loss_gradient(y: &[f64], phi: &ParamVector, init: &InitPolicy) -> Result<LossEval> {
    check_finite(y)?;
    let o = phi.order();
    check_loss(objective(y, &phi.to_vec(), o.p1(), o.p2(), init, true)?)
}

/// Divides the presample by the data scale so the fit on rescaled data
/// stays consistent with the caller's initialization.
fn scaled_init(init: &InitPolicy, scale: f64) -> InitPolicy {
    match init {
        InitPolicy::Explicit(pre) => InitPolicy::Explicit(Presample {
            y: pre.y.iter().map(|v| v / scale.sqrt()).collect(),
            h: pre.h.iter().map(|v| v / scale).collect(),
        }),
        other => other.clone(),
    }
}

/// Default starting points on data with unit mean square.
fn default_starts(order: GarchOrder) -> Vec<Vec<f64>> {
    let (p1, p2) = (order.p1(), order.p2());
    let make = |w: f64, a: f64, b: f64| {
        let mut v = vec![w];
        v.extend(std::iter::repeat_n(a / p1.max(1) as f64, p1));
        v.extend(std::iter::repeat_n(b / p2.max(1) as f64, p2));
        v
    };
    vec![
        make(0.5, 0.05, 0.85),
        make(0.1, 0.1, 0.8),
        make(1.0, 0.05, 0.05),
    ]
}

pub fn qmle_fit(y: &[f64], order: GarchOrder, cfg: &FitConfig) -> Result<FittedModel> {
    cfg.validate()?;
    let d = order.n_params();
    let n = y.len();
    if n <= 10 * d {
        return Err(Error::InsufficientData {
            needed: 10 * d + 1,
            got: n,
        });
    }
    check_finite(y)?;
    let scale = y.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if scale == 0.0 {
        return Err(Error::Degenerate("all observations are zero"));
    }
    let root = scale.sqrt();
    let ys: Vec<f64> = y.iter().map(|v| v / root).collect();
    let init = scaled_init(&cfg.init_policy, scale);
    let (p1, p2) = (order.p1(), order.p2());

    let pbox = cfg
        .param_box
        .unwrap_or_else(|| ParamBox::default_for(scale));
    let mut lo = vec![0.0; d];
    let mut hi = vec![pbox.coef_hi; d];
    lo[0] = pbox.omega_lo / scale;
    hi[0] = pbox.omega_hi / scale;
    // With a single GARCH term the cap is just a tighter upper bound.
    if p2 == 1 {
        hi[d - 1] = pbox.coef_hi.min(pbox.beta_sum_hi);
    }
    let bounds = Bounds {
        lo,
        hi,
        sum_cap: (p2 > 1).then(|| (1 + p1..d, pbox.beta_sum_hi)),
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for w in &cfg.warm_starts {
        if w.order() != order {
            return Err(Error::InvalidArgument(format!(
                "warm start has order {}, expected {order}",
                w.order()
            )));
        }
        let mut v = w.to_vec();
        v[0] /= scale;
        starts.push(v);
    }
    starts.extend(default_starts(order).into_iter().take(cfg.starts));

    let inv_n = 1.0 / n as f64;
    let opts = optim::Options {
        tol_grad: cfg.tol_grad,
        tol_step: cfg.tol_step,
        max_iter: cfg.max_iter,
    };
    let mut best: Option<(usize, optim::Outcome)> = None;
    for (idx, x0) in starts.iter().enumerate() {
        let out = optim::minimize(
            |x, g| match objective(&ys, x, p1, p2, &init, true) {
                Ok(eval) => {
                    for (gi, v) in g.iter_mut().zip(eval.gradient.expect("gradient requested")) {
                        *gi = v * inv_n;
                    }
                    eval.value * inv_n
                }
                Err(_) => f64::NAN,
            },
            x0,
            &bounds,
            opts,
        );
        if !out.f.is_finite() {
            continue;
        }
        let better = match &best {
            None => true,
            Some((_, b)) => out.f < b.f,
        };
        if better {
            best = Some((idx, out));
        }
    }
    let (start_index, out) = best.ok_or(Error::Degenerate(
        "loss is not finite at any starting point",
    ))?;

    let mut phi = out.x.clone();
    phi[0] *= scale;
    let phi_hat = ParamVector::from_slice(order, &phi)?;
    let h_path = model::variance_path(y, &phi_hat, &cfg.init_policy)?;
    let loss = y
        .iter()
        .zip(&h_path.h)
        .map(|(v, h)| h.ln() + v * v / h)
        .sum();
    let resid_raw: Vec<f64> = y.iter().zip(&h_path.h).map(|(v, h)| v / h.sqrt()).collect();
    let resid_std = standardize_residuals(&resid_raw)?;

    Ok(FittedModel {
        phi_hat,
        h_path,
        resid_raw,
        resid_std,
        loss,
        converged: out.converged,
        iterations: out.iterations,
        grad_norm: out.pg_norm,
        start_index,
    })
}

/// Centers by the sample mean and divides by the divisor-n standard
/// deviation of the centered values.
pub fn standardize_residuals(resid_raw: &[f64]) -> Result<Vec<f64>> {
    if resid_raw.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: resid_raw.len(),
        });
    }
    check_finite(resid_raw)?;
    let n = resid_raw.len() as f64;
    let mean = resid_raw.iter().sum::<f64>() / n;
    let centered: Vec<f64> = resid_raw.iter().map(|e| e - mean).collect();
    let var = centered.iter().map(|e| e * e).sum::<f64>() / n;
    let scale = var.sqrt();
    let magnitude = resid_raw.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if scale <= 1e-12 * magnitude || scale == 0.0 {
        return Err(Error::Degenerate("residuals have zero variance"));
    }
    Ok(centered.iter().map(|e| e / scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn phi(omega: f64, alpha: &[f64], beta: &[f64]) -> ParamVector {
        ParamVector::new(omega, alpha.to_vec(), beta.to_vec()).unwrap()
    }

    #[test]
    fn loss_by_hand() {
        assert_relative_eq!(
            qmle_loss(&[1.0, 1.0], &phi(1.0, &[], &[]), &InitPolicy::ZeroTail).unwrap(),
            2.0
        );
        let expect = 2.0 * 4f64.ln() + 1.0;
        assert_relative_eq!(
            qmle_loss(&[2.0, 0.0], &phi(4.0, &[], &[]), &InitPolicy::ZeroTail).unwrap(),
            expect,
            epsilon = 1e-14
        );
    }

    #[test]
    fn constant_variance_fit_is_mean_square() {
        let y: Vec<f64> = (0..200)
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 13.0)
            .collect();
        let m2 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let fit = qmle_fit(&y, GarchOrder::new(0, 0).unwrap(), &FitConfig::default()).unwrap();
        assert!(fit.converged);
        assert!(
            (fit.phi_hat.omega() - m2).abs() < 1e-8,
            "{} vs {m2}",
            fit.phi_hat.omega()
        );
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(
            standardize_residuals(&[1.0, -1.0]).unwrap(),
            vec![1.0, -1.0]
        );
        assert!(standardize_residuals(&[3.0, 3.0, 3.0]).is_err());
        let s = standardize_residuals(&[2.0, 0.0, -2.0, 0.0]).unwrap();
        let r2 = 2f64.sqrt();
        for (a, b) in s.iter().zip([r2, 0.0, -r2, 0.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn too_short_or_degenerate_data() {
        let order = GarchOrder::new(1, 1).unwrap();
        assert!(matches!(
            qmle_fit(&[1.0; 30], order, &FitConfig::default()),
            Err(Error::InsufficientData { .. })
        ));
        assert_eq!(
            qmle_fit(&[0.0; 100], order, &FitConfig::default()).unwrap_err(),
            Error::Degenerate("all observations are zero")
        );
    }

    #[test]
    fn warm_start_order_must_match() {
        let y: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let cfg = FitConfig {
            warm_starts: vec![phi(1.0, &[0.1], &[])],
            ..FitConfig::default()
        };
        assert!(qmle_fit(&y, GarchOrder::new(1, 1).unwrap(), &cfg).is_err());
    }
}
