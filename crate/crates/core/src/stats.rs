//! Marked empirical process and the specification statistics built on it.
//!
//! For marks `m_i = y_i^2 / h_i - 1` and lags `y_{i-1}`,
//!
//! ```text
//! U_n(y) = n^{-1/2} sum_i m_i 1(y_{i-1} <= y)
//! KS     = sup_y |U_n(y)|
//! CvM    = integral U_n(y)^2 dG_n(y),  G_n(y) = n^{-1} sum_i 1(y_{i-1} <= y)
//! ```
//!
//! `U_n` is a right-continuous step function that vanishes left of the
//! smallest lag, so both functionals reduce to finite sums over the sorted
//! jump points.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{check_finite, Error, Result};

/// Which conditioning lag is used for the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FirstLag {
    /// Pair `y_1` with the presample value `y_0 = 0`.
    PresampleZero,
    /// Pair `y_1` with a supplied presample value.
    Presample(f64),
    /// Skip `i = 1`, so the process runs over `i = 2..n` with `y_1` as the
    /// first lag. The normalization uses the `n - 1` retained terms.
    #[default]
    DropFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedProcessEval {
    /// Distinct lag values, ascending.
    pub jump_points: Vec<f64>,
    /// Number of observations whose lag equals each jump point.
    pub multiplicity: Vec<usize>,
    /// `U_n` at each jump point.
    pub u_values: Vec<f64>,
    /// `U_n(+inf) = n^{-1/2} sum_i m_i`.
    pub u_at_inf: f64,
    /// Number of (lag, mark) terms.
    pub n_terms: usize,
}

impl MarkedProcessEval {
    /// `U_n(y)` at an arbitrary point.
    pub fn evaluate(&self, y: f64) -> f64 {
        let k = self.jump_points.partition_point(|&p| p <= y);
        if k == 0 {
            0.0
        } else {
            self.u_values[k - 1]
        }
    }
}

/// Builds `U_n` from explicit `(lag, mark)` pairs.
pub fn marked_process_from_pairs(lags: &[f64], marks: &[f64]) -> Result<MarkedProcessEval> {
    if lags.len() != marks.len() {
        return Err(Error::LengthMismatch {
            left: lags.len(),
            right: marks.len(),
        });
    }
    if lags.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    check_finite(lags)?;
    check_finite(marks)?;
    let n = lags.len();
    let norm = 1.0 / (n as f64).sqrt();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lags[a].total_cmp(&lags[b]));

    let mut jump_points = Vec::new();
    let mut multiplicity = Vec::new();
    let mut u_values = Vec::new();
    let mut cum = 0.0;
    let mut k = 0;
    while k < n {
        let lag = lags[order[k]];
        let mut count = 0;
        while k < n && lags[order[k]] == lag {
            cum += marks[order[k]];
            count += 1;
            k += 1;
        }
        jump_points.push(lag);
        multiplicity.push(count);
        u_values.push(norm * cum);
    }
    let u_at_inf = norm * marks.iter().sum::<f64>();
    Ok(MarkedProcessEval {
        jump_points,
        multiplicity,
        u_values,
        u_at_inf,
        n_terms: n,
    })
}

/// `U_n` for observations `y` and conditional variances `h`.
pub fn marked_process(y: &[f64], h: &[f64], first_lag: FirstLag) -> Result<MarkedProcessEval> {
    if y.len() != h.len() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: h.len(),
        });
    }
    if h.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return Err(Error::InvalidArgument(
            "conditional variances must be positive".into(),
        ));
    }
    let marks_from = |i: usize| y[i] * y[i] / h[i] - 1.0;
    let (lags, marks): (Vec<f64>, Vec<f64>) = match first_lag {
        FirstLag::DropFirst => (1..y.len()).map(|i| (y[i - 1], marks_from(i))).unzip(),
        FirstLag::PresampleZero | FirstLag::Presample(_) => {
            let y0 = if let FirstLag::Presample(v) = first_lag {
                v
            } else {
                0.0
            };
            (0..y.len())
                .map(|i| (if i == 0 { y0 } else { y[i - 1] }, marks_from(i)))
                .unzip()
        }
    };
    marked_process_from_pairs(&lags, &marks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Ks,
    Cvm,
    /// Ljung-Box on squared residuals at the given lag.
    Lbq(usize),
}

impl TestKind {
    pub fn label(&self) -> String {
        match self {
            TestKind::Ks => "KS".into(),
            TestKind::Cvm => "CvM".into(),
            TestKind::Lbq(l) => format!("LBQ({l})"),
        }
    }
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "ks" => Ok(TestKind::Ks),
            "cvm" => Ok(TestKind::Cvm),
            lower => lower
                .strip_prefix("lbq(")
                .and_then(|r| r.strip_suffix(')'))
                .or_else(|| lower.strip_prefix("lbq"))
                .and_then(|l| l.parse().ok())
                .map(TestKind::Lbq)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown test {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestStatistic {
    pub kind: TestKind,
    pub value: f64,
    /// Reference-distribution p-value where one exists (Ljung-Box).
    pub p_value: Option<f64>,
}

pub fn ks_statistic(mp: &MarkedProcessEval) -> TestStatistic {
    let value = mp.u_values.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    TestStatistic {
        kind: TestKind::Ks,
        value,
        p_value: None,
    }
}

pub fn cvm_statistic(mp: &MarkedProcessEval) -> TestStatistic {
    let sum: f64 = mp
        .u_values
        .iter()
        .zip(&mp.multiplicity)
        .map(|(u, &c)| c as f64 * u * u)
        .sum();
    TestStatistic {
        kind: TestKind::Cvm,
        value: sum / mp.n_terms as f64,
        p_value: None,
    }
}

fn centered_autocov(x: &[f64], max_lag: usize) -> Result<(f64, Vec<f64>)> {
    check_finite(x)?;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0: f64 = d.iter().map(|v| v * v).sum();
    let magnitude = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if c0 == 0.0 || c0.sqrt() <= 1e-12 * magnitude * n.sqrt() {
        return Err(Error::Degenerate("series has zero variance"));
    }
    let ck = (1..=max_lag)
        .map(|k| d[k..].iter().zip(&d).map(|(a, b)| a * b).sum())
        .collect();
    Ok((c0, ck))
}

/// Sample autocorrelations `r_1..r_max_lag` (divisor-n autocovariances over
/// the lag-0 value).
pub fn sample_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= x.len() {
        return Err(Error::InvalidArgument(format!(
            "max_lag {max_lag} must be below the series length {}",
            x.len()
        )));
    }
    let (c0, ck) = centered_autocov(x, max_lag)?;
    Ok(ck.into_iter().map(|c| c / c0).collect())
}

/// `Q = n (n + 2) sum_{k=1}^{lag} r_k^2 / (n - k)` with its chi-square(lag)
/// upper-tail p-value; no degrees-of-freedom correction for estimated
/// parameters.
pub fn ljung_box(x: &[f64], lag: usize) -> Result<TestStatistic> {
    if lag == 0 || lag >= x.len() {
        return Err(Error::InvalidArgument(format!(
            "Ljung-Box lag must be in 1..{}, got {lag}",
            x.len()
        )));
    }
    let r = sample_acf(x, lag)?;
    let n = x.len() as f64;
    let q = n
        * (n + 2.0)
        * r.iter()
            .enumerate()
            .map(|(k, rk)| rk * rk / (n - (k + 1) as f64))
            .sum::<f64>();
    let chi2 = ChiSquared::new(lag as f64).expect("positive degrees of freedom");
    Ok(TestStatistic {
        kind: TestKind::Lbq(lag),
        value: q,
        p_value: Some(chi2.sf(q)),
    })
}
