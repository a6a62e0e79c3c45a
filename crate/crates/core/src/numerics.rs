//! Special functions and exact small-sample tests.
//!
//! Everything here is pure and reentrant. Combinatorial quantities are kept in
//! log space and only exponentiated at the final summation step.

use serde::{Deserialize, Serialize};
use libm::{erfc, lgamma};
use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::{require, Error, Result};

/// Direction of the alternative hypothesis (or of a one-sided tail).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[cfg_attr(feature = "clap", derive(clap::ValueEnum))]
#[serde(rename_all = "lowercase")]
pub enum Alternative {
    #[default]
    Greater,
    Less,
}

impl Alternative {
    /// +1 for `Greater`, -1 for `Less`.
    pub fn sign(self) -> f64 {
        match self {
            Alternative::Greater => 1.0,
            Alternative::Less => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Alternative::Greater => Alternative::Less,
            Alternative::Less => Alternative::Greater,
        }
    }
}

impl std::str::FromStr for Alternative {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(Error::Domain(format!(
                "alternative must be \"greater\" or \"less\", got {other:?}"
            ))),
        }
    }
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        require!(
            (0.0..=1.0).contains(&value),
            "probability must lie in [0,1], got {value}"
        );
        Ok(Probability(value))
    }

    /// Clamps into `[0, 1]`; used on results of exact sums that may overshoot
    /// by a rounding error.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Probability(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// A non-negative real stored as its natural log; `-inf` represents zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogReal(f64);

impl LogReal {
    pub const ZERO: LogReal = LogReal(f64::NEG_INFINITY);

    pub fn from_log(log_value: f64) -> Result<Self> {
        if log_value.is_nan() || log_value == f64::INFINITY {
            return Err(Error::Numerical(format!(
                "log value must be finite or -inf, got {log_value}"
            )));
        }
        Ok(LogReal(log_value))
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }
}

/// Compensated (Kahan–Babuška) accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Pairwise summation; the result depends only on the order of `xs`.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// `ln(sum(exp(terms)))` without overflow.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let acc: KahanSum = terms.iter().map(|&t| (t - max).exp()).collect();
    max + acc.total().ln()
}

/// Standard normal CDF for any real argument (NaN propagates).
#[inline]
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Checked standard normal CDF.
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    require!(x.is_finite(), "x must be finite, got {x}");
    Ok(Probability(phi(x)))
}

/// Inverse of the standard normal CDF by bracketing plus safeguarded Newton steps.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    require!(p > 0.0 && p < 1.0, "p must lie in (0,1), got {p}");
    if p == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower tail, where `phi` keeps full relative precision.
    let (target, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    // Newton on ln Φ(x) - ln p: well scaled deep into the tail, where plain
    // Newton on Φ only creeps by about 1/|x| per step.
    let ln_target = target.ln();
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    let mut x = -1.0_f64;
    for _ in 0..200 {
        let cdf = phi(x);
        let f = cdf.ln() - ln_target;
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let slope = normal_pdf(x) / cdf;
        let mut next = if slope > 0.0 && slope.is_finite() { x - f / slope } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) || hi - lo <= 1e-15 * x.abs().max(1.0) {
            return Ok(sign * next);
        }
        x = next;
    }
    Err(Error::Numerical(format!(
        "normal quantile did not converge for p={p}"
    )))
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x) - [(x-1/2) ln x - x + ln √(2π)]` for `x >= 10`.
fn stirling_correction(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
        -3617.0 / 122_400.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut acc = 0.0;
    for c in COEF.iter().rev() {
        acc = acc * inv2 + c;
    }
    acc * inv
}

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x >= 10.0 {
        (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x)
    } else {
        lgamma(x)
    }
}

/// Natural log of the beta function.
///
/// Large arguments use the Stirling-corrected form so that no two large
/// log-gamma values are subtracted; this keeps absolute error near 1e-13 even
/// when `u + v` is in the tens of thousands.
pub fn log_beta(u: f64, v: f64) -> Result<LogReal> {
    require!(u > 0.0 && u.is_finite(), "u must be positive, got {u}");
    require!(v > 0.0 && v.is_finite(), "v must be positive, got {v}");
    LogReal::from_log(log_beta_unchecked(u, v))
}

pub(crate) fn log_beta_unchecked(u: f64, v: f64) -> f64 {
    let (p, q) = if u <= v { (u, v) } else { (v, u) };
    let s = p + q;
    if p >= 10.0 {
        let corr = stirling_correction(p) + stirling_correction(q) - stirling_correction(s);
        HALF_LN_2PI - 0.5 * s.ln()
            + (p - 0.5) * (p / s).ln()
            + (q - 0.5) * (-p / s).ln_1p()
            + corr
    } else if q >= 10.0 {
        let corr = stirling_correction(q) - stirling_correction(s);
        ln_gamma(p) + corr + p - p * s.ln() + (q - 0.5) * (-p / s).ln_1p()
    } else {
        ln_gamma(p) + ln_gamma(q) - ln_gamma(s)
    }
}

/// `ln C(n, k)` for `0 <= k <= n`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    let nf = n as f64;
    -(nf + 1.0).ln() - log_beta_unchecked(k as f64 + 1.0, (n - k) as f64 + 1.0)
}

/// Binomial log-pmf `ln P(X = x)` for `X ~ Binomial(n, p)`.
pub fn binom_log_pmf(n: u64, x: u64, p: Probability) -> Result<LogReal> {
    require!(x <= n, "x must satisfy 0 <= x <= n, got x={x}, n={n}");
    let p = p.value();
    let xf = x as f64;
    let rest = (n - x) as f64;
    let term = |count: f64, prob: f64| {
        if count == 0.0 {
            0.0
        } else if prob == 0.0 {
            f64::NEG_INFINITY
        } else {
            count * prob.ln()
        }
    };
    let lp = ln_choose(n, x) + term(xf, p) + if rest == 0.0 { 0.0 } else if p == 1.0 {
        f64::NEG_INFINITY
    } else {
        rest * (-p).ln_1p()
    };
    LogReal::from_log(lp)
}

/// Sums `exp(log_terms)` into a probability.
fn tail_from_logs(log_terms: &[f64]) -> Probability {
    let acc: KahanSum = log_terms.iter().map(|t| t.exp()).collect();
    Probability::saturating(acc.total())
}

/// One-sided Fisher exact test on the 2x2 table (treatment `xT/nT` vs control `xC/nC`).
///
/// Conditioning on the total responders, the treatment responder count is
/// hypergeometric; `Greater` returns `P(X >= xT)`, `Less` returns `P(X <= xT)`.
pub fn fisher_exact_one_sided(
    x_t: u64,
    n_t: u64,
    x_c: u64,
    n_c: u64,
    tail: Alternative,
) -> Result<Probability> {
    require!(x_t <= n_t, "xT must not exceed nT, got xT={x_t}, nT={n_t}");
    require!(x_c <= n_c, "xC must not exceed nC, got xC={x_c}, nC={n_c}");
    let total = n_t + n_c;
    let responders = x_t + x_c;
    let lo = responders.saturating_sub(n_c);
    let hi = responders.min(n_t);
    let ln_denom = ln_choose(total, responders);
    let log_pmf = |k: u64| ln_choose(n_t, k) + ln_choose(n_c, responders - k) - ln_denom;
    let range: Vec<u64> = match tail {
        Alternative::Greater => (x_t..=hi).collect(),
        Alternative::Less => (lo..=x_t).collect(),
    };
    let terms: Vec<f64> = range.into_iter().map(log_pmf).collect();
    Ok(tail_from_logs(&terms))
}

/// Exact one-sided binomial test of `H0: p = p0`.
pub fn exact_binom_test(x: u64, n: u64, p0: f64, tail: Alternative) -> Result<Probability> {
    require!(x <= n, "x must satisfy 0 <= x <= n, got x={x}, n={n}");
    require!(p0 > 0.0 && p0 < 1.0, "p0 must lie in (0,1), got {p0}");
    let p0 = Probability(p0);
    let range: Vec<u64> = match tail {
        Alternative::Greater => (x..=n).collect(),
        Alternative::Less => (0..=x).collect(),
    };
    let terms = range
        .into_iter()
        .map(|k| binom_log_pmf(n, k, p0).map(LogReal::ln))
        .collect::<Result<Vec<_>>>()?;
    Ok(tail_from_logs(&terms))
}

/// `1 / ln 2`, the variance-inflation factor of the plain sample median.
pub const INV_LN_2: f64 = 1.0 / LN_2;
