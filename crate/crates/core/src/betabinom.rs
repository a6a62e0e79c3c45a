//! Exact predictive probability of success for binary endpoints under beta
//! priors, by summing a success indicator over the beta-binomial predictive
//! distribution of the responders still to be observed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::numerics::{
    exact_binom_test, fisher_exact_one_sided, ln_choose, log_beta, phi, Alternative, KahanSum,
    Probability,
};

/// `Beta(a, b)` prior on a response probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        require!(
            a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite(),
            "beta prior parameters must be positive and finite, got a={a}, b={b}"
        );
        Ok(BetaPrior { a, b })
    }

    pub fn uniform() -> Self {
        BetaPrior { a: 1.0, b: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

impl Default for BetaPrior {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Interim data of one arm: `x` responders among `n` of `big_n` planned subjects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmInterim {
    pub n: u64,
    pub x: u64,
    #[serde(rename = "N")]
    pub big_n: u64,
}

impl ArmInterim {
    pub fn new(n: u64, x: u64, big_n: u64) -> Result<Self> {
        require!(
            x <= n && n <= big_n,
            "arm counts must satisfy 0 <= x <= n <= N, got x={x}, n={n}, N={big_n}"
        );
        Ok(ArmInterim { n, x, big_n })
    }

    /// Subjects still to be observed.
    pub fn remaining(&self) -> u64 {
        self.big_n - self.n
    }

    fn validate(&self) -> Result<()> {
        ArmInterim::new(self.n, self.x, self.big_n).map(|_| ())
    }
}

pub fn posterior_beta(prior: BetaPrior, arm: ArmInterim) -> Result<BetaPrior> {
    arm.validate()?;
    BetaPrior::new(prior.a + arm.x as f64, prior.b + (arm.n - arm.x) as f64)
}

/// `Pr(Y = y | x)` for the `N - n` future subjects.
pub fn beta_binom_pmf(arm: ArmInterim, prior: BetaPrior, y: u64) -> Result<Probability> {
    let post = posterior_beta(prior, arm)?;
    let m = arm.remaining();
    require!(y <= m, "y must satisfy 0 <= y <= N-n = {m}, got {y}");
    Probability::new(log_pmf(post, m, y)?.exp().min(1.0))
}

fn log_pmf(post: BetaPrior, m: u64, y: u64) -> Result<f64> {
    let yf = y as f64;
    Ok(ln_choose(m, y) + log_beta(post.a + yf, post.b + (m - y) as f64)?.ln()
        - log_beta(post.a, post.b)?.ln())
}

/// Predictive distribution of the number of future responders.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictivePmf {
    probs: Vec<f64>,
}

impl PredictivePmf {
    pub fn new(prior: BetaPrior, arm: ArmInterim) -> Result<Self> {
        let post = posterior_beta(prior, arm)?;
        let m = arm.remaining();
        let probs = (0..=m)
            .map(|y| log_pmf(post, m, y).map(f64::exp))
            .collect::<Result<Vec<_>>>()?;
        Ok(PredictivePmf { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().copied().collect::<KahanSum>().total()
    }
}

/// Final-analysis success rule applied to completed-trial counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessIndicator {
    /// Normal-approximation test. Two arms: difference `p̂T - p̂C - null` over
    /// the pooled (or unpooled) SE, optionally with a continuity correction of
    /// `½(1/NT + 1/NC)` toward the null. One arm: `p̂ - null` over the null SE
    /// (pooled) or the observed SE. Success iff `Z > crit` (`Z < -crit` for "less").
    ZTest {
        crit: f64,
        #[serde(default)]
        tail: Alternative,
        #[serde(default = "yes")]
        pooled: bool,
        #[serde(default = "yes")]
        continuity: bool,
        #[serde(default)]
        null_value: f64,
    },
    /// One-sided Fisher exact test; success iff p-value ≤ level.
    FisherExact {
        level: f64,
        #[serde(default)]
        tail: Alternative,
    },
    /// One-arm exact binomial test of `p = p0`; success iff p-value ≤ level.
    ExactBinomial {
        level: f64,
        p0: f64,
        #[serde(default)]
        tail: Alternative,
    },
    /// Final proportion (one arm) or difference (two arms) strictly beyond `threshold`.
    ClinicalThreshold {
        threshold: f64,
        #[serde(default)]
        tail: Alternative,
    },
    /// Fixed outcome, independent of the data.
    Constant { value: bool },
}

fn yes() -> bool {
    true
}

impl SuccessIndicator {
    /// Default Z test: pooled SE with continuity correction.
    pub fn z_test(crit: f64, tail: Alternative) -> Self {
        SuccessIndicator::ZTest {
            crit,
            tail,
            pooled: true,
            continuity: true,
            null_value: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SuccessIndicator::ZTest { crit, null_value, .. } => {
                require!(crit.is_finite(), "critical value must be finite, got {crit}");
                require!(null_value.is_finite(), "null value must be finite, got {null_value}");
            }
            SuccessIndicator::FisherExact { level, .. } => {
                require!(level > 0.0 && level < 1.0, "level must lie in (0,1), got {level}");
            }
            SuccessIndicator::ExactBinomial { level, p0, .. } => {
                require!(level > 0.0 && level < 1.0, "level must lie in (0,1), got {level}");
                require!(p0 > 0.0 && p0 < 1.0, "p0 must lie in (0,1), got {p0}");
            }
            SuccessIndicator::ClinicalThreshold { threshold, .. } => {
                require!(threshold.is_finite(), "threshold must be finite, got {threshold}");
            }
            SuccessIndicator::Constant { .. } => {}
        }
        Ok(())
    }

    /// Evaluates the rule on one-arm final data `x / big_n`.
    pub fn eval_one_arm(&self, x: u64, big_n: u64) -> Result<Outcome> {
        require!(x <= big_n && big_n > 0, "final counts must satisfy 0 <= x <= N, N > 0, got x={x}, N={big_n}");
        let p = x as f64 / big_n as f64;
        match *self {
            SuccessIndicator::ZTest { crit, tail, pooled, continuity, null_value } => {
                require!(
                    !pooled || (null_value > 0.0 && null_value < 1.0),
                    "one-arm Z test with null-based SE needs a null proportion in (0,1), got {null_value}"
                );
                let var = if pooled { null_value * (1.0 - null_value) } else { p * (1.0 - p) } / big_n as f64;
                let cc = if continuity { 0.5 / big_n as f64 } else { 0.0 };
                if var == 0.0 {
                    let level = 1.0 - phi(crit);
                    let p0 = null_value;
                    require!(p0 > 0.0 && p0 < 1.0, "exact fallback needs a null proportion in (0,1), got {p0}");
                    let pv = exact_binom_test(x, big_n, p0, tail)?;
                    return Ok(Outcome::fallback(pv.value() <= level));
                }
                let z = tail.sign() * (p - null_value) - cc;
                Ok(Outcome::plain(z / var.sqrt() > crit))
            }
            SuccessIndicator::ExactBinomial { level, p0, tail } => {
                Ok(Outcome::plain(exact_binom_test(x, big_n, p0, tail)?.value() <= level))
            }
            SuccessIndicator::ClinicalThreshold { threshold, tail } => {
                Ok(Outcome::plain(tail.sign() * (p - threshold) > 0.0))
            }
            SuccessIndicator::Constant { value } => Ok(Outcome::plain(value)),
            SuccessIndicator::FisherExact { .. } => Err(Error::Domain(
                "Fisher's exact test needs two arms".into(),
            )),
        }
    }

    /// Evaluates the rule on two-arm final data.
    pub fn eval_two_arm(&self, x_t: u64, n_t: u64, x_c: u64, n_c: u64) -> Result<Outcome> {
        require!(
            x_t <= n_t && x_c <= n_c && n_t > 0 && n_c > 0,
            "final counts must satisfy 0 <= x <= N, N > 0 in both arms"
        );
        let (nt, nc) = (n_t as f64, n_c as f64);
        let (pt, pc) = (x_t as f64 / nt, x_c as f64 / nc);
        match *self {
            SuccessIndicator::ZTest { crit, tail, pooled, continuity, null_value } => {
                let var = if pooled {
                    let p = (x_t + x_c) as f64 / (nt + nc);
                    p * (1.0 - p) * (1.0 / nt + 1.0 / nc)
                } else {
                    pt * (1.0 - pt) / nt + pc * (1.0 - pc) / nc
                };
                if var == 0.0 {
                    let level = 1.0 - phi(crit);
                    let pv = fisher_exact_one_sided(x_t, n_t, x_c, n_c, tail)?;
                    return Ok(Outcome::fallback(pv.value() <= level));
                }
                let cc = if continuity { 0.5 * (1.0 / nt + 1.0 / nc) } else { 0.0 };
                let z = tail.sign() * (pt - pc - null_value) - cc;
                Ok(Outcome::plain(z / var.sqrt() > crit))
            }
            SuccessIndicator::FisherExact { level, tail } => Ok(Outcome::plain(
                fisher_exact_one_sided(x_t, n_t, x_c, n_c, tail)?.value() <= level,
            )),
            SuccessIndicator::ClinicalThreshold { threshold, tail } => {
                Ok(Outcome::plain(tail.sign() * (pt - pc - threshold) > 0.0))
            }
            SuccessIndicator::Constant { value } => Ok(Outcome::plain(value)),
            SuccessIndicator::ExactBinomial { .. } => Err(Error::Domain(
                "the exact binomial test applies to one arm only".into(),
            )),
        }
    }
}

/// Indicator value plus whether a zero-variance Z statistic forced the exact-test fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub success: bool,
    pub fallback: bool,
}

impl Outcome {
    fn plain(success: bool) -> Self {
        Outcome { success, fallback: false }
    }

    fn fallback(success: bool) -> Self {
        Outcome { success, fallback: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaBinomResult {
    pub ppos: f64,
    /// Indicator evaluations performed.
    pub cells: u64,
    /// Evaluations that fell back to an exact test because the Z statistic had zero variance.
    pub fallback_cells: u64,
    /// Predictive probability mass carried by fallback cells.
    pub fallback_mass: f64,
}

/// Number of indicator evaluations `ppos_two_arm` performs.
pub fn two_arm_cells(arm_t: &ArmInterim, arm_c: &ArmInterim) -> u64 {
    (arm_t.remaining() + 1).saturating_mul(arm_c.remaining() + 1)
}

pub fn ppos_one_arm(
    prior: BetaPrior,
    arm: ArmInterim,
    indicator: &SuccessIndicator,
) -> Result<BetaBinomResult> {
    indicator.validate()?;
    let pmf = PredictivePmf::new(prior, arm)?;
    let mut acc = KahanSum::new();
    let mut fb = KahanSum::new();
    let mut fallback_cells = 0;
    for (y, &w) in pmf.probs().iter().enumerate() {
        let out = indicator.eval_one_arm(arm.x + y as u64, arm.big_n)?;
        if out.success {
            acc.add(w);
        }
        if out.fallback {
            fallback_cells += 1;
            fb.add(w);
        }
    }
    Ok(BetaBinomResult {
        ppos: Probability::new(acc.total().min(1.0))?.value(),
        cells: pmf.probs().len() as u64,
        fallback_cells,
        fallback_mass: fb.total(),
    })
}

/// Exact double sum over the future responder counts of both arms.
///
/// Rows (treatment counts) are evaluated in parallel and then combined in row
/// order, so the result does not depend on the number of worker threads.
pub fn ppos_two_arm(
    prior_t: BetaPrior,
    prior_c: BetaPrior,
    arm_t: ArmInterim,
    arm_c: ArmInterim,
    indicator: &SuccessIndicator,
) -> Result<BetaBinomResult> {
    indicator.validate()?;
    let pmf_t = PredictivePmf::new(prior_t, arm_t)?;
    let pmf_c = PredictivePmf::new(prior_c, arm_c)?;
    let rows = pmf_t
        .probs()
        .par_iter()
        .enumerate()
        .map(|(yt, &wt)| -> Result<(f64, f64, u64)> {
            let mut acc = KahanSum::new();
            let mut fb = KahanSum::new();
            let mut nfb = 0;
            for (yc, &wc) in pmf_c.probs().iter().enumerate() {
                let out = indicator.eval_two_arm(
                    arm_t.x + yt as u64,
                    arm_t.big_n,
                    arm_c.x + yc as u64,
                    arm_c.big_n,
                )?;
                if out.success {
                    acc.add(wc);
                }
                if out.fallback {
                    nfb += 1;
                    fb.add(wc);
                }
            }
            Ok((wt * acc.total(), wt * fb.total(), nfb))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acc = KahanSum::new();
    let mut fb = KahanSum::new();
    let mut fallback_cells = 0;
    for (s, f, n) in rows {
        acc.add(s);
        fb.add(f);
        fallback_cells += n;
    }
    Ok(BetaBinomResult {
        ppos: Probability::new(acc.total().min(1.0))?.value(),
        cells: two_arm_cells(&arm_t, &arm_c),
        fallback_cells,
        fallback_mass: fb.total(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex4() -> (ArmInterim, ArmInterim) {
        (ArmInterim::new(155, 13, 325).unwrap(), ArmInterim::new(152, 21, 323).unwrap())
    }

    #[test]
    fn posterior_examples() {
        let u = BetaPrior::uniform();
        assert_eq!(posterior_beta(u, ArmInterim::new(0, 0, 10).unwrap()).unwrap(), u);
        assert_eq!(
            posterior_beta(u, ArmInterim::new(155, 13, 325).unwrap()).unwrap(),
            BetaPrior { a: 14.0, b: 143.0 }
        );
        assert_eq!(
            posterior_beta(BetaPrior::new(2.0, 3.0).unwrap(), ArmInterim::new(5, 5, 9).unwrap()).unwrap(),
            BetaPrior { a: 7.0, b: 3.0 }
        );
    }

    #[test]
    fn invalid_inputs() {
        assert!(BetaPrior::new(0.0, 1.0).is_err());
        assert!(ArmInterim::new(5, 6, 10).is_err());
        assert!(ArmInterim::new(11, 6, 10).is_err());
        let arm = ArmInterim::new(2, 1, 4).unwrap();
        assert!(beta_binom_pmf(arm, BetaPrior::uniform(), 3).is_err());
        assert!(SuccessIndicator::FisherExact { level: 1.0, tail: Alternative::Greater }.validate().is_err());
    }

    #[test]
    fn pmf_examples() {
        let u = BetaPrior::uniform();
        let done = ArmInterim::new(7, 3, 7).unwrap();
        assert_eq!(beta_binom_pmf(done, u, 0).unwrap().value(), 1.0);
        let laplace = ArmInterim::new(0, 0, 1).unwrap();
        assert!((beta_binom_pmf(laplace, u, 1).unwrap().value() - 0.5).abs() < 1e-15);
        let arm = ArmInterim::new(2, 1, 4).unwrap();
        assert!((beta_binom_pmf(arm, u, 1).unwrap().value() - 0.4).abs() < 1e-14);
    }

    #[test]
    fn indicator_examples() {
        let clin = SuccessIndicator::ClinicalThreshold { threshold: 0.0, tail: Alternative::Greater };
        assert!(!clin.eval_two_arm(3, 10, 3, 10).unwrap().success);
        let fisher = SuccessIndicator::FisherExact { level: 0.025, tail: Alternative::Greater };
        assert!(fisher.eval_two_arm(10, 10, 0, 10).unwrap().success);
    }

    #[test]
    fn z_statistic_cells_by_hand() {
        let ind = SuccessIndicator::z_test(1.96, Alternative::Less);
        for (xt, xc) in [(30u64, 50u64), (40, 45), (25, 60)] {
            let (nt, nc) = (325.0, 323.0);
            let (pt, pc) = (xt as f64 / nt, xc as f64 / nc);
            let p = (xt + xc) as f64 / (nt + nc);
            let se = (p * (1.0 - p) * (1.0 / nt + 1.0 / nc)).sqrt();
            let z = (pt - pc + 0.5 * (1.0 / nt + 1.0 / nc)) / se;
            assert_eq!(ind.eval_two_arm(xt, 325, xc, 323).unwrap().success, z < -1.96);
        }
    }

    #[test]
    fn zero_variance_falls_back() {
        let ind = SuccessIndicator::z_test(1.96, Alternative::Greater);
        let out = ind.eval_two_arm(0, 10, 0, 10).unwrap();
        assert!(out.fallback && !out.success);
    }

    #[test]
    fn example_4() {
        let (t, c) = ex4();
        let u = BetaPrior::uniform();
        let r = ppos_two_arm(u, u, t, c, &SuccessIndicator::z_test(1.96, Alternative::Less)).unwrap();
        assert!((r.ppos - 0.536).abs() < 0.002, "{}", r.ppos);
        assert_eq!(r.cells, 171 * 172);
        let unpooled = SuccessIndicator::ZTest {
            crit: 1.96,
            tail: Alternative::Less,
            pooled: false,
            continuity: false,
            null_value: 0.0,
        };
        let r = ppos_two_arm(u, u, t, c, &unpooled).unwrap();
        assert!((r.ppos - 0.5864).abs() < 1e-3, "{}", r.ppos);
    }

    #[test]
    fn constant_indicator_gives_one() {
        let (t, c) = ex4();
        let u = BetaPrior::uniform();
        let r = ppos_two_arm(u, u, t, c, &SuccessIndicator::Constant { value: true }).unwrap();
        assert!((r.ppos - 1.0).abs() < 1e-12);
    }
}
