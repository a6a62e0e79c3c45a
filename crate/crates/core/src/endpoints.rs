//! Adapters from raw trial quantities to the `(θ̂, k, t, γ)` abstraction of
//! [`crate::interim`], for continuous, binary and time-to-event endpoints in
//! one- and two-arm designs.
//!
//! Every cell maps its natural-scale quantity `x` to the effect scale through
//! `θ = s·(g(x) - g(null))` where `g` is the identity (means, proportions) or
//! the natural log (medians, hazard ratios) and `s` is `+1` for a "greater"
//! alternative and `-1` for "less". The two-arm survival cell with `H1: HR < 1`
//! is therefore just the log scale with a "less" alternative.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::interim::{
    self, GammaValue, InterimSummary, NormalDist, NormalPrior, SuccessCriterion,
};
use crate::numerics::{Alternative, Probability, INV_LN_2};

/// Treatment:control allocation `a:1`, or a single-arm design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AllocationRatio {
    TwoArm(f64),
    SingleArm,
}

impl AllocationRatio {
    pub fn two_arm(a: f64) -> Result<Self> {
        require!(a > 0.0 && a.is_finite(), "allocation ratio a must be positive, got {a}");
        Ok(AllocationRatio::TwoArm(a))
    }

    /// `r² = (a+1)²/a`; 1 for a single arm.
    pub fn r2(self) -> f64 {
        match self {
            AllocationRatio::TwoArm(a) => (a + 1.0) * (a + 1.0) / a,
            AllocationRatio::SingleArm => 1.0,
        }
    }

    pub fn r(self) -> f64 {
        self.r2().sqrt()
    }
}

/// The six endpoint × arms cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    ContinuousOneArm,
    ContinuousTwoArm,
    BinaryOneArm,
    BinaryTwoArm,
    SurvivalOneArm,
    SurvivalTwoArm,
}

impl EndpointKind {
    pub const ALL: [EndpointKind; 6] = [
        EndpointKind::ContinuousOneArm,
        EndpointKind::ContinuousTwoArm,
        EndpointKind::BinaryOneArm,
        EndpointKind::BinaryTwoArm,
        EndpointKind::SurvivalOneArm,
        EndpointKind::SurvivalTwoArm,
    ];

    pub fn is_log_scale(self) -> bool {
        matches!(self, EndpointKind::SurvivalOneArm | EndpointKind::SurvivalTwoArm)
    }

    pub fn effect_scale(self, null_value: f64, alternative: Alternative) -> Result<EffectScale> {
        EffectScale::new(self.is_log_scale(), null_value, alternative)
    }
}

/// Map between a cell's natural scale and the effect scale `θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectScale {
    log: bool,
    null_value: f64,
    alternative: Alternative,
}

impl EffectScale {
    pub fn new(log: bool, null_value: f64, alternative: Alternative) -> Result<Self> {
        require!(null_value.is_finite(), "null value must be finite, got {null_value}");
        if log {
            require!(null_value > 0.0, "null median/HR must be positive, got {null_value}");
        }
        Ok(EffectScale { log, null_value, alternative })
    }

    fn g(&self, x: f64) -> f64 {
        if self.log {
            x.ln()
        } else {
            x
        }
    }

    /// `θ` for a natural-scale value.
    pub fn to_theta(&self, x: f64) -> Result<f64> {
        require!(x.is_finite(), "value must be finite, got {x}");
        if self.log {
            require!(x > 0.0, "median/HR must be positive, got {x}");
        }
        Ok(self.alternative.sign() * (self.g(x) - self.g(self.null_value)))
    }

    /// A difference on the natural (or log) scale expressed on the `θ` scale,
    /// e.g. a prior SD.
    pub fn to_theta_spread(&self, spread: f64) -> f64 {
        spread
    }

    /// Natural-scale value for an effect `θ`.
    pub fn to_natural(&self, theta: f64) -> f64 {
        let g = self.g(self.null_value) + self.alternative.sign() * theta;
        if self.log {
            g.exp()
        } else {
            g
        }
    }

    /// `|dθ/dx|` at natural value `x`.
    pub fn jacobian(&self, x: f64) -> f64 {
        if self.log {
            1.0 / x
        } else {
            1.0
        }
    }

    pub fn alternative(&self) -> Alternative {
        self.alternative
    }

    pub fn null_value(&self) -> f64 {
        self.null_value
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousOneArm {
    pub null_value: f64,
    pub mean_ia: f64,
    pub sd_ia: f64,
    pub n: u64,
    pub big_n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousTwoArm {
    pub null_value: f64,
    pub meandiff_ia: f64,
    /// Pooled SD at interim.
    pub sd_ia: f64,
    /// Total interim sample size.
    pub n: u64,
    pub big_n: u64,
    pub allocation: AllocationRatio,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryOneArm {
    pub null_value: f64,
    pub prop_ia: f64,
    pub n: u64,
    pub big_n: u64,
}

/// Interim data of a two-arm binary trial: per-arm counts, or the difference
/// with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinaryTwoArmInterim {
    Counts {
        prop_trt: f64,
        n_trt: u64,
        prop_con: f64,
        n_con: u64,
    },
    Summary {
        propdiff: f64,
        stderr: f64,
        n: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryTwoArm {
    pub null_value: f64,
    pub interim: BinaryTwoArmInterim,
    pub big_n: u64,
    pub allocation: AllocationRatio,
}

impl BinaryTwoArm {
    fn n(&self) -> u64 {
        match self.interim {
            BinaryTwoArmInterim::Counts { n_trt, n_con, .. } => n_trt + n_con,
            BinaryTwoArmInterim::Summary { n, .. } => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalOneArm {
    /// Null median `M1`.
    pub null_value: f64,
    pub median_ia: f64,
    pub d: u64,
    pub big_d: u64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalTwoArm {
    /// Null hazard ratio `Δ1`.
    pub null_value: f64,
    pub hr_ia: f64,
    pub d: u64,
    pub big_d: u64,
    pub allocation: AllocationRatio,
}

/// Raw interim quantities for one of the six cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EndpointSpec {
    ContinuousOneArm(ContinuousOneArm),
    ContinuousTwoArm(ContinuousTwoArm),
    BinaryOneArm(BinaryOneArm),
    BinaryTwoArm(BinaryTwoArm),
    SurvivalOneArm(SurvivalOneArm),
    SurvivalTwoArm(SurvivalTwoArm),
}

fn fraction(part: u64, total: u64, what: &str, complete_ok: bool) -> Result<f64> {
    require!(
        part > 0 && (part < total || (complete_ok && part == total)),
        "interim {what} must satisfy 0 < {what} < final {what}, got {part} of {total}"
    );
    Ok(part as f64 / total as f64)
}

fn proper_proportion(p: f64, what: &str) -> Result<f64> {
    require!((0.0..=1.0).contains(&p), "{what} must lie in [0,1], got {p}");
    if p == 0.0 || p == 1.0 {
        return Err(Error::DegenerateVariance(format!(
            "{what} = {p} has zero variance; use the beta-binomial engine"
        )));
    }
    Ok(p)
}

impl EndpointSpec {
    pub fn kind(&self) -> EndpointKind {
        match self {
            EndpointSpec::ContinuousOneArm(_) => EndpointKind::ContinuousOneArm,
            EndpointSpec::ContinuousTwoArm(_) => EndpointKind::ContinuousTwoArm,
            EndpointSpec::BinaryOneArm(_) => EndpointKind::BinaryOneArm,
            EndpointSpec::BinaryTwoArm(_) => EndpointKind::BinaryTwoArm,
            EndpointSpec::SurvivalOneArm(_) => EndpointKind::SurvivalOneArm,
            EndpointSpec::SurvivalTwoArm(_) => EndpointKind::SurvivalTwoArm,
        }
    }

    pub fn null_value(&self) -> f64 {
        match self {
            EndpointSpec::ContinuousOneArm(c) => c.null_value,
            EndpointSpec::ContinuousTwoArm(c) => c.null_value,
            EndpointSpec::BinaryOneArm(c) => c.null_value,
            EndpointSpec::BinaryTwoArm(c) => c.null_value,
            EndpointSpec::SurvivalOneArm(c) => c.null_value,
            EndpointSpec::SurvivalTwoArm(c) => c.null_value,
        }
    }

    /// Interim estimate on the natural scale (mean, difference, proportion, median or HR).
    pub fn estimate(&self) -> f64 {
        match self {
            EndpointSpec::ContinuousOneArm(c) => c.mean_ia,
            EndpointSpec::ContinuousTwoArm(c) => c.meandiff_ia,
            EndpointSpec::BinaryOneArm(c) => c.prop_ia,
            EndpointSpec::BinaryTwoArm(c) => match c.interim {
                BinaryTwoArmInterim::Counts { prop_trt, prop_con, .. } => prop_trt - prop_con,
                BinaryTwoArmInterim::Summary { propdiff, .. } => propdiff,
            },
            EndpointSpec::SurvivalOneArm(c) => c.median_ia,
            EndpointSpec::SurvivalTwoArm(c) => c.hr_ia,
        }
    }

    pub fn scale(&self, alternative: Alternative) -> Result<EffectScale> {
        self.kind().effect_scale(self.null_value(), alternative)
    }

    /// Final-analysis standard error `k` and information fraction `t`.
    pub fn k_and_t(&self) -> Result<(f64, f64)> {
        self.k_and_t_inner(false)
    }

    /// Interim count equals the final count (`t = 1`).
    pub fn data_complete(&self) -> bool {
        matches!(self.k_and_t_inner(true), Ok((_, t)) if t == 1.0)
    }

    fn k_and_t_inner(&self, complete_ok: bool) -> Result<(f64, f64)> {
        match *self {
            EndpointSpec::ContinuousOneArm(c) => {
                let t = fraction(c.n, c.big_n, "n", complete_ok)?;
                require!(c.sd_ia > 0.0 && c.sd_ia.is_finite(), "interim SD s_n must be positive, got {}", c.sd_ia);
                Ok((c.sd_ia / (c.big_n as f64).sqrt(), t))
            }
            EndpointSpec::ContinuousTwoArm(c) => {
                let t = fraction(c.n, c.big_n, "n", complete_ok)?;
                require!(c.sd_ia > 0.0 && c.sd_ia.is_finite(), "interim pooled SD s_n must be positive, got {}", c.sd_ia);
                Ok((c.allocation.r() * c.sd_ia / (c.big_n as f64).sqrt(), t))
            }
            EndpointSpec::BinaryOneArm(c) => {
                let t = fraction(c.n, c.big_n, "n", complete_ok)?;
                require!((0.0..=1.0).contains(&c.null_value), "null proportion must lie in [0,1], got {}", c.null_value);
                let p = proper_proportion(c.prop_ia, "interim proportion p_n")?;
                Ok(((p * (1.0 - p)).sqrt() / (c.big_n as f64).sqrt(), t))
            }
            EndpointSpec::BinaryTwoArm(c) => {
                let t = fraction(c.n(), c.big_n, "n", complete_ok)?;
                let se = match c.interim {
                    BinaryTwoArmInterim::Counts { prop_trt, n_trt, prop_con, n_con } => {
                        require!(n_trt > 0 && n_con > 0, "both arms need interim subjects, got nT={n_trt}, nC={n_con}");
                        let pt = proper_proportion(prop_trt, "treatment interim proportion")?;
                        let pc = proper_proportion(prop_con, "control interim proportion")?;
                        (pt * (1.0 - pt) / n_trt as f64 + pc * (1.0 - pc) / n_con as f64).sqrt()
                    }
                    BinaryTwoArmInterim::Summary { stderr, .. } => {
                        require!(stderr.is_finite() && stderr >= 0.0, "interim SE must be a finite nonnegative number, got {stderr}");
                        if stderr == 0.0 {
                            return Err(Error::DegenerateVariance("interim SE of the difference is 0".into()));
                        }
                        stderr
                    }
                };
                Ok((se * t.sqrt(), t))
            }
            EndpointSpec::SurvivalOneArm(c) => {
                let t = fraction(c.d, c.big_d, "d", complete_ok)?;
                require!(c.xi > 0.0 && c.xi.is_finite(), "variance factor xi must be positive, got {}", c.xi);
                Ok((c.xi / (c.big_d as f64).sqrt(), t))
            }
            EndpointSpec::SurvivalTwoArm(c) => {
                let t = fraction(c.d, c.big_d, "d", complete_ok)?;
                Ok((c.allocation.r() / (c.big_d as f64).sqrt(), t))
            }
        }
    }

    /// Pooled SD estimate `s_n` implied by the interim data (`k·√N / r`).
    pub fn interim_sd(&self) -> Result<f64> {
        let (k, _) = self.k_and_t()?;
        let (big, r) = match *self {
            EndpointSpec::ContinuousOneArm(c) => (c.big_n, 1.0),
            EndpointSpec::ContinuousTwoArm(c) => (c.big_n, c.allocation.r()),
            EndpointSpec::BinaryOneArm(c) => (c.big_n, 1.0),
            EndpointSpec::BinaryTwoArm(c) => (c.big_n, c.allocation.r()),
            EndpointSpec::SurvivalOneArm(c) => (c.big_d, 1.0),
            EndpointSpec::SurvivalTwoArm(c) => (c.big_d, c.allocation.r()),
        };
        Ok(k * (big as f64).sqrt() / r)
    }
}

/// Maps an endpoint's interim data to `(θ̂, k, t)`.
pub fn to_interim(spec: &EndpointSpec, alternative: Alternative) -> Result<InterimSummary> {
    let scale = spec.scale(alternative)?;
    let theta_hat = scale.to_theta(spec.estimate())?;
    let (k, t) = spec.k_and_t()?;
    InterimSummary::new(theta_hat, k, t)
}

/// Projected post-interim value (`μ'`, `Δ'`, `Π'`, `M'`) on the effect scale.
pub fn theta_prime(
    kind: EndpointKind,
    null_value: f64,
    projected: f64,
    alternative: Alternative,
) -> Result<f64> {
    kind.effect_scale(null_value, alternative)?.to_theta(projected)
}

/// Normal prior given on the natural scale. For survival cells `mean` is a
/// median or HR and `sd` is the SD of its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaturalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NaturalPrior {
    /// Prior for a log hazard ratio (or log median) carrying the information of
    /// `events` previously observed events: SD `r / √events`.
    pub fn from_prior_events(mean: f64, events: f64, r: f64) -> Result<Self> {
        require!(events > 0.0, "prior event count must be positive, got {events}");
        Ok(NaturalPrior {
            mean,
            sd: r / events.sqrt(),
        })
    }
}

/// Converts a natural-scale prior to a normal prior on `θ`.
pub fn prior_to_theta(
    kind: EndpointKind,
    null_value: f64,
    prior: &NaturalPrior,
    alternative: Alternative,
) -> Result<NormalPrior> {
    require!(prior.sd >= 0.0 && !prior.sd.is_nan(), "prior SD sigma0 must be >= 0, got {}", prior.sd);
    let scale = kind.effect_scale(null_value, alternative)?;
    NormalPrior::new(scale.to_theta(prior.mean)?, scale.to_theta_spread(prior.sd))
}

/// Success criterion on the natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "succ_crit", rename_all = "lowercase")]
pub enum Criterion {
    /// Final `Z` exceeds `z_crit_final` (= c(1)).
    Trial { z_crit_final: f64 },
    /// Final estimate beyond a clinically meaningful natural-scale value.
    Clinical { clin_succ_threshold: f64 },
}

impl Criterion {
    pub fn to_success(&self, scale: &EffectScale) -> Result<SuccessCriterion> {
        match *self {
            Criterion::Trial { z_crit_final } => {
                require!(z_crit_final.is_finite(), "final critical value must be finite, got {z_crit_final}");
                Ok(SuccessCriterion::Trial { c1: z_crit_final })
            }
            Criterion::Clinical { clin_succ_threshold } => Ok(SuccessCriterion::Clinical {
                theta_min: scale.to_theta(clin_succ_threshold)?,
            }),
        }
    }
}

/// Estimator behind a single-arm interim median, fixing `var(log m_d) = ξ²/d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum XiEstimator {
    MleExponential,
    SampleMedianExponential,
    SampleMedianWeibull { shape: f64 },
    Custom { value: f64 },
}

pub fn xi_factor(estimator: XiEstimator) -> Result<f64> {
    match estimator {
        XiEstimator::MleExponential => Ok(1.0),
        XiEstimator::SampleMedianExponential => Ok(INV_LN_2),
        XiEstimator::SampleMedianWeibull { shape } => {
            require!(shape > 0.0 && shape.is_finite(), "Weibull shape beta must be positive, got {shape}");
            Ok(INV_LN_2 / shape)
        }
        XiEstimator::Custom { value } => {
            require!(value > 0.0 && value.is_finite(), "custom xi must be positive, got {value}");
            Ok(value)
        }
    }
}

/// Design-stage projection of the final standard error `k̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    ContinuousOneArm { big_n: u64, sd_exp: f64 },
    ContinuousTwoArm { big_n: u64, allocation: AllocationRatio, sd_exp: f64 },
    BinaryOneArm { big_n: u64, prop_exp: f64 },
    BinaryTwoArm { big_n: u64, allocation: AllocationRatio, prop_trt_exp: f64, prop_con_exp: f64 },
    SurvivalOneArm { big_d: u64, xi: f64 },
    SurvivalTwoArm { big_d: u64, allocation: AllocationRatio },
    /// `k̃` supplied directly for the given cell.
    StandardError { kind: EndpointKind, se_exp: f64 },
}

impl Projection {
    pub fn kind(&self) -> EndpointKind {
        match self {
            Projection::ContinuousOneArm { .. } => EndpointKind::ContinuousOneArm,
            Projection::ContinuousTwoArm { .. } => EndpointKind::ContinuousTwoArm,
            Projection::BinaryOneArm { .. } => EndpointKind::BinaryOneArm,
            Projection::BinaryTwoArm { .. } => EndpointKind::BinaryTwoArm,
            Projection::SurvivalOneArm { .. } => EndpointKind::SurvivalOneArm,
            Projection::SurvivalTwoArm { .. } => EndpointKind::SurvivalTwoArm,
            Projection::StandardError { kind, .. } => *kind,
        }
    }
}

/// Inputs of a design-stage PoS calculation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignSpec {
    pub projection: Projection,
    pub null_value: f64,
    pub alternative: Alternative,
    pub prior: NaturalPrior,
    pub criterion: Criterion,
}

/// Pooled binary SD `√(a/(a+1)·{πT(1-πT)/a + πC(1-πC)})`.
pub fn binary_pooled_sd(allocation: AllocationRatio, p_trt: f64, p_con: f64) -> f64 {
    let a = match allocation {
        AllocationRatio::TwoArm(a) => a,
        AllocationRatio::SingleArm => return (p_trt * (1.0 - p_trt)).sqrt(),
    };
    (a / (a + 1.0) * (p_trt * (1.0 - p_trt) / a + p_con * (1.0 - p_con))).sqrt()
}

/// Projected standard error `k̃` of the final estimate.
pub fn design_k(design: &DesignSpec) -> Result<f64> {
    let check_n = |n: u64| -> Result<f64> {
        require!(n > 0, "final sample size/events must be positive");
        Ok((n as f64).sqrt())
    };
    let check_p = |p: f64, what: &str| -> Result<f64> {
        require!(p > 0.0 && p < 1.0, "{what} must lie in (0,1), got {p}");
        Ok(p)
    };
    let k = match design.projection {
        Projection::ContinuousOneArm { big_n, sd_exp } => {
            require!(sd_exp > 0.0, "projected SD must be positive, got {sd_exp}");
            sd_exp / check_n(big_n)?
        }
        Projection::ContinuousTwoArm { big_n, allocation, sd_exp } => {
            require!(sd_exp > 0.0, "projected pooled SD must be positive, got {sd_exp}");
            allocation.r() * sd_exp / check_n(big_n)?
        }
        Projection::BinaryOneArm { big_n, prop_exp } => {
            let p = check_p(prop_exp, "projected proportion")?;
            (p * (1.0 - p)).sqrt() / check_n(big_n)?
        }
        Projection::BinaryTwoArm { big_n, allocation, prop_trt_exp, prop_con_exp } => {
            let pt = check_p(prop_trt_exp, "projected treatment proportion")?;
            let pc = check_p(prop_con_exp, "projected control proportion")?;
            allocation.r() * binary_pooled_sd(allocation, pt, pc) / check_n(big_n)?
        }
        Projection::SurvivalOneArm { big_d, xi } => {
            require!(xi > 0.0, "variance factor xi must be positive, got {xi}");
            xi / check_n(big_d)?
        }
        Projection::SurvivalTwoArm { big_d, allocation } => allocation.r() / check_n(big_d)?,
        Projection::StandardError { se_exp, .. } => {
            require!(se_exp > 0.0 && se_exp.is_finite(), "projected SE must be positive, got {se_exp}");
            se_exp
        }
    };
    Ok(k)
}

/// Result of a design-stage PoS calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosResult {
    pub pos: f64,
    pub k_tilde: f64,
    pub gamma: f64,
    pub theta0: f64,
    pub sigma0: f64,
}

/// Probability of success at the design stage; clinical `γ` is resolved against `k̃`.
pub fn design_pos(design: &DesignSpec) -> Result<PosResult> {
    let kind = design.projection.kind();
    let scale = kind.effect_scale(design.null_value, design.alternative)?;
    let k_tilde = design_k(design)?;
    let prior = prior_to_theta(kind, design.null_value, &design.prior, design.alternative)?;
    let gamma = interim::resolve_gamma(design.criterion.to_success(&scale)?, k_tilde)?;
    let p = interim::pos(&prior, k_tilde, gamma)?;
    Ok(PosResult {
        pos: p.value(),
        k_tilde,
        gamma: gamma.value(),
        theta0: prior.theta0,
        sigma0: prior.sigma0,
    })
}

/// All interim measures computed from one `(θ̂, k, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResultBundle {
    pub theta_hat: f64,
    pub k: f64,
    pub t: f64,
    pub z: f64,
    pub gamma: f64,
    pub psi: Option<f64>,
    pub theta_prime: Option<f64>,
    pub cp_trend: f64,
    pub cp_specified: Option<f64>,
    pub ppos_no_prior: f64,
    pub ppos_with_prior: Option<f64>,
}

/// Outcome of a trial whose data are complete (`t = 1`): every success
/// measure collapses to the indicator `θ̂ > kγ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FinalDecision {
    pub theta_hat: f64,
    pub k: f64,
    pub z: f64,
    pub gamma: f64,
    pub success: bool,
}

pub fn final_decision(spec: &EndpointSpec, alternative: Alternative, criterion: &Criterion) -> Result<FinalDecision> {
    let (k, t) = spec.k_and_t_inner(true)?;
    require!(t == 1.0, "final decision needs complete data, got information fraction {t}");
    let scale = spec.scale(alternative)?;
    let theta_hat = scale.to_theta(spec.estimate())?;
    let gamma = interim::resolve_gamma(criterion.to_success(&scale)?, k)?.value();
    Ok(FinalDecision { theta_hat, k, z: theta_hat / k, gamma, success: theta_hat / k > gamma })
}

/// Computes CP (trend and, when `projected` is given, specified) and PPoS
/// (without and, when `prior` is given, with the prior).
pub fn evaluate(
    spec: &EndpointSpec,
    alternative: Alternative,
    criterion: &Criterion,
    prior: Option<&NaturalPrior>,
    projected: Option<f64>,
) -> Result<ResultBundle> {
    let scale = spec.scale(alternative)?;
    let interim = to_interim(spec, alternative)?;
    let gamma = interim::resolve_gamma(criterion.to_success(&scale)?, interim.k())?;
    let theta_prior = prior
        .map(|p| prior_to_theta(spec.kind(), spec.null_value(), p, alternative))
        .transpose()?;
    let theta_prime = projected.map(|x| scale.to_theta(x)).transpose()?;
    Ok(bundle(&interim, gamma, theta_prior.as_ref(), theta_prime))
}

fn bundle(
    interim: &InterimSummary,
    gamma: GammaValue,
    prior: Option<&NormalPrior>,
    theta_prime: Option<f64>,
) -> ResultBundle {
    ResultBundle {
        theta_hat: interim.theta_hat(),
        k: interim.k(),
        t: interim.t(),
        z: interim.z(),
        gamma: gamma.value(),
        psi: prior.map(|p| interim::psi(interim.k(), interim.t(), p).expect("validated interim")),
        theta_prime,
        cp_trend: interim::cp_interim_trend(interim, gamma).value(),
        cp_specified: theta_prime.map(|tp| interim::cp_specified(interim, tp, gamma).value()),
        ppos_no_prior: interim::ppos_no_prior(interim, gamma).value(),
        ppos_with_prior: prior.map(|p| interim::ppos_with_prior(interim, p, gamma).value()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub estimate: f64,
    pub cp_trend: f64,
    pub ppos_no_prior: f64,
    pub ppos_with_prior: Option<f64>,
}

/// CP/PPoS as functions of a hypothetical interim estimate, holding `k`, `t`
/// and `γ` at their observed-data values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveTable {
    pub observed: f64,
    /// Interim estimate at which CP = PPoS = 0.5.
    pub crossing: f64,
    pub power_reference: f64,
    pub gamma: f64,
    pub rows: Vec<CurveRow>,
}

pub fn curve(
    spec: &EndpointSpec,
    alternative: Alternative,
    criterion: &Criterion,
    prior: Option<&NaturalPrior>,
    grid: &[f64],
) -> Result<CurveTable> {
    require!(!grid.is_empty(), "sweep grid must be nonempty");
    let scale = spec.scale(alternative)?;
    let base = to_interim(spec, alternative)?;
    let gamma = interim::resolve_gamma(criterion.to_success(&scale)?, base.k())?;
    let theta_prior = prior
        .map(|p| prior_to_theta(spec.kind(), spec.null_value(), p, alternative))
        .transpose()?;
    let rows = grid
        .par_iter()
        .map(|&x| -> Result<CurveRow> {
            let s = base.with_theta_hat(scale.to_theta(x)?)?;
            Ok(CurveRow {
                estimate: x,
                cp_trend: interim::cp_interim_trend(&s, gamma).value(),
                ppos_no_prior: interim::ppos_no_prior(&s, gamma).value(),
                ppos_with_prior: theta_prior
                    .as_ref()
                    .map(|p| interim::ppos_with_prior(&s, p, gamma).value()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveTable {
        observed: spec.estimate(),
        crossing: scale.to_natural(interim::crossing_theta_hat(base.k(), gamma)),
        power_reference: 0.5,
        gamma: gamma.value(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityRow {
    pub x: f64,
    pub density_no_prior: f64,
    pub density_prior: Option<f64>,
}

/// Predictive density of the final effect estimate on the natural scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityTable {
    pub observed: f64,
    /// Natural-scale final estimate separating success from failure.
    pub success_cutoff: f64,
    pub rows: Vec<DensityRow>,
}

/// Tabulates the predictive densities of the final estimate, with and without
/// the prior, on `points` abscissae spanning ±8 SD of the wider distribution.
pub fn predictive_density(
    spec: &EndpointSpec,
    alternative: Alternative,
    criterion: &Criterion,
    prior: Option<&NaturalPrior>,
    points: usize,
) -> Result<DensityTable> {
    require!(points >= 3, "density table needs at least 3 points, got {points}");
    let scale = spec.scale(alternative)?;
    let s = to_interim(spec, alternative)?;
    let gamma = interim::resolve_gamma(criterion.to_success(&scale)?, s.k())?;
    let theta_prior = prior
        .map(|p| prior_to_theta(spec.kind(), spec.null_value(), p, alternative))
        .transpose()?;
    let no_prior = interim::predictive_final(&s, None);
    let with_prior = theta_prior.as_ref().map(|p| interim::predictive_final(&s, Some(p)));
    let dists: Vec<NormalDist> = std::iter::once(no_prior).chain(with_prior).collect();
    let lo = dists.iter().map(|d| d.mean - 8.0 * d.sd).fold(f64::INFINITY, f64::min);
    let hi = dists.iter().map(|d| d.mean + 8.0 * d.sd).fold(f64::NEG_INFINITY, f64::max);
    let step = (hi - lo) / (points - 1) as f64;
    let mut rows: Vec<DensityRow> = (0..points)
        .map(|i| {
            let theta = lo + step * i as f64;
            let x = scale.to_natural(theta);
            let jac = scale.jacobian(x);
            DensityRow {
                x,
                density_no_prior: no_prior.pdf(theta) * jac,
                density_prior: with_prior.map(|d| d.pdf(theta) * jac),
            }
        })
        .collect();
    if alternative == Alternative::Less {
        rows.reverse();
    }
    Ok(DensityTable {
        observed: spec.estimate(),
        success_cutoff: scale.to_natural(interim::final_cutoff(&s, gamma)),
        rows,
    })
}

/// Trapezoid rule over `(x, y)` pairs.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Probability wrapper used by callers that want the checked newtype.
pub fn as_probability(x: f64) -> Result<Probability> {
    Probability::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex2_counts() -> EndpointSpec {
        EndpointSpec::BinaryTwoArm(BinaryTwoArm {
            null_value: 0.0,
            interim: BinaryTwoArmInterim::Counts {
                prop_trt: 0.379,
                n_trt: 105,
                prop_con: 0.222,
                n_con: 53,
            },
            big_n: 210,
            allocation: AllocationRatio::two_arm(2.0).unwrap(),
        })
    }

    fn ex3() -> EndpointSpec {
        EndpointSpec::SurvivalTwoArm(SurvivalTwoArm {
            null_value: 1.0,
            hr_ia: 0.82,
            d: 346,
            big_d: 441,
            allocation: AllocationRatio::two_arm(1.0).unwrap(),
        })
    }

    #[test]
    fn allocation_ratio_factors() {
        assert_eq!(AllocationRatio::two_arm(1.0).unwrap().r2(), 4.0);
        assert_eq!(AllocationRatio::two_arm(2.0).unwrap().r2(), 4.5);
        assert_eq!(AllocationRatio::SingleArm.r(), 1.0);
        assert!(AllocationRatio::two_arm(0.0).is_err());
        assert!(AllocationRatio::two_arm(-1.0).is_err());
    }

    #[test]
    fn to_interim_binary_two_arm_counts() {
        let s = to_interim(&ex2_counts(), Alternative::Greater).unwrap();
        assert!((s.theta_hat() - 0.157).abs() < 1e-12);
        assert!((s.t() - 158.0 / 210.0).abs() < 1e-15);
        assert!((s.k() - 0.064).abs() < 5e-4);
        assert!((s.se() - 0.074).abs() < 5e-4);
    }

    #[test]
    fn to_interim_survival_two_arm() {
        let s = to_interim(&ex3(), Alternative::Less).unwrap();
        assert!((s.theta_hat() - 0.1985).abs() < 1e-4);
        assert!((s.k() - 0.0952).abs() < 1e-4);
        assert!((s.t() - 0.7846).abs() < 1e-4);
    }

    #[test]
    fn null_interim_estimate_gives_zero_z() {
        let spec = EndpointSpec::ContinuousOneArm(ContinuousOneArm {
            null_value: 3.0,
            mean_ia: 3.0,
            sd_ia: 1.2,
            n: 20,
            big_n: 50,
        });
        let s = to_interim(&spec, Alternative::Greater).unwrap();
        assert_eq!(s.theta_hat(), 0.0);
        assert_eq!(s.z(), 0.0);
    }

    #[test]
    fn to_interim_errors() {
        let bin = |p: f64| {
            EndpointSpec::BinaryOneArm(BinaryOneArm { null_value: 0.2, prop_ia: p, n: 10, big_n: 40 })
        };
        assert!(matches!(to_interim(&bin(0.0), Alternative::Greater), Err(Error::DegenerateVariance(_))));
        assert!(matches!(to_interim(&bin(1.0), Alternative::Greater), Err(Error::DegenerateVariance(_))));
        let surv = |m: f64| {
            EndpointSpec::SurvivalOneArm(SurvivalOneArm { null_value: 6.0, median_ia: m, d: 10, big_d: 40, xi: 1.0 })
        };
        assert!(matches!(to_interim(&surv(0.0), Alternative::Greater), Err(Error::Domain(_))));
        assert!(matches!(to_interim(&surv(-2.0), Alternative::Greater), Err(Error::Domain(_))));
        let late = EndpointSpec::SurvivalOneArm(SurvivalOneArm { null_value: 6.0, median_ia: 7.0, d: 40, big_d: 40, xi: 1.0 });
        assert!(to_interim(&late, Alternative::Greater).is_err());
    }

    #[test]
    fn theta_prime_examples() {
        let tp = theta_prime(EndpointKind::SurvivalTwoArm, 1.0, 0.75, Alternative::Less).unwrap();
        assert!((tp - (1.0f64 / 0.75).ln()).abs() < 1e-15);
        assert!((tp - 0.2877).abs() < 1e-4);
        assert_eq!(theta_prime(EndpointKind::SurvivalTwoArm, 0.8, 0.8, Alternative::Less).unwrap(), 0.0);
        let tp = theta_prime(EndpointKind::ContinuousTwoArm, -0.05, -0.030, Alternative::Greater).unwrap();
        assert!((tp - 0.020).abs() < 1e-15);
        assert!(theta_prime(EndpointKind::SurvivalOneArm, 6.0, 0.0, Alternative::Greater).is_err());
    }

    #[test]
    fn prior_to_theta_examples() {
        let p = prior_to_theta(
            EndpointKind::SurvivalTwoArm,
            1.0,
            &NaturalPrior::from_prior_events(0.71, 133.0, 2.0).unwrap(),
            Alternative::Less,
        )
        .unwrap();
        assert!((p.theta0 - 0.3425).abs() < 1e-4);
        assert!((p.sigma0 - 0.1734).abs() < 1e-4);
        let p = prior_to_theta(
            EndpointKind::ContinuousTwoArm,
            -0.05,
            &NaturalPrior { mean: 0.0, sd: 0.02 },
            Alternative::Greater,
        )
        .unwrap();
        assert!((p.theta0 - 0.05).abs() < 1e-15);
        assert_eq!(p.sigma0, 0.02);
        let p = prior_to_theta(EndpointKind::BinaryOneArm, 0.3, &NaturalPrior { mean: 0.3, sd: 0.0 }, Alternative::Greater).unwrap();
        assert_eq!((p.theta0, p.sigma0), (0.0, 0.0));
        assert!(prior_to_theta(EndpointKind::SurvivalOneArm, 6.0, &NaturalPrior { mean: 0.0, sd: 0.1 }, Alternative::Greater).is_err());
    }

    #[test]
    fn design_k_examples() {
        let allocation = AllocationRatio::two_arm(2.0).unwrap();
        let design = DesignSpec {
            projection: Projection::BinaryTwoArm { big_n: 210, allocation, prop_trt_exp: 0.30, prop_con_exp: 0.10 },
            null_value: 0.0,
            alternative: Alternative::Greater,
            prior: NaturalPrior { mean: 0.2, sd: 0.06f64.sqrt() },
            criterion: Criterion::Trial { z_crit_final: 2.012 },
        };
        assert!((binary_pooled_sd(allocation, 0.3, 0.1) - 0.361).abs() < 5e-4);
        assert!((design_k(&design).unwrap() - 0.053).abs() < 5e-4);
        let surv = DesignSpec {
            projection: Projection::SurvivalTwoArm { big_d: 441, allocation: AllocationRatio::two_arm(1.0).unwrap() },
            ..design
        };
        assert!((design_k(&surv).unwrap() - 0.0952).abs() < 1e-4);
        let one = DesignSpec { projection: Projection::SurvivalOneArm { big_d: 100, xi: 1.0 }, null_value: 6.0, ..design };
        assert!((design_k(&one).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn xi_factor_examples() {
        assert_eq!(xi_factor(XiEstimator::MleExponential).unwrap(), 1.0);
        assert!((xi_factor(XiEstimator::SampleMedianExponential).unwrap() - 1.442695).abs() < 1e-6);
        assert!((xi_factor(XiEstimator::SampleMedianWeibull { shape: 2.0 }).unwrap() - 0.721348).abs() < 1e-6);
        assert!(xi_factor(XiEstimator::SampleMedianWeibull { shape: 0.0 }).is_err());
        assert!(xi_factor(XiEstimator::Custom { value: -1.0 }).is_err());
        assert_eq!(xi_factor(XiEstimator::Custom { value: 1.3 }).unwrap(), 1.3);
    }

    #[test]
    fn design_pos_point_prior_at_null() {
        let design = DesignSpec {
            projection: Projection::ContinuousOneArm { big_n: 100, sd_exp: 1.0 },
            null_value: 2.0,
            alternative: Alternative::Greater,
            prior: NaturalPrior { mean: 2.0, sd: 0.0 },
            criterion: Criterion::Trial { z_crit_final: 0.0 },
        };
        assert!((design_pos(&design).unwrap().pos - 0.5).abs() < 1e-15);
    }

    #[test]
    fn null_estimate_bundle_below_half() {
        let spec = EndpointSpec::ContinuousTwoArm(ContinuousTwoArm {
            null_value: 0.0,
            meandiff_ia: 0.0,
            sd_ia: 1.0,
            n: 60,
            big_n: 200,
            allocation: AllocationRatio::two_arm(1.0).unwrap(),
        });
        let b = evaluate(&spec, Alternative::Greater, &Criterion::Trial { z_crit_final: 1.96 }, None, None).unwrap();
        assert!(b.cp_trend < 0.5 && b.ppos_no_prior < 0.5);
    }

    #[test]
    fn curve_rejects_empty_grid() {
        let c = Criterion::Trial { z_crit_final: 2.012 };
        assert!(curve(&ex3(), Alternative::Less, &c, None, &[]).is_err());
    }

    #[test]
    fn curve_at_crossing_is_half() {
        let c = Criterion::Trial { z_crit_final: 2.012 };
        let t = curve(&ex3(), Alternative::Less, &c, None, &[0.8]).unwrap();
        let at = curve(&ex3(), Alternative::Less, &c, None, &[t.crossing]).unwrap();
        assert!((at.rows[0].cp_trend - 0.5).abs() < 1e-12);
        assert!((at.rows[0].ppos_no_prior - 0.5).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        let c = Criterion::Trial { z_crit_final: 2.012 };
        let prior = NaturalPrior::from_prior_events(0.71, 133.0, 2.0).unwrap();
        let d = predictive_density(&ex3(), Alternative::Less, &c, Some(&prior), 4001).unwrap();
        let xs: Vec<f64> = d.rows.iter().map(|r| r.x).collect();
        let a: Vec<f64> = d.rows.iter().map(|r| r.density_no_prior).collect();
        let b: Vec<f64> = d.rows.iter().map(|r| r.density_prior.unwrap()).collect();
        assert!((trapezoid(&xs, &a) - 1.0).abs() < 1e-6);
        assert!((trapezoid(&xs, &b) - 1.0).abs() < 1e-6);
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
    }
}
