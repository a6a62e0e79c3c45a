//! Generic conditional power, predictive power and probability of success on
//! the effect scale `θ`, where `H0: θ = 0` is tested against `H1: θ > 0` and
//! the interim estimate `θ̂(t)` has standard error `k / √t`.

use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::numerics::{phi, Probability};

/// Information fractions are clamped to this distance from 0 and 1.
pub const T_EPS: f64 = 1e-9;

/// Interim estimate, final-analysis standard error and information fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterimSummary {
    theta_hat: f64,
    k: f64,
    t: f64,
}

impl InterimSummary {
    pub fn new(theta_hat: f64, k: f64, t: f64) -> Result<Self> {
        require!(theta_hat.is_finite(), "interim estimate must be finite, got {theta_hat}");
        require!(k > 0.0 && k.is_finite(), "k must be positive, got {k}");
        require!(t > 0.0 && t < 1.0, "information fraction t must lie in (0,1), got {t}");
        let t = t.clamp(T_EPS, 1.0 - T_EPS);
        let s = InterimSummary { theta_hat, k, t };
        require!(s.z().is_finite(), "interim Z statistic must be finite");
        Ok(s)
    }

    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `Z(t) = θ̂(t)·√t / k`.
    pub fn z(&self) -> f64 {
        self.theta_hat * self.t.sqrt() / self.k
    }

    /// Standard error of the interim estimate, `k / √t`.
    pub fn se(&self) -> f64 {
        self.k / self.t.sqrt()
    }

    /// Same `k` and `t` with a different interim estimate.
    pub fn with_theta_hat(&self, theta_hat: f64) -> Result<Self> {
        InterimSummary::new(theta_hat, self.k, self.t)
    }
}

/// Normal prior `θ ~ N(theta0, sigma0²)`; `sigma0 = 0` is a point mass and
/// `sigma0 = +inf` is the flat (no-prior) limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub theta0: f64,
    pub sigma0: f64,
}

impl NormalPrior {
    pub fn new(theta0: f64, sigma0: f64) -> Result<Self> {
        require!(theta0.is_finite(), "prior mean must be finite, got {theta0}");
        require!(sigma0 >= 0.0, "prior SD sigma0 must be >= 0, got {sigma0}");
        Ok(NormalPrior { theta0, sigma0 })
    }

    pub fn flat() -> Self {
        NormalPrior {
            theta0: 0.0,
            sigma0: f64::INFINITY,
        }
    }
}

/// Definition of success at the final analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SuccessCriterion {
    /// `Z(1) > c1`.
    Trial { c1: f64 },
    /// `θ̂(1) > theta_min`.
    Clinical { theta_min: f64 },
}

/// Success threshold on the `Z(1)` scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GammaValue(f64);

impl GammaValue {
    pub fn new(gamma: f64) -> Result<Self> {
        require!(gamma.is_finite(), "gamma must be finite, got {gamma}");
        Ok(GammaValue(gamma))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Normal distribution; `sd = 0` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalDist {
    pub mean: f64,
    pub sd: f64,
}

impl NormalDist {
    pub fn pdf(&self, x: f64) -> f64 {
        if self.sd == 0.0 {
            return if x == self.mean { f64::INFINITY } else { 0.0 };
        }
        let z = (x - self.mean) / self.sd;
        crate::numerics::normal_pdf(z) / self.sd
    }

    /// `P(X > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        if self.sd == 0.0 {
            return if self.mean > x { 1.0 } else { 0.0 };
        }
        phi((self.mean - x) / self.sd)
    }
}

/// B-value `B(t) = Z(t)·√t`.
pub fn b_value(z: f64, t: f64) -> Result<f64> {
    require!(t > 0.0 && t <= 1.0, "information fraction t must lie in (0,1], got {t}");
    Ok(z * t.sqrt())
}

/// Resolves the success criterion to a threshold on the `Z(1)` scale.
pub fn resolve_gamma(crit: SuccessCriterion, k: f64) -> Result<GammaValue> {
    require!(k > 0.0 && k.is_finite(), "k must be positive, got {k}");
    match crit {
        SuccessCriterion::Trial { c1 } => GammaValue::new(c1),
        SuccessCriterion::Clinical { theta_min } => GammaValue::new(theta_min / k),
    }
}

/// Share of the posterior carried by the interim data, `σ0² / (σ0² + k²/t)`.
pub fn psi(k: f64, t: f64, prior: &NormalPrior) -> Result<f64> {
    require!(k > 0.0 && k.is_finite(), "k must be positive, got {k}");
    require!(t > 0.0 && t < 1.0, "information fraction t must lie in (0,1), got {t}");
    Ok(psi_unchecked(k, t, prior.sigma0))
}

fn psi_unchecked(k: f64, t: f64, sigma0: f64) -> f64 {
    if sigma0.is_infinite() {
        return 1.0;
    }
    let v0 = sigma0 * sigma0;
    v0 / (v0 + k * k / t)
}

/// Conditional power assuming the post-interim data estimate `θ'`.
///
/// Uses `(t·θ̂ + (1-t)·θ')/k` in place of the printed form that divides by
/// `θ̂(t)`, so a null interim estimate is not a singularity.
pub fn cp_specified(interim: &InterimSummary, theta_prime: f64, gamma: GammaValue) -> Probability {
    let InterimSummary { theta_hat, k, t } = *interim;
    let arg = ((t * theta_hat + (1.0 - t) * theta_prime) / k - gamma.0) / (1.0 - t).sqrt();
    Probability::saturating(phi(arg))
}

/// Argument of `Φ` in the current-trend conditional power.
pub fn cp_trend_argument(interim: &InterimSummary, gamma: GammaValue) -> f64 {
    (interim.z() / interim.t.sqrt() - gamma.0) / (1.0 - interim.t).sqrt()
}

/// Conditional power when the interim trend continues (`θ' = θ̂(t)`).
pub fn cp_interim_trend(interim: &InterimSummary, gamma: GammaValue) -> Probability {
    Probability::saturating(phi(cp_trend_argument(interim, gamma)))
}

/// Predictive power without a prior; its `Φ` argument is the current-trend
/// CP argument scaled by `√t`.
pub fn ppos_no_prior(interim: &InterimSummary, gamma: GammaValue) -> Probability {
    let arg = interim.t.sqrt() * cp_trend_argument(interim, gamma);
    Probability::saturating(phi(arg))
}

/// Predictive power of success given the interim data and a normal prior.
pub fn ppos_with_prior(
    interim: &InterimSummary,
    prior: &NormalPrior,
    gamma: GammaValue,
) -> Probability {
    let InterimSummary { theta_hat, k, t } = *interim;
    let w = psi_unchecked(k, t, prior.sigma0);
    let prior_part = if w == 1.0 { 0.0 } else { (1.0 - w) * prior.theta0 };
    let cutoff = k / (1.0 - t) * (gamma.0 - t.sqrt() * interim.z());
    let num = cutoff - w * theta_hat - prior_part;
    let den = k * (1.0 / (1.0 - t) + w / t).sqrt();
    Probability::saturating(phi(-num / den))
}

/// Design-stage probability of success (assurance) with projected final SE `k_tilde`.
pub fn pos(prior: &NormalPrior, k_tilde: f64, gamma: GammaValue) -> Result<Probability> {
    require!(k_tilde > 0.0 && k_tilde.is_finite(), "k_tilde must be positive, got {k_tilde}");
    require!(prior.sigma0.is_finite(), "PoS requires a proper prior (finite sigma0)");
    let num = prior.theta0 - k_tilde * gamma.0;
    let den = (prior.sigma0 * prior.sigma0 + k_tilde * k_tilde).sqrt();
    Ok(Probability::saturating(phi(num / den)))
}

/// Posterior of `θ` given the interim estimate.
pub fn posterior(interim: &InterimSummary, prior: &NormalPrior) -> NormalDist {
    let InterimSummary { theta_hat, k, t } = *interim;
    let w = psi_unchecked(k, t, prior.sigma0);
    let prior_part = if w == 1.0 { 0.0 } else { (1.0 - w) * prior.theta0 };
    NormalDist {
        mean: w * theta_hat + prior_part,
        sd: (w * k * k / t).sqrt(),
    }
}

/// Predictive distribution of the post-interim estimate `θ̂(1-t)`.
pub fn predictive_post_interim(interim: &InterimSummary, prior: Option<&NormalPrior>) -> NormalDist {
    let InterimSummary { k, t, .. } = *interim;
    let flat = NormalPrior::flat();
    let prior = prior.unwrap_or(&flat);
    let w = psi_unchecked(k, t, prior.sigma0);
    NormalDist {
        mean: posterior(interim, prior).mean,
        sd: k * (1.0 / (1.0 - t) + w / t).sqrt(),
    }
}

/// Predictive distribution of the final estimate `θ̂(1) = t·θ̂(t) + (1-t)·θ̂(1-t)`.
pub fn predictive_final(interim: &InterimSummary, prior: Option<&NormalPrior>) -> NormalDist {
    let t = interim.t;
    let post = predictive_post_interim(interim, prior);
    NormalDist {
        mean: t * interim.theta_hat + (1.0 - t) * post.mean,
        sd: (1.0 - t) * post.sd,
    }
}

/// Success cutoff on the `θ̂(1)` scale: success iff `θ̂(1) > k·γ`.
pub fn final_cutoff(interim: &InterimSummary, gamma: GammaValue) -> f64 {
    interim.k * gamma.0
}

/// Inverts the current-trend CP for the interim estimate at which CP = PPoS = 0.5.
pub fn crossing_theta_hat(k: f64, gamma: GammaValue) -> f64 {
    k * gamma.0
}
