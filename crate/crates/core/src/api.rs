//! Flat, R-style request schema shared by the CLI (`--config` files and flags)
//! and the HTTP service, and the versioned response envelope.
//!
//! Keys follow the reference R functions with dots replaced by underscores
//! (`null.value` → `null_value`, `Z.crit.final` → `z_crit_final`, `D.prior` →
//! `D_prior`). Responses are serialized with sorted keys so they can be
//! compared byte-for-byte.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::betabinom::{self, ArmInterim, BetaPrior, SuccessIndicator};
use crate::endpoints::{
    self, AllocationRatio, BinaryOneArm, BinaryTwoArm, BinaryTwoArmInterim, ContinuousOneArm,
    ContinuousTwoArm, Criterion, DesignSpec, EndpointKind, EndpointSpec, NaturalPrior, Projection,
    SurvivalOneArm, SurvivalTwoArm,
};
use crate::error::Error;
use crate::mcval::{self, McMode, SimConfig};
use crate::numerics::{phi, Alternative, INV_LN_2};

pub const SCHEMA_VERSION: u32 = 1;

/// Default cap on beta-binomial indicator evaluations for untrusted callers.
pub const DEFAULT_BETABINOM_CAP: u64 = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "clap", derive(clap::ValueEnum))]
#[serde(rename_all = "lowercase")]
pub enum EndpointType {
    Cont,
    Bin,
    Surv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[cfg_attr(feature = "clap", derive(clap::ValueEnum))]
#[serde(rename_all = "lowercase")]
pub enum SuccCrit {
    #[default]
    Trial,
    Clinical,
}

/// Final test behind the beta-binomial indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[cfg_attr(feature = "clap", derive(clap::ValueEnum))]
#[serde(rename_all = "lowercase")]
pub enum BbTest {
    #[default]
    Z,
    Fisher,
    /// One-arm exact binomial test against `null_value`.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "clap", derive(clap::ValueEnum), value(rename_all = "snake_case"))]
#[serde(rename_all = "snake_case")]
pub enum McKind {
    CpSpecified,
    CpTrend,
    Ppos,
    Betabinom,
}

/// Every input any command accepts. Unused keys are ignored by a command;
/// unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "clap", derive(clap::Args))]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Schema version (only 1 is understood).
    #[cfg_attr(feature = "clap", arg(long, hide = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<u32>,

    /// Endpoint type.
    #[cfg_attr(feature = "clap", arg(long = "type", value_enum))]
    #[serde(rename = "type", skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointType>,
    /// Number of arms (1 or 2).
    #[cfg_attr(feature = "clap", arg(long))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nsamples: Option<u8>,
    /// Value of the effect under the null hypothesis (mean, difference, proportion, median or HR).
    #[cfg_attr(feature = "clap", arg(long = "null-value", alias = "null_value", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_value: Option<f64>,
    /// Direction of the alternative hypothesis.
    #[cfg_attr(feature = "clap", arg(long, value_enum))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alternative: Option<Alternative>,

    /// Final sample size.
    #[cfg_attr(feature = "clap", arg(long = "N"))]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<u64>,
    /// Interim sample size.
    #[cfg_attr(feature = "clap", arg(long = "n"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Final number of events.
    #[cfg_attr(feature = "clap", arg(long = "D"))]
    #[serde(rename = "D", skip_serializing_if = "Option::is_none")]
    pub big_d: Option<u64>,
    /// Interim number of events.
    #[cfg_attr(feature = "clap", arg(long = "d"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    /// Allocation ratio a:1 (treatment:control).
    #[cfg_attr(feature = "clap", arg(long = "a"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,

    /// "trial" (Z test) or "clinical" (estimate beyond a threshold).
    #[cfg_attr(feature = "clap", arg(long = "succ-crit", alias = "succ_crit", value_enum))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub succ_crit: Option<SuccCrit>,
    /// Critical value of the final Z test.
    #[cfg_attr(feature = "clap", arg(long = "z-crit-final", alias = "z_crit_final", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_crit_final: Option<f64>,
    /// Clinically meaningful value for clinical success.
    #[cfg_attr(feature = "clap", arg(long = "clin-succ-threshold", alias = "clin_succ_threshold", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clin_succ_threshold: Option<f64>,

    #[cfg_attr(feature = "clap", arg(long = "mean-ia", alias = "mean_ia", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ia: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "meandiff-ia", alias = "meandiff_ia", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meandiff_ia: Option<f64>,
    /// Interim SD (pooled for two arms).
    #[cfg_attr(feature = "clap", arg(long = "sd-ia", alias = "sd_ia"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_ia: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "prop-ia", alias = "prop_ia"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop_ia: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "propdiff-ia", alias = "propdiff_ia", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propdiff_ia: Option<f64>,
    /// Interim SE of the difference in proportions.
    #[cfg_attr(feature = "clap", arg(long = "stderr-ia", alias = "stderr_ia"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr_ia: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "prop-trt-ia", alias = "prop_trt_ia"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop_trt_ia: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "prop-con-ia", alias = "prop_con_ia"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop_con_ia: Option<f64>,
    /// Interim subjects in the treatment arm.
    #[cfg_attr(feature = "clap", arg(long = "n-trt", alias = "n_trt"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trt: Option<u64>,
    /// Interim subjects in the control arm.
    #[cfg_attr(feature = "clap", arg(long = "n-con", alias = "n_con"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_con: Option<u64>,
    #[cfg_attr(feature = "clap", arg(long = "median-ia", alias = "median_ia"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_ia: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "hr-ia", alias = "hr_ia"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_ia: Option<f64>,
    /// Variance factor of the single-arm log median (default 1/log 2, the KM median).
    #[cfg_attr(feature = "clap", arg(long))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,

    #[cfg_attr(feature = "clap", arg(long = "mean-exp", alias = "mean_exp", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_exp: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "meandiff-exp", alias = "meandiff_exp", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meandiff_exp: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "prop-exp", alias = "prop_exp"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop_exp: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "propdiff-exp", alias = "propdiff_exp", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propdiff_exp: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "median-exp", alias = "median_exp"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_exp: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "hr-exp", alias = "hr_exp"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_exp: Option<f64>,
    /// Projected SD at the final analysis (design stage).
    #[cfg_attr(feature = "clap", arg(long = "sd-exp", alias = "sd_exp"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_exp: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "prop-trt-exp", alias = "prop_trt_exp"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop_trt_exp: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "prop-con-exp", alias = "prop_con_exp"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop_con_exp: Option<f64>,
    /// Projected SE of the final estimate; overrides the other design inputs.
    #[cfg_attr(feature = "clap", arg(long = "se-exp", alias = "se_exp"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub se_exp: Option<f64>,

    #[cfg_attr(feature = "clap", arg(long = "mean-prior", alias = "mean_prior", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_prior: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "meandiff-prior", alias = "meandiff_prior", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meandiff_prior: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "prop-prior", alias = "prop_prior"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prop_prior: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "propdiff-prior", alias = "propdiff_prior", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propdiff_prior: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "median-prior", alias = "median_prior"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_prior: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "hr-prior", alias = "hr_prior"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hr_prior: Option<f64>,
    /// Prior SD (of the log median / log HR for survival).
    #[cfg_attr(feature = "clap", arg(long = "sd-prior", alias = "sd_prior"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd_prior: Option<f64>,
    /// Prior information expressed as a number of events (survival).
    #[cfg_attr(feature = "clap", arg(long = "D-prior", alias = "D_prior"))]
    #[serde(rename = "D_prior", skip_serializing_if = "Option::is_none")]
    pub d_prior: Option<f64>,

    /// Lower end of the interim-estimate sweep.
    #[cfg_attr(feature = "clap", arg(long = "grid-from", alias = "grid_from", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_from: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "grid-to", alias = "grid_to", allow_negative_numbers = true))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_to: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "grid-points", alias = "grid_points"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[cfg_attr(feature = "clap", arg(long = "density-points", alias = "density_points"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_points: Option<usize>,

    /// Final subjects, treatment arm (beta-binomial).
    #[cfg_attr(feature = "clap", arg(long = "N-trt", alias = "N_trt"))]
    #[serde(rename = "N_trt", skip_serializing_if = "Option::is_none")]
    pub big_n_trt: Option<u64>,
    #[cfg_attr(feature = "clap", arg(long = "N-con", alias = "N_con"))]
    #[serde(rename = "N_con", skip_serializing_if = "Option::is_none")]
    pub big_n_con: Option<u64>,
    /// Interim responders, treatment arm.
    #[cfg_attr(feature = "clap", arg(long = "x-trt", alias = "x_trt"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_trt: Option<u64>,
    #[cfg_attr(feature = "clap", arg(long = "x-con", alias = "x_con"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_con: Option<u64>,
    /// Interim responders (single arm).
    #[cfg_attr(feature = "clap", arg(long = "x"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<u64>,
    /// Beta prior of the treatment (or single) arm.
    #[cfg_attr(feature = "clap", arg(long = "a-trt", alias = "a_trt"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_trt: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "b-trt", alias = "b_trt"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_trt: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "a-con", alias = "a_con"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_con: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "b-con", alias = "b_con"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b_con: Option<f64>,
    /// Final test of the beta-binomial indicator.
    #[cfg_attr(feature = "clap", arg(long, value_enum))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<BbTest>,
    /// Pooled SE in the Z test (default true).
    #[cfg_attr(feature = "clap", arg(long))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled: Option<bool>,
    /// Continuity correction in the Z test (default true).
    #[cfg_attr(feature = "clap", arg(long))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub continuity: Option<bool>,

    /// Simulation mode.
    #[cfg_attr(feature = "clap", arg(long, value_enum))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<McKind>,
    #[cfg_attr(feature = "clap", arg(long))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sims: Option<u64>,
    #[cfg_attr(feature = "clap", arg(long))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// True median survival for the SE study.
    #[cfg_attr(feature = "clap", arg(long))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub med: Option<f64>,
    #[cfg_attr(feature = "clap", arg(long = "ltfu-rate", alias = "ltfu_rate"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ltfu_rate: Option<f64>,
    /// Replicates for the SE study.
    #[cfg_attr(feature = "clap", arg(long = "M"))]
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u64>,
    /// Run the whole D × N/D grid of the SE study.
    #[cfg_attr(feature = "clap", arg(long, num_args = 0..=1, default_missing_value = "true"))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<bool>,
}

/// Failure of a request: malformed input (schema) or a computation error.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApiError {
    #[error("invalid request: {0}")]
    Schema(String),
    #[error(transparent)]
    Compute(#[from] Error),
}

impl ApiError {
    pub fn code(&self) -> &'static str {
        match self {
            ApiError::Schema(_) => "invalid_request",
            ApiError::Compute(e) => e.code(),
        }
    }

    pub fn detail(&self) -> &str {
        match self {
            ApiError::Schema(m) => m,
            ApiError::Compute(e) => e.detail(),
        }
    }

    /// Machine-readable error body.
    pub fn to_json(&self) -> Value {
        json!({ "v": SCHEMA_VERSION, "error": { "code": self.code(), "detail": self.detail() } })
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn missing(key: &str, why: &str) -> ApiError {
    ApiError::Schema(format!("missing \"{key}\" ({why})"))
}

fn need<T: Copy>(v: Option<T>, key: &str, why: &str) -> ApiResult<T> {
    v.ok_or_else(|| missing(key, why))
}

impl Params {
    /// Parses a request object, checking the schema version.
    pub fn from_json(value: Value) -> ApiResult<Self> {
        let p: Params = serde_json::from_value(value).map_err(|e| ApiError::Schema(e.to_string()))?;
        p.check_version()?;
        Ok(p)
    }

    pub fn check_version(&self) -> ApiResult<()> {
        match self.v {
            None | Some(SCHEMA_VERSION) => Ok(()),
            Some(other) => Err(ApiError::Schema(format!(
                "unsupported schema version {other}; this build understands v{SCHEMA_VERSION}"
            ))),
        }
    }

    /// Values set in `overrides` replace those in `self`.
    pub fn merged(&self, overrides: &Params) -> ApiResult<Params> {
        let mut base = match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m,
            _ => Map::new(),
        };
        if let Ok(Value::Object(over)) = serde_json::to_value(overrides) {
            base.extend(over);
        }
        Params::from_json(Value::Object(base))
    }

    fn alternative(&self) -> Alternative {
        self.alternative.unwrap_or_default()
    }

    fn kind(&self) -> ApiResult<EndpointKind> {
        let t = need(self.endpoint, "type", "cont, bin or surv")?;
        let arms = self.nsamples.unwrap_or(2);
        Ok(match (t, arms) {
            (EndpointType::Cont, 1) => EndpointKind::ContinuousOneArm,
            (EndpointType::Cont, 2) => EndpointKind::ContinuousTwoArm,
            (EndpointType::Bin, 1) => EndpointKind::BinaryOneArm,
            (EndpointType::Bin, 2) => EndpointKind::BinaryTwoArm,
            (EndpointType::Surv, 1) => EndpointKind::SurvivalOneArm,
            (EndpointType::Surv, 2) => EndpointKind::SurvivalTwoArm,
            (_, k) => return Err(ApiError::Schema(format!("nsamples must be 1 or 2, got {k}"))),
        })
    }

    fn allocation(&self) -> ApiResult<AllocationRatio> {
        Ok(AllocationRatio::two_arm(self.a.unwrap_or(1.0))?)
    }

    fn xi(&self) -> f64 {
        self.xi.unwrap_or(INV_LN_2)
    }

    fn null_value(&self) -> ApiResult<f64> {
        need(self.null_value, "null_value", "effect under the null hypothesis")
    }

    fn criterion(&self) -> ApiResult<Criterion> {
        Ok(match self.succ_crit.unwrap_or_default() {
            SuccCrit::Trial => Criterion::Trial {
                z_crit_final: self.z_crit_final.unwrap_or(1.96),
            },
            SuccCrit::Clinical => Criterion::Clinical {
                clin_succ_threshold: need(self.clin_succ_threshold, "clin_succ_threshold", "required for clinical success")?,
            },
        })
    }

    /// Interim data of the selected endpoint cell.
    pub fn endpoint_spec(&self) -> ApiResult<EndpointSpec> {
        let null_value = self.null_value()?;
        let big_n = || need(self.big_n, "N", "final sample size");
        let n = || need(self.n, "n", "interim sample size");
        let big_d = || need(self.big_d, "D", "final number of events");
        let d = || need(self.d, "d", "interim number of events");
        Ok(match self.kind()? {
            EndpointKind::ContinuousOneArm => EndpointSpec::ContinuousOneArm(ContinuousOneArm {
                null_value,
                mean_ia: need(self.mean_ia, "mean_ia", "interim mean")?,
                sd_ia: need(self.sd_ia, "sd_ia", "interim SD")?,
                n: n()?,
                big_n: big_n()?,
            }),
            EndpointKind::ContinuousTwoArm => EndpointSpec::ContinuousTwoArm(ContinuousTwoArm {
                null_value,
                meandiff_ia: need(self.meandiff_ia, "meandiff_ia", "interim mean difference")?,
                sd_ia: need(self.sd_ia, "sd_ia", "interim pooled SD")?,
                n: n()?,
                big_n: big_n()?,
                allocation: self.allocation()?,
            }),
            EndpointKind::BinaryOneArm => EndpointSpec::BinaryOneArm(BinaryOneArm {
                null_value,
                prop_ia: need(self.prop_ia, "prop_ia", "interim proportion")?,
                n: n()?,
                big_n: big_n()?,
            }),
            EndpointKind::BinaryTwoArm => {
                let interim = match (self.propdiff_ia, self.stderr_ia) {
                    (Some(propdiff), Some(stderr)) => BinaryTwoArmInterim::Summary {
                        propdiff,
                        stderr,
                        n: n()?,
                    },
                    _ => BinaryTwoArmInterim::Counts {
                        prop_trt: need(self.prop_trt_ia, "prop_trt_ia", "or give propdiff_ia and stderr_ia")?,
                        n_trt: need(self.n_trt, "n_trt", "interim treatment-arm size")?,
                        prop_con: need(self.prop_con_ia, "prop_con_ia", "interim control proportion")?,
                        n_con: need(self.n_con, "n_con", "interim control-arm size")?,
                    },
                };
                EndpointSpec::BinaryTwoArm(BinaryTwoArm {
                    null_value,
                    interim,
                    big_n: big_n()?,
                    allocation: self.allocation()?,
                })
            }
            EndpointKind::SurvivalOneArm => EndpointSpec::SurvivalOneArm(SurvivalOneArm {
                null_value,
                median_ia: need(self.median_ia, "median_ia", "interim median")?,
                d: d()?,
                big_d: big_d()?,
                xi: self.xi(),
            }),
            EndpointKind::SurvivalTwoArm => EndpointSpec::SurvivalTwoArm(SurvivalTwoArm {
                null_value,
                hr_ia: need(self.hr_ia, "hr_ia", "interim hazard ratio")?,
                d: d()?,
                big_d: big_d()?,
                allocation: self.allocation()?,
            }),
        })
    }

    /// Natural-scale projected post-interim effect, if given.
    pub fn projected(&self) -> ApiResult<Option<f64>> {
        Ok(match self.kind()? {
            EndpointKind::ContinuousOneArm => self.mean_exp,
            EndpointKind::ContinuousTwoArm => self.meandiff_exp,
            EndpointKind::BinaryOneArm => self.prop_exp,
            EndpointKind::BinaryTwoArm => self.propdiff_exp,
            EndpointKind::SurvivalOneArm => self.median_exp,
            EndpointKind::SurvivalTwoArm => self.hr_exp,
        })
    }

    /// Prior on the natural scale, if a prior mean is given.
    pub fn prior(&self) -> ApiResult<Option<NaturalPrior>> {
        let kind = self.kind()?;
        let (mean, key) = match kind {
            EndpointKind::ContinuousOneArm => (self.mean_prior, "mean_prior"),
            EndpointKind::ContinuousTwoArm => (self.meandiff_prior, "meandiff_prior"),
            EndpointKind::BinaryOneArm => (self.prop_prior, "prop_prior"),
            EndpointKind::BinaryTwoArm => (self.propdiff_prior, "propdiff_prior"),
            EndpointKind::SurvivalOneArm => (self.median_prior, "median_prior"),
            EndpointKind::SurvivalTwoArm => (self.hr_prior, "hr_prior"),
        };
        let Some(mean) = mean else { return Ok(None) };
        let prior = match (self.sd_prior, self.d_prior) {
            (Some(sd), _) => NaturalPrior { mean, sd },
            (None, Some(events)) if kind.is_log_scale() => {
                let factor = match kind {
                    EndpointKind::SurvivalOneArm => self.xi(),
                    _ => self.allocation()?.r(),
                };
                NaturalPrior::from_prior_events(mean, events, factor)?
            }
            _ => return Err(missing(if kind.is_log_scale() { "sd_prior or D_prior" } else { "sd_prior" }, &format!("spread of the prior given by {key}"))),
        };
        Ok(Some(prior))
    }

    pub fn design(&self) -> ApiResult<DesignSpec> {
        let kind = self.kind()?;
        let projection = if let Some(se_exp) = self.se_exp {
            Projection::StandardError { kind, se_exp }
        } else {
            let big_n = || need(self.big_n, "N", "final sample size");
            match kind {
                EndpointKind::ContinuousOneArm => Projection::ContinuousOneArm {
                    big_n: big_n()?,
                    sd_exp: need(self.sd_exp, "sd_exp", "or give se_exp")?,
                },
                EndpointKind::ContinuousTwoArm => Projection::ContinuousTwoArm {
                    big_n: big_n()?,
                    allocation: self.allocation()?,
                    sd_exp: need(self.sd_exp, "sd_exp", "or give se_exp")?,
                },
                EndpointKind::BinaryOneArm => Projection::BinaryOneArm {
                    big_n: big_n()?,
                    prop_exp: need(self.prop_exp, "prop_exp", "or give se_exp")?,
                },
                EndpointKind::BinaryTwoArm => Projection::BinaryTwoArm {
                    big_n: big_n()?,
                    allocation: self.allocation()?,
                    prop_trt_exp: need(self.prop_trt_exp, "prop_trt_exp", "or give se_exp")?,
                    prop_con_exp: need(self.prop_con_exp, "prop_con_exp", "or give se_exp")?,
                },
                EndpointKind::SurvivalOneArm => Projection::SurvivalOneArm {
                    big_d: need(self.big_d, "D", "final number of events")?,
                    xi: self.xi(),
                },
                EndpointKind::SurvivalTwoArm => Projection::SurvivalTwoArm {
                    big_d: need(self.big_d, "D", "final number of events")?,
                    allocation: self.allocation()?,
                },
            }
        };
        Ok(DesignSpec {
            projection,
            null_value: self.null_value()?,
            alternative: self.alternative(),
            prior: self.prior()?.ok_or_else(|| missing("<endpoint>_prior", "PoS needs a prior mean and spread"))?,
            criterion: self.criterion()?,
        })
    }

    fn indicator(&self, arms: u8) -> ApiResult<SuccessIndicator> {
        let tail = self.alternative();
        if self.succ_crit == Some(SuccCrit::Clinical) {
            return Ok(SuccessIndicator::ClinicalThreshold {
                threshold: need(self.clin_succ_threshold, "clin_succ_threshold", "required for clinical success")?,
                tail,
            });
        }
        let crit = self.z_crit_final.unwrap_or(1.96);
        let level = 1.0 - phi(crit);
        Ok(match self.test.unwrap_or_default() {
            BbTest::Z => SuccessIndicator::ZTest {
                crit,
                tail,
                pooled: self.pooled.unwrap_or(true),
                continuity: self.continuity.unwrap_or(true),
                null_value: match arms {
                    1 => self.null_value()?,
                    _ => self.null_value.unwrap_or(0.0),
                },
            },
            BbTest::Fisher => SuccessIndicator::FisherExact { level, tail },
            BbTest::Exact => SuccessIndicator::ExactBinomial { level, p0: self.null_value()?, tail },
        })
    }

    fn beta(&self, a: Option<f64>, b: Option<f64>) -> ApiResult<BetaPrior> {
        Ok(BetaPrior::new(a.unwrap_or(1.0), b.unwrap_or(1.0))?)
    }
}

/// Versioned response envelope.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Response {
    pub v: u32,
    pub command: String,
    pub result: Value,
    pub internals: Value,
    pub warnings: Vec<String>,
}

impl Response {
    fn new(command: &str, result: Value, internals: Value, warnings: Vec<String>) -> Self {
        Response {
            v: SCHEMA_VERSION,
            command: command.to_string(),
            result: strip_nulls(result),
            internals: strip_nulls(internals),
            warnings,
        }
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("response is plain data")
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn canonical(&self) -> String {
        canonical_json(&self.to_value())
    }
}

/// Pretty-printed JSON with object keys in sorted order and a trailing newline.
pub fn canonical_json(value: &Value) -> String {
    // serde_json's Map is ordered by key unless `preserve_order` is enabled.
    let mut s = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(
            m.into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| (k, strip_nulls(v)))
                .collect(),
        ),
        Value::Array(a) => Value::Array(a.into_iter().map(strip_nulls).collect()),
        other => other,
    }
}

fn near_boundary_warnings(t: f64) -> Vec<String> {
    let mut w = Vec::new();
    if t < 0.05 {
        w.push(format!("information fraction t = {t:.4} is very small; estimates are unstable"));
    }
    if t > 0.95 {
        w.push(format!("information fraction t = {t:.4} is close to 1; CP and PPoS approach 0/1"));
    }
    w
}

/// Design-stage probability of success.
pub fn run_pos(p: &Params) -> ApiResult<Response> {
    let design = p.design()?;
    let r = endpoints::design_pos(&design)?;
    Ok(Response::new(
        "pos",
        json!({ "pos": r.pos }),
        json!({ "k_tilde": r.k_tilde, "gamma": r.gamma, "theta0": r.theta0, "sigma0": r.sigma0 }),
        vec![],
    ))
}

/// Interim CP and PPoS.
pub fn run_succ_ia(p: &Params) -> ApiResult<Response> {
    let spec = p.endpoint_spec()?;
    let prior = p.prior()?;
    let b = endpoints::evaluate(&spec, p.alternative(), &p.criterion()?, prior.as_ref(), p.projected()?)?;
    Ok(Response::new(
        "succ-ia",
        json!({
            "cp_specified": b.cp_specified,
            "cp_trend": b.cp_trend,
            "ppos_with_prior": b.ppos_with_prior,
            "ppos_no_prior": b.ppos_no_prior,
        }),
        json!({
            "theta_hat": b.theta_hat,
            "theta_prime": b.theta_prime,
            "k": b.k,
            "t": b.t,
            "z": b.z,
            "gamma": b.gamma,
            "psi": b.psi,
            "s_n": spec.interim_sd()?,
        }),
        near_boundary_warnings(b.t),
    ))
}

/// Like [`run_succ_ia`], but complete data (`t = 1`) are answered with the
/// final decision instead of a domain error. Every measure is then 0 or 1.
pub fn run_succ_ia_or_final(p: &Params) -> ApiResult<Response> {
    let spec = p.endpoint_spec()?;
    if !spec.data_complete() {
        return run_succ_ia(p);
    }
    let f = endpoints::final_decision(&spec, p.alternative(), &p.criterion()?)?;
    let v = if f.success { 1.0 } else { 0.0 };
    let with_prior = p.prior()?.map(|_| v);
    let specified = p.projected()?.map(|_| v);
    Ok(Response::new(
        "succ-ia",
        json!({
            "cp_specified": specified,
            "cp_trend": v,
            "ppos_with_prior": with_prior,
            "ppos_no_prior": v,
        }),
        json!({ "theta_hat": f.theta_hat, "k": f.k, "t": 1.0, "z": f.z, "gamma": f.gamma }),
        vec!["data are complete (t = 1): all measures equal the final success indicator".into()],
    ))
}

/// Exact beta-binomial PPoS. `cap` bounds the number of indicator evaluations.
pub fn run_betabinom(p: &Params, cap: Option<u64>) -> ApiResult<Response> {
    let arms = p.nsamples.unwrap_or(2);
    let indicator = p.indicator(arms)?;
    let (r, internals) = match arms {
        1 => {
            let arm = ArmInterim::new(
                need(p.n, "n", "interim subjects")?,
                need(p.x, "x", "interim responders")?,
                need(p.big_n, "N", "final subjects")?,
            )?;
            check_cap(arm.remaining() + 1, cap)?;
            let prior = p.beta(p.a_trt, p.b_trt)?;
            let post = betabinom::posterior_beta(prior, arm)?;
            (betabinom::ppos_one_arm(prior, arm, &indicator)?, json!({ "posterior": post }))
        }
        2 => {
            let arm_t = ArmInterim::new(
                need(p.n_trt, "n_trt", "interim treatment subjects")?,
                need(p.x_trt, "x_trt", "interim treatment responders")?,
                need(p.big_n_trt, "N_trt", "final treatment subjects")?,
            )?;
            let arm_c = ArmInterim::new(
                need(p.n_con, "n_con", "interim control subjects")?,
                need(p.x_con, "x_con", "interim control responders")?,
                need(p.big_n_con, "N_con", "final control subjects")?,
            )?;
            check_cap(betabinom::two_arm_cells(&arm_t, &arm_c), cap)?;
            let (pt, pc) = (p.beta(p.a_trt, p.b_trt)?, p.beta(p.a_con, p.b_con)?);
            let internals = json!({
                "posterior_trt": betabinom::posterior_beta(pt, arm_t)?,
                "posterior_con": betabinom::posterior_beta(pc, arm_c)?,
            });
            (betabinom::ppos_two_arm(pt, pc, arm_t, arm_c, &indicator)?, internals)
        }
        k => return Err(ApiError::Schema(format!("nsamples must be 1 or 2, got {k}"))),
    };
    let mut internals = internals;
    internals["cells"] = json!(r.cells);
    internals["fallback_cells"] = json!(r.fallback_cells);
    internals["indicator"] = serde_json::to_value(indicator).expect("plain data");
    let mut warnings = vec![];
    if r.fallback_cells > 0 {
        warnings.push(format!(
            "{} final outcomes had a zero-variance Z statistic and were decided by the exact test (predictive mass {:.3e})",
            r.fallback_cells, r.fallback_mass
        ));
    }
    Ok(Response::new("betabinom", json!({ "ppos": r.ppos }), internals, warnings))
}

fn check_cap(cells: u64, cap: Option<u64>) -> ApiResult<()> {
    match cap {
        Some(c) if cells > c => Err(Error::SizeCap(format!(
            "{cells} indicator evaluations requested, cap is {c}"
        ))
        .into()),
        _ => Ok(()),
    }
}

/// CP/PPoS curves over a sweep of interim estimates plus the predictive densities.
pub fn run_curves(p: &Params) -> ApiResult<Response> {
    let spec = p.endpoint_spec()?;
    let alt = p.alternative();
    let crit = p.criterion()?;
    let prior = p.prior()?;
    let scale = spec.scale(alt)?;
    let s = endpoints::to_interim(&spec, alt)?;
    let points = p.grid_points.unwrap_or(101);
    if points < 2 {
        return Err(ApiError::Schema(format!("grid_points must be at least 2, got {points}")));
    }
    // Default sweep: ±4 interim SEs around the observed effect.
    let half = 4.0 * s.se();
    let lo_default = scale.to_natural(s.theta_hat() - half);
    let hi_default = scale.to_natural(s.theta_hat() + half);
    let lo = p.grid_from.unwrap_or(lo_default.min(hi_default));
    let hi = p.grid_to.unwrap_or(lo_default.max(hi_default));
    let grid: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let curve = endpoints::curve(&spec, alt, &crit, prior.as_ref(), &grid)?;
    let density = endpoints::predictive_density(&spec, alt, &crit, prior.as_ref(), p.density_points.unwrap_or(401))?;
    Ok(Response::new(
        "curves",
        json!({
            "curve": curve.rows,
            "density": density.rows,
            "crossing": curve.crossing,
            "observed": curve.observed,
            "success_cutoff": density.success_cutoff,
            "power_reference": curve.power_reference,
        }),
        json!({ "gamma": curve.gamma, "theta_hat": s.theta_hat(), "k": s.k(), "t": s.t() }),
        near_boundary_warnings(s.t()),
    ))
}

/// Empirical SE of the log KM median, for one configuration or the full grid.
pub fn run_mc_se(p: &Params) -> ApiResult<Response> {
    let med = p.med.unwrap_or(12.0);
    let ltfu = p.ltfu_rate.unwrap_or(0.05);
    let m = p.replicates.unwrap_or(5000);
    let seed = p.seed.unwrap_or(1);
    let rows = if p.grid.unwrap_or(false) {
        mcval::se_grid(&[20, 30, 40, 50, 60], &[1.0, 1.3, 1.5], med, ltfu, m, seed)?
    } else {
        vec![mcval::empirical_se_log_median(&SimConfig {
            n: need(p.big_n, "N", "subjects per trial")?,
            d: need(p.big_d, "D", "target events")?,
            median: med,
            ltfu_rate: ltfu,
            replicates: m,
            seed,
        })?]
    };
    let warnings = rows
        .iter()
        .filter(|r| r.unreliable)
        .map(|r| format!("N={}, D={}: {} of {} medians undefined; SD unreliable", r.n, r.d, r.undefined, r.m))
        .collect();
    Ok(Response::new("mc-se", json!({ "rows": rows }), json!({ "seed": seed }), warnings))
}

/// Simulation estimate of CP, PPoS or the beta-binomial PPoS.
pub fn run_mc_ppos(p: &Params) -> ApiResult<Response> {
    let sims = p.sims.unwrap_or(200_000);
    let seed = p.seed.unwrap_or(1);
    let kind = need(p.mode, "mode", "cp_specified, cp_trend, ppos or betabinom")?;
    let est = if kind == McKind::Betabinom {
        let arms = p.nsamples.unwrap_or(2);
        let indicator = p.indicator(arms)?;
        if arms == 1 {
            let arm = ArmInterim::new(
                need(p.n, "n", "interim subjects")?,
                need(p.x, "x", "interim responders")?,
                need(p.big_n, "N", "final subjects")?,
            )?;
            mcval::mc_ppos_betabinom_one(p.beta(p.a_trt, p.b_trt)?, arm, &indicator, sims, seed)?
        } else {
            let arm_t = ArmInterim::new(
                need(p.n_trt, "n_trt", "interim treatment subjects")?,
                need(p.x_trt, "x_trt", "interim treatment responders")?,
                need(p.big_n_trt, "N_trt", "final treatment subjects")?,
            )?;
            let arm_c = ArmInterim::new(
                need(p.n_con, "n_con", "interim control subjects")?,
                need(p.x_con, "x_con", "interim control responders")?,
                need(p.big_n_con, "N_con", "final control subjects")?,
            )?;
            mcval::mc_ppos_betabinom_two(
                p.beta(p.a_trt, p.b_trt)?,
                p.beta(p.a_con, p.b_con)?,
                arm_t,
                arm_c,
                &indicator,
                sims,
                seed,
            )?
        }
    } else {
        let mode = match kind {
            McKind::CpSpecified => McMode::CpSpecified {
                projected: p.projected()?.ok_or_else(|| missing("<endpoint>_exp", "projected effect for cp_specified"))?,
            },
            McKind::CpTrend => McMode::CpTrend,
            _ => McMode::Ppos { prior: p.prior()? },
        };
        mcval::mc_ppos(&p.endpoint_spec()?, p.alternative(), &p.criterion()?, &mode, sims, seed)?
    };
    Ok(Response::new(
        "mc-ppos",
        json!({ "estimate": est.estimate, "se": est.se }),
        json!({ "sims": est.sims, "seed": est.seed }),
        vec![],
    ))
}
