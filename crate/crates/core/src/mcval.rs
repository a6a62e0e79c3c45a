//! Monte Carlo oracle: survival-trial simulation with Kaplan–Meier medians,
//! and simulation-based CP/PPoS estimates that cross-check the closed forms.
//!
//! Randomness comes from ChaCha20 keyed by the user seed, with the replicate
//! (or chunk) index as stream id, so any replicate can be regenerated alone
//! and results do not depend on the rayon schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Binomial, Distribution, Exp, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::io::Write;

use crate::betabinom::{posterior_beta, ArmInterim, BetaPrior, SuccessIndicator};
use crate::endpoints::{
    self, AllocationRatio, BinaryTwoArmInterim, Criterion, EndpointSpec, NaturalPrior,
};
use crate::error::{require, Error, Result};
use crate::interim::{self, NormalPrior};
use crate::numerics::{pairwise_sum, Alternative, INV_LN_2};

/// Deterministic generator for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn dist_err(e: impl std::fmt::Display) -> Error {
    Error::Numerical(format!("sampler construction failed: {e}"))
}

/// Survival-trial simulation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "D")]
    pub d: u64,
    pub median: f64,
    /// Fraction lost to follow-up; 0 disables censoring.
    pub ltfu_rate: f64,
    #[serde(rename = "M")]
    pub replicates: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        require!(self.n >= 1 && self.d >= 1, "N and D must be positive, got N={}, D={}", self.n, self.d);
        require!(self.d <= self.n, "D must not exceed N, got D={}, N={}", self.d, self.n);
        require!(self.median > 0.0 && self.median.is_finite(), "median must be positive, got {}", self.median);
        require!(
            (0.0..1.0).contains(&self.ltfu_rate),
            "ltfu_rate must lie in [0,1), got {}",
            self.ltfu_rate
        );
        require!(self.replicates >= 1, "M must be at least 1");
        Ok(())
    }

    pub fn event_rate(&self) -> f64 {
        LN_2 / self.median
    }

    /// Censoring hazard giving the requested loss-to-follow-up fraction; `None` without censoring.
    pub fn censor_rate(&self) -> Option<f64> {
        (self.ltfu_rate > 0.0).then(|| self.event_rate() / (1.0 / self.ltfu_rate - 1.0))
    }
}

/// Per-subject follow-up time and event flag.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub fup: Vec<f64>,
    pub event: Vec<bool>,
}

impl SurvivalDataset {
    pub fn new(fup: Vec<f64>, event: Vec<bool>) -> Result<Self> {
        require!(fup.len() == event.len(), "fup and event lengths differ: {} vs {}", fup.len(), event.len());
        require!(fup.iter().all(|t| *t >= 0.0 && !t.is_nan()), "follow-up times must be nonnegative");
        Ok(SurvivalDataset { fup, event })
    }

    pub fn len(&self) -> usize {
        self.fup.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fup.is_empty()
    }

    pub fn events(&self) -> usize {
        self.event.iter().filter(|e| **e).count()
    }
}

/// One simulated trial: exponential event and censoring times, with the
/// analysis cutoff at the `min(events, D)`-th event time.
pub fn simulate_trial(cfg: &SimConfig, replicate: u64) -> Result<SurvivalDataset> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, replicate);
    let ev = Exp::new(cfg.event_rate()).map_err(dist_err)?;
    let cens = cfg.censor_rate().map(Exp::new).transpose().map_err(dist_err)?;
    let n = cfg.n as usize;
    let mut fup = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    for _ in 0..n {
        let e: f64 = ev.sample(&mut rng);
        let c = cens.map_or(f64::INFINITY, |d| d.sample(&mut rng));
        fup.push(e.min(c));
        event.push(e <= c);
    }
    let mut event_times: Vec<f64> = fup.iter().zip(&event).filter(|(_, e)| **e).map(|(t, _)| *t).collect();
    event_times.sort_by(f64::total_cmp);
    let cutoff = match event_times.len() {
        0 => f64::INFINITY,
        len => event_times[len.min(cfg.d as usize) - 1],
    };
    for (t, e) in fup.iter_mut().zip(event.iter_mut()) {
        *e = *e && *t <= cutoff;
        *t = t.min(cutoff);
    }
    Ok(SurvivalDataset { fup, event })
}

/// Product-limit estimate: survival just after each distinct event time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KmCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
    /// Smallest event time with survival ≤ 0.5; `None` if never reached.
    pub median: Option<f64>,
}

impl KmCurve {
    /// Right-continuous step function value at `t`.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 1.0,
            i => self.survival[i - 1],
        }
    }
}

// Absorbs rounding in products like 0.75·(2/3) that equal 1/2 exactly.
const KM_HALF_TOL: f64 = 1e-12;

pub fn km_estimate(data: &SurvivalDataset) -> Result<KmCurve> {
    require!(!data.is_empty(), "dataset is empty");
    if data.events() == 0 {
        return Err(Error::Estimation("no events: the Kaplan-Meier curve is flat at 1".into()));
    }
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_by(|&i, &j| data.fup[i].total_cmp(&data.fup[j]));
    let mut times = Vec::new();
    let mut survival = Vec::new();
    let mut median = None;
    let mut s = 1.0;
    let mut i = 0;
    let n = idx.len();
    while i < n {
        let t = data.fup[idx[i]];
        let mut j = i;
        let mut deaths = 0usize;
        while j < n && data.fup[idx[j]] == t {
            deaths += data.event[idx[j]] as usize;
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / (n - i) as f64;
            times.push(t);
            survival.push(s);
            if median.is_none() && s <= 0.5 + KM_HALF_TOL {
                median = Some(t);
            }
        }
        i = j;
    }
    Ok(KmCurve { times, survival, median })
}

/// Empirical SD of `log(KM median)` against the `1/√D` and `(log 2)⁻¹/√D` approximations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeResult {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "D")]
    pub d: u64,
    pub med: f64,
    pub sd_obs: f64,
    pub sd_1_over_sqrtd: f64,
    pub sd_log2: f64,
    pub ltfu_rate: f64,
    #[serde(rename = "M")]
    pub m: u64,
    /// Jackknife standard error of `sd_obs`.
    pub sd_obs_se: f64,
    /// Replicates whose KM curve never reached 0.5 (dropped).
    pub undefined: u64,
    /// More than 10% of replicates had an undefined median.
    pub unreliable: bool,
}

/// Sample SD (`n - 1` denominator) and its jackknife SE.
fn sd_with_jackknife(xs: &[f64]) -> Result<(f64, f64)> {
    let m = xs.len();
    if m < 3 {
        return Err(Error::Estimation(format!(
            "need at least 3 defined medians for an SD and its jackknife SE, got {m}"
        )));
    }
    let mf = m as f64;
    let mean = pairwise_sum(xs) / mf;
    let dev: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let sq: Vec<f64> = dev.iter().map(|d| d * d).collect();
    let ss = pairwise_sum(&sq);
    let sd = (ss / (mf - 1.0)).sqrt();
    // Leave-one-out sums of squares: ss - d_i² · m/(m-1).
    let loo: Vec<f64> = dev
        .iter()
        .map(|d| ((ss - d * d * mf / (mf - 1.0)).max(0.0) / (mf - 2.0)).sqrt())
        .collect();
    let loo_mean = pairwise_sum(&loo) / mf;
    let spread: Vec<f64> = loo.iter().map(|s| (s - loo_mean).powi(2)).collect();
    let se = ((mf - 1.0) / mf * pairwise_sum(&spread)).sqrt();
    Ok((sd, se))
}

pub fn empirical_se_log_median(cfg: &SimConfig) -> Result<SeResult> {
    cfg.validate()?;
    require!(cfg.replicates >= 2, "an SD needs at least 2 replicates, got M={}", cfg.replicates);
    let medians = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let data = simulate_trial(cfg, r)?;
            Ok(match km_estimate(&data) {
                Ok(km) => km.median,
                Err(Error::Estimation(_)) => None,
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    let logs: Vec<f64> = medians.iter().flatten().map(|m| m.ln()).collect();
    let undefined = cfg.replicates - logs.len() as u64;
    let (sd_obs, sd_obs_se) = sd_with_jackknife(&logs)?;
    let root_d = (cfg.d as f64).sqrt();
    Ok(SeResult {
        n: cfg.n,
        d: cfg.d,
        med: cfg.median,
        sd_obs,
        sd_1_over_sqrtd: 1.0 / root_d,
        sd_log2: INV_LN_2 / root_d,
        ltfu_rate: cfg.ltfu_rate,
        m: cfg.replicates,
        sd_obs_se,
        undefined,
        unreliable: undefined as f64 > 0.1 * cfg.replicates as f64,
    })
}

/// Reproduces the SE-of-log-median comparison over `D ∈ {20,…,60}` and
/// `N/D ∈ {1.0, 1.3, 1.5}`; each cell gets its own seed offset.
pub fn se_grid(
    ds: &[u64],
    ratios: &[f64],
    median: f64,
    ltfu_rate: f64,
    replicates: u64,
    seed: u64,
) -> Result<Vec<SeResult>> {
    let mut out = Vec::with_capacity(ds.len() * ratios.len());
    for (i, &d) in ds.iter().enumerate() {
        for (j, &ratio) in ratios.iter().enumerate() {
            require!(ratio >= 1.0, "N/D ratio must be at least 1, got {ratio}");
            let cell = (i * ratios.len() + j) as u64;
            out.push(empirical_se_log_median(&SimConfig {
                n: (d as f64 * ratio).round() as u64,
                d,
                median,
                ltfu_rate,
                replicates,
                seed: seed.wrapping_add(cell.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            })?);
        }
    }
    Ok(out)
}

pub const SE_CSV_HEADER: [&str; 8] = ["N", "D", "med", "sd_obs", "sd_1_over_sqrtd", "sd_log2", "ltfu_rate", "M"];

/// Writes rows in the `N, D, med, sd_obs, sd_1_over_sqrtd, sd_log2, ltfu_rate, M` layout.
pub fn write_se_csv<W: Write>(rows: &[SeResult], w: W) -> Result<()> {
    let io = |e: csv::Error| Error::Numerical(format!("csv output failed: {e}"));
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SE_CSV_HEADER).map_err(io)?;
    for r in rows {
        wr.write_record([
            r.n.to_string(),
            r.d.to_string(),
            r.med.to_string(),
            r.sd_obs.to_string(),
            r.sd_1_over_sqrtd.to_string(),
            r.sd_log2.to_string(),
            r.ltfu_rate.to_string(),
            r.m.to_string(),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::Numerical(format!("csv output failed: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "snake_case")]
pub enum LifetimeDist {
    Exponential,
    Weibull { shape: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianEstimator {
    /// Exponential maximum-likelihood estimate `log 2 / λ̂`.
    Mle,
    SampleMedian,
}

/// Large-sample `var[log m_d]` from `d` events.
pub fn variance_formulas(dist: LifetimeDist, estimator: MedianEstimator, d: u64) -> Result<f64> {
    require!(d >= 1, "event count d must be at least 1");
    let d = d as f64;
    match (dist, estimator) {
        (LifetimeDist::Exponential, MedianEstimator::Mle) => Ok(1.0 / d),
        (LifetimeDist::Exponential, MedianEstimator::SampleMedian) => Ok(INV_LN_2 * INV_LN_2 / d),
        (LifetimeDist::Weibull { shape }, MedianEstimator::SampleMedian) => {
            require!(shape > 0.0 && shape.is_finite(), "Weibull shape must be positive, got {shape}");
            Ok(INV_LN_2 * INV_LN_2 / (shape * shape * d))
        }
        (LifetimeDist::Weibull { .. }, MedianEstimator::Mle) => Err(Error::Domain(
            "the exponential MLE of the median is only defined for exponential lifetimes".into(),
        )),
    }
}

/// What the simulated effect is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum McMode {
    /// Conditional power at a natural-scale projected effect.
    CpSpecified { projected: f64 },
    /// Conditional power at the interim estimate.
    CpTrend,
    /// Predictive power: effect drawn from its posterior (flat prior if absent).
    Ppos { prior: Option<NaturalPrior> },
}

/// Simulated success probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub se: f64,
    pub sims: u64,
    pub seed: u64,
}

impl McEstimate {
    fn from_counts(successes: u64, sims: u64, seed: u64) -> Self {
        let p = successes as f64 / sims as f64;
        McEstimate {
            estimate: p,
            se: (p * (1.0 - p) / sims as f64).sqrt(),
            sims,
            seed,
        }
    }
}

const CHUNK: u64 = 4096;
pub const MIN_SIMS: u64 = 1000;

/// Runs `sims` Bernoulli trials in fixed-size chunks, each with its own stream.
fn count_successes<F>(sims: u64, seed: u64, trial: F) -> Result<u64>
where
    F: Fn(&mut ChaCha20Rng) -> Result<bool> + Sync,
{
    let chunks = sims.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c);
            let len = CHUNK.min(sims - c * CHUNK);
            let mut hits = 0u64;
            for _ in 0..len {
                hits += trial(&mut rng)? as u64;
            }
            Ok(hits)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Binomial count spread uniformly over its unit cell. The analytic model
/// treats the estimate as continuous; left on the lattice, the position of
/// the success cutoff between integer counts biases the simulated rate.
fn lattice_count(m: u64, p: f64, rng: &mut ChaCha20Rng) -> Result<f64> {
    let k = Binomial::new(m, p).map_err(dist_err)?.sample(rng) as f64;
    Ok((k + rng.random_range(-0.5..0.5)).clamp(0.0, m as f64))
}

/// Post-interim data generator for one endpoint cell, on the natural scale.
enum Sampler {
    /// Mean of `m` normal observations with SD `sd`.
    MeanOne { m: f64, sd: f64 },
    MeanTwo { m_t: f64, m_c: f64, sd: f64 },
    PropOne { m: u64 },
    PropTwo { m_t: u64, m_c: u64, p_con: f64 },
    /// Median from `m` events: exponential MLE (`shape = None`) or the
    /// `⌈m/2⌉`-th order statistic of Weibull lifetimes.
    MedianOne { m: u64, shape: Option<f64> },
    /// Split of `m` events between arms with allocation `a`.
    HazardTwo { m: u64, a: f64 },
}

impl Sampler {
    fn new(spec: &EndpointSpec) -> Result<Self> {
        let a_of = |al: AllocationRatio| match al {
            AllocationRatio::TwoArm(a) => a,
            AllocationRatio::SingleArm => 1.0,
        };
        Ok(match *spec {
            EndpointSpec::ContinuousOneArm(c) => Sampler::MeanOne {
                m: (c.big_n - c.n) as f64,
                sd: c.sd_ia,
            },
            EndpointSpec::ContinuousTwoArm(c) => {
                let a = a_of(c.allocation);
                let m = (c.big_n - c.n) as f64;
                Sampler::MeanTwo { m_t: m * a / (a + 1.0), m_c: m / (a + 1.0), sd: c.sd_ia }
            }
            EndpointSpec::BinaryOneArm(c) => Sampler::PropOne { m: c.big_n - c.n },
            EndpointSpec::BinaryTwoArm(c) => match c.interim {
                BinaryTwoArmInterim::Counts { n_trt, n_con, prop_con, .. } => {
                    let m = c.big_n - n_trt - n_con;
                    let m_t = ((m as f64) * n_trt as f64 / (n_trt + n_con) as f64).round() as u64;
                    Sampler::PropTwo { m_t, m_c: m - m_t, p_con: prop_con }
                }
                BinaryTwoArmInterim::Summary { .. } => {
                    return Err(Error::Domain(
                        "simulation needs per-arm interim counts to fix the control rate".into(),
                    ))
                }
            },
            EndpointSpec::SurvivalOneArm(c) => {
                let shape = if (c.xi - 1.0).abs() < 1e-12 { None } else { Some(INV_LN_2 / c.xi) };
                Sampler::MedianOne { m: c.big_d - c.d, shape }
            }
            EndpointSpec::SurvivalTwoArm(c) => Sampler::HazardTwo {
                m: c.big_d - c.d,
                a: a_of(c.allocation),
            },
        })
    }

    /// Draws the post-interim estimate given the true natural-scale effect `x`.
    fn draw(&self, x: f64, rng: &mut ChaCha20Rng) -> Result<f64> {
        let std = |rng: &mut ChaCha20Rng| -> f64 { rng.sample(rand_distr::StandardNormal) };
        Ok(match *self {
            Sampler::MeanOne { m, sd } => x + sd / m.sqrt() * std(rng),
            Sampler::MeanTwo { m_t, m_c, sd } => {
                let yt = x + sd / m_t.sqrt() * std(rng);
                let yc = sd / m_c.sqrt() * std(rng);
                yt - yc
            }
            Sampler::PropOne { m } => {
                let p = x.clamp(0.0, 1.0);
                lattice_count(m, p, rng)? / m as f64
            }
            Sampler::PropTwo { m_t, m_c, p_con } => {
                let pt = (p_con + x).clamp(0.0, 1.0);
                let yt = lattice_count(m_t, pt, rng)? / m_t as f64;
                let yc = lattice_count(m_c, p_con, rng)? / m_c as f64;
                yt - yc
            }
            Sampler::MedianOne { m, shape } => {
                // Time unit chosen so the scale cancels: median = x.
                match shape {
                    None => {
                        let lambda = LN_2 / x;
                        let total: f64 = Gamma::new(m as f64, 1.0 / lambda).map_err(dist_err)?.sample(rng);
                        LN_2 * total / m as f64
                    }
                    Some(beta) => {
                        let k = m.div_ceil(2) as f64;
                        let u: f64 = Beta::new(k, m as f64 - k + 1.0).map_err(dist_err)?.sample(rng);
                        // Weibull with median x: S(t) = 2^{-(t/x)^β}.
                        x * (-(1.0 - u).ln() / LN_2).powf(1.0 / beta)
                    }
                }
            }
            Sampler::HazardTwo { m, a } => {
                let share = a * x / (a * x + 1.0);
                let e_t = lattice_count(m, share, rng)?;
                let e_c = m as f64 - e_t;
                (e_t / e_c) / a
            }
        })
    }
}

/// Simulation estimate of CP or PPoS for an endpoint cell.
///
/// The true effect is fixed (CP) or drawn from the posterior given the
/// interim estimate (PPoS); post-interim data are then simulated on the
/// natural scale and the final estimate `tθ̂ + (1-t)θ̂₂` is compared with
/// the success cutoff `kγ`.
pub fn mc_ppos(
    spec: &EndpointSpec,
    alternative: Alternative,
    criterion: &Criterion,
    mode: &McMode,
    sims: u64,
    seed: u64,
) -> Result<McEstimate> {
    require!(sims >= MIN_SIMS, "sims must be at least {MIN_SIMS}, got {sims}");
    let scale = spec.scale(alternative)?;
    let s = endpoints::to_interim(spec, alternative)?;
    let gamma = interim::resolve_gamma(criterion.to_success(&scale)?, s.k())?;
    let cutoff = interim::final_cutoff(&s, gamma);
    let sampler = Sampler::new(spec)?;
    let (t, theta_hat) = (s.t(), s.theta_hat());

    let effect: EffectDraw = match mode {
        McMode::CpSpecified { projected } => EffectDraw::Fixed(scale.to_theta(*projected)?),
        McMode::CpTrend => EffectDraw::Fixed(theta_hat),
        McMode::Ppos { prior } => {
            let p = match prior {
                Some(p) => endpoints::prior_to_theta(spec.kind(), spec.null_value(), p, alternative)?,
                None => NormalPrior::flat(),
            };
            let post = interim::posterior(&s, &p);
            EffectDraw::Normal(Normal::new(post.mean, post.sd).map_err(dist_err)?)
        }
    };
    let hits = count_successes(sims, seed, |rng| {
        let theta = match &effect {
            EffectDraw::Fixed(v) => *v,
            EffectDraw::Normal(d) => d.sample(rng),
        };
        let x2 = sampler.draw(scale.to_natural(theta), rng)?;
        let theta2 = natural_to_theta(&scale, x2);
        Ok(t * theta_hat + (1.0 - t) * theta2 > cutoff)
    })?;
    Ok(McEstimate::from_counts(hits, sims, seed))
}

enum EffectDraw {
    Fixed(f64),
    Normal(Normal<f64>),
}

/// Like `EffectScale::to_theta` but total: degenerate estimates (zero events
/// in an arm) map to ±∞ so the success rule still decides.
fn natural_to_theta(scale: &endpoints::EffectScale, x: f64) -> f64 {
    if x.is_nan() {
        return f64::NEG_INFINITY;
    }
    match scale.to_theta(x) {
        Ok(v) => v,
        Err(_) => {
            // x ≤ 0 or infinite on a log scale
            let g = if x <= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
            scale.alternative().sign() * g
        }
    }
}

/// Simulation of the two-arm beta-binomial predictive law.
pub fn mc_ppos_betabinom_two(
    prior_t: BetaPrior,
    prior_c: BetaPrior,
    arm_t: ArmInterim,
    arm_c: ArmInterim,
    indicator: &SuccessIndicator,
    sims: u64,
    seed: u64,
) -> Result<McEstimate> {
    require!(sims >= MIN_SIMS, "sims must be at least {MIN_SIMS}, got {sims}");
    indicator.validate()?;
    let post_t = posterior_beta(prior_t, arm_t)?;
    let post_c = posterior_beta(prior_c, arm_c)?;
    let bt = Beta::new(post_t.a, post_t.b).map_err(dist_err)?;
    let bc = Beta::new(post_c.a, post_c.b).map_err(dist_err)?;
    let hits = count_successes(sims, seed, |rng| {
        let yt = Binomial::new(arm_t.remaining(), bt.sample(rng)).map_err(dist_err)?.sample(rng);
        let yc = Binomial::new(arm_c.remaining(), bc.sample(rng)).map_err(dist_err)?.sample(rng);
        Ok(indicator
            .eval_two_arm(arm_t.x + yt, arm_t.big_n, arm_c.x + yc, arm_c.big_n)?
            .success)
    })?;
    Ok(McEstimate::from_counts(hits, sims, seed))
}

/// Simulation of the one-arm beta-binomial predictive law.
pub fn mc_ppos_betabinom_one(
    prior: BetaPrior,
    arm: ArmInterim,
    indicator: &SuccessIndicator,
    sims: u64,
    seed: u64,
) -> Result<McEstimate> {
    require!(sims >= MIN_SIMS, "sims must be at least {MIN_SIMS}, got {sims}");
    indicator.validate()?;
    let post = posterior_beta(prior, arm)?;
    let b = Beta::new(post.a, post.b).map_err(dist_err)?;
    let hits = count_successes(sims, seed, |rng| {
        let y = Binomial::new(arm.remaining(), b.sample(rng)).map_err(dist_err)?.sample(rng);
        Ok(indicator.eval_one_arm(arm.x + y, arm.big_n)?.success)
    })?;
    Ok(McEstimate::from_counts(hits, sims, seed))
}
