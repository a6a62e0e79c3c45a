//! Simulation engines against the closed forms, Kaplan–Meier hand fixtures,
//! and the qualitative shape of the SE-of-log-median study.

use std::f64::consts::LOG2_E;
use std::path::Path;

use ppos_core::api::{self, Params};
use ppos_core::betabinom::{ppos_two_arm, ArmInterim, BetaPrior, SuccessIndicator};
use ppos_core::endpoints::*;
use ppos_core::mcval::*;
use ppos_core::Alternative::{self, Greater, Less};
use serde_json::json;

fn al(a: f64) -> AllocationRatio {
    AllocationRatio::two_arm(a).unwrap()
}

/// Every endpoint cell, both allocation shapes, all three simulation modes.
fn grid() -> Vec<(EndpointSpec, Alternative, Criterion, McMode)> {
    let np = |mean, sd| Some(NaturalPrior { mean, sd });
    let tr = Criterion::Trial { z_crit_final: 1.96 };
    let cl = |x| Criterion::Clinical { clin_succ_threshold: x };
    let c1 = ContinuousOneArm { null_value: 0.0, mean_ia: 0.05, sd_ia: 1.0, n: 1000, big_n: 4000 };
    let c2 = |a| ContinuousTwoArm { null_value: 0.0, meandiff_ia: 0.08, sd_ia: 1.0, n: 1500, big_n: 3000, allocation: al(a) };
    let b1 = BinaryOneArm { null_value: 0.3, prop_ia: 0.33, n: 1000, big_n: 3000 };
    let b2 = |nt, nc, a| BinaryTwoArm {
        null_value: 0.0,
        interim: BinaryTwoArmInterim::Counts { prop_trt: 0.40, n_trt: nt, prop_con: 0.35, n_con: nc },
        big_n: 2400,
        allocation: al(a),
    };
    let s2 = |a| SurvivalTwoArm { null_value: 1.0, hr_ia: 0.9, d: 1000, big_d: 3000, allocation: al(a) };
    vec![
        (EndpointSpec::ContinuousOneArm(c1), Greater, tr, McMode::Ppos { prior: None }),
        (EndpointSpec::ContinuousOneArm(c1), Greater, tr, McMode::CpSpecified { projected: 0.03 }),
        (EndpointSpec::ContinuousTwoArm(c2(1.0)), Greater, tr, McMode::Ppos { prior: np(0.1, 0.05) }),
        (EndpointSpec::ContinuousTwoArm(c2(2.0)), Greater, cl(0.07), McMode::CpTrend),
        (EndpointSpec::BinaryOneArm(b1), Greater, tr, McMode::Ppos { prior: None }),
        // Threshold kept off the 1/N lattice of attainable proportions.
        (EndpointSpec::BinaryOneArm(b1), Greater, cl(0.3205), McMode::Ppos { prior: np(0.32, 0.02) }),
        (EndpointSpec::BinaryTwoArm(b2(600, 600, 1.0)), Greater, tr, McMode::Ppos { prior: None }),
        (EndpointSpec::BinaryTwoArm(b2(800, 400, 2.0)), Greater, tr, McMode::CpSpecified { projected: 0.05 }),
        (
            EndpointSpec::SurvivalOneArm(SurvivalOneArm { null_value: 10.0, median_ia: 10.4, d: 2000, big_d: 8000, xi: 1.0 }),
            Greater,
            tr,
            McMode::Ppos { prior: None },
        ),
        // Sample-median variant; an odd number of remaining events keeps the
        // order statistic unbiased for the median.
        (
            EndpointSpec::SurvivalOneArm(SurvivalOneArm { null_value: 10.0, median_ia: 10.4, d: 2000, big_d: 8001, xi: LOG2_E }),
            Greater,
            tr,
            McMode::CpTrend,
        ),
        (EndpointSpec::SurvivalTwoArm(s2(1.0)), Less, tr, McMode::Ppos { prior: np(0.85, 0.05) }),
        (EndpointSpec::SurvivalTwoArm(s2(2.0)), Less, cl(0.95), McMode::CpSpecified { projected: 0.88 }),
    ]
}

fn analytic(spec: &EndpointSpec, alt: Alternative, crit: &Criterion, mode: &McMode) -> f64 {
    let (prior, proj) = match mode {
        McMode::Ppos { prior } => (*prior, None),
        McMode::CpSpecified { projected } => (None, Some(*projected)),
        McMode::CpTrend => (None, None),
    };
    let b = evaluate(spec, alt, crit, prior.as_ref(), proj).unwrap();
    match mode {
        McMode::Ppos { prior: Some(_) } => b.ppos_with_prior.unwrap(),
        McMode::Ppos { prior: None } => b.ppos_no_prior,
        McMode::CpSpecified { .. } => b.cp_specified.unwrap(),
        McMode::CpTrend => b.cp_trend,
    }
}

#[test]
fn simulation_agrees_with_closed_forms_in_every_cell() {
    for (i, (spec, alt, crit, mode)) in grid().iter().enumerate() {
        let want = analytic(spec, *alt, crit, mode);
        let got = mc_ppos(spec, *alt, crit, mode, 200_000, 11 + i as u64).unwrap();
        let z = (got.estimate - want) / got.se.max(1e-9);
        assert!(z.abs() < 3.0, "cell {i} ({:?}, {mode:?}): mc {} ± {} vs {want}", spec.kind(), got.estimate, got.se);
    }
}

#[test]
fn example_1_by_simulation() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/succ-ia/ex1.json")).unwrap();
    let base = Params::from_json(serde_json::from_str(&text).unwrap()).unwrap();
    for (mode, want) in [("ppos", 0.944), ("cp_trend", 0.941), ("cp_specified", 0.871)] {
        let p = base.merged(&Params::from_json(json!({ "mode": mode, "sims": 400_000, "seed": 5 })).unwrap()).unwrap();
        let r = api::run_mc_ppos(&p).unwrap();
        let (est, se) = (r.result["estimate"].as_f64().unwrap(), r.result["se"].as_f64().unwrap());
        assert!((est - want).abs() < 3.0 * se + 0.001, "{mode}: {est} ± {se} vs {want}");
    }
    let mut raw: serde_json::Value = serde_json::from_str(&text).unwrap();
    let obj = raw.as_object_mut().unwrap();
    obj.remove("meandiff_prior");
    obj.remove("sd_prior");
    obj.extend([("mode".into(), json!("ppos")), ("sims".into(), json!(400_000)), ("seed".into(), json!(6))]);
    let p = Params::from_json(raw).unwrap();
    let r = api::run_mc_ppos(&p).unwrap();
    let (est, se) = (r.result["estimate"].as_f64().unwrap(), r.result["se"].as_f64().unwrap());
    assert!((est - 0.866).abs() < 3.0 * se + 0.001, "no prior: {est} ± {se}");
}

#[test]
fn simulation_is_deterministic_across_thread_counts() {
    let (spec, alt, crit, mode) = grid()[6];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_ppos(&spec, alt, &crit, &mode, 50_000, 3).unwrap())
    };
    let base = run(1);
    assert_eq!(run(4), base);
    assert_eq!(run(7), base);
    let cfg = SimConfig { n: 60, d: 40, median: 12.0, ltfu_rate: 0.05, replicates: 500, seed: 9 };
    let se = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| empirical_se_log_median(&cfg).unwrap())
    };
    assert_eq!(se(1), se(5));
}

#[test]
fn betabinom_simulation_agrees_with_exact_sum() {
    let u = BetaPrior::uniform();
    let t = ArmInterim::new(155, 13, 325).unwrap();
    let c = ArmInterim::new(152, 21, 323).unwrap();
    let ind = SuccessIndicator::z_test(1.96, Less);
    let exact = ppos_two_arm(u, u, t, c, &ind).unwrap().ppos;
    let mc = mc_ppos_betabinom_two(u, u, t, c, &ind, 200_000, 4).unwrap();
    assert!(((mc.estimate - exact) / mc.se).abs() < 3.0, "{} ± {} vs {exact}", mc.estimate, mc.se);
}

fn dataset(fup: &[f64], event: &[u8]) -> SurvivalDataset {
    SurvivalDataset::new(fup.to_vec(), event.iter().map(|&e| e == 1).collect()).unwrap()
}

#[test]
fn kaplan_meier_hand_fixtures() {
    let km = km_estimate(&dataset(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1, 1, 1, 1, 1])).unwrap();
    assert_eq!(km.survival.len(), 5);
    for (s, want) in km.survival.iter().zip([0.8, 0.6, 0.4, 0.2, 0.0]) {
        assert!((s - want).abs() < 1e-15);
    }
    assert_eq!(km.median, Some(3.0));

    // Survival hits exactly one half: that event time is the median.
    let km = km_estimate(&dataset(&[4.0, 1.0, 3.0, 2.0], &[1, 1, 1, 1])).unwrap();
    assert_eq!(km.median, Some(2.0));

    // Censoring tied with an event stays in the risk set.
    let km = km_estimate(&dataset(&[1.0, 2.0, 2.0, 3.0, 4.0], &[1, 0, 1, 1, 0])).unwrap();
    assert_eq!(km.times, vec![1.0, 2.0, 3.0]);
    for (s, want) in km.survival.iter().zip([0.8, 0.6, 0.3]) {
        assert!((s - want).abs() < 1e-15);
    }
    assert_eq!(km.median, Some(3.0));
    assert_eq!(km.at(0.5), 1.0);
    assert_eq!(km.at(2.5), km.survival[1]);

    // Heavy censoring: the curve never reaches one half.
    let km = km_estimate(&dataset(&[1.0, 2.0, 3.0, 4.0], &[1, 0, 0, 0])).unwrap();
    assert_eq!(km.median, None);
    assert!(km_estimate(&dataset(&[1.0, 2.0], &[0, 0])).is_err());
}

#[test]
fn simulated_trials_stop_at_target_events() {
    let cfg = SimConfig { n: 90, d: 60, median: 12.0, ltfu_rate: 0.05, replicates: 1, seed: 2 };
    for r in 0..200 {
        let data = simulate_trial(&cfg, r).unwrap();
        assert_eq!(data.len(), 90);
        assert!(data.events() <= 60);
        let cutoff = data.fup.iter().cloned().fold(0.0, f64::max);
        assert!(data.fup.iter().all(|t| *t <= cutoff && *t > 0.0));
    }
}

#[test]
fn log_median_se_study_shape() {
    let ds = [20, 30, 40, 50, 60];
    let rows = se_grid(&ds, &[1.0, 1.3, 1.5], 12.0, 5e-6, 5000, 1).unwrap();
    for r in &rows {
        // Every configuration is noisier than the MLE approximation.
        assert!(r.sd_obs > r.sd_1_over_sqrtd, "N={} D={}: {}", r.n, r.d, r.sd_obs);
        if r.n == r.d {
            // All subjects followed to an event: the sample-median law applies.
            assert!(((r.sd_obs - r.sd_log2) / r.sd_log2).abs() < 0.05, "N=D={}: {} vs {}", r.d, r.sd_obs, r.sd_log2);
        }
        if r.n as f64 == 1.5 * r.d as f64 {
            assert!(r.sd_obs < r.sd_log2, "N={} D={}: {} vs {}", r.n, r.d, r.sd_obs, r.sd_log2);
        }
    }
    let mut buf = Vec::new();
    write_se_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("N,D,med,sd_obs,sd_1_over_sqrtd,sd_log2,ltfu_rate,M\n"));
    assert_eq!(text.lines().count(), 16);
}

#[test]
fn doubling_replicates_moves_estimate_within_noise() {
    let cfg = SimConfig { n: 39, d: 30, median: 12.0, ltfu_rate: 0.05, replicates: 5000, seed: 21 };
    let a = empirical_se_log_median(&cfg).unwrap();
    let b = empirical_se_log_median(&SimConfig { replicates: 10_000, seed: 22, ..cfg }).unwrap();
    let combined = (a.sd_obs_se.powi(2) + b.sd_obs_se.powi(2)).sqrt();
    assert!((a.sd_obs - b.sd_obs).abs() < 3.0 * combined, "{} vs {} (se {combined})", a.sd_obs, b.sd_obs);
    assert!(b.sd_obs_se < a.sd_obs_se);
}

#[test]
fn variance_approximations_match_simulation() {
    // Exponential, no censoring, N = D: SD of the log sample median ≈ (log 2)⁻¹/√D.
    let v = variance_formulas(LifetimeDist::Exponential, MedianEstimator::SampleMedian, 201).unwrap();
    let r = empirical_se_log_median(&SimConfig { n: 201, d: 201, median: 5.0, ltfu_rate: 0.0, replicates: 8000, seed: 3 }).unwrap();
    assert!((r.sd_obs - v.sqrt()).abs() < 3.0 * r.sd_obs_se + 0.002, "{} vs {}", r.sd_obs, v.sqrt());
}
