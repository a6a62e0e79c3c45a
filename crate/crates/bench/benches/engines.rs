use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion as Bench};
use ppos_core::betabinom::{ppos_two_arm, ArmInterim, BetaPrior, SuccessIndicator};
use ppos_core::endpoints::{self, AllocationRatio, Criterion, EndpointSpec, NaturalPrior, SurvivalTwoArm};
use ppos_core::mcval::{self, McMode, SimConfig};
use ppos_core::numerics::{phi, std_normal_quantile};
use ppos_core::Alternative;

fn ex3() -> EndpointSpec {
    EndpointSpec::SurvivalTwoArm(SurvivalTwoArm {
        null_value: 1.0,
        hr_ia: 0.82,
        d: 346,
        big_d: 441,
        allocation: AllocationRatio::two_arm(1.0).unwrap(),
    })
}

fn numerics(c: &mut Bench) {
    c.bench_function("phi", |b| b.iter(|| phi(black_box(1.567))));
    c.bench_function("quantile", |b| b.iter(|| std_normal_quantile(black_box(0.0123))));
}

fn analytic(c: &mut Bench) {
    let spec = ex3();
    let crit = Criterion::Trial { z_crit_final: 2.012 };
    let prior = NaturalPrior { mean: 0.71, sd: 2.0 / 133f64.sqrt() };
    c.bench_function("evaluate_survival_two_arm", |b| {
        b.iter(|| endpoints::evaluate(black_box(&spec), Alternative::Less, &crit, Some(&prior), Some(0.75)))
    });
    let grid: Vec<f64> = (0..1000).map(|i| 0.6 + 0.3 * i as f64 / 999.0).collect();
    c.bench_function("curve_1000_points", |b| {
        b.iter(|| endpoints::curve(&spec, Alternative::Less, &crit, Some(&prior), black_box(&grid)))
    });
}

fn betabinom(c: &mut Bench) {
    let u = BetaPrior::uniform();
    let t = ArmInterim::new(155, 13, 325).unwrap();
    let ctl = ArmInterim::new(152, 21, 323).unwrap();
    let z = SuccessIndicator::z_test(1.96, Alternative::Less);
    let fisher = SuccessIndicator::FisherExact { level: 0.025, tail: Alternative::Less };
    let mut g = c.benchmark_group("betabinom_example_4");
    g.sample_size(10);
    g.bench_function("z", |b| b.iter(|| ppos_two_arm(u, u, t, ctl, black_box(&z))));
    g.bench_function("fisher", |b| b.iter(|| ppos_two_arm(u, u, t, ctl, black_box(&fisher))));
    g.finish();
}

fn simulation(c: &mut Bench) {
    let spec = ex3();
    let crit = Criterion::Trial { z_crit_final: 2.012 };
    let mut g = c.benchmark_group("simulation");
    g.sample_size(10);
    g.bench_function("mc_ppos_100k", |b| {
        b.iter(|| mcval::mc_ppos(&spec, Alternative::Less, &crit, &McMode::Ppos { prior: None }, 100_000, 1))
    });
    let cfg = SimConfig { n: 90, d: 60, median: 12.0, ltfu_rate: 5e-6, replicates: 5000, seed: 1 };
    g.bench_function("se_log_median_cell", |b| b.iter(|| mcval::empirical_se_log_median(black_box(&cfg))));
    g.finish();
}

criterion_group!(benches, numerics, analytic, betabinom, simulation);
criterion_main!(benches);
