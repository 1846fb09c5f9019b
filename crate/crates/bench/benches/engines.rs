use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hycause_bench::{effect, long_npp_scenario, npp, scenario, SIGMA1, SIGMA2, THM7};
use hycause_core::counterfactual::{butfor_report, defused_situation, ButForMode};
use hycause_core::{DiscreteSetting, Effect, Evaluator, HybridSetting};
use hycause_testkit::gen::{random_setting, GenConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn npp_benches(c: &mut Criterion) {
    let th = npp();
    let ev = Evaluator::new(&th).unwrap();
    let s1 = scenario(&th, SIGMA1);
    let s2 = scenario(&th, SIGMA2);
    let thm7 = scenario(&th, THM7);
    let Effect::Temporal(phi2) = effect(&th, "coreTemp(P1) >= 1000") else { unreachable!() };
    let Effect::Discrete(cs) = effect(&th, "CSFailed(P1)") else { unreachable!() };
    let ruptured = effect(&th, "Ruptured(P1)");

    c.bench_function("npp/trace", |b| b.iter(|| ev.trace(black_box(&s2)).unwrap()));
    c.bench_function("npp/temporal_cause", |b| {
        b.iter(|| HybridSetting::new(&ev, black_box(&s2), &phi2).unwrap().analyze().unwrap())
    });
    c.bench_function("npp/discrete_causes", |b| {
        b.iter(|| DiscreteSetting::new(&ev, black_box(&s1), &cs).unwrap().causes().unwrap())
    });
    c.bench_function("npp/defuse", |b| {
        b.iter(|| defused_situation(&ev, &Effect::Temporal(phi2.clone()), black_box(&s2)).unwrap())
    });
    c.bench_function("npp/butfor_thm7", |b| {
        b.iter(|| butfor_report(&ev, &ruptured, black_box(&thm7), ButForMode::Defused).unwrap())
    });

    let mut group = c.benchmark_group("npp/cause_by_length");
    for extra in [0, 8, 32] {
        let long = long_npp_scenario(&th, extra);
        group.bench_with_input(BenchmarkId::from_parameter(long.len()), &long, |b, s| {
            b.iter(|| HybridSetting::new(&ev, s, &phi2).unwrap().analyze().unwrap())
        });
    }
    group.finish();
}

fn random_benches(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let settings: Vec<_> = (0..64).map(|_| random_setting(&mut rng, &GenConfig::default())).collect();
    c.bench_function("random/analyze_64", |b| {
        b.iter(|| {
            for s in &settings {
                let ev = Evaluator::new(&s.theory).unwrap();
                black_box(HybridSetting::new(&ev, &s.scenario, &s.effect).unwrap().analyze().unwrap());
            }
        })
    });
}

criterion_group!(benches, npp_benches, random_benches);
criterion_main!(benches);
