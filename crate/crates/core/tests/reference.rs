//! Core engines against the regression-style reference semantics on random
//! theories.

use std::collections::BTreeSet;

use hycause_core::dsl::parse_effect;
use hycause_core::theory::Bindings;
use hycause_core::{CausePair, DiscreteSetting, Effect, Evaluator};
use hycause_testkit::gen::{random_scenario, random_setting, random_theory, GenConfig};
use hycause_testkit::naive::Naive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn progression_matches_regression(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_setting(&mut rng, &GenConfig::default());
        let ev = Evaluator::new(&s.theory).unwrap();
        let naive = Naive::new(&s.theory);
        let trace = ev.trace(&s.scenario).unwrap();
        let sigma = &s.scenario.actions;
        for k in 0..=sigma.len() {
            let state = trace.state(k);
            prop_assert_eq!(&trace.start(k).0, &naive.start(&sigma[..k]));
            for atom in ev.discrete_atoms() {
                prop_assert_eq!(ev.holds_atom(state, atom).unwrap(), naive.holds_atom(atom, &sigma[..k]));
            }
            for atom in ev.temporal_atoms() {
                let t = trace.end(k);
                prop_assert_eq!(ev.value_at(state, atom, t).unwrap(), naive.value(atom, &t.0, &sigma[..k]));
            }
        }
    }

    #[test]
    fn temporal_values_are_continuous(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_setting(&mut rng, &GenConfig::default());
        let ev = Evaluator::new(&s.theory).unwrap();
        let trace = ev.trace(&s.scenario).unwrap();
        for k in 0..trace.len() {
            for atom in ev.temporal_atoms() {
                let before = ev.value_at(trace.state(k), atom, trace.end(k)).unwrap();
                let after = ev.value_at(trace.state(k + 1), atom, trace.start(k + 1)).unwrap();
                prop_assert_eq!(before, after);
            }
        }
    }

    #[test]
    fn discrete_causes_match_fixpoint(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = GenConfig::default();
        let (found, theory, scenario, effect) = loop {
            let (_, th) = random_theory(&mut rng, &cfg);
            let len = rng.gen_range(1..=cfg.max_len);
            let sc = random_scenario(&mut rng, &th, len);
            let fluent = format!("F{}", rng.gen_range(0..th.fluents.len()));
            let text = if rng.gen_bool(0.5) { fluent } else { format!("!{fluent}") };
            let Effect::Discrete(f) = parse_effect(&text, &th).unwrap() else { unreachable!() };
            let naive = Naive::new(&th);
            let a = &sc.actions;
            if naive.executable(a) && !naive.ground_holds(&f, &[]) && naive.ground_holds(&f, a) {
                break (naive.causes(&f, a), th, sc, f);
            }
        };
        let ev = Evaluator::new(&theory).unwrap();
        let setting = DiscreteSetting::new(&ev, &scenario, &effect).unwrap();
        let core: BTreeSet<CausePair> = setting.causes().unwrap();
        let expected: BTreeSet<CausePair> = found.into_iter().map(|(a, ts)| CausePair::new(a, ts)).collect();
        prop_assert_eq!(&core, &expected);
        let direct = setting.find_direct_cause().unwrap();
        let reference = Naive::new(&theory).direct_causes(&effect, &scenario.actions, scenario.len());
        prop_assert_eq!(direct.map(|p| p.ts.0), reference.last().copied());
        prop_assert!(reference.len() <= 1);
        let end = ev.trace(&scenario).unwrap();
        prop_assert!(ev.eval(&effect, end.state(end.len()), &Bindings::new()).unwrap());
    }
}
