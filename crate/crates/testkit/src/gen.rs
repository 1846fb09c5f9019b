//! Seeded generators for small random hybrid theories and settings.
//!
//! Theories use 0-ary fluents and actions. Contexts of one temporal fluent
//! are distinct full conjunctions ("cells") over the same one or two
//! discrete fluents, so they are mutually exclusive by construction.

use std::fmt::Write as _;

use hycause_core::dsl::parse_theory;
use hycause_core::model::{make_noop, ActionTerm, Rational, Scenario, TimePoint};
use hycause_core::theory::{HybridTheory, Relation, TemporalEffect};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::naive::Naive;

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    pub max_fluents: usize,
    pub max_temporals: usize,
    pub max_contexts: usize,
    pub max_len: usize,
    /// Probability that a trigger carries a guard literal.
    pub guard_prob: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_fluents: 3,
            max_temporals: 2,
            max_contexts: 3,
            max_len: 6,
            guard_prob: 0.15,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomSetting {
    pub text: String,
    pub theory: HybridTheory,
    pub scenario: Scenario,
    pub effect: TemporalEffect,
}

impl RandomSetting {
    /// Reproduction recipe for failure messages.
    pub fn describe(&self) -> String {
        format!(
            "{}\n# scenario: {}\n# effect: {}",
            self.text,
            hycause_core::dsl::serialize_scenario(&self.scenario),
            self.effect
        )
    }
}

fn literal(rng: &mut impl Rng, fluent: &str) -> String {
    if rng.gen_bool(0.5) {
        fluent.to_string()
    } else {
        format!("!{fluent}")
    }
}

fn rate(rng: &mut impl Rng) -> &'static str {
    ["-3", "-2", "-1", "-1/2", "0", "1/2", "1", "2", "3", "5"].choose(rng).unwrap()
}

/// A random theory as DSL text plus its parsed form.
pub fn random_theory(rng: &mut impl Rng, cfg: &GenConfig) -> (String, HybridTheory) {
    let n_fluents = rng.gen_range(1..=cfg.max_fluents);
    let n_actions = rng.gen_range(3..=4);
    let n_temporals = rng.gen_range(1..=cfg.max_temporals);
    let fluents: Vec<String> = (0..n_fluents).map(|i| format!("F{i}")).collect();
    let actions: Vec<String> = (0..n_actions).map(|i| format!("a{i}")).collect();

    let mut text = String::from("theory random\n");
    for a in &actions {
        let pre = if rng.gen_bool(0.6) {
            "true".to_string()
        } else {
            let f = fluents.choose(rng).unwrap();
            literal(rng, f)
        };
        let _ = writeln!(text, "action {a}() poss: {pre}");
    }
    for f in &fluents {
        let mut caused = Vec::new();
        let mut canceled = Vec::new();
        for a in &actions {
            let roll: f64 = rng.gen();
            let target = if roll < 0.35 {
                &mut caused
            } else if roll < 0.6 {
                &mut canceled
            } else {
                continue;
            };
            let mut trig = a.clone();
            if rng.gen_bool(cfg.guard_prob) {
                let g = fluents.choose(rng).unwrap();
                let _ = write!(trig, " when {}", literal(rng, g));
            }
            target.push(trig);
        }
        let _ = writeln!(text, "fluent {f}()");
        if !caused.is_empty() {
            let _ = writeln!(text, "  caused-by: {}", caused.join(", "));
        }
        if !canceled.is_empty() {
            let _ = writeln!(text, "  canceled-by: {}", canceled.join(", "));
        }
    }
    let mut init = Vec::new();
    for f in &fluents {
        init.push(format!("{f}() = {}", rng.gen_bool(0.3)));
    }
    for t in 0..n_temporals {
        let k = rng.gen_range(1..=fluents.len().min(2));
        let over: Vec<&String> = fluents.choose_multiple(rng, k).collect();
        let mut cells: Vec<u32> = (0..1u32 << k).collect();
        cells.shuffle(rng);
        let n_ctx = rng.gen_range(1..=cfg.max_contexts.min(cells.len()));
        let _ = writeln!(text, "temporal T{t}()");
        for (c, cell) in cells.iter().take(n_ctx).enumerate() {
            let lits: Vec<String> = over
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    if cell & (1 << i) != 0 {
                        f.to_string()
                    } else {
                        format!("!{f}")
                    }
                })
                .collect();
            let _ = writeln!(text, "  context g{}: {} rate {}", c + 1, lits.join(" & "), rate(rng));
        }
        init.push(format!("T{t}() = {}", rng.gen_range(-5..=5)));
    }
    let _ = writeln!(text, "init: {}", init.join(", "));
    let th = parse_theory(&text).unwrap_or_else(|e| panic!("generated theory rejected: {e}\n{text}"));
    (text, th)
}

/// Random timed action sequence with non-decreasing times (ties allowed).
/// Not necessarily executable.
pub fn random_scenario(rng: &mut impl Rng, th: &HybridTheory, len: usize) -> Scenario {
    let names: Vec<&String> = th.actions.keys().collect();
    let mut t = Rational::integer(rng.gen_range(0..=2));
    let mut actions = Vec::new();
    for _ in 0..len {
        let step = ["0", "1", "1", "2", "3", "1/2"].choose(rng).unwrap();
        t = &t + &step.parse().unwrap();
        let time = TimePoint(t.clone());
        actions.push(if rng.gen_bool(0.08) {
            make_noop(time)
        } else {
            ActionTerm::new(names.choose(rng).unwrap().as_str(), Vec::new(), time)
        });
    }
    Scenario::from_actions(actions, th.initial_start.clone())
}

/// Threshold for `relation` placing the crossing between the early values
/// and the final value, when one exists.
fn threshold(rng: &mut impl Rng, relation: Relation, early: &[Rational], last: &Rational) -> Option<Rational> {
    let frac = Rational::new(rng.gen_range(1..=8), 8);
    match relation {
        Relation::Eq => Some(last.clone()).filter(|v| !early.contains(v)),
        Relation::Ge | Relation::Gt => {
            let hi = early.iter().max()?;
            (last > hi).then(|| {
                let f = if relation == Relation::Gt && frac == Rational::one() { Rational::new(1, 2) } else { frac };
                hi + &(&(last - hi) * &f)
            })
        }
        Relation::Lt | Relation::Le => {
            let lo = early.iter().min()?;
            (last < lo).then(|| {
                let f = if relation == Relation::Lt && frac == Rational::one() { Rational::new(1, 2) } else { frac };
                lo - &(&(lo - last) * &f)
            })
        }
    }
}

/// A temporal effect making `(σ, φ)` a valid setting, if one is found.
pub fn effect_for(rng: &mut impl Rng, th: &HybridTheory, sigma: &Scenario) -> Option<TemporalEffect> {
    let naive = Naive::new(th);
    if sigma.is_empty() || !naive.executable(&sigma.actions) {
        return None;
    }
    let fluent = th.temporals.keys().collect::<Vec<_>>().choose(rng).unwrap().to_string();
    let atom = hycause_core::theory::GroundAtom::new(fluent.clone(), Vec::new());
    let early = [
        naive.value(&atom, &th.initial_start.0, &[]),
        naive.value(&atom, &sigma.actions[0].time.0, &[]),
    ];
    let last = naive.value(&atom, &naive.start(&sigma.actions), &sigma.actions);
    let mut relations = Relation::ALL.to_vec();
    relations.shuffle(rng);
    for relation in relations {
        if let Some(threshold) = threshold(rng, relation, &early, &last) {
            let effect = TemporalEffect {
                fluent: fluent.clone(),
                args: Vec::new(),
                relation,
                threshold,
            };
            if naive.valid_setting(&effect, &sigma.actions) {
                return Some(effect);
            }
        }
    }
    None
}

/// Draws theories and scenarios until a valid hybrid setting appears.
pub fn random_setting(rng: &mut impl Rng, cfg: &GenConfig) -> RandomSetting {
    loop {
        let (text, theory) = random_theory(rng, cfg);
        for _ in 0..8 {
            let len = rng.gen_range(1..=cfg.max_len);
            let scenario = random_scenario(rng, &theory, len);
            if let Some(effect) = effect_for(rng, &theory, &scenario) {
                return RandomSetting {
                    text,
                    theory,
                    scenario,
                    effect,
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_settings_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = random_setting(&mut rng, &GenConfig::default());
            assert!(hycause_core::theory::validate_theory(&s.theory).iter().all(|d| !d.is_error()));
            assert!(Naive::new(&s.theory).valid_setting(&s.effect, &s.scenario.actions), "{}", s.describe());
            assert!(s.scenario.len() <= 6);
        }
    }
}
