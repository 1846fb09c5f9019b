//! Actual causes of discrete effects: direct causes and the inductive
//! `Causes` relation, which follows each direct cause back through the
//! sub-effect `Poss(a) ∧ After(a, φ)` in the situation where `a` ran.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::evaluator::{EvalError, Evaluator, Trace};
use crate::model::{ActionTerm, Scenario, Timestamp};
use crate::theory::{Bindings, Formula};

/// An action occurrence, identified by its timestamp in the scenario.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CausePair {
    pub action: ActionTerm,
    pub ts: Timestamp,
}

impl CausePair {
    pub fn new(action: ActionTerm, ts: usize) -> Self {
        CausePair {
            action,
            ts: Timestamp(ts),
        }
    }
}

impl std::fmt::Display for CausePair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.action, self.ts)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SettingError {
    #[error("the scenario is empty")]
    EmptyScenario,
    #[error("the scenario is not executable: {0}")]
    NotExecutable(crate::evaluator::ExecViolation),
    #[error("the effect already holds in the initial situation")]
    EffectInitiallyTrue,
    #[error("the effect holds at time {0} in the initial situation (before the first action)")]
    EffectBeforeFirstAction(crate::model::TimePoint),
    #[error("the effect does not hold at the end of the scenario")]
    EffectNotAchieved,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Truth of `φ` at every prefix `0..=len` of a trace.
pub fn truth_profile(ev: &Evaluator<'_>, trace: &Trace, effect: &Formula, len: usize) -> Result<Vec<bool>, EvalError> {
    (0..=len)
        .map(|k| ev.eval(effect, trace.state(k), &Bindings::new()))
        .collect()
}

/// `CausesDir(a, ts, φ, σ_len)`: `a` is the action at `ts`, `φ` is false
/// before it and true in every later prefix up to `len`.
pub fn causes_dir_in(
    ev: &Evaluator<'_>,
    trace: &Trace,
    action: &ActionTerm,
    ts: usize,
    effect: &Formula,
    len: usize,
) -> Result<bool, EvalError> {
    if ts >= len || trace.scenario.actions[ts] != *action {
        return Ok(false);
    }
    if ev.eval(effect, trace.state(ts), &Bindings::new())? {
        return Ok(false);
    }
    for k in ts + 1..=len {
        if !ev.eval(effect, trace.state(k), &Bindings::new())? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The unique direct cause of `φ` within the prefix of length `len`: the
/// action right after the last prefix where `φ` is false.
pub fn direct_cause_in(
    ev: &Evaluator<'_>,
    trace: &Trace,
    effect: &Formula,
    len: usize,
) -> Result<Option<CausePair>, EvalError> {
    let profile = truth_profile(ev, trace, effect, len)?;
    Ok(direct_cause_from_profile(&profile).map(|ts| CausePair::new(trace.scenario.actions[ts].clone(), ts)))
}

/// Timestamp of the direct cause given `φ`'s truth at prefixes `0..=len`.
pub fn direct_cause_from_profile(profile: &[bool]) -> Option<usize> {
    if !*profile.last()? {
        return None;
    }
    profile.iter().rposition(|v| !v)
}

/// Least fixpoint of the inductive definition, computed along the chain of
/// direct causes with strictly decreasing timestamps.
pub fn causes_in(
    ev: &Evaluator<'_>,
    trace: &Trace,
    effect: &Formula,
    len: usize,
) -> Result<BTreeSet<CausePair>, EvalError> {
    let mut out = BTreeSet::new();
    let mut current = effect.clone();
    let mut horizon = len;
    while let Some(pair) = direct_cause_in(ev, trace, &current, horizon)? {
        current = Formula::poss_and_after(&pair.action, &current);
        horizon = pair.ts.0;
        out.insert(pair);
    }
    Ok(out)
}

/// A validated discrete causal setting `⟨φ, σ⟩`.
pub struct DiscreteSetting<'a> {
    ev: &'a Evaluator<'a>,
    trace: Trace,
    effect: Formula,
}

impl<'a> DiscreteSetting<'a> {
    /// Checks `Exec(σ) ∧ ¬φ[S_0] ∧ φ[σ]`.
    pub fn new(ev: &'a Evaluator<'a>, scenario: &Scenario, effect: &Formula) -> Result<Self, SettingError> {
        let trace = ev.trace(scenario)?;
        Self::from_trace(ev, trace, effect)
    }

    pub fn from_trace(ev: &'a Evaluator<'a>, trace: Trace, effect: &Formula) -> Result<Self, SettingError> {
        if let Some(v) = &trace.violation {
            return Err(SettingError::NotExecutable(v.clone()));
        }
        if ev.eval(effect, trace.state(0), &Bindings::new())? {
            return Err(SettingError::EffectInitiallyTrue);
        }
        if !ev.eval(effect, trace.state(trace.len()), &Bindings::new())? {
            return Err(SettingError::EffectNotAchieved);
        }
        Ok(DiscreteSetting {
            ev,
            trace,
            effect: effect.clone(),
        })
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn causes_dir(&self, action: &ActionTerm, ts: usize) -> Result<bool, EvalError> {
        causes_dir_in(self.ev, &self.trace, action, ts, &self.effect, self.trace.len())
    }

    pub fn find_direct_cause(&self) -> Result<Option<CausePair>, EvalError> {
        direct_cause_in(self.ev, &self.trace, &self.effect, self.trace.len())
    }

    pub fn causes(&self) -> Result<BTreeSet<CausePair>, EvalError> {
        causes_in(self.ev, &self.trace, &self.effect, self.trace.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_scenario, parse_theory};
    use crate::theory::HybridTheory;

    fn npp() -> HybridTheory {
        parse_theory(include_str!("../../../fixtures/npp.hct")).unwrap()
    }

    fn act(name: &str, t: i64) -> ActionTerm {
        ActionTerm::new(name, vec!["P1".into()], t)
    }

    #[test]
    fn sigma1() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let s1 = parse_scenario(include_str!("../../../fixtures/s1.hcs"), &th).unwrap();
        let phi = Formula::atom("CSFailed", &["P1"]);
        let setting = DiscreteSetting::new(&ev, &s1, &phi).unwrap();
        assert!(setting.causes_dir(&act("csFailure", 5), 4).unwrap());
        assert!(!setting.causes_dir(&act("csFailure", 2), 1).unwrap());
        assert!(!setting.causes_dir(&act("mRad", 6), 5).unwrap());
        assert_eq!(setting.find_direct_cause().unwrap(), Some(CausePair::new(act("csFailure", 5), 4)));
        let expected: BTreeSet<_> = [
            CausePair::new(act("csFailure", 2), 1),
            CausePair::new(act("fixCS", 3), 2),
            CausePair::new(act("csFailure", 5), 4),
        ]
        .into();
        assert_eq!(setting.causes().unwrap(), expected);
    }

    #[test]
    fn single_action() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let s = parse_scenario("csFailure(P1, 1)", &th).unwrap();
        let setting = DiscreteSetting::new(&ev, &s, &Formula::atom("CSFailed", &["P1"])).unwrap();
        let only = CausePair::new(act("csFailure", 1), 0);
        assert_eq!(setting.find_direct_cause().unwrap(), Some(only.clone()));
        assert_eq!(setting.causes().unwrap(), [only].into());
    }

    #[test]
    fn preemption_scenario() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let s = parse_scenario(include_str!("../../../fixtures/thm7.hcs"), &th).unwrap();
        let setting = DiscreteSetting::new(&ev, &s, &Formula::atom("Ruptured", &["P1"])).unwrap();
        assert_eq!(setting.find_direct_cause().unwrap(), Some(CausePair::new(act("rup", 4), 3)));
        // rup is always possible, so Poss(rup) ∧ After(rup, Ruptured) already
        // holds in S_0 and the chain stops after one step.
        assert_eq!(setting.causes().unwrap(), [CausePair::new(act("rup", 4), 3)].into());
    }

    #[test]
    fn invalid_settings() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let phi = Formula::atom("CSFailed", &["P1"]);
        let s = parse_scenario("mRad(P1, 1)", &th).unwrap();
        assert!(matches!(DiscreteSetting::new(&ev, &s, &phi), Err(SettingError::EffectNotAchieved)));
        let s = parse_scenario("fixP(P1, 1)", &th).unwrap();
        assert!(matches!(DiscreteSetting::new(&ev, &s, &phi), Err(SettingError::NotExecutable(_))));
        let s = parse_scenario("csFailure(P1, 1)", &th).unwrap();
        let not_phi = Formula::not(phi);
        assert!(matches!(DiscreteSetting::new(&ev, &s, &not_phi), Err(SettingError::EffectInitiallyTrue)));
    }

    #[test]
    fn profile_scan() {
        assert_eq!(direct_cause_from_profile(&[false, true, false, true, true]), Some(2));
        assert_eq!(direct_cause_from_profile(&[true, true]), None);
        assert_eq!(direct_cause_from_profile(&[false, true, false]), None);
        assert_eq!(direct_cause_from_profile(&[]), None);
    }
}
