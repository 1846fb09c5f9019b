//! Counterfactual scenarios: single-action replacement, iterated removal of
//! primary causes (exposing preempted contributors), defused situations and
//! the modified but-for test.

use serde::Serialize;

use crate::discrete::{CausePair, DiscreteSetting, SettingError};
use crate::evaluator::{EvalError, Evaluator, Trace};
use crate::model::{make_noop, ActionTerm, Scenario, Timestamp};
use crate::temporal::{CauseError, HybridSetting};
use crate::theory::{Bindings, Effect};

/// `⟨new, old, ts⟩`: replace `old` at timestamp `ts` with `new`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Replacement {
    pub new_action: ActionTerm,
    pub old_action: ActionTerm,
    pub ts: Timestamp,
}

impl Replacement {
    /// Replacement of the action at `ts` by `noOp(time(a))`.
    pub fn noop_for(pair: &CausePair) -> Self {
        Replacement {
            new_action: make_noop(pair.action.time.clone()),
            old_action: pair.action.clone(),
            ts: pair.ts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CfError {
    #[error("timestamp {ts} is out of range for a scenario of length {len}")]
    OutOfRange { ts: usize, len: usize },
    #[error("the action at timestamp {ts} is {found}, not {expected}")]
    Mismatch {
        ts: usize,
        expected: Box<ActionTerm>,
        found: Box<ActionTerm>,
    },
    #[error("a replacement must change the action")]
    IdenticalReplacement,
    #[error("no primary cause")]
    NoPrimaryCause,
    #[error(transparent)]
    Cause(#[from] CauseError),
}

impl From<SettingError> for CfError {
    fn from(e: SettingError) -> Self {
        CfError::Cause(CauseError::Setting(e))
    }
}

impl From<EvalError> for CfError {
    fn from(e: EvalError) -> Self {
        CfError::Cause(CauseError::Eval(e))
    }
}

/// The scenario that differs from `sigma` only at `r.ts`.
pub fn cf_one(sigma: &Scenario, r: &Replacement) -> Result<Scenario, CfError> {
    let ts = r.ts.0;
    let found = sigma.actions.get(ts).ok_or(CfError::OutOfRange {
        ts,
        len: sigma.len(),
    })?;
    if *found != r.old_action {
        return Err(CfError::Mismatch {
            ts,
            expected: Box::new(r.old_action.clone()),
            found: Box::new(found.clone()),
        });
    }
    if r.new_action == r.old_action {
        return Err(CfError::IdenticalReplacement);
    }
    let mut out = sigma.clone();
    out.actions[ts] = r.new_action.clone();
    Ok(out)
}

/// [`cf_one`] restricted to executable results.
pub fn cfex_one(ev: &Evaluator<'_>, sigma: &Scenario, r: &Replacement) -> Result<Option<Scenario>, CfError> {
    let s = cf_one(sigma, r)?;
    Ok(ev.trace(&s)?.is_executable().then_some(s))
}

/// `|s|`: the number of `noOp` actions.
pub fn noop_count(s: &Scenario) -> usize {
    s.noop_count()
}

/// Primary cause of `effect` in `sigma`: the temporal primary cause, or the
/// direct cause for a discrete effect. `Ok(None)` when the setting is valid
/// but has no cause; setting violations are returned as errors.
pub fn primary_cause(ev: &Evaluator<'_>, effect: &Effect, sigma: &Scenario) -> Result<Option<CausePair>, CfError> {
    let trace = ev.trace(sigma)?;
    primary_cause_in(ev, effect, trace)
}

fn primary_cause_in(ev: &Evaluator<'_>, effect: &Effect, trace: Trace) -> Result<Option<CausePair>, CfError> {
    Ok(match effect {
        Effect::Temporal(e) => HybridSetting::from_trace(ev, trace, e)?.analyze()?.cause,
        Effect::Discrete(f) => DiscreteSetting::from_trace(ev, trace, f)?.find_direct_cause()?,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Elimination {
    pub cause: CausePair,
    pub scenario: Scenario,
}

/// Iterated elimination: replace the current primary cause with
/// `noOp(time(a))` until the result is no longer a valid setting or has no
/// primary cause. Each step's cause is unique, so the chain is forced.
pub fn preempted_contributors(ev: &Evaluator<'_>, effect: &Effect, sigma: &Scenario) -> Result<Vec<Elimination>, CfError> {
    let first = primary_cause(ev, effect, sigma)?.ok_or(CfError::NoPrimaryCause)?;
    let mut steps = Vec::new();
    let mut cause = first;
    let mut current = sigma.clone();
    loop {
        current = cf_one(&current, &Replacement::noop_for(&cause))?;
        steps.push(Elimination {
            cause: cause.clone(),
            scenario: current.clone(),
        });
        match primary_cause(ev, effect, &current) {
            Ok(Some(next)) => cause = next,
            Ok(None) | Err(CfError::Cause(CauseError::Setting(_))) => return Ok(steps),
            Err(e) => return Err(e),
        }
    }
}

/// The defused situation: the last scenario of the elimination chain.
pub fn defused_situation(ev: &Evaluator<'_>, effect: &Effect, sigma: &Scenario) -> Result<Scenario, CfError> {
    Ok(preempted_contributors(ev, effect, sigma)?
        .pop()
        .expect("a primary cause yields at least one step")
        .scenario)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ButForVerdict {
    DependenceConfirmed,
    ImplicitInInitialState,
    NotApplicable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ButForMode {
    /// Compare against the defused situation.
    Defused,
    /// Naive but-for: remove only the primary cause.
    SingleRemoval,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ButForReport {
    pub mode: ButForMode,
    pub original: Scenario,
    pub cause: Option<CausePair>,
    pub defused: Scenario,
    pub replacements: Vec<Replacement>,
    pub defused_executable: bool,
    pub effect_in_defused: bool,
    /// Every context of the effect's fluent is false in `S_0` (vacuously
    /// true for discrete effects).
    pub contexts_initially_false: bool,
    pub verdict: ButForVerdict,
}

impl ButForReport {
    /// The effect survives in an executable counterfactual.
    pub fn effect_persists(&self) -> bool {
        self.effect_in_defused && self.defused_executable
    }
}

fn effect_holds_at_end(ev: &Evaluator<'_>, effect: &Effect, trace: &Trace) -> Result<bool, EvalError> {
    let n = trace.len();
    match effect {
        Effect::Temporal(e) => ev.holds_effect_in(e, trace.state(n), trace.start(n)),
        Effect::Discrete(f) => ev.eval(f, trace.state(n), &Bindings::new()),
    }
}

fn contexts_initially_false(ev: &Evaluator<'_>, effect: &Effect) -> Result<bool, EvalError> {
    let Effect::Temporal(e) = effect else {
        return Ok(true);
    };
    let s0 = ev.initial_state()?;
    for gamma in ev.contexts(&e.ground_fluent())? {
        if ev.eval(gamma, &s0, &Bindings::new())? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Counterfactual dependence check against the defused situation (or, in
/// [`ButForMode::SingleRemoval`], against removal of the cause alone).
///
/// With no primary cause, a report is still produced when some context holds
/// initially, since the effect then stems from `S_0`; otherwise
/// [`CfError::NoPrimaryCause`].
pub fn butfor_report(ev: &Evaluator<'_>, effect: &Effect, sigma: &Scenario, mode: ButForMode) -> Result<ButForReport, CfError> {
    let ctx_false = contexts_initially_false(ev, effect)?;
    let cause = primary_cause(ev, effect, sigma)?;
    let (defused, replacements) = match (&cause, mode) {
        (None, _) if !ctx_false => (sigma.clone(), Vec::new()),
        (None, _) => return Err(CfError::NoPrimaryCause),
        (Some(c), ButForMode::SingleRemoval) => {
            let r = Replacement::noop_for(c);
            (cf_one(sigma, &r)?, vec![r])
        }
        (Some(_), ButForMode::Defused) => {
            let steps = preempted_contributors(ev, effect, sigma)?;
            let replacements = steps.iter().map(|s| Replacement::noop_for(&s.cause)).collect();
            (steps.last().expect("non-empty").scenario.clone(), replacements)
        }
    };
    let trace = ev.trace(&defused)?;
    let defused_executable = trace.is_executable();
    let effect_in_defused = effect_holds_at_end(ev, effect, &trace)?;
    let verdict = if !ctx_false {
        ButForVerdict::ImplicitInInitialState
    } else if !(effect_in_defused && defused_executable) {
        ButForVerdict::DependenceConfirmed
    } else {
        ButForVerdict::NotApplicable
    };
    Ok(ButForReport {
        mode,
        original: sigma.clone(),
        cause,
        defused,
        replacements,
        defused_executable,
        effect_in_defused,
        contexts_initially_false: ctx_false,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_effect, parse_scenario, parse_theory};
    use crate::theory::HybridTheory;

    fn npp() -> HybridTheory {
        parse_theory(include_str!("../../../fixtures/npp.hct")).unwrap()
    }

    fn act(name: &str, t: i64) -> ActionTerm {
        ActionTerm::new(name, vec!["P1".into()], t)
    }

    fn fixture(th: &HybridTheory, text: &str) -> Scenario {
        parse_scenario(text, th).unwrap()
    }

    #[test]
    fn single_replacements() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let s2 = fixture(&th, include_str!("../../../fixtures/s2.hcs"));
        let s2p = fixture(&th, include_str!("../../../fixtures/s2p.hcs"));
        let r = Replacement::noop_for(&CausePair::new(act("csFailure", 15), 1));
        assert_eq!(cf_one(&s2, &r).unwrap(), s2p);
        assert_eq!(cfex_one(&ev, &s2, &r).unwrap(), Some(s2p.clone()));

        let same = Replacement {
            new_action: act("csFailure", 15),
            old_action: act("csFailure", 15),
            ts: Timestamp(1),
        };
        assert_eq!(cf_one(&s2, &same), Err(CfError::IdenticalReplacement));
        let wrong = Replacement::noop_for(&CausePair::new(act("rup", 5), 1));
        assert!(matches!(cf_one(&s2, &wrong), Err(CfError::Mismatch { .. })));
        let far = Replacement::noop_for(&CausePair::new(act("rup", 5), 9));
        assert!(matches!(cf_one(&s2, &far), Err(CfError::OutOfRange { .. })));

        let rf = fixture(&th, "rup(P1, 1); fixP(P1, 2)");
        let r0 = Replacement::noop_for(&CausePair::new(act("rup", 1), 0));
        assert_eq!(cfex_one(&ev, &rf, &r0).unwrap(), None);
        let r2 = Replacement::noop_for(&CausePair::new(act("mRad", 20), 2));
        assert!(cfex_one(&ev, &s2, &r2).unwrap().is_some());

        let thm7 = fixture(&th, include_str!("../../../fixtures/thm7.hcs"));
        let r3 = Replacement::noop_for(&CausePair::new(act("rup", 4), 3));
        let cx = cf_one(&thm7, &r3).unwrap();
        assert_eq!(cx.actions[3], make_noop(4));
        assert_eq!(noop_count(&cx), 1);
        assert_eq!(noop_count(&s2), 0);
        assert_eq!(noop_count(&s2.prefix(0)), 0);
        assert_eq!(noop_count(&s2p), 1);
    }

    #[test]
    fn npp_defusing() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let s2 = fixture(&th, include_str!("../../../fixtures/s2.hcs"));
        let s2p = fixture(&th, include_str!("../../../fixtures/s2p.hcs"));
        let phi = parse_effect("coreTemp(P1) >= 1000", &th).unwrap();
        let steps = preempted_contributors(&ev, &phi, &s2).unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].cause, CausePair::new(act("csFailure", 15), 1));
        assert_eq!(defused_situation(&ev, &phi, &s2).unwrap(), s2p);

        let report = butfor_report(&ev, &phi, &s2, ButForMode::Defused).unwrap();
        assert_eq!(report.verdict, ButForVerdict::DependenceConfirmed);
        assert!(report.defused_executable && !report.effect_in_defused);
    }

    #[test]
    fn preemption_chain() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let thm7 = fixture(&th, include_str!("../../../fixtures/thm7.hcs"));
        let phi = parse_effect("Ruptured(P1)", &th).unwrap();

        let naive = butfor_report(&ev, &phi, &thm7, ButForMode::SingleRemoval).unwrap();
        assert!(naive.effect_persists());
        assert_eq!(naive.verdict, ButForVerdict::NotApplicable);

        let steps = preempted_contributors(&ev, &phi, &thm7).unwrap();
        let causes: Vec<usize> = steps.iter().map(|s| s.cause.ts.0).collect();
        assert_eq!(causes, [3, 4]);
        let full = butfor_report(&ev, &phi, &thm7, ButForMode::Defused).unwrap();
        assert!(full.defused_executable && !full.effect_in_defused);
        assert_eq!(full.verdict, ButForVerdict::DependenceConfirmed);
        assert_eq!(noop_count(&full.defused), 2);
    }

    #[test]
    fn initial_context() {
        let th = parse_theory(include_str!("../../../fixtures/hot.hct")).unwrap();
        let ev = Evaluator::new(&th).unwrap();
        let phi = parse_effect("coreTemp(P1) >= 1000", &th).unwrap();
        let s = fixture(&th, include_str!("../../../fixtures/hot.hcs"));
        let report = butfor_report(&ev, &phi, &s, ButForMode::Defused).unwrap();
        assert_eq!(report.cause, Some(CausePair::new(act("csFailure", 15), 0)));
        assert!(report.effect_in_defused);
        assert_eq!(report.verdict, ButForVerdict::ImplicitInInitialState);

        let quiet = fixture(&th, include_str!("../../../fixtures/hot_thm4.hcs"));
        let report = butfor_report(&ev, &phi, &quiet, ButForMode::Defused).unwrap();
        assert_eq!(report.cause, None);
        assert_eq!(report.verdict, ButForVerdict::ImplicitInInitialState);
        assert_eq!(
            preempted_contributors(&ev, &phi, &quiet),
            Err(CfError::NoPrimaryCause)
        );
    }
}
