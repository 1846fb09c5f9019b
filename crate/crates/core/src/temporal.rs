//! Primary causes of temporal effects.
//!
//! Two independent routes are implemented: the context route finds the
//! achievement situation and asks which action directly caused the context
//! active there; the contribution route searches every candidate
//! `(a, s_a, s_φ, σ′)` for a direct actual contributor. [`HybridSetting::analyze`]
//! runs both and reports a disagreement as an error.

use serde::Serialize;

use crate::discrete::{causes_dir_in, direct_cause_in, CausePair, SettingError};
use crate::evaluator::{EvalError, Evaluator, Trace};
use crate::model::{ActionTerm, Scenario, TimePoint};
use crate::theory::{Bindings, TemporalEffect};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Via {
    DirectDefinition,
    ContributionDefinition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Achievement {
    pub index: usize,
    pub start: TimePoint,
    pub end: TimePoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CauseVerdict {
    pub cause: Option<CausePair>,
    pub achievement: Option<Achievement>,
    pub context: Option<String>,
    pub via: Via,
    pub agreement: bool,
    /// The active context at the achievement situation already held in
    /// `S_0` and never changed: the cause is implicit in the initial state.
    pub implicit_in_initial_state: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CauseError {
    #[error("invalid setting: {0}")]
    Setting(#[from] SettingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("internal disagreement: context route gave {direct:?}, contribution route gave {contribution:?}")]
    Disagreement {
        direct: Option<Box<CausePair>>,
        contribution: Option<Box<CausePair>>,
    },
    #[error("internal error: {0}")]
    Invariant(String),
}

/// A validated hybrid temporal achievement setting.
pub struct HybridSetting<'a> {
    ev: &'a Evaluator<'a>,
    trace: Trace,
    effect: TemporalEffect,
}

impl<'a> HybridSetting<'a> {
    /// Checks `σ ≠ S_0`, `Exec(σ)`, `¬φ[start(S_0), S_0]`,
    /// `¬φ[time(α1), S_0]` and `φ[start(σ), σ]`, naming the first that fails.
    pub fn new(ev: &'a Evaluator<'a>, scenario: &Scenario, effect: &TemporalEffect) -> Result<Self, SettingError> {
        let trace = ev.trace(scenario)?;
        Self::from_trace(ev, trace, effect)
    }

    pub fn from_trace(ev: &'a Evaluator<'a>, trace: Trace, effect: &TemporalEffect) -> Result<Self, SettingError> {
        if trace.is_empty() {
            return Err(SettingError::EmptyScenario);
        }
        if let Some(v) = &trace.violation {
            return Err(SettingError::NotExecutable(v.clone()));
        }
        let s0 = trace.state(0);
        if ev.holds_effect_in(effect, s0, &s0.start)? {
            return Err(SettingError::EffectInitiallyTrue);
        }
        let first = &trace.scenario.actions[0].time;
        if ev.holds_effect_in(effect, s0, first)? {
            return Err(SettingError::EffectBeforeFirstAction(first.clone()));
        }
        let n = trace.len();
        if !ev.holds_effect_in(effect, trace.state(n), trace.start(n))? {
            return Err(SettingError::EffectNotAchieved);
        }
        Ok(HybridSetting {
            ev,
            trace,
            effect: effect.clone(),
        })
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn effect(&self) -> &TemporalEffect {
        &self.effect
    }

    fn holds_at_end(&self, k: usize, within: usize) -> Result<bool, EvalError> {
        self.ev
            .holds_effect_in(&self.effect, self.trace.state(k), self.trace.end_within(k, within))
    }

    fn holds_throughout(&self, k: usize) -> Result<bool, EvalError> {
        self.ev.holds_on_interval_in(
            &self.effect,
            self.trace.state(k),
            self.trace.start(k),
            self.trace.end(k),
        )
    }

    /// Whether prefix `k` qualifies as an achievement situation.
    pub fn is_achievement(&self, k: usize) -> Result<bool, EvalError> {
        let n = self.trace.len();
        if !self.holds_at_end(k, n)? {
            return Ok(false);
        }
        for j in k + 1..=n {
            if !self.holds_throughout(j)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Index of `sφ`, the earliest prefix at whose end `φ` holds and on every
    /// later interval of which `φ` keeps holding.
    pub fn achv_sit(&self) -> Result<Option<usize>, EvalError> {
        for k in 0..=self.trace.len() {
            if self.is_achievement(k)? {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    fn achievement(&self, k: usize) -> Achievement {
        Achievement {
            index: k,
            start: self.trace.start(k).clone(),
            end: self.trace.end(k).clone(),
        }
    }

    /// Context route: the direct cause of the context active in `sφ`,
    /// searched within `sφ`.
    pub fn primary_cause_direct(&self) -> Result<CauseVerdict, CauseError> {
        let k = self
            .achv_sit()?
            .ok_or_else(|| CauseError::Invariant("valid setting without achievement situation".into()))?;
        let atom = self.effect.ground_fluent();
        let mut verdict = CauseVerdict {
            cause: None,
            achievement: Some(self.achievement(k)),
            context: None,
            via: Via::DirectDefinition,
            agreement: true,
            implicit_in_initial_state: false,
        };
        let Some(ctx) = self.ev.active_context(self.trace.state(k), &atom)? else {
            return Ok(verdict);
        };
        verdict.context = Some(self.ev.context_label(&atom, ctx)?.to_string());
        let gamma = &self.ev.contexts(&atom)?[ctx];
        verdict.cause = direct_cause_in(self.ev, &self.trace, gamma, k)?;
        verdict.implicit_in_initial_state = verdict.cause.is_none();
        Ok(verdict)
    }

    /// `DirPossContr(a, s_a, sφ, σ′, φ)` where `s_a`, `sφ` and `σ′` are the
    /// prefixes of length `sa`, `sphi` and `sigma_prime` of this scenario.
    pub fn dir_poss_contr(
        &self,
        action: &ActionTerm,
        sa: usize,
        sphi: usize,
        sigma_prime: usize,
    ) -> Result<bool, EvalError> {
        let n = self.trace.len();
        if !(sa < sphi && sphi <= sigma_prime && sigma_prime <= n) {
            return Ok(false);
        }
        let tr = &self.trace;
        if !tr.prefix_executable(sa) || tr.scenario.actions[sa] != *action {
            return Ok(false);
        }
        let state_a = tr.state(sa);
        if action.time < state_a.start || !self.ev.poss(action, state_a)? {
            return Ok(false);
        }
        if self.ev.holds_effect_in(&self.effect, state_a, &action.time)? {
            return Ok(false);
        }
        if !self.holds_at_end(sphi, sigma_prime)? {
            return Ok(false);
        }
        let atom = self.effect.ground_fluent();
        for gamma in self.ev.contexts(&atom)? {
            if causes_dir_in(self.ev, tr, action, sa, gamma, sphi)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// `DirActContr`: some prefix `σ′` of the scenario with `sφ ≤ σ′` works.
    pub fn dir_act_contr(&self, action: &ActionTerm, sa: usize, sphi: usize) -> Result<bool, EvalError> {
        for m in sphi..=self.trace.len() {
            if self.dir_poss_contr(action, sa, sphi, m)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Contribution route: scans every earlier action for a direct actual
    /// contributor to `φ` in `sφ`; more than one would contradict uniqueness.
    pub fn prim_cause(&self) -> Result<CauseVerdict, CauseError> {
        let k = self
            .achv_sit()?
            .ok_or_else(|| CauseError::Invariant("valid setting without achievement situation".into()))?;
        let mut found = Vec::new();
        for sa in 0..k {
            let action = &self.trace.scenario.actions[sa];
            if self.dir_act_contr(action, sa, k)? {
                found.push(CausePair::new(action.clone(), sa));
            }
        }
        if found.len() > 1 {
            return Err(CauseError::Invariant(format!(
                "{} primary causes found: {}",
                found.len(),
                found.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
            )));
        }
        let atom = self.effect.ground_fluent();
        let state = self.trace.state(k);
        let ctx = self.ev.active_context(state, &atom)?;
        let context = ctx
            .map(|c| self.ev.context_label(&atom, c).map(str::to_string))
            .transpose()?;
        let implicit = match ctx {
            Some(c) if found.is_empty() => {
                let gamma = &self.ev.contexts(&atom)?[c];
                let mut always = true;
                for j in 0..=k {
                    always &= self.ev.eval(gamma, self.trace.state(j), &Bindings::new())?;
                }
                always
            }
            _ => false,
        };
        Ok(CauseVerdict {
            cause: found.pop(),
            achievement: Some(self.achievement(k)),
            context,
            via: Via::ContributionDefinition,
            agreement: true,
            implicit_in_initial_state: implicit,
        })
    }

    /// Runs both routes; agreement is required.
    pub fn analyze(&self) -> Result<CauseVerdict, CauseError> {
        let direct = self.primary_cause_direct()?;
        let contribution = self.prim_cause()?;
        if direct.cause != contribution.cause {
            return Err(CauseError::Disagreement {
                direct: direct.cause.map(Box::new),
                contribution: contribution.cause.map(Box::new),
            });
        }
        Ok(direct)
    }

    pub fn check_equivalence(&self) -> Result<bool, CauseError> {
        Ok(self.primary_cause_direct()?.cause == self.prim_cause()?.cause)
    }
}
