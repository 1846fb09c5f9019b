//! Progression of hybrid theories along scenarios.
//!
//! A [`State`] records the discrete truth assignment of one situation and,
//! for each ground temporal fluent, its value at `start(s)` together with
//! the active context. Crossing an action carries every temporal value over
//! continuously: the new base is the old law evaluated at `time(a)`.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::model::{ActionTerm, Rational, Scenario, Situation, TimePoint, Timestamp};
use crate::theory::{
    bind_params, ActionRef, Bindings, Formula, GroundAtom, HybridTheory, PatArg, TemporalEffect,
    Term, TheoryError, Trigger,
};

/// Why a scenario is not executable at a given action.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExecViolation {
    Precondition { timestamp: usize, action: String },
    TimeOrder { timestamp: usize, action: String, start: TimePoint },
}

impl ExecViolation {
    pub fn timestamp(&self) -> usize {
        match self {
            ExecViolation::Precondition { timestamp, .. }
            | ExecViolation::TimeOrder { timestamp, .. } => *timestamp,
        }
    }
}

impl std::fmt::Display for ExecViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExecViolation::Precondition { timestamp, action } => {
                write!(f, "action {action} at timestamp {timestamp} is not possible")
            }
            ExecViolation::TimeOrder { timestamp, action, start } => write!(
                f,
                "action {action} at timestamp {timestamp} occurs before the situation start {start}"
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("mutual exclusion violated at timestamp {timestamp}: contexts {} of {fluent} hold together", labels.join(", "))]
    MutexViolation {
        timestamp: usize,
        fluent: GroundAtom,
        labels: Vec<String>,
    },
    #[error("action {action} both causes and cancels {atom}")]
    ConflictingTriggers { action: Box<ActionTerm>, atom: GroundAtom },
    #[error("After({action}, ..) evaluated in a situation starting at {start}")]
    TemporalParadox { action: Box<ActionTerm>, start: TimePoint },
    #[error("scenario is not executable: {0}")]
    NotExecutable(ExecViolation),
    #[error("situation is not a prefix of the scenario")]
    NotAPrefix,
    #[error("unknown temporal fluent {0}")]
    UnknownTemporal(GroundAtom),
    #[error("unknown discrete fluent {0}")]
    UnknownDiscrete(GroundAtom),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

struct TemporalSlot {
    atom: GroundAtom,
    labels: Vec<String>,
    conditions: Vec<Formula>,
    rates: Vec<Rational>,
}

/// Trigger instance for one ground discrete atom.
struct GroundSsa {
    atom: usize,
    bindings: Bindings,
}

/// Compiled view of a theory for repeated evaluation.
pub struct Evaluator<'t> {
    theory: &'t HybridTheory,
    atoms: Vec<GroundAtom>,
    atom_index: HashMap<GroundAtom, usize>,
    /// Ground atoms per discrete fluent, keyed by fluent name.
    ssa_instances: HashMap<String, Vec<GroundSsa>>,
    slots: Vec<TemporalSlot>,
    slot_index: HashMap<GroundAtom, usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FluentState {
    pub base: Rational,
    pub context: Option<usize>,
}

/// Evaluation state of one situation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub start: TimePoint,
    truth: Vec<bool>,
    temporal: Vec<FluentState>,
}

impl<'t> Evaluator<'t> {
    pub fn new(theory: &'t HybridTheory) -> Result<Self, EvalError> {
        let atoms = theory.ground_discrete_atoms();
        let atom_index: HashMap<GroundAtom, usize> =
            atoms.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        let mut ssa_instances: HashMap<String, Vec<GroundSsa>> = HashMap::new();
        for ssa in theory.fluents.values() {
            let list = ssa_instances.entry(ssa.fluent.clone()).or_default();
            for args in theory.ground_tuples(&ssa.params) {
                let atom = GroundAtom::new(ssa.fluent.clone(), args.clone());
                list.push(GroundSsa {
                    atom: atom_index[&atom],
                    bindings: bind_params(&ssa.params, &args),
                });
            }
        }
        let mut slots = Vec::new();
        for atom in theory.ground_temporal_atoms() {
            let mut slot = TemporalSlot {
                atom: atom.clone(),
                labels: Vec::new(),
                conditions: Vec::new(),
                rates: Vec::new(),
            };
            for (label, cond, rate) in theory.ground_contexts(&atom)? {
                slot.labels.push(label);
                slot.conditions.push(cond);
                slot.rates.push(rate);
            }
            slots.push(slot);
        }
        let slot_index = slots
            .iter()
            .enumerate()
            .map(|(i, s)| (s.atom.clone(), i))
            .collect();
        Ok(Evaluator {
            theory,
            atoms,
            atom_index,
            ssa_instances,
            slots,
            slot_index,
        })
    }

    pub fn theory(&self) -> &'t HybridTheory {
        self.theory
    }

    pub fn temporal_atoms(&self) -> impl Iterator<Item = &GroundAtom> {
        self.slots.iter().map(|s| &s.atom)
    }

    pub fn discrete_atoms(&self) -> &[GroundAtom] {
        &self.atoms
    }

    fn slot(&self, atom: &GroundAtom) -> Result<usize, EvalError> {
        self.slot_index
            .get(atom)
            .copied()
            .ok_or_else(|| EvalError::UnknownTemporal(atom.clone()))
    }

    /// State of `S_0`.
    pub fn initial_state(&self) -> Result<State, EvalError> {
        let th = self.theory;
        let truth = self
            .atoms
            .iter()
            .map(|a| th.init_discrete.get(a).copied().unwrap_or(false))
            .collect();
        let mut state = State {
            start: th.initial_start.clone(),
            truth,
            temporal: Vec::new(),
        };
        for slot in &self.slots {
            let base = th
                .init_temporal
                .get(&slot.atom)
                .cloned()
                .ok_or_else(|| EvalError::UnknownTemporal(slot.atom.clone()))?;
            state.temporal.push(FluentState { base, context: None });
        }
        self.assign_contexts(&mut state, 0)?;
        Ok(state)
    }

    fn assign_contexts(&self, state: &mut State, timestamp: usize) -> Result<(), EvalError> {
        for (i, slot) in self.slots.iter().enumerate() {
            let mut active = Vec::new();
            for (c, cond) in slot.conditions.iter().enumerate() {
                if self.eval(cond, state, &Bindings::new())? {
                    active.push(c);
                }
            }
            if active.len() > 1 {
                return Err(EvalError::MutexViolation {
                    timestamp,
                    fluent: slot.atom.clone(),
                    labels: active.iter().map(|&c| slot.labels[c].clone()).collect(),
                });
            }
            state.temporal[i].context = active.first().copied();
        }
        Ok(())
    }

    fn trigger_fires(&self, trig: &Trigger, action: &ActionTerm, env: &Bindings, state: &State) -> Result<bool, EvalError> {
        let pat = &trig.pattern;
        if pat.name != action.name || pat.args.len() != action.args.len() {
            return Ok(false);
        }
        let mut env = env.clone();
        for (p, a) in pat.args.iter().zip(&action.args) {
            match p {
                PatArg::Any => {}
                PatArg::Const(c) if c != a => return Ok(false),
                PatArg::Const(_) => {}
                PatArg::Var(v) => match env.get(v) {
                    Some(bound) if bound != a => return Ok(false),
                    Some(_) => {}
                    None => {
                        env.insert(v.clone(), a.clone());
                    }
                },
            }
        }
        match &trig.guard {
            Some(g) => self.eval(g, state, &env),
            None => Ok(true),
        }
    }

    /// `do(a, s)` without checking `Poss`; `timestamp` labels errors.
    pub fn step(&self, state: &State, action: &ActionTerm, timestamp: usize) -> Result<State, EvalError> {
        let mut next = state.clone();
        if !action.is_noop() {
            for ssa in self.theory.fluents.values() {
                let mentions = |ts: &[Trigger]| ts.iter().any(|t| t.pattern.name == action.name);
                if !mentions(&ssa.caused_by) && !mentions(&ssa.canceled_by) {
                    continue;
                }
                for inst in &self.ssa_instances[&ssa.fluent] {
                    let mut pos = false;
                    for t in &ssa.caused_by {
                        if self.trigger_fires(t, action, &inst.bindings, state)? {
                            pos = true;
                            break;
                        }
                    }
                    let mut neg = false;
                    for t in &ssa.canceled_by {
                        if self.trigger_fires(t, action, &inst.bindings, state)? {
                            neg = true;
                            break;
                        }
                    }
                    if pos && neg {
                        return Err(EvalError::ConflictingTriggers {
                            action: Box::new(action.clone()),
                            atom: self.atoms[inst.atom].clone(),
                        });
                    }
                    next.truth[inst.atom] = pos || (state.truth[inst.atom] && !neg);
                }
            }
        }
        for (i, fs) in next.temporal.iter_mut().enumerate() {
            fs.base = self.value_in(state, i, &action.time);
        }
        next.start = action.time.clone();
        self.assign_contexts(&mut next, timestamp)?;
        Ok(next)
    }

    fn rate(&self, state: &State, slot: usize) -> Rational {
        match state.temporal[slot].context {
            Some(c) => self.slots[slot].rates[c].clone(),
            None => Rational::zero(),
        }
    }

    fn value_in(&self, state: &State, slot: usize, t: &TimePoint) -> Rational {
        let fs = &state.temporal[slot];
        match fs.context {
            Some(c) => &fs.base + &(&t.since(&state.start) * &self.slots[slot].rates[c]),
            None => fs.base.clone(),
        }
    }

    /// `f(x̄, t, s)` under the state-evolution axiom.
    pub fn value_at(&self, state: &State, atom: &GroundAtom, t: &TimePoint) -> Result<Rational, EvalError> {
        Ok(self.value_in(state, self.slot(atom)?, t))
    }

    pub fn rate_of(&self, state: &State, atom: &GroundAtom) -> Result<Rational, EvalError> {
        Ok(self.rate(state, self.slot(atom)?))
    }

    /// Index of the active context, or `None` when the fluent is constant.
    pub fn active_context(&self, state: &State, atom: &GroundAtom) -> Result<Option<usize>, EvalError> {
        Ok(state.temporal[self.slot(atom)?].context)
    }

    pub fn context_label(&self, atom: &GroundAtom, idx: usize) -> Result<&str, EvalError> {
        Ok(&self.slots[self.slot(atom)?].labels[idx])
    }

    /// Ground contexts `γ_i^f` of a temporal fluent, in declaration order.
    pub fn contexts(&self, atom: &GroundAtom) -> Result<&[Formula], EvalError> {
        Ok(&self.slots[self.slot(atom)?].conditions)
    }

    pub fn holds_atom(&self, state: &State, atom: &GroundAtom) -> Result<bool, EvalError> {
        self.atom_index
            .get(atom)
            .map(|&i| state.truth[i])
            .ok_or_else(|| EvalError::UnknownDiscrete(atom.clone()))
    }

    fn ground_action(&self, a: &ActionRef, env: &Bindings) -> Result<ActionTerm, EvalError> {
        let args = a
            .args
            .iter()
            .map(|t| resolve(t, env))
            .collect::<Result<Vec<_>, _>>()?;
        let action = ActionTerm::new(a.name.clone(), args, a.time.clone());
        self.theory.check_action(&action)?;
        Ok(action)
    }

    /// `Poss(a, s)` from the declared precondition (`noOp` is always possible).
    pub fn poss(&self, action: &ActionTerm, state: &State) -> Result<bool, EvalError> {
        if action.is_noop() {
            return Ok(true);
        }
        self.theory.check_action(action)?;
        let decl = &self.theory.actions[&action.name];
        self.eval(&decl.precondition, state, &bind_params(&decl.params, &action.args))
    }

    /// `φ[s]` for a dynamic formula; free variables are looked up in `env`.
    pub fn eval(&self, f: &Formula, state: &State, env: &Bindings) -> Result<bool, EvalError> {
        Ok(match f {
            Formula::True => true,
            Formula::Atom(a) => {
                let args = a
                    .args
                    .iter()
                    .map(|t| resolve(t, env))
                    .collect::<Result<Vec<_>, _>>()?;
                self.holds_atom(state, &GroundAtom::new(a.fluent.clone(), args))?
            }
            Formula::Poss(a) => self.poss(&self.ground_action(a, env)?, state)?,
            Formula::After(a, body) => {
                let action = self.ground_action(a, env)?;
                if action.time < state.start {
                    return Err(EvalError::TemporalParadox {
                        action: Box::new(action),
                        start: state.start.clone(),
                    });
                }
                let next = self.step(state, &action, usize::MAX)?;
                self.eval(body, &next, env)?
            }
            Formula::Not(g) => !self.eval(g, state, env)?,
            Formula::And(a, b) => self.eval(a, state, env)? && self.eval(b, state, env)?,
            Formula::Or(a, b) => self.eval(a, state, env)? || self.eval(b, state, env)?,
            Formula::Exists { var, sort, body } => {
                let mut inner = env.clone();
                for obj in self.theory.objects_of_sort(sort) {
                    inner.insert(var.clone(), obj.to_string());
                    if self.eval(body, state, &inner)? {
                        return Ok(true);
                    }
                }
                false
            }
        })
    }

    /// `φ[t, s]` for a temporal effect.
    pub fn holds_effect_in(&self, effect: &TemporalEffect, state: &State, t: &TimePoint) -> Result<bool, EvalError> {
        let v = self.value_at(state, &effect.ground_fluent(), t)?;
        Ok(effect.holds_for(&v))
    }

    /// `∀t ∈ [from, to]. φ[t, s]` under the linear law: endpoint checks for
    /// inequalities; `=` additionally needs a constant value or a point.
    pub fn holds_on_interval_in(
        &self,
        effect: &TemporalEffect,
        state: &State,
        from: &TimePoint,
        to: &TimePoint,
    ) -> Result<bool, EvalError> {
        let atom = effect.ground_fluent();
        let at_from = effect.holds_for(&self.value_at(state, &atom, from)?);
        let at_to = effect.holds_for(&self.value_at(state, &atom, to)?);
        if effect.relation == crate::theory::Relation::Eq && from != to {
            return Ok(at_from && self.rate_of(state, &atom)?.is_zero());
        }
        Ok(at_from && at_to)
    }

    /// Computes the state of every prefix of `scenario`.
    pub fn trace(&self, scenario: &Scenario) -> Result<Trace, EvalError> {
        let mut states = vec![self.initial_state()?];
        let mut violation = None;
        for (i, a) in scenario.actions.iter().enumerate() {
            let cur = &states[i];
            if violation.is_none() {
                if a.time < cur.start {
                    violation = Some(ExecViolation::TimeOrder {
                        timestamp: i,
                        action: a.to_string(),
                        start: cur.start.clone(),
                    });
                } else if !self.poss(a, cur)? {
                    violation = Some(ExecViolation::Precondition {
                        timestamp: i,
                        action: a.to_string(),
                    });
                }
            }
            let next = self.step(cur, a, i + 1)?;
            states.push(next);
        }
        Ok(Trace {
            scenario: scenario.clone(),
            states,
            violation,
        })
    }
}

fn resolve(t: &Term, env: &Bindings) -> Result<String, EvalError> {
    match t {
        Term::Const(c) => Ok(c.clone()),
        Term::Var(v) => env
            .get(v)
            .cloned()
            .ok_or_else(|| EvalError::Theory(TheoryError::UnboundVariable(v.clone()))),
    }
}

/// States of every prefix of one scenario plus its first executability
/// violation, if any.
#[derive(Clone, Debug)]
pub struct Trace {
    pub scenario: Scenario,
    pub states: Vec<State>,
    pub violation: Option<ExecViolation>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.scenario.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenario.is_empty()
    }

    pub fn is_executable(&self) -> bool {
        self.violation.is_none()
    }

    /// Whether the prefix of length `k` is executable.
    pub fn prefix_executable(&self, k: usize) -> bool {
        self.violation.as_ref().is_none_or(|v| v.timestamp() >= k)
    }

    pub fn state(&self, k: usize) -> &State {
        &self.states[k]
    }

    pub fn start(&self, k: usize) -> &TimePoint {
        &self.states[k].start
    }

    /// `end(s_k, σ)`: the start of `σ` itself, or the time of the next action.
    pub fn end(&self, k: usize) -> &TimePoint {
        if k == self.len() {
            &self.states[k].start
        } else {
            &self.scenario.actions[k].time
        }
    }

    /// `end(s_k, σ_m)` for the prefix `σ_m` of the trace's scenario.
    pub fn end_within(&self, k: usize, m: usize) -> &TimePoint {
        if k == m {
            &self.states[k].start
        } else {
            &self.scenario.actions[k].time
        }
    }
}

/// Free-standing API over a theory; each call compiles a fresh evaluator.
/// Engines that issue many queries should hold an [`Evaluator`] instead.
pub fn poss(action: &ActionTerm, s: &Situation, th: &HybridTheory) -> Result<bool, EvalError> {
    let ev = Evaluator::new(th)?;
    let trace = ev.trace(s)?;
    ev.poss(action, trace.state(s.len()))
}

pub fn is_executable(s: &Situation, th: &HybridTheory) -> Result<bool, EvalError> {
    let ev = Evaluator::new(th)?;
    Ok(ev.trace(s)?.is_executable())
}

/// `end(sp, σ)`.
pub fn end_time(sp: &Situation, sigma: &Scenario) -> Result<TimePoint, EvalError> {
    if !sp.is_prefix_of(sigma) {
        return Err(EvalError::NotAPrefix);
    }
    Ok(match sigma.actions.get(sp.len()) {
        Some(a) => a.time.clone(),
        None => sigma.start_of_prefix(sigma.len()).clone(),
    })
}

pub fn eval_temporal(
    fluent: &str,
    args: &[&str],
    t: &TimePoint,
    sp: &Situation,
    th: &HybridTheory,
) -> Result<Rational, EvalError> {
    let ev = Evaluator::new(th)?;
    let trace = ev.trace(sp)?;
    let atom = GroundAtom::new(fluent, args.iter().map(|a| a.to_string()).collect());
    ev.value_at(trace.state(sp.len()), &atom, t)
}

pub fn holds_effect(effect: &TemporalEffect, t: &TimePoint, sp: &Situation, th: &HybridTheory) -> Result<bool, EvalError> {
    let ev = Evaluator::new(th)?;
    let trace = ev.trace(sp)?;
    ev.holds_effect_in(effect, trace.state(sp.len()), t)
}

pub fn holds_on_interval(
    effect: &TemporalEffect,
    sp: &Situation,
    sigma: &Scenario,
    th: &HybridTheory,
) -> Result<bool, EvalError> {
    let end = end_time(sp, sigma)?;
    let ev = Evaluator::new(th)?;
    let trace = ev.trace(sp)?;
    let state = trace.state(sp.len());
    ev.holds_on_interval_in(effect, state, &state.start.clone(), &end)
}

/// `φ[s]` for a ground dynamic formula.
pub fn eval_dynamic(f: &Formula, sp: &Situation, th: &HybridTheory) -> Result<bool, EvalError> {
    let ev = Evaluator::new(th)?;
    let trace = ev.trace(sp)?;
    ev.eval(f, trace.state(sp.len()), &Bindings::new())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Endpoints {
    pub start: Rational,
    pub end: Rational,
}

/// One situation of a timeline export.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimelineRecord {
    pub timestamp: Timestamp,
    pub action: Option<String>,
    pub start: TimePoint,
    pub end: TimePoint,
    pub discrete: BTreeMap<String, bool>,
    pub contexts: BTreeMap<String, Option<String>>,
    pub values: BTreeMap<String, Endpoints>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Timeline {
    pub records: Vec<TimelineRecord>,
}

impl Timeline {
    pub fn value_at_start(&self, timestamp: usize, fluent: &GroundAtom) -> Option<&Rational> {
        self.records
            .get(timestamp)?
            .values
            .get(&fluent.to_string())
            .map(|e| &e.start)
    }

    pub fn value_at_end(&self, timestamp: usize, fluent: &GroundAtom) -> Option<&Rational> {
        self.records
            .get(timestamp)?
            .values
            .get(&fluent.to_string())
            .map(|e| &e.end)
    }
}

impl Evaluator<'_> {
    pub fn timeline(&self, trace: &Trace) -> Result<Timeline, EvalError> {
        let mut records = Vec::new();
        for k in 0..=trace.len() {
            let state = trace.state(k);
            let (start, end) = (trace.start(k), trace.end(k));
            let mut contexts = BTreeMap::new();
            let mut values = BTreeMap::new();
            for (i, slot) in self.slots.iter().enumerate() {
                let label = state.temporal[i].context.map(|c| slot.labels[c].clone());
                contexts.insert(slot.atom.to_string(), label);
                values.insert(
                    slot.atom.to_string(),
                    Endpoints {
                        start: self.value_in(state, i, start),
                        end: self.value_in(state, i, end),
                    },
                );
            }
            records.push(TimelineRecord {
                timestamp: Timestamp(k),
                action: k.checked_sub(1).map(|i| trace.scenario.actions[i].to_string()),
                start: start.clone(),
                end: end.clone(),
                discrete: self
                    .atoms
                    .iter()
                    .zip(&state.truth)
                    .map(|(a, v)| (a.to_string(), *v))
                    .collect(),
                contexts,
                values,
            });
        }
        Ok(Timeline { records })
    }
}

/// Timeline of an executable scenario.
pub fn progress(s: &Situation, th: &HybridTheory) -> Result<Timeline, EvalError> {
    let ev = Evaluator::new(th)?;
    let trace = ev.trace(s)?;
    if let Some(v) = trace.violation.clone() {
        return Err(EvalError::NotExecutable(v));
    }
    ev.timeline(&trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_scenario, parse_theory};
    use crate::model::make_noop;
    use crate::theory::Relation;

    fn npp() -> HybridTheory {
        parse_theory(include_str!("../../../fixtures/npp.hct")).unwrap()
    }

    fn act(name: &str, t: i64) -> ActionTerm {
        ActionTerm::new(name, vec!["P1".into()], t)
    }

    fn sigma2(th: &HybridTheory) -> Scenario {
        parse_scenario("rup(P1,5); csFailure(P1,15); mRad(P1,20); fixP(P1,26)", th).unwrap()
    }

    fn phi2() -> TemporalEffect {
        TemporalEffect {
            fluent: "coreTemp".into(),
            args: vec!["P1".into()],
            relation: Relation::Ge,
            threshold: Rational::integer(1000),
        }
    }

    #[test]
    fn preconditions() {
        let th = npp();
        let s0 = Situation::initial(0);
        assert!(poss(&act("rup", 5), &s0, &th).unwrap());
        assert!(!poss(&act("fixP", 3), &s0, &th).unwrap());
        let s1 = s0.append(act("rup", 5));
        assert!(poss(&act("csFailure", 15), &s1, &th).unwrap());
        assert!(poss(&make_noop(1), &s0, &th).unwrap());
    }

    #[test]
    fn executability() {
        let th = npp();
        assert!(is_executable(&sigma2(&th), &th).unwrap());
        let bad = Situation::from_actions(vec![act("rup", 5), act("rup", 3)], 0);
        assert!(!is_executable(&bad, &th).unwrap());
        let s2p = parse_scenario("rup(P1,5); noOp(15); mRad(P1,20); fixP(P1,26)", &th).unwrap();
        assert!(is_executable(&s2p, &th).unwrap());
        let err = progress(&bad, &th).unwrap_err();
        assert!(matches!(err, EvalError::NotExecutable(ExecViolation::TimeOrder { timestamp: 1, .. })));
    }

    #[test]
    fn contexts_along_sigma2() {
        let th = npp();
        let ev = Evaluator::new(&th).unwrap();
        let tr = ev.trace(&sigma2(&th)).unwrap();
        let temp = GroundAtom::new("coreTemp", vec!["P1".into()]);
        let label = |k: usize| {
            ev.active_context(tr.state(k), &temp)
                .unwrap()
                .map(|c| ev.context_label(&temp, c).unwrap().to_string())
        };
        assert_eq!(label(0), None);
        assert_eq!(label(1).as_deref(), Some("g2"));
        assert_eq!(label(2).as_deref(), Some("g1"));
        assert_eq!(label(3).as_deref(), Some("g1"));
        assert_eq!(label(4).as_deref(), Some("g3"));
        let r = GroundAtom::new("Ruptured", vec!["P1".into()]);
        assert!(ev.holds_atom(tr.state(1), &r).unwrap());
        assert!(!ev.holds_atom(tr.state(4), &r).unwrap());
    }

    #[test]
    fn end_times() {
        let th = npp();
        let s2 = sigma2(&th);
        assert_eq!(end_time(&s2, &s2).unwrap(), TimePoint::from(26));
        assert_eq!(end_time(&s2.prefix(0), &s2).unwrap(), TimePoint::from(5));
        assert_eq!(end_time(&s2.prefix(2), &s2).unwrap(), TimePoint::from(20));
        let other = Situation::from_actions(vec![act("mRad", 1)], 0);
        assert_eq!(end_time(&other, &s2), Err(EvalError::NotAPrefix));
    }

    #[test]
    fn npp_timeline_values() {
        let th = npp();
        let s2 = sigma2(&th);
        let v = |t: i64, k: usize| eval_temporal("coreTemp", &["P1"], &TimePoint::from(t), &s2.prefix(k), &th).unwrap();
        assert_eq!(v(5, 0), Rational::integer(-50));
        assert_eq!(v(15, 1), Rational::integer(300));
        assert_eq!(v(20, 2), Rational::integer(800));
        assert_eq!(v(26, 3), Rational::integer(1400));

        let s2p = parse_scenario("rup(P1,5); noOp(15); mRad(P1,20); fixP(P1,26)", &th).unwrap();
        let w = |t: i64, k: usize| eval_temporal("coreTemp", &["P1"], &TimePoint::from(t), &s2p.prefix(k), &th).unwrap();
        assert_eq!(w(20, 2), Rational::integer(475));
        assert_eq!(w(26, 3), Rational::integer(685));
    }

    #[test]
    fn effect_checks() {
        let th = npp();
        let s2 = sigma2(&th);
        let s3 = s2.prefix(3);
        assert!(holds_effect(&phi2(), &TimePoint::from(22), &s3, &th).unwrap());
        assert!(!holds_effect(&phi2(), &TimePoint::from(20), &s3, &th).unwrap());
        assert!(!holds_effect(&phi2(), &TimePoint::from(0), &s2.prefix(0), &th).unwrap());
        assert!(!holds_on_interval(&phi2(), &s3, &s2, &th).unwrap());
        assert!(holds_on_interval(&phi2(), &s2, &s2, &th).unwrap());
    }

    #[test]
    fn equality_needs_constant_value() {
        let th = npp();
        let s2 = sigma2(&th);
        let eq = |v: i64| TemporalEffect {
            relation: Relation::Eq,
            threshold: Rational::integer(v),
            ..phi2()
        };
        assert!(holds_on_interval(&eq(-50), &s2.prefix(0), &s2, &th).unwrap());
        assert!(!holds_on_interval(&eq(300), &s2.prefix(1), &s2, &th).unwrap());
        assert!(holds_on_interval(&eq(1400), &s2, &s2, &th).unwrap());
    }

    #[test]
    fn dynamic_formulas() {
        let th = npp();
        let s0 = Situation::initial(0);
        let cs = Formula::atom("CSFailed", &["P1"]);
        assert!(!eval_dynamic(&cs, &s0, &th).unwrap());
        let fix_cs = ActionRef::ground(&act("fixCS", 1));
        assert!(!eval_dynamic(&Formula::Poss(fix_cs), &s0, &th).unwrap());
        let fail = ActionRef::ground(&act("csFailure", 1));
        assert!(eval_dynamic(&Formula::After(fail, Box::new(cs.clone())), &s0, &th).unwrap());

        let late = Situation::from_actions(vec![act("mRad", 10)], 0);
        let early = ActionRef::ground(&act("csFailure", 3));
        assert!(matches!(
            eval_dynamic(&Formula::After(early, Box::new(cs)), &late, &th),
            Err(EvalError::TemporalParadox { .. })
        ));
    }

    #[test]
    fn mutex_and_conflicts_surface() {
        let th = parse_theory(
            "theory m objects: P1 : plant\n\
             action a(p: plant) poss: true\naction b(p: plant) poss: true\n\
             fluent R(p: plant) caused-by: a(p)\nfluent C(p: plant) caused-by: b(p) canceled-by: b(p)\n\
             fluent D(p: plant) caused-by: a(p)\n\
             temporal temp(p: plant) context g: R(p) rate 1 context h: exists q: plant. D(q) rate 2\n\
             init: temp(P1) = 0",
        )
        .unwrap();
        let ev = Evaluator::new(&th).unwrap();
        let err = ev
            .trace(&Situation::from_actions(vec![act("a", 1)], 0))
            .unwrap_err();
        assert!(matches!(err, EvalError::MutexViolation { timestamp: 1, .. }), "{err}");
        let err = ev
            .trace(&Situation::from_actions(vec![act("b", 1)], 0))
            .unwrap_err();
        assert!(matches!(err, EvalError::ConflictingTriggers { .. }), "{err}");
    }

    #[test]
    fn timeline_export() {
        let th = npp();
        let tl = progress(&sigma2(&th), &th).unwrap();
        let temp = GroundAtom::new("coreTemp", vec!["P1".into()]);
        assert_eq!(tl.records.len(), 5);
        assert_eq!(tl.value_at_end(3, &temp), Some(&Rational::integer(1400)));
        let json = serde_json::to_value(&tl).unwrap();
        assert_eq!(json["records"][2]["contexts"]["coreTemp(P1)"], "g1");
        assert_eq!(json["records"][1]["action"], "rup(P1, 5)");
    }
}
