//! Reference semantics written straight from the axioms.
//!
//! Fluent truth is computed by recursion on the situation term
//! (`F(do(a,s))` from `F(s)` and the triggers), temporal values by
//! recursion on the carried-over base value, and every causal notion by
//! exhaustive enumeration. Nothing here shares code with the engine beyond
//! the data types.

use std::collections::{BTreeMap, BTreeSet};

use hycause_core::model::{ActionTerm, Rational, Scenario};
use hycause_core::theory::{Formula, GroundAtom, HybridTheory, PatArg, TemporalEffect, Term};

type Env = BTreeMap<String, String>;

pub struct Naive<'t> {
    th: &'t HybridTheory,
}

fn resolve(t: &Term, env: &Env) -> String {
    match t {
        Term::Const(c) => c.clone(),
        Term::Var(v) => env.get(v).cloned().unwrap_or_else(|| panic!("unbound {v}")),
    }
}

impl<'t> Naive<'t> {
    pub fn new(th: &'t HybridTheory) -> Self {
        Naive { th }
    }

    pub fn start(&self, s: &[ActionTerm]) -> Rational {
        match s.last() {
            Some(a) => a.time.0.clone(),
            None => self.th.initial_start.0.clone(),
        }
    }

    /// `end(s_k, σ)` for the prefix of length `k` of `sigma`.
    pub fn end(&self, sigma: &[ActionTerm], k: usize) -> Rational {
        if k == sigma.len() {
            self.start(sigma)
        } else {
            sigma[k].time.0.clone()
        }
    }

    pub fn holds_atom(&self, atom: &GroundAtom, s: &[ActionTerm]) -> bool {
        let Some((a, prev)) = s.split_last() else {
            return self.th.init_discrete.get(atom).copied().unwrap_or(false);
        };
        let ssa = &self.th.fluents[&atom.fluent];
        let env: Env = ssa
            .params
            .iter()
            .map(|p| p.name.clone())
            .zip(atom.args.iter().cloned())
            .collect();
        let fires = |list: &[hycause_core::theory::Trigger]| {
            list.iter().any(|trig| {
                if trig.pattern.name != a.name || trig.pattern.args.len() != a.args.len() {
                    return false;
                }
                let mut env = env.clone();
                for (p, v) in trig.pattern.args.iter().zip(&a.args) {
                    let ok = match p {
                        PatArg::Any => true,
                        PatArg::Const(c) => c == v,
                        PatArg::Var(x) => env.entry(x.clone()).or_insert_with(|| v.clone()) == v,
                    };
                    if !ok {
                        return false;
                    }
                }
                trig.guard.as_ref().is_none_or(|g| self.holds(g, prev, &env))
            })
        };
        let pos = fires(&ssa.caused_by);
        let neg = fires(&ssa.canceled_by);
        assert!(!(pos && neg), "conflicting triggers for {atom} on {a}");
        pos || (self.holds_atom(atom, prev) && !neg)
    }

    pub fn poss(&self, a: &ActionTerm, s: &[ActionTerm]) -> bool {
        if a.is_noop() {
            return true;
        }
        let decl = &self.th.actions[&a.name];
        let env = decl
            .params
            .iter()
            .map(|p| p.name.clone())
            .zip(a.args.iter().cloned())
            .collect();
        self.holds(&decl.precondition, s, &env)
    }

    pub fn holds(&self, f: &Formula, s: &[ActionTerm], env: &Env) -> bool {
        let ground = |r: &hycause_core::theory::ActionRef| {
            ActionTerm::new(
                r.name.clone(),
                r.args.iter().map(|t| resolve(t, env)).collect(),
                r.time.clone(),
            )
        };
        match f {
            Formula::True => true,
            Formula::Atom(a) => self.holds_atom(
                &GroundAtom::new(a.fluent.clone(), a.args.iter().map(|t| resolve(t, env)).collect()),
                s,
            ),
            Formula::Poss(r) => self.poss(&ground(r), s),
            Formula::After(r, g) => {
                let mut next = s.to_vec();
                next.push(ground(r));
                self.holds(g, &next, env)
            }
            Formula::Not(g) => !self.holds(g, s, env),
            Formula::And(a, b) => self.holds(a, s, env) && self.holds(b, s, env),
            Formula::Or(a, b) => self.holds(a, s, env) || self.holds(b, s, env),
            Formula::Exists { var, sort, body } => self.th.objects_of_sort(sort).any(|o| {
                let mut inner = env.clone();
                inner.insert(var.clone(), o.to_string());
                self.holds(body, s, &inner)
            }),
        }
    }

    pub fn ground_holds(&self, f: &Formula, s: &[ActionTerm]) -> bool {
        self.holds(f, s, &Env::new())
    }

    /// Contexts of `atom`, each as (condition, parameter bindings, rate).
    fn contexts(&self, atom: &GroundAtom) -> Vec<(&Formula, Env, &Rational)> {
        let sea = &self.th.temporals[&atom.fluent];
        let env: Env = sea
            .params
            .iter()
            .map(|p| p.name.clone())
            .zip(atom.args.iter().cloned())
            .collect();
        sea.contexts
            .iter()
            .map(|c| (&c.condition, env.clone(), &c.rate))
            .collect()
    }

    /// Indices of the contexts of `atom` that hold in `s`.
    pub fn active_contexts(&self, atom: &GroundAtom, s: &[ActionTerm]) -> Vec<usize> {
        self.contexts(atom)
            .iter()
            .enumerate()
            .filter(|(_, (cond, env, _))| self.holds(cond, s, env))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn context_holds(&self, atom: &GroundAtom, idx: usize, s: &[ActionTerm]) -> bool {
        let ctxs = self.contexts(atom);
        let (cond, env, _) = &ctxs[idx];
        self.holds(cond, s, env)
    }

    /// Value at `start(s)` and the rate in force during `s`.
    pub fn law(&self, atom: &GroundAtom, s: &[ActionTerm]) -> (Rational, Rational) {
        let base = match s.split_last() {
            None => self.th.init_temporal[atom].clone(),
            Some((a, prev)) => self.value(atom, &a.time.0, prev),
        };
        let active = self.active_contexts(atom, s);
        assert!(active.len() <= 1, "mutex violated for {atom}");
        let rate = match active.first() {
            Some(&i) => self.contexts(atom)[i].2.clone(),
            None => Rational::zero(),
        };
        (base, rate)
    }

    pub fn value(&self, atom: &GroundAtom, t: &Rational, s: &[ActionTerm]) -> Rational {
        let (base, rate) = self.law(atom, s);
        &base + &(&(t - &self.start(s)) * &rate)
    }

    pub fn effect_at(&self, e: &TemporalEffect, t: &Rational, s: &[ActionTerm]) -> bool {
        e.holds_for(&self.value(&e.ground_fluent(), t, s))
    }

    /// Checks `φ` at `points` evenly spaced rationals of `[from, to]`.
    pub fn sampled_interval(&self, e: &TemporalEffect, s: &[ActionTerm], from: &Rational, to: &Rational, points: i64) -> bool {
        let (base, rate) = self.law(&e.ground_fluent(), s);
        let start = self.start(s);
        let at = |t: &Rational| e.holds_for(&(&base + &(&(t - &start) * &rate)));
        if from == to {
            return at(from);
        }
        let width = to - from;
        (0..points).all(|i| {
            let t = from + &(&width * &Rational::new(i, points - 1));
            at(&t)
        })
    }

    pub fn executable(&self, s: &[ActionTerm]) -> bool {
        (0..s.len()).all(|i| self.start(&s[..i]) <= s[i].time.0 && self.poss(&s[i], &s[..i]))
    }

    /// The five conjuncts of a hybrid temporal achievement setting.
    pub fn valid_setting(&self, e: &TemporalEffect, sigma: &[ActionTerm]) -> bool {
        !sigma.is_empty()
            && self.executable(sigma)
            && !self.effect_at(e, &self.th.initial_start.0, &[])
            && !self.effect_at(e, &sigma[0].time.0, &[])
            && self.effect_at(e, &self.start(sigma), sigma)
    }

    /// Achievement situation, using sampled interval checks.
    pub fn achv_sit(&self, e: &TemporalEffect, sigma: &[ActionTerm]) -> Option<usize> {
        let n = sigma.len();
        (0..=n).find(|&k| {
            self.effect_at(e, &self.end(sigma, k), &sigma[..k])
                && (k + 1..=n).all(|j| {
                    self.sampled_interval(e, &sigma[..j], &self.start(&sigma[..j]), &self.end(sigma, j), 16)
                })
        })
    }

    /// Every `ts` with `CausesDir(σ[ts], ts, φ, σ_len)` for a ground formula.
    pub fn direct_causes(&self, f: &Formula, sigma: &[ActionTerm], len: usize) -> Vec<usize> {
        (0..len)
            .filter(|&ts| {
                !self.ground_holds(f, &sigma[..ts]) && (ts + 1..=len).all(|k| self.ground_holds(f, &sigma[..k]))
            })
            .collect()
    }

    fn context_direct(&self, atom: &GroundAtom, ctx: usize, sigma: &[ActionTerm], ts: usize, len: usize) -> bool {
        !self.context_holds(atom, ctx, &sigma[..ts]) && (ts + 1..=len).all(|k| self.context_holds(atom, ctx, &sigma[..k]))
    }

    /// All `(a, ts)` satisfying the contribution-based definition, by
    /// enumerating every `(s_a, σ′)` with the achievement situation fixed.
    pub fn primary_causes(&self, e: &TemporalEffect, sigma: &[ActionTerm]) -> Vec<usize> {
        let Some(sphi) = self.achv_sit(e, sigma) else {
            return Vec::new();
        };
        let atom = e.ground_fluent();
        let n_ctx = self.th.temporals[&atom.fluent].contexts.len();
        let mut out = Vec::new();
        for sa in 0..sigma.len() {
            let a = &sigma[sa];
            let s_a = &sigma[..sa];
            let ok = sa < sphi
                && self.executable(s_a)
                && self.poss(a, s_a)
                && !self.effect_at(e, &a.time.0, s_a)
                && (sphi..=sigma.len()).any(|m| self.effect_at(e, &self.end(&sigma[..m], sphi), &sigma[..sphi]))
                && (0..n_ctx).any(|i| self.context_direct(&atom, i, sigma, sa, sphi));
            if ok {
                out.push(sa);
            }
        }
        out
    }

    /// Least fixpoint of the inductive `Causes` definition by exhaustive
    /// exploration of (sub-effect, prefix) pairs.
    pub fn causes(&self, f: &Formula, sigma: &[ActionTerm]) -> BTreeSet<(ActionTerm, usize)> {
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut work = vec![(f.clone(), sigma.len())];
        while let Some((psi, len)) = work.pop() {
            if !seen.insert((psi.clone(), len)) {
                continue;
            }
            for ts in self.direct_causes(&psi, sigma, len) {
                let a = sigma[ts].clone();
                out.insert((a.clone(), ts));
                work.push((Formula::poss_and_after(&a, &psi), ts));
            }
        }
        out
    }

    /// Maximal members of the elimination relation, found by dynamic
    /// programming over every subset of replaced positions. Returns the
    /// maximal scenarios (expected: exactly one) or `None` when `σ` has no
    /// primary cause.
    pub fn maximal_defused(&self, e: &TemporalEffect, sigma: &Scenario) -> Option<Vec<Scenario>> {
        let n = sigma.len();
        assert!(n <= 12, "subset enumeration is exponential");
        let apply = |mask: u32| -> Vec<ActionTerm> {
            sigma
                .actions
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if mask & (1 << i) != 0 {
                        hycause_core::make_noop(a.time.clone())
                    } else {
                        a.clone()
                    }
                })
                .collect()
        };
        let cause_of = |mask: u32| -> Option<usize> {
            let s = apply(mask);
            if !self.valid_setting(e, &s) {
                return None;
            }
            let found = self.primary_causes(e, &s);
            assert!(found.len() <= 1, "several primary causes");
            found.first().copied()
        };
        let causes: Vec<Option<usize>> = (0..1u32 << n).map(cause_of).collect();
        causes[0]?;
        let mut member = vec![false; 1 << n];
        for mask in 1..1u32 << n {
            member[mask as usize] = (0..n).any(|r| {
                let bit = 1u32 << r;
                if mask & bit == 0 {
                    return false;
                }
                let rest = mask & !bit;
                (rest == 0 || member[rest as usize]) && causes[rest as usize] == Some(r)
            });
        }
        let best = (1..1u32 << n)
            .filter(|&m| member[m as usize])
            .map(|m| m.count_ones())
            .max()?;
        Some(
            (1..1u32 << n)
                .filter(|&m| member[m as usize] && m.count_ones() == best)
                .map(|m| Scenario::from_actions(apply(m), sigma.initial_start.clone()))
                .collect(),
        )
    }
}
