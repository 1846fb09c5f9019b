//! Declarative hybrid basic action theories and the dynamic-formula language
//! used for preconditions, successor-state guards, contexts and effects.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::model::{ActionTerm, Rational, TimePoint, NOOP};

/// Source location of a declaration. Spans never take part in equality, so
/// a theory compares equal to its re-parsed canonical form.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: Option<Span>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: Option<Span>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            span,
        }
    }

    pub fn warning(message: impl Into<String>, span: Option<Span>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match self.span {
            Some(span) => write!(f, "{span}: {level}: {}", self.message),
            None => write!(f, "{level}: {}", self.message),
        }
    }
}

/// Object term: a variable or an object constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(n) | Term::Const(n) => n,
        }
    }
}

/// Situation-suppressed discrete fluent atom `F(x1, ..., xn)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub fluent: String,
    pub args: Vec<Term>,
}

/// Action term inside a formula (`Poss(a)`, `After(a, φ)`); the time is
/// always a constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionRef {
    pub name: String,
    pub args: Vec<Term>,
    pub time: TimePoint,
}

impl ActionRef {
    pub fn ground(action: &ActionTerm) -> Self {
        ActionRef {
            name: action.name.clone(),
            args: action.args.iter().cloned().map(Term::Const).collect(),
            time: action.time.clone(),
        }
    }

    /// The ground action, if every argument is a constant.
    pub fn to_action(&self) -> Option<ActionTerm> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(ActionTerm::new(self.name.clone(), args, self.time.clone()))
    }
}

/// Dynamic formulae: fluent literals, `Poss`, `After`, boolean connectives
/// and existential quantification over a finite object sort.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Formula {
    True,
    Atom(Atom),
    Poss(ActionRef),
    After(ActionRef, Box<Formula>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists {
        var: String,
        sort: String,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn atom(fluent: &str, args: &[&str]) -> Formula {
        Formula::Atom(Atom {
            fluent: fluent.to_string(),
            args: args.iter().map(|a| Term::Const(a.to_string())).collect(),
        })
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn falsum() -> Formula {
        Formula::not(Formula::True)
    }

    /// `Poss(a) ∧ After(a, φ)`, the sub-effect used by the inductive
    /// definition of indirect causes.
    pub fn poss_and_after(action: &ActionTerm, effect: &Formula) -> Formula {
        let a = ActionRef::ground(action);
        Formula::and(
            Formula::Poss(a.clone()),
            Formula::After(a, Box::new(effect.clone())),
        )
    }

    /// Left-nested conjunction; `True` for the empty list.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    pub fn disjunction(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts
            .into_iter()
            .reduce(Formula::or)
            .unwrap_or_else(Formula::falsum)
    }

    /// Whether the formula mentions `Poss` or `After` anywhere.
    pub fn is_dynamic(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) => false,
            Formula::Poss(_) | Formula::After(..) => true,
            Formula::Not(f) => f.is_dynamic(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_dynamic() || b.is_dynamic(),
            Formula::Exists { body, .. } => body.is_dynamic(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.free_vars().is_empty()
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        let mut terms = |args: &[Term], bound: &Vec<String>| {
            for t in args {
                if let Term::Var(v) = t {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            }
        };
        match self {
            Formula::True => {}
            Formula::Atom(a) => terms(&a.args, bound),
            Formula::Poss(a) => terms(&a.args, bound),
            Formula::After(a, f) => {
                terms(&a.args, bound);
                f.collect_free(bound, out);
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Exists { var, body, .. } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Every atom occurring in the formula, in traversal order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.visit_atoms(&mut out);
        out
    }

    fn visit_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::True | Formula::Poss(_) => {}
            Formula::Atom(a) => out.push(a),
            Formula::After(_, f) | Formula::Not(f) => f.visit_atoms(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_atoms(out);
                b.visit_atoms(out);
            }
            Formula::Exists { body, .. } => body.visit_atoms(out),
        }
    }

    /// Every action reference in `Poss`/`After`, in traversal order.
    pub fn action_refs(&self) -> Vec<&ActionRef> {
        let mut out = Vec::new();
        self.visit_actions(&mut out);
        out
    }

    fn visit_actions<'a>(&'a self, out: &mut Vec<&'a ActionRef>) {
        match self {
            Formula::True | Formula::Atom(_) => {}
            Formula::Poss(a) => out.push(a),
            Formula::After(a, f) => {
                out.push(a);
                f.visit_actions(out);
            }
            Formula::Not(f) => f.visit_actions(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_actions(out);
                b.visit_actions(out);
            }
            Formula::Exists { body, .. } => body.visit_actions(out),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.fluent)?;
        write_args(f, &self.args)?;
        f.write_str(")")
    }
}

impl fmt::Display for ActionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for a in &self.args {
            write!(f, "{a}, ")?;
        }
        write!(f, "{})", self.time)
    }
}

/// Renders formulas in the theory-file syntax. Binary connectives are
/// always parenthesised, so printing then parsing yields the same tree.
impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Poss(a) => write!(f, "Poss({a})"),
            Formula::After(a, body) => write!(f, "After({a}, {body})"),
            Formula::Not(body) => write!(f, "!{body}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Exists { var, sort, body } => write!(f, "(exists {var}: {sort}. {body})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
}

impl Relation {
    pub fn apply(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }

    pub const ALL: [Relation; 5] = [
        Relation::Lt,
        Relation::Le,
        Relation::Eq,
        Relation::Ge,
        Relation::Gt,
    ];
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Ground fluent atom, used as a key for states and initial values.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAtom {
    pub fluent: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(fluent: impl Into<String>, args: Vec<String>) -> Self {
        GroundAtom {
            fluent: fluent.into(),
            args,
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.fluent, self.args.join(", "))
    }
}

/// A comparison on one primitive temporal fluent, e.g. `coreTemp(P1) >= 1000`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemporalEffect {
    pub fluent: String,
    pub args: Vec<String>,
    pub relation: Relation,
    pub threshold: Rational,
}

impl TemporalEffect {
    pub fn ground_fluent(&self) -> GroundAtom {
        GroundAtom::new(self.fluent.clone(), self.args.clone())
    }

    pub fn holds_for(&self, value: &Rational) -> bool {
        self.relation.apply(value, &self.threshold)
    }
}

impl fmt::Display for TemporalEffect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({}) {} {}",
            self.fluent,
            self.args.join(", "),
            self.relation,
            self.threshold
        )
    }
}

/// An effect under causal analysis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Effect {
    Temporal(TemporalEffect),
    Discrete(Formula),
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Temporal(e) => e.fmt(f),
            Effect::Discrete(e) => e.fmt(f),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub sort: String,
}

impl Param {
    pub fn new(name: &str, sort: &str) -> Self {
        Param {
            name: name.to_string(),
            sort: sort.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDecl {
    pub name: String,
    pub params: Vec<Param>,
    pub precondition: Formula,
    pub span: Span,
}

/// Argument position in a trigger pattern. Variables that are not fluent
/// parameters are existentially bound by the match.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatArg {
    Var(String),
    Const(String),
    Any,
}

impl fmt::Display for PatArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatArg::Var(v) | PatArg::Const(v) => f.write_str(v),
            PatArg::Any => f.write_str("_"),
        }
    }
}

/// Action pattern; the time argument is implicitly `∃t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionPattern {
    pub name: String,
    pub args: Vec<PatArg>,
}

impl fmt::Display for ActionPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub pattern: ActionPattern,
    pub guard: Option<Formula>,
}

/// `F(x, do(a,s)) ≡ γ⁺(x,a,s) ∨ (F(x,s) ∧ ¬γ⁻(x,a,s))` in trigger normal form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessorStateAxiom {
    pub fluent: String,
    pub params: Vec<Param>,
    pub caused_by: Vec<Trigger>,
    pub canceled_by: Vec<Trigger>,
    pub span: Span,
}

/// One context `γ_i` of a state evolution axiom with its constant rate `Δ_i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub label: String,
    pub condition: Formula,
    pub rate: Rational,
    pub span: Span,
}

/// `f(x,t,s) = f(x,start(s),s) + (t − start(s))·Δ_i` under `γ_i`, constant
/// when no context holds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateEvolutionAxiom {
    pub fluent: String,
    pub params: Vec<Param>,
    pub contexts: Vec<Context>,
    pub span: Span,
}

impl StateEvolutionAxiom {
    pub fn bindings(&self, args: &[String]) -> Bindings {
        bind_params(&self.params, args)
    }
}

pub type Bindings = BTreeMap<String, String>;

pub fn bind_params(params: &[Param], args: &[String]) -> Bindings {
    params
        .iter()
        .zip(args)
        .map(|(p, a)| (p.name.clone(), a.clone()))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridTheory {
    pub name: String,
    /// Object constant → sort, in declaration order.
    pub objects: IndexMap<String, String>,
    pub actions: IndexMap<String, ActionDecl>,
    pub fluents: IndexMap<String, SuccessorStateAxiom>,
    pub temporals: IndexMap<String, StateEvolutionAxiom>,
    /// Explicit initial truth values; unlisted discrete atoms are false.
    pub init_discrete: BTreeMap<GroundAtom, bool>,
    pub init_temporal: BTreeMap<GroundAtom, Rational>,
    pub initial_start: TimePoint,
}

impl HybridTheory {
    pub fn objects_of_sort<'a>(&'a self, sort: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(move |(_, s)| s.as_str() == sort)
            .map(|(o, _)| o.as_str())
    }

    pub fn has_sort(&self, sort: &str) -> bool {
        self.objects.values().any(|s| s == sort)
    }

    /// All argument tuples for a parameter list, in declaration order.
    pub fn ground_tuples(&self, params: &[Param]) -> Vec<Vec<String>> {
        let mut tuples = vec![Vec::new()];
        for p in params {
            let objs: Vec<&str> = self.objects_of_sort(&p.sort).collect();
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    objs.iter().map(move |o| {
                        let mut next = t.clone();
                        next.push(o.to_string());
                        next
                    })
                })
                .collect();
        }
        tuples
    }

    pub fn ground_discrete_atoms(&self) -> Vec<GroundAtom> {
        self.fluents
            .values()
            .flat_map(|ssa| {
                self.ground_tuples(&ssa.params)
                    .into_iter()
                    .map(|args| GroundAtom::new(ssa.fluent.clone(), args))
            })
            .collect()
    }

    pub fn ground_temporal_atoms(&self) -> Vec<GroundAtom> {
        self.temporals
            .values()
            .flat_map(|sea| {
                self.ground_tuples(&sea.params)
                    .into_iter()
                    .map(|args| GroundAtom::new(sea.fluent.clone(), args))
            })
            .collect()
    }

    /// Checks an action term against its declaration (or the implicit `noOp`).
    pub fn check_action(&self, action: &ActionTerm) -> Result<(), TheoryError> {
        if action.is_noop() {
            return if action.args.is_empty() {
                Ok(())
            } else {
                Err(TheoryError::Arity {
                    symbol: NOOP.to_string(),
                    expected: 0,
                    found: action.args.len(),
                })
            };
        }
        let decl = self
            .actions
            .get(&action.name)
            .ok_or_else(|| TheoryError::UnknownAction(action.name.clone()))?;
        if decl.params.len() != action.args.len() {
            return Err(TheoryError::Arity {
                symbol: action.name.clone(),
                expected: decl.params.len(),
                found: action.args.len(),
            });
        }
        for (p, a) in decl.params.iter().zip(&action.args) {
            match self.objects.get(a) {
                None => return Err(TheoryError::UnknownConstant(a.clone())),
                Some(sort) if sort != &p.sort => {
                    return Err(TheoryError::SortMismatch {
                        constant: a.clone(),
                        expected: p.sort.clone(),
                        found: sort.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Ground contexts of a temporal fluent instance, in declaration order.
    pub fn ground_contexts(&self, atom: &GroundAtom) -> Result<Vec<(String, Formula, Rational)>, TheoryError> {
        let sea = self
            .temporals
            .get(&atom.fluent)
            .ok_or_else(|| TheoryError::UnknownFluent(atom.fluent.clone()))?;
        if sea.params.len() != atom.args.len() {
            return Err(TheoryError::Arity {
                symbol: atom.fluent.clone(),
                expected: sea.params.len(),
                found: atom.args.len(),
            });
        }
        let bindings = sea.bindings(&atom.args);
        sea.contexts
            .iter()
            .map(|c| {
                Ok((
                    c.label.clone(),
                    instantiate(&c.condition, &bindings, self)?,
                    c.rate.clone(),
                ))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TheoryError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("unknown constant `{0}`")]
    UnknownConstant(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown fluent `{0}`")]
    UnknownFluent(String),
    #[error("`{symbol}` expects {expected} object argument(s), found {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("constant `{constant}` has sort `{found}`, expected `{expected}`")]
    SortMismatch {
        constant: String,
        expected: String,
        found: String,
    },
}

/// Substitutes `bindings` and expands every `exists` into a finite
/// disjunction over the declared objects of its sort.
pub fn instantiate(
    formula: &Formula,
    bindings: &Bindings,
    theory: &HybridTheory,
) -> Result<Formula, TheoryError> {
    let subst = |args: &[Term]| -> Result<Vec<Term>, TheoryError> {
        args.iter()
            .map(|t| match t {
                Term::Var(v) => bindings
                    .get(v)
                    .map(|c| Term::Const(c.clone()))
                    .ok_or_else(|| TheoryError::UnboundVariable(v.clone())),
                Term::Const(c) if theory.objects.contains_key(c) => Ok(Term::Const(c.clone())),
                Term::Const(c) => Err(TheoryError::UnknownConstant(c.clone())),
            })
            .collect()
    };
    let action = |a: &ActionRef| -> Result<ActionRef, TheoryError> {
        Ok(ActionRef {
            name: a.name.clone(),
            args: subst(&a.args)?,
            time: a.time.clone(),
        })
    };
    Ok(match formula {
        Formula::True => Formula::True,
        Formula::Atom(a) => Formula::Atom(Atom {
            fluent: a.fluent.clone(),
            args: subst(&a.args)?,
        }),
        Formula::Poss(a) => Formula::Poss(action(a)?),
        Formula::After(a, f) => {
            Formula::After(action(a)?, Box::new(instantiate(f, bindings, theory)?))
        }
        Formula::Not(f) => Formula::not(instantiate(f, bindings, theory)?),
        Formula::And(a, b) => Formula::and(
            instantiate(a, bindings, theory)?,
            instantiate(b, bindings, theory)?,
        ),
        Formula::Or(a, b) => Formula::or(
            instantiate(a, bindings, theory)?,
            instantiate(b, bindings, theory)?,
        ),
        Formula::Exists { var, sort, body } => {
            if !theory.has_sort(sort) {
                return Err(TheoryError::UnknownSort(sort.clone()));
            }
            let mut inner = bindings.clone();
            let mut parts = Vec::new();
            for obj in theory.objects_of_sort(sort) {
                inner.insert(var.clone(), obj.to_string());
                parts.push(instantiate(body, &inner, theory)?);
            }
            Formula::disjunction(parts)
        }
    })
}

/// Arity/sort checks, reserved names, initial-state totality and a static
/// mutual-exclusion pre-check of every pair of contexts.
pub fn validate_theory(theory: &HybridTheory) -> Vec<Diagnostic> {
    let mut v = Validator {
        theory,
        diags: Vec::new(),
    };
    v.run();
    v.diags
}

struct Validator<'a> {
    theory: &'a HybridTheory,
    diags: Vec<Diagnostic>,
}

/// Where a formula occurs; only effects may use `Poss` and `After`.
#[derive(Clone, Copy, PartialEq, Eq)]
enum FormulaRole {
    Precondition,
    Guard,
    Context,
}

impl FormulaRole {
    fn describe(self) -> &'static str {
        match self {
            FormulaRole::Precondition => "precondition",
            FormulaRole::Guard => "trigger guard",
            FormulaRole::Context => "context",
        }
    }
}

impl Validator<'_> {
    fn error(&mut self, message: String, span: Span) {
        self.diags.push(Diagnostic::error(message, Some(span)));
    }

    fn run(&mut self) {
        let th = self.theory;
        let mut symbols: BTreeMap<String, &str> = BTreeMap::new();
        let mut declare = |v: &mut Self, name: &'static str, sym: &str, span: Span| {
            if let Some(prev) = symbols.insert(sym.to_string(), name) {
                v.error(format!("symbol `{sym}` declared as both {prev} and {name}"), span);
            }
        };
        for (name, decl) in &th.actions {
            declare(self, "action", name, decl.span);
        }
        for (name, decl) in &th.fluents {
            declare(self, "fluent", name, decl.span);
        }
        for (name, decl) in &th.temporals {
            declare(self, "temporal fluent", name, decl.span);
        }
        for (obj, _) in &th.objects {
            if th.actions.contains_key(obj) || th.fluents.contains_key(obj) {
                self.diags.push(Diagnostic::error(
                    format!("object `{obj}` clashes with a declared symbol"),
                    None,
                ));
            }
        }

        for decl in th.actions.values() {
            if decl.name == NOOP {
                self.error(
                    format!("reserved symbol `{NOOP}` cannot be declared as an action"),
                    decl.span,
                );
            }
            self.check_params(&decl.params, decl.span);
            let scope: Vec<String> = decl.params.iter().map(|p| p.name.clone()).collect();
            self.check_formula(&decl.precondition, &scope, FormulaRole::Precondition, decl.span);
        }

        for ssa in th.fluents.values() {
            if ssa.fluent == NOOP {
                self.error(format!("reserved symbol `{NOOP}` cannot name a fluent"), ssa.span);
            }
            self.check_params(&ssa.params, ssa.span);
            for trig in ssa.caused_by.iter().chain(&ssa.canceled_by) {
                self.check_trigger(ssa, trig);
            }
        }

        for sea in th.temporals.values() {
            self.check_params(&sea.params, sea.span);
            if sea.contexts.is_empty() {
                self.diags.push(Diagnostic::warning(
                    format!("temporal fluent `{}` has no contexts and never changes", sea.fluent),
                    Some(sea.span),
                ));
            }
            let scope: Vec<String> = sea.params.iter().map(|p| p.name.clone()).collect();
            let mut labels = BTreeSet::new();
            for ctx in &sea.contexts {
                if !labels.insert(ctx.label.as_str()) {
                    self.error(
                        format!("duplicate context label `{}` in `{}`", ctx.label, sea.fluent),
                        ctx.span,
                    );
                }
                self.check_formula(&ctx.condition, &scope, FormulaRole::Context, ctx.span);
            }
            self.check_mutex(sea);
        }

        self.check_init();
    }

    fn check_params(&mut self, params: &[Param], span: Span) {
        let mut seen = BTreeSet::new();
        for p in params {
            if !self.theory.has_sort(&p.sort) {
                self.error(format!("unknown sort `{}` for parameter `{}`", p.sort, p.name), span);
            }
            if !seen.insert(p.name.as_str()) {
                self.error(format!("duplicate parameter `{}`", p.name), span);
            }
        }
    }

    fn check_args(&mut self, symbol: &str, expected: &[Param], args: &[Term], scope: &[String], span: Span) {
        if expected.len() != args.len() {
            self.error(
                format!(
                    "`{symbol}` expects {} argument(s), found {}",
                    expected.len(),
                    args.len()
                ),
                span,
            );
            return;
        }
        for (p, a) in expected.iter().zip(args) {
            match a {
                Term::Var(v) if !scope.contains(v) => {
                    self.error(format!("unbound variable `{v}`"), span);
                }
                Term::Var(_) => {}
                Term::Const(c) => match self.theory.objects.get(c) {
                    None => self.error(format!("unknown constant `{c}`"), span),
                    Some(sort) if *sort != p.sort => self.error(
                        format!("constant `{c}` has sort `{sort}`, `{symbol}` expects `{}`", p.sort),
                        span,
                    ),
                    Some(_) => {}
                },
            }
        }
    }

    fn check_formula(&mut self, f: &Formula, scope: &[String], role: FormulaRole, span: Span) {
        let th = self.theory;
        match f {
            Formula::True => {}
            Formula::Atom(a) => {
                if let Some(ssa) = th.fluents.get(&a.fluent) {
                    self.check_args(&a.fluent, &ssa.params, &a.args, scope, span);
                } else if th.temporals.contains_key(&a.fluent) {
                    self.error(
                        format!(
                            "temporal fluent `{}` cannot appear in a {}",
                            a.fluent,
                            role.describe()
                        ),
                        span,
                    );
                } else {
                    self.error(format!("unknown fluent `{}`", a.fluent), span);
                }
            }
            Formula::Poss(_) | Formula::After(..) => {
                self.error(
                    format!("`Poss`/`After` are not allowed in a {}", role.describe()),
                    span,
                );
            }
            Formula::Not(g) => self.check_formula(g, scope, role, span),
            Formula::And(a, b) | Formula::Or(a, b) => {
                self.check_formula(a, scope, role, span);
                self.check_formula(b, scope, role, span);
            }
            Formula::Exists { var, sort, body } => {
                if !th.has_sort(sort) {
                    self.error(format!("unknown sort `{sort}`"), span);
                }
                let mut inner = scope.to_vec();
                inner.push(var.clone());
                self.check_formula(body, &inner, role, span);
            }
        }
    }

    fn check_trigger(&mut self, ssa: &SuccessorStateAxiom, trig: &Trigger) {
        let th = self.theory;
        let span = ssa.span;
        let pat = &trig.pattern;
        if pat.name == NOOP {
            self.error(format!("`{NOOP}` cannot appear in a successor-state trigger"), span);
            return;
        }
        let Some(decl) = th.actions.get(&pat.name) else {
            self.error(format!("unknown action `{}` in trigger of `{}`", pat.name, ssa.fluent), span);
            return;
        };
        if decl.params.len() != pat.args.len() {
            self.error(
                format!(
                    "trigger `{pat}` expects {} argument(s), found {}",
                    decl.params.len(),
                    pat.args.len()
                ),
                span,
            );
            return;
        }
        let mut scope: Vec<String> = ssa.params.iter().map(|p| p.name.clone()).collect();
        for (p, a) in decl.params.iter().zip(&pat.args) {
            match a {
                PatArg::Any => {}
                PatArg::Var(v) => {
                    if let Some(fp) = ssa.params.iter().find(|fp| &fp.name == v) {
                        if fp.sort != p.sort {
                            self.error(
                                format!(
                                    "variable `{v}` has sort `{}` but `{}` expects `{}`",
                                    fp.sort, pat.name, p.sort
                                ),
                                span,
                            );
                        }
                    } else if !scope.contains(v) {
                        scope.push(v.clone());
                    }
                }
                PatArg::Const(c) => match th.objects.get(c) {
                    None => self.error(format!("unknown constant `{c}`"), span),
                    Some(sort) if *sort != p.sort => self.error(
                        format!("constant `{c}` has sort `{sort}`, `{}` expects `{}`", pat.name, p.sort),
                        span,
                    ),
                    Some(_) => {}
                },
            }
        }
        if let Some(guard) = &trig.guard {
            self.check_formula(guard, &scope, FormulaRole::Guard, span);
        }
    }

    fn check_init(&mut self) {
        let th = self.theory;
        for atom in th.init_discrete.keys() {
            match th.fluents.get(&atom.fluent) {
                Some(ssa) => self.check_ground_args(atom, &ssa.params),
                None => self.diags.push(Diagnostic::error(
                    format!("initial value for undeclared discrete fluent `{atom}`"),
                    None,
                )),
            }
        }
        for atom in th.init_temporal.keys() {
            match th.temporals.get(&atom.fluent) {
                Some(sea) => self.check_ground_args(atom, &sea.params),
                None => self.diags.push(Diagnostic::error(
                    format!("initial value for undeclared temporal fluent `{atom}`"),
                    None,
                )),
            }
        }
        for atom in th.ground_temporal_atoms() {
            if !th.init_temporal.contains_key(&atom) {
                let span = th.temporals.get(&atom.fluent).map(|s| s.span);
                self.diags.push(Diagnostic::error(
                    format!("missing initial value for temporal fluent `{atom}`"),
                    span,
                ));
            }
        }
    }

    fn check_ground_args(&mut self, atom: &GroundAtom, params: &[Param]) {
        let th = self.theory;
        if params.len() != atom.args.len() {
            self.diags.push(Diagnostic::error(
                format!("`{}` expects {} argument(s) in `{atom}`", atom.fluent, params.len()),
                None,
            ));
            return;
        }
        for (p, a) in params.iter().zip(&atom.args) {
            if th.objects.get(a) != Some(&p.sort) {
                self.diags.push(Diagnostic::error(
                    format!("`{a}` is not an object of sort `{}` in `{atom}`", p.sort),
                    None,
                ));
            }
        }
    }

    /// Two contexts are flagged when their conjunction is propositionally
    /// satisfiable. Formulas with quantifiers, or with too many atoms for
    /// a truth table, are left to the runtime check.
    fn check_mutex(&mut self, sea: &StateEvolutionAxiom) {
        const MAX_ATOMS: usize = 16;
        for (i, a) in sea.contexts.iter().enumerate() {
            for b in &sea.contexts[i + 1..] {
                let both = Formula::and(a.condition.clone(), b.condition.clone());
                match propositionally_satisfiable(&both, MAX_ATOMS) {
                    Some(true) => self.error(
                        format!(
                            "contexts `{}` and `{}` of `{}` are not mutually exclusive",
                            a.label, b.label, sea.fluent
                        ),
                        b.span,
                    ),
                    Some(false) => {}
                    None => self.diags.push(Diagnostic::warning(
                        format!(
                            "mutual exclusion of `{}` and `{}` in `{}` deferred to runtime",
                            a.label, b.label, sea.fluent
                        ),
                        Some(b.span),
                    )),
                }
            }
        }
    }
}

/// Truth-table satisfiability treating each syntactically distinct atom as a
/// propositional variable; `None` when undecidable this way.
fn propositionally_satisfiable(f: &Formula, max_atoms: usize) -> Option<bool> {
    fn quantifier_free(f: &Formula) -> bool {
        match f {
            Formula::True | Formula::Atom(_) => true,
            Formula::Poss(_) | Formula::After(..) | Formula::Exists { .. } => false,
            Formula::Not(g) => quantifier_free(g),
            Formula::And(a, b) | Formula::Or(a, b) => quantifier_free(a) && quantifier_free(b),
        }
    }
    fn eval(f: &Formula, atoms: &[&Atom], bits: u32) -> bool {
        match f {
            Formula::True => true,
            Formula::Atom(a) => {
                let idx = atoms.iter().position(|x| *x == a).expect("collected atom");
                bits & (1 << idx) != 0
            }
            Formula::Not(g) => !eval(g, atoms, bits),
            Formula::And(a, b) => eval(a, atoms, bits) && eval(b, atoms, bits),
            Formula::Or(a, b) => eval(a, atoms, bits) || eval(b, atoms, bits),
            _ => unreachable!("checked quantifier-free"),
        }
    }
    if !quantifier_free(f) {
        return None;
    }
    let mut atoms: Vec<&Atom> = Vec::new();
    for a in f.atoms() {
        if !atoms.contains(&a) {
            atoms.push(a);
        }
    }
    if atoms.len() > max_atoms {
        return None;
    }
    Some((0..1u32 << atoms.len()).any(|bits| eval(f, &atoms, bits)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var_atom(fluent: &str, var: &str) -> Formula {
        Formula::Atom(Atom {
            fluent: fluent.into(),
            args: vec![Term::Var(var.into())],
        })
    }

    pub(crate) fn tiny_theory() -> HybridTheory {
        let mut th = HybridTheory {
            name: "tiny".into(),
            ..Default::default()
        };
        th.objects.insert("P1".into(), "plant".into());
        th.objects.insert("P2".into(), "plant".into());
        th.fluents.insert(
            "Ruptured".into(),
            SuccessorStateAxiom {
                fluent: "Ruptured".into(),
                params: vec![Param::new("p", "plant")],
                caused_by: vec![],
                canceled_by: vec![],
                span: Span::default(),
            },
        );
        th.fluents.insert(
            "CSFailed".into(),
            SuccessorStateAxiom {
                fluent: "CSFailed".into(),
                params: vec![Param::new("p", "plant")],
                caused_by: vec![],
                canceled_by: vec![],
                span: Span::default(),
            },
        );
        th
    }

    #[test]
    fn exists_expands_over_sort() {
        let mut th = tiny_theory();
        th.objects.shift_remove("P2");
        let f = Formula::Exists {
            var: "p".into(),
            sort: "plant".into(),
            body: Box::new(var_atom("Ruptured", "p")),
        };
        let g = instantiate(&f, &Bindings::new(), &th).unwrap();
        assert_eq!(g, Formula::atom("Ruptured", &["P1"]));

        let th2 = tiny_theory();
        let g2 = instantiate(&f, &Bindings::new(), &th2).unwrap();
        assert_eq!(
            g2,
            Formula::or(
                Formula::atom("Ruptured", &["P1"]),
                Formula::atom("Ruptured", &["P2"])
            )
        );
    }

    #[test]
    fn context_instantiation() {
        let th = tiny_theory();
        let mut b = Bindings::new();
        b.insert("p".into(), "P1".into());
        let g1 = Formula::and(var_atom("Ruptured", "p"), var_atom("CSFailed", "p"));
        let g2 = Formula::and(var_atom("Ruptured", "p"), Formula::not(var_atom("CSFailed", "p")));
        assert_eq!(
            instantiate(&g1, &b, &th).unwrap(),
            Formula::and(
                Formula::atom("Ruptured", &["P1"]),
                Formula::atom("CSFailed", &["P1"])
            )
        );
        assert_eq!(
            instantiate(&g2, &b, &th).unwrap(),
            Formula::and(
                Formula::atom("Ruptured", &["P1"]),
                Formula::not(Formula::atom("CSFailed", &["P1"]))
            )
        );
    }

    #[test]
    fn instantiate_errors() {
        let th = tiny_theory();
        let f = var_atom("Ruptured", "q");
        assert_eq!(
            instantiate(&f, &Bindings::new(), &th),
            Err(TheoryError::UnboundVariable("q".into()))
        );
        let g = Formula::atom("Ruptured", &["P9"]);
        assert_eq!(
            instantiate(&g, &Bindings::new(), &th),
            Err(TheoryError::UnknownConstant("P9".into()))
        );
    }

    #[test]
    fn instantiate_commutes_with_negation() {
        let th = tiny_theory();
        let mut b = Bindings::new();
        b.insert("p".into(), "P2".into());
        let f = var_atom("CSFailed", "p");
        assert_eq!(
            instantiate(&Formula::not(f.clone()), &b, &th).unwrap(),
            Formula::not(instantiate(&f, &b, &th).unwrap())
        );
    }

    #[test]
    fn satisfiability_check() {
        let r = var_atom("Ruptured", "p");
        let c = var_atom("CSFailed", "p");
        let g1 = Formula::and(r.clone(), c.clone());
        let g2 = Formula::and(r.clone(), Formula::not(c.clone()));
        assert_eq!(propositionally_satisfiable(&Formula::and(g1.clone(), g2), 16), Some(false));
        assert_eq!(propositionally_satisfiable(&Formula::and(r.clone(), r), 16), Some(true));
        let q = Formula::Exists {
            var: "x".into(),
            sort: "plant".into(),
            body: Box::new(c),
        };
        assert_eq!(propositionally_satisfiable(&q, 16), None);
    }
}
