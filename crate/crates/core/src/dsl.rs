//! Theory (`.hct`), scenario (`.hcs`) and effect text formats.
//!
//! ```text
//! theory    := "theory" NAME section*
//! section   := objects | start | action | fluent | temporal | init
//! objects   := "objects:" NAME ":" SORT ("," NAME ":" SORT)*
//! start     := "start:" RATIONAL
//! action    := "action" NAME params "poss:" formula
//! fluent    := "fluent" NAME params (("caused-by:" | "canceled-by:") triggers)*
//! triggers  := trigger ("," trigger)*
//! trigger   := NAME ("(" patarg ("," patarg)* ")")? ("when" formula)?
//! temporal  := "temporal" NAME params ("context" LABEL ":" formula "rate" RATIONAL)*
//! init      := "init:" NAME args "=" (RATIONAL | "true" | "false") ("," ...)*
//! params    := "(" (VAR ":" SORT ("," VAR ":" SORT)*)? ")"
//! formula   := disj
//! disj      := conj ("|" conj)*
//! conj      := unary ("&" unary)*
//! unary     := "!" unary | "exists" VAR ":" SORT "." formula | primary
//! primary   := "true" | "false" | "(" formula ")" | "Poss(" act ")"
//!            | "After(" act "," formula ")" | NAME ("(" terms ")")?
//! act       := NAME "(" (TERM ",")* RATIONAL ")"
//! ```
//!
//! Comments run from `#` to end of line. Inside a declaration, a name bound
//! as a parameter (or by `exists`) is a variable; any other name is an
//! object constant. In trigger patterns, undeclared names that are not
//! parameters become existentially bound variables, so objects used in
//! patterns must be declared earlier in the file. `_` matches any argument.
//!
//! Rationals are integers, exact decimals (`2.5`) or fractions (`7/2`).
//! The unicode connectives `¬ ∧ ∨ ≤ ≥` are accepted as synonyms.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;

use crate::model::{ActionTerm, Rational, Scenario, Situation, TimePoint};
use crate::theory::{
    validate_theory, ActionDecl, ActionPattern, ActionRef, Atom, Context, Diagnostic, Effect,
    Formula, GroundAtom, HybridTheory, Param, PatArg, Relation, Span, StateEvolutionAxiom,
    SuccessorStateAxiom, TemporalEffect, Term, Trigger,
};

/// Parse failure: a syntax error stops at the first offending token, while
/// semantic errors are collected from the whole document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DslError {
    Syntax(Diagnostic),
    Semantic(Vec<Diagnostic>),
}

impl DslError {
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self {
            DslError::Syntax(d) => vec![d.clone()],
            DslError::Semantic(ds) => ds.clone(),
        }
    }

    fn semantic(message: impl Into<String>, span: Option<Span>) -> Self {
        DslError::Semantic(vec![Diagnostic::error(message, span)])
    }
}

impl fmt::Display for DslError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics().iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for DslError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Semi,
    Dot,
    Bang,
    Amp,
    Pipe,
    Slash,
    Minus,
    Rel(Relation),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(s) => write!(f, "number `{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Bang => f.write_str("`!`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Rel(r) => write!(f, "`{r}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

fn syntax(message: impl Into<String>, span: Span) -> DslError {
    DslError::Syntax(Diagnostic::error(message, Some(span)))
}

fn lex(text: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let span = Span { line, col };
        let mut advance = 1;
        let tok = match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => None,
            '#' => {
                while i + advance < chars.len() && chars[i + advance] != '\n' {
                    advance += 1;
                }
                None
            }
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            '.' => Some(Tok::Dot),
            '!' | '¬' => Some(Tok::Bang),
            '&' | '∧' => Some(Tok::Amp),
            '|' | '∨' => Some(Tok::Pipe),
            '/' => Some(Tok::Slash),
            '-' => Some(Tok::Minus),
            '=' => Some(Tok::Rel(Relation::Eq)),
            '≤' => Some(Tok::Rel(Relation::Le)),
            '≥' => Some(Tok::Rel(Relation::Ge)),
            '<' | '>' => {
                let eq = chars.get(i + 1) == Some(&'=');
                if eq {
                    advance = 2;
                }
                Some(Tok::Rel(match (c, eq) {
                    ('<', false) => Relation::Lt,
                    ('<', true) => Relation::Le,
                    ('>', false) => Relation::Gt,
                    _ => Relation::Ge,
                }))
            }
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                advance = j - i;
                Some(Tok::Num(chars[i..j].iter().collect()))
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < chars.len() {
                    let d = chars[j];
                    let hyphen_word = d == '-' && chars.get(j + 1).is_some_and(|n| n.is_alphabetic());
                    if d.is_alphanumeric() || d == '_' || hyphen_word {
                        j += 1;
                    } else {
                        break;
                    }
                }
                advance = j - i;
                Some(Tok::Ident(chars[i..j].iter().collect()))
            }
            other => return Err(syntax(format!("unexpected character `{other}`"), span)),
        };
        if let Some(tok) = tok {
            toks.push(Token { tok, span });
        }
        i += advance;
        col += advance;
    }
    toks.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(toks)
}

type PResult<T> = Result<T, DslError>;

/// Marker recorded when an effect string contains a temporal comparison.
struct TemporalCmp {
    effect: TemporalEffect,
    span: Span,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Objects declared so far (used to classify trigger-pattern names).
    objects: BTreeSet<String>,
    /// Temporal fluent names; only set when parsing an effect.
    temporal_names: BTreeSet<String>,
    comparisons: Vec<TemporalCmp>,
}

impl Parser {
    fn new(text: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(text)?,
            pos: 0,
            objects: BTreeSet::new(),
            temporal_names: BTreeSet::new(),
            comparisons: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let idx = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok) -> PResult<()> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<()> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> DslError {
        syntax(format!("expected {wanted}, found {}", self.peek()), self.span())
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.span();
                self.bump();
                Ok((s, span))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn at_rational(&self) -> bool {
        matches!(self.peek(), Tok::Num(_)) || (*self.peek() == Tok::Minus && matches!(self.peek_at(1), Tok::Num(_)))
    }

    fn rational(&mut self) -> PResult<Rational> {
        let span = self.span();
        let mut text = String::new();
        if self.eat(&Tok::Minus) {
            text.push('-');
        }
        match self.bump().tok {
            Tok::Num(n) => text.push_str(&n),
            other => return Err(syntax(format!("expected a rational number, found {other}"), span)),
        }
        if self.eat(&Tok::Slash) {
            match self.bump().tok {
                Tok::Num(n) => {
                    text.push('/');
                    text.push_str(&n);
                }
                other => {
                    return Err(syntax(format!("expected a denominator, found {other}"), span))
                }
            }
        }
        text.parse()
            .map_err(|e| syntax(format!("malformed rational: {e}"), span))
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        let mut params = Vec::new();
        if !self.eat(&Tok::LParen) {
            return Ok(params);
        }
        if self.eat(&Tok::RParen) {
            return Ok(params);
        }
        loop {
            let (name, _) = self.ident("a parameter name")?;
            self.expect(&Tok::Colon)?;
            let (sort, _) = self.ident("a sort")?;
            params.push(Param { name, sort });
            if self.eat(&Tok::RParen) {
                return Ok(params);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    fn term(&mut self, scope: &[String]) -> PResult<Term> {
        let (name, span) = self.ident("an object term")?;
        if name == "_" {
            return Err(syntax("`_` is only allowed in trigger patterns", span));
        }
        Ok(if scope.contains(&name) {
            Term::Var(name)
        } else {
            Term::Const(name)
        })
    }

    fn terms(&mut self, scope: &[String]) -> PResult<Vec<Term>> {
        let mut args = Vec::new();
        if !self.eat(&Tok::LParen) {
            return Ok(args);
        }
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.term(scope)?);
            if self.eat(&Tok::RParen) {
                return Ok(args);
            }
            self.expect(&Tok::Comma)?;
        }
    }

    /// `name(t1, ..., tn, time)`: object terms followed by a rational time.
    fn action_ref(&mut self, scope: &[String]) -> PResult<ActionRef> {
        let (name, span) = self.ident("an action name")?;
        self.expect(&Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            if self.at_rational() {
                let time = TimePoint(self.rational()?);
                self.expect(&Tok::RParen)?;
                return Ok(ActionRef { name, args, time });
            }
            if *self.peek() == Tok::RParen {
                return Err(syntax(
                    format!("action `{name}` needs a time as its last argument"),
                    span,
                ));
            }
            args.push(self.term(scope)?);
            self.expect(&Tok::Comma)?;
        }
    }

    fn formula(&mut self, scope: &mut Vec<String>) -> PResult<Formula> {
        let mut f = self.conj(scope)?;
        while self.eat(&Tok::Pipe) {
            let g = self.conj(scope)?;
            f = Formula::or(f, g);
        }
        Ok(f)
    }

    fn conj(&mut self, scope: &mut Vec<String>) -> PResult<Formula> {
        let mut f = self.unary(scope)?;
        while self.eat(&Tok::Amp) {
            let g = self.unary(scope)?;
            f = Formula::and(f, g);
        }
        Ok(f)
    }

    fn unary(&mut self, scope: &mut Vec<String>) -> PResult<Formula> {
        if self.eat(&Tok::Bang) {
            return Ok(Formula::not(self.unary(scope)?));
        }
        if self.is_keyword("exists") && matches!(self.peek_at(1), Tok::Ident(_)) {
            self.bump();
            let (var, _) = self.ident("a variable")?;
            self.expect(&Tok::Colon)?;
            let (sort, _) = self.ident("a sort")?;
            self.expect(&Tok::Dot)?;
            scope.push(var.clone());
            let body = self.formula(scope);
            scope.pop();
            return Ok(Formula::Exists {
                var,
                sort,
                body: Box::new(body?),
            });
        }
        self.primary(scope)
    }

    fn primary(&mut self, scope: &mut Vec<String>) -> PResult<Formula> {
        if self.eat(&Tok::LParen) {
            let f = self.formula(scope)?;
            self.expect(&Tok::RParen)?;
            return Ok(f);
        }
        let span = self.span();
        let (name, _) = self.ident("a formula")?;
        match name.as_str() {
            "true" => return Ok(Formula::True),
            "false" => return Ok(Formula::falsum()),
            "Poss" if *self.peek() == Tok::LParen => {
                self.bump();
                let a = self.action_ref(scope)?;
                self.expect(&Tok::RParen)?;
                return Ok(Formula::Poss(a));
            }
            "After" if *self.peek() == Tok::LParen => {
                self.bump();
                let a = self.action_ref(scope)?;
                self.expect(&Tok::Comma)?;
                let body = self.formula(scope)?;
                self.expect(&Tok::RParen)?;
                return Ok(Formula::After(a, Box::new(body)));
            }
            _ => {}
        }
        let args = self.terms(scope)?;
        if let Tok::Rel(relation) = *self.peek() {
            if !self.temporal_names.contains(&name) {
                return Err(syntax(
                    format!("`{name}` is not a temporal fluent and cannot be compared"),
                    span,
                ));
            }
            self.bump();
            let threshold = self.rational()?;
            let args = args
                .into_iter()
                .map(|t| match t {
                    Term::Const(c) => Ok(c),
                    Term::Var(v) => Err(syntax(
                        format!("temporal effect argument `{v}` must be a constant"),
                        span,
                    )),
                })
                .collect::<PResult<Vec<_>>>()?;
            self.comparisons.push(TemporalCmp {
                effect: TemporalEffect {
                    fluent: name,
                    args,
                    relation,
                    threshold,
                },
                span,
            });
            return Ok(Formula::True);
        }
        Ok(Formula::Atom(Atom { fluent: name, args }))
    }

    fn trigger(&mut self, params: &[Param]) -> PResult<Trigger> {
        let (name, _) = self.ident("an action pattern")?;
        let mut scope: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
            loop {
                let (arg, _) = self.ident("a pattern argument")?;
                args.push(if arg == "_" {
                    PatArg::Any
                } else if scope.contains(&arg) {
                    PatArg::Var(arg)
                } else if self.objects.contains(&arg) {
                    PatArg::Const(arg)
                } else {
                    scope.push(arg.clone());
                    PatArg::Var(arg)
                });
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        let guard = if self.eat_keyword("when") {
            Some(self.formula(&mut scope)?)
        } else {
            None
        };
        Ok(Trigger {
            pattern: ActionPattern { name, args },
            guard,
        })
    }

    fn theory(&mut self) -> PResult<(HybridTheory, Vec<Diagnostic>)> {
        if *self.peek() == Tok::Eof {
            return Err(syntax("no theory declared", self.span()));
        }
        self.expect_keyword("theory")?;
        let (name, _) = self.ident("a theory name")?;
        let mut th = HybridTheory {
            name,
            ..Default::default()
        };
        let mut dups = Vec::new();
        let mut seen_start = false;
        loop {
            let span = self.span();
            let kw = match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) => kw,
                _ => return Err(self.unexpected("a section keyword")),
            };
            self.bump();
            match kw.as_str() {
                "theory" => return Err(syntax("only one theory per file", span)),
                "objects" => {
                    self.expect(&Tok::Colon)?;
                    loop {
                        let (obj, ospan) = self.ident("an object name")?;
                        self.expect(&Tok::Colon)?;
                        let (sort, _) = self.ident("a sort")?;
                        if th.objects.insert(obj.clone(), sort).is_some() {
                            dups.push(Diagnostic::error(format!("object `{obj}` declared twice"), Some(ospan)));
                        }
                        self.objects.insert(obj);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                "start" => {
                    self.expect(&Tok::Colon)?;
                    if seen_start {
                        dups.push(Diagnostic::error("start time declared twice", Some(span)));
                    }
                    seen_start = true;
                    th.initial_start = TimePoint(self.rational()?);
                }
                "action" => {
                    let (name, nspan) = self.ident("an action name")?;
                    let params = self.params()?;
                    self.expect_keyword("poss")?;
                    self.expect(&Tok::Colon)?;
                    let mut scope = params.iter().map(|p| p.name.clone()).collect();
                    let precondition = self.formula(&mut scope)?;
                    let decl = ActionDecl {
                        name: name.clone(),
                        params,
                        precondition,
                        span: nspan,
                    };
                    if th.actions.insert(name.clone(), decl).is_some() {
                        dups.push(Diagnostic::error(format!("action `{name}` declared twice"), Some(nspan)));
                    }
                }
                "fluent" => {
                    let (name, nspan) = self.ident("a fluent name")?;
                    let params = self.params()?;
                    let mut caused_by = Vec::new();
                    let mut canceled_by = Vec::new();
                    loop {
                        let list = if self.eat_keyword("caused-by") {
                            &mut caused_by
                        } else if self.eat_keyword("canceled-by") {
                            &mut canceled_by
                        } else {
                            break;
                        };
                        self.expect(&Tok::Colon)?;
                        loop {
                            list.push(self.trigger(&params)?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    let ssa = SuccessorStateAxiom {
                        fluent: name.clone(),
                        params,
                        caused_by,
                        canceled_by,
                        span: nspan,
                    };
                    if th.fluents.insert(name.clone(), ssa).is_some() {
                        dups.push(Diagnostic::error(format!("fluent `{name}` declared twice"), Some(nspan)));
                    }
                }
                "temporal" => {
                    let (name, nspan) = self.ident("a temporal fluent name")?;
                    let params = self.params()?;
                    let mut contexts = Vec::new();
                    while self.is_keyword("context") {
                        self.bump();
                        let (label, lspan) = self.ident("a context label")?;
                        self.expect(&Tok::Colon)?;
                        let mut scope = params.iter().map(|p| p.name.clone()).collect();
                        let condition = self.formula(&mut scope)?;
                        self.expect_keyword("rate")?;
                        let rate = self.rational()?;
                        contexts.push(Context {
                            label,
                            condition,
                            rate,
                            span: lspan,
                        });
                    }
                    let sea = StateEvolutionAxiom {
                        fluent: name.clone(),
                        params,
                        contexts,
                        span: nspan,
                    };
                    if th.temporals.insert(name.clone(), sea).is_some() {
                        dups.push(Diagnostic::error(
                            format!("temporal fluent `{name}` declared twice"),
                            Some(nspan),
                        ));
                    }
                }
                "init" => {
                    self.expect(&Tok::Colon)?;
                    loop {
                        let (fluent, ispan) = self.ident("a ground atom")?;
                        let args = self
                            .terms(&[])?
                            .into_iter()
                            .map(|t| t.name().to_string())
                            .collect();
                        let atom = GroundAtom::new(fluent, args);
                        self.expect(&Tok::Rel(Relation::Eq))?;
                        let fresh = if self.eat_keyword("true") {
                            th.init_discrete.insert(atom.clone(), true).is_none()
                        } else if self.eat_keyword("false") {
                            th.init_discrete.insert(atom.clone(), false).is_none()
                        } else if self.at_rational() {
                            let v = self.rational()?;
                            th.init_temporal.insert(atom.clone(), v).is_none()
                        } else {
                            return Err(self.unexpected("`true`, `false` or a rational"));
                        };
                        if !fresh {
                            dups.push(Diagnostic::error(
                                format!("initial value of `{atom}` given twice"),
                                Some(ispan),
                            ));
                        }
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                other => {
                    return Err(syntax(
                        format!("expected a section keyword, found `{other}`"),
                        span,
                    ))
                }
            }
        }
        Ok((th, dups))
    }
}

/// Parses a theory without running [`validate_theory`]. Duplicate
/// declarations are still reported.
pub fn parse_theory_unchecked(text: &str) -> Result<HybridTheory, DslError> {
    let (th, dups) = Parser::new(text)?.theory()?;
    if dups.is_empty() {
        Ok(th)
    } else {
        Err(DslError::Semantic(dups))
    }
}

/// Parses and validates a theory. Warnings are dropped; use
/// [`parse_theory_unchecked`] plus [`validate_theory`] to see them.
pub fn parse_theory(text: &str) -> Result<HybridTheory, DslError> {
    let th = parse_theory_unchecked(text)?;
    let errors: Vec<Diagnostic> = validate_theory(&th)
        .into_iter()
        .filter(Diagnostic::is_error)
        .collect();
    if errors.is_empty() {
        Ok(th)
    } else {
        Err(DslError::Semantic(errors))
    }
}

/// Parses `a1(args, t1); a2(args, t2); ...` into a scenario rooted at the
/// theory's initial situation. `noOp(t)` is always available.
pub fn parse_scenario(text: &str, th: &HybridTheory) -> Result<Scenario, DslError> {
    let mut p = Parser::new(text)?;
    let mut actions = Vec::new();
    while *p.peek() != Tok::Eof {
        if p.eat(&Tok::Semi) {
            continue;
        }
        let span = p.span();
        let action = p
            .action_ref(&[])?
            .to_action()
            .expect("constants only with empty scope");
        th.check_action(&action)
            .map_err(|e| DslError::semantic(e.to_string(), Some(span)))?;
        actions.push(action);
        if *p.peek() != Tok::Eof {
            p.expect(&Tok::Semi)?;
        }
    }
    Ok(Situation::from_actions(actions, th.initial_start.clone()))
}

/// Parses an effect: either one temporal comparison such as
/// `coreTemp(P1) >= 1000`, or a ground dynamic formula.
pub fn parse_effect(text: &str, th: &HybridTheory) -> Result<Effect, DslError> {
    let mut p = Parser::new(text)?;
    p.temporal_names = th.temporals.keys().cloned().collect();
    if *p.peek() == Tok::Eof {
        return Err(syntax("empty effect", p.span()));
    }
    let span = p.span();
    let f = p.formula(&mut Vec::new())?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("end of effect"));
    }
    match p.comparisons.len() {
        0 => {
            check_effect_formula(&f, th, span)?;
            Ok(Effect::Discrete(f))
        }
        1 if f == Formula::True => {
            let cmp = p.comparisons.pop().expect("one comparison");
            let sea = &th.temporals[&cmp.effect.fluent];
            if sea.params.len() != cmp.effect.args.len() {
                return Err(DslError::semantic(
                    format!(
                        "`{}` expects {} argument(s), found {}",
                        sea.fluent,
                        sea.params.len(),
                        cmp.effect.args.len()
                    ),
                    Some(cmp.span),
                ));
            }
            for (param, arg) in sea.params.iter().zip(&cmp.effect.args) {
                if th.objects.get(arg) != Some(&param.sort) {
                    return Err(DslError::semantic(
                        format!("`{arg}` is not an object of sort `{}`", param.sort),
                        Some(cmp.span),
                    ));
                }
            }
            Ok(Effect::Temporal(cmp.effect))
        }
        _ => Err(DslError::semantic("compound effects unsupported", Some(span))),
    }
}

fn check_effect_formula(f: &Formula, th: &HybridTheory, span: Span) -> Result<(), DslError> {
    let err = |m: String| DslError::semantic(m, Some(span));
    if let Some(v) = f.free_vars().into_iter().next() {
        return Err(err(format!("unbound variable `{v}`")));
    }
    let check_arg = |t: &Term, sort: &str, bound: bool| -> Result<(), DslError> {
        match t {
            Term::Const(c) => match th.objects.get(c) {
                None => Err(err(format!("unknown constant `{c}`"))),
                Some(s) if s != sort => Err(err(format!("`{c}` is not an object of sort `{sort}`"))),
                Some(_) => Ok(()),
            },
            Term::Var(_) if bound => Ok(()),
            Term::Var(v) => Err(err(format!("unbound variable `{v}`"))),
        }
    };
    for atom in f.atoms() {
        if th.temporals.contains_key(&atom.fluent) {
            return Err(err(format!(
                "temporal fluent `{}` must be compared with a threshold",
                atom.fluent
            )));
        }
        let Some(ssa) = th.fluents.get(&atom.fluent) else {
            return Err(err(format!("unknown fluent `{}`", atom.fluent)));
        };
        if ssa.params.len() != atom.args.len() {
            return Err(err(format!(
                "`{}` expects {} argument(s), found {}",
                atom.fluent,
                ssa.params.len(),
                atom.args.len()
            )));
        }
        for (p, a) in ssa.params.iter().zip(&atom.args) {
            check_arg(a, &p.sort, true)?;
        }
    }
    for a in f.action_refs() {
        if let Some(decl) = th.actions.get(&a.name) {
            if decl.params.len() != a.args.len() {
                return Err(err(format!(
                    "`{}` expects {} argument(s), found {}",
                    a.name,
                    decl.params.len(),
                    a.args.len()
                )));
            }
            for (p, t) in decl.params.iter().zip(&a.args) {
                check_arg(t, &p.sort, true)?;
            }
        } else if !(a.name == crate::model::NOOP && a.args.is_empty()) {
            return Err(err(format!("unknown action `{}`", a.name)));
        }
    }
    Ok(())
}

fn write_params(out: &mut String, params: &[Param]) {
    out.push('(');
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}: {}", p.name, p.sort);
    }
    out.push(')');
}

fn write_triggers(out: &mut String, keyword: &str, triggers: &[Trigger]) {
    if triggers.is_empty() {
        return;
    }
    let _ = write!(out, "\n  {keyword}: ");
    for (i, t) in triggers.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}", t.pattern);
        if let Some(g) = &t.guard {
            let _ = write!(out, " when {g}");
        }
    }
}

/// Canonical text form; parsing it yields a theory equal to `th`.
pub fn serialize_theory(th: &HybridTheory) -> String {
    let mut out = format!("theory {}\n", th.name);
    if !th.objects.is_empty() {
        let objs: Vec<String> = th
            .objects
            .iter()
            .map(|(o, s)| format!("{o} : {s}"))
            .collect();
        let _ = writeln!(out, "objects: {}", objs.join(", "));
    }
    let _ = writeln!(out, "start: {}", th.initial_start);
    for decl in th.actions.values() {
        out.push_str("\naction ");
        out.push_str(&decl.name);
        write_params(&mut out, &decl.params);
        let _ = write!(out, " poss: {}", decl.precondition);
    }
    if !th.actions.is_empty() {
        out.push('\n');
    }
    for ssa in th.fluents.values() {
        out.push_str("\nfluent ");
        out.push_str(&ssa.fluent);
        write_params(&mut out, &ssa.params);
        write_triggers(&mut out, "caused-by", &ssa.caused_by);
        write_triggers(&mut out, "canceled-by", &ssa.canceled_by);
        out.push('\n');
    }
    for sea in th.temporals.values() {
        out.push_str("\ntemporal ");
        out.push_str(&sea.fluent);
        write_params(&mut out, &sea.params);
        for c in &sea.contexts {
            let _ = write!(out, "\n  context {}: {} rate {}", c.label, c.condition, c.rate);
        }
        out.push('\n');
    }
    let mut init: Vec<String> = th
        .init_discrete
        .iter()
        .map(|(a, v)| format!("{a} = {v}"))
        .collect();
    init.extend(th.init_temporal.iter().map(|(a, v)| format!("{a} = {v}")));
    if !init.is_empty() {
        let _ = writeln!(out, "\ninit: {}", init.join(", "));
    }
    out
}

pub fn serialize_scenario(s: &Scenario) -> String {
    s.actions
        .iter()
        .map(ActionTerm::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_noop;
    use proptest::prelude::*;

    const NPP: &str = include_str!("../../../fixtures/npp.hct");

    #[test]
    fn npp_parses_clean() {
        let th = parse_theory(NPP).unwrap();
        assert_eq!(th.actions.len(), 5);
        assert_eq!(th.fluents.len(), 2);
        let sea = &th.temporals["coreTemp"];
        let rates: Vec<String> = sea.contexts.iter().map(|c| c.rate.to_string()).collect();
        assert_eq!(rates, ["100", "35", "55"]);
        assert_eq!(th.init_temporal[&GroundAtom::new("coreTemp", vec!["P1".into()])], Rational::integer(-50));
        assert!(validate_theory(&th).is_empty());
    }

    #[test]
    fn empty_file() {
        let err = parse_theory("  # nothing\n").unwrap_err();
        assert!(err.to_string().contains("no theory declared"), "{err}");
    }

    #[test]
    fn context_line() {
        let th = parse_theory(
            "theory t objects: P1 : plant\n\
             fluent R(p: plant)\nfluent C(p: plant)\n\
             temporal temp(p: plant)\n  context g1: R(p) & C(p) rate 100\n\
             init: temp(P1) = 0",
        )
        .unwrap();
        let ctx = &th.temporals["temp"].contexts[0];
        assert_eq!(ctx.label, "g1");
        assert_eq!(ctx.rate, Rational::integer(100));
        assert_eq!(
            ctx.condition,
            Formula::and(
                Formula::Atom(Atom { fluent: "R".into(), args: vec![Term::Var("p".into())] }),
                Formula::Atom(Atom { fluent: "C".into(), args: vec![Term::Var("p".into())] }),
            )
        );
    }

    #[test]
    fn syntax_errors_carry_spans() {
        let err = parse_theory("theory t\naction a() poss: (true").unwrap_err();
        let DslError::Syntax(d) = err else { panic!("expected syntax error") };
        assert_eq!(d.span.map(|s| s.line), Some(2));
    }

    #[test]
    fn reserved_noop() {
        let err = parse_theory("theory t\naction noOp() poss: true").unwrap_err();
        assert!(err.to_string().contains("reserved symbol"), "{err}");
    }

    #[test]
    fn identical_contexts_are_flagged() {
        let err = parse_theory(
            "theory t objects: P1 : plant\nfluent R(p: plant)\n\
             temporal temp(p: plant) context g: R(p) rate 1 context h: R(p) rate 2\n\
             init: temp(P1) = 0",
        )
        .unwrap_err();
        assert!(err.to_string().contains("not mutually exclusive"), "{err}");
    }

    #[test]
    fn scenarios() {
        let th = parse_theory(NPP).unwrap();
        let s2 = parse_scenario("rup(P1,5); csFailure(P1,15); mRad(P1,20); fixP(P1,26)", &th).unwrap();
        assert_eq!(s2.len(), 4);
        assert_eq!(s2.actions[3], ActionTerm::new("fixP", vec!["P1".into()], 26));
        assert!(parse_scenario("", &th).unwrap().is_initial());
        let s2p = parse_scenario("rup(P1, 5); noOp(15); mRad(P1,20); fixP(P1,26)", &th).unwrap();
        assert_eq!(s2p.actions[1], make_noop(15));
        let half = parse_scenario("rup(P1, 2.5); mRad(P1, 7/2)", &th).unwrap();
        assert_eq!(half.actions[1].time, TimePoint(Rational::new(7, 2)));

        for bad in ["boom(P1, 1)", "rup(5)", "rup(P1, P1, 5)", "rup(P1, 1.)", "rup(P2, 1)"] {
            assert!(parse_scenario(bad, &th).is_err(), "{bad}");
        }
    }

    #[test]
    fn effects() {
        let th = parse_theory(NPP).unwrap();
        assert_eq!(
            parse_effect("coreTemp(P1) >= 1000", &th).unwrap(),
            Effect::Temporal(TemporalEffect {
                fluent: "coreTemp".into(),
                args: vec!["P1".into()],
                relation: Relation::Ge,
                threshold: Rational::integer(1000),
            })
        );
        assert_eq!(
            parse_effect("CSFailed(P1)", &th).unwrap(),
            Effect::Discrete(Formula::atom("CSFailed", &["P1"]))
        );
        let err = parse_effect("coreTemp(P1) >= 1000 & CSFailed(P1)", &th).unwrap_err();
        assert!(err.to_string().contains("compound effects unsupported"));
        assert!(parse_effect("exists p: plant. Ruptured(p)", &th).is_ok());
        assert!(parse_effect("After(csFailure(P1, 1), CSFailed(P1))", &th).is_ok());
        assert!(parse_effect("coreTemp(P1)", &th).is_err());
        assert!(parse_effect("Ruptured(P1) > 3", &th).is_err());
    }

    #[test]
    fn npp_round_trip() {
        let th = parse_theory(NPP).unwrap();
        let text = serialize_theory(&th);
        assert_eq!(parse_theory(&text).unwrap(), th);
        assert_eq!(serialize_theory(&parse_theory(&text).unwrap()), text);
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::True),
            prop::sample::select(vec!["R", "C"]).prop_map(|f| Formula::Atom(Atom {
                fluent: f.into(),
                args: vec![Term::Var("p".into())],
            })),
            prop::sample::select(vec!["P1", "P2"]).prop_map(|o| Formula::atom("R", &[o])),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                inner.prop_map(|b| Formula::Exists {
                    var: "q".into(),
                    sort: "plant".into(),
                    body: Box::new(Formula::and(
                        b,
                        Formula::Atom(Atom { fluent: "C".into(), args: vec![Term::Var("q".into())] })
                    )),
                }),
            ]
        })
    }

    fn arb_rational() -> impl Strategy<Value = Rational> {
        (-500i64..500, 1i64..9).prop_map(|(n, d)| Rational::new(n, d))
    }

    prop_compose! {
        fn arb_theory()(
            pre in arb_formula(),
            guard in proptest::option::of(arb_formula()),
            rates in proptest::collection::vec(arb_rational(), 0..3),
            init in arb_rational(),
            start in arb_rational(),
            r1 in any::<bool>(),
        ) -> HybridTheory {
            let text = "theory gen\nobjects: P1 : plant, P2 : plant\n\
                        fluent R(p: plant)\nfluent C(p: plant)\n\
                        action go(p: plant) poss: true\naction stop(p: plant) poss: true\n\
                        temporal temp(p: plant)";
            let mut th = parse_theory_unchecked(text).unwrap();
            th.actions.get_mut("go").unwrap().precondition = pre;
            let ssa = th.fluents.get_mut("R").unwrap();
            ssa.caused_by.push(Trigger {
                pattern: ActionPattern { name: "go".into(), args: vec![PatArg::Var("p".into())] },
                guard,
            });
            ssa.canceled_by.push(Trigger {
                pattern: ActionPattern { name: "stop".into(), args: vec![PatArg::Any] },
                guard: None,
            });
            let labels = ["g1", "g2", "g3"];
            let sea = th.temporals.get_mut("temp").unwrap();
            for (i, rate) in rates.into_iter().enumerate() {
                sea.contexts.push(Context {
                    label: labels[i].into(),
                    condition: Formula::Atom(Atom { fluent: "C".into(), args: vec![Term::Var("p".into())] }),
                    rate,
                    span: Span::default(),
                });
            }
            th.init_temporal.insert(GroundAtom::new("temp", vec!["P1".into()]), init);
            th.init_discrete.insert(GroundAtom::new("R", vec!["P2".into()]), r1);
            th.initial_start = TimePoint(start);
            th
        }
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(th in arb_theory()) {
            let text = serialize_theory(&th);
            let back = parse_theory_unchecked(&text).unwrap();
            prop_assert_eq!(&back, &th);
            prop_assert_eq!(serialize_theory(&back), text);
        }

        #[test]
        fn formula_display_round_trips(f in arb_formula()) {
            let mut p = Parser::new(&f.to_string()).unwrap();
            let g = p.formula(&mut vec!["p".to_string()]).unwrap();
            prop_assert_eq!(g, f);
        }

        #[test]
        fn parsing_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let text = String::from_utf8_lossy(&bytes);
            let _ = parse_theory(&text);
            if let Ok(th) = parse_theory(NPP) {
                let _ = parse_scenario(&text, &th);
                let _ = parse_effect(&text, &th);
            }
        }

        #[test]
        fn parsing_never_panics_on_token_soup(
            words in proptest::collection::vec(
                prop::sample::select(vec![
                    "theory", "t", "objects", ":", "P1", "plant", ",", "action", "(", ")", "poss",
                    "fluent", "caused-by", "when", "temporal", "context", "rate", "init", "=",
                    "-", "3", "/", "0", "1.5", "exists", ".", "!", "&", "|", "Poss", "After",
                    "true", "false", ">=", "_", ";", "start",
                ]),
                0..40,
            )
        ) {
            let text = words.join(" ");
            let _ = parse_theory(&text);
        }
    }
}
