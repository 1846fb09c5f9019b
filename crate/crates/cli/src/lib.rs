//! Library side of the `hycause` binary: argument parsing, command dispatch
//! and output rendering. Nothing here touches the process streams, so the
//! whole front end can be driven from tests through [`run`].

mod render;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hycause_core::counterfactual::{butfor_report, ButForMode, CfError};
use hycause_core::dsl::{parse_effect, parse_scenario, parse_theory_unchecked, DslError};
use hycause_core::evaluator::ExecViolation;
use hycause_core::theory::{validate_theory, Bindings};
use hycause_core::{
    make_noop, CauseError, CausePair, Diagnostic, DiscreteSetting, Effect, EvalError, Evaluator, HybridSetting,
    HybridTheory, Rational, Scenario, SettingError, TimePoint, Trace,
};
use hycause_testkit::campaign;
use serde_json::{json, Value};

pub use render::render_text;

/// Version tag carried by every JSON record.
pub const SCHEMA: &str = "hycause/1";

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Io = 1,
    Parse = 2,
    Semantic = 3,
    NotExecutable = 4,
    InvalidSetting = 5,
    NoCause = 6,
    Internal = 7,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn kind(self) -> &'static str {
        match self {
            Exit::Ok => "ok",
            Exit::Io => "io",
            Exit::Parse => "parse",
            Exit::Semantic => "semantic",
            Exit::NotExecutable => "not-executable",
            Exit::InvalidSetting => "invalid-setting",
            Exit::NoCause => "no-cause",
            Exit::Internal => "internal",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

impl Format {
    fn from_env(value: &str) -> Option<Format> {
        match value.trim().to_ascii_lowercase().as_str() {
            "json" => Some(Format::Json),
            "text" => Some(Format::Text),
            _ => None,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "hycause", version, about = "Actual-cause analysis over hybrid temporal action theories")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format; the HYCAUSE_FORMAT environment variable takes precedence.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a theory file and list its diagnostics.
    Validate {
        #[arg(long)]
        theory: PathBuf,
    },
    /// Progress a scenario and print fluent values per situation.
    Run(ScenarioArgs),
    /// Evaluate an effect at the query time.
    Eval(QueryArgs),
    /// Find the actual cause of an effect.
    Cause(QueryArgs),
    /// Build the defused scenario by iterated cause elimination.
    Defuse(QueryArgs),
    /// Counterfactual dependence test against the defused scenario.
    Butfor(ButForArgs),
    /// Run the randomized property suites.
    Check {
        #[arg(long, default_value_t = campaign::DEFAULT_SEED)]
        seed: u64,
        /// Settings per suite.
        #[arg(long, default_value_t = 1000)]
        cases: usize,
    },
}

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub theory: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[command(flatten)]
    pub files: ScenarioArgs,
    #[arg(long)]
    pub effect: String,
    /// Query at the start of the last situation (the default).
    #[arg(long, conflicts_with = "at")]
    pub at_start: bool,
    /// Query at time T; a T inside the last situation appends noOp(T).
    #[arg(long, value_name = "T")]
    pub at: Option<String>,
}

#[derive(Args, Debug)]
pub struct ButForArgs {
    #[command(flatten)]
    pub query: QueryArgs,
    /// Remove only the primary cause instead of defusing.
    #[arg(long)]
    pub single_removal: bool,
}

/// Result of one invocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
struct Failure {
    exit: Exit,
    message: String,
    details: Vec<(&'static str, Value)>,
    diagnostics: Vec<Diagnostic>,
}

impl Failure {
    fn new(exit: Exit, message: impl Into<String>) -> Self {
        Failure {
            exit,
            message: message.into(),
            details: Vec::new(),
            diagnostics: Vec::new(),
        }
    }

    fn with(mut self, key: &'static str, value: Value) -> Self {
        self.details.push((key, value));
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error: {}", self.message)?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

struct Report {
    record: Value,
    exit: Exit,
}

impl Report {
    fn ok(record: Value) -> Self {
        Report { record, exit: Exit::Ok }
    }
}

/// Parses `args` (including the program name) and executes the command.
/// `env_format` is the value of `HYCAUSE_FORMAT`, if set.
pub fn run<I, T>(args: I, env_format: Option<&str>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code: Exit::Parse.code(),
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let format = match env_format {
        Some(v) => match Format::from_env(v) {
            Some(f) => f,
            None => {
                return Outcome {
                    code: Exit::Parse.code(),
                    stdout: String::new(),
                    stderr: format!("error: HYCAUSE_FORMAT must be `json` or `text`, got `{v}`\n"),
                }
            }
        },
        None => cli.format,
    };
    let name = command_name(&cli.command);
    match dispatch(&cli.command) {
        Ok(report) => Outcome {
            code: report.exit.code(),
            stdout: emit(&stamp(name, report.record), format),
            stderr: String::new(),
        },
        Err(failure) => {
            let stdout = match format {
                Format::Json => emit(&stamp(name, error_record(&failure)), format),
                Format::Text => String::new(),
            };
            Outcome {
                code: failure.exit.code(),
                stdout,
                stderr: format!("{failure}\n"),
            }
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Run(_) => "run",
        Command::Eval(_) => "eval",
        Command::Cause(_) => "cause",
        Command::Defuse(_) => "defuse",
        Command::Butfor(_) => "butfor",
        Command::Check { .. } => "check",
    }
}

fn stamp(command: &str, record: Value) -> Value {
    let mut out = serde_json::Map::new();
    out.insert("schema".into(), json!(SCHEMA));
    out.insert("command".into(), json!(command));
    if let Value::Object(fields) = record {
        out.extend(fields);
    }
    Value::Object(out)
}

fn error_record(f: &Failure) -> Value {
    let mut error = json!({
        "kind": f.exit.kind(),
        "exit_code": f.exit.code(),
        "message": f.message,
    });
    if !f.diagnostics.is_empty() {
        error["diagnostics"] = diagnostics_json(&f.diagnostics);
    }
    for (k, v) in &f.details {
        error[*k] = v.clone();
    }
    json!({ "error": error })
}

fn emit(record: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(record).expect("serializable");
            s.push('\n');
            s
        }
        Format::Text => render_text(record),
    }
}

fn dispatch(command: &Command) -> Result<Report, Failure> {
    match command {
        Command::Validate { theory } => cmd_validate(theory),
        Command::Run(args) => cmd_run(args),
        Command::Eval(q) => cmd_eval(q),
        Command::Cause(q) => cmd_cause(q),
        Command::Defuse(q) => cmd_defuse(q),
        Command::Butfor(b) => cmd_butfor(b),
        Command::Check { seed, cases } => Ok(cmd_check(*seed, *cases)),
    }
}

// ---------------------------------------------------------------- loading

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new(Exit::Io, format!("cannot read {}: {e}", path.display())))
}

fn dsl_failure(path: &str, e: DslError) -> Failure {
    let (exit, message) = match &e {
        DslError::Syntax(_) => (Exit::Parse, format!("{path}: syntax error")),
        DslError::Semantic(ds) => (Exit::Semantic, format!("{path}: {} semantic error(s)", ds.len())),
    };
    Failure {
        exit,
        message,
        details: Vec::new(),
        diagnostics: e.diagnostics(),
    }
}

fn load_theory(path: &Path) -> Result<HybridTheory, Failure> {
    let text = read(path)?;
    let th = parse_theory_unchecked(&text).map_err(|e| dsl_failure(&path.display().to_string(), e))?;
    let errors: Vec<Diagnostic> = validate_theory(&th).into_iter().filter(Diagnostic::is_error).collect();
    if !errors.is_empty() {
        return Err(Failure {
            exit: Exit::Semantic,
            message: format!("{}: {} semantic error(s)", path.display(), errors.len()),
            details: Vec::new(),
            diagnostics: errors,
        });
    }
    Ok(th)
}

fn load_scenario(path: &Path, th: &HybridTheory) -> Result<Scenario, Failure> {
    let text = read(path)?;
    parse_scenario(&text, th).map_err(|e| dsl_failure(&path.display().to_string(), e))
}

struct Query {
    theory: HybridTheory,
    scenario: Scenario,
    effect: Effect,
    appended: Option<TimePoint>,
}

fn load_query(q: &QueryArgs) -> Result<Query, Failure> {
    let theory = load_theory(&q.files.theory)?;
    let mut scenario = load_scenario(&q.files.scenario, &theory)?;
    let effect = parse_effect(&q.effect, &theory).map_err(|e| dsl_failure("effect", e))?;
    let mut appended = None;
    if let Some(at) = &q.at {
        let t: Rational = at
            .parse()
            .map_err(|e| Failure::new(Exit::Parse, format!("invalid query time `{at}`: {e}")))?;
        let start = scenario.start_of_prefix(scenario.len());
        if t < start.0 {
            return Err(Failure::new(
                Exit::Parse,
                format!("query time {t} precedes the start {start} of the last situation"),
            ));
        }
        if t > start.0 {
            let time = TimePoint(t);
            scenario = scenario.append(make_noop(time.clone()));
            appended = Some(time);
        }
    }
    Ok(Query {
        theory,
        scenario,
        effect,
        appended,
    })
}

// ---------------------------------------------------------------- errors

fn violation_failure(v: &ExecViolation) -> Failure {
    Failure::new(Exit::NotExecutable, format!("scenario is not executable: {v}")).with("violation", json!(v))
}

fn eval_failure(e: EvalError) -> Failure {
    match e {
        EvalError::NotExecutable(v) => violation_failure(&v),
        EvalError::NotAPrefix | EvalError::TemporalParadox { .. } => Failure::new(Exit::Internal, e.to_string()),
        other => Failure::new(Exit::Semantic, other.to_string()),
    }
}

fn setting_failure(e: SettingError) -> Failure {
    if let SettingError::Eval(inner) = e {
        return eval_failure(inner);
    }
    let conjunct = match &e {
        SettingError::EmptyScenario => "non-empty",
        SettingError::NotExecutable(_) => "executable",
        SettingError::EffectInitiallyTrue => "false-initially",
        SettingError::EffectBeforeFirstAction(_) => "false-before-first-action",
        SettingError::EffectNotAchieved | SettingError::Eval(_) => "achieved",
    };
    Failure::new(Exit::InvalidSetting, format!("invalid setting: {e}")).with("conjunct", json!(conjunct))
}

fn cause_failure(e: CauseError) -> Failure {
    match e {
        CauseError::Setting(s) => setting_failure(s),
        CauseError::Eval(e) => eval_failure(e),
        CauseError::Disagreement { direct, contribution } => Failure::new(
            Exit::Internal,
            format!(
                "internal error: cause definitions disagree (context route {}, contribution route {})",
                pair_text(direct.as_deref()),
                pair_text(contribution.as_deref())
            ),
        ),
        CauseError::Invariant(m) => Failure::new(Exit::Internal, format!("internal error: {m}")),
    }
}

fn cf_failure(e: CfError) -> Failure {
    match e {
        CfError::NoPrimaryCause => Failure::new(Exit::NoCause, "the setting has no primary cause"),
        CfError::Cause(c) => cause_failure(c),
        other => Failure::new(Exit::Internal, format!("internal error: {other}")),
    }
}

// ---------------------------------------------------------------- records

fn diagnostics_json(ds: &[Diagnostic]) -> Value {
    ds.iter()
        .map(|d| {
            json!({
                "severity": if d.is_error() { "error" } else { "warning" },
                "message": d.message,
                "line": d.span.map(|s| s.line),
                "col": d.span.map(|s| s.col),
            })
        })
        .collect()
}

fn scenario_json(s: &Scenario) -> Value {
    s.actions.iter().map(|a| json!(a.to_string())).collect()
}

fn pair_json(p: Option<&CausePair>) -> Value {
    match p {
        Some(p) => json!({ "action": p.action.to_string(), "timestamp": p.ts.0 }),
        None => Value::Null,
    }
}

fn pair_text(p: Option<&CausePair>) -> String {
    p.map_or_else(|| "none".to_string(), ToString::to_string)
}

fn trace_of(ev: &Evaluator<'_>, s: &Scenario) -> Result<Trace, Failure> {
    ev.trace(s).map_err(eval_failure)
}

fn evaluator(th: &HybridTheory) -> Result<Evaluator<'_>, Failure> {
    Evaluator::new(th).map_err(eval_failure)
}

fn timeline_json(ev: &Evaluator<'_>, trace: &Trace) -> Result<Value, Failure> {
    let timeline = ev.timeline(trace).map_err(eval_failure)?;
    Ok(serde_json::to_value(&timeline.records).expect("serializable"))
}

fn query_json(q: &Query) -> Value {
    json!({
        "theory": q.theory.name,
        "scenario": scenario_json(&q.scenario),
        "effect": q.effect.to_string(),
        "appended_noop": q.appended,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

// ---------------------------------------------------------------- commands

fn cmd_validate(path: &Path) -> Result<Report, Failure> {
    let text = read(path)?;
    let th = parse_theory_unchecked(&text).map_err(|e| dsl_failure(&path.display().to_string(), e))?;
    let diagnostics = validate_theory(&th);
    let errors: Vec<Diagnostic> = diagnostics.iter().filter(|d| d.is_error()).cloned().collect();
    if !errors.is_empty() {
        return Err(Failure {
            exit: Exit::Semantic,
            message: format!("{}: {} error(s)", path.display(), errors.len()),
            details: Vec::new(),
            diagnostics: diagnostics.clone(),
        });
    }
    Ok(Report::ok(json!({
        "theory": th.name,
        "valid": true,
        "diagnostics": diagnostics_json(&diagnostics),
    })))
}

fn cmd_run(args: &ScenarioArgs) -> Result<Report, Failure> {
    let th = load_theory(&args.theory)?;
    let scenario = load_scenario(&args.scenario, &th)?;
    let ev = evaluator(&th)?;
    let trace = trace_of(&ev, &scenario)?;
    if let Some(v) = &trace.violation {
        return Err(violation_failure(v));
    }
    Ok(Report::ok(json!({
        "theory": th.name,
        "scenario": scenario_json(&scenario),
        "executable": true,
        "timeline": timeline_json(&ev, &trace)?,
    })))
}

fn cmd_eval(q: &QueryArgs) -> Result<Report, Failure> {
    let q = load_query(q)?;
    let ev = evaluator(&q.theory)?;
    let trace = trace_of(&ev, &q.scenario)?;
    if let Some(v) = &trace.violation {
        return Err(violation_failure(v));
    }
    let n = trace.len();
    let (holds, value) = match &q.effect {
        Effect::Temporal(e) => {
            let v = ev
                .value_at(trace.state(n), &e.ground_fluent(), trace.start(n))
                .map_err(eval_failure)?;
            (e.holds_for(&v), json!(v))
        }
        Effect::Discrete(f) => (ev.eval(f, trace.state(n), &Bindings::new()).map_err(eval_failure)?, Value::Null),
    };
    Ok(Report::ok(merge(
        query_json(&q),
        json!({ "time": trace.start(n), "holds": holds, "value": value }),
    )))
}

fn cmd_cause(q: &QueryArgs) -> Result<Report, Failure> {
    let q = load_query(q)?;
    let ev = evaluator(&q.theory)?;
    let (record, found) = match &q.effect {
        Effect::Temporal(e) => {
            let setting = HybridSetting::new(&ev, &q.scenario, e).map_err(setting_failure)?;
            let v = setting.analyze().map_err(cause_failure)?;
            let found = v.cause.is_some();
            (
                json!({
                    "kind": "temporal",
                    "cause": pair_json(v.cause.as_ref()),
                    "achievement": v.achievement,
                    "context": v.context,
                    "agreement": v.agreement,
                    "implicit_in_initial_state": v.implicit_in_initial_state,
                }),
                found,
            )
        }
        Effect::Discrete(f) => {
            let setting = DiscreteSetting::new(&ev, &q.scenario, f).map_err(setting_failure)?;
            let direct = setting.find_direct_cause().map_err(eval_failure)?;
            let mut causes: Vec<CausePair> = setting.causes().map_err(eval_failure)?.into_iter().collect();
            causes.sort_by_key(|p| p.ts);
            let found = direct.is_some();
            (
                json!({
                    "kind": "discrete",
                    "cause": pair_json(direct.as_ref()),
                    "causes": causes.iter().map(|p| pair_json(Some(p))).collect::<Vec<_>>(),
                }),
                found,
            )
        }
    };
    Ok(Report {
        record: merge(query_json(&q), record),
        exit: if found { Exit::Ok } else { Exit::NoCause },
    })
}

fn replacements_json(r: &[hycause_core::Replacement]) -> Value {
    r.iter()
        .map(|r| json!({ "timestamp": r.ts.0, "removed": r.old_action.to_string(), "inserted": r.new_action.to_string() }))
        .collect()
}

fn cmd_defuse(q: &QueryArgs) -> Result<Report, Failure> {
    let q = load_query(q)?;
    let ev = evaluator(&q.theory)?;
    let report = butfor_report(&ev, &q.effect, &q.scenario, ButForMode::Defused).map_err(cf_failure)?;
    if report.cause.is_none() {
        return Err(Failure::new(Exit::NoCause, "the setting has no primary cause").with(
            "implicit_in_initial_state",
            json!(!report.contexts_initially_false),
        ));
    }
    let trace = trace_of(&ev, &report.defused)?;
    Ok(Report::ok(merge(
        query_json(&q),
        json!({
            "cause": pair_json(report.cause.as_ref()),
            "eliminated": replacements_json(&report.replacements),
            "defused": scenario_json(&report.defused),
            "defused_executable": report.defused_executable,
            "effect_in_defused": report.effect_in_defused,
            "timeline": timeline_json(&ev, &trace)?,
        }),
    )))
}

fn cmd_butfor(b: &ButForArgs) -> Result<Report, Failure> {
    let q = load_query(&b.query)?;
    let ev = evaluator(&q.theory)?;
    let mode = if b.single_removal {
        ButForMode::SingleRemoval
    } else {
        ButForMode::Defused
    };
    let r = butfor_report(&ev, &q.effect, &q.scenario, mode).map_err(cf_failure)?;
    Ok(Report::ok(merge(
        query_json(&q),
        json!({
            "mode": r.mode,
            "cause": pair_json(r.cause.as_ref()),
            "replacements": replacements_json(&r.replacements),
            "counterfactual": scenario_json(&r.defused),
            "counterfactual_executable": r.defused_executable,
            "effect_in_counterfactual": r.effect_in_defused,
            "effect_persists": r.effect_persists(),
            "contexts_initially_false": r.contexts_initially_false,
            "verdict": r.verdict,
        }),
    )))
}

fn cmd_check(seed: u64, cases: usize) -> Report {
    let reports = campaign::run_all(cases, cases, seed);
    let passed = reports.iter().all(campaign::SuiteReport::passed);
    let suites: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "name": r.name,
                "cases": r.cases,
                "exercised": r.exercised,
                "failed": r.failed,
                "seconds": r.elapsed.as_secs_f64(),
                "first_failure": r.failures.first(),
            })
        })
        .collect();
    Report {
        record: json!({ "seed": seed, "passed": passed, "suites": suites }),
        exit: if passed { Exit::Ok } else { Exit::Internal },
    }
}
