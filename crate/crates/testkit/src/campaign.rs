//! Randomized property suites comparing the core engines with [`Naive`].
//!
//! Each suite draws settings from a fixed-seed ChaCha stream and returns a
//! [`SuiteReport`]; a suite never panics on a property failure, it records a
//! reproduction recipe instead.

use std::time::{Duration, Instant};

use hycause_core::counterfactual::{butfor_report, defused_situation, ButForMode, ButForVerdict};
use hycause_core::model::{make_noop, ActionTerm, Scenario, TimePoint};
use hycause_core::theory::{Effect, Relation, TemporalEffect};
use hycause_core::{Evaluator, HybridSetting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gen::{random_scenario, random_setting, GenConfig, RandomSetting};
use crate::naive::Naive;

pub const DEFAULT_SEED: u64 = 0x4859_4341_5553_4531;

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    /// Cases where the property's premise was non-vacuous.
    pub exercised: usize,
    pub failed: usize,
    /// Reproduction recipes for the first few failures.
    pub failures: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

struct Run {
    report: SuiteReport,
    started: Instant,
}

impl Run {
    fn new(name: &'static str) -> Self {
        Run {
            report: SuiteReport {
                name,
                cases: 0,
                exercised: 0,
                failed: 0,
                failures: Vec::new(),
                elapsed: Duration::ZERO,
            },
            started: Instant::now(),
        }
    }

    fn check(&mut self, ok: bool, s: &RandomSetting, what: impl FnOnce() -> String) {
        if ok {
            return;
        }
        self.report.failed += 1;
        if self.report.failures.len() < 5 {
            self.report.failures.push(format!("{}\n{}", what(), s.describe()));
        }
    }

    fn finish(mut self) -> SuiteReport {
        self.report.elapsed = self.started.elapsed();
        self.report
    }
}

fn rng(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn analyze(s: &RandomSetting) -> Result<hycause_core::CauseVerdict, String> {
    let ev = Evaluator::new(&s.theory).expect("validated theory");
    let setting = HybridSetting::new(&ev, &s.scenario, &s.effect).map_err(|e| e.to_string())?;
    setting.analyze().map_err(|e| e.to_string())
}

fn naive_cause(s: &RandomSetting) -> Option<usize> {
    Naive::new(&s.theory)
        .primary_causes(&s.effect, &s.scenario.actions)
        .first()
        .copied()
}

/// Never more than one primary cause, and never more than one direct cause
/// of any context within `sφ`.
pub fn uniqueness(n: usize, seed: u64) -> SuiteReport {
    let mut run = Run::new("uniqueness of the primary cause");
    let mut rng = rng(seed, 1);
    let cfg = GenConfig::default();
    for _ in 0..n {
        let s = random_setting(&mut rng, &cfg);
        let naive = Naive::new(&s.theory);
        let ev = Evaluator::new(&s.theory).expect("validated theory");
        let sigma = &s.scenario.actions;
        let primaries = naive.primary_causes(&s.effect, sigma);
        run.check(primaries.len() <= 1, &s, || format!("naive primary causes {primaries:?}"));
        let Ok(setting) = HybridSetting::new(&ev, &s.scenario, &s.effect) else {
            run.check(false, &s, || "core rejected a valid setting".into());
            continue;
        };
        let sphi = naive.achv_sit(&s.effect, sigma).expect("valid setting");
        let contributors: Vec<usize> = (0..sigma.len())
            .filter(|&sa| setting.dir_act_contr(&sigma[sa], sa, sphi).unwrap_or(false))
            .collect();
        run.check(contributors.len() <= 1, &s, || format!("core contributors {contributors:?}"));
        let atom = s.effect.ground_fluent();
        for (label, gamma, _) in s.theory.ground_contexts(&atom).expect("declared") {
            let direct = naive.direct_causes(&gamma, sigma, sphi);
            run.check(direct.len() <= 1, &s, || format!("context {label}: direct causes {direct:?}"));
        }
        run.report.exercised += usize::from(!primaries.is_empty());
        run.report.cases += 1;
    }
    run.finish()
}

/// The achievement situation matches the reference, and qualification is
/// upward-closed from it, so it is the unique earliest qualifying prefix.
pub fn achievement(n: usize, seed: u64) -> SuiteReport {
    let mut run = Run::new("uniqueness of the achievement situation");
    let mut rng = rng(seed, 2);
    let cfg = GenConfig::default();
    for _ in 0..n {
        let s = random_setting(&mut rng, &cfg);
        let naive = Naive::new(&s.theory);
        let ev = Evaluator::new(&s.theory).expect("validated theory");
        let setting = HybridSetting::new(&ev, &s.scenario, &s.effect).expect("valid setting");
        let core = setting.achv_sit().expect("evaluates");
        let reference = naive.achv_sit(&s.effect, &s.scenario.actions);
        run.check(core.is_some() && core == reference, &s, || format!("core {core:?} vs naive {reference:?}"));
        if let Some(k) = core {
            let flags: Vec<bool> = (0..=s.scenario.len())
                .map(|j| setting.is_achievement(j).expect("evaluates"))
                .collect();
            let shape = flags.iter().enumerate().all(|(j, &f)| f == (j >= k));
            run.check(shape, &s, || format!("qualifying prefixes {flags:?}"));
            run.report.exercised += usize::from(k < s.scenario.len());
        }
        run.report.cases += 1;
    }
    run.finish()
}

/// A context that holds from `S_0` through `sφ` yields no primary cause.
pub fn initial_context(n: usize, seed: u64) -> SuiteReport {
    let mut run = Run::new("no cause for a context persisting from S_0");
    let mut rng = rng(seed, 3);
    let cfg = GenConfig::default();
    for _ in 0..n {
        let s = random_setting(&mut rng, &cfg);
        let naive = Naive::new(&s.theory);
        let sigma = &s.scenario.actions;
        let atom = s.effect.ground_fluent();
        let sphi = naive.achv_sit(&s.effect, sigma).expect("valid setting");
        let persisting = naive
            .active_contexts(&atom, &sigma[..sphi])
            .first()
            .is_some_and(|&c| (0..=sphi).all(|k| naive.context_holds(&atom, c, &sigma[..k])));
        if persisting {
            run.report.exercised += 1;
            match analyze(&s) {
                Ok(v) => run.check(v.cause.is_none() && v.implicit_in_initial_state, &s, || format!("verdict {v:?}")),
                Err(e) => run.check(false, &s, || e),
            }
        }
        run.report.cases += 1;
    }
    run.finish()
}

/// Random suffix after `σ` keeping the achievement situation, or
/// `noOp(start(σ))` when none is found.
fn preserving_extension(rng: &mut impl Rng, s: &RandomSetting) -> Scenario {
    let naive = Naive::new(&s.theory);
    let sigma = &s.scenario;
    let sphi = naive.achv_sit(&s.effect, &sigma.actions);
    let end = naive.start(&sigma.actions);
    for _ in 0..6 {
        let len = rng.gen_range(1..=2);
        let tail = random_scenario(rng, &s.theory, len);
        let offset = &end - &tail.actions[0].time.0;
        let mut ext = sigma.clone();
        for a in &tail.actions {
            let t = TimePoint(&a.time.0 + &offset);
            ext = ext.append(ActionTerm::new(a.name.clone(), a.args.clone(), t));
        }
        if naive.valid_setting(&s.effect, &ext.actions) && naive.achv_sit(&s.effect, &ext.actions) == sphi {
            return ext;
        }
    }
    sigma.append(make_noop(TimePoint(end)))
}

/// Extending `σ` by an effect-preserving suffix leaves the cause unchanged.
pub fn persistence(n: usize, seed: u64) -> SuiteReport {
    let mut run = Run::new("persistence under effect-preserving suffixes");
    let mut rng = rng(seed, 4);
    let cfg = GenConfig::default();
    for _ in 0..n {
        let s = random_setting(&mut rng, &cfg);
        let ext = preserving_extension(&mut rng, &s);
        let extended = RandomSetting {
            scenario: ext,
            ..s.clone()
        };
        match (analyze(&s), analyze(&extended)) {
            (Ok(a), Ok(b)) => {
                run.check(a.cause == b.cause, &extended, || format!("cause {:?} became {:?}", a.cause, b.cause));
                run.report.exercised += usize::from(a.cause.is_some());
            }
            (a, b) => run.check(false, &extended, || format!("analysis failed: {a:?} / {b:?}")),
        }
        run.report.cases += 1;
    }
    run.finish()
}

/// The context route and the contribution route agree, and both match the
/// brute-force reference.
pub fn equivalence(n: usize, seed: u64) -> SuiteReport {
    let mut run = Run::new("equivalence of the two cause definitions");
    let mut rng = rng(seed, 5);
    let cfg = GenConfig::default();
    for _ in 0..n {
        let s = random_setting(&mut rng, &cfg);
        let ev = Evaluator::new(&s.theory).expect("validated theory");
        let setting = HybridSetting::new(&ev, &s.scenario, &s.effect).expect("valid setting");
        let direct = setting.primary_cause_direct().map(|v| v.cause);
        let contribution = setting.prim_cause().map(|v| v.cause);
        let reference = naive_cause(&s);
        match (direct, contribution) {
            (Ok(d), Ok(c)) => {
                let d_ts = d.as_ref().map(|p| p.ts.0);
                run.check(d == c && d_ts == reference, &s, || {
                    format!("context route {d:?}, contribution route {c:?}, reference {reference:?}")
                });
                run.report.exercised += usize::from(d.is_some());
            }
            (d, c) => run.check(false, &s, || format!("route failed: {d:?} / {c:?}")),
        }
        match setting.analyze() {
            Ok(v) => run.check(v.agreement, &s, || "analyze reported disagreement".into()),
            Err(e) => run.check(false, &s, || e.to_string()),
        }
        run.report.cases += 1;
    }
    run.finish()
}

fn contexts_false_initially(s: &RandomSetting) -> bool {
    let naive = Naive::new(&s.theory);
    naive.active_contexts(&s.effect.ground_fluent(), &[]).is_empty()
}

/// With every context false in `S_0`, the effect does not survive in an
/// executable defused scenario.
pub fn defused_dependence(n: usize, seed: u64) -> SuiteReport {
    let mut run = Run::new("modified but-for test with contexts false in S_0");
    let mut rng = rng(seed, 6);
    let cfg = GenConfig::default();
    while run.report.cases < n {
        let s = random_setting(&mut rng, &cfg);
        if !contexts_false_initially(&s) {
            continue;
        }
        let ev = Evaluator::new(&s.theory).expect("validated theory");
        let effect = Effect::Temporal(s.effect.clone());
        match butfor_report(&ev, &effect, &s.scenario, ButForMode::Defused) {
            Ok(r) => {
                let naive = Naive::new(&s.theory);
                let d = &r.defused.actions;
                let survives = naive.executable(d) && naive.effect_at(&s.effect, &naive.start(d), d);
                run.check(!survives && r.verdict == ButForVerdict::DependenceConfirmed, &s, || {
                    format!("defused {} survives={survives} verdict {:?}", r.defused, r.verdict)
                });
                run.report.exercised += 1;
            }
            Err(e) => run.check(false, &s, || e.to_string()),
        }
        run.report.cases += 1;
    }
    run.finish()
}

/// The greedy defused scenario is the unique maximal element found by
/// enumerating every subset of noOp replacements.
pub fn defused_maximality(n: usize, seed: u64) -> SuiteReport {
    let mut run = Run::new("defused maximality against subset enumeration");
    let mut rng = rng(seed, 7);
    let cfg = GenConfig {
        max_len: 5,
        ..GenConfig::default()
    };
    for _ in 0..n {
        let s = random_setting(&mut rng, &cfg);
        let naive = Naive::new(&s.theory);
        let ev = Evaluator::new(&s.theory).expect("validated theory");
        let reference = naive.maximal_defused(&s.effect, &s.scenario);
        let core = defused_situation(&ev, &Effect::Temporal(s.effect.clone()), &s.scenario);
        match (reference, core) {
            (None, Err(hycause_core::counterfactual::CfError::NoPrimaryCause)) => {}
            (Some(maximal), Ok(d)) => {
                run.check(maximal.len() == 1 && maximal[0] == d, &s, || {
                    let all: Vec<String> = maximal.iter().map(|m| m.to_string()).collect();
                    format!("core {d}, maximal {all:?}")
                });
                run.report.exercised += 1;
            }
            (r, c) => run.check(false, &s, || format!("reference {r:?}, core {c:?}")),
        }
        run.report.cases += 1;
    }
    run.finish()
}

/// Interval checks agree with dense sampling at `points` rationals for
/// every prefix of `n` random settings. Half of the settings move the
/// threshold onto an interval endpoint value to exercise boundaries.
pub fn interval_sampling(n: usize, points: i64, seed: u64) -> SuiteReport {
    let mut run = Run::new("interval checks against dense sampling");
    let mut rng = rng(seed, 8);
    let cfg = GenConfig::default();
    for _ in 0..n {
        let mut s = random_setting(&mut rng, &cfg);
        let naive = Naive::new(&s.theory);
        let ev = Evaluator::new(&s.theory).expect("validated theory");
        let trace = ev.trace(&s.scenario).expect("evaluates");
        let sigma = &s.scenario.actions;
        let k = rng.gen_range(0..=sigma.len());
        if rng.gen_bool(0.5) {
            let atom = s.effect.ground_fluent();
            let t = if rng.gen_bool(0.5) { trace.start(k) } else { trace.end(k) };
            s.effect = TemporalEffect {
                relation: Relation::ALL[rng.gen_range(0..Relation::ALL.len())],
                threshold: naive.value(&atom, &t.0, &sigma[..k]),
                ..s.effect.clone()
            };
        }
        for j in 0..=sigma.len() {
            let (from, to) = (trace.start(j), trace.end(j));
            let core = ev.holds_on_interval_in(&s.effect, trace.state(j), from, to).expect("evaluates");
            let sampled = naive.sampled_interval(&s.effect, &sigma[..j], &from.0, &to.0, points);
            run.check(core == sampled, &s, || format!("prefix {j} [{from}, {to}]: core {core}, sampled {sampled}"));
            run.report.exercised += usize::from(s.effect.relation == Relation::Eq);
        }
        run.report.cases += 1;
    }
    run.finish()
}

/// Every suite, each on its own thread. Settings for the interval suite are
/// counted separately since each one samples every prefix densely.
pub fn run_all(cases: usize, interval_cases: usize, seed: u64) -> Vec<SuiteReport> {
    type Suite = Box<dyn FnOnce() -> SuiteReport + Send>;
    let suites: Vec<Suite> = vec![
        Box::new(move || uniqueness(cases, seed)),
        Box::new(move || achievement(cases, seed)),
        Box::new(move || initial_context(cases, seed)),
        Box::new(move || persistence(cases, seed)),
        Box::new(move || equivalence(cases, seed)),
        Box::new(move || defused_dependence(cases, seed)),
        Box::new(move || defused_maximality(cases, seed)),
        Box::new(move || interval_sampling(interval_cases, 1000, seed)),
    ];
    std::thread::scope(|scope| {
        let handles: Vec<_> = suites.into_iter().map(|f| scope.spawn(f)).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite thread panicked"))
            .collect()
    })
}
