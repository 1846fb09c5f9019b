//! Actual causes of discrete and continuous effects in hybrid temporal
//! situation-calculus theories.
//!
//! A [`theory::HybridTheory`] (usually parsed with [`dsl::parse_theory`])
//! is compiled into an [`evaluator::Evaluator`], which progresses timed
//! scenarios. On top of it:
//!
//! - [`discrete`] computes direct causes and the full `Causes` set of
//!   dynamic-formula effects;
//! - [`temporal`] computes primary causes of temporal effects through two
//!   independent definitions and checks that they agree;
//! - [`counterfactual`] builds defused scenarios and the modified but-for
//!   report.
//!
//! ```
//! use hycause_core::{dsl, Evaluator, HybridSetting, Effect};
//!
//! let th = dsl::parse_theory(include_str!("../../../fixtures/npp.hct")).unwrap();
//! let sigma = dsl::parse_scenario("rup(P1,5); csFailure(P1,15); mRad(P1,20); fixP(P1,26)", &th).unwrap();
//! let Effect::Temporal(phi) = dsl::parse_effect("coreTemp(P1) >= 1000", &th).unwrap() else { unreachable!() };
//! let ev = Evaluator::new(&th).unwrap();
//! let verdict = HybridSetting::new(&ev, &sigma, &phi).unwrap().analyze().unwrap();
//! assert_eq!(verdict.cause.unwrap().to_string(), "csFailure(P1, 15)@1");
//! ```

pub mod counterfactual;
pub mod discrete;
pub mod dsl;
pub mod evaluator;
pub mod model;
pub mod temporal;
pub mod theory;

pub use counterfactual::{ButForMode, ButForReport, ButForVerdict, Replacement};
pub use discrete::{CausePair, DiscreteSetting, SettingError};
pub use evaluator::{EvalError, Evaluator, Timeline, Trace};
pub use model::{make_noop, ActionTerm, Rational, Scenario, Situation, TimePoint, Timestamp, Value, NOOP};
pub use temporal::{CauseError, CauseVerdict, HybridSetting};
pub use theory::{Diagnostic, Effect, Formula, GroundAtom, HybridTheory, Relation, TemporalEffect};
