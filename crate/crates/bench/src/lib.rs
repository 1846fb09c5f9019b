//! Shared inputs for the benchmarks: the bundled NPP theory and scenarios.

use hycause_core::dsl::{parse_effect, parse_scenario, parse_theory};
use hycause_core::{Effect, HybridTheory, Scenario};

pub const NPP: &str = include_str!("../../../fixtures/npp.hct");
pub const SIGMA1: &str = include_str!("../../../fixtures/s1.hcs");
pub const SIGMA2: &str = include_str!("../../../fixtures/s2.hcs");
pub const THM7: &str = include_str!("../../../fixtures/thm7.hcs");

pub fn npp() -> HybridTheory {
    parse_theory(NPP).expect("bundled theory parses")
}

pub fn scenario(th: &HybridTheory, text: &str) -> Scenario {
    parse_scenario(text, th).expect("bundled scenario parses")
}

pub fn effect(th: &HybridTheory, text: &str) -> Effect {
    parse_effect(text, th).expect("effect parses")
}

/// `σ2` followed by `extra` monitoring actions ten time units apart.
pub fn long_npp_scenario(th: &HybridTheory, extra: usize) -> Scenario {
    let mut out = scenario(th, SIGMA2);
    for i in 0..extra {
        let t = hycause_core::TimePoint(hycause_core::Rational::integer(30 + 10 * i as i64));
        out = out.append(hycause_core::ActionTerm::new("mRad", vec!["P1".into()], t));
    }
    out
}
