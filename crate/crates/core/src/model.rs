//! Core vocabulary: exact rationals, time points, timed action terms,
//! timestamps and situations.
//!
//! Situations are extensional: an action sequence rooted at `S_0`. The
//! timestamp of a situation is the length of that sequence, and prefixes of
//! one scenario are the only situations ever materialised.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Reserved action symbol for the always-possible, effect-free action.
pub const NOOP: &str = "noOp";

/// Exact rational number used for times, rates and temporal fluent values.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Rational(BigRational);

impl Rational {
    pub fn new(numer: i64, denom: i64) -> Self {
        Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn integer(value: i64) -> Self {
        Rational(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn zero() -> Self {
        Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Rational(BigRational::one())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }

    pub fn inner(&self) -> &BigRational {
        &self.0
    }

    /// Lossy conversion for display and plotting only.
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl From<BigRational> for Rational {
    fn from(value: BigRational) -> Self {
        Rational(value)
    }
}

impl From<i64> for Rational {
    fn from(value: i64) -> Self {
        Rational::integer(value)
    }
}

impl Add for &Rational {
    type Output = Rational;
    fn add(self, rhs: &Rational) -> Rational {
        Rational(&self.0 + &rhs.0)
    }
}

impl Sub for &Rational {
    type Output = Rational;
    fn sub(self, rhs: &Rational) -> Rational {
        Rational(&self.0 - &rhs.0)
    }
}

impl Mul for &Rational {
    type Output = Rational;
    fn mul(self, rhs: &Rational) -> Rational {
        Rational(&self.0 * &rhs.0)
    }
}

impl std::ops::Div for &Rational {
    type Output = Rational;
    fn div(self, rhs: &Rational) -> Rational {
        Rational(&self.0 / &rhs.0)
    }
}

impl std::ops::Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational(-self.0)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed rational `{0}`")]
pub struct ParseRationalError(pub String);

impl FromStr for Rational {
    type Err = ParseRationalError;

    /// Accepts integers (`-50`), exact decimals (`2.75`) and fractions (`7/2`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseRationalError(s.to_string());
        let text = s.trim();
        if text.is_empty() {
            return Err(err());
        }
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text.strip_prefix('+').unwrap_or(text)),
        };
        let digits = |d: &str| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit());
        let value = if let Some((num, den)) = body.split_once('/') {
            if !digits(num) || !digits(den) {
                return Err(err());
            }
            let den: BigInt = den.parse().map_err(|_| err())?;
            if den.is_zero() {
                return Err(err());
            }
            BigRational::new(num.parse().map_err(|_| err())?, den)
        } else if let Some((int, frac)) = body.split_once('.') {
            if !digits(int) || !digits(frac) {
                return Err(err());
            }
            let scale = BigInt::from(10u32).pow(frac.len() as u32);
            let whole: BigInt = format!("{int}{frac}").parse().map_err(|_| err())?;
            BigRational::new(whole, scale)
        } else {
            if !digits(body) {
                return Err(err());
            }
            BigRational::from_integer(body.parse().map_err(|_| err())?)
        };
        Ok(Rational(if negative { -value } else { value }))
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A point on the real time line, in seconds.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimePoint(pub Rational);

impl TimePoint {
    pub fn new(value: impl Into<Rational>) -> Self {
        TimePoint(value.into())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    /// Elapsed seconds from `earlier` to `self`.
    pub fn since(&self, earlier: &TimePoint) -> Rational {
        &self.0 - &earlier.0
    }

    pub fn plus(&self, seconds: &Rational) -> TimePoint {
        TimePoint(&self.0 + seconds)
    }
}

impl From<i64> for TimePoint {
    fn from(value: i64) -> Self {
        TimePoint(Rational::integer(value))
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Debug for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}", self.0)
    }
}

/// A ground, timed action. The time is always the last argument in the
/// surface syntax; equality is structural (unique names).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionTerm {
    pub name: String,
    pub args: Vec<String>,
    pub time: TimePoint,
}

impl ActionTerm {
    pub fn new(name: impl Into<String>, args: Vec<String>, time: impl Into<TimePoint>) -> Self {
        ActionTerm {
            name: name.into(),
            args,
            time: time.into(),
        }
    }

    pub fn is_noop(&self) -> bool {
        self.name == NOOP
    }
}

impl fmt::Display for ActionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for arg in &self.args {
            write!(f, "{arg}, ")?;
        }
        write!(f, "{})", self.time)
    }
}

impl fmt::Debug for ActionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `noOp(t)`: always possible, no effect, never mentioned by any axiom.
pub fn make_noop(time: impl Into<TimePoint>) -> ActionTerm {
    ActionTerm::new(NOOP, Vec::new(), time)
}

/// Index of a situation along a scenario; `S_0` has timestamp 0.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub usize);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A situation `do([a1, ..., an], S_0)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Situation {
    pub actions: Vec<ActionTerm>,
    pub initial_start: TimePoint,
}

/// A ground scenario is just the situation at its end.
pub type Scenario = Situation;

impl Situation {
    pub fn initial(initial_start: impl Into<TimePoint>) -> Self {
        Situation {
            actions: Vec::new(),
            initial_start: initial_start.into(),
        }
    }

    pub fn from_actions(actions: Vec<ActionTerm>, initial_start: impl Into<TimePoint>) -> Self {
        Situation {
            actions,
            initial_start: initial_start.into(),
        }
    }

    pub fn is_initial(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// `do(a, self)`.
    pub fn append(&self, action: ActionTerm) -> Situation {
        let mut next = self.clone();
        next.actions.push(action);
        next
    }

    /// The prefix with timestamp `len`.
    pub fn prefix(&self, len: usize) -> Situation {
        Situation {
            actions: self.actions[..len.min(self.actions.len())].to_vec(),
            initial_start: self.initial_start.clone(),
        }
    }

    /// Start time of the prefix with timestamp `len`.
    pub fn start_of_prefix(&self, len: usize) -> &TimePoint {
        match len {
            0 => &self.initial_start,
            n => &self.actions[n - 1].time,
        }
    }

    /// `self ⊑ other`.
    pub fn is_prefix_of(&self, other: &Situation) -> bool {
        self.initial_start == other.initial_start
            && self.actions.len() <= other.actions.len()
            && self.actions[..] == other.actions[..self.actions.len()]
    }

    /// `self ⊏ other`.
    pub fn is_proper_prefix_of(&self, other: &Situation) -> bool {
        self.actions.len() < other.actions.len() && self.is_prefix_of(other)
    }

    pub fn noop_count(&self) -> usize {
        self.actions.iter().filter(|a| a.is_noop()).count()
    }
}

impl fmt::Display for Situation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.actions.is_empty() {
            return write!(f, "S_0");
        }
        write!(f, "do([")?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "], S_0)")
    }
}

impl fmt::Debug for Situation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub fn timestamp_of(s: &Situation) -> Timestamp {
    Timestamp(s.actions.len())
}

pub fn start_of(s: &Situation) -> TimePoint {
    s.start_of_prefix(s.len()).clone()
}

/// Value of a fluent: rational for temporal fluents, boolean for discrete ones.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(Rational),
    Bool(bool),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(name: &str, t: i64) -> ActionTerm {
        ActionTerm::new(name, vec!["P1".into()], t)
    }

    fn sigma2() -> Situation {
        Situation::from_actions(
            vec![act("rup", 5), act("csFailure", 15), act("mRad", 20), act("fixP", 26)],
            0,
        )
    }

    #[test]
    fn timestamps_count_actions() {
        assert_eq!(timestamp_of(&Situation::initial(0)), Timestamp(0));
        assert_eq!(timestamp_of(&Situation::initial(0).append(act("rup", 5))), Timestamp(1));
        assert_eq!(timestamp_of(&sigma2()), Timestamp(4));
    }

    #[test]
    fn start_is_time_of_last_action() {
        assert_eq!(start_of(&Situation::initial(0)), TimePoint::from(0));
        assert_eq!(start_of(&sigma2().prefix(1)), TimePoint::from(5));
        assert_eq!(start_of(&sigma2()), TimePoint::from(26));
    }

    #[test]
    fn noop_equality_is_structural() {
        assert_eq!(make_noop(15).to_string(), "noOp(15)");
        assert_eq!(make_noop(0).time, TimePoint::from(0));
        assert_eq!(make_noop(15), make_noop(15));
        assert_ne!(make_noop(15), make_noop(16));
    }

    #[test]
    fn prefix_relations() {
        let s = sigma2();
        assert!(s.prefix(2).is_proper_prefix_of(&s));
        assert!(s.is_prefix_of(&s));
        assert!(!s.is_proper_prefix_of(&s));
        assert!(!s.is_prefix_of(&s.prefix(3)));
        let other = Situation::from_actions(vec![act("mRad", 5)], 0);
        assert!(!other.is_prefix_of(&s));
    }

    #[test]
    fn rational_parsing() {
        assert_eq!("-50".parse::<Rational>().unwrap(), Rational::integer(-50));
        assert_eq!("2.75".parse::<Rational>().unwrap(), Rational::new(11, 4));
        assert_eq!("7/2".parse::<Rational>().unwrap(), Rational::new(7, 2));
        assert_eq!("0.1".parse::<Rational>().unwrap(), Rational::new(1, 10));
        for bad in ["", "1/0", "a", "1.", ".5", "1/-2", "--1", "1e3"] {
            assert!(bad.parse::<Rational>().is_err(), "{bad}");
        }
        assert_eq!(Rational::new(14, 4).to_string(), "7/2");
        assert_eq!(Rational::integer(-50).to_string(), "-50");
    }
}
