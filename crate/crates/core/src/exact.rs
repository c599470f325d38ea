//! Exact rational arithmetic and certified comparisons against `1/e`.
//!
//! Every quantity in the pipeline is a [`ExactNumber`]. Floating point only
//! shows up when a rational is rendered as a decimal string for humans.
//!
//! The constant `e` is handled through [`Enclosure`], a pair of rationals
//! that strictly bracket it. Comparisons against an enclosure are only
//! reported when decisive; callers refine the enclosure otherwise.

use std::collections::HashMap;
use std::fmt;

use num::{BigInt, BigRational, Integer, One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arbitrary-precision rational in canonical reduced form.
pub type ExactNumber = BigRational;

/// Default number of decimal digits for the `e` enclosure.
pub const DEFAULT_DIGITS: u32 = 50;

/// Default refinement cap for certified comparisons.
pub const DEFAULT_MAX_DIGITS: u32 = 4096;

/// Environment variable that overrides the starting enclosure precision.
pub const PRECISION_ENV: &str = "SECRETARY_LAB_PRECISION";

pub fn int(v: i64) -> ExactNumber {
    BigRational::from_integer(BigInt::from(v))
}

pub fn frac(p: i64, q: i64) -> ExactNumber {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// `base^exp` for any integer exponent; `base` must be nonzero when `exp < 0`.
pub fn pow(base: &ExactNumber, exp: i64) -> ExactNumber {
    let magnitude = exp.unsigned_abs();
    let mut acc = ExactNumber::one();
    let mut sq = base.clone();
    let mut e = magnitude;
    while e > 0 {
        if e & 1 == 1 {
            acc *= &sq;
        }
        e >>= 1;
        if e > 0 {
            sq = &sq * &sq;
        }
    }
    if exp < 0 {
        acc.recip()
    } else {
        acc
    }
}

pub fn pow10(digits: u32) -> BigInt {
    num::pow(BigInt::from(10u32), digits as usize)
}

/// Renders `p/q`, or `p` for integers.
pub fn render(x: &ExactNumber) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses the value grammar: `p/q`, `p`, or `s^e` resolved against `base_s`.
pub fn parse_value(text: &str, base_s: Option<&ExactNumber>) -> Result<ExactNumber> {
    let t = text.trim();
    let fail = |reason: &str| Error::Parse {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    if let Some(exp) = t.strip_prefix("s^") {
        let base = base_s.ok_or_else(|| fail("`s^e` needs a family base_s"))?;
        let e: i64 = exp.trim().parse().map_err(|_| fail("bad exponent"))?;
        if base.is_zero() && e < 0 {
            return Err(fail("negative power of zero"));
        }
        return Ok(pow(base, e));
    }
    if t == "s" {
        return base_s.cloned().ok_or_else(|| fail("`s` needs a family base_s"));
    }
    match t.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| fail("bad numerator"))?;
            let q: BigInt = q.trim().parse().map_err(|_| fail("bad denominator"))?;
            if q.is_zero() {
                return Err(fail("zero denominator"));
            }
            Ok(BigRational::new(p, q))
        }
        None => {
            let p: BigInt = t.parse().map_err(|_| fail("not an integer or p/q"))?;
            Ok(BigRational::from_integer(p))
        }
    }
}

/// Decimal expansion rounded half away from zero to `digits` places.
pub fn to_decimal(x: &ExactNumber, digits: u32) -> String {
    let scale = pow10(digits);
    let scaled = x.abs() * BigRational::from_integer(scale.clone());
    let rounded = (scaled + frac(1, 2)).floor().to_integer();
    let (whole, rest) = rounded.div_rem(&scale);
    let sign = if x.is_negative() && !rounded.is_zero() { "-" } else { "" };
    if digits == 0 {
        return format!("{sign}{whole}");
    }
    format!("{sign}{whole}.{:0>width$}", rest.to_string(), width = digits as usize)
}

/// Largest multiple of `10^-digits` that is `<= x`.
pub fn round_down(x: &ExactNumber, digits: u32) -> ExactNumber {
    let scale = BigRational::from_integer(pow10(digits));
    (x * &scale).floor() / scale
}

/// Smallest multiple of `10^-digits` that is `>= x`.
pub fn round_up(x: &ExactNumber, digits: u32) -> ExactNumber {
    let scale = BigRational::from_integer(pow10(digits));
    (x * &scale).ceil() / scale
}

/// Outcome of comparing a rational against an enclosed irrational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Less,
    Greater,
    Indeterminate,
}

/// Decisive comparison against an irrational constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Less,
    Greater,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Less => f.write_str("Less"),
            Verdict::Greater => f.write_str("Greater"),
        }
    }
}

/// Rational bracket `lower < c < upper` around an irrational constant `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enclosure {
    pub lower: ExactNumber,
    pub upper: ExactNumber,
    /// Decimal digits the bracket was built for; width is below `10^-digits`.
    pub digits: u32,
}

impl Enclosure {
    pub fn width(&self) -> ExactNumber {
        &self.upper - &self.lower
    }

    pub fn compare(&self, x: &ExactNumber) -> Comparison {
        if x < &self.lower {
            Comparison::Less
        } else if x > &self.upper {
            Comparison::Greater
        } else {
            Comparison::Indeterminate
        }
    }

    /// Image under `x -> a*x + b`.
    pub fn affine(&self, a: &ExactNumber, b: &ExactNumber) -> Enclosure {
        let lo = a * &self.lower + b;
        let hi = a * &self.upper + b;
        let (lower, upper) = if a.is_negative() { (hi, lo) } else { (lo, hi) };
        Enclosure {
            lower,
            upper,
            digits: self.digits,
        }
    }

    pub fn contains(&self, x: &ExactNumber) -> bool {
        self.compare(x) == Comparison::Indeterminate
    }
}

/// Certified enclosure of `e` with width below `10^-digits`.
///
/// Partial sums of `sum 1/j!` bound `e` from below; the tail after `N` terms
/// is below `1/(N! * N)`.
pub fn e_enclosure(digits: u32) -> Enclosure {
    let grid = digits + 2;
    let tol = BigRational::new(BigInt::one(), pow10(grid));
    let mut sum = ExactNumber::zero();
    let mut term = ExactNumber::one();
    let mut j: i64 = 0;
    loop {
        sum += &term;
        j += 1;
        term /= int(j);
        // After adding 1/(j-1)!, the tail is below 1/((j-1)! (j-1)) = term * j / (j-1).
        if j >= 2 {
            let tail = &term * int(j) / int(j - 1);
            if tail < tol {
                let lower = round_down(&sum, grid);
                let upper = round_up(&(sum + tail), grid);
                return Enclosure {
                    lower,
                    upper,
                    digits,
                };
            }
        }
    }
}

/// Certified enclosure of `1/e` with width below `10^-digits`.
pub fn inv_e_enclosure(digits: u32) -> Enclosure {
    let e = e_enclosure(digits + 1);
    let grid = digits + 2;
    Enclosure {
        lower: round_down(&e.upper.recip(), grid),
        upper: round_up(&e.lower.recip(), grid),
        digits,
    }
}

/// Starting precision and refinement cap for certified comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Precision {
    pub start_digits: u32,
    pub max_digits: u32,
}

impl Default for Precision {
    fn default() -> Self {
        Self {
            start_digits: DEFAULT_DIGITS,
            max_digits: DEFAULT_MAX_DIGITS,
        }
    }
}

impl Precision {
    /// Default precision, with the starting digits overridable through
    /// `SECRETARY_LAB_PRECISION`.
    pub fn from_env() -> Self {
        let mut p = Self::default();
        if let Some(d) = std::env::var(PRECISION_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u32>().ok())
            .filter(|d| *d > 0)
        {
            p.start_digits = d;
            p.max_digits = p.max_digits.max(d);
        }
        p
    }

    /// Doubles the enclosure precision until `make(digits)` decides `x`.
    pub fn certify<F>(&self, x: &ExactNumber, make: F) -> Result<Verdict>
    where
        F: Fn(u32) -> Enclosure,
    {
        let mut digits = self.start_digits.max(1);
        loop {
            match make(digits).compare(x) {
                Comparison::Less => return Ok(Verdict::Less),
                Comparison::Greater => return Ok(Verdict::Greater),
                Comparison::Indeterminate => {
                    if digits >= self.max_digits {
                        return Err(Error::PrecisionExhausted { digits });
                    }
                    digits = (digits * 2).min(self.max_digits);
                }
            }
        }
    }
}

/// Compares `x` against `1/e`, refining until decisive.
pub fn compare_to_inv_e(x: &ExactNumber, precision: &Precision) -> Result<Verdict> {
    precision.certify(x, inv_e_enclosure)
}

/// Renders values of a family, writing exact powers of `base` as `s^e`.
#[derive(Debug, Clone, Default)]
pub struct ValueCodec {
    base: Option<ExactNumber>,
    powers: HashMap<ExactNumber, i64>,
}

impl ValueCodec {
    pub fn plain() -> Self {
        Self::default()
    }

    /// Codec that recognises `base^e` for every `e >= 1` up to `max_value`.
    pub fn with_base(base: &ExactNumber, max_value: &ExactNumber) -> Self {
        let mut powers = HashMap::new();
        if base > &ExactNumber::one() {
            let mut p = base.clone();
            let mut e = 1;
            while &p <= max_value {
                powers.insert(p.clone(), e);
                p *= base;
                e += 1;
            }
        }
        Self {
            base: Some(base.clone()),
            powers,
        }
    }

    pub fn base(&self) -> Option<&ExactNumber> {
        self.base.as_ref()
    }

    pub fn render(&self, x: &ExactNumber) -> String {
        match self.powers.get(x) {
            Some(e) => format!("s^{e}"),
            None => render(x),
        }
    }

    pub fn parse(&self, text: &str) -> Result<ExactNumber> {
        parse_value(text, self.base.as_ref())
    }
}

/// Serde helpers storing an [`ExactNumber`] as a `p/q` string.
pub mod serde_exact {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &ExactNumber, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&render(x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ExactNumber, D::Error> {
        let text = String::deserialize(d)?;
        parse_value(&text, None).map_err(serde::de::Error::custom)
    }
}

/// Digits used for the decimal companion of exact report fields.
pub const REPORT_DIGITS: u32 = 12;

/// Serde helpers storing an [`ExactNumber`] as `{"exact": "p/q", "decimal": "..."}`.
///
/// Only `exact` is read back, so round trips are lossless.
pub mod serde_rich {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Rich {
        exact: String,
        #[serde(default, skip_deserializing)]
        decimal: String,
    }

    pub fn serialize<S: Serializer>(x: &ExactNumber, s: S) -> std::result::Result<S::Ok, S::Error> {
        Rich {
            exact: render(x),
            decimal: to_decimal(x, REPORT_DIGITS),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ExactNumber, D::Error> {
        let rich = Rich::deserialize(d)?;
        parse_value(&rich.exact, None).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn render_and_parse_basic_forms() {
        assert_eq!(render(&frac(6, 4)), "3/2");
        assert_eq!(render(&int(-7)), "-7");
        assert_eq!(parse_value("6/4", None).unwrap(), frac(3, 2));
        assert_eq!(parse_value("s^3", Some(&int(5))).unwrap(), int(125));
        assert_eq!(parse_value("s^-2", Some(&int(5))).unwrap(), frac(1, 25));
        assert!(parse_value("s^3", None).is_err());
        assert!(parse_value("1/0", None).is_err());
        assert!(parse_value("abc", None).is_err());
    }

    #[test]
    fn zero_is_canonical() {
        let z = parse_value("0/17", None).unwrap();
        assert_eq!(render(&z), "0");
        assert_eq!(z.denom(), &BigInt::one());
    }

    #[test]
    fn decimal_rendering_rounds_half_away() {
        assert_eq!(to_decimal(&frac(1703, 3125), 5), "0.54496");
        assert_eq!(to_decimal(&frac(1, 3), 4), "0.3333");
        assert_eq!(to_decimal(&frac(2, 3), 4), "0.6667");
        assert_eq!(to_decimal(&frac(-1, 8), 2), "-0.13");
        assert_eq!(to_decimal(&int(3), 0), "3");
    }

    #[test]
    fn e_enclosure_brackets_known_digits() {
        let e = e_enclosure(50);
        assert!(e.lower < e.upper);
        assert!(e.width() < BigRational::new(BigInt::one(), pow10(50)));
        let known = parse_value("2718281828459045235360287471352662497757/1000000000000000000000000000000000000000", None).unwrap();
        let next = &known + BigRational::new(BigInt::one(), pow10(39));
        assert!(e.lower > known.clone() - BigRational::new(BigInt::one(), pow10(39)));
        assert!(e.upper < next);
    }

    #[test]
    fn inv_e_comparisons() {
        let p = Precision::default();
        assert_eq!(compare_to_inv_e(&frac(1, 3), &p).unwrap(), Verdict::Less);
        assert_eq!(compare_to_inv_e(&frac(37, 100), &p).unwrap(), Verdict::Greater);
        assert_eq!(compare_to_inv_e(&frac(36788, 100000), &p).unwrap(), Verdict::Greater);
        assert_eq!(compare_to_inv_e(&frac(36787, 100000), &p).unwrap(), Verdict::Less);
    }

    #[test]
    fn inv_e_refines_from_coarse_start() {
        let coarse = Precision {
            start_digits: 2,
            max_digits: 64,
        };
        assert_eq!(compare_to_inv_e(&frac(36788, 100000), &coarse).unwrap(), Verdict::Greater);
        // Indecisive at 2 digits and capped before 5.
        let capped = Precision {
            start_digits: 2,
            max_digits: 4,
        };
        assert!(matches!(
            compare_to_inv_e(&frac(36788, 100000), &capped),
            Err(Error::PrecisionExhausted { .. })
        ));
    }

    #[test]
    fn codec_renders_powers() {
        let codec = ValueCodec::with_base(&int(5), &int(3125));
        assert_eq!(codec.render(&int(125)), "s^3");
        assert_eq!(codec.render(&int(5)), "s^1");
        assert_eq!(codec.render(&int(1)), "1");
        assert_eq!(codec.render(&int(7)), "7");
        assert_eq!(codec.parse("s^4").unwrap(), int(625));
    }

    fn rational() -> impl Strategy<Value = ExactNumber> {
        (any::<i64>(), 1i64..=i64::MAX).prop_map(|(p, q)| frac(p, q))
    }

    proptest! {
        #[test]
        fn parse_render_round_trip(x in rational()) {
            prop_assert_eq!(parse_value(&render(&x), None).unwrap(), x);
        }

        #[test]
        fn add_then_subtract_is_identity(x in rational(), y in rational()) {
            prop_assert_eq!((&x + &y) - &y, x);
        }

        #[test]
        fn verdicts_stable_across_precision(p in 0i64..1_000_000, d in 3u32..40) {
            let x = frac(p, 1_000_000);
            let a = compare_to_inv_e(&x, &Precision { start_digits: d, max_digits: 256 }).unwrap();
            let b = compare_to_inv_e(&x, &Precision { start_digits: 60, max_digits: 256 }).unwrap();
            prop_assert_eq!(a, b);
            let enc = inv_e_enclosure(d);
            if let Comparison::Less = enc.compare(&x) { prop_assert_eq!(b, Verdict::Less); }
            if let Comparison::Greater = enc.compare(&x) { prop_assert_eq!(b, Verdict::Greater); }
        }
    }
}
