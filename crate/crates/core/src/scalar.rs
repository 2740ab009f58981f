//! Scalar types the form algebra is generic over.
//!
//! Three families implement [`Scalar`]:
//!
//! * `f32` / `f64`: floating mode. Values are treated as opaque reals, so
//!   nothing about rationality can be decided from them.
//! * [`Rational`]: exact arbitrary-precision rationals.
//! * [`Real`]: a tagged real that is either an exact rational, a ℚ-linear
//!   combination of named irrational generators, or an opaque float. Sums
//!   and rational multiples of generator combinations stay exact, which is
//!   enough to certify statements such as `⟨w, ξ⟩ ∈ ℤ` for integral `w`.
//!
//! Generators are assumed to be linearly independent over ℚ together with
//! `1`. Opaque values carry no such structure and only support float-level
//! comparisons.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Rem, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

/// Numeric type usable as a quadratic-form coefficient.
pub trait Scalar:
    Num + Clone + fmt::Debug + PartialOrd + Neg<Output = Self> + Send + Sync + 'static
{
    fn to_f64(&self) -> f64;

    /// Converts a float. Exact types store the float's dyadic value, tagged
    /// types store it as an opaque real.
    fn from_f64(x: f64) -> Self;

    fn from_i64(x: i64) -> Self;

    fn from_rational(q: &Rational) -> Self;

    /// The exact rational value, if the scalar is known to be rational.
    fn as_rational(&self) -> Option<Rational>;

    /// The value as a tagged real; `None` for untagged floats.
    fn as_tagged(&self) -> Option<Real>;

    fn is_exact(&self) -> bool {
        self.as_rational().is_some()
    }

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            fn from_i64(x: i64) -> Self {
                x as $t
            }
            fn from_rational(q: &Rational) -> Self {
                rational_to_f64(q) as $t
            }
            fn as_rational(&self) -> Option<Rational> {
                None
            }
            fn as_tagged(&self) -> Option<Real> {
                None
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for Rational {
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn from_f64(x: f64) -> Self {
        dyadic(x).expect("finite float")
    }
    fn from_i64(x: i64) -> Self {
        Rational::from_integer(BigInt::from(x))
    }
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }
    fn as_rational(&self) -> Option<Rational> {
        Some(self.clone())
    }
    fn as_tagged(&self) -> Option<Real> {
        Some(Real::Exact(self.clone()))
    }
}

/// Exact value of a finite float.
pub fn dyadic(x: f64) -> Option<Rational> {
    Rational::from_float(x)
}

/// Nearest float to a rational; robust against huge numerators and denominators.
pub fn rational_to_f64(q: &Rational) -> f64 {
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    let shift = q.numer().bits().max(q.denom().bits()) as i64 - 60;
    let (n, d) = if shift > 0 {
        (q.numer() >> shift as usize, q.denom() >> shift as usize)
    } else {
        (q.numer().clone(), q.denom().clone())
    };
    match (n.to_f64(), d.to_f64()) {
        (Some(n), Some(d)) if d != 0.0 => n / d,
        _ => ToPrimitive::to_f64(q).unwrap_or(f64::NAN),
    }
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_int(p: i64) -> Rational {
    Rational::from_integer(BigInt::from(p))
}

/// Parses `"p/q"`, `"p"` or a decimal literal such as `"0.25"` exactly.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(Rational::new(p, q));
    }
    if let Ok(p) = s.parse::<BigInt>() {
        return Some(Rational::from_integer(p));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.')?;
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let q = Rational::new(numer, denom);
    Some(if neg { -q } else { q })
}

pub fn format_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// A named irrational constant. Equality and ordering use the name only.
#[derive(Clone, Debug)]
pub struct Generator {
    name: Arc<str>,
    value: f64,
}

impl Generator {
    pub fn new(name: &str, value: f64) -> Self {
        Generator { name: Arc::from(name), value }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> f64 {
        self.value
    }
}

impl PartialEq for Generator {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl Eq for Generator {}

impl PartialOrd for Generator {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Generator {
    fn cmp(&self, other: &Self) -> Ordering {
        self.name.cmp(&other.name)
    }
}

/// Tagged real number; see the module docs.
#[derive(Clone, Debug)]
pub enum Real {
    Exact(Rational),
    /// `constant + Σ coeff·generator`, never with an empty or zero-coefficient term map.
    Linear {
        constant: Rational,
        terms: BTreeMap<Generator, Rational>,
    },
    Opaque(f64),
}

impl Real {
    pub fn rational(p: i64, q: i64) -> Self {
        Real::Exact(rat(p, q))
    }

    pub fn integer(p: i64) -> Self {
        Real::Exact(rat_int(p))
    }

    pub fn generator(name: &str, value: f64) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Generator::new(name, value), Rational::one());
        Real::Linear { constant: Rational::zero(), terms }
    }

    pub fn opaque(value: f64) -> Self {
        Real::Opaque(value)
    }

    /// Constant term and generator coefficients, when the value is not opaque.
    pub fn linear_parts(&self) -> Option<(Rational, BTreeMap<Generator, Rational>)> {
        match self {
            Real::Exact(q) => Some((q.clone(), BTreeMap::new())),
            Real::Linear { constant, terms } => Some((constant.clone(), terms.clone())),
            Real::Opaque(_) => None,
        }
    }

    pub fn is_opaque(&self) -> bool {
        matches!(self, Real::Opaque(_))
    }

    /// Certified integrality: `Some(k)` iff the value is exactly the integer
    /// `k`, `None` if it is exactly known not to be an integer. Opaque values
    /// return `Err` with their float.
    pub fn exact_integer(&self) -> Result<Option<BigInt>, f64> {
        match self {
            Real::Exact(q) => Ok(q.is_integer().then(|| q.to_integer())),
            Real::Linear { .. } => Ok(None),
            Real::Opaque(v) => Err(*v),
        }
    }

    fn from_linear(constant: Rational, terms: BTreeMap<Generator, Rational>) -> Self {
        let terms: BTreeMap<_, _> = terms.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        if terms.is_empty() {
            Real::Exact(constant)
        } else {
            Real::Linear { constant, terms }
        }
    }

    fn scaled(&self, k: &Rational) -> Real {
        match self {
            Real::Exact(q) => Real::Exact(q * k),
            Real::Linear { constant, terms } => Real::from_linear(
                constant * k,
                terms.iter().map(|(g, c)| (g.clone(), c * k)).collect(),
            ),
            Real::Opaque(v) => Real::Opaque(v * rational_to_f64(k)),
        }
    }

    fn value(&self) -> f64 {
        match self {
            Real::Exact(q) => rational_to_f64(q),
            Real::Linear { constant, terms } => {
                rational_to_f64(constant)
                    + terms.iter().map(|(g, c)| rational_to_f64(c) * g.value).sum::<f64>()
            }
            Real::Opaque(v) => *v,
        }
    }

    fn sign(&self) -> Option<Ordering> {
        match self {
            Real::Exact(q) => Some(q.cmp(&Rational::zero())),
            // Nonzero by the independence assumption; the float decides the side.
            Real::Linear { .. } => self.value().partial_cmp(&0.0),
            Real::Opaque(v) => v.partial_cmp(&0.0),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Real::Exact(q) => write!(f, "{}", format_rational(q)),
            Real::Linear { constant, terms } => {
                write!(f, "{}", format_rational(constant))?;
                for (g, c) in terms {
                    write!(f, " + {}*{}", format_rational(c), g.name)?;
                }
                Ok(())
            }
            Real::Opaque(v) => write!(f, "{v:?}"),
        }
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, rhs: Real) -> Real {
        match (self, rhs) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a + b),
            (Real::Opaque(a), b) => Real::Opaque(a + b.value()),
            (a, Real::Opaque(b)) => Real::Opaque(a.value() + b),
            (a, b) => {
                let (ca, mut ta) = a.linear_parts().unwrap();
                let (cb, tb) = b.linear_parts().unwrap();
                for (g, c) in tb {
                    *ta.entry(g).or_insert_with(Rational::zero) += c;
                }
                Real::from_linear(ca + cb, ta)
            }
        }
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        self.scaled(&-Rational::one())
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, rhs: Real) -> Real {
        self + (-rhs)
    }
}

impl Mul for Real {
    type Output = Real;
    fn mul(self, rhs: Real) -> Real {
        match (&self, &rhs) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a * b),
            (Real::Exact(a), other) | (other, Real::Exact(a)) => other.scaled(a),
            // Products of generators leave the linear span.
            _ => Real::Opaque(self.value() * rhs.value()),
        }
    }
}

impl Div for Real {
    type Output = Real;
    fn div(self, rhs: Real) -> Real {
        match &rhs {
            Real::Exact(b) if !b.is_zero() => self.scaled(&b.recip()),
            _ => Real::Opaque(self.value() / rhs.value()),
        }
    }
}

impl Rem for Real {
    type Output = Real;
    fn rem(self, rhs: Real) -> Real {
        match (&self, &rhs) {
            (Real::Exact(a), Real::Exact(b)) => Real::Exact(a % b),
            _ => Real::Opaque(self.value() % rhs.value()),
        }
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        match (self.clone() - other.clone()).sign() {
            Some(Ordering::Equal) => true,
            _ => false,
        }
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        (self.clone() - other.clone()).sign()
    }
}

impl Zero for Real {
    fn zero() -> Self {
        Real::Exact(Rational::zero())
    }
    fn is_zero(&self) -> bool {
        match self {
            Real::Exact(q) => q.is_zero(),
            Real::Linear { .. } => false,
            Real::Opaque(v) => *v == 0.0,
        }
    }
}

impl One for Real {
    fn one() -> Self {
        Real::Exact(Rational::one())
    }
}

impl Num for Real {
    type FromStrRadixErr = String;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, String> {
        if radix == 10 {
            if let Some(q) = parse_rational(s) {
                return Ok(Real::Exact(q));
            }
            if let Ok(v) = s.trim().parse::<f64>() {
                return Ok(Real::Opaque(v));
            }
        }
        Err(format!("cannot parse {s:?} as a real"))
    }
}

impl Scalar for Real {
    fn to_f64(&self) -> f64 {
        self.value()
    }
    fn from_f64(x: f64) -> Self {
        Real::Opaque(x)
    }
    fn from_i64(x: i64) -> Self {
        Real::integer(x)
    }
    fn from_rational(q: &Rational) -> Self {
        Real::Exact(q.clone())
    }
    fn as_rational(&self) -> Option<Rational> {
        match self {
            Real::Exact(q) => Some(q.clone()),
            _ => None,
        }
    }
    fn as_tagged(&self) -> Option<Real> {
        Some(self.clone())
    }
}

impl From<Rational> for Real {
    fn from(q: Rational) -> Self {
        Real::Exact(q)
    }
}

impl FromPrimitive for Real {
    fn from_i64(n: i64) -> Option<Self> {
        Some(Real::integer(n))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(Real::Exact(Rational::from_integer(BigInt::from(n))))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Real::Opaque(n))
    }
}

impl Signed for Real {
    fn abs(&self) -> Self {
        self.abs_value()
    }
    fn abs_sub(&self, other: &Self) -> Self {
        if self <= other {
            Real::zero()
        } else {
            self.clone() - other.clone()
        }
    }
    fn signum(&self) -> Self {
        match self.sign() {
            Some(Ordering::Greater) => Real::one(),
            Some(Ordering::Less) => -Real::one(),
            _ => Real::zero(),
        }
    }
    fn is_positive(&self) -> bool {
        self.sign() == Some(Ordering::Greater)
    }
    fn is_negative(&self) -> bool {
        self.sign() == Some(Ordering::Less)
    }
}

/// Distance from an exact rational to the nearest integer.
pub fn frac_distance(q: &Rational) -> Rational {
    let floor = q.floor();
    let up = &floor + Rational::one() - q;
    let down = q - floor;
    if up < down {
        up
    } else {
        down
    }
}

/// Exact integer n-th root, if one exists.
pub fn integer_nth_root(x: &BigInt, n: u32) -> Option<BigInt> {
    if x.is_negative() {
        return None;
    }
    let r = x.nth_root(n);
    (num_traits::pow(r.clone(), n as usize) == *x).then_some(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_combinations_stay_exact() {
        let s2 = Real::generator("sqrt2", 2f64.sqrt());
        let a = s2.clone() - Real::integer(1);
        let b = -s2.clone() + Real::rational(5, 2);
        let sum = a + b;
        assert_eq!(sum.as_rational(), Some(rat(3, 2)));
        assert!(matches!(s2.clone() * s2, Real::Opaque(_)));
    }

    #[test]
    fn integrality_is_certified_only_for_exact_values() {
        assert_eq!(Real::integer(3).exact_integer(), Ok(Some(BigInt::from(3))));
        assert_eq!(Real::rational(1, 2).exact_integer(), Ok(None));
        let g = Real::generator("pi", std::f64::consts::PI);
        assert_eq!(g.exact_integer(), Ok(None));
        assert!(Real::opaque(2.0).exact_integer().is_err());
    }

    #[test]
    fn ordering_uses_generator_values() {
        let s2 = Real::generator("sqrt2", 2f64.sqrt());
        assert!(s2 > Real::rational(7, 5));
        assert!(s2 < Real::rational(3, 2));
        assert!(Real::rational(1, 3) < Real::rational(1, 2));
    }

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("3/6"), Some(rat(1, 2)));
        assert_eq!(parse_rational("-0.25"), Some(rat(-1, 4)));
        assert_eq!(parse_rational("7"), Some(rat_int(7)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("x"), None);
    }

    #[test]
    fn frac_distance_is_symmetric() {
        assert_eq!(frac_distance(&rat(7, 4)), rat(1, 4));
        assert_eq!(frac_distance(&rat(-7, 4)), rat(1, 4));
        assert_eq!(frac_distance(&rat(1, 2)), rat(1, 2));
    }

    #[test]
    fn nth_roots() {
        assert_eq!(integer_nth_root(&BigInt::from(16), 4), Some(BigInt::from(2)));
        assert_eq!(integer_nth_root(&BigInt::from(15), 4), None);
    }
}
