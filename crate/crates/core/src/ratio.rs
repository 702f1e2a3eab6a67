//! Exact rational arithmetic.
//!
//! [`Q`] is an arbitrary-precision rational with an inline `i128` fast path.
//! Values stay in the fast representation until an operation would overflow,
//! at which point they are promoted to [`num::BigRational`]; results are
//! demoted back whenever they fit. All bound computations in this crate go
//! through `Q`, so there is no floating point anywhere in a contract.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Signed, Zero};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::Error;

/// An exact rational number.
///
/// Invariant: denominator > 0 and gcd(|numerator|, denominator) = 1 in both
/// representations, and a value representable inline is never stored boxed.
#[derive(Clone)]
pub struct Q(Repr);

#[derive(Clone)]
enum Repr {
    Small(i128, i128),
    Big(Box<BigRational>),
}

fn gcd_i128(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Reduce a small fraction; `den` must be nonzero.
fn reduce_small(num: i128, den: i128) -> (i128, i128) {
    debug_assert!(den != 0);
    if num == 0 {
        return (0, 1);
    }
    let g = gcd_i128(num, den);
    let (mut n, mut d) = (num / g, den / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    (n, d)
}

impl Q {
    pub const ZERO: Q = Q(Repr::Small(0, 1));
    pub const ONE: Q = Q(Repr::Small(1, 1));

    pub fn zero() -> Q {
        Q::ZERO
    }

    pub fn one() -> Q {
        Q::ONE
    }

    pub fn from_int(n: i64) -> Q {
        Q(Repr::Small(n as i128, 1))
    }

    /// `num/den` as an exact rational. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Q {
        assert!(den != 0, "zero denominator");
        let (n, d) = reduce_small(num as i128, den as i128);
        Q(Repr::Small(n, d))
    }

    fn from_big(b: BigRational) -> Q {
        if let (Some(n), Some(d)) = (to_i128(b.numer()), to_i128(b.denom())) {
            Q(Repr::Small(n, d))
        } else {
            Q(Repr::Big(Box::new(b)))
        }
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(b) => (**b).clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n == 0,
            Repr::Big(b) => b.is_zero(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n < 0,
            Repr::Big(b) => b.is_negative(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match &self.0 {
            Repr::Small(n, _) => *n > 0,
            Repr::Big(b) => b.is_positive(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, d) => *d == 1,
            Repr::Big(b) => b.is_integer(),
        }
    }

    pub fn abs(&self) -> Q {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Q {
        assert!(!self.is_zero(), "division by zero");
        match &self.0 {
            Repr::Small(n, d) => {
                let (rn, rd) = reduce_small(*d, *n);
                Q(Repr::Small(rn, rd))
            }
            Repr::Big(b) => Q::from_big(b.recip()),
        }
    }

    /// Approximate value for human-readable output only.
    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(b) => {
                let n = b.numer().to_string().parse::<f64>().unwrap_or(f64::NAN);
                let d = b.denom().to_string().parse::<f64>().unwrap_or(f64::NAN);
                n / d
            }
        }
    }

    /// Parse `"p"` or `"p/q"`.
    pub fn parse(s: &str) -> Result<Q, Error> {
        let s = s.trim();
        let bad = || Error::BadRational(s.to_string());
        let (ns, ds) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        if ns.is_empty() || ds.is_empty() {
            return Err(bad());
        }
        match (ns.parse::<i128>(), ds.parse::<i128>()) {
            (Ok(n), Ok(d)) => {
                if d == 0 {
                    return Err(bad());
                }
                let (n, d) = reduce_small(n, d);
                Ok(Q(Repr::Small(n, d)))
            }
            _ => {
                let n = BigInt::from_str(ns).map_err(|_| bad())?;
                let d = BigInt::from_str(ds).map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                Ok(Q::from_big(BigRational::new(n, d)))
            }
        }
    }
}

fn to_i128(b: &BigInt) -> Option<i128> {
    i128::try_from(b).ok()
}

// Knuth's reduced-intermediate scheme keeps the i128 path alive for long
// chains of pivots; any overflow falls back to BigRational.
fn add_small(an: i128, ad: i128, bn: i128, bd: i128) -> Option<(i128, i128)> {
    let g = gcd_i128(ad, bd);
    let ad_g = ad / g;
    let bd_g = bd / g;
    let t = an.checked_mul(bd_g)?.checked_add(bn.checked_mul(ad_g)?)?;
    let g2 = gcd_i128(t, g);
    let den = ad_g.checked_mul(bd / g2)?;
    Some(reduce_small(t / g2, den))
}

fn mul_small(an: i128, ad: i128, bn: i128, bd: i128) -> Option<(i128, i128)> {
    let g1 = gcd_i128(an, bd);
    let g2 = gcd_i128(bn, ad);
    let n = (an / g1).checked_mul(bn / g2)?;
    let d = (ad / g2).checked_mul(bd / g1)?;
    Some(reduce_small(n, d))
}

impl Add for &Q {
    type Output = Q;
    fn add(self, rhs: &Q) -> Q {
        if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&self.0, &rhs.0) {
            if let Some((n, d)) = add_small(*an, *ad, *bn, *bd) {
                return Q(Repr::Small(n, d));
            }
        }
        Q::from_big(self.to_big() + rhs.to_big())
    }
}

impl Sub for &Q {
    type Output = Q;
    fn sub(self, rhs: &Q) -> Q {
        if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&self.0, &rhs.0) {
            if let Some(neg) = bn.checked_neg() {
                if let Some((n, d)) = add_small(*an, *ad, neg, *bd) {
                    return Q(Repr::Small(n, d));
                }
            }
        }
        Q::from_big(self.to_big() - rhs.to_big())
    }
}

impl Mul for &Q {
    type Output = Q;
    fn mul(self, rhs: &Q) -> Q {
        if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&self.0, &rhs.0) {
            if let Some((n, d)) = mul_small(*an, *ad, *bn, *bd) {
                return Q(Repr::Small(n, d));
            }
        }
        Q::from_big(self.to_big() * rhs.to_big())
    }
}

impl Div for &Q {
    type Output = Q;
    fn div(self, rhs: &Q) -> Q {
        assert!(!rhs.is_zero(), "division by zero");
        if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&self.0, &rhs.0) {
            if let Some((n, d)) = mul_small(*an, *ad, *bd, *bn) {
                return Q(Repr::Small(n, d));
            }
        }
        Q::from_big(self.to_big() / rhs.to_big())
    }
}

impl Neg for &Q {
    type Output = Q;
    fn neg(self) -> Q {
        match &self.0 {
            Repr::Small(n, d) => match n.checked_neg() {
                Some(m) => Q(Repr::Small(m, *d)),
                None => Q::from_big(-self.to_big()),
            },
            Repr::Big(b) => Q::from_big(-(**b).clone()),
        }
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident, $assign:ident, $assign_method:ident) => {
        impl $trait for Q {
            type Output = Q;
            fn $method(self, rhs: Q) -> Q {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Q> for Q {
            type Output = Q;
            fn $method(self, rhs: &Q) -> Q {
                (&self).$method(rhs)
            }
        }
        impl $assign<&Q> for Q {
            fn $assign_method(&mut self, rhs: &Q) {
                *self = (&*self).$method(rhs);
            }
        }
        impl $assign for Q {
            fn $assign_method(&mut self, rhs: Q) {
                *self = (&*self).$method(&rhs);
            }
        }
    };
}

forward_owned!(Add, add, AddAssign, add_assign);
forward_owned!(Sub, sub, SubAssign, sub_assign);
forward_owned!(Mul, mul, MulAssign, mul_assign);
forward_owned!(Div, div, DivAssign, div_assign);

impl Neg for Q {
    type Output = Q;
    fn neg(self) -> Q {
        -&self
    }
}

impl PartialEq for Q {
    fn eq(&self, other: &Q) -> bool {
        // Canonical representation: equal values share a representation.
        match (&self.0, &other.0) {
            (Repr::Small(an, ad), Repr::Small(bn, bd)) => an == bn && ad == bd,
            (Repr::Big(a), Repr::Big(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Q {}

impl PartialOrd for Q {
    fn partial_cmp(&self, other: &Q) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Q {
    fn cmp(&self, other: &Q) -> Ordering {
        if let (Repr::Small(an, ad), Repr::Small(bn, bd)) = (&self.0, &other.0) {
            if let (Some(l), Some(r)) = (an.checked_mul(*bd), bn.checked_mul(*ad)) {
                return l.cmp(&r);
            }
        }
        self.to_big().cmp(&other.to_big())
    }
}

impl Hash for Q {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(n, d) => {
                0u8.hash(state);
                n.hash(state);
                d.hash(state);
            }
            Repr::Big(b) => {
                1u8.hash(state);
                b.numer().hash(state);
                b.denom().hash(state);
            }
        }
    }
}

impl fmt::Display for Q {
    /// Canonical `p/q` form, denominator always present (`"4/1"`, `"-13/3"`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, d) => write!(f, "{}/{}", n, d),
            Repr::Big(b) => write!(f, "{}/{}", b.numer(), b.denom()),
        }
    }
}

impl fmt::Debug for Q {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl FromStr for Q {
    type Err = Error;
    fn from_str(s: &str) -> Result<Q, Error> {
        Q::parse(s)
    }
}

impl From<i64> for Q {
    fn from(n: i64) -> Q {
        Q::from_int(n)
    }
}

impl Sum for Q {
    fn sum<I: Iterator<Item = Q>>(iter: I) -> Q {
        let mut acc = Q::ZERO;
        for x in iter {
            acc += x;
        }
        acc
    }
}

impl<'a> Sum<&'a Q> for Q {
    fn sum<I: Iterator<Item = &'a Q>>(iter: I) -> Q {
        let mut acc = Q::ZERO;
        for x in iter {
            acc += x;
        }
        acc
    }
}

impl Serialize for Q {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Q {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Q, D::Error> {
        let s = String::deserialize(deserializer)?;
        Q::parse(&s).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_small() {
        let a = Q::new(1, 3);
        let b = Q::new(1, 6);
        assert_eq!(&a + &b, Q::new(1, 2));
        assert_eq!(&a - &b, Q::new(1, 6));
        assert_eq!(&a * &b, Q::new(1, 18));
        assert_eq!(&a / &b, Q::from_int(2));
        assert_eq!(-&a, Q::new(-1, 3));
        assert_eq!(a.abs(), a);
        assert_eq!(Q::new(-1, 3).abs(), a);
    }

    #[test]
    fn reduction_and_sign() {
        assert_eq!(Q::new(2, -4), Q::new(-1, 2));
        assert_eq!(Q::new(-2, -4), Q::new(1, 2));
        assert_eq!(Q::new(0, -7), Q::ZERO);
        assert_eq!(Q::new(6, 3).to_string(), "2/1");
    }

    #[test]
    fn parse_and_display_roundtrip() {
        for s in ["0/1", "-13/3", "14/1", "1/8"] {
            assert_eq!(Q::parse(s).unwrap().to_string(), s);
        }
        assert_eq!(Q::parse("10").unwrap(), Q::from_int(10));
        assert_eq!(Q::parse(" -3 / 6 ").unwrap(), Q::new(-1, 2));
        assert!(Q::parse("1/0").is_err());
        assert!(Q::parse("x").is_err());
        assert!(Q::parse("").is_err());
    }

    #[test]
    fn overflow_promotes_and_demotes() {
        let big = Q::parse(&format!("{}/1", i128::MAX)).unwrap();
        let sum = &big + &big; // exceeds i128
        assert!(sum > big);
        let back = &sum - &big;
        assert_eq!(back, big); // demoted, representation-canonical equality
        let product = &big * &big;
        let ratio = &product / &big;
        assert_eq!(ratio, big);
    }

    #[test]
    fn ordering_across_representations() {
        let big = &Q::parse(&format!("{}/1", i128::MAX)).unwrap() * &Q::from_int(4);
        assert!(big > Q::from_int(1));
        assert!(Q::from_int(-1) < Q::ZERO);
        assert!(Q::new(1, 3) < Q::new(1, 2));
    }

    #[test]
    fn sums() {
        let xs = [Q::new(1, 4), Q::new(1, 2), Q::new(1, 4)];
        let total: Q = xs.iter().sum();
        assert_eq!(total, Q::ONE);
    }

    #[test]
    fn serde_string_form() {
        let q = Q::new(-13, 3);
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, "\"-13/3\"");
        let back: Q = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
    }
}
