//! Exact rational arithmetic and base conversion.
//!
//! Everything here is the ground truth the streaming code is checked
//! against, so no floating point is involved anywhere.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::digits::{Base, Expansion};
use crate::error::{Error, Result};

pub use num_rational::BigRational;

/// Base-`b` digits of `n`, most significant first; `[0]` for zero.
pub fn int_to_digits(n: &BigUint, base: Base) -> Vec<u8> {
    n.to_radix_be(base.radix())
}

/// Inverse of [`int_to_digits`] (leading zeros allowed).
pub fn digits_to_int(digits: &[u8], base: Base) -> BigUint {
    if digits.is_empty() {
        return BigUint::zero();
    }
    BigUint::from_radix_be(digits, base.radix()).expect("digits valid for base")
}

/// `n` as exactly `width` digits, left-padded with zeros. `n` must fit.
fn padded_digits(n: &BigUint, base: Base, width: usize) -> Vec<u8> {
    if width == 0 {
        debug_assert!(n.is_zero());
        return Vec::new();
    }
    let raw = int_to_digits(n, base);
    debug_assert!(raw.len() <= width || n.is_zero());
    let mut out = vec![0; width.saturating_sub(raw.len())];
    out.extend(raw.iter().skip(raw.len().saturating_sub(width)));
    out
}

pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Fractional part of `|x|`, as a numerator/denominator pair with
/// `0 <= num < den` and `gcd(num, den) = 1`.
fn frac_parts(x: &BigRational) -> (BigUint, BigUint) {
    let den = x.denom().magnitude().clone();
    let num = x.numer().magnitude() % &den;
    (num, den)
}

/// Number of leading non-repeating digits of `1/den` in base `b`: the least
/// `k` such that `den / gcd(den, b^k)` is coprime to `b`.
fn preperiod_len(den: &BigUint, base: Base) -> usize {
    let b = BigUint::from(base.radix());
    let mut rest = den.clone();
    let mut k = 0;
    loop {
        let g = rest.gcd(&b);
        if g.is_one() {
            return k;
        }
        rest /= g;
        k += 1;
    }
}

/// Exact expansion of `frac(|x|)` in base `b`, by long division.
///
/// The preperiod length is known in advance from the factors the
/// denominator shares with `b`; after it the remainder sequence is purely
/// periodic, so the period closes at the first return to the remainder seen
/// right after the preperiod. Both lengths are therefore minimal.
pub fn rational_to_expansion(x: &BigRational, base: Base) -> Expansion {
    let (num, den) = frac_parts(x);
    let k = preperiod_len(&den, base);
    let (pre, per) = match (num.to_u64(), den.to_u64()) {
        // r < den, so r * b stays below 2^64 for b <= 36.
        (Some(n), Some(d)) if d < (1 << 58) => long_division_u64(n, d, base.radix() as u64, k),
        _ => long_division_big(num, &den, base.radix(), k),
    };
    Expansion::new(base, pre, per).expect("long division yields valid digits")
}

fn long_division_u64(mut r: u64, den: u64, b: u64, k: usize) -> (Vec<u8>, Vec<u8>) {
    let mut pre = Vec::with_capacity(k);
    for _ in 0..k {
        r *= b;
        pre.push((r / den) as u8);
        r %= den;
    }
    if r == 0 {
        return (pre, vec![0]);
    }
    let start = r;
    let mut per = Vec::new();
    loop {
        r *= b;
        per.push((r / den) as u8);
        r %= den;
        if r == start {
            return (pre, per);
        }
    }
}

fn long_division_big(mut r: BigUint, den: &BigUint, b: u32, k: usize) -> (Vec<u8>, Vec<u8>) {
    let step = |r: &mut BigUint| -> u8 {
        *r *= b;
        let (q, rem) = r.div_rem(den);
        *r = rem;
        q.to_u8().expect("quotient digit below base")
    };
    let pre = (0..k).map(|_| step(&mut r)).collect();
    if r.is_zero() {
        return (pre, vec![0]);
    }
    let start = r.clone();
    let mut per = Vec::new();
    loop {
        per.push(step(&mut r));
        if r == start {
            return (pre, per);
        }
    }
}

/// Expansion of `frac(|x|)` when its denominator is known to divide
/// `b^pre_len * (b^period_len - 1)`.
///
/// Avoids a digit-by-digit long division over huge denominators: scaling by
/// that product gives an integer whose quotient and remainder modulo
/// `b^period_len - 1` are the preperiod and period digits. Falls back to
/// [`rational_to_expansion`] when the divisibility does not hold.
pub fn rational_to_expansion_with_cycle(x: &BigRational, base: Base, pre_len: usize, period_len: usize) -> Expansion {
    assert!(period_len >= 1);
    let (num, den) = frac_parts(x);
    let b = BigUint::from(base.radix());
    let cycle = num_traits::pow(b.clone(), period_len) - 1u32;
    let scale = num_traits::pow(b, pre_len) * &cycle;
    let (scaled, rem) = (num * &scale).div_rem(&den);
    if !rem.is_zero() {
        return rational_to_expansion(x, base);
    }
    let (head, tail) = scaled.div_rem(&cycle);
    Expansion::new(
        base,
        padded_digits(&head, base, pre_len),
        padded_digits(&tail, base, period_len),
    )
    .expect("digits valid for base")
}

/// The exact value in `[0, 1)` of an expansion.
pub fn expansion_to_rational(e: &Expansion) -> BigRational {
    periodic_digits_value(e.base(), e.preperiod(), e.period())
}

/// Value of `0.pre(period)` for any digit strings, normalized or not.
///
/// A period of all `b - 1` is allowed, so the result lies in `[0, 1]`.
pub fn periodic_digits_value(base: Base, preperiod: &[u8], period: &[u8]) -> BigRational {
    assert!(!period.is_empty(), "period must be non-empty");
    let b = BigUint::from(base.radix());
    let cycle = num_traits::pow(b.clone(), period.len()) - 1u32;
    let head = digits_to_int(preperiod, base);
    let tail = digits_to_int(period, base);
    let num = head * &cycle + tail;
    let den = num_traits::pow(b, preperiod.len()) * cycle;
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `frac(|x|)`.
pub fn fractional_part(x: &BigRational) -> BigRational {
    let (num, den) = frac_parts(x);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn abs_diff(x: &BigRational, y: &BigRational) -> BigRational {
    (x - y).abs()
}

/// Inputs to [`multiplicatively_dependent`] are capped here so trial
/// division stays cheap.
pub const DEPENDENCE_INPUT_CAP: u64 = 1_000_000_000_000;

/// Prime factorization by trial division, ascending primes.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n.is_multiple_of(p) {
            let mut e = 0;
            while n.is_multiple_of(p) {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Whether `r^n = s^m` for some positive integers `n`, `m`, i.e. `r` and `s`
/// are powers of a common integer.
///
/// Holds exactly when both numbers have the same prime support and their
/// exponent vectors are proportional.
pub fn multiplicatively_dependent(r: u64, s: u64) -> Result<bool> {
    for v in [r, s] {
        if !(2..=DEPENDENCE_INPUT_CAP).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "multiplicative dependence is defined for 2 <= n <= {DEPENDENCE_INPUT_CAP}, got {v}"
            )));
        }
    }
    let fr = factorize(r);
    let fs = factorize(s);
    if fr.len() != fs.len() || fr.iter().zip(&fs).any(|(a, b)| a.0 != b.0) {
        return Ok(false);
    }
    let (er0, es0) = (fr[0].1 as u64, fs[0].1 as u64);
    Ok(fr.iter().zip(&fs).all(|(a, b)| a.1 as u64 * es0 == b.1 as u64 * er0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn b(n: u32) -> Base {
        Base::new(n).unwrap()
    }

    #[test]
    fn int_to_digits_examples() {
        assert_eq!(int_to_digits(&BigUint::from(19u32), b(5)), [3, 4]);
        assert_eq!(int_to_digits(&BigUint::zero(), b(7)), [0]);
        assert_eq!(int_to_digits(&BigUint::from(255u32), b(16)), [15, 15]);
    }

    #[test]
    fn rational_to_expansion_examples() {
        let e = rational_to_expansion(&ratio(19, 62), b(5));
        assert_eq!((e.preperiod(), e.period()), (&[][..], &[1u8, 2, 3][..]));
        let e = rational_to_expansion(&ratio(1, 2), b(10));
        assert_eq!((e.preperiod(), e.period()), (&[5u8][..], &[0u8][..]));
        let e = rational_to_expansion(&ratio(1, 3), b(10));
        assert_eq!(e.period(), [3]);
        assert!(e.preperiod().is_empty());
        // 1/6 = 0.1(6), sign and integer part dropped
        let e = rational_to_expansion(&ratio(-13, 6), b(10));
        assert_eq!((e.preperiod(), e.period()), (&[1u8][..], &[6u8][..]));
    }

    #[test]
    fn expansion_to_rational_examples() {
        let e = Expansion::periodic(b(5), vec![1, 2, 3]).unwrap();
        assert_eq!(expansion_to_rational(&e), ratio(19, 62));
        assert_eq!(expansion_to_rational(&Expansion::zero(b(2))), ratio(0, 1));
        // 0.(100)_5 = 25/124: geometric series 25 / (5^3 - 1)
        let e = Expansion::periodic(b(5), vec![1, 0, 0]).unwrap();
        assert_eq!(expansion_to_rational(&e), ratio(25, 124));
        // and back by long division
        assert_eq!(rational_to_expansion(&ratio(25, 124), b(5)), e);
        assert_eq!(periodic_digits_value(b(10), &[], &[9]), ratio(1, 1));
        assert_eq!(periodic_digits_value(b(10), &[4], &[9]), ratio(1, 2));
    }

    #[test]
    fn big_denominators_take_the_bigint_path() {
        // 1 / (2^61 - 1): period of 1/q in base 2 is 61.
        let q = (1i64 << 61) - 1;
        let e = rational_to_expansion(&ratio(1, q), b(2));
        assert_eq!(e.period().len(), 61);
        assert_eq!(expansion_to_rational(&e), ratio(1, q));
    }

    #[test]
    fn cycle_hint_agrees_with_long_division() {
        for (p, q) in [(19, 62), (1, 7), (5, 12), (123, 9973), (0, 5)] {
            for base in [2, 3, 5, 10, 16] {
                let x = ratio(p, q);
                let plain = rational_to_expansion(&x, b(base));
                let pre = plain.preperiod().len() + 2;
                let per = plain.period().len() * 3;
                assert_eq!(rational_to_expansion_with_cycle(&x, b(base), pre, per), plain);
                // a wrong hint still returns the right expansion
                assert_eq!(rational_to_expansion_with_cycle(&x, b(base), 0, 1), plain);
            }
        }
    }

    #[test]
    fn dependence_examples() {
        assert!(multiplicatively_dependent(2, 8).unwrap());
        assert!(multiplicatively_dependent(4, 8).unwrap());
        assert!(multiplicatively_dependent(7, 7).unwrap());
        assert!(!multiplicatively_dependent(2, 3).unwrap());
        assert!(!multiplicatively_dependent(6, 12).unwrap());
        assert!(multiplicatively_dependent(36, 216).unwrap());
        assert!(multiplicatively_dependent(1, 4).is_err());
        assert!(multiplicatively_dependent(2, DEPENDENCE_INPUT_CAP + 1).is_err());
    }

    /// Independent check: some power of `r` equals some power of `s`, searched
    /// in u128 by comparing r^n against s^m with the smaller side raised.
    fn dependent_by_powers(r: u64, s: u64) -> bool {
        let (mut x, mut y) = (r as u128, s as u128);
        while x != y {
            if x < y {
                x = match x.checked_mul(r as u128) {
                    Some(v) => v,
                    None => return false,
                };
            } else {
                y = match y.checked_mul(s as u128) {
                    Some(v) => v,
                    None => return false,
                };
            }
        }
        true
    }

    #[test]
    fn dependence_matches_power_search_on_small_square() {
        for r in 2..=64 {
            for s in 2..=64 {
                let dep = multiplicatively_dependent(r, s).unwrap();
                assert_eq!(dep, multiplicatively_dependent(s, r).unwrap());
                assert_eq!(dep, dependent_by_powers(r, s), "r={r} s={s}");
            }
        }
    }

    #[test]
    fn roundtrip_small_fractions() {
        for base in [2, 3, 5, 10, 16] {
            for q in 1..=2000i64 {
                for p in (0..q).step_by(97) {
                    let x = ratio(p, q);
                    let e = rational_to_expansion(&x, b(base));
                    assert_eq!(expansion_to_rational(&e), x, "{p}/{q} base {base}");
                }
            }
        }
    }

    fn order_mod(b: u64, q: u64) -> u64 {
        let mut x = b % q;
        let mut k = 1;
        while x != 1 % q {
            x = x * b % q;
            k += 1;
        }
        k
    }

    proptest! {
        #[test]
        fn roundtrip(q in 1i64..=2000, p_frac in 0.0f64..1.0, base in prop::sample::select(vec![2u32, 3, 5, 10, 16])) {
            let p = ((q as f64) * p_frac) as i64 % q;
            let x = ratio(p, q);
            prop_assert_eq!(expansion_to_rational(&rational_to_expansion(&x, b(base))), x);
        }

        #[test]
        fn period_divides_multiplicative_order(q in 2u64..5000, p in 1u64..5000, base in prop::sample::select(vec![2u32, 3, 5, 10, 16])) {
            let x = ratio((p % q) as i64, q as i64);
            let den = x.denom().to_u64().unwrap();
            let mut rest = den;
            loop {
                let g = rest.gcd(&(base as u64));
                if g == 1 { break; }
                rest /= g;
            }
            let e = rational_to_expansion(&x, b(base));
            if rest > 1 {
                let ord = order_mod(base as u64, rest);
                prop_assert_eq!(ord % e.period().len() as u64, 0);
            } else {
                prop_assert_eq!(e.period(), &[0u8][..]);
            }
        }
    }
}
