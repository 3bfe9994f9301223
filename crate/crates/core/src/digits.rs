//! Digit-domain types shared by every other module.
//!
//! A number is always studied through the digits of its fractional part,
//! indexed from position 1. Integer parts and signs are dropped before any
//! digit is produced.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest base with a single-character digit alphabet (`0-9a-z`).
pub const MAX_BASE: u32 = 36;

/// An integer base `2 <= b <= 36`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Base(u8);

impl Base {
    pub const BINARY: Base = Base(2);
    pub const DECIMAL: Base = Base(10);

    pub fn new(b: u32) -> Result<Self> {
        if (2..=MAX_BASE).contains(&b) {
            Ok(Base(b as u8))
        } else {
            Err(Error::InvalidBase(b))
        }
    }

    #[inline]
    pub fn get(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn radix(self) -> u32 {
        self.0 as u32
    }

    /// The largest digit, `b - 1`.
    #[inline]
    pub fn max_digit(self) -> u8 {
        self.0 - 1
    }

    #[inline]
    pub fn contains(self, digit: u8) -> bool {
        digit < self.0
    }

    pub fn check(self, digit: u8) -> Result<u8> {
        if self.contains(digit) {
            Ok(digit)
        } else {
            Err(Error::InvalidDigit { digit, base: self.0 })
        }
    }

    pub fn check_all(self, digits: &[u8]) -> Result<()> {
        digits.iter().try_for_each(|&d| self.check(d).map(|_| ()))
    }

    /// All digits `0..b`.
    pub fn digits(self) -> impl Iterator<Item = u8> {
        0..self.0
    }
}

impl TryFrom<u32> for Base {
    type Error = Error;

    fn try_from(b: u32) -> Result<Self> {
        Base::new(b)
    }
}

impl From<Base> for u32 {
    fn from(b: Base) -> u32 {
        b.radix()
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Character used for `digit` in text output (`0-9`, then `a-z`).
pub fn digit_char(digit: u8) -> char {
    char::from_digit(digit as u32, MAX_BASE).expect("digit below 36")
}

/// Value of a digit character, accepting `0-9` and lowercase `a-z`.
pub fn char_digit(ch: char) -> Option<u8> {
    match ch {
        '0'..='9' => Some(ch as u8 - b'0'),
        'a'..='z' => Some(ch as u8 - b'a' + 10),
        _ => None,
    }
}

pub fn digits_to_string(digits: &[u8]) -> String {
    digits.iter().map(|&d| digit_char(d)).collect()
}

/// Pull contract for fractional digits in a fixed base.
///
/// The k-th successful call to [`DigitSource::next_digit`] yields the digit at
/// position k. `Ok(None)` marks the end of a finite source; unbounded sources
/// never return it.
pub trait DigitSource {
    fn base(&self) -> Base;

    fn next_digit(&mut self) -> Result<Option<u8>>;

    /// Number of digits yielded so far.
    fn position(&self) -> u64;

    /// Pulls the next `m` digits. Fails with [`Error::Exhausted`] carrying the
    /// number of digits the source managed to deliver in total.
    fn take_prefix(&mut self, m: usize) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            match self.next_digit()? {
                Some(d) => out.push(d),
                None => return Err(Error::Exhausted(self.position())),
            }
        }
        Ok(out)
    }

    /// Ends the stream after `m` more digits.
    fn limit(self, m: u64) -> Limit<Self>
    where
        Self: Sized,
    {
        Limit {
            inner: self,
            remaining: m,
        }
    }
}

impl<S: DigitSource + ?Sized> DigitSource for Box<S> {
    fn base(&self) -> Base {
        (**self).base()
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        (**self).next_digit()
    }

    fn position(&self) -> u64 {
        (**self).position()
    }
}

impl<S: DigitSource + ?Sized> DigitSource for &mut S {
    fn base(&self) -> Base {
        (**self).base()
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        (**self).next_digit()
    }

    fn position(&self) -> u64 {
        (**self).position()
    }
}

/// Free-function form of [`DigitSource::take_prefix`].
pub fn take_prefix<S: DigitSource + ?Sized>(src: &mut S, m: usize) -> Result<Vec<u8>> {
    src.take_prefix(m)
}

/// A source truncated to a fixed number of digits. See [`DigitSource::limit`].
#[derive(Debug)]
pub struct Limit<S> {
    inner: S,
    remaining: u64,
}

impl<S: DigitSource> DigitSource for Limit<S> {
    fn base(&self) -> Base {
        self.inner.base()
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let d = self.inner.next_digit()?;
        if d.is_some() {
            self.remaining -= 1;
        }
        Ok(d)
    }

    fn position(&self) -> u64 {
        self.inner.position()
    }
}

/// Replays a materialized digit prefix.
#[derive(Clone, Debug)]
pub struct SliceSource<'a> {
    base: Base,
    digits: &'a [u8],
    pos: usize,
}

impl<'a> SliceSource<'a> {
    pub fn new(base: Base, digits: &'a [u8]) -> Result<Self> {
        base.check_all(digits)?;
        Ok(SliceSource { base, digits, pos: 0 })
    }
}

impl DigitSource for SliceSource<'_> {
    fn base(&self) -> Base {
        self.base
    }

    #[inline]
    fn next_digit(&mut self) -> Result<Option<u8>> {
        let d = self.digits.get(self.pos).copied();
        if d.is_some() {
            self.pos += 1;
        }
        Ok(d)
    }

    fn position(&self) -> u64 {
        self.pos as u64
    }
}

/// Exact digits of a rational: a finite preperiod followed by a period
/// repeated forever.
///
/// Constructed values are normalized: the period is minimal, the preperiod
/// is as short as possible, and a trailing run of `b - 1` is rewritten to the
/// terminating form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Expansion {
    base: Base,
    preperiod: Vec<u8>,
    period: Vec<u8>,
}

impl Expansion {
    pub fn new(base: Base, mut preperiod: Vec<u8>, mut period: Vec<u8>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::EmptyPeriod);
        }
        base.check_all(&preperiod)?;
        base.check_all(&period)?;

        let top = base.max_digit();
        if period.iter().all(|&d| d == top) {
            // 0.x(b-1)(b-1)... == 0.(x+1)000...
            match preperiod.iter().rposition(|&d| d != top) {
                Some(k) => {
                    preperiod[k] += 1;
                    preperiod[k + 1..].fill(0);
                }
                // Carries into the integer part, which is dropped.
                None => preperiod.clear(),
            }
            period = vec![0];
        }

        let p = minimal_period(&period);
        period.truncate(p);

        while let (Some(&last_pre), Some(&last_per)) = (preperiod.last(), period.last()) {
            if last_pre != last_per {
                break;
            }
            preperiod.pop();
            period.rotate_right(1);
        }

        Ok(Expansion {
            base,
            preperiod,
            period,
        })
    }

    /// The purely periodic expansion `0.(period)`.
    pub fn periodic(base: Base, period: Vec<u8>) -> Result<Self> {
        Expansion::new(base, Vec::new(), period)
    }

    /// `0.(b-1)`, the fractional-digit spelling of exactly 1.
    ///
    /// This is the one expansion that keeps a repeating `b - 1` period: a
    /// swap difference of absolute value 1 has no other form once integer
    /// parts are dropped.
    pub fn one(base: Base) -> Self {
        Expansion {
            base,
            preperiod: Vec::new(),
            period: vec![base.max_digit()],
        }
    }

    pub fn zero(base: Base) -> Self {
        Expansion {
            base,
            preperiod: Vec::new(),
            period: vec![0],
        }
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn preperiod(&self) -> &[u8] {
        &self.preperiod
    }

    pub fn period(&self) -> &[u8] {
        &self.period
    }

    pub fn is_zero(&self) -> bool {
        self.preperiod.is_empty() && self.period == [0]
    }

    /// Digit at position `t >= 1`.
    pub fn digit_at(&self, t: u64) -> u8 {
        assert!(t >= 1, "digit positions start at 1");
        let pre = self.preperiod.len() as u64;
        if t <= pre {
            self.preperiod[(t - 1) as usize]
        } else {
            self.period[((t - pre - 1) % self.period.len() as u64) as usize]
        }
    }

    /// Applies `f` to every digit and renormalizes.
    pub fn map_digits(&self, f: impl Fn(u8) -> u8) -> Result<Self> {
        Expansion::new(
            self.base,
            self.preperiod.iter().map(|&d| f(d)).collect(),
            self.period.iter().map(|&d| f(d)).collect(),
        )
    }

    pub fn contains_digit(&self, digit: u8) -> bool {
        self.preperiod.contains(&digit) || self.period.contains(&digit)
    }

    pub fn source(&self) -> ExpansionSource {
        ExpansionSource {
            expansion: self.clone(),
            pos: 0,
        }
    }
}

impl fmt::Display for Expansion {
    /// `0.pre(period)` notation, e.g. `0.(123)` or `0.5(0)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "0.{}({})",
            digits_to_string(&self.preperiod),
            digits_to_string(&self.period)
        )
    }
}

/// Length of the shortest block whose repetition gives `period`.
fn minimal_period(period: &[u8]) -> usize {
    let n = period.len();
    (1..=n)
        .filter(|p| n.is_multiple_of(*p))
        .find(|&p| period.chunks(p).all(|c| c == &period[..p]))
        .unwrap_or(n)
}

/// Free-function form of [`Expansion::digit_at`].
pub fn digit_at(e: &Expansion, t: u64) -> u8 {
    e.digit_at(t)
}

/// Unbounded source over an [`Expansion`].
#[derive(Clone, Debug)]
pub struct ExpansionSource {
    expansion: Expansion,
    pos: u64,
}

impl DigitSource for ExpansionSource {
    fn base(&self) -> Base {
        self.expansion.base
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        self.pos += 1;
        Ok(Some(self.expansion.digit_at(self.pos)))
    }

    fn position(&self) -> u64 {
        self.pos
    }
}
