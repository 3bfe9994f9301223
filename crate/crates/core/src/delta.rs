//! Swap maps, swap differences and Δ-schemes.
//!
//! For digits `i != j` of base `b`, the swap map exchanges every `i` with `j`
//! in the expansion of ω, and `Δ = ω - σ(ω)`. With `δ = |i - j|`, the digits
//! of `|Δ|` come from `{δ, b-δ, δ-1, b-δ-1, b-1, 0}` (mod `b`). The Δ-scheme
//! lists the digit distribution of `|Δ|` for every pair; a number is
//! pseudonormal when each row equals a fixed table that depends on δ only.
//!
//! [`delta_stream`] produces the digits of `|Δ|` directly from the digits of
//! ω. [`delta_exact`] is its oracle: it subtracts exact rationals.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digits::{Base, DigitSource, Expansion, SliceSource};
use crate::error::{Error, Result};
use crate::exact::{abs_diff, expansion_to_rational, periodic_digits_value, rational_to_expansion_with_cycle};
use crate::ngram::Prefix;

/// Default tolerance when scheme rows come from exact periods.
pub const EXACT_TOLERANCE: f64 = 1e-9;
/// Floor of the default tolerance for rows estimated from a prefix.
pub const STREAMING_TOLERANCE_FLOOR: f64 = 0.01;

#[inline]
fn swap_digit(d: u8, i: u8, j: u8) -> u8 {
    if d == i {
        j
    } else if d == j {
        i
    } else {
        d
    }
}

fn check_pair(base: Base, i: u8, j: u8) -> Result<()> {
    base.check(i)?;
    base.check(j)?;
    Ok(())
}

/// `σ^{i,j}(ω)` for an exact expansion, renormalized.
pub fn swap_expansion(e: &Expansion, i: u8, j: u8) -> Result<Expansion> {
    check_pair(e.base(), i, j)?;
    e.map_digits(|d| swap_digit(d, i, j))
}

/// Position-preserving swap of the digits `i` and `j`.
#[derive(Clone, Debug)]
pub struct SwapStream<S> {
    inner: S,
    i: u8,
    j: u8,
}

pub fn swap_stream<S: DigitSource>(src: S, i: u8, j: u8) -> Result<SwapStream<S>> {
    check_pair(src.base(), i, j)?;
    Ok(SwapStream { inner: src, i, j })
}

impl<S: DigitSource> DigitSource for SwapStream<S> {
    fn base(&self) -> Base {
        self.inner.base()
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        Ok(self.inner.next_digit()?.map(|d| swap_digit(d, self.i, self.j)))
    }

    fn position(&self) -> u64 {
        self.inner.position()
    }
}

/// Exact expansion of `|ω - σ^{i,j}(ω)|`, computed with rationals.
///
/// The swapped value is taken from the raw swapped digits, so a swap that
/// produces a `b - 1` tail keeps its value (possibly 1). The result is
/// [`Expansion::one`] when `|Δ| = 1`, which happens only for `ω = 0` and
/// the pair `{0, b-1}`.
pub fn delta_exact(e: &Expansion, i: u8, j: u8) -> Result<Expansion> {
    let base = e.base();
    check_pair(base, i, j)?;
    if i == j || !(e.contains_digit(i) || e.contains_digit(j)) {
        return Err(Error::ZeroDelta { i, j });
    }
    let omega = expansion_to_rational(e);
    let swap = |d: &[u8]| d.iter().map(|&x| swap_digit(x, i, j)).collect::<Vec<_>>();
    let sigma = periodic_digits_value(base, &swap(e.preperiod()), &swap(e.period()));
    let diff = abs_diff(&omega, &sigma);
    if diff.is_zero() {
        return Err(Error::ZeroDelta { i, j });
    }
    if diff.is_one() {
        return Ok(Expansion::one(base));
    }
    // Both values have denominators dividing b^pre * (b^period - 1).
    Ok(rational_to_expansion_with_cycle(
        &diff,
        base,
        e.preperiod().len(),
        e.period().len(),
    ))
}

/// Streams the digits of `|Δ^{i,j}(ω)|` from the digits of ω.
///
/// Let P be the digit (`i` or `j`) that occurs first and M the other; this
/// choice makes Δ positive after a global sign flip. Each occurrence `d`
/// carries `s(d) = δ` if it is a P position and `b - δ` otherwise, and every
/// M position borrows one unit from the position before it. The block from
/// an occurrence `d` up to its successor occurrence `n` is therefore:
///
/// * successor in M: `s(d) - 1` at `d`, then `b - 1` until `n`;
/// * otherwise: `s(d)` at `d`, then `0` until `n`.
///
/// Positions before the first occurrence are `0`. A block is only emitted
/// once its successor has been read, so on a finite source the digits from
/// the last occurrence onwards are withheld. If the source ends before any
/// occurrence, the first read fails with [`Error::ZeroDelta`]; on an endless
/// source without occurrences the first read never returns.
#[derive(Clone, Debug)]
pub struct DeltaStream<S> {
    inner: S,
    base: Base,
    i: u8,
    j: u8,
    delta: u8,
    /// Digit value playing the P role, known after the first occurrence.
    positive: Option<u8>,
    /// Position and digit of the occurrence whose block is not yet emitted.
    pending: (u64, u8),
    read: u64,
    zeros_left: u64,
    head: Option<u8>,
    fill: u8,
    fill_left: u64,
    emitted: u64,
}

pub fn delta_stream<S: DigitSource>(src: S, i: u8, j: u8) -> Result<DeltaStream<S>> {
    let base = src.base();
    check_pair(base, i, j)?;
    if i == j {
        return Err(Error::ZeroDelta { i, j });
    }
    Ok(DeltaStream {
        inner: src,
        base,
        i,
        j,
        delta: i.abs_diff(j),
        positive: None,
        pending: (0, 0),
        read: 0,
        zeros_left: 0,
        head: None,
        fill: 0,
        fill_left: 0,
        emitted: 0,
    })
}

impl<S: DigitSource> DeltaStream<S> {
    /// Reads ahead to the next occurrence of `i` or `j`.
    fn next_occurrence(&mut self) -> Result<Option<(u64, u8)>> {
        while let Some(d) = self.inner.next_digit()? {
            self.read += 1;
            if d == self.i || d == self.j {
                return Ok(Some((self.read, d)));
            }
        }
        Ok(None)
    }

    /// The digit playing the P role, once known.
    pub fn positive_digit(&self) -> Option<u8> {
        self.positive
    }

    fn emit(&mut self, d: u8) -> Result<Option<u8>> {
        self.emitted += 1;
        Ok(Some(d))
    }
}

impl<S: DigitSource> DigitSource for DeltaStream<S> {
    fn base(&self) -> Base {
        self.base
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        let positive = match self.positive {
            Some(p) => p,
            None => {
                let (pos, d) = self
                    .next_occurrence()?
                    .ok_or(Error::ZeroDelta { i: self.i, j: self.j })?;
                self.positive = Some(d);
                self.pending = (pos, d);
                self.zeros_left = pos - 1;
                d
            }
        };
        if self.zeros_left > 0 {
            self.zeros_left -= 1;
            return self.emit(0);
        }
        if let Some(h) = self.head.take() {
            return self.emit(h);
        }
        if self.fill_left > 0 {
            self.fill_left -= 1;
            return self.emit(self.fill);
        }

        let Some((next_pos, next_digit)) = self.next_occurrence()? else {
            return Ok(None);
        };
        let (pos, digit) = self.pending;
        let b = self.base.get();
        let s = if digit == positive { self.delta } else { b - self.delta };
        let (head, fill) = if next_digit != positive { (s - 1, b - 1) } else { (s, 0) };
        self.fill = fill;
        self.fill_left = next_pos - pos - 1;
        self.pending = (next_pos, next_digit);
        self.emit(head)
    }

    /// Number of `|Δ|` digits emitted so far.
    fn position(&self) -> u64 {
        self.emitted
    }
}

/// Digits that can occur in `|Δ^{i,j}|` for `δ = |i - j|`: the set
/// `{δ, b-δ, δ-1, b-δ-1, b-1, 0}` reduced mod `b`, ascending.
pub fn admissible_digits(base: Base, delta: u8) -> Vec<u8> {
    let b = base.get() as i32;
    let d = delta as i32;
    let mut out: Vec<u8> = [d, b - d, d - 1, b - d - 1, b - 1, 0]
        .iter()
        .map(|&x| x.rem_euclid(b) as u8)
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// How a scheme row was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeMode {
    /// Digit counts over one exact period of `|Δ|`.
    Exact,
    /// Digit counts over the determined digits of a finite prefix.
    Streaming,
}

impl fmt::Display for SchemeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeMode::Exact => "exact",
            SchemeMode::Streaming => "streaming",
        })
    }
}

/// Digit distribution of `|Δ^{i,j}|` for one unordered pair `i < j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeRow {
    pub i: u8,
    pub j: u8,
    /// Occurrences of each digit among the counted digits.
    pub counts: Vec<u64>,
    /// Number of counted digits.
    pub total: u64,
}

impl SchemeRow {
    pub fn delta(&self) -> u8 {
        self.j - self.i
    }

    pub fn fraction(&self, digit: u8) -> Ratio<u64> {
        Ratio::new(self.counts[digit as usize], self.total)
    }

    pub fn prob(&self, digit: u8) -> f64 {
        self.counts[digit as usize] as f64 / self.total as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.counts.len() as u8).map(|d| self.prob(d)).collect()
    }
}

/// The Δ-scheme: one row per pair `i < j` with a non-zero difference.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaScheme {
    pub base: Base,
    pub mode: SchemeMode,
    /// Digits of ω read (streaming mode only).
    pub prefix_len: Option<u64>,
    /// Rows sorted by `(i, j)`.
    pub rows: Vec<SchemeRow>,
}

impl DeltaScheme {
    pub fn row(&self, i: u8, j: u8) -> Option<&SchemeRow> {
        let (i, j) = (i.min(j), i.max(j));
        self.rows.iter().find(|r| (r.i, r.j) == (i, j))
    }
}

fn pairs(base: Base) -> Vec<(u8, u8)> {
    base.digits()
        .flat_map(|i| (i + 1..base.get()).map(move |j| (i, j)))
        .collect()
}

/// Δ-scheme of a rational from its exact expansion. Each row counts the
/// digits of one period of `|Δ|`; identically zero rows are omitted.
pub fn delta_scheme_exact(e: &Expansion) -> Result<DeltaScheme> {
    let base = e.base();
    let rows = pairs(base)
        .into_par_iter()
        .map(|(i, j)| match delta_exact(e, i, j) {
            Ok(d) => {
                let mut counts = vec![0u64; base.radix() as usize];
                d.period().iter().for_each(|&x| counts[x as usize] += 1);
                Ok(Some(SchemeRow {
                    i,
                    j,
                    counts,
                    total: d.period().len() as u64,
                }))
            }
            Err(Error::ZeroDelta { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeltaScheme {
        base,
        mode: SchemeMode::Exact,
        prefix_len: None,
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Δ-scheme estimated from a digit prefix.
///
/// Every pair replays the prefix through [`delta_stream`] and counts all
/// determined digits, leading zeros included. Pairs with no occurrence, or
/// with no determined digit, are omitted.
pub fn delta_scheme(prefix: &Prefix) -> Result<DeltaScheme> {
    if prefix.len() < 2 {
        return Err(Error::InvalidArgument("a Δ-scheme needs at least 2 digits".into()));
    }
    let base = prefix.base();
    let rows = pairs(base)
        .into_par_iter()
        .map(|(i, j)| {
            let src = SliceSource::new(base, prefix.digits())?;
            let mut stream = delta_stream(src, i, j)?;
            let mut counts = vec![0u64; base.radix() as usize];
            loop {
                match stream.next_digit() {
                    Ok(Some(d)) => counts[d as usize] += 1,
                    Ok(None) => break,
                    Err(Error::ZeroDelta { .. }) => return Ok(None),
                    Err(e) => return Err(e),
                }
            }
            let total = stream.position();
            Ok((total > 0).then_some(SchemeRow { i, j, counts, total }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DeltaScheme {
        base,
        mode: SchemeMode::Streaming,
        prefix_len: Some(prefix.len() as u64),
        rows: rows.into_iter().flatten().collect(),
    })
}

/// Reads `m` digits from `src` and estimates the scheme.
pub fn delta_scheme_from_source<S: DigitSource + ?Sized>(src: &mut S, m: usize) -> Result<DeltaScheme> {
    delta_scheme(&Prefix::read(src, m)?)
}

/// The row every `b`-normal number has for a given `δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpectedRow {
    pub base: Base,
    pub delta: u8,
    pub probs: Vec<Ratio<u64>>,
}

impl ExpectedRow {
    pub fn probs_f64(&self) -> Vec<f64> {
        self.probs.iter().map(|r| r.to_f64().expect("small ratio")).collect()
    }
}

/// `1/(2b)` at each of `δ, b-δ, δ-1, b-δ-1` and `(b-2)/(2b)` at each of
/// `0, b-1`, all mod `b`; coinciding digits add up.
pub fn expected_row(base: Base, delta: u8) -> Result<ExpectedRow> {
    let b = base.get();
    if delta == 0 || delta >= b {
        return Err(Error::InvalidArgument(format!("δ must lie in 1..{b}, got {delta}")));
    }
    let bb = b as u64;
    let small = Ratio::new(1, 2 * bb);
    let large = Ratio::new(bb - 2, 2 * bb);
    let mut probs = vec![Ratio::zero(); b as usize];
    for d in [delta, b - delta, delta - 1, b - delta - 1] {
        probs[(d % b) as usize] += small;
    }
    probs[0] += large;
    probs[(b - 1) as usize] += large;
    Ok(ExpectedRow { base, delta, probs })
}

/// Tolerance policy for [`pseudonormal_test`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tolerance {
    /// `1e-9` for exact rows; `max(0.01, 5 sqrt(b / (4 n)))` for rows counted
    /// over `n` streamed digits.
    Default,
    Fixed(f64),
}

impl Tolerance {
    pub fn for_row(self, mode: SchemeMode, base: Base, total: u64) -> f64 {
        match (self, mode) {
            (Tolerance::Fixed(eps), _) => eps,
            (Tolerance::Default, SchemeMode::Exact) => EXACT_TOLERANCE,
            (Tolerance::Default, SchemeMode::Streaming) => {
                let band = 5.0 * (base.radix() as f64 / (4.0 * total as f64)).sqrt();
                band.max(STREAMING_TOLERANCE_FLOOR)
            }
        }
    }
}

/// One scheme row against its expected row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowDeviation {
    pub i: u8,
    pub j: u8,
    pub delta: u8,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    /// Max-norm distance to the expected row.
    pub deviation: f64,
    pub worst_digit: u8,
    pub tolerance: f64,
    pub pass: bool,
}

/// Two rows with the same δ compared with each other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub first: (u8, u8),
    pub second: (u8, u8),
    pub delta: u8,
    pub difference: f64,
    pub worst_digit: u8,
    pub agree: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudonormalReport {
    pub base: Base,
    pub mode: SchemeMode,
    pub pass: bool,
    pub rows: Vec<RowDeviation>,
    pub same_delta: Vec<PairComparison>,
}

impl PseudonormalReport {
    pub fn failing_rows(&self) -> impl Iterator<Item = &RowDeviation> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn worst(&self) -> Option<&RowDeviation> {
        self.rows.iter().max_by(|a, b| a.deviation.total_cmp(&b.deviation))
    }
}

/// Max-norm distance and the digit where it is attained (first on ties).
fn max_norm(a: &[f64], b: &[f64]) -> (f64, u8) {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(d, (x, y))| ((x - y).abs(), d as u8))
        .fold((0.0, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// Checks every row against [`expected_row`] for its δ. The scheme passes
/// when each row is within its tolerance in max-norm.
pub fn pseudonormal_test(scheme: &DeltaScheme, tolerance: Tolerance) -> Result<PseudonormalReport> {
    if scheme.rows.is_empty() {
        return Err(Error::EmptyScheme);
    }
    let base = scheme.base;
    let mut rows = Vec::with_capacity(scheme.rows.len());
    for row in &scheme.rows {
        let expected = expected_row(base, row.delta())?.probs_f64();
        let observed = row.probs();
        let (deviation, worst_digit) = max_norm(&observed, &expected);
        let tol = tolerance.for_row(scheme.mode, base, row.total);
        rows.push(RowDeviation {
            i: row.i,
            j: row.j,
            delta: row.delta(),
            observed,
            expected,
            deviation,
            worst_digit,
            tolerance: tol,
            pass: deviation <= tol,
        });
    }

    let mut by_delta: BTreeMap<u8, Vec<&RowDeviation>> = BTreeMap::new();
    for r in &rows {
        by_delta.entry(r.delta).or_default().push(r);
    }
    let mut same_delta = Vec::new();
    for (delta, group) in by_delta {
        for (k, a) in group.iter().enumerate() {
            for b in &group[k + 1..] {
                let (difference, worst_digit) = max_norm(&a.observed, &b.observed);
                same_delta.push(PairComparison {
                    first: (a.i, a.j),
                    second: (b.i, b.j),
                    delta,
                    difference,
                    worst_digit,
                    agree: difference <= a.tolerance.max(b.tolerance),
                });
            }
        }
    }

    Ok(PseudonormalReport {
        base,
        mode: scheme.mode,
        pass: rows.iter().all(|r| r.pass),
        rows,
        same_delta,
    })
}
