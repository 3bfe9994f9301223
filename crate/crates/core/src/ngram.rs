//! Finite-prefix estimators of digit-string probabilities.
//!
//! All counts are exact integers. A frequency over a prefix of `m` digits
//! uses the window count `m - n + 1` as its denominator, so the frequencies
//! of all length-`n` strings sum to one.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::digits::{Base, DigitSource};
use crate::error::{Error, Result};

/// Tables with at most this many strings are counted into a flat array.
const DENSE_LIMIT: u64 = 1 << 20;
/// Prefixes longer than this are counted in parallel chunks.
const PARALLEL_MIN: usize = 1 << 18;

/// A materialized digit prefix. Every estimator in this module reads one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prefix {
    base: Base,
    digits: Vec<u8>,
}

impl Prefix {
    /// Pulls `m` digits from `src`.
    pub fn read<S: DigitSource + ?Sized>(src: &mut S, m: usize) -> Result<Self> {
        Ok(Prefix {
            base: src.base(),
            digits: src.take_prefix(m)?,
        })
    }

    pub fn from_digits(base: Base, digits: Vec<u8>) -> Result<Self> {
        base.check_all(&digits)?;
        Ok(Prefix { base, digits })
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// The first `m` digits as a new prefix.
    pub fn truncated(&self, m: usize) -> Prefix {
        Prefix {
            base: self.base,
            digits: self.digits[..m.min(self.digits.len())].to_vec(),
        }
    }
}

/// An exact frequency `hits / windows`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frequency {
    pub hits: u64,
    pub windows: u64,
}

impl Frequency {
    pub fn value(self) -> f64 {
        self.hits as f64 / self.windows as f64
    }
}

#[derive(Clone, Debug)]
enum Counts {
    Dense(Vec<u64>),
    Sparse(HashMap<u64, u64>),
}

/// Occurrence counts of every length-`n` string among the overlapping
/// windows of an `m`-digit prefix.
#[derive(Clone, Debug)]
pub struct NGramTable {
    base: Base,
    n: usize,
    m: usize,
    /// `b^n`, the number of distinct strings.
    space: u64,
    counts: Counts,
}

fn string_space(base: Base, n: usize) -> Result<u64> {
    u32::try_from(n)
        .ok()
        .and_then(|n| (base.radix() as u64).checked_pow(n))
        .ok_or(Error::NGramTooLong { base: base.get(), n })
}

/// Window codes (base-`b` value of each length-`n` window) for windows
/// starting at `digits[0..starts]`.
fn for_each_code(digits: &[u8], base: Base, n: usize, starts: usize, mut f: impl FnMut(u64)) {
    if starts == 0 {
        return;
    }
    let b = base.radix() as u64;
    let high = (b).pow(n as u32 - 1);
    let mut code = digits[..n - 1].iter().fold(0u64, |c, &d| c * b + d as u64);
    for &d in &digits[n - 1..n - 1 + starts] {
        code = (code % high) * b + d as u64;
        f(code);
    }
}

fn count_range(digits: &[u8], base: Base, n: usize, starts: usize, space: u64) -> Counts {
    if space <= DENSE_LIMIT {
        let mut dense = vec![0u64; space as usize];
        for_each_code(digits, base, n, starts, |c| dense[c as usize] += 1);
        Counts::Dense(dense)
    } else {
        let mut sparse = HashMap::new();
        for_each_code(digits, base, n, starts, |c| *sparse.entry(c).or_insert(0) += 1);
        Counts::Sparse(sparse)
    }
}

fn merge(a: Counts, b: Counts) -> Counts {
    match (a, b) {
        (Counts::Dense(mut x), Counts::Dense(y)) => {
            x.iter_mut().zip(y).for_each(|(p, q)| *p += q);
            Counts::Dense(x)
        }
        (Counts::Sparse(mut x), Counts::Sparse(y)) => {
            for (k, v) in y {
                *x.entry(k).or_insert(0) += v;
            }
            Counts::Sparse(x)
        }
        _ => unreachable!("chunks share one representation"),
    }
}

impl NGramTable {
    pub fn from_prefix(prefix: &Prefix, n: usize) -> Result<Self> {
        NGramTable::from_digits(prefix.base, prefix.digits(), n)
    }

    pub fn from_digits(base: Base, digits: &[u8], n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n-gram length must be at least 1".into()));
        }
        let space = string_space(base, n)?;
        let m = digits.len();
        let windows = (m + 1).saturating_sub(n);

        let counts = if windows < PARALLEL_MIN {
            count_range(digits, base, n, windows, space)
        } else {
            // Each chunk owns the windows *starting* in its range and reads
            // n - 1 digits past it, so boundary windows are counted once.
            let chunk = windows.div_ceil(rayon::current_num_threads().max(1) * 4);
            (0..windows)
                .step_by(chunk)
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|start| {
                    let starts = chunk.min(windows - start);
                    count_range(&digits[start..start + starts + n - 1], base, n, starts, space)
                })
                .reduce_with(merge)
                .expect("at least one chunk")
        };
        Ok(NGramTable {
            base,
            n,
            m,
            space,
            counts,
        })
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `m - n + 1`, or 0 when the prefix is shorter than `n`.
    pub fn windows(&self) -> u64 {
        (self.m + 1).saturating_sub(self.n) as u64
    }

    /// Number of distinct strings of length `n`, `b^n`.
    pub fn space(&self) -> u64 {
        self.space
    }

    pub fn encode(&self, s: &[u8]) -> Result<u64> {
        if s.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "string of length {} queried in a table of {}-grams",
                s.len(),
                self.n
            )));
        }
        let b = self.base.radix() as u64;
        s.iter()
            .try_fold(0u64, |c, &d| self.base.check(d).map(|d| c * b + d as u64))
    }

    pub fn decode(&self, mut code: u64) -> Vec<u8> {
        let b = self.base.radix() as u64;
        let mut s = vec![0u8; self.n];
        for slot in s.iter_mut().rev() {
            *slot = (code % b) as u8;
            code /= b;
        }
        s
    }

    fn count_code(&self, code: u64) -> u64 {
        match &self.counts {
            Counts::Dense(v) => v[code as usize],
            Counts::Sparse(h) => h.get(&code).copied().unwrap_or(0),
        }
    }

    pub fn count(&self, s: &[u8]) -> Result<u64> {
        Ok(self.count_code(self.encode(s)?))
    }

    /// Number of strings that occur at least once.
    pub fn distinct(&self) -> u64 {
        match &self.counts {
            Counts::Dense(v) => v.iter().filter(|&&c| c > 0).count() as u64,
            Counts::Sparse(h) => h.len() as u64,
        }
    }

    /// `(code, count)` for every occurring string, in lexicographic order.
    pub fn iter_codes(&self) -> Vec<(u64, u64)> {
        match &self.counts {
            Counts::Dense(v) => v
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(k, &c)| (k as u64, c))
                .collect(),
            Counts::Sparse(h) => {
                let mut out: Vec<_> = h.iter().map(|(&k, &c)| (k, c)).collect();
                out.sort_unstable();
                out
            }
        }
    }

    /// Occurring strings with their counts, in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<u8>, u64)> + '_ {
        self.iter_codes().into_iter().map(|(k, c)| (self.decode(k), c))
    }

    pub fn frequency(&self, s: &[u8]) -> Result<Frequency> {
        let windows = self.windows();
        if windows == 0 {
            return Err(Error::DegenerateWindow { m: self.m, n: self.n });
        }
        Ok(Frequency {
            hits: self.count(s)?,
            windows,
        })
    }

    /// `count(s) / windows`; zero for strings that never occur.
    pub fn empirical_prob(&self, s: &[u8]) -> Result<f64> {
        self.frequency(s).map(Frequency::value)
    }

    /// `|count / windows - b^-n|` for the string with code `code`, computed
    /// as one division of exact integers.
    fn deviation_of(&self, count: u64) -> f64 {
        let w = self.windows() as u128;
        let space = self.space as u128;
        let num = (count as u128 * space).abs_diff(w);
        num as f64 / (w * space) as f64
    }

    /// Largest deviation from the uniform frequency `b^-n` over all `b^n`
    /// strings, including those that never occur.
    pub fn max_deviation(&self) -> Result<Deviation> {
        if self.windows() == 0 {
            return Err(Error::DegenerateWindow { m: self.m, n: self.n });
        }
        let expected = 1.0 / self.space as f64;
        let mut worst = (f64::NEG_INFINITY, 0u64, 0u64);
        let mut consider = |code: u64, count: u64| {
            let dev = self.deviation_of(count);
            if dev > worst.0 {
                worst = (dev, code, count);
            }
        };
        match &self.counts {
            Counts::Dense(v) => v.iter().enumerate().for_each(|(k, &c)| consider(k as u64, c)),
            Counts::Sparse(h) => {
                for (&k, &c) in h {
                    consider(k, c);
                }
                if (h.len() as u64) < self.space {
                    let absent = (0..).find(|k| !h.contains_key(k)).expect("an absent code");
                    consider(absent, 0);
                }
            }
        }
        let (value, code, count) = worst;
        Ok(Deviation {
            value,
            n: self.n,
            string: self.decode(code),
            observed: count as f64 / self.windows() as f64,
            expected,
        })
    }
}

/// Counts the `n`-grams of the first `m` digits of `src`.
pub fn count_ngrams<S: DigitSource + ?Sized>(src: &mut S, m: usize, n: usize) -> Result<NGramTable> {
    let prefix = Prefix::read(src, m)?;
    NGramTable::from_prefix(&prefix, n)
}

/// The worst string found by a uniformity check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub value: f64,
    pub n: usize,
    pub string: Vec<u8>,
    pub observed: f64,
    pub expected: f64,
}

/// `max_d |freq(d) - 1/b|` over the prefix.
pub fn simply_normal_dev(prefix: &Prefix) -> Result<Deviation> {
    if prefix.is_empty() {
        return Err(Error::DegenerateWindow { m: 0, n: 1 });
    }
    let b = prefix.base.radix() as usize;
    let mut counts = vec![0u64; b];
    prefix.digits.iter().for_each(|&d| counts[d as usize] += 1);
    let w = prefix.len() as u128;
    let (digit, count) = counts
        .iter()
        .enumerate()
        .map(|(d, &c)| (d, c))
        // first maximum, matching the n-gram scan order
        .fold(None, |best: Option<(usize, u64)>, (d, c)| match best {
            Some((_, bc)) if (bc as u128 * b as u128).abs_diff(w) >= (c as u128 * b as u128).abs_diff(w) => best,
            _ => Some((d, c)),
        })
        .expect("b >= 2");
    let value = (count as u128 * b as u128).abs_diff(w) as f64 / (w * b as u128) as f64;
    Ok(Deviation {
        value,
        n: 1,
        string: vec![digit as u8],
        observed: count as f64 / w as f64,
        expected: 1.0 / b as f64,
    })
}

/// Worst deviation from `b^-n` over all lengths `1..=n_max`.
pub fn block_normal_dev(prefix: &Prefix, n_max: usize) -> Result<Deviation> {
    if n_max == 0 || n_max > prefix.len() {
        return Err(Error::InvalidArgument(format!(
            "block normality needs 1 <= n_max <= m, got n_max = {n_max}, m = {}",
            prefix.len()
        )));
    }
    let mut worst: Option<Deviation> = None;
    for n in 1..=n_max {
        let dev = NGramTable::from_prefix(prefix, n)?.max_deviation()?;
        if worst.as_ref().is_none_or(|w| dev.value > w.value) {
            worst = Some(dev);
        }
    }
    Ok(worst.expect("n_max >= 1"))
}

/// Empirical distribution of the digit following a context string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalRow {
    /// Number of windows that start with the context.
    pub support: u64,
    /// Count per following digit.
    pub counts: Vec<u64>,
}

impl ConditionalRow {
    pub fn prob(&self, digit: u8) -> f64 {
        self.counts[digit as usize] as f64 / self.support as f64
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.counts.len() as u8).map(|d| self.prob(d)).collect()
    }
}

/// Estimates of `P([s_n] | [s_1 ... s_{n-1}])` keyed by the context
/// `s_1 ... s_{n-1}`. Contexts that never occur are absent, not zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrefixConditional {
    pub base: Base,
    pub n: usize,
    pub rows: BTreeMap<Vec<u8>, ConditionalRow>,
}

impl PrefixConditional {
    pub fn row(&self, context: &[u8]) -> Option<&ConditionalRow> {
        self.rows.get(context)
    }

    /// `None` when the context never occurs.
    pub fn prob(&self, context: &[u8], next: u8) -> Option<f64> {
        self.row(context).map(|r| r.prob(next))
    }

    /// Largest `|P - 1/b|` over all supported entries.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.base.radix() as f64;
        self.rows
            .values()
            .flat_map(|r| r.probs())
            .map(|p| (p - u).abs())
            .fold(0.0, f64::max)
    }
}

/// Conditional distribution of each digit given the `n - 1` digits before it.
///
/// Counts every length-`n` window of the prefix; a context's support is the
/// number of such windows it starts, so supported rows sum to one.
pub fn prefix_conditional(prefix: &Prefix, n: usize) -> Result<PrefixConditional> {
    if n < 2 || n > prefix.len() {
        return Err(Error::InvalidArgument(format!(
            "conditional estimate needs 2 <= n <= m, got n = {n}, m = {}",
            prefix.len()
        )));
    }
    let b = prefix.base.radix() as u64;
    let table = NGramTable::from_prefix(prefix, n)?;
    let mut rows: BTreeMap<Vec<u8>, ConditionalRow> = BTreeMap::new();
    for (code, count) in table.iter_codes() {
        let context = table.decode(code / b);
        let context = context[1..].to_vec();
        let row = rows.entry(context).or_insert_with(|| ConditionalRow {
            support: 0,
            counts: vec![0; b as usize],
        });
        row.support += count;
        row.counts[(code % b) as usize] += count;
    }
    Ok(PrefixConditional {
        base: prefix.base,
        n,
        rows,
    })
}

/// Estimates of `P([s_n] | [s_1])`: among length-`n` windows starting with
/// `s_1`, the fraction ending with `s_n`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionalMatrix {
    pub base: Base,
    pub n: usize,
    /// Row-major `b x b` joint counts of (first digit, last digit).
    pub joint: Vec<u64>,
    /// Windows starting with each digit.
    pub support: Vec<u64>,
}

impl ConditionalMatrix {
    fn b(&self) -> usize {
        self.base.radix() as usize
    }

    /// `None` for a first digit that starts no window.
    pub fn entry(&self, first: u8, last: u8) -> Option<f64> {
        let s = self.support[first as usize];
        (s > 0).then(|| self.joint[first as usize * self.b() + last as usize] as f64 / s as f64)
    }

    pub fn row(&self, first: u8) -> Option<Vec<f64>> {
        (self.support[first as usize] > 0).then(|| self.base.digits().map(|l| self.entry(first, l).unwrap()).collect())
    }

    /// Largest `|P - 1/b|` over all supported entries.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.b() as f64;
        self.base
            .digits()
            .filter_map(|f| self.row(f))
            .flatten()
            .map(|p| (p - u).abs())
            .fold(0.0, f64::max)
    }
}

pub fn gap_conditional(prefix: &Prefix, n: usize) -> Result<ConditionalMatrix> {
    if n < 2 || n > prefix.len() {
        return Err(Error::InvalidArgument(format!(
            "gap conditional needs 2 <= n <= m, got n = {n}, m = {}",
            prefix.len()
        )));
    }
    let b = prefix.base.radix() as usize;
    let d = prefix.digits();
    let windows = d.len() - n + 1;
    let mut joint = vec![0u64; b * b];
    for (&first, &last) in d[..windows].iter().zip(&d[n - 1..]) {
        joint[first as usize * b + last as usize] += 1;
    }
    let support = joint.chunks(b).map(|r| r.iter().sum()).collect();
    Ok(ConditionalMatrix {
        base: prefix.base,
        n,
        joint,
        support,
    })
}

/// Default number of digits used to approximate each `frac(b^j ω)`:
/// `ceil(log_b |k| + 12)`.
pub fn default_weyl_precision(base: Base, k: i64) -> usize {
    let log = (k.unsigned_abs() as f64).ln() / (base.radix() as f64).ln();
    (log + 12.0).ceil() as usize
}

/// `|(1/N) sum_{j=1}^N exp(2 pi i k frac(b^j ω))|`.
///
/// `frac(b^j ω)` is read from the `precision` digits at positions
/// `j+1 ..= j+precision`, so the prefix must hold `count + precision` digits.
/// The product `k * frac` is reduced modulo 1 in integers before the phase
/// is formed.
pub fn weyl_sum(prefix: &Prefix, k: i64, count: usize, precision: usize) -> Result<f64> {
    if k == 0 || count == 0 || precision == 0 {
        return Err(Error::InvalidArgument(
            "Weyl sums need k != 0, N >= 1 and at least one digit of precision".into(),
        ));
    }
    let need = count + precision;
    if prefix.len() < need {
        return Err(Error::Exhausted(prefix.len() as u64));
    }
    let b = prefix.base.radix() as u128;
    let scale = u32::try_from(precision)
        .ok()
        .and_then(|p| (b as u64).checked_pow(p))
        .ok_or_else(|| Error::InvalidArgument(format!("{precision} digits of base {b} exceed 64 bits")))?
        as u128;
    let high = scale / b;
    let k_mod = (k as i128).rem_euclid(scale as i128) as u128;

    let d = prefix.digits();
    // window over positions j+1 ..= j+precision, i.e. d[j .. j+precision]
    let mut window = d[1..precision].iter().fold(0u128, |w, &x| w * b + x as u128);
    let (mut re, mut im) = (0.0f64, 0.0f64);
    for &x in &d[precision..need] {
        window = (window % high) * b + x as u128;
        let phase = (k_mod * window % scale) as f64 / scale as f64;
        let (s, c) = (TAU * phase).sin_cos();
        re += c;
        im += s;
    }
    Ok((re.hypot(im) / count as f64).min(1.0))
}

/// Running frequency of `s` at each checkpoint, counting windows that end
/// at or before it.
pub fn density_trajectory<S: DigitSource + ?Sized>(
    src: &mut S,
    s: &[u8],
    checkpoints: &[u64],
) -> Result<Vec<Frequency>> {
    let base = src.base();
    base.check_all(s)?;
    let len = s.len() as u64;
    if len == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints.first().is_some_and(|&c| c < len) {
        return Err(Error::InvalidArgument(
            "checkpoints must increase and each cover the pattern length".into(),
        ));
    }
    let mut recent = std::collections::VecDeque::with_capacity(s.len());
    let mut hits = 0u64;
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut pos = 0u64;
    for &cp in checkpoints {
        while pos < cp {
            let d = src.next_digit()?.ok_or(Error::Exhausted(pos))?;
            pos += 1;
            if recent.len() == s.len() {
                recent.pop_front();
            }
            recent.push_back(d);
            if recent.len() == s.len() && recent.iter().eq(s.iter()) {
                hits += 1;
            }
        }
        out.push(Frequency {
            hits,
            windows: cp - len + 1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::Expansion;
    use crate::sources::{casual_source, oscillating_example};
    use proptest::prelude::*;

    fn b(n: u32) -> Base {
        Base::new(n).unwrap()
    }

    fn periodic(base: u32, period: &[u8], m: usize) -> Prefix {
        let e = Expansion::periodic(b(base), period.to_vec()).unwrap();
        Prefix::read(&mut e.source(), m).unwrap()
    }

    #[test]
    fn count_examples() {
        let p = periodic(5, &[1, 2, 3], 6);
        let t = NGramTable::from_prefix(&p, 1).unwrap();
        assert_eq!(
            t.iter().collect::<Vec<_>>(),
            vec![(vec![1], 2), (vec![2], 2), (vec![3], 2)]
        );
        let t = NGramTable::from_prefix(&p, 2).unwrap();
        assert_eq!(t.windows(), 5);
        assert_eq!(
            t.iter().collect::<Vec<_>>(),
            vec![(vec![1, 2], 2), (vec![2, 3], 2), (vec![3, 1], 1)]
        );
        assert_eq!(t.empirical_prob(&[1, 2]).unwrap(), 0.4);
        assert_eq!(t.empirical_prob(&[4, 4]).unwrap(), 0.0);
        assert!(t.empirical_prob(&[1]).is_err());
    }

    #[test]
    fn count_through_source() {
        let e = Expansion::periodic(b(5), vec![1, 2, 3]).unwrap();
        let t = count_ngrams(&mut e.source(), 3000, 1).unwrap();
        assert_eq!(t.empirical_prob(&[1]).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn degenerate_window() {
        let p = periodic(5, &[1, 2, 3], 2);
        let t = NGramTable::from_prefix(&p, 3).unwrap();
        assert_eq!(t.windows(), 0);
        assert!(matches!(
            t.empirical_prob(&[1, 2, 3]),
            Err(Error::DegenerateWindow { .. })
        ));
    }

    #[test]
    fn too_long_for_index() {
        let p = periodic(36, &[1], 20);
        assert!(matches!(
            NGramTable::from_prefix(&p, 13),
            Err(Error::NGramTooLong { .. })
        ));
    }

    #[test]
    fn sparse_and_parallel_paths_agree_with_naive_counts() {
        let p = Prefix::read(&mut casual_source(b(7), 3), 600_000).unwrap();
        for n in [1, 3, 8] {
            let t = NGramTable::from_prefix(&p, n).unwrap();
            let mut naive: HashMap<&[u8], u64> = HashMap::new();
            for w in p.digits().windows(n) {
                *naive.entry(w).or_insert(0) += 1;
            }
            assert_eq!(t.distinct(), naive.len() as u64);
            for (s, c) in t.iter() {
                assert_eq!(naive[s.as_slice()], c);
            }
            assert_eq!(t.iter().map(|(_, c)| c).sum::<u64>(), t.windows());
        }
    }

    #[test]
    fn simple_normality_examples() {
        assert_eq!(simply_normal_dev(&periodic(4, &[0, 1, 2, 3], 400)).unwrap().value, 0.0);
        let dev = simply_normal_dev(&periodic(5, &[1, 2, 3], 6)).unwrap();
        assert_eq!(dev.value, 0.2);
        assert_eq!(dev.string, [0]);
        let digits: Vec<u8> = "1320201331020231".bytes().map(|c| c - b'0').collect();
        assert_eq!(simply_normal_dev(&periodic(4, &digits, 16)).unwrap().value, 0.0);
    }

    #[test]
    fn block_normality_examples() {
        // "00" never occurs: deviation exactly 1/4. "01" fills 500 of 999
        // windows and is slightly worse.
        let p = periodic(2, &[0, 1], 1000);
        let pairs = NGramTable::from_prefix(&p, 2).unwrap();
        assert_eq!((pairs.empirical_prob(&[0, 0]).unwrap() - 0.25).abs(), 0.25);
        let dev = block_normal_dev(&p, 2).unwrap();
        assert_eq!((dev.n, dev.string.as_slice()), (2, &[0u8, 1][..]));
        // exact: (4*500 - 999) / (4*999)
        assert_eq!(dev.value, 1001.0 / 3996.0);
        let p = Prefix::read(&mut casual_source(b(4), 11), 1_000_000).unwrap();
        assert!(block_normal_dev(&p, 4).unwrap().value < 0.01);
    }

    #[test]
    fn absent_strings_count_in_sparse_tables() {
        // 13-grams in base 4 use the sparse map; most strings are absent.
        let p = periodic(4, &[0, 1, 2, 3], 100);
        let dev = NGramTable::from_prefix(&p, 11).unwrap().max_deviation().unwrap();
        assert!(dev.value > 0.2);
        let t = NGramTable::from_prefix(&p, 11).unwrap();
        // present strings each have frequency ~1/4; absent ones 0; worst is a present one
        assert_eq!(dev.observed, t.iter().next().unwrap().1 as f64 / t.windows() as f64);
    }

    #[test]
    fn prefix_conditional_examples() {
        let c = prefix_conditional(&periodic(5, &[1, 2, 3], 300), 2).unwrap();
        assert_eq!(c.prob(&[1], 2), Some(1.0));
        assert_eq!(c.prob(&[2], 3), Some(1.0));
        assert_eq!(c.prob(&[3], 1), Some(1.0));
        assert_eq!(c.prob(&[1], 1), Some(0.0));
        assert_eq!(c.prob(&[0], 1), None);
        for row in c.rows.values() {
            assert!((row.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let p = Prefix::read(&mut casual_source(b(10), 5), 1_000_000).unwrap();
        assert!(prefix_conditional(&p, 2).unwrap().max_deviation_from_uniform() < 0.02);
    }

    #[test]
    fn gap_conditional_examples() {
        let g = gap_conditional(&periodic(2, &[0, 1], 100), 2).unwrap();
        assert_eq!(g.entry(0, 1), Some(1.0));
        assert_eq!(g.entry(0, 0), Some(0.0));
        assert_eq!(g.entry(1, 0), Some(1.0));
        let p = periodic(5, &[1, 2, 3], 300);
        let g = gap_conditional(&p, 2).unwrap();
        let c = prefix_conditional(&p, 2).unwrap();
        for first in 0..5u8 {
            for last in 0..5u8 {
                assert_eq!(g.entry(first, last), c.prob(&[first], last));
            }
        }
        let p = Prefix::read(&mut casual_source(b(5), 9), 1_000_000).unwrap();
        for n in 2..=10 {
            assert!(gap_conditional(&p, n).unwrap().max_deviation_from_uniform() < 0.02);
        }
    }

    #[test]
    fn weyl_examples() {
        let third = periodic(10, &[3], 1_012);
        assert!((weyl_sum(&third, 1, 1000, 12).unwrap() - 1.0).abs() < 1e-6);
        let half = Prefix::read(&mut Expansion::new(b(10), vec![5], vec![0]).unwrap().source(), 1_012).unwrap();
        assert!((weyl_sum(&half, 2, 1000, 12).unwrap() - 1.0).abs() < 1e-6);
        let p = Prefix::read(&mut casual_source(b(10), 1), 100_012).unwrap();
        assert!(weyl_sum(&p, 1, 100_000, 12).unwrap() < 0.02);
        assert!(weyl_sum(&p, -3, 100_000, 12).unwrap() < 0.02);
        assert_eq!(default_weyl_precision(b(10), 1), 12);
        assert_eq!(default_weyl_precision(b(10), 1000), 15);
        assert!(weyl_sum(&p, 0, 10, 12).is_err());
        assert!(weyl_sum(&third, 1, 1001, 12).is_err());
    }

    #[test]
    fn trajectory_examples() {
        let t = density_trajectory(&mut oscillating_example(b(2)), &[1], &[31, 63]).unwrap();
        assert_eq!(
            t,
            [Frequency { hits: 21, windows: 31 }, Frequency { hits: 21, windows: 63 }]
        );
        let mut src = casual_source(b(3), 4);
        let first = src.clone().next_digit().unwrap().unwrap();
        assert_eq!(density_trajectory(&mut src, &[first], &[1]).unwrap()[0].value(), 1.0);
        let t = density_trajectory(&mut casual_source(b(2), 8), &[0], &[10_000, 100_000, 1_000_000]).unwrap();
        assert!(t.iter().all(|f| (f.value() - 0.5).abs() < 0.01));
        assert!(density_trajectory(&mut casual_source(b(2), 8), &[0, 1], &[5, 5]).is_err());
    }

    #[test]
    fn oscillating_density_never_settles() {
        let checkpoints: Vec<u64> = (5..=15).map(|k| (1u64 << k) - 1).collect();
        let t = density_trajectory(&mut oscillating_example(b(2)), &[1], &checkpoints).unwrap();
        let vals: Vec<f64> = t.iter().map(|f| f.value()).collect();
        let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.25, "{vals:?}");
    }

    fn prefix_strategy() -> impl Strategy<Value = Prefix> {
        (2u32..=6).prop_flat_map(|base| {
            prop::collection::vec(0..base as u8, 12..300)
                .prop_map(move |d| Prefix::from_digits(Base::new(base).unwrap(), d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(p in prefix_strategy(), n in 1usize..4) {
            let t = NGramTable::from_prefix(&p, n).unwrap();
            let total: f64 = t.iter().map(|(s, _)| t.empirical_prob(&s).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn conditional_counts_are_consistent(p in prefix_strategy(), n in 2usize..5) {
            let c = prefix_conditional(&p, n).unwrap();
            let shorter = NGramTable::from_digits(p.base(), &p.digits()[..p.len() - 1], n - 1).unwrap();
            for (ctx, row) in &c.rows {
                prop_assert_eq!(row.counts.iter().sum::<u64>(), row.support);
                prop_assert_eq!(shorter.count(ctx).unwrap(), row.support);
            }
            prop_assert_eq!(c.rows.values().map(|r| r.support).sum::<u64>(), shorter.windows());
        }

        #[test]
        fn gap_rows_sum_to_one(p in prefix_strategy(), n in 2usize..8) {
            let g = gap_conditional(&p, n).unwrap();
            for f in p.base().digits() {
                if let Some(row) = g.row(f) {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn total_probability(p in prefix_strategy(), n in 2usize..6) {
            let m = p.len();
            let g = gap_conditional(&p, n).unwrap();
            let ones = NGramTable::from_prefix(&p, 1).unwrap();
            let tail = NGramTable::from_digits(p.base(), &p.digits()[n - 1..], 1).unwrap();
            for last in p.base().digits() {
                let total: f64 = p.base().digits()
                    .filter_map(|f| g.entry(f, last).map(|e| e * ones.empirical_prob(&[f]).unwrap()))
                    .sum();
                let direct = tail.empirical_prob(&[last]).unwrap();
                prop_assert!((total - direct).abs() <= 2.0 * n as f64 / m as f64);
            }
        }

        #[test]
        fn weyl_magnitude_bounded(p in prefix_strategy(), k in -50i64..50) {
            prop_assume!(k != 0 && p.len() > 8);
            let v = weyl_sum(&p, k, p.len() - 6, 6).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn block_with_one_length_is_simple(p in prefix_strategy()) {
            prop_assert_eq!(block_normal_dev(&p, 1).unwrap(), simply_normal_dev(&p).unwrap());
        }
    }
}
