//! Digit generators for the concrete numbers under study.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::digits::{char_digit, Base, DigitSource, Expansion, ExpansionSource};
use crate::error::{Error, Result};
use crate::exact::{expansion_to_rational, int_to_digits, rational_to_expansion, BigRational};

/// Yields the digits of `1, 2, 3, ...` written in base `b`, concatenated.
#[derive(Clone, Debug)]
pub struct Champernowne {
    base: Base,
    // current integer, most significant digit first
    counter: Vec<u8>,
    idx: usize,
    pos: u64,
}

pub fn champernowne(base: Base) -> Champernowne {
    Champernowne {
        base,
        counter: vec![1],
        idx: 0,
        pos: 0,
    }
}

impl Champernowne {
    fn increment(&mut self) {
        let top = self.base.max_digit();
        for d in self.counter.iter_mut().rev() {
            if *d < top {
                *d += 1;
                return;
            }
            *d = 0;
        }
        self.counter.insert(0, 1);
    }
}

impl DigitSource for Champernowne {
    fn base(&self) -> Base {
        self.base
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        if self.idx == self.counter.len() {
            self.increment();
            self.idx = 0;
        }
        let d = self.counter[self.idx];
        self.idx += 1;
        self.pos += 1;
        Ok(Some(d))
    }

    fn position(&self) -> u64 {
        self.pos
    }
}

/// Concatenated base-`b` representations of the Fibonacci numbers
/// `F_1 = 1, F_2 = 1, 2, 3, 5, 8, ...`.
#[derive(Clone, Debug)]
pub struct FibonacciConstant {
    base: Base,
    current: BigUint,
    next: BigUint,
    buf: Vec<u8>,
    idx: usize,
    pos: u64,
}

pub fn fibonacci_constant(base: Base) -> FibonacciConstant {
    FibonacciConstant {
        base,
        current: BigUint::one(),
        next: BigUint::one(),
        buf: Vec::new(),
        idx: 0,
        pos: 0,
    }
}

impl DigitSource for FibonacciConstant {
    fn base(&self) -> Base {
        self.base
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        if self.idx == self.buf.len() {
            self.buf = int_to_digits(&self.current, self.base);
            self.idx = 0;
            let sum = &self.current + &self.next;
            self.current = std::mem::replace(&mut self.next, sum);
        }
        let d = self.buf[self.idx];
        self.idx += 1;
        self.pos += 1;
        Ok(Some(d))
    }

    fn position(&self) -> u64 {
        self.pos
    }
}

/// Largest number of factors [`martin_partial`] evaluates.
pub const MARTIN_MAX_TERMS: u32 = 4;

/// Partial product `prod_{m=2}^{terms+1} (1 - 1/f(m))` of Martin's
/// absolutely abnormal number, with `f(2) = 4` and
/// `f(n) = n^(f(n-1)/(n-1))`.
pub fn martin_partial(terms: u32) -> Result<BigRational> {
    if !(1..=MARTIN_MAX_TERMS).contains(&terms) {
        return Err(Error::TermCap(terms));
    }
    let mut f = BigUint::from(4u32);
    let mut product = BigRational::one() - BigRational::new(BigInt::one(), BigInt::from(f.clone()));
    for n in 3..=terms + 1 {
        let (exp, rem) = f.div_rem(&BigUint::from(n - 1));
        assert!(rem == BigUint::default(), "f({}) / {} is not integral", n - 1, n - 1);
        let exp = exp.to_usize().expect("exponent fits for n <= 5");
        f = num_traits::pow(BigUint::from(n), exp);
        product *= BigRational::one() - BigRational::new(BigInt::one(), BigInt::from(f.clone()));
    }
    Ok(product)
}

/// Alternating blocks `1`, `00`, `1111`, `0^8`, ... of doubling length.
///
/// The running density of `1` swings between about 1/3 and 2/3 forever, so
/// no digit frequency converges.
#[derive(Clone, Debug)]
pub struct Oscillating {
    base: Base,
    block_len: u64,
    left: u64,
    digit: u8,
    pos: u64,
}

pub fn oscillating_example(base: Base) -> Oscillating {
    Oscillating {
        base,
        block_len: 1,
        left: 1,
        digit: 1,
        pos: 0,
    }
}

impl DigitSource for Oscillating {
    fn base(&self) -> Base {
        self.base
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        if self.left == 0 {
            self.block_len *= 2;
            self.left = self.block_len;
            self.digit ^= 1;
        }
        self.left -= 1;
        self.pos += 1;
        Ok(Some(self.digit))
    }

    fn position(&self) -> u64 {
        self.pos
    }
}

/// Independent uniform digits from a seeded generator.
///
/// The generator is xoshiro256++ seeded from the 64-bit seed through
/// SplitMix64. Each 64-bit output is split into 8 bytes, least significant
/// first; a byte `x` is rejected when `x >= 256 - (256 mod b)` and otherwise
/// yields the digit `x mod b`. The stream is a pure function of `(b, seed)`.
#[derive(Clone, Debug)]
pub struct Casual {
    base: Base,
    rng: Xoshiro256PlusPlus,
    word: u64,
    bytes_left: u32,
    zone: u32,
    pos: u64,
}

pub fn casual_source(base: Base, seed: u64) -> Casual {
    Casual {
        base,
        rng: Xoshiro256PlusPlus::seed_from_u64(seed),
        word: 0,
        bytes_left: 0,
        zone: 256 - 256 % base.radix(),
        pos: 0,
    }
}

impl DigitSource for Casual {
    fn base(&self) -> Base {
        self.base
    }

    #[inline]
    fn next_digit(&mut self) -> Result<Option<u8>> {
        loop {
            if self.bytes_left == 0 {
                self.word = self.rng.next_u64();
                self.bytes_left = 8;
            }
            let x = (self.word & 0xff) as u32;
            self.word >>= 8;
            self.bytes_left -= 1;
            if x < self.zone {
                self.pos += 1;
                return Ok(Some((x % self.base.radix()) as u8));
            }
        }
    }

    fn position(&self) -> u64 {
        self.pos
    }
}

/// Unbounded periodic source of `frac(|p/q|)`.
pub fn rational_source(p: i64, q: i64, base: Base) -> Result<ExpansionSource> {
    if q == 0 {
        return Err(Error::InvalidArgument("zero denominator".into()));
    }
    let x = BigRational::new(BigInt::from(p), BigInt::from(q));
    Ok(rational_to_expansion(&x, base).source())
}

const CHUNK: usize = 1 << 16;

/// Finite source over a digit file.
///
/// Format: an optional first line `# base=B`, then a payload of digit
/// characters `0-9a-z`. Whitespace is ignored. If the payload holds a `.`,
/// everything before it is an integer part and is skipped. Characters are
/// validated lazily as they are read.
#[derive(Debug)]
pub struct FileSource {
    path: PathBuf,
    base: Base,
    reader: BufReader<File>,
    buf: Vec<u8>,
    idx: usize,
    pos: u64,
    done: bool,
}

/// Parses `# base=B` (spaces allowed around the tokens).
fn parse_header(line: &str) -> Result<u32> {
    let body = line.trim().trim_start_matches('#').trim();
    body.strip_prefix("base")
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix('='))
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::BadHeader(line.trim_end().to_string()))
}

pub fn file_source(path: impl AsRef<Path>, base: Base) -> Result<FileSource> {
    let path = path.as_ref().to_path_buf();
    let io = |source| Error::Io {
        path: path.clone(),
        source,
    };
    let mut reader = BufReader::new(File::open(&path).map_err(io)?);

    let mut payload_start = 0u64;
    if reader.fill_buf().map_err(io)?.first() == Some(&b'#') {
        let mut line = String::new();
        payload_start = reader.read_line(&mut line).map_err(io)? as u64;
        let declared = parse_header(&line)?;
        if declared != base.radix() {
            return Err(Error::BaseMismatch {
                header: declared,
                requested: base.get(),
            });
        }
    }

    // An integer part is only known once the '.' has been seen, so look for
    // it before handing out any digit.
    let mut offset = payload_start;
    let mut chunk = vec![0u8; CHUNK];
    loop {
        let n = reader.read(&mut chunk).map_err(io)?;
        if n == 0 {
            break;
        }
        if let Some(k) = chunk[..n].iter().position(|&c| c == b'.') {
            payload_start = offset + k as u64 + 1;
            break;
        }
        offset += n as u64;
    }
    reader.seek(SeekFrom::Start(payload_start)).map_err(io)?;

    Ok(FileSource {
        path,
        base,
        reader,
        buf: Vec::new(),
        idx: 0,
        pos: 0,
        done: false,
    })
}

impl FileSource {
    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl DigitSource for FileSource {
    fn base(&self) -> Base {
        self.base
    }

    fn next_digit(&mut self) -> Result<Option<u8>> {
        loop {
            if self.idx == self.buf.len() {
                if self.done {
                    return Ok(None);
                }
                self.buf.resize(CHUNK, 0);
                let n = self.reader.read(&mut self.buf).map_err(|source| Error::Io {
                    path: self.path.clone(),
                    source,
                })?;
                self.buf.truncate(n);
                self.idx = 0;
                if n == 0 {
                    self.done = true;
                    return Ok(None);
                }
            }
            let c = self.buf[self.idx];
            self.idx += 1;
            if c.is_ascii_whitespace() {
                continue;
            }
            return match char_digit(c as char).filter(|&d| self.base.contains(d)) {
                Some(d) => {
                    self.pos += 1;
                    Ok(Some(d))
                }
                None => Err(Error::BadDigit {
                    position: self.pos + 1,
                    ch: c as char,
                }),
            };
        }
    }

    fn position(&self) -> u64 {
        self.pos
    }
}

/// The kind of number a [`SourceSpec`] describes, with its parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SourceKind {
    Champernowne,
    Fibonacci,
    Martin {
        terms: u32,
    },
    Oscillating,
    /// `seed: None` lets the caller supply a default seed.
    Casual {
        seed: Option<u64>,
    },
    Rational {
        p: i64,
        q: i64,
    },
    /// A purely or eventually periodic digit string, `pre(period)` or `period`.
    Periodic {
        preperiod: String,
        period: String,
    },
    File {
        path: PathBuf,
    },
}

/// A number and the base its digits are read in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    pub base: Base,
}

impl SourceKind {
    /// Parses the `kind[:params]` notation, e.g. `rational:19/62`,
    /// `casual:seed=7`, `martin:terms=3`, `periodic:5(0)`, `file:pi.txt`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidArgument(format!("source `{text}`: {why}"));
        let (kind, params) = match text.split_once(':') {
            Some((k, p)) => (k.trim(), Some(p.trim())),
            None => (text.trim(), None),
        };
        // `key=value` or bare `value`
        let value = |key: &str| params.map(|p| p.strip_prefix(key).and_then(|r| r.strip_prefix('=')).unwrap_or(p));
        let no_params = |k: SourceKind| match params {
            None | Some("") => Ok(k),
            Some(_) => Err(bad("takes no parameters")),
        };
        match kind {
            "champernowne" => no_params(SourceKind::Champernowne),
            "fibonacci" => no_params(SourceKind::Fibonacci),
            "oscillating" => no_params(SourceKind::Oscillating),
            "martin" => {
                let terms = value("terms")
                    .ok_or_else(|| bad("expected martin:terms=N"))?
                    .parse()
                    .map_err(|_| bad("terms must be an integer"))?;
                Ok(SourceKind::Martin { terms })
            }
            "casual" => {
                let seed = match value("seed") {
                    None | Some("") => None,
                    Some(s) => Some(s.parse().map_err(|_| bad("seed must be a 64-bit integer"))?),
                };
                Ok(SourceKind::Casual { seed })
            }
            "rational" => {
                let p = params.ok_or_else(|| bad("expected rational:P/Q"))?;
                let (p, q) = parse_fraction(p).ok_or_else(|| bad("expected P/Q"))?;
                Ok(SourceKind::Rational { p, q })
            }
            "periodic" => {
                let p = params.ok_or_else(|| bad("expected periodic:DIGITS or periodic:PRE(PERIOD)"))?;
                let (pre, per) = match p.split_once('(') {
                    Some((pre, rest)) => (pre, rest.strip_suffix(')').ok_or_else(|| bad("unclosed '('"))?),
                    None => ("", p),
                };
                if per.is_empty() {
                    return Err(bad("empty period"));
                }
                Ok(SourceKind::Periodic {
                    preperiod: pre.to_string(),
                    period: per.to_string(),
                })
            }
            "file" => {
                let p = params
                    .filter(|p| !p.is_empty())
                    .ok_or_else(|| bad("expected file:PATH"))?;
                Ok(SourceKind::File { path: PathBuf::from(p) })
            }
            _ => Err(bad("unknown kind")),
        }
    }
}

/// Parses `P/Q` (or a bare integer) into a numerator/denominator pair.
pub fn parse_fraction(text: &str) -> Option<(i64, i64)> {
    let (p, q) = match text.split_once('/') {
        Some((p, q)) => (p.trim().parse().ok()?, q.trim().parse().ok()?),
        None => (text.trim().parse().ok()?, 1),
    };
    (q != 0).then_some((p, q))
}

fn parse_digit_string(text: &str, base: Base) -> Result<Vec<u8>> {
    text.chars()
        .enumerate()
        .map(|(k, ch)| {
            char_digit(ch).filter(|&d| base.contains(d)).ok_or(Error::BadDigit {
                position: k as u64 + 1,
                ch,
            })
        })
        .collect()
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceKind::Champernowne => f.write_str("champernowne"),
            SourceKind::Fibonacci => f.write_str("fibonacci"),
            SourceKind::Oscillating => f.write_str("oscillating"),
            SourceKind::Martin { terms } => write!(f, "martin:terms={terms}"),
            SourceKind::Casual { seed: Some(s) } => write!(f, "casual:seed={s}"),
            SourceKind::Casual { seed: None } => f.write_str("casual"),
            SourceKind::Rational { p, q } => write!(f, "rational:{p}/{q}"),
            SourceKind::Periodic { preperiod, period } if preperiod.is_empty() => {
                write!(f, "periodic:{period}")
            }
            SourceKind::Periodic { preperiod, period } => write!(f, "periodic:{preperiod}({period})"),
            SourceKind::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SourceKind::parse(s)
    }
}

impl SourceSpec {
    pub fn new(kind: SourceKind, base: Base) -> Self {
        SourceSpec { kind, base }
    }

    pub fn parse(text: &str, base: Base) -> Result<Self> {
        Ok(SourceSpec::new(SourceKind::parse(text)?, base))
    }

    /// Fills in a missing casual seed.
    pub fn with_default_seed(mut self, seed: u64) -> Self {
        if let SourceKind::Casual { seed: s @ None } = &mut self.kind {
            *s = Some(seed);
        }
        self
    }

    /// Exact expansion for the kinds that denote a rational number.
    pub fn expansion(&self) -> Result<Option<Expansion>> {
        Ok(match &self.kind {
            SourceKind::Rational { p, q } => {
                if *q == 0 {
                    return Err(Error::InvalidArgument("zero denominator".into()));
                }
                let x = BigRational::new(BigInt::from(*p), BigInt::from(*q));
                Some(rational_to_expansion(&x, self.base))
            }
            SourceKind::Martin { terms } => Some(rational_to_expansion(&martin_partial(*terms)?, self.base)),
            SourceKind::Periodic { preperiod, period } => Some(Expansion::new(
                self.base,
                parse_digit_string(preperiod, self.base)?,
                parse_digit_string(period, self.base)?,
            )?),
            _ => None,
        })
    }

    /// Exact value for the rational kinds.
    pub fn exact_value(&self) -> Result<Option<BigRational>> {
        Ok(self.expansion()?.map(|e| expansion_to_rational(&e)))
    }

    pub fn open(&self) -> Result<Box<dyn DigitSource + Send>> {
        let base = self.base;
        Ok(match &self.kind {
            SourceKind::Champernowne => Box::new(champernowne(base)),
            SourceKind::Fibonacci => Box::new(fibonacci_constant(base)),
            SourceKind::Oscillating => Box::new(oscillating_example(base)),
            SourceKind::Casual { seed } => Box::new(casual_source(base, seed.unwrap_or(0))),
            SourceKind::File { path } => Box::new(file_source(path, base)?),
            SourceKind::Rational { .. } | SourceKind::Martin { .. } | SourceKind::Periodic { .. } => {
                Box::new(self.expansion()?.expect("rational kind").source())
            }
        })
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (base {})", self.kind, self.base)
    }
}
