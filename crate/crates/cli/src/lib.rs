//! Commands behind the `normdigits` binary.
//!
//! Each command returns a value that the binary renders as a human table,
//! JSON or CSV. Errors map to exit code 2; `pseudonormal` exits 1 on a
//! well-formed FAIL.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use normdigits::delta::{
    delta_scheme, delta_scheme_exact, pseudonormal_test, DeltaScheme, PseudonormalReport, SchemeMode, Tolerance,
};
use normdigits::digits::{digit_char, MAX_BASE};
use normdigits::exact::{ratio, rational_to_expansion};
use normdigits::ngram::{
    block_normal_dev, default_weyl_precision, gap_conditional, prefix_conditional, simply_normal_dev, weyl_sum,
    ConditionalMatrix, Deviation, Prefix,
};
use normdigits::sources::{parse_fraction, SourceKind, SourceSpec};
use normdigits::{Base, DigitSource, Error};

/// Prefix length used when `--digits` is not given and the source is endless.
pub const DEFAULT_DIGITS: usize = 100_000;
/// Digits per line in generated digit files.
pub const LINE_WIDTH: usize = 100;

#[derive(Parser, Debug)]
#[command(name = "normdigits", version, about = "Digit statistics and swap-difference schemes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the first digits of a source to a digit file.
    Gen {
        #[command(flatten)]
        source: SourceArgs,
        /// Output file; standard output if omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Frequency, conditional, Weyl and scheme statistics of a prefix.
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
        /// Longest block length for the block-normal deviation and
        /// conditional estimates.
        #[arg(long, default_value_t = 4)]
        ngram_max: usize,
        /// Frequency `k` of a Weyl sum; repeat for several.
        #[arg(long = "weyl-k", allow_negative_numbers = true)]
        weyl_k: Vec<i64>,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// The Δ-scheme table.
    Scheme {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Test the Δ-scheme against the rows of a normal number.
    Pseudonormal {
        #[command(flatten)]
        source: SourceArgs,
        /// Max-norm tolerance per row; by default 1e-9 for exact rows and
        /// max(0.01, 5 sqrt(b / 4n)) for rows over n streamed digits.
        #[arg(long)]
        tolerance: Option<f64>,
        #[command(flatten)]
        format: FormatArgs,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    /// Source as `kind[:params]`: champernowne, fibonacci, oscillating,
    /// martin:terms=N, casual[:seed=S], rational:P/Q, periodic:PRE(PERIOD),
    /// file:PATH.
    pub spec: Option<String>,
    /// Exact rational `P/Q`; same as the spec `rational:P/Q`.
    #[arg(long, value_name = "P/Q", conflicts_with = "spec")]
    pub exact: Option<String>,
    /// Base of the digit expansion, 2..=36.
    #[arg(short, long, default_value_t = 10)]
    pub base: u32,
    /// Prefix length; files default to all their digits.
    #[arg(short = 'm', long)]
    pub digits: Option<usize>,
    /// Seed for `casual` when the spec has none.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct FormatArgs {
    /// Print JSON instead of a table.
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    /// Print CSV instead of a table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Human,
    Json,
    Csv,
}

impl From<FormatArgs> for Format {
    fn from(f: FormatArgs) -> Self {
        match (f.json, f.csv) {
            (true, _) => Format::Json,
            (_, true) => Format::Csv,
            _ => Format::Human,
        }
    }
}

impl SourceArgs {
    pub fn to_spec(&self) -> Result<SourceSpec> {
        if self.base < 2 || self.base > MAX_BASE {
            bail!("base must lie in 2..={MAX_BASE}, got {}", self.base);
        }
        let base = Base::new(self.base)?;
        let kind = match (&self.spec, &self.exact) {
            (_, Some(x)) => {
                let (p, q) = parse_fraction(x).with_context(|| format!("--exact expects P/Q, got `{x}`"))?;
                SourceKind::Rational { p, q }
            }
            (Some(s), None) => SourceKind::parse(s)?,
            (None, None) => bail!("missing source spec (or --exact P/Q)"),
        };
        Ok(SourceSpec::new(kind, base).with_default_seed(self.seed))
    }
}

/// Reads `digits` digits, or the whole file for file sources when `None`.
pub fn read_prefix(spec: &SourceSpec, digits: Option<usize>) -> Result<Prefix> {
    let mut src = spec.open()?;
    match (digits, &spec.kind) {
        (Some(m), _) => Ok(Prefix::read(&mut src, m)?),
        (None, SourceKind::File { .. }) => {
            let mut all = Vec::new();
            while let Some(d) = src.next_digit()? {
                all.push(d);
            }
            Ok(Prefix::from_digits(spec.base, all)?)
        }
        (None, _) => Ok(Prefix::read(&mut src, DEFAULT_DIGITS)?),
    }
}

/// Digit-file text for the first `count` digits of `spec`.
pub fn cmd_gen(spec: &SourceSpec, count: usize) -> Result<String> {
    let mut src = spec.open()?;
    let digits = src.take_prefix(count)?;
    let mut text = format!("# base={}\n", spec.base);
    for line in digits.chunks(LINE_WIDTH) {
        text.extend(line.iter().map(|&d| digit_char(d)));
        text.push('\n');
    }
    Ok(text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSummary {
    pub n: usize,
    /// Largest `|P(next | n-1 digits before) - 1/b|` over supported contexts.
    pub prefix_max_deviation: f64,
    /// `P(s_n | s_1)` for windows of length `n`.
    pub gap: ConditionalMatrix,
    pub gap_max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylEntry {
    pub k: i64,
    pub terms: usize,
    pub precision: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub source: SourceSpec,
    pub base: Base,
    pub prefix_len: u64,
    pub simple: Deviation,
    pub block: Deviation,
    pub ngram_max: usize,
    pub conditionals: Vec<ConditionalSummary>,
    pub weyl: Vec<WeylEntry>,
    pub scheme: DeltaScheme,
    /// Absent when every scheme row is empty.
    pub pseudonormal: Option<PseudonormalReport>,
    pub elapsed_ms: u64,
}

/// Scheme of `spec`: exact for rational kinds, otherwise from a prefix.
pub fn cmd_scheme(spec: &SourceSpec, digits: Option<usize>) -> Result<DeltaScheme> {
    match spec.expansion()? {
        Some(e) => Ok(delta_scheme_exact(&e)?),
        None => Ok(delta_scheme(&read_prefix(spec, digits)?)?),
    }
}

pub fn cmd_analyze(
    spec: &SourceSpec,
    digits: Option<usize>,
    ngram_max: usize,
    weyl_ks: &[i64],
) -> Result<AnalysisReport> {
    let start = Instant::now();
    let prefix = read_prefix(spec, digits)?;
    let m = prefix.len();
    if ngram_max == 0 || ngram_max > m {
        bail!("--ngram-max must lie in 1..={m}");
    }
    let simple = simply_normal_dev(&prefix)?;
    let block = block_normal_dev(&prefix, ngram_max)?;
    let conditionals = (2..=ngram_max)
        .map(|n| {
            let gap = gap_conditional(&prefix, n)?;
            Ok(ConditionalSummary {
                n,
                prefix_max_deviation: prefix_conditional(&prefix, n)?.max_deviation_from_uniform(),
                gap_max_deviation: gap.max_deviation_from_uniform(),
                gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ks = if weyl_ks.is_empty() { &[1][..] } else { weyl_ks };
    let weyl = ks
        .iter()
        .map(|&k| {
            let precision = default_weyl_precision(spec.base, k);
            if m <= precision {
                bail!("Weyl sum for k = {k} needs more than {precision} digits");
            }
            let terms = m - precision;
            Ok(WeylEntry {
                k,
                terms,
                precision,
                magnitude: weyl_sum(&prefix, k, terms, precision)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scheme = match spec.expansion()? {
        Some(e) => delta_scheme_exact(&e)?,
        None => delta_scheme(&prefix)?,
    };
    let pseudonormal = match pseudonormal_test(&scheme, Tolerance::Default) {
        Ok(r) => Some(r),
        Err(Error::EmptyScheme) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(AnalysisReport {
        source: spec.clone(),
        base: spec.base,
        prefix_len: m as u64,
        simple,
        block,
        ngram_max,
        conditionals,
        weyl,
        scheme,
        pseudonormal,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

pub fn cmd_pseudonormal(
    spec: &SourceSpec,
    digits: Option<usize>,
    tolerance: Option<f64>,
) -> Result<PseudonormalReport> {
    let tolerance = match tolerance {
        Some(eps) if eps.is_nan() || eps < 0.0 => bail!("tolerance must be a non-negative number"),
        Some(eps) => Tolerance::Fixed(eps),
        None => Tolerance::Default,
    };
    Ok(pseudonormal_test(&cmd_scheme(spec, digits)?, tolerance)?)
}

/// `n/d` together with its base-10 expansion, e.g. `2/3 = 0.(6)`.
pub fn exact_cell(n: u64, d: u64) -> String {
    if n == 0 {
        return "0".into();
    }
    if n == d {
        return "1".into();
    }
    let e = rational_to_expansion(&ratio(n as i64, d as i64), Base::new(10).expect("base 10"));
    if e.period() == [0] {
        let pre: String = e.preperiod().iter().map(|&x| digit_char(x)).collect();
        format!("{n}/{d} = 0.{pre}")
    } else {
        format!("{n}/{d} = {e}")
    }
}

fn scheme_cells(scheme: &DeltaScheme) -> Vec<Vec<String>> {
    scheme
        .rows
        .iter()
        .map(|row| {
            (0..scheme.base.get())
                .map(|d| match scheme.mode {
                    SchemeMode::Exact => {
                        let f = row.fraction(d);
                        exact_cell(*f.numer(), *f.denom())
                    }
                    SchemeMode::Streaming => format!("{:.5}", row.prob(d)),
                })
                .collect()
        })
        .collect()
}

pub fn render_scheme(scheme: &DeltaScheme, format: Format) -> Result<String> {
    let cells = scheme_cells(scheme);
    let b = scheme.base.get();
    let mut out = String::new();
    match format {
        Format::Json => out = serde_json::to_string_pretty(scheme)? + "\n",
        Format::Csv => {
            out.push_str("i,j,delta,mode,digits");
            (0..b).for_each(|d| write!(out, ",p{}", digit_char(d)).unwrap());
            out.push('\n');
            for (row, cells) in scheme.rows.iter().zip(&cells) {
                write!(out, "{},{},{},{},{}", row.i, row.j, row.delta(), scheme.mode, row.total)?;
                for c in cells {
                    // exact mode: fraction only
                    write!(out, ",{}", c.split(' ').next().unwrap())?;
                }
                out.push('\n');
            }
        }
        Format::Human => {
            write!(out, "Δ-scheme, base {b}, {} mode", scheme.mode)?;
            match scheme.prefix_len {
                Some(m) => writeln!(out, ", {m} digits read")?,
                None => writeln!(out, ", one period of |Δ| per row")?,
            }
            if scheme.rows.is_empty() {
                writeln!(out, "(no rows: no pair of digits occurs)")?;
                return Ok(out);
            }
            let width = cells
                .iter()
                .flatten()
                .map(|c| c.chars().count())
                .max()
                .unwrap_or(1)
                .max(1);
            write!(out, "{:>7}  {:>8}", "(i,j)", "digits")?;
            (0..b).for_each(|d| write!(out, "  {:>width$}", digit_char(d)).unwrap());
            out.push('\n');
            for (row, cells) in scheme.rows.iter().zip(&cells) {
                write!(
                    out,
                    "{:>7}  {:>8}",
                    format!("({},{})", digit_char(row.i), digit_char(row.j)),
                    row.total
                )?;
                for c in cells {
                    write!(out, "  {c:>width$}")?;
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn render_pseudonormal(report: &PseudonormalReport, format: Format) -> Result<String> {
    let mut out = String::new();
    match format {
        Format::Json => out = serde_json::to_string_pretty(report)? + "\n",
        Format::Csv => {
            out.push_str("i,j,delta,deviation,worst_digit,tolerance,pass\n");
            for r in &report.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.i, r.j, r.delta, r.deviation, r.worst_digit, r.tolerance, r.pass
                )?;
            }
        }
        Format::Human => {
            writeln!(
                out,
                "{} (base {}, {} mode, {} rows)",
                if report.pass { "PASS" } else { "FAIL" },
                report.base,
                report.mode,
                report.rows.len()
            )?;
            writeln!(
                out,
                "{:>7}  {:>2}  {:>10}  {:>5}  {:>10}  verdict",
                "(i,j)", "δ", "deviation", "digit", "tolerance"
            )?;
            for r in &report.rows {
                writeln!(
                    out,
                    "{:>7}  {:>2}  {:>10.5}  {:>5}  {:>10.3e}  {}",
                    format!("({},{})", digit_char(r.i), digit_char(r.j)),
                    r.delta,
                    r.deviation,
                    digit_char(r.worst_digit),
                    r.tolerance,
                    if r.pass { "ok" } else { "FAIL" }
                )?;
            }
            let disagree: Vec<_> = report.same_delta.iter().filter(|c| !c.agree).collect();
            if !disagree.is_empty() {
                writeln!(out, "rows with equal δ that disagree:")?;
                for c in disagree {
                    writeln!(
                        out,
                        "  ({},{}) vs ({},{}): {:.5} at digit {}",
                        c.first.0,
                        c.first.1,
                        c.second.0,
                        c.second.1,
                        c.difference,
                        digit_char(c.worst_digit)
                    )?;
                }
            }
        }
    }
    Ok(out)
}

fn digit_string(s: &[u8]) -> String {
    s.iter().map(|&d| digit_char(d)).collect()
}

pub fn render_analysis(report: &AnalysisReport, format: Format) -> Result<String> {
    let mut out = String::new();
    match format {
        Format::Json => out = serde_json::to_string_pretty(report)? + "\n",
        Format::Csv => {
            out.push_str("statistic,n,value,detail\n");
            let s = &report.simple;
            writeln!(out, "simple_deviation,1,{},{}", s.value, digit_string(&s.string))?;
            let s = &report.block;
            writeln!(out, "block_deviation,{},{},{}", s.n, s.value, digit_string(&s.string))?;
            for c in &report.conditionals {
                writeln!(out, "prefix_conditional_deviation,{},{},", c.n, c.prefix_max_deviation)?;
                writeln!(out, "gap_conditional_deviation,{},{},", c.n, c.gap_max_deviation)?;
            }
            for w in &report.weyl {
                writeln!(out, "weyl_magnitude,{},{},k={}", w.terms, w.magnitude, w.k)?;
            }
            if let Some(p) = &report.pseudonormal {
                for r in &p.rows {
                    writeln!(
                        out,
                        "scheme_row_deviation,{},{},({};{})",
                        r.delta, r.deviation, r.i, r.j
                    )?;
                }
                writeln!(out, "pseudonormal,,{},{}", p.pass, p.mode)?;
            }
        }
        Format::Human => {
            writeln!(out, "source: {}", report.source)?;
            writeln!(out, "prefix: {} digits", report.prefix_len)?;
            let s = &report.simple;
            writeln!(
                out,
                "simple-normal deviation: {:.6} (digit {}: {:.6} vs {:.6})",
                s.value,
                digit_string(&s.string),
                s.observed,
                s.expected
            )?;
            let s = &report.block;
            writeln!(
                out,
                "block-normal deviation (n <= {}): {:.6} (string {}: {:.6} vs {:.6})",
                report.ngram_max,
                s.value,
                digit_string(&s.string),
                s.observed,
                s.expected
            )?;
            for c in &report.conditionals {
                writeln!(
                    out,
                    "conditional n={}: next-digit deviation {:.6}, gap deviation {:.6}",
                    c.n, c.prefix_max_deviation, c.gap_max_deviation
                )?;
            }
            for w in &report.weyl {
                writeln!(out, "Weyl |S| k={} over {} terms: {:.6}", w.k, w.terms, w.magnitude)?;
            }
            out.push('\n');
            out.push_str(&render_scheme(&report.scheme, Format::Human)?);
            if let Some(p) = &report.pseudonormal {
                out.push('\n');
                out.push_str(&render_pseudonormal(p, Format::Human)?);
            }
            writeln!(out, "\nelapsed: {} ms", report.elapsed_ms)?;
        }
    }
    Ok(out)
}

/// Runs one command, writing its output to `out`; returns the exit code for
/// a successful run (0, or 1 for a pseudonormality FAIL).
pub fn run(cli: Cli, out: &mut dyn std::io::Write) -> Result<i32> {
    match cli.command {
        Command::Gen { source, out: path } => {
            let spec = source.to_spec()?;
            let text = cmd_gen(&spec, source.digits.unwrap_or(DEFAULT_DIGITS))?;
            match path {
                Some(p) => write_file(&p, &text)?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(0)
        }
        Command::Analyze {
            source,
            ngram_max,
            weyl_k,
            format,
        } => {
            let report = cmd_analyze(&source.to_spec()?, source.digits, ngram_max, &weyl_k)?;
            out.write_all(render_analysis(&report, format.into())?.as_bytes())?;
            Ok(0)
        }
        Command::Scheme { source, format } => {
            let scheme = cmd_scheme(&source.to_spec()?, source.digits)?;
            out.write_all(render_scheme(&scheme, format.into())?.as_bytes())?;
            Ok(0)
        }
        Command::Pseudonormal {
            source,
            tolerance,
            format,
        } => {
            let report = cmd_pseudonormal(&source.to_spec()?, source.digits, tolerance)?;
            out.write_all(render_pseudonormal(&report, format.into())?.as_bytes())?;
            Ok(if report.pass { 0 } else { 1 })
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    f.write_all(text.as_bytes())
        .with_context(|| format!("cannot write {}", path.display()))
}
