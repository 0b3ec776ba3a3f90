//! Line-oriented text form of a detection run, written by `detect` and
//! `verify` and read back by later commands.
//!
//! ```text
//! ditsmark-report 1
//! lambda 16
//! key 3f2a9c0d11e4b7a8
//! payload_len 2400
//! epsilon 1
//! detections 2
//! 0 44 1 45 0.9333333333333333 3.2e-8
//! 45 90 0 46 0.08695652173913043 1.9e-8
//! links 0
//! verdict true
//! classification clean-prefix
//! coverage 1
//! warning no-complete-link
//! ```
//!
//! Detection lines are `start end signal n score pvalue` with an inclusive
//! `end`. The `links` section and everything after it are present only when
//! the report carries a verification.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::verify::{Classification, LinkCheck, VerificationReport, VerifyWarning};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::key::WatermarkSignal;
use crate::singlebit::BlockDetection;

const MAGIC: &str = "ditsmark-report 1";

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub lambda: u32,
    pub key_fingerprint: String,
    pub payload_len: usize,
    pub epsilon: f64,
    pub detections: Vec<BlockDetection>,
    pub verification: Option<VerificationReport>,
}

impl ChainReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{MAGIC}").unwrap();
        writeln!(s, "lambda {}", self.lambda).unwrap();
        writeln!(s, "key {}", self.key_fingerprint).unwrap();
        writeln!(s, "payload_len {}", self.payload_len).unwrap();
        writeln!(s, "epsilon {}", self.epsilon).unwrap();
        writeln!(s, "detections {}", self.detections.len()).unwrap();
        for d in &self.detections {
            let end = d.end().map_or("-".to_string(), |e| e.to_string());
            writeln!(
                s,
                "{} {} {} {} {} {:e}",
                d.start,
                end,
                d.signal.as_char(),
                d.n,
                d.score,
                d.pvalue_bound
            )
            .unwrap();
        }
        if let Some(v) = &self.verification {
            writeln!(s, "links {}", v.per_link.len()).unwrap();
            for c in &v.per_link {
                let status = if c.matched { "match" } else { "mismatch" };
                writeln!(s, "{} {} {} {status}", c.index, c.expected, c.recovered).unwrap();
            }
            writeln!(s, "verdict {}", v.verdict).unwrap();
            writeln!(s, "classification {}", v.classification).unwrap();
            writeln!(s, "coverage {}", v.coverage).unwrap();
            for w in &v.warnings {
                writeln!(s, "warning {w}").unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of report, wanted {what}")))
        };

        let (line, magic) = next("header")?;
        if magic != MAGIC {
            return Err(Error::parse(line, format!("not a report header: {magic:?}")));
        }
        let lambda = field(next("lambda")?, "lambda")?;
        let (line, key) = next("key")?;
        let key_fingerprint = key
            .strip_prefix("key ")
            .ok_or_else(|| Error::parse(line, "expected key"))?
            .trim()
            .to_string();
        let payload_len = field(next("payload_len")?, "payload_len")?;
        let epsilon = field(next("epsilon")?, "epsilon")?;
        let count: usize = field(next("detections")?, "detections")?;

        let mut detections = Vec::with_capacity(count);
        for _ in 0..count {
            detections.push(parse_detection(next("detection line")?)?);
        }

        let verification = match next("links") {
            Err(_) => None,
            Ok(entry) => {
                let links: usize = field(entry, "links")?;
                let mut per_link = Vec::with_capacity(links);
                for _ in 0..links {
                    per_link.push(parse_link(next("link line")?)?);
                }
                let verdict = field(next("verdict")?, "verdict")?;
                let (line, c) = next("classification")?;
                let classification: Classification = value(line, c, "classification")?
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad classification {c:?}")))?;
                let coverage = field(next("coverage")?, "coverage")?;
                let mut warnings = Vec::new();
                while let Ok((line, w)) = next("warning") {
                    let w: VerifyWarning = value(line, w, "warning")?
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad warning {w:?}")))?;
                    warnings.push(w);
                }
                Some(VerificationReport {
                    verdict,
                    per_link,
                    classification,
                    coverage,
                    warnings,
                })
            }
        };

        Ok(ChainReport {
            lambda,
            key_fingerprint,
            payload_len,
            epsilon,
            detections,
            verification,
        })
    }
}

impl fmt::Display for ChainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for ChainReport {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChainReport::parse(s)
    }
}

fn value<'a>(line: usize, text: &'a str, name: &str) -> Result<&'a str> {
    text.strip_prefix(name)
        .and_then(|rest| rest.strip_prefix(' '))
        .map(str::trim)
        .ok_or_else(|| Error::parse(line, format!("expected {name}")))
}

fn field<T: FromStr>((line, text): (usize, &str), name: &str) -> Result<T> {
    let v = value(line, text, name)?;
    v.parse()
        .map_err(|_| Error::parse(line, format!("bad {name} value {v:?}")))
}

fn num<T: FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} {tok:?}")))
}

fn parse_detection((line, text): (usize, &str)) -> Result<BlockDetection> {
    let mut t = text.split_whitespace();
    let start: usize = num(line, t.next(), "start")?;
    let end = t.next().ok_or_else(|| Error::parse(line, "missing end"))?;
    let signal = t
        .next()
        .and_then(|s| {
            let mut c = s.chars();
            match (c.next(), c.next()) {
                (Some(ch), None) => WatermarkSignal::from_char(ch),
                _ => None,
            }
        })
        .ok_or_else(|| Error::parse(line, "bad signal"))?;
    let n: usize = num(line, t.next(), "n")?;
    let score: f64 = num(line, t.next(), "score")?;
    let pvalue_bound: f64 = num(line, t.next(), "pvalue")?;
    if t.next().is_some() {
        return Err(Error::parse(line, "trailing fields"));
    }
    let d = BlockDetection {
        signal,
        start,
        n,
        score,
        pvalue_bound,
    };
    let expected_end = d.end().map_or("-".to_string(), |e| e.to_string());
    if end != expected_end {
        return Err(Error::parse(line, format!("end {end} inconsistent with start {start} and n {n}")));
    }
    Ok(d)
}

fn parse_link((line, text): (usize, &str)) -> Result<LinkCheck> {
    let mut t = text.split_whitespace();
    let index = num(line, t.next(), "link index")?;
    let expected: BitString = num(line, t.next(), "expected bits")?;
    let recovered: BitString = num(line, t.next(), "recovered bits")?;
    let matched = match t.next() {
        Some("match") => true,
        Some("mismatch") => false,
        _ => return Err(Error::parse(line, "expected match or mismatch")),
    };
    Ok(LinkCheck {
        index,
        expected,
        recovered,
        matched,
    })
}
