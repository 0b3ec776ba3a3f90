//! `key=value` line format used by the model, attack and scheme config
//! files. Blank lines and `#` comments are skipped; commas also separate
//! entries so a whole config fits on a command line.

use crate::error::{Error, Result};

pub(crate) struct KvEntry<'a> {
    pub line: usize,
    pub key: &'a str,
    pub value: &'a str,
}

pub(crate) fn parse(text: &str) -> Result<Vec<KvEntry<'_>>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for item in line.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::parse(n + 1, format!("expected key=value, got {item:?}")))?;
            out.push(KvEntry {
                line: n + 1,
                key: key.trim(),
                value: value.trim(),
            });
        }
    }
    Ok(out)
}

impl KvEntry<'_> {
    pub fn parse<T: std::str::FromStr>(&self) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.value
            .parse()
            .map_err(|e| Error::parse(self.line, format!("{}: {e}", self.key)))
    }
}
