//! Output files. Every file carries the config hash; CSV floats are written
//! with 17 significant digits so that reruns diff cleanly.

use crate::config::RunConfig;
use crate::error::Result;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

pub const ARTIFACT: &str = "zpinch";

/// Wrapper written around every JSON payload. Wall-clock timestamps are left
/// out on purpose: reruns must be byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_hash: String,
    pub config: &'a RunConfig,
    pub payload: &'a T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, config: &'a RunConfig, payload: &'a T) -> Self {
        Self { artifact: ARTIFACT, version: env!("CARGO_PKG_VERSION"), command, config_hash: config.hash(), config, payload }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("payload serializes");
        s.push('\n');
        s
    }
}

pub fn write_json<T: Serialize>(path: &Path, command: &str, config: &RunConfig, payload: &T) -> Result<()> {
    std::fs::write(path, Envelope::new(command, config, payload).to_json())?;
    Ok(())
}

/// `{:.16e}`, with NaN and infinities spelled out.
pub fn float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// CSV text: a `# config_hash=...` comment, the header, then the rows.
pub fn csv(config_hash: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = format!("# config_hash={config_hash}\n{}\n", header.join(","));
    for row in rows {
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn write_csv(path: &Path, config: &RunConfig, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    std::fs::write(path, csv(&config.hash(), header, rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(float(0.1), "1.0000000000000001e-1");
        assert_eq!(float(f64::NAN), "NaN");
        let c = csv("abc", &["a", "b"], vec![vec![float(1.0), float(-2.5)]]);
        assert_eq!(c, "# config_hash=abc\na,b\n1.0000000000000000e0,-2.5000000000000000e0\n");
    }
}
