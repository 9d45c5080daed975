//! Data files: CSV with a `#` metadata block, and JSON reports.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, so every value round-trips.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        // keeps -0 and 0 identical
        "0".into()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub program: &'static str,
    pub version: &'static str,
    pub command: String,
    pub tau: String,
    pub entries: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(command: &str, tau: String) -> Self {
        Self {
            program: "sgi",
            version: VERSION,
            command: command.into(),
            tau,
            entries: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<String>) -> Self {
        self.entries.insert(key.into(), value.into());
        self
    }
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_csv(out: Option<&Path>, meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = sink(out)?;
    writeln!(w, "# {} {} {}", meta.program, meta.version, meta.command)?;
    writeln!(w, "# tau: {}", meta.tau)?;
    for (k, v) in &meta.entries {
        writeln!(w, "# {k}: {v}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Wrapped<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(out: Option<&Path>, meta: &Meta, body: &T) -> Result<()> {
    let mut w = sink(out)?;
    serde_json::to_writer_pretty(&mut w, &Wrapped { meta, body })?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1.0), "1.0000000000000000e0");
    }
}
