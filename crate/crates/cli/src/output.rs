//! Data sinks: CSV (shortest round-trip floats, RFC-4180 lines) or versioned JSON.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use contract_lab::welfare::Versioned;
use serde::Serialize;

use crate::config::Format;

#[derive(Debug, Clone)]
pub struct Sink {
    pub format: Format,
    /// `None` writes to stdout.
    pub path: Option<PathBuf>,
}

#[derive(Serialize)]
struct Table<'a, T, E> {
    command: &'a str,
    rows: &'a [T],
    #[serde(flatten)]
    extra: E,
}

/// Unit extras serialize to nothing under `flatten`.
#[derive(Serialize)]
pub struct NoExtra {}

impl Sink {
    fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.path {
            Some(p) => Box::new(BufWriter::new(
                File::create(p).with_context(|| format!("cannot create output file {}", p.display()))?,
            )),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    pub fn emit<T: Serialize>(&self, command: &str, rows: &[T]) -> Result<()> {
        self.emit_with(command, rows, NoExtra {})
    }

    /// Writes `rows`; `extra` fields only appear in JSON output.
    pub fn emit_with<T: Serialize, E: Serialize>(&self, command: &str, rows: &[T], extra: E) -> Result<()> {
        let mut out = self.open()?;
        match self.format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new()
                    .terminator(csv::Terminator::CRLF)
                    .from_writer(&mut out);
                for row in rows {
                    w.serialize(row).context("cannot serialize CSV row")?;
                }
                w.flush()?;
            }
            Format::Json => {
                let doc = Versioned::new(Table { command, rows, extra });
                serde_json::to_writer_pretty(&mut out, &doc).context("cannot serialize JSON")?;
                out.write_all(b"\n")?;
            }
        }
        out.flush().context("cannot flush output")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: Option<f64>,
    }

    #[test]
    fn csv_uses_shortest_round_trip() {
        let mut buf = Vec::new();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::CRLF)
                .from_writer(&mut buf);
            w.serialize(Row { x: 0.1 + 0.2, y: None }).unwrap();
            w.serialize(Row { x: 0.625, y: Some(1e-7) }).unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,y\r\n0.30000000000000004,\r\n0.625,1e-7\r\n");
        let back: f64 = "0.30000000000000004".parse().unwrap();
        assert_eq!(back, 0.1 + 0.2);
    }
}
