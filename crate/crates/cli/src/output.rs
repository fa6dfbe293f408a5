use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

use crate::CliError;

/// Six significant digits; scientific notation outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // Round first so that 9.9999996 is treated as 10.
    let rounded: f64 = format!("{x:.5e}").parse().unwrap_or(x);
    let mag = rounded.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag) as usize;
        format!("{rounded:.decimals$}")
    } else {
        format!("{rounded:.5e}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Where a subcommand's table goes besides the terminal.
#[derive(Clone, Debug, Default)]
pub struct Sink {
    path: Option<PathBuf>,
    format: Option<Format>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>, format: Option<Format>) -> Self {
        Sink { path, format }
    }

    fn format_for(&self, path: &Path) -> Format {
        self.format.unwrap_or_else(|| {
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
                Format::Json
            } else {
                Format::Csv
            }
        })
    }

    /// Writes `rows` as CSV records or a JSON array with the same field names.
    pub fn save<T: Serialize>(&self, rows: &[T]) -> Result<(), CliError> {
        let Some(path) = &self.path else { return Ok(()) };
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
        let file = BufWriter::new(File::create(path).map_err(io)?);
        match self.format_for(path) {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(file);
                for r in rows {
                    w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
                }
                w.flush().map_err(io)?;
            }
            Format::Json => {
                let mut file = file;
                serde_json::to_writer_pretty(&mut file, rows).map_err(|e| CliError::Io(e.to_string()))?;
                std::io::Write::write_all(&mut file, b"\n").map_err(io)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.926817234), "0.926817");
        assert_eq!(sig6(2.8284271247), "2.82843");
        assert_eq!(sig6(0.0161853), "0.0161853");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(9.9999996), "10.0000");
        assert_eq!(sig6(-0.5), "-0.500000");
        assert_eq!(sig6(1.5e-9), "1.50000e-9");
        assert_eq!(sig6(0.0), "0");
    }
}
