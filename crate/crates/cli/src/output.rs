//! CSV and JSON artifacts.
//!
//! Every file starts with one `#` comment line holding the tool version and
//! the resolved configuration as JSON. Floats carry 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `%.17g`: shortest of fixed or scientific notation with 17 significant
/// digits, trailing zeros removed. Always round-trips.
pub fn g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-5..17).contains(&exp) {
        trim_zeros(&format!("{x:.*}", (16 - exp) as usize))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// A cell of a CSV row.
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => g17(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// The comment line that heads every artifact.
pub fn header_line<C: Serialize>(command: &str, config: &C) -> CliResult<String> {
    let json = serde_json::to_string(config)?;
    Ok(format!("# rfkl {VERSION} {command} {json}"))
}

/// An in-memory RFC-4180 table with a comment header.
pub struct Table {
    header: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: String, columns: &[&str]) -> CliResult<Self> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        writer.write_record(columns)?;
        Ok(Self { header, writer })
    }

    pub fn row(&mut self, cells: Vec<Cell>) -> CliResult<()> {
        self.writer.write_record(cells.iter().map(Cell::render))?;
        Ok(())
    }

    pub fn render(self) -> CliResult<String> {
        let body = self.writer.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        let body = String::from_utf8(body).expect("CSV cells are UTF-8");
        Ok(format!("{}\r\n{body}", self.header))
    }
}

/// Write `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Output { path: path.to_path_buf(), source: e })?;
    }
    fs::write(path, contents).map_err(|e| CliError::Output { path: path.to_path_buf(), source: e })
}

/// JSON report: the header comment line followed by the pretty-printed value.
pub fn write_json<T: Serialize>(path: &Path, header: &str, value: &T) -> CliResult<()> {
    let body = serde_json::to_string_pretty(value)?;
    write_file(path, &format!("{header}\n{body}\n"))
}

pub fn print_stdout(contents: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(contents.as_bytes()).map_err(CliError::Io)?;
    out.flush().map_err(CliError::Io)
}

/// `results/run.csv` with suffix `summary` gives `results/run.summary.csv`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    let name = if suffix.is_empty() { format!("{stem}.{ext}") } else { format!("{stem}.{suffix}.{ext}") };
    path.with_file_name(name)
}
