//! Reports, CSV tables and the plain-text summary.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::ScenarioConfig;

/// Decimal rendering with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV artifact held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }
}

/// Row-building shorthand: `row![a, b]` renders integers verbatim and reals
/// through [`fmt_real`].
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        fmt_real(*self)
    }
}

impl Cell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for String {
    fn cell(&self) -> String {
        self.clone()
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        self.to_string()
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => {
        vec![$($crate::output::Cell::cell(&$x)),*]
    };
}

/// Writes `table` as CSV: header row, LF line endings.
pub fn emit_csv(table: &Table, path: &Path) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()
}

/// One configured test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub name: String,
    pub value: f64,
    pub band: (f64, f64),
    pub pass: bool,
}

impl TestResult {
    /// Passes when `lo <= value <= hi`.
    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            band: (lo, hi),
            pass: value >= lo && value <= hi,
        }
    }

    /// Passes when `value < hi` (strict); the band is reported as `[lo, hi)`.
    pub fn below(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            band: (lo, hi),
            pass: value < hi && value >= lo,
        }
    }

    /// A flag rendered as value 1 or 0 against the band `[1, 1]`.
    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.to_string(),
            value: if ok { 1.0 } else { 0.0 },
            band: (1.0, 1.0),
            pass: ok,
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "TEST {} {} value={} band={},{}",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            fmt_real(self.value),
            fmt_real(self.band.0),
            fmt_real(self.band.1)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub tests: Vec<TestResult>,
    /// `(stage, seconds)`.
    pub timings: Vec<(String, f64)>,
    pub tables: Vec<Table>,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.tests.iter().all(|t| t.pass)
    }

    pub fn test(&self, name: &str) -> Option<&TestResult> {
        self.tests.iter().find(|t| t.name == name)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("# scenario {} seed {}\n", self.config.scenario, self.config.seed));
        for t in &self.tests {
            s.push_str(&t.summary_line());
            s.push('\n');
        }
        for (stage, secs) in &self.timings {
            s.push_str(&format!("TIME {stage} {secs:.3}s\n"));
        }
        s.push_str(&format!("OVERALL {}\n", if self.passed() { "PASS" } else { "FAIL" }));
        s
    }

    /// Writes every table plus `summary.txt` and `config.txt` into `dir`.
    pub fn write(&mut self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for t in &self.tables {
            let p = dir.join(t.file_name());
            emit_csv(t, &p)?;
            paths.push(p);
        }
        let cfg = dir.join("config.txt");
        fs::write(&cfg, self.config.serialize())?;
        paths.push(cfg);
        let summary = dir.join("summary.txt");
        paths.push(summary.clone());
        self.artifacts = paths;
        fs::write(summary, self.summary())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(-2.5), "-2.5000000000000000e0");
        let x = 0.123_456_789_012_345_68_f64;
        assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new("empty", &["n", "value"]);
        let p = dir.path().join("e.csv");
        emit_csv(&t, &p).unwrap();
        assert_eq!(fs::read_to_string(p).unwrap(), "n,value\n");
    }

    #[test]
    fn three_rows_make_four_lf_lines() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("curve", &["n", "estimate"]);
        for n in 0..3usize {
            t.push(row![n, n as f64 * 0.5]);
        }
        let p = dir.path().join("c.csv");
        emit_csv(&t, &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(!text.contains('\r'));
        let again = dir.path().join("c2.csv");
        emit_csv(&t, &again).unwrap();
        assert_eq!(fs::read(p).unwrap(), fs::read(again).unwrap());
    }

    #[test]
    fn summary_line_format() {
        let t = TestResult::within("variance", 1.0, 0.98, 1.02);
        assert_eq!(
            t.summary_line(),
            "TEST variance PASS value=1.0000000000000000e0 band=9.7999999999999998e-1,1.0200000000000000e0"
        );
        assert!(!TestResult::flag("x", false).pass);
    }
}
