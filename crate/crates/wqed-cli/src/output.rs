//! CSV tables with a commented header block, and gnuplot scripts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const UNITS: &str = "J0=1, v_g=1, hbar=1";

/// Where and under which identity a run writes its files.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: PathBuf,
    pub stem: String,
    pub scenario: String,
    pub hash: String,
}

impl Sink {
    pub fn path(&self, suffix: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}.{ext}", self.stem))
    }

    pub fn ensure_dir(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(format!("{}: {e}", self.dir.display())))
    }
}

/// Shortest round-trip decimal; exponent form outside [1e−4, 1e15).
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub struct Table {
    pub schema: &'static str,
    pub columns: Vec<&'static str>,
    pub notes: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &'static str, columns: &[&'static str]) -> Self {
        Table { schema, columns: columns.to_vec(), notes: Vec::new(), rows: Vec::new() }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, sink: &Sink) -> String {
        let mut s = String::new();
        writeln!(s, "# wqed {} scenario={}", env!("CARGO_PKG_VERSION"), sink.scenario).unwrap();
        writeln!(s, "# config_sha256: {}", sink.hash).unwrap();
        writeln!(s, "# units: {UNITS}").unwrap();
        writeln!(s, "# schema: {}({})", self.schema, self.columns.join(", ")).unwrap();
        for n in &self.notes {
            writeln!(s, "# {n}").unwrap();
        }
        writeln!(s, "{}", self.columns.join(",")).unwrap();
        for r in &self.rows {
            writeln!(s, "{}", r.join(",")).unwrap();
        }
        s
    }

    pub fn write(&self, sink: &Sink, suffix: &str) -> Result<PathBuf, CliError> {
        sink.ensure_dir()?;
        let path = sink.path(suffix, "csv");
        write_file(&path, &self.render(sink))?;
        Ok(path)
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// A gnuplot script referencing CSVs by file name (run it from the output
/// directory).
pub struct Plot {
    lines: Vec<String>,
}

impl Plot {
    pub fn new(title: &str) -> Self {
        let lines = vec![
            "# generated by wqed; run with `gnuplot -p <script>` inside the output directory".to_string(),
            "set datafile separator ','".into(),
            "set datafile commentschars '#'".into(),
            "set key autotitle columnhead".into(),
            format!("set title \"{}\"", title.replace('"', "'")),
        ];
        Plot { lines }
    }

    pub fn line(mut self, s: impl Into<String>) -> Self {
        self.lines.push(s.into());
        self
    }

    pub fn write(&self, sink: &Sink, suffix: &str) -> Result<PathBuf, CliError> {
        sink.ensure_dir()?;
        let path = sink.path(suffix, "gp");
        write_file(&path, &(self.lines.join("\n") + "\n"))?;
        Ok(path)
    }
}

pub fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -0.5, 1e-7, 3.25e-12, 123456.789, 1e20, 0.1 + 0.2, std::f64::consts::PI] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x, "{}", num(x));
        }
        assert_eq!(num(1e-7), "1e-7");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(f64::NAN), "NaN");
    }

    #[test]
    fn header_block() {
        let sink = Sink { dir: PathBuf::from("."), stem: "s".into(), scenario: "poles".into(), hash: "abc".into() };
        let mut t = Table::new("poles", &["theta", "pole_re"]);
        t.push(vec![num(0.5), num(-1.0)]);
        let s = t.render(&sink);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[1], "# config_sha256: abc");
        assert_eq!(lines[2], "# units: J0=1, v_g=1, hbar=1");
        assert_eq!(lines[3], "# schema: poles(theta, pole_re)");
        assert_eq!(lines[4], "theta,pole_re");
        assert_eq!(lines[5], "0.5,-1");
    }
}
