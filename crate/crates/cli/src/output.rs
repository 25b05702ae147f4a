//! Plain columnar text files with a `#` metadata header.

use std::fmt::Write as _;
use std::path::Path;

/// One output file, rendered in memory so it can be checked before writing.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub content: String,
}

impl Artifact {
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join(&self.name), &self.content)
    }
}

/// Shared header lines: producer, file name, config hash, manifest reference.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub manifest: String,
}

#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    U(usize),
    S(String),
    B(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

/// Fixed-format float so files are byte-stable; `nan`/`inf` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.12e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(v) => fmt_f64(*v),
            Cell::I(v) => v.to_string(),
            Cell::U(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => (if *b { "1" } else { "0" }).into(),
        }
    }
}

pub struct Table {
    name: String,
    meta: Vec<(String, String)>,
    columns: Vec<(String, String)>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    /// `columns` are (name, unit) pairs; use "1" for dimensionless.
    pub fn new(name: &str, columns: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            meta: Vec::new(),
            columns: columns
                .iter()
                .map(|(n, u)| (n.to_string(), u.to_string()))
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(cells);
    }

    pub fn render(&self, prov: &Provenance) -> Artifact {
        let mut s = header(&self.name, prov, &self.meta);
        let names: Vec<&str> = self.columns.iter().map(|c| c.0.as_str()).collect();
        let units: Vec<&str> = self.columns.iter().map(|c| c.1.as_str()).collect();
        let _ = writeln!(s, "# columns: {}", names.join(" "));
        let _ = writeln!(s, "# units: {}", units.join(" "));
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(Cell::render).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        Artifact {
            name: self.name.clone(),
            content: s,
        }
    }
}

fn header(name: &str, prov: &Provenance, meta: &[(String, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# qnoise {} {}", prov.command, env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# file: {name}");
    let _ = writeln!(s, "# config_sha256: {}", prov.config_hash);
    let _ = writeln!(s, "# seed: {}", prov.seed);
    let _ = writeln!(s, "# manifest: {}", prov.manifest);
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}: {v}");
    }
    s
}

/// Row-major matrix; axes live in companion files named in the header.
pub fn matrix(
    name: &str,
    prov: &Provenance,
    meta: &[(&str, String)],
    rows: usize,
    cols: usize,
    values: &[f64],
) -> Artifact {
    assert_eq!(values.len(), rows * cols);
    let meta: Vec<(String, String)> = meta.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let mut s = header(name, prov, &meta);
    let _ = writeln!(s, "# shape: {rows} {cols}");
    for r in 0..rows {
        let line: Vec<String> = values[r * cols..(r + 1) * cols].iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    Artifact {
        name: name.to_string(),
        content: s,
    }
}

/// Parses the numeric body of a table or matrix file, skipping `#` lines.
/// Non-numeric tokens (mask strings) become NaN.
pub fn parse_body(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().unwrap_or(f64::NAN))
                .collect()
        })
        .collect()
}

/// Value of a `# key: value` header line.
pub fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    let prefix = format!("# {key}: ");
    text.lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(prefix.as_str()))
}
