//! CSV emission. Numbers are written with Rust's shortest round-trip
//! formatting except where a table is explicitly rounded.

use std::fmt::Display;

/// `# key=value` metadata lines, a header row and data rows.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    meta: Vec<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|h| h.to_string()).collect(),
            ..CsvTable::default()
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Display) {
        // keep each entry on one line
        let value = value.to_string().replace(['\n', '\r'], " ");
        self.meta.push(format!("# {key}={value}"));
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let row: Vec<String> = cells.into_iter().collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in &self.meta {
            out.push_str(m);
            out.push('\n');
        }
        for row in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Six decimal places.
pub fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}
