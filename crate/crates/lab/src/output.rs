//! CSV tables with a versioned header comment.

use std::io::Write;
use std::path::Path;

use crate::error::LabError;

pub const SCHEMA_VERSION: u32 = 1;

/// A fixed-column result table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(kind: &str, columns: &[&'static str]) -> Self {
        Table { kind: kind.to_string(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Values of a column, parsed as f64 (NaN when empty).
    pub fn values(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else { return vec![] };
        self.rows.iter().map(|r| r[c].parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn write<W: Write>(&self, w: &mut W, config_hash: &str, seed: u64) -> Result<(), LabError> {
        writeln!(
            w,
            "# papr-lab schema={SCHEMA_VERSION} kind={} seed={seed} config_sha256={config_hash}",
            self.kind
        )
        .map_err(|e| LabError::Io(e.to_string()))?;
        let mut cw = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        cw.write_record(&self.columns).map_err(|e| LabError::Csv(e.to_string()))?;
        for r in &self.rows {
            cw.write_record(r).map_err(|e| LabError::Csv(e.to_string()))?;
        }
        cw.flush().map_err(|e| LabError::Io(e.to_string()))
    }

    pub fn write_file(&self, path: &Path, config_hash: &str, seed: u64) -> Result<(), LabError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
        }
        let mut f = std::fs::File::create(path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
        self.write(&mut f, config_hash, seed)
    }

    pub fn to_csv_string(&self, config_hash: &str, seed: u64) -> Result<String, LabError> {
        let mut buf = Vec::new();
        self.write(&mut buf, config_hash, seed)?;
        String::from_utf8(buf).map_err(|e| LabError::Io(e.to_string()))
    }
}

/// Fixed-format float: shortest round-trip repr, empty for NaN.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:?}")
    }
}

pub fn fmt_bool(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut t = Table::new("ccdf", &["a", "b"]);
        t.push(vec![fmt(1.5), fmt(f64::NAN)]);
        let s = t.to_csv_string("abc", 7).unwrap();
        assert_eq!(s, "# papr-lab schema=1 kind=ccdf seed=7 config_sha256=abc\na,b\n1.5,\n");
        assert_eq!(t.values("a"), vec![1.5]);
        assert!(t.values("b")[0].is_nan());
    }
}
