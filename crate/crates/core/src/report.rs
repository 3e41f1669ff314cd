//! Run outputs: CSV tables plus a `summary.json` whose floats are always
//! written with 17 significant digits, so identical runs give identical bytes.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub model: String,
    /// SHA-256 of the canonical (re-emitted) configuration.
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Metadata {
    pub fn new(command: &str, model: &str, canonical_config: &str, seed: u64) -> Self {
        let digest = Sha256::digest(canonical_config.as_bytes());
        let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect();
        Self {
            command: command.to_string(),
            model: model.to_string(),
            config_hash,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Shortest round-trip representation; empty for missing values.
pub fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub metadata: Metadata,
    pub tables: Vec<CsvTable>,
    pub summary: Value,
}

impl ResultBundle {
    pub fn table(&self, name: &str) -> Option<&CsvTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_json(&self) -> String {
        let doc = serde_json::json!({
            "metadata": self.metadata,
            "files": self.tables.iter().map(|t| t.file_name()).collect::<Vec<_>>(),
            "summary": self.summary,
        });
        to_json_fixed(&doc)
    }

    /// Write every table and `summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.tables.len() + 1);
        for t in &self.tables {
            let path = dir.join(t.file_name());
            std::fs::write(&path, t.render())?;
            written.push(path);
        }
        let path = dir.join("summary.json");
        let mut f = std::fs::File::create(&path)?;
        f.write_all(self.summary_json().as_bytes())?;
        f.write_all(b"\n")?;
        written.push(path);
        Ok(written)
    }
}

struct FixedDigits<'a>(PrettyFormatter<'a>);

impl Formatter for FixedDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with every float as `d.ddddddddddddddddde±x`.
pub fn to_json_fixed<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing into memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json_fixed(&serde_json::json!({"a": 0.1, "b": [1.0, -2.5e-12], "n": 3, "nan": f64::NAN}));
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("-2.4999999999999998e-12"), "{s}");
        assert!(s.contains("\"n\": 3"), "{s}");
        assert!(s.contains("\"nan\": null"), "{s}");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_rendering() {
        let mut t = CsvTable::new("x", &["a", "b"]);
        t.push(vec![fmt_num(1e-10), fmt_opt(None)]);
        t.push(vec![fmt_num(0.5), fmt_num(f64::NAN)]);
        assert_eq!(t.render(), "a,b\n1e-10,\n0.5,\n");
    }

    #[test]
    fn hash_depends_on_text() {
        let a = Metadata::new("c", "m", "x = 1", 0);
        let b = Metadata::new("c", "m", "x = 2", 0);
        assert_eq!(a.config_hash.len(), 64);
        assert_ne!(a.config_hash, b.config_hash);
    }
}
