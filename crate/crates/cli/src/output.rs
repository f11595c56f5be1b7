//! Buffered output directory: nothing touches the disk until [`Output::commit`].

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// A CSV cell; non-finite numbers become empty fields.
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => x.to_string(),
            Cell::Num(_) => String::new(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// JSON number, or `null` when not finite.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

#[derive(Default)]
pub struct Output {
    files: Vec<(String, Vec<u8>)>,
    stages: Vec<(String, f64)>,
}

impl Output {
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push((name.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: Vec<Vec<Cell>>) {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(header).expect("in-memory csv");
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory csv");
        }
        self.files.push((name.to_string(), w.into_inner().expect("in-memory csv")));
    }

    pub fn json(&mut self, name: &str, value: &Value) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("json values serialize");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    /// Two-column `x y` text; non-finite pairs are dropped.
    pub fn plot(&mut self, name: &str, points: impl IntoIterator<Item = (f64, f64)>) {
        let mut text = String::new();
        for (x, y) in points {
            if x.is_finite() && y.is_finite() {
                text.push_str(&format!("{x} {y}\n"));
            }
        }
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn text(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    /// Writes every buffered file and `manifest.json`, which lists them with
    /// their SHA-256 digests. Returns the manifest.
    pub fn commit(self, dir: &Path, subcommand: &str, config: &[(&str, String)]) -> io::Result<Value> {
        fs::create_dir_all(dir)?;
        let mut inventory = Vec::new();
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
            inventory.push(json!({
                "name": name,
                "bytes": bytes.len(),
                "sha256": hex::encode(Sha256::digest(bytes)),
            }));
        }
        let mut snapshot = Map::new();
        for (k, v) in config {
            snapshot.insert(k.to_string(), json!(v));
        }
        let manifest = json!({
            "tool": "bandlab",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "config": snapshot,
            "stages": self.stages.iter().map(|(n, s)| json!({"name": n, "seconds": s})).collect::<Vec<_>>(),
            "files": inventory,
        });
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("json values serialize");
        bytes.push(b'\n');
        fs::write(dir.join("manifest.json"), bytes)?;
        Ok(manifest)
    }
}
