//! Deterministic artifact writers. Data files never carry timestamps; the
//! run metadata lives in a separate `run_meta.json`.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(dir: &str) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating output dir {dir}"))?;
        Ok(OutDir {
            root: PathBuf::from(dir),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, content: &str) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

/// CSV buffer with a fixed header; floats print in shortest round-trip form.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        buf.push_str(&header.join(","));
        buf.push('\n');
        Csv {
            buf,
            columns: header.len(),
        }
    }

    /// Prepend a comment line (used for the unstable-count header).
    pub fn with_comment(comment: &str, header: &[&str]) -> Self {
        let mut csv = Csv::new(header);
        csv.buf = format!("# {comment}\n{}", csv.buf);
        csv
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        assert_eq!(fields.len(), self.columns, "row width mismatch");
        for (k, f) in fields.iter().enumerate() {
            if k > 0 {
                self.buf.push(',');
            }
            match f {
                CsvField::Float(v) => {
                    let _ = write!(self.buf, "{v}");
                }
                CsvField::Int(v) => {
                    let _ = write!(self.buf, "{v}");
                }
                CsvField::Str(s) => {
                    let _ = write!(self.buf, "{s}");
                }
            }
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

pub enum CsvField {
    Float(f64),
    Int(i64),
    Str(String),
}

pub fn meta(out: &OutDir, command: &str, config_path: &str, workers: usize) -> anyhow::Result<()> {
    let meta = serde_json::json!({
        "tool": "hopfstream",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config_path,
        "workers": workers,
        "unix_time": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    out.write_json("run_meta.json", &meta)?;
    Ok(())
}

pub fn file_name(prefix: &str, idx: usize, ext: &str) -> String {
    format!("{prefix}_{idx:03}.{ext}")
}
