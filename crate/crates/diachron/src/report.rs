//! Output plumbing: tabular CSV/JSON emission with atomic writes, numeric
//! formatting pinned to 10 significant digits for byte-reproducible
//! outputs, input digests, and the per-run manifest.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("encoding {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("encoding {path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats a float with 10 significant digits, plain decimal notation.
/// Zero prints as `0`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (10 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes `bytes` to `path` atomically: a temp file in the same directory
/// is written, flushed, and renamed into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(path))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.flush().map_err(io_err(path))?;
    tmp.persist(path)
        .map_err(|e| ReportError::Io {
            path: path.to_path_buf(),
            source: e.error,
        })?;
    Ok(())
}

/// A rectangular string table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, headers: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>, csv::Error> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        Ok(w.into_inner().expect("vec writer cannot fail"))
    }

    fn to_json_bytes(&self) -> Result<Vec<u8>, serde_json::Error> {
        let objects: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                self.headers
                    .iter()
                    .zip(row)
                    .map(|(h, v)| (h.clone(), serde_json::Value::String(v.clone())))
                    .collect::<serde_json::Map<_, _>>()
                    .into()
            })
            .collect();
        let mut bytes = serde_json::to_vec_pretty(&objects)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Writes each table to `<out_dir>/<name>.<ext>` atomically; returns the
/// paths written. An empty slice writes nothing.
pub fn emit_tables(
    tables: &[Table],
    format: OutputFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    let mut paths = Vec::with_capacity(tables.len());
    for t in tables {
        let (ext, bytes) = match format {
            OutputFormat::Csv => (
                "csv",
                t.to_csv_bytes().map_err(|source| ReportError::Csv {
                    path: out_dir.join(&t.name),
                    source,
                })?,
            ),
            OutputFormat::Json => (
                "json",
                t.to_json_bytes().map_err(|source| ReportError::Json {
                    path: out_dir.join(&t.name),
                    source,
                })?,
            ),
        };
        let path = out_dir.join(format!("{}.{ext}", t.name));
        atomic_write(&path, &bytes)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Serializes a value as pretty JSON (stable key order) and writes it
/// atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| ReportError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Streaming SHA-256 of a file, as lowercase hex.
pub fn sha256_hex(path: &Path) -> Result<String, ReportError> {
    let mut file = fs::File::open(path).map_err(io_err(path))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = file.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// What a run read, wrote, and was configured with.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub version: String,
    pub config: C,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub seed: u64,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(config: C, seed: u64) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), ReportError> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(path)?,
        });
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf, ReportError> {
        let path = out_dir.join("run_manifest.json");
        write_json(&path, self)?;
        Ok(path)
    }
}
