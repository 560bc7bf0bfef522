use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Where the primary artifact goes; stdout (as JSON) when no path is given.
#[derive(Debug, Clone)]
pub struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    pub fn new(path: Option<PathBuf>) -> Result<Self, CliError> {
        let format = match &path {
            None => Format::Json,
            Some(p) => match p
                .extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase)
            {
                Some(ext) if ext == "json" => Format::Json,
                Some(ext) if ext == "csv" => Format::Csv,
                _ => {
                    return Err(CliError::Usage(format!(
                        "cannot infer output format from {}; use a .json or .csv extension",
                        p.display()
                    )))
                }
            },
        };
        Ok(Self { path, format })
    }

    pub fn format(&self) -> Format {
        self.format
    }

    /// Write the primary artifact; files are written to a temporary sibling and renamed.
    pub fn write_primary(&self, contents: &str) -> Result<(), CliError> {
        match &self.path {
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(contents.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Io(format!("stdout: {e}")))
            }
            Some(p) => write_atomic(p, contents),
        }
    }

    /// `<out>.meta.json` with the config echo, tool version and a summary.
    pub fn write_sidecar(
        &self,
        command: &str,
        config: Value,
        summary: Value,
    ) -> Result<(), CliError> {
        let Some(p) = &self.path else {
            return Ok(());
        };
        let meta = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": config,
            "summary": summary,
        });
        write_atomic(&suffixed(p, ".meta.json"), &to_json(&meta)?)
    }

    /// Best-effort `<out>.error.json`.
    pub fn write_error_report(&self, report: &Value) {
        if let Some(p) = &self.path {
            if let Ok(text) = to_json(report) {
                let _ = write_atomic(&suffixed(p, ".error.json"), &text);
            }
        }
    }
}

pub fn suffixed(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = suffixed(path, &format!(".tmp-{}", std::process::id()));
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    fs::write(&tmp, contents).map_err(io)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io(e)
    })
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Ten significant digits, shortest form.
pub fn fmt_sig(v: f64) -> String {
    robust_scatter::lab::fmt_sig(v)
}

pub fn matrix_csv(m: &nalgebra::DMatrix<f64>) -> String {
    let mut s = String::new();
    for row in m.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| fmt_sig(*v)).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// Header line plus one row of values.
pub fn record_csv(fields: &[(&str, f64)]) -> String {
    let names: Vec<&str> = fields.iter().map(|(n, _)| *n).collect();
    let values: Vec<String> = fields.iter().map(|(_, v)| fmt_sig(*v)).collect();
    format!("{}\n{}\n", names.join(","), values.join(","))
}
