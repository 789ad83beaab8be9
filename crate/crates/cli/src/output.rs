//! Output directory handling. The only non-reproducible byte in any output
//! is the `generated_at` value of `summary.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::CliError;

pub const SUMMARY: &str = "summary.json";
pub const TRACE: &str = "trace.csv";
pub const WITNESSES: &str = "witnesses";

#[derive(Serialize)]
struct Summary<'a, T> {
    command: &'a str,
    status: &'a str,
    generated_at: String,
    result: &'a T,
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::io(format!("creating {}", root.display()), e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| CliError::io(format!("writing {}", p.display()), e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("output types serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_summary<T: Serialize>(
        &self,
        command: &str,
        ok: bool,
        result: &T,
    ) -> Result<(), CliError> {
        self.write_json(
            SUMMARY,
            &Summary {
                command,
                status: if ok { "ok" } else { "failed" },
                generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                result,
            },
        )
    }

    /// Empties (or creates) the witness directory so stale files from an
    /// earlier run never mix with the current ones.
    pub fn fresh_witness_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.path(WITNESSES);
        if dir.exists() {
            let entries = fs::read_dir(&dir)
                .map_err(|e| CliError::io(format!("listing {}", dir.display()), e))?;
            for entry in entries.flatten() {
                let p = entry.path();
                if p.extension().is_some_and(|e| e == "json") {
                    fs::remove_file(&p)
                        .map_err(|e| CliError::io(format!("removing {}", p.display()), e))?;
                }
            }
        } else {
            fs::create_dir_all(&dir)
                .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        }
        Ok(dir)
    }
}
