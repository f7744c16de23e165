use std::fmt::Display;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Code {
    Pass = 0,
    Fail = 1,
    Input = 2,
    Infeasible = 3,
    Integration = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub code: Code,
    pub message: String,
}

impl CliError {
    pub fn input(e: impl Display) -> Self {
        CliError {
            code: Code::Input,
            message: e.to_string(),
        }
    }

    pub fn new(code: Code, e: impl Display) -> Self {
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult = Result<Code, CliError>;

/// Hex SHA-256 of a file's bytes.
pub fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// JSON run report; `wall_time_s` is the only non-deterministic field.
pub struct Report {
    fields: Map<String, Value>,
    started: Instant,
}

impl Report {
    pub fn new(command: &str, model_hash: Option<String>) -> Self {
        let mut fields = Map::new();
        fields.insert("command".into(), json!(command));
        if let Some(h) = model_hash {
            fields.insert("model_hash".into(), json!(h));
        }
        Report {
            fields,
            started: Instant::now(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.fields.insert(key.into(), v);
    }

    fn finish(mut self) -> String {
        self.fields
            .insert("wall_time_s".into(), json!(self.started.elapsed().as_secs_f64()));
        serde_json::to_string_pretty(&Value::Object(self.fields)).expect("json")
    }

    /// Single-line form.
    pub fn line(mut self) -> String {
        self.fields
            .insert("wall_time_s".into(), json!(self.started.elapsed().as_secs_f64()));
        serde_json::to_string(&Value::Object(self.fields)).expect("json")
    }

    pub fn emit(self, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.finish();
        match out {
            Some(p) => write_file(p, &(text + "\n")),
            None => {
                stdout(&(text + "\n"));
                Ok(())
            }
        }
    }
}

/// Write to stdout; a closed pipe is not an error.
pub fn stdout(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

/// Buffer CSV rows in memory; written once at the end.
pub fn csv_text(header: &[String], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(CliError::input)?;
    for r in rows {
        w.write_record(r).map_err(CliError::input)?;
    }
    let bytes = w.into_inner().map_err(CliError::input)?;
    String::from_utf8(bytes).map_err(CliError::input)
}
