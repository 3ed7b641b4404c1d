//! Run directory layout and file helpers.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde_json::Value;
use vat_core::eval::{EvalRecord, TranscriptLog};
use vat_core::instance::VatInstance;

use crate::error::{CliError, CliResult};

pub const INSTANCES: &str = "instances.jsonl";
pub const TMIN: &str = "tmin.csv";
pub const TRACES: &str = "traces";
pub const TRANSCRIPTS: &str = "transcripts";
pub const REPORTS: &str = "reports";
pub const METADATA: &str = "metadata.json";

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn instances(&self) -> PathBuf {
        self.root.join(INSTANCES)
    }

    pub fn tmin(&self) -> PathBuf {
        self.root.join(TMIN)
    }

    pub fn traces(&self) -> CliResult<PathBuf> {
        self.subdir(TRACES)
    }

    pub fn transcripts(&self) -> CliResult<PathBuf> {
        self.subdir(TRANSCRIPTS)
    }

    pub fn reports(&self) -> CliResult<PathBuf> {
        self.subdir(REPORTS)
    }

    pub fn records(&self) -> PathBuf {
        self.root.join(TRANSCRIPTS).join("records.jsonl")
    }

    pub fn attempts(&self) -> PathBuf {
        self.root.join(TRANSCRIPTS).join("attempts.jsonl")
    }

    fn subdir(&self, name: &str) -> CliResult<PathBuf> {
        let p = self.root.join(name);
        fs::create_dir_all(&p)?;
        Ok(p)
    }

    /// Records start and finish times of a command. Timestamps live only here
    /// so that data files stay byte-identical across reruns.
    pub fn stamp(&self, command: &str, started_at: &str) -> CliResult<()> {
        let path = self.root.join(METADATA);
        let mut meta: BTreeMap<String, Value> = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => BTreeMap::new(),
        };
        meta.insert(
            command.to_string(),
            serde_json::json!({
                "started_at": started_at,
                "finished_at": now(),
                "version": env!("CARGO_PKG_VERSION"),
            }),
        );
        fs::create_dir_all(&self.root)?;
        fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")?;
        Ok(())
    }
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn write_instances(path: &Path, instances: &[VatInstance]) -> CliResult<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// One line of an instances file that could not be loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadLine {
    pub line: usize,
    pub instance_id: String,
    pub error: String,
}

/// Reads every line, keeping unreadable ones as [`BadLine`]s.
pub fn read_instances_lenient(path: &Path) -> CliResult<(Vec<VatInstance>, Vec<BadLine>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::InvalidData(format!("{}: {e}", path.display())))?;
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        match serde_json::from_str::<VatInstance>(line) {
            Ok(inst) => good.push(inst),
            Err(e) => {
                let id = serde_json::from_str::<Value>(line)
                    .ok()
                    .and_then(|v| v.get("instance_id").and_then(Value::as_str).map(str::to_string))
                    .unwrap_or_else(|| format!("line {}", i + 1));
                bad.push(BadLine {
                    line: i + 1,
                    instance_id: id,
                    error: e.to_string(),
                });
            }
        }
    }
    Ok((good, bad))
}

pub fn read_instances(path: &Path) -> CliResult<Vec<VatInstance>> {
    let (good, bad) = read_instances_lenient(path)?;
    if let Some(b) = bad.first() {
        return Err(CliError::InvalidData(format!(
            "{}:{} ({}): {}",
            path.display(),
            b.line,
            b.instance_id,
            b.error
        )));
    }
    if good.is_empty() {
        return Err(CliError::InvalidData(format!("{} holds no instances", path.display())));
    }
    Ok(good)
}

/// Latest record per instance id; later lines replace earlier ones.
pub fn read_latest_records(path: &Path) -> CliResult<BTreeMap<String, EvalRecord>> {
    let log = TranscriptLog::<EvalRecord>::new(path);
    let mut out = BTreeMap::new();
    for rec in log.scan()? {
        let rec = rec?;
        out.insert(rec.instance_id.clone(), rec);
    }
    Ok(out)
}

pub fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        String::new()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use vat_core::instance::{generate_instance, DEFAULT_MAX_ATTEMPTS};

    #[test]
    fn lenient_reader_names_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(INSTANCES);
        let inst = generate_instance(4, 3, "OR".parse().unwrap(), 5, DEFAULT_MAX_ATTEMPTS).unwrap();
        write_instances(&path, std::slice::from_ref(&inst)).unwrap();
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"instance_id\": \"broken\", \"n_vars\": 4}\n\nnot json\n");
        fs::write(&path, text).unwrap();

        let (good, bad) = read_instances_lenient(&path).unwrap();
        assert_eq!(good, vec![inst]);
        assert_eq!(bad.len(), 2);
        assert_eq!((bad[0].line, bad[0].instance_id.as_str()), (2, "broken"));
        assert_eq!((bad[1].line, bad[1].instance_id.as_str()), (4, "line 4"));
        assert!(matches!(read_instances(&path), Err(CliError::InvalidData(_))));
    }

    #[test]
    fn formatting() {
        assert_eq!(fmt_f(0.5), "0.500000");
        assert_eq!(fmt_f(f64::NAN), "");
        assert_eq!(fmt_opt(None), "");
    }
}
