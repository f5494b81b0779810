//! Append-only JSONL log of every completion.

use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use log::warn;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::ParseStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    /// SHA-256 of the full prompt, hex.
    pub prompt_hash: String,
    pub raw: String,
    pub status: ParseStatus,
    pub verdict: Option<serde_json::Value>,
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub struct Transcript {
    out: Mutex<BufWriter<File>>,
}

impl Transcript {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    /// Appends one line. Logging failures are reported but never abort a run.
    pub fn record<V: Serialize>(&self, prompt: &str, raw: &str, status: ParseStatus, verdict: Option<&V>) {
        let rec = TranscriptRecord {
            prompt_hash: prompt_hash(prompt),
            raw: raw.to_string(),
            status,
            verdict: verdict.and_then(|v| serde_json::to_value(v).ok()),
        };
        let line = serde_json::to_string(&rec).expect("transcript records serialize");
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        if let Err(e) = writeln!(out, "{line}") {
            warn!("transcript write failed: {e}");
        }
    }

    pub fn flush(&self) -> io::Result<()> {
        self.out.lock().unwrap_or_else(|e| e.into_inner()).flush()
    }
}

impl Drop for Transcript {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

pub fn read_transcript(path: &Path) -> io::Result<Vec<TranscriptRecord>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::other))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_sha256_hex() {
        assert_eq!(
            prompt_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        {
            let t = Transcript::open(&path).unwrap();
            t.record("p", "A", ParseStatus::Parsed, Some(&"A"));
            t.record("p", "??", ParseStatus::Failed, None::<&String>);
        }
        let recs = read_transcript(&path).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].status, ParseStatus::Failed);
        assert_eq!(recs[0].prompt_hash, prompt_hash("p"));
    }
}
