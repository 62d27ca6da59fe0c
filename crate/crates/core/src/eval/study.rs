//! Records and aggregates of the human-guesser study.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of the study ledger, written when a human submits a guess.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub session_id: String,
    pub checkpoint: String,
    #[serde(default)]
    pub group: Option<String>,
    pub scene_id: String,
    pub target: usize,
    pub guess: usize,
    pub correct: bool,
    /// Rounds shown to the subject before the guess.
    pub rounds_seen: usize,
    /// Whether the dialog had ended when the guess was made.
    pub dialog_finished: bool,
    pub created_at_ms: u64,
    pub guessed_at_ms: u64,
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub sessions: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

impl Tally {
    fn add(&mut self, correct: bool) {
        self.sessions += 1;
        self.correct += usize::from(correct);
        self.accuracy = Some(self.correct as f64 / self.sessions as f64);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub overall: Tally,
    pub by_checkpoint: BTreeMap<String, Tally>,
    /// Per checkpoint, one entry per study group: a group counts as correct
    /// when more than half of its subjects guessed right.
    pub majority_by_checkpoint: BTreeMap<String, Tally>,
}

pub fn summarize(records: &[LedgerRecord]) -> StudySummary {
    let mut s = StudySummary::default();
    let mut groups: BTreeMap<(String, String), (usize, usize)> = BTreeMap::new();
    for r in records {
        s.overall.add(r.correct);
        s.by_checkpoint.entry(r.checkpoint.clone()).or_default().add(r.correct);
        if let Some(g) = &r.group {
            let e = groups.entry((r.checkpoint.clone(), g.clone())).or_default();
            e.0 += 1;
            e.1 += usize::from(r.correct);
        }
    }
    for ((ckpt, _), (n, ok)) in groups {
        s.majority_by_checkpoint.entry(ckpt).or_default().add(2 * ok > n);
    }
    s
}

pub fn read_ledger(path: &Path) -> Result<Vec<LedgerRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Format(format!("ledger line {}: {e}", i + 1)))?);
    }
    Ok(out)
}
