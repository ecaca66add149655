use std::fs;
use std::path::Path;

use lawlab_core::evaluation::{evaluate_task, EvaluationReport};
use lawlab_core::session::{replay, Message};
use lawlab_core::system::shipped_suite;
use serde::{Deserialize, Serialize};

use crate::config::SuiteConfig;
use crate::runner::{read_records, RunRecord};
use crate::HarnessError;

pub const RESCORED_FILE: &str = "rescored.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescored {
    pub task: String,
    pub repeat: usize,
    /// Submission reached by replaying the transcript.
    pub submission: Option<String>,
    /// Whether replay reproduced the recorded submission.
    pub replay_matches: bool,
    pub evaluation: Option<EvaluationReport>,
    pub error: Option<String>,
}

fn rescore_one(dir: &Path, record: &RunRecord, config: &SuiteConfig) -> Rescored {
    let mut out = Rescored {
        task: record.task.clone(),
        repeat: record.repeat,
        submission: None,
        replay_matches: false,
        evaluation: None,
        error: None,
    };
    let Some(task) = shipped_suite().iter().find(|t| t.id == record.task) else {
        out.error = Some(format!("unknown task {}", record.task));
        return out;
    };
    if record.transcript.is_empty() {
        out.error = Some("no transcript".into());
        return out;
    }
    let path = dir.join(&record.transcript);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            out.error = Some(format!("{}: {e}", path.display()));
            return out;
        }
    };
    let messages: Result<Vec<Message>, _> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(Message::from_line)
        .collect();
    let session_config = lawlab_core::session::SessionConfig {
        noise_sigma: record.noise_sigma,
        ..config.session_config(record.seed)
    };
    let session = match messages.map(|m| replay(task, session_config, &m)) {
        Ok(Ok(s)) => s,
        Ok(Err(e)) => {
            out.error = Some(e.to_string());
            return out;
        }
        Err(e) => {
            out.error = Some(format!("{}: {e}", path.display()));
            return out;
        }
    };
    let Some(law) = session.submission() else {
        out.error = Some("the replayed session has no submission".into());
        return out;
    };
    out.submission = Some(law.to_string());
    out.replay_matches = out.submission == record.submission;
    match evaluate_task(task, law, config.eval_points, record.seed) {
        Ok(r) => out.evaluation = Some(r),
        Err(e) => out.error = Some(e.to_string()),
    }
    out
}

/// Replays every recorded transcript in `dir`, re-scores the submission and
/// writes `rescored.jsonl`. Returns the rescored entries in record order.
pub fn rescore_dir(dir: &Path, config: &SuiteConfig) -> Result<Vec<Rescored>, HarnessError> {
    let (records, _) = read_records(dir)?;
    let rescored: Vec<Rescored> = {
        use rayon::prelude::*;
        records.par_iter().map(|r| rescore_one(dir, r, config)).collect()
    };
    let text: String = rescored
        .iter()
        .map(|r| serde_json::to_string(r).expect("rescored entries serialize") + "\n")
        .collect();
    let path = dir.join(RESCORED_FILE);
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    Ok(rescored)
}
