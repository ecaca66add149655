use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};

use lawlab_core::evaluation::{evaluate_task, EvaluationReport};
use lawlab_core::forge::Tier;
use lawlab_core::session::{open_session, serve_stream, Session};
use lawlab_core::solver::{discover, SolverConfig};
use lawlab_core::system::{shipped_suite, Setting, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::config::{derive_seed, AgentConfig, SuiteConfig};
use crate::report::{render_report, Summary};
use crate::HarnessError;

pub const RUNS_FILE: &str = "runs.jsonl";
pub const TRANSCRIPT_DIR: &str = "transcripts";
pub const SOLVER_REPORT_DIR: &str = "solver-reports";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Error,
}

/// One line of the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub task: String,
    pub domain: String,
    pub chain: usize,
    pub tier: Tier,
    pub setting: Setting,
    pub repeat: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub submission: Option<String>,
    pub rounds_used: usize,
    pub evaluations: usize,
    /// Characters in the wire transcript.
    pub transcript_chars: usize,
    /// Relative to the results directory.
    pub transcript: String,
    pub evaluation: EvaluationReport,
}

impl RunRecord {
    pub fn key(&self) -> (String, usize) {
        (self.task.clone(), self.repeat)
    }
}

/// Result of a `run_suite` call.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub executed: usize,
    /// Pairs already present in the results file.
    pub skipped: usize,
    /// Runs of this call that errored.
    pub errors: usize,
    pub summary: Summary,
}

pub fn transcript_name(task_id: &str, repeat: usize) -> String {
    format!("{}-r{repeat}.jsonl", task_id.replace('/', "-"))
}

/// Reads every well-formed record; returns the count of skipped lines too.
pub fn read_records(dir: &Path) -> Result<(Vec<RunRecord>, usize), HarnessError> {
    let path = dir.join(RUNS_FILE);
    if !path.exists() {
        return Ok((Vec::new(), 0));
    }
    let file = fs::File::open(&path).map_err(|e| HarnessError::io(&path, e))?;
    let mut records = Vec::new();
    let mut corrupt = 0;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(&line) {
            Ok(r) => records.push(r),
            Err(e) => {
                log::warn!("{}:{}: skipping corrupt record: {e}", path.display(), n + 1);
                corrupt += 1;
            }
        }
    }
    Ok((records, corrupt))
}

fn append_records(dir: &Path, records: &[RunRecord]) -> Result<(), HarnessError> {
    let path = dir.join(RUNS_FILE);
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| HarnessError::io(&path, e))?;
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    file.write_all(text.as_bytes())
        .map_err(|e| HarnessError::io(&path, e))?;
    file.flush().map_err(|e| HarnessError::io(&path, e))
}

struct Job<'a> {
    task: &'a TaskSpec,
    repeat: usize,
    seed: u64,
}

fn finish(job: &Job, config: &SuiteConfig, dir: &Path, session: &Session, error: Option<String>) -> RunRecord {
    let transcript = session.transcript_jsonl();
    let name = transcript_name(&job.task.id, job.repeat);
    let rel = Path::new(TRANSCRIPT_DIR).join(&name);
    let mut error = error;
    if let Err(e) = fs::write(dir.join(&rel), &transcript) {
        error.get_or_insert(format!("writing transcript: {e}"));
    }
    let submission = session.submission().cloned();
    let mut evaluation = EvaluationReport::missing();
    if let (None, Some(law)) = (&error, &submission) {
        match evaluate_task(job.task, law, config.eval_points, job.seed) {
            Ok(r) => evaluation = r,
            Err(e) => error = Some(format!("evaluation: {e}")),
        }
    } else if error.is_none() {
        error = Some("the agent never submitted a law".into());
    }
    RunRecord {
        task: job.task.id.clone(),
        domain: job.task.domain.clone(),
        chain: job.task.chain,
        tier: job.task.tier,
        setting: job.task.setting,
        repeat: job.repeat,
        seed: job.seed,
        noise_sigma: config.noise_sigma,
        status: if error.is_some() {
            RunStatus::Error
        } else {
            RunStatus::Ok
        },
        error,
        submission: submission.map(|s| s.to_string()),
        rounds_used: session.rounds_used(),
        evaluations: session.evaluations(),
        transcript_chars: transcript.chars().count(),
        transcript: rel.to_string_lossy().replace('\\', "/"),
        evaluation,
    }
}

fn error_record(job: &Job, config: &SuiteConfig, message: String) -> RunRecord {
    RunRecord {
        task: job.task.id.clone(),
        domain: job.task.domain.clone(),
        chain: job.task.chain,
        tier: job.task.tier,
        setting: job.task.setting,
        repeat: job.repeat,
        seed: job.seed,
        noise_sigma: config.noise_sigma,
        status: RunStatus::Error,
        error: Some(message),
        submission: None,
        rounds_used: 0,
        evaluations: 0,
        transcript_chars: 0,
        transcript: String::new(),
        evaluation: EvaluationReport::missing(),
    }
}

fn run_builtin(job: &Job, config: &SuiteConfig, dir: &Path) -> RunRecord {
    let (mut session, _) = match open_session(job.task, config.session_config(job.seed), &format!("r{}", job.repeat)) {
        Ok(s) => s,
        Err(e) => return error_record(job, config, e.to_string()),
    };
    let solver = SolverConfig {
        rng_seed: job.seed,
        ..config.solver
    };
    let error = match discover(job.task, &mut session, &solver) {
        Ok((_, report)) => {
            let path = dir
                .join(SOLVER_REPORT_DIR)
                .join(transcript_name(&job.task.id, job.repeat).replace(".jsonl", ".txt"));
            fs::write(&path, report.render())
                .err()
                .map(|e| format!("writing solver report: {e}"))
        }
        Err(e) => Some(format!("solver: {e}")),
    };
    finish(job, config, dir, &session, error)
}

fn run_external(job: &Job, config: &SuiteConfig, dir: &Path, listener: &TcpListener) -> RunRecord {
    let (stream, peer) = match listener.accept() {
        Ok(s) => s,
        Err(e) => return error_record(job, config, format!("accepting agent: {e}")),
    };
    log::info!("{} repeat {}: agent connected from {peer}", job.task.id, job.repeat);
    let reader = match stream.try_clone() {
        Ok(r) => BufReader::new(r),
        Err(e) => return error_record(job, config, e.to_string()),
    };
    let id = format!("r{}", job.repeat);
    match serve_stream(reader, stream, job.task, config.session_config(job.seed), &id) {
        Ok(session) => finish(job, config, dir, &session, None),
        Err(e) => error_record(job, config, format!("serving session: {e}")),
    }
}

/// Runs every selected (task, repeat) pair that the results file does not
/// already hold, appending records in suite order, then writes summaries.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteOutcome, HarnessError> {
    config.validate()?;
    let tasks = config.select(shipped_suite())?;
    let dir = config.output.clone();
    for sub in [
        PathBuf::new(),
        PathBuf::from(TRANSCRIPT_DIR),
        PathBuf::from(SOLVER_REPORT_DIR),
    ] {
        let path = dir.join(sub);
        fs::create_dir_all(&path).map_err(|e| HarnessError::io(&path, e))?;
    }
    let (existing, _) = read_records(&dir)?;
    if let Some(r) = existing
        .iter()
        .find(|r| r.noise_sigma != config.noise_sigma || r.seed != derive_seed(config.master_seed, &r.task, r.repeat))
    {
        return Err(HarnessError::Config(format!(
            "{} holds {} repeat {} from a different noise level or master seed",
            dir.display(),
            r.task,
            r.repeat
        )));
    }
    let done: BTreeSet<(String, usize)> = existing.iter().map(RunRecord::key).collect();
    let mut skipped = 0;
    let mut jobs = Vec::new();
    for task in tasks {
        for repeat in 0..config.repeats {
            if done.contains(&(task.id.clone(), repeat)) {
                skipped += 1;
                continue;
            }
            let seed = derive_seed(config.master_seed, &task.id, repeat);
            jobs.push(Job { task, repeat, seed });
        }
    }

    let mut errors = 0;
    match &config.agent {
        AgentConfig::BuiltinSolver => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let batch = 2 * pool.current_num_threads().max(1);
            for chunk in jobs.chunks(batch) {
                let records: Vec<RunRecord> = pool.install(|| {
                    use rayon::prelude::*;
                    chunk.par_iter().map(|j| run_builtin(j, config, &dir)).collect()
                });
                errors += records.iter().filter(|r| r.status == RunStatus::Error).count();
                append_records(&dir, &records)?;
            }
        }
        AgentConfig::ExternalEndpoint { listen } => {
            let listener = TcpListener::bind(listen).map_err(|e| HarnessError::Endpoint(format!("{listen}: {e}")))?;
            for job in &jobs {
                let record = run_external(job, config, &dir, &listener);
                if record.status == RunStatus::Error {
                    errors += 1;
                }
                append_records(&dir, std::slice::from_ref(&record))?;
            }
        }
    }
    let summary = render_report(&dir)?;
    Ok(SuiteOutcome {
        executed: jobs.len(),
        skipped,
        errors,
        summary,
    })
}
