//! Discovery episodes: budgets, noise, transcripts and the wire protocol.

mod noise;
mod serve;
mod wire;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::expr::{parse, Expr, ParseError, Symbols};
use crate::system::{run_batch, Assignment, Outputs, SystemError, TaskSpec};

pub use noise::{apply_noise, NOISE_LEVELS};
pub use serve::{serve_stream, serve_tcp, LineClient};
pub use wire::{decode_outputs, DecodedSet, Message, MessageType};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub max_rounds: usize,
    pub max_sets_per_round: usize,
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// Code-tool calls the agent side may spend; `None` is unlimited.
    pub code_budget: Option<u32>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            max_rounds: 10,
            max_sets_per_round: 20,
            noise_sigma: 0.0,
            rng_seed: 0,
            code_budget: Some(0),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), SessionError> {
        if !NOISE_LEVELS.contains(&self.noise_sigma) {
            return Err(SessionError::InvalidConfig(format!(
                "noise level {} is not one of {NOISE_LEVELS:?}",
                self.noise_sigma
            )));
        }
        if self.max_rounds == 0 || self.max_sets_per_round == 0 {
            return Err(SessionError::InvalidConfig("budgets must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    RunExperiment(Vec<Assignment>),
    SubmitFinalLaw(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SessionState {
    AwaitingAction,
    Finished { submission: Expr },
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Experiment { round: usize, outputs: Vec<Outputs> },
    Submitted { law: Expr },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("experiment budget of {max_rounds} rounds is exhausted; only a final law is accepted")]
    BudgetExhausted { max_rounds: usize },
    #[error("batch of {got} sets exceeds the limit of {limit}")]
    BatchTooLarge { limit: usize, got: usize },
    #[error("invalid experiment: {0}")]
    BadInput(SystemError),
    #[error("cannot parse submission: {0}")]
    Parse(ParseError),
    #[error("session is closed")]
    Closed,
    #[error("malformed message: {0}")]
    Malformed(String),
}

impl SessionError {
    /// Stable identifier used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::InvalidConfig(_) => "invalid-config",
            SessionError::BudgetExhausted { .. } => "budget-exhausted",
            SessionError::BatchTooLarge { .. } => "batch-too-large",
            SessionError::BadInput(_) => "invalid-experiment",
            SessionError::Parse(_) => "parse-error",
            SessionError::Closed => "session-closed",
            SessionError::Malformed(_) => "malformed-message",
        }
    }
}

/// What an agent is told before its first action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Briefing {
    pub task: String,
    pub domain: String,
    pub setting: String,
    /// Inputs of the hidden law; the submission must use only these.
    pub target_variables: Vec<String>,
    pub target_output: String,
    pub system_inputs: Vec<String>,
    pub system_outputs: Vec<String>,
    pub assisting_equations: Vec<String>,
    pub max_rounds: usize,
    pub max_sets_per_round: usize,
    pub noise_free: bool,
    pub code_budget: Option<u32>,
    pub text: String,
}

impl Briefing {
    fn new(task: &TaskSpec, config: &SessionConfig) -> Briefing {
        let mut text = format!(
            "Discover the hidden law {out} = f({vars}).\n",
            out = task.target_output,
            vars = task.target_inputs.join(", ")
        );
        if task.disclosure.is_empty() {
            text.push_str(&format!("Experiments report {} directly.\n", task.target_output));
        } else {
            text.push_str(&format!(
                "The system computes {} first, then these known equations:\n",
                task.target_output
            ));
            for line in &task.disclosure {
                text.push_str(&format!("  {line}\n"));
            }
        }
        text.push_str(&format!(
            "Experiment inputs: {}. Reported outputs: {}.\n",
            task.model.inputs().join(", "),
            task.model.finals().join(", ")
        ));
        text.push_str(&format!(
            "You may run up to {} experiment rounds with at most {} input sets each; one action per round.\n",
            config.max_rounds, config.max_sets_per_round
        ));
        if config.noise_sigma == 0.0 {
            text.push_str("All measurements are noise-free.\n");
        } else {
            text.push_str("Measurements are subject to random noise.\n");
        }
        text.push_str("Undefined results are reported as null.\n");
        text.push_str(&format!(
            "Submit the law as an expression over {} using + - * / ^ and exp, log, sqrt, sin, cos, tan, asin, acos, atan; \
             write unknown constants as C, C1, C2, ...\n",
            task.target_inputs.join(", ")
        ));
        Briefing {
            task: task.id.clone(),
            domain: task.domain.clone(),
            setting: task.setting.to_string(),
            target_variables: task.target_inputs.clone(),
            target_output: task.target_output.clone(),
            system_inputs: task.model.inputs().to_vec(),
            system_outputs: task.model.finals().to_vec(),
            assisting_equations: task.disclosure.clone(),
            max_rounds: config.max_rounds,
            max_sets_per_round: config.max_sets_per_round,
            noise_free: config.noise_sigma == 0.0,
            code_budget: config.code_budget,
            text,
        }
    }
}

/// One discovery episode. Actions are processed strictly in order.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    task: TaskSpec,
    config: SessionConfig,
    rounds_used: usize,
    evaluations: usize,
    state: SessionState,
    transcript: Vec<Message>,
    rng: ChaCha8Rng,
}

pub fn open_session(
    task: &TaskSpec,
    config: SessionConfig,
    session_id: &str,
) -> Result<(Session, Briefing), SessionError> {
    config.validate()?;
    let briefing = Briefing::new(task, &config);
    let payload = serde_json::to_value(&briefing).expect("briefing serializes");
    let session = Session {
        id: session_id.to_string(),
        task: task.clone(),
        config,
        rounds_used: 0,
        evaluations: 0,
        state: SessionState::AwaitingAction,
        transcript: vec![Message::new(MessageType::Briefing, session_id, 0, payload)],
        rng: ChaCha8Rng::seed_from_u64(config.rng_seed),
    };
    Ok((session, briefing))
}

impl Session {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn rounds_used(&self) -> usize {
        self.rounds_used
    }

    pub fn rounds_left(&self) -> usize {
        self.config.max_rounds - self.rounds_used
    }

    /// Model evaluations spent so far.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn is_open(&self) -> bool {
        self.state == SessionState::AwaitingAction
    }

    pub fn submission(&self) -> Option<&Expr> {
        match &self.state {
            SessionState::Finished { submission } => Some(submission),
            _ => None,
        }
    }

    /// Every message exchanged, briefing first.
    pub fn transcript(&self) -> &[Message] {
        &self.transcript
    }

    /// The transcript as JSON lines.
    pub fn transcript_jsonl(&self) -> String {
        self.transcript.iter().map(|m| m.to_line() + "\n").collect()
    }

    /// Ends the episode without a submission.
    pub fn abort(&mut self, reason: impl Into<String>) {
        if self.is_open() {
            self.state = SessionState::Aborted { reason: reason.into() };
        }
    }

    /// Applies one action and records it with its reply.
    pub fn step(&mut self, action: Action) -> Result<Reply, SessionError> {
        self.transcript
            .push(Message::request(&self.id, self.rounds_used + 1, &action));
        let result = self.apply(action);
        let reply = self.encode(&result);
        self.transcript.push(reply);
        result
    }

    /// Handles a decoded wire request and returns the wire reply.
    pub fn handle(&mut self, request: &Message) -> Message {
        match request.action() {
            Ok(action) => {
                let _ = self.step(action);
                self.transcript.last().unwrap().clone()
            }
            Err(e) => {
                let mut echoed = request.clone();
                echoed.session_id = self.id.clone();
                echoed.round = self.rounds_used + 1;
                self.transcript.push(echoed);
                let reply = self.encode(&Err(e));
                self.transcript.push(reply.clone());
                reply
            }
        }
    }

    fn apply(&mut self, action: Action) -> Result<Reply, SessionError> {
        if !self.is_open() {
            return Err(SessionError::Closed);
        }
        match action {
            Action::RunExperiment(sets) => {
                if self.rounds_used >= self.config.max_rounds {
                    return Err(SessionError::BudgetExhausted {
                        max_rounds: self.config.max_rounds,
                    });
                }
                let outputs =
                    run_batch(&self.task.model, &sets, self.config.max_sets_per_round).map_err(|e| match e {
                        SystemError::BatchTooLarge { limit, got } => SessionError::BatchTooLarge { limit, got },
                        other => SessionError::BadInput(other),
                    })?;
                let sigma = self.config.noise_sigma;
                let outputs: Vec<Outputs> = outputs
                    .into_iter()
                    .map(|set| {
                        set.into_iter()
                            .map(|(k, v)| (k, apply_noise(v, sigma, &mut self.rng)))
                            .collect()
                    })
                    .collect();
                self.rounds_used += 1;
                self.evaluations += sets.len();
                Ok(Reply::Experiment {
                    round: self.rounds_used,
                    outputs,
                })
            }
            Action::SubmitFinalLaw(text) => {
                let symbols =
                    Symbols::new(self.task.target_inputs.iter().cloned(), Vec::<String>::new()).allow_free_constants();
                let law = parse(&text, &symbols).map_err(SessionError::Parse)?;
                self.state = SessionState::Finished {
                    submission: law.clone(),
                };
                Ok(Reply::Submitted { law })
            }
        }
    }

    fn encode(&self, result: &Result<Reply, SessionError>) -> Message {
        match result {
            Ok(Reply::Experiment { round, outputs }) => Message::new(
                MessageType::ExperimentOutput,
                &self.id,
                *round,
                Value::Array(outputs.iter().map(wire::outputs_json).collect()),
            ),
            Ok(Reply::Submitted { law }) => Message::new(
                MessageType::FinalLaw,
                &self.id,
                self.rounds_used,
                json!({"status": "accepted", "law": law.to_string()}),
            ),
            Err(e) => Message::new(
                MessageType::Error,
                &self.id,
                self.rounds_used,
                json!({"code": e.code(), "message": e.to_string()}),
            ),
        }
    }
}

/// Re-runs the client requests of `transcript` on a fresh session.
///
/// Transcripts alternate request and reply after the briefing, so requests
/// sit at odd positions.
pub fn replay(task: &TaskSpec, config: SessionConfig, transcript: &[Message]) -> Result<Session, SessionError> {
    let id = transcript.first().map(|m| m.session_id.as_str()).unwrap_or("replay");
    let (mut session, _) = open_session(task, config, id)?;
    for m in transcript.iter().skip(1).step_by(2) {
        session.handle(m);
    }
    Ok(session)
}
