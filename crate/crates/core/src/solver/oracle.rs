use std::io::{BufRead, Write};

use super::SolverError;
use crate::expr::{EvalResult, Undefined};
use crate::forge::Distribution;
use crate::session::{decode_outputs, Action, LineClient, MessageType, Reply, Session};
use crate::system::{Assignment, Outputs, TaskSpec};

/// Anything that runs experiment batches and accepts a final law.
pub trait ExperimentPort {
    fn max_sets(&self) -> usize;
    fn rounds_left(&self) -> usize;
    /// Noise level if the port knows it.
    fn noise_sigma(&self) -> Option<f64>;
    fn run(&mut self, sets: Vec<Assignment>) -> Result<Vec<Outputs>, SolverError>;
    fn submit(&mut self, law: &str) -> Result<(), SolverError>;
}

fn session_error(e: crate::session::SessionError) -> SolverError {
    SolverError::Session {
        code: e.code().to_string(),
        message: e.to_string(),
    }
}

impl ExperimentPort for Session {
    fn max_sets(&self) -> usize {
        self.config().max_sets_per_round
    }

    fn rounds_left(&self) -> usize {
        Session::rounds_left(self)
    }

    fn noise_sigma(&self) -> Option<f64> {
        Some(self.config().noise_sigma)
    }

    fn run(&mut self, sets: Vec<Assignment>) -> Result<Vec<Outputs>, SolverError> {
        match self.step(Action::RunExperiment(sets)).map_err(session_error)? {
            Reply::Experiment { outputs, .. } => Ok(outputs),
            Reply::Submitted { .. } => unreachable!("experiments never reply with a submission"),
        }
    }

    fn submit(&mut self, law: &str) -> Result<(), SolverError> {
        self.step(Action::SubmitFinalLaw(law.to_string()))
            .map(|_| ())
            .map_err(session_error)
    }
}

fn remote_error(payload: &serde_json::Value) -> SolverError {
    SolverError::Session {
        code: payload["code"].as_str().unwrap_or("unknown").to_string(),
        message: payload["message"].as_str().unwrap_or_default().to_string(),
    }
}

impl<R: BufRead, W: Write> ExperimentPort for LineClient<R, W> {
    fn max_sets(&self) -> usize {
        self.briefing.max_sets_per_round
    }

    fn rounds_left(&self) -> usize {
        self.briefing.max_rounds.saturating_sub(self.rounds_used())
    }

    /// The briefing only says whether measurements are noise-free.
    fn noise_sigma(&self) -> Option<f64> {
        self.briefing.noise_free.then_some(0.0)
    }

    fn run(&mut self, sets: Vec<Assignment>) -> Result<Vec<Outputs>, SolverError> {
        let reply = self.run_experiment(sets).map_err(|e| SolverError::Io(e.to_string()))?;
        if reply.kind != MessageType::ExperimentOutput {
            return Err(remote_error(&reply.payload));
        }
        let decoded =
            decode_outputs(&reply.payload).ok_or_else(|| SolverError::Io("malformed experiment output".into()))?;
        Ok(decoded
            .into_iter()
            .map(|set| {
                set.into_iter()
                    .map(|(k, v)| {
                        (
                            k,
                            v.map_or(EvalResult::Undefined(Undefined::DomainError), EvalResult::Value),
                        )
                    })
                    .collect()
            })
            .collect())
    }

    fn submit(&mut self, law: &str) -> Result<(), SolverError> {
        let reply = LineClient::submit(self, law).map_err(|e| SolverError::Io(e.to_string()))?;
        match reply.kind {
            MessageType::FinalLaw => Ok(()),
            _ => Err(remote_error(&reply.payload)),
        }
    }
}

/// Observes the hidden law through a task's model system: target inputs
/// are mapped to system inputs, the batch is run, and the recorded inverse
/// recovers the target output.
pub struct TargetOracle<'a, P: ?Sized> {
    task: &'a TaskSpec,
    port: &'a mut P,
    /// Fixed values for system inputs the target does not read.
    extras: Assignment,
    /// Oracle points requested so far, repeats included.
    pub queries: usize,
}

fn center(d: &Distribution) -> f64 {
    match *d {
        Distribution::LogUniform { low, high } => (low * high).sqrt(),
        Distribution::Uniform { low, high } => 0.5 * (low + high),
    }
}

pub fn isolate_target_oracle<'a, P: ExperimentPort + ?Sized>(
    task: &'a TaskSpec,
    port: &'a mut P,
) -> TargetOracle<'a, P> {
    let extras = task.sampling[task.target_inputs.len()..]
        .iter()
        .map(|(k, d)| (k.clone(), center(d)))
        .collect();
    TargetOracle {
        task,
        port,
        extras,
        queries: 0,
    }
}

impl<P: ExperimentPort + ?Sized> TargetOracle<'_, P> {
    pub fn port(&self) -> &P {
        self.port
    }

    pub fn port_mut(&mut self) -> &mut P {
        self.port
    }

    /// Points the remaining budget can still observe with `repeats` each.
    pub fn capacity(&self, repeats: usize) -> usize {
        self.port.rounds_left() * (self.port.max_sets() / repeats.max(1))
    }

    /// System inputs for one point given in target-input order.
    pub fn system_inputs(&self, point: &[f64]) -> Assignment {
        let mut a = self.extras.clone();
        a.extend(self.task.target_inputs.iter().cloned().zip(point.iter().copied()));
        a
    }

    /// Target value at each point, averaged over `repeats` measurements.
    /// A point whose every measurement inverts to undefined gives `None`.
    pub fn observe(&mut self, points: &[Vec<f64>], repeats: usize) -> Result<Vec<Option<f64>>, SolverError> {
        let repeats = repeats.max(1);
        let per_round = (self.port.max_sets() / repeats).max(1);
        let needed = points.len().div_ceil(per_round);
        if needed > self.port.rounds_left() {
            return Err(SolverError::Budget {
                needed,
                left: self.port.rounds_left(),
            });
        }
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(per_round) {
            let sets: Vec<Assignment> = chunk
                .iter()
                .flat_map(|p| std::iter::repeat_n(self.system_inputs(p), repeats))
                .collect();
            let outputs = self.port.run(sets.clone())?;
            self.queries += sets.len();
            for (i, group) in outputs.chunks(repeats).enumerate() {
                let zs: Vec<f64> = group
                    .iter()
                    .enumerate()
                    .filter_map(|(r, o)| self.task.invert(&sets[i * repeats + r], o).value())
                    .collect();
                out.push((!zs.is_empty()).then(|| zs.iter().sum::<f64>() / zs.len() as f64));
            }
        }
        Ok(out)
    }
}
