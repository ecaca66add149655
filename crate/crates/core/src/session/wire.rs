use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use super::{Action, SessionError};
use crate::expr::EvalResult;
use crate::system::{Assignment, Outputs};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageType {
    Briefing,
    RunExperiment,
    ExperimentOutput,
    FinalLaw,
    Error,
}

/// One line of the wire protocol. Field order is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Message {
    #[serde(rename = "type")]
    pub kind: MessageType,
    pub session_id: String,
    pub round: usize,
    pub payload: Value,
}

impl Message {
    pub fn new(kind: MessageType, session_id: &str, round: usize, payload: Value) -> Message {
        Message {
            kind,
            session_id: session_id.to_string(),
            round,
            payload,
        }
    }

    /// Compact JSON without a trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    pub fn from_line(line: &str) -> Result<Message, SessionError> {
        serde_json::from_str(line).map_err(|e| SessionError::Malformed(e.to_string()))
    }

    /// A client request for `action`.
    pub fn request(session_id: &str, round: usize, action: &Action) -> Message {
        match action {
            Action::RunExperiment(sets) => Message::new(
                MessageType::RunExperiment,
                session_id,
                round,
                Value::Array(sets.iter().map(assignment_json).collect()),
            ),
            Action::SubmitFinalLaw(text) => {
                Message::new(MessageType::FinalLaw, session_id, round, Value::String(text.clone()))
            }
        }
    }

    /// Decodes a client request.
    pub fn action(&self) -> Result<Action, SessionError> {
        match self.kind {
            MessageType::RunExperiment => {
                let Value::Array(sets) = &self.payload else {
                    return Err(SessionError::Malformed(
                        "run_experiment payload must be an array".into(),
                    ));
                };
                sets.iter()
                    .map(parse_assignment)
                    .collect::<Result<_, _>>()
                    .map(Action::RunExperiment)
            }
            MessageType::FinalLaw => match &self.payload {
                Value::String(s) => Ok(Action::SubmitFinalLaw(s.clone())),
                _ => Err(SessionError::Malformed("final_law payload must be a string".into())),
            },
            other => Err(SessionError::Malformed(format!(
                "{} is not a client message",
                serde_json::to_string(&other).unwrap()
            ))),
        }
    }
}

fn number(v: f64) -> Value {
    Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

pub(crate) fn assignment_json(a: &Assignment) -> Value {
    Value::Object(a.iter().map(|(k, v)| (k.clone(), number(*v))).collect())
}

/// Undefined values become `null`.
pub(crate) fn outputs_json(o: &Outputs) -> Value {
    let map: Map<String, Value> = o
        .iter()
        .map(|(k, v)| {
            let v = match v {
                EvalResult::Value(x) => number(*x),
                EvalResult::Undefined(_) => Value::Null,
            };
            (k.clone(), v)
        })
        .collect();
    Value::Object(map)
}

fn parse_assignment(v: &Value) -> Result<Assignment, SessionError> {
    let Value::Object(map) = v else {
        return Err(SessionError::Malformed("each input set must be an object".into()));
    };
    map.iter()
        .map(|(k, v)| match v.as_f64() {
            Some(x) => Ok((k.clone(), x)),
            None => Err(SessionError::Malformed(format!("input {k} is not a number"))),
        })
        .collect()
}

/// One set's outputs by name; `None` marks undefined.
pub type DecodedSet = Vec<(String, Option<f64>)>;

/// Reads a reply's per-set outputs back.
pub fn decode_outputs(payload: &Value) -> Option<Vec<DecodedSet>> {
    payload
        .as_array()?
        .iter()
        .map(|set| {
            set.as_object()
                .map(|m| m.iter().map(|(k, v)| (k.clone(), v.as_f64())).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_order_is_fixed() {
        let m = Message::new(MessageType::ExperimentOutput, "s1", 3, serde_json::json!([{"F": null}]));
        assert_eq!(
            m.to_line(),
            r#"{"type":"experiment_output","session_id":"s1","round":3,"payload":[{"F":null}]}"#
        );
        assert_eq!(Message::from_line(&m.to_line()).unwrap(), m);
    }

    #[test]
    fn decodes_requests() {
        let line = r#"{"type":"run_experiment","session_id":"s","round":1,"payload":[{"m1":2,"m2":2.5,"r":4}]}"#;
        let Action::RunExperiment(sets) = Message::from_line(line).unwrap().action().unwrap() else {
            panic!()
        };
        assert_eq!(sets[0]["m2"], 2.5);
        let bad = r#"{"type":"run_experiment","session_id":"s","round":1,"payload":[{"m1":"two"}]}"#;
        assert!(matches!(
            Message::from_line(bad).unwrap().action(),
            Err(SessionError::Malformed(_))
        ));
        assert!(Message::from_line("{not json").is_err());
    }
}
