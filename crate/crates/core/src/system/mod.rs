//! Model systems: feed-forward equation pipelines with one hidden target.

mod suite;
mod template;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::expr::{Compiled, EvalResult, Expr, Undefined};

pub use suite::{
    build_suite, load_suite, parse_suite, shipped_suite, SuiteEntry, SuiteError, SuiteFile, TaskSpec, SHIPPED_SUITE,
};
pub use template::{
    load_systems, parse_systems, shipped_systems, AssistSpec, DomainSystems, SettingTemplate, Systems, SHIPPED_SYSTEMS,
};

/// Default per-round batch limit.
pub const MAX_SETS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Vanilla,
    Simple,
    Complex,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Vanilla, Setting::Simple, Setting::Complex];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Vanilla => "vanilla",
            Setting::Simple => "simple",
            Setting::Complex => "complex",
        }
    }
}

impl std::fmt::Display for Setting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Setting::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown setting {s:?}"))
    }
}

/// Input-parameter set for one model run.
pub type Assignment = BTreeMap<String, f64>;
/// Final outputs of one model run, keyed by output name.
pub type Outputs = BTreeMap<String, EvalResult>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error("equation {equation} reads {name}, which is neither a model input nor an earlier output")]
    NotFeedForward { equation: String, name: String },
    #[error("output {0} is produced twice")]
    DuplicateOutput(String),
    #[error("final output {0} is not produced by any equation")]
    UnknownFinal(String),
    #[error("no final output depends on the target")]
    TargetUnobserved,
    #[error("target tree uses {0}, which the target slot does not provide")]
    VariableMismatch(String),
    #[error("missing input {0}")]
    MissingInput(String),
    #[error("unknown input {0}")]
    UnknownInput(String),
    #[error("input {0} is not a finite number")]
    NonFinite(String),
    #[error("batch of {got} sets exceeds the limit of {limit}")]
    BatchTooLarge { limit: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("set {set}: {source}")]
    InSet {
        set: usize,
        #[source]
        source: Box<SystemError>,
    },
}

#[derive(Debug, Clone)]
pub struct Equation {
    pub name: String,
    pub output: String,
    pub expr: Expr,
    /// Names this equation reads, sorted.
    pub reads: Vec<String>,
    compiled: Compiled,
}

impl Equation {
    pub fn new(name: impl Into<String>, output: impl Into<String>, expr: Expr) -> Equation {
        let reads: Vec<String> = expr.variables().into_iter().collect();
        let compiled = Compiled::new(&expr, &reads).expect("reads cover every variable");
        Equation {
            name: name.into(),
            output: output.into(),
            expr,
            reads,
            compiled,
        }
    }

    /// `output = expr` as disclosed to agents.
    pub fn disclosure(&self) -> String {
        format!("{} = {}", self.output, self.expr)
    }
}

impl PartialEq for Equation {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.output == other.output && self.expr == other.expr
    }
}

/// An ordered pipeline of equations. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    inputs: Vec<String>,
    equations: Vec<Equation>,
    finals: Vec<String>,
    target_index: usize,
}

impl Model {
    pub fn new(
        inputs: Vec<String>,
        equations: Vec<Equation>,
        finals: Vec<String>,
        target_index: usize,
    ) -> Result<Model, SystemError> {
        let mut known: BTreeSet<&str> = inputs.iter().map(String::as_str).collect();
        // Names that depend on the target, transitively.
        let mut tainted = BTreeSet::new();
        for (i, eq) in equations.iter().enumerate() {
            for r in &eq.reads {
                if !known.contains(r.as_str()) {
                    return Err(SystemError::NotFeedForward {
                        equation: eq.name.clone(),
                        name: r.clone(),
                    });
                }
            }
            if !known.insert(&eq.output) {
                return Err(SystemError::DuplicateOutput(eq.output.clone()));
            }
            if i == target_index || eq.reads.iter().any(|r| tainted.contains(r.as_str())) {
                tainted.insert(eq.output.as_str());
            }
        }
        for f in &finals {
            if !equations.iter().any(|e| &e.output == f) {
                return Err(SystemError::UnknownFinal(f.clone()));
            }
        }
        if !finals.iter().any(|f| tainted.contains(f.as_str())) {
            return Err(SystemError::TargetUnobserved);
        }
        let mut finals = finals;
        finals.sort();
        Ok(Model {
            inputs,
            equations,
            finals,
            target_index,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    /// Final output names, sorted.
    pub fn finals(&self) -> &[String] {
        &self.finals
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target(&self) -> &Equation {
        &self.equations[self.target_index]
    }

    pub fn assisting(&self) -> impl Iterator<Item = &Equation> {
        let t = self.target_index;
        self.equations
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != t)
            .map(|(_, e)| e)
    }

    fn check_assignment(&self, assignment: &Assignment) -> Result<(), SystemError> {
        for name in &self.inputs {
            match assignment.get(name) {
                None => return Err(SystemError::MissingInput(name.clone())),
                Some(v) if !v.is_finite() => return Err(SystemError::NonFinite(name.clone())),
                Some(_) => {}
            }
        }
        if let Some(extra) = assignment.keys().find(|k| !self.inputs.contains(k)) {
            return Err(SystemError::UnknownInput(extra.clone()));
        }
        Ok(())
    }

    /// Every intermediate and final value, in equation order.
    pub fn trace(&self, assignment: &Assignment) -> Result<Vec<(String, EvalResult)>, SystemError> {
        self.check_assignment(assignment)?;
        let mut env: HashMap<&str, EvalResult> = assignment
            .iter()
            .map(|(k, v)| (k.as_str(), EvalResult::Value(*v)))
            .collect();
        let mut out = Vec::with_capacity(self.equations.len());
        let mut args = Vec::new();
        let mut stack = Vec::new();
        for eq in &self.equations {
            args.clear();
            let mut undefined: Option<Undefined> = None;
            for r in &eq.reads {
                match env[r.as_str()] {
                    EvalResult::Value(v) => args.push(v),
                    EvalResult::Undefined(u) => {
                        undefined = Some(u);
                        break;
                    }
                }
            }
            let r = match undefined {
                Some(u) => EvalResult::Undefined(u),
                None => eq.compiled.eval_with(&args, &mut stack),
            };
            env.insert(&eq.output, r);
            out.push((eq.output.clone(), r));
        }
        Ok(out)
    }
}

/// Evaluates the pipeline and returns exactly the final outputs.
pub fn run_model(model: &Model, assignment: &Assignment) -> Result<Outputs, SystemError> {
    let trace = model.trace(assignment)?;
    Ok(trace
        .into_iter()
        .filter(|(name, _)| model.finals.contains(name))
        .collect())
}

/// Runs each set in order; rejects the whole batch when it is empty, too
/// large or any set is malformed.
pub fn run_batch(model: &Model, assignments: &[Assignment], max_sets: usize) -> Result<Vec<Outputs>, SystemError> {
    if assignments.is_empty() {
        return Err(SystemError::EmptyBatch);
    }
    if assignments.len() > max_sets {
        return Err(SystemError::BatchTooLarge {
            limit: max_sets,
            got: assignments.len(),
        });
    }
    for (set, a) in assignments.iter().enumerate() {
        model.check_assignment(a).map_err(|e| SystemError::InSet {
            set,
            source: Box::new(e),
        })?;
    }
    assignments.iter().map(|a| run_model(model, a)).collect()
}

/// Rebuilds the task's model with `tree` in the target slot.
pub fn instantiate_model(task: &TaskSpec, tree: &Expr) -> Result<Model, SystemError> {
    let slot: BTreeSet<String> = task.target_inputs.iter().cloned().collect();
    if let Some(v) = tree.variables().into_iter().find(|v| !slot.contains(v)) {
        return Err(SystemError::VariableMismatch(v));
    }
    let mut equations = task.model.equations.clone();
    let target = &mut equations[task.model.target_index];
    *target = Equation::new(target.name.clone(), target.output.clone(), tree.clone());
    Model::new(
        task.model.inputs.clone(),
        equations,
        task.model.finals.clone(),
        task.model.target_index,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Symbols};

    fn eq(name: &str, out: &str, text: &str) -> Equation {
        Equation::new(name, out, parse(text, &Symbols::permissive()).unwrap())
    }

    fn echo() -> Model {
        Model::new(
            vec!["d".into(), "x".into()],
            vec![eq("f1", "v", "sqrt(x)"), eq("f2", "t", "2 * d / v")],
            vec!["t".into()],
            0,
        )
        .unwrap()
    }

    fn set(pairs: &[(&str, f64)]) -> Assignment {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn pipeline_runs_in_order() {
        let out = run_model(&echo(), &set(&[("d", 10.0), ("x", 4.0)])).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out["t"], EvalResult::Value(10.0));
    }

    #[test]
    fn undefined_propagates_downstream() {
        let out = run_model(&echo(), &set(&[("d", 10.0), ("x", -4.0)])).unwrap();
        assert!(!out["t"].is_defined());
    }

    #[test]
    fn rejects_backward_wiring() {
        let err = Model::new(
            vec!["x".into()],
            vec![eq("f1", "t", "2 * v"), eq("f2", "v", "x")],
            vec!["t".into()],
            1,
        )
        .unwrap_err();
        assert!(matches!(err, SystemError::NotFeedForward { .. }));
    }

    #[test]
    fn rejects_unobserved_target() {
        let err = Model::new(
            vec!["x".into()],
            vec![eq("f1", "v", "x"), eq("f2", "t", "2 * x")],
            vec!["t".into()],
            0,
        )
        .unwrap_err();
        assert_eq!(err, SystemError::TargetUnobserved);
    }

    #[test]
    fn batch_limits() {
        let m = echo();
        let one = set(&[("d", 1.0), ("x", 1.0)]);
        assert_eq!(run_batch(&m, &vec![one.clone(); 20], MAX_SETS).unwrap().len(), 20);
        assert_eq!(
            run_batch(&m, &vec![one.clone(); 21], MAX_SETS).unwrap_err(),
            SystemError::BatchTooLarge { limit: 20, got: 21 }
        );
        assert_eq!(run_batch(&m, &[], MAX_SETS).unwrap_err(), SystemError::EmptyBatch);
        let bad = vec![one, set(&[("d", 1.0)])];
        assert!(matches!(
            run_batch(&m, &bad, MAX_SETS).unwrap_err(),
            SystemError::InSet { set: 1, .. }
        ));
    }

    #[test]
    fn input_checks() {
        let m = echo();
        assert_eq!(
            run_model(&m, &set(&[("d", 1.0)])).unwrap_err(),
            SystemError::MissingInput("x".into())
        );
        assert_eq!(
            run_model(&m, &set(&[("d", 1.0), ("x", 1.0), ("y", 2.0)])).unwrap_err(),
            SystemError::UnknownInput("y".into())
        );
        assert_eq!(
            run_model(&m, &set(&[("d", f64::NAN), ("x", 1.0)])).unwrap_err(),
            SystemError::NonFinite("d".into())
        );
    }
}
