use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::template::Systems;
use super::{Assignment, Model, Outputs, Setting, SystemError};
use crate::expr::{EvalResult, Expr};
use crate::forge::{Catalog, Distribution, LawSpec, Tier};

pub const SHIPPED_SUITE: &str = include_str!("../../data/suite.json");
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("cannot read file: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema violation at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {0}")]
    Version(u32),
    #[error("{what}: {message}")]
    Invalid { what: String, message: String },
    #[error("{file} hash {found} does not match the loaded file ({expected})")]
    HashMismatch {
        file: &'static str,
        expected: String,
        found: String,
    },
    #[error(transparent)]
    System(#[from] SystemError),
}

impl SuiteError {
    pub(crate) fn schema(e: serde_json::Error) -> SuiteError {
        SuiteError::Schema {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub id: String,
    pub domain: String,
    /// One-based.
    pub chain: usize,
    pub tier: Tier,
    pub setting: Setting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteFile {
    pub schema_version: u32,
    pub catalog_sha256: String,
    pub systems_sha256: String,
    pub tasks: Vec<SuiteEntry>,
}

/// One discovery task: a shifted law embedded in a model system.
#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub id: String,
    pub domain: String,
    /// One-based.
    pub chain: usize,
    pub tier: Tier,
    pub setting: Setting,
    /// The hidden law, constants bound to their true values.
    pub target: Expr,
    pub target_output: String,
    pub target_inputs: Vec<String>,
    pub model: Model,
    /// Target output as a function of final outputs and system inputs.
    pub inverse: Expr,
    /// Distributions of every system input, in model input order.
    pub sampling: Vec<(String, Distribution)>,
    /// Assisting equations as `output = expr` lines.
    pub disclosure: Vec<String>,
}

pub fn task_id(domain: &str, chain: usize, tier: Tier, setting: Setting) -> String {
    format!("{domain}/{chain}/{tier}/{setting}")
}

impl TaskSpec {
    pub fn build(
        law: &LawSpec,
        chain: usize,
        tier: Tier,
        setting: Setting,
        systems: &Systems,
    ) -> Result<TaskSpec, SuiteError> {
        if chain == 0 || chain > law.chains.len() {
            return Err(SuiteError::Invalid {
                what: law.domain.clone(),
                message: format!("no chain {chain}"),
            });
        }
        let tier_law = law.tier(chain - 1, tier);
        let built = systems.build(law, setting, &tier_law.expr)?;
        let mut sampling = law.sampling(Some(&tier_law.domain));
        sampling.extend(built.extra_inputs);
        let disclosure = built.model.assisting().map(|e| e.disclosure()).collect();
        Ok(TaskSpec {
            id: task_id(&law.domain, chain, tier, setting),
            domain: law.domain.clone(),
            chain,
            tier,
            setting,
            target: tier_law.expr.clone(),
            target_output: law.output.clone(),
            target_inputs: law.variable_names(),
            model: built.model,
            inverse: built.inverse,
            sampling,
            disclosure,
        })
    }

    /// Distributions of the target's own inputs.
    pub fn target_sampling(&self) -> &[(String, Distribution)] {
        &self.sampling[..self.target_inputs.len()]
    }

    /// Applies the recorded inverse path to one observation.
    pub fn invert(&self, assignment: &Assignment, outputs: &Outputs) -> EvalResult {
        let mut bindings: Vec<(String, f64)> = assignment.iter().map(|(k, v)| (k.clone(), *v)).collect();
        for (k, v) in outputs {
            match v {
                EvalResult::Value(x) => bindings.push((k.clone(), *x)),
                EvalResult::Undefined(_) if self.inverse.variables().contains(k) => return *v,
                EvalResult::Undefined(_) => {}
            }
        }
        self.inverse
            .evaluate(&bindings)
            .expect("inverse reads only inputs and final outputs")
    }
}

/// The suite listing for a catalog: every law, chain, tier and setting.
pub fn build_suite(catalog: &Catalog, systems: &Systems) -> SuiteFile {
    let mut tasks = Vec::new();
    for law in &catalog.laws {
        for chain in 1..=law.chains.len() {
            for tier in Tier::ALL {
                for setting in Setting::ALL {
                    tasks.push(SuiteEntry {
                        id: task_id(&law.domain, chain, tier, setting),
                        domain: law.domain.clone(),
                        chain,
                        tier,
                        setting,
                    });
                }
            }
        }
    }
    SuiteFile {
        schema_version: SCHEMA_VERSION,
        catalog_sha256: catalog.sha256.clone(),
        systems_sha256: systems.sha256.clone(),
        tasks,
    }
}

pub fn load_suite(path: impl AsRef<Path>, catalog: &Catalog, systems: &Systems) -> Result<Vec<TaskSpec>, SuiteError> {
    parse_suite(&std::fs::read_to_string(path)?, catalog, systems)
}

pub fn parse_suite(text: &str, catalog: &Catalog, systems: &Systems) -> Result<Vec<TaskSpec>, SuiteError> {
    let file: SuiteFile = serde_json::from_str(text).map_err(SuiteError::schema)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(SuiteError::Version(file.schema_version));
    }
    if file.catalog_sha256 != catalog.sha256 {
        return Err(SuiteError::HashMismatch {
            file: "catalog",
            expected: catalog.sha256.clone(),
            found: file.catalog_sha256,
        });
    }
    if file.systems_sha256 != systems.sha256 {
        return Err(SuiteError::HashMismatch {
            file: "systems",
            expected: systems.sha256.clone(),
            found: file.systems_sha256,
        });
    }
    let mut seen = std::collections::BTreeSet::new();
    file.tasks
        .iter()
        .map(|e| {
            let law = catalog.law(&e.domain).ok_or_else(|| SuiteError::Invalid {
                what: e.id.clone(),
                message: format!("unknown domain {}", e.domain),
            })?;
            let task = TaskSpec::build(law, e.chain, e.tier, e.setting, systems)?;
            if task.id != e.id || !seen.insert(e.id.clone()) {
                return Err(SuiteError::Invalid {
                    what: e.id.clone(),
                    message: "task id is not derived from its fields or is repeated".into(),
                });
            }
            Ok(task)
        })
        .collect()
}

/// The shipped 324-task suite.
pub fn shipped_suite() -> &'static [TaskSpec] {
    static SUITE: OnceLock<Vec<TaskSpec>> = OnceLock::new();
    SUITE.get_or_init(|| {
        parse_suite(SHIPPED_SUITE, crate::forge::shipped_catalog(), super::shipped_systems())
            .expect("shipped suite is valid")
    })
}
