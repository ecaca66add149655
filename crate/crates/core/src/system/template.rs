use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::suite::SuiteError;
use super::{Equation, Model, Setting};
use crate::expr::{parse, Expr, Node, Symbols};
use crate::forge::{sha256_hex, Catalog, Distribution, LawSpec, TierLaw};

pub const SHIPPED_SYSTEMS: &str = include_str!("../../data/systems.json");
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssistSpec {
    pub output: String,
    pub expr: String,
}

/// Assisting equations around the target for one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingTemplate {
    /// System inputs the target does not consume.
    pub extra_inputs: BTreeMap<String, Distribution>,
    /// Run after the target, in order.
    pub equations: Vec<AssistSpec>,
    #[serde(rename = "final")]
    pub finals: Vec<String>,
    /// Recovers the target output from final outputs and system inputs.
    pub inverse: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSystems {
    pub domain: String,
    pub simple: SettingTemplate,
    pub complex: SettingTemplate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemsFile {
    schema_version: u32,
    systems: Vec<DomainSystems>,
}

/// The per-domain templates, checked against a catalog.
#[derive(Debug, Clone)]
pub struct Systems {
    pub domains: Vec<DomainSystems>,
    pub sha256: String,
}

/// A model built around one target tree, with its inverse path.
pub(crate) struct Built {
    pub model: Model,
    pub inverse: Expr,
    pub extra_inputs: Vec<(String, Distribution)>,
}

impl Systems {
    pub fn domain(&self, domain: &str) -> Option<&DomainSystems> {
        self.domains.iter().find(|d| d.domain == domain)
    }

    pub fn template(&self, domain: &str, setting: Setting) -> Option<&SettingTemplate> {
        let d = self.domain(domain)?;
        match setting {
            Setting::Vanilla => None,
            Setting::Simple => Some(&d.simple),
            Setting::Complex => Some(&d.complex),
        }
    }

    pub(crate) fn build(&self, law: &LawSpec, setting: Setting, target: &Expr) -> Result<Built, SuiteError> {
        let invalid = |message: String| SuiteError::Invalid {
            what: format!("{} {setting} system", law.domain),
            message,
        };
        let vars = law.variable_names();
        let target_eq = Equation::new("f_target", law.output.clone(), target.clone());
        let Some(t) = self.template(&law.domain, setting) else {
            let model = Model::new(vars, vec![target_eq], vec![law.output.clone()], 0)?;
            return Ok(Built {
                model,
                inverse: Expr::new(Node::var(law.output.clone())).unwrap(),
                extra_inputs: Vec::new(),
            });
        };
        let mut known: Vec<String> = vars.clone();
        for name in t.extra_inputs.keys() {
            if known.contains(name) || *name == law.output {
                return Err(invalid(format!("extra input {name} shadows a law name")));
            }
            known.push(name.clone());
        }
        let inputs = known.clone();
        known.push(law.output.clone());
        let mut equations = vec![target_eq];
        for (i, a) in t.equations.iter().enumerate() {
            let expr = parse(&a.expr, &Symbols::new(known.iter().cloned(), Vec::<String>::new()))
                .map_err(|e| invalid(format!("{}: {e}", a.output)))?;
            equations.push(Equation::new(format!("f_assist{}", i + 1), a.output.clone(), expr));
            known.push(a.output.clone());
        }
        let model = Model::new(inputs.clone(), equations, t.finals.clone(), 0)?;
        let inverse_syms = Symbols::new(inputs.iter().chain(&t.finals).cloned(), Vec::<String>::new());
        let inverse = parse(&t.inverse, &inverse_syms).map_err(|e| invalid(format!("inverse: {e}")))?;
        Ok(Built {
            model,
            inverse,
            extra_inputs: t.extra_inputs.iter().map(|(k, v)| (k.clone(), *v)).collect(),
        })
    }
}

pub fn load_systems(path: impl AsRef<Path>, catalog: &Catalog) -> Result<Systems, SuiteError> {
    parse_systems(&std::fs::read_to_string(path)?, catalog)
}

/// The shipped templates, checked against the shipped catalog.
pub fn shipped_systems() -> &'static Systems {
    static SYSTEMS: OnceLock<Systems> = OnceLock::new();
    SYSTEMS.get_or_init(|| {
        parse_systems(SHIPPED_SYSTEMS, crate::forge::shipped_catalog()).expect("shipped systems are valid")
    })
}

pub fn parse_systems(text: &str, catalog: &Catalog) -> Result<Systems, SuiteError> {
    let file: SystemsFile = serde_json::from_str(text).map_err(SuiteError::schema)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(SuiteError::Version(file.schema_version));
    }
    let systems = Systems {
        domains: file.systems,
        sha256: sha256_hex(text.as_bytes()),
    };
    for law in &catalog.laws {
        if systems.domain(&law.domain).is_none() {
            return Err(SuiteError::Invalid {
                what: law.domain.clone(),
                message: "no system templates".into(),
            });
        }
        // Every tier must fit every template.
        let tiers = std::iter::once(&law.canonical).chain(law.variants().map(|(_, t): (usize, &TierLaw)| &t.expr));
        for tree in tiers {
            for setting in Setting::ALL {
                systems.build(law, setting, tree)?;
            }
        }
    }
    Ok(systems)
}
