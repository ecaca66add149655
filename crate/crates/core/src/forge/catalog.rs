use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mutation::{replay, MutationEdit};
use super::Distribution;
use crate::expr::{parse, ConstLeaf, Expr, Symbols};

pub const SCHEMA_VERSION: u32 = 1;

/// The catalog shipped with the crate.
pub const SHIPPED_CATALOG: &str = include_str!("../../data/catalog.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Medium, Tier::Hard];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Tier, String> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tier {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub distribution: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantSpec {
    pub name: String,
    pub default: f64,
    pub units: String,
}

/// On-disk form of one tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierRecord {
    pub expr: String,
    /// Constant defaults for this tier, overriding the law's.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub constants: BTreeMap<String, f64>,
    /// Sampling overrides for this tier, replacing the law's distribution.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub domain: BTreeMap<String, Distribution>,
    pub edits: Vec<MutationEdit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    pub easy: TierRecord,
    pub medium: TierRecord,
    pub hard: TierRecord,
}

impl ChainRecord {
    pub fn tier(&self, tier: Tier) -> &TierRecord {
        match tier {
            Tier::Easy => &self.easy,
            Tier::Medium => &self.medium,
            Tier::Hard => &self.hard,
        }
    }

    pub fn tier_mut(&mut self, tier: Tier) -> &mut TierRecord {
        match tier {
            Tier::Easy => &mut self.easy,
            Tier::Medium => &mut self.medium,
            Tier::Hard => &mut self.hard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawRecord {
    pub domain: String,
    pub name: String,
    pub output: String,
    pub variables: Vec<VariableSpec>,
    pub constants: Vec<ConstantSpec>,
    pub canonical: String,
    pub chains: Vec<ChainRecord>,
}

impl LawRecord {
    pub fn symbols(&self) -> Symbols {
        let consts = self.constants.iter().map(|c| ConstLeaf {
            name: c.name.clone(),
            default_value: c.default,
            units: c.units.clone(),
        });
        Symbols::with_constants(self.variables.iter().map(|v| v.name.clone()), consts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogFile {
    pub schema_version: u32,
    pub laws: Vec<LawRecord>,
}

/// One shifted law with its constants bound to the tier's defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct TierLaw {
    pub tier: Tier,
    pub expr: Expr,
    pub edits: Vec<MutationEdit>,
    pub domain: BTreeMap<String, Distribution>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationChain {
    pub easy: TierLaw,
    pub medium: TierLaw,
    pub hard: TierLaw,
}

impl MutationChain {
    pub fn tier(&self, tier: Tier) -> &TierLaw {
        match tier {
            Tier::Easy => &self.easy,
            Tier::Medium => &self.medium,
            Tier::Hard => &self.hard,
        }
    }

    pub fn tiers(&self) -> [&TierLaw; 3] {
        [&self.easy, &self.medium, &self.hard]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawSpec {
    pub domain: String,
    pub name: String,
    pub output: String,
    pub variables: Vec<VariableSpec>,
    pub constants: Vec<ConstantSpec>,
    pub canonical: Expr,
    pub chains: Vec<MutationChain>,
}

impl LawSpec {
    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn constant_names(&self) -> Vec<String> {
        self.constants.iter().map(|c| c.name.clone()).collect()
    }

    /// Parser symbols for this law's variables and constants.
    pub fn symbols(&self) -> Symbols {
        Symbols::with_constants(self.variable_names(), self.const_leaves())
    }

    fn const_leaves(&self) -> Vec<ConstLeaf> {
        self.constants
            .iter()
            .map(|c| ConstLeaf {
                name: c.name.clone(),
                default_value: c.default,
                units: c.units.clone(),
            })
            .collect()
    }

    /// `chain` is zero-based.
    pub fn tier(&self, chain: usize, tier: Tier) -> &TierLaw {
        self.chains[chain].tier(tier)
    }

    /// Every (chain, tier) pair in catalog order.
    pub fn variants(&self) -> impl Iterator<Item = (usize, &TierLaw)> {
        self.chains
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.tiers().into_iter().map(move |t| (i, t)))
    }

    /// Per-variable distributions, with any tier overrides applied.
    pub fn sampling(&self, overrides: Option<&BTreeMap<String, Distribution>>) -> Vec<(String, Distribution)> {
        self.variables
            .iter()
            .map(|v| {
                let d = overrides
                    .and_then(|o| o.get(&v.name))
                    .copied()
                    .unwrap_or(v.distribution);
                (v.name.clone(), d)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub schema_version: u32,
    pub laws: Vec<LawSpec>,
    /// Hex SHA-256 of the file bytes.
    pub sha256: String,
}

impl Catalog {
    pub fn law(&self, domain: &str) -> Option<&LawSpec> {
        self.laws.iter().find(|l| l.domain == domain)
    }

    pub fn shifted_count(&self) -> usize {
        self.laws.iter().map(|l| l.chains.len() * 3).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("cannot read catalog: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema violation at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {0}")]
    Version(u32),
    #[error("{law}: {field}: {message}")]
    Invalid {
        law: String,
        field: String,
        message: String,
    },
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let text = std::fs::read_to_string(path)?;
    parse_catalog(&text)
}

/// The shipped catalog, parsed once.
pub fn shipped_catalog() -> &'static Catalog {
    static CATALOG: OnceLock<Catalog> = OnceLock::new();
    CATALOG.get_or_init(|| parse_catalog(SHIPPED_CATALOG).expect("shipped catalog is valid"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_catalog(text: &str) -> Result<Catalog, CatalogError> {
    let file: CatalogFile = serde_json::from_str(text).map_err(|e| CatalogError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CatalogError::Version(file.schema_version));
    }
    let laws = file.laws.iter().map(build_law).collect::<Result<Vec<_>, _>>()?;
    Ok(Catalog {
        schema_version: file.schema_version,
        laws,
        sha256: sha256_hex(text.as_bytes()),
    })
}

fn build_law(rec: &LawRecord) -> Result<LawSpec, CatalogError> {
    let invalid = |field: &str, message: String| CatalogError::Invalid {
        law: rec.domain.clone(),
        field: field.to_string(),
        message,
    };
    let mut names: Vec<&str> = rec.variables.iter().map(|v| v.name.as_str()).collect();
    names.extend(rec.constants.iter().map(|c| c.name.as_str()));
    let unique = names.iter().collect::<std::collections::BTreeSet<_>>().len() == names.len();
    if !unique {
        return Err(invalid("variables", "duplicate identifier".into()));
    }
    for v in &rec.variables {
        if !v.distribution.is_valid() {
            return Err(invalid("variables", format!("bad distribution for {}", v.name)));
        }
    }
    if rec.constants.is_empty() {
        return Err(invalid("constants", "at least one hidden constant is required".into()));
    }
    if rec.chains.len() != 3 {
        return Err(invalid(
            "chains",
            format!("expected 3 chains, found {}", rec.chains.len()),
        ));
    }

    let mut spec = LawSpec {
        domain: rec.domain.clone(),
        name: rec.name.clone(),
        output: rec.output.clone(),
        variables: rec.variables.clone(),
        constants: rec.constants.clone(),
        canonical: Expr::new(crate::expr::Node::lit(0.0)).unwrap(),
        chains: Vec::new(),
    };
    let symbols = spec.symbols();
    let read = |field: &str, text: &str| -> Result<Expr, CatalogError> {
        let e = parse(text, &symbols).map_err(|err| invalid(field, err.to_string()))?;
        if e.to_string() != text || !e.is_canonical() {
            return Err(invalid(
                field,
                format!("{text:?} is not in canonical form ({})", e.canonicalize()),
            ));
        }
        Ok(e)
    };
    spec.canonical = read("canonical", &rec.canonical)?;
    if spec.canonical.constants().is_empty() {
        return Err(invalid("canonical", "law has no hidden constant".into()));
    }

    for (ci, chain) in rec.chains.iter().enumerate() {
        let mut prev = spec.canonical.clone();
        let mut tiers = Vec::with_capacity(3);
        for tier in Tier::ALL {
            let t = chain.tier(tier);
            let field = format!("chains[{ci}].{tier}");
            let expr = read(&field, &t.expr)?;
            let replayed = replay(&prev, &t.edits).map_err(|(i, e)| invalid(&field, format!("edit {i}: {e}")))?;
            let reached = replayed.last().unwrap_or(&prev);
            if t.edits.is_empty() || !reached.same_structure(&expr) {
                return Err(invalid(&field, format!("edits reach {reached}, not {expr}")));
            }
            if expr.constants().is_empty() {
                return Err(invalid(&field, "tier has no hidden constant".into()));
            }
            for name in t.constants.keys() {
                if !rec.constants.iter().any(|c| &c.name == name) {
                    return Err(invalid(&field, format!("unknown constant {name}")));
                }
            }
            for (name, d) in &t.domain {
                if !rec.variables.iter().any(|v| &v.name == name) || !d.is_valid() {
                    return Err(invalid(&field, format!("bad domain override for {name}")));
                }
            }
            let values: Vec<(String, f64)> = t.constants.iter().map(|(k, v)| (k.clone(), *v)).collect();
            let bound = shift_units(&expr.with_constant_values(&values));
            prev = expr;
            tiers.push(TierLaw {
                tier,
                expr: bound,
                edits: t.edits.clone(),
                domain: t.domain.clone(),
            });
        }
        let mut it = tiers.into_iter();
        spec.chains.push(MutationChain {
            easy: it.next().unwrap(),
            medium: it.next().unwrap(),
            hard: it.next().unwrap(),
        });
    }
    Ok(spec)
}

/// Mutated laws carry constants whose units no longer match the original.
fn shift_units(expr: &Expr) -> Expr {
    let mut root = expr.root().clone();
    for path in root.paths() {
        if let Some(crate::expr::Node::Const(c)) = root.get_mut(&path) {
            if !c.units.ends_with("(shifted)") {
                c.units = format!("{} (shifted)", c.units).trim_start().to_string();
            }
        }
    }
    Expr::new(root).expect("units do not affect validity")
}
