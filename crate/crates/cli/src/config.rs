use std::path::{Path, PathBuf};

use lawlab_core::forge::Tier;
use lawlab_core::session::{SessionConfig, NOISE_LEVELS};
use lawlab_core::solver::SolverConfig;
use lawlab_core::system::{Setting, TaskSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

/// Which tasks a suite run covers; an empty list admits everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskFilter {
    pub domains: Vec<String>,
    pub tiers: Vec<Tier>,
    pub settings: Vec<Setting>,
}

impl TaskFilter {
    pub fn admits(&self, task: &TaskSpec) -> bool {
        (self.domains.is_empty() || self.domains.contains(&task.domain))
            && (self.tiers.is_empty() || self.tiers.contains(&task.tier))
            && (self.settings.is_empty() || self.settings.contains(&task.setting))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum AgentConfig {
    BuiltinSolver,
    /// Serve each run on `listen` and wait for an external agent.
    ExternalEndpoint {
        listen: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionLimits {
    pub max_rounds: usize,
    pub max_sets_per_round: usize,
    pub code_budget: Option<u32>,
}

impl Default for SessionLimits {
    fn default() -> Self {
        let d = SessionConfig::default();
        SessionLimits {
            max_rounds: d.max_rounds,
            max_sets_per_round: d.max_sets_per_round,
            code_budget: d.code_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub filter: TaskFilter,
    pub agent: AgentConfig,
    pub repeats: usize,
    pub noise_sigma: f64,
    pub master_seed: u64,
    pub output: PathBuf,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    /// Points in each evaluation dataset.
    pub eval_points: usize,
    pub session: SessionLimits,
    pub solver: SolverConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            filter: TaskFilter::default(),
            agent: AgentConfig::BuiltinSolver,
            repeats: 4,
            noise_sigma: 0.0,
            master_seed: 0,
            output: PathBuf::from("results"),
            workers: 0,
            eval_points: lawlab_core::evaluation::DEFAULT_POINTS,
            session: SessionLimits::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<SuiteConfig, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<SuiteConfig, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        SuiteConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        if self.eval_points == 0 {
            return Err(HarnessError::Config("eval_points must be positive".into()));
        }
        if !NOISE_LEVELS.contains(&self.noise_sigma) {
            return Err(HarnessError::Config(format!(
                "noise_sigma {} is not one of {NOISE_LEVELS:?}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    /// Tasks admitted by the filter, in suite order.
    pub fn select<'a>(&self, suite: &'a [TaskSpec]) -> Result<Vec<&'a TaskSpec>, HarnessError> {
        let tasks: Vec<&TaskSpec> = suite.iter().filter(|t| self.filter.admits(t)).collect();
        if tasks.is_empty() {
            return Err(HarnessError::Config("the task filter selects no tasks".into()));
        }
        Ok(tasks)
    }

    pub fn session_config(&self, seed: u64) -> SessionConfig {
        SessionConfig {
            max_rounds: self.session.max_rounds,
            max_sets_per_round: self.session.max_sets_per_round,
            noise_sigma: self.noise_sigma,
            rng_seed: seed,
            code_budget: self.session.code_budget,
        }
    }
}

/// Seed of one run, a pure function of the master seed, task and repeat.
pub fn derive_seed(master: u64, task_id: &str, repeat: usize) -> u64 {
    let digest = Sha256::digest(format!("{master}\u{1f}{task_id}\u{1f}{repeat}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}
