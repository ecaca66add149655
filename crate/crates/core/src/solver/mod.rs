//! Constructive baseline agent: isolate the target through the model
//! system, enumerate a bounded family of structures, probe until they are
//! separated, and keep the one that fits.

mod candidates;
mod identify;
mod oracle;
mod probes;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use candidates::{enumerate_candidates, CandidateStructure, HypothesisSpace};
pub use identify::{
    acceptance_tolerance, fit_structure, max_relative_error, Observations, StructureFit, NOISELESS_TOL,
    NOISE_TOL_FACTOR, SNAP_TOL,
};
pub use oracle::{isolate_target_oracle, ExperimentPort, TargetOracle};
pub use probes::{design_probe_set, ProbeSet, DEFAULT_MARGIN, SEPARATION_TOL};

use crate::evaluation::relative_gap;
use crate::expr::Expr;
use crate::forge::{shipped_catalog, Catalog};
use crate::session::NOISE_LEVELS;
use crate::system::TaskSpec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("no law for domain {0}")]
    UnknownDomain(String),
    #[error("candidate family exceeds the cap of {cap}")]
    TooManyCandidates { cap: usize },
    #[error("no candidates")]
    NoCandidates,
    #[error("{first} and {second} are not separated after {probes} probes")]
    NotSeparated {
        first: String,
        second: String,
        probes: usize,
    },
    #[error("oracle needs {needed} rounds but {left} remain")]
    Budget { needed: usize, left: usize },
    #[error("session rejected the action ({code}): {message}")]
    Session { code: String, message: String },
    #[error("transport: {0}")]
    Io(String),
}

/// Hypothesis space selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Mode {
    CatalogClosure,
    FreeGrammar {
        depth: usize,
        max_params: usize,
        cap: usize,
    },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::CatalogClosure => "catalog-closure",
            Mode::FreeGrammar { .. } => "free-grammar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub mode: Mode,
    /// Extra probes beyond the largest parameter count.
    pub margin: usize,
    pub rng_seed: u64,
    /// Overrides the noise level reported by the port.
    pub noise_sigma: Option<f64>,
    /// Measurements averaged per probe when sigma > 0.
    pub noisy_repeats: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: Mode::CatalogClosure,
            margin: DEFAULT_MARGIN,
            rng_seed: 0,
            noise_sigma: None,
            noisy_repeats: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResidual {
    pub label: String,
    pub structure: String,
    /// Fitted law; absent when the fit failed.
    pub law: Option<String>,
    /// `None` stands for the infinite sentinel.
    pub residual: Option<f64>,
}

/// What one discovery run did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub task: String,
    pub mode: String,
    pub sigma: f64,
    pub candidate_count: usize,
    /// Distinct probe points observed.
    pub probes: usize,
    /// Oracle queries sent, repeats included.
    pub queries: usize,
    pub rounds: usize,
    /// Set when probe design could not certify separation.
    pub separation_note: Option<String>,
    pub residuals: Vec<CandidateResidual>,
    pub accepted: Vec<String>,
    pub selected: String,
    pub submitted: String,
}

impl DiscoveryReport {
    /// Plain-text rendering for per-task report files.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task: {}", self.task);
        let _ = writeln!(s, "mode: {}", self.mode);
        let _ = writeln!(s, "sigma: {}", self.sigma);
        let _ = writeln!(s, "candidates: {}", self.candidate_count);
        let _ = writeln!(
            s,
            "probes: {} ({} queries, {} rounds)",
            self.probes, self.queries, self.rounds
        );
        if let Some(note) = &self.separation_note {
            let _ = writeln!(s, "separation: {note}");
        }
        let _ = writeln!(s, "residuals:");
        for r in &self.residuals {
            let residual = r.residual.map_or("inf".to_string(), |v| format!("{v:.3e}"));
            let _ = writeln!(s, "  {:<12} {:>10}  {}", r.label, residual, r.structure);
        }
        let _ = writeln!(s, "accepted: {}", self.accepted.join(", "));
        let _ = writeln!(s, "selected: {}", self.selected);
        let _ = writeln!(s, "submitted: {}", self.submitted);
        s
    }
}

/// Candidate points scored per refinement round.
const REFINE_POOL: usize = 256;
/// Fitted laws that never disagree by more than this are the same function.
const REFINE_MIN_GAP: f64 = 1e-6;

fn resolve_sigma<P: ExperimentPort + ?Sized>(config: &SolverConfig, port: &P) -> f64 {
    config
        .noise_sigma
        .or_else(|| port.noise_sigma())
        .unwrap_or(NOISE_LEVELS[NOISE_LEVELS.len() - 1])
}

pub fn candidates_for(task: &TaskSpec, mode: Mode, catalog: &Catalog) -> Result<Vec<CandidateStructure>, SolverError> {
    let space = match mode {
        Mode::CatalogClosure => HypothesisSpace::CatalogClosure(
            catalog
                .law(&task.domain)
                .ok_or_else(|| SolverError::UnknownDomain(task.domain.clone()))?,
        ),
        Mode::FreeGrammar { depth, max_params, cap } => HypothesisSpace::FreeGrammar { depth, max_params, cap },
    };
    enumerate_candidates(space, &task.target_inputs)
}

/// Runs the full procedure against `port` with the shipped catalog.
pub fn discover<P: ExperimentPort + ?Sized>(
    task: &TaskSpec,
    port: &mut P,
    config: &SolverConfig,
) -> Result<(Expr, DiscoveryReport), SolverError> {
    discover_with(task, port, config, shipped_catalog())
}

/// Probe design, batched oracle queries, per-candidate fits, refinement
/// while more than one distinct candidate fits, then submission.
pub fn discover_with<P: ExperimentPort + ?Sized>(
    task: &TaskSpec,
    port: &mut P,
    config: &SolverConfig,
    catalog: &Catalog,
) -> Result<(Expr, DiscoveryReport), SolverError> {
    let sigma = resolve_sigma(config, port);
    let tol = acceptance_tolerance(sigma);
    let repeats = if sigma > 0.0 { config.noisy_repeats.max(1) } else { 1 };
    let candidates = candidates_for(task, config.mode, catalog)?;
    let ranges = task.target_sampling();

    let (probe_points, separation_note) = match design_probe_set(&candidates, ranges, config.margin, config.rng_seed) {
        Ok(p) => (p.points, None),
        Err(SolverError::NotSeparated { first, second, probes }) => {
            // Best effort: keep a plain random design of the capped size.
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            let points = probes::draw_points(ranges, probes, &mut rng);
            (
                points,
                Some(format!("{first} and {second} not separated after {probes} probes")),
            )
        }
        Err(e) => return Err(e),
    };

    let rounds_at_start = port.rounds_left();
    let mut oracle = isolate_target_oracle(task, port);
    let mut data = Observations::new(task.target_inputs.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed ^ 0x0b5e);
    let first: Vec<Vec<f64>> = probe_points.into_iter().take(oracle.capacity(repeats)).collect();
    observe_into(&mut oracle, &first, repeats, &mut data)?;

    let mut fits = fit_all(&candidates, &data, sigma);
    loop {
        let accepted: Vec<usize> = (0..candidates.len()).filter(|&i| fits[i].residual < tol).collect();
        let per_round = oracle.port().max_sets() / repeats;
        if accepted.len() < 2 || oracle.port().rounds_left() == 0 || per_round == 0 {
            break;
        }
        let laws: Vec<&Expr> = accepted.iter().map(|&i| &fits[i].law).collect();
        let pool = probes::draw_points(ranges, REFINE_POOL, &mut rng);
        let columns: Vec<Vec<Option<f64>>> = laws
            .iter()
            .map(|l| probes::values_at(l, &data.variables, &pool))
            .collect();
        let mut scored: Vec<(f64, usize)> = (0..pool.len())
            .map(|k| {
                let mut gap = 0.0f64;
                for a in 0..columns.len() {
                    for b in a + 1..columns.len() {
                        gap = gap.max(match (columns[a][k], columns[b][k]) {
                            (Some(x), Some(y)) => relative_gap(x, y),
                            (None, None) => 0.0,
                            _ => 2.0,
                        });
                    }
                }
                (gap, k)
            })
            .filter(|(g, _)| *g > REFINE_MIN_GAP.max(tol))
            .collect();
        if scored.is_empty() {
            break;
        }
        scored.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let chosen: Vec<Vec<f64>> = scored.iter().take(per_round).map(|&(_, k)| pool[k].clone()).collect();
        observe_into(&mut oracle, &chosen, repeats, &mut data)?;
        let refits: Vec<StructureFit> = accepted
            .par_iter()
            .map(|&i| fit_structure(&candidates[i], &data, sigma))
            .collect();
        for (i, f) in accepted.into_iter().zip(refits) {
            fits[i] = f;
        }
    }

    let accepted: Vec<usize> = (0..candidates.len()).filter(|&i| fits[i].residual < tol).collect();
    let pick = if accepted.is_empty() {
        (0..candidates.len())
            .min_by(|&a, &b| fits[a].residual.total_cmp(&fits[b].residual).then(a.cmp(&b)))
            .expect("candidates are non-empty")
    } else {
        *accepted
            .iter()
            .min_by(|&&a, &&b| {
                let (ta, tb) = (&candidates[a].tree, &candidates[b].tree);
                ta.node_count()
                    .cmp(&tb.node_count())
                    .then_with(|| ta.to_string().cmp(&tb.to_string()))
            })
            .unwrap()
    };
    let law = fits[pick].law.clone();
    let text = law.to_string();
    let queries = oracle.queries;
    let port = oracle.port_mut();
    port.submit(&text)?;
    let rounds = rounds_at_start - port.rounds_left();
    let report = DiscoveryReport {
        task: task.id.clone(),
        mode: config.mode.name().to_string(),
        sigma,
        candidate_count: candidates.len(),
        probes: data.len(),
        queries,
        rounds,
        separation_note,
        residuals: candidates
            .iter()
            .zip(&fits)
            .map(|(c, f)| CandidateResidual {
                label: c.label.clone(),
                structure: c.tree.to_string(),
                law: f.residual.is_finite().then(|| f.law.to_string()),
                residual: f.residual.is_finite().then_some(f.residual),
            })
            .collect(),
        accepted: accepted.iter().map(|&i| candidates[i].label.clone()).collect(),
        selected: candidates[pick].label.clone(),
        submitted: text,
    };
    Ok((law, report))
}

fn fit_all(candidates: &[CandidateStructure], data: &Observations, sigma: f64) -> Vec<StructureFit> {
    candidates.par_iter().map(|c| fit_structure(c, data, sigma)).collect()
}

fn observe_into<P: ExperimentPort + ?Sized>(
    oracle: &mut TargetOracle<'_, P>,
    points: &[Vec<f64>],
    repeats: usize,
    data: &mut Observations,
) -> Result<(), SolverError> {
    let zs = oracle.observe(points, repeats)?;
    for (p, z) in points.iter().zip(zs) {
        if let Some(z) = z {
            data.push(p.clone(), z);
        }
    }
    Ok(())
}
