use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::identify::{fit_structure, Observations};
use super::{CandidateStructure, SolverError};
use crate::evaluation::relative_gap;
use crate::expr::{Compiled, Expr};
use crate::forge::Distribution;

/// Extra probes beyond the largest parameter count.
pub const DEFAULT_MARGIN: usize = 6;
/// A fit this close on every probe means the pair is not separated.
pub const SEPARATION_TOL: f64 = 1e-9;
/// Pairs this close on a wide reference sample are the same function.
const ALIAS_TOL: f64 = 1e-6;
const REFERENCE_POINTS: usize = 64;
const AUGMENT_POOL: usize = 64;

/// Target-input points, columns in `variables` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub variables: Vec<String>,
    pub points: Vec<Vec<f64>>,
    /// Candidate pairs (by id) that agree everywhere and need no witness.
    pub aliases: Vec<(usize, usize)>,
}

impl ProbeSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub(crate) fn draw_points(ranges: &[(String, Distribution)], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| ranges.iter().map(|(_, d)| d.sample(rng)).collect())
        .collect()
}

/// Values of `law` at `points`; `None` where undefined.
pub(crate) fn values_at(law: &Expr, variables: &[String], points: &[Vec<f64>]) -> Vec<Option<f64>> {
    let Ok(compiled) = Compiled::new(law, variables) else {
        return vec![None; points.len()];
    };
    let mut stack = Vec::new();
    points
        .iter()
        .map(|p| compiled.eval_with(p, &mut stack).value())
        .collect()
}

/// How well `b` can imitate `a` (at its starting values) on `points`:
/// the fitted law, or `None` if `a` cannot be a target there.
fn imitate(
    a: &CandidateStructure,
    b: &CandidateStructure,
    variables: &[String],
    points: &[Vec<f64>],
) -> Option<(f64, Expr)> {
    let ya = values_at(&a.tree.inline_constants(), variables, points);
    if ya.iter().any(|v| !v.is_some_and(|v| v > 0.0)) {
        return None;
    }
    let data = Observations {
        variables: variables.to_vec(),
        points: points.to_vec(),
        values: ya.into_iter().map(Option::unwrap).collect(),
    };
    let fit = fit_structure(b, &data, 0.0);
    Some((fit.residual, fit.law))
}

/// The direction in which `a` and `b` fail to separate, if any, with the
/// imitating law.
fn unseparated<'c>(
    a: &'c CandidateStructure,
    b: &'c CandidateStructure,
    variables: &[String],
    points: &[Vec<f64>],
    tol: f64,
) -> Option<(&'c CandidateStructure, Expr)> {
    for (x, y) in [(a, b), (b, a)] {
        if let Some((r, law)) = imitate(x, y, variables, points) {
            if r < tol {
                return Some((x, law));
            }
        }
    }
    None
}

/// Draws `max q + m_extra` in-domain points, then adds the most
/// discriminating point from a random pool until every pair of candidates
/// that differs as a function is separated.
pub fn design_probe_set(
    candidates: &[CandidateStructure],
    ranges: &[(String, Distribution)],
    m_extra: usize,
    seed: u64,
) -> Result<ProbeSet, SolverError> {
    if candidates.is_empty() {
        return Err(SolverError::NoCandidates);
    }
    let variables: Vec<String> = ranges.iter().map(|(k, _)| k.clone()).collect();
    let m0 = candidates
        .iter()
        .map(CandidateStructure::param_count)
        .max()
        .unwrap_or(0)
        + m_extra;
    let limit = 10 * m0.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = draw_points(ranges, m0.max(1), &mut rng);
    let reference = draw_points(ranges, REFERENCE_POINTS, &mut rng);

    let pairs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|i| (i + 1..candidates.len()).map(move |j| (i, j)))
        .collect();
    let aliased: Vec<bool> = pairs
        .par_iter()
        .map(|&(i, j)| unseparated(&candidates[i], &candidates[j], &variables, &reference, ALIAS_TOL).is_some())
        .collect();
    let aliases: Vec<(usize, usize)> = pairs
        .iter()
        .zip(&aliased)
        .filter(|(_, a)| **a)
        .map(|(&(i, j), _)| (candidates[i].id, candidates[j].id))
        .collect();
    let mut open: Vec<(usize, usize)> = pairs
        .into_iter()
        .zip(aliased)
        .filter(|(_, a)| !a)
        .map(|(p, _)| p)
        .collect();

    while !open.is_empty() {
        let status: Vec<Option<(usize, Expr)>> = open
            .par_iter()
            .map(|&(i, j)| {
                unseparated(&candidates[i], &candidates[j], &variables, &points, SEPARATION_TOL)
                    .map(|(a, law)| (a.id, law))
            })
            .collect();
        let stuck: Vec<((usize, usize), (usize, Expr))> = open
            .iter()
            .zip(status)
            .filter_map(|(p, s)| s.map(|s| (*p, s)))
            .collect();
        let Some(((i, j), (reference_id, imitation))) = stuck.first().cloned() else {
            break;
        };
        if points.len() >= limit {
            return Err(SolverError::NotSeparated {
                first: candidates[i].label.clone(),
                second: candidates[j].label.clone(),
                probes: points.len(),
            });
        }
        let source = if candidates[i].id == reference_id {
            &candidates[i]
        } else {
            &candidates[j]
        };
        let pool = draw_points(ranges, AUGMENT_POOL, &mut rng);
        let ya = values_at(&source.tree.inline_constants(), &variables, &pool);
        let yb = values_at(&imitation, &variables, &pool);
        let best = pool
            .into_iter()
            .zip(ya.into_iter().zip(yb))
            .filter(|(p, _)| !points.contains(p))
            .map(|(p, (a, b))| {
                let gap = match (a, b) {
                    (Some(a), Some(b)) => relative_gap(a, b),
                    (None, None) => 0.0,
                    _ => 2.0,
                };
                (gap, p)
            })
            .max_by(|x, y| x.0.total_cmp(&y.0));
        match best {
            Some((_, p)) => points.push(p),
            None => {
                return Err(SolverError::NotSeparated {
                    first: candidates[i].label.clone(),
                    second: candidates[j].label.clone(),
                    probes: points.len(),
                })
            }
        }
        open = stuck.into_iter().map(|(p, _)| p).collect();
    }
    Ok(ProbeSet {
        variables,
        points,
        aliases,
    })
}
