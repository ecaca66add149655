use std::collections::BTreeSet;

use super::SolverError;
use crate::expr::{canonical_text, Expr, Node, Op};
use crate::forge::LawSpec;

/// A hypothesis structure whose constant leaves are free parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateStructure {
    pub id: usize,
    /// Origin of the structure, e.g. `canonical`, `2/medium` or `grammar`.
    pub label: String,
    /// Canonical tree.
    pub tree: Expr,
}

impl CandidateStructure {
    /// Distinct parameter names in first-appearance order.
    pub fn params(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.tree
            .constant_names()
            .into_iter()
            .filter(|n| seen.insert(n.clone()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().len()
    }

    /// Starting values carried by the tree, one per parameter.
    pub fn defaults(&self) -> Vec<f64> {
        self.params()
            .iter()
            .map(|n| {
                self.tree
                    .constants()
                    .iter()
                    .find(|c| &c.name == n)
                    .map_or(1.0, |c| c.default_value)
            })
            .collect()
    }
}

/// Where candidate structures come from.
#[derive(Debug, Clone, Copy)]
pub enum HypothesisSpace<'a> {
    /// The canonical law and every tier of its chains.
    CatalogClosure(&'a LawSpec),
    /// Every tree over the operator set with at most `depth` operator
    /// levels, so `C * x` has depth 1.
    FreeGrammar {
        depth: usize,
        max_params: usize,
        cap: usize,
    },
}

pub fn enumerate_candidates(
    space: HypothesisSpace<'_>,
    vars: &[String],
) -> Result<Vec<CandidateStructure>, SolverError> {
    let trees: Vec<(String, Expr)> = match space {
        HypothesisSpace::CatalogClosure(law) => std::iter::once(("canonical".to_string(), law.canonical.clone()))
            .chain(
                law.variants()
                    .map(|(ci, t)| (format!("{}/{}", ci + 1, t.tier), t.expr.clone())),
            )
            .collect(),
        HypothesisSpace::FreeGrammar { depth, max_params, cap } => {
            if depth == 0 {
                return Err(SolverError::Config("grammar depth must be at least 1".into()));
            }
            grammar_trees(vars, depth, max_params, cap)?
                .into_iter()
                .map(|t| ("grammar".to_string(), t))
                .collect()
        }
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (label, tree) in trees {
        let tree = tree.canonicalize();
        if seen.insert(tree.to_string()) {
            out.push(CandidateStructure {
                id: out.len(),
                label,
                tree,
            });
        }
    }
    Ok(out)
}

const PLACEHOLDER: &str = "C";

fn placeholders(node: &Node) -> usize {
    match node {
        Node::Const(_) => 1,
        Node::Apply(_, args) => args.iter().map(placeholders).sum(),
        _ => 0,
    }
}

/// Canonical trees keyed by their text with every parameter named alike,
/// built level by level.
fn grammar_trees(vars: &[String], depth: usize, max_params: usize, cap: usize) -> Result<Vec<Expr>, SolverError> {
    let mut seen = BTreeSet::new();
    let mut all: Vec<(Node, usize)> = Vec::new();
    let mut add = |node: Node, all: &mut Vec<(Node, usize)>| -> Result<(), SolverError> {
        let k = placeholders(&node);
        if k > max_params {
            return Ok(());
        }
        // Placeholders share one name here, so the text ignores their order.
        let (canonical, text) = canonical_text(&node);
        if seen.insert(text) {
            all.push((canonical, k));
            if all.len() > cap {
                return Err(SolverError::TooManyCandidates { cap });
            }
        }
        Ok(())
    };
    for v in vars {
        add(Node::var(v.clone()), &mut all)?;
    }
    add(Node::constant(PLACEHOLDER, 1.0), &mut all)?;
    for _ in 0..depth {
        let prev = all.clone();
        for (t, _) in &prev {
            for op in Op::UNARY {
                add(Node::unary(op, t.clone()), &mut all)?;
            }
        }
        for (a, ka) in &prev {
            for (b, kb) in &prev {
                if ka + kb > max_params {
                    continue;
                }
                for op in Op::BINARY {
                    add(Node::binary(op, a.clone(), b.clone()), &mut all)?;
                }
            }
        }
    }
    Ok(all.into_iter().map(|(n, _)| number_params(n)).collect())
}

/// Gives each parameter occurrence its own name: `C` alone, else `C1`, `C2`, ...
fn number_params(mut root: Node) -> Expr {
    let k = placeholders(&root);
    let mut next = 0;
    root.visit_mut(&mut |n| {
        if let Node::Const(c) = n {
            next += 1;
            if k > 1 {
                c.name = format!("{PLACEHOLDER}{next}");
            }
        }
    });
    Expr::new(root).expect("renaming keeps the tree valid")
}
