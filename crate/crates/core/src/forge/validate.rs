use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::mutation::{assemble, cluster_operands, mutate, EditKind, MutationEdit, Reposition, Site};
use super::EXPONENTS;
use crate::expr::{Expr, Node, Op};

/// The four curation guidelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    NoNewVariables,
    NonDecreasingComplexity,
    NoReversal,
    NotSingleEdit,
}

impl Rule {
    pub fn number(self) -> u8 {
        match self {
            Rule::NoNewVariables => 1,
            Rule::NonDecreasingComplexity => 2,
            Rule::NoReversal => 3,
            Rule::NotSingleEdit => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Index of the offending edit (for rules 3 and 4, the later of the pair).
    pub edit: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub violations: Vec<Violation>,
    /// Set when an edit could not be applied; later edits are not checked.
    pub failed_edit: Option<usize>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.failed_edit.is_none()
    }

    pub fn rules(&self) -> BTreeSet<Rule> {
        self.violations.iter().map(|v| v.rule).collect()
    }
}

/// Checks an edit sequence against the four guidelines.
pub fn validate_mutation_chain(base: &Expr, edits: &[MutationEdit]) -> Verdict {
    let base = base.canonicalize();
    let vars = base.variables();
    let mut verdict = Verdict::default();
    let mut trees = vec![base];
    for (i, edit) in edits.iter().enumerate() {
        let prev = trees.last().unwrap();
        let next = match mutate(prev, edit) {
            Ok(t) => t,
            Err(_) => {
                verdict.failed_edit = Some(i);
                break;
            }
        };
        let mut flag = |rule| verdict.violations.push(Violation { rule, edit: i });
        if !next.variables().is_subset(&vars) {
            flag(Rule::NoNewVariables);
        }
        if next.node_count() < prev.node_count() {
            flag(Rule::NonDecreasingComplexity);
        }
        if i >= 1 {
            let before = &trees[i - 1];
            if next.same_structure(before) {
                flag(Rule::NoReversal);
            } else if single_edit_reaches(before, &next) {
                flag(Rule::NotSingleEdit);
            }
        }
        trees.push(next);
    }
    verdict
}

/// Payload values and terms offered to the neighbor enumeration.
#[derive(Debug, Clone, Default)]
pub struct Palette {
    pub values: Vec<f64>,
    pub terms: Vec<String>,
}

impl Palette {
    /// Everything a single edit would need to produce `target`: its
    /// literals, the exponent set, 0 and 1, and the text of each of its
    /// subtrees and operand sub-groups.
    pub fn toward(target: &Expr) -> Palette {
        let mut values: Vec<f64> = EXPONENTS.to_vec();
        values.extend(target.literals());
        values.extend([0.0, 1.0, -1.0]);
        values.sort_by(f64::total_cmp);
        values.dedup();

        let mut terms = BTreeSet::new();
        for path in target.root().paths() {
            let node = target.root().get(&path).unwrap();
            terms.insert(Expr::new(node.clone()).unwrap().to_string());
            if let Some((join, inverse, same, other)) = cluster_operands(node) {
                let all: Vec<(Node, bool)> = same
                    .into_iter()
                    .map(|n| (n, true))
                    .chain(other.into_iter().map(|n| (n, false)))
                    .collect();
                for group in proper_subsets(all.len(), 2) {
                    let (mut s, mut o) = (Vec::new(), Vec::new());
                    for &i in &group {
                        let (n, positive) = all[i].clone();
                        if positive {
                            s.push(n)
                        } else {
                            o.push(n)
                        }
                    }
                    if let Ok(e) = Expr::new(assemble(join, inverse, s, o)) {
                        terms.insert(e.canonicalize().to_string());
                    }
                }
            }
        }
        Palette {
            values,
            terms: terms.into_iter().collect(),
        }
    }
}

/// Index subsets of `0..n` with at least `min` and fewer than `n` members.
pub(crate) fn proper_subsets(n: usize, min: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << n) - 1)
        .map(|m| (0..n).filter(|i| m & (1 << i) != 0).collect::<Vec<_>>())
        .filter(|s| s.len() >= min)
        .collect()
}

/// Every single edit applicable to `tree` with payloads from `palette`.
pub fn candidate_edits(tree: &Expr, palette: &Palette) -> Vec<MutationEdit> {
    let root = tree.root();
    let paths = root.paths();
    let mut out = Vec::new();
    let mut push = |site: &Site, kind: EditKind| {
        out.push(MutationEdit {
            site: site.clone(),
            kind,
        })
    };

    let targeted = |site: &Site, subst: &[Op], push: &mut dyn FnMut(&Site, EditKind)| {
        for &op in subst {
            push(site, EditKind::OperatorSubstitution { op });
        }
        for &value in &palette.values {
            push(site, EditKind::ExponentChange { value });
        }
        for func in Op::UNARY {
            push(site, EditKind::FunctionWrap { func });
        }
        for term in &palette.terms {
            for op in Op::BINARY {
                for term_first in [false, true] {
                    push(
                        site,
                        EditKind::TermCoupling {
                            op,
                            term: term.clone(),
                            term_first,
                        },
                    );
                }
            }
        }
    };

    for path in &paths {
        let node = root.get(path).unwrap();
        let site = Site::at(path.clone());
        let subst: Vec<Op> = match node.op() {
            Some(op) => Op::ALL
                .iter()
                .copied()
                .filter(|o| o.arity() == op.arity() && *o != op)
                .collect(),
            None => Vec::new(),
        };
        targeted(&site, &subst, &mut push);
        match node {
            Node::Var(_) => push(&site, EditKind::VariableDrop),
            Node::Const(_) => {
                for to in &paths {
                    if !to.starts_with(path) && !path.starts_with(to) {
                        push(
                            &site,
                            EditKind::ConstantReposition {
                                mode: Reposition::Move { to: to.clone() },
                            },
                        );
                    }
                }
            }
            _ => {}
        }
        for with in &paths {
            if with > path && !with.starts_with(path) && !path.starts_with(with) {
                push(
                    &site,
                    EditKind::ConstantReposition {
                        mode: Reposition::Swap { with: with.clone() },
                    },
                );
            }
        }
        if let Some((_, _, same, other)) = cluster_operands(node) {
            let n = same.len() + other.len();
            for group in proper_subsets(n, 1) {
                let gsite = Site::group(path.clone(), group.clone());
                push(&gsite, EditKind::ConstantReposition { mode: Reposition::Flip });
                if group.len() >= 2 {
                    let subst: &[Op] = if group.len() == 2 { &Op::BINARY } else { &[] };
                    targeted(&gsite, subst, &mut push);
                }
            }
            // Flipping every operand is also a single move.
            push(
                &Site::group(path.clone(), (0..n).collect()),
                EditKind::ConstantReposition { mode: Reposition::Flip },
            );
        }
    }
    out
}

/// Trees reachable from `tree` by one edit drawn from `palette`.
pub fn neighbors(tree: &Expr, palette: &Palette) -> Vec<(MutationEdit, Expr)> {
    candidate_edits(tree, palette)
        .into_iter()
        .filter_map(|e| mutate(tree, &e).ok().map(|t| (e, t)))
        .collect()
}

/// Whether one edit of any kind at any site turns `from` into `to`.
pub fn single_edit_reaches(from: &Expr, to: &Expr) -> bool {
    single_edit_between(from, to).is_some()
}

pub fn single_edit_between(from: &Expr, to: &Expr) -> Option<MutationEdit> {
    let palette = Palette::toward(to);
    let to = to.canonicalize();
    candidate_edits(from, &palette)
        .into_iter()
        .find(|e| mutate(from, e).is_ok_and(|t| t.same_structure(&to)))
}
