use rand::seq::IndexedRandom;
use rand::Rng;

use super::mutation::{cluster_operands, replay, EditKind, MutationEdit, Reposition, Site};
use super::validate::validate_mutation_chain;
use super::EXPONENTS;
use crate::expr::{format_literal, Expr, Node, Op};

pub const MAX_TRIES: usize = 100;

const KINDS: [&str; 6] = [
    "operator-substitution",
    "exponent-change",
    "constant-reposition",
    "variable-drop",
    "term-coupling",
    "function-wrap",
];

/// Draws one new edit to append to `history` (edits already applied to
/// `base`) such that the whole sequence passes every guideline.
///
/// Kind is uniform over the six kinds, then the site is uniform among nodes
/// the kind can act on; up to [`MAX_TRIES`] draws are made.
pub fn random_edit<R: Rng + ?Sized>(base: &Expr, history: &[MutationEdit], rng: &mut R) -> Option<MutationEdit> {
    let current = match replay(base, history) {
        Ok(trees) => trees.last().cloned().unwrap_or_else(|| base.canonicalize()),
        Err(_) => return None,
    };
    let mut seq = history.to_vec();
    for _ in 0..MAX_TRIES {
        let Some(edit) = draw(&current, rng) else { continue };
        seq.push(edit);
        if validate_mutation_chain(base, &seq).passed() {
            return seq.pop();
        }
        seq.pop();
    }
    None
}

fn draw<R: Rng + ?Sized>(tree: &Expr, rng: &mut R) -> Option<MutationEdit> {
    let root = tree.root();
    let paths = root.paths();
    let at = |pred: &dyn Fn(&Node) -> bool| -> Vec<Vec<usize>> {
        paths.iter().filter(|p| pred(root.get(p).unwrap())).cloned().collect()
    };
    let kind = *KINDS.choose(rng)?;
    let (site, kind) = match kind {
        "operator-substitution" => {
            let path = at(&|n| n.op().is_some()).choose(rng)?.clone();
            let old = root.get(&path)?.op()?;
            let pool: Vec<Op> = Op::ALL
                .into_iter()
                .filter(|o| o.arity() == old.arity() && *o != old)
                .collect();
            (
                Site::at(path),
                EditKind::OperatorSubstitution { op: *pool.choose(rng)? },
            )
        }
        "exponent-change" => (
            Site::at(paths.choose(rng)?.clone()),
            EditKind::ExponentChange {
                value: *EXPONENTS.choose(rng)?,
            },
        ),
        "constant-reposition" => {
            let clusters = at(&|n| matches!(n.op(), Some(Op::Mul | Op::Div)));
            let path = clusters.choose(rng)?.clone();
            let (_, _, same, other) = cluster_operands(root.get(&path)?)?;
            let pick = rng.random_range(0..same.len() + other.len());
            (
                Site::group(path, vec![pick]),
                EditKind::ConstantReposition { mode: Reposition::Flip },
            )
        }
        "variable-drop" => (
            Site::at(at(&|n| matches!(n, Node::Var(_))).choose(rng)?.clone()),
            EditKind::VariableDrop,
        ),
        "term-coupling" => {
            let vars: Vec<String> = tree.variables().into_iter().collect();
            let term = if rng.random_bool(0.5) {
                vars.choose(rng)?.clone()
            } else {
                format_literal(*EXPONENTS[..10].choose(rng)?)
            };
            (
                Site::at(paths.choose(rng)?.clone()),
                EditKind::TermCoupling {
                    op: *Op::BINARY[..4].choose(rng)?,
                    term,
                    term_first: rng.random_bool(0.5),
                },
            )
        }
        _ => (
            Site::at(paths.choose(rng)?.clone()),
            EditKind::FunctionWrap {
                func: *Op::UNARY.choose(rng)?,
            },
        ),
    };
    Some(MutationEdit { site, kind })
}
