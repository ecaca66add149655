use std::collections::BTreeMap;

use super::mutation::mutate;
use super::mutation::MutationEdit;
use super::validate::{candidate_edits, neighbors, Palette};
use crate::expr::Expr;

fn subtree_counts(e: &Expr) -> BTreeMap<String, i64> {
    let mut out = BTreeMap::new();
    for path in e.root().paths() {
        let node = e.root().get(&path).unwrap().clone();
        let text = Expr::new(node).map(|t| t.to_string()).unwrap_or_default();
        *out.entry(text).or_insert(0) += 1;
    }
    out
}

/// Size of the symmetric difference between the subtree multisets.
pub fn subtree_distance(a: &Expr, b: &Expr) -> usize {
    let (ca, cb) = (subtree_counts(a), subtree_counts(b));
    let mut d = 0;
    for (k, v) in &ca {
        d += (v - cb.get(k).copied().unwrap_or(0)).unsigned_abs() as usize;
    }
    for (k, v) in &cb {
        if !ca.contains_key(k) {
            d += *v as usize;
        }
    }
    d
}

/// Finds an edit sequence of at most `max_edits` turning `from` into `to`.
///
/// Depth-first over single-edit neighbors, expanding only those that move
/// strictly closer to `to` in subtree distance, nearest first. Returns the
/// first sequence found, not necessarily the shortest.
pub fn find_edits(from: &Expr, to: &Expr, max_edits: usize) -> Option<Vec<MutationEdit>> {
    find_edits_with(from, to, max_edits, &|_| true)
}

/// Like [`find_edits`], but every prefix of the returned sequence (and the
/// sequence itself) satisfies `accept`.
pub fn find_edits_with(
    from: &Expr,
    to: &Expr,
    max_edits: usize,
    accept: &dyn Fn(&[MutationEdit]) -> bool,
) -> Option<Vec<MutationEdit>> {
    let from = from.canonicalize();
    let to = to.canonicalize();
    if from.same_structure(&to) {
        return Some(Vec::new());
    }
    let palette = Palette::toward(&to);
    // Retry allowing sideways moves before giving up.
    [false, true].into_iter().find_map(|sideways| {
        (1..=max_edits).find_map(|limit| {
            let mut walk = Walk {
                to: &to,
                palette: &palette,
                accept,
                sideways,
            };
            walk.descend(&from, limit, &mut Vec::new())
        })
    })
}

struct Walk<'a> {
    to: &'a Expr,
    palette: &'a Palette,
    accept: &'a dyn Fn(&[MutationEdit]) -> bool,
    sideways: bool,
}

impl Walk<'_> {
    fn descend(&mut self, from: &Expr, left: usize, prefix: &mut Vec<MutationEdit>) -> Option<Vec<MutationEdit>> {
        for edit in candidate_edits(from, self.palette) {
            if mutate(from, &edit).is_ok_and(|t| t.same_structure(self.to)) {
                prefix.push(edit);
                if (self.accept)(prefix) {
                    return Some(prefix.clone());
                }
                prefix.pop();
            }
        }
        if left <= 1 {
            return None;
        }
        let here = subtree_distance(from, self.to);
        let mut next: Vec<(usize, MutationEdit, Expr)> = neighbors(from, self.palette)
            .into_iter()
            .map(|(e, t)| (subtree_distance(&t, self.to), e, t))
            .filter(|(d, _, t)| *d < here || (self.sideways && *d == here && !t.same_structure(from)))
            .collect();
        next.sort_by_key(|(d, _, _)| *d);
        for (_, edit, tree) in next {
            prefix.push(edit);
            if (self.accept)(prefix) {
                if let Some(found) = self.descend(&tree, left - 1, prefix) {
                    return Some(found);
                }
            }
            prefix.pop();
        }
        None
    }
}
