use serde::{Deserialize, Serialize};

use crate::expr::canon::{chain, gather};
use crate::expr::{parse, Expr, ExprError, Node, Op, ParseError, Symbols};

/// Where an edit applies.
///
/// Without `group` the edit targets the node at `path`. With `group` the node
/// at `path` must be a `+`/`-` or `*`/`/` cluster; the listed operand indices
/// (reading order, flattened) are lifted into one sub-expression which the
/// edit then targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub path: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<Vec<usize>>,
}

impl Site {
    pub fn at(path: Vec<usize>) -> Site {
        Site { path, group: None }
    }

    pub fn group(path: Vec<usize>, operands: Vec<usize>) -> Site {
        Site {
            path,
            group: Some(operands),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reposition {
    /// Moves the grouped factors across the fraction bar (or terms across
    /// the minus sign).
    Flip,
    /// Exchanges the site subtree with the subtree at `with`.
    Swap { with: Vec<usize> },
    /// Detaches the constant at the site and multiplies it onto `to`.
    Move { to: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EditKind {
    OperatorSubstitution {
        op: Op,
    },
    /// Sets the exponent of a power (a square root counts as exponent 0.5),
    /// the value of a literal, or raises any other node to `value`.
    ExponentChange {
        value: f64,
    },
    ConstantReposition {
        mode: Reposition,
    },
    VariableDrop,
    /// Replaces `x` with `op(x, term)`, or `op(term, x)` when `term_first`.
    TermCoupling {
        op: Op,
        term: String,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        term_first: bool,
    },
    FunctionWrap {
        func: Op,
    },
}

impl EditKind {
    pub fn name(&self) -> &'static str {
        match self {
            EditKind::OperatorSubstitution { .. } => "operator-substitution",
            EditKind::ExponentChange { .. } => "exponent-change",
            EditKind::ConstantReposition { .. } => "constant-reposition",
            EditKind::VariableDrop => "variable-drop",
            EditKind::TermCoupling { .. } => "term-coupling",
            EditKind::FunctionWrap { .. } => "function-wrap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationEdit {
    pub site: Site,
    #[serde(flatten)]
    pub kind: EditKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MutationError {
    #[error("no node at path {0:?}")]
    InvalidSite(Vec<usize>),
    #[error("node at {0:?} is not a + - or * / cluster")]
    NotACluster(Vec<usize>),
    #[error("bad operand group {0:?}")]
    BadGroup(Vec<usize>),
    #[error("cannot substitute {new} for {old}: arity differs or nothing changes")]
    Arity { old: String, new: Op },
    #[error("{0} is not a unary function")]
    NotAFunction(Op),
    #[error("{0} is not a binary operator")]
    NotBinary(Op),
    #[error("exponent change leaves the tree unchanged")]
    NoOp,
    #[error("site does not hold a {0}")]
    WrongLeaf(&'static str),
    #[error("variable at {0:?} is not an operand of + - * or /")]
    BadParent(Vec<usize>),
    #[error("paths {0:?} and {1:?} overlap")]
    Overlap(Vec<usize>, Vec<usize>),
    #[error("this edit does not accept an operand group")]
    GroupNotAllowed,
    #[error("term does not parse: {0}")]
    Term(#[from] ParseError),
    #[error(transparent)]
    Invalid(#[from] ExprError),
}

/// Applies one edit and canonicalizes the result. The input is untouched.
pub fn mutate(expr: &Expr, edit: &MutationEdit) -> Result<Expr, MutationError> {
    let root = expr.root().clone();
    let site = &edit.site;
    let out = match &edit.kind {
        EditKind::OperatorSubstitution { op } => transform(root, site, |n| substitute(n, *op))?,
        EditKind::ExponentChange { value } => transform(root, site, |n| reexponent(n, *value))?,
        EditKind::FunctionWrap { func } => {
            if func.is_binary() {
                return Err(MutationError::NotAFunction(*func));
            }
            transform(root, site, |n| Ok(Node::unary(*func, n)))?
        }
        EditKind::TermCoupling { op, term, term_first } => {
            if !op.is_binary() {
                return Err(MutationError::NotBinary(*op));
            }
            let term = parse(term, &Symbols::permissive())?.into_root();
            transform(root, site, |n| {
                Ok(if *term_first {
                    Node::binary(*op, term, n)
                } else {
                    Node::binary(*op, n, term)
                })
            })?
        }
        EditKind::VariableDrop => drop_variable(root, site)?,
        EditKind::ConstantReposition { mode } => match mode {
            Reposition::Flip => flip(root, site)?,
            Reposition::Swap { with } => swap(root, site, with)?,
            Reposition::Move { to } => move_constant(root, site, to)?,
        },
    };
    Ok(Expr::new(out)?.canonicalize())
}

/// Applies an edit sequence, returning every intermediate tree.
pub fn replay(base: &Expr, edits: &[MutationEdit]) -> Result<Vec<Expr>, (usize, MutationError)> {
    let mut trees = Vec::with_capacity(edits.len());
    let mut cur = base.clone();
    for (i, e) in edits.iter().enumerate() {
        cur = mutate(&cur, e).map_err(|err| (i, err))?;
        trees.push(cur.clone());
    }
    Ok(trees)
}

fn node_at<'a>(root: &'a Node, path: &[usize]) -> Result<&'a Node, MutationError> {
    root.get(path).ok_or_else(|| MutationError::InvalidSite(path.to_vec()))
}

fn replace(root: &mut Node, path: &[usize], node: Node) -> Result<(), MutationError> {
    let slot = root
        .get_mut(path)
        .ok_or_else(|| MutationError::InvalidSite(path.to_vec()))?;
    *slot = node;
    Ok(())
}

fn family(node: &Node) -> Option<(Op, Op)> {
    match node.op()? {
        Op::Add | Op::Sub => Some((Op::Add, Op::Sub)),
        Op::Mul | Op::Div => Some((Op::Mul, Op::Div)),
        _ => None,
    }
}

fn neutral(join: Op) -> Node {
    Node::Lit(if join == Op::Add { 0.0 } else { 1.0 })
}

/// Rebuilds a cluster without sorting: `same...` joined, then `other...`
/// applied with the inverse operator.
pub(crate) fn assemble(join: Op, inverse: Op, same: Vec<Node>, other: Vec<Node>) -> Node {
    let head = chain(join, same).unwrap_or_else(|| neutral(join));
    match chain(join, other) {
        Some(tail) => Node::binary(inverse, head, tail),
        None => head,
    }
}

/// Operands of the cluster rooted at `node`, split by polarity.
pub(crate) fn cluster_operands(node: &Node) -> Option<(Op, Op, Vec<Node>, Vec<Node>)> {
    let (join, inverse) = family(node)?;
    let (mut same, mut other) = (Vec::new(), Vec::new());
    gather(node, false, join, inverse, &mut same, &mut other);
    Some((join, inverse, same, other))
}

struct Split {
    join: Op,
    inverse: Op,
    picked_same: Vec<Node>,
    picked_other: Vec<Node>,
    rest_same: Vec<Node>,
    rest_other: Vec<Node>,
}

fn split(node: &Node, path: &[usize], group: &[usize]) -> Result<Split, MutationError> {
    let (join, inverse, same, other) =
        cluster_operands(node).ok_or_else(|| MutationError::NotACluster(path.to_vec()))?;
    let total = same.len() + other.len();
    let mut seen = vec![false; total];
    for &i in group {
        if i >= total || seen[i] {
            return Err(MutationError::BadGroup(group.to_vec()));
        }
        seen[i] = true;
    }
    if group.is_empty() {
        return Err(MutationError::BadGroup(group.to_vec()));
    }
    let n_same = same.len();
    let mut s = Split {
        join,
        inverse,
        picked_same: Vec::new(),
        picked_other: Vec::new(),
        rest_same: Vec::new(),
        rest_other: Vec::new(),
    };
    for (i, n) in same.into_iter().chain(other).enumerate() {
        match (seen[i], i < n_same) {
            (true, true) => s.picked_same.push(n),
            (true, false) => s.picked_other.push(n),
            (false, true) => s.rest_same.push(n),
            (false, false) => s.rest_other.push(n),
        }
    }
    Ok(s)
}

/// Runs `f` on the site's target and splices the result back.
fn transform(
    mut root: Node,
    site: &Site,
    f: impl FnOnce(Node) -> Result<Node, MutationError>,
) -> Result<Node, MutationError> {
    let target = node_at(&root, &site.path)?;
    let replacement = match &site.group {
        None => f(target.clone())?,
        Some(group) => {
            let mut s = split(target, &site.path, group)?;
            if s.picked_same.is_empty() {
                // Only inverse-side operands: lift them as a plain chain and
                // keep them on the inverse side.
                let lifted = chain(s.join, s.picked_other).expect("group is non-empty");
                s.rest_other.push(f(lifted)?);
            } else {
                let lifted = assemble(s.join, s.inverse, s.picked_same, s.picked_other);
                s.rest_same.push(f(lifted)?);
            }
            assemble(s.join, s.inverse, s.rest_same, s.rest_other)
        }
    };
    replace(&mut root, &site.path, replacement)?;
    Ok(root)
}

fn substitute(node: Node, op: Op) -> Result<Node, MutationError> {
    match node {
        Node::Apply(old, args) if old.arity() == op.arity() && old != op => Ok(Node::Apply(op, args)),
        other => Err(MutationError::Arity {
            old: match other.op() {
                Some(o) => o.to_string(),
                None => "leaf".into(),
            },
            new: op,
        }),
    }
}

fn reexponent(node: Node, value: f64) -> Result<Node, MutationError> {
    let unchanged = || Err(MutationError::NoOp);
    match node {
        Node::Lit(v) => {
            if v == value {
                unchanged()
            } else {
                Ok(Node::Lit(value))
            }
        }
        Node::Apply(Op::Pow, mut args) => {
            if args[1].as_lit() == Some(value) {
                return unchanged();
            }
            args[1] = Node::Lit(value);
            Ok(Node::Apply(Op::Pow, args))
        }
        Node::Apply(Op::Sqrt, mut args) => {
            if value == 0.5 {
                return unchanged();
            }
            Ok(Node::binary(Op::Pow, args.remove(0), Node::Lit(value)))
        }
        other => {
            if value == 1.0 {
                unchanged()
            } else {
                Ok(Node::binary(Op::Pow, other, Node::Lit(value)))
            }
        }
    }
}

fn drop_variable(mut root: Node, site: &Site) -> Result<Node, MutationError> {
    if site.group.is_some() {
        return Err(MutationError::GroupNotAllowed);
    }
    let path = &site.path;
    if !matches!(node_at(&root, path)?, Node::Var(_)) {
        return Err(MutationError::WrongLeaf("variable"));
    }
    let parent = match path.split_last() {
        Some((_, parent)) => node_at(&root, parent)?,
        None => return Err(MutationError::BadParent(path.clone())),
    };
    let fill = match family(parent) {
        Some((join, _)) => neutral(join),
        None => return Err(MutationError::BadParent(path.clone())),
    };
    replace(&mut root, path, fill)?;
    Ok(root)
}

fn flip(mut root: Node, site: &Site) -> Result<Node, MutationError> {
    let group = site.group.as_deref().unwrap_or(&[]);
    let target = node_at(&root, &site.path)?;
    let mut s = split(target, &site.path, group)?;
    s.rest_same.append(&mut s.picked_other);
    s.rest_other.append(&mut s.picked_same);
    let rebuilt = assemble(s.join, s.inverse, s.rest_same, s.rest_other);
    replace(&mut root, &site.path, rebuilt)?;
    Ok(root)
}

fn overlapping(a: &[usize], b: &[usize]) -> bool {
    a.starts_with(b) || b.starts_with(a)
}

fn swap(mut root: Node, site: &Site, with: &[usize]) -> Result<Node, MutationError> {
    if site.group.is_some() {
        return Err(MutationError::GroupNotAllowed);
    }
    if overlapping(&site.path, with) {
        return Err(MutationError::Overlap(site.path.clone(), with.to_vec()));
    }
    let a = node_at(&root, &site.path)?.clone();
    let b = node_at(&root, with)?.clone();
    replace(&mut root, &site.path, b)?;
    replace(&mut root, with, a)?;
    Ok(root)
}

fn move_constant(mut root: Node, site: &Site, to: &[usize]) -> Result<Node, MutationError> {
    if site.group.is_some() {
        return Err(MutationError::GroupNotAllowed);
    }
    let path = &site.path;
    let constant = node_at(&root, path)?.clone();
    if !matches!(constant, Node::Const(_)) {
        return Err(MutationError::WrongLeaf("constant"));
    }
    let in_product = path
        .split_last()
        .and_then(|(_, parent)| root.get(parent))
        .is_some_and(|p| matches!(p.op(), Some(Op::Mul | Op::Div)));
    if !in_product {
        return Err(MutationError::BadParent(path.clone()));
    }
    if overlapping(path, to) {
        return Err(MutationError::Overlap(path.clone(), to.to_vec()));
    }
    let target = node_at(&root, to)?.clone();
    replace(&mut root, to, Node::binary(Op::Mul, constant, target))?;
    replace(&mut root, path, Node::Lit(1.0))?;
    Ok(root)
}
