use std::cmp::Ordering;

use super::print::to_text;
use super::{Node, Op};

pub(crate) fn canonical(node: &Node) -> Node {
    match node {
        Node::Apply(op, args) => {
            let args: Vec<Node> = args.iter().map(canonical).collect();
            match op {
                Op::Add | Op::Sub => {
                    let (mut pos, mut neg) = (Vec::new(), Vec::new());
                    gather(&Node::Apply(*op, args), false, Op::Add, Op::Sub, &mut pos, &mut neg);
                    build_sum(pos, neg)
                }
                Op::Mul | Op::Div => {
                    let (mut num, mut den) = (Vec::new(), Vec::new());
                    gather(&Node::Apply(*op, args), false, Op::Mul, Op::Div, &mut num, &mut den);
                    build_product(num, den)
                }
                Op::Pow if args[1].as_lit() == Some(1.0) => args.into_iter().next().unwrap(),
                _ => Node::Apply(*op, args),
            }
        }
        leaf => leaf.clone(),
    }
}

/// Collects the operands of a `+`/`-` (or `*`/`/`) cluster by polarity.
pub(crate) fn gather(node: &Node, flipped: bool, join: Op, inverse: Op, same: &mut Vec<Node>, other: &mut Vec<Node>) {
    match node {
        Node::Apply(op, args) if *op == join => {
            gather(&args[0], flipped, join, inverse, same, other);
            gather(&args[1], flipped, join, inverse, same, other);
        }
        Node::Apply(op, args) if *op == inverse => {
            gather(&args[0], flipped, join, inverse, same, other);
            gather(&args[1], !flipped, join, inverse, same, other);
        }
        _ if flipped => other.push(node.clone()),
        _ => same.push(node.clone()),
    }
}

pub(crate) fn build_sum(mut pos: Vec<Node>, mut neg: Vec<Node>) -> Node {
    pos.retain(|n| n.as_lit() != Some(0.0));
    neg.retain(|n| n.as_lit() != Some(0.0));
    sort_operands(&mut pos);
    sort_operands(&mut neg);
    let head = chain(Op::Add, pos).unwrap_or(Node::Lit(0.0));
    neg.into_iter().fold(head, |acc, n| Node::binary(Op::Sub, acc, n))
}

pub(crate) fn build_product(mut num: Vec<Node>, mut den: Vec<Node>) -> Node {
    num.retain(|n| n.as_lit() != Some(1.0));
    den.retain(|n| n.as_lit() != Some(1.0));
    sort_operands(&mut num);
    sort_operands(&mut den);
    let top = chain(Op::Mul, num).unwrap_or(Node::Lit(1.0));
    match chain(Op::Mul, den) {
        Some(bottom) => Node::binary(Op::Div, top, bottom),
        None => top,
    }
}

/// Left-associated chain `((a op b) op c) ...`.
pub(crate) fn chain(op: Op, items: Vec<Node>) -> Option<Node> {
    items.into_iter().reduce(|acc, n| Node::binary(op, acc, n))
}

fn rank(node: &Node) -> u8 {
    match node {
        Node::Lit(_) => 0,
        Node::Const(_) => 1,
        Node::Var(_) => 2,
        Node::Apply(..) => 3,
    }
}

/// Total order used for commutative operands: literals by value, then
/// constants and variables by name, then compound terms by their text.
pub(crate) fn compare(a: &Node, b: &Node) -> Ordering {
    rank(a).cmp(&rank(b)).then_with(|| match (a, b) {
        (Node::Lit(x), Node::Lit(y)) => x.total_cmp(y),
        (Node::Const(x), Node::Const(y)) => x.name.cmp(&y.name),
        (Node::Var(x), Node::Var(y)) => x.cmp(y),
        _ => to_text(a).cmp(&to_text(b)),
    })
}

fn sort_operands(items: &mut [Node]) {
    items.sort_by(compare);
}
