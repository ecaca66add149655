use super::{Node, Op};

/// Shortest decimal text that parses back to exactly `v`.
pub fn format_literal(v: f64) -> String {
    let a = v.abs();
    if v == v.trunc() && a < 1e15 {
        format!("{}", v as i64)
    } else if (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub(crate) fn to_text(node: &Node) -> String {
    let mut out = String::new();
    write(node, &mut out);
    out
}

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Apply(op, _) => op.precedence(),
        _ => 4,
    }
}

fn is_negative_literal(node: &Node) -> bool {
    matches!(node, Node::Lit(v) if v.is_sign_negative() && *v != 0.0)
}

fn write(node: &Node, out: &mut String) {
    match node {
        Node::Var(name) => out.push_str(name),
        Node::Const(c) => out.push_str(&c.name),
        Node::Lit(v) => out.push_str(&format_literal(*v)),
        Node::Apply(op, args) if !op.is_binary() => {
            out.push_str(op.token());
            out.push('(');
            write(&args[0], out);
            out.push(')');
        }
        Node::Apply(op, args) => {
            let p = op.precedence();
            let (lhs, rhs) = (&args[0], &args[1]);
            let left_parens = if *op == Op::Pow {
                precedence(lhs) <= p || is_negative_literal(lhs)
            } else {
                precedence(lhs) < p
            };
            let right_parens = if *op == Op::Pow {
                precedence(rhs) < p
            } else {
                precedence(rhs) <= p
            };
            wrap(lhs, left_parens, out);
            out.push(' ');
            out.push_str(op.token());
            out.push(' ');
            wrap(rhs, right_parens, out);
        }
    }
}

fn wrap(node: &Node, parens: bool, out: &mut String) {
    if parens {
        out.push('(');
        write(node, out);
        out.push(')');
    } else {
        write(node, out);
    }
}
