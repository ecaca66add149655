//! Expression trees over a closed set of fourteen real operators.
//!
//! An [`Expr`] is an immutable tree whose leaves are variables, numeric
//! literals, or named hidden constants carrying a default value. Trees are
//! written in a small infix syntax:
//!
//! ```text
//! C * m1 * m2 / r ^ 1.5
//! asin(C * n1 * sin(theta1) / n2)
//! N0 * exp(-1 * C * t)
//! ```
//!
//! `^` is right-associative and binds tighter than `*` and `/`. A `-`
//! directly in front of a number in operand position is part of the literal;
//! there is no general unary minus. Identifiers of the form `C`, `C1`, `C2`, ...
//! are reserved for hidden constants.
//!
//! Evaluation never panics on finite inputs. Domain violations and overflow
//! produce [`EvalResult::Undefined`]; a missing binding is reported separately
//! as an [`EvalError`] because it is a caller bug rather than a property of
//! the law.

pub(crate) mod canon;
mod compile;
mod eval;
mod parse;
mod print;

pub use compile::Compiled;
pub use eval::{apply_binary, apply_unary, Bindings};
pub use parse::{is_reserved_constant, parse, ParseError, ParseErrorKind, Symbols};
pub use print::format_literal;

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};

/// Floating-point types the evaluator can run on.
pub trait Scalar: Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// The fourteen operators. The set is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
}

impl Op {
    pub const ALL: [Op; 14] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::Pow,
        Op::Exp,
        Op::Log,
        Op::Sqrt,
        Op::Sin,
        Op::Cos,
        Op::Tan,
        Op::Asin,
        Op::Acos,
        Op::Atan,
    ];

    pub const BINARY: [Op; 5] = [Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow];

    pub const UNARY: [Op; 9] = [
        Op::Exp,
        Op::Log,
        Op::Sqrt,
        Op::Sin,
        Op::Cos,
        Op::Tan,
        Op::Asin,
        Op::Acos,
        Op::Atan,
    ];

    pub fn arity(self) -> usize {
        if self.is_binary() {
            2
        } else {
            1
        }
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow)
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Add | Op::Mul)
    }

    /// Infix symbol for binary operators, function name for unary ones.
    pub fn token(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::Pow => "^",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sqrt => "sqrt",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Tan => "tan",
            Op::Asin => "asin",
            Op::Acos => "acos",
            Op::Atan => "atan",
        }
    }

    pub fn from_function_name(name: &str) -> Option<Op> {
        Op::UNARY.iter().copied().find(|op| op.token() == name)
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            Op::Add | Op::Sub => 1,
            Op::Mul | Op::Div => 2,
            Op::Pow => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A named hidden constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstLeaf {
    pub name: String,
    pub default_value: f64,
    /// Opaque units annotation; never interpreted numerically.
    pub units: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Var(String),
    Lit(f64),
    Const(ConstLeaf),
    Apply(Op, Vec<Node>),
}

impl Node {
    pub fn var(name: impl Into<String>) -> Node {
        Node::Var(name.into())
    }

    pub fn lit(value: f64) -> Node {
        Node::Lit(value)
    }

    pub fn constant(name: impl Into<String>, default_value: f64) -> Node {
        Node::Const(ConstLeaf {
            name: name.into(),
            default_value,
            units: String::new(),
        })
    }

    pub fn binary(op: Op, lhs: Node, rhs: Node) -> Node {
        debug_assert!(op.is_binary());
        Node::Apply(op, vec![lhs, rhs])
    }

    pub fn unary(op: Op, arg: Node) -> Node {
        debug_assert!(!op.is_binary());
        Node::Apply(op, vec![arg])
    }

    pub fn children(&self) -> &[Node] {
        match self {
            Node::Apply(_, args) => args,
            _ => &[],
        }
    }

    pub fn op(&self) -> Option<Op> {
        match self {
            Node::Apply(op, _) => Some(*op),
            _ => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self, Node::Apply(..))
    }

    pub fn as_lit(&self) -> Option<f64> {
        match self {
            Node::Lit(v) => Some(*v),
            _ => None,
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(Node::node_count).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(Node::depth).max().unwrap_or(0)
    }

    pub fn get(&self, path: &[usize]) -> Option<&Node> {
        let mut node = self;
        for &i in path {
            node = node.children().get(i)?;
        }
        Some(node)
    }

    pub fn get_mut(&mut self, path: &[usize]) -> Option<&mut Node> {
        let mut node = self;
        for &i in path {
            node = match node {
                Node::Apply(_, args) => args.get_mut(i)?,
                _ => return None,
            };
        }
        Some(node)
    }

    /// Pre-order list of every node path.
    pub fn paths(&self) -> Vec<Vec<usize>> {
        fn walk(node: &Node, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            out.push(prefix.clone());
            for (i, child) in node.children().iter().enumerate() {
                prefix.push(i);
                walk(child, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    pub(crate) fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        for child in self.children() {
            child.visit(f);
        }
    }

    pub(crate) fn visit_mut(&mut self, f: &mut impl FnMut(&mut Node)) {
        f(self);
        if let Node::Apply(_, args) = self {
            for child in args {
                child.visit_mut(f);
            }
        }
    }
}

/// Canonical form and text of a raw node, skipping validation.
pub(crate) fn canonical_text(node: &Node) -> (Node, String) {
    let c = canon::canonical(node);
    let text = print::to_text(&c);
    (c, text)
}

/// Structural problems detected when building an [`Expr`].
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("operator {op} takes {expected} argument(s), found {found}")]
    Arity { op: Op, expected: usize, found: usize },
    #[error("constant {0} appears more than once")]
    DuplicateConstant(String),
    #[error("literal is not finite")]
    NonFiniteLiteral,
}

/// Missing inputs when evaluating.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no binding for variable {0}")]
    MissingBinding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Undefined {
    DomainError,
    Overflow,
}

/// Either a finite value or an undefined marker. Infinities never escape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalResult<T = f64> {
    Value(T),
    Undefined(Undefined),
}

impl<T: Copy> EvalResult<T> {
    pub fn value(self) -> Option<T> {
        match self {
            EvalResult::Value(v) => Some(v),
            EvalResult::Undefined(_) => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, EvalResult::Value(_))
    }
}

/// An immutable, validated expression tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
}

impl Expr {
    /// Validates arities, literal finiteness and constant-name uniqueness.
    pub fn new(root: Node) -> Result<Expr, ExprError> {
        let mut error = None;
        let mut seen = BTreeSet::new();
        root.visit(&mut |node| {
            if error.is_some() {
                return;
            }
            match node {
                Node::Apply(op, args) if args.len() != op.arity() => {
                    error = Some(ExprError::Arity {
                        op: *op,
                        expected: op.arity(),
                        found: args.len(),
                    })
                }
                Node::Lit(v) if !v.is_finite() => error = Some(ExprError::NonFiniteLiteral),
                Node::Const(c) if !seen.insert(c.name.as_str()) => {
                    error = Some(ExprError::DuplicateConstant(c.name.clone()))
                }
                _ => {}
            }
        });
        match error {
            Some(e) => Err(e),
            None => Ok(Expr { root }),
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.root.visit(&mut |n| {
            if let Node::Var(name) = n {
                out.insert(name.clone());
            }
        });
        out
    }

    /// Hidden constants in pre-order.
    pub fn constants(&self) -> Vec<&ConstLeaf> {
        let mut out = Vec::new();
        self.root.visit(&mut |n| {
            if let Node::Const(c) = n {
                out.push(c);
            }
        });
        out
    }

    pub fn constant_names(&self) -> Vec<String> {
        self.constants().iter().map(|c| c.name.clone()).collect()
    }

    /// Literal values in pre-order.
    pub fn literals(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.root.visit(&mut |n| {
            if let Node::Lit(v) = n {
                out.push(*v);
            }
        });
        out
    }

    /// Returns a copy whose constants carry the given default values.
    pub fn with_constant_values(&self, values: &[(String, f64)]) -> Expr {
        let mut root = self.root.clone();
        root.visit_mut(&mut |n| {
            if let Node::Const(c) = n {
                if let Some((_, v)) = values.iter().find(|(name, _)| *name == c.name) {
                    c.default_value = *v;
                }
            }
        });
        Expr { root }
    }

    /// Replaces every hidden constant by a literal holding its current value.
    pub fn inline_constants(&self) -> Expr {
        let mut root = self.root.clone();
        root.visit_mut(&mut |n| {
            if let Node::Const(c) = n {
                *n = Node::Lit(c.default_value);
            }
        });
        Expr { root }
    }

    pub fn canonicalize(&self) -> Expr {
        Expr {
            root: canon::canonical(&self.root),
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.canonicalize() == *self
    }

    /// Post-order recursive evaluation in double precision.
    pub fn evaluate(&self, bindings: &impl Bindings<f64>) -> Result<EvalResult, EvalError> {
        eval::evaluate(&self.root, bindings)
    }

    /// Same as [`Expr::evaluate`] on another scalar type.
    pub fn evaluate_as<T: Scalar>(&self, bindings: &impl Bindings<T>) -> Result<EvalResult<T>, EvalError> {
        eval::evaluate(&self.root, bindings)
    }

    pub fn serialize(&self) -> String {
        self.to_string()
    }

    /// Structural equality ignoring constant default values and units.
    pub fn same_structure(&self, other: &Expr) -> bool {
        fn eq(a: &Node, b: &Node) -> bool {
            match (a, b) {
                (Node::Var(x), Node::Var(y)) => x == y,
                (Node::Lit(x), Node::Lit(y)) => x == y,
                (Node::Const(x), Node::Const(y)) => x.name == y.name,
                (Node::Apply(p, xs), Node::Apply(q, ys)) => p == q && xs.iter().zip(ys).all(|(x, y)| eq(x, y)),
                _ => false,
            }
        }
        eq(&self.root, &other.root)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::to_text(&self.root))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_arity() {
        let bad = Node::Apply(Op::Sin, vec![Node::var("x"), Node::var("y")]);
        assert!(matches!(Expr::new(bad), Err(ExprError::Arity { .. })));
    }

    #[test]
    fn rejects_repeated_constant() {
        let bad = Node::binary(Op::Add, Node::constant("C", 1.0), Node::constant("C", 1.0));
        assert_eq!(Expr::new(bad), Err(ExprError::DuplicateConstant("C".into())));
    }

    #[test]
    fn operator_set_is_fourteen() {
        assert_eq!(Op::ALL.len(), 14);
        assert_eq!(Op::BINARY.len() + Op::UNARY.len(), 14);
        assert!(Op::UNARY.iter().all(|op| op.arity() == 1));
    }

    #[test]
    fn paths_cover_every_node() {
        let e = parse("C * x ^ 2", &Symbols::new(["x"], ["C"])).unwrap();
        let paths = e.root().paths();
        assert_eq!(paths.len(), e.node_count());
        assert!(paths.iter().all(|p| e.root().get(p).is_some()));
    }
}
