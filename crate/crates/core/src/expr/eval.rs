use std::collections::{BTreeMap, HashMap};

use super::{EvalError, EvalResult, Node, Op, Scalar, Undefined};

/// Name lookup for evaluation. Constants fall back to their default value
/// when the bindings do not mention them.
pub trait Bindings<T> {
    fn get(&self, name: &str) -> Option<T>;
}

impl<T: Copy> Bindings<T> for HashMap<String, T> {
    fn get(&self, name: &str) -> Option<T> {
        HashMap::get(self, name).copied()
    }
}

impl<T: Copy> Bindings<T> for BTreeMap<String, T> {
    fn get(&self, name: &str) -> Option<T> {
        BTreeMap::get(self, name).copied()
    }
}

impl<T: Copy> Bindings<T> for [(&str, T)] {
    fn get(&self, name: &str) -> Option<T> {
        self.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }
}

impl<T: Copy, const N: usize> Bindings<T> for [(&str, T); N] {
    fn get(&self, name: &str) -> Option<T> {
        Bindings::get(self.as_slice(), name)
    }
}

impl<T: Copy> Bindings<T> for Vec<(String, T)> {
    fn get(&self, name: &str) -> Option<T> {
        self.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }
}

fn settle<T: Scalar>(v: T) -> EvalResult<T> {
    if v.is_nan() {
        EvalResult::Undefined(Undefined::DomainError)
    } else if v.is_infinite() {
        EvalResult::Undefined(Undefined::Overflow)
    } else {
        EvalResult::Value(v)
    }
}

fn domain<T>() -> EvalResult<T> {
    EvalResult::Undefined(Undefined::DomainError)
}

/// Applies a binary operator to finite operands.
pub fn apply_binary<T: Scalar>(op: Op, a: T, b: T) -> EvalResult<T> {
    match op {
        Op::Add => settle(a + b),
        Op::Sub => settle(a - b),
        Op::Mul => settle(a * b),
        Op::Div => {
            if b == T::zero() {
                domain()
            } else {
                settle(a / b)
            }
        }
        Op::Pow => {
            let integral = b.fract() == T::zero();
            if (a < T::zero() && !integral) || (a == T::zero() && b < T::zero()) {
                domain()
            } else {
                settle(a.powf(b))
            }
        }
        _ => unreachable!("{op} is unary"),
    }
}

/// Applies a unary operator to a finite operand.
pub fn apply_unary<T: Scalar>(op: Op, a: T) -> EvalResult<T> {
    match op {
        Op::Exp => settle(a.exp()),
        Op::Log => {
            if a <= T::zero() {
                domain()
            } else {
                settle(a.ln())
            }
        }
        Op::Sqrt => {
            if a < T::zero() {
                domain()
            } else {
                settle(a.sqrt())
            }
        }
        Op::Sin => settle(a.sin()),
        Op::Cos => settle(a.cos()),
        Op::Tan => settle(a.tan()),
        Op::Asin | Op::Acos => {
            if a.abs() > T::one() {
                domain()
            } else if op == Op::Asin {
                settle(a.asin())
            } else {
                settle(a.acos())
            }
        }
        Op::Atan => settle(a.atan()),
        _ => unreachable!("{op} is binary"),
    }
}

pub(crate) fn evaluate<T: Scalar, B: Bindings<T> + ?Sized>(
    node: &Node,
    bindings: &B,
) -> Result<EvalResult<T>, EvalError> {
    Ok(match node {
        Node::Lit(v) => literal(*v),
        Node::Var(name) => match bindings.get(name) {
            Some(v) => settle(v),
            None => return Err(EvalError::MissingBinding(name.clone())),
        },
        Node::Const(c) => match bindings.get(&c.name) {
            Some(v) => settle(v),
            None => literal(c.default_value),
        },
        Node::Apply(op, args) => {
            // Every child is visited so a missing binding is always reported.
            let first = evaluate(&args[0], bindings)?;
            if op.is_binary() {
                let second = evaluate(&args[1], bindings)?;
                match (first, second) {
                    (EvalResult::Value(a), EvalResult::Value(b)) => apply_binary(*op, a, b),
                    (EvalResult::Undefined(u), _) | (_, EvalResult::Undefined(u)) => EvalResult::Undefined(u),
                }
            } else {
                match first {
                    EvalResult::Value(a) => apply_unary(*op, a),
                    undefined => undefined,
                }
            }
        }
    })
}

fn literal<T: Scalar>(v: f64) -> EvalResult<T> {
    match T::from_f64(v) {
        Some(x) => settle(x),
        None => domain(),
    }
}
