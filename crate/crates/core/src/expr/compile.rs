use super::eval::{apply_binary, apply_unary};
use super::{EvalError, EvalResult, Expr, Node, Op, Undefined};

#[derive(Debug, Clone, Copy)]
enum Instr {
    Slot(usize),
    Lit(f64),
    Apply(Op),
}

/// A tree flattened to a post-order program over positional slots.
///
/// Used where one law is evaluated many times (fitting, dataset sampling).
/// The operator semantics are shared with [`Expr::evaluate`], so results are
/// bit-identical for the same inputs.
#[derive(Debug, Clone)]
pub struct Compiled {
    code: Vec<Instr>,
    slots: Vec<String>,
    depth: usize,
}

impl Compiled {
    /// `slots` names the positional inputs. Every variable must appear there;
    /// constants not listed are frozen at their default value.
    pub fn new(expr: &Expr, slots: &[String]) -> Result<Compiled, EvalError> {
        let mut code = Vec::with_capacity(expr.node_count());
        emit(expr.root(), slots, &mut code)?;
        Ok(Compiled {
            code,
            slots: slots.to_vec(),
            depth: expr.depth(),
        })
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn eval(&self, inputs: &[f64]) -> EvalResult {
        let mut stack = Vec::with_capacity(self.depth + 1);
        self.eval_with(inputs, &mut stack)
    }

    pub fn eval_with(&self, inputs: &[f64], stack: &mut Vec<f64>) -> EvalResult {
        stack.clear();
        for ins in &self.code {
            match *ins {
                Instr::Slot(i) => {
                    let v = inputs[i];
                    if !v.is_finite() {
                        return EvalResult::Undefined(Undefined::DomainError);
                    }
                    stack.push(v)
                }
                Instr::Lit(v) => stack.push(v),
                Instr::Apply(op) => {
                    let r = if op.is_binary() {
                        let b = stack.pop().unwrap();
                        let a = stack.pop().unwrap();
                        apply_binary(op, a, b)
                    } else {
                        let a = stack.pop().unwrap();
                        apply_unary(op, a)
                    };
                    match r {
                        EvalResult::Value(v) => stack.push(v),
                        undefined => return undefined,
                    }
                }
            }
        }
        EvalResult::Value(stack[0])
    }
}

fn emit(node: &Node, slots: &[String], code: &mut Vec<Instr>) -> Result<(), EvalError> {
    match node {
        Node::Lit(v) => code.push(Instr::Lit(*v)),
        Node::Var(name) => match slots.iter().position(|s| s == name) {
            Some(i) => code.push(Instr::Slot(i)),
            None => return Err(EvalError::MissingBinding(name.clone())),
        },
        Node::Const(c) => match slots.iter().position(|s| *s == c.name) {
            Some(i) => code.push(Instr::Slot(i)),
            None => code.push(Instr::Lit(c.default_value)),
        },
        Node::Apply(op, args) => {
            for a in args {
                emit(a, slots, code)?;
            }
            code.push(Instr::Apply(*op));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::{parse, Symbols};
    use super::*;

    #[test]
    fn matches_tree_evaluation() {
        let syms = Symbols::new(["x", "y"], ["C"]);
        let e = parse("C * sqrt(x) / (y - 1) + log(x)", &syms).unwrap();
        let slots = vec!["x".to_string(), "y".to_string()];
        let c = Compiled::new(&e, &slots).unwrap();
        for (x, y) in [(2.0, 3.0), (0.5, 1.0), (-1.0, 2.0), (9.0, 0.25)] {
            let tree = e.evaluate(&[("x", x), ("y", y)]).unwrap();
            assert_eq!(c.eval(&[x, y]), tree);
        }
    }

    #[test]
    fn constants_can_be_slots() {
        let syms = Symbols::new(["x"], ["C"]);
        let e = parse("C * x", &syms).unwrap();
        let c = Compiled::new(&e, &["x".into(), "C".into()]).unwrap();
        assert_eq!(c.eval(&[2.0, 4.0]), EvalResult::Value(8.0));
    }

    #[test]
    fn missing_variable_slot() {
        let syms = Symbols::new(["x"], Vec::<String>::new());
        let e = parse("x", &syms).unwrap();
        assert!(Compiled::new(&e, &[]).is_err());
    }
}
