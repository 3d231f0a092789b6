//! Composable circuit descriptions.

use crate::error::Result;
use crate::gate::{Control, Gate};

/// One step of a circuit: a gate or a named sub-block.
#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Gate(Gate),
    Block(CircuitBlock),
}

/// A named, ordered list of gates and sub-blocks describing a unitary.
///
/// Sub-block names are kept so that gate counts can be attributed to the
/// pieces of the algorithm they come from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CircuitBlock {
    pub name: String,
    pub ops: Vec<Op>,
}

impl CircuitBlock {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ops: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate) -> &mut Self {
        self.ops.push(Op::Gate(gate));
        self
    }

    pub fn push_block(&mut self, block: CircuitBlock) -> &mut Self {
        self.ops.push(Op::Block(block));
        self
    }

    pub fn extend_gates<I: IntoIterator<Item = Gate>>(&mut self, gates: I) -> &mut Self {
        self.ops.extend(gates.into_iter().map(Op::Gate));
        self
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// The adjoint circuit: reversed order, each gate inverted.
    pub fn inverse(&self) -> Self {
        let ops = self
            .ops
            .iter()
            .rev()
            .map(|op| match op {
                Op::Gate(g) => Op::Gate(g.inverse()),
                Op::Block(b) => Op::Block(b.inverse()),
            })
            .collect();
        Self { name: format!("{}^dag", self.name), ops }
    }

    /// Same circuit with `extra` controls added to every gate.
    pub fn controlled(&self, extra: &[Control]) -> Self {
        let ops = self
            .ops
            .iter()
            .map(|op| match op {
                Op::Gate(g) => Op::Gate(g.clone().with_controls(extra)),
                Op::Block(b) => Op::Block(b.controlled(extra)),
            })
            .collect();
        Self { name: self.name.clone(), ops }
    }

    /// Renames the block, keeping its content.
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Depth-first visit of every gate together with the path of block names.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&[&'a str], &'a Gate)) {
        let mut path = vec![self.name.as_str()];
        self.visit_inner(&mut path, f);
    }

    fn visit_inner<'a>(&'a self, path: &mut Vec<&'a str>, f: &mut dyn FnMut(&[&'a str], &'a Gate)) {
        for op in &self.ops {
            match op {
                Op::Gate(g) => f(path, g),
                Op::Block(b) => {
                    path.push(b.name.as_str());
                    b.visit_inner(path, f);
                    path.pop();
                }
            }
        }
    }

    /// All gates in execution order.
    pub fn gates(&self) -> Vec<&Gate> {
        let mut out = Vec::new();
        self.visit(&mut |_, g| out.push(g));
        out
    }

    pub fn num_gates(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, _| n += 1);
        n
    }

    /// One more than the largest qubit index used (0 for an empty block).
    pub fn width(&self) -> usize {
        let mut w = 0;
        self.visit(&mut |_, g| {
            if let Some(m) = g.qubits().into_iter().max() {
                w = w.max(m + 1);
            }
        });
        w
    }

    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let mut res = Ok(());
        self.visit(&mut |_, g| {
            if res.is_ok() {
                res = g.validate(num_qubits);
            }
        });
        res
    }
}
