//! Tape-based reverse-mode differentiation over a small scalar primitive
//! set (add, sub, mul, div, exp, max, affine constants).
//!
//! The computation graph of the training loss is static per pruning stage,
//! so a purpose-built tape is enough: nodes are appended in topological
//! order with their local partials cached at forward time, and a single
//! backward sweep accumulates adjoints.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone, Copy)]
struct Node {
    // up to two parents with cached local partials
    parents: [(usize, f64); 2],
    n_parents: u8,
}

/// Append-only record of a forward evaluation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    values: Vec<f64>,
    n_inputs: usize,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: f64, node: Node) -> Var {
        self.nodes.push(node);
        self.values.push(value);
        Var(self.nodes.len() - 1)
    }

    /// Registers an input variable. Inputs must be created before any
    /// derived nodes so that `gradient` can report them in order.
    pub fn input(&mut self, value: f64) -> Var {
        debug_assert_eq!(self.n_inputs, self.nodes.len(), "inputs must come first");
        self.n_inputs += 1;
        self.push(
            value,
            Node {
                parents: [(0, 0.0); 2],
                n_parents: 0,
            },
        )
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(
            value,
            Node {
                parents: [(0, 0.0); 2],
                n_parents: 0,
            },
        )
    }

    pub fn value(&self, v: Var) -> f64 {
        self.values[v.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.values[a.0] + self.values[b.0];
        self.push(
            v,
            Node {
                parents: [(a.0, 1.0), (b.0, 1.0)],
                n_parents: 2,
            },
        )
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.values[a.0] - self.values[b.0];
        self.push(
            v,
            Node {
                parents: [(a.0, 1.0), (b.0, -1.0)],
                n_parents: 2,
            },
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.values[a.0], self.values[b.0]);
        self.push(
            va * vb,
            Node {
                parents: [(a.0, vb), (b.0, va)],
                n_parents: 2,
            },
        )
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.values[a.0], self.values[b.0]);
        if vb == 0.0 {
            return Err(Error::Domain(alloc::string::String::from(
                "division by zero on tape",
            )));
        }
        Ok(self.push(
            va / vb,
            Node {
                parents: [(a.0, 1.0 / vb), (b.0, -va / (vb * vb))],
                n_parents: 2,
            },
        ))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = libm::exp(self.values[a.0]);
        self.push(
            v,
            Node {
                parents: [(a.0, v), (0, 0.0)],
                n_parents: 1,
            },
        )
    }

    /// Subgradient convention: on ties the gradient routes to the first
    /// argument.
    pub fn max(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.values[a.0], self.values[b.0]);
        if va >= vb {
            self.push(
                va,
                Node {
                    parents: [(a.0, 1.0), (b.0, 0.0)],
                    n_parents: 2,
                },
            )
        } else {
            self.push(
                vb,
                Node {
                    parents: [(a.0, 0.0), (b.0, 1.0)],
                    n_parents: 2,
                },
            )
        }
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.push(
            self.values[a.0] * k,
            Node {
                parents: [(a.0, k), (0, 0.0)],
                n_parents: 1,
            },
        )
    }

    pub fn add_const(&mut self, a: Var, k: f64) -> Var {
        self.push(
            self.values[a.0] + k,
            Node {
                parents: [(a.0, 1.0), (0, 0.0)],
                n_parents: 1,
            },
        )
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    /// Sum of a slice of variables (fixed left-to-right order).
    pub fn sum(&mut self, vars: &[Var]) -> Var {
        match vars {
            [] => self.constant(0.0),
            [first, rest @ ..] => {
                let mut acc = *first;
                for v in rest {
                    acc = self.add(acc, *v);
                }
                acc
            }
        }
    }

    /// Maximum of a nonempty slice (first-argument tie convention applies
    /// pairwise, so the earliest maximal element receives the gradient).
    pub fn max_of(&mut self, vars: &[Var]) -> Result<Var> {
        let mut it = vars.iter();
        let mut acc = *it.next().ok_or_else(|| {
            Error::Domain(alloc::string::String::from("max of empty sequence"))
        })?;
        for v in it {
            acc = self.max(acc, *v);
        }
        Ok(acc)
    }

    /// One backward sweep from `output`; returns d(output)/d(input_i) for
    /// every registered input, in registration order.
    pub fn gradient(&self, output: Var) -> Vec<f64> {
        let mut adjoint = alloc::vec![0.0; self.nodes.len()];
        adjoint[output.0] = 1.0;
        for i in (0..self.nodes.len()).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = &self.nodes[i];
            for p in 0..node.n_parents as usize {
                let (parent, partial) = node.parents[p];
                adjoint[parent] += a * partial;
            }
        }
        adjoint.truncate(self.n_inputs);
        adjoint
    }
}
