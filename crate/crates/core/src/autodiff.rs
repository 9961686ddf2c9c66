//! Minimal reverse-mode automatic differentiation on a flat tape.
//!
//! Built for the neural-ODE transform: the training objective is taped
//! through the unrolled fixed-step solver and one backward sweep yields
//! exact parameter gradients of the discrete map. Nodes carry at most two
//! parents with precomputed local partials, so the sweep is two fused
//! multiply-adds per node.

use crate::special::sigmoid;

#[derive(Clone, Copy)]
struct Node {
    p0: u32,
    p1: u32,
    d0: f64,
    d1: f64,
}

/// Handle to a tape position together with its forward value.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    idx: u32,
    pub val: f64,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        Tape { nodes: Vec::with_capacity(n) }
    }

    /// Drop all nodes but keep the allocation (tapes are reused per point).
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Independent variable (or constant; constants simply never receive
    /// adjoint contributions that matter).
    pub fn leaf(&mut self, val: f64) -> Var {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node { p0: idx, p1: idx, d0: 0.0, d1: 0.0 });
        Var { idx, val }
    }

    fn push1(&mut self, p: Var, d: f64, val: f64) -> Var {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node { p0: p.idx, p1: p.idx, d0: d, d1: 0.0 });
        Var { idx, val }
    }

    fn push2(&mut self, a: Var, da: f64, b: Var, db: f64, val: f64) -> Var {
        let idx = self.nodes.len() as u32;
        self.nodes.push(Node { p0: a.idx, p1: b.idx, d0: da, d1: db });
        Var { idx, val }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.push2(a, 1.0, b, 1.0, a.val + b.val)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.push2(a, 1.0, b, -1.0, a.val - b.val)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.push2(a, b.val, b, a.val, a.val * b.val)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let inv = 1.0 / b.val;
        self.push2(a, inv, b, -a.val * inv * inv, a.val * inv)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.push1(a, -1.0, -a.val)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        self.push1(a, 1.0, a.val + c)
    }

    pub fn mul_const(&mut self, a: Var, c: f64) -> Var {
        self.push1(a, c, a.val * c)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let e = a.val.exp();
        self.push1(a, e, e)
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.push1(a, 1.0 / a.val, a.val.ln())
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let s = a.val.sqrt();
        self.push1(a, 0.5 / s, s)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = a.val.tanh();
        self.push1(a, 1.0 - t * t, t)
    }

    /// swish(x) = x·σ(x); local partial is swish′.
    pub fn swish(&mut self, a: Var) -> Var {
        let s = sigmoid(a.val);
        let val = a.val * s;
        let d = s * (1.0 + a.val * (1.0 - s));
        self.push1(a, d, val)
    }

    /// swish′(x) as a value node; its local partial is swish″. Needed when
    /// the solver's sensitivity state is itself part of the objective.
    pub fn swish_deriv(&mut self, a: Var) -> Var {
        let s = sigmoid(a.val);
        let val = s * (1.0 + a.val * (1.0 - s));
        let d = s * (1.0 - s) * (2.0 + a.val * (1.0 - 2.0 * s));
        self.push1(a, d, val)
    }

    /// Adjoints of a single output with respect to every node.
    pub fn gradient(&self, output: Var) -> Vec<f64> {
        let mut adj = vec![0.0f64; self.nodes.len()];
        adj[output.idx as usize] = 1.0;
        for i in (0..self.nodes.len()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = self.nodes[i];
            if (n.p0 as usize) != i {
                adj[n.p0 as usize] += n.d0 * a;
            }
            if (n.p1 as usize) != i {
                adj[n.p1 as usize] += n.d1 * a;
            }
        }
        adj
    }

    /// Adjoints of two outputs in one sweep; entry i is
    /// (∂out0/∂node_i, ∂out1/∂node_i).
    pub fn gradient_pair(&self, out0: Var, out1: Var) -> Vec<[f64; 2]> {
        let mut buf = Vec::new();
        self.gradient_pair_into(out0, out1, &mut buf);
        buf
    }

    /// Same as `gradient_pair` but reusing the caller's buffer, for hot
    /// loops that sweep one tape per data point.
    pub fn gradient_pair_into(&self, out0: Var, out1: Var, adj: &mut Vec<[f64; 2]>) {
        adj.clear();
        adj.resize(self.nodes.len(), [0.0f64; 2]);
        adj[out0.idx as usize][0] = 1.0;
        adj[out1.idx as usize][1] += 1.0;
        for i in (0..self.nodes.len()).rev() {
            let a = adj[i];
            if a[0] == 0.0 && a[1] == 0.0 {
                continue;
            }
            let n = self.nodes[i];
            if (n.p0 as usize) != i {
                let p = &mut adj[n.p0 as usize];
                p[0] += n.d0 * a[0];
                p[1] += n.d0 * a[1];
            }
            if (n.p1 as usize) != i {
                let p = &mut adj[n.p1 as usize];
                p[0] += n.d1 * a[0];
                p[1] += n.d1 * a[1];
            }
        }
    }

    /// Adjoint lookup helper.
    pub fn adjoint_of(adj: &[f64], v: Var) -> f64 {
        adj[v.idx as usize]
    }

    pub fn adjoint_pair_of(adj: &[[f64; 2]], v: Var) -> [f64; 2] {
        adj[v.idx as usize]
    }
}
