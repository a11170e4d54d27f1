//! Lazily evaluated computation graphs over arrays.
//!
//! Building a node records the operation and its static output shape; no
//! numbers are computed until [`LazyGraph::eval`]. During evaluation every
//! node tracks how many of its consumers still need its value. When the last
//! one runs and the node is reusable, the consumer overwrites the node's
//! buffer in place instead of allocating.
//!
//! A node whose buffer was handed to a consumer is left in the `Donated`
//! state: clean, but without a value. Asking for it again recomputes it.
//! Buffers are only donated when every consumer depends on exactly the same
//! set of leaves as the donor, so assigning a leaf never forces the
//! recomputation of a node that does not depend on it.
//!
//! [`LazyGraph::assign`] marks the assigned variable's descendants dirty;
//! the next `eval` recomputes only those.

use std::fmt::Write as _;

use crate::broadcast::broadcast_shape;
use crate::element::Element;
use crate::error::{Error, Result};
use crate::ndarray::{numel_of, Ndarray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Sin,
    Cos,
    Tan,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Neg,
    Abs,
    Relu,
    Ceil,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryFn {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min2,
    Max2,
}

impl UnaryFn {
    pub fn name(self) -> &'static str {
        match self {
            UnaryFn::Sin => "sin",
            UnaryFn::Cos => "cos",
            UnaryFn::Tan => "tan",
            UnaryFn::Tanh => "tanh",
            UnaryFn::Exp => "exp",
            UnaryFn::Log => "log",
            UnaryFn::Sqrt => "sqrt",
            UnaryFn::Neg => "neg",
            UnaryFn::Abs => "abs",
            UnaryFn::Relu => "relu",
            UnaryFn::Ceil => "ceil",
            UnaryFn::Sigmoid => "sigmoid",
        }
    }

    pub fn apply<T: Element>(self, x: &Ndarray<T>) -> Ndarray<T> {
        match self {
            UnaryFn::Sin => x.sin(),
            UnaryFn::Cos => x.cos(),
            UnaryFn::Tan => x.tan(),
            UnaryFn::Tanh => x.tanh(),
            UnaryFn::Exp => x.exp(),
            UnaryFn::Log => x.log(),
            UnaryFn::Sqrt => x.sqrt(),
            UnaryFn::Neg => x.neg(),
            UnaryFn::Abs => x.abs(),
            UnaryFn::Relu => x.relu(),
            UnaryFn::Ceil => x.ceil(),
            UnaryFn::Sigmoid => x.sigmoid(),
        }
    }

    fn apply_<T: Element>(self, x: &mut Ndarray<T>) {
        match self {
            UnaryFn::Sin => x.sin_(),
            UnaryFn::Cos => x.cos_(),
            UnaryFn::Tan => x.tan_(),
            UnaryFn::Tanh => x.tanh_(),
            UnaryFn::Exp => x.exp_(),
            UnaryFn::Log => x.log_(),
            UnaryFn::Sqrt => x.sqrt_(),
            UnaryFn::Neg => x.neg_(),
            UnaryFn::Abs => x.abs_(),
            UnaryFn::Relu => x.relu_(),
            UnaryFn::Ceil => x.ceil_(),
            UnaryFn::Sigmoid => x.sigmoid_(),
        };
    }
}

impl BinaryFn {
    pub fn name(self) -> &'static str {
        match self {
            BinaryFn::Add => "add",
            BinaryFn::Sub => "sub",
            BinaryFn::Mul => "mul",
            BinaryFn::Div => "div",
            BinaryFn::Pow => "pow",
            BinaryFn::Min2 => "min2",
            BinaryFn::Max2 => "max2",
        }
    }

    pub fn apply<T: Element>(self, a: &Ndarray<T>, b: &Ndarray<T>) -> Result<Ndarray<T>> {
        match self {
            BinaryFn::Add => a.add(b),
            BinaryFn::Sub => a.sub(b),
            BinaryFn::Mul => a.mul(b),
            BinaryFn::Div => a.div(b),
            BinaryFn::Pow => a.pow(b),
            BinaryFn::Min2 => a.min2(b),
            BinaryFn::Max2 => a.max2(b),
        }
    }

    fn scalar<T: Element>(self) -> fn(T, T) -> T {
        match self {
            BinaryFn::Add => |x, y| x + y,
            BinaryFn::Sub => |x, y| x - y,
            BinaryFn::Mul => |x, y| x * y,
            BinaryFn::Div => |x, y| x / y,
            BinaryFn::Pow => |x: T, y| x.powf(y),
            BinaryFn::Min2 => |x: T, y| x.min(y),
            BinaryFn::Max2 => |x: T, y| x.max(y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Var,
    Const,
    Unary(UnaryFn),
    Binary(BinaryFn),
}

#[derive(Debug)]
enum State<T> {
    Dirty,
    Ready(Ndarray<T>),
    Donated,
}

#[derive(Debug)]
struct Node<T> {
    op: Op,
    parents: Vec<NodeId>,
    /// One entry per parent reference, so `mul(a, a)` appears twice in `a`.
    consumers: Vec<NodeId>,
    shape: Vec<usize>,
    state: State<T>,
    retained: bool,
    /// Sorted ids of the leaf nodes this node depends on.
    leaves: Vec<usize>,
}

impl<T> Node<T> {
    fn is_leaf(&self) -> bool {
        matches!(self.op, Op::Var | Op::Const)
    }

    fn is_ready(&self) -> bool {
        matches!(self.state, State::Ready(_))
    }
}

/// Counters for inspecting evaluation behaviour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Non-leaf operations executed.
    pub ops_executed: usize,
    /// Fresh result buffers allocated.
    pub allocations: usize,
    /// Results written into a parent's buffer.
    pub reuses: usize,
    /// Donations that happened while another consumer still needed the
    /// buffer. Always zero unless the reuse rule is broken.
    pub reuse_violations: usize,
}

#[derive(Debug, Default)]
pub struct LazyGraph<T = f64> {
    nodes: Vec<Node<T>>,
    stats: EvalStats,
}

impl<T: Element> LazyGraph<T> {
    pub fn new() -> Self {
        LazyGraph {
            nodes: Vec::new(),
            stats: EvalStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn node(&self, id: NodeId) -> Result<&Node<T>> {
        self.nodes.get(id.0).ok_or(Error::UnknownNode(id.0))
    }

    fn push(&mut self, op: Op, parents: Vec<NodeId>, shape: Vec<usize>, state: State<T>) -> NodeId {
        let id = NodeId(self.nodes.len());
        let mut leaves: Vec<usize> = if parents.is_empty() {
            vec![id.0]
        } else {
            parents
                .iter()
                .flat_map(|p| self.nodes[p.0].leaves.iter().copied())
                .collect()
        };
        leaves.sort_unstable();
        leaves.dedup();
        for p in &parents {
            self.nodes[p.0].consumers.push(id);
        }
        self.nodes.push(Node {
            op,
            parents,
            consumers: Vec::new(),
            shape,
            state,
            retained: false,
            leaves,
        });
        id
    }

    /// An input of fixed shape; assign a value before evaluating.
    pub fn variable(&mut self, shape: &[usize]) -> Result<NodeId> {
        numel_of(shape)?;
        Ok(self.push(Op::Var, vec![], shape.to_vec(), State::Dirty))
    }

    pub fn constant(&mut self, value: Ndarray<T>) -> NodeId {
        let shape = value.shape().to_vec();
        self.push(Op::Const, vec![], shape, State::Ready(value))
    }

    pub fn unary(&mut self, f: UnaryFn, a: NodeId) -> Result<NodeId> {
        let shape = self.node(a)?.shape.clone();
        Ok(self.push(Op::Unary(f), vec![a], shape, State::Dirty))
    }

    pub fn binary(&mut self, f: BinaryFn, a: NodeId, b: NodeId) -> Result<NodeId> {
        let shape = broadcast_shape(&self.node(a)?.shape, &self.node(b)?.shape)?;
        Ok(self.push(Op::Binary(f), vec![a, b], shape, State::Dirty))
    }

    pub fn sin(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryFn::Sin, a)
    }

    pub fn cos(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryFn::Cos, a)
    }

    pub fn tan(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryFn::Tan, a)
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryFn::Neg, a)
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryFn::Exp, a)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryFn::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryFn::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryFn::Mul, a, b)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryFn::Div, a, b)
    }

    pub fn shape(&self, id: NodeId) -> Result<&[usize]> {
        Ok(&self.node(id)?.shape)
    }

    pub fn parents(&self, id: NodeId) -> Result<&[NodeId]> {
        Ok(&self.node(id)?.parents)
    }

    /// Number of parent references to `id` held by other nodes.
    pub fn consumers_total(&self, id: NodeId) -> Result<usize> {
        Ok(self.node(id)?.consumers.len())
    }

    /// Recounts parent references and compares with the stored counts.
    pub fn consumer_counts_consistent(&self) -> bool {
        let mut counts = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            for p in &n.parents {
                counts[p.0] += 1;
            }
        }
        self.nodes.iter().zip(&counts).all(|(n, &c)| n.consumers.len() == c)
    }

    pub fn is_dirty(&self, id: NodeId) -> Result<bool> {
        Ok(matches!(self.node(id)?.state, State::Dirty))
    }

    /// Marks a node as held outside the graph; its buffer is never reused.
    pub fn retain(&mut self, id: NodeId) -> Result<()> {
        self.node(id)?;
        self.nodes[id.0].retained = true;
        Ok(())
    }

    pub fn stats(&self) -> EvalStats {
        self.stats
    }

    pub fn reset_stats(&mut self) {
        self.stats = EvalStats::default();
    }

    /// Sets a variable and dirties all of its descendants.
    pub fn assign(&mut self, var: NodeId, value: Ndarray<T>) -> Result<()> {
        let node = self.node(var)?;
        if node.op != Op::Var {
            return Err(Error::InvalidParam(format!("node {} is not a variable", var.0)));
        }
        if node.shape != value.shape() {
            return Err(Error::ShapeMismatch {
                expected: node.shape.clone(),
                got: value.shape().to_vec(),
            });
        }
        self.nodes[var.0].state = State::Ready(value);
        let mut stack = self.nodes[var.0].consumers.clone();
        while let Some(c) = stack.pop() {
            let n = &mut self.nodes[c.0];
            if !matches!(n.state, State::Dirty) {
                n.state = State::Dirty;
            }
            stack.extend(n.consumers.iter().copied());
        }
        Ok(())
    }

    /// Borrow of a node's current value, if it holds one.
    pub fn value_ref(&self, id: NodeId) -> Option<&Ndarray<T>> {
        match &self.nodes.get(id.0)?.state {
            State::Ready(v) => Some(v),
            _ => None,
        }
    }

    /// Evaluates `target` and returns a copy of its value.
    pub fn eval(&mut self, target: NodeId) -> Result<Ndarray<T>> {
        self.eval_in_place(target)?;
        Ok(self.value_ref(target).expect("evaluated").clone())
    }

    /// Evaluates `target`, leaving the result inside the graph.
    pub fn eval_in_place(&mut self, target: NodeId) -> Result<()> {
        self.node(target)?;
        let mut pending = vec![false; self.nodes.len()];
        let mut stack = vec![target];
        while let Some(id) = stack.pop() {
            let n = &self.nodes[id.0];
            if n.is_ready() || pending[id.0] {
                continue;
            }
            if n.op == Op::Var {
                return Err(Error::Unassigned(id.0));
            }
            pending[id.0] = true;
            stack.extend(n.parents.iter().copied());
        }
        // Parent references from consumers that do not hold a value yet.
        let mut remaining: Vec<usize> = self
            .nodes
            .iter()
            .map(|n| {
                n.consumers
                    .iter()
                    .filter(|c| !self.nodes[c.0].is_ready())
                    .count()
            })
            .collect();
        for id in (0..self.nodes.len()).filter(|&i| pending[i]) {
            self.compute(NodeId(id), target, &remaining)?;
            for p in self.nodes[id].parents.clone() {
                remaining[p.0] -= 1;
            }
        }
        Ok(())
    }

    fn can_donate(&self, parent: NodeId, child: NodeId, target: NodeId, remaining: &[usize]) -> bool {
        let p = &self.nodes[parent.0];
        let c = &self.nodes[child.0];
        let refs = c.parents.iter().filter(|&&q| q == parent).count();
        !p.is_leaf()
            && !p.retained
            && parent != target
            && c.parents.iter().all(|q| self.nodes[q.0].shape == c.shape)
            && p.is_ready()
            && remaining[parent.0] == refs
            && p.consumers.iter().all(|k| self.nodes[k.0].leaves == p.leaves)
    }

    /// Independent check that no other consumer is still waiting to read
    /// `parent`.
    fn audit_donation(&mut self, parent: NodeId, child: NodeId) {
        let unsafe_read = self.nodes[parent.0]
            .consumers
            .iter()
            .any(|&k| k != child && matches!(self.nodes[k.0].state, State::Dirty));
        if unsafe_read {
            self.stats.reuse_violations += 1;
            debug_assert!(false, "buffer of node {} reused while still needed", parent.0);
        }
    }

    fn take(&mut self, id: NodeId) -> Ndarray<T> {
        match std::mem::replace(&mut self.nodes[id.0].state, State::Donated) {
            State::Ready(v) => v,
            _ => unreachable!("donor holds a value"),
        }
    }

    fn value(&self, id: NodeId) -> &Ndarray<T> {
        match &self.nodes[id.0].state {
            State::Ready(v) => v,
            _ => unreachable!("parent evaluated before child"),
        }
    }

    fn compute(&mut self, id: NodeId, target: NodeId, remaining: &[usize]) -> Result<()> {
        let op = self.nodes[id.0].op;
        let parents = self.nodes[id.0].parents.clone();
        let donor = parents
            .iter()
            .position(|&p| self.can_donate(p, id, target, remaining));
        let result = match (op, donor) {
            (Op::Unary(f), Some(_)) => {
                self.audit_donation(parents[0], id);
                let mut buf = self.take(parents[0]);
                f.apply_(&mut buf);
                self.stats.reuses += 1;
                buf
            }
            (Op::Unary(f), None) => {
                self.stats.allocations += 1;
                f.apply(self.value(parents[0]))
            }
            (Op::Binary(f), Some(k)) => {
                let (a, b) = (parents[0], parents[1]);
                self.audit_donation(parents[k], id);
                let g = f.scalar::<T>();
                let mut buf = self.take(parents[k]);
                if a == b {
                    buf.map_(|v| g(v, v));
                } else if k == 0 {
                    buf.zip_(self.value(b), g)?;
                } else {
                    buf.zip_(self.value(a), |y, x| g(x, y))?;
                }
                self.stats.reuses += 1;
                buf
            }
            (Op::Binary(f), None) => {
                self.stats.allocations += 1;
                f.apply(self.value(parents[0]), self.value(parents[1]))?
            }
            (Op::Var | Op::Const, _) => unreachable!("leaves are never pending"),
        };
        self.stats.ops_executed += 1;
        self.nodes[id.0].state = State::Ready(result);
        Ok(())
    }

    /// Graphviz rendering of the whole graph.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph lazy {\n  node [shape=box];\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let op = match n.op {
                Op::Var => "var",
                Op::Const => "const",
                Op::Unary(f) => f.name(),
                Op::Binary(f) => f.name(),
            };
            let state = match n.state {
                State::Dirty => "dirty",
                State::Ready(_) => "ready",
                State::Donated => "donated",
            };
            let _ = writeln!(
                s,
                "  n{i} [label=\"#{i} {op}\\n{} {:?}\\n{state}\"];",
                T::KIND.name(),
                n.shape
            );
        }
        for (i, n) in self.nodes.iter().enumerate() {
            for p in &n.parents {
                let _ = writeln!(s, "  n{} -> n{i};", p.0);
            }
        }
        s.push_str("}\n");
        s
    }
}
