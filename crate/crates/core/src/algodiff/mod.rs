//! Nested forward- and reverse-mode algorithmic differentiation.
//!
//! A value is either a constant ([`AdValue::F`] / [`AdValue::Arr`]), a
//! forward-mode dual number carrying a tangent, or a reverse-mode node that
//! records its parents for the backward sweep. Every derivative operator
//! ([`diff`], [`grad`], ...) draws a fresh tag from a global counter; an
//! operation on values of different tags treats the lower-tagged ones as
//! constants. That keeps perturbations of nested derivative invocations
//! apart.
//!
//! Derivative rules are themselves written with differentiable operations,
//! so tangents and adjoints can be differentiated again (forward-over-reverse
//! Hessians, nested `diff`).
//!
//! ```
//! use strix::algodiff::{diff, grad, AdValue};
//! use strix::Ndarray;
//!
//! let d = diff(|x| Ok(x.sin() * x.clone()), 0.0).unwrap();
//! assert_eq!(d, 0.0);
//!
//! let x = Ndarray::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
//! let g = grad(|x| Ok((x * x).sum()), &x).unwrap();
//! assert_eq!(g.data(), &[2.0, 4.0, 6.0]);
//! ```

mod api;
mod graph;
mod ops;

pub use api::{
    diff, diff_ad, diff_value, grad, grad_ad, grad_value, hessian, jacobian, jvp, value_and_grads,
    vjp,
};
pub use graph::{AdGraph, GraphNode};
pub use ops::{add, div, matmul, mul, pow, sub};

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::ndarray::Ndarray;

pub type Arr = Ndarray<f64>;

static TAG: AtomicU64 = AtomicU64::new(1);
static NODE_ID: AtomicU64 = AtomicU64::new(1);

/// Allocates a fresh nesting tag. Tags only ever increase, so a derivative
/// operator invoked inside another one always holds the larger tag.
pub fn next_tag() -> u64 {
    TAG.fetch_add(1, Ordering::Relaxed)
}

fn next_id() -> u64 {
    NODE_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Clone)]
pub enum AdValue {
    /// Scalar constant.
    F(f64),
    /// Array constant.
    Arr(Rc<Arr>),
    Forward(Rc<Dual>),
    Reverse(Rc<RevNode>),
}

pub struct Dual {
    primal: AdValue,
    tangent: AdValue,
    tag: u64,
}

pub struct RevNode {
    primal: AdValue,
    adjoint: RefCell<AdValue>,
    fanout: Cell<usize>,
    op: RevOp,
    tag: u64,
    id: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum UnOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Exp,
    Log,
    Relu,
    Tanh,
    Sigmoid,
    Sum,
    /// Sum along an axis keeping it with size 1.
    SumKeep(usize),
    Transpose,
    Reshape(Vec<usize>),
    /// Broadcast to a shape (empty shape = scalar).
    Expand(Vec<usize>),
    /// Sum over broadcast dims down to a shape (empty shape = scalar).
    SumTo(Vec<usize>),
    Clamp(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    MatMul,
}

pub(crate) enum RevOp {
    Input,
    Unary(UnOp, AdValue),
    /// Operands as given; inactive ones are constants at this node's tag.
    Binary {
        op: BinOp,
        a: AdValue,
        b: AdValue,
        a_active: bool,
        b_active: bool,
    },
}

impl UnOp {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            UnOp::Neg => "neg",
            UnOp::Sin => "sin",
            UnOp::Cos => "cos",
            UnOp::Tan => "tan",
            UnOp::Sqrt => "sqrt",
            UnOp::Exp => "exp",
            UnOp::Log => "log",
            UnOp::Relu => "relu",
            UnOp::Tanh => "tanh",
            UnOp::Sigmoid => "sigmoid",
            UnOp::Sum => "sum",
            UnOp::SumKeep(_) => "sum_axis",
            UnOp::Transpose => "transpose",
            UnOp::Reshape(_) => "reshape",
            UnOp::Expand(_) => "expand",
            UnOp::SumTo(_) => "sum_to",
            UnOp::Clamp(..) => "clamp",
        }
    }
}

impl BinOp {
    pub(crate) fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Pow => "pow",
            BinOp::MatMul => "matmul",
        }
    }
}

impl RevNode {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn op_name(&self) -> &'static str {
        match &self.op {
            RevOp::Input => "var",
            RevOp::Unary(op, _) => op.name(),
            RevOp::Binary { op, .. } => op.name(),
        }
    }

    /// Active parents (same tag) of this node.
    pub(crate) fn parents(&self) -> Vec<&AdValue> {
        match &self.op {
            RevOp::Input => vec![],
            RevOp::Unary(_, a) => vec![a],
            RevOp::Binary {
                a,
                b,
                a_active,
                b_active,
                ..
            } => {
                let mut out = Vec::with_capacity(2);
                if *a_active {
                    out.push(a);
                }
                if *b_active {
                    out.push(b);
                }
                out
            }
        }
    }
}

impl AdValue {
    pub fn scalar(v: f64) -> Self {
        AdValue::F(v)
    }

    pub fn array(a: Arr) -> Self {
        AdValue::Arr(Rc::new(a))
    }

    /// Nesting tag; 0 for constants.
    pub fn tag(&self) -> u64 {
        match self {
            AdValue::F(_) | AdValue::Arr(_) => 0,
            AdValue::Forward(d) => d.tag,
            AdValue::Reverse(n) => n.tag,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, AdValue::F(_) | AdValue::Arr(_))
    }

    /// Strips one level of differentiation; constants return themselves.
    pub fn primal(&self) -> AdValue {
        match self {
            AdValue::F(_) | AdValue::Arr(_) => self.clone(),
            AdValue::Forward(d) => d.primal.clone(),
            AdValue::Reverse(n) => n.primal.clone(),
        }
    }

    /// Strips every level down to the underlying constant.
    pub fn raw(&self) -> AdValue {
        let mut v = self.clone();
        while !v.is_const() {
            v = v.primal();
        }
        v
    }

    /// Tangent of a forward value of the given tag; zero otherwise.
    pub fn tangent_at(&self, tag: u64) -> AdValue {
        match self {
            AdValue::Forward(d) if d.tag == tag => d.tangent.clone(),
            _ => self.zeros_like(),
        }
    }

    /// Value with perturbations of `tag` removed.
    pub fn primal_at(&self, tag: u64) -> AdValue {
        if self.tag() == tag {
            self.primal()
        } else {
            self.clone()
        }
    }

    /// Accumulated adjoint of a reverse node.
    pub fn adjoint(&self) -> Option<AdValue> {
        match self {
            AdValue::Reverse(n) => Some(n.adjoint.borrow().clone()),
            _ => None,
        }
    }

    /// Unique id of a reverse node.
    pub fn node_id(&self) -> Option<u64> {
        match self {
            AdValue::Reverse(n) => Some(n.id),
            _ => None,
        }
    }

    /// Shape of the underlying constant; empty for scalars.
    pub fn shape(&self) -> Vec<usize> {
        match self.raw() {
            AdValue::F(_) => vec![],
            AdValue::Arr(a) => a.shape().to_vec(),
            _ => unreachable!(),
        }
    }

    pub fn is_scalar(&self) -> bool {
        let s = self.shape();
        s.is_empty() || s.iter().product::<usize>() == 1
    }

    /// The underlying scalar, also for single-element arrays.
    pub fn to_f64(&self) -> Option<f64> {
        match self.raw() {
            AdValue::F(v) => Some(v),
            AdValue::Arr(a) if a.numel() == 1 => Some(a.first()),
            _ => None,
        }
    }

    /// The underlying array; scalars become shape `[1]`.
    pub fn to_array(&self) -> Arr {
        match self.raw() {
            AdValue::F(v) => Arr::scalar(v),
            AdValue::Arr(a) => (*a).clone(),
            _ => unreachable!(),
        }
    }

    pub(crate) fn zeros_like(&self) -> AdValue {
        let s = self.shape();
        if s.is_empty() {
            AdValue::F(0.0)
        } else {
            AdValue::array(Arr::zeros(&s).expect("valid shape"))
        }
    }

    pub(crate) fn ones_like(&self) -> AdValue {
        let s = self.shape();
        if s.is_empty() {
            AdValue::F(1.0)
        } else {
            AdValue::array(Arr::ones(&s).expect("valid shape"))
        }
    }

    /// Wraps `primal` as a forward value with the given tangent.
    pub fn make_forward(primal: AdValue, tangent: AdValue, tag: u64) -> Result<AdValue> {
        if primal.shape() != tangent.shape() {
            return Err(Error::Contract(format!(
                "tangent shape {:?} differs from primal shape {:?}",
                tangent.shape(),
                primal.shape()
            )));
        }
        Ok(AdValue::Forward(Rc::new(Dual {
            primal,
            tangent,
            tag,
        })))
    }

    /// Wraps `primal` as a reverse-mode input node.
    pub fn make_reverse(primal: AdValue, tag: u64) -> AdValue {
        Self::reverse_node(primal, RevOp::Input, tag)
    }

    pub(crate) fn reverse_node(primal: AdValue, op: RevOp, tag: u64) -> AdValue {
        let adjoint = RefCell::new(primal.zeros_like());
        AdValue::Reverse(Rc::new(RevNode {
            primal,
            adjoint,
            fanout: Cell::new(0),
            op,
            tag,
            id: next_id(),
        }))
    }
}

impl From<f64> for AdValue {
    fn from(v: f64) -> Self {
        AdValue::F(v)
    }
}

impl From<Arr> for AdValue {
    fn from(a: Arr) -> Self {
        AdValue::array(a)
    }
}

impl fmt::Debug for AdValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdValue::F(v) => write!(f, "F({v})"),
            AdValue::Arr(a) => write!(f, "Arr({:?} {:?})", a.shape(), a.data()),
            AdValue::Forward(d) => f
                .debug_struct("Forward")
                .field("primal", &d.primal)
                .field("tangent", &d.tangent)
                .field("tag", &d.tag)
                .finish(),
            AdValue::Reverse(n) => f
                .debug_struct("Reverse")
                .field("id", &n.id)
                .field("op", &n.op_name())
                .field("primal", &n.primal)
                .field("tag", &n.tag)
                .finish(),
        }
    }
}

/// Clears adjoints and counts how many times each node is referenced from
/// `root`'s reverse subgraph.
pub(crate) fn reverse_reset(root: &AdValue) {
    let mut stack = vec![root.clone()];
    while let Some(v) = stack.pop() {
        if let AdValue::Reverse(n) = &v {
            n.fanout.set(n.fanout.get() + 1);
            if n.fanout.get() == 1 {
                *n.adjoint.borrow_mut() = n.primal.zeros_like();
                stack.extend(n.parents().into_iter().cloned());
            }
        }
    }
}

/// Propagates `seed` from `root` back to the inputs. A node's rule fires
/// once, after every consumer has contributed to its adjoint. Returns the
/// number of nodes whose rule fired.
pub(crate) fn reverse_push(seed: AdValue, root: &AdValue) -> Result<usize> {
    let mut fired = 0;
    let mut stack = vec![(seed, root.clone())];
    while let Some((d, v)) = stack.pop() {
        let AdValue::Reverse(n) = &v else { continue };
        let acc = ops::add(&n.adjoint.borrow(), &d)?;
        *n.adjoint.borrow_mut() = acc;
        let left = n.fanout.get().saturating_sub(1);
        n.fanout.set(left);
        if left == 0 {
            fired += 1;
            let adj = n.adjoint.borrow().clone();
            stack.extend(ops::backward(n, &adj)?);
        }
    }
    Ok(fired)
}

/// Runs a full backward sweep from `root` seeded with `seed` and returns the
/// number of nodes visited.
pub fn reverse_prop(seed: &AdValue, root: &AdValue) -> Result<usize> {
    if seed.shape() != root.shape() {
        return Err(Error::Contract(format!(
            "seed shape {:?} differs from output shape {:?}",
            seed.shape(),
            root.shape()
        )));
    }
    reverse_reset(root);
    reverse_push(seed.clone(), root)
}
