mod common;

use std::collections::BTreeSet;

use common::*;
use proptest::prelude::*;
use strix::lazy::{BinaryFn, LazyGraph, NodeId, UnaryFn};

const UNARY: [UnaryFn; 12] = [
    UnaryFn::Sin,
    UnaryFn::Cos,
    UnaryFn::Tan,
    UnaryFn::Tanh,
    UnaryFn::Exp,
    UnaryFn::Log,
    UnaryFn::Sqrt,
    UnaryFn::Neg,
    UnaryFn::Abs,
    UnaryFn::Relu,
    UnaryFn::Ceil,
    UnaryFn::Sigmoid,
];
const BINARY: [BinaryFn; 7] = [
    BinaryFn::Add,
    BinaryFn::Sub,
    BinaryFn::Mul,
    BinaryFn::Div,
    BinaryFn::Pow,
    BinaryFn::Min2,
    BinaryFn::Max2,
];

#[derive(Debug, Clone)]
enum Spec {
    Var(Vec<usize>),
    Const(Vec<usize>, u64),
    Un(usize, usize),
    Bin(usize, usize, usize),
}

/// Leaves first (some with a broadcastable row shape), then random ops
/// over earlier nodes.
fn dag_strategy() -> impl Strategy<Value = Vec<Spec>> {
    (1usize..4, 0usize..2, 3usize..28, proptest::collection::vec((any::<bool>(), 0usize..64, 0usize..64, 0usize..64), 30), any::<u64>())
        .prop_map(|(vars, consts, ops, picks, seed)| {
            let mut specs = Vec::new();
            for v in 0..vars {
                specs.push(Spec::Var(if v == 2 { vec![1, 3] } else { vec![2, 3] }));
            }
            for c in 0..consts {
                specs.push(Spec::Const(vec![3], seed + c as u64));
            }
            for &(binary, f, a, b) in picks.iter().take(ops) {
                let n = specs.len();
                specs.push(if binary {
                    Spec::Bin(f % BINARY.len(), a % n, b % n)
                } else {
                    Spec::Un(f % UNARY.len(), a % n)
                });
            }
            specs
        })
}

fn eager_unary(f: UnaryFn, x: &Arr) -> Arr {
    match f {
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

fn eager_binary(f: BinaryFn, a: &Arr, b: &Arr) -> Arr {
    match f {
        BinaryFn::Add => a.add(b),
        BinaryFn::Sub => a.sub(b),
        BinaryFn::Mul => a.mul(b),
        BinaryFn::Div => a.div(b),
        BinaryFn::Pow => a.pow(b),
        BinaryFn::Min2 => a.min2(b),
        BinaryFn::Max2 => a.max2(b),
    }
    .unwrap()
}

/// Direct evaluation of every node from the current leaf values.
fn eager(specs: &[Spec], leaves: &[Option<Arr>]) -> Vec<Arr> {
    let mut vals: Vec<Arr> = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let v = match s {
            Spec::Var(_) | Spec::Const(..) => leaves[i].clone().unwrap(),
            Spec::Un(f, a) => eager_unary(UNARY[*f], &vals[*a]),
            Spec::Bin(f, a, b) => eager_binary(BINARY[*f], &vals[*a], &vals[*b]),
        };
        vals.push(v);
    }
    vals
}

struct Built {
    g: LazyGraph,
    ids: Vec<NodeId>,
    leaves: Vec<Option<Arr>>,
}

fn build(specs: &[Spec], seed: u64) -> Built {
    let mut g = LazyGraph::new();
    let mut ids = Vec::new();
    let mut leaves = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let (id, leaf) = match s {
            Spec::Var(shape) => {
                let id = g.variable(shape).unwrap();
                let v = centered(shape, seed + i as u64).map(|v| v * 2.0);
                g.assign(id, v.clone()).unwrap();
                (id, Some(v))
            }
            Spec::Const(shape, s) => {
                let v = centered(shape, *s);
                (g.constant(v.clone()), Some(v))
            }
            Spec::Un(f, a) => (g.unary(UNARY[*f], ids[*a]).unwrap(), None),
            Spec::Bin(f, a, b) => (g.binary(BINARY[*f], ids[*a], ids[*b]).unwrap(), None),
        };
        ids.push(id);
        leaves.push(leaf);
    }
    Built { g, ids, leaves }
}

fn parents(s: &Spec) -> Vec<usize> {
    match s {
        Spec::Un(_, a) => vec![*a],
        Spec::Bin(_, a, b) => vec![*a, *b],
        _ => vec![],
    }
}

fn ancestors(specs: &[Spec], t: usize) -> BTreeSet<usize> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![t];
    while let Some(n) = stack.pop() {
        if seen.insert(n) {
            stack.extend(parents(&specs[n]));
        }
    }
    seen
}

fn descendants(specs: &[Spec], v: usize) -> BTreeSet<usize> {
    let mut set = BTreeSet::from([v]);
    for (i, s) in specs.iter().enumerate().skip(v + 1) {
        if parents(s).iter().any(|p| set.contains(p)) {
            set.insert(i);
        }
    }
    set.remove(&v);
    set
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn random_dags_match_eager(specs in dag_strategy(), seed in any::<u64>(), rounds in proptest::collection::vec((0usize..8, 0usize..64), 1..4)) {
        let Built { mut g, ids, mut leaves } = build(&specs, seed);
        prop_assert!(g.consumer_counts_consistent());
        let target = specs.len() - 1;
        let got = g.eval(ids[target]).unwrap();
        prop_assert!(got.bitwise_eq(&eager(&specs, &leaves)[target]));
        prop_assert_eq!(g.stats().reuse_violations, 0);
        prop_assert!(g.stats().allocations <= specs.len());

        let vars: Vec<usize> = (0..specs.len()).filter(|&i| matches!(specs[i], Spec::Var(_))).collect();
        for (k, (vpick, tpick)) in rounds.into_iter().enumerate() {
            let v = vars[vpick % vars.len()];
            let t = tpick % specs.len();
            // settle t first so the counter sees only the assignment's effect
            g.eval(ids[t]).unwrap();
            let Spec::Var(shape) = &specs[v] else { unreachable!() };
            let fresh = centered(shape, seed ^ (k as u64 + 100));
            g.assign(ids[v], fresh.clone()).unwrap();
            leaves[v] = Some(fresh);
            g.reset_stats();
            let got = g.eval(ids[t]).unwrap();
            prop_assert!(got.bitwise_eq(&eager(&specs, &leaves)[t]));
            let expected_ops = descendants(&specs, v).intersection(&ancestors(&specs, t)).count();
            prop_assert_eq!(g.stats().ops_executed, expected_ops);
            prop_assert_eq!(g.stats().reuse_violations, 0);
        }
    }
}

#[test]
fn unary_chain_allocates_once() {
    let mut g = LazyGraph::new();
    let x = g.variable(&[20, 10]).unwrap();
    g.assign(x, Arr::uniform(&[20, 10], 1).unwrap()).unwrap();
    let m = g.mul(x, x).unwrap();
    let s = g.sin(m).unwrap();
    let c = g.cos(s).unwrap();
    let t = g.tan(c).unwrap();
    let n = g.neg(t).unwrap();
    assert_eq!(g.stats().ops_executed, 0);
    g.eval(n).unwrap();
    assert_eq!(g.stats().allocations, 1);
    assert_eq!(g.stats().reuse_violations, 0);
}

#[test]
fn equal_assignment_still_recomputes() {
    let mut g = LazyGraph::new();
    let x = g.variable(&[3]).unwrap();
    let v = Arr::uniform(&[3], 2).unwrap();
    g.assign(x, v.clone()).unwrap();
    let y = g.exp(x).unwrap();
    let z = g.sin(y).unwrap();
    g.eval(z).unwrap();
    g.reset_stats();
    g.assign(x, v).unwrap();
    g.eval(z).unwrap();
    assert_eq!(g.stats().ops_executed, 2);
}

#[test]
fn independent_subgraphs_untouched() {
    let mut g = LazyGraph::new();
    let a = g.variable(&[4]).unwrap();
    let b = g.variable(&[4]).unwrap();
    g.assign(a, Arr::uniform(&[4], 1).unwrap()).unwrap();
    g.assign(b, Arr::uniform(&[4], 2).unwrap()).unwrap();
    let ea = g.exp(a).unwrap();
    let sa = g.sin(ea).unwrap();
    let eb = g.exp(b).unwrap();
    g.retain(ea).unwrap();
    g.eval(sa).unwrap();
    g.eval(eb).unwrap();
    let (ka, kb) = (g.value_ref(sa).unwrap().clone(), g.value_ref(eb).unwrap().clone());
    g.assign(b, Arr::uniform(&[4], 3).unwrap()).unwrap();
    g.eval(eb).unwrap();
    assert!(g.value_ref(sa).unwrap().bitwise_eq(&ka));
    assert!(!g.value_ref(eb).unwrap().bitwise_eq(&kb));
}

