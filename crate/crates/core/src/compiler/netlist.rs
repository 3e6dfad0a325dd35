//! NOR/NOT-only DAG and the lowering from expression ASTs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::parse::{Expr, ExprKind, Source};
use crate::error::{Error, Result};

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Input(usize),
    Const(bool),
    /// One operand is a NOT.
    Nor(Vec<NodeId>),
}

/// Nodes are stored in topological order: operands always precede users.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NorNetlist {
    pub inputs: Vec<String>,
    pub nodes: Vec<Node>,
    pub outputs: Vec<(String, NodeId)>,
}

impl NorNetlist {
    pub fn gate_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Nor(_))).count()
    }

    /// `(not gates, nor gates)`.
    pub fn gate_mix(&self) -> (usize, usize) {
        self.nodes.iter().fold((0, 0), |(not, nor), n| match n {
            Node::Nor(ops) if ops.len() == 1 => (not + 1, nor),
            Node::Nor(_) => (not, nor + 1),
            _ => (not, nor),
        })
    }

    pub fn max_arity(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Nor(ops) => Some(ops.len()),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Value of every node for one input assignment.
    pub fn eval_nodes(&self, inputs: &[bool]) -> Vec<bool> {
        let mut vals: Vec<bool> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let v = match n {
                Node::Input(i) => inputs[*i],
                Node::Const(b) => *b,
                Node::Nor(ops) => !ops.iter().any(|&o| vals[o]),
            };
            vals.push(v);
        }
        vals
    }

    pub fn eval(&self, inputs: &[bool]) -> Vec<bool> {
        let vals = self.eval_nodes(inputs);
        self.outputs.iter().map(|(_, n)| vals[*n]).collect()
    }

    /// Checks operand ordering, arity and output references.
    pub fn validate(&self) -> Result<()> {
        for (id, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Input(i) if *i >= self.inputs.len() => {
                    return Err(Error::Program(format!("node {id} names missing input {i}")))
                }
                Node::Nor(ops) if ops.is_empty() || ops.iter().any(|&o| o >= id) => {
                    return Err(Error::Program(format!("node {id} has invalid operands")))
                }
                _ => {}
            }
        }
        if self.outputs.iter().any(|(_, n)| *n >= self.nodes.len()) {
            return Err(Error::Program("output refers to a missing node".into()));
        }
        Ok(())
    }
}

/// Lowering options.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowerOptions {
    /// Widest NOR emitted (rows asserted at once during evaluation).
    pub max_arity: usize,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions { max_arity: 2 }
    }
}

struct Builder {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
    max_arity: usize,
}

impl Builder {
    fn intern(&mut self, node: Node) -> NodeId {
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(node.clone());
        self.index.insert(node, id);
        id
    }

    fn nor(&mut self, mut ops: Vec<NodeId>) -> NodeId {
        ops.sort_unstable();
        ops.dedup();
        self.intern(Node::Nor(ops))
    }

    fn not(&mut self, x: NodeId) -> NodeId {
        self.nor(vec![x])
    }

    /// NOR over any number of operands, grouping into ORs when wider than
    /// `max_arity`.
    fn nor_many(&mut self, mut ops: Vec<NodeId>) -> NodeId {
        ops.sort_unstable();
        ops.dedup();
        if ops.len() <= self.max_arity {
            return self.nor(ops);
        }
        let k = self.max_arity;
        let per = ops.len().div_ceil(k);
        let groups: Vec<NodeId> = ops
            .chunks(per)
            .map(|g| if g.len() == 1 { g[0] } else { self.or_many(g.to_vec()) })
            .collect();
        self.nor(groups)
    }

    fn or_many(&mut self, ops: Vec<NodeId>) -> NodeId {
        let n = self.nor_many(ops);
        self.not(n)
    }

    fn and_many(&mut self, ops: Vec<NodeId>) -> NodeId {
        let negated = ops.into_iter().map(|x| self.not(x)).collect();
        self.nor_many(negated)
    }
}

fn or_leaves<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match &e.kind {
        ExprKind::Or(a, b) => {
            or_leaves(a, out);
            or_leaves(b, out);
        }
        _ => out.push(e),
    }
}

fn and_leaves<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match &e.kind {
        ExprKind::And(a, b) => {
            and_leaves(a, out);
            and_leaves(b, out);
        }
        _ => out.push(e),
    }
}

fn lower_expr(
    b: &mut Builder,
    e: &Expr,
    env: &HashMap<&str, NodeId>,
) -> NodeId {
    let lower_all = |b: &mut Builder, leaves: Vec<&Expr>| -> Vec<NodeId> {
        leaves.into_iter().map(|l| lower_expr(b, l, env)).collect()
    };
    match &e.kind {
        ExprKind::Var(n) => env[n.as_str()],
        ExprKind::Const(v) => b.intern(Node::Const(*v)),
        ExprKind::Not(x) => {
            let x = lower_expr(b, x, env);
            b.not(x)
        }
        ExprKind::Or(..) => {
            let mut leaves = Vec::new();
            or_leaves(e, &mut leaves);
            let ops = lower_all(b, leaves);
            b.or_many(ops)
        }
        ExprKind::Nor(x, y) => {
            let mut leaves = Vec::new();
            or_leaves(x, &mut leaves);
            or_leaves(y, &mut leaves);
            let ops = lower_all(b, leaves);
            b.nor_many(ops)
        }
        ExprKind::And(..) => {
            let mut leaves = Vec::new();
            and_leaves(e, &mut leaves);
            let ops = lower_all(b, leaves);
            b.and_many(ops)
        }
        ExprKind::Nand(x, y) => {
            let mut leaves = Vec::new();
            and_leaves(x, &mut leaves);
            and_leaves(y, &mut leaves);
            let ops = lower_all(b, leaves);
            let and = b.and_many(ops);
            b.not(and)
        }
        ExprKind::Xor(x, y) => {
            // a ^ b = NOR(NOR(a, b), AND(a, b))
            let x = lower_expr(b, x, env);
            let y = lower_expr(b, y, env);
            let neither = b.nor(vec![x, y]);
            let both = b.and_many(vec![x, y]);
            b.nor(vec![neither, both])
        }
    }
}

/// Lowers every statement, sharing common subexpressions, then drops nodes
/// no output depends on (inputs are always kept).
pub fn lower_to_nor(src: &Source, opts: LowerOptions) -> Result<NorNetlist> {
    if opts.max_arity < 2 {
        return Err(Error::Usage("max NOR arity must be at least 2".into()));
    }
    let mut b = Builder {
        nodes: Vec::new(),
        index: HashMap::new(),
        max_arity: opts.max_arity,
    };
    let mut env: HashMap<&str, NodeId> = HashMap::new();
    for (i, name) in src.inputs.iter().enumerate() {
        let id = b.intern(Node::Input(i));
        env.insert(name, id);
    }
    let mut outputs = Vec::new();
    for st in &src.statements {
        let id = lower_expr(&mut b, &st.expr, &env);
        env.insert(&st.name, id);
        if st.is_output() {
            outputs.push((st.name.clone(), id));
        }
    }
    let netlist = prune(NorNetlist {
        inputs: src.inputs.clone(),
        nodes: b.nodes,
        outputs,
    });
    netlist.validate()?;
    Ok(netlist)
}

fn prune(n: NorNetlist) -> NorNetlist {
    let mut keep = vec![false; n.nodes.len()];
    for (_, o) in &n.outputs {
        keep[*o] = true;
    }
    for id in (0..n.nodes.len()).rev() {
        match &n.nodes[id] {
            Node::Input(_) => keep[id] = true,
            Node::Nor(ops) if keep[id] => ops.iter().for_each(|&o| keep[o] = true),
            _ => {}
        }
    }
    let mut remap = vec![usize::MAX; n.nodes.len()];
    let mut nodes = Vec::new();
    for (id, node) in n.nodes.into_iter().enumerate() {
        if !keep[id] {
            continue;
        }
        remap[id] = nodes.len();
        nodes.push(match node {
            Node::Nor(ops) => Node::Nor(ops.into_iter().map(|o| remap[o]).collect()),
            other => other,
        });
    }
    NorNetlist {
        inputs: n.inputs,
        nodes,
        outputs: n.outputs.into_iter().map(|(s, o)| (s, remap[o])).collect(),
    }
}
