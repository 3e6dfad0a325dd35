//! Random Boolean programs with a reference evaluator that shares no code
//! with the library.

#![allow(dead_code)]

use rand::{Rng, RngCore};

#[derive(Debug, Clone)]
pub enum T {
    Leaf(usize),
    C(bool),
    Not(Box<T>),
    And(Box<T>, Box<T>),
    Or(Box<T>, Box<T>),
    Xor(Box<T>, Box<T>),
    Nor(Box<T>, Box<T>),
    Nand(Box<T>, Box<T>),
}

impl T {
    fn render(&self, names: &[String]) -> String {
        let bin = |a: &T, op: &str, b: &T| format!("({} {op} {})", a.render(names), b.render(names));
        match self {
            T::Leaf(i) => names[*i].clone(),
            T::C(b) => (*b as u8).to_string(),
            T::Not(x) => format!("~{}", x.render(names)),
            T::And(a, b) => bin(a, "&", b),
            T::Or(a, b) => bin(a, "|", b),
            T::Xor(a, b) => bin(a, "^", b),
            T::Nor(a, b) => format!("~{}", bin(a, "|", b)),
            T::Nand(a, b) => format!("~{}", bin(a, "&", b)),
        }
    }

    fn eval(&self, env: &[bool]) -> bool {
        match self {
            T::Leaf(i) => env[*i],
            T::C(b) => *b,
            T::Not(x) => !x.eval(env),
            T::And(a, b) => a.eval(env) && b.eval(env),
            T::Or(a, b) => a.eval(env) || b.eval(env),
            T::Xor(a, b) => a.eval(env) != b.eval(env),
            T::Nor(a, b) => !(a.eval(env) || b.eval(env)),
            T::Nand(a, b) => !(a.eval(env) && b.eval(env)),
        }
    }
}

fn tree<R: RngCore>(rng: &mut R, leaves: usize, depth: u32) -> T {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.05) {
            T::C(rng.random())
        } else {
            T::Leaf(rng.random_range(0..leaves))
        };
    }
    let op = rng.random_range(0..6);
    let mut sub = || Box::new(tree(rng, leaves, depth - 1));
    match op {
        0 => T::Not(sub()),
        1 => T::And(sub(), sub()),
        2 => T::Or(sub(), sub()),
        3 => T::Xor(sub(), sub()),
        4 => T::Nor(sub(), sub()),
        _ => T::Nand(sub(), sub()),
    }
}

/// Sum of products straight from a truth table.
fn from_table(n: usize, table: u16) -> T {
    let mut terms: Vec<T> = Vec::new();
    for m in 0..1usize << n {
        if table >> m & 1 == 0 {
            continue;
        }
        let lits = (0..n).map(|i| if m >> i & 1 == 1 { T::Leaf(i) } else { T::Not(Box::new(T::Leaf(i))) });
        terms.push(lits.reduce(|a, b| T::And(Box::new(a), Box::new(b))).unwrap());
    }
    terms
        .into_iter()
        .reduce(|a, b| T::Or(Box::new(a), Box::new(b)))
        .unwrap_or(T::C(false))
}

#[derive(Debug, Clone)]
pub struct RandomProgram {
    pub n_inputs: usize,
    pub text: String,
    stmts: Vec<(String, T)>,
}

impl RandomProgram {
    pub fn generate<R: RngCore>(rng: &mut R) -> Self {
        let n = rng.random_range(1..=4);
        let mut names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let mut text = format!("input {};\n", names.join(", "));
        let mut stmts = Vec::new();
        if rng.random_bool(0.3) {
            let t = from_table(n, rng.random::<u16>() & ((1u32 << (1 << n)) - 1) as u16);
            text += &format!("f = {}\n", t.render(&names));
            stmts.push(("f".to_string(), t));
        } else {
            let k = rng.random_range(1..=3);
            for s in 0..k {
                let name = if s + 1 < k && rng.random_bool(0.5) {
                    format!("_t{s}")
                } else {
                    format!("o{s}")
                };
                let t = tree(rng, names.len(), 4);
                text += &format!("{name} = {};\n", t.render(&names));
                names.push(name.clone());
                stmts.push((name, t));
            }
        }
        RandomProgram {
            n_inputs: n,
            text,
            stmts,
        }
    }

    /// Output bits for one input vector.
    pub fn eval(&self, inputs: &[bool]) -> Vec<bool> {
        let mut env = inputs.to_vec();
        let mut out = Vec::new();
        for (name, t) in &self.stmts {
            let v = t.eval(&env);
            env.push(v);
            if !name.starts_with('_') {
                out.push(v);
            }
        }
        out
    }

    pub fn all_vectors(&self) -> Vec<Vec<bool>> {
        all_vectors(self.n_inputs)
    }
}

/// Every assignment of `n` inputs, input 0 as the least significant bit.
pub fn all_vectors(n: usize) -> Vec<Vec<bool>> {
    (0..1usize << n)
        .map(|m| (0..n).map(|i| m >> i & 1 == 1).collect())
        .collect()
}
