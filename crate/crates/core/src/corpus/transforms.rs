//! Semantics-preserving rewrites of a function body.
//!
//! Every transform works on the parsed tree, prints it and re-parses the
//! result, so spans in the output always refer to the output text. Each
//! returns the new function and, for every original top-level statement,
//! its index in the new body.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{parse_function, print_function, AstNode, FunctionAst, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    RenameIdentifiers,
    ReorderIndependentStatements,
    InsertDeadCode,
    ConstantPerturbation,
}

impl Transform {
    pub const ALL: [Transform; 4] = [
        Transform::RenameIdentifiers,
        Transform::ReorderIndependentStatements,
        Transform::InsertDeadCode,
        Transform::ConstantPerturbation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::RenameIdentifiers => "rename-identifiers",
            Transform::ReorderIndependentStatements => "reorder-independent-statements",
            Transform::InsertDeadCode => "insert-dead-code",
            Transform::ConstantPerturbation => "constant-perturbation",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown transform `{s}`")))
    }
}

/// Names that keep their meaning across functions and are never renamed.
pub const BUILTINS: &[&str] = &[
    "msg", "block", "tx", "require", "revert", "assert", "keccak256", "sha3", "sha256", "ripemd160", "now",
    "this", "super", "ecrecover", "addmod", "mulmod", "selfdestruct", "gasleft", "abi", "type", "blockhash",
];

#[derive(Debug, Clone)]
pub struct Transformed {
    pub function: FunctionAst,
    /// `alignment[i]` is the new index of original statement `i`.
    pub alignment: Vec<usize>,
}

pub fn apply<R: Rng>(f: &FunctionAst, t: Transform, rng: &mut R) -> Result<Transformed> {
    let (out, alignment) = match t {
        Transform::RenameIdentifiers => (rename_identifiers(f), identity(f)),
        Transform::ReorderIndependentStatements => reorder(f, rng),
        Transform::InsertDeadCode => insert_dead_code(f, rng)?,
        Transform::ConstantPerturbation => (perturb_constants(f, rng), identity(f)),
    };
    Ok(Transformed { function: reparse(&out)?, alignment })
}

fn identity(f: &FunctionAst) -> Vec<usize> {
    (0..f.body.children.len()).collect()
}

pub fn reparse(f: &FunctionAst) -> Result<FunctionAst> {
    parse_function(&print_function(f))
}

/// Visit identifiers in pre-order, skipping call targets and event names;
/// those refer to functions defined elsewhere and keep their names.
fn visit_renamable(n: &AstNode, visit: &mut impl FnMut(&str)) {
    if n.kind == NodeKind::Identifier {
        visit(n.value());
    }
    for (i, c) in n.children.iter().enumerate() {
        if !(i == 0 && n.kind == NodeKind::FunctionCall && c.kind == NodeKind::Identifier) {
            visit_renamable(c, visit);
        }
    }
}

fn rename_in(n: &mut AstNode, names: &BTreeMap<String, String>) {
    if n.kind == NodeKind::Identifier {
        if let Some(new) = names.get(n.value()) {
            n.value = Some(new.clone());
        }
    }
    let is_call = n.kind == NodeKind::FunctionCall;
    for (i, c) in n.children.iter_mut().enumerate() {
        if !(i == 0 && is_call && c.kind == NodeKind::Identifier) {
            rename_in(c, names);
        }
    }
}

/// Rename every non-builtin identifier to `a0, a1, ...` in order of first
/// appearance, parameters first.
pub fn rename_identifiers(f: &FunctionAst) -> FunctionAst {
    let mut names: BTreeMap<String, String> = BTreeMap::new();
    let mut assign = |name: &str| {
        if !name.is_empty() && !BUILTINS.contains(&name) && !names.contains_key(name) {
            let fresh = format!("a{}", names.len());
            names.insert(name.to_string(), fresh);
        }
    };
    for (p, _) in &f.params {
        assign(p);
    }
    visit_renamable(&f.body, &mut assign);

    let mut out = f.clone();
    rename_in(&mut out.body, &names);
    for list in out.signature.children.iter_mut().filter(|c| c.kind == NodeKind::ParameterList) {
        rename_in(list, &names);
    }
    for (n, _) in out.params.iter_mut() {
        if let Some(new) = names.get(n.as_str()) {
            *n = new.clone();
        }
    }
    out
}

/// Read and write sets of a top-level statement, plus whether it must stay
/// in place (control transfer, events, external calls, assembly).
#[derive(Debug, Default, Clone)]
pub struct Effects {
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub barrier: bool,
}

fn base_name(e: &AstNode) -> Option<&str> {
    match e.kind {
        NodeKind::Identifier => Some(e.value()),
        NodeKind::IndexAccess | NodeKind::MemberAccess | NodeKind::TupleExpression => {
            e.children.first().and_then(base_name)
        }
        _ => None,
    }
}

const PURE_CALLS: &[&str] = &["require", "assert", "keccak256", "sha256", "sha3", "blockhash", "ecrecover"];
const PURE_MEMBERS: &[&str] = &["add", "sub", "mul", "div", "mod", "encodePacked", "encode"];

fn is_pure_call(call: &AstNode) -> bool {
    let callee = &call.children[0];
    match callee.kind {
        NodeKind::Identifier => PURE_CALLS.contains(&callee.value()),
        NodeKind::ElementaryTypeName => true,
        NodeKind::MemberAccess => PURE_MEMBERS.contains(&callee.children[1].value()),
        _ => false,
    }
}

pub fn effects(stmt: &AstNode) -> Effects {
    let mut fx = Effects::default();
    stmt.pre_order(&mut |n| match n.kind {
        NodeKind::ReturnStatement
        | NodeKind::RevertStatement
        | NodeKind::BreakStatement
        | NodeKind::ContinueStatement
        | NodeKind::EmitStatement
        | NodeKind::InlineAssembly => fx.barrier = true,
        NodeKind::FunctionCall if !is_pure_call(n) => fx.barrier = true,
        NodeKind::Assignment => {
            if let Some(b) = base_name(&n.children[0]) {
                fx.writes.insert(b.to_string());
            }
        }
        NodeKind::UnaryOperation if matches!(n.value(), "++" | "--" | "++post" | "--post" | "delete") => {
            let operand = n.children.iter().find(|c| c.kind != NodeKind::Operator);
            if let Some(b) = operand.and_then(base_name) {
                fx.writes.insert(b.to_string());
            }
        }
        NodeKind::VariableDeclarationStatement => {
            fx.writes.insert(n.children[1].value().to_string());
        }
        NodeKind::Identifier => {
            fx.reads.insert(n.value().to_string());
        }
        _ => {}
    });
    fx
}

pub fn independent(a: &Effects, b: &Effects) -> bool {
    !a.barrier
        && !b.barrier
        && a.writes.is_disjoint(&b.writes)
        && a.writes.is_disjoint(&b.reads)
        && b.writes.is_disjoint(&a.reads)
}

/// Swap random adjacent independent statements; `n` attempts for `n`
/// statements.
fn reorder<R: Rng>(f: &FunctionAst, rng: &mut R) -> (FunctionAst, Vec<usize>) {
    let stmts = &f.body.children;
    let n = stmts.len();
    let fx: Vec<Effects> = stmts.iter().map(effects).collect();
    let mut order: Vec<usize> = (0..n).collect();
    if n >= 2 {
        for _ in 0..n {
            let i = rng.random_range(0..n - 1);
            if independent(&fx[order[i]], &fx[order[i + 1]]) {
                order.swap(i, i + 1);
            }
        }
    }
    let mut out = f.clone();
    out.body.children = order.iter().map(|&i| stmts[i].clone()).collect();
    let mut alignment = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        alignment[old] = new;
    }
    (out, alignment)
}

/// Statements added per body: a fifth of the statement count, at least one.
pub fn dead_code_count(n: usize) -> usize {
    (n / 5).max(1)
}

fn insert_dead_code<R: Rng>(f: &FunctionAst, rng: &mut R) -> Result<(FunctionAst, Vec<usize>)> {
    let stmts = &f.body.children;
    let n = stmts.len();
    let k = dead_code_count(n);
    let ends_with_return = stmts.last().is_some_and(|s| s.kind == NodeKind::ReturnStatement);
    let slots = if ends_with_return { n } else { n + 1 };
    // choose k insertion slots (with repetition allowed) among 0..slots
    let mut at: Vec<usize> = (0..k).map(|_| rng.random_range(0..slots)).collect();
    at.sort_unstable();

    let template = parse_function("function f() { uint __d0 = 0; }")?.body.children[0].clone();
    let mut body = Vec::with_capacity(n + k);
    let mut alignment = Vec::with_capacity(n);
    let mut next = at.into_iter().peekable();
    let mut serial = 0;
    for slot in 0..=n {
        while next.peek() == Some(&slot) {
            next.next();
            let mut d = template.clone();
            d.children[1].value = Some(format!("__d{serial}"));
            serial += 1;
            body.push(d);
        }
        if slot < n {
            alignment.push(body.len());
            body.push(stmts[slot].clone());
        }
    }
    let mut out = f.clone();
    out.body.children = body;
    Ok((out, alignment))
}

/// Shift a random non-empty subset of decimal literals by 1 to 3.
fn perturb_constants<R: Rng>(f: &FunctionAst, rng: &mut R) -> FunctionAst {
    let mut out = f.clone();
    let mut count = 0usize;
    out.body.pre_order(&mut |n| {
        if is_decimal(n) {
            count += 1;
        }
    });
    if count == 0 {
        return out;
    }
    let pick = rng.random_range(1..=count.div_ceil(2));
    let chosen: BTreeSet<usize> = sample(rng, count, pick).into_iter().collect();
    let shifts: Vec<u64> = (0..count).map(|_| rng.random_range(1..=3)).collect();
    let mut seen = 0;
    out.body.walk_mut(&mut |n| {
        if is_decimal(n) {
            if chosen.contains(&seen) {
                let v: u128 = n.value().parse().unwrap_or(0);
                n.value = Some((v + shifts[seen] as u128).to_string());
            }
            seen += 1;
        }
    });
    out
}

fn is_decimal(n: &AstNode) -> bool {
    n.kind == NodeKind::NumberLiteral && !n.value().is_empty() && n.value().bytes().all(|b| b.is_ascii_digit())
}
