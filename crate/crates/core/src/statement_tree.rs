//! Decomposition of function bodies into statement trees.
//!
//! Every top-level statement of a body becomes one tree, typed by its
//! outermost syntactic structure. Statements nested inside conditionals or
//! loops stay inside the enclosing tree.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::{AstNode, FunctionAst, NodeKind, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatementTreeKind {
    VariableDefinition,
    AssignmentOperation,
    ConditionalBlock,
    ControlLoop,
    FunctionCall,
    OtherOperation,
}

impl StatementTreeKind {
    pub const ALL: [StatementTreeKind; 6] = [
        StatementTreeKind::VariableDefinition,
        StatementTreeKind::AssignmentOperation,
        StatementTreeKind::ConditionalBlock,
        StatementTreeKind::ControlLoop,
        StatementTreeKind::FunctionCall,
        StatementTreeKind::OtherOperation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatementTreeKind::VariableDefinition => "VariableDefinition",
            StatementTreeKind::AssignmentOperation => "AssignmentOperation",
            StatementTreeKind::ConditionalBlock => "ConditionalBlock",
            StatementTreeKind::ControlLoop => "ControlLoop",
            StatementTreeKind::FunctionCall => "FunctionCall",
            StatementTreeKind::OtherOperation => "OtherOperation",
        }
    }
}

impl fmt::Display for StatementTreeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatementTree {
    pub kind: StatementTreeKind,
    pub root: AstNode,
    pub span: SourceSpan,
    pub index: usize,
    pub function_id: String,
}

/// Type a statement by its outermost construct.
pub fn classify_statement(node: &AstNode) -> StatementTreeKind {
    match node.kind {
        NodeKind::VariableDeclarationStatement => StatementTreeKind::VariableDefinition,
        NodeKind::IfStatement => StatementTreeKind::ConditionalBlock,
        NodeKind::ForStatement | NodeKind::WhileStatement => StatementTreeKind::ControlLoop,
        NodeKind::ExpressionStatement => match node.children.first() {
            Some(e) => classify_expression(e),
            None => StatementTreeKind::OtherOperation,
        },
        _ => StatementTreeKind::OtherOperation,
    }
}

fn classify_expression(e: &AstNode) -> StatementTreeKind {
    match e.kind {
        NodeKind::Assignment => StatementTreeKind::AssignmentOperation,
        // `i++;`, `--n;`, `delete x;` all write their operand
        NodeKind::UnaryOperation
            if matches!(e.value(), "++" | "--" | "++post" | "--post" | "delete") =>
        {
            StatementTreeKind::AssignmentOperation
        }
        NodeKind::FunctionCall => StatementTreeKind::FunctionCall,
        _ => StatementTreeKind::OtherOperation,
    }
}

/// Split a function body into its top-level statement trees, in source order.
pub fn decompose(f: &FunctionAst) -> Vec<StatementTree> {
    let function_id = f.qualified_name();
    f.body
        .children
        .iter()
        .enumerate()
        .map(|(index, stmt)| StatementTree {
            kind: classify_statement(stmt),
            root: stmt.clone(),
            span: stmt.span,
            index,
            function_id: function_id.clone(),
        })
        .collect()
}

/// Count trees per kind; every kind is present in the map, possibly with 0.
pub fn kind_distribution(trees: &[StatementTree]) -> BTreeMap<StatementTreeKind, usize> {
    let mut counts: BTreeMap<_, _> = StatementTreeKind::ALL.iter().map(|k| (*k, 0)).collect();
    for t in trees {
        *counts.entry(t.kind).or_default() += 1;
    }
    counts
}

/// Lines of the body that hold at least one token strictly inside the
/// body's braces.
pub fn executable_lines(f: &FunctionAst) -> Vec<u32> {
    let mut lines = std::collections::BTreeSet::new();
    for stmt in &f.body.children {
        stmt.pre_order(&mut |n| {
            lines.insert(n.span.start_line);
            lines.insert(n.span.end_line);
        });
    }
    lines.into_iter().collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatementTreeJson {
    pub kind: StatementTreeKind,
    pub span: SourceSpan,
    pub index: usize,
}

impl From<&StatementTree> for StatementTreeJson {
    fn from(t: &StatementTree) -> Self {
        StatementTreeJson { kind: t.kind, span: t.span, index: t.index }
    }
}
