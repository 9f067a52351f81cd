//! Lexing, parsing and printing of the supported Solidity subset.

mod ast;
mod lexer;
mod parser;
mod printer;

pub use ast::{AstNode, FunctionAst, NodeKind, SourceSpan};
pub use lexer::{is_elementary_type, tokenize, LineIndex, Token, TokenKind, UNITS};
pub use parser::{collect_functions, parse_contract, parse_function, parse_source_unit, type_text};
pub use printer::{print_expr, print_function, print_statement};

use serde::{Deserialize, Serialize};

/// JSON shape of an AST node: `{kind, value, span, children}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstJson {
    pub kind: String,
    pub value: Option<String>,
    pub span: SourceSpan,
    pub children: Vec<AstJson>,
}

impl From<&AstNode> for AstJson {
    fn from(node: &AstNode) -> Self {
        AstJson {
            kind: node.kind.name().to_string(),
            value: node.value.clone(),
            span: node.span,
            children: node.children.iter().map(AstJson::from).collect(),
        }
    }
}

impl AstJson {
    pub fn to_node(&self) -> Option<AstNode> {
        Some(AstNode {
            kind: NodeKind::from_name(&self.kind)?,
            value: self.value.clone(),
            span: self.span,
            children: self.children.iter().map(AstJson::to_node).collect::<Option<_>>()?,
        })
    }
}

/// Find a function by plain or `Contract.function` name.
pub fn find_function<'a>(functions: &'a [FunctionAst], name: &str) -> Option<&'a FunctionAst> {
    functions.iter().find(|f| f.name == name || f.qualified_name() == name)
}
