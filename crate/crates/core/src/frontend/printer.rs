//! Pretty printer producing one statement per line.
//!
//! Printing a parsed tree and re-parsing the output yields a tree of the same
//! shape; source parentheses survive as `TupleExpression` nodes. Inline
//! assembly is opaque and prints as an empty block.

use super::ast::{AstNode, FunctionAst, NodeKind};
use super::parser::type_text;

const INDENT: &str = "    ";

/// Render a function (signature and body) as source text.
pub fn print_function(f: &FunctionAst) -> String {
    let mut out = String::new();
    out.push_str("function ");
    out.push_str(&f.name);
    let sig = &f.signature;
    let params = sig.child(NodeKind::ParameterList).map(print_params).unwrap_or_else(|| "()".into());
    out.push_str(&params);
    out.push_str(" public");
    for m in sig.children.iter().filter(|c| c.kind == NodeKind::ModifierInvocation) {
        out.push(' ');
        out.push_str(m.value());
        if let Some(args) = m.children.first() {
            out.push_str(&print_expr(args));
        }
    }
    if let Some(ret) = sig.child(NodeKind::ReturnParameters) {
        out.push_str(" returns ");
        out.push_str(&print_params(&ret.children[0]));
    }
    out.push(' ');
    print_block(&f.body, 0, &mut out);
    out.push('\n');
    out
}

fn print_params(list: &AstNode) -> String {
    let items: Vec<String> = list
        .children
        .iter()
        .map(|p| match p.child(NodeKind::Identifier) {
            Some(name) => format!("{} {}", type_text(&p.children[0]), name.value()),
            None => type_text(&p.children[0]),
        })
        .collect();
    format!("({})", items.join(", "))
}

fn print_block(block: &AstNode, depth: usize, out: &mut String) {
    out.push('{');
    out.push('\n');
    for stmt in &block.children {
        print_statement(stmt, depth + 1, out);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

/// Print one statement at the given indentation, ending with a newline.
pub fn print_statement(stmt: &AstNode, depth: usize, out: &mut String) {
    out.push_str(&INDENT.repeat(depth));
    print_statement_inline(stmt, depth, out);
    out.push('\n');
}

fn print_statement_inline(stmt: &AstNode, depth: usize, out: &mut String) {
    match stmt.kind {
        NodeKind::Block => print_block(stmt, depth, out),
        NodeKind::IfStatement => {
            out.push_str("if (");
            out.push_str(&print_expr(&stmt.children[0]));
            out.push_str(") ");
            print_branch(&stmt.children[1], depth, out);
            if let Some(other) = stmt.children.get(2) {
                if stmt.children[1].kind == NodeKind::Block {
                    out.push_str(" else ");
                } else {
                    out.push('\n');
                    out.push_str(&INDENT.repeat(depth));
                    out.push_str("else ");
                }
                if other.kind == NodeKind::IfStatement {
                    print_statement_inline(other, depth, out);
                } else {
                    print_branch(other, depth, out);
                }
            }
        }
        NodeKind::ForStatement => {
            let mask = stmt.value().as_bytes();
            let mut parts = stmt.children.iter();
            out.push_str("for (");
            if mask.first() == Some(&b'i') {
                print_statement_inline(parts.next().unwrap(), depth, out);
            } else {
                out.push(';');
            }
            if mask.get(1) == Some(&b'c') {
                out.push(' ');
                out.push_str(&print_expr(parts.next().unwrap()));
            }
            out.push(';');
            if mask.get(2) == Some(&b'u') {
                out.push(' ');
                out.push_str(&print_expr(&parts.next().unwrap().children[0]));
            }
            out.push_str(") ");
            print_branch(parts.next().unwrap(), depth, out);
        }
        NodeKind::WhileStatement => {
            out.push_str("while (");
            out.push_str(&print_expr(&stmt.children[0]));
            out.push_str(") ");
            print_branch(&stmt.children[1], depth, out);
        }
        NodeKind::VariableDeclarationStatement => {
            out.push_str(&type_text(&stmt.children[0]));
            out.push(' ');
            out.push_str(stmt.children[1].value());
            if let Some(init) = stmt.children.get(2) {
                out.push_str(" = ");
                out.push_str(&print_expr(init));
            }
            out.push(';');
        }
        NodeKind::ExpressionStatement => {
            out.push_str(&print_expr(&stmt.children[0]));
            out.push(';');
        }
        NodeKind::ReturnStatement => {
            out.push_str("return");
            if let Some(e) = stmt.children.first() {
                out.push(' ');
                out.push_str(&print_expr(e));
            }
            out.push(';');
        }
        NodeKind::RevertStatement => {
            out.push_str("revert");
            let child = &stmt.children[0];
            if child.kind != NodeKind::ArgumentList {
                out.push(' ');
            }
            out.push_str(&print_expr(child));
            out.push(';');
        }
        NodeKind::EmitStatement => {
            out.push_str("emit ");
            out.push_str(&print_expr(&stmt.children[0]));
            out.push(';');
        }
        NodeKind::BreakStatement => out.push_str("break;"),
        NodeKind::ContinueStatement => out.push_str("continue;"),
        NodeKind::InlineAssembly => out.push_str("assembly { }"),
        _ => {
            out.push_str(&print_expr(stmt));
            out.push(';');
        }
    }
}

fn print_branch(stmt: &AstNode, depth: usize, out: &mut String) {
    print_statement_inline(stmt, depth, out);
}

/// Render an expression on a single line.
pub fn print_expr(e: &AstNode) -> String {
    match e.kind {
        NodeKind::Assignment => {
            format!("{} {} {}", print_expr(&e.children[0]), e.value(), print_expr(e.children.last().unwrap()))
        }
        NodeKind::BinaryOperation => {
            format!("{} {} {}", print_expr(&e.children[0]), e.value(), print_expr(&e.children[2]))
        }
        NodeKind::UnaryOperation => {
            if e.children[0].kind == NodeKind::Operator {
                let op = e.children[0].value();
                let operand = print_expr(&e.children[1]);
                if op == "delete" || (op.len() == 1 && operand.starts_with(op)) {
                    format!("{op} {operand}")
                } else {
                    format!("{op}{operand}")
                }
            } else {
                format!("{}{}", print_expr(&e.children[0]), e.children[1].value())
            }
        }
        NodeKind::Conditional => format!(
            "{} ? {} : {}",
            print_expr(&e.children[0]),
            print_expr(&e.children[1]),
            print_expr(&e.children[2])
        ),
        NodeKind::FunctionCall => format!("{}{}", print_expr(&e.children[0]), print_expr(&e.children[1])),
        NodeKind::ArgumentList | NodeKind::TupleExpression => {
            let items: Vec<String> = e.children.iter().map(print_expr).collect();
            format!("({})", items.join(", "))
        }
        NodeKind::MemberAccess => format!("{}.{}", print_expr(&e.children[0]), e.children[1].value()),
        NodeKind::IndexAccess => format!("{}[{}]", print_expr(&e.children[0]), print_expr(&e.children[1])),
        NodeKind::NumberLiteral | NodeKind::HexLiteral => match e.children.first() {
            Some(unit) => format!("{} {}", e.value(), unit.value()),
            None => e.value().to_string(),
        },
        NodeKind::ElementaryTypeName
        | NodeKind::ArrayTypeName
        | NodeKind::Mapping
        | NodeKind::UserDefinedTypeName => type_text(e),
        _ => e.value().to_string(),
    }
}
