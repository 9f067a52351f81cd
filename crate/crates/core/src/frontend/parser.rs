//! Recursive-descent parser for the supported Solidity subset.
//!
//! Grammar coverage: contracts, interfaces and libraries containing state
//! variables, events, `using` directives, constructors and functions; function
//! bodies with declarations, assignments, `if`/`else`, `for`, `while`,
//! `return`, `emit`, `revert`, `break`, `continue`, expression statements and
//! opaque `assembly` blocks. Expressions follow Solidity operator precedence.
//! Modifier definitions, structs, enums, `try`, `unchecked`, `do`/`while`,
//! `new` and tuple declarations are rejected as unsupported.

use super::ast::{AstNode, FunctionAst, NodeKind, SourceSpan};
use super::lexer::{tokenize, LineIndex, Token, TokenKind, UNITS};
use crate::error::{Error, Result};

/// Parse a whole source file into a `SourceUnit` tree.
pub fn parse_source_unit(source: &str) -> Result<AstNode> {
    let tokens = tokenize(source)?;
    Parser::new(&tokens).source_unit()
}

/// Parse a file and return every function (and constructor) body in source order.
pub fn parse_contract(source: &str) -> Result<Vec<FunctionAst>> {
    let unit = parse_source_unit(source)?;
    Ok(collect_functions(&unit, source))
}

/// Parse a source that contains exactly one function definition, either bare
/// or wrapped in a contract.
pub fn parse_function(source: &str) -> Result<FunctionAst> {
    let mut functions = parse_contract(source)?;
    match functions.len() {
        1 => Ok(functions.pop().unwrap()),
        n => Err(Error::FunctionCount(n)),
    }
}

/// Extract `FunctionAst`s from a parsed source unit.
pub fn collect_functions(unit: &AstNode, source: &str) -> Vec<FunctionAst> {
    let index = LineIndex::new(source);
    let mut out = Vec::new();
    let mut visit = |def: &AstNode, contract: &str| {
        let Some(body) = def.child(NodeKind::Block) else { return };
        let params = def
            .child(NodeKind::ParameterList)
            .map(|list| {
                list.children
                    .iter()
                    .map(|p| {
                        let name = p.child(NodeKind::Identifier).map(|i| i.value().to_string());
                        (name.unwrap_or_default(), type_text(&p.children[0]))
                    })
                    .collect()
            })
            .unwrap_or_default();
        let mut signature = def.clone();
        signature.children.retain(|c| c.kind != NodeKind::Block);
        out.push(FunctionAst {
            name: def.value().to_string(),
            signature,
            contract_name: contract.to_string(),
            params,
            body: body.clone(),
            source: index.slice(def.span).unwrap_or_default().to_string(),
            span: def.span,
        });
    };
    for item in &unit.children {
        match item.kind {
            NodeKind::FunctionDefinition => visit(item, ""),
            NodeKind::ContractDefinition => {
                for member in &item.children {
                    if member.kind == NodeKind::FunctionDefinition {
                        visit(member, item.value());
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Render a type node back to Solidity syntax.
pub fn type_text(node: &AstNode) -> String {
    match node.kind {
        NodeKind::ArrayTypeName => {
            let inner = type_text(&node.children[0]);
            match node.children.get(1) {
                Some(len) => format!("{inner}[{}]", len.value()),
                None => format!("{inner}[]"),
            }
        }
        NodeKind::Mapping => {
            format!("mapping({} => {})", type_text(&node.children[0]), type_text(&node.children[1]))
        }
        _ => node.value().to_string(),
    }
}

const VISIBILITY_AND_MUTABILITY: &[&str] = &[
    "public", "private", "internal", "external", "view", "pure", "payable", "constant", "virtual",
    "override", "immutable",
];
const DATA_LOCATIONS: &[&str] = &["memory", "storage", "calldata"];
const ASSIGNMENT_OPS: &[&str] =
    &["=", "+=", "-=", "*=", "/=", "%=", "|=", "&=", "^=", "<<=", ">>=", ">>>="];
const BINARY_LEVELS: &[&[&str]] = &[
    &["||"],
    &["&&"],
    &["==", "!="],
    &["<", ">", "<=", ">="],
    &["|"],
    &["^"],
    &["&"],
    &["<<", ">>", ">>>"],
    &["+", "-"],
    &["*", "/", "%"],
];

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser { tokens, pos: 0 }
    }

    // ---- token helpers ----

    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_nth(&self, n: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + n)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_keyword(&self, k: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(k))
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        t
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, k: &str) -> bool {
        if self.at_keyword(k) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn here(&self) -> SourceSpan {
        match self.peek().or_else(|| self.tokens.last()) {
            Some(t) => t.span,
            None => SourceSpan::new(1, 1, 1, 1),
        }
    }

    fn error(&self, expected: impl Into<String>) -> Error {
        Error::Parse {
            span: self.here(),
            expected: expected.into(),
            found: self.peek().map(|t| t.lexeme.clone()).unwrap_or_else(|| "end of input".into()),
        }
    }

    fn unsupported(&self, construct: &str) -> Error {
        Error::UnsupportedConstruct { span: self.here(), construct: construct.to_string() }
    }

    fn expect_punct(&mut self, p: &str) -> Result<&'t Token> {
        if self.at_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.error(format!("`{p}`")))
        }
    }

    fn expect_ident(&mut self) -> Result<&'t Token> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => Ok(self.bump()),
            _ => Err(self.error("identifier")),
        }
    }

    /// Skip a balanced `open ... close` group, returning the closing token.
    fn skip_balanced(&mut self, open: &str, close: &str) -> Result<&'t Token> {
        self.expect_punct(open)?;
        let mut depth = 1;
        loop {
            let Some(t) = self.peek() else { return Err(self.error(format!("`{close}`"))) };
            self.pos += 1;
            if t.is_punct(open) {
                depth += 1;
            } else if t.is_punct(close) {
                depth -= 1;
                if depth == 0 {
                    return Ok(t);
                }
            }
        }
    }

    fn skip_to_semicolon(&mut self) -> Result<&'t Token> {
        loop {
            match self.peek() {
                None => return Err(self.error("`;`")),
                Some(t) => {
                    self.pos += 1;
                    if t.is_punct(";") {
                        return Ok(t);
                    }
                }
            }
        }
    }

    // ---- top level ----

    fn source_unit(&mut self) -> Result<AstNode> {
        let mut items = Vec::new();
        while let Some(t) = self.peek() {
            match (t.kind, t.lexeme.as_str()) {
                (TokenKind::Keyword, "pragma" | "import") => {
                    self.skip_to_semicolon()?;
                }
                (TokenKind::Keyword, "contract" | "interface" | "library" | "abstract") => {
                    items.push(self.contract()?)
                }
                (TokenKind::Keyword, "function") => items.push(self.function()?),
                (TokenKind::Keyword, kw @ ("struct" | "enum" | "modifier" | "error" | "type")) => {
                    return Err(self.unsupported(kw))
                }
                _ => return Err(self.error("contract or function definition")),
            }
        }
        let span = match (items.first(), items.last()) {
            (Some(a), Some(b)) => a.span.to(b.span),
            _ => SourceSpan::new(1, 1, 1, 1),
        };
        Ok(AstNode::with_children(NodeKind::SourceUnit, items, span))
    }

    fn contract(&mut self) -> Result<AstNode> {
        let start = self.here();
        self.eat_keyword("abstract");
        self.bump(); // contract | interface | library
        let name = self.expect_ident()?.lexeme.clone();
        let mut members = Vec::new();
        if self.eat_keyword("is") {
            loop {
                let base = self.expect_ident()?;
                let mut span = base.span;
                if self.at_punct("(") {
                    span = span.to(self.skip_balanced("(", ")")?.span);
                }
                members.push(AstNode::leaf(NodeKind::InheritanceSpecifier, &base.lexeme, span));
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct("{")?;
        while !self.at_punct("}") {
            let Some(t) = self.peek() else { return Err(self.error("`}`")) };
            let member = match (t.kind, t.lexeme.as_str()) {
                (TokenKind::Keyword, "function" | "constructor" | "fallback" | "receive") => {
                    self.function()?
                }
                (TokenKind::Keyword, "event") => self.event()?,
                (TokenKind::Keyword, "using") => {
                    let start = self.bump().span;
                    let end = self.skip_to_semicolon()?.span;
                    AstNode::new(NodeKind::UsingDirective, start.to(end))
                }
                (TokenKind::Keyword, kw @ ("modifier" | "struct" | "enum" | "error" | "type")) => {
                    return Err(self.unsupported(kw))
                }
                _ => self.state_variable()?,
            };
            members.push(member);
        }
        let end = self.bump().span;
        let mut node = AstNode::with_children(NodeKind::ContractDefinition, members, start.to(end));
        node.value = Some(name);
        Ok(node)
    }

    fn event(&mut self) -> Result<AstNode> {
        let start = self.bump().span;
        let name = self.expect_ident()?.lexeme.clone();
        self.skip_balanced("(", ")")?;
        self.eat_keyword("anonymous");
        let end = self.expect_punct(";")?.span;
        Ok(AstNode::leaf(NodeKind::EventDefinition, name, start.to(end)))
    }

    fn state_variable(&mut self) -> Result<AstNode> {
        let ty = self.type_name()?;
        while self
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Keyword && VISIBILITY_AND_MUTABILITY.contains(&t.lexeme.as_str()))
        {
            self.pos += 1;
        }
        let name = self.expect_ident()?;
        let ident = AstNode::leaf(NodeKind::Identifier, &name.lexeme, name.span);
        let mut children = vec![ty, ident];
        if self.eat_punct("=") {
            children.push(self.expression()?);
        }
        let end = self.expect_punct(";")?.span;
        let span = children[0].span.to(end);
        let mut node = AstNode::with_children(NodeKind::StateVariableDeclaration, children, span);
        node.value = Some(name.lexeme.clone());
        Ok(node)
    }

    fn function(&mut self) -> Result<AstNode> {
        let head = self.bump();
        let start = head.span;
        let name = match head.lexeme.as_str() {
            "function" => match self.peek() {
                Some(t) if t.kind == TokenKind::Ident => self.bump().lexeme.clone(),
                // `function() payable { ... }`
                Some(t) if t.is_punct("(") => "fallback".to_string(),
                _ => return Err(self.error("function name")),
            },
            other => other.to_string(),
        };

        let mut children = vec![self.parameter_list()?];
        let mut returns = None;
        loop {
            let Some(t) = self.peek() else { return Err(self.error("function body")) };
            if t.kind == TokenKind::Keyword && VISIBILITY_AND_MUTABILITY.contains(&t.lexeme.as_str()) {
                self.pos += 1;
                if t.lexeme == "override" && self.at_punct("(") {
                    self.skip_balanced("(", ")")?;
                }
            } else if t.is_keyword("returns") {
                let kw = self.bump().span;
                let list = self.parameter_list()?;
                let span = kw.to(list.span);
                returns = Some(AstNode::with_children(NodeKind::ReturnParameters, vec![list], span));
            } else if t.kind == TokenKind::Ident {
                self.pos += 1;
                let mut span = t.span;
                let mut node = AstNode::leaf(NodeKind::ModifierInvocation, &t.lexeme, span);
                if self.at_punct("(") {
                    let args = self.argument_list()?;
                    span = span.to(args.span);
                    node.children.push(args);
                    node.span = span;
                }
                children.push(node);
            } else {
                break;
            }
        }
        children.extend(returns);

        let end = if self.at_punct("{") {
            let body = self.block()?;
            let end = body.span;
            children.push(body);
            end
        } else {
            self.expect_punct(";")?.span
        };
        let mut node = AstNode::with_children(NodeKind::FunctionDefinition, children, start.to(end));
        node.value = Some(name);
        Ok(node)
    }

    fn parameter_list(&mut self) -> Result<AstNode> {
        let open = self.expect_punct("(")?.span;
        let mut params = Vec::new();
        if !self.at_punct(")") {
            loop {
                let ty = self.type_name()?;
                let mut span = ty.span;
                let mut children = vec![ty];
                while self.peek().is_some_and(|t| {
                    t.kind == TokenKind::Keyword
                        && (DATA_LOCATIONS.contains(&t.lexeme.as_str())
                            || matches!(t.lexeme.as_str(), "indexed" | "payable"))
                }) {
                    self.pos += 1;
                }
                if let Some(t) = self.peek().filter(|t| t.kind == TokenKind::Ident) {
                    self.pos += 1;
                    span = span.to(t.span);
                    children.push(AstNode::leaf(NodeKind::Identifier, &t.lexeme, t.span));
                }
                params.push(AstNode::with_children(NodeKind::Parameter, children, span));
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        let close = self.expect_punct(")")?.span;
        Ok(AstNode::with_children(NodeKind::ParameterList, params, open.to(close)))
    }

    // ---- types ----

    fn type_name(&mut self) -> Result<AstNode> {
        let Some(t) = self.peek() else { return Err(self.error("type name")) };
        let mut ty = if t.is_keyword("mapping") {
            let start = self.bump().span;
            self.expect_punct("(")?;
            let key = self.type_name()?;
            self.expect_punct("=>")?;
            let value = self.type_name()?;
            let end = self.expect_punct(")")?.span;
            AstNode::with_children(NodeKind::Mapping, vec![key, value], start.to(end))
        } else if t.kind == TokenKind::Keyword && super::lexer::is_elementary_type(&t.lexeme) {
            self.pos += 1;
            let mut node = AstNode::leaf(NodeKind::ElementaryTypeName, &t.lexeme, t.span);
            // `address payable`
            if t.lexeme == "address" && self.at_keyword("payable") {
                let p = self.bump();
                node.value = Some("address payable".into());
                node.span = node.span.to(p.span);
            }
            node
        } else if t.is_keyword("var") {
            self.pos += 1;
            AstNode::leaf(NodeKind::ElementaryTypeName, "var", t.span)
        } else if t.kind == TokenKind::Ident {
            self.pos += 1;
            let mut name = t.lexeme.clone();
            let mut span = t.span;
            while self.at_punct(".") && self.peek_nth(1).is_some_and(|n| n.kind == TokenKind::Ident) {
                self.pos += 1;
                let part = self.bump();
                name.push('.');
                name.push_str(&part.lexeme);
                span = span.to(part.span);
            }
            AstNode::leaf(NodeKind::UserDefinedTypeName, name, span)
        } else {
            return Err(self.error("type name"));
        };
        while self.at_punct("[") {
            self.pos += 1;
            let mut children = vec![ty];
            if !self.at_punct("]") {
                match self.peek() {
                    Some(n) if n.kind == TokenKind::Number => {
                        self.pos += 1;
                        children.push(AstNode::leaf(NodeKind::NumberLiteral, &n.lexeme, n.span));
                    }
                    _ => return Err(self.error("array length literal")),
                }
            }
            let end = self.expect_punct("]")?.span;
            let span = children[0].span.to(end);
            ty = AstNode::with_children(NodeKind::ArrayTypeName, children, span);
        }
        Ok(ty)
    }

    // ---- statements ----

    fn block(&mut self) -> Result<AstNode> {
        let open = self.expect_punct("{")?.span;
        let mut statements = Vec::new();
        while !self.at_punct("}") {
            if self.peek().is_none() {
                return Err(self.error("`}`"));
            }
            statements.push(self.statement()?);
        }
        let close = self.bump().span;
        Ok(AstNode::with_children(NodeKind::Block, statements, open.to(close)))
    }

    fn statement(&mut self) -> Result<AstNode> {
        let Some(t) = self.peek() else { return Err(self.error("statement")) };
        match (t.kind, t.lexeme.as_str()) {
            (TokenKind::Punct, "{") => self.block(),
            (TokenKind::Keyword, "if") => self.if_statement(),
            (TokenKind::Keyword, "for") => self.for_statement(),
            (TokenKind::Keyword, "while") => {
                let start = self.bump().span;
                self.expect_punct("(")?;
                let cond = self.expression()?;
                self.expect_punct(")")?;
                let body = self.statement()?;
                let span = start.to(body.span);
                Ok(AstNode::with_children(NodeKind::WhileStatement, vec![cond, body], span))
            }
            (TokenKind::Keyword, "return") => {
                let start = self.bump().span;
                let mut children = Vec::new();
                if !self.at_punct(";") {
                    children.push(self.expression()?);
                }
                let end = self.expect_punct(";")?.span;
                Ok(AstNode::with_children(NodeKind::ReturnStatement, children, start.to(end)))
            }
            (TokenKind::Keyword, kw @ ("break" | "continue")) => {
                let start = self.bump().span;
                let end = self.expect_punct(";")?.span;
                let kind =
                    if kw == "break" { NodeKind::BreakStatement } else { NodeKind::ContinueStatement };
                Ok(AstNode::new(kind, start.to(end)))
            }
            (TokenKind::Keyword, "emit") => {
                let start = self.bump().span;
                let call = self.expression()?;
                if call.kind != NodeKind::FunctionCall {
                    return Err(self.error("event invocation"));
                }
                let end = self.expect_punct(";")?.span;
                Ok(AstNode::with_children(NodeKind::EmitStatement, vec![call], start.to(end)))
            }
            (TokenKind::Ident, "revert")
                if self.peek_nth(1).is_some_and(|n| n.is_punct("(") || n.kind == TokenKind::Ident) =>
            {
                let start = self.bump().span;
                let child = if self.at_punct("(") {
                    self.argument_list()?
                } else {
                    let callee = self.expression()?;
                    if callee.kind != NodeKind::FunctionCall {
                        return Err(self.error("custom error invocation"));
                    }
                    callee
                };
                let end = self.expect_punct(";")?.span;
                Ok(AstNode::with_children(NodeKind::RevertStatement, vec![child], start.to(end)))
            }
            (TokenKind::Keyword, "assembly") => {
                let start = self.bump().span;
                if self.peek().is_some_and(|t| t.kind == TokenKind::String) {
                    self.pos += 1;
                }
                if !self.at_punct("{") {
                    return Err(self.error("`{`"));
                }
                let end = self.skip_balanced("{", "}")?.span;
                Ok(AstNode::new(NodeKind::InlineAssembly, start.to(end)))
            }
            (TokenKind::Keyword, kw @ ("do" | "try" | "unchecked" | "new")) => Err(self.unsupported(kw)),
            (TokenKind::Punct, "(") if self.is_tuple_declaration() => {
                Err(self.unsupported("tuple declaration"))
            }
            _ if self.is_declaration_start() => self.variable_declaration_statement(),
            _ => {
                let expr = self.expression()?;
                let end = self.expect_punct(";")?.span;
                let span = expr.span.to(end);
                Ok(AstNode::with_children(NodeKind::ExpressionStatement, vec![expr], span))
            }
        }
    }

    fn is_tuple_declaration(&self) -> bool {
        // `(uint a, uint b) = ...`
        self.peek_nth(1).is_some_and(|t| {
            t.kind == TokenKind::Keyword && super::lexer::is_elementary_type(&t.lexeme)
        }) && self.peek_nth(2).is_some_and(|t| t.kind == TokenKind::Ident)
    }

    /// Declarations start with a type; elementary type names followed by `(`
    /// are conversions (`uint256(x)`), not declarations. User-defined types
    /// need a second token of lookahead (`Foo x` / `Foo[] x` / `Foo memory x`).
    fn is_declaration_start(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        let next = self.peek_nth(1);
        match t.kind {
            TokenKind::Keyword if t.lexeme == "mapping" || t.lexeme == "var" => true,
            TokenKind::Keyword if super::lexer::is_elementary_type(&t.lexeme) => {
                !next.is_some_and(|n| n.is_punct("(") || n.is_punct("."))
            }
            TokenKind::Ident => next.is_some_and(|n| {
                n.kind == TokenKind::Ident
                    || (n.kind == TokenKind::Keyword && DATA_LOCATIONS.contains(&n.lexeme.as_str()))
                    || (n.is_punct("[") && self.peek_nth(2).is_some_and(|m| m.is_punct("]")))
            }),
            _ => false,
        }
    }

    fn variable_declaration_statement(&mut self) -> Result<AstNode> {
        let ty = self.type_name()?;
        while self
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Keyword && DATA_LOCATIONS.contains(&t.lexeme.as_str()))
        {
            self.pos += 1;
        }
        let name = self.expect_ident()?;
        let mut children = vec![ty, AstNode::leaf(NodeKind::Identifier, &name.lexeme, name.span)];
        if self.eat_punct("=") {
            children.push(self.expression()?);
        }
        let end = self.expect_punct(";")?.span;
        let span = children[0].span.to(end);
        Ok(AstNode::with_children(NodeKind::VariableDeclarationStatement, children, span))
    }

    fn if_statement(&mut self) -> Result<AstNode> {
        let start = self.bump().span;
        self.expect_punct("(")?;
        let cond = self.expression()?;
        self.expect_punct(")")?;
        let then = self.statement()?;
        let mut span = start.to(then.span);
        let mut children = vec![cond, then];
        if self.eat_keyword("else") {
            let other = self.statement()?;
            span = span.to(other.span);
            children.push(other);
        }
        Ok(AstNode::with_children(NodeKind::IfStatement, children, span))
    }

    /// Absent header parts are omitted from the children; `value` records
    /// which are present as a mask over init/condition/update, e.g. `"ic-"`.
    fn for_statement(&mut self) -> Result<AstNode> {
        let start = self.bump().span;
        self.expect_punct("(")?;
        let mut mask = String::new();
        let mut children = Vec::new();
        if self.eat_punct(";") {
            mask.push('-');
        } else {
            let init = if self.is_declaration_start() {
                self.variable_declaration_statement()?
            } else {
                let expr = self.expression()?;
                let end = self.expect_punct(";")?.span;
                let span = expr.span.to(end);
                AstNode::with_children(NodeKind::ExpressionStatement, vec![expr], span)
            };
            children.push(init);
            mask.push('i');
        }
        if self.at_punct(";") {
            mask.push('-');
        } else {
            children.push(self.expression()?);
            mask.push('c');
        }
        self.expect_punct(";")?;
        if self.at_punct(")") {
            mask.push('-');
        } else {
            let expr = self.expression()?;
            let span = expr.span;
            children.push(AstNode::with_children(NodeKind::ExpressionStatement, vec![expr], span));
            mask.push('u');
        }
        self.expect_punct(")")?;
        let body = self.statement()?;
        let span = start.to(body.span);
        children.push(body);
        let mut node = AstNode::with_children(NodeKind::ForStatement, children, span);
        node.value = Some(mask);
        Ok(node)
    }

    // ---- expressions ----

    fn expression(&mut self) -> Result<AstNode> {
        let lhs = self.conditional()?;
        if let Some(op) = self.peek().filter(|t| t.kind == TokenKind::Punct && ASSIGNMENT_OPS.contains(&t.lexeme.as_str())) {
            self.pos += 1;
            let rhs = self.expression()?;
            let span = lhs.span.to(rhs.span);
            let mut children = vec![lhs];
            if op.lexeme != "=" {
                children.push(AstNode::leaf(NodeKind::Operator, &op.lexeme, op.span));
            }
            children.push(rhs);
            let mut node = AstNode::with_children(NodeKind::Assignment, children, span);
            node.value = Some(op.lexeme.clone());
            return Ok(node);
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> Result<AstNode> {
        let cond = self.binary(0)?;
        if self.eat_punct("?") {
            let then = self.expression()?;
            self.expect_punct(":")?;
            let other = self.expression()?;
            let span = cond.span.to(other.span);
            return Ok(AstNode::with_children(NodeKind::Conditional, vec![cond, then, other], span));
        }
        Ok(cond)
    }

    fn binary(&mut self, level: usize) -> Result<AstNode> {
        if level == BINARY_LEVELS.len() {
            return self.power();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(op) = self
            .peek()
            .filter(|t| t.kind == TokenKind::Punct && BINARY_LEVELS[level].contains(&t.lexeme.as_str()))
        {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = make_binary(lhs, op, rhs);
        }
        Ok(lhs)
    }

    fn power(&mut self) -> Result<AstNode> {
        let base = self.unary()?;
        if let Some(op) = self.peek().filter(|t| t.is_punct("**")) {
            self.pos += 1;
            // right associative
            let exp = self.power()?;
            return Ok(make_binary(base, op, exp));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<AstNode> {
        let Some(t) = self.peek() else { return Err(self.error("expression")) };
        let is_prefix = (t.kind == TokenKind::Punct
            && matches!(t.lexeme.as_str(), "!" | "~" | "-" | "+" | "++" | "--"))
            || t.is_keyword("delete");
        if is_prefix {
            self.pos += 1;
            let operand = self.unary()?;
            let span = t.span.to(operand.span);
            let op = AstNode::leaf(NodeKind::Operator, &t.lexeme, t.span);
            let mut node = AstNode::with_children(NodeKind::UnaryOperation, vec![op, operand], span);
            node.value = Some(t.lexeme.clone());
            return Ok(node);
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<AstNode> {
        let mut expr = self.primary()?;
        loop {
            let Some(t) = self.peek() else { break };
            if t.is_punct("(") {
                let args = self.argument_list()?;
                let span = expr.span.to(args.span);
                expr = AstNode::with_children(NodeKind::FunctionCall, vec![expr, args], span);
            } else if t.is_punct("[") {
                self.pos += 1;
                let index = self.expression()?;
                let end = self.expect_punct("]")?.span;
                let span = expr.span.to(end);
                expr = AstNode::with_children(NodeKind::IndexAccess, vec![expr, index], span);
            } else if t.is_punct(".") {
                self.pos += 1;
                let member = match self.peek() {
                    Some(m) if matches!(m.kind, TokenKind::Ident | TokenKind::Keyword) => self.bump(),
                    _ => return Err(self.error("member name")),
                };
                let span = expr.span.to(member.span);
                let name = AstNode::leaf(NodeKind::MemberName, &member.lexeme, member.span);
                expr = AstNode::with_children(NodeKind::MemberAccess, vec![expr, name], span);
            } else if t.is_punct("{") && expr.kind == NodeKind::MemberAccess {
                // call options: `x.call{value: v}(...)`
                return Err(self.unsupported("call options"));
            } else if t.is_punct("++") || t.is_punct("--") {
                self.pos += 1;
                let span = expr.span.to(t.span);
                let op = AstNode::leaf(NodeKind::Operator, &t.lexeme, t.span);
                let mut node = AstNode::with_children(NodeKind::UnaryOperation, vec![expr, op], span);
                node.value = Some(format!("{}post", t.lexeme));
                expr = node;
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn argument_list(&mut self) -> Result<AstNode> {
        let open = self.expect_punct("(")?.span;
        let mut args = Vec::new();
        if self.at_punct("{") {
            return Err(self.unsupported("named arguments"));
        }
        if !self.at_punct(")") {
            loop {
                args.push(self.expression()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        let close = self.expect_punct(")")?.span;
        Ok(AstNode::with_children(NodeKind::ArgumentList, args, open.to(close)))
    }

    fn primary(&mut self) -> Result<AstNode> {
        let Some(t) = self.peek() else { return Err(self.error("expression")) };
        match t.kind {
            TokenKind::Ident => {
                self.pos += 1;
                if t.lexeme == "hex" && self.peek().is_some_and(|s| s.kind == TokenKind::String) {
                    let s = self.bump();
                    return Ok(AstNode::leaf(
                        NodeKind::HexLiteral,
                        format!("hex{}", s.lexeme),
                        t.span.to(s.span),
                    ));
                }
                Ok(AstNode::leaf(NodeKind::Identifier, &t.lexeme, t.span))
            }
            TokenKind::Number => {
                self.pos += 1;
                let kind = if t.lexeme.starts_with("0x") || t.lexeme.starts_with("0X") {
                    NodeKind::HexLiteral
                } else {
                    NodeKind::NumberLiteral
                };
                let mut node = AstNode::leaf(kind, &t.lexeme, t.span);
                if let Some(u) = self.peek().filter(|u| u.kind == TokenKind::Keyword && UNITS.contains(&u.lexeme.as_str())) {
                    self.pos += 1;
                    node.span = node.span.to(u.span);
                    node.children.push(AstNode::leaf(NodeKind::Unit, &u.lexeme, u.span));
                }
                Ok(node)
            }
            TokenKind::String => {
                self.pos += 1;
                Ok(AstNode::leaf(NodeKind::StringLiteral, &t.lexeme, t.span))
            }
            TokenKind::Keyword if t.lexeme == "true" || t.lexeme == "false" => {
                self.pos += 1;
                Ok(AstNode::leaf(NodeKind::BoolLiteral, &t.lexeme, t.span))
            }
            TokenKind::Keyword if super::lexer::is_elementary_type(&t.lexeme) => {
                // type conversion or member access on a type (`address(0)`, `uint256(x)`)
                self.pos += 1;
                let mut node = AstNode::leaf(NodeKind::ElementaryTypeName, &t.lexeme, t.span);
                if t.lexeme == "address" && self.at_keyword("payable") {
                    let p = self.bump();
                    node.value = Some("address payable".into());
                    node.span = node.span.to(p.span);
                }
                Ok(node)
            }
            TokenKind::Keyword if t.lexeme == "new" || t.lexeme == "type" => {
                Err(self.unsupported(&t.lexeme))
            }
            TokenKind::Punct if t.lexeme == "(" => {
                let open = self.bump().span;
                let mut items = vec![self.expression()?];
                while self.eat_punct(",") {
                    items.push(self.expression()?);
                }
                let close = self.expect_punct(")")?.span;
                Ok(AstNode::with_children(NodeKind::TupleExpression, items, open.to(close)))
            }
            TokenKind::Punct if t.lexeme == "[" => Err(self.unsupported("array literal")),
            _ => Err(self.error("expression")),
        }
    }
}

fn make_binary(lhs: AstNode, op: &Token, rhs: AstNode) -> AstNode {
    let span = lhs.span.to(rhs.span);
    let operator = AstNode::leaf(NodeKind::Operator, &op.lexeme, op.span);
    let mut node = AstNode::with_children(NodeKind::BinaryOperation, vec![lhs, operator, rhs], span);
    node.value = Some(op.lexeme.clone());
    node
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body_of(src: &str) -> AstNode {
        parse_function(src).unwrap().body
    }

    #[test]
    fn empty_function() {
        let f = parse_function("function f() public {}").unwrap();
        assert_eq!(f.name, "f");
        assert_eq!(f.body.kind, NodeKind::Block);
        assert!(f.body.children.is_empty());
        assert_eq!(f.source, "function f() public {}");
    }

    #[test]
    fn precedence_mul_binds_tighter() {
        let body = body_of("function f() { x = a + b * c; }");
        let assign = &body.children[0].children[0];
        assert_eq!(assign.kind, NodeKind::Assignment);
        let sum = &assign.children[1];
        assert_eq!(sum.value(), "+");
        assert_eq!(sum.children[2].value(), "*");
    }

    #[test]
    fn left_associative_subtraction() {
        let body = body_of("function f() { x = a - b - c; }");
        let outer = &body.children[0].children[0].children[1];
        assert_eq!(outer.value(), "-");
        assert_eq!(outer.children[0].kind, NodeKind::BinaryOperation);
        assert_eq!(outer.children[2].kind, NodeKind::Identifier);
    }

    #[test]
    fn compound_assignment_keeps_operator() {
        let body = body_of("function f() { x += 1; }");
        let assign = &body.children[0].children[0];
        assert_eq!(assign.value(), "+=");
        assert_eq!(assign.children[1].kind, NodeKind::Operator);
    }

    #[test]
    fn conversion_is_not_a_declaration() {
        let body = body_of("function f() { address(this).transfer(1 ether); uint256 y = uint256(x); }");
        assert_eq!(body.children[0].kind, NodeKind::ExpressionStatement);
        assert_eq!(body.children[1].kind, NodeKind::VariableDeclarationStatement);
        let lit = &body.children[0].children[0].children[1].children[0];
        assert_eq!(lit.kind, NodeKind::NumberLiteral);
        assert_eq!(lit.children[0].kind, NodeKind::Unit);
    }

    #[test]
    fn assembly_is_opaque() {
        let body = body_of("function f() { assembly { let x := add(1, 2) { } } }");
        assert_eq!(body.children.len(), 1);
        assert_eq!(body.children[0].kind, NodeKind::InlineAssembly);
        assert!(body.children[0].children.is_empty());
    }

    #[test]
    fn for_header_mask() {
        let body = body_of("function f() { for (uint i = 0; i < n; i++) { s += i; } for (;;) { break; } }");
        assert_eq!(body.children[0].value(), "icu");
        assert_eq!(body.children[0].children.len(), 4);
        assert_eq!(body.children[1].value(), "---");
        assert_eq!(body.children[1].children.len(), 1);
    }

    #[test]
    fn contract_with_three_functions() {
        let src = r#"
pragma solidity ^0.4.18;
contract Token is Base {
    using SafeMath for uint256;
    mapping(address => uint256) balances;
    event Transfer(address indexed from, address indexed to, uint256 value);
    function a() public {}
    function b(uint x) public returns (uint) { return x; }
    constructor() public { balances[msg.sender] = 1; }
}
"#;
        let fns = parse_contract(src).unwrap();
        assert_eq!(fns.iter().map(|f| f.name.as_str()).collect::<Vec<_>>(), ["a", "b", "constructor"]);
        assert!(fns.iter().all(|f| f.contract_name == "Token"));
        assert_eq!(fns[1].params, vec![("x".to_string(), "uint".to_string())]);
        assert_eq!(fns[0].span.start_line, 7);
    }

    #[test]
    fn no_functions() {
        assert!(parse_contract("contract C { uint x; }").unwrap().is_empty());
        assert!(parse_contract("").unwrap().is_empty());
    }

    #[test]
    fn modifier_definition_is_unsupported() {
        let src = "contract C { modifier onlyOwner() { require(msg.sender == owner); _; } function f() onlyOwner {} }";
        assert!(matches!(parse_contract(src), Err(Error::UnsupportedConstruct { .. })));
    }

    #[test]
    fn other_unsupported_constructs() {
        for src in [
            "function f() { do { x++; } while (x < 3); }",
            "function f() { unchecked { x++; } }",
            "function f() { C c = new C(); }",
            "function f() { (uint a, uint b) = g(); }",
            "contract C { struct S { uint a; } }",
        ] {
            assert!(
                matches!(parse_contract(src), Err(Error::UnsupportedConstruct { .. })),
                "{src}"
            );
        }
    }

    #[test]
    fn grammar_violation_reports_span() {
        match parse_function("function f() {\n  x = ;\n}") {
            Err(Error::Parse { span, .. }) => assert_eq!(span.start_line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_function_requires_exactly_one() {
        assert!(matches!(
            parse_function("function a() {} function b() {}"),
            Err(Error::FunctionCount(2))
        ));
    }

    #[test]
    fn revert_and_emit() {
        let body = body_of("function f() { revert(); revert(\"no\"); emit E(1); if (x) revert(); }");
        assert_eq!(body.children[0].kind, NodeKind::RevertStatement);
        assert_eq!(body.children[1].kind, NodeKind::RevertStatement);
        assert_eq!(body.children[2].kind, NodeKind::EmitStatement);
        assert_eq!(body.children[3].children[1].kind, NodeKind::RevertStatement);
    }
}
