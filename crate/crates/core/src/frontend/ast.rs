use std::fmt;

use serde::{Deserialize, Serialize};

/// A region of source text. Lines and columns are 1-based and both ends are
/// inclusive; columns count characters, not bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceSpan {
    #[serde(rename = "sl")]
    pub start_line: u32,
    #[serde(rename = "sc")]
    pub start_col: u32,
    #[serde(rename = "el")]
    pub end_line: u32,
    #[serde(rename = "ec")]
    pub end_col: u32,
}

impl SourceSpan {
    pub fn new(start_line: u32, start_col: u32, end_line: u32, end_col: u32) -> Self {
        debug_assert!(
            start_line < end_line || (start_line == end_line && start_col <= end_col),
            "inverted span {start_line}:{start_col}-{end_line}:{end_col}"
        );
        SourceSpan { start_line, start_col, end_line, end_col }
    }

    /// Smallest span covering both `self` and `other`.
    pub fn to(self, other: SourceSpan) -> SourceSpan {
        let (sl, sc) = (self.start_line, self.start_col).min((other.start_line, other.start_col));
        let (el, ec) = (self.end_line, self.end_col).max((other.end_line, other.end_col));
        SourceSpan { start_line: sl, start_col: sc, end_line: el, end_col: ec }
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        (self.start_line, self.start_col) <= (other.start_line, other.start_col)
            && (other.end_line, other.end_col) <= (self.end_line, self.end_col)
    }

    pub fn lines(&self) -> std::ops::RangeInclusive<u32> {
        self.start_line..=self.end_line
    }

    pub fn is_well_formed(&self) -> bool {
        self.start_line >= 1
            && self.start_col >= 1
            && (self.start_line < self.end_line
                || (self.start_line == self.end_line && self.start_col <= self.end_col))
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}-{}:{}", self.start_line, self.start_col, self.end_line, self.end_col)
    }
}

macro_rules! node_kinds {
    ($($kind:ident),* $(,)?) => {
        /// Closed set of syntax node kinds produced by the parser.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum NodeKind {
            $($kind),*
        }

        impl NodeKind {
            pub const ALL: &'static [NodeKind] = &[$(NodeKind::$kind),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(NodeKind::$kind => stringify!($kind)),*
                }
            }
        }
    };
}

node_kinds! {
    // units and declarations
    SourceUnit,
    ContractDefinition,
    InheritanceSpecifier,
    UsingDirective,
    StateVariableDeclaration,
    EventDefinition,
    FunctionDefinition,
    ModifierInvocation,
    ParameterList,
    Parameter,
    ReturnParameters,
    // statements
    Block,
    VariableDeclarationStatement,
    ExpressionStatement,
    IfStatement,
    ForStatement,
    WhileStatement,
    ReturnStatement,
    RevertStatement,
    EmitStatement,
    BreakStatement,
    ContinueStatement,
    InlineAssembly,
    // expressions
    Assignment,
    BinaryOperation,
    UnaryOperation,
    Operator,
    Conditional,
    FunctionCall,
    ArgumentList,
    MemberAccess,
    MemberName,
    IndexAccess,
    TupleExpression,
    Identifier,
    // literals and units
    NumberLiteral,
    StringLiteral,
    BoolLiteral,
    HexLiteral,
    Unit,
    // types
    ElementaryTypeName,
    ArrayTypeName,
    Mapping,
    UserDefinedTypeName,
}

impl NodeKind {
    pub fn is_statement(self) -> bool {
        matches!(
            self,
            NodeKind::Block
                | NodeKind::VariableDeclarationStatement
                | NodeKind::ExpressionStatement
                | NodeKind::IfStatement
                | NodeKind::ForStatement
                | NodeKind::WhileStatement
                | NodeKind::ReturnStatement
                | NodeKind::RevertStatement
                | NodeKind::EmitStatement
                | NodeKind::BreakStatement
                | NodeKind::ContinueStatement
                | NodeKind::InlineAssembly
        )
    }

    pub fn from_name(name: &str) -> Option<NodeKind> {
        NodeKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Syntax tree node. `value` holds the lexeme for leaves (identifiers,
/// literals, operators, type names) and the name for named declarations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub kind: NodeKind,
    pub value: Option<String>,
    pub children: Vec<AstNode>,
    pub span: SourceSpan,
}

impl AstNode {
    pub fn new(kind: NodeKind, span: SourceSpan) -> Self {
        AstNode { kind, value: None, children: Vec::new(), span }
    }

    pub fn leaf(kind: NodeKind, value: impl Into<String>, span: SourceSpan) -> Self {
        AstNode { kind, value: Some(value.into()), children: Vec::new(), span }
    }

    pub fn with_children(kind: NodeKind, children: Vec<AstNode>, span: SourceSpan) -> Self {
        AstNode { kind, value: None, children, span }
    }

    pub fn value(&self) -> &str {
        self.value.as_deref().unwrap_or("")
    }

    pub fn child(&self, kind: NodeKind) -> Option<&AstNode> {
        self.children.iter().find(|c| c.kind == kind)
    }

    /// Number of nodes in this subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(AstNode::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(AstNode::depth).max().unwrap_or(0)
    }

    /// Visit every node, children before parents.
    pub fn post_order<'a>(&'a self, visit: &mut impl FnMut(&'a AstNode)) {
        for child in &self.children {
            child.post_order(visit);
        }
        visit(self);
    }

    pub fn pre_order<'a>(&'a self, visit: &mut impl FnMut(&'a AstNode)) {
        visit(self);
        for child in &self.children {
            child.pre_order(visit);
        }
    }

    pub fn walk_mut(&mut self, visit: &mut impl FnMut(&mut AstNode)) {
        visit(self);
        for child in &mut self.children {
            child.walk_mut(visit);
        }
    }

    /// Compare kind, value and child structure while ignoring spans.
    pub fn same_shape(&self, other: &AstNode) -> bool {
        self.kind == other.kind
            && self.value == other.value
            && self.children.len() == other.children.len()
            && self.children.iter().zip(&other.children).all(|(a, b)| a.same_shape(b))
    }
}

/// A parsed function definition together with its body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionAst {
    pub name: String,
    pub contract_name: String,
    /// `(name, type)` pairs; unnamed parameters have an empty name.
    pub params: Vec<(String, String)>,
    /// The `FunctionDefinition` node with its body block removed.
    pub signature: AstNode,
    pub body: AstNode,
    /// Text of the full definition, from `function` to the closing brace.
    pub source: String,
    pub span: SourceSpan,
}

impl FunctionAst {
    /// `contract.function`, or just the function name for free functions.
    pub fn qualified_name(&self) -> String {
        if self.contract_name.is_empty() {
            self.name.clone()
        } else {
            format!("{}.{}", self.contract_name, self.name)
        }
    }
}
