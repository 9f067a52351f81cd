//! Category-level features of statement trees and the pairwise encoding fed
//! to the classifier.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frontend::{AstNode, NodeKind};
use crate::statement_tree::{StatementTree, StatementTreeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeCategory {
    ArithmeticOperator,
    MemberVariable,
    Value,
    Identifier,
    Unit,
    DataType,
    CodeConstructs,
}

impl NodeCategory {
    pub const ALL: [NodeCategory; 7] = [
        NodeCategory::ArithmeticOperator,
        NodeCategory::MemberVariable,
        NodeCategory::Value,
        NodeCategory::Identifier,
        NodeCategory::Unit,
        NodeCategory::DataType,
        NodeCategory::CodeConstructs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NodeCategory::ArithmeticOperator => "ArithmeticOperator",
            NodeCategory::MemberVariable => "MemberVariable",
            NodeCategory::Value => "Value",
            NodeCategory::Identifier => "Identifier",
            NodeCategory::Unit => "Unit",
            NodeCategory::DataType => "DataType",
            NodeCategory::CodeConstructs => "CodeConstructs",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NodeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn categorize_node(node: &AstNode) -> NodeCategory {
    categorize_kind(node.kind)
}

pub fn categorize_kind(kind: NodeKind) -> NodeCategory {
    use NodeKind::*;
    match kind {
        Operator => NodeCategory::ArithmeticOperator,
        MemberName => NodeCategory::MemberVariable,
        NumberLiteral | StringLiteral | BoolLiteral | HexLiteral => NodeCategory::Value,
        Identifier | InheritanceSpecifier | ModifierInvocation => NodeCategory::Identifier,
        Unit => NodeCategory::Unit,
        ElementaryTypeName | ArrayTypeName | Mapping | UserDefinedTypeName => NodeCategory::DataType,
        SourceUnit | ContractDefinition | UsingDirective | StateVariableDeclaration
        | EventDefinition | FunctionDefinition | ParameterList | Parameter | ReturnParameters
        | Block | VariableDeclarationStatement | ExpressionStatement | IfStatement
        | ForStatement | WhileStatement | ReturnStatement | RevertStatement | EmitStatement
        | BreakStatement | ContinueStatement | InlineAssembly | Assignment | BinaryOperation
        | UnaryOperation | Conditional | FunctionCall | ArgumentList | MemberAccess
        | IndexAccess | TupleExpression => NodeCategory::CodeConstructs,
    }
}

/// Canonical token contributed by a node, or `None` for pure statement
/// wrappers that carry nothing beyond their children.
pub fn canonical_token(node: &AstNode) -> Option<String> {
    use NodeKind::*;
    match node.kind {
        ExpressionStatement | VariableDeclarationStatement => None,
        Identifier | InheritanceSpecifier | ModifierInvocation => Some("ID".to_string()),
        Operator | MemberName | NumberLiteral | StringLiteral | BoolLiteral | HexLiteral | Unit
        | ElementaryTypeName | UserDefinedTypeName => Some(node.value().to_string()),
        ArrayTypeName => Some("[]".to_string()),
        Mapping => Some("mapping".to_string()),
        other => Some(other.name().to_string()),
    }
}

/// Multiset of canonical tokens, kept in insertion (post-order) sequence.
pub type Bag = Vec<String>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSet {
    pub kind: StatementTreeKind,
    /// Node count of the tree.
    pub size: usize,
    pub bags: [Bag; 7],
}

impl FeatureSet {
    pub fn empty(kind: StatementTreeKind) -> Self {
        FeatureSet { kind, size: 0, bags: Default::default() }
    }

    pub fn bag(&self, c: NodeCategory) -> &Bag {
        &self.bags[c.index()]
    }

    pub fn to_json(&self) -> FeatureSetJson {
        FeatureSetJson {
            kind: self.kind,
            size: self.size,
            bags: NodeCategory::ALL
                .iter()
                .map(|c| {
                    let mut toks = self.bag(*c).clone();
                    toks.sort();
                    (c.name().to_string(), toks)
                })
                .collect(),
        }
    }
}

/// JSON form with sorted tokens: `{kind, size, bags:{category:[token,...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetJson {
    pub kind: StatementTreeKind,
    pub size: usize,
    pub bags: BTreeMap<String, Vec<String>>,
}

pub fn extract_features(tree: &StatementTree) -> FeatureSet {
    extract_from_node(&tree.root, tree.kind)
}

/// Post-order walk collecting each node's canonical token under its category.
pub fn extract_from_node(root: &AstNode, kind: StatementTreeKind) -> FeatureSet {
    let mut fs = FeatureSet::empty(kind);
    root.post_order(&mut |n| {
        fs.size += 1;
        if let Some(tok) = canonical_token(n) {
            fs.bags[categorize_node(n).index()].push(tok);
        }
    });
    fs
}

/// Σ min(multiplicity) / Σ max(multiplicity); two empty bags score 1.
pub fn multiset_jaccard(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for t in a {
        counts.entry(t).or_default().0 += 1;
    }
    for t in b {
        counts.entry(t).or_default().1 += 1;
    }
    let (inter, union) = counts
        .values()
        .fold((0usize, 0usize), |(i, u), (x, y)| (i + x.min(y), u + x.max(y)));
    inter as f64 / union as f64
}

pub const PAIR_DIM: usize = 24;

/// Names of the 24 pairwise components, in vector order.
pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(PAIR_DIM);
    for c in NodeCategory::ALL {
        for part in ["jaccard", "size_diff", "size_ratio"] {
            names.push(format!("{}.{}", c.name(), part));
        }
    }
    names.extend(["kind_match", "tree_size_ratio", "log_size_sum"].map(String::from));
    names
}

/// Category owning a component index, `None` for the three tree-level components.
pub fn component_category(index: usize) -> Option<NodeCategory> {
    NodeCategory::ALL.get(index / 3).copied().filter(|_| index < 21)
}

/// Symmetric fixed-width encoding of a statement-tree pair.
///
/// Layout: for each category `[jaccard, |na-nb|/(na+nb), min/max]`, then
/// `kind_match`, `min(size)/max(size)` and `ln(1 + size_a + size_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFeatureVector(#[serde(with = "array24")] pub [f64; PAIR_DIM]);

impl PairFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

mod array24 {
    use super::PAIR_DIM;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; PAIR_DIM], s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; PAIR_DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let n = v.len();
        v.try_into().map_err(|_| D::Error::custom(format!("expected {PAIR_DIM} components, got {n}")))
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if a.max(b) == 0 {
        1.0
    } else {
        a.min(b) as f64 / a.max(b) as f64
    }
}

pub fn pair_features(a: &FeatureSet, b: &FeatureSet) -> PairFeatureVector {
    let mut v = [0.0; PAIR_DIM];
    for c in NodeCategory::ALL {
        let (ba, bb) = (a.bag(c), b.bag(c));
        let (na, nb) = (ba.len(), bb.len());
        let i = c.index() * 3;
        v[i] = multiset_jaccard(ba, bb);
        v[i + 1] = if na + nb == 0 { 0.0 } else { na.abs_diff(nb) as f64 / (na + nb) as f64 };
        v[i + 2] = ratio(na, nb);
    }
    v[21] = if a.kind == b.kind { 1.0 } else { 0.0 };
    v[22] = ratio(a.size, b.size);
    v[23] = ((1 + a.size + b.size) as f64).ln();
    PairFeatureVector(v)
}
