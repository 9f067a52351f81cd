//! Statement-level similarity between two functions and the clone verdict.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::GbdtModel;
use crate::error::{Error, Result};
use crate::features::{extract_features, pair_features, FeatureSet};
use crate::frontend::FunctionAst;
use crate::statement_tree::{decompose, StatementTree};

pub const DEFAULT_DELTA: f64 = 0.7;
pub const DEFAULT_TAU_MATCH: f64 = 0.5;
pub const SCHEMA_VERSION: u32 = 1;

/// `r[i][j]` scores row tree `i` of function A against column tree `j` of B.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub r: Vec<Vec<f64>>,
    pub row_trees: Vec<StatementTree>,
    pub col_trees: Vec<StatementTree>,
}

impl SimilarityMatrix {
    pub fn rows(&self) -> usize {
        self.row_trees.len()
    }

    pub fn cols(&self) -> usize {
        self.col_trees.len()
    }

    pub fn transpose(&self) -> SimilarityMatrix {
        let r = (0..self.cols()).map(|j| (0..self.rows()).map(|i| self.r[i][j]).collect()).collect();
        SimilarityMatrix { r, row_trees: self.col_trees.clone(), col_trees: self.row_trees.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    /// Fraction of trees on each side that have at least one match.
    #[default]
    Proportion,
    /// Total match count divided by the tree count of each side.
    Literal,
}

impl AggregationMode {
    pub fn name(self) -> &'static str {
        match self {
            AggregationMode::Proportion => "proportion",
            AggregationMode::Literal => "literal",
        }
    }
}

impl fmt::Display for AggregationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proportion" => Ok(AggregationMode::Proportion),
            "literal" => Ok(AggregationMode::Literal),
            other => Err(Error::Config(format!("unknown aggregation mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Clone,
    NotClone,
}

impl Verdict {
    pub fn is_clone(self) -> bool {
        self == Verdict::Clone
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Clone => "clone",
            Verdict::NotClone => "not-clone",
        })
    }
}

/// Per-tree features of a function, computed once per comparison.
pub fn function_features(f: &FunctionAst) -> (Vec<StatementTree>, Vec<FeatureSet>) {
    let trees = decompose(f);
    let feats = trees.iter().map(extract_features).collect();
    (trees, feats)
}

pub fn compare_functions(fa: &FunctionAst, fb: &FunctionAst, model: &GbdtModel) -> Result<SimilarityMatrix> {
    let (row_trees, fa_feats) = function_features(fa);
    let (col_trees, fb_feats) = function_features(fb);
    if row_trees.is_empty() {
        return Err(Error::EmptyFunction(fa.qualified_name()));
    }
    if col_trees.is_empty() {
        return Err(Error::EmptyFunction(fb.qualified_name()));
    }
    let r = fa_feats
        .iter()
        .map(|a| fb_feats.iter().map(|b| model.predict_proba(&pair_features(a, b))).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(SimilarityMatrix { r, row_trees, col_trees })
}

/// Binarize at `tau` and aggregate into `(s_a, s_b)`.
pub fn aggregate_with(r: &[Vec<f64>], mode: AggregationMode, tau: f64) -> (f64, f64) {
    let m = r.len();
    let n = r.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return (0.0, 0.0);
    }
    let hit = |i: usize, j: usize| r[i][j] >= tau;
    match mode {
        AggregationMode::Literal => {
            let total = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| hit(i, j)).count() as f64;
            (total / m as f64, total / n as f64)
        }
        AggregationMode::Proportion => {
            let rows = (0..m).filter(|&i| (0..n).any(|j| hit(i, j))).count() as f64;
            let cols = (0..n).filter(|&j| (0..m).any(|i| hit(i, j))).count() as f64;
            (rows / m as f64, cols / n as f64)
        }
    }
}

pub fn aggregate(r: &SimilarityMatrix, mode: AggregationMode) -> (f64, f64) {
    aggregate_with(&r.r, mode, DEFAULT_TAU_MATCH)
}

/// Clone iff either side reaches `delta`.
pub fn verdict(s_a: f64, s_b: f64, delta: f64) -> Verdict {
    if s_a.max(s_b) >= delta {
        Verdict::Clone
    } else {
        Verdict::NotClone
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRange {
    pub sl: u32,
    pub el: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMatch {
    pub a: LineRange,
    pub b: LineRange,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareOptions {
    pub delta: f64,
    pub mode: AggregationMode,
    pub tau_match: f64,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions { delta: DEFAULT_DELTA, mode: AggregationMode::Proportion, tau_match: DEFAULT_TAU_MATCH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub schema_version: u32,
    pub function_a: String,
    pub function_b: String,
    pub model: String,
    pub verdict: Verdict,
    pub s_a: f64,
    pub s_b: f64,
    pub delta: f64,
    pub mode: AggregationMode,
    pub tau_match: f64,
    pub matches: Vec<LineMatch>,
}

/// For every row with a match, pair it with its best column (lowest
/// column index on ties), ordered by the row's start line.
pub fn matched_lines(r: &SimilarityMatrix, tau: f64) -> Vec<LineMatch> {
    let mut out: Vec<LineMatch> = r
        .r
        .iter()
        .enumerate()
        .filter_map(|(i, row)| {
            let (j, &score) = row
                .iter()
                .enumerate()
                .fold(None, |acc: Option<(usize, &f64)>, (j, s)| match acc {
                    Some((_, best)) if best >= s => acc,
                    _ => Some((j, s)),
                })?;
            (score >= tau).then(|| LineMatch {
                a: LineRange { sl: r.row_trees[i].span.start_line, el: r.row_trees[i].span.end_line },
                b: LineRange { sl: r.col_trees[j].span.start_line, el: r.col_trees[j].span.end_line },
                score,
            })
        })
        .collect();
    out.sort_by_key(|m| m.a.sl);
    out
}

pub fn generate_report(
    r: &SimilarityMatrix,
    names: (&str, &str),
    model_id: &str,
    opts: &CompareOptions,
) -> SimilarityReport {
    let (s_a, s_b) = aggregate_with(&r.r, opts.mode, opts.tau_match);
    SimilarityReport {
        schema_version: SCHEMA_VERSION,
        function_a: names.0.to_string(),
        function_b: names.1.to_string(),
        model: model_id.to_string(),
        verdict: verdict(s_a, s_b, opts.delta),
        s_a,
        s_b,
        delta: opts.delta,
        mode: opts.mode,
        tau_match: opts.tau_match,
        matches: matched_lines(r, opts.tau_match),
    }
}

pub fn compare_and_report(
    fa: &FunctionAst,
    fb: &FunctionAst,
    model: &GbdtModel,
    model_id: &str,
    opts: &CompareOptions,
) -> Result<SimilarityReport> {
    let r = compare_functions(fa, fb, model)?;
    Ok(generate_report(&r, (&fa.qualified_name(), &fb.qualified_name()), model_id, opts))
}

fn lines(r: LineRange) -> String {
    if r.sl == r.el {
        format!("line {}", r.sl)
    } else {
        format!("lines {}-{}", r.sl, r.el)
    }
}

impl SimilarityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn render_text(&self) -> String {
        let mut out = format!(
            "Similarity report\n  A: {}\n  B: {}\n  model: {}\n  verdict: {}\n  s_A = {:.4}  s_B = {:.4}  (delta = {}, mode = {})\n",
            self.function_a, self.function_b, self.model, self.verdict, self.s_a, self.s_b, self.delta, self.mode
        );
        if self.matches.is_empty() {
            out.push_str("  no matching statements\n");
        } else {
            out.push_str("  matching statements:\n");
            for m in &self.matches {
                out.push_str(&format!("    A {:<12} <-> B {:<12} score {:.4}\n", lines(m.a), lines(m.b), m.score));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::PAIR_DIM;
    use crate::frontend::parse_function;

    fn approx(a: (f64, f64), b: (f64, f64)) -> bool {
        (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12
    }

    #[test]
    fn aggregation_examples() {
        for mode in [AggregationMode::Literal, AggregationMode::Proportion] {
            assert!(approx(aggregate_with(&[vec![1.0]], mode, 0.5), (1.0, 1.0)));
            assert!(approx(aggregate_with(&[vec![0.0, 0.0], vec![0.0, 0.0]], mode, 0.5), (0.0, 0.0)));
        }
        let b = [vec![1.0, 1.0], vec![0.0, 0.0]];
        assert!(approx(aggregate_with(&b, AggregationMode::Literal, 0.5), (1.0, 1.0)));
        assert!(approx(aggregate_with(&b, AggregationMode::Proportion, 0.5), (0.5, 1.0)));
        // literal mode can exceed one
        let ones = [vec![1.0; 3], vec![1.0; 3]];
        assert!(approx(aggregate_with(&ones, AggregationMode::Literal, 0.5), (3.0, 2.0)));
    }

    #[test]
    fn verdict_examples() {
        assert_eq!(verdict(0.71, 0.10, 0.7), Verdict::Clone);
        assert_eq!(verdict(0.69, 0.69, 0.7), Verdict::NotClone);
        assert_eq!(verdict(1.0, 1.0, 0.7), Verdict::Clone);
        assert_eq!(verdict(0.7, 0.0, 0.7), Verdict::Clone);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("literal".parse::<AggregationMode>().unwrap(), AggregationMode::Literal);
        assert!("max".parse::<AggregationMode>().is_err());
        assert_eq!(serde_json::to_string(&Verdict::NotClone).unwrap(), "\"not-clone\"");
    }

    fn constant_model(p: f64) -> GbdtModel {
        GbdtModel::constant((p / (1.0 - p)).ln(), PAIR_DIM)
    }

    #[test]
    fn shape_and_empty() {
        let a = parse_function("function a() {\n x = 1;\n y = 2;\n}").unwrap();
        let b = parse_function("function b() {\n x = 1;\n f();\n return;\n}").unwrap();
        let m = compare_functions(&a, &b, &constant_model(0.8)).unwrap();
        assert_eq!((m.r.len(), m.r[0].len()), (2, 3));
        let e = parse_function("function e() {}").unwrap();
        assert!(matches!(compare_functions(&a, &e, &constant_model(0.8)), Err(Error::EmptyFunction(n)) if n == "e"));
    }

    #[test]
    fn report_pairs_rows_with_first_best_column() {
        let a = parse_function("function a() {\n x = 1;\n y = 2;\n}").unwrap();
        let b = parse_function("function b() {\n x = 1;\n\n y = 2;\n}").unwrap();
        let r = compare_functions(&a, &b, &constant_model(0.8)).unwrap();
        let rep = generate_report(&r, ("a", "b"), "const", &CompareOptions::default());
        assert_eq!(rep.verdict, Verdict::Clone);
        assert_eq!(rep.matches.len(), 2);
        // all scores tie, so every row pairs with column 0
        assert!(rep.matches.iter().all(|m| m.b == LineRange { sl: 2, el: 2 }));
        let text = rep.render_text();
        assert!(text.contains("A line 2") && text.contains("verdict: clone"));
        let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
        assert_eq!(json["matches"][1]["a"]["sl"], 3);
        assert_eq!(json["verdict"], "clone");

        let low = generate_report(&compare_functions(&a, &b, &constant_model(0.2)).unwrap(), ("a", "b"), "c", &CompareOptions::default());
        assert_eq!(low.verdict, Verdict::NotClone);
        assert!(low.matches.is_empty());
    }
}
