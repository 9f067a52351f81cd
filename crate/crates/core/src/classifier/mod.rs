//! Boosted-tree classifier over statement-pair feature vectors.

mod gbdt;
mod hyper;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use gbdt::{
    cross_entropy, cross_entropy_from_margins, sigmoid, train, train_matrix, train_traced, GbdtModel,
    LabeledPair, RegressionTree, TrainTrace, TreeNode, LAMBDA,
};
pub use hyper::{bounds, HyperPoint, HYPER_DIM};

use crate::error::{Error, Result, ResultExt};
use crate::features::{component_category, feature_names, NodeCategory};

pub const SCHEMA_VERSION: u32 = 1;

/// Name used for the components that do not belong to a node category.
pub const STRUCTURAL: &str = "Structural";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// One weight per pair-vector component, in component order.
    pub components: Vec<(String, f64)>,
    /// Category totals, in category order, followed by [`STRUCTURAL`].
    pub categories: Vec<(String, f64)>,
}

impl FeatureImportance {
    /// Categories sorted by descending weight; ties keep category order.
    pub fn ranked_categories(&self) -> Vec<(String, f64)> {
        let mut v = self.categories.clone();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }

    pub fn category(&self, c: NodeCategory) -> f64 {
        self.categories[c.index()].1
    }

    /// Ranked two-column table of category weights.
    pub fn table(&self) -> String {
        let mut out = String::from("Rank  Feature             Weight\n");
        for (i, (name, w)) in self.ranked_categories().iter().enumerate() {
            out.push_str(&format!("{:<5} {:<19} {:.4}\n", i + 1, name, w));
        }
        out
    }
}

/// Split-frequency importance. Each weight is the share of all internal
/// nodes that split on that component.
pub fn feature_importance(m: &GbdtModel) -> Result<FeatureImportance> {
    let total: usize = m.split_counts.iter().sum();
    if total == 0 {
        return Err(Error::ZeroSplits);
    }
    let names = feature_names();
    let components: Vec<(String, f64)> = m
        .split_counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let name = names.get(i).cloned().unwrap_or_else(|| format!("f{i}"));
            (name, c as f64 / total as f64)
        })
        .collect();

    let mut counts = [0usize; 8];
    for (i, &c) in m.split_counts.iter().enumerate() {
        let slot = component_category(i).map_or(7, NodeCategory::index);
        counts[slot] += c;
    }
    let categories = NodeCategory::ALL
        .iter()
        .map(|c| c.name().to_string())
        .chain(std::iter::once(STRUCTURAL.to_string()))
        .zip(counts)
        .map(|(name, c)| (name, c as f64 / total as f64))
        .collect();
    Ok(FeatureImportance { components, categories })
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    #[serde(flatten)]
    model: GbdtModel,
}

pub fn model_to_json(m: &GbdtModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile { schema_version: SCHEMA_VERSION, model: m.clone() })?)
}

pub fn model_from_json(text: &str) -> Result<GbdtModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    Ok(file.model)
}

pub fn save_model(m: &GbdtModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_json(m)?).map_err(Error::from).context(|| format!("writing {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    let text = std::fs::read_to_string(path).map_err(Error::from).context(|| format!("reading {}", path.display()))?;
    model_from_json(&text).context(|| format!("parsing {}", path.display()))
}

pub fn write_pairs<W: Write>(pairs: &[LabeledPair], mut w: W) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Read JSON-lines pairs. Blank lines are skipped; errors carry the
/// 1-based line number.
pub fn read_pairs<R: BufRead>(r: R, path: &str) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema { path: path.into(), line: i + 1, message };
        let p: LabeledPair = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if p.y > 1 {
            return Err(schema(format!("label must be 0 or 1, got {}", p.y)));
        }
        out.push(p);
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<Vec<LabeledPair>> {
    let f = std::fs::File::open(path).map_err(Error::from).context(|| format!("opening {}", path.display()))?;
    read_pairs(std::io::BufReader::new(f), &path.display().to_string())
}
