//! Labeled function pairs, synthetic clone corpora and corpus grouping.

mod generator;
mod transforms;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use generator::generate_template;
pub use transforms::{
    apply as apply_transform, dead_code_count, effects, independent, rename_identifiers, reparse, Effects,
    Transform, Transformed, BUILTINS,
};

use crate::classifier::{GbdtModel, LabeledPair};
use crate::error::{Error, Result, ResultExt};
use crate::features::{extract_features, pair_features, FeatureSet, NodeCategory};
use crate::frontend::{parse_contract, parse_function, print_function, FunctionAst};
use crate::rng::substream;
use crate::similarity::{compare_and_report, CompareOptions};
use crate::statement_tree::decompose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Human,
    SyntheticTransform,
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub source_a: String,
    pub source_b: String,
    pub label: u8,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_a: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_b: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<Transform>,
}

pub fn write_records<W: Write>(records: &[PairRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Parse JSON-lines records. Each record must have a binary label and two
/// sources that each hold exactly one parseable function.
pub fn read_records<R: BufRead>(r: R, path: &str) -> Result<Vec<PairRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema { path: path.into(), line: i + 1, message };
        let rec: PairRecord = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if rec.label > 1 {
            return Err(schema(format!("label must be 0 or 1, got {}", rec.label)));
        }
        for (side, src) in [("source_a", &rec.source_a), ("source_b", &rec.source_b)] {
            parse_function(src).map_err(|e| schema(format!("{side}: {e}")))?;
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let f = std::fs::File::open(path).map_err(Error::from).context(|| format!("opening {}", path.display()))?;
    read_records(std::io::BufReader::new(f), &path.display().to_string())
}

pub fn save_pairs(records: &[PairRecord], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(Error::from).context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(f);
    write_records(records, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Every function of every `.sol` file in `dir`, files in name order.
pub fn load_functions_dir(dir: &Path) -> Result<Vec<FunctionAst>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(Error::from)
        .context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "sol"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(&p).map_err(Error::from).context(|| format!("reading {}", p.display()))?;
        out.extend(parse_contract(&text).context(|| format!("parsing {}", p.display()))?);
    }
    Ok(out)
}

pub fn generate_templates(count: usize, seed: u64) -> Result<Vec<FunctionAst>> {
    let mut rng = substream(seed, "corpus.templates");
    (0..count).map(|id| generate_template(&mut rng, id)).collect()
}

/// One function of a synthetic pair, with its template and the position of
/// every template statement in its body.
#[derive(Debug, Clone)]
pub struct Variant {
    pub template: usize,
    pub transform: Option<Transform>,
    pub function: FunctionAst,
    pub alignment: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthPair {
    pub record: PairRecord,
    pub a: Variant,
    pub b: Variant,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub templates: Vec<FunctionAst>,
    /// `variants[t]` holds the template itself followed by one variant per
    /// requested transform.
    pub variants: Vec<Vec<Variant>>,
    pub pairs: Vec<SynthPair>,
}

impl SyntheticCorpus {
    pub fn records(&self) -> Vec<PairRecord> {
        self.pairs.iter().map(|p| p.record.clone()).collect()
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.record.label == 1).count()
    }
}

/// Positives pair each base function with each of its transforms; negatives
/// pair variants of two different templates, twice as many as positives.
pub fn synthesize(base: &[FunctionAst], transforms: &[Transform], seed: u64) -> Result<SyntheticCorpus> {
    let mut rng = substream(seed, "corpus.synth");
    let templates: Vec<FunctionAst> = base.iter().map(reparse).collect::<Result<_>>()?;
    let mut variants = Vec::with_capacity(templates.len());
    for (t, f) in templates.iter().enumerate() {
        let mut vs = vec![Variant {
            template: t,
            transform: None,
            function: f.clone(),
            alignment: (0..f.body.children.len()).collect(),
        }];
        for &tr in transforms {
            let out = apply_transform(f, tr, &mut rng).context(|| format!("{tr} on {}", f.qualified_name()))?;
            vs.push(Variant { template: t, transform: Some(tr), function: out.function, alignment: out.alignment });
        }
        variants.push(vs);
    }

    let text = |f: &FunctionAst| print_function(f);
    let mut pairs = Vec::new();
    for vs in &variants {
        for v in &vs[1..] {
            let id = format!("pos-{}-{}", v.template, v.transform.map_or("none", Transform::name));
            pairs.push(SynthPair {
                record: PairRecord {
                    id,
                    source_a: text(&vs[0].function),
                    source_b: text(&v.function),
                    label: 1,
                    origin: Origin::SyntheticTransform,
                    template_a: Some(v.template),
                    template_b: Some(v.template),
                    transform: v.transform,
                },
                a: vs[0].clone(),
                b: v.clone(),
            });
        }
    }
    let n_neg = 2 * pairs.len();
    if variants.len() >= 2 {
        for k in 0..n_neg {
            let ta = rng.random_range(0..variants.len());
            let mut tb = rng.random_range(0..variants.len() - 1);
            if tb >= ta {
                tb += 1;
            }
            let a = variants[ta].choose(&mut rng).expect("non-empty").clone();
            let b = variants[tb].choose(&mut rng).expect("non-empty").clone();
            pairs.push(SynthPair {
                record: PairRecord {
                    id: format!("neg-{k}"),
                    source_a: text(&a.function),
                    source_b: text(&b.function),
                    label: 0,
                    origin: Origin::Heuristic,
                    template_a: Some(ta),
                    template_b: Some(tb),
                    transform: None,
                },
                a,
                b,
            });
        }
    }
    Ok(SyntheticCorpus { templates, variants, pairs })
}

pub fn synthesize_clones(base: &[FunctionAst], transforms: &[Transform], seed: u64) -> Result<Vec<PairRecord>> {
    Ok(synthesize(base, transforms, seed)?.records())
}

/// Equal in every category except literal values; such pairs are neither
/// clear positives nor clear negatives and are left out of training.
fn equal_ignoring_values(a: &FeatureSet, b: &FeatureSet) -> bool {
    let mut same = a.kind == b.kind;
    for c in NodeCategory::ALL {
        if c == NodeCategory::Value {
            continue;
        }
        let mut x = a.bag(c).to_vec();
        let mut y = b.bag(c).to_vec();
        x.sort();
        y.sort();
        same &= x == y;
    }
    same
}

/// Statement-level training pairs. Aligned statements of positive pairs are
/// positives; negatives are drawn from unrelated statements, twice as many.
pub fn statement_pairs(corpus: &SyntheticCorpus, seed: u64) -> Vec<LabeledPair> {
    let mut rng = substream(seed, "corpus.statement-pairs");
    let feats = |v: &Variant| -> Vec<FeatureSet> { decompose(&v.function).iter().map(extract_features).collect() };

    let mut positives = Vec::new();
    let mut seen = BTreeSet::new();
    for p in corpus.pairs.iter().filter(|p| p.record.label == 1) {
        let (fa, fb) = (feats(&p.a), feats(&p.b));
        for (i, &j) in p.b.alignment.iter().enumerate() {
            let x = pair_features(&fa[p.a.alignment[i]], &fb[j]);
            let key: Vec<u64> = x.0.iter().map(|v| v.to_bits()).collect();
            // exact duplicates carry no information
            if seen.insert(key) {
                positives.push(LabeledPair { x, y: 1 });
            }
        }
    }

    let pool: Vec<(usize, Vec<FeatureSet>)> =
        corpus.variants.iter().flatten().map(|v| (v.template, feats(v))).collect();
    let target = 2 * positives.len();
    let mut negatives = Vec::with_capacity(target);
    let mut attempts = 0;
    while negatives.len() < target && attempts < 50 * target.max(1) && pool.len() >= 2 {
        attempts += 1;
        let (ta, fa) = pool.choose(&mut rng).expect("non-empty");
        let (tb, fb) = pool.choose(&mut rng).expect("non-empty");
        if ta == tb || fa.is_empty() || fb.is_empty() {
            continue;
        }
        let a = fa.choose(&mut rng).expect("non-empty");
        let b = fb.choose(&mut rng).expect("non-empty");
        if equal_ignoring_values(a, b) {
            continue;
        }
        negatives.push(LabeledPair { x: pair_features(a, b), y: 0 });
    }

    let mut all = positives;
    all.extend(negatives);
    all.shuffle(&mut rng);
    all
}

/// Split into `(train, validation)` with `val_fraction` of the pairs held out.
pub fn split_pairs(mut pairs: Vec<LabeledPair>, val_fraction: f64, seed: u64) -> (Vec<LabeledPair>, Vec<LabeledPair>) {
    pairs.shuffle(&mut substream(seed, "corpus.split"));
    let n_val = ((pairs.len() as f64) * val_fraction).round() as usize;
    let val = pairs.split_off(pairs.len() - n_val.min(pairs.len()));
    (pairs, val)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionGroup {
    pub group_id: usize,
    /// Indices into the grouped function list.
    pub members: Vec<usize>,
    pub template: usize,
}

/// Greedy first-fit: each function joins the first group whose template it
/// clones, otherwise it founds a new group. Functions without statements
/// always found their own group.
pub fn group_corpus(functions: &[FunctionAst], model: &GbdtModel, opts: &CompareOptions) -> Result<Vec<FunctionGroup>> {
    let mut groups: Vec<FunctionGroup> = Vec::new();
    for (i, f) in functions.iter().enumerate() {
        let mut home = None;
        if !f.body.children.is_empty() {
            for g in &groups {
                let t = &functions[g.template];
                if t.body.children.is_empty() {
                    continue;
                }
                if compare_and_report(t, f, model, "", opts)?.verdict.is_clone() {
                    home = Some(g.group_id);
                    break;
                }
            }
        }
        match home {
            Some(g) => groups[g].members.push(i),
            None => groups.push(FunctionGroup { group_id: groups.len(), members: vec![i], template: i }),
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_three_record_files() {
        assert!(read_records(&b""[..], "x").unwrap().is_empty());
        let rec = |id: &str, label| PairRecord {
            id: id.into(),
            source_a: "function f() {\n x = 1;\n}".into(),
            source_b: "function g() {\n y = 2;\n}".into(),
            label,
            origin: Origin::Human,
            template_a: None,
            template_b: None,
            transform: None,
        };
        let recs = vec![rec("a", 1), rec("b", 0), rec("c", 1)];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        let back = read_records(&buf[..], "x").unwrap();
        assert_eq!(back, recs);
        let mut again = Vec::new();
        write_records(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn missing_label_reports_line() {
        let good = r#"{"id":"a","source_a":"function f() {}","source_b":"function g() {}","label":0,"origin":"human"}"#;
        let bad = r#"{"id":"b","source_a":"function f() {}","source_b":"function g() {}","origin":"human"}"#;
        let text = format!("{good}\n{bad}\n");
        match read_records(text.as_bytes(), "pairs.jsonl") {
            Err(Error::Schema { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("label"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let unparsable = good.replace("function g() {}", "function g( {}");
        assert!(matches!(read_records(unparsable.as_bytes(), "p"), Err(Error::Schema { line: 1, .. })));
    }

    #[test]
    fn synthetic_class_ratio_and_labels() {
        let base = generate_templates(6, 1).unwrap();
        let c = synthesize(&base, &Transform::ALL, 2).unwrap();
        assert_eq!(c.positives(), 24);
        assert_eq!(c.pairs.len(), 72);
        for p in &c.pairs {
            let same = p.record.template_a == p.record.template_b;
            assert_eq!(same, p.record.label == 1);
        }
        let again = synthesize(&base, &Transform::ALL, 2).unwrap();
        assert_eq!(c.records(), again.records());
    }

    #[test]
    fn statement_pairs_are_balanced() {
        let base = generate_templates(8, 3).unwrap();
        let c = synthesize(&base, &Transform::ALL, 4).unwrap();
        let pairs = statement_pairs(&c, 5);
        let pos = pairs.iter().filter(|p| p.y == 1).count();
        assert!(pos > 10);
        assert_eq!(pairs.len() - pos, 2 * pos);
        let (train, val) = split_pairs(pairs.clone(), 0.25, 1);
        assert_eq!(train.len() + val.len(), pairs.len());
    }

    #[test]
    fn copies_form_one_group_and_strangers_many() {
        let f = parse_function("function f() {\n x = 1;\n y = 2;\n}").unwrap();
        let opts = CompareOptions::default();
        let clone_all = GbdtModel::constant(3.0, crate::features::PAIR_DIM);
        let groups = group_corpus(&vec![f.clone(); 4], &clone_all, &opts).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members, vec![0, 1, 2, 3]);
        let clone_none = GbdtModel::constant(-3.0, crate::features::PAIR_DIM);
        let groups = group_corpus(&vec![f; 3], &clone_none, &opts).unwrap();
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().all(|g| g.members == vec![g.template]));
    }
}
