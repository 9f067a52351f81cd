//! End-to-end driver: configuration, model resolution, comparison reports,
//! threshold sweeps and the synthetic training recipe.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::{
    cross_entropy, load_model, load_pairs, model_to_json, save_model, train, GbdtModel, HyperPoint, LabeledPair,
};
use crate::corpus::{generate_templates, split_pairs, statement_pairs, synthesize, SyntheticCorpus, Transform};
use crate::error::{Error, Result, ResultExt};
use crate::frontend::{find_function, parse_contract, parse_function, FunctionAst};
use crate::hpo::{optimize, HpoConfig, HpoOutcome};
use crate::rng::{derive_seed, fnv1a};
use crate::similarity::{
    aggregate_with, compare_and_report, compare_functions, verdict, AggregationMode, CompareOptions,
    SimilarityReport, Verdict, DEFAULT_DELTA, DEFAULT_TAU_MATCH, SCHEMA_VERSION,
};

pub const SEED_ENV: &str = "CLONESCOPE_SEED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub delta: f64,
    pub mode: AggregationMode,
    pub tau_match: f64,
    pub hyper: HyperPoint,
    /// Optimized hyperparameters written by `optimize`; wins over `hyper`.
    pub hyper_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    /// Statement-pair JSONL used to train when no model file exists.
    pub data_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            delta: DEFAULT_DELTA,
            mode: AggregationMode::Proportion,
            tau_match: DEFAULT_TAU_MATCH,
            hyper: HyperPoint::default(),
            hyper_path: None,
            model_path: None,
            data_path: None,
            output_dir: None,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    delta: Option<f64>,
    mode: Option<AggregationMode>,
    tau_match: Option<f64>,
    hyper: Option<HyperPoint>,
    hyper_path: Option<PathBuf>,
    model: Option<PathBuf>,
    data: Option<PathBuf>,
    output: Option<PathBuf>,
}

impl RunConfig {
    /// Parse a `key = value` config file. Missing keys keep their defaults;
    /// hyperparameters go in a `[hyper]` table.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let d = RunConfig::default();
        let cfg = RunConfig {
            seed: raw.seed.unwrap_or(d.seed),
            delta: raw.delta.unwrap_or(d.delta),
            mode: raw.mode.unwrap_or(d.mode),
            tau_match: raw.tau_match.unwrap_or(d.tau_match),
            hyper: raw.hyper.unwrap_or(d.hyper),
            hyper_path: raw.hyper_path,
            model_path: raw.model,
            data_path: raw.data,
            output_dir: raw.output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::from).context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).context(|| format!("config {}", path.display()))
    }

    /// Apply `CLONESCOPE_SEED` if it is set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not a u64")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.tau_match > 0.0 && self.tau_match < 1.0) {
            return Err(Error::Config(format!("tau_match must lie in (0,1), got {}", self.tau_match)));
        }
        self.hyper.validate()
    }

    pub fn compare_options(&self) -> CompareOptions {
        CompareOptions { delta: self.delta, mode: self.mode, tau_match: self.tau_match }
    }

    pub fn resolved_hyper(&self) -> Result<HyperPoint> {
        match &self.hyper_path {
            Some(p) => Ok(load_hyper(p)?.hyper),
            None => Ok(self.hyper),
        }
    }

    /// Load the model file, or train one from `data_path` and save it to
    /// `model_path` when that is set.
    pub fn resolve_model(&self) -> Result<GbdtModel> {
        if let Some(p) = self.model_path.as_ref().filter(|p| p.exists()) {
            return load_model(p).context(|| format!("model {}", p.display()));
        }
        let Some(data) = &self.data_path else {
            return Err(Error::Config("no model file and no training data".into()));
        };
        let pairs = load_pairs(data)?;
        let model = train(&pairs, &self.resolved_hyper()?, derive_seed(self.seed, "pipeline.train"))?;
        if let Some(p) = &self.model_path {
            save_model(&model, p)?;
        }
        Ok(model)
    }
}

/// Optimized hyperparameters as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperFile {
    pub schema_version: u32,
    pub hyper: HyperPoint,
    pub loss: f64,
}

pub fn save_hyper(h: &HyperFile, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(h)?).map_err(Error::from).context(|| format!("writing {}", path.display()))
}

pub fn load_hyper(path: &Path) -> Result<HyperFile> {
    let text = std::fs::read_to_string(path).map_err(Error::from).context(|| format!("reading {}", path.display()))?;
    let h: HyperFile = serde_json::from_str(&text).map_err(Error::from).context(|| format!("parsing {}", path.display()))?;
    h.hyper.validate()?;
    Ok(h)
}

/// Short stable identifier of a model's serialized form.
pub fn model_id(m: &GbdtModel) -> Result<String> {
    Ok(format!("gbdt-{:016x}", fnv1a(&model_to_json(m)?)))
}

/// `path` or `path:function`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionRef {
    pub path: PathBuf,
    pub function: Option<String>,
}

impl FromStr for FunctionRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.rsplit_once(':') {
            Some((p, f)) if !p.is_empty() && !f.is_empty() && !f.contains('/') => {
                Ok(FunctionRef { path: p.into(), function: Some(f.to_string()) })
            }
            _ if s.is_empty() => Err(Error::Config("empty function reference".into())),
            _ => Ok(FunctionRef { path: s.into(), function: None }),
        }
    }
}

impl std::fmt::Display for FunctionRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.function {
            Some(name) => write!(f, "{}:{name}", self.path.display()),
            None => write!(f, "{}", self.path.display()),
        }
    }
}

impl FunctionRef {
    pub fn load(&self) -> Result<FunctionAst> {
        let text = std::fs::read_to_string(&self.path)
            .map_err(Error::from)
            .context(|| format!("reading {}", self.path.display()))?;
        let found = match &self.function {
            None => parse_function(&text),
            Some(name) => {
                let functions = parse_contract(&text)?;
                find_function(&functions, name).cloned().ok_or_else(|| Error::FunctionNotFound(name.clone()))
            }
        };
        found.context(|| self.to_string())
    }
}

/// Compare two functions with the configured model and write
/// `report.json` and `report.txt` into the output directory, if any.
pub fn run_end_to_end(cfg: &RunConfig, a: &FunctionRef, b: &FunctionRef) -> Result<SimilarityReport> {
    cfg.validate()?;
    let fa = a.load()?;
    let fb = b.load()?;
    let model = cfg.resolve_model()?;
    let report = compare_and_report(&fa, &fb, &model, &model_id(&model)?, &cfg.compare_options())
        .context(|| format!("comparing {a} with {b}"))?;
    if let Some(dir) = &cfg.output_dir {
        write_reports(&report, dir)?;
    }
    Ok(report)
}

pub fn write_reports(report: &SimilarityReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::from).context(|| format!("creating {}", dir.display()))?;
    for (name, body) in [("report.json", report.to_json()? + "\n"), ("report.txt", report.render_text())] {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(Error::from).context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

/// 0 for not-clone, 1 for clone, 2 for any error.
pub fn exit_code(outcome: &Result<SimilarityReport>) -> i32 {
    match outcome {
        Ok(r) if r.verdict.is_clone() => 1,
        Ok(_) => 0,
        Err(_) => 2,
    }
}

/// A function pair with a known clone label.
#[derive(Debug, Clone)]
pub struct LabeledFunctions {
    pub a: FunctionAst,
    pub b: FunctionAst,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, predicted: bool, label: u8) {
        match (predicted, label == 1) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    /// 1 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    /// 1 when there are no positives.
    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

/// Aggregated `(s_A, s_B)` for every pair.
pub fn pair_scores(model: &GbdtModel, pairs: &[LabeledFunctions], opts: &CompareOptions) -> Result<Vec<(f64, f64)>> {
    pairs
        .iter()
        .map(|p| {
            let r = compare_functions(&p.a, &p.b, model)
                .context(|| format!("{} vs {}", p.a.qualified_name(), p.b.qualified_name()))?;
            Ok(aggregate_with(&r.r, opts.mode, opts.tau_match))
        })
        .collect()
}

/// Verdicts and their confusion counts at `opts.delta`.
pub fn evaluate(model: &GbdtModel, pairs: &[LabeledFunctions], opts: &CompareOptions) -> Result<(Confusion, Vec<Verdict>)> {
    let scores = pair_scores(model, pairs, opts)?;
    let mut c = Confusion::default();
    let verdicts: Vec<Verdict> = scores.iter().map(|&(sa, sb)| verdict(sa, sb, opts.delta)).collect();
    for (v, p) in verdicts.iter().zip(pairs) {
        c.add(v.is_clone(), p.label);
    }
    Ok((c, verdicts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub delta: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Confusion,
}

/// Precision and recall at each threshold. Scores are computed once and
/// thresholded per row; `opts.delta` is ignored.
pub fn sweep_delta(
    model: &GbdtModel,
    pairs: &[LabeledFunctions],
    deltas: &[f64],
    opts: &CompareOptions,
) -> Result<Vec<SweepRow>> {
    if pairs.is_empty() {
        return Err(Error::Config("delta sweep needs at least one labeled pair".into()));
    }
    let scores = pair_scores(model, pairs, opts)?;
    Ok(deltas
        .iter()
        .map(|&delta| {
            let mut c = Confusion::default();
            for (&(sa, sb), p) in scores.iter().zip(pairs) {
                c.add(verdict(sa, sb, delta).is_clone(), p.label);
            }
            SweepRow { delta, precision: c.precision(), recall: c.recall(), f1: c.f1(), counts: c }
        })
        .collect())
}

/// 0.5, 0.55, ..., 0.9.
pub fn default_sweep() -> Vec<f64> {
    (0..9).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = format!("{:>6}  {:>9}  {:>7}  {:>7}\n", "delta", "precision", "recall", "f1");
    for r in rows {
        out.push_str(&format!("{:>6.2}  {:>9.4}  {:>7.4}  {:>7.4}\n", r.delta, r.precision, r.recall, r.f1));
    }
    out
}

pub fn labeled_functions(corpus: &SyntheticCorpus) -> Vec<LabeledFunctions> {
    corpus
        .pairs
        .iter()
        .map(|p| LabeledFunctions { a: p.a.function.clone(), b: p.b.function.clone(), label: p.record.label })
        .collect()
}

/// Knobs of the synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Templates of the evaluation corpus.
    pub eval_templates: usize,
    /// Templates of the disjoint corpus the classifier learns from.
    pub train_templates: usize,
    pub val_fraction: f64,
    /// `None` trains with the default hyperparameters.
    pub hpo: Option<HpoConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig { seed: 0, eval_templates: 50, train_templates: 50, val_fraction: 0.25, hpo: Some(HpoConfig::default()) }
    }
}

pub fn evaluation_corpus(cfg: &ExperimentConfig) -> Result<SyntheticCorpus> {
    let base = generate_templates(cfg.eval_templates, derive_seed(cfg.seed, "pipeline.eval-templates"))?;
    synthesize(&base, &Transform::ALL, derive_seed(cfg.seed, "pipeline.eval-synth"))
}

/// Statement-level `(train, validation)` pairs from a training corpus whose
/// templates are generated independently of the evaluation corpus.
pub fn training_split(cfg: &ExperimentConfig) -> Result<(Vec<LabeledPair>, Vec<LabeledPair>)> {
    let base = generate_templates(cfg.train_templates, derive_seed(cfg.seed, "pipeline.train-templates"))?;
    let corpus = synthesize(&base, &Transform::ALL, derive_seed(cfg.seed, "pipeline.train-synth"))?;
    let pairs = statement_pairs(&corpus, derive_seed(cfg.seed, "pipeline.statement-pairs"));
    Ok(split_pairs(pairs, cfg.val_fraction, derive_seed(cfg.seed, "pipeline.split")))
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub model: GbdtModel,
    pub hyper: HyperPoint,
    /// Validation cross-entropy of `model`.
    pub loss: f64,
    /// Validation cross-entropy of the default hyperparameters, same seed.
    pub default_loss: f64,
    pub hpo: Option<HpoOutcome>,
}

/// Train on `train_set`, optionally choosing hyperparameters by search
/// against `val`. The final model uses the same training seed as the
/// search, so `loss` equals the verified loss of the chosen point.
pub fn train_classifier(
    train_set: &[LabeledPair],
    val: &[LabeledPair],
    hpo: Option<&HpoConfig>,
    seed: u64,
) -> Result<TrainedClassifier> {
    let (train_seed, outcome) = match hpo {
        Some(h) => {
            let h = HpoConfig { seed, ..h.clone() };
            (derive_seed(h.seed, "hpo.train"), Some(optimize(train_set, val, &h)?))
        }
        None => (derive_seed(seed, "hpo.train"), None),
    };
    let hyper = outcome.as_ref().map_or_else(HyperPoint::default, |o| o.best);
    let model = train(train_set, &hyper, train_seed)?;
    let loss = cross_entropy(val, &model)?;
    let default_loss = if hyper == HyperPoint::default() {
        loss
    } else {
        cross_entropy(val, &train(train_set, &HyperPoint::default(), train_seed)?)?
    };
    Ok(TrainedClassifier { model, hyper, loss, default_loss, hpo: outcome })
}

pub fn hyper_file(t: &TrainedClassifier) -> HyperFile {
    HyperFile { schema_version: SCHEMA_VERSION, hyper: t.hyper, loss: t.loss }
}
