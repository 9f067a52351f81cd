use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use clonescope::classifier::{feature_importance, load_pairs as load_labeled, save_model, load_model, train, write_pairs};
use clonescope::corpus::{
    generate_templates, group_corpus, load_functions_dir, load_pairs, synthesize, statement_pairs, split_pairs,
    write_records, Transform,
};
use clonescope::features::extract_features;
use clonescope::frontend::{parse_contract, AstJson};
use clonescope::hpo::{optimize, HpoConfig};
use clonescope::pipeline::{
    default_sweep, exit_code, model_id, run_end_to_end, save_hyper, sweep_delta, sweep_table, FunctionRef,
    HyperFile, LabeledFunctions, RunConfig,
};
use clonescope::rng::derive_seed;
use clonescope::similarity::{AggregationMode, SimilarityReport, SCHEMA_VERSION};
use clonescope::statement_tree::{decompose, StatementTreeJson};
use clonescope::{Error, Result};

macro_rules! out {
    ($($t:tt)*) => {
        write!(std::io::stdout().lock(), $($t)*)?
    };
}

macro_rules! outln {
    ($($t:tt)*) => {
        writeln!(std::io::stdout().lock(), $($t)*)?
    };
}

#[derive(Parser)]
#[command(name = "clonescope", version, about = "Statement-tree clone detection for Solidity functions")]
struct Cli {
    /// Key-value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream (overrides config and CLONESCOPE_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the functions of a source file, or dump their ASTs.
    Parse {
        file: PathBuf,
        #[arg(long)]
        ast: bool,
    },
    /// Split a function into statement trees.
    Decompose { function: FunctionRef },
    /// Category-level features of every statement tree of a function.
    Extract { function: FunctionRef },
    /// Train a classifier on statement-pair JSONL.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hyperparameters written by `optimize`.
        #[arg(long)]
        hyper: Option<PathBuf>,
    },
    /// Search hyperparameters against a held-out split of statement pairs.
    Optimize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Every true-loss evaluation as JSONL.
        #[arg(long)]
        history: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        val_fraction: f64,
        #[arg(long, default_value_t = 128)]
        budget: usize,
        #[arg(long, default_value_t = 64)]
        k: usize,
        #[arg(long, default_value_t = 8)]
        steps: usize,
    },
    /// Compare two functions given as `file.sol:function`.
    Compare {
        a: FunctionRef,
        b: FunctionRef,
        #[command(flatten)]
        opts: CompareArgs,
        #[arg(long, conflicts_with = "text")]
        json: bool,
        #[arg(long)]
        text: bool,
        /// Also write report.json and report.txt here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision and recall over a range of thresholds.
    Sweep {
        /// Labeled function pairs (JSONL).
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        opts: CompareArgs,
        /// Comma-separated thresholds; defaults to 0.5..0.9 in steps of 0.05.
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Build a synthetic clone corpus.
    Synth {
        /// Directory of .sol files whose functions serve as templates.
        #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
        templates: Option<PathBuf>,
        /// Generate this many template functions instead.
        #[arg(long)]
        generate: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Also write statement-level training pairs.
        #[arg(long)]
        statement_pairs: Option<PathBuf>,
        /// Subset of transforms; all four by default.
        #[arg(long, value_delimiter = ',')]
        transforms: Vec<Transform>,
    },
    /// Partition the functions of a directory into clone groups.
    Group {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        opts: CompareArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved JSON similarity report as text.
    Report { report: PathBuf },
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Statement-pair JSONL to train from when the model file is missing.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    mode: Option<AggregationMode>,
    #[arg(long)]
    tau_match: Option<f64>,
}

impl CompareArgs {
    fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        cfg.model_path = self.model.clone().or(cfg.model_path);
        cfg.data_path = self.data.clone().or(cfg.data_path);
        cfg.delta = self.delta.unwrap_or(cfg.delta);
        cfg.mode = self.mode.unwrap_or(cfg.mode);
        cfg.tau_match = self.tau_match.unwrap_or(cfg.tau_match);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut cfg = cfg.with_env_seed()?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn print_json(v: &Value) -> Result<()> {
    outln!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = base_config(cli)?;
    match &cli.command {
        Command::Parse { file, ast } => {
            let text = std::fs::read_to_string(file).map_err(|e| Error::from(e).context(file.display().to_string()))?;
            let functions = parse_contract(&text).map_err(|e| e.context(file.display().to_string()))?;
            let list: Vec<Value> = functions
                .iter()
                .map(|f| {
                    let mut v = json!({
                        "name": f.qualified_name(),
                        "span": f.span,
                        "params": f.params.iter().map(|(n, t)| json!({"name": n, "type": t})).collect::<Vec<_>>(),
                        "statements": f.body.children.len(),
                    });
                    if *ast {
                        v["signature"] = json!(AstJson::from(&f.signature));
                        v["body"] = json!(AstJson::from(&f.body));
                    }
                    v
                })
                .collect();
            print_json(&json!({"schema_version": SCHEMA_VERSION, "file": file, "functions": list}))?;
        }
        Command::Decompose { function } => {
            let f = function.load()?;
            let trees: Vec<StatementTreeJson> = decompose(&f).iter().map(StatementTreeJson::from).collect();
            print_json(&json!({"schema_version": SCHEMA_VERSION, "function": f.qualified_name(), "trees": trees}))?;
        }
        Command::Extract { function } => {
            let f = function.load()?;
            let features: Vec<Value> = decompose(&f)
                .iter()
                .map(|t| json!({"index": t.index, "span": t.span, "features": extract_features(t).to_json()}))
                .collect();
            print_json(&json!({"schema_version": SCHEMA_VERSION, "function": f.qualified_name(), "trees": features}))?;
        }
        Command::Train { data, out, hyper } => {
            let mut cfg = cfg;
            cfg.hyper_path = hyper.clone().or(cfg.hyper_path);
            let pairs = load_labeled(data)?;
            let model = train(&pairs, &cfg.resolved_hyper()?, derive_seed(cfg.seed, "pipeline.train"))?;
            save_model(&model, out)?;
            outln!("model {} ({} trees) written to {}", model_id(&model)?, model.trees.len(), out.display());
            match feature_importance(&model) {
                Ok(imp) => out!("{}", imp.table()),
                Err(Error::ZeroSplits) => outln!("model has no splits; no importance table"),
                Err(e) => return Err(e),
            }
        }
        Command::Optimize { data, out, history, val_fraction, budget, k, steps } => {
            let pairs = load_labeled(data)?;
            let (train_set, val) = split_pairs(pairs, *val_fraction, derive_seed(cfg.seed, "pipeline.split"));
            let hcfg = HpoConfig { budget: *budget, k: *k, steps: *steps, seed: cfg.seed, ..HpoConfig::default() };
            let outcome = optimize(&train_set, &val, &hcfg)?;
            save_hyper(&HyperFile { schema_version: SCHEMA_VERSION, hyper: outcome.best, loss: outcome.best_loss }, out)?;
            if let Some(p) = history {
                let mut w = create(p)?;
                for e in &outcome.history {
                    serde_json::to_writer(&mut w, &json!({"schema_version": SCHEMA_VERSION, "point": e.point, "loss": e.loss, "stage": e.stage}))?;
                    w.write_all(b"\n")?;
                }
                w.flush()?;
            }
            outln!("best validation loss {:.6} after {} evaluations", outcome.best_loss, outcome.history.len());
            outln!("{}", serde_json::to_string_pretty(&outcome.best)?);
        }
        Command::Compare { a, b, opts, json, text, out } => {
            let mut cfg = opts.apply(cfg)?;
            cfg.output_dir = out.clone().or(cfg.output_dir);
            let result = run_end_to_end(&cfg, a, b);
            let report: &SimilarityReport = match &result {
                Ok(r) => r,
                Err(_) => return result.map(|_| 2),
            };
            if *json || !*text {
                outln!("{}", report.to_json()?);
            } else {
                out!("{}", report.render_text());
            }
            return Ok(exit_code(&result) as u8);
        }
        Command::Sweep { pairs, opts, deltas, json } => {
            let cfg = opts.apply(cfg)?;
            let model = cfg.resolve_model()?;
            let records = load_pairs(pairs)?;
            let labeled = records
                .iter()
                .map(|r| {
                    let parse = |s: &str| clonescope::frontend::parse_function(s).map_err(|e| e.context(format!("record {}", r.id)));
                    Ok(LabeledFunctions { a: parse(&r.source_a)?, b: parse(&r.source_b)?, label: r.label })
                })
                .collect::<Result<Vec<_>>>()?;
            let deltas = if deltas.is_empty() { default_sweep() } else { deltas.clone() };
            let rows = sweep_delta(&model, &labeled, &deltas, &cfg.compare_options())?;
            if *json {
                print_json(&json!({"schema_version": SCHEMA_VERSION, "model": model_id(&model)?, "mode": cfg.mode, "rows": rows}))?;
            } else {
                out!("{}", sweep_table(&rows));
            }
        }
        Command::Synth { templates, generate, out, statement_pairs: sp_out, transforms } => {
            let base = match (templates, generate) {
                (Some(dir), _) => load_functions_dir(dir)?,
                (None, Some(n)) => generate_templates(*n, derive_seed(cfg.seed, "pipeline.eval-templates"))?,
                (None, None) => return Err(Error::Config("need --templates or --generate".into())),
            };
            let transforms = if transforms.is_empty() { Transform::ALL.to_vec() } else { transforms.clone() };
            let corpus = synthesize(&base, &transforms, derive_seed(cfg.seed, "pipeline.eval-synth"))?;
            let mut w = create(out)?;
            write_records(&corpus.records(), &mut w)?;
            w.flush()?;
            let positives = corpus.positives();
            outln!("{} pairs ({positives} positive, {} negative) written to {}", corpus.pairs.len(), corpus.pairs.len() - positives, out.display());
            if let Some(p) = sp_out {
                let pairs = statement_pairs(&corpus, derive_seed(cfg.seed, "pipeline.statement-pairs"));
                let mut w = create(p)?;
                write_pairs(&pairs, &mut w)?;
                w.flush()?;
                outln!("{} statement pairs written to {}", pairs.len(), p.display());
            }
        }
        Command::Group { corpus, opts, out } => {
            let cfg = opts.apply(cfg)?;
            let model = match &cfg.model_path {
                Some(p) => load_model(p)?,
                None => cfg.resolve_model()?,
            };
            let functions = load_functions_dir(corpus)?;
            let groups = group_corpus(&functions, &model, &cfg.compare_options())?;
            let list: Vec<Value> = groups
                .iter()
                .map(|g| {
                    json!({
                        "group_id": g.group_id,
                        "template": functions[g.template].qualified_name(),
                        "members": g.members.iter().map(|&i| functions[i].qualified_name()).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let doc = json!({"schema_version": SCHEMA_VERSION, "model": model_id(&model)?, "delta": cfg.delta, "functions": functions.len(), "groups": list});
            match out {
                Some(p) => {
                    write_json(p, &doc)?;
                    outln!("{} functions in {} groups written to {}", functions.len(), groups.len(), p.display());
                }
                None => print_json(&doc)?,
            }
        }
        Command::Report { report } => {
            let text = std::fs::read_to_string(report).map_err(|e| Error::from(e).context(report.display().to_string()))?;
            let r: SimilarityReport = serde_json::from_str(&text).map_err(|e| Error::from(e).context(report.display().to_string()))?;
            if r.schema_version != SCHEMA_VERSION {
                return Err(Error::Config(format!("unsupported schema_version {}", r.schema_version)));
            }
            out!("{}", r.render_text());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // a closed downstream pipe is not worth a message
            if !matches!(e.root(), Error::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe) {
                eprintln!("error: {e}");
            }
            ExitCode::from(2)
        }
    }
}
