//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, LN_2};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use clonescope::classifier::{
    cross_entropy, feature_importance, model_to_json, train, train_traced, GbdtModel, HyperPoint, LabeledPair,
};
use clonescope::corpus::{apply_transform, SyntheticCorpus, Transform};
use clonescope::features::PAIR_DIM;
use clonescope::frontend::{parse_function, tokenize, FunctionAst};
use clonescope::hpo::{forward_step, standard_normal, DiffusionSchedule, EvalNet, Point, PARAMS};
use clonescope::pipeline::{
    default_sweep, evaluation_corpus, labeled_functions, pair_scores, sweep_delta, sweep_table, train_classifier,
    training_split, ExperimentConfig, TrainedClassifier,
};
use clonescope::rng::{derive_seed, substream};
use clonescope::similarity::{
    aggregate_with, compare_and_report, compare_functions, AggregationMode, CompareOptions, Verdict,
};
use clonescope::statement_tree::{decompose, StatementTreeKind};

const BATCH_TRANSFER: &str = "function batchTransfer(address[] _receivers, uint256 _value) public whenNotPaused returns (bool) {
    uint cnt = _receivers.length;
    uint256 amount = uint256(cnt) * _value;
    require(cnt > 0 && cnt <= 20);
    require(_value > 0 && balances[msg.sender] >= amount);
    uint256 senderBalance = balances[msg.sender];
    balances[msg.sender] = senderBalance.sub(amount);
    for (uint i = 0; i < cnt; i++) {
        balances[_receivers[i]] = balances[_receivers[i]].add(_value);
        Transfer(msg.sender, _receivers[i], _value);
    }
    return true;
}
";

const TRANSFER_PROXY: &str = "function transferProxy(address[] _tos, uint256 _val) public whenNotPaused returns (bool) {
    require(_tos.length > 0);
    uint count = _tos.length;
    uint256 total = uint256(count) * _val;
    require(count > 0 && count <= 20);
    require(_val > 0 && balances[msg.sender] >= total);
    uint256 fromBalance = balances[msg.sender];
    balances[msg.sender] = fromBalance.sub(total);
    for (uint j = 0; j < count; j++) {
        balances[_tos[j]] = balances[_tos[j]].add(_val);
        emit Transfer(msg.sender, _tos[j], _val);
    }
    return true;
}
";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Everything the later criteria reuse from the end-to-end run.
struct Experiment {
    train_set: Vec<LabeledPair>,
    val: Vec<LabeledPair>,
    corpus: SyntheticCorpus,
    trained: TrainedClassifier,
    cfg: ExperimentConfig,
}

fn f1_from_verdicts(verdicts: &[bool], labels: &[u8]) -> f64 {
    let tp = verdicts.iter().zip(labels).filter(|(v, l)| **v && **l == 1).count() as f64;
    let fp = verdicts.iter().zip(labels).filter(|(v, l)| **v && **l == 0).count() as f64;
    let fneg = verdicts.iter().zip(labels).filter(|(v, l)| !**v && **l == 1).count() as f64;
    2.0 * tp / (2.0 * tp + fp + fneg)
}

fn criterion_1() -> (Outcome, Option<Experiment>) {
    let start = Instant::now();
    let cfg = ExperimentConfig::default();
    let run = || -> clonescope::Result<(Experiment, f64)> {
        let (train_set, val) = training_split(&cfg)?;
        let trained = train_classifier(&train_set, &val, cfg.hpo.as_ref(), cfg.seed)?;
        let corpus = evaluation_corpus(&cfg)?;
        let pairs = labeled_functions(&corpus);
        let opts = CompareOptions { delta: 0.7, ..CompareOptions::default() };
        let scores = pair_scores(&trained.model, &pairs, &opts)?;
        // clone iff the larger directional score reaches delta
        let verdicts: Vec<bool> = scores.iter().map(|(a, b)| a.max(*b) >= 0.7).collect();
        let labels: Vec<u8> = pairs.iter().map(|p| p.label).collect();
        let f1 = f1_from_verdicts(&verdicts, &labels);
        Ok((Experiment { train_set, val, corpus, trained, cfg: cfg.clone() }, f1))
    };
    match run() {
        Err(e) => (outcome(false, format!("error: {e}")), None),
        Ok((exp, f1)) => {
            let secs = start.elapsed().as_secs_f64();
            let positives = exp.corpus.positives();
            let negatives = exp.corpus.pairs.len() - positives;
            let shape = exp.corpus.templates.len() == 50 && positives == 200 && negatives == 400;
            let level = if f1 >= 0.90 { "soft target met" } else if f1 >= 0.85 { "hard floor only" } else { "below floor" };
            let pass = shape && f1 >= 0.85 && secs <= 300.0;
            let detail = format!(
                "F1 = {f1:.4} ({level}), {} templates, {positives} positives, {negatives} negatives, {secs:.1} s",
                exp.corpus.templates.len()
            );
            (outcome(pass, detail), Some(exp))
        }
    }
}

fn criterion_2(model: &GbdtModel) -> Outcome {
    let run = || -> clonescope::Result<Outcome> {
        let a = parse_function(BATCH_TRANSFER)?;
        let b = parse_function(TRANSFER_PROXY)?;
        let report = compare_and_report(&a, &b, model, "acceptance", &CompareOptions::default())?;
        let paired = report.matches.iter().any(|m| m.a.sl == 3 && m.b.sl == 4);
        Ok(outcome(
            report.verdict == Verdict::Clone && paired,
            format!(
                "verdict {}, s_A = {:.4}, s_B = {:.4}, A3<->B4 matched: {paired}, {} matches",
                report.verdict,
                report.s_a,
                report.s_b,
                report.matches.len()
            ),
        ))
    };
    run().unwrap_or_else(|e| outcome(false, format!("error: {e}")))
}

/// Product of `sin²(πi/2T)` for `i = 1..=t`.
fn d_tilde_oracle(t: usize, steps: usize) -> f64 {
    (1..=t).map(|i| (FRAC_PI_2 * i as f64 / steps as f64).sin().powi(2)).product()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let steps = 8;
    let sched = DiffusionSchedule::new(steps).expect("valid schedule");
    let checkpoints = [2usize, 5, 8];
    let runs = 100_000usize;
    let v0: Point = [0.5; 7];
    let mut rng = substream(11, "acceptance.diffusion");
    // per checkpoint and coordinate: sum, sum of squares
    let mut s1 = [[0.0f64; 7]; 3];
    let mut s2 = [[0.0f64; 7]; 3];
    let mut samples: Vec<[Vec<f64>; 7]> = (0..3).map(|_| std::array::from_fn(|_| Vec::with_capacity(runs))).collect();
    for _ in 0..runs {
        let mut v = v0;
        for t in 1..=steps {
            v = forward_step(&v, t, &sched, &standard_normal(&mut rng));
            if let Some(c) = checkpoints.iter().position(|&x| x == t) {
                for i in 0..7 {
                    s1[c][i] += v[i];
                    s2[c][i] += v[i] * v[i];
                    samples[c][i].push(v[i]);
                }
            }
        }
    }
    let n = runs as f64;
    let mut worst: f64 = 0.0;
    let mut schedule_ok = true;
    for (c, &t) in checkpoints.iter().enumerate() {
        let dt = d_tilde_oracle(t, steps);
        schedule_ok &= (sched.d_tilde(t) - dt).abs() < 1e-12;
        let want_mean = dt.sqrt() * 0.5;
        let want_var = 1.0 - dt;
        for i in 0..7 {
            let mean = s1[c][i] / n;
            let var = (s2[c][i] - n * mean * mean) / (n - 1.0);
            let m4 = samples[c][i].iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
            let se_mean = (var / n).sqrt();
            let se_var = ((m4 - var * var) / n).sqrt();
            worst = worst.max((mean - want_mean).abs() / se_mean).max((var - want_var).abs() / se_var);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        schedule_ok && worst <= 4.0 && secs <= 30.0,
        format!("largest deviation {worst:.2} standard errors over 42 moments, {secs:.1} s"),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = substream(12, "acceptance.endpoints");
    let mut ok = true;
    let mut worst_g: f64 = 0.0;
    for steps in 1..=64 {
        let sched = DiffusionSchedule::new(steps).expect("valid schedule");
        worst_g = worst_g.max(sched.g(steps).abs());
        ok &= sched.g(steps).abs() <= 1e-12;
        let v: Point = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        ok &= forward_step(&v, steps, &sched, &standard_normal(&mut rng)) == v;
        ok &= (1..=steps).all(|t| sched.d_tilde(t) <= sched.d_tilde(t - 1));
    }
    outcome(ok, format!("T = 1..64, max |g_T| = {worst_g:e}, last step identity and D~ nonincreasing"))
}

fn criterion_5() -> Outcome {
    let mut rng = substream(13, "acceptance.gradient");
    let mut net = EvalNet::new(derive_seed(13, "acceptance.net"));
    // a fresh net has a zero output layer, which zeroes most gradients
    for w in net.params.iter_mut() {
        *w = rng.random_range(-0.5..0.5);
    }
    let xs: Vec<Point> = (0..3).map(|_| std::array::from_fn(|_| rng.random())).collect();
    let ys: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, grad) = net.mse_and_gradient(&xs, &ys);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let i = rng.random_range(0..PARAMS);
        let orig = net.params[i];
        net.params[i] = orig + h;
        let up = net.mse_and_gradient(&xs, &ys).0;
        net.params[i] = orig - h;
        let down = net.mse_and_gradient(&xs, &ys).0;
        net.params[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let scale = fd.abs().max(grad[i].abs());
        worst = worst.max(if scale > 0.0 { (fd - grad[i]).abs() / scale } else { f64::INFINITY });
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 10 weights"))
}

fn criterion_6(exp: &Experiment) -> Outcome {
    let Some(hpo) = &exp.trained.hpo else {
        return outcome(false, "no search was run");
    };
    let cfg = exp.cfg.hpo.clone().expect("search configured");
    let seed = derive_seed(exp.cfg.seed, "hpo.train");
    let verify = |h: &HyperPoint| -> clonescope::Result<f64> {
        cross_entropy(&exp.val, &train(&exp.train_set, h, seed)?)
    };
    match (verify(&hpo.best), verify(&HyperPoint::default())) {
        (Ok(best), Ok(default)) => outcome(
            best <= default && best == hpo.best_loss && hpo.history.len() == cfg.budget,
            format!(
                "budget {}, k {}, T {}: tuned {best:.6} vs default {default:.6} ({} evaluations)",
                cfg.budget,
                cfg.k,
                cfg.steps,
                hpo.history.len()
            ),
        ),
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("error: {e}")),
    }
}

fn criterion_7(exp: &Experiment) -> Outcome {
    let base = HyperPoint::default();
    let hypers = [
        base,
        HyperPoint { learning_rate: 0.3, num_leaves: 63, max_depth: 12, min_samples_leaf: 1, ..base },
        HyperPoint { learning_rate: 0.05, num_leaves: 4, feature_fraction: 0.5, ..base },
    ];
    let mut worst_rise = f64::NEG_INFINITY;
    for (i, h) in hypers.iter().enumerate() {
        let Ok(trace) = train_traced(&exp.train_set, h, 7 + i as u64) else {
            return outcome(false, "training failed");
        };
        for w in trace.round_losses.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    let monotone = worst_rise <= 1e-9;

    let a = train(&exp.train_set, &exp.trained.hyper, 5).and_then(|m| model_to_json(&m));
    let b = train(&exp.train_set, &exp.trained.hyper, 5).and_then(|m| model_to_json(&m));
    let deterministic = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);

    let half = GbdtModel::constant(0.0, PAIR_DIM);
    let ce = cross_entropy(&exp.train_set, &half).unwrap_or(f64::NAN);
    let ln2 = (ce - LN_2).abs() <= 1e-12;
    outcome(
        monotone && deterministic && ln2,
        format!("max per-round rise {worst_rise:.2e}, identical retrain: {deterministic}, |L(0.5) - ln 2| = {:.1e}", (ce - LN_2).abs()),
    )
}

/// Source lines holding a token strictly between the body braces.
fn body_token_lines(f: &FunctionAst) -> Vec<u32> {
    let tokens = tokenize(&f.source).expect("function source lexes");
    let open = tokens.iter().position(|t| t.lexeme == "{").expect("body brace");
    let close = tokens.iter().rposition(|t| t.lexeme == "}").expect("closing brace");
    let offset = f.span.start_line - 1;
    let mut lines: Vec<u32> = tokens[open + 1..close].iter().flat_map(|t| [t.span.start_line, t.span.end_line]).map(|l| l + offset).collect();
    lines.sort_unstable();
    lines.dedup();
    lines
}

fn criterion_8(exp: &Experiment) -> Outcome {
    let mut functions = 0;
    let mut lines_checked = 0;
    let mut failures = Vec::new();
    let mut kinds: BTreeMap<StatementTreeKind, usize> = BTreeMap::new();
    for f in exp.corpus.variants.iter().flatten().map(|v| &v.function) {
        functions += 1;
        let trees = decompose(f);
        if trees.len() != f.body.children.len() {
            failures.push(format!("{}: {} trees for {} statements", f.name, trees.len(), f.body.children.len()));
        }
        for t in &trees {
            *kinds.entry(t.kind).or_default() += 1;
        }
        for line in body_token_lines(f) {
            lines_checked += 1;
            let covering = trees.iter().filter(|t| t.span.start_line <= line && line <= t.span.end_line).count();
            if covering != 1 {
                failures.push(format!("{} line {line}: {covering} trees", f.name));
            }
        }
    }
    let total_kinds = StatementTreeKind::ALL.len();
    let dist = kinds.iter().map(|(k, n)| format!("{}={n}", k.name())).collect::<Vec<_>>().join(" ");
    outcome(
        failures.is_empty() && total_kinds == 6,
        format!(
            "{functions} functions, {lines_checked} lines, {} uncovered or shared; {dist}{}",
            failures.len(),
            failures.first().map(|f| format!("; first: {f}")).unwrap_or_default()
        ),
    )
}

fn scores(a: &FunctionAst, b: &FunctionAst, model: &GbdtModel) -> (f64, f64) {
    let r = compare_functions(a, b, model).expect("comparable");
    aggregate_with(&r.r, AggregationMode::Proportion, 0.5)
}

fn criterion_9(exp: &Experiment) -> Outcome {
    let model = &exp.trained.model;
    let mut rng = substream(14, "acceptance.robustness");
    let mut changed_scores = 0;
    let mut checked = 0;
    let mut flipped = 0;
    let mut positives = 0;
    for p in &exp.corpus.pairs {
        let (a, b) = (&p.a.function, &p.b.function);
        let reference = scores(a, b, model);

        let renamed = apply_transform(a, Transform::RenameIdentifiers, &mut rng).expect("rename").function;
        let mut shuffled = a.clone();
        shuffled.body.children.shuffle(&mut rng);
        let reordered = apply_transform(a, Transform::ReorderIndependentStatements, &mut rng).expect("reorder").function;
        for variant in [&renamed, &shuffled, &reordered] {
            checked += 1;
            if scores(variant, b, model) != reference {
                changed_scores += 1;
            }
        }

        if p.record.label == 1 {
            positives += 1;
            let padded = apply_transform(b, Transform::InsertDeadCode, &mut rng).expect("dead code").function;
            let before = reference.0.max(reference.1) >= 0.7;
            let (sa, sb) = scores(a, &padded, model);
            if before != (sa.max(sb) >= 0.7) {
                flipped += 1;
            }
        }
    }
    let rate = flipped as f64 / positives as f64;
    outcome(
        changed_scores == 0 && rate <= 0.05,
        format!(
            "{changed_scores}/{checked} rename/reorder comparisons changed (s_A, s_B); dead code flipped {flipped}/{positives} positive verdicts ({:.1}%)",
            100.0 * rate
        ),
    )
}

fn criterion_10(exp: &Experiment) -> Outcome {
    let pairs = labeled_functions(&exp.corpus);
    match sweep_delta(&exp.trained.model, &pairs, &default_sweep(), &CompareOptions::default()) {
        Err(e) => outcome(false, format!("error: {e}")),
        Ok(rows) => {
            let recall_ok = rows.windows(2).all(|w| w[1].recall <= w[0].recall);
            let precision_ok = rows.windows(2).all(|w| w[1].precision >= w[0].precision);
            print!("{}", indent(&sweep_table(&rows)));
            outcome(
                rows.len() == 9 && recall_ok && precision_ok,
                format!("{} rows, recall nonincreasing: {recall_ok}, precision nondecreasing: {precision_ok}", rows.len()),
            )
        }
    }
}

fn criterion_11(exp: &Experiment) -> Outcome {
    match feature_importance(&exp.trained.model) {
        Err(e) => outcome(false, format!("error: {e}")),
        Ok(imp) => {
            let cat_sum: f64 = imp.categories.iter().map(|c| c.1).sum();
            let comp_sum: f64 = imp.components.iter().map(|c| c.1).sum();
            print!("{}", indent(&imp.table()));
            outcome(
                (cat_sum - 1.0).abs() <= 1e-12 && (comp_sum - 1.0).abs() <= 1e-12,
                format!("category weights sum to 1 {:+.1e}, component weights to 1 {:+.1e}", cat_sum - 1.0, comp_sum - 1.0),
            )
        }
    }
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("      {l}\n")).collect()
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };

    let (o1, exp) = criterion_1();
    report(1, "synthetic corpus F1 at delta 0.7", o1);
    let missing = || outcome(false, "skipped: end-to-end run failed");
    report(2, "batchTransfer vs transferProxy", exp.as_ref().map_or_else(missing, |e| criterion_2(&e.trained.model)));
    report(3, "diffusion marginal equivalence", criterion_3());
    report(4, "schedule endpoints", criterion_4());
    report(5, "surrogate gradient check", criterion_5());
    report(6, "search beats defaults", exp.as_ref().map_or_else(missing, criterion_6));
    report(7, "boosted tree properties", exp.as_ref().map_or_else(missing, criterion_7));
    report(8, "decomposition coverage", exp.as_ref().map_or_else(missing, criterion_8));
    report(9, "robustness invariants", exp.as_ref().map_or_else(missing, criterion_9));
    report(10, "delta sweep shape", exp.as_ref().map_or_else(missing, criterion_10));
    report(11, "feature importance", exp.as_ref().map_or_else(missing, criterion_11));

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
