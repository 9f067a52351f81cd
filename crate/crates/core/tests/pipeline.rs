use std::path::Path;

use clonescope::classifier::{load_model, write_pairs};
use clonescope::corpus::{generate_templates, statement_pairs, synthesize, Transform};
use clonescope::pipeline::{exit_code, run_end_to_end, FunctionRef, RunConfig};
use clonescope::similarity::Verdict;
use clonescope::Error;

const F: &str = "function f(uint a, uint b) public returns (uint) {\n    uint c = a + b;\n    require(c >= a);\n    total += c;\n    return c;\n}\n";

fn setup(dir: &Path) -> RunConfig {
    let base = generate_templates(10, 31).unwrap();
    let corpus = synthesize(&base, &Transform::ALL, 32).unwrap();
    let file = std::fs::File::create(dir.join("sp.jsonl")).unwrap();
    write_pairs(&statement_pairs(&corpus, 33), file).unwrap();
    std::fs::write(dir.join("f.sol"), F).unwrap();
    std::fs::write(dir.join("g.sol"), F).unwrap();
    std::fs::write(dir.join("empty.sol"), "function e() public {\n}\n").unwrap();
    RunConfig {
        data_path: Some(dir.join("sp.jsonl")),
        model_path: Some(dir.join("model.json")),
        output_dir: Some(dir.join("out")),
        ..RunConfig::default()
    }
}

fn fref(dir: &Path, name: &str) -> FunctionRef {
    dir.join(name).to_str().unwrap().parse().unwrap()
}

#[test]
fn identical_files_are_clones_and_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let first = run_end_to_end(&cfg, &fref(dir.path(), "f.sol"), &fref(dir.path(), "g.sol"));
    assert_eq!(exit_code(&first), 1);
    let report = first.unwrap();
    assert_eq!(report.verdict, Verdict::Clone);
    assert_eq!((report.s_a, report.s_b), (1.0, 1.0));
    assert!(load_model(&dir.path().join("model.json")).is_ok(), "trained model is saved");

    let json = std::fs::read(dir.path().join("out/report.json")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert!(text.contains("verdict: clone"));

    // second run loads the saved model instead of retraining
    let again = run_end_to_end(&cfg, &fref(dir.path(), "f.sol"), &fref(dir.path(), "g.sol")).unwrap();
    assert_eq!(again, report);
    assert_eq!(std::fs::read(dir.path().join("out/report.json")).unwrap(), json);

    // retraining from scratch with the same seed gives the same bytes
    std::fs::remove_file(dir.path().join("model.json")).unwrap();
    run_end_to_end(&cfg, &fref(dir.path(), "f.sol"), &fref(dir.path(), "g.sol")).unwrap();
    assert_eq!(std::fs::read(dir.path().join("out/report.json")).unwrap(), json);
}

#[test]
fn empty_function_is_an_error_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = run_end_to_end(&cfg, &fref(dir.path(), "f.sol"), &fref(dir.path(), "empty.sol"));
    assert_eq!(exit_code(&out), 2);
    let err = out.unwrap_err();
    assert!(matches!(err.root(), Error::EmptyFunction(_)), "{err}");
    assert!(err.to_string().contains("empty.sol"), "{err}");
}

#[test]
fn missing_model_and_data_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let cfg = RunConfig { model_path: Some(dir.path().join("absent.json")), ..RunConfig::default() };
    let out = run_end_to_end(&cfg, &fref(dir.path(), "f.sol"), &fref(dir.path(), "g.sol"));
    assert!(matches!(out.unwrap_err().root(), Error::Config(_)));
}

#[test]
fn config_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("run.toml");
    std::fs::write(&p, "seed = 9\ntau_match = 0.6\ndata = \"sp.jsonl\"\n").unwrap();
    let cfg = RunConfig::load(&p).unwrap();
    assert_eq!((cfg.seed, cfg.tau_match), (9, 0.6));
    assert_eq!(cfg.data_path.as_deref(), Some(Path::new("sp.jsonl")));
    std::fs::write(&p, "delta = 7\n").unwrap();
    assert!(RunConfig::load(&p).is_err());
}
