//! Command-line behaviour: exit codes, reports and result files.

use std::path::{Path, PathBuf};
use std::process::Command;

use steering::cli::{run, EXIT_INVALID, EXIT_OK, EXIT_PARSE, EXIT_TRUNCATED};
use steering::decomposition::reconstruction_residual;
use steering::format::{parse_assemblage, ResultFile};
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn steering(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("steering").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.path().join(format!("{name}.json"));
    let mut args = vec!["generate", name, "--out", path_str(&path)];
    args.extend_from_slice(extra);
    let r = steering(&args);
    assert_eq!(r.code, EXIT_OK, "{}", r.err);
    path
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn generated_scenarios_validate() {
    let dir = TempDir::new().unwrap();
    for name in ["pentagon", "xtetra", "mub3", "povm-counterexample"] {
        let path = generate(&dir, name, &[]);
        let r = steering(&["validate", path_str(&path)]);
        assert_eq!(r.code, EXIT_OK, "{name}: {}{}", r.out, r.err);
        assert!(r.out.contains("PASS"));
        assert!(r.out.contains("no-signalling"));
    }
}

#[test]
fn generate_rejects_bad_specs() {
    assert_eq!(steering(&["generate", "hexagon"]).code, EXIT_PARSE);
    assert_eq!(
        steering(&["generate", "pentagon", "--noise", "0.1"]).code,
        EXIT_PARSE
    );
    assert_eq!(
        steering(&["generate", "mub3", "--noise", "1.5"]).code,
        EXIT_PARSE
    );
    let r = steering(&["generate", "mub3", "--noise", "0.3"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("\"n_outcomes\": 3"));
}

#[test]
fn non_hermitian_entry_is_a_validation_failure() {
    let dir = TempDir::new().unwrap();
    let path = write(
        &dir,
        "nonherm.json",
        r#"{"format_version":"1","dim":2,"n_outcomes":1,"n_inputs":1,
           "blocks":[[[[[0.5,0],[0.25,0]],[[0,0],[0.5,0]]]]]}"#,
    );
    let r = steering(&["validate", path_str(&path)]);
    assert_eq!(r.code, EXIT_INVALID);
    assert!(r.out.contains("hermiticity"));
    assert!(r.out.contains("FAIL"));
}

#[test]
fn mismatched_marginals_report_no_signalling_residual() {
    let dir = TempDir::new().unwrap();
    // Input 0 has marginal diag(1, 0), input 1 has diag(0, 1).
    let path = write(
        &dir,
        "signalling.json",
        r#"{"format_version":"1","dim":2,"n_outcomes":1,"n_inputs":2,
           "blocks":[[[[[1,0],[0,0]],[[0,0],[0,0]]]],[[[[0,0],[0,0]],[[0,0],[1,0]]]]]}"#,
    );
    let r = steering(&["validate", path_str(&path)]);
    assert_eq!(r.code, EXIT_INVALID);
    let line = r
        .out
        .lines()
        .find(|l| l.starts_with("no-signalling"))
        .unwrap();
    assert!(line.contains("FAIL"));
    assert!(line.contains("1.414214e0"), "{line}");
}

#[test]
fn parse_errors_have_positions_and_their_own_code() {
    let dir = TempDir::new().unwrap();
    let path = write(
        &dir,
        "broken.json",
        "{\n  \"format_version\": \"1\",\n  \"dim\": ,\n}",
    );
    let r = steering(&["validate", path_str(&path)]);
    assert_eq!(r.code, EXIT_PARSE);
    assert!(r.err.contains("line 3"), "{}", r.err);

    let r = steering(&["check", "/nonexistent/file.json"]);
    assert_eq!(r.code, EXIT_PARSE);
    assert_eq!(steering(&["frobnicate"]).code, EXIT_PARSE);
}

#[test]
fn check_reports_verdicts_and_witnesses() {
    let dir = TempDir::new().unwrap();
    let path = generate(&dir, "povm-counterexample", &[]);
    let r = steering(&["check", path_str(&path), "--oracle"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("verdict: not extremal"));
    assert!(r.out.contains("witness:"));
    assert!(r.out.contains("oracle: not extremal (agrees)"));
    // The witness is printed in assemblage-file layout.
    let json = &r.out[r.out.find('{').unwrap()..r.out.rfind('}').unwrap() + 1];
    let raw = parse_assemblage(json).unwrap();
    assert_eq!((raw.n_outcomes, raw.n_inputs), (2, 1));

    let pure = write(
        &dir,
        "pure.json",
        r#"{"format_version":"1","dim":2,"n_outcomes":2,"n_inputs":1,
           "blocks":[[[[[0,0],[0,0]],[[0,0],[1,0]]],[[[0,0],[0,0]],[[0,0],[0,0]]]]]}"#,
    );
    let r = steering(&["check", path_str(&pure)]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("verdict: extremal"));
    assert!(r.out.contains("stage: lemma1"));

    let mub = generate(&dir, "mub3", &["--noise", "0"]);
    let r = steering(&["check", path_str(&mub), "--oracle"]);
    assert_eq!(r.code, EXIT_OK);
    assert!(r.out.contains("verdict: extremal"));
}

#[test]
fn decompose_writes_consistent_result_files() {
    let dir = TempDir::new().unwrap();
    for name in ["pentagon", "xtetra", "povm-counterexample"] {
        let input = generate(&dir, name, &[]);
        let out = dir.path().join(format!("{name}.result.json"));
        let r = steering(&["decompose", path_str(&input), "--out", path_str(&out)]);
        assert_eq!(r.code, EXIT_OK, "{}", r.err);
        assert!(r.out.contains("leaves"));
        assert!(r.out.contains("residual"));

        let text = std::fs::read_to_string(&out).unwrap();
        let result = ResultFile::parse(&text).unwrap();
        assert!(!result.truncated);
        let leaves = result.leaf_assemblages().unwrap();
        let total: f64 = leaves.iter().map(|l| l.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);

        let sigma = parse_assemblage(&std::fs::read_to_string(&input).unwrap())
            .unwrap()
            .to_assemblage()
            .unwrap();
        let recomputed =
            reconstruction_residual(&sigma, leaves.iter().map(|l| (l.weight, &l.assemblage)));
        assert!((recomputed - result.residual).abs() <= 1e-12);
        assert_eq!(result.input_hash, steering::format::input_hash(&sigma));

        // Byte-identical on repeat, and with the sequential recursion.
        let again = dir.path().join("again.json");
        steering(&[
            "decompose",
            path_str(&input),
            "--out",
            path_str(&again),
            "--sequential",
        ]);
        assert_eq!(std::fs::read(&again).unwrap(), text.as_bytes());
    }
}

#[test]
fn xtetra_summary_shows_first_split() {
    let dir = TempDir::new().unwrap();
    let input = generate(&dir, "xtetra", &[]);
    let r = steering(&["decompose", path_str(&input)]);
    assert_eq!(r.code, EXIT_OK);
    // Result on stdout, summary on stderr.
    assert!(ResultFile::parse(&r.out).is_ok());
    assert!(
        r.err.contains("first split   0.333333 / 0.666667"),
        "{}",
        r.err
    );
}

#[test]
fn limits_give_partial_results() {
    let dir = TempDir::new().unwrap();
    let input = generate(&dir, "pentagon", &[]);
    let out = dir.path().join("partial.json");
    let r = steering(&[
        "decompose",
        path_str(&input),
        "--max-depth",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(r.code, EXIT_TRUNCATED);
    let result = ResultFile::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(result.truncated);
    assert!(!result.pending.is_empty());
    assert!(result.residual < 1e-9);

    let r = steering(&[
        "decompose",
        path_str(&input),
        "--max-leaves",
        "1",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(r.code, EXIT_TRUNCATED);
}

#[test]
fn binary_exit_codes() {
    let dir = TempDir::new().unwrap();
    let input = generate(&dir, "pentagon", &[]);
    let status = Command::new(env!("CARGO_BIN_EXE_steering"))
        .args(["validate", path_str(&input)])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK));
    let bad = write(&dir, "bad.json", "[");
    let status = Command::new(env!("CARGO_BIN_EXE_steering"))
        .args(["check", path_str(&bad)])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_PARSE));
}
