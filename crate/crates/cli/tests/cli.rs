use std::path::Path;
use std::process::{Command, Output};

fn moralscope(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_moralscope")).args(args).current_dir(cwd).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&moralscope(&["--help"], dir.path())), 0);
    assert_eq!(code(&moralscope(&["--version"], dir.path())), 0);
    let help = moralscope(&["run-all", "--help"], dir.path());
    assert!(String::from_utf8_lossy(&help.stdout).contains("--radius-fraction"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&moralscope(&["no-such-command"], dir.path())), 1);
    let both = moralscope(&["crqa", "--radius", "0.1", "--radius-fraction", "0.2"], dir.path());
    assert_eq!(code(&both), 1);
}

#[test]
fn fixture_then_run_all_then_cached_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let gen = moralscope(&["gen-fixture", "--out", "tweets.jsonl"], dir.path());
    assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    let written = std::fs::read_to_string(dir.path().join("tweets.jsonl")).unwrap();
    assert_eq!(written, moralscope::fixture::FIXTURE_JSONL);

    let args = ["run-all", "--input", "tweets.jsonl", "--out", "out", "--seed", "3"];
    let first = moralscope(&args, dir.path());
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let stdout = String::from_utf8_lossy(&first.stdout);
    assert_eq!(stdout.lines().count(), 8, "{stdout}");
    assert!(!stdout.contains("(cached)"));
    assert!(dir.path().join("out/report/crqa_table.csv").is_file());

    let second = moralscope(&args, dir.path());
    assert_eq!(code(&second), 0);
    assert!(String::from_utf8_lossy(&second.stdout).lines().all(|l| l.ends_with("(cached)")));
}

#[test]
fn single_stage_before_upstream_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = moralscope(&["topics", "--out", "empty"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("run prep first"), "{}", stderr(&out));
}

#[test]
fn missing_input_and_bad_config_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&moralscope(&["ingest", "--input", "absent.jsonl"], dir.path())), 1);
    std::fs::write(dir.path().join("bad.toml"), "seed = \"not a number\"").unwrap();
    assert_eq!(code(&moralscope(&["ingest", "--config", "bad.toml"], dir.path())), 1);
}

#[test]
fn malformed_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cyclic = concat!(
        r#"{"id":"a","parent_id":"b","author_id":"u","timestamp":1525000000,"text":"x"}"#,
        "\n",
        r#"{"id":"b","parent_id":"a","author_id":"u","timestamp":1525000001,"text":"y"}"#,
        "\n"
    );
    std::fs::write(dir.path().join("cyclic.jsonl"), cyclic).unwrap();
    let out = moralscope(&["run-all", "--input", "cyclic.jsonl", "--out", "out"], dir.path());
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}
