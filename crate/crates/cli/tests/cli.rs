use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fedwhit_cli::{parse_config, run_config, CliError, Overrides};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn fedwhit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedwhit")).args(args).current_dir(manifest()).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn validate_only_config_passes() {
    let o = fedwhit(&["run", "--config", "configs/flat_validate.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("task 1: validate: PASS"));
    assert!(!text.contains("residual"));
}

#[test]
fn exit_codes() {
    let o = fedwhit(&["run", "--config", "tests/fixtures/bad_pi.toml"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("Pi[1,2] + Pi[2,1] = 2"), "{}", stdout(&o));

    let o = fedwhit(&["run", "--config", "tests/fixtures/unknown_key.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown field `dims`"), "{}", stderr(&o));

    let o = fedwhit(&["run", "--config", "tests/fixtures/bad_poly.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("chart.pi[0][1]: `1 +* q`: parse error at column"), "{}", stderr(&o));

    let o = fedwhit(&["run", "--config", "tests/fixtures/non_group.toml"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("closed under composition (A1*A1 is not in the set)"), "{}", stdout(&o));

    let o = fedwhit(&["run", "--config", "tests/fixtures/obstructed.toml"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("[FAIL] equivalence found through order 1"), "{}", stdout(&o));
    assert!(stdout(&o).contains("reduces to 0 = 2"), "{}", stdout(&o));

    // the literal correction does not preserve omega for this metric
    let o = fedwhit(&["connection", "--config", "tests/fixtures/curved_metric.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = fedwhit(&["connection", "--config", "tests/fixtures/curved_metric.toml", "--no-symmetrize"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("does not preserve"), "{}", stdout(&o));

    let o = fedwhit(&["run", "--config", "tests/fixtures/missing.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = fedwhit(&["run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn error_mapping() {
    assert_eq!(CliError::from(fedwhit::Error::InternalConsistency("x".into())).exit_code(), 4);
    assert_eq!(CliError::from(fedwhit::Error::Precondition("x".into())).exit_code(), 3);
    assert_eq!(CliError::from(fedwhit::Error::Parse { column: 1, message: "x".into() }).exit_code(), 2);
}

#[test]
fn schema_rejects_unknown_and_misplaced_keys() {
    let base = "[chart]\nleaf = [\"q\", \"p\"]\n";
    for extra in [
        "[[tasks]]\nkind = \"star\"\npairs = [[\"q\", \"p\"]]\nbogus = 1\n",
        "[[tasks]]\nkind = \"teleport\"\n",
        "[connection]\nkind = \"flat\"\nmetric = [[\"1\", \"0\"], [\"0\", \"1\"]]\n",
        "[[tasks]]\nkind = \"star\"\n",
        "[[tasks]]\nkind = \"whitney-star\"\npairs = [[\"q\", \"p\"]]\n",
        "[[tasks]]\nkind = \"equiv\"\nansatz = { coefficient_degree = 1 }\n",
        "[[tasks]]\nkind = \"equiv\"\nansatz = { coefficient_degree = 1 }\ngauge = [{ hbar = 1, coeff = \"1\", derivative = \"2*q\" }]\n",
        "[action]\nkind = \"finite\"\nelements = [[[\"q\", \"0\"], [\"0\", \"1\"]]]\n",
    ] {
        let text = format!("{base}{extra}");
        let e = run_config(&text, &Overrides::default(), None, None).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{text}\n{e}");
    }
    assert!(parse_config(base).is_ok());
}

#[test]
fn overrides_and_subcommands() {
    let o = fedwhit(&["star", "--config", "configs/moyal.toml", "--order", "1", "--truncation", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("task 1: star (K = 1, N = 3): PASS"), "{text}");
    assert!(!text.contains("fedosov"));
    assert!(!text.contains("c2("));

    // a kind the config does not list runs with defaults
    let o = fedwhit(&["validate", "--config", "configs/reduction.toml"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("task 1: validate: PASS"));
    let o = fedwhit(&["equiv", "--config", "configs/reduction.toml"]);
    assert_eq!(o.status.code(), Some(2));

    let o = fedwhit(&["fedosov", "--config", "configs/moyal.toml", "--emit", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tasks"][0]["kind"], "fedosov");
    assert_eq!(v["tasks"][0]["truncation"], 6);
    assert_eq!(v["exit_code"], 0);
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn cache_hits_match_cold_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().to_str().unwrap();
    let cold = fedwhit(&["run", "--config", "configs/curved.toml"]);
    let first = fedwhit(&["run", "--config", "configs/curved.toml", "--cache-dir", cache]);
    let entries = files(dir.path());
    assert_eq!(entries.len(), 2, "{entries:?}"); // N = 6 for fedosov, N = 4 for star
    let warm = fedwhit(&["run", "--config", "configs/curved.toml", "--cache-dir", cache]);
    assert_eq!(stdout(&cold), stdout(&first));
    assert_eq!(stdout(&cold), stdout(&warm));

    // a tampered entry is rejected and rebuilt
    let victim = &entries[0];
    let text = std::fs::read_to_string(victim).unwrap();
    let tampered = text.replacen("\"coeff\":\"", "\"coeff\":\"7 + ", 1);
    assert_ne!(text, tampered);
    std::fs::write(victim, tampered).unwrap();
    let again = fedwhit(&["run", "--config", "configs/curved.toml", "--cache-dir", cache]);
    assert_eq!(stdout(&cold), stdout(&again));
}
