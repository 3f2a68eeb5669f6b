//! Reports of the example configs against checked-in golden files. Set
//! `FEDWHIT_BLESS=1` to rewrite them.

use std::path::PathBuf;
use std::process::Command;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn report(config: &str, emit: &str) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_fedwhit"))
        .args(["run", "--config", config, "--emit", emit])
        .current_dir(manifest())
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap())
}

fn compare(config: &str, golden: &str, emit: &str) {
    let (code, out) = report(config, emit);
    assert_eq!(code, 0, "{config}:\n{out}");
    let path = manifest().join("tests/golden").join(golden);
    if std::env::var_os("FEDWHIT_BLESS").is_some() {
        std::fs::write(&path, &out).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap();
    assert!(out == want, "{config} differs from {}:\n{out}", path.display());
}

macro_rules! golden {
    ($($name:ident),* $(,)?) => {$(
        #[test]
        fn $name() {
            let n = stringify!($name);
            compare(&format!("configs/{n}.toml"), &format!("{n}.txt"), "text");
        }
    )*};
}

golden!(flat_validate, moyal, curved, whitney_origin, whitney_cone, rotation, reduction, equiv_gauge, equiv_metric);

#[test]
fn reduction_json() {
    compare("configs/reduction.toml", "reduction.json", "json");
}

#[test]
fn reduction_reports_the_moyal_coefficients_on_both_sides() {
    let (_, out) = report("configs/reduction.toml", "text");
    assert!(out.contains("at (f, g) = (q, p) (N side [q*p, -1/2*i, 0], M side [q*p, -1/2*i, 0])"), "{out}");
}
