use std::path::Path;
use std::process::{Command, Output};

fn iselab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iselab"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("ISELAB_OUT")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn shapes_writes_counts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = iselab(dir.path(), &["shapes", "--m", "6"]);
    assert!(o.status.success());
    let v = json(&dir.path().join("shapes_m6.json"));
    assert_eq!(v["count"], 105);
    assert_eq!(v["shapes"].as_array().unwrap().len(), 105);

    let m = json(&dir.path().join("shapes_m6.json.manifest.json"));
    assert_eq!(m["subcommand"], "shapes");
    use sha2::Digest;
    let digest = hex::encode(sha2::Sha256::digest(std::fs::read(dir.path().join("shapes_m6.json")).unwrap()));
    assert_eq!(m["sha256"], digest);
}

#[test]
fn every_output_has_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["trees", "--n", "3", "--m", "2"][..],
        &["genfun", "--m", "3", "--n-max", "10"],
        &["perc", "--n", "3"],
        &["brw", "--n", "65", "--samples", "50"],
    ] {
        assert!(iselab(dir.path(), args).status.success(), "{args:?}");
    }
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let primary: Vec<&String> = names.iter().filter(|n| !n.ends_with(".manifest.json")).collect();
    assert!(primary.len() >= 4);
    for p in primary {
        assert!(names.contains(&format!("{p}.manifest.json")), "{p}");
    }
}

#[test]
fn single_bond_free_tree() {
    let dir = tempfile::tempdir().unwrap();
    assert!(iselab(dir.path(), &["trees", "--d", "2", "--n", "0"]).status.success());
    assert_eq!(json(&dir.path().join("trees_one_point_n0.json"))["t1"], 1);
    assert!(iselab(dir.path(), &["trees", "--d", "2", "--n", "1"]).status.success());
    assert_eq!(json(&dir.path().join("trees_one_point_n1.json"))["t1"], 4);
}

#[test]
fn verify_reports_through_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = iselab(dir.path(), &["verify", "--suite", "eq36", "--m", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("eq36: pass"));
    assert_eq!(json(&dir.path().join("verify_eq36.json"))["passes"], true);
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(iselab(dir.path(), &["shapes", "--m", "1"]).status.code(), Some(2));
    assert_eq!(iselab(dir.path(), &["brw", "--d", "0"]).status.code(), Some(2));
    assert_eq!(iselab(dir.path(), &["nonsense"]).status.code(), Some(2));
    let o = iselab(dir.path(), &["trees", "--n", "30"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_iselab"))
        .args(["shapes", "--m", "4"])
        .env("ISELAB_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(json(&dir.path().join("shapes_m4.json"))["count"], 3);
}
