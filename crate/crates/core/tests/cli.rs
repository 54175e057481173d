use std::process::Command;

fn edrc(args: &[&str]) -> (String, i32) {
    let out = Command::new(env!("CARGO_BIN_EXE_edrc")).args(args).output().unwrap();
    (String::from_utf8(out.stdout).unwrap(), out.status.code().unwrap())
}

#[test]
fn bounds_example() {
    let (out, code) = edrc(&["bounds", "--p", "1", "--m", "1", "--D", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("33554436"));
}

#[test]
fn exit_codes() {
    assert_eq!(edrc(&["cohomology", "--vars", "x,y", "--ideal", "x*y-"]).1, 1);
    assert_eq!(edrc(&["hypersurface", "--vars", "x,y", "--f", "x^2*y"]).1, 2);
    assert_eq!(edrc(&["residue", "--vars", "x,y", "--f", "y", "--term", "0,1:1"]).1, 3);
    assert_eq!(edrc(&["bounds", "--p", "1", "--formula", "thm71"]).1, 2);
    assert_eq!(edrc(&["idempotents", "--vars", "x", "--component", "x", "--method", "other"]).1, 1);
}

#[test]
fn output_file_matches_stdout() {
    let path = std::env::temp_dir().join(format!("edrc-cli-{}.json", std::process::id()));
    let args = ["cohomology", "--vars", "x,y", "--ideal", "x*y-1"];
    let (stdout, _) = edrc(&args);
    let mut with_out: Vec<&str> = args.to_vec();
    let p = path.to_string_lossy().to_string();
    with_out.extend(["--output", p.as_str()]);
    assert_eq!(edrc(&with_out).1, 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout);
    let _ = std::fs::remove_file(&path);
}

#[test]
fn job_file() {
    let path = std::env::temp_dir().join(format!("edrc-job-{}.json", std::process::id()));
    std::fs::write(&path, r#"{"mode": "cohomology-closed", "vars": ["x", "y"], "ideal": "x*y - 1"}"#).unwrap();
    let (out, code) = edrc(&["--job", path.to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["dims"], serde_json::json!([1, 1, 0]));
    std::fs::write(&path, r#"{"mode": "nope"}"#).unwrap();
    assert_eq!(edrc(&["--job", path.to_str().unwrap()]).1, 1);
    let _ = std::fs::remove_file(&path);
}
