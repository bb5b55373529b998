use std::process::Command;

use cachepriv::schemes::small_cache_2x4_matrices;
use cachepriv::session::SessionTranscript;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cachepriv"))
}

fn run(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
    )
}

#[test]
fn measure_prints_exact_rationals() {
    assert_eq!(run(&["measure", "example1"]), (0, "M=1/3 R=4/3 header_bits=2\n".into()));
    assert_eq!(run(&["measure", "dual"]), (0, "M=4/3 R=1/3 header_bits=2\n".into()));
    assert_eq!(run(&["measure", "share:1/3:example1:dual"]), (0, "M=1 R=2/3 header_bits=4\n".into()));
}

#[test]
fn verify_exit_codes() {
    let (code, out) = run(&["verify", "example1"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("PASS privacy[example1, user 1]"));
    assert_eq!(run(&["verify", "plaintext:2,2,0"]).0, 1);
    assert_eq!(run(&["verify", "thm1:3,2,0", "--budget", "100"]).0, 1);
    assert_eq!(run(&["verify", "unheard-of"]).0, 2);
    assert_eq!(run(&["verify"]).0, 2);
    assert_eq!(run(&["verify", "example1", "--l", "zero"]).0, 2);
}

#[test]
fn verify_json_lists_every_verdict() {
    let (code, out) = run(&["verify", "thm1:2,3,1", "--json"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
}

#[test]
fn descriptor_paths_are_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.toml");
    std::fs::write(&path, small_cache_2x4_matrices().to_descriptor()).unwrap();
    let (code, out) = run(&["verify", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("PASS linear-rank"));
}

#[test]
fn region_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("fig");
    let (code, _) = run(&["region", "--step", "1/6", "--out", stem.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("fig.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "M,R_optimal,scheme,label");
    assert_eq!(lines.iter().filter(|l| l.contains(",boundary,")).count(), 13);
    assert!(lines.contains(&"1/3,4/3,boundary,"));
    assert!(lines.contains(&"1/1,2/3,share:1/3:example1:dual,R=2/3"));
    assert!(lines.contains(&"1/3,4/3,example1,R=4/3"));
    assert!(lines.contains(&"0/1,2/1,\"thm1:2,2,0\",R=2/1"));
    let svg = std::fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("id=\"boundary\""));
    assert!(svg.contains("id=\"point-example1\""));
}

#[test]
fn simulate_writes_a_parseable_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.bin");
    let (code, out) = run(&["simulate", "example1", "--demands", "1,0", "--seed", "3", "--out", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("decode user=1 file=0 matched=true"));
    let t = SessionTranscript::from_bytes(&std::fs::read(&path).unwrap()).unwrap();
    assert!(t.all_match());
    assert_eq!(run(&["simulate", "example1", "--demands", "1,7"]).0, 1);
}

#[test]
fn search_regenerates_the_committed_witness() {
    let (code, out) = run(&["search", "--regen"]);
    assert_eq!(code, 0, "{out}");
    let (code, out) = run(&["search", "--target", "1/3,4/3", "--seed", "5"]);
    assert_eq!(code, 0);
    assert!(out.contains("cache_dim = 1"));
}
