use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use anonradio::classifier::TraceDocument;
use anonradio::config::{gen_gm, gen_hm, gen_random, gm_center, parse_configuration};
use anonradio::election::{ElectionResult, OracleReport};
use anonradio::simulator::ExecutionTrace;
use anonradio::PartitionTrace;
use tempfile::TempDir;

fn anonradio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anonradio"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn gen_file(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend(["-o", path.to_str().unwrap()]);
    let o = anonradio(&full);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_hm_matches_library_serialization() {
    let o = anonradio(&["gen", "hm", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), gen_hm(3).unwrap().to_text());

    let dir = TempDir::new().unwrap();
    let path = gen_file(&dir, "h3.txt", &["hm", "3"]);
    assert_eq!(
        std::fs::read_to_string(path).unwrap(),
        gen_hm(3).unwrap().to_text()
    );
}

#[test]
fn gen_random_records_its_parameters() {
    let o = anonradio(&["gen", "random", "7", "0.4", "3", "--seed", "11"]);
    let text = stdout(&o);
    assert!(text
        .starts_with("# generator=chacha8-gnp-resample-v1 n=7 edge_prob=0.4 max_tag=3 seed=11\n"));
    assert_eq!(
        parse_configuration(&text).unwrap(),
        gen_random(7, 0.4, 3, 11).unwrap()
    );
    assert_eq!(
        stdout(&anonradio(&[
            "gen", "random", "7", "0.4", "3", "--seed", "11"
        ])),
        text
    );
}

#[test]
fn gen_rejects_bad_parameters() {
    let o = anonradio(&["gen", "gm", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("m >= 2"));
}

#[test]
fn classify_feasible_and_infeasible() {
    let dir = TempDir::new().unwrap();
    let h1 = gen_file(&dir, "h1.txt", &["hm", "1"]);
    let o = anonradio(&["classify", s(&h1)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "YES class=1 iteration=1\n");

    let s1 = gen_file(&dir, "s1.txt", &["sm", "1"]);
    let o = anonradio(&["classify", s(&s1)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("NO iteration="));
    let o = anonradio(&["classify", s(&s1), "--strict-exit"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn classify_malformed_input_reports_position() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "nodes 3\ntags 0 0 0\nedge 0 banana\n").unwrap();
    let o = anonradio(&["classify", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("line 3"), "{err}");
    assert!(stdout(&o).is_empty());

    let missing = dir.path().join("missing.txt");
    assert_eq!(anonradio(&["classify", s(&missing)]).status.code(), Some(1));
}

#[test]
fn disconnected_input_is_rejected() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("split.txt");
    std::fs::write(&p, "nodes 4\ntags 0 0 0 0\nedge 0 1\nedge 2 3\n").unwrap();
    let o = anonradio(&["elect", s(&p)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2 components"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(anonradio(&[]).status.code(), Some(1));
    assert_eq!(anonradio(&["classify"]).status.code(), Some(1));
    assert_eq!(anonradio(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(anonradio(&["--help"]).status.code(), Some(0));
}

#[test]
fn unnormalized_tags_are_shifted_with_a_notice() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("shifted.txt");
    std::fs::write(&p, "nodes 4\ntags 6 5 5 7\nedge 0 1\nedge 1 2\nedge 2 3\n").unwrap();
    let o = anonradio(&["classify", s(&p)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("shifted down by 5"));
    assert_eq!(stdout(&o), "YES class=1 iteration=1\n");
}

#[test]
fn elect_names_the_center_of_gm() {
    let dir = TempDir::new().unwrap();
    for m in [2usize, 3] {
        let p = gen_file(&dir, &format!("g{m}.txt"), &["gm", &m.to_string()]);
        let o = anonradio(&["elect", s(&p)]);
        assert_eq!(o.status.code(), Some(0));
        let line = stdout(&o);
        assert!(
            line.starts_with(&format!("LEADER node={} ", gm_center(m))),
            "{line}"
        );
        assert!(line.contains(&format!("iteration={m}")));
    }
    assert_eq!(gm_center(2), 4);
    assert_eq!(gen_gm(2).unwrap().n(), 9);
}

#[test]
fn elect_on_infeasible_exits_two() {
    let dir = TempDir::new().unwrap();
    let p = gen_file(&dir, "s2.txt", &["sm", "2"]);
    let o = anonradio(&["elect", s(&p)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("INFEASIBLE"));
}

#[test]
fn round_cap_too_small_is_an_error() {
    let dir = TempDir::new().unwrap();
    let p = gen_file(&dir, "h2.txt", &["hm", "2"]);
    let o = anonradio(&["simulate", s(&p), "--round-cap", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains('3'));
}

#[test]
fn check_random_batch_reports_zero_mismatches() {
    let o = anonradio(&["check", "--random", "8", "3", "500", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("0 mismatches"), "{out}");
    assert!(out.starts_with("checked 500 configurations"));
    assert_eq!(
        stdout(&anonradio(&["check", "--random", "8", "3", "500", "7"])),
        out
    );
}

#[test]
fn check_single_file() {
    let dir = TempDir::new().unwrap();
    let p = gen_file(&dir, "g3.txt", &["gm", "3"]);
    let o = anonradio(&["check", s(&p), "--format", "doc"]);
    assert_eq!(o.status.code(), Some(0));
    let report: OracleReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report.is_clean());
    assert!(report.unique_history_exists);
    assert_eq!(report.n, 13);
}

#[test]
fn documents_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = gen_file(&dir, "g2.txt", &["gm", "2"]);

    let trace_path = dir.path().join("trace.json");
    let o = anonradio(&[
        "classify",
        s(&p),
        "--format",
        "doc",
        "--trace",
        s(&trace_path),
    ]);
    let printed = stdout(&o);
    assert_eq!(std::fs::read_to_string(&trace_path).unwrap(), printed);
    let doc: TraceDocument = serde_json::from_str(&printed).unwrap();
    let trace = PartitionTrace::from_document(&doc).unwrap();
    let again = serde_json::to_string_pretty(&trace.to_document()).unwrap() + "\n";
    assert_eq!(again, printed);

    let o = anonradio(&["elect", s(&p), "--format", "doc"]);
    let printed = stdout(&o);
    let result: ElectionResult = serde_json::from_str(&printed).unwrap();
    assert_eq!(result.leader, 4);
    assert_eq!(
        serde_json::to_string_pretty(&result).unwrap() + "\n",
        printed
    );

    let exec_path = dir.path().join("exec.json");
    let o = anonradio(&[
        "simulate",
        s(&p),
        "--format",
        "doc",
        "--trace",
        s(&exec_path),
    ]);
    let printed = stdout(&o);
    let exec: ExecutionTrace = serde_json::from_str(&printed).unwrap();
    assert_eq!(serde_json::to_string_pretty(&exec).unwrap() + "\n", printed);
    assert_eq!(std::fs::read_to_string(&exec_path).unwrap(), printed);
    assert!(exec.all_spontaneous());
}

#[test]
fn dot_output_is_well_formed() {
    let dir = TempDir::new().unwrap();
    let p = gen_file(&dir, "h1.txt", &["hm", "1"]);
    let out = stdout(&anonradio(&["classify", s(&p), "--format", "dot"]));
    assert!(out.starts_with("graph configuration {\n"));
    assert_eq!(out.matches(" -- ").count(), 3);
    assert!(out.ends_with("}\n"));

    let out = stdout(&anonradio(&["simulate", s(&p), "--format", "dot"]));
    assert!(out.contains("graph round_3 {"));
    assert_eq!(out.matches("fillcolor=orange").count(), 4);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let p = gen_file(&dir, "g4.txt", &["gm", "4"]);
    for cmd in ["classify", "elect", "simulate"] {
        let a = anonradio(&[cmd, s(&p), "--format", "doc"]);
        let b = anonradio(&[cmd, s(&p), "--format", "doc"]);
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}
