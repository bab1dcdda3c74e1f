use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fundmatch::format::parse_market;
use fundmatch::oracle::find_sr_da_manipulation;

const EX1: &str = "hadm-1\n[colleges]\nc q_state=1 q_self=1 policy=inverse-merit ranking=r,p\n[students]\np rol=c:1\nr rol=c:1,c:0\n";
const SMTI: &str = "hadm-1\n[colleges]\n[students]\n[smti]\nman m1 prefs=w1,w2\nman m2 prefs=w2\nstrict w1 prefs=m1\ntied w2 men=m1,m2\n";

fn fundmatch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fundmatch")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn solve_to(dir: &Path, market: &Path, alg: &str) -> PathBuf {
    let o = fundmatch(&["solve", "--algorithm", alg, "--market", s(market)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    write(dir, &format!("{alg}.alloc"), &stdout(&o))
}

#[test]
fn solve_sp_da_on_ex1() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "ex1.market", EX1);
    let o = fundmatch(&["solve", "--algorithm", "sp-da", "--market", s(&m)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "r,c,1"), "{text}");
}

#[test]
fn solve_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "ex1.market", EX1);
    let t = dir.path().join("trace.txt");
    let o = fundmatch(&["solve", "--algorithm", "sp-da", "--market", s(&m), "--trace", s(&t)]);
    assert_eq!(o.status.code(), Some(0));
    let trace = fs::read_to_string(&t).unwrap();
    assert!(trace.starts_with("trace proposer=students"));
    assert!(trace.contains("propose r,c,1"));
    let t3 = dir.path().join("alg3.json");
    let o = fundmatch(&["solve", "--algorithm", "alg3", "--market", s(&m), "--trace", s(&t3)]);
    assert_eq!(o.status.code(), Some(0));
    let _: serde_json::Value = serde_json::from_str(&fs::read_to_string(&t3).unwrap()).unwrap();
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "ex1.market", EX1);
    let alg1 = solve_to(dir.path(), &m, "alg1");
    let sp = solve_to(dir.path(), &m, "sp-da");
    let o = fundmatch(&["check", "--mode", "certain", "--market", s(&m), "--allocation", s(&alg1)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = fundmatch(&["check", "--mode", "full", "--market", s(&m), "--allocation", s(&sp)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    // nobody assigned: r blocks alone
    let empty = fs::read_to_string(&sp).unwrap().replace("[assigned]\nr,c,1\n[unassigned]\np\n", "[assigned]\n[unassigned]\np\nr\n");
    let empty = write(dir.path(), "empty.alloc", &empty);
    for mode in ["full", "certain"] {
        let o = fundmatch(&["check", "--mode", mode, "--market", s(&m), "--allocation", s(&empty)]);
        assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
        assert!(stdout(&o).contains("stable=false"));
    }
}

#[test]
fn compare_sr_da_with_alg3() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "ex1.market", EX1);
    let base = solve_to(dir.path(), &m, "sr-da");
    let alt = solve_to(dir.path(), &m, "alg3");
    let o = fundmatch(&["compare", "--market", s(&m), "--baseline", s(&base), "--alternate", s(&alt)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "winners 1"), "{text}");
    assert!(text.lines().any(|l| l == "losers 1"), "{text}");
    let o = fundmatch(&["compare", "--market", s(&m), "--baseline", s(&base), "--alternate", s(&alt), "--json", "--mobility"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["comparison"]["winners"]["total"], 1);
    assert_eq!(v["comparison"]["losers"]["total"], 1);
}

#[test]
fn enumerate_ex1() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "ex1.market", EX1);
    let o = fundmatch(&["enumerate", "--market", s(&m), "--mode", "full"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("stable_allocations=2"));
    let o = fundmatch(&["enumerate", "--market", s(&m), "--mode", "certain", "--max-size-only"]);
    assert!(stdout(&o).contains("max_size=2"), "{}", stdout(&o));
}

#[test]
fn errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.market", "hadm-1\n[colleges]\nc q_state=1 q_self=1 policy=merit ranking=p\n[students]\np rol=c:2\n");
    let o = fundmatch(&["solve", "--algorithm", "sp-da", "--market", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let missing = dir.path().join("missing.market");
    let o = fundmatch(&["solve", "--algorithm", "sp-da", "--market", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    let m = write(dir.path(), "ex1.market", EX1);
    let alloc = solve_to(dir.path(), &m, "sp-da");
    let tampered = fs::read_to_string(&alloc).unwrap().replacen("fingerprint=", "fingerprint=0", 1);
    let tampered = write(dir.path(), "tampered.alloc", &tampered);
    let o = fundmatch(&["check", "--mode", "full", "--market", s(&m), "--allocation", s(&tampered)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(dir.path(), "ex1.market", EX1);
    for alg in ["sp-da", "sr-da", "alg1", "alg2", "alg3"] {
        let a = fundmatch(&["solve", "--algorithm", alg, "--market", s(&m), "--seed", "7"]);
        let b = fundmatch(&["solve", "--algorithm", alg, "--market", s(&m), "--seed", "7"]);
        assert_eq!(a.stdout, b.stdout, "{alg}");
    }
}

#[test]
fn generate_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.toml", "n_students = 30\nn_colleges = 4\nrol_length = [1, 4]\n");
    let a = dir.path().join("a.market");
    let b = dir.path().join("b.market");
    for out in [&a, &b] {
        let o = fundmatch(&["generate", "--config", s(&cfg), "--seed", "11", "--out", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(parse_market(&text).unwrap().n_students(), 30);
    let y = solve_to(dir.path(), &a, "alg2");
    let o = fundmatch(&["check", "--mode", "certain", "--market", s(&a), "--allocation", s(&y)]);
    assert_eq!(o.status.code(), Some(0));
    let bad = write(dir.path(), "bad.toml", "n_student = 30\n");
    let o = fundmatch(&["generate", "--config", s(&bad), "--seed", "1", "--out", s(&a)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn smti_commands() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "inst.hadm", SMTI);
    let out = dir.path().join("reduced.market");
    let o = fundmatch(&["reduce-smti", "--instance", s(&inst), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = parse_market(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(m.n_students(), 3);
    assert_eq!(m.n_colleges(), 2);
    let o = fundmatch(&["verify-smti-lemma", "--instance", s(&inst)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("holds=true\n"));
    let o = fundmatch(&["verify-smti-lemma", "--instance", s(&write(dir.path(), "ex1.market", EX1))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn manipulate_matches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "ex1.market", EX1);
    let m = parse_market(EX1).unwrap();
    for id in ["p", "r"] {
        let o = fundmatch(&["manipulate", "--market", s(&p), "--student", id]);
        assert_eq!(o.status.code(), Some(0));
        let expected = find_sr_da_manipulation(&m, m.student_ix(id).unwrap()).unwrap();
        assert_eq!(stdout(&o) == "none\n", expected.is_none(), "{id}");
    }
    let o = fundmatch(&["manipulate", "--market", s(&p), "--student", "nobody"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_every_pair() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "small.toml", "n_students = 20\nn_colleges = 3\nrol_length = [1, 3]\n");
    let manifest = write(dir.path(), "runs.manifest", "hadm-manifest-1\n1 small.toml\n2 small.toml\n");
    let out = dir.path().join("out");
    let o = fundmatch(&["sweep", "--manifest", s(&manifest), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 3);
    for seed in [1, 2] {
        for suffix in ["market", "baseline.alloc", "alternate.alloc"] {
            assert!(out.join(format!("small-{seed}.{suffix}")).exists());
        }
    }
}
