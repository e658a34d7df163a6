use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sympos::io::{path_from_json, path_to_json};
use tempfile::TempDir;

fn sympos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sympos")).args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    let s = String::from_utf8(o.stdout.clone()).unwrap();
    assert!(s.ends_with('\n') && s.trim_end().lines().count() == 1, "not a single JSON line: {s:?}");
    serde_json::from_str(&s).unwrap()
}

fn put(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const ROT_QUARTER: &str = r#"{"dim":2,"rows":[[0,-1],[1,0]]}"#;
const HALF_TURN: &str = r#"{"dim":2,"segments":[{"duration":3.141592653589793,"generator_P":[[1,0],[0,1]]}]}"#;

#[test]
fn classify_boundary_real_matrix() {
    let d = TempDir::new().unwrap();
    let a = put(&d, "a.json", r#"{"dim":4,"rows":[[2,0,0,0],[0,0.5,0,-0.25],[1,0,2,0],[0,0,0,0.5]]}"#);
    let o = sympos(&["classify", "-i", s(&a)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["region"], "B_R");
    assert_eq!(v["labels"][0][0].as_f64().unwrap(), 2.0);
    assert!(v["groups"].is_array());
}

#[test]
fn connect_identity_to_rotation() {
    let d = TempDir::new().unwrap();
    let id = put(&d, "id.json", r#"{"dim":2,"rows":[[1,0],[0,1]]}"#);
    let b = put(&d, "rot1.json", ROT_QUARTER);
    let out = d.path().join("path.json");
    let o = sympos(&["connect", "-a", s(&id), "-b", s(&b), "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let p = path_from_json(&serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap(), 1e-9).unwrap();
    assert!(p.verify_positive().positive);
    let e = p.endpoint();
    assert!((e.matrix()[(1, 0)] - 1.0).abs() < 1e-10 && e.matrix()[(0, 0)].abs() < 1e-10);
}

#[test]
fn index_of_half_turn() {
    let d = TempDir::new().unwrap();
    let p = put(&d, "rho.json", HALF_TURN);
    let o = sympos(&["index", "-i", s(&p)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["cz_index"], 0);
    assert_eq!(v["short"], true);
    assert_eq!(v["positive"], true);
}

#[test]
fn trace_writes_csv_and_svg() {
    let d = TempDir::new().unwrap();
    let p = put(&d, "rho.json", HALF_TURN);
    let (csv, svg) = (d.path().join("t.csv"), d.path().join("t.svg"));
    let o = sympos(&["trace", "-i", s(&p), "-o", s(&csv), "--svg", s(&svg), "--samples", "64"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,group,lambda_re,lambda_im,kind,splitting,stratum\n"));
    assert!(!text.contains('\r'));
    assert!(fs::read_to_string(&svg).unwrap().contains("<svg"));
    // no temp files left behind
    let names: Vec<_> = fs::read_dir(d.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 3, "{names:?}");
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let missing = d.path().join("nope.json");
    assert_eq!(sympos(&["classify", "-i", s(&missing)]).status.code(), Some(2));
    let garbage = put(&d, "g.json", "{ not json");
    assert_eq!(sympos(&["classify", "-i", s(&garbage)]).status.code(), Some(2));
    let not_symp = put(&d, "n.json", r#"{"dim":2,"rows":[[1,2],[3,4]]}"#);
    assert_eq!(sympos(&["classify", "-i", s(&not_symp)]).status.code(), Some(2));
    let ragged = put(&d, "r.json", r#"{"dim":2,"rows":[[1,0],[0]]}"#);
    assert_eq!(sympos(&["classify", "-i", s(&ragged)]).status.code(), Some(2));

    // one real eigenvalue above 1: odd parity
    let hyp = put(&d, "h.json", r#"{"dim":2,"rows":[[2,0],[0,0.5]]}"#);
    let o = sympos(&["connect", "--short", "-b", s(&hyp)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("parity"));

    let not_pd = put(&d, "s.json", r#"{"periodic":true,"segments":[{"duration":1,"generator_P":[[1,0],[0,-1]]}]}"#);
    let out = d.path().join("sweep.csv");
    assert_eq!(sympos(&["sweep", "-i", s(&not_pd), "--mu-max", "4", "-o", s(&out)]).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn sweep_finds_half_turn() {
    let d = TempDir::new().unwrap();
    let sys = put(&d, "s.json", r#"{"periodic":true,"segments":[{"duration":0.5,"generator_P":[[1,0],[0,1]]},{"duration":0.5,"generator_P":[[1,0],[0,1]]}]}"#);
    let out = d.path().join("sweep.csv");
    let o = sympos(&["sweep", "-i", s(&sys), "--mu-max", "4", "--grid", "8", "-o", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!((v["mu0"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-9);
    let table = fs::read_to_string(&out).unwrap();
    assert_eq!(table.lines().count(), 9);
    assert!(table.starts_with("mu,stable,strongly_stable\n"));

    let short = sympos(&["sweep", "-i", s(&sys), "--mu-max", "3", "-o", s(&out)]);
    assert!(stdout_json(&short)["mu0"].is_null());
}

#[test]
fn stability_reports() {
    let d = TempDir::new().unwrap();
    let minus = put(&d, "m.json", r#"{"dim":2,"rows":[[-1,0],[0,-1]]}"#);
    let v = stdout_json(&sympos(&["stability", "-i", s(&minus)]));
    assert_eq!((v["stable"].as_bool(), v["strongly_stable"].as_bool()), (Some(true), Some(false)));

    let shear = put(&d, "sh.json", r#"{"dim":2,"rows":[[1,1],[0,1]]}"#);
    assert_eq!(stdout_json(&sympos(&["stability", "-i", s(&shear)]))["stable"], false);

    let sys = put(&d, "s.json", r#"{"periodic":true,"segments":[{"duration":1,"generator_P":[[1,0],[0,1]]}]}"#);
    let v = stdout_json(&sympos(&["stability", "-i", s(&sys), "--mu", "1"]));
    assert_eq!(v["strongly_stable"], true);

    let coupled = r#"{"dim":4,"segments":[{"duration":1,"generator_P":[[1,0,0,0],[0,1,0,0],[0,0,2,0],[0,0,0,2]]}]}"#;
    let paths = put(&d, "ps.json", &format!("[{coupled},{coupled}]"));
    let o = sympos(&["stability", "-i", s(&paths)]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    for line in text.lines() {
        let r: Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["excursions"], 0);
    }
}

#[test]
fn repeat_runs_are_byte_identical() {
    let d = TempDir::new().unwrap();
    let b = put(&d, "b.json", r#"{"dim":4,"rows":[[0,-1,0,0],[1,0,0,0],[0,0,3,0],[0,0,0,0.3333333333333333]]}"#);
    let run = |name: &str| {
        let out = d.path().join(name);
        let o = sympos(&["connect", "-b", s(&b), "-o", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out).unwrap()
    };
    assert_eq!(run("one.json"), run("two.json"));

    let p = put(&d, "rho.json", HALF_TURN);
    let (c1, c2) = (d.path().join("1.csv"), d.path().join("2.csv"));
    sympos(&["trace", "-i", s(&p), "-o", s(&c1)]);
    sympos(&["trace", "-i", s(&p), "-o", s(&c2)]);
    assert_eq!(fs::read(c1).unwrap(), fs::read(c2).unwrap());
}

#[test]
fn emitted_paths_round_trip() {
    let d = TempDir::new().unwrap();
    let b = put(&d, "b.json", ROT_QUARTER);
    let first = d.path().join("p.json");
    assert!(sympos(&["connect", "-b", s(&b), "-o", s(&first)]).status.success());
    let text = fs::read_to_string(&first).unwrap();
    let p = path_from_json(&serde_json::from_str(&text).unwrap(), 1e-9).unwrap();
    p.evaluate(p.total_duration() / 2.0).unwrap();
    let again = format!("{}\n", serde_json::to_string(&path_to_json(&p)).unwrap());
    assert_eq!(text, again);

    let extended = d.path().join("e.json");
    assert!(sympos(&["extend", "-i", s(&first), "-o", s(&extended)]).status.success());
    let v: Value = serde_json::from_str(&fs::read_to_string(&extended).unwrap()).unwrap();
    let e = path_from_json(&v, 1e-9).unwrap();
    assert!(e.total_duration() > p.total_duration());
}

#[test]
fn selftest_subset() {
    let o = sympos(&["selftest", "--only", "1,3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 2);
    assert_eq!(sympos(&["selftest", "--only", "11"]).status.code(), Some(2));
}
