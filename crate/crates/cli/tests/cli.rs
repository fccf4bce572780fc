use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use emt_core::TensorExpr;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join("emt-cli").join(name);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn emt<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_emt")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn maxwell_noether_with_gauge_completion_matches_reference() {
    let d = scratch("maxwell_noether");
    let out = d.join("t.json");
    let o = emt([
        "derive".as_ref(),
        "noether".as_ref(),
        corpus("em.lag").as_os_str(),
        "--delta".as_ref(),
        corpus("em_bessel_hagen.lag").as_os_str(),
        "-o".as_ref(),
        out.as_os_str(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = emt(["diff".as_ref(), out.as_os_str(), corpus("em_emt.json").as_os_str()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["equal"], true);
    assert_eq!(v["text"], "0");
}

#[test]
fn maxwell_hilbert_matches_reference_and_dumps_stages() {
    let d = scratch("maxwell_hilbert");
    let out = d.join("t.json");
    let o = emt([
        "derive".as_ref(),
        "hilbert".as_ref(),
        corpus("em.lag").as_os_str(),
        "--emit-stage".as_ref(),
        "promoted".as_ref(),
        "--emit-stage".as_ref(),
        "flat".as_ref(),
        "--stage-dir".as_ref(),
        d.as_os_str(),
        "-o".as_ref(),
        out.as_os_str(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for s in ["promoted", "flat"] {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join(format!("em.{s}.json"))).unwrap()).unwrap();
        assert_eq!(v["stage"], s);
        assert!(TensorExpr::from_json(&v["expr"].to_string()).is_ok());
    }
    assert!(!d.join("em.pruned.json").exists());
    let o = emt(["diff".as_ref(), out.as_os_str(), corpus("em_emt.json").as_os_str()]);
    assert_eq!(code(&o), 0);
}

#[test]
fn curvature_square_differs_from_reference_with_exit_one() {
    let d = scratch("gauss_bonnet");
    let out = d.join("t.json");
    let o = emt([
        "derive".as_ref(),
        "hilbert".as_ref(),
        corpus("gauss_bonnet.lag").as_os_str(),
        "--set".as_ref(),
        "A=1/4,B=-1,C=1/4".as_ref(),
        "-o".as_ref(),
        out.as_os_str(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = emt(["diff".as_ref(), out.as_os_str(), corpus("gb_emt.json").as_os_str()]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["equal"], false);
    assert!(v["terms"].as_u64().unwrap() > 0);
    let o = emt(["oracle-compare".as_ref(), out.as_os_str(), corpus("gb_emt.json").as_os_str(), "--trials".as_ref(), "20".as_ref()]);
    assert_eq!(code(&o), 1);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["verdict"], "unequal");
    assert!(v["witness"].is_object());
}

#[test]
fn relabeled_copies_cancel() {
    let d = scratch("cancel");
    let f = d.join("z.lag");
    std::fs::write(&f, "field A {rank:1}\nlagrangian = d[a] A[b] d[^a] A[^b] - d[c] A[e] d[^c] A[^e]\n").unwrap();
    let o = emt(["canon".as_ref(), f.as_os_str()]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "0");
}

#[test]
fn canonical_lagrangians_match_golden_text() {
    for name in ["kg", "em", "fierz_pauli", "gauss_bonnet"] {
        let o = emt(["canon".as_ref(), corpus(&format!("{name}.lag")).as_os_str()]);
        assert_eq!(code(&o), 0);
        assert_eq!(stdout(&o), golden(&format!("{name}.canon.txt")), "{name}");
    }
}

#[test]
fn noether_json_matches_golden_and_is_deterministic() {
    let kg = corpus("kg.lag");
    let a = emt(["derive".as_ref(), "noether".as_ref(), kg.as_os_str()]);
    let b = emt(["derive".as_ref(), "noether".as_ref(), kg.as_os_str()]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a), golden("kg.noether.json"));
    let o = emt([
        "derive".as_ref(),
        "noether".as_ref(),
        corpus("em.lag").as_os_str(),
        "--delta".as_ref(),
        corpus("em_bessel_hagen.lag").as_os_str(),
        "--dim".as_ref(),
        "D".as_ref(),
    ]);
    assert_eq!(stdout(&o), golden("em_bessel_hagen.noether.json"));
}

#[test]
fn reference_tensor_passes_property_checks() {
    let o = emt([
        "check".as_ref(),
        corpus("gauss_bonnet.lag").as_os_str(),
        "--emt".as_ref(),
        corpus("gb_emt.json").as_os_str(),
        "--properties".as_ref(),
        "symmetric,traceless,gauge_invariant,conserved".as_ref(),
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 4);
}

#[test]
fn failing_property_exits_one() {
    // the Maxwell tensor is traceless only in four dimensions
    let o = emt([
        "check".as_ref(),
        corpus("em.lag").as_os_str(),
        "--emt".as_ref(),
        corpus("em_emt.json").as_os_str(),
        "--properties".as_ref(),
        "traceless".as_ref(),
        "--dim".as_ref(),
        "D".as_ref(),
    ]);
    assert_eq!(code(&o), 1, "{}", stdout(&o));
}

#[test]
fn bad_input_exits_two() {
    let d = scratch("bad");
    let f = d.join("bad.lag");
    std::fs::write(&f, "field A {rank:1}\nlagrangian = A[a] A[a\n").unwrap();
    assert_eq!(code(&emt(["canon".as_ref(), f.as_os_str()])), 2);
    assert_eq!(code(&emt(["canon", "/nonexistent/x.lag"])), 2);
    assert_eq!(code(&emt(["frobnicate"])), 2);
    assert_eq!(code(&emt(["check", "x.lag", "--emt", "t.json", "--properties", "shiny"])), 2);
    let kg = corpus("kg.lag");
    assert_eq!(code(&emt(["canon".as_ref(), kg.as_os_str(), "--dim".as_ref(), "0".as_ref()])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_emt")).arg("canon").arg(&kg).env("EMT_THREADS", "many").output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn thread_count_does_not_change_output() {
    let kg = corpus("kg.lag");
    let run = |n: &str| {
        Command::new(env!("CARGO_BIN_EXE_emt"))
            .args(["oracle-compare".as_ref(), kg.as_os_str(), kg.as_os_str()])
            .env("EMT_THREADS", n)
            .output()
            .unwrap()
    };
    let (a, b) = (run("1"), run("0"));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
