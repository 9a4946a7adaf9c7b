use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cexforge_ffi::*;

const D1_TRA: &str = "STATES 4\nTRANSITIONS 6\n0 1 0.5\n0 2 0.5\n1 0 0.5\n1 3 0.5\n2 2 1\n3 3 1\n";
const D1_LAB: &str = "#DECLARATION\ngoal\n#END\n3 goal\n";

fn d1() -> *mut CexModel {
    let (tra, lab) = (CString::new(D1_TRA).unwrap(), CString::new(D1_LAB).unwrap());
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cex_model_from_text(tra.as_ptr(), lab.as_ptr(), false, &mut m) }, CexStatus::Ok);
    m
}

fn take_string(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { cex_string_free(p) };
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cex_last_error()) }.to_str().unwrap().to_string()
}

#[test]
fn check_through_abi() {
    let m = d1();
    let goal = CString::new("goal").unwrap();
    let (mut prob, mut violated) = (0.0, false);
    let st = unsafe { cex_check(m, goal.as_ptr(), CexComparison::LessEq, 0.25, &mut prob, &mut violated) };
    assert_eq!(st, CexStatus::Ok);
    assert!((prob - 1.0 / 3.0).abs() < 1e-9);
    assert!(violated);

    let missing = CString::new("nope").unwrap();
    let st = unsafe { cex_check(m, missing.as_ptr(), CexComparison::LessEq, 0.25, &mut prob, &mut violated) };
    assert_eq!(st, CexStatus::InvalidModel);
    assert!(last_error().contains("nope"));
    unsafe { cex_model_free(m) };
}

#[test]
fn refinement_workflow() {
    let m = d1();
    let goal = CString::new("goal").unwrap();
    let mut s = ptr::null_mut();
    let st = unsafe { cex_session_create(m, goal.as_ptr(), CexComparison::LessEq, 0.25, CexMethod::Global, 0, &mut s) };
    assert_eq!(st, CexStatus::Ok);
    // The session keeps its own reference to the model.
    unsafe { cex_model_free(m) };

    assert_eq!(unsafe { cex_session_undo(s) }, CexStatus::InvalidState);
    assert_eq!(unsafe { cex_session_search(s) }, CexStatus::Ok);
    let mut status = CexSessionStatus::Searching;
    unsafe { cex_session_status(s, &mut status) };
    assert_eq!(status, CexSessionStatus::Critical);
    let mut prob = 0.0;
    unsafe { cex_session_prob(s, &mut prob) };
    assert!((prob - 1.0 / 3.0).abs() < 1e-9);

    let bad = [7usize];
    assert_eq!(unsafe { cex_session_concretize(s, bad.as_ptr(), 1) }, CexStatus::InvalidArgument);
    assert_eq!(unsafe { cex_session_auto_refine(s, CexRefinePolicy::MassGreedy) }, CexStatus::Ok);

    let mut out = ptr::null_mut();
    unsafe { cex_session_subsystem_tra(s, &mut out) };
    assert_eq!(take_string(out), "STATES 4\nTRANSITIONS 3\n0 1 0.5\n1 0 0.5\n1 3 0.5\n");

    unsafe { cex_session_report_json(s, true, &mut out) };
    let report: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
    assert_eq!(report["status"], "critical");
    assert_eq!(report["wall_time_ms"], 0);

    unsafe { cex_session_export_json(s, &mut out) };
    let exported = take_string(out);
    let json = CString::new(exported.clone()).unwrap();
    let mut s2 = ptr::null_mut();
    assert_eq!(unsafe { cex_session_import_json(json.as_ptr(), &mut s2) }, CexStatus::Ok);
    unsafe { cex_session_export_json(s2, &mut out) };
    assert_eq!(take_string(out), exported);

    unsafe {
        cex_session_free(s);
        cex_session_free(s2);
    }
}

#[test]
fn holding_property_gives_satisfied_session() {
    let m = d1();
    let goal = CString::new("goal").unwrap();
    let mut s = ptr::null_mut();
    unsafe { cex_session_create(m, goal.as_ptr(), CexComparison::Less, 0.5, CexMethod::Local, 10, &mut s) };
    let mut status = CexSessionStatus::Critical;
    unsafe { cex_session_status(s, &mut status) };
    assert_eq!(status, CexSessionStatus::Satisfied);
    assert_eq!(unsafe { cex_session_search(s) }, CexStatus::InvalidState);
    unsafe {
        cex_session_free(s);
        cex_model_free(m);
    }
}

#[test]
fn parse_errors_and_files() {
    let tra = CString::new("STATES 2\nTRANSITIONS 1\n0 1 0.5\n").unwrap();
    let lab = CString::new(D1_LAB).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { cex_model_from_text(tra.as_ptr(), lab.as_ptr(), false, &mut m) }, CexStatus::Parse);
    assert!(last_error().contains("row 0"), "{}", last_error());

    let dir = tempdir();
    std::fs::write(dir.join("d1.tra"), D1_TRA).unwrap();
    std::fs::write(dir.join("d1.lab"), D1_LAB).unwrap();
    let tp = CString::new(dir.join("d1.tra").to_str().unwrap()).unwrap();
    let lp = CString::new(dir.join("d1.lab").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { cex_model_from_files(tp.as_ptr(), lp.as_ptr(), false, &mut m) }, CexStatus::Ok);
    assert_eq!(unsafe { cex_model_num_transitions(m) }, 6);
    unsafe { cex_model_free(m) };
    let gone = CString::new(dir.join("missing.tra").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { cex_model_from_files(gone.as_ptr(), lp.as_ptr(), false, &mut m) }, CexStatus::Io);
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempdir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cexforge-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/cexforge.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "typedef struct CexModel CexModel;",
        "typedef struct CexSession CexSession;",
        "CEX_STATUS_OK = 0",
        "CEX_STATUS_PANIC = 9",
        "cex_session_concretize",
        "cex_string_free",
        "cex_last_error",
    ] {
        assert!(text.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempdir().join("hdr");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"cexforge.h\"\n\
         int run(const char *tra, const char *lab) {\n\
           CexModel *m = 0; CexSession *s = 0; double p = 0; bool v = false;\n\
           if (cex_model_from_text(tra, lab, false, &m) != CEX_STATUS_OK) return 1;\n\
           cex_check(m, \"goal\", CEX_COMPARISON_LESS_EQ, 0.25, &p, &v);\n\
           cex_session_create(m, \"goal\", CEX_COMPARISON_LESS_EQ, 0.25, CEX_METHOD_GLOBAL, 0, &s);\n\
           cex_session_search(s);\n\
           char *json = 0; cex_session_export_json(s, &json); cex_string_free(json);\n\
           cex_session_free(s); cex_model_free(m);\n\
           return v ? 0 : 2;\n\
         }\n",
    )
    .unwrap();
    let include = header().parent().unwrap().to_path_buf();
    for std in ["-std=c99", "-std=c11"] {
        let st = Command::new(&cc)
            .args([std, "-Wall", "-Werror", "-fsyntax-only", "-I"])
            .arg(&include)
            .arg(&src)
            .status()
            .unwrap();
        assert!(st.success(), "{cc} {std} rejected the header");
    }
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
