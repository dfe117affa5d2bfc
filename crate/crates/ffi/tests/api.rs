use std::ffi::{c_char, CStr, CString};
use std::ptr;

use arceval_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    arceval_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let p = arceval_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

const DOC: &str = r#"scenario "s1" {
  quality: accuracy
  source: "user"
  stimulus: "asks"
  environment: "live"
  artefacts: [retriever]
  response: "answers"
  measures: [ratio(relevant) >= 0.9]
}
"#;

#[test]
fn document_round_trip() {
    unsafe {
        let mut doc = ptr::null_mut();
        assert_eq!(arceval_document_parse(c(DOC).as_ptr(), &mut doc), ArcevalStatus::Ok);
        assert_eq!(arceval_document_block_count(doc), 1);
        let mut text = ptr::null_mut();
        assert_eq!(arceval_document_serialize(doc, &mut text), ArcevalStatus::Ok);
        assert_eq!(take(text), DOC);
        arceval_document_free(doc);
        assert!(arceval_last_error().is_null());
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut doc = ptr::null_mut();
        let st = arceval_document_parse(c("scenario \"x\" {\n  quality: nope\n}\n").as_ptr(), &mut doc);
        assert_eq!(st, ArcevalStatus::Parse);
        assert!(doc.is_null());
        assert!(last_error().contains("nope"));

        assert_eq!(
            arceval_document_parse(ptr::null(), &mut doc),
            ArcevalStatus::NullArgument
        );
        assert_eq!(
            arceval_document_serialize(ptr::null(), &mut ptr::null_mut()),
            ArcevalStatus::NullArgument
        );
        assert_eq!(arceval_document_block_count(ptr::null()), 0);

        let bad = [0xffu8, 0];
        assert_eq!(
            arceval_document_parse(bad.as_ptr().cast(), &mut doc),
            ArcevalStatus::InvalidUtf8
        );

        let mut ws = ptr::null_mut();
        assert_eq!(
            arceval_workspace_load(c("/nonexistent/arceval").as_ptr(), &mut ws),
            ArcevalStatus::Io
        );
        assert!(ws.is_null());
    }
}

#[test]
fn luna_gap_json_and_report() {
    unsafe {
        let mut ws = ptr::null_mut();
        assert_eq!(arceval_workspace_luna(&mut ws), ArcevalStatus::Ok);

        let mut out = ptr::null_mut();
        assert_eq!(
            arceval_workspace_gap_json(ws, c("luna@pre-review").as_ptr(), &mut out),
            ArcevalStatus::Ok
        );
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        let coverage: Vec<&str> = v["entries"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["coverage"].as_str().unwrap())
            .collect();
        assert_eq!(coverage, ["full", "none", "none", "full", "none", "full", "partial"]);

        assert_eq!(arceval_workspace_gap_json(ws, ptr::null(), &mut out), ArcevalStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["architecture"], "luna@post-review");

        assert_eq!(
            arceval_workspace_gap_json(ws, c("luna@v9").as_ptr(), &mut out),
            ArcevalStatus::NotFound
        );

        assert_eq!(arceval_workspace_report(ws, ptr::null(), &mut out), ArcevalStatus::Ok);
        let report = take(out);
        assert!(report.starts_with("arceval report: luna\n"));
        assert!(report.contains("== risks =="));
        arceval_workspace_free(ws);
    }
}

#[test]
fn measure_evaluation() {
    let lines = (0..10)
        .map(|i| {
            let tags = if i < 9 { r#"["relevant"]"# } else { "[]" };
            format!(
                r#"{{"ts":"2025-07-01T00:00:0{i}Z","trace_id":"t{i}","span_kind":"fm","scenario_tags":["s1"],"outcome_tags":{tags}}}"#
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    unsafe {
        let mut out = ptr::null_mut();
        let run = |m: &str, out: &mut *mut c_char| {
            arceval_measure_evaluate(c(m).as_ptr(), c(&lines).as_ptr(), c("s1").as_ptr(), out)
        };
        assert_eq!(run("ratio(relevant) >= 0.9", &mut out), ArcevalStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["outcome"], "pass");
        assert_eq!(v["population"], 10);
        assert_eq!(run("ratio(relevant) >= 0.95", &mut out), ArcevalStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["outcome"], "fail");
        assert_eq!(run("ratio(relevant) >= 2 h", &mut out), ArcevalStatus::Measure);
    }
}

#[test]
fn last_error_is_per_thread() {
    unsafe {
        let mut doc = ptr::null_mut();
        assert_eq!(arceval_document_parse(c("}").as_ptr(), &mut doc), ArcevalStatus::Parse);
        std::thread::spawn(|| assert!(arceval_last_error().is_null()))
            .join()
            .unwrap();
        assert!(!last_error().is_empty());
        let v = CStr::from_ptr(arceval_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}
