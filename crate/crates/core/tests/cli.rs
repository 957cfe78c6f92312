use std::process::{Command, Output};

use serde_json::Value;

fn kato(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kato")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn moebius_greedy_closes_to_roundoff() {
    let out = kato(&[
        "continue",
        "--problem",
        "moebius",
        "--scheme",
        "greedy1",
        "--contour",
        "circle:0,0:1:512",
    ]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    assert_eq!(doc["schema"], 1);
    assert!(doc["closure_error"].as_f64().unwrap() <= 1e-12);
    assert_eq!(doc["L"], 512);
    assert_eq!(doc["counters"]["p_evals"], 512);
    assert_eq!(doc["rank_ok"], true);
}

#[test]
fn rank1_greedy2_reports_closure() {
    let out = kato(&[
        "continue",
        "--problem",
        "rank1",
        "--scheme",
        "greedy2",
        "--contour",
        "circle:0,0:0.5:256",
    ]);
    assert_eq!(code(&out), 0);
    assert!(json(&out)["closure_error"].is_f64());
}

#[test]
fn usage_errors_exit_one() {
    let out = kato(&["continue", "--problem", "nosuch", "--scheme", "greedy1"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("moebius dim=2 rank=1"), "{err}");
    assert_eq!(
        code(&kato(&["continue", "--problem", "rank1", "--scheme", "greedy7"])),
        1
    );
    assert_eq!(
        code(&kato(&[
            "study",
            "--problem",
            "rank1",
            "--scheme",
            "greedy1",
            "--refinements",
            "1"
        ])),
        1
    );
    assert_eq!(
        code(&kato(&[
            "continue",
            "--problem",
            "rank1",
            "--scheme",
            "greedy1",
            "--r0-file",
            "/nonexistent"
        ])),
        1
    );
}

#[test]
fn verify_exit_codes() {
    let out = kato(&["verify", "--problem", "moebius"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    for key in ["pr_minus_r", "p_rprime", "kato_vs_reduced", "pprop"] {
        assert!(doc[key].as_f64().unwrap() <= 1e-10, "{key}");
    }

    let out = kato(&["verify", "--problem", "random:1:4:2"]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    for key in ["pr_minus_r", "p_rprime", "kato_vs_reduced"] {
        assert!(doc[key].as_f64().unwrap() <= 1e-7, "{key}");
    }

    let out = kato(&["verify", "--problem", "rank1", "--contour", "circle:0,0:2:128"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
}

#[test]
fn listing() {
    let bare = kato(&[]);
    assert_eq!(code(&bare), 0);
    let text = String::from_utf8_lossy(&bare.stdout).into_owned();
    for needle in [
        "greedy1 order=1 cost=1E+1M",
        "moebius dim=2 rank=1",
        "rich3 order=3",
        "random:<seed>",
    ] {
        assert!(text.contains(needle), "{needle}");
    }
    assert_eq!(kato(&["list"]).stdout, bare.stdout);
}

#[test]
fn study_csv_and_json_carry_the_same_numbers() {
    let args = [
        "study",
        "--problem",
        "rank1",
        "--scheme",
        "greedy1",
        "--contour",
        "polyline:0.5,0;0.1,0.6;-0.4,-0.3;0.5,0:64",
        "--refinements",
        "4",
        "--oracle-substeps",
        "8",
    ];
    let csv_out = kato(&[&args[..], &["--format", "csv"]].concat());
    assert_eq!(code(&csv_out), 0);
    let csv = String::from_utf8(csv_out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("L,closure_error,oracle_error,p_evals,mat_mults,order")
    );

    let doc = json(&kato(&args));
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for (row, line) in rows.iter().zip(lines.by_ref()) {
        let fields: Vec<&str> = line.split(',').collect();
        let cols = ["L", "closure_error", "oracle_error", "p_evals", "mat_mults", "order"];
        for (col, field) in cols.iter().zip(&fields) {
            let v = &row[*col];
            if v.is_null() {
                assert_eq!(*field, "");
            } else {
                assert_eq!(field.parse::<f64>().unwrap(), v.as_f64().unwrap(), "{col}");
            }
        }
    }
    let median = lines.next().unwrap();
    assert_eq!(
        median.strip_prefix("median,,,,,").unwrap().parse::<f64>().unwrap(),
        doc["median_order"].as_f64().unwrap()
    );
    let order = doc["median_order"].as_f64().unwrap();
    assert!((0.7..=1.3).contains(&order), "{order}");
}

#[test]
fn continue_csv_matches_json() {
    let args = [
        "continue",
        "--problem",
        "evans-toy",
        "--scheme",
        "rich2",
        "--contour",
        "circle:1,0:0.5:32",
    ];
    let doc = json(&kato(&args));
    let csv = String::from_utf8(kato(&[&args[..], &["--format", "csv"]].concat()).stdout).unwrap();
    let get = |key: &str| {
        csv.lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap_or_else(|| panic!("{key} missing"))
            .to_string()
    };
    assert_eq!(
        get("closure_error").parse::<f64>().unwrap(),
        doc["closure_error"].as_f64().unwrap()
    );
    assert_eq!(get("counters.mat_mults"), doc["counters"]["mat_mults"].to_string());
    assert_eq!(
        get("r_final.1.0.im").parse::<f64>().unwrap(),
        doc["r_final"][1][0]["im"].as_f64().unwrap()
    );
}

#[test]
fn steps_to_tolerance_reports_both_schemes() {
    let out = kato(&[
        "study",
        "--problem",
        "rank1",
        "--scheme",
        "greedy2",
        "--contour",
        "polyline:0.5,0;0.1,0.6;-0.4,-0.3;0.5,0:8",
        "--refinements",
        "2",
        "--target-tol",
        "1e-2",
    ]);
    assert_eq!(code(&out), 0);
    let doc = json(&out);
    let s = &doc["steps_to_tolerance"];
    let (g2, g1) = (s["scheme"].as_u64().unwrap(), s["greedy1"].as_u64().unwrap());
    assert!(g1 >= 5 * g2, "greedy1={g1} greedy2={g2}");
}

#[test]
fn r0_file_out_file_and_init_policy() {
    let dir = tempfile::tempdir().unwrap();
    let r0 = dir.path().join("r0.txt");
    let report = dir.path().join("report.json");
    std::fs::write(&r0, "# outside range P(0.5)\n2 1\n0,0\n1,0\n").unwrap();
    let r0s = r0.to_str().unwrap();

    let base = [
        "continue",
        "--problem",
        "rank1",
        "--scheme",
        "greedy1",
        "--contour",
        "circle:0,0:0.5:16",
        "--r0-file",
        r0s,
    ];
    let out = kato(&base);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("range"));

    let out = kato(
        &[
            &base[..],
            &["--init-policy", "project", "--out", report.to_str().unwrap()],
        ]
        .concat(),
    );
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["init_policy"], "project");
    let r00 = doc["r0"][0][0]["re"].as_f64().unwrap();
    let r10 = doc["r0"][1][0]["re"].as_f64().unwrap();
    // projected onto span (2, 1) and normalized
    assert!((r00.abs() - 2.0 / 5f64.sqrt()).abs() < 1e-12 && (r10.abs() - 1.0 / 5f64.sqrt()).abs() < 1e-12);

    std::fs::write(&r0, "2 1\n1,0\n").unwrap();
    assert_eq!(code(&kato(&base)), 1);
}

#[test]
fn reports_are_byte_identical() {
    let args = ["continue", "--problem", "random:9:6:3", "--scheme", "lift:greedy2"];
    let (a, b) = (kato(&args), kato(&args));
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn too_deep_lift_is_rejected() {
    assert_eq!(
        code(&kato(&[
            "continue",
            "--problem",
            "rank1",
            "--scheme",
            "lift:lift:greedy3"
        ])),
        1
    );
}
