use std::fs;
use std::path::Path;

use secretary_lab::cli::run;
use secretary_lab::exact::{frac, parse_value, to_decimal, ExactNumber};
use secretary_lab::instance::PriorFamily;
use serde_json::Value;

fn lab(args: &[&str]) -> i32 {
    run(std::iter::once("secretary-lab").chain(args.iter().copied()))
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn exact_field(v: &Value, key: &str) -> ExactNumber {
    parse_value(v[key]["exact"].as_str().unwrap(), None).unwrap()
}

#[test]
fn gen_writes_family_and_markdown_table() {
    let dir = tempfile::tempdir().unwrap();
    let fam_path = dir.path().join("fam.json");
    assert_eq!(
        lab(&["gen", "--eps", "1/10", "--s", "5", "--k", "20", "-o", path_str(&fam_path), "--render", "md"]),
        0
    );
    let fam = PriorFamily::from_json(&fs::read_to_string(&fam_path).unwrap()).unwrap();
    assert_eq!(fam.scenarios.len(), 39);
    let table = fs::read_to_string(dir.path().join("fam.md")).unwrap();
    assert!(table.starts_with("| row | X_1 | X_2 | X_3 | probability |"));
    assert!(table.contains("| 1 (prediction) | s^1 | 1 | 1 | 1/10 |"));
    assert_eq!(table.lines().count(), 2 + 39);
}

#[test]
fn gen_solve_verify_agree() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("fam.json");
    let sol = dir.path().join("solve.json");
    let pol = dir.path().join("policy.json");
    let ver = dir.path().join("verify.json");
    let ev = dir.path().join("eval.json");
    assert_eq!(lab(&["gen", "--eps", "1/10", "--s", "5", "--k", "4", "-o", path_str(&fam)]), 0);
    assert_eq!(
        lab(&["solve", "--family", path_str(&fam), "-o", path_str(&sol), "--policy-out", path_str(&pol)]),
        0
    );
    assert_eq!(lab(&["verify", "--eps", "1/10", "--s", "5", "--k", "4", "-o", path_str(&ver)]), 0);
    let policy_arg = format!("policy:{}", path_str(&pol));
    assert_eq!(
        lab(&["eval", "--alg", &policy_arg, "--family", path_str(&fam), "-o", path_str(&ev)]),
        0
    );
    let solved = exact_field(&read_json(&sol), "optimum");
    assert_eq!(solved, frac(1703, 3125));
    assert_eq!(exact_field(&read_json(&ver), "dp_optimum"), solved);
    assert_eq!(exact_field(&read_json(&ev), "expected"), solved);
}

#[test]
fn verify_preset_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    assert_eq!(lab(&["verify", "--preset", "corrected-76-78", "-o", path_str(&out)]), 0);
    let v = read_json(&out);
    assert_eq!(v["preset"], "corrected-76-78");
    assert_eq!(v["verdict_vs_inv_e"], "Less");
    assert_eq!(v["params"]["row_count"], 155);
    assert_eq!(to_decimal(&exact_field(&v, "dp_optimum"), 6), "0.359035");
}

#[test]
fn bounds_reports_threshold_only_below_beta() {
    let dir = tempfile::tempdir().unwrap();
    let low = dir.path().join("low.json");
    let high = dir.path().join("high.json");
    assert_eq!(lab(&["bounds", "--eps", "259/10000", "--s", "19", "--k", "20", "-o", path_str(&low)]), 0);
    assert_eq!(lab(&["bounds", "--eps", "1/10", "--s", "5", "--k", "4", "-o", path_str(&high)]), 0);
    assert!(read_json(&low)["threshold"].is_object());
    assert!(read_json(&high)["threshold"].is_null());
    assert_eq!(exact_field(&read_json(&high), "ub_display"), frac(3, 5));
}

#[test]
fn sweep_csv_decreases_along_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let ks = ["4", "8", "16", "32"];
    assert_eq!(
        lab(&[
            "sweep", "--eps", "1/100", "--s", "4,8,16,32", "--k", &ks.join(","), "--fields", "s,k,dp_optimum",
            "-o", path_str(&out),
        ]),
        0
    );
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,k,dp_optimum"));
    let rows: Vec<(String, String, ExactNumber)> = lines
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            (c[0].to_string(), c[1].to_string(), parse_value(c[2], None).unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 16);
    let diagonal: Vec<&ExactNumber> = rows.iter().filter(|(s, k, _)| s == k).map(|(_, _, v)| v).collect();
    assert_eq!(diagonal.len(), 4);
    assert!(diagonal.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn sweep_respects_point_cap_and_field_names() {
    assert_eq!(lab(&["sweep", "--eps", "1/10,1/20", "--s", "5,6", "--k", "4,6", "--max-points", "7"]), 1);
    assert_eq!(lab(&["sweep", "--eps", "1/10", "--s", "5", "--k", "4", "--fields", "nope"]), 1);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<(String, String)> = (0..2)
        .map(|i| {
            let mc = dir.path().join(format!("mc{i}.json"));
            let sw = dir.path().join(format!("sw{i}.csv"));
            assert_eq!(
                lab(&["eval", "--alg", "dynkin", "--classic", "20", "--mc", "--trials", "5000", "--seed", "7",
                    "--metric", "success", "-o", path_str(&mc)]),
                0
            );
            assert_eq!(
                lab(&["sweep", "--eps", "1/10,259/10000", "--s", "5,19", "--k", "4,20", "-o", path_str(&sw)]),
                0
            );
            let mc_text = fs::read_to_string(&mc).unwrap();
            assert!(mc_text.contains("fallback=accept-last"));
            (mc_text, fs::read_to_string(&sw).unwrap())
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn exit_codes() {
    assert_eq!(lab(&["--help"]), 0);
    assert_eq!(lab(&["frobnicate"]), 2);
    assert_eq!(lab(&["gen", "--eps", "1/10"]), 1);
    assert_eq!(lab(&["gen", "--eps", "1/10", "--s", "5", "--k", "5"]), 1);
    assert_eq!(lab(&["gen", "--eps", "abc", "--s", "5", "--k", "4"]), 1);
    assert_eq!(lab(&["verify", "--preset", "missing"]), 1);
    assert_eq!(lab(&["eval", "--alg", "nope", "--classic", "3"]), 1);
    assert_eq!(lab(&["solve", "--family", "/nonexistent/fam.json"]), 1);
    assert_eq!(lab(&["solve", "--eps", "1/10", "--s", "5", "--k", "4", "--n", "9"]), 1);
}
