use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const TRACE_HEADER: &str = "iter,error,sigma_r_core,leakage_x,leakage_y,weak_opt,eta_used,elapsed_ns";
const VERDICT_HEADER: &str = "run_id,verdict,phase2_slope,termination,align_ok,sigma_bound_ok,quad_contract_ok,weakopt_plateau_ok";

fn mfbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfbench")).args(args).output().expect("spawn mfbench")
}

fn ok(args: &[&str]) -> String {
    let out = mfbench(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], code: i32) -> String {
    let out = mfbench(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stdout));
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().clone();
    rdr.records().map(|r| header.iter().map(String::from).zip(r.unwrap().iter().map(String::from)).collect()).collect()
}

/// run_id → verdict from a verdicts.csv
fn verdicts(dir: &Path) -> HashMap<String, String> {
    csv_rows(&dir.join("verdicts.csv")).into_iter().map(|r| (r["run_id"].clone(), r["verdict"].clone())).collect()
}

#[test]
fn trace_and_verdict_schema() {
    let tmp = TempDir::new().unwrap();
    ok(&["run", "--regime", "ep", "--repeats", "2", "--label", "ep", "--out", s(tmp.path())]);
    for seed in 0..2 {
        let text = fs::read_to_string(tmp.path().join(format!("ep-s{seed}.csv"))).unwrap();
        let mut lines = text.lines();
        let config = lines.next().unwrap();
        assert!(config.starts_with("# config: label=ep kind=sym m=100 "), "{config}");
        assert!(config.contains(&format!(" seed={seed} ")), "repeat seeds are base + index: {config}");
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        for (t, line) in lines.enumerate() {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 8, "{line}");
            assert_eq!(cols[0], t.to_string());
            assert_eq!(cols[4], "", "symmetric runs leave leakage_y empty");
            for c in [1, 2, 3, 5, 6] {
                let mantissa = cols[c].split('e').next().unwrap().trim_start_matches('-');
                assert_eq!(mantissa.len(), 18, "17 significant digits: {}", cols[c]);
            }
        }
    }
    let text = fs::read_to_string(tmp.path().join("verdicts.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(VERDICT_HEADER));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn asymmetric_traces_fill_leakage_y() {
    let tmp = TempDir::new().unwrap();
    ok(&["run", "--kind", "asym", "--m", "30", "--n", "20", "--spectrum", "geom:5,10", "--r", "5", "--out", s(tmp.path())]);
    let text = fs::read_to_string(tmp.path().join("run-s0.csv")).unwrap();
    let row = text.lines().nth(3).unwrap();
    assert!(!row.split(',').nth(4).unwrap().is_empty(), "{row}");
}

#[test]
fn fig1a_verdicts() {
    let tmp = TempDir::new().unwrap();
    ok(&["run", "--preset", "fig1a", "--out", s(tmp.path())]);
    let v = verdicts(tmp.path());
    assert_eq!(v.len(), 3);
    assert!(["sublinear", "linear"].contains(&v["fig1a-gd-small-s0"].as_str()), "{v:?}");
    assert_eq!(v["fig1a-scaledgd-small-s0"], "linear");
    assert_eq!(v["fig1a-scaledgd-nystrom-s0"], "quadratic");
}

#[test]
fn fig5a_verdicts() {
    let tmp = TempDir::new().unwrap();
    ok(&["run", "--preset", "fig5a", "--out", s(tmp.path())]);
    let v = verdicts(tmp.path());
    assert_eq!(v["fig5a-scaledgd-lambda-s0"], "linear");
    assert_eq!(v["fig5a-scaledgd-nystrom-s0"], "quadratic");
    let row = csv_rows(&tmp.path().join("verdicts.csv")).into_iter().find(|r| r["run_id"] == "fig5a-scaledgd-nystrom-s0").unwrap();
    assert_eq!(row["align_ok"], "pass");
    assert_eq!(row["quad_contract_ok"], "pass");
    assert_eq!(row["weakopt_plateau_ok"], "n/a");
}

#[test]
fn unconverged_run_still_exits_zero() {
    let tmp = TempDir::new().unwrap();
    ok(&["run", "--regime", "ep", "--max-iters", "2", "--out", s(tmp.path())]);
    let row = &csv_rows(&tmp.path().join("verdicts.csv"))[0];
    assert_eq!(row["termination"], "budget");
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let err = fails(&["run", "--set", "colour=red", "--out", s(tmp.path())], 2);
    assert!(err.contains("colour"), "{err}");

    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "m=50\nwobble=3\n").unwrap();
    let err = fails(&["run", "--config", s(&conf)], 2);
    assert!(err.contains("wobble"), "{err}");

    let err = fails(&["run", "--m", "many"], 2);
    assert!(err.contains("'m'"), "{err}");
    fails(&["run", "--preset", "fig9"], 2);
    let err = fails(&["sweep", "--regime", "ep", "--out", s(tmp.path())], 2);
    assert!(err.contains("empty"), "{err}");
    fails(&["sweep", "--grid", "xi=", "--out", s(tmp.path())], 2);
    fails(&["sweep", "--grid", "xi=1", "--grid", "r=1", "--grid", "m=5", "--grid", "tol=1", "--out", s(tmp.path())], 2);
    // validation happens before any cell runs
    let out = tmp.path().join("never");
    fails(&["sweep", "--grid", "r=5,0", "--out", s(&out)], 2);
    assert!(!out.exists());
}

#[test]
fn io_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    fails(&["run", "--max-iters", "1", "--out", s(&blocker.join("sub"))], 3);
}

#[test]
fn ep_sweeps() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("xi");
    ok(&["sweep", "--regime", "ep", "--grid", "xi=0.1,1,10", "--out", s(&out)]);
    let rows = csv_rows(&out.join("summary.csv"));
    let xis: Vec<&str> = rows.iter().map(|r| r["xi"].as_str()).collect();
    assert_eq!(xis, ["0.1", "1", "10"], "grid order");
    assert!(rows.iter().all(|r| r["verdict"] == "quadratic"), "{rows:?}");
    assert!(rows.iter().all(|r| r["plateau"].is_empty()));
    for (i, r) in rows.iter().enumerate() {
        assert!(out.join(format!("run-c{i}-s0.csv")).exists(), "{r:?}");
    }

    let out = tmp.path().join("xin");
    ok(&["sweep", "--regime", "ep", "--init", "perturbed", "--grid", "xi_n=0,1e-6", "--out", s(&out)]);
    let verdicts: Vec<String> = csv_rows(&out.join("summary.csv")).into_iter().map(|r| r["verdict"].clone()).collect();
    assert_eq!(verdicts, ["quadratic", "linear"]);
}

#[test]
fn up_step_sweep_plateaus_drop_with_eta() {
    let tmp = TempDir::new().unwrap();
    ok(&["sweep", "--regime", "up", "--horizon", "30", "--grid", "eta=0.5,0.1,0.01", "--out", s(tmp.path())]);
    let text = fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "cell,label,eta,seed,final_error,final_weak_opt,plateau,verdict,phase2_slope,termination"
    );
    let plateaus: Vec<f64> = csv_rows(&tmp.path().join("summary.csv")).iter().map(|r| r["plateau"].parse().unwrap()).collect();
    assert_eq!(plateaus.len(), 3);
    assert!(plateaus[0] > plateaus[1] && plateaus[1] > plateaus[2], "{plateaus:?}");
}

#[test]
fn multi_axis_grid_order() {
    let tmp = TempDir::new().unwrap();
    let out = ok(&[
        "sweep", "--m", "20", "--spectrum", "list:1,0.5", "--r", "2", "--max-iters", "3", "--grid", "xi=1,2",
        "--grid", "schedule=fixed:0.5;fixed:0.25", "--out", s(tmp.path()),
    ]);
    let cells: Vec<&str> = out.lines().map(|l| l.split(" run-").next().unwrap()).collect();
    assert_eq!(
        cells,
        [
            "cell 0 [xi=1 schedule=fixed:0.5]",
            "cell 1 [xi=1 schedule=fixed:0.25]",
            "cell 2 [xi=2 schedule=fixed:0.5]",
            "cell 3 [xi=2 schedule=fixed:0.25]",
        ]
    );
}

fn ep_trace(dir: &Path, label: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["run", "--regime", "ep", "--label", label, "--out", s(dir)];
    args.extend_from_slice(extra);
    ok(&args);
    dir.join(format!("{label}-s0.csv"))
}

#[test]
fn report_sections() {
    let tmp = TempDir::new().unwrap();
    let quad = ep_trace(tmp.path(), "quad", &[]);
    let lin = ep_trace(tmp.path(), "lin", &["--init", "perturbed", "--xi-n", "1e-6"]);
    let before = fs::read(&quad).unwrap();

    let text = ok(&["report", s(&quad)]);
    assert!(text.contains("verdict: quadratic"), "{text}");
    assert!(text.contains("termination: converged"), "{text}");
    assert_eq!(fs::read(&quad).unwrap(), before, "report must not touch its inputs");

    let text = ok(&["report", s(&lin), s(&quad)]);
    let heads: Vec<&str> = text.lines().filter(|l| l.starts_with("== ")).collect();
    assert_eq!(heads, [format!("== {}", lin.display()), format!("== {}", quad.display())]);
    let (first, second) = text.split_at(text.find(&format!("== {}", quad.display())).unwrap());
    assert!(first.contains("verdict: linear"), "{first}");
    assert!(second.contains("verdict: quadratic"), "{second}");
}

#[test]
fn report_io_errors_name_file_and_line() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let err = fails(&["report", s(&empty)], 3);
    assert!(err.contains(&format!("{}:1", empty.display())), "{err}");

    let good = ep_trace(tmp.path(), "g", &["--max-iters", "4"]);
    let mut text = fs::read_to_string(&good).unwrap();
    text = text.replacen("\n3,", "\n3,oops,", 1);
    let bad = tmp.path().join("bad.csv");
    fs::write(&bad, text).unwrap();
    let err = fails(&["report", s(&bad)], 3);
    // config line, header, then iterations 0..: iteration 3 sits on line 6
    assert!(err.contains(&format!("{}:6: expected 8 fields, found 9", bad.display())), "{err}");

    let missing = tmp.path().join("missing.csv");
    let err = fails(&["report", s(&good), s(&missing)], 3);
    assert!(err.contains("missing.csv"), "{err}");
}

#[test]
fn nora_toy() {
    let tmp = TempDir::new().unwrap();
    let stdout = ok(&["nora", "--variant", "nora+", "--label", "toy", "--out", s(tmp.path())]);
    assert!(stdout.contains("termination=converged"), "{stdout}");
    let text = fs::read_to_string(tmp.path().join("toy-s100.csv")).unwrap();
    assert!(text.starts_with("# config: label=toy variant=nora+ "));
    assert_eq!(text.lines().nth(1), Some(TRACE_HEADER));
    let v = &csv_rows(&tmp.path().join("verdicts.csv"))[0];
    assert_eq!(v["verdict"], "linear");
    assert_eq!(v["align_ok"], "n/a");

    // a NoRA trace can be reported on like any other
    let text = ok(&["report", s(&tmp.path().join("toy-s100.csv"))]);
    assert!(text.contains("verdict: linear"), "{text}");
    fails(&["nora", "--variant", "lora"], 2);
}
