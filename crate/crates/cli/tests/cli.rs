use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn symcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symcl")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = symcl(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, seed: &str) {
    ok(&["simulate", "--K", "3", "--N", "120", "--sigma", "300,0,300", "--seed", seed, "--out-dir", p(dir)]);
}

#[test]
fn simulate_is_reproducible_and_writes_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate(a.path(), "7");
    simulate(b.path(), "7");
    for f in ["sites.csv", "data.csv", "simulation.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let data = fs::read_to_string(a.path().join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 121);
    assert_eq!(data.lines().next().unwrap(), "s1,s2,s3");

    let m = json(&a.path().join("manifest.json"));
    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 7);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
    for o in m["outputs"].as_array().unwrap() {
        assert_eq!(o["sha256"].as_str().unwrap().len(), 64);
    }
    assert!(m["timings"]["simulate"].as_f64().unwrap() >= 0.0);

    let c = tempfile::tempdir().unwrap();
    simulate(c.path(), "8");
    assert_ne!(data, fs::read_to_string(c.path().join("data.csv")).unwrap());
}

#[test]
fn missing_sigma_is_a_usage_error() {
    let out = symcl(&["simulate", "--K", "3", "--N", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma"));
}

#[test]
fn aggregate_fit_variance_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "3");
    let data = d.join("data.csv");
    let sites = d.join("sites.csv");

    let h1 = d.join("h1.json");
    ok(&["aggregate", p(&data), "--bins", "10", "--T", "1", "-o", p(&h1)]);
    let h = json(&h1);
    assert_eq!(h["histograms"].as_array().unwrap().len(), 1);
    let total: u64 = h["histograms"][0]["counts"].as_array().unwrap().iter().map(|c| c["n"].as_u64().unwrap()).sum();
    assert_eq!(total, 120);
    assert!(d.join("h1.manifest.json").exists());

    let hn = d.join("hn.json");
    ok(&["aggregate", p(&data), "--bins", "10", "--T", "120", "-o", p(&hn)]);
    for rec in json(&hn)["histograms"].as_array().unwrap() {
        let counts = rec["counts"].as_array().unwrap();
        assert_eq!(counts.len(), 1);
        assert_eq!(counts[0]["n"], 1);
    }

    let fit = d.join("fit.json");
    ok(&["fit", p(&h1), "--sites", p(&sites), "--order", "2", "-o", p(&fit)]);
    let f = json(&fit);
    assert_eq!(f["theta_hat"].as_array().unwrap().len(), 6);
    assert_eq!(f["metadata"]["mode"], "symbolic");

    // The fit merges histograms first, so T does not change the estimate.
    let fit_n = d.join("fit_n.json");
    ok(&["fit", p(&hn), "--sites", p(&sites), "-o", p(&fit_n)]);
    assert_eq!(f["theta_hat"], json(&fit_n)["theta_hat"]);

    let var = d.join("var.json");
    ok(&["variance", "--fit", p(&fit), p(&hn), "--sites", p(&sites), "-o", p(&var)]);
    let v = json(&var);
    let se = v["std_errors"].as_array().unwrap();
    assert_eq!(se.len(), 6);
    assert!(se.iter().all(|s| s.as_f64().unwrap() > 0.0));
    let vm = json(&d.join("var.manifest.json"));
    assert!(vm["timings"]["variance"].as_f64().is_some());

    let out = d.join("report");
    ok(&[
        "report",
        "--fit",
        p(&fit),
        "--sites",
        p(&sites),
        "--data",
        p(&data),
        "--terms",
        "936,105,2,25",
        "--replicates",
        p(&fit),
        p(&fit_n),
        "--out-dir",
        p(&out),
    ]);
    let levels = fs::read_to_string(out.join("return_levels.csv")).unwrap();
    assert_eq!(levels.lines().count(), 4);
    let qq = fs::read_to_string(out.join("qq.csv")).unwrap();
    assert_eq!(qq.lines().count(), 1 + 3 * 120);
    let terms = fs::read_to_string(out.join("term_counts.csv")).unwrap();
    assert!(terms.contains("5110560") && terms.contains("3412500"));
    let reps = fs::read_to_string(out.join("replicates.csv")).unwrap();
    assert_eq!(reps.lines().count(), 7);
}

#[test]
fn fit_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "11");
    let h = d.join("h.json");
    ok(&["aggregate", p(&d.join("data.csv")), "--bins", "8", "-o", p(&h)]);
    let a = d.join("a.json");
    let b = d.join("b.json");
    ok(&["fit", p(&h), "--sites", p(&d.join("sites.csv")), "--threads", "1", "-o", p(&a)]);
    ok(&["fit", p(&h), "--sites", p(&d.join("sites.csv")), "--threads", "1", "-o", p(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(json(&d.join("a.manifest.json"))["threads"], 1);
}

#[test]
fn classic_fit_and_triplewise() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "5");
    let sites = d.join("sites.csv");
    let out = d.join("c.json");
    ok(&["fit", "--classic", p(&d.join("data.csv")), "--sites", p(&sites), "--max-iter", "200", "-o", p(&out)]);
    assert_eq!(json(&out)["metadata"]["mode"], "classic");

    let h = d.join("h.json");
    ok(&["aggregate", p(&d.join("data.csv")), "--bins", "6", "-o", p(&h)]);
    let t = d.join("t.json");
    ok(&["fit", p(&h), "--sites", p(&sites), "--order", "3", "--max-iter", "300", "-o", p(&t)]);
    assert_eq!(json(&t)["metadata"]["order"], 3);
}

#[test]
fn preprocessing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "2");
    let h = d.join("h.json");
    ok(&["aggregate", p(&d.join("data.csv")), "--bins", "5", "--block-len", "15", "--detrend", "-o", p(&h)]);
    let v = json(&h);
    assert_eq!(v["meta"]["rows"], 8);
    assert_eq!(v["meta"]["detrend"], true);
}

#[test]
fn data_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = d.join("bad.csv");
    fs::write(&bad, "s1,s2\n1.0,nan\n").unwrap();
    let out = symcl(&["aggregate", p(&bad), "-o", p(&d.join("h.json"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));

    let out = symcl(&["aggregate", p(&d.join("missing.csv")), "-o", p(&d.join("h.json"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn mismatched_sites_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    simulate(d, "4");
    let h = d.join("h.json");
    ok(&["aggregate", p(&d.join("data.csv")), "--bins", "5", "-o", p(&h)]);
    let sites = d.join("other.csv");
    fs::write(&sites, "id,x,y\na,0,0\nb,1,1\nc,2,5\n").unwrap();
    let out = symcl(&["fit", p(&h), "--sites", p(&sites), "-o", p(&d.join("f.json"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bench_writes_timing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    ok(&["bench", "--K", "3", "--N", "100", "--bins", "8", "--max-iter", "50", "-o", p(&out)]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,k,bins,histograms,t_s,t_c,t_hist,iterations_s,iterations_c");
    assert!(lines.next().unwrap().starts_with("100,3,8,1,"));
}
